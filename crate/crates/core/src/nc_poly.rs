//! Noncommutative polynomials, their derivatives and their expectations under
//! semicircular and q-Gaussian laws.
//!
//! Variables are indexed from 0 and written `t1, t2, ...` in the text form.
//! Polynomials with different variable counts may be combined; the result
//! lives in the larger set of variables.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{invalid, shape, Error, Result};
use crate::nc_combinatorics::weighted_pairing_sum;
use crate::spd::SpdCovariance;

pub type Word = Vec<usize>;

/// Largest monomial degree whose expectation is evaluated.
pub const MAX_EXPECTATION_DEGREE: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NcPolynomial {
    n_vars: usize,
    terms: BTreeMap<Word, Complex64>,
}

fn accumulate<K: Ord>(map: &mut BTreeMap<K, Complex64>, key: K, c: Complex64) {
    if c == ZERO {
        return;
    }
    match map.entry(key) {
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if *e.get() == ZERO {
                e.remove();
            }
        }
        Entry::Vacant(e) => {
            e.insert(c);
        }
    }
}

impl NcPolynomial {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: Complex64) -> Self {
        let mut p = Self::zero(n_vars);
        accumulate(&mut p.terms, Vec::new(), c);
        p
    }

    pub fn var(n_vars: usize, i: usize) -> Result<Self> {
        Self::monomial(n_vars, vec![i], ONE)
    }

    pub fn monomial(n_vars: usize, word: Word, c: Complex64) -> Result<Self> {
        if let Some(&bad) = word.iter().find(|&&v| v >= n_vars) {
            return Err(invalid(format!("variable index {bad} outside 0..{n_vars}")));
        }
        let mut p = Self::zero(n_vars);
        accumulate(&mut p.terms, word, c);
        Ok(p)
    }

    pub fn from_terms<I: IntoIterator<Item = (Word, Complex64)>>(
        n_vars: usize,
        terms: I,
    ) -> Result<Self> {
        let mut p = Self::zero(n_vars);
        for (w, c) in terms {
            p = p.add(&Self::monomial(n_vars, w, c)?);
        }
        Ok(p)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, word: &[usize]) -> Complex64 {
        self.terms.get(word).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.n_vars = self.n_vars.max(other.n_vars);
        for (w, &c) in &other.terms {
            accumulate(&mut out.terms, w.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (w, &v) in &self.terms {
            accumulate(&mut out.terms, w.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n_vars.max(other.n_vars));
        for (a, &x) in &self.terms {
            for (b, &y) in &other.terms {
                let mut w = a.clone();
                w.extend_from_slice(b);
                accumulate(&mut out.terms, w, x * y);
            }
        }
        out
    }

    /// Reverses every word and conjugates coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (w, &c) in &self.terms {
            accumulate(&mut out.terms, w.iter().rev().copied().collect(), c.conj());
        }
        out
    }

    /// `D_j m = sum over m = a t_j b of b a`.
    pub fn cyclic_derivative(&self, j: usize) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (w, &c) in &self.terms {
            for (p, _) in w.iter().enumerate().filter(|(_, &v)| v == j) {
                let mut ba = w[p + 1..].to_vec();
                ba.extend_from_slice(&w[..p]);
                accumulate(&mut out.terms, ba, c);
            }
        }
        out
    }

    /// `∂_j m = sum over m = a t_j b of a ⊗ b`.
    pub fn difference_quotient(&self, j: usize) -> NcBiPolynomial {
        let mut out = NcBiPolynomial::zero(self.n_vars);
        for (w, &c) in &self.terms {
            for (p, _) in w.iter().enumerate().filter(|(_, &v)| v == j) {
                accumulate(&mut out.terms, (w[..p].to_vec(), w[p + 1..].to_vec()), c);
            }
        }
        out
    }

    pub fn expectation(&self, law: &FamilyLaw) -> Result<Complex64> {
        self.terms
            .iter()
            .try_fold(ZERO, |acc, (w, &c)| Ok(acc + c * law.word_moment(w)?))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other)
            .terms
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Parses the text form, forcing the variable count to `n_vars`.
    pub fn parse_with_vars(text: &str, n_vars: usize) -> Result<Self> {
        let mut p: Self = text.parse()?;
        if p.n_vars > n_vars {
            return Err(Error::Parse(format!(
                "`{text}` uses t{} but only {n_vars} variables exist",
                p.n_vars
            )));
        }
        p.n_vars = n_vars;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NcBiPolynomial {
    n_vars: usize,
    terms: BTreeMap<(Word, Word), Complex64>,
}

impl NcBiPolynomial {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Word, Word), &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `a ⊗ b ↦ b a`.
    pub fn flip_multiply(&self) -> NcPolynomial {
        let mut out = NcPolynomial::zero(self.n_vars);
        for ((a, b), &c) in &self.terms {
            let mut w = b.clone();
            w.extend_from_slice(a);
            accumulate(&mut out.terms, w, c);
        }
        out
    }

    /// `a ⊗ b ↦ a b`.
    pub fn multiply(&self) -> NcPolynomial {
        let mut out = NcPolynomial::zero(self.n_vars);
        for ((a, b), &c) in &self.terms {
            let mut w = a.clone();
            w.extend_from_slice(b);
            accumulate(&mut out.terms, w, c);
        }
        out
    }

    /// `(τ ⊗ τ)` of the bi-polynomial.
    pub fn expectation(&self, law: &FamilyLaw) -> Result<Complex64> {
        self.terms.iter().try_fold(ZERO, |acc, ((a, b), &c)| {
            Ok(acc + c * law.word_moment(a)? * law.word_moment(b)?)
        })
    }
}

/// Jacobian matrix `(∂_j p_i)_{ij}` of a tuple of polynomials.
pub fn jacobian(ps: &[NcPolynomial]) -> Result<Vec<Vec<NcBiPolynomial>>> {
    let n = ps.iter().map(NcPolynomial::n_vars).max().unwrap_or(0);
    if ps.iter().any(|p| p.n_vars != n) {
        return Err(shape(
            "all polynomials of a tuple must share the variable count",
        ));
    }
    Ok(ps
        .iter()
        .map(|p| (0..n).map(|j| p.difference_quotient(j)).collect())
        .collect())
}

/// Law of a centred family `(t_1, .., t_n)` with covariance `C`.
#[derive(Clone, Debug)]
pub enum FamilyLaw {
    /// Free semicircular family: moments sum over non-crossing pairings.
    Semicircular(SpdCovariance),
    /// q-Gaussian family: all pairings, weighted by `q^{crossings}`.
    QGaussian { covariance: SpdCovariance, q: f64 },
}

impl FamilyLaw {
    pub fn covariance(&self) -> &SpdCovariance {
        match self {
            FamilyLaw::Semicircular(c) => c,
            FamilyLaw::QGaussian { covariance, .. } => covariance,
        }
    }

    pub fn word_moment(&self, word: &[usize]) -> Result<f64> {
        let c = self.covariance();
        if word.len() > MAX_EXPECTATION_DEGREE {
            return Err(Error::SizeLimit(format!(
                "degree {} exceeds {MAX_EXPECTATION_DEGREE}",
                word.len()
            )));
        }
        if let Some(&bad) = word.iter().find(|&&v| v >= c.dim()) {
            return Err(invalid(format!(
                "variable index {bad} outside 0..{}",
                c.dim()
            )));
        }
        let q = match self {
            FamilyLaw::Semicircular(_) => None,
            FamilyLaw::QGaussian { q, .. } => {
                if !(-1.0..=1.0).contains(q) {
                    return Err(Error::Domain(format!("q = {q} outside [-1, 1]")));
                }
                Some(*q)
            }
        };
        weighted_pairing_sum(word.len(), q, |a, b| c.get(word[a], word[b]))
    }
}

/// Largest violation over `j` of the conjugate-variable relation
/// `τ((C^{-1} T)_j P_j) = (τ ⊗ τ)(∂_j P_j)` for a semicircular family.
pub fn schwinger_dyson_residual(ps: &[NcPolynomial], covariance: &SpdCovariance) -> Result<f64> {
    let n = covariance.dim();
    if ps.len() != n {
        return Err(shape(format!(
            "{} polynomials for a family of {n} variables",
            ps.len()
        )));
    }
    if let Some(p) = ps.iter().find(|p| p.n_vars > n) {
        return Err(shape(format!(
            "polynomial in {} variables for a family of {n}",
            p.n_vars
        )));
    }
    let law = FamilyLaw::Semicircular(covariance.clone());
    let inv = covariance.inverse();
    let mut worst: f64 = 0.0;
    for (j, p) in ps.iter().enumerate() {
        let mut xi = NcPolynomial::zero(n);
        for i in 0..n {
            xi = xi.add(&NcPolynomial::var(n, i)?.scale(Complex64::new(inv[(j, i)], 0.0)));
        }
        let lhs = xi.mul(p).expectation(&law)?;
        let rhs = p.difference_quotient(j).expectation(&law)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

fn write_coefficient(f: &mut fmt::Formatter<'_>, c: Complex64) -> fmt::Result {
    if c.im >= 0.0 {
        write!(f, "({}+{}i)", c.re, c.im)
    } else {
        write!(f, "({}-{}i)", c.re, -c.im)
    }
}

impl fmt::Display for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (w, &c)) in self.terms.iter().enumerate() {
            let negative = c.im == 0.0 && c.re < 0.0;
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let c = if negative { -c } else { c };
            let unit = c == ONE && !w.is_empty();
            if !unit {
                if c.im == 0.0 {
                    write!(f, "{}", c.re)?;
                } else {
                    write_coefficient(f, c)?;
                }
            }
            for (k, v) in w.iter().enumerate() {
                if k > 0 || !unit {
                    write!(f, "*")?;
                }
                write!(f, "t{}", v + 1)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Token {
    Real(f64),
    Imag(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Caret,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let single = match ch {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '^' => Some(Token::Caret),
            '(' => Some(Token::Open),
            ')' => Some(Token::Close),
            'i' => Some(Token::Imag(1.0)),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(tok);
            i += 1;
            continue;
        }
        match ch {
            c if c.is_whitespace() => i += 1,
            't' => {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && chars[end].is_ascii_digit() {
                    end += 1;
                }
                let digits: String = chars[start..end].iter().collect();
                let k: usize = digits
                    .parse()
                    .map_err(|_| Error::Parse(format!("variable at offset {i} needs an index")))?;
                if k == 0 {
                    return Err(Error::Parse("variables are numbered from t1".into()));
                }
                out.push(Token::Var(k - 1));
                i = end;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
                if i < chars.len() && chars[i] == 'i' {
                    out.push(Token::Imag(v));
                    i += 1;
                } else {
                    out.push(Token::Real(v));
                }
            }
            other => {
                return Err(Error::Parse(format!(
                    "unexpected character `{other}` at offset {i}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<NcPolynomial> {
        let mut acc = NcPolynomial::zero(0);
        let mut sign = ONE;
        match self.peek() {
            Some(Token::Minus) => {
                sign = -ONE;
                self.pos += 1;
            }
            Some(Token::Plus) => self.pos += 1,
            _ => {}
        }
        loop {
            acc = acc.add(&self.term()?.scale(sign));
            match self.peek() {
                Some(Token::Plus) => sign = ONE,
                Some(Token::Minus) => sign = -ONE,
                _ => return Ok(acc),
            }
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<NcPolynomial> {
        let mut acc = self.factor()?;
        while self.peek() == Some(Token::Star) {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<NcPolynomial> {
        let tok = self
            .peek()
            .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        let base = match tok {
            Token::Real(v) => NcPolynomial::constant(0, Complex64::new(v, 0.0)),
            Token::Imag(v) => NcPolynomial::constant(0, Complex64::new(0.0, v)),
            Token::Var(k) => NcPolynomial::monomial(k + 1, vec![k], ONE)?,
            Token::Open => {
                let inner = self.expr()?;
                if self.peek() != Some(Token::Close) {
                    return Err(Error::Parse("missing `)`".into()));
                }
                self.pos += 1;
                inner
            }
            Token::Minus => return Ok(self.factor()?.scale(-ONE)),
            other => return Err(Error::Parse(format!("unexpected token {other:?}"))),
        };
        if self.peek() == Some(Token::Caret) {
            self.pos += 1;
            let Some(Token::Real(e)) = self.peek() else {
                return Err(Error::Parse(
                    "`^` needs a non-negative integer exponent".into(),
                ));
            };
            self.pos += 1;
            if e < 0.0 || e.fract() != 0.0 {
                return Err(Error::Parse(format!("bad exponent {e}")));
            }
            let mut out = NcPolynomial::constant(base.n_vars, ONE);
            for _ in 0..e as usize {
                out = out.mul(&base);
            }
            return Ok(out);
        }
        Ok(base)
    }
}

impl FromStr for NcPolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        if tokens.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let p = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Parse(format!(
                "trailing input after token {}",
                parser.pos
            )));
        }
        Ok(p)
    }
}
