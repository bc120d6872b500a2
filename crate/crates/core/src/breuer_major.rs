//! Free Breuer–Major experiment for the non-commutative fractional Brownian motion.
//!
//! The increments `X_k = S_{k+1} - S_k` form a stationary semicircular
//! sequence with correlation `ρ_H`. Rank-`q` Chebyshev functionals of the
//! increments live in the `q`-th chaos with kernels `c Σ_k e_k^{⊗q}`, so every
//! contraction norm is a trace of products of Toeplitz matrices built from
//! powers of `ρ_H`. Those traces are evaluated exactly in `O(n^2)` by walking
//! the diagonals of the Toeplitz product.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stein_bounds::{psi, SpdCovariance};

/// Largest sample count accepted by the exact trace evaluation.
pub const MAX_EXACT_N: usize = 1 << 16;
pub const MAX_CHEBYSHEV_DEGREE: usize = 12;

/// Beyond this lag `ρ_H` is evaluated from its expansion in `1/r`, which
/// avoids the cancellation in the second difference.
const SERIES_LAG: u64 = 64;
const SERIES_TERMS: usize = 8;

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Domain(format!(
            "Hurst index must lie in (0, 1), got {h}"
        )));
    }
    Ok(())
}

fn binom(alpha: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (alpha - i as f64) / (m - i) as f64)
}

/// Coefficients `b_k = binom(2H, 2k)` with `ρ_H(r) = Σ_{k≥1} b_k r^{2H-2k}`.
fn rho_series(h: f64) -> Vec<f64> {
    (1..=SERIES_TERMS).map(|k| binom(2.0 * h, 2 * k)).collect()
}

fn rho_unchecked(r: i64, h: f64, series: &[f64]) -> f64 {
    let r = r.unsigned_abs();
    if r == 0 {
        return 1.0;
    }
    let x = r as f64;
    if r < SERIES_LAG {
        let p = |y: f64| y.powf(2.0 * h);
        return 0.5 * (p(x + 1.0) + p(x - 1.0) - 2.0 * p(x));
    }
    let u = x.powi(-2);
    let mut acc = 0.0;
    for b in series.iter().rev() {
        acc = acc * u + b;
    }
    acc * x.powf(2.0 * h - 2.0)
}

/// `ρ_H(r) = (|r+1|^{2H} + |r-1|^{2H} - 2|r|^{2H}) / 2`.
pub fn rho_h(r: i64, h: f64) -> Result<f64> {
    check_h(h)?;
    Ok(rho_unchecked(r, h, &rho_series(h)))
}

/// `ρ_H(r)^p` for `r = 0..len`.
fn rho_powers(len: usize, h: f64, p: usize) -> Vec<f64> {
    let series = rho_series(h);
    (0..len)
        .map(|r| rho_unchecked(r as i64, h, &series).powi(p as i32))
        .collect()
}

/// Ascending coefficients of the Chebyshev polynomial of the second kind `U_q`.
pub fn chebyshev_u(q: usize) -> Result<Vec<i64>> {
    if q > MAX_CHEBYSHEV_DEGREE {
        return Err(Error::SizeLimit(format!(
            "Chebyshev degree {q} exceeds {MAX_CHEBYSHEV_DEGREE}"
        )));
    }
    let mut prev = vec![1i64];
    if q == 0 {
        return Ok(prev);
    }
    let mut cur = vec![0, 1];
    for _ in 1..q {
        let mut next = vec![0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(cur)
}

fn check_hypothesis(q: usize, h: f64) -> Result<()> {
    check_h(h)?;
    if q < 2 {
        return Err(invalid(format!(
            "Chebyshev rank must be at least 2, got {q}"
        )));
    }
    if h.is_nan() || h >= 1.0 - 1.0 / (2.0 * q as f64) {
        return Err(Error::Domain(format!(
            "H = {h} violates H < 1 - 1/(2q) for q = {q}"
        )));
    }
    Ok(())
}

/// Hurwitz zeta `Σ_{k≥0} (a + k)^{-s}` by Euler–Maclaurin, for `s > 1` and large `a`.
fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const B2K_OVER_FACT: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut acc = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    for (j, c) in B2K_OVER_FACT.iter().enumerate() {
        acc += c * rising * power;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        power /= a * a;
    }
    acc
}

/// `Σ_{r>R} ρ_H(r)^q` from the expansion `ρ^q = r^{q(2H-2)} Σ_j a_j r^{-2j}`.
fn rho_power_tail(q: usize, h: f64, big_r: u64) -> f64 {
    let b = rho_series(h);
    let mut coeffs = vec![1.0];
    for _ in 0..q {
        let mut next = vec![0.0; SERIES_TERMS];
        for (i, x) in coeffs.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if i + j < SERIES_TERMS {
                    next[i + j] += x * y;
                }
            }
        }
        coeffs = next;
    }
    let s0 = q as f64 * (2.0 - 2.0 * h);
    let a = (big_r + 1) as f64;
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * hurwitz_zeta(s0 + 2.0 * j as f64, a))
        .sum()
}

/// `σ^2 = Σ_{r∈Z} ρ_H(r)^q`.
///
/// The partial sum runs to a lag `R` that doubles until successive
/// estimates (partial sum plus asymptotic tail) agree to `tail_tol`.
pub fn sigma_sq(q: usize, h: f64, tail_tol: f64) -> Result<f64> {
    check_hypothesis(q, h)?;
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(invalid(format!(
            "tail tolerance must be positive, got {tail_tol}"
        )));
    }
    let series = rho_series(h);
    let estimate = |big_r: u64| {
        let partial: f64 = (1..=big_r)
            .map(|r| rho_unchecked(r as i64, h, &series).powi(q as i32))
            .sum();
        1.0 + 2.0 * (partial + rho_power_tail(q, h, big_r))
    };
    let mut big_r = SERIES_LAG;
    let mut prev = estimate(big_r);
    while big_r < 1 << 20 {
        big_r *= 2;
        let next = estimate(big_r);
        if (next - prev).abs() < tail_tol {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// `tr(A B A B)` for symmetric Toeplitz matrices with first columns `a` and `b`.
///
/// Along each diagonal of `P = AB` the entries obey
/// `P_{i+1,j+1} = P_{ij} + a(i+1) b(j+1) - a(n-1-i) b(n-1-j)`.
fn toeplitz_trace_abab(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let diag_sum = |d: usize| -> f64 {
        // Upper entry P_{i,i+d} and lower entry P_{i+d,i}.
        let mut up: f64 = (0..n).map(|k| a[k] * b[k.abs_diff(d)]).sum();
        let mut lo: f64 = (0..n).map(|k| a[k.abs_diff(d)] * b[k]).sum();
        let mut acc = up * lo;
        for i in 0..n - d - 1 {
            let j = i + d;
            up += a[i + 1] * b[j + 1] - a[n - 1 - i] * b[n - 1 - j];
            lo += a[j + 1] * b[i + 1] - a[n - 1 - j] * b[n - 1 - i];
            acc += up * lo;
        }
        if d == 0 {
            acc
        } else {
            2.0 * acc
        }
    };
    let partial: Vec<f64> = (0..n).into_par_iter().map(diag_sum).collect();
    partial.iter().sum()
}

/// `Σ_{k∈A, l∈B} ρ_H(k-l)^q` for index intervals `A` and `B`, where
/// `prefix[m] = Σ_{t<m} ρ_H(t)^q`.
fn block_cross_sum(a: &Range<usize>, b: &Range<usize>, prefix: &[f64]) -> f64 {
    // Sum of ρ(|δ|)^q over δ in lo..=hi.
    let window = |lo: i64, hi: i64| -> f64 {
        let pos = |x: i64| prefix[x as usize];
        if lo >= 0 {
            pos(hi + 1) - pos(lo)
        } else if hi < 0 {
            pos(-lo + 1) - pos(-hi)
        } else {
            pos(-lo + 1) + pos(hi + 1) - prefix[1]
        }
    };
    a.clone()
        .map(|k| {
            let k = k as i64;
            window(k - b.end as i64 + 1, k - b.start as i64)
        })
        .sum()
}

/// `||f ⌢^r f||^2` for `f = c Σ_{k<len} e_k^{⊗q}` in the increment basis:
/// `c^4 tr(A_r B_r A_r B_r)` with `A_r = [ρ(k-l)^r]` and `B_r = [ρ(k-l)^{q-r}]`.
pub fn bm_contraction_norm_sq(q: usize, h: f64, r: usize, len: usize, c: f64) -> Result<f64> {
    check_h(h)?;
    if r == 0 || r >= q {
        return Err(invalid(format!(
            "contraction order must lie in 1..{q}, got {r}"
        )));
    }
    if len > MAX_EXACT_N {
        return Err(Error::SizeLimit(format!(
            "block length {len} exceeds {MAX_EXACT_N}"
        )));
    }
    if len == 0 {
        return Ok(0.0);
    }
    let a = rho_powers(len, h, r);
    let b = rho_powers(len, h, q - r);
    Ok(c.powi(4) * toeplitz_trace_abab(&a, &b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmConfig {
    #[serde(rename = "H")]
    pub h: f64,
    pub q: usize,
    pub n: usize,
    /// `0 = t_0 < t_1 < .. < t_d`.
    pub times: Vec<f64>,
}

impl BmConfig {
    pub fn validate(&self) -> Result<()> {
        check_hypothesis(self.q, self.h)?;
        if self.n == 0 {
            return Err(invalid("sample count must be positive"));
        }
        if self.times.len() < 2 || self.times[0] != 0.0 {
            return Err(invalid(
                "times must start at 0 and contain at least one increment",
            ));
        }
        if self
            .times
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
            || self.times.iter().any(|t| !t.is_finite())
        {
            return Err(invalid("times must be finite and strictly increasing"));
        }
        Ok(())
    }

    /// Increment index ranges `⌊n t_{i-1}⌋..⌊n t_i⌋`.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let idx = |t: f64| (self.n as f64 * t).floor() as usize;
        self.times
            .windows(2)
            .map(|w| idx(w[0])..idx(w[1]))
            .collect()
    }
}

/// Inputs of the bound pipeline for `F_i = (V_n(t_i) - V_n(t_{i-1})) / sqrt(Δt_i)`.
#[derive(Clone, Debug, Serialize)]
pub struct BmVectorReport {
    pub n: usize,
    pub sigma_sq: f64,
    pub scales: Vec<f64>,
    /// `Σ_{r=1}^{q-1} ||f_i ⌢^r f_i||^2`.
    pub fourth_cumulants: Vec<f64>,
    pub second_moments: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub m_of_f: f64,
    pub dw_thm8: f64,
}

pub const SIGMA_TAIL_TOL: f64 = 1e-13;

pub fn bm_vector_report(cfg: &BmConfig) -> Result<BmVectorReport> {
    cfg.validate()?;
    let sigma2 = sigma_sq(cfg.q, cfg.h, SIGMA_TAIL_TOL)?;
    bm_vector_report_with_sigma(cfg, sigma2)
}

fn bm_vector_report_with_sigma(cfg: &BmConfig, sigma2: f64) -> Result<BmVectorReport> {
    let blocks = cfg.blocks();
    if let Some(b) = blocks.iter().find(|b| b.is_empty()) {
        return Err(Error::NotPositiveDefinite(format!(
            "empty increment block {b:?}; increase n"
        )));
    }
    let max_len = blocks.iter().map(|b| b.len()).max().unwrap_or(0);
    if max_len > MAX_EXACT_N {
        return Err(Error::SizeLimit(format!(
            "block length {max_len} exceeds {MAX_EXACT_N}"
        )));
    }
    let scales: Vec<f64> = cfg
        .times
        .windows(2)
        .map(|w| 1.0 / (sigma2 * cfg.n as f64 * (w[1] - w[0])).sqrt())
        .collect();
    let mut prefix = vec![0.0];
    for v in rho_powers(cfg.n + 1, cfg.h, cfg.q) {
        prefix.push(prefix.last().unwrap() + v);
    }
    let d = blocks.len();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let v = scales[i] * scales[j] * block_cross_sum(&blocks[i], &blocks[j], &prefix);
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    let mut fourth = Vec::with_capacity(d);
    for (b, c) in blocks.iter().zip(&scales) {
        let mut x = 0.0;
        for r in 1..cfg.q {
            // ||f ⌢^r f|| = ||f ⌢^{q-r} f|| by symmetry of the Toeplitz factors.
            if 2 * r <= cfg.q {
                let v = bm_contraction_norm_sq(cfg.q, cfg.h, r, b.len(), *c)?;
                x += if 2 * r == cfg.q { v } else { 2.0 * v };
            }
        }
        fourth.push(x);
    }
    let second: Vec<f64> = (0..d).map(|i| cov[i][i]).collect();
    let m = psi(&fourth, &second, &vec![cfg.q; d])?;
    let c = SpdCovariance::from_rows(&cov)?;
    Ok(BmVectorReport {
        n: cfg.n,
        sigma_sq: sigma2,
        scales,
        fourth_cumulants: fourth,
        second_moments: second,
        covariance: cov,
        m_of_f: m,
        dw_thm8: c.op_norm().sqrt() * c.inv_op_norm() * m,
    })
}

/// Exponent of `n` in the distance bound, by regime of `H`.
pub fn theoretical_rate(q: usize, h: f64) -> Result<f64> {
    check_hypothesis(q, h)?;
    let qf = q as f64;
    Ok(if h <= 0.5 {
        -0.25
    } else if h <= (2.0 * qf - 3.0) / (2.0 * qf - 2.0) {
        (h - 1.0) / 2.0
    } else {
        (2.0 * qf * h - 2.0 * qf + 1.0) / 4.0
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub fourth_cumulants: Vec<f64>,
    pub m_of_f: f64,
    pub dw_thm8: f64,
    /// `log2(M(n) / M(n/2))`, absent on the first row.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub q: usize,
    #[serde(rename = "H")]
    pub h: f64,
    pub sigma_sq: f64,
    pub rows: Vec<RateRow>,
    pub last_slope: Option<f64>,
    /// Aitken Δ² extrapolation of the last three slopes.
    pub aitken_slope: Option<f64>,
    pub theoretical_rate: f64,
    pub monotone: bool,
}

/// Aitken Δ² limit estimate from the last three terms of a sequence.
pub fn aitken(s: &[f64]) -> Option<f64> {
    let [a, b, c] = s.get(s.len().checked_sub(3)?..)? else {
        return None;
    };
    let denom = (c - b) - (b - a);
    if denom.abs() < 1e-300 {
        return Some(*c);
    }
    Some(c - (c - b) * (c - b) / denom)
}

/// `M(F_n)` over a dyadic list of sample counts, with log-2 ratio slopes.
pub fn bm_rate_experiment(q: usize, h: f64, times: &[f64], n_list: &[usize]) -> Result<RateReport> {
    check_hypothesis(q, h)?;
    if n_list.is_empty() {
        return Err(invalid("n_list must not be empty"));
    }
    for w in n_list.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(invalid(format!(
                "n_list must be dyadic, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let sigma2 = sigma_sq(q, h, SIGMA_TAIL_TOL)?;
    let mut rows: Vec<RateRow> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let cfg = BmConfig {
            h,
            q,
            n,
            times: times.to_vec(),
        };
        cfg.validate()?;
        let rep = bm_vector_report_with_sigma(&cfg, sigma2)?;
        let slope = rows.last().map(|prev| (rep.m_of_f / prev.m_of_f).log2());
        rows.push(RateRow {
            n,
            fourth_cumulants: rep.fourth_cumulants,
            m_of_f: rep.m_of_f,
            dw_thm8: rep.dw_thm8,
            slope,
        });
    }
    let slopes: Vec<f64> = rows.iter().filter_map(|r| r.slope).collect();
    let monotone = rows.windows(2).all(|w| w[1].m_of_f <= w[0].m_of_f);
    Ok(RateReport {
        q,
        h,
        sigma_sq: sigma2,
        last_slope: slopes.last().copied(),
        aitken_slope: aitken(&slopes),
        theoretical_rate: theoretical_rate(q, h)?,
        monotone,
        rows,
    })
}
