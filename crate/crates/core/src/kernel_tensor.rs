//! Discretized kernels of multiple Wigner integrals.
//!
//! A kernel of order `n` is a step function on `[0, T]^n`, constant on the
//! cells of a uniform grid with `grid` cells of width `h` per axis. Entries are
//! stored row-major, the first variable varying slowest. Because kernels are
//! step functions, inner products, contractions and pairing integrals are
//! exact finite sums weighted by powers of `h`.

use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cmatrix::CMatrix;
use crate::error::{invalid, shape, Error, Result};
use crate::nc_combinatorics::PairPartition;

/// Largest number of entries a single kernel may hold.
pub const MAX_KERNEL_ENTRIES: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    order: usize,
    grid: usize,
    h: f64,
    entries: Vec<Complex64>,
}

pub(crate) fn checked_len(order: usize, grid: usize) -> Result<usize> {
    let mut len: usize = 1;
    for _ in 0..order {
        len = len
            .checked_mul(grid)
            .filter(|&l| l <= MAX_KERNEL_ENTRIES)
            .ok_or_else(|| {
                Error::SizeLimit(format!(
                    "kernel of order {order} on {grid} cells exceeds {MAX_KERNEL_ENTRIES} entries"
                ))
            })?;
    }
    Ok(len)
}

fn advance(idx: &mut [usize], grid: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < grid {
            return true;
        }
        *d = 0;
    }
    false
}

/// Maps a flat index of `p` base-`grid` digits to the index of its reversed digits.
fn reversal_table(p: usize, grid: usize) -> Vec<usize> {
    let len = grid.pow(p as u32);
    (0..len)
        .map(|mut c| {
            let mut r = 0;
            for _ in 0..p {
                r = r * grid + c % grid;
                c /= grid;
            }
            r
        })
        .collect()
}

impl Kernel {
    pub fn new(order: usize, grid: usize, h: f64, entries: Vec<Complex64>) -> Result<Self> {
        if grid == 0 {
            return Err(invalid("grid must have at least one cell"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!(
                "cell width must be positive and finite, got {h}"
            )));
        }
        let len = checked_len(order, grid)?;
        if entries.len() != len {
            return Err(shape(format!(
                "order {order} on {grid} cells needs {len} entries, got {}",
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(invalid("kernel entries must be finite"));
        }
        Ok(Self {
            order,
            grid,
            h,
            entries,
        })
    }

    pub fn zeros(order: usize, grid: usize, h: f64) -> Result<Self> {
        let len = checked_len(order, grid)?;
        Self::new(order, grid, h, vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn scalar(value: Complex64, grid: usize, h: f64) -> Result<Self> {
        Self::new(0, grid, h, vec![value])
    }

    /// Builds a kernel from its values at multi-indices of cells.
    pub fn from_fn<F: FnMut(&[usize]) -> Complex64>(
        order: usize,
        grid: usize,
        h: f64,
        mut f: F,
    ) -> Result<Self> {
        let len = checked_len(order, grid)?;
        let mut entries = Vec::with_capacity(len);
        let mut idx = vec![0; order];
        loop {
            entries.push(f(&idx));
            if !advance(&mut idx, grid) {
                break;
            }
        }
        Self::new(order, grid, h, entries)
    }

    /// The unit vector `h^{-1/2} 1_{cell}` of the first chaos.
    pub fn cell_indicator(grid: usize, h: f64, cell: usize) -> Result<Self> {
        if cell >= grid {
            return Err(invalid(format!("cell {cell} outside a grid of {grid}")));
        }
        let v = h.powf(-0.5);
        Self::from_fn(1, grid, h, |i| {
            Complex64::new(if i[0] == cell { v } else { 0.0 }, 0.0)
        })
    }

    /// Tensor product `v_1(t_1) ... v_n(t_n)` of vectors of cell values.
    pub fn rank_one(vectors: &[Vec<Complex64>], h: f64) -> Result<Self> {
        let grid = vectors.first().map_or(1, Vec::len);
        if vectors.iter().any(|v| v.len() != grid) {
            return Err(shape("rank-one factors must share the grid size"));
        }
        Self::from_fn(vectors.len(), grid, h, |idx| {
            idx.iter().zip(vectors).map(|(&i, v)| v[i]).product()
        })
    }

    /// Standard complex (or real) Gaussian entries.
    pub fn random<R: Rng + ?Sized>(
        order: usize,
        grid: usize,
        h: f64,
        complex: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let len = checked_len(order, grid)?;
        let entries = (0..len)
            .map(|_| {
                if complex {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                } else {
                    Complex64::new(rng.sample(StandardNormal), 0.0)
                }
            })
            .collect();
        Self::new(order, grid, h, entries)
    }

    /// Random mirror-symmetric kernel of unit norm.
    pub fn random_mirror_symmetric<R: Rng + ?Sized>(
        order: usize,
        grid: usize,
        h: f64,
        complex: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let f = Self::random(order, grid, h, complex, rng)?.mirror_symmetrized();
        let n = f.norm();
        Ok(if n > 0.0 {
            f.scale(Complex64::new(1.0 / n, 0.0))
        } else {
            f
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn cell_width(&self) -> f64 {
        self.h
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.grid + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.entries[self.flat_index(idx)]
    }

    /// Value of an order-0 kernel.
    pub fn scalar_value(&self) -> Option<Complex64> {
        (self.order == 0).then(|| self.entries[0])
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    pub fn same_space(&self, other: &Self) -> Result<()> {
        let same_h = (self.h - other.h).abs() <= 1e-12 * self.h.max(other.h);
        if self.grid != other.grid || !same_h {
            return Err(shape(format!(
                "kernels live on different grids ({} cells of {} vs {} cells of {})",
                self.grid, self.h, other.grid, other.h
            )));
        }
        Ok(())
    }

    /// `f*(t_1..t_n) = conj f(t_n..t_1)`.
    pub fn adjoint(&self) -> Self {
        let rev = reversal_table(self.order, self.grid);
        let entries = rev.iter().map(|&r| self.entries[r].conj()).collect();
        Self { entries, ..*self }
    }

    pub fn mirror_symmetrized(&self) -> Self {
        let adj = self.adjoint();
        let entries = self
            .entries
            .iter()
            .zip(&adj.entries)
            .map(|(a, b)| (a + b) * 0.5)
            .collect();
        Self { entries, ..*self }
    }

    pub fn is_mirror_symmetric(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()).is_ok_and(|d| d <= tol)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_space(other)?;
        if self.order != other.order {
            return Err(shape("kernels have different orders"));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `<f, g> = h^n sum conj(f) g`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.same_space(other)?;
        if self.order != other.order {
            return Err(shape(format!(
                "inner product of orders {} and {}",
                self.order, other.order
            )));
        }
        let s: Complex64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.h.powi(self.order as i32))
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(Complex64::norm_sqr).sum::<f64>() * self.h.powi(self.order as i32)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * c).collect(),
            ..*self
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        if self.order != other.order {
            return Err(shape("cannot add kernels of different orders"));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self { entries, ..*self })
    }

    pub(crate) fn add_scaled_in_place(&mut self, other: &Self, c: Complex64) {
        debug_assert_eq!(self.entries.len(), other.entries.len());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b * c;
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `f_t^k`: the kernel with the `slot`-th variable (1-based) frozen in cell `t`.
    pub fn slice(&self, slot: usize, t: usize) -> Result<Self> {
        self.check_slot(slot, t)?;
        let mut full = vec![0; self.order];
        Self::from_fn(self.order - 1, self.grid, self.h, |s| {
            full[..slot - 1].copy_from_slice(&s[..slot - 1]);
            full[slot - 1] = t;
            full[slot..].copy_from_slice(&s[slot - 1..]);
            self.get(&full)
        })
    }

    /// `f~_t^k`, the leg-wise adjoint of `f_t^k`: its first `slot - 1` variables
    /// are the left variables in reverse order, the remaining ones the right
    /// variables in reverse order, and values are conjugated.
    pub fn tilde_slice(&self, slot: usize, t: usize) -> Result<Self> {
        self.check_slot(slot, t)?;
        let n = self.order;
        let mut full = vec![0; n];
        Self::from_fn(n - 1, self.grid, self.h, |w| {
            let (u, v) = w.split_at(slot - 1);
            for (a, &x) in u.iter().rev().enumerate() {
                full[a] = x;
            }
            full[slot - 1] = t;
            for (a, &x) in v.iter().rev().enumerate() {
                full[slot + a] = x;
            }
            self.get(&full).conj()
        })
    }

    fn check_slot(&self, slot: usize, t: usize) -> Result<()> {
        if slot == 0 || slot > self.order {
            return Err(invalid(format!("slot {slot} outside 1..={}", self.order)));
        }
        if t >= self.grid {
            return Err(invalid(format!("cell {t} outside a grid of {}", self.grid)));
        }
        Ok(())
    }

    /// Plain-text form: a header `order grid h` and one `re im` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.order, self.grid, self.h);
        for z in &self.entries {
            let _ = writeln!(out, "{} {}", z.re, z.im);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty kernel file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "kernel header must be `order grid h`, got `{header}`"
            )));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        let order = parse_usize(fields[0])?;
        let grid = parse_usize(fields[1])?;
        let h = fields[2]
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("`{}`: {e}", fields[2])))?;
        let entries = lines
            .enumerate()
            .map(|(i, line)| {
                let nums: Vec<f64> = line
                    .split_whitespace()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("entry {i}: `{s}`: {e}")))
                    })
                    .collect::<Result<_>>()?;
                match nums.as_slice() {
                    [re] => Ok(Complex64::new(*re, 0.0)),
                    [re, im] => Ok(Complex64::new(*re, *im)),
                    _ => Err(Error::Parse(format!("entry {i} must be `re` or `re im`"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order, grid, h, entries)
    }
}

/// `f contracted with g over p variables`, with the reversed pairing of the
/// last `p` variables of `f` against the first `p` of `g`:
/// `(f ⌢^p g)(t, u) = h^p sum_s f(t, s_p, .., s_1) g(s_1, .., s_p, u)`.
/// `p = 0` is the tensor product.
pub fn contract(f: &Kernel, g: &Kernel, p: usize) -> Result<Kernel> {
    f.same_space(g)?;
    if p > f.order.min(g.order) {
        return Err(invalid(format!(
            "contraction of order {p} between kernels of orders {} and {}",
            f.order, g.order
        )));
    }
    let grid = f.grid;
    let order = f.order + g.order - 2 * p;
    checked_len(order, grid)?;
    let inner = grid.pow(p as u32);
    let rows = f.entries.len() / inner;
    let cols = g.entries.len() / inner;
    let rev = reversal_table(p, grid);
    let fm = CMatrix::from_row_major(rows, inner, &f.entries);
    let gm = CMatrix::from_fn(inner, cols, |c, u| g.entries[rev[c] * cols + u]);
    let prod = fm.mul(&gm).scale(f.h.powi(p as i32));
    Kernel::new(order, grid, f.h, prod.to_row_major())
}

pub fn outer(f: &Kernel, g: &Kernel) -> Result<Kernel> {
    contract(f, g, 0)
}

/// Integral of `f_1 ⊗ .. ⊗ f_r` against the pairing of its concatenated variables.
pub fn pairing_integral(fs: &[&Kernel], pairing: &PairPartition) -> Result<Complex64> {
    let Some(first) = fs.first() else {
        return Ok(Complex64::new(1.0, 0.0));
    };
    for f in fs {
        first.same_space(f)?;
    }
    let total: usize = fs.iter().map(|f| f.order).sum();
    if total != pairing.num_points() {
        return Err(shape(format!(
            "kernels carry {total} variables but the pairing has {} points",
            pairing.num_points()
        )));
    }
    let grid = first.grid;
    let n_vars = total / 2;
    let mut var_of_point = vec![0; total];
    for (v, &(a, b)) in pairing.pairs().iter().enumerate() {
        var_of_point[a] = v;
        var_of_point[b] = v;
    }
    let mut slots = Vec::with_capacity(fs.len());
    let mut offset = 0;
    for f in fs {
        slots.push(&var_of_point[offset..offset + f.order]);
        offset += f.order;
    }
    let mut vars = vec![0; n_vars];
    let mut sum = Complex64::new(0.0, 0.0);
    loop {
        let mut term = Complex64::new(1.0, 0.0);
        for (f, s) in fs.iter().zip(&slots) {
            let idx = s.iter().fold(0, |acc, &v| acc * grid + vars[v]);
            term *= f.entries[idx];
            if term == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        sum += term;
        if !advance(&mut vars, grid) {
            break;
        }
    }
    Ok(sum * first.h.powi(n_vars as i32))
}

fn default_true() -> bool {
    true
}

/// Serializable recipe for building a kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Tensor product of real vectors of cell values.
    RankOne { h: f64, vectors: Vec<Vec<f64>> },
    /// Explicit row-major entries, with optional imaginary parts.
    Dense {
        order: usize,
        grid: usize,
        h: f64,
        re: Vec<f64>,
        #[serde(default)]
        im: Option<Vec<f64>>,
    },
    /// Gaussian entries drawn from a seeded generator, optionally
    /// mirror-symmetrized and normalized to unit norm.
    Random {
        order: usize,
        grid: usize,
        h: f64,
        seed: u64,
        #[serde(default)]
        complex: bool,
        #[serde(default = "default_true")]
        mirror_symmetric: bool,
    },
    /// `(f + f*) / 2` of another recipe.
    Symmetrized { base: Box<KernelSpec> },
    /// `factor * f` of another recipe.
    Scaled { factor: f64, base: Box<KernelSpec> },
    /// Kernel stored in the plain-text format.
    File { path: PathBuf },
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelSpec::RankOne { h, vectors } => {
                let vs: Vec<Vec<Complex64>> = vectors
                    .iter()
                    .map(|v| v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                    .collect();
                Kernel::rank_one(&vs, *h)
            }
            KernelSpec::Dense {
                order,
                grid,
                h,
                re,
                im,
            } => {
                let entries = match im {
                    None => re.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                    Some(im) if im.len() == re.len() => re
                        .iter()
                        .zip(im)
                        .map(|(&a, &b)| Complex64::new(a, b))
                        .collect(),
                    Some(_) => return Err(shape("`re` and `im` must have the same length")),
                };
                Kernel::new(*order, *grid, *h, entries)
            }
            KernelSpec::Random {
                order,
                grid,
                h,
                seed,
                complex,
                mirror_symmetric,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                if *mirror_symmetric {
                    Kernel::random_mirror_symmetric(*order, *grid, *h, *complex, &mut rng)
                } else {
                    Kernel::random(*order, *grid, *h, *complex, &mut rng)
                }
            }
            KernelSpec::Symmetrized { base } => Ok(base.build()?.mirror_symmetrized()),
            KernelSpec::Scaled { factor, base } => {
                Ok(base.build()?.scale(Complex64::new(*factor, 0.0)))
            }
            KernelSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Kernel::from_text(&text)
            }
        }
    }
}
