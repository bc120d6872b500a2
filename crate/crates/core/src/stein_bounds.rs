//! Free Malliavin–Stein discrepancies and the bounds built on them.
//!
//! For vectors of Wigner integrals the Malliavin–Stein matrix is computed
//! exactly at kernel level, and its distance to the target covariance is
//! compared with the cumulant-based bound `M(F)`. The module also evaluates
//! the functional inequalities attached to a semicircular target: the
//! Ornstein–Uhlenbeck interpolation covariance, the Fisher information decay,
//! the HSI and log-Sobolev right-hand sides, the q-Gaussian discrepancy and
//! the semicircular entropy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, shape, Error, Result};
use crate::kernel_tensor::{contract, Kernel};
use crate::quad;
pub use crate::spd::SpdCovariance;
use crate::wigner_moments::{fourth_cumulant, MIRROR_TOL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One orthogonal piece `I_{left} ⊗ I_{right}(K_{m,l})` of the Malliavin–Stein entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaTerm {
    pub m: usize,
    pub l: usize,
    pub left_order: usize,
    pub right_order: usize,
    /// `||K_{m,l}||^2`, or `|K_{m,l} - a|^2` for the constant piece.
    pub norm_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaDiscrepancy {
    pub total: f64,
    pub terms: Vec<GammaTerm>,
    /// Whether `a` was absorbed by a constant piece; if not, `a^2` is part of `total`.
    pub has_constant_term: bool,
}

fn require_mirror(f: &Kernel, name: &str) -> Result<()> {
    if !f.is_mirror_symmetric(MIRROR_TOL) {
        return Err(Error::Domain(format!("{name} is not mirror-symmetric")));
    }
    Ok(())
}

/// `|| ∫ (id ⊗ τ)(∇_t I_p(f)) · (∇_t I_q(g))^* dt - a 1 ⊗ 1 ||^2`, exactly.
///
/// The integrand expands as `sum_{m=1}^q sum_l I_{p-1+m-1-2l} ⊗ I_{q-m}` of
/// `f_t^p ⌢^l g~_t^m`, where the contraction acts on the left leg of
/// `g~_t^m`. Distinct `(m, l)` land in orthogonal bi-chaoses, so the squared
/// norm is the sum of the squared kernel norms.
pub fn gamma_discrepancy_sq(f: &Kernel, g: &Kernel, a: f64) -> Result<GammaDiscrepancy> {
    f.same_space(g)?;
    require_mirror(f, "f")?;
    require_mirror(g, "g")?;
    let (p, q) = (f.order(), g.order());
    if p == 0 || q == 0 {
        return Ok(GammaDiscrepancy {
            total: a * a,
            terms: Vec::new(),
            has_constant_term: false,
        });
    }
    let h = f.cell_width();
    let f_slices: Vec<Kernel> = (0..f.grid())
        .map(|t| f.slice(p, t))
        .collect::<Result<_>>()?;
    let mut terms = Vec::new();
    let mut has_constant_term = false;
    let mut total = 0.0;
    for m in 1..=q {
        let g_slices: Vec<Kernel> = (0..g.grid())
            .map(|t| g.tilde_slice(m, t))
            .collect::<Result<_>>()?;
        for l in 0..=(p - 1).min(m - 1) {
            let left_order = p - 1 + m - 1 - 2 * l;
            let right_order = q - m;
            let mut k = Kernel::zeros(left_order + right_order, f.grid(), h)?;
            for (fs, gs) in f_slices.iter().zip(&g_slices) {
                k.add_scaled_in_place(&contract(fs, gs, l)?, Complex64::new(h, 0.0));
            }
            let norm_sq = if left_order == 0 && right_order == 0 {
                has_constant_term = true;
                (k.scalar_value().unwrap_or(ZERO) - a).norm_sqr()
            } else {
                k.norm_sq()
            };
            total += norm_sq;
            terms.push(GammaTerm {
                m,
                l,
                left_order,
                right_order,
                norm_sq,
            });
        }
    }
    if !has_constant_term {
        total += a * a;
    }
    Ok(GammaDiscrepancy {
        total,
        terms,
        has_constant_term,
    })
}

/// `A^{p,l}_{f,g} = ||f ⌢^{p-l-1} f|| ||g||^2`.
fn a_term(f: &Kernel, p: usize, l: usize, g: &Kernel) -> Result<f64> {
    if l + 1 > p {
        return Err(invalid(format!("A^{{{p},{l}}} needs l < p")));
    }
    let r = p - l - 1;
    if r > f.order() {
        return Err(invalid(format!(
            "contraction of order {r} on a kernel of order {}",
            f.order()
        )));
    }
    Ok(contract(f, f, r)?.norm() * g.norm_sq())
}

/// Cumulant-type upper bound for [`gamma_discrepancy_sq`], split on whether
/// the two orders agree. When `p > q` the roles of `f` and `g` are exchanged.
pub fn lemma8_rhs(f: &Kernel, g: &Kernel, a: f64) -> Result<f64> {
    f.same_space(g)?;
    require_mirror(f, "f")?;
    require_mirror(g, "g")?;
    let (p, q) = (f.order(), g.order());
    if p > q {
        return lemma8_rhs(g, f, a);
    }
    if p == 0 {
        return Ok(a * a);
    }
    let mut rhs;
    if p == q {
        let c = f.inner(g)?.re;
        rhs = (a - c) * (a - c);
        for m in 1..p {
            for l in 0..m {
                rhs += a_term(f, p, l, g)?.min(a_term(g, p + 1, m, f)?);
            }
        }
        for l in 0..p.saturating_sub(1) {
            rhs += a_term(f, p, l, g)?.min(a_term(g, p + 1, p, f)?);
        }
    } else {
        rhs = a * a + f.norm_sq() * contract(g, g, q - p)?.norm();
        for m in (1..=q).filter(|&m| m != p) {
            for l in 0..p.min(m) {
                rhs += a_term(f, p, l, g)?.min(a_term(g, q + 1, m, f)?);
            }
        }
        for l in 0..p.saturating_sub(1) {
            rhs += a_term(f, p, l, g)?.min(a_term(g, q + 1, p, f)?);
        }
    }
    Ok(rhs)
}

/// `ψ(x, y) = sum_{j,k} w_{jk} min(|x_k|^{1/4} y_j^{1/2}, |x_j|^{1/4} y_k^{1/2})`
/// with `w_{jk} = q^{3/4}` for equal orders and `(q_j ∨ q_k)^{3/4}` otherwise.
pub fn psi(xs: &[f64], ys: &[f64], orders: &[usize]) -> Result<f64> {
    let n = xs.len();
    if ys.len() != n || orders.len() != n {
        return Err(shape(format!(
            "psi needs equal lengths, got {n}, {}, {}",
            ys.len(),
            orders.len()
        )));
    }
    if let Some(y) = ys.iter().find(|&&y| y.is_nan() || y < 0.0) {
        return Err(Error::Domain(format!(
            "second moments must be non-negative, got {y}"
        )));
    }
    if orders.contains(&0) {
        return Err(invalid("chaos orders must be positive"));
    }
    let mut total = 0.0;
    for j in 0..n {
        for k in 0..n {
            let w = (orders[j].max(orders[k]) as f64).powf(0.75);
            let a = xs[k].abs().powf(0.25) * ys[j].sqrt();
            let b = xs[j].abs().powf(0.25) * ys[k].sqrt();
            total += w * a.min(b);
        }
    }
    Ok(total)
}

/// A vector `(I_{q_1}(f_1), .., I_{q_d}(f_d))` of Wigner integrals with
/// mirror-symmetric kernels on a common grid.
#[derive(Clone, Debug)]
pub struct WignerVector {
    kernels: Vec<Kernel>,
}

impl WignerVector {
    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(invalid("a Wigner vector needs at least one component"));
        }
        for (i, k) in kernels.iter().enumerate() {
            kernels[0].same_space(k)?;
            if k.order() == 0 {
                return Err(invalid(format!("component {i} has chaos order 0")));
            }
            require_mirror(k, &format!("component {i}"))?;
        }
        Ok(Self { kernels })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn dim(&self) -> usize {
        self.kernels.len()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.kernels.iter().map(Kernel::order).collect()
    }

    /// `C_ij = τ(F_i F_j) = <f_i, f_j>` for equal orders, 0 otherwise.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut c = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                if self.kernels[i].order() == self.kernels[j].order() {
                    c[(i, j)] = self.kernels[i].inner(&self.kernels[j])?.re;
                }
            }
        }
        Ok(c)
    }

    pub fn covariance(&self) -> Result<SpdCovariance> {
        SpdCovariance::new(self.gram()?)
    }

    /// `x_i = τ(F_i^4) - 2 τ(F_i^2)^2`, from contraction norms.
    pub fn fourth_cumulants(&self) -> Result<Vec<f64>> {
        self.kernels.iter().map(fourth_cumulant).collect()
    }

    /// `y_i = τ(F_i^2)`.
    pub fn second_moments(&self) -> Vec<f64> {
        self.kernels.iter().map(Kernel::norm_sq).collect()
    }
}

/// `M(F) = ψ(x, y)` with the component fourth cumulants and variances.
pub fn m_of_f(fv: &WignerVector) -> Result<f64> {
    psi(&fv.fourth_cumulants()?, &fv.second_moments(), &fv.orders())
}

/// Matrix of `||Γ_ij - C_ij 1 ⊗ 1||^2`, with the per-piece breakdown.
pub fn gamma_matrix(fv: &WignerVector, c: &SpdCovariance) -> Result<Vec<Vec<GammaDiscrepancy>>> {
    if c.dim() != fv.dim() {
        return Err(shape("covariance and vector dimensions differ"));
    }
    let k = fv.kernels();
    (0..fv.dim())
        .map(|i| {
            (0..fv.dim())
                .map(|j| gamma_discrepancy_sq(&k[i], &k[j], c.get(i, j)))
                .collect()
        })
        .collect()
}

/// `||C^{-1}|| sqrt(sum_ij ||Γ_ij - C_ij 1 ⊗ 1||^2)`.
pub fn stein_upper(fv: &WignerVector, c: &SpdCovariance) -> Result<f64> {
    let g = gamma_matrix(fv, c)?;
    let sum: f64 = g.iter().flatten().map(|d| d.total).sum();
    Ok(c.inv_op_norm() * sum.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub orders: Vec<usize>,
    pub covariance: Vec<Vec<f64>>,
    pub op_norm: f64,
    pub inv_op_norm: f64,
    pub fourth_cumulants: Vec<f64>,
    pub second_moments: Vec<f64>,
    pub gamma_discrepancy_sq: Vec<Vec<f64>>,
    pub gamma_terms: Vec<Vec<GammaDiscrepancy>>,
    pub lemma8_rhs: Vec<Vec<f64>>,
    pub stein_upper: f64,
    pub m_of_f: f64,
    pub dw_thm8: f64,
    pub dw_lemma: f64,
    /// Present only when a free Fisher information value is supplied.
    pub hsi_rhs: Option<f64>,
    pub lsi_rhs: Option<f64>,
}

/// `(||C||^{1/2} ||C^{-1}|| M(F), ||C|| ||C^{-1}||^{1/2} stein_upper)`.
pub fn dw_bounds(fv: &WignerVector, c: &SpdCovariance) -> Result<(f64, f64)> {
    let m = m_of_f(fv)?;
    let s = stein_upper(fv, c)?;
    Ok((
        c.op_norm().sqrt() * c.inv_op_norm() * m,
        c.op_norm() * c.inv_op_norm().sqrt() * s,
    ))
}

/// Full bound pipeline against the vector's own Gram covariance.
///
/// `fisher` is a free Fisher information value `Φ`; the HSI and LSI
/// right-hand sides are filled in only when it is given, using the Stein
/// upper bound as discrepancy.
pub fn bound_report(fv: &WignerVector, fisher: Option<f64>) -> Result<BoundReport> {
    let c = fv.covariance()?;
    let gamma_terms = gamma_matrix(fv, &c)?;
    let gamma_discrepancy_sq: Vec<Vec<f64>> = gamma_terms
        .iter()
        .map(|row| row.iter().map(|d| d.total).collect())
        .collect();
    let k = fv.kernels();
    let lemma8: Vec<Vec<f64>> = (0..fv.dim())
        .map(|i| {
            (0..fv.dim())
                .map(|j| lemma8_rhs(&k[i], &k[j], c.get(i, j)))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let sum: f64 = gamma_discrepancy_sq.iter().flatten().sum();
    let stein = c.inv_op_norm() * sum.sqrt();
    let m = m_of_f(fv)?;
    let (hsi, lsi) = match fisher {
        Some(phi) => (Some(hsi_rhs(stein, phi, &c)?), Some(lsi_rhs(phi, &c)?)),
        None => (None, None),
    };
    Ok(BoundReport {
        orders: fv.orders(),
        covariance: c.to_rows(),
        op_norm: c.op_norm(),
        inv_op_norm: c.inv_op_norm(),
        fourth_cumulants: fv.fourth_cumulants()?,
        second_moments: fv.second_moments(),
        gamma_discrepancy_sq,
        gamma_terms,
        lemma8_rhs: lemma8,
        stein_upper: stein,
        m_of_f: m,
        dw_thm8: c.op_norm().sqrt() * c.inv_op_norm() * m,
        dw_lemma: c.op_norm() * c.inv_op_norm().sqrt() * stein,
        hsi_rhs: hsi,
        lsi_rhs: lsi,
    })
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "time must be non-negative and finite, got {t}"
        )));
    }
    Ok(())
}

/// `(I - e^{-t C^{-1}}) C`, the covariance of the interpolation at time `t`.
pub fn ou_covariance(c: &SpdCovariance, t: f64) -> Result<DMatrix<f64>> {
    check_time(t)?;
    Ok(c.apply(|l| -(-t / l).exp_m1() * l))
}

/// `e^{-t C^{-1}} ∫_0^t e^{v C^{-1}} dv` with Gauss–Legendre quadrature and
/// Padé matrix exponentials, independent of the eigendecomposition.
pub fn ou_covariance_quadrature(c: &SpdCovariance, t: f64, panels: usize) -> Result<DMatrix<f64>> {
    check_time(t)?;
    let n = c.dim();
    let inv = c
        .matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("singular".into()))?;
    let (x, w) = quad::gauss_legendre(10);
    let width = t / panels.max(1) as f64;
    let mut integral = DMatrix::zeros(n, n);
    if t > 0.0 {
        for p in 0..panels.max(1) {
            let mid = (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                let v = mid + 0.5 * width * xi;
                integral += (&inv * v).exp() * (0.5 * width * wi);
            }
        }
    }
    Ok((&inv * -t).exp() * integral)
}

/// `e^{-2t/||C||} (1 - e^{-2t/||C||})^{-1/2} ||C^{-1}||^{1/2} σ`.
pub fn fisher_decay_bound(t: f64, sigma: f64, c: &SpdCovariance) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::Domain(format!(
            "discrepancy must be non-negative, got {sigma}"
        )));
    }
    let e = (-2.0 * t / c.op_norm()).exp();
    Ok(e / (-(-2.0 * t / c.op_norm()).exp_m1()).sqrt() * c.inv_op_norm().sqrt() * sigma)
}

/// `∫_0^∞ e^{-2t/c} (1 - e^{-2t/c})^{-1/2} dt` by quadrature after `t = s^2`,
/// which removes the endpoint singularity.
pub fn fisher_decay_integral(c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!(
            "rate constant must be positive, got {c}"
        )));
    }
    let upper = (c * 20.0).sqrt();
    let integrand = |s: f64| {
        if s == 0.0 {
            return 2.0 * (c / 2.0).sqrt();
        }
        let t = s * s;
        let e = (-2.0 * t / c).exp();
        2.0 * s * e / (-(-2.0 * t / c).exp_m1()).sqrt()
    };
    let head = quad::integrate(integrand, 0.0, upper, 400, 10);
    // Beyond t = 10c the integrand is e^{-2t/c} to within 1e-9 relative.
    let tail = 0.5 * c * (-2.0 * upper * upper / c).exp();
    Ok(head + tail)
}

fn check_nonneg(v: f64, name: &str) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!(
            "{name} must be non-negative and finite, got {v}"
        )));
    }
    Ok(())
}

/// `(||C|| ||C^{-1}|| / 2) σ^2 log(1 + Φ / (||C^{-1}|| σ^2))`, zero at `σ = 0`.
pub fn hsi_rhs(sigma: f64, phi: f64, c: &SpdCovariance) -> Result<f64> {
    check_nonneg(sigma, "sigma")?;
    check_nonneg(phi, "phi")?;
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let s2 = sigma * sigma;
    Ok(0.5 * c.condition_number() * s2 * (phi / (c.inv_op_norm() * s2)).ln_1p())
}

/// `||C|| Φ / 2`.
pub fn lsi_rhs(phi: f64, c: &SpdCovariance) -> Result<f64> {
    check_nonneg(phi, "phi")?;
    Ok(0.5 * c.op_norm() * phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XiQ {
    /// `|q| n / sqrt(1 - q^2 n)`.
    pub bound: f64,
    /// `||Ξ_q - P_0||_HS^2 = sum_{N >= 1} q^{2N} n^N = q^2 n / (1 - q^2 n)`.
    pub hs_norm_sq: f64,
}

/// Stein discrepancy bound for a q-Gaussian family of `n` variables.
pub fn xi_q_discrepancy(q: f64, n: usize) -> Result<XiQ> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let r = q * q * n as f64;
    if r.is_nan() || r >= 1.0 {
        return Err(Error::Domain(format!("q^2 n = {r} must be below 1")));
    }
    Ok(XiQ {
        bound: q.abs() * n as f64 / (1.0 - r).sqrt(),
        hs_norm_sq: r / (1.0 - r),
    })
}

/// `(n / 2) log(2 π e / ρ)`, the entropy of `n` free semicirculars of variance `ρ`.
pub fn semicircular_entropy(n: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    Ok(0.5 * n as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E / rho).ln())
}
