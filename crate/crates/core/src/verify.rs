//! Seeded self-check suite: reduced versions of the oracle and invariant
//! checks, fast enough to run on every invocation of the command-line tool.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::breuer_major::bm_rate_experiment;
use crate::error::Result;
use crate::kernel_tensor::Kernel;
use crate::nc_combinatorics::{free_cumulants_to_moments, moments_to_free_cumulants};
use crate::nc_poly::{schwinger_dyson_residual, NcPolynomial};
use crate::randmat_mc::mc_compare;
use crate::spd::SpdCovariance;
use crate::stein_bounds::{
    fisher_decay_integral, gamma_discrepancy_sq, hsi_rhs, lemma8_rhs, lsi_rhs, m_of_f,
    ou_covariance, ou_covariance_quadrature, stein_upper, xi_q_discrepancy, WignerVector,
};
use crate::wigner_moments::{
    fourth_moment_identity, haagerup_default_power, joint_moment_by_pairings, opnorm_estimate,
    q_family_moment, wigner_joint_moment,
};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    /// Largest observed error, or the smallest margin for inequality checks.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `A A^T + I/2` with standard normal `A`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SpdCovariance {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    SpdCovariance::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.5)
        .expect("shifted Gram matrix is SPD")
}

/// Up to `terms` monomials of degree at most `degree` with coefficients in `[-1, 1]`.
pub fn random_polynomial<R: Rng + ?Sized>(
    n_vars: usize,
    degree: usize,
    terms: usize,
    rng: &mut R,
) -> NcPolynomial {
    let mut p = NcPolynomial::zero(n_vars);
    for _ in 0..terms {
        let len = rng.random_range(0..=degree);
        let word: Vec<usize> = (0..len).map(|_| rng.random_range(0..n_vars)).collect();
        let c = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        p = p.add(&NcPolynomial::monomial(n_vars, word, c).expect("indices are in range"));
    }
    p
}

fn record(name: &str, cases: usize, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        cases,
        worst,
        tolerance,
        pass: worst <= tolerance,
    }
}

fn unit_rank_one(order: usize) -> Kernel {
    let e = vec![Complex64::new(1.0, 0.0)];
    Kernel::rank_one(&vec![e; order], 1.0).expect("rank-one kernel")
}

pub fn run_verify(seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let grid = rng.random_range(1..=3);
        let r = rng.random_range(1..=4);
        let fs: Vec<Kernel> = (0..r)
            .map(|_| {
                Kernel::random(
                    rng.random_range(1..=3),
                    grid,
                    1.0 / grid as f64,
                    true,
                    &mut rng,
                )
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&Kernel> = fs.iter().collect();
        worst = worst.max((wigner_joint_moment(&refs)? - joint_moment_by_pairings(&refs)?).norm());
    }
    checks.push(record("product_vs_pairing_oracle", 20, worst, 1e-9));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let order = rng.random_range(1..=3);
        let f = Kernel::random_mirror_symmetric(order, 3, 1.0 / 3.0, true, &mut rng)?;
        let (lhs, rhs) = fourth_moment_identity(&f)?;
        worst = worst.max((lhs - rhs).abs());
    }
    checks.push(record("fourth_moment_identity", 20, worst, 1e-10));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..30 {
        let p = rng.random_range(1..=3);
        let q = rng.random_range(p..=3);
        let f = Kernel::random_mirror_symmetric(p, 3, 1.0 / 3.0, false, &mut rng)?;
        let g = Kernel::random_mirror_symmetric(q, 3, 1.0 / 3.0, false, &mut rng)?;
        let a = if p == q { f.inner(&g)?.re } else { 0.0 };
        worst = worst.max(gamma_discrepancy_sq(&f, &g, a)?.total - lemma8_rhs(&f, &g, a)?);
    }
    checks.push(record("gamma_below_contraction_bound", 30, worst, 1e-12));

    let f = WignerVector::new(vec![unit_rank_one(2)])?;
    let c = f.covariance()?;
    let err = (m_of_f(&f)? - 2f64.powf(0.75))
        .abs()
        .max((stein_upper(&f, &c)?.powi(2) - 2.0).abs());
    checks.push(record("second_chaos_stein_example", 1, err, 1e-10));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let c = random_spd(n, &mut rng);
        let ps: Vec<NcPolynomial> = (0..n)
            .map(|_| random_polynomial(n, 5, 4, &mut rng))
            .collect();
        worst = worst.max(schwinger_dyson_residual(&ps, &c)?);
    }
    checks.push(record("schwinger_dyson_residual", 10, worst, 1e-10));

    let one = SpdCovariance::identity(1);
    let mut worst: f64 = 0.0;
    for q in [-0.9, -0.3, 0.0, 0.5, 1.0] {
        worst = worst.max((q_family_moment(&one, q, &[0; 4])? - (2.0 + q)).abs());
        let six = 5.0 + 6.0 * q + 3.0 * q * q + q * q * q;
        worst = worst.max((q_family_moment(&one, q, &[0; 6])? - six).abs());
    }
    checks.push(record("q_gaussian_moments", 5, worst, 1e-12));

    let mut worst: f64 = 0.0;
    for (q, n) in [(0.1, 4), (0.2, 3), (0.3, 2)] {
        let r: f64 = q * q * n as f64;
        let series: f64 = (1..=200).map(|k| r.powi(k)).sum();
        worst = worst.max((xi_q_discrepancy(q, n)?.hs_norm_sq - series).abs());
    }
    checks.push(record("xi_q_hilbert_schmidt_series", 3, worst, 1e-10));

    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let n = rng.random_range(1..=4);
        let c = random_spd(n, &mut rng);
        for t in [0.1, 1.0, 10.0] {
            worst =
                worst.max((ou_covariance(&c, t)? - ou_covariance_quadrature(&c, t, 64)?).amax());
        }
    }
    checks.push(record("ou_covariance_quadrature", 15, worst, 1e-8));

    let mut worst: f64 = 0.0;
    for c in [1.0, 2.0, 5.0] {
        worst = worst.max((fisher_decay_integral(c)? - c).abs());
    }
    checks.push(record("fisher_decay_integral", 3, worst, 1e-6));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let c = random_spd(rng.random_range(1..=3), &mut rng);
        let sigma = rng.random_range(0.0..3.0);
        let phi = rng.random_range(0.0..10.0);
        worst = worst.max(hsi_rhs(sigma, phi, &c)? - lsi_rhs(phi, &c)?);
    }
    checks.push(record("hsi_below_lsi", 20, worst, 1e-12));

    let rep = bm_rate_experiment(2, 0.5, &[0.0, 1.0], &[32, 64, 128])?;
    let worst = rep
        .rows
        .iter()
        .filter_map(|r| r.slope)
        .map(|s| (s + 0.25).abs())
        .fold(0.0, f64::max);
    checks.push(record("breuer_major_independent_slope", 2, worst, 1e-12));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let order = rng.random_range(1..=3);
        let f = Kernel::random_mirror_symmetric(order, 2, 0.5, false, &mut rng)?;
        let est = opnorm_estimate(&f, haagerup_default_power(order))?;
        worst = worst.max(est - (order + 1) as f64 * f.norm() * (1.0 + 1e-9));
    }
    checks.push(record("haagerup_bound", 10, worst, 0.0));

    let moments: Vec<f64> = (1..=8)
        .map(|k| rng.random_range(-1.0..1.0) * k as f64)
        .collect();
    let kappa = moments_to_free_cumulants(&moments, 8)?;
    let back = free_cumulants_to_moments(&kappa, 8)?;
    let worst = moments
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(record("free_cumulant_round_trip", 1, worst, 1e-9));

    let mc = mc_compare(
        &SpdCovariance::identity(1),
        &[vec![0, 0], vec![0; 4]],
        96,
        6,
        seed,
    )?;
    let failures = mc.rows.iter().filter(|r| !r.pass).count();
    checks.push(record(
        "gue_trace_moments",
        mc.rows.len(),
        failures as f64,
        0.0,
    ));

    Ok(VerifyReport { seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_seed_passes() {
        let rep = run_verify(0).unwrap();
        for c in &rep.checks {
            assert!(c.pass, "{c:?}");
        }
    }
}
