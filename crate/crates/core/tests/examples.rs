//! Worked examples for each module, checked against hand derivations or
//! small independent oracles.

use free_stein::breuer_major::{
    bm_contraction_norm_sq, bm_vector_report, chebyshev_u, rho_h, sigma_sq, theoretical_rate,
    BmConfig,
};
use free_stein::kernel_tensor::{contract, pairing_integral, Kernel};
use free_stein::nc_combinatorics::PairPartition;
use free_stein::nc_poly::{jacobian, schwinger_dyson_residual, FamilyLaw, NcPolynomial};
use free_stein::randmat_mc::{sample_family, sample_gue};
use free_stein::spd::SpdCovariance;
use free_stein::stein_bounds::{
    dw_bounds, fisher_decay_bound, gamma_discrepancy_sq, lemma8_rhs, m_of_f, ou_covariance, psi,
    semicircular_entropy, xi_q_discrepancy, WignerVector,
};
use free_stein::wigner_moments::{
    fourth_moment_identity, grad_norm_sq, opnorm_estimate, q_fock_inner, wigner_joint_moment,
    wigner_product,
};
use free_stein::{Complex64, Error};
use nalgebra::DMatrix;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn unit_rank_one(order: usize) -> Kernel {
    Kernel::rank_one(&vec![vec![c(1.0)]; order], 1.0).unwrap()
}

fn local_catalan(m: u64) -> f64 {
    (0..m).fold(1.0, |acc, k| {
        acc * 2.0 * (2 * k + 1) as f64 / (k + 2) as f64
    })
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol:e})");
}

#[test]
fn polynomial_jacobians() {
    let t = |i| NcPolynomial::var(2, i).unwrap();
    let jac = jacobian(&[t(0), t(1)]).unwrap();
    for (i, row) in jac.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            let want = if i == j {
                NcPolynomial::constant(2, c(1.0))
            } else {
                NcPolynomial::zero(2)
            };
            assert_eq!(entry.multiply(), want);
            assert_eq!(entry.terms().count(), usize::from(i == j));
        }
    }
    let jac = jacobian(&[t(0).mul(&t(1))]).unwrap();
    let pairs = |k: usize| {
        jac[0][k]
            .terms()
            .map(|((a, b), v)| (a.clone(), b.clone(), *v))
            .collect::<Vec<_>>()
    };
    assert_eq!(pairs(0), vec![(vec![], vec![1], c(1.0))]);
    assert_eq!(pairs(1), vec![(vec![0], vec![], c(1.0))]);
    // Linear map P = B T has constant Jacobian B ⊗ (1 ⊗ 1).
    let b = [[2.0, -1.0], [0.5, 3.0]];
    let ps: Vec<NcPolynomial> = b
        .iter()
        .map(|row| t(0).scale(c(row[0])).add(&t(1).scale(c(row[1]))))
        .collect();
    let jac = jacobian(&ps).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let terms: Vec<_> = jac[i][j].terms().collect();
            assert_eq!(terms.len(), 1);
            assert!(terms[0].0 .0.is_empty() && terms[0].0 .1.is_empty());
            assert_eq!(*terms[0].1, c(b[i][j]));
        }
    }
}

#[test]
fn semicircular_expectations() {
    let cov = SpdCovariance::from_rows(&[
        vec![2.0, 0.5, -0.3],
        vec![0.5, 1.5, 0.2],
        vec![-0.3, 0.2, 1.0],
    ])
    .unwrap();
    let g = |i, j| cov.get(i, j);
    for word in [[0, 1, 2, 0], [1, 1, 2, 2], [0, 2, 0, 2]] {
        let p = NcPolynomial::monomial(3, word.to_vec(), c(1.0)).unwrap();
        let got = p
            .expectation(&FamilyLaw::Semicircular(cov.clone()))
            .unwrap();
        let (i, j, k, l) = (word[0], word[1], word[2], word[3]);
        close(got.re, g(i, j) * g(k, l) + g(i, l) * g(j, k), 1e-14);
    }
    let one = SpdCovariance::identity(1);
    let s = NcPolynomial::var(1, 0).unwrap();
    assert!(schwinger_dyson_residual(&[s.mul(&s).mul(&s)], &one).unwrap() <= 1e-14);
    assert!(schwinger_dyson_residual(&[s.mul(&s)], &one).unwrap() <= 1e-14);
    let t = |i| NcPolynomial::var(2, i).unwrap();
    assert!(schwinger_dyson_residual(&[t(1), t(0)], &SpdCovariance::identity(2)).unwrap() <= 1e-14);
}

#[test]
fn kernel_adjoints_and_inner_products() {
    let u = vec![c(1.0), c(2.0)];
    let v = vec![c(-1.0), c(0.5)];
    let uv = Kernel::rank_one(&[u.clone(), v.clone()], 0.5).unwrap();
    let vu = Kernel::rank_one(&[v, u], 0.5).unwrap();
    assert_eq!(uv.adjoint(), vu);
    assert!(!uv.is_mirror_symmetric(1e-12));
    let sym = uv.add(&vu).unwrap().scale(c(0.5));
    assert!(sym.is_mirror_symmetric(1e-15));
    assert!(unit_rank_one(2).is_mirror_symmetric(0.0));

    let e = Kernel::new(1, 2, 0.5, vec![c(2f64.sqrt()), c(0.0)]).unwrap();
    close(e.inner(&e).unwrap().re, 1.0, 1e-15);
    let a = Kernel::scalar(Complex64::new(1.0, 2.0), 3, 1.0 / 3.0).unwrap();
    let b = Kernel::scalar(Complex64::new(-0.5, 1.0), 3, 1.0 / 3.0).unwrap();
    assert_eq!(
        a.inner(&b).unwrap(),
        Complex64::new(1.0, -2.0) * Complex64::new(-0.5, 1.0)
    );
}

#[test]
fn kernel_contractions_and_pairings() {
    let f = Kernel::new(1, 3, 0.25, vec![c(1.0), c(-2.0), c(0.5)]).unwrap();
    let g = Kernel::new(1, 3, 0.25, vec![c(3.0), c(1.0), c(4.0)]).unwrap();
    let direct = 0.25 * (3.0 - 2.0 + 2.0);
    assert_eq!(
        contract(&f, &g, 1).unwrap().scalar_value().unwrap(),
        c(direct)
    );
    let pair = PairPartition::new(vec![(0, 1)]).unwrap();
    assert_eq!(pairing_integral(&[&f, &g], &pair).unwrap(), c(direct));
    let zero = Kernel::zeros(1, 3, 0.25).unwrap();
    assert_eq!(pairing_integral(&[&f, &zero], &pair).unwrap(), c(0.0));

    let outer = contract(&f, &g, 0).unwrap();
    assert_eq!(outer.order(), 2);
    assert_eq!(outer.get(&[1, 2]), c(-8.0));

    let ee = unit_rank_one(2);
    assert_eq!(contract(&ee, &ee, 1).unwrap(), ee);
}

#[test]
fn kernel_slices() {
    let f = Kernel::from_fn(2, 3, 1.0 / 3.0, |i| {
        Complex64::new(i[0] as f64, i[1] as f64 + 1.0)
    })
    .unwrap();
    for t in 0..3 {
        let s = f.slice(1, t).unwrap();
        let ts = f.tilde_slice(1, t).unwrap();
        for x in 0..3 {
            assert_eq!(s.get(&[x]), f.get(&[t, x]));
            assert_eq!(ts.get(&[x]), f.get(&[t, x]).conj());
        }
    }
    let g = Kernel::new(1, 2, 0.5, vec![c(3.0), c(-1.0)]).unwrap();
    assert_eq!(g.slice(1, 1).unwrap().scalar_value(), Some(c(-1.0)));
}

#[test]
fn fock_inner_products() {
    let e1 = vec![c(1.0), c(0.0)];
    let e2 = vec![c(0.0), c(1.0)];
    assert_eq!(
        q_fock_inner(std::slice::from_ref(&e1), &[e1.clone(), e2.clone()], 0.3).unwrap(),
        c(0.0)
    );
    assert_eq!(
        q_fock_inner(std::slice::from_ref(&e2), std::slice::from_ref(&e2), 0.3).unwrap(),
        c(1.0)
    );
    let q = 0.4;
    close(
        q_fock_inner(&[e1.clone(), e2.clone()], &[e1.clone(), e2], q)
            .unwrap()
            .re,
        1.0,
        1e-15,
    );
    close(
        q_fock_inner(&[e1.clone(), e1.clone()], &[e1.clone(), e1], q)
            .unwrap()
            .re,
        1.0 + q,
        1e-15,
    );
}

#[test]
fn products_of_second_chaos() {
    let ee = unit_rank_one(2);
    let parts = wigner_product(&ee, &ee).unwrap();
    assert_eq!(parts.len(), 3);
    assert_eq!(parts[1], ee);
    assert_eq!(parts[2].scalar_value(), Some(c(1.0)));

    // τ((S² − 1)^4) by binomial expansion over Catalan moments.
    let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
    let oracle: f64 = (0..=4)
        .map(|k| binom[k] * (-1f64).powi(k as i32) * local_catalan((4 - k) as u64))
        .sum();
    assert_eq!(oracle, 3.0);
    let got = wigner_joint_moment(&[&ee, &ee, &ee, &ee]).unwrap();
    close(got.re, oracle, 1e-12);
    let (lhs, rhs) = fourth_moment_identity(&ee).unwrap();
    close(lhs, 3.0, 1e-12);
    close(rhs, 3.0, 1e-12);

    let f = Kernel::new(1, 2, 0.5, vec![c(1.0), c(-0.5)]).unwrap();
    let (lhs, rhs) = fourth_moment_identity(&f).unwrap();
    let want = 2.0 * f.norm_sq().powi(2);
    close(lhs, want, 1e-14);
    close(rhs, want, 1e-14);

    assert_eq!(
        opnorm_estimate(&Kernel::zeros(2, 2, 0.5).unwrap(), 4).unwrap(),
        0.0
    );
    close(grad_norm_sq(&unit_rank_one(3)).unwrap(), 3.0, 1e-14);
}

#[test]
fn spd_examples() {
    let id = SpdCovariance::identity(3);
    assert_eq!(id.sqrt(), DMatrix::identity(3, 3));
    close(id.condition_number(), 1.0, 1e-15);
    let d = SpdCovariance::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!((d.sqrt() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).amax() <= 1e-15);
    close(d.op_norm(), 4.0, 1e-15);
    close(d.inv_op_norm(), 1.0, 1e-15);
    let m = SpdCovariance::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    close(m.condition_number(), 3.0, 1e-14);
    assert!(matches!(
        SpdCovariance::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
        Err(Error::NotPositiveDefinite(_))
    ));
    assert!(SpdCovariance::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
}

#[test]
fn ou_covariance_examples() {
    let c2 = SpdCovariance::from_rows(&[vec![2.0]]).unwrap();
    close(
        ou_covariance(&c2, 2.0).unwrap()[(0, 0)],
        (1.0 - (-1f64).exp()) * 2.0,
        1e-15,
    );
    assert_eq!(ou_covariance(&c2, 0.0).unwrap()[(0, 0)], 0.0);
    let id = SpdCovariance::identity(2);
    assert!((ou_covariance(&id, 60.0).unwrap() - DMatrix::identity(2, 2)).amax() <= 1e-15);
    assert!(ou_covariance(&id, -1.0).is_err());
}

#[test]
fn gamma_discrepancy_examples() {
    let f = Kernel::new(1, 3, 1.0 / 3.0, vec![c(1.0), c(0.5), c(-2.0)]).unwrap();
    let g = Kernel::new(1, 3, 1.0 / 3.0, vec![c(0.2), c(1.5), c(1.0)]).unwrap();
    let ip = f.inner(&g).unwrap().re;
    close(
        gamma_discrepancy_sq(&f, &g, 0.7).unwrap().total,
        (0.7 - ip).powi(2),
        1e-15,
    );
    assert!(gamma_discrepancy_sq(&f, &g, ip).unwrap().total <= 1e-30);
    assert!(lemma8_rhs(&f, &g, ip).unwrap() <= 1e-30);

    let ee = unit_rank_one(2);
    let gd = gamma_discrepancy_sq(&ee, &ee, 1.0).unwrap();
    close(gd.total, 2.0, 1e-14);
    assert!(lemma8_rhs(&ee, &ee, 1.0).unwrap() >= 2.0 - 1e-14);

    let zero = Kernel::zeros(2, 3, 1.0 / 3.0).unwrap();
    let sym = Kernel::from_fn(2, 3, 1.0 / 3.0, |i| c((i[0] + i[1]) as f64)).unwrap();
    assert_eq!(gamma_discrepancy_sq(&sym, &zero, 0.0).unwrap().total, 0.0);

    // p = 1, q = 3 with a = 0: the bound carries ||f||^2 ||g ⌢^2 g||.
    let f1 = Kernel::new(1, 2, 0.5, vec![c(1.0), c(0.3)]).unwrap();
    let g3 = Kernel::from_fn(3, 2, 0.5, |i| {
        c(1.0 + (i[0] * i[2]) as f64 + 0.5 * i[1] as f64)
    })
    .unwrap();
    assert!(g3.is_mirror_symmetric(0.0));
    let gg = contract(&g3, &g3, 2).unwrap().norm();
    let rhs = lemma8_rhs(&f1, &g3, 0.0).unwrap();
    assert!(rhs >= f1.norm_sq() * gg - 1e-12);
    assert!(gamma_discrepancy_sq(&f1, &g3, 0.0).unwrap().total <= rhs);
}

#[test]
fn psi_and_bound_examples() {
    assert_eq!(psi(&[0.0, 0.0], &[1.0, 2.0], &[1, 3]).unwrap(), 0.0);
    let (x, y, q) = (0.3f64, 2.5f64, 3);
    close(
        psi(&[x], &[y], &[q]).unwrap(),
        (q as f64).powf(0.75) * x.powf(0.25) * y.sqrt(),
        1e-15,
    );
    close(psi(&[1.0], &[1.0], &[2]).unwrap(), 2f64.powf(0.75), 1e-15);
    assert!(psi(&[1.0], &[-1.0], &[2]).is_err());
    assert!(psi(&[1.0, 2.0], &[1.0], &[2]).is_err());

    let fv = WignerVector::new(vec![unit_rank_one(2)]).unwrap();
    let cov = fv.covariance().unwrap();
    let (dw, _) = dw_bounds(&fv, &cov).unwrap();
    close(dw, 2f64.powf(0.75), 1e-14);

    // M is homogeneous of degree 2: x scales as λ^4 and y as λ^2.
    let mut r = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
    let ks: Vec<Kernel> = (1..=3)
        .map(|o| Kernel::random_mirror_symmetric(o, 3, 1.0 / 3.0, false, &mut r).unwrap())
        .collect();
    let base = m_of_f(&WignerVector::new(ks.clone()).unwrap()).unwrap();
    for lambda in [0.5, 2.0, 3.7] {
        let scaled: Vec<Kernel> = ks.iter().map(|k| k.scale(c(lambda))).collect();
        let m = m_of_f(&WignerVector::new(scaled).unwrap()).unwrap();
        close(m, lambda * lambda * base, 1e-12 * m.max(1.0));
    }
}

#[test]
fn fisher_entropy_and_q_examples() {
    let id = SpdCovariance::identity(2);
    assert_eq!(fisher_decay_bound(0.3, 0.0, &id).unwrap(), 0.0);
    let ts: Vec<f64> = (1..100).map(|k| 0.05 * k as f64).collect();
    let vals: Vec<f64> = ts
        .iter()
        .map(|&t| fisher_decay_bound(t, 1.0, &id).unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
    assert!(fisher_decay_bound(0.0, 1.0, &id).is_err());

    assert_eq!(xi_q_discrepancy(0.0, 5).unwrap().bound, 0.0);
    close(
        xi_q_discrepancy(0.1, 4).unwrap().bound,
        0.4 / 0.96f64.sqrt(),
        1e-15,
    );

    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    close(semicircular_entropy(2, 1.0).unwrap(), two_pi_e.ln(), 1e-14);
    close(
        semicircular_entropy(3, 0.25).unwrap() - semicircular_entropy(3, 1.0).unwrap(),
        -1.5 * 0.25f64.ln(),
        1e-14,
    );
    close(
        semicircular_entropy(6, 2.0).unwrap(),
        2.0 * semicircular_entropy(3, 2.0).unwrap(),
        1e-14,
    );
}

#[test]
fn fractional_covariance_examples() {
    for h in [0.1, 0.5, 0.9] {
        assert_eq!(rho_h(0, h).unwrap(), 1.0);
    }
    assert_eq!(rho_h(7, 0.5).unwrap(), 0.0);
    // Second central difference of x^{3/2} / 2 at 10.
    let g = |x: f64| x.powf(1.5) / 2.0;
    close(
        rho_h(10, 0.75).unwrap(),
        g(11.0) - 2.0 * g(10.0) + g(9.0),
        1e-12,
    );
    assert!(rho_h(1, 1.0).is_err());

    assert_eq!(chebyshev_u(2).unwrap(), vec![-1, 0, 1]);
    assert_eq!(chebyshev_u(3).unwrap(), vec![0, -2, 0, 1]);

    assert_eq!(sigma_sq(2, 0.5, 1e-13).unwrap(), 1.0);
    let s = sigma_sq(2, 0.6, 1e-13).unwrap();
    let partial: f64 = 1.0
        + 2.0
            * (1..=100_000i64)
                .map(|r| rho_h(r, 0.6).unwrap().powi(2))
                .sum::<f64>();
    // rho^2 ~ (H(2H-1))^2 r^{-1.6}, so the omitted two-sided tail is about
    // 2 (0.12)^2 r^{-0.6} / 0.6 at r = 10^5.
    let tail = 2.0 * 0.12f64.powi(2) * 1e5f64.powf(-0.6) / 0.6;
    assert!(
        s > 1.0 && s >= partial && (s - partial - tail).abs() < 0.02 * tail,
        "{s} {partial} {tail}"
    );
    assert!(sigma_sq(2, 0.8, 1e-13).is_err());
}

#[test]
fn breuer_major_examples() {
    for (q, r) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
        for len in [1usize, 7, 64] {
            let cc = 1.0 / (len as f64).sqrt();
            close(
                bm_contraction_norm_sq(q, 0.5, r, len, cc).unwrap(),
                1.0 / len as f64,
                1e-15,
            );
        }
    }
    let cc = 0.8;
    close(
        bm_contraction_norm_sq(3, 0.3, 1, 1, cc).unwrap(),
        cc.powi(4),
        1e-15,
    );

    let cfg = |n, h, times: &[f64]| BmConfig {
        h,
        q: 2,
        n,
        times: times.to_vec(),
    };
    for n in [16, 256, 4096] {
        let rep = bm_vector_report(&cfg(n, 0.5, &[0.0, 1.0])).unwrap();
        close(rep.fourth_cumulants[0], 1.0 / n as f64, 1e-15);
        close(rep.m_of_f, 2f64.powf(0.75) * (n as f64).powf(-0.25), 1e-14);
    }
    let off = |n| {
        let rep = bm_vector_report(&BmConfig {
            h: 0.6,
            q: 3,
            n,
            times: vec![0.0, 0.5, 1.0],
        })
        .unwrap();
        rep.covariance[0][1].abs()
    };
    let (a, b, d) = (off(64), off(512), off(4096));
    assert!(a > b && b > d && d < 1e-2, "{a} {b} {d}");

    close(theoretical_rate(3, 0.3).unwrap(), -0.25, 0.0);
    close(theoretical_rate(3, 0.6).unwrap(), -0.2, 1e-15);
    close(
        theoretical_rate(3, 0.8).unwrap(),
        (6.0 * 0.8 - 6.0 + 1.0) / 4.0,
        1e-15,
    );
}

#[test]
fn gue_examples() {
    let n = 1024;
    for seed in 0..20 {
        let h = sample_gue(64, seed).unwrap();
        assert!(h.trace().norm() / 64.0 <= 5.0 / 8.0);
    }
    let h = sample_gue(n, 1).unwrap();
    let h2 = h.mul(&h);
    close(h2.trace().re / n as f64, 1.0, 0.05);
    close(h2.trace_of_product(&h2).re / n as f64, 2.0, 0.05);

    let cov = SpdCovariance::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let ys = sample_family(&cov, n, 4).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            close(
                ys[i].trace_of_product(&ys[j]).re / n as f64,
                cov.get(i, j),
                0.05,
            );
        }
    }
}
