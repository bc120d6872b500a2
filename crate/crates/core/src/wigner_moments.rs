//! Joint moments of multiple Wigner integrals.
//!
//! Two independent routes are provided. [`wigner_joint_moment`] multiplies
//! chaos expansions with the product formula
//! `I_n(f) I_m(g) = sum_p I_{n+m-2p}(f ⌢^p g)` and reads off the constant
//! term. [`joint_moment_by_pairings`] sums pairing integrals over the
//! non-crossing pairings that respect the blocks of variables. The first is
//! fast and is limited only by kernel sizes, the second enumerates pairings
//! and serves as the reference.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::cmatrix::CMatrix;
use crate::error::{invalid, shape, Error, Result};
use crate::kernel_tensor::{checked_len, contract, pairing_integral, Kernel};
use crate::nc_combinatorics::{
    block_labels, catalan, inversions, noncrossing_respecting_pairings, visit_pairings,
    weighted_pairing_sum, PairPartition,
};
use crate::spd::SpdCovariance;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance used to decide whether a kernel is mirror-symmetric.
pub const MIRROR_TOL: f64 = 1e-10;

/// `τ(s^k)` for a centred semicircular `s` of variance `var`.
pub fn semicircle_moment(k: usize, var: f64) -> Result<f64> {
    if !(var >= 0.0 && var.is_finite()) {
        return Err(Error::Domain(format!(
            "variance {var} must be non-negative"
        )));
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    Ok(catalan(k / 2)? as f64 * var.powi((k / 2) as i32))
}

fn check_indices(c: &SpdCovariance, indices: &[usize]) -> Result<()> {
    match indices.iter().find(|&&i| i >= c.dim()) {
        Some(bad) => Err(invalid(format!(
            "index {bad} outside a family of {}",
            c.dim()
        ))),
        None => Ok(()),
    }
}

/// `τ(s_{i_1} .. s_{i_k})` for a semicircular family with covariance `c`.
pub fn family_moment(c: &SpdCovariance, indices: &[usize]) -> Result<f64> {
    check_indices(c, indices)?;
    weighted_pairing_sum(indices.len(), None, |a, b| c.get(indices[a], indices[b]))
}

/// Moment of a q-Gaussian family: every pairing counts with weight `q^{cr}`.
pub fn q_family_moment(c: &SpdCovariance, q: f64, indices: &[usize]) -> Result<f64> {
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [-1, 1]")));
    }
    check_indices(c, indices)?;
    weighted_pairing_sum(indices.len(), Some(q), |a, b| c.get(indices[a], indices[b]))
}

/// Largest tensor length accepted by [`q_fock_inner`].
pub const MAX_FOCK_LENGTH: usize = 8;

fn visit_permutations<V: FnMut(&[usize])>(k: usize, visit: &mut V) {
    fn rec<V: FnMut(&[usize])>(perm: &mut Vec<usize>, used: &mut [bool], visit: &mut V) {
        if perm.len() == used.len() {
            visit(perm);
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                perm.push(v);
                rec(perm, used, visit);
                perm.pop();
                used[v] = false;
            }
        }
    }
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], visit);
}

/// `<g_1 ⊗ .. ⊗ g_n, h_1 ⊗ .. ⊗ h_m>_q = δ_{nm} sum_σ q^{inv σ} prod <g_i, h_σ(i)>`.
pub fn q_fock_inner(g: &[Vec<Complex64>], h: &[Vec<Complex64>], q: f64) -> Result<Complex64> {
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [-1, 1]")));
    }
    if g.len() != h.len() {
        return Ok(ZERO);
    }
    let n = g.len();
    if n > MAX_FOCK_LENGTH {
        return Err(Error::SizeLimit(format!(
            "tensor length {n} exceeds {MAX_FOCK_LENGTH}"
        )));
    }
    let dim = g.first().map_or(0, Vec::len);
    if g.iter().chain(h).any(|v| v.len() != dim) {
        return Err(shape("all vectors must have the same length"));
    }
    let gram: Vec<Vec<Complex64>> = g
        .iter()
        .map(|gi| {
            h.iter()
                .map(|hj| gi.iter().zip(hj).map(|(a, b)| a.conj() * b).sum())
                .collect()
        })
        .collect();
    let mut total = ZERO;
    let mut failure = None;
    visit_permutations(n, &mut |perm: &[usize]| match inversions(perm) {
        Ok(inv) => {
            let weight = if inv == 0 { 1.0 } else { q.powi(inv as i32) };
            let prod: Complex64 = perm.iter().enumerate().map(|(i, &j)| gram[i][j]).product();
            total += prod * weight;
        }
        Err(e) => failure = Some(e),
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// The chaos components `f ⌢^p g` of `I_n(f) I_m(g)`, indexed by `p`.
pub fn wigner_product(f: &Kernel, g: &Kernel) -> Result<Vec<Kernel>> {
    (0..=f.order().min(g.order()))
        .map(|p| contract(f, g, p))
        .collect()
}

/// A finite sum of multiple Wigner integrals, one kernel per order.
#[derive(Clone, Debug)]
pub struct ChaosExpansion {
    components: BTreeMap<usize, Kernel>,
}

impl ChaosExpansion {
    pub fn from_kernel(f: &Kernel) -> Self {
        Self {
            components: BTreeMap::from([(f.order(), f.clone())]),
        }
    }

    pub fn components(&self) -> impl Iterator<Item = (&usize, &Kernel)> {
        self.components.iter()
    }

    /// Right multiplication by `I_m(g)`, dropping orders above `max_order`.
    pub fn multiply(&self, g: &Kernel, max_order: usize) -> Result<Self> {
        let mut out: BTreeMap<usize, Kernel> = BTreeMap::new();
        for (&n, f) in &self.components {
            for p in 0..=n.min(g.order()) {
                let order = n + g.order() - 2 * p;
                if order > max_order {
                    continue;
                }
                let k = contract(f, g, p)?;
                match out.get_mut(&order) {
                    Some(acc) => acc.add_scaled_in_place(&k, ONE),
                    None => {
                        out.insert(order, k);
                    }
                }
            }
        }
        Ok(Self { components: out })
    }

    /// `τ` of the element: the order-0 coefficient.
    pub fn expectation(&self) -> Complex64 {
        self.components
            .get(&0)
            .and_then(Kernel::scalar_value)
            .unwrap_or(ZERO)
    }
}

fn check_same_space(fs: &[&Kernel]) -> Result<()> {
    if let Some(first) = fs.first() {
        for f in fs {
            first.same_space(f)?;
        }
    }
    Ok(())
}

/// `τ(I_{n_1}(f_1) .. I_{n_r}(f_r))` through iterated product formulas.
///
/// Components that can no longer be brought down to order 0 by the
/// remaining factors are dropped, so the largest kernel formed has order at
/// most half the total order.
pub fn wigner_joint_moment(fs: &[&Kernel]) -> Result<Complex64> {
    check_same_space(fs)?;
    let Some(first) = fs.first() else {
        return Ok(ONE);
    };
    let total: usize = fs.iter().map(|f| f.order()).sum();
    if total % 2 == 1 {
        return Ok(ZERO);
    }
    let mut remaining = total - first.order();
    if first.order() > remaining {
        return Ok(ZERO);
    }
    checked_len(total / 2, first.grid())?;
    let mut acc = ChaosExpansion::from_kernel(first);
    for g in &fs[1..] {
        remaining -= g.order();
        acc = acc.multiply(g, remaining)?;
        if acc.components.is_empty() {
            return Ok(ZERO);
        }
    }
    Ok(acc.expectation())
}

/// Reference route: sum of pairing integrals over non-crossing pairings
/// that never join two variables of the same kernel.
pub fn joint_moment_by_pairings(fs: &[&Kernel]) -> Result<Complex64> {
    check_same_space(fs)?;
    let sizes: Vec<usize> = fs.iter().map(|f| f.order()).collect();
    let mut total = ZERO;
    for p in noncrossing_respecting_pairings(&sizes)? {
        total += pairing_integral(fs, &p)?;
    }
    Ok(total)
}

fn require_mirror_symmetric(f: &Kernel) -> Result<()> {
    if !f.is_mirror_symmetric(MIRROR_TOL) {
        return Err(Error::Domain("kernel is not mirror-symmetric".into()));
    }
    Ok(())
}

/// `sum_{p=1}^{n-1} ||f ⌢^p f||^2`, the fourth free cumulant of `I_n(f)`
/// for mirror-symmetric `f`.
pub fn fourth_cumulant(f: &Kernel) -> Result<f64> {
    (1..f.order()).try_fold(0.0, |acc, p| Ok(acc + contract(f, f, p)?.norm_sq()))
}

/// Both sides of `τ(F^4) = 2 ||f||^4 + sum_{p=1}^{n-1} ||f ⌢^p f||^2` for
/// `F = I_n(f)`: the left side from the moment engine, the right side from
/// contraction norms.
pub fn fourth_moment_identity(f: &Kernel) -> Result<(f64, f64)> {
    require_mirror_symmetric(f)?;
    let lhs = wigner_joint_moment(&[f, f, f, f])?.re;
    let norm_sq = f.norm_sq();
    Ok((lhs, 2.0 * norm_sq * norm_sq + fourth_cumulant(f)?))
}

/// `τ((F* F)^m)^{1/(2m)}` for `F = I_n(f)`, a lower estimate of `||F||`
/// that increases to it as `m` grows.
pub fn opnorm_estimate(f: &Kernel, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("power m must be at least 1"));
    }
    let norm = f.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let s = (f.order() + 1) as f64 * norm;
    let g = f.scale(Complex64::new(1.0 / s, 0.0));
    let g_adj = g.adjoint();
    let mut word: Vec<&Kernel> = Vec::with_capacity(2 * m);
    for _ in 0..m {
        word.push(&g_adj);
        word.push(&g);
    }
    let t = wigner_joint_moment(&word)?.re.max(0.0);
    Ok(s * t.powf(1.0 / (2.0 * m as f64)))
}

/// Power used by [`haagerup_check`]: the largest `m` with `2 m n <= 16`.
pub fn haagerup_default_power(order: usize) -> usize {
    8usize.checked_div(order).map_or(1, |m| m.max(1))
}

/// Whether the operator-norm estimate respects `||I_n(f)|| <= (n+1) ||f||`.
pub fn haagerup_check(f: &Kernel) -> Result<bool> {
    let est = opnorm_estimate(f, haagerup_default_power(f.order()))?;
    Ok(est <= (f.order() + 1) as f64 * f.norm() * (1.0 + 1e-9))
}

/// `||∇ I_q(f)||^2`, summed slice by slice: `sum_k ∫ ||f_t^k||^2 dt`.
pub fn grad_norm_sq(f: &Kernel) -> Result<f64> {
    let mut total = 0.0;
    for k in 1..=f.order() {
        for t in 0..f.grid() {
            total += f.cell_width() * f.slice(k, t)?.norm_sq();
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Step {
    kernel: usize,
    transposed: bool,
}

enum LowOrder {
    Scalar(Complex64),
    Vector(CMatrix),
    Matrix { m: CMatrix, symmetric: bool },
}

/// Joint moments of Wigner integrals of order at most 2.
///
/// A pairing integral of such kernels factors over the connected components
/// of the pairing graph: paths between first-order kernels become
/// vector-matrix products and cycles become traces of matrix products.
/// Products and traces are cached across calls, so evaluating many words in
/// the same kernels costs a handful of dense matrix products.
pub struct LowOrderEvaluator {
    kernels: Vec<Kernel>,
    forms: Vec<LowOrder>,
    h: f64,
    products: HashMap<Vec<Step>, CMatrix>,
    traces: HashMap<Vec<Step>, Complex64>,
}

impl LowOrderEvaluator {
    pub fn new(kernels: &[Kernel]) -> Result<Self> {
        let refs: Vec<&Kernel> = kernels.iter().collect();
        check_same_space(&refs)?;
        let h = kernels.first().map_or(1.0, Kernel::cell_width);
        let forms = kernels
            .iter()
            .map(|k| {
                let n = k.grid();
                match k.order() {
                    0 => Ok(LowOrder::Scalar(k.entries()[0])),
                    1 => Ok(LowOrder::Vector(CMatrix::from_row_major(1, n, k.entries()))),
                    2 => {
                        let m = CMatrix::from_row_major(n, n, k.entries());
                        let symmetric = m.re == m.re.transpose() && m.im == m.im.transpose();
                        Ok(LowOrder::Matrix { m, symmetric })
                    }
                    o => Err(invalid(format!(
                        "order {o} kernel given to the low-order evaluator"
                    ))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            kernels: kernels.to_vec(),
            forms,
            h,
            products: HashMap::new(),
            traces: HashMap::new(),
        })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    fn step(&self, kernel: usize, transposed: bool) -> Step {
        let symmetric = matches!(
            self.forms[kernel],
            LowOrder::Matrix {
                symmetric: true,
                ..
            }
        );
        Step {
            kernel,
            transposed: transposed && !symmetric,
        }
    }

    fn matrix(&self, s: Step) -> CMatrix {
        match &self.forms[s.kernel] {
            LowOrder::Matrix { m, .. } if s.transposed => m.transpose(),
            LowOrder::Matrix { m, .. } => m.clone(),
            _ => unreachable!("steps only visit second-order kernels"),
        }
    }

    fn product(&mut self, seq: &[Step]) -> CMatrix {
        if seq.len() == 1 {
            return self.matrix(seq[0]);
        }
        if let Some(p) = self.products.get(seq) {
            return p.clone();
        }
        let head = self.product(&seq[..seq.len() - 1]);
        let p = head.mul(&self.matrix(seq[seq.len() - 1]));
        self.products.insert(seq.to_vec(), p.clone());
        p
    }

    fn cycle_trace(&mut self, seq: Vec<Step>) -> Complex64 {
        let rotation = (0..seq.len())
            .map(|r| {
                let mut s = seq[r..].to_vec();
                s.extend_from_slice(&seq[..r]);
                s
            })
            .min()
            .unwrap_or_default();
        if let Some(&t) = self.traces.get(&rotation) {
            return t;
        }
        let half = rotation.len().div_ceil(2);
        let t = if half == rotation.len() {
            self.product(&rotation).trace()
        } else {
            let a = self.product(&rotation[..half]);
            let b = self.product(&rotation[half..]);
            a.trace_of_product(&b)
        };
        self.traces.insert(rotation, t);
        t
    }

    fn path_value(&mut self, start: usize, seq: &[Step], end: usize) -> Complex64 {
        let LowOrder::Vector(v) = &self.forms[start] else {
            unreachable!()
        };
        let mut row = v.clone();
        for &s in seq {
            row = row.mul(&self.matrix(s));
        }
        let LowOrder::Vector(w) = &self.forms[end] else {
            unreachable!()
        };
        row.trace_of_product(&w.transpose())
    }

    fn pairing_value(&mut self, word: &[usize], pairs: &[(usize, usize)]) -> Complex64 {
        let orders: Vec<usize> = word.iter().map(|&k| self.kernels[k].order()).collect();
        let label = block_labels(&orders);
        let mut first_point = vec![0; word.len()];
        let mut acc_points = 0;
        for (i, &o) in orders.iter().enumerate() {
            first_point[i] = acc_points;
            acc_points += o;
        }
        let mut partner = vec![0; acc_points];
        for &(a, b) in pairs {
            partner[a] = b;
            partner[b] = a;
        }
        let mut visited = vec![false; word.len()];
        let mut value = ONE;
        for (i, &k) in word.iter().enumerate() {
            if let LowOrder::Scalar(c) = self.forms[k] {
                visited[i] = true;
                value *= c;
            }
        }
        // Walk a chain starting from point `p`, returning the matrices met and
        // the position where it stops (a first-order kernel or back at `stop`).
        let walk = |from: usize, stop: Option<usize>, visited: &mut [bool], this: &Self| {
            let mut seq = Vec::new();
            let mut p = from;
            loop {
                let q = partner[p];
                let pos = label[q];
                if Some(pos) == stop {
                    return (seq, pos);
                }
                visited[pos] = true;
                if orders[pos] == 1 {
                    return (seq, pos);
                }
                let slot = q - first_point[pos];
                seq.push(this.step(word[pos], slot == 1));
                p = first_point[pos] + (1 - slot);
            }
        };
        for i in 0..word.len() {
            if visited[i] || orders[i] != 1 {
                continue;
            }
            visited[i] = true;
            let (seq, end) = walk(first_point[i], None, &mut visited, self);
            value *= self.path_value(word[i], &seq, word[end]);
        }
        for i in 0..word.len() {
            if visited[i] {
                continue;
            }
            visited[i] = true;
            let (mut rest, _) = walk(first_point[i] + 1, Some(i), &mut visited, self);
            let mut seq = vec![self.step(word[i], false)];
            seq.append(&mut rest);
            value *= self.cycle_trace(seq);
        }
        value * self.h.powi((acc_points / 2) as i32)
    }

    /// `τ` of the product of the integrals of `kernels[word[0]], kernels[word[1]], ..`.
    pub fn moment(&mut self, word: &[usize]) -> Result<Complex64> {
        if let Some(&bad) = word.iter().find(|&&k| k >= self.kernels.len()) {
            return Err(invalid(format!(
                "kernel index {bad} outside 0..{}",
                self.kernels.len()
            )));
        }
        let orders: Vec<usize> = word.iter().map(|&k| self.kernels[k].order()).collect();
        let label = block_labels(&orders);
        let mut pairings = Vec::new();
        visit_pairings(
            label.len(),
            true,
            |a, b| label[a] != label[b],
            |pairs, _| pairings.push(pairs.to_vec()),
        )?;
        let mut total = ZERO;
        for pairs in pairings {
            total += self.pairing_value(word, &pairs);
        }
        Ok(total)
    }

    /// Integral of one explicit pairing, for checking against [`pairing_integral`].
    pub fn pairing_integral(
        &mut self,
        word: &[usize],
        pairing: &PairPartition,
    ) -> Result<Complex64> {
        let total: usize = word.iter().map(|&k| self.kernels[k].order()).sum();
        if total != pairing.num_points() {
            return Err(shape("pairing size does not match the kernels"));
        }
        Ok(self.pairing_value(word, pairing.pairs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_e(grid: usize) -> Kernel {
        Kernel::cell_indicator(grid, 1.0, 0).unwrap()
    }

    #[test]
    fn semicircle_values() {
        assert_eq!(semicircle_moment(4, 1.0).unwrap(), 2.0);
        assert_eq!(semicircle_moment(6, 2.0).unwrap(), 40.0);
        assert_eq!(semicircle_moment(3, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn family_moment_examples() {
        let c = SpdCovariance::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(family_moment(&c, &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(family_moment(&c, &[0, 0, 1, 1]).unwrap(), 1.25);
        let id = SpdCovariance::identity(1);
        for (q, want) in [(0.0, 2.0), (0.5, 2.5), (1.0, 3.0)] {
            assert_eq!(q_family_moment(&id, q, &[0, 0, 0, 0]).unwrap(), want);
        }
    }

    #[test]
    fn fock_inner_is_permanent_at_q_one() {
        let a = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let b = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let g = vec![a.clone(), b.clone()];
        let h = vec![b, a];
        assert_eq!(q_fock_inner(&g, &h, 0.0).unwrap(), ZERO);
        assert_eq!(q_fock_inner(&g, &h, 1.0).unwrap(), ONE);
        assert_eq!(q_fock_inner(&g, &h, -1.0).unwrap(), -ONE);
        assert_eq!(q_fock_inner(&g, &g[..1], 0.3).unwrap(), ZERO);
    }

    #[test]
    fn square_of_semicircular() {
        let e = unit_e(1);
        let ee = contract(&e, &e, 0).unwrap();
        let (lhs, rhs) = fourth_moment_identity(&ee).unwrap();
        assert!((lhs - 3.0).abs() < 1e-12 && (rhs - 3.0).abs() < 1e-12);
        let first = fourth_moment_identity(&e).unwrap();
        assert!((first.0 - 2.0).abs() < 1e-12 && (first.1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn opnorm_of_semicircular() {
        let e = unit_e(1);
        let est = opnorm_estimate(&e, 200).unwrap();
        assert!(est < 2.0 && est > 1.95);
    }

    #[test]
    fn odd_total_order_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Kernel::random(1, 2, 0.5, true, &mut rng).unwrap();
        let g = Kernel::random(2, 2, 0.5, true, &mut rng).unwrap();
        assert_eq!(wigner_joint_moment(&[&f, &g]).unwrap(), ZERO);
        assert_eq!(joint_moment_by_pairings(&[&f, &g]).unwrap(), ZERO);
    }

    #[test]
    fn gradient_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = Kernel::random(3, 3, 0.3, true, &mut rng).unwrap();
        assert!((grad_norm_sq(&f).unwrap() - 3.0 * f.norm_sq()).abs() < 1e-12 * f.norm_sq());
    }

    #[test]
    fn low_order_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ks = vec![
            Kernel::random(2, 3, 0.4, true, &mut rng).unwrap(),
            Kernel::random(1, 3, 0.4, true, &mut rng).unwrap(),
            Kernel::random_mirror_symmetric(2, 3, 0.4, false, &mut rng).unwrap(),
            Kernel::scalar(Complex64::new(0.5, -1.0), 3, 0.4).unwrap(),
        ];
        let mut ev = LowOrderEvaluator::new(&ks).unwrap();
        for word in [
            vec![0, 0],
            vec![0, 1, 1],
            vec![1, 2, 0, 1],
            vec![2, 3, 0, 2, 0],
            vec![0, 2, 1, 0, 1, 2],
        ] {
            let refs: Vec<&Kernel> = word.iter().map(|&i| &ks[i]).collect();
            let want = joint_moment_by_pairings(&refs).unwrap();
            let got = ev.moment(&word).unwrap();
            assert!(
                (got - want).norm() < 1e-10 * (1.0 + want.norm()),
                "{word:?}: {got} vs {want}"
            );
        }
    }
}
