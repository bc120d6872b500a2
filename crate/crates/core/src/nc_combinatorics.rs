//! Pair partitions, crossings and non-crossing set partitions.
//!
//! Points are numbered from 0. A pair partition of `2m` points is stored as a
//! list of pairs `(a, b)` with `a < b`, sorted by the first element, which is
//! also the order produced by the enumerator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest number of points for which pair partitions are enumerated.
pub const MAX_PAIRING_POINTS: usize = 16;
/// Largest `k` for which NC(k) is enumerated by brute force.
pub const MAX_PARTITION_SIZE: usize = 10;
/// Largest Catalan index served.
pub const MAX_CATALAN_INDEX: usize = 30;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairPartition {
    pairs: Vec<(usize, usize)>,
}

impl PairPartition {
    /// Builds a pair partition of `{0, .., 2m-1}` from unordered pairs.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let n = 2 * pairs.len();
        let mut seen = vec![false; n];
        let mut normalized = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if a == b || b >= n || seen[a] || seen[b] {
                return Err(invalid(format!(
                    "pairs do not form a perfect matching of 0..{n}"
                )));
            }
            seen[a] = true;
            seen[b] = true;
            normalized.push((a, b));
        }
        normalized.sort_unstable();
        Ok(Self { pairs: normalized })
    }

    pub(crate) fn from_sorted(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn num_points(&self) -> usize {
        2 * self.pairs.len()
    }

    /// `partner[i]` is the point paired with `i`.
    pub fn partners(&self) -> Vec<usize> {
        let mut partner = vec![0; self.num_points()];
        for &(a, b) in &self.pairs {
            partner[a] = b;
            partner[b] = a;
        }
        partner
    }

    pub fn crossing_number(&self) -> usize {
        let mut count = 0;
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            for &(c, d) in &self.pairs[i + 1..] {
                let (lo, hi) = if a < c {
                    ((a, b), (c, d))
                } else {
                    ((c, d), (a, b))
                };
                if lo.0 < hi.0 && hi.0 < lo.1 && lo.1 < hi.1 {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn is_noncrossing(&self) -> bool {
        self.crossing_number() == 0
    }
}

impl fmt::Display for PairPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({},{})", a + 1, b + 1)?;
        }
        write!(f, "}}")
    }
}

fn check_points(n_points: usize) -> Result<()> {
    if n_points > MAX_PAIRING_POINTS {
        return Err(Error::SizeLimit(format!(
            "{n_points} points requested, at most {MAX_PAIRING_POINTS} are enumerated"
        )));
    }
    Ok(())
}

struct Search<'a, A, V> {
    n: usize,
    paired: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    noncrossing_only: bool,
    allow: &'a A,
    visit: &'a mut V,
}

impl<A, V> Search<'_, A, V>
where
    A: Fn(usize, usize) -> bool,
    V: FnMut(&[(usize, usize)], usize),
{
    fn run(&mut self, crossings: usize) {
        let Some(a) = (0..self.n).find(|&i| !self.paired[i]) else {
            (self.visit)(&self.pairs, crossings);
            return;
        };
        self.paired[a] = true;
        let mut free_between = 0;
        for b in a + 1..self.n {
            if self.paired[b] {
                continue;
            }
            let skip = self.noncrossing_only && free_between % 2 == 1;
            if !skip && (self.allow)(a, b) {
                // Existing pairs all open before `a`; they cross (a, b) iff
                // they close strictly inside it.
                let inc = self.pairs.iter().filter(|&&(_, d)| a < d && d < b).count();
                if !(self.noncrossing_only && inc > 0) {
                    self.paired[b] = true;
                    self.pairs.push((a, b));
                    self.run(crossings + inc);
                    self.pairs.pop();
                    self.paired[b] = false;
                }
            }
            free_between += 1;
        }
        self.paired[a] = false;
    }
}

/// Calls `visit(pairs, crossing_number)` for every pair partition of
/// `n_points` points whose pairs all satisfy `allow`, in enumeration order.
pub fn visit_pairings<A, V>(
    n_points: usize,
    noncrossing_only: bool,
    allow: A,
    mut visit: V,
) -> Result<()>
where
    A: Fn(usize, usize) -> bool,
    V: FnMut(&[(usize, usize)], usize),
{
    check_points(n_points)?;
    if n_points % 2 == 1 {
        return Ok(());
    }
    let mut search = Search {
        n: n_points,
        paired: vec![false; n_points],
        pairs: Vec::with_capacity(n_points / 2),
        noncrossing_only,
        allow: &allow,
        visit: &mut visit,
    };
    search.run(0);
    Ok(())
}

/// All perfect matchings of `2m` points in deterministic order.
pub fn enumerate_pair_partitions(m: usize) -> Result<Vec<PairPartition>> {
    let mut out = Vec::new();
    visit_pairings(
        2 * m,
        false,
        |_, _| true,
        |pairs, _| out.push(PairPartition::from_sorted(pairs.to_vec())),
    )?;
    Ok(out)
}

/// All non-crossing perfect matchings of `2m` points.
pub fn enumerate_noncrossing_pair_partitions(m: usize) -> Result<Vec<PairPartition>> {
    let mut out = Vec::new();
    visit_pairings(
        2 * m,
        true,
        |_, _| true,
        |pairs, _| out.push(PairPartition::from_sorted(pairs.to_vec())),
    )?;
    Ok(out)
}

/// Maps each point to the index of the interval block containing it.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| std::iter::repeat_n(i, s))
        .collect()
}

/// Whether no pair of `p` joins two points of the same interval block.
pub fn is_respecting(p: &PairPartition, sizes: &[usize]) -> Result<bool> {
    let total: usize = sizes.iter().sum();
    if total != p.num_points() {
        return Err(invalid(format!(
            "block sizes sum to {total} but the pairing has {} points",
            p.num_points()
        )));
    }
    let label = block_labels(sizes);
    Ok(p.pairs.iter().all(|&(a, b)| label[a] != label[b]))
}

/// Non-crossing pairings of the concatenated blocks that respect them.
pub fn noncrossing_respecting_pairings(sizes: &[usize]) -> Result<Vec<PairPartition>> {
    let label = block_labels(sizes);
    let mut out = Vec::new();
    visit_pairings(
        label.len(),
        true,
        |a, b| label[a] != label[b],
        |pairs, _| out.push(PairPartition::from_sorted(pairs.to_vec())),
    )?;
    Ok(out)
}

fn weighted_sum<W: Fn(usize, usize) -> f64>(
    paired: &mut [bool],
    q: Option<f64>,
    weight: &W,
    open: &mut Vec<usize>,
    acc: f64,
) -> f64 {
    let Some(a) = paired.iter().position(|&p| !p) else {
        return acc;
    };
    paired[a] = true;
    let mut total = 0.0;
    let mut free_between = 0usize;
    for b in a + 1..paired.len() {
        if paired[b] {
            continue;
        }
        let w = weight(a, b);
        let inc = open.iter().filter(|&&d| a < d && d < b).count();
        let factor = match q {
            None => {
                if inc > 0 || free_between % 2 == 1 {
                    0.0
                } else {
                    1.0
                }
            }
            Some(q) => {
                if inc == 0 {
                    1.0
                } else {
                    q.powi(inc as i32)
                }
            }
        };
        free_between += 1;
        if w == 0.0 || factor == 0.0 {
            continue;
        }
        paired[b] = true;
        open.push(b);
        total += weighted_sum(paired, q, weight, open, acc * w * factor);
        open.pop();
        paired[b] = false;
    }
    paired[a] = false;
    total
}

/// Sums `prod weight(a, b)` over pairings of `n_points` points.
///
/// With `q = None` only non-crossing pairings contribute; with `Some(q)` every
/// pairing contributes with the extra factor `q^cr`, where `0^0 = 1`.
pub fn weighted_pairing_sum<W>(n_points: usize, q: Option<f64>, weight: W) -> Result<f64>
where
    W: Fn(usize, usize) -> f64,
{
    check_points(n_points)?;
    if n_points % 2 == 1 {
        return Ok(0.0);
    }
    let mut paired = vec![false; n_points];
    let mut open = Vec::with_capacity(n_points / 2);
    Ok(weighted_sum(&mut paired, q, &weight, &mut open, 1.0))
}

/// Number of inversions of a permutation of `0..k`.
pub fn inversions(perm: &[usize]) -> Result<usize> {
    let k = perm.len();
    let mut seen = vec![false; k];
    for &v in perm {
        if v >= k || seen[v] {
            return Err(invalid(format!("{perm:?} is not a permutation of 0..{k}")));
        }
        seen[v] = true;
    }
    let mut count = 0;
    for i in 0..k {
        for j in i + 1..k {
            if perm[i] > perm[j] {
                count += 1;
            }
        }
    }
    Ok(count)
}

pub fn catalan(m: usize) -> Result<u64> {
    if m > MAX_CATALAN_INDEX {
        return Err(Error::SizeLimit(format!(
            "catalan({m}) requested, the table stops at {MAX_CATALAN_INDEX}"
        )));
    }
    let mut c: u128 = 1;
    for n in 0..m as u128 {
        c = c * 2 * (2 * n + 1) / (n + 2);
    }
    Ok(c as u64)
}

/// A set partition of `0..k` as sorted blocks ordered by their minima.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    fn from_labels(labels: &[usize]) -> Self {
        let n_blocks = labels.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); n_blocks];
        for (i, &l) in labels.iter().enumerate() {
            blocks[l].push(i);
        }
        Self { blocks }
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Labels must be a restricted growth string: first occurrences increase.
fn labels_noncrossing(labels: &[usize]) -> bool {
    let n_blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut last = vec![0; n_blocks];
    for (i, &l) in labels.iter().enumerate() {
        last[l] = i;
    }
    let mut seen = vec![false; n_blocks];
    let mut stack: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if !seen[l] {
            seen[l] = true;
            stack.push(l);
        } else if stack.last() != Some(&l) {
            return false;
        }
        if last[l] == i {
            stack.pop();
        }
    }
    true
}

fn visit_set_partitions<V: FnMut(&[usize])>(k: usize, visit: &mut V) {
    fn rec<V: FnMut(&[usize])>(labels: &mut Vec<usize>, k: usize, max: usize, visit: &mut V) {
        if labels.len() == k {
            visit(labels);
            return;
        }
        let limit = if labels.is_empty() { 0 } else { max + 1 };
        for l in 0..=limit {
            labels.push(l);
            rec(labels, k, max.max(l), visit);
            labels.pop();
        }
    }
    let mut labels = Vec::with_capacity(k);
    rec(&mut labels, k, 0, visit);
}

/// NC(k), obtained by filtering all set partitions of `0..k`.
pub fn noncrossing_partitions(k: usize) -> Result<Vec<SetPartition>> {
    if k > MAX_PARTITION_SIZE {
        return Err(Error::SizeLimit(format!(
            "NC({k}) requested, at most NC({MAX_PARTITION_SIZE}) is enumerated"
        )));
    }
    let mut out = Vec::new();
    visit_set_partitions(k, &mut |labels: &[usize]| {
        if labels_noncrossing(labels) {
            out.push(SetPartition::from_labels(labels));
        }
    });
    Ok(out)
}

fn check_sequence(values: &[f64], k: usize, what: &str) -> Result<()> {
    if k > MAX_PARTITION_SIZE {
        return Err(Error::SizeLimit(format!(
            "order {k} requested, at most {MAX_PARTITION_SIZE} is supported"
        )));
    }
    if values.len() < k {
        return Err(invalid(format!(
            "{} {what} given, {k} needed",
            values.len()
        )));
    }
    Ok(())
}

/// Free cumulants `kappa_1..kappa_k` from moments `m_1..m_k` (index 0 holds order 1).
pub fn moments_to_free_cumulants(moments: &[f64], k: usize) -> Result<Vec<f64>> {
    check_sequence(moments, k, "moments")?;
    let mut kappa: Vec<f64> = Vec::with_capacity(k);
    for n in 1..=k {
        let mut rest = 0.0;
        for p in noncrossing_partitions(n)? {
            if p.blocks.len() == 1 {
                continue;
            }
            rest += p.blocks.iter().map(|b| kappa[b.len() - 1]).product::<f64>();
        }
        kappa.push(moments[n - 1] - rest);
    }
    Ok(kappa)
}

/// Moments `m_1..m_k` from free cumulants `kappa_1..kappa_k`.
pub fn free_cumulants_to_moments(cumulants: &[f64], k: usize) -> Result<Vec<f64>> {
    check_sequence(cumulants, k, "cumulants")?;
    (1..=k)
        .map(|n| {
            Ok(noncrossing_partitions(n)?
                .iter()
                .map(|p| {
                    p.blocks
                        .iter()
                        .map(|b| cumulants[b.len() - 1])
                        .product::<f64>()
                })
                .sum())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(pairs: &[(usize, usize)]) -> PairPartition {
        PairPartition::new(pairs.iter().map(|&(a, b)| (a - 1, b - 1)).collect()).unwrap()
    }

    #[test]
    fn enumeration_order_for_four_points() {
        let all = enumerate_pair_partitions(2).unwrap();
        assert_eq!(
            all,
            vec![
                pp(&[(1, 2), (3, 4)]),
                pp(&[(1, 3), (2, 4)]),
                pp(&[(1, 4), (2, 3)])
            ]
        );
        assert_eq!(
            all.iter()
                .map(PairPartition::crossing_number)
                .collect::<Vec<_>>(),
            vec![0, 1, 0]
        );
    }

    #[test]
    fn empty_matching() {
        let all = enumerate_pair_partitions(0).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].num_points(), 0);
    }

    #[test]
    fn size_cap() {
        assert!(matches!(
            enumerate_pair_partitions(9),
            Err(Error::SizeLimit(_))
        ));
        assert!(matches!(catalan(31), Err(Error::SizeLimit(_))));
        assert!(matches!(
            noncrossing_partitions(11),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(pp(&[(1, 3), (2, 4)]).crossing_number(), 1);
        assert_eq!(pp(&[(1, 4), (2, 5), (3, 6)]).crossing_number(), 3);
        assert_eq!(pp(&[(1, 6), (2, 5), (3, 4)]).crossing_number(), 0);
    }

    #[test]
    fn respecting_examples() {
        assert!(is_respecting(&pp(&[(1, 3), (2, 4)]), &[2, 2]).unwrap());
        assert!(!is_respecting(&pp(&[(1, 2), (3, 4)]), &[2, 2]).unwrap());
        assert!(is_respecting(&pp(&[(1, 2)]), &[3]).is_err());
        assert_eq!(
            noncrossing_respecting_pairings(&[2, 2]).unwrap(),
            vec![pp(&[(1, 4), (2, 3)])]
        );
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(inversions(&[1, 0, 2]).unwrap(), 1);
        assert_eq!(inversions(&[2, 1, 0]).unwrap(), 3);
        assert!(inversions(&[0, 0]).is_err());
    }

    #[test]
    fn catalan_values() {
        let first: Vec<u64> = (0..6).map(|m| catalan(m).unwrap()).collect();
        assert_eq!(first, vec![1, 1, 2, 5, 14, 42]);
        assert_eq!(catalan(30).unwrap(), 3_814_986_502_092_304);
    }

    #[test]
    fn noncrossing_partition_counts() {
        for k in 0..=8 {
            assert_eq!(
                noncrossing_partitions(k).unwrap().len() as u64,
                catalan(k).unwrap()
            );
        }
    }

    #[test]
    fn cumulant_examples() {
        let k = moments_to_free_cumulants(&[0.0, 1.0, 0.0, 2.0], 4).unwrap();
        assert_eq!(k, vec![0.0, 1.0, 0.0, 0.0]);
        let k = moments_to_free_cumulants(&[0.0, 1.0, 1.0, 3.0], 4).unwrap();
        assert_eq!(k, vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn weighted_sum_counts() {
        assert_eq!(weighted_pairing_sum(6, None, |_, _| 1.0).unwrap(), 5.0);
        assert_eq!(
            weighted_pairing_sum(6, Some(1.0), |_, _| 1.0).unwrap(),
            15.0
        );
        assert_eq!(weighted_pairing_sum(6, Some(0.0), |_, _| 1.0).unwrap(), 5.0);
        assert_eq!(weighted_pairing_sum(5, Some(1.0), |_, _| 1.0).unwrap(), 0.0);
    }
}
