//! GUE Monte Carlo: normalized trace moments of random Hermitian matrices
//! against the semicircular pairing formula.
//!
//! Every matrix is drawn from its own ChaCha8 stream, indexed by replicate
//! and family component, so a run is reproducible from one seed regardless
//! of how replicates are scheduled across threads.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cmatrix::CMatrix;
use crate::error::{invalid, Error, Result};
use crate::spd::SpdCovariance;
use crate::wigner_moments::family_moment;

pub const MAX_GUE_DIM: usize = 4096;
pub const MAX_WORD_LEN: usize = 8;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_GUE_DIM {
        return Err(Error::SizeLimit(format!(
            "GUE dimension must lie in 1..={MAX_GUE_DIM}, got {n}"
        )));
    }
    Ok(())
}

fn gue_from_rng(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    // Entries of A have E|a|^2 = 1; H = (A + A^*) / sqrt(2N).
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut a_re = DMatrix::zeros(n, n);
    let mut a_im = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a_re[(i, j)] = draw() * half;
            a_im[(i, j)] = draw() * half;
        }
    }
    let s = 1.0 / (2.0 * n as f64).sqrt();
    CMatrix {
        re: (&a_re + a_re.transpose()) * s,
        im: (&a_im - a_im.transpose()) * s,
    }
}

/// One `N × N` GUE matrix normalized so that `(1/N) Tr` moments approach the
/// standard semicircle.
pub fn sample_gue(n: usize, seed: u64) -> Result<CMatrix> {
    check_dim(n)?;
    Ok(gue_from_rng(n, &mut stream_rng(seed, 0)))
}

fn family_from_streams(c: &SpdCovariance, n: usize, seed: u64, first_stream: u64) -> Vec<CMatrix> {
    let k = c.dim();
    let raw: Vec<CMatrix> = (0..k)
        .map(|j| gue_from_rng(n, &mut stream_rng(seed, first_stream + j as u64)))
        .collect();
    let root = c.sqrt();
    (0..k)
        .map(|i| {
            let mut y = CMatrix::zeros(n, n);
            for (j, x) in raw.iter().enumerate() {
                let w = root[(i, j)];
                if w != 0.0 {
                    y.re += &x.re * w;
                    y.im += &x.im * w;
                }
            }
            y
        })
        .collect()
}

/// `Y = C^{1/2} X` for independent GUE draws `X_1, .., X_k`.
pub fn sample_family(c: &SpdCovariance, n: usize, seed: u64) -> Result<Vec<CMatrix>> {
    check_dim(n)?;
    Ok(family_from_streams(c, n, seed, 0))
}

/// Products of family matrices along words, sharing prefixes and using
/// `Y_{w_k} .. Y_{w_1} = (Y_{w_1} .. Y_{w_k})^*` for Hermitian factors.
struct WordProducts<'a> {
    mats: &'a [CMatrix],
    memo: HashMap<Vec<usize>, CMatrix>,
}

impl<'a> WordProducts<'a> {
    fn new(mats: &'a [CMatrix]) -> Self {
        Self {
            mats,
            memo: HashMap::new(),
        }
    }

    fn product(&mut self, word: &[usize]) -> CMatrix {
        if word.len() == 1 {
            return self.mats[word[0]].clone();
        }
        if let Some(m) = self.memo.get(word) {
            return m.clone();
        }
        let rev: Vec<usize> = word.iter().rev().copied().collect();
        if let Some(m) = self.memo.get(&rev) {
            return m.adjoint();
        }
        let prefix = self.product(&word[..word.len() - 1]);
        let m = prefix.mul(&self.mats[word[word.len() - 1]]);
        self.memo.insert(word.to_vec(), m.clone());
        m
    }

    /// `(1/N) Tr(Y_{w_1} .. Y_{w_L})`.
    fn normalized_trace(&mut self, word: &[usize]) -> Complex64 {
        let n = self.mats[0].shape().0 as f64;
        match word.len() {
            0 => Complex64::new(1.0, 0.0),
            1 => self.mats[word[0]].trace() / n,
            len => {
                let mid = len / 2;
                let left = self.product(&word[..mid]);
                let right = self.product(&word[mid..]);
                left.trace_of_product(&right) / n
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McRow {
    pub word: Vec<usize>,
    pub prediction: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Averages `(1/N) Re Tr` of each word over `reps` independent families and
/// compares with the semicircular prediction. A word passes when the error
/// is within `3 stderr + 10 / N^2`.
pub fn mc_compare(
    c: &SpdCovariance,
    words: &[Vec<usize>],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<McReport> {
    check_dim(n)?;
    if reps < 2 {
        return Err(invalid(
            "at least two replicates are needed for a standard error",
        ));
    }
    for w in words {
        if w.len() > MAX_WORD_LEN {
            return Err(Error::SizeLimit(format!(
                "word length {} exceeds {MAX_WORD_LEN}",
                w.len()
            )));
        }
    }
    let predictions: Vec<f64> = words
        .iter()
        .map(|w| family_moment(c, w))
        .collect::<Result<_>>()?;
    let k = c.dim() as u64;
    let samples: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mats = family_from_streams(c, n, seed, r as u64 * k);
            let mut wp = WordProducts::new(&mats);
            words.iter().map(|w| wp.normalized_trace(w).re).collect()
        })
        .collect();
    let allowance = 10.0 / (n as f64 * n as f64);
    let rows = words
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (w, prediction))| {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let stderr = (var / reps as f64).sqrt();
            let pass = (mean - prediction).abs() <= 3.0 * stderr + allowance;
            McRow {
                word: w.clone(),
                prediction,
                estimate: mean,
                stderr,
                pass,
            }
        })
        .collect();
    Ok(McReport {
        n,
        reps,
        seed,
        rows,
    })
}
