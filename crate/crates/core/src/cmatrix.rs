//! Dense complex matrices stored as a pair of real matrices.
//!
//! Keeping the real and imaginary parts apart lets every product go through
//! the blocked real GEMM kernel; a complex product costs three real ones.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            re: DMatrix::zeros(rows, cols),
            im: DMatrix::zeros(rows, cols),
        }
    }

    pub fn from_real(re: DMatrix<f64>) -> Self {
        let im = DMatrix::zeros(re.nrows(), re.ncols());
        Self { re, im }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(
        rows: usize,
        cols: usize,
        mut f: F,
    ) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let z = f(i, j);
                m.re[(i, j)] = z.re;
                m.im[(i, j)] = z.im;
            }
        }
        m
    }

    /// Reads a row-major slice of complex entries.
    pub fn from_row_major(rows: usize, cols: usize, data: &[Complex64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            re: DMatrix::from_row_iterator(rows, cols, data.iter().map(|z| z.re)),
            im: DMatrix::from_row_iterator(rows, cols, data.iter().map(|z| z.im)),
        }
    }

    pub fn to_row_major(&self) -> Vec<Complex64> {
        let (rows, cols) = self.shape();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                out.push(Complex64::new(self.re[(i, j)], self.im[(i, j)]));
            }
        }
        out
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.re.nrows(), self.re.ncols())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn is_real(&self) -> bool {
        self.im.iter().all(|&v| v == 0.0)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            re: self.re.transpose(),
            im: -self.im.transpose(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            re: self.re.transpose(),
            im: self.im.transpose(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            re: &self.re * c,
            im: &self.im * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_real() && other.is_real() {
            let re = &self.re * &other.re;
            let im = DMatrix::zeros(re.nrows(), re.ncols());
            return Self { re, im };
        }
        let p1 = &self.re * &other.re;
        let p2 = &self.im * &other.im;
        let p3 = (&self.re + &self.im) * (&other.re + &other.im);
        let im = p3 - &p1 - &p2;
        Self { re: p1 - p2, im }
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.re.nrows().min(self.re.ncols());
        (0..n).map(|i| self.get(i, i)).sum()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_of_product(&self, other: &Self) -> Complex64 {
        let (rows, cols) = self.shape();
        assert_eq!(other.shape(), (cols, rows));
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let (a, b) = (self.re[(i, j)], self.im[(i, j)]);
                let (c, d) = (other.re[(j, i)], other.im[(j, i)]);
                re += a * c - b * d;
                im += a * d + b * c;
            }
        }
        Complex64::new(re, im)
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.re.norm_squared() + self.im.norm_squared()
    }
}
