//! Small dense least-squares solver (one-sided Jacobi SVD).
//!
//! Only what the polarimetric inversion needs: a tall or square design
//! matrix, its singular values for the condition number, and the
//! minimum-norm least-squares solution.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Thin SVD `A = U Σ Vᵀ` with columns stored separately.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors, one `Vec` of length `rows` per column.
    pub u: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    /// Right singular vectors, one `Vec` of length `cols` per column.
    pub v: Vec<Vec<f64>>,
}

impl Svd {
    pub fn condition_number(&self) -> f64 {
        let max = self.sigma.iter().cloned().fold(0.0, f64::max);
        let min = self.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

const MAX_SWEEPS: usize = 60;

/// One-sided Jacobi SVD; requires `rows >= cols`.
pub fn svd(a: &Matrix) -> Svd {
    assert!(a.rows >= a.cols, "svd needs a tall or square matrix");
    let (m, n) = (a.rows, a.cols);
    let mut u: Vec<Vec<f64>> = (0..n).map(|c| (0..m).map(|r| a.get(r, c)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                rotate_pair(&mut u, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = Vec::with_capacity(n);
    for col in u.iter_mut() {
        let norm = sqrt(col.iter().map(|x| x * x).sum());
        sigma.push(norm);
        if norm > 0.0 {
            col.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Svd { u, sigma, v }
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub condition_number: f64,
    /// Euclidean norm of `A x - b`.
    pub residual_norm: f64,
    pub rank: usize,
}

/// Minimum-norm solution of `min ‖A x − b‖₂`.
pub fn lstsq(a: &Matrix, b: &[f64]) -> LeastSquares {
    assert_eq!(b.len(), a.rows, "right-hand side length");
    let dec = svd(a);
    let max_sigma = dec.sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = max_sigma * f64::EPSILON * a.rows.max(a.cols) as f64;
    let mut x = vec![0.0; a.cols];
    let mut rank = 0;
    for ((uj, vj), &sj) in dec.u.iter().zip(&dec.v).zip(&dec.sigma) {
        if sj <= cutoff {
            continue;
        }
        rank += 1;
        let coeff = uj.iter().zip(b).map(|(u, b)| u * b).sum::<f64>() / sj;
        for (xi, v) in x.iter_mut().zip(vj) {
            *xi += coeff * v;
        }
    }
    let fitted = a.mul_vec(&x);
    let residual_norm = sqrt(fitted.iter().zip(b).map(|(f, b)| (f - b) * (f - b)).sum());
    LeastSquares { x, condition_number: dec.condition_number(), residual_norm, rank }
}
