//! Dense complex linear algebra and FFT helpers shared by the numerical modules.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Forward (`e^{-2πi jk/n}`) and inverse (`e^{+2πi jk/n}`) unnormalized DFT plans of one length.
#[derive(Clone)]
pub struct DftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl DftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        DftPair {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in descending order.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn hermitian_eigen(a: &CMatrix) -> HermitianEigen {
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    HermitianEigen { values, vectors }
}

/// Largest eigenvalue of a Hermitian matrix together with a unit eigenvector.
pub fn top_eigenpair(a: &CMatrix) -> (f64, CVector) {
    let eig = hermitian_eigen(a);
    (eig.values[0], eig.vectors.column(0).into_owned())
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (i..n).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol))
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Operator (spectral) norm.
pub fn operator_norm(a: &CMatrix) -> f64 {
    if is_hermitian(a, 1e-14 * frobenius(a).max(1e-300)) {
        hermitian_eigen(a)
            .values
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        singular_values(a).first().copied().unwrap_or(0.0)
    }
}

/// Schatten `q`-norm; `q = ∞` gives the operator norm.
pub fn schatten_norm(a: &CMatrix, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(LabError::invalid(
            "q",
            "Schatten exponent must be at least 1",
        ));
    }
    if q == 2.0 {
        return Ok(frobenius(a));
    }
    let s = singular_values(a);
    if q.is_infinite() {
        return Ok(s.first().copied().unwrap_or(0.0));
    }
    Ok(s.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q))
}

/// Numerical radius `w(A) = sup |⟨Au,u⟩|` by a θ-sweep of the top eigenvalue of
/// `(e^{iθ}A + e^{-iθ}A*)/2` followed by golden-section refinement.
pub struct NumericalRadius {
    pub value: f64,
    pub theta: f64,
    pub vector: CVector,
}

pub fn numerical_radius(a: &CMatrix) -> NumericalRadius {
    let top = |theta: f64| -> (f64, CVector) {
        let rot = Complex64::from_polar(1.0, theta);
        let h = (a * rot + a.adjoint() * rot.conj()) * Complex64::new(0.5, 0.0);
        top_eigenpair(&h)
    };
    let sweep = 64;
    let step = 2.0 * std::f64::consts::PI / sweep as f64;
    let values: Vec<f64> = (0..sweep).map(|i| top(i as f64 * step).0).collect();
    let best = (0..sweep)
        .max_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(0);

    let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (top(x1).0, top(x2).0);
    let mut previous = values[best];
    for _ in 0..200 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = top(x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = top(x2).0;
        }
        let current = f1.max(f2);
        if (current - previous).abs() < 1e-10 && hi - lo < 1e-9 {
            break;
        }
        previous = current;
    }
    let theta = 0.5 * (lo + hi);
    let (value, vector) = top(theta);
    let (value, theta, vector) = if value >= values[best] {
        (value, theta, vector)
    } else {
        let t = best as f64 * step;
        let (v, u) = top(t);
        (v, t, u)
    };
    NumericalRadius {
        value: value.max(0.0),
        theta,
        vector,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_radius_of_nilpotent_jordan_block() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = ONE;
        let w = numerical_radius(&a);
        assert!((w.value - 0.5).abs() < 1e-10);
    }

    #[test]
    fn numerical_radius_of_hermitian_is_spectral_radius() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(-1.7, 0.0),
            Complex64::new(1.1, 0.0),
        ]));
        assert!((numerical_radius(&a).value - 1.7).abs() < 1e-10);
    }

    #[test]
    fn schatten_norms_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 4.0),
        ]));
        assert!((schatten_norm(&a, 1.0).unwrap() - 7.0).abs() < 1e-12);
        assert!((schatten_norm(&a, 2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((schatten_norm(&a, f64::INFINITY).unwrap() - 4.0).abs() < 1e-12);
        assert!(schatten_norm(&a, 0.5).is_err());
    }
}
