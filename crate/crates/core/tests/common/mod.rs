#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha20Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Random SPD matrix `Q·diag(λ)·Qᵀ` with eigenvalues log-spaced in `[1, cond]`.
pub fn random_spd(rng: &mut ChaCha20Rng, d: usize, cond: f64) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, d, d).qr().q();
    let eig = DVector::from_fn(d, |i, _| if d == 1 { 1.0 } else { cond.powf(i as f64 / (d - 1) as f64) });
    let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Random SPD system of dimension `1..=max_d` with condition number up to `max_cond`.
pub fn random_system(rng: &mut ChaCha20Rng, max_d: usize, max_cond: f64) -> (DMatrix<f64>, DVector<f64>) {
    let d = rng.random_range(1..=max_d);
    let cond = 10f64.powf(rng.random_range(0.0..=max_cond.log10()));
    let a = random_spd(rng, d, cond);
    let b = gaussian_vector(rng, d);
    (a, b)
}

pub fn relative_residual(a: &DMatrix<f64>, w: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a * w - b).norm() / b.norm()
}

pub fn relative_error(w: &DVector<f64>, reference: &DVector<f64>) -> f64 {
    (w - reference).norm() / reference.norm()
}
