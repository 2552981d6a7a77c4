//! PAC-Bayes linear regression with a Gaussian prior.
//!
//! The maximum-a-posteriori weights of the Gibbs posterior satisfy
//!
//! ```text
//! ( (2λ/N) Σ_i X_i + Σ_w⁻¹ ) w = (2λ/N) Σ_i z_i + Σ_w⁻¹ μ_w
//! ```
//!
//! where party `i` holds `X_i = Σ_j x_ij x_ijᵀ` and `z_i = Σ_j x_ij y_ij`.
//! This module computes the per-party aggregates, assembles the shared
//! system with local operations only, and provides the plaintext solution.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::Session;
use crate::error::{Error, Result};
use crate::sharing::{SharedMatrix, SharedVector};

/// Rows held by one party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyDataset {
    pub party: usize,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl PartyDataset {
    pub fn new(party: usize, features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::ShapeMismatch(format!("{} feature rows for {} targets", features.len(), targets.len())));
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if let Some(bad) = features.iter().position(|r| r.len() != d) {
                return Err(Error::ShapeMismatch(format!(
                    "row {bad} has {} features, expected {d}",
                    features[bad].len()
                )));
            }
        }
        Ok(Self { party, features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Gaussian prior `N(μ_w, Σ_w)` with `Σ_w` positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl PriorSpec {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::ShapeMismatch(format!(
                "prior mean of length {d} with {}x{} covariance",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !is_symmetric(&covariance, 1e-12) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let mut precision = chol.inverse();
        symmetrize(&mut precision);
        Ok(Self { mean, covariance, precision })
    }

    /// `N(0, I)`.
    pub fn standard(d: usize) -> Self {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `Σ_w⁻¹`.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConfig {
    pub lambda: f64,
    pub total_samples: usize,
    pub prior: PriorSpec,
}

impl RegressionConfig {
    pub fn new(lambda: f64, total_samples: usize, prior: PriorSpec) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if total_samples == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { lambda, total_samples, prior })
    }

    /// The data weight `2λ/N`.
    pub fn data_weight(&self) -> f64 {
        2.0 * self.lambda / self.total_samples as f64
    }
}

/// Per-party sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
}

/// `X_i = Σ x xᵀ` and `z_i = Σ x y`, built symmetrically.
pub fn local_aggregate(data: &PartyDataset) -> Result<Aggregates> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.dim();
    let mut gram = DMatrix::zeros(d, d);
    let mut moment = DVector::zeros(d);
    for (x, &y) in data.features.iter().zip(&data.targets) {
        for i in 0..d {
            for j in i..d {
                gram[(i, j)] += x[i] * x[j];
            }
            moment[i] += x[i] * y;
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    Ok(Aggregates { gram, moment })
}

/// One party's aggregates after sharing.
#[derive(Debug, Clone)]
pub struct SharedAggregates {
    pub gram: SharedMatrix,
    pub moment: SharedVector,
}

/// Secret-shares a party's aggregates. The upper triangle is shared and
/// mirrored so the shared Gram matrix stays symmetric.
pub fn share_aggregates(agg: &Aggregates, session: &mut Session) -> SharedAggregates {
    let d = agg.gram.nrows();
    let mut upper = vec![None; d * d];
    for i in 0..d {
        for j in i..d {
            upper[i * d + j] = Some(session.share(agg.gram[(i, j)]));
        }
    }
    let entries = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            let src = if i <= j { i * d + j } else { j * d + i };
            upper[src].clone().expect("upper triangle filled")
        })
        .collect();
    SharedAggregates {
        gram: SharedMatrix::from_entries(d, d, entries).expect("d*d entries"),
        moment: session.share_vector(&agg.moment),
    }
}

/// `[A] = (2λ/N) Σ [X_i] + Σ_w⁻¹` and `[b] = (2λ/N) Σ [z_i] + Σ_w⁻¹ μ_w`.
///
/// Uses only local operations; no value is opened.
pub fn assemble_system(shared: &[SharedAggregates], config: &RegressionConfig) -> Result<(SharedMatrix, SharedVector)> {
    let first = shared.first().ok_or(Error::EmptyDataset)?;
    let d = config.prior.dim();
    for s in shared {
        if s.gram.nrows() != d || s.gram.ncols() != d || s.moment.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "aggregates of dimension {}x{} / {} against a prior of dimension {d}",
                s.gram.nrows(),
                s.gram.ncols(),
                s.moment.len()
            )));
        }
    }
    let mut gram = first.gram.clone();
    let mut moment = first.moment.clone();
    for s in &shared[1..] {
        gram = gram.add(&s.gram)?;
        moment = moment.add(&s.moment)?;
    }
    let weight = config.data_weight();
    let prior_rhs = config.prior.precision() * config.prior.mean();
    let a = gram.mul_const(weight).add_const(config.prior.precision())?;
    let b = moment.mul_const(weight).add_const(&prior_rhs)?;
    Ok((a, b))
}

/// Divides `[A]` and `[b]` by the public scalar `1 + 2λ/N`.
///
/// The solution is unchanged, but entries stay of order one for large λ.
/// Without this, a system assembled at λ ≈ 1e12 has entries near 1e12 and an
/// inverse near 1e-12, far outside the range where fixed-variance masks and
/// triples keep their rounding error small.
pub fn rescale_system(a: &SharedMatrix, b: &SharedVector, config: &RegressionConfig) -> (SharedMatrix, SharedVector) {
    let scale = 1.0 / (1.0 + config.data_weight());
    (a.mul_const(scale), b.mul_const(scale))
}

/// Plaintext `(A, b)`.
pub fn plaintext_system(aggregates: &[Aggregates], config: &RegressionConfig) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = config.prior.dim();
    let mut gram = DMatrix::zeros(d, d);
    let mut moment = DVector::zeros(d);
    for agg in aggregates {
        if agg.gram.shape() != (d, d) || agg.moment.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "aggregates of dimension {} against a prior of dimension {d}",
                agg.moment.len()
            )));
        }
        gram += &agg.gram;
        moment += &agg.moment;
    }
    let weight = config.data_weight();
    let a = gram * weight + config.prior.precision();
    let b = moment * weight + config.prior.precision() * config.prior.mean();
    Ok((a, b))
}

/// Solves the system in plaintext by Cholesky factorization. This is the
/// reference the secure solvers are checked against.
pub fn closed_form_solve(aggregates: &[Aggregates], config: &RegressionConfig) -> Result<DVector<f64>> {
    let (a, b) = plaintext_system(aggregates, config)?;
    factorization_solve(&a, &b)
}

/// Cholesky solve of an SPD system.
pub fn factorization_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.clone().cholesky().ok_or_else(|| Error::NumericalBreakdown("Cholesky factorization failed".into()))?;
    Ok(chol.solve(b))
}

pub fn predict(w: &DVector<f64>, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Mean squared error over `(features, target)` rows.
pub fn mse(w: &DVector<f64>, features: &[Vec<f64>], targets: &[f64]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let sum: f64 = features.iter().zip(targets).map(|(x, &y)| (predict(w, x) - y).powi(2)).sum();
    sum / targets.len() as f64
}

/// Sylvester check: a symmetric matrix is positive definite when it admits a
/// Cholesky factorization.
pub fn is_spd(a: &DMatrix<f64>) -> bool {
    a.is_square() && is_symmetric(a, 1e-9 * a.abs().max().max(1.0)) && a.clone().cholesky().is_some()
}

fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol))
}

fn symmetrize(a: &mut DMatrix<f64>) {
    for i in 0..a.nrows() {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AlphaChoice, SessionConfig};

    #[test]
    fn aggregate_single_row() {
        let d = PartyDataset::new(0, vec![vec![1.0, 0.0]], vec![2.0]).unwrap();
        let agg = local_aggregate(&d).unwrap();
        assert_eq!(agg.gram, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(agg.moment, DVector::from_vec(vec![2.0, 0.0]));
    }

    #[test]
    fn aggregate_two_rows() {
        let d = PartyDataset::new(0, vec![vec![1.0, 1.0], vec![1.0, -1.0]], vec![1.0, 1.0]).unwrap();
        let agg = local_aggregate(&d).unwrap();
        assert_eq!(agg.gram, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        assert_eq!(agg.moment, DVector::from_vec(vec![2.0, 0.0]));
    }

    #[test]
    fn empty_and_ragged_datasets() {
        let d = PartyDataset::new(0, vec![], vec![]).unwrap();
        assert_eq!(local_aggregate(&d).unwrap_err(), Error::EmptyDataset);
        assert!(PartyDataset::new(0, vec![vec![1.0], vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn non_spd_prior_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(PriorSpec::new(DVector::zeros(2), cov).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn zero_lambda_gives_prior_mean() {
        let mean = DVector::from_vec(vec![0.5, -1.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let prior = PriorSpec::new(mean.clone(), cov).unwrap();
        let data = PartyDataset::new(0, vec![vec![1.0, 2.0], vec![3.0, 1.0]], vec![1.0, 0.0]).unwrap();
        let config = RegressionConfig::new(0.0, 2, prior).unwrap();
        let w = closed_form_solve(&[local_aggregate(&data).unwrap()], &config).unwrap();
        assert!((w - mean).abs().max() < 1e-12);
    }

    #[test]
    fn one_dimensional_example() {
        let data = PartyDataset::new(0, vec![vec![1.0]], vec![1.0]).unwrap();
        // λ = N/2 makes the data weight exactly 1
        let config = RegressionConfig::new(0.5, 1, PriorSpec::standard(1)).unwrap();
        let aggs = [local_aggregate(&data).unwrap()];
        let (a, b) = plaintext_system(&aggs, &config).unwrap();
        assert_eq!(a[(0, 0)], 2.0);
        assert_eq!(b[0], 1.0);
        assert!((closed_form_solve(&aggs, &config).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn assembly_is_local_and_correct() {
        let mut session = Session::new(&SessionConfig::new(3, 2, 11).alphas(AlphaChoice::Grid)).unwrap();
        let parties = [
            PartyDataset::new(0, vec![vec![0.2, 1.0], vec![0.4, 1.0]], vec![0.3, 0.5]).unwrap(),
            PartyDataset::new(1, vec![vec![0.9, 1.0]], vec![0.8]).unwrap(),
        ];
        let aggs: Vec<_> = parties.iter().map(|p| local_aggregate(p).unwrap()).collect();
        let shared: Vec<_> = aggs.iter().map(|a| share_aggregates(a, &mut session)).collect();
        let config = RegressionConfig::new(10.0, 3, PriorSpec::standard(2)).unwrap();
        let (sa, sb) = assemble_system(&shared, &config).unwrap();
        assert_eq!(session.ledger().openings, 0);
        let (a, b) = plaintext_system(&aggs, &config).unwrap();
        assert!((sa.reconstruct() - &a).abs().max() <= 1e-6 * a.abs().max());
        assert!((sb.reconstruct() - &b).abs().max() <= 1e-6 * b.abs().max());
        assert!(is_spd(&sa.reconstruct()));
    }

    #[test]
    fn mse_examples() {
        let w = DVector::from_vec(vec![1.0]);
        assert_eq!(mse(&w, &[vec![2.0]], &[3.0]), 1.0);
        let zero = DVector::zeros(1);
        assert!((mse(&zero, &[vec![1.0], vec![2.0]], &[2.0, 4.0]) - 10.0).abs() < 1e-15);
    }
}
