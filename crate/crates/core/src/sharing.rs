//! Real-number Shamir-style secret sharing.
//!
//! A secret `s` is embedded in a polynomial of degree at most `t` written in a
//! Lagrange basis over the nodes `{0} ∪ {α_i : i ∈ subset}`. The value at `0`
//! is the secret, the values at the other `t` nodes are Gaussian with variance
//! `σ_β²`, and party `i` receives the polynomial evaluated at its point `α_i`.
//!
//! Party indices are zero-based throughout the library.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Party count, privacy threshold, evaluation points and the variance of the
/// random interpolation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharePolicy {
    t: usize,
    alphas: Vec<f64>,
    sigma_beta_sq: f64,
}

impl SharePolicy {
    /// Builds a policy for `alphas.len()` parties.
    pub fn new(t: usize, alphas: Vec<f64>, sigma_beta_sq: f64) -> Result<Self> {
        let n = alphas.len();
        if n < 2 {
            return Err(Error::InvalidPolicy(format!("need at least 2 parties, got {n}")));
        }
        if t == 0 || t >= n {
            return Err(Error::InvalidPolicy(format!("threshold must satisfy 1 <= t < n, got t={t}, n={n}")));
        }
        if !(sigma_beta_sq > 0.0 && sigma_beta_sq.is_finite()) {
            return Err(Error::InvalidPolicy(format!("sigma_beta^2 must be positive, got {sigma_beta_sq}")));
        }
        for (i, &a) in alphas.iter().enumerate() {
            if !a.is_finite() || a == 0.0 {
                return Err(Error::InvalidPolicy(format!("alpha_{i} = {a} must be finite and nonzero")));
            }
            if alphas[..i].contains(&a) {
                return Err(Error::InvalidPolicy(format!("alpha_{i} = {a} is not distinct")));
            }
        }
        Ok(Self { t, alphas, sigma_beta_sq })
    }

    /// Evenly spaced points `α_i = 0.2·i − 0.1` for `i = 1..=n`.
    pub fn with_grid_alphas(n: usize, t: usize, sigma_beta_sq: f64) -> Result<Self> {
        Self::new(t, grid_alphas(n), sigma_beta_sq)
    }

    /// Points drawn uniformly from `[0, 1)`, redrawn on zero or collision.
    pub fn with_random_alphas<R: Rng + ?Sized>(n: usize, t: usize, sigma_beta_sq: f64, rng: &mut R) -> Result<Self> {
        let mut alphas: Vec<f64> = Vec::with_capacity(n);
        while alphas.len() < n {
            let a: f64 = rng.random();
            if a != 0.0 && !alphas.contains(&a) {
                alphas.push(a);
            }
        }
        Self::new(t, alphas, sigma_beta_sq)
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sigma_beta_sq(&self) -> f64 {
        self.sigma_beta_sq
    }
}

/// `α_i = 0.2·i − 0.1` for `i = 1..=n`.
pub fn grid_alphas(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.2 * i as f64 - 0.1).collect()
}

/// Lagrange basis polynomials over a set of distinct nodes.
///
/// `L_i(x) = Π_{j≠i} (x − x_j) / (x_i − x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        for i in 0..nodes.len() {
            for j in 0..i {
                if nodes[i] == nodes[j] {
                    return Err(Error::DegenerateBasis(nodes[j], nodes[i]));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Evaluates `L_i(x)`.
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let xi = self.nodes[i];
        self.nodes.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| (x - xj) / (xi - xj)).product()
    }

    /// Evaluates every basis polynomial at `x`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| self.eval(i, x)).collect()
    }
}

/// Builds the basis over `{0} ∪ {α_i : i ∈ chosen_subset}`; the secret's node
/// is always index 0 of the returned basis.
pub fn make_basis(policy: &SharePolicy, chosen_subset: &[usize]) -> Result<LagrangeBasis> {
    if chosen_subset.len() != policy.t() {
        return Err(Error::InvalidSubset(format!("expected {} indices, got {}", policy.t(), chosen_subset.len())));
    }
    let mut nodes = Vec::with_capacity(policy.t() + 1);
    nodes.push(0.0);
    for (k, &i) in chosen_subset.iter().enumerate() {
        if i >= policy.n() {
            return Err(Error::InvalidSubset(format!("party index {i} out of range")));
        }
        if chosen_subset[..k].contains(&i) {
            return Err(Error::InvalidSubset(format!("duplicate party index {i}")));
        }
        nodes.push(policy.alphas()[i]);
    }
    LagrangeBasis::new(nodes)
}

/// A policy together with the basis subset fixed for a session.
///
/// Every [`SharedScalar`] carries an `Arc<Scheme>`; operands are compatible
/// when they were produced by the same scheme.
#[derive(Debug, PartialEq)]
pub struct Scheme {
    policy: SharePolicy,
    subset: Vec<usize>,
    basis: LagrangeBasis,
    // basis_at_party[i][j] = L_j(α_i)
    basis_at_party: Vec<Vec<f64>>,
    zero_weights: Vec<f64>,
}

impl Scheme {
    pub fn new(policy: SharePolicy, subset: Vec<usize>) -> Result<Arc<Self>> {
        let basis = make_basis(&policy, &subset)?;
        let basis_at_party = policy.alphas().iter().map(|&a| basis.eval_all(a)).collect();
        let zero_weights = stable_weights_at_zero(policy.alphas(), policy.t());
        Ok(Arc::new(Self { policy, subset, basis, basis_at_party, zero_weights }))
    }

    /// Draws the basis subset uniformly among all size-`t` subsets.
    pub fn with_random_subset<R: Rng + ?Sized>(policy: SharePolicy, rng: &mut R) -> Result<Arc<Self>> {
        let mut subset = rand::seq::index::sample(rng, policy.n(), policy.t()).into_vec();
        subset.sort_unstable();
        Self::new(policy, subset)
    }

    pub fn policy(&self) -> &SharePolicy {
        &self.policy
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.policy.n()
    }

    /// Shares `s` with fresh `β_j ~ N(0, σ_β²)`.
    pub fn share<R: Rng + ?Sized>(self: &Arc<Self>, s: f64, rng: &mut R) -> SharedScalar {
        let normal = Normal::new(0.0, self.policy.sigma_beta_sq.sqrt()).expect("positive variance");
        let betas: Vec<f64> = (0..self.policy.t()).map(|_| normal.sample(rng)).collect();
        self.share_with_betas(s, &betas)
    }

    /// Shares `s` using the given interpolation values at the `t` non-zero
    /// basis nodes. `betas.len()` must equal `t`.
    pub fn share_with_betas(self: &Arc<Self>, s: f64, betas: &[f64]) -> SharedScalar {
        assert_eq!(betas.len(), self.policy.t(), "one beta per non-zero basis node");
        let shares = self
            .basis_at_party
            .iter()
            .map(|row| row[0] * s + row[1..].iter().zip(betas).map(|(l, b)| l * b).sum::<f64>())
            .collect();
        SharedScalar { scheme: Arc::clone(self), shares }
    }

    /// Deterministic sharing of a public constant: all `β_j = 0`, so party `i`
    /// holds `a·L_0(α_i)`.
    pub fn share_constant(self: &Arc<Self>, a: f64) -> SharedScalar {
        let shares = self.basis_at_party.iter().map(|row| a * row[0]).collect();
        SharedScalar { scheme: Arc::clone(self), shares }
    }

    pub fn share_vector<R: Rng + ?Sized>(self: &Arc<Self>, v: &DVector<f64>, rng: &mut R) -> SharedVector {
        SharedVector::from_entries(v.iter().map(|&x| self.share(x, rng)).collect())
    }

    pub fn share_matrix<R: Rng + ?Sized>(self: &Arc<Self>, m: &DMatrix<f64>, rng: &mut R) -> SharedMatrix {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push(self.share(m[(i, j)], rng));
            }
        }
        SharedMatrix { rows: m.nrows(), cols: m.ncols(), entries }
    }

    fn reconstruct_all(&self, shares: &[f64]) -> f64 {
        self.zero_weights.iter().zip(shares).map(|(w, s)| w * s).sum()
    }
}

/// Weights at zero over the best-conditioned `t + 1` of the `n` points,
/// i.e. the subset minimising `Σ|w_k|`, zero elsewhere. Every subset gives the
/// same value in exact arithmetic; this one amplifies rounding the least when
/// evaluation points cluster. Falls back to all points when the search space is
/// large.
fn stable_weights_at_zero(points: &[f64], t: usize) -> Vec<f64> {
    const MAX_SUBSETS: u128 = 4096;
    let n = points.len();
    let all = interpolation_weights_at_zero(points);
    let subsets = (0..t as u128 + 1).fold(1u128, |acc, k| acc * (n as u128 - k) / (k + 1));
    if n == t + 1 || n > 64 || subsets > MAX_SUBSETS {
        return all;
    }
    let lebesgue = |w: &[f64]| w.iter().map(|w| w.abs()).sum::<f64>();
    let mut best = (lebesgue(&all), all);
    let mut idx: Vec<usize> = (0..=t).collect();
    loop {
        let pts: Vec<f64> = idx.iter().map(|&i| points[i]).collect();
        let w = interpolation_weights_at_zero(&pts);
        let norm = lebesgue(&w);
        if norm < best.0 {
            let mut full = vec![0.0; n];
            for (&i, &wi) in idx.iter().zip(&w) {
                full[i] = wi;
            }
            best = (norm, full);
        }
        // Next combination in lexicographic order.
        let Some(k) = (0..=t).rev().find(|&k| idx[k] < n - (t + 1 - k)) else { break };
        idx[k] += 1;
        for j in k + 1..=t {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best.1
}

fn interpolation_weights_at_zero(points: &[f64]) -> Vec<f64> {
    (0..points.len())
        .map(|i| points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &xj)| xj / (xj - points[i])).product())
        .collect()
}

/// Interpolates `(α_i, value)` pairs and evaluates the polynomial at zero.
pub fn reconstruct(shares: &[(usize, f64)], policy: &SharePolicy) -> Result<f64> {
    let needed = policy.t() + 1;
    if shares.len() < needed {
        return Err(Error::InsufficientShares { needed, got: shares.len() });
    }
    let mut points = Vec::with_capacity(shares.len());
    for (k, &(i, _)) in shares.iter().enumerate() {
        if i >= policy.n() {
            return Err(Error::InvalidSubset(format!("party index {i} out of range")));
        }
        if shares[..k].iter().any(|&(j, _)| j == i) {
            return Err(Error::InvalidSubset(format!("duplicate party index {i}")));
        }
        points.push(policy.alphas()[i]);
    }
    let weights = interpolation_weights_at_zero(&points);
    Ok(weights.iter().zip(shares).map(|(w, &(_, v))| w * v).sum())
}

/// The vector `[s]` of per-party shares.
#[derive(Debug, Clone)]
pub struct SharedScalar {
    scheme: Arc<Scheme>,
    shares: Vec<f64>,
}

impl SharedScalar {
    pub fn scheme(&self) -> &Arc<Scheme> {
        &self.scheme
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    /// Share of party `i`.
    pub fn share(&self, i: usize) -> f64 {
        self.shares[i]
    }

    /// `(index, value)` pairs for the given parties.
    pub fn pairs(&self, parties: &[usize]) -> Vec<(usize, f64)> {
        parties.iter().map(|&i| (i, self.shares[i])).collect()
    }

    /// Reconstructs from all `n` shares without touching any ledger.
    pub fn reconstruct(&self) -> f64 {
        self.scheme.reconstruct_all(&self.shares)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.scheme, &other.scheme) || *self.scheme == *other.scheme {
            Ok(())
        } else {
            Err(Error::IncompatibleSharing)
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        let shares = self.shares.iter().zip(&other.shares).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { scheme: Arc::clone(&self.scheme), shares })
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { scheme: Arc::clone(&self.scheme), shares: self.shares.iter().map(|&s| f(s)).collect() }
    }

    /// `[x] + [y]`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `[x] − [y]`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `a·[x]`.
    pub fn mul_const(&self, a: f64) -> Self {
        self.map(|s| a * s)
    }

    /// `a + [x]`, realized by adding the constant sharing of `a`.
    pub fn add_const(&self, a: f64) -> Self {
        let c = self.scheme.share_constant(a);
        Self {
            scheme: Arc::clone(&self.scheme),
            shares: self.shares.iter().zip(&c.shares).map(|(x, y)| x + y).collect(),
        }
    }

    /// `[x] + a·[y]` in one pass.
    pub fn add_scaled(&self, a: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + a * y)
    }
}

pub fn add_shared(x: &SharedScalar, y: &SharedScalar) -> Result<SharedScalar> {
    x.add(y)
}

pub fn add_const(a: f64, x: &SharedScalar) -> SharedScalar {
    x.add_const(a)
}

pub fn mul_const(a: f64, x: &SharedScalar) -> SharedScalar {
    x.mul_const(a)
}

/// A shared column vector.
#[derive(Debug, Clone)]
pub struct SharedVector {
    entries: Vec<SharedScalar>,
}

impl SharedVector {
    pub fn from_entries(entries: Vec<SharedScalar>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &SharedScalar {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[SharedScalar] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<SharedScalar> {
        self.entries
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!("vector lengths {} and {}", self.len(), other.len())));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn mul_const(&self, a: f64) -> Self {
        Self { entries: self.entries.iter().map(|e| e.mul_const(a)).collect() }
    }

    pub fn add_const(&self, v: &DVector<f64>) -> Result<Self> {
        if self.len() != v.len() {
            return Err(Error::ShapeMismatch(format!("vector lengths {} and {}", self.len(), v.len())));
        }
        Ok(Self { entries: self.entries.iter().zip(v.iter()).map(|(e, &c)| e.add_const(c)).collect() })
    }

    pub fn reconstruct(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.entries.iter().map(SharedScalar::reconstruct))
    }
}

/// A shared matrix, row-major.
#[derive(Debug, Clone)]
pub struct SharedMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<SharedScalar>,
}

impl SharedMatrix {
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<SharedScalar>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} entries for a {rows}x{cols} matrix", entries.len())));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &SharedScalar {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: SharedScalar) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn entries(&self) -> &[SharedScalar] {
        &self.entries
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch(format!("{}x{} + {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    pub fn mul_const(&self, a: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|e| e.mul_const(a)).collect() }
    }

    /// Entrywise `[M] + C` for a public matrix `C`.
    pub fn add_const(&self, c: &DMatrix<f64>) -> Result<Self> {
        if (self.rows, self.cols) != (c.nrows(), c.ncols()) {
            return Err(Error::ShapeMismatch(format!("{}x{} + {}x{}", self.rows, self.cols, c.nrows(), c.ncols())));
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                entries.push(self.get(i, j).add_const(c[(i, j)]));
            }
        }
        Ok(Self { rows: self.rows, cols: self.cols, entries })
    }

    /// `P·[M]` for a public matrix `P`; local.
    pub fn left_mul_public(&self, p: &DMatrix<f64>) -> Result<Self> {
        if p.ncols() != self.rows {
            return Err(Error::ShapeMismatch(format!("{}x{} times {}x{}", p.nrows(), p.ncols(), self.rows, self.cols)));
        }
        let mut entries = Vec::with_capacity(p.nrows() * self.cols);
        for i in 0..p.nrows() {
            for j in 0..self.cols {
                let mut acc = self.get(0, j).mul_const(p[(i, 0)]);
                for k in 1..self.rows {
                    acc = acc.add_scaled(p[(i, k)], self.get(k, j))?;
                }
                entries.push(acc);
            }
        }
        Ok(Self { rows: p.nrows(), cols: self.cols, entries })
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.rows, self.cols, self.entries.iter().map(SharedScalar::reconstruct))
    }
}
