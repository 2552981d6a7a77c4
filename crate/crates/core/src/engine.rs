//! Simulated MPC session.
//!
//! A trusted dealer inside the session produces the preprocessing material
//! (Beaver triples, masks, random matrices). The online primitives open,
//! multiply and invert shared values and record every opening in an
//! [`OpeningLedger`]. Dealing is not counted.

use std::collections::VecDeque;
use std::ops::Sub;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sharing::{Scheme, SharePolicy, SharedMatrix, SharedScalar, SharedVector};

pub const DEFAULT_SIGMA_R_SQ: f64 = 1e4;
pub const DEFAULT_SIGMA_BETA_SQ: f64 = 1e5;
pub const DEFAULT_EPS_SINGULAR: f64 = 1e-12;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

/// Counts of communication-bearing events.
///
/// `multiplications` counts every Beaver multiplication, including the one
/// embedded in each inversion, so that
/// `openings == 2·multiplications + inversions + direct_openings`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningLedger {
    pub openings: u64,
    pub multiplications: u64,
    pub inversions: u64,
    pub direct_openings: u64,
}

impl OpeningLedger {
    /// Multiplications that were not part of an inversion.
    pub fn standalone_multiplications(&self) -> u64 {
        self.multiplications - self.inversions
    }

    pub fn is_consistent(&self) -> bool {
        self.openings == 2 * self.multiplications + self.inversions + self.direct_openings
    }

    /// Bytes broadcast, assuming every opening sends one 8-byte share from
    /// each of the `n` parties to the other `n − 1`.
    pub fn bytes(&self, n: usize) -> u64 {
        self.openings * (n as u64) * (n as u64 - 1) * 8
    }
}

impl Sub for OpeningLedger {
    type Output = OpeningLedger;

    fn sub(self, rhs: Self) -> Self {
        OpeningLedger {
            openings: self.openings - rhs.openings,
            multiplications: self.multiplications - rhs.multiplications,
            inversions: self.inversions - rhs.inversions,
            direct_openings: self.direct_openings - rhs.direct_openings,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeaverTriple {
    pub a: SharedScalar,
    pub b: SharedScalar,
    pub c: SharedScalar,
}

#[derive(Debug, Clone)]
pub struct RandomMask {
    pub r: SharedScalar,
}

/// How the parties' evaluation points are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AlphaChoice {
    /// Uniform on `[0, 1)`, drawn from the session RNG.
    Random,
    /// `α_i = 0.2·i − 0.1`.
    Grid,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub parties: usize,
    pub threshold: usize,
    pub alphas: AlphaChoice,
    pub sigma_r_sq: f64,
    pub sigma_beta_sq: f64,
    pub seed: u64,
    pub eps_singular: f64,
    pub max_attempts: u32,
}

impl SessionConfig {
    pub fn new(parties: usize, threshold: usize, seed: u64) -> Self {
        Self {
            parties,
            threshold,
            alphas: AlphaChoice::Random,
            sigma_r_sq: DEFAULT_SIGMA_R_SQ,
            sigma_beta_sq: DEFAULT_SIGMA_BETA_SQ,
            seed,
            eps_singular: DEFAULT_EPS_SINGULAR,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn alphas(mut self, alphas: AlphaChoice) -> Self {
        self.alphas = alphas;
        self
    }

    pub fn sigmas(mut self, sigma_r_sq: f64, sigma_beta_sq: f64) -> Self {
        self.sigma_r_sq = sigma_r_sq;
        self.sigma_beta_sq = sigma_beta_sq;
        self
    }
}

/// One run of the protocol: sharing scheme, dealer, RNG and ledger.
///
/// All randomness (evaluation points, basis subset, β values, triples,
/// masks) comes from one seeded generator, so identical seeds and inputs give
/// identical ledgers and outputs.
pub struct Session {
    scheme: Arc<Scheme>,
    sigma_r_sq: f64,
    mask_dist: Normal<f64>,
    rng: ChaCha20Rng,
    ledger: OpeningLedger,
    eps_singular: f64,
    max_attempts: u32,
    forced_triples: VecDeque<(f64, f64, f64)>,
    forced_masks: VecDeque<f64>,
}

impl Session {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        if !(config.sigma_r_sq > 0.0 && config.sigma_r_sq.is_finite()) {
            return Err(Error::InvalidPolicy(format!("sigma_r^2 must be positive, got {}", config.sigma_r_sq)));
        }
        if config.max_attempts == 0 {
            return Err(Error::InvalidArgument("max_attempts must be at least 1".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let policy = match &config.alphas {
            AlphaChoice::Random => {
                SharePolicy::with_random_alphas(config.parties, config.threshold, config.sigma_beta_sq, &mut rng)?
            }
            AlphaChoice::Grid => SharePolicy::with_grid_alphas(config.parties, config.threshold, config.sigma_beta_sq)?,
            AlphaChoice::Explicit(a) => {
                if a.len() != config.parties {
                    return Err(Error::InvalidPolicy(format!(
                        "{} evaluation points for {} parties",
                        a.len(),
                        config.parties
                    )));
                }
                SharePolicy::new(config.threshold, a.clone(), config.sigma_beta_sq)?
            }
        };
        let scheme = Scheme::with_random_subset(policy, &mut rng)?;
        Ok(Self::with_scheme(scheme, config.sigma_r_sq, rng, config.eps_singular, config.max_attempts))
    }

    /// A session over an existing scheme.
    pub fn from_scheme(scheme: Arc<Scheme>, sigma_r_sq: f64, seed: u64) -> Self {
        Self::with_scheme(
            scheme,
            sigma_r_sq,
            ChaCha20Rng::seed_from_u64(seed),
            DEFAULT_EPS_SINGULAR,
            DEFAULT_MAX_ATTEMPTS,
        )
    }

    fn with_scheme(
        scheme: Arc<Scheme>,
        sigma_r_sq: f64,
        rng: ChaCha20Rng,
        eps_singular: f64,
        max_attempts: u32,
    ) -> Self {
        Self {
            scheme,
            sigma_r_sq,
            mask_dist: Normal::new(0.0, sigma_r_sq.sqrt()).expect("positive variance"),
            rng,
            ledger: OpeningLedger::default(),
            eps_singular,
            max_attempts,
            forced_triples: VecDeque::new(),
            forced_masks: VecDeque::new(),
        }
    }

    pub fn scheme(&self) -> &Arc<Scheme> {
        &self.scheme
    }

    pub fn policy(&self) -> &SharePolicy {
        self.scheme.policy()
    }

    pub fn sigma_r_sq(&self) -> f64 {
        self.sigma_r_sq
    }

    pub fn ledger(&self) -> OpeningLedger {
        self.ledger
    }

    pub fn eps_singular(&self) -> f64 {
        self.eps_singular
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_attempts
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// The next dealt triple uses these secret values. Test hook.
    pub fn force_triple(&mut self, a: f64, b: f64, c: f64) {
        self.forced_triples.push_back((a, b, c));
    }

    /// The next dealt mask uses this secret value. Test hook.
    pub fn force_mask(&mut self, r: f64) {
        self.forced_masks.push_back(r);
    }

    pub fn share(&mut self, s: f64) -> SharedScalar {
        self.scheme.share(s, &mut self.rng)
    }

    pub fn share_vector(&mut self, v: &DVector<f64>) -> SharedVector {
        self.scheme.share_vector(v, &mut self.rng)
    }

    pub fn share_matrix(&mut self, m: &DMatrix<f64>) -> SharedMatrix {
        self.scheme.share_matrix(m, &mut self.rng)
    }

    // ---- preprocessing ----

    pub fn deal_triple(&mut self) -> BeaverTriple {
        let (a, b, c) = match self.forced_triples.pop_front() {
            Some(forced) => forced,
            None => {
                let a = self.mask_dist.sample(&mut self.rng);
                let b = self.mask_dist.sample(&mut self.rng);
                (a, b, a * b)
            }
        };
        BeaverTriple { a: self.share(a), b: self.share(b), c: self.share(c) }
    }

    pub fn deal_mask(&mut self) -> RandomMask {
        let r = match self.forced_masks.pop_front() {
            Some(r) => r,
            None => self.mask_dist.sample(&mut self.rng),
        };
        RandomMask { r: self.share(r) }
    }

    pub fn deal_random_matrix(&mut self, d: usize) -> SharedMatrix {
        let entries = (0..d * d)
            .map(|_| {
                let r = self.mask_dist.sample(&mut self.rng);
                self.share(r)
            })
            .collect();
        SharedMatrix::from_entries(d, d, entries).expect("d*d entries")
    }

    // ---- online ----

    fn broadcast(&mut self, x: &SharedScalar) -> f64 {
        self.ledger.openings += 1;
        x.reconstruct()
    }

    /// Opens `[x]` to every party.
    pub fn open(&mut self, x: &SharedScalar) -> f64 {
        self.ledger.direct_openings += 1;
        self.broadcast(x)
    }

    pub fn open_vector(&mut self, v: &SharedVector) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.entries().iter().map(|e| self.open(e)).collect::<Vec<_>>())
    }

    pub fn open_matrix(&mut self, m: &SharedMatrix) -> DMatrix<f64> {
        let values: Vec<f64> = m.entries().iter().map(|e| self.open(e)).collect();
        DMatrix::from_row_slice(m.nrows(), m.ncols(), &values)
    }

    /// `[xy]` from `[x]`, `[y]` and a fresh triple: open `d = x − a` and
    /// `e = y − b`, then `d·[b] + e·[a] + [c] + de`.
    pub fn beaver_multiply(&mut self, x: &SharedScalar, y: &SharedScalar) -> Result<SharedScalar> {
        let BeaverTriple { a, b, c } = self.deal_triple();
        let d = self.broadcast(&x.sub(&a)?);
        let e = self.broadcast(&y.sub(&b)?);
        self.ledger.multiplications += 1;
        Ok(c.add_scaled(d, &b)?.add_scaled(e, &a)?.add_const(d * e))
    }

    /// `[1/x]`: multiply by a fresh mask `[r]`, open `rx`, and scale `[r]` by
    /// `1/(rx)`. A near-zero `rx` is retried with a new mask.
    pub fn secure_invert(&mut self, x: &SharedScalar) -> Result<SharedScalar> {
        self.secure_invert_counted(x).map(|(inv, _)| inv)
    }

    /// As [`Session::secure_invert`], also returning the number of discarded
    /// attempts.
    pub fn secure_invert_counted(&mut self, x: &SharedScalar) -> Result<(SharedScalar, u32)> {
        let mut last = 0.0;
        for attempt in 0..self.max_attempts {
            let RandomMask { r } = self.deal_mask();
            let rx = self.beaver_multiply(&r, x)?;
            let opened = self.broadcast(&rx);
            self.ledger.inversions += 1;
            if opened.abs() >= self.eps_singular && opened.is_finite() {
                return Ok((r.mul_const(1.0 / opened), attempt));
            }
            last = opened;
        }
        Err(Error::NearSingularMask(last))
    }

    /// `[X]·[Y]` with one Beaver multiplication per scalar product.
    pub fn secure_mat_mul(&mut self, x: &SharedMatrix, y: &SharedMatrix) -> Result<SharedMatrix> {
        if x.ncols() != y.nrows() {
            return Err(Error::ShapeMismatch(format!("{}x{} times {}x{}", x.nrows(), x.ncols(), y.nrows(), y.ncols())));
        }
        let mut entries = Vec::with_capacity(x.nrows() * y.ncols());
        for i in 0..x.nrows() {
            for j in 0..y.ncols() {
                entries.push(self.dot(x, i, |k| y.get(k, j))?);
            }
        }
        SharedMatrix::from_entries(x.nrows(), y.ncols(), entries)
    }

    /// `[X]·[v]`.
    pub fn secure_mat_vec(&mut self, x: &SharedMatrix, v: &SharedVector) -> Result<SharedVector> {
        if x.ncols() != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times vector of length {}",
                x.nrows(),
                x.ncols(),
                v.len()
            )));
        }
        let entries = (0..x.nrows()).map(|i| self.dot(x, i, |k| v.get(k))).collect::<Result<_>>()?;
        Ok(SharedVector::from_entries(entries))
    }

    fn dot<'a>(
        &mut self,
        x: &SharedMatrix,
        row: usize,
        other: impl Fn(usize) -> &'a SharedScalar,
    ) -> Result<SharedScalar> {
        let mut acc = self.beaver_multiply(x.get(row, 0), other(0))?;
        for k in 1..x.ncols() {
            let p = self.beaver_multiply(x.get(row, k), other(k))?;
            acc = acc.add(&p)?;
        }
        Ok(acc)
    }
}
