//! Communication cost and information leakage.
//!
//! Cost is counted in openings: a multiplication opens two values, an
//! inversion is a multiplication plus one opening, and the protocols open
//! further values directly.
//!
//! The leakage bound treats every opening as `x − r_j` for an entry `x` of a
//! party's Gram matrix and a fresh mask `r_j ~ N(0, σ_r²)`, and gives the
//! adversary its `t` shares of `x` and of every `r_j`. Under Gaussian
//! assumptions the mutual information reduces to
//!
//! ```text
//! I ≤ ½ ln[ (σ_r² − γ + σ_x² O) · det(C_xs − B)
//!           / ((σ_r² − γ) · Π_{k∈A} Σ_{j=1}^t L_j(α_k)² σ_β²) ]
//! ```
//!
//! where `γ` is the part of a mask's variance explained by the adversary's
//! shares of it. Only `t × t` matrices are ever formed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sharing::{grid_alphas, LagrangeBasis};
use crate::solver::Protocol;

/// Total openings of the secure inverse method: `2d³ + 3d² + d`.
pub fn openings_inverse(d: u64) -> u64 {
    2 * d * d * d + 3 * d * d + d
}

/// Total openings of secure Gaussian elimination:
/// `(2/3)d³ + (7/2)d² + (11/6)d`, an integer for every integer `d`.
pub fn openings_gauss(d: u64) -> u64 {
    let numerator = 4 * d * d * d + 21 * d * d + 11 * d;
    debug_assert_eq!(numerator % 6, 0);
    numerator / 6
}

/// Per-protocol operation counts for a `d × d` system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub d: u64,
}

/// Closed-form counts for one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Multiplications outside inversions.
    pub multiplications: u64,
    pub inversions: u64,
    pub direct_openings: u64,
    pub total_openings: u64,
}

impl CostModel {
    pub fn new(d: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Self { d })
    }

    pub fn breakdown(&self, protocol: Protocol) -> CostBreakdown {
        let d = self.d;
        match protocol {
            Protocol::Inverse => CostBreakdown {
                multiplications: d * d * d + d * d,
                inversions: 0,
                direct_openings: d * d + d,
                total_openings: openings_inverse(d),
            },
            Protocol::Gauss => CostBreakdown {
                // d³/3 + d² − d/3
                multiplications: (d * d * d + 3 * d * d - d) / 3,
                inversions: (d * d + d) / 2,
                direct_openings: d,
                total_openings: openings_gauss(d),
            },
        }
    }

    pub fn total_openings(&self, protocol: Protocol) -> u64 {
        self.breakdown(protocol).total_openings
    }
}

/// `n_i · 7/144`: the variance of a sum of `n_i` products of two independent
/// `U[0, 1]` variables.
pub fn sigma_x_estimate(n_i: u64) -> f64 {
    n_i as f64 * 7.0 / 144.0
}

/// `½ ln(1 + σ_x²/σ_r²)`, the information `X − R` carries about `X` for
/// independent Gaussians.
pub fn reference_leak(sigma_x_sq: f64, sigma_r_sq: f64) -> f64 {
    0.5 * (sigma_x_sq / sigma_r_sq).ln_1p()
}

/// Inputs of the leakage bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageScenario {
    /// Total number of openings `O`.
    pub openings: u64,
    /// The `t + 1` basis nodes; the first must be `0`.
    pub basis_nodes: Vec<f64>,
    /// Evaluation points of the `t` corrupted parties.
    pub adversary_alphas: Vec<f64>,
    pub sigma_r_sq: f64,
    pub sigma_beta_sq: f64,
    pub sigma_x_sq: f64,
}

/// Party layout used for the Boston-housing leakage figures: `α_i = 0.2·i −
/// 0.1` for five parties, basis over `{0, α_1, α_2, α_3}`, and a three-party
/// adversary holding the points `{α_2, α_3, α_4} = {0.3, 0.5, 0.7}`.
pub const BOSTON_ADVERSARY: [usize; 3] = [1, 2, 3];

impl LeakageScenario {
    /// Builds a scenario from party evaluation points, zero-based basis party
    /// indices and zero-based adversary party indices.
    pub fn from_parties(
        openings: u64,
        alphas: &[f64],
        basis_parties: &[usize],
        adversary: &[usize],
        sigma_r_sq: f64,
        sigma_beta_sq: f64,
        sigma_x_sq: f64,
    ) -> Result<Self> {
        let pick = |idx: &[usize]| -> Result<Vec<f64>> {
            idx.iter()
                .map(|&i| {
                    alphas
                        .get(i)
                        .copied()
                        .ok_or_else(|| Error::InvalidScenario(format!("party index {i} out of range")))
                })
                .collect()
        };
        let mut basis_nodes = vec![0.0];
        basis_nodes.extend(pick(basis_parties)?);
        let scenario =
            Self { openings, basis_nodes, adversary_alphas: pick(adversary)?, sigma_r_sq, sigma_beta_sq, sigma_x_sq };
        scenario.validate()?;
        Ok(scenario)
    }

    /// The five-party, `t = 3` layout behind the Boston-housing figures.
    pub fn boston(openings: u64, sigma_r_sq: f64, sigma_beta_sq: f64) -> Self {
        Self::from_parties(openings, &grid_alphas(5), &[0, 1, 2], &BOSTON_ADVERSARY, sigma_r_sq, sigma_beta_sq, 4.0)
            .expect("fixed layout is valid")
    }

    pub fn threshold(&self) -> usize {
        self.basis_nodes.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.threshold();
        if t == 0 || self.basis_nodes[0] != 0.0 {
            return Err(Error::InvalidScenario("basis must be {0} plus at least one node".into()));
        }
        if self.adversary_alphas.len() != t {
            return Err(Error::InvalidScenario(format!(
                "adversary holds {} points, threshold is {t}",
                self.adversary_alphas.len()
            )));
        }
        if self.openings == 0 {
            return Err(Error::InvalidScenario("at least one opening is required".into()));
        }
        for (name, v) in
            [("sigma_r^2", self.sigma_r_sq), ("sigma_beta^2", self.sigma_beta_sq), ("sigma_x^2", self.sigma_x_sq)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} must be positive, got {v}")));
            }
        }
        for (k, a) in self.adversary_alphas.iter().enumerate() {
            if *a == 0.0 || self.adversary_alphas[..k].contains(a) {
                return Err(Error::InvalidScenario(format!("adversary point {a} is zero or repeated")));
            }
        }
        LagrangeBasis::new(self.basis_nodes.clone()).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        Ok(())
    }

    fn basis_values(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.validate()?;
        let basis = LagrangeBasis::new(self.basis_nodes.clone())?;
        let t = self.threshold();
        let l0 = DVector::from_iterator(t, self.adversary_alphas.iter().map(|&a| basis.eval(0, a)));
        // row k: (L_1(α_k), ..., L_t(α_k))
        let lj = DMatrix::from_fn(t, t, |k, j| basis.eval(j + 1, self.adversary_alphas[k]));
        Ok((l0, lj))
    }

    /// Covariance of the adversary's shares of one mask:
    /// `L_0(α_k)L_0(α_l)σ_r² + Σ_j L_j(α_k)L_j(α_l)σ_β²`.
    pub fn mask_share_covariance(&self) -> Result<DMatrix<f64>> {
        let (l0, lj) = self.basis_values()?;
        Ok(&l0 * l0.transpose() * self.sigma_r_sq + &lj * lj.transpose() * self.sigma_beta_sq)
    }
}

/// Variance of a mask explained by the adversary's shares of it:
/// `γ = σ_r⁴ · L_0(α)ᵀ C_r⁻¹ L_0(α)`, so that `σ_r² − γ` is the mask's
/// conditional variance.
pub fn gamma(scenario: &LeakageScenario) -> Result<f64> {
    let (l0, _) = scenario.basis_values()?;
    let c = scenario.mask_share_covariance()?;
    let chol = c
        .cholesky()
        .ok_or_else(|| Error::InvalidScenario("covariance of the adversary's mask shares is singular".into()))?;
    let q = l0.dot(&chol.solve(&l0));
    Ok(scenario.sigma_r_sq * scenario.sigma_r_sq * q)
}

/// Terms of the bound, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageBreakdown {
    pub gamma: f64,
    /// `½ ln((σ_r² − γ + σ_x² O) / (σ_r² − γ))`.
    pub opening_term: f64,
    /// `½ ln(det(C_xs − B) / Π_k Σ_j L_j(α_k)² σ_β²)`.
    pub share_term: f64,
    pub total: f64,
}

/// Upper bound on `I(x; View)` in nats.
pub fn leakage_bound(scenario: &LeakageScenario) -> Result<f64> {
    leakage_breakdown(scenario).map(|b| b.total)
}

pub fn leakage_breakdown(scenario: &LeakageScenario) -> Result<LeakageBreakdown> {
    let g = gamma(scenario)?;
    let sr = scenario.sigma_r_sq;
    let sx = scenario.sigma_x_sq;
    let sb = scenario.sigma_beta_sq;
    let o = scenario.openings as f64;
    let residual = sr - g;
    if residual <= 0.0 {
        return Err(Error::InvalidScenario(format!("sigma_r^2 = {sr} does not exceed gamma = {g}")));
    }
    let (l0, lj) = scenario.basis_values()?;
    let t = l0.len();
    let noise: Vec<f64> = (0..t).map(|k| lj.row(k).iter().map(|l| l * l).sum::<f64>() * sb).collect();

    // C_xs: L_0 L_0ᵀ σ_x² plus the diagonal β noise; B = O σ_x⁴ L_0 L_0ᵀ / (σ_r² − γ + O σ_x²)
    let b_scale = o * sx * sx / (residual + o * sx);
    let mut m = &l0 * l0.transpose() * (sx - b_scale);
    for k in 0..t {
        m[(k, k)] += noise[k];
    }
    let log_det = log_det_spd(&m)?;
    let log_noise: f64 = noise.iter().map(|v| v.ln()).sum();

    let opening_term = 0.5 * ((residual + sx * o).ln() - residual.ln());
    let share_term = 0.5 * (log_det - log_noise);
    Ok(LeakageBreakdown { gamma: g, opening_term, share_term, total: opening_term + share_term })
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    if let Some(chol) = m.clone().cholesky() {
        return Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>());
    }
    let det = m.clone().lu().determinant();
    if det > 0.0 && det.is_finite() {
        Ok(det.ln())
    } else {
        Err(Error::NumericalBreakdown(format!("det(C_xs - B) = {det:e} is not positive")))
    }
}
