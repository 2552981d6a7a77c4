//! Solvers for `Aw = b` with `A` symmetric positive definite.
//!
//! Two secure protocols over shared `[A]`, `[b]`:
//!
//! * inverse method: mask with a shared random `[R]`, open `RA`, invert it
//!   locally, form `[A⁻¹] = (RA)⁻¹[R]`, then open `w = [A⁻¹][b]`;
//! * Gaussian elimination without pivoting, each quotient computed with a
//!   secure inversion, followed by back substitution that opens one weight at
//!   a time.
//!
//! Each has a plaintext twin following the same arithmetic.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::{OpeningLedger, Session};
use crate::error::{Error, Result};
use crate::sharing::{SharedMatrix, SharedScalar, SharedVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SecureGauss,
    SecureInverse,
    InsecureGauss,
    InsecureInverse,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::SecureGauss, Method::SecureInverse, Method::InsecureGauss, Method::InsecureInverse];

    pub fn is_secure(self) -> bool {
        matches!(self, Method::SecureGauss | Method::SecureInverse)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SecureGauss => "secure-gauss",
            Method::SecureInverse => "secure-inverse",
            Method::InsecureGauss => "insecure-gauss",
            Method::InsecureInverse => "insecure-inverse",
        }
    }

    /// The secure protocol the method corresponds to.
    pub fn protocol(self) -> Protocol {
        match self {
            Method::SecureGauss | Method::InsecureGauss => Protocol::Gauss,
            Method::SecureInverse | Method::InsecureInverse => Protocol::Inverse,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// The two solving protocols, independent of whether they run securely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Inverse,
    Gauss,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" | "secure-inverse" | "insecure-inverse" => Ok(Protocol::Inverse),
            "gauss" | "secure-gauss" | "insecure-gauss" => Ok(Protocol::Gauss),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Inverse => "inverse",
            Protocol::Gauss => "gauss",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub w: Vec<f64>,
    pub method: Method,
    /// Ledger delta for this solve.
    pub ledger: OpeningLedger,
    /// Discarded mask or mask-matrix draws.
    pub retries: u32,
}

fn check_system(a: &SharedMatrix, b: &SharedVector) -> Result<usize> {
    let d = a.nrows();
    if d == 0 || a.ncols() != d || b.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(d)
}

/// Secure inverse method.
pub fn solve_inverse_method(a: &SharedMatrix, b: &SharedVector, session: &mut Session) -> Result<SolveReport> {
    let d = check_system(a, b)?;
    let start = session.ledger();
    let mut retries = 0;
    let (r, ra_inv) = loop {
        let r = session.deal_random_matrix(d);
        let ra = session.secure_mat_mul(&r, a)?;
        let opened = session.open_matrix(&ra);
        match lu_inverse(&opened, session.eps_singular()) {
            Ok(inv) => break (r, inv),
            Err(_) if retries + 1 < session.max_attempts() => retries += 1,
            Err(_) => return Err(Error::SingularMaskMatrix(session.max_attempts())),
        }
    };
    let a_inv = r.left_mul_public(&ra_inv)?;
    let w_shared = session.secure_mat_vec(&a_inv, b)?;
    let w = session.open_vector(&w_shared);
    Ok(SolveReport {
        w: w.iter().copied().collect(),
        method: Method::SecureInverse,
        ledger: session.ledger() - start,
        retries,
    })
}

/// Secure Gaussian elimination without pivoting.
#[allow(clippy::needless_range_loop)] // rows i and k of c are both indexed
pub fn solve_gauss(a: &SharedMatrix, b: &SharedVector, session: &mut Session) -> Result<SolveReport> {
    let d = check_system(a, b)?;
    let start = session.ledger();
    let mut retries = 0;

    // C = [A | b], d × (d + 1)
    let mut c: Vec<Vec<SharedScalar>> = (0..d)
        .map(|i| {
            let mut row: Vec<SharedScalar> = (0..d).map(|j| a.get(i, j).clone()).collect();
            row.push(b.get(i).clone());
            row
        })
        .collect();

    let invert = |session: &mut Session, x: &SharedScalar, row: usize, retries: &mut u32| {
        session
            .secure_invert_counted(x)
            .map(|(inv, discarded)| {
                *retries += discarded;
                inv
            })
            .map_err(|e| match e {
                Error::NearSingularMask(_) => Error::DegeneratePivot { row },
                other => other,
            })
    };

    for k in 0..d {
        for i in k + 1..d {
            let pivot_inv = invert(session, &c[k][k], k, &mut retries)?;
            let frac = session.beaver_multiply(&c[i][k], &pivot_inv)?;
            for j in k..=d {
                let p = session.beaver_multiply(&frac, &c[k][j])?;
                c[i][j] = c[i][j].sub(&p)?;
            }
        }
    }

    let mut w = vec![0.0; d];
    for i in (0..d).rev() {
        let mut numerator = c[i][d].clone();
        for j in i + 1..d {
            numerator = numerator.add_scaled(-w[j], &c[i][j])?;
        }
        let pivot_inv = invert(session, &c[i][i], i, &mut retries)?;
        let wi = session.beaver_multiply(&numerator, &pivot_inv)?;
        w[i] = session.open(&wi);
    }
    Ok(SolveReport { w, method: Method::SecureGauss, ledger: session.ledger() - start, retries })
}

/// Dispatches a secure solve.
pub fn solve_secure(method: Method, a: &SharedMatrix, b: &SharedVector, session: &mut Session) -> Result<SolveReport> {
    match method {
        Method::SecureGauss => solve_gauss(a, b, session),
        Method::SecureInverse => solve_inverse_method(a, b, session),
        other => Err(Error::InvalidArgument(format!("{other} is not a secure method"))),
    }
}

/// Dispatches a plaintext solve.
pub fn solve_plain(method: Method, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    match method {
        Method::InsecureGauss | Method::SecureGauss => insecure_gauss(a, b),
        Method::InsecureInverse | Method::SecureInverse => insecure_inverse(a, b),
    }
}

/// Plaintext twin of [`solve_gauss`].
pub fn insecure_gauss(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (c, _) = eliminate(a, b)?;
    let d = a.nrows();
    let mut w = DVector::zeros(d);
    for i in (0..d).rev() {
        let mut numerator = c[(i, d)];
        for j in i + 1..d {
            numerator -= c[(i, j)] * w[j];
        }
        w[i] = numerator * (1.0 / c[(i, i)]);
    }
    Ok(w)
}

/// Pivots `c_kk` met during pivoting-free elimination of `A`.
pub fn elimination_pivots(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    eliminate(a, &DVector::zeros(a.nrows())).map(|(_, p)| p)
}

fn eliminate(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = a.nrows();
    if d == 0 || a.ncols() != d || b.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut c = DMatrix::zeros(d, d + 1);
    c.view_mut((0, 0), (d, d)).copy_from(a);
    c.set_column(d, b);
    let mut pivots = Vec::with_capacity(d);
    for k in 0..d {
        let pivot = c[(k, k)];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::DegeneratePivot { row: k });
        }
        pivots.push(pivot);
        for i in k + 1..d {
            let frac = c[(i, k)] * (1.0 / pivot);
            for j in k..=d {
                c[(i, j)] -= frac * c[(k, j)];
            }
        }
    }
    Ok((c, pivots))
}

/// Plaintext twin of [`solve_inverse_method`]: `A⁻¹` by LU with partial
/// pivoting, then `A⁻¹ b`.
pub fn insecure_inverse(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != b.len() || b.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(lu_inverse(a, 0.0)? * b)
}

/// Inverse by LU decomposition with partial pivoting. Fails when a pivot's
/// magnitude relative to the largest entry is at most `eps`.
pub fn lu_inverse(a: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    let scale = a.abs().max();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::NumericalBreakdown("matrix is zero or non-finite".into()));
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..d).collect();
    for k in 0..d {
        let (p, max) =
            (k..d).map(|i| (i, lu[(i, k)].abs())).fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if max <= eps * scale || max == 0.0 {
            return Err(Error::DegeneratePivot { row: k });
        }
        if p != k {
            lu.swap_rows(p, k);
            perm.swap(p, k);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..d {
            let l = lu[(i, k)] / pivot;
            lu[(i, k)] = l;
            for j in k + 1..d {
                lu[(i, j)] -= l * lu[(k, j)];
            }
        }
    }
    let mut inv = DMatrix::zeros(d, d);
    for col in 0..d {
        // solve L y = P e_col, then U x = y
        let mut x: Vec<f64> = perm.iter().map(|&p| if p == col { 1.0 } else { 0.0 }).collect();
        for i in 0..d {
            for j in 0..i {
                x[i] -= lu[(i, j)] * x[j];
            }
        }
        for i in (0..d).rev() {
            for j in i + 1..d {
                x[i] -= lu[(i, j)] * x[j];
            }
            x[i] /= lu[(i, i)];
        }
        inv.set_column(col, &DVector::from_vec(x));
    }
    Ok(inv)
}
