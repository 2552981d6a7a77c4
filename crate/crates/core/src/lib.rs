//! Privacy-preserving linear regression over real-number secret shares.
//!
//! Parties holding disjoint rows of a regression dataset compute local
//! sufficient statistics, secret-share them, and jointly solve the
//! PAC-Bayes/Gaussian-prior normal equations inside a simulated MPC session.
//! Every opening is counted, and the leakage of a protocol run can be bounded
//! in closed form.
//!
//! ```
//! use realshare::engine::{AlphaChoice, Session, SessionConfig};
//!
//! let mut session = Session::new(&SessionConfig::new(5, 3, 7).alphas(AlphaChoice::Grid))?;
//! let x = session.share(6.0);
//! let y = session.share(-1.5);
//! let xy = session.beaver_multiply(&x, &y)?;
//! assert!((session.open(&xy) + 9.0).abs() < 1e-6);
//! assert_eq!(session.ledger().openings, 3);
//! # Ok::<(), realshare::Error>(())
//! ```

pub mod engine;
pub mod error;
pub mod experiment;
pub mod privacy_cost;
pub mod regression;
pub mod sharing;
pub mod solver;

pub use error::{Error, Result};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sharing.md")]
    mod sharing {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/cost-and-leakage.md")]
    mod cost_and_leakage {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
