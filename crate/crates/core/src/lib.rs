//! Solvers and analysis tools for one-dimensional autonomous Caputo
//! fractional ODEs `D_c^γ u = f(u)`, `u(0) = u0`, `0 < γ < 1`.
//!
//! * [`specfun`]: Γ, the Mittag-Leffler function and the resolvent kernel.
//! * [`problem`]: right-hand sides and initial-value problems.
//! * [`schemes`]: the two product-integration schemes for the Volterra form
//!   and the explicit/implicit L1 schemes for the differential form.
//! * [`oracle`]: exact linear solutions, power series in `t^γ`, and a
//!   step-refined reference solution.
//! * [`analysis`]: blow-up time bounds, the Osgood test, blow-up time
//!   estimation, asymptotic rate checks and ordering checks.
//! * [`verify`]: the invariant suite behind `caputo verify`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod schemes;
pub mod specfun;
pub mod verify;

mod quad;

pub use error::{Error, Result};
pub use problem::{ProblemSpec, RhsModel};
pub use schemes::{GridConfig, L1Weights, Scheme, Termination, Trajectory};
pub use specfun::MlOrder;
