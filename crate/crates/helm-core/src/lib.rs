//! Power-flow solver based on holomorphic embedding.
//!
//! The power-flow equations are embedded in a complex parameter `s` so that
//! bus voltages become holomorphic functions `V_i(s)`. The library constructs
//! the power series of the branch that corresponds to the energized, no-load
//! network (the white germ at `s = 0`) and continues it analytically to the
//! target point `s = 1` with near-diagonal Padé approximants. Convergence of
//! the approximants yields the operational solution; sustained non-convergence
//! together with approximant poles on the real interval `(0, 1]` signals an
//! infeasible case (voltage collapse).
//!
//! Module map:
//!
//! - [`network`] — bus/branch data model, admittance matrix, mismatch
//! - [`caseio`] — JSON case files and solver reports
//! - [`linsolve`] — sparse LU, factor once / solve many
//! - [`series`] — white germ construction and series extension
//! - [`pade`] — near-diagonal Padé evaluation and pole estimation
//! - [`solver`] — full solve orchestration, scans, status classification
//! - [`oracle`] — closed-form two-bus solutions and a dense Newton–Raphson
//!   reference solver for cross-validation
//!
//! All numeric kernels are generic over the floating-point scalar through
//! [`Scalar`]; `f64` is the intended production type and the aliases below
//! pin it.

pub mod caseio;
pub mod linsolve;
pub mod network;
pub mod oracle;
pub mod pade;
pub mod scalar;
pub mod series;
pub mod solver;

pub use num_complex;
pub use scalar::Scalar;

pub use network::{build_admittance, mismatch, AdmittanceModel, BranchSpec, BusKind, BusSpec, Network};
pub use pade::{eval_near_diagonal, estimate_branch_points, rational_coefficients, PadeResult, PadeStatus};
pub use series::{embedded_residual, extend_series, init_white_germ, EmbeddingKind, GermBuilder, GermSeries};
pub use solver::{scan, solve, solve_pv, ScanPoint, SolveOptions, SolveReport, SolveStatus};

/// Concrete `f64` instantiations of the core types.
pub type Network64 = network::Network<f64>;
pub type AdmittanceModel64 = network::AdmittanceModel<f64>;
pub type GermSeries64 = series::GermSeries<f64>;
pub type PadeResult64 = pade::PadeResult<f64>;
pub type SolveOptions64 = solver::SolveOptions<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;
