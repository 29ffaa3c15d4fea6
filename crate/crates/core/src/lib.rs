//! Exact mixed moments of centered Gaussian and multivariate gamma vectors,
//! product-inequality gaps, covariance-structure checks, and Monte Carlo screens
//! for the orthant-dependence statements that have no closed form.
//!
//! Exact work runs on [`Rational`]; the same generic code runs on `f64`.

pub mod error;
pub mod gamma;
pub mod gaussian;
pub mod index;
pub mod io;
pub mod matrix;
pub mod mc;
pub mod par;
pub mod scalar;
pub mod scan;
pub mod series;
pub mod structure;

pub use error::{Error, Result};
pub use gamma::{gamma_gpi_gap, gamma_moment, gamma_sum_moment, trace_power_series, GammaParams};
pub use gaussian::{gaussian_gpi_gap, gaussian_weak_gpi_gap, wick_moment, GapReport};
pub use index::{MultiIndex, Partition, SignMatrix};
pub use matrix::{check_psd, inverse, CovarianceMatrix, SymMatrix};
pub use mc::{MCEstimate, McConfig};
pub use par::Execution;
pub use scalar::{Rational, Scalar};
pub use scan::{run_scan, ScanReport, ScanSpec};
pub use series::TruncatedSeries;
pub use structure::{mtp2_check, sign_balance, structure_ell_check, SigningOutcome};
