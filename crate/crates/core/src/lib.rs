//! Elliptic terms of the GL(2) trace formula with ramification at a finite set of
//! places `S = {inf, q_1, ..., q_r}` (always containing 2).
//!
//! The exact layers (`snumber`, `quadratic`, `kloosterman`, `orbital`) work with
//! rationals and integers. The analytic layers (`specfun`, `zagier`, `elliptic`)
//! work in `f64`/`Complex64` and report truncation estimates.

pub mod checks;
pub mod elliptic;
pub mod error;
pub mod kloosterman;
pub mod orbital;
pub mod quadratic;
pub mod snumber;
pub mod specfun;
pub mod zagier;

pub use error::{Error, Result};
pub use snumber::{SConfig, SRational, SemilocalPoint};
