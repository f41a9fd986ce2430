//! Robust dispersion-matrix estimation toolkit.
//!
//! The centerpiece is robust nonlinear shrinkage ([`rnl::rnl_estimate`] and
//! its correlation-based variant [`rnl::rcnl_estimate`]): Tyler-type
//! reweighting of unit-norm observations combined with per-eigenvalue
//! (nonlinear) shrinkage of the spectrum. Around it the crate bundles the
//! classical benchmarks (sample covariance, linear shrinkage, plain nonlinear
//! shrinkage, Tyler's fixed point and its regularized variant), a Monte-Carlo
//! lab measuring PRIAL against six dispersion structures under elliptical
//! laws ([`simlab`]), and a rolling minimum-variance backtest on daily return
//! panels ([`portfolio`]).

pub mod error;
pub mod numkit;
pub mod portfolio;
pub mod rnl;
pub mod shrinkage;
pub mod simlab;
pub mod tyler;

pub use error::{Error, Result};
pub use numkit::{DataMatrix, EigenSystem, SpdMatrix, SymMatrix};
pub use rnl::{rcnl_estimate, rnl_estimate, RnlConfig, RnlEstimate};
pub use shrinkage::{EigenvalueShrinker, QisShrinker, ShrunkenSpectrum};
pub use simlab::{run_scenario, MethodId, ScenarioConfig};
pub use tyler::{robust_linear_shrinkage, tyler_estimate, FixedPointConfig};
