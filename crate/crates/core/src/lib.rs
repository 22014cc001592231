//! Dependence measures for two binary events and their asymptotic inference.
//!
//! The crate covers the population measures (φ, Cole's C, Yule's Q and its
//! generalisations, the odds ratio, contingency coefficients, tetrachoric
//! correlation and a few others), their sample estimators with iid or HAC
//! long-run covariance, delta-method and Fisher-transformed confidence
//! intervals, the non-standard test inversion for Cole's C, and the Monte
//! Carlo tooling used to check all of it.

pub mod dataset;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod extended;
pub mod joint;
pub mod measures;
pub mod normal;
pub mod seed;
pub mod simulation;
pub mod tetrachoric;

pub use error::{Error, Result};
pub use joint::{fh_bounds, ContingencyTable, FrechetBounds, JointBinaryDistribution, PerfectDependence};
pub use measures::{MeasureKind, MeasureValue, OddsRatio};
