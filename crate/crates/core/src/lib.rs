//! Causal-pathway attribution of climate impacts from forced ensembles.
//!
//! A pathway graph names how a forcing propagates through intermediate
//! variables to an impact. Each step is fit by least squares on ensemble
//! scalar metrics, the steps are chained into a joint Gaussian likelihood,
//! and likelihood-ratio tests with Monte Carlo p-values decide which
//! forcing magnitudes are consistent with an observation.

pub mod data;
pub mod error;
pub mod fingerprint;
pub mod likelihood;
pub mod lrtest;
pub mod ols;
pub mod pathway;
pub mod regress;
pub mod synth;

pub use data::{ForcingLevel, ImpactDataset, PseudoObservation, Region, ScalarMetricTable, TimeWindow};
pub use error::{Error, ErrorClass, Result};
pub use likelihood::JointModel;
pub use pathway::PathwayGraph;
