//! Risk-averse online optimization under drifting costs and drifting risk levels.
//!
//! The crate provides the two online CVaR learners (first-order, from sampled
//! costs and gradients, and zeroth-order, from cost evaluations only), the
//! empirical CVaR/VaR machinery they are built on, variation metrics for
//! non-stationary schedules, and a quadrature/grid ground-truth oracle with
//! evaluators for the associated error and variation bounds.

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod learner;
pub mod model;
pub mod oracle;
pub mod variation;

pub use distributions::{CostBound, EmpiricalDistribution, RiskLevel, WeightedSamples};
pub use error::{Error, Result};
pub use estimators::{GradientEstimate, GradientKind, SampleBatch, SmoothingParams};
pub use learner::{
    FeasibleSet, Learner, LearnerConfig, LearnerState, LearningMode, SamplingSchedule, StepRecord,
};
pub use model::{CostModel, NoiseLaw, ParkingScenario, Schedule};
pub use oracle::{BoundKind, BoundReport, OracleTable, RegretTrace, Resolution};
