//! Bayesian marked Hawkes peaks-over-threshold modelling.
//!
//! Threshold exceedances of a time series are modelled as a marked point
//! process: a self-exciting Hawkes process for the exceedance times, with
//! either a parametric Exponential triggering kernel or a nonparametric
//! Dirichlet-process lognormal mixture, and Generalised Pareto marks that are
//! either iid or carry cluster-level scales tied to the latent Hawkes
//! branching structure. The crate provides full MCMC inference, forward
//! predictive simulation, held-out predictive scoring and a simulation-study
//! harness.

pub mod dp;
pub mod error;
pub mod evt;
pub mod hawkes;
pub mod mcmc;
pub mod predict;
pub mod rng;
pub mod study;

pub use error::{Error, Result};
pub use evt::{GpdParams, MarkedEventSeries, RawSeries, ScalePolicy, ThresholdSpec};
pub use hawkes::{BranchingStructure, ClusterPartition, HawkesParams, TriggeringKernel};
pub use mcmc::{ChainConfig, GpdHierState, MarkFit, ModelVariant, PosteriorDraw, PriorConfig};
pub use predict::{PredictivePath, ScoreReport};
pub use study::{ScenarioSpec, StudyResult};
