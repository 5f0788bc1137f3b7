//! Dollar-denominated environmental indices treated as financial assets.
//!
//! The crate builds per-country environmental indices from
//! world-development-indicator panels, maps them onto an exponential price
//! scale, and then runs the usual asset toolkit on them: conditional
//! volatility fits with normal-inverse-Gaussian innovations, joint scenario
//! generation, performance ratios, efficient frontiers, risk-neutral option
//! pricing and maximum-likelihood factor analysis.

pub mod analytics;
pub mod econometrics;
pub mod error;
pub mod factor;
pub mod index;
pub mod ingest;
pub mod linalg;
pub mod optim;
pub mod options;
pub mod portfolio;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod transform;

pub use error::{Error, Result};
pub use econometrics::{FittedModel, Innovation, MeanSpec, NigParams, VolFamily, VolSpec};
pub use factor::FactorModel;
pub use index::{EiTable, GdpPolicy, IndexSeries};
pub use ingest::{IndicatorId, IndicatorKind, IndicatorPanel};
pub use options::{OptionSurface, PricingJob, PricingModel};
pub use portfolio::{FrontierPoint, RiskMeasure};
pub use simulate::{Measure, MvNigSpec, ScenarioMatrix};
pub use transform::{ReturnSeries, TransformParams};
