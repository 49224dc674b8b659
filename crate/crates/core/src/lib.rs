//! Hardness of learning LQG controllers from offline data: Riccati and
//! Lyapunov kernels, excess-cost Hessians, Fisher information, Youla checks
//! and Monte Carlo validation.

pub mod config;
pub mod error;
pub mod derivatives;
pub mod family;
pub mod hardness;
pub mod instances;
pub mod lqg;
pub mod matsolve;
pub mod optimize;
pub mod simulate;
pub mod youla;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use family::{AffineFamily, ParametricFamily, PlantDerivative};
pub use hardness::{hardness_report, HardnessReport, HessianKind, PolicySpec, ReportOptions};
pub use instances::{lookup, CatalogEntry};
pub use lqg::{synthesize, LinearController, LqgSolution, PlantInstance};
pub use matsolve::{Mat, StateSpaceTF};
pub use simulate::{CePipelineResult, Dataset, Estimator, PipelineConfig};
