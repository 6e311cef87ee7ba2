pub mod error;
pub mod graph;
pub mod ode;

pub use error::{Error, Result};
pub use graph::{Graph, GraphDoc, SpectralInfo};
pub use ode::{integrate, IvpSpec, OdeError, Tolerances, Trajectory};
pub mod closure;
pub mod expr;
pub mod params;

pub use closure::{Closure, ClosureConfig, ClosureKind};
pub use params::EpidemicParams;
pub mod master;
pub mod residual;
pub use master::{MasterDistribution, MasterTrajectory, Moments, PairState};
pub mod meanfield;
pub use meanfield::{BoundDirection, BoundReport, ClosedModel};
pub mod correlation;
pub use correlation::{CorrelationReport, InitialState};
pub mod steadystate;
pub use steadystate::{BifurcationCurve, SteadyStateResult};
pub mod batch;
pub mod cli;
