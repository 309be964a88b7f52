//! Simulation and certificate verification for the single-species chemostat
//! tracking a periodic reference under a designed dilution rate.

pub mod certificates;
pub mod controller;
pub mod disturbance;
pub mod error;
pub mod integrator;
pub mod model;
pub mod plot;
pub mod scenario;
pub mod simulate;
pub mod sweep;
pub mod trajectory;

pub use certificates::{Certificate, MultiCertificate, VerificationReport};
pub use controller::{DilutionProfile, ReferenceSpec};
pub use disturbance::{DisturbanceKind, DisturbanceMode, DisturbanceSpec};
pub use error::{ChemostatError, Result};
pub use integrator::{IntegratorConfig, StepMode};
pub use model::{AugmentedState, ErrorCoords, ModelParams, SpeciesGrowth, State};
pub use trajectory::{Sample, Trajectory};
