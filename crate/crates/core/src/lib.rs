//! Truncated-Wigner simulation of polarization squeezing in a two-segment
//! polarization-maintaining fibre, with a Stokes-parameter detection chain.

pub mod config;
pub mod detection;
pub mod error;
pub mod estimator;
pub mod fourier;
pub mod model;
pub mod propagate;
pub mod sampler;

pub use config::{load_config, GridRequest, SimulationConfig, StderrMethod};
pub use detection::{DetectionChain, Jones, StokesSample};
pub use error::{Error, Result};
pub use estimator::{
    simulate, run_ensemble, EnsembleRecord, RunOptions, ShotNoise, SimulationOutput, SqueezingResult,
};
pub use model::{FiberAssembly, FiberSegment, Mode, PulseSpec, TimeGrid, TwoModeField};
pub use propagate::{AssemblyPropagator, Orientation, StepperConfig};
pub use sampler::{LossPoint, NoiseStream, SeedPlan};
