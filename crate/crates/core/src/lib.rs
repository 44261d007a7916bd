//! Pilot-wave (de Broglie–Bohm) simulation of Stern-Gerlach spin
//! measurements.
//!
//! Each device is modelled as a delta-function magnet acting on a top-hat
//! plane-wave packet. The stationary wave is known in closed form region by
//! region, so particle trajectories are exact straight-line segments and the
//! guidance velocity is piecewise constant.
//!
//! - [`spinor`]: eigenspinors of σₙ for axes in the x–z plane.
//! - [`wavefield`]: the wave behind one magnet and its guidance velocity.
//! - [`trajectory`]: analytic and numeric particle paths, critical line.
//! - [`apparatus`]: calibrated devices, reversed polarity, chains.
//! - [`ensemble`]: quantum-equilibrium sampling and Born comparisons.
//! - [`entangled`]: spin-entangled pairs and conditional spinors.

pub mod apparatus;
pub mod ensemble;
pub mod entangled;
pub mod spinor;
pub mod trajectory;
pub mod wavefield;

pub use apparatus::{
    label_outcome, pass_device, run_chain, ChainOutcome, ExperimentChain, OutcomeLabel, Selection,
    Sign, Stage, TransverseMode,
};
pub use ensemble::{compare_to_born, run_ensemble, sample_initial, BornReport, RunStats};
pub use entangled::{singlet, ScenarioConfig, TwoParticleSpinState};
pub use spinor::{born_probabilities, decompose, eigenspinors, MeasurementAxis, Spinor};
pub use trajectory::{
    critical_geometry, propagate_analytic, propagate_numeric, Branch, TrajectoryRecord,
};
pub use wavefield::{classify_region, DeviceConfig, Polarity, Region, WaveField};
