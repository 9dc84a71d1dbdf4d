//! Heat and work exchanged by a two-level atom crossing a driven, leaky
//! cavity mode.
//!
//! The atom starts excited and the cavity holds a coherent field. Working in
//! the frame displaced by the steady cavity amplitude, the classical part of
//! the field does work on the atom while the residual quantum field and the
//! leak carry heat. The crate integrates the Lindblad master equation,
//! evaluates both fluxes and the atomic entropy, and runs the coupling sweeps
//! that locate where heat starts to dominate work.

pub mod dynamics;
pub mod effective;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod thermo;

pub use dynamics::{
    build_generator, evolve, evolve_with, EvolveOptions, LindbladGenerator, Picture, SystemParams,
    Trajectory,
};
pub use effective::{critical_drive, crossing_point, CrossingResult};
pub use error::{Error, Result};
pub use experiments::{run_fig1, run_fig2, run_fig3, Fig1Regime, RunSettings, SweepResult, SweepRow};
pub use hilbert::{ComplexMatrix, DensityMatrix, FockCutoff, Space, C64};
pub use thermo::{FluxEvaluator, FluxSample, PhotonAccounting};
