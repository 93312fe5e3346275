//! Synthetic radar data: 1-D wave solvers and the 3-D frequency-domain
//! volume integral solver with time-trace synthesis.

mod band;
mod incident;
mod lippmann;
mod traces;
mod wave1d;

pub use band::{synthesize_traces, FrequencyBand};
pub use incident::{green, incident_field_v0, DiskQuadrature};
pub use lippmann::{
    incident_on, self_cell_integral, solve_lippmann_schwinger, LsOperator, LsOptions, ScatteredField, Scatterer,
    VoxelGrid,
};
pub use traces::TraceSet;
pub use wave1d::{solve_wave_1d_chirp, solve_wave_1d_impulse, ImpulseTrace, Wave1d, Wave1dOptions};
