//! Depth-field imaging: per-ray albedo and time-of-flight phase over a 4D
//! light field, with simulation, quadrature inversion, synthetic-aperture
//! refocusing, phase unwrapping, occluder removal and multiplexed capture.

pub mod cli;
pub mod config;
pub mod dfz;
pub mod error;
pub mod export;
pub mod field;
pub mod lightfield;
pub mod multiplex;
pub mod occlusion;
pub mod phase;
pub mod scenes;
pub mod simulator;
pub mod tof;
pub mod unwrap;

pub use config::{CameraArrayConfig, PhaseOffsets, SPEED_OF_LIGHT};
pub use error::{Error, Result};
pub use field::{DepthField, DepthMap, QuadratureStack};
pub use lightfield::{refocus, RefocusMode, Refocused, Shear};
pub use multiplex::{forward_multiplex, invert_multiplex, ModulationMatrix};
pub use phase::{depth_to_phase, phase_to_depth, wrap_phase};
pub use simulator::{render_ground_truth, render_quadrature, NoiseModel, Scene};
pub use tof::{invert_quadrature, to_depth_map};
