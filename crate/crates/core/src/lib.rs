//! Virtual inertial-sensor synthesis and the MARS hybrid convolutional
//! denoising network for human activity recognition.
//!
//! The crate is organized bottom-up:
//!
//! - [`kinematics`]: articulated skeleton, forward kinematics, linear blend
//!   skinning and virtual IMU sampling.
//! - [`motiongen`]: procedural labeled motion corpora (a large clean source
//!   domain and a small noisy target domain).
//! - [`sigproc`]: filtering, root-frame normalization, channel layouts,
//!   standardization and windowing.
//! - [`autodiff`]: a small dense reverse-mode differentiation core.
//! - [`model`]: the two denoising pathways, three fusion heads and the
//!   composite objective.
//! - [`pipeline`]: training, knowledge transfer, metrics and the sensor-count
//!   ablation harness.
//! - [`io`]: on-disk formats (raw corpus, windowed dataset, checkpoints,
//!   reports, plots).

pub mod autodiff;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod model;
pub mod motiongen;
pub mod pipeline;
pub mod sigproc;

pub use error::{Error, Result};
