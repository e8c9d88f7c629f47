//! Pose-free classification of pain state from long fixed-camera videos of
//! a single animal.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! 1. [`video`]: load and validate grayscale recordings (`MPVR` containers
//!    or PGM/PPM frame directories).
//! 2. [`background`]: per-pixel temporal-median background and the
//!    foreground difference video.
//! 3. [`features`]: 1.5 s clips, each reduced to a `T × 7 × 7 × D` grid
//!    with a response surface.
//! 4. [`mask`]: keep only the 3×3 window of cells with the strongest response.
//! 5. [`ssm`]: a diagonal state-space sequence classifier trained with
//!    focal loss and hand-written gradients.
//!
//! [`eval`] holds the label taxonomy, cross-validation protocol and
//! metrics; [`synth`] generates class-conditioned synthetic recordings;
//! [`pipeline`] wires everything into the commands exposed by the `mpain`
//! binary.

pub mod background;
pub mod error;
pub mod eval;
pub mod features;
pub mod mask;
pub mod pipeline;
pub mod ssm;
pub mod synth;
pub mod video;

pub use error::{Error, Result};

/// Version string embedded in run artifacts.
pub const PIPELINE_VERSION: &str = concat!("mpain-", env!("CARGO_PKG_VERSION"));
