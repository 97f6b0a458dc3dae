//! Depth completion toolkit for direct time-of-flight (dToF) sensors.
//!
//! Simulates low-resolution dToF frames with realistic anomalies from dense
//! ground truth, projects real dToF frames into an RGB camera, scores dense
//! predictions, and provides the numeric kernels of a completion model:
//! adaptive depth bins, scale-shift alignment of monocular inverse depth and
//! multi-kernel affinity propagation.
//!
//! Invalid depth is always carried by a mask, never by a sentinel value.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod depth;
pub mod error;
pub mod fov;
pub mod io;
pub mod metrics;
pub mod projection;
pub mod refine;
pub mod simulation;

pub use camera::{CameraModel, CameraRig};
pub use depth::{DToFGrid, DepthMap, Field, SparseDepth, SparsePoint, Volume};
pub use error::{Error, Result};
pub use fov::{fov_coverage, FovRegion};
pub use simulation::{simulate_dtof, SimConfig, SimSeed};

/// Version stamped into every serialized record.
pub const SCHEMA_VERSION: u32 = 1;

pub fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

pub fn check_schema_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported schema_version {version} (this build reads {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}
