//! Multispectral LiDAR forest segmentation toolkit.
//!
//! The pipeline runs per-channel outlier removal, fuses the SWIR, NIR and
//! Green scanners into one multispectral cloud, normalizes heights, builds
//! geometric and spectral feature tables, trains a random forest over six
//! forest classes and scores predictions with OA, mAcc, IoU, mIoU and wIoU.

pub mod error;
pub mod features;
pub mod forest;
pub mod index;
pub mod io;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod spectral;
mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    class_distribution, Channel, ChannelCloud, ChannelPoint, MultispectralCloud,
    MultispectralPoint, PerClass, SemanticClass, NUM_CLASSES,
};
