//! Semi-automatic hand-instance annotation for registered RGB-D sequences.
//!
//! The pipeline chroma-keys green-gloved hands out of the registered RGB
//! image, splits instances that touch in 2D but sit at different depths,
//! re-merges fragments of occluded hands by 3D centroid distance, and then
//! propagates a single handheld-object label through a sequence from one
//! human-chosen seed instance. Depth holes are filled with an RGB-guided
//! cross-bilateral filter, and predicted instance sets can be scored with
//! COCO-style mask AP.
//!
//! Frame-level work runs on rayon when the `parallel` feature is enabled
//! (the default); without it every helper in [`par`] degrades to a plain
//! sequential iterator with identical output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod chromakey;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod inpaint;
pub mod mask;
pub mod par;
pub mod propagate;
pub mod rgbd;
pub mod synth;

pub use chromakey::{extract_instances, ChromaParams, FrameInstances, InstanceMask};
pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, Point3, RoiBox};
pub use mask::{BinaryMask, Pixel, PixelSet};
pub use propagate::{propagate_labels, ObjectClass, SeedSelection, SequenceLabels};
pub use rgbd::{DepthFrame, RegisteredFramePair, RgbFrame, Sequence, SequenceManifest};
