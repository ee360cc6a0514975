//! Hand-instance extraction from a registered RGB-D frame by chroma keying.
//!
//! Per frame:
//!
//! 1. key every pixel whose green excess over relative luminance,
//!    `g - (0.3 r + 0.59 g + 0.11 b)`, reaches `key_threshold`;
//! 2. label connected components of the keyed mask;
//! 3. split each component at the Otsu threshold of its depths, so hands
//!    that touch in the image but not in space come apart;
//! 4. agglomerate the pieces largest-first, dropping specks of `min_area`
//!    pixels or fewer and absorbing any piece whose 3D centroid lies within
//!    `merge_distance` of the growing instance (re-joins occluded hands).

pub mod ccl;
pub mod merge;
pub mod otsu;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Point3, RoiBox};
use crate::mask::{BinaryMask, PixelSet};
use crate::par;
use crate::rgbd::{RegisteredFramePair, RgbFrame};

pub use ccl::{connected_components, Connectivity};
pub use merge::{depth_split, merge_fragments, merge_instances, DepthSplit, Fragment};
pub use otsu::{otsu, otsu_threshold, OtsuResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Otsu-split every component.
    Always,
    /// Split only when the between-class share of the depth variance reaches
    /// `bimodal_min_separability`.
    BimodalGated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChromaParams {
    /// Minimum `g - Y`, on the 0..255 channel scale.
    pub key_threshold: f64,
    /// Seeds with this many pixels or fewer are discarded.
    pub min_area: usize,
    /// Centroid distance (meters) under which fragments are merged.
    pub merge_distance: f64,
    pub connectivity: Connectivity,
    pub split_mode: SplitMode,
    pub bimodal_min_separability: f64,
}

impl Default for ChromaParams {
    fn default() -> Self {
        Self {
            key_threshold: 40.0,
            min_area: 20,
            merge_distance: 0.07,
            connectivity: Connectivity::Eight,
            split_mode: SplitMode::Always,
            bimodal_min_separability: 0.5,
        }
    }
}

impl ChromaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.key_threshold > 0.0) {
            return Err(Error::InvalidParam(format!("key_threshold must be > 0, got {}", self.key_threshold)));
        }
        if !(self.merge_distance > 0.0) {
            return Err(Error::InvalidParam(format!("merge_distance must be > 0, got {}", self.merge_distance)));
        }
        if !(0.0..=1.0).contains(&self.bimodal_min_separability) {
            return Err(Error::InvalidParam(format!(
                "bimodal_min_separability must be in [0, 1], got {}",
                self.bimodal_min_separability
            )));
        }
        Ok(())
    }
}

/// One hand instance in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub pixels: PixelSet,
    /// Mean back-projection of the mask pixels, meters.
    pub centroid: Point3,
    pub bbox: RoiBox,
}

impl InstanceMask {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Final instances of one frame, in emission (seed) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameInstances {
    pub index: usize,
    pub instances: Vec<InstanceMask>,
}

impl FrameInstances {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn centroids(&self) -> Vec<Point3> {
        self.instances.iter().map(|m| m.centroid).collect()
    }
}

#[inline]
pub fn relative_luminance(r: u8, g: u8, b: u8) -> f64 {
    0.3 * r as f64 + 0.59 * g as f64 + 0.11 * b as f64
}

#[inline]
pub fn is_keyed(rgb: [u8; 3], key_threshold: f64) -> bool {
    let [r, g, b] = rgb;
    g as f64 - relative_luminance(r, g, b) >= key_threshold
}

/// Pixels whose green excess `g - Y` is at least `key_threshold`.
pub fn chroma_mask(rgb: &RgbFrame, key_threshold: f64) -> BinaryMask {
    let data = rgb.pixels().iter().map(|&c| is_keyed(c, key_threshold)).collect();
    BinaryMask::from_vec(rgb.width, rgb.height, data)
}

/// Runs the full keying / splitting / merging chain on one frame.
///
/// The depth must be hole-free (in-paint first).
pub fn extract_instances(
    pair: &RegisteredFramePair,
    k: &CameraIntrinsics,
    params: &ChromaParams,
) -> Result<FrameInstances> {
    params.validate()?;
    let holes = pair.depth.hole_count();
    if holes > 0 {
        return Err(Error::DepthHoles { index: pair.index, holes });
    }

    let keyed = chroma_mask(&pair.rgb, params.key_threshold);
    let components = connected_components(&keyed, params.connectivity);

    let mut fragments = Vec::with_capacity(components.len() * 2);
    for component in components {
        let split = depth_split(&component, &pair.depth);
        let split_it = match params.split_mode {
            SplitMode::Always => true,
            SplitMode::BimodalGated => split.otsu.separability >= params.bimodal_min_separability,
        };
        if split_it {
            for side in [split.far, split.near] {
                if !side.is_empty() {
                    fragments.push(Fragment::new(side, &pair.depth, k)?);
                }
            }
        } else {
            fragments.push(Fragment::new(component, &pair.depth, k)?);
        }
    }

    Ok(FrameInstances { index: pair.index, instances: merge_fragments(fragments, params) })
}

/// [`extract_instances`] over many frames, frame-parallel when enabled.
pub fn extract_sequence(
    frames: &[RegisteredFramePair],
    k: &CameraIntrinsics,
    params: &ChromaParams,
) -> Result<Vec<FrameInstances>> {
    par::map(frames, |f| extract_instances(f, k, params)).into_iter().collect()
}
