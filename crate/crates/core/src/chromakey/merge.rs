//! Depth splitting of 2D components and greedy 3D agglomeration.

use std::cmp::Reverse;

use crate::error::Result;
use crate::geometry::{accumulate_pixels, mask_to_bbox, CameraIntrinsics, CentroidAccumulator};
use crate::mask::{Pixel, PixelSet};
use crate::rgbd::DepthFrame;

use super::otsu::{otsu, OtsuResult};
use super::{ChromaParams, InstanceMask};

/// Result of thresholding a mask's depths at their Otsu threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSplit {
    /// Pixels with depth `>=` the threshold.
    pub far: PixelSet,
    /// Pixels with depth `<` the threshold.
    pub near: PixelSet,
    pub otsu: OtsuResult,
}

/// Splits `mask` at the Otsu threshold of its depth values. The two sides
/// partition the mask; one of them is empty when the depths are constant.
///
/// Panics on an empty mask.
pub fn depth_split(mask: &PixelSet, depth: &DepthFrame) -> DepthSplit {
    let samples: Vec<u16> = mask.iter().map(|p| depth.get(p.row as usize, p.col as usize)).collect();
    let result = otsu(&samples);
    let (mut far, mut near) = (Vec::new(), Vec::new());
    for (p, &d) in mask.iter().zip(&samples) {
        if d as f64 >= result.threshold {
            far.push(*p);
        } else {
            near.push(*p);
        }
    }
    DepthSplit { far: PixelSet::from_sorted(far), near: PixelSet::from_sorted(near), otsu: result }
}

/// A candidate mask with its running 3D centroid.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub pixels: PixelSet,
    pub centroid: CentroidAccumulator,
}

impl Fragment {
    pub fn new(pixels: PixelSet, depth: &DepthFrame, k: &CameraIntrinsics) -> Result<Self> {
        let centroid = accumulate_pixels(&pixels, depth, k)?;
        Ok(Self { pixels, centroid })
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    fn order_key(&self) -> (Reverse<usize>, Option<Pixel>) {
        (Reverse(self.area()), self.pixels.first())
    }
}

/// Greedy largest-first agglomeration.
///
/// Repeatedly takes the largest remaining fragment (ties: earlier top-left
/// pixel). Fragments of `min_area` pixels or fewer are dropped when they come
/// up as the seed. Otherwise every other remaining fragment, visited in the
/// same order, is absorbed if its centroid lies within `merge_distance` of
/// the growing mask's current centroid; the centroid is updated after each
/// absorption. Emitted instances are in seed order.
pub fn merge_fragments(mut fragments: Vec<Fragment>, params: &ChromaParams) -> Vec<InstanceMask> {
    fragments.retain(|f| f.area() > 0);
    fragments.sort_by_key(Fragment::order_key);

    let mut out = Vec::new();
    let mut remaining = std::collections::VecDeque::from(fragments);
    while let Some(mut seed) = remaining.pop_front() {
        if seed.area() <= params.min_area {
            continue;
        }
        let mut kept = std::collections::VecDeque::with_capacity(remaining.len());
        for other in remaining.drain(..) {
            let grown = seed.centroid.centroid().expect("non-empty seed");
            let c = other.centroid.centroid().expect("non-empty fragment");
            if grown.distance(c) <= params.merge_distance {
                seed.pixels = seed.pixels.union(&other.pixels);
                seed.centroid.merge(&other.centroid);
            } else {
                kept.push_back(other);
            }
        }
        remaining = kept;
        let bbox = mask_to_bbox(&seed.pixels).expect("non-empty seed");
        out.push(InstanceMask {
            centroid: seed.centroid.centroid().expect("non-empty seed"),
            pixels: seed.pixels,
            bbox,
        });
    }
    out
}

/// [`merge_fragments`] over plain pixel sets; centroids are computed from
/// `depth`, which must be hole-free under every mask.
pub fn merge_instances(
    masks: Vec<PixelSet>,
    depth: &DepthFrame,
    k: &CameraIntrinsics,
    params: &ChromaParams,
) -> Result<Vec<InstanceMask>> {
    let fragments = masks
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| Fragment::new(m, depth, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_fragments(fragments, params))
}
