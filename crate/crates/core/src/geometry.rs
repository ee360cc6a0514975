//! Pinhole back-projection, 3D centroids, RoI boxes and control-region
//! distances.
//!
//! Pixel centers sit at integer coordinates: column `c` is `x = c`, row `r`
//! is `y = r`. Depth is stored in millimeters and converted to meters exactly
//! once, when a pixel is back-projected; every [`Point3`] is in meters.

use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::PixelSet;
use crate::rgbd::DepthFrame;

pub const MM_PER_M: f64 = 1000.0;

/// Focal lengths and principal point of the depth camera, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Checks the intrinsics against an image of the given size.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !(self.fx > 0.0 && self.fx.is_finite()) || !(self.fy > 0.0 && self.fy.is_finite()) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < width as f64) || !(self.cy >= 0.0 && self.cy < height as f64) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, width, height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Maps pixel `(x, y)` at depth `depth_m` (meters) to a camera-frame point:
/// `X = (x - cx) d / fx`, `Y = (y - cy) d / fy`, `Z = d`.
pub fn backproject(x: f64, y: f64, depth_m: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(depth_m > 0.0) {
        return Err(Error::NonPositiveDepth(depth_m));
    }
    Ok(Point3::new((x - k.cx) * depth_m / k.fx, (y - k.cy) * depth_m / k.fy, depth_m))
}

/// Inverse of [`backproject`]: returns `(x, y, depth_m)`.
pub fn project(p: Point3, k: &CameraIntrinsics) -> Result<(f64, f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::NonPositiveDepth(p.z));
    }
    Ok((p.x * k.fx / p.z + k.cx, p.y * k.fy / p.z + k.cy, p.z))
}

/// Running sum of back-projected points; merging two accumulators gives the
/// centroid of the union without revisiting pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CentroidAccumulator {
    sum: Point3,
    count: usize,
}

impl CentroidAccumulator {
    pub fn push(&mut self, p: Point3) {
        self.sum = self.sum + p;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &CentroidAccumulator) {
        self.sum = self.sum + other.sum;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn centroid(&self) -> Option<Point3> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Back-projects a stored depth pixel, treating 0 as a hole.
#[inline]
pub fn backproject_pixel(row: u32, col: u32, depth: &DepthFrame, k: &CameraIntrinsics) -> Result<Point3> {
    let d = depth.get(row as usize, col as usize);
    if d == 0 {
        return Err(Error::NonPositiveDepth(0.0));
    }
    backproject(col as f64, row as f64, d as f64 / MM_PER_M, k)
}

pub fn accumulate_pixels(pixels: &PixelSet, depth: &DepthFrame, k: &CameraIntrinsics) -> Result<CentroidAccumulator> {
    let mut acc = CentroidAccumulator::default();
    for p in pixels {
        acc.push(backproject_pixel(p.row, p.col, depth, k)?);
    }
    Ok(acc)
}

/// Arithmetic mean of the back-projections of every mask pixel.
pub fn mask_centroid_3d(pixels: &PixelSet, depth: &DepthFrame, k: &CameraIntrinsics) -> Result<Point3> {
    accumulate_pixels(pixels, depth, k)?.centroid().ok_or(Error::EmptyMask)
}

/// Euclidean distance between the 3D centroids of two masks, each read
/// against its own depth frame.
pub fn distance_3d(
    a: &PixelSet,
    depth_a: &DepthFrame,
    b: &PixelSet,
    depth_b: &DepthFrame,
    k: &CameraIntrinsics,
) -> Result<f64> {
    Ok(mask_centroid_3d(a, depth_a, k)?.distance(mask_centroid_3d(b, depth_b, k)?))
}

/// Axis-aligned box `(x, y, w, h)` in pixels, `x`/`y` being the left/top edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RoiBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains_box(&self, other: &RoiBox) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && self.x + self.w >= other.x + other.w
            && self.y + self.h >= other.y + other.h
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Grows a RoI about its center by `alpha` of its size on every side:
/// `x' = x - a w`, `y' = y - a h`, `w' = (1 + 2a) w`, `h' = (1 + 2a) h`.
/// No clipping; see [`clip_roi`].
pub fn expand_roi(roi: RoiBox, alpha: f64) -> RoiBox {
    assert!(alpha >= 0.0, "expansion factor must be non-negative, got {alpha}");
    let scale = 1.0 + 2.0 * alpha;
    RoiBox::new(roi.x - alpha * roi.w, roi.y - alpha * roi.h, scale * roi.w, scale * roi.h)
}

/// Intersection of `roi` with the image rectangle `[0, width) x [0, height)`.
pub fn clip_roi(roi: RoiBox, width: usize, height: usize) -> Result<RoiBox> {
    let x0 = roi.x.max(0.0);
    let y0 = roi.y.max(0.0);
    let x1 = (roi.x + roi.w).min(width as f64);
    let y1 = (roi.y + roi.h).min(height as f64);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::EmptyIntersection { width, height });
    }
    Ok(RoiBox::new(x0, y0, x1 - x0, y1 - y0))
}

/// Tightest box around the mask, in whole pixels.
pub fn mask_to_bbox(pixels: &PixelSet) -> Result<RoiBox> {
    let first = pixels.first().ok_or(Error::EmptyMask)?;
    let (mut r0, mut r1, mut c0, mut c1) = (first.row, first.row, first.col, first.col);
    for p in pixels {
        r0 = r0.min(p.row);
        r1 = r1.max(p.row);
        c0 = c0.min(p.col);
        c1 = c1.max(p.col);
    }
    Ok(RoiBox::new(c0 as f64, r0 as f64, (c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64))
}

/// A human-calibrated fixed region of the cabin (e.g. the steering wheel)
/// as a camera-frame point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRegion {
    pub name: String,
    pub points: Vec<Point3>,
}

impl ControlRegion {
    pub fn new(name: impl Into<String>, points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(Self { name: name.into(), points })
    }

    /// Back-projects every labeled pixel with valid depth.
    pub fn from_mask(
        name: impl Into<String>,
        pixels: &PixelSet,
        depth: &DepthFrame,
        k: &CameraIntrinsics,
    ) -> Result<Self> {
        let points = pixels
            .iter()
            .filter(|p| depth.get(p.row as usize, p.col as usize) > 0)
            .map(|p| backproject_pixel(p.row, p.col, depth, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, points)
    }
}

/// Distance from a point (an instance centroid) to the nearest point of the
/// region.
pub fn distance_to_region(centroid: Point3, region: &ControlRegion) -> f64 {
    region
        .points
        .iter()
        .map(|&q| centroid.distance(q))
        .fold(f64::INFINITY, f64::min)
}
