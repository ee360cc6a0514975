//! RGB-guided depth hole filling.
//!
//! A hole pixel takes the cross-bilateral average of the valid depths around
//! it: each neighbor is weighted by a spatial Gaussian on pixel distance times
//! a range Gaussian on the Euclidean RGB distance between the two guide
//! pixels. Holes too far from any valid pixel are handled coarse-to-fine:
//! depth and RGB are halved `num_scales - 1` times, the coarsest level is
//! filled by repeated passes, and each finer level uses the upsampled fill
//! from below only where no valid neighbor of its own is in reach.
//!
//! Valid pixels are never modified, and every filled value is a convex
//! combination of observed depths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rgbd::{DepthFrame, RgbFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintParams {
    pub num_scales: usize,
    /// Spatial Gaussian sigma, in pixels of the level being filtered.
    pub spatial_sigma: f64,
    /// Range Gaussian sigma, in RGB units.
    pub range_sigma: f64,
    pub kernel_radius: usize,
}

impl Default for InpaintParams {
    fn default() -> Self {
        Self { num_scales: 3, spatial_sigma: 3.0, range_sigma: 20.0, kernel_radius: 5 }
    }
}

impl InpaintParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 {
            return Err(Error::InvalidParam("num_scales must be at least 1".into()));
        }
        if !(self.spatial_sigma > 0.0) || !(self.range_sigma > 0.0) {
            return Err(Error::InvalidParam(format!(
                "sigmas must be positive (spatial {}, range {})",
                self.spatial_sigma, self.range_sigma
            )));
        }
        if self.kernel_radius == 0 {
            return Err(Error::InvalidParam("kernel_radius must be at least 1".into()));
        }
        Ok(())
    }
}

/// One pyramid level. `depth` uses 0.0 for holes.
struct Level {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    guide: Vec<[f64; 3]>,
}

impl Level {
    fn from_frames(depth: &DepthFrame, rgb: &RgbFrame) -> Self {
        Self {
            width: depth.width,
            height: depth.height,
            depth: depth.values().iter().map(|&v| v as f64).collect(),
            guide: rgb.pixels().iter().map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect(),
        }
    }

    /// 2x2 block reduction: depth is the mean of the block's valid pixels,
    /// the guide is the mean of all block pixels.
    fn downsample(&self) -> Level {
        let (w, h) = (self.width.div_ceil(2), self.height.div_ceil(2));
        let mut depth = vec![0.0; w * h];
        let mut guide = vec![[0.0; 3]; w * h];
        for r in 0..h {
            for c in 0..w {
                let (mut dsum, mut dn, mut gsum, mut gn) = (0.0, 0usize, [0.0; 3], 0usize);
                for rr in 2 * r..(2 * r + 2).min(self.height) {
                    for cc in 2 * c..(2 * c + 2).min(self.width) {
                        let i = rr * self.width + cc;
                        if self.depth[i] > 0.0 {
                            dsum += self.depth[i];
                            dn += 1;
                        }
                        for (s, g) in gsum.iter_mut().zip(self.guide[i]) {
                            *s += g;
                        }
                        gn += 1;
                    }
                }
                if dn > 0 {
                    depth[r * w + c] = dsum / dn as f64;
                }
                guide[r * w + c] = gsum.map(|s| s / gn as f64);
            }
        }
        Level { width: w, height: h, depth, guide }
    }
}

struct Kernel {
    radius: usize,
    spatial: Vec<f64>,
    inv_two_range_var: f64,
}

impl Kernel {
    fn new(params: &InpaintParams) -> Self {
        let r = params.kernel_radius as i64;
        let side = 2 * r + 1;
        let inv = 1.0 / (2.0 * params.spatial_sigma * params.spatial_sigma);
        let spatial = (0..side * side)
            .map(|i| {
                let (dy, dx) = (i / side - r, i % side - r);
                (-((dx * dx + dy * dy) as f64) * inv).exp()
            })
            .collect();
        Self {
            radius: params.kernel_radius,
            spatial,
            inv_two_range_var: 1.0 / (2.0 * params.range_sigma * params.range_sigma),
        }
    }

    /// Cross-bilateral average at `(r, c)` over neighbors with `source > 0`.
    /// Falls back to the purely spatial average if every range weight
    /// underflows. `None` when no neighbor is valid.
    fn average(&self, level: &Level, source: &[f64], r: usize, c: usize) -> Option<f64> {
        let rad = self.radius;
        let side = 2 * rad + 1;
        let center = level.guide[r * level.width + c];
        let (r0, r1) = (r.saturating_sub(rad), (r + rad).min(level.height - 1));
        let (c0, c1) = (c.saturating_sub(rad), (c + rad).min(level.width - 1));
        let (mut num, mut den, mut snum, mut sden) = (0.0, 0.0, 0.0, 0.0);
        for rr in r0..=r1 {
            let krow = (rr + rad - r) * side;
            for cc in c0..=c1 {
                let i = rr * level.width + cc;
                let d = source[i];
                if d <= 0.0 {
                    continue;
                }
                let g = level.guide[i];
                let dist2 = (g[0] - center[0]).powi(2) + (g[1] - center[1]).powi(2) + (g[2] - center[2]).powi(2);
                let ws = self.spatial[krow + cc + rad - c];
                let w = ws * (-dist2 * self.inv_two_range_var).exp();
                num += w * d;
                den += w;
                snum += ws * d;
                sden += ws;
            }
        }
        if den > 0.0 {
            Some(num / den)
        } else if sden > 0.0 {
            Some(snum / sden)
        } else {
            None
        }
    }
}

/// Fills the holes of `level`: from observed neighbors where any are in
/// reach, else from `seed` (the upsampled coarser fill). Without a seed the
/// pass repeats, treating earlier fills as valid, until nothing is left.
fn fill_level(level: &Level, seed: Option<&[f64]>, kernel: &Kernel) -> Vec<f64> {
    let w = level.width;
    let mut current = level.depth.clone();
    loop {
        let source = current.clone();
        let mut next = current.clone();
        par::for_each_row(&mut next, w, |r, row| {
            for (c, out) in row.iter_mut().enumerate() {
                if *out > 0.0 {
                    continue;
                }
                if let Some(v) = kernel.average(level, &source, r, c) {
                    *out = v;
                } else if let Some(seed) = seed {
                    *out = kernel.average(level, seed, r, c).unwrap_or(seed[r * w + c]);
                }
            }
        });
        let remaining = next.iter().filter(|&&v| v <= 0.0).count();
        let filled_any = remaining < source.iter().filter(|&&v| v <= 0.0).count();
        current = next;
        if remaining == 0 || !filled_any {
            return current;
        }
    }
}

fn upsample(coarse: &[f64], cw: usize, width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for r in 0..height {
        for c in 0..width {
            out[r * width + c] = coarse[(r / 2) * cw + c / 2];
        }
    }
    out
}

/// Fills every zero-depth pixel of `depth`, guided by `rgb`.
pub fn inpaint(depth: &DepthFrame, rgb: &RgbFrame, params: &InpaintParams) -> Result<DepthFrame> {
    params.validate()?;
    if (depth.width, depth.height) != (rgb.width, rgb.height) {
        return Err(Error::RegistrationMismatch {
            index: 0,
            rgb_width: rgb.width,
            rgb_height: rgb.height,
            depth_width: depth.width,
            depth_height: depth.height,
        });
    }
    let holes = depth.hole_count();
    if holes == 0 {
        return Ok(depth.clone());
    }
    if holes == depth.values().len() {
        return Err(Error::AllHoles);
    }

    let kernel = Kernel::new(params);
    let mut levels = vec![Level::from_frames(depth, rgb)];
    while levels.len() < params.num_scales {
        let last = levels.last().unwrap();
        if last.width == 1 && last.height == 1 {
            break;
        }
        levels.push(last.downsample());
    }

    let mut filled = fill_level(levels.last().unwrap(), None, &kernel);
    for l in (0..levels.len() - 1).rev() {
        let (fine, coarse) = (&levels[l], &levels[l + 1]);
        let seed = upsample(&filled, coarse.width, fine.width, fine.height);
        filled = fill_level(fine, Some(&seed), &kernel);
    }

    let (lo, hi) = depth.observed_range().expect("at least one valid pixel");
    let values = depth
        .values()
        .iter()
        .zip(&filled)
        .map(|(&orig, &f)| if orig > 0 { orig } else { (f.round() as u16).clamp(lo, hi) })
        .collect();
    DepthFrame::new(depth.width, depth.height, values)
}
