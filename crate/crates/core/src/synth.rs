//! Deterministic synthetic RGB-D scenes and sequences with exact ground truth.
//!
//! Surfaces are drawn with a z-buffer: a pixel belongs to the nearest of the
//! background plane, the occluders and the blobs covering it (first drawn
//! wins exact ties). Hand-colored blobs are the only keyable surfaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::chromakey::{FrameInstances, InstanceMask};
use crate::geometry::{backproject, mask_centroid_3d, mask_to_bbox, project, CameraIntrinsics, Point3, MM_PER_M};
use crate::mask::{Pixel, PixelSet};
use crate::propagate::{ObjectClass, SequenceLabels, DEFAULT_GATE};
use crate::rgbd::{DepthFrame, RegisteredFramePair, RgbFrame, NATIVE_HEIGHT, NATIVE_WIDTH};

pub const HAND_GREEN: [u8; 3] = [30, 200, 60];
/// Per-channel uniform noise amplitude on hand and background pixels.
pub const COLOR_NOISE: i16 = 10;

pub const DEFAULT_INTRINSICS: CameraIntrinsics = CameraIntrinsics { fx: 365.0, fy: 365.0, cx: 256.0, cy: 212.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Ellipse,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlobColor {
    /// [`HAND_GREEN`] with per-pixel noise.
    Hand,
    Solid([u8; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub shape: Shape,
    /// `[col, row]`
    pub center: [f64; 2],
    /// `[horizontal, vertical]` half-extents in pixels.
    pub radii: [f64; 2],
    pub color: BlobColor,
    pub depth_mm: u16,
}

impl Blob {
    pub fn hand(center: [f64; 2], radii: [f64; 2], depth_mm: u16) -> Self {
        Self { shape: Shape::Ellipse, center, radii, color: BlobColor::Hand, depth_mm }
    }

    pub fn covers(&self, row: usize, col: usize) -> bool {
        let dx = (col as f64 - self.center[0]) / self.radii[0];
        let dy = (row as f64 - self.center[1]) / self.radii[1];
        match self.shape {
            Shape::Ellipse => dx * dx + dy * dy <= 1.0,
            Shape::Rect => dx.abs() <= 1.0 && dy.abs() <= 1.0,
        }
    }

    /// Inclusive pixel bounds `(row0, row1, col0, col1)`, clipped to the image.
    fn pixel_bounds(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let clip = |v: f64, hi: usize| v.max(0.0).min(hi as f64 - 1.0) as usize;
        (
            clip((self.center[1] - self.radii[1]).ceil(), height),
            clip((self.center[1] + self.radii[1]).floor(), height),
            clip((self.center[0] - self.radii[0]).ceil(), width),
            clip((self.center[0] + self.radii[0]).floor(), width),
        )
    }

    /// Rasterized pixels ignoring occlusion.
    pub fn raster(&self, width: usize, height: usize) -> PixelSet {
        let (r0, r1, c0, c1) = self.pixel_bounds(width, height);
        let mut out = Vec::new();
        for r in r0..=r1 {
            for c in c0..=c1 {
                if self.covers(r, c) {
                    out.push(Pixel::new(r as u32, c as u32));
                }
            }
        }
        PixelSet::from_sorted(out)
    }
}

/// Axis-aligned rectangle covering rows `y0..y1` and columns `x0..x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub color: [u8; 3],
    pub depth_mm: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    pub background: [u8; 3],
    pub background_depth_mm: u16,
    pub blobs: Vec<Blob>,
    pub occluders: Vec<Occluder>,
    /// Additive Gaussian depth noise, millimeters.
    pub depth_noise_sigma: f64,
    /// Probability that a pixel's depth is dropped to 0.
    pub hole_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: NATIVE_WIDTH,
            height: NATIVE_HEIGHT,
            intrinsics: DEFAULT_INTRINSICS,
            background: [128, 128, 128],
            background_depth_mm: 2500,
            blobs: Vec::new(),
            occluders: Vec::new(),
            depth_noise_sigma: 3.0,
            hole_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive".into());
        }
        self.intrinsics.validate(self.width, self.height)?;
        if self.background_depth_mm == 0 {
            return bad("background depth must be positive".into());
        }
        if !(self.depth_noise_sigma >= 0.0) {
            return bad(format!("depth noise sigma must be >= 0, got {}", self.depth_noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.hole_fraction) {
            return bad(format!("hole fraction must be in [0, 1], got {}", self.hole_fraction));
        }
        for (i, b) in self.blobs.iter().enumerate() {
            if !(b.radii[0] > 0.0 && b.radii[1] > 0.0) || b.depth_mm == 0 {
                return bad(format!("blob {i} needs positive radii and depth"));
            }
            let inside = b.center[0] - b.radii[0] >= 0.0
                && b.center[1] - b.radii[1] >= 0.0
                && b.center[0] + b.radii[0] <= (self.width - 1) as f64
                && b.center[1] + b.radii[1] <= (self.height - 1) as f64;
            if !inside {
                return bad(format!("blob {i} extends outside the image"));
            }
        }
        for (i, o) in self.occluders.iter().enumerate() {
            if o.x0 >= o.x1 || o.y0 >= o.y1 || o.depth_mm == 0 {
                return bad(format!("occluder {i} is empty or has zero depth"));
            }
            if crate::chromakey::is_keyed(o.color, 1.0) {
                return bad(format!("occluder {i} color is keyable"));
            }
        }
        Ok(())
    }
}

/// Visible pixels of one blob.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthInstance {
    /// Index into the scene's blob list (track index for sequences).
    pub blob: usize,
    pub pixels: PixelSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub pair: RegisteredFramePair,
    /// Blobs with at least one visible pixel, in blob order.
    pub truth: Vec<TruthInstance>,
}

fn jitter(rng: &mut ChaCha8Rng, base: [u8; 3]) -> [u8; 3] {
    base.map(|c| (c as i16 + rng.random_range(-COLOR_NOISE..=COLOR_NOISE)).clamp(0, 255) as u8)
}

#[derive(Clone, Copy)]
enum Surface {
    Background,
    Occluder(usize),
    Blob(usize),
}

fn render_blobs(spec: &SceneSpec, blobs: &[(usize, &Blob)], index: usize) -> Result<RenderedScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut zbuf = vec![spec.background_depth_mm; w * h];
    let mut surface = vec![Surface::Background; w * h];

    for (i, o) in spec.occluders.iter().enumerate() {
        for r in o.y0..o.y1.min(h) {
            for c in o.x0..o.x1.min(w) {
                let p = r * w + c;
                if o.depth_mm < zbuf[p] {
                    zbuf[p] = o.depth_mm;
                    surface[p] = Surface::Occluder(i);
                }
            }
        }
    }
    for (slot, &(_, b)) in blobs.iter().enumerate() {
        let (r0, r1, c0, c1) = b.pixel_bounds(w, h);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let p = r * w + c;
                if b.covers(r, c) && b.depth_mm < zbuf[p] {
                    zbuf[p] = b.depth_mm;
                    surface[p] = Surface::Blob(slot);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.depth_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.depth_noise_sigma).expect("sigma validated"));
    let mut rgb = Vec::with_capacity(w * h);
    let mut depth = Vec::with_capacity(w * h);
    let mut owned: Vec<Vec<Pixel>> = vec![Vec::new(); blobs.len()];
    for p in 0..w * h {
        let color = match surface[p] {
            Surface::Background => jitter(&mut rng, spec.background),
            Surface::Occluder(i) => spec.occluders[i].color,
            Surface::Blob(slot) => {
                owned[slot].push(Pixel::new((p / w) as u32, (p % w) as u32));
                match blobs[slot].1.color {
                    BlobColor::Hand => jitter(&mut rng, HAND_GREEN),
                    BlobColor::Solid(c) => c,
                }
            }
        };
        rgb.push(color);
        let mut d = zbuf[p] as f64;
        if let Some(n) = &noise {
            d += n.sample(&mut rng);
        }
        let mut d = d.round().clamp(1.0, u16::MAX as f64) as u16;
        if spec.hole_fraction > 0.0 && rng.random_bool(spec.hole_fraction) {
            d = 0;
        }
        depth.push(d);
    }

    let truth = owned
        .into_iter()
        .enumerate()
        .filter(|(_, px)| !px.is_empty())
        .map(|(slot, px)| TruthInstance { blob: blobs[slot].0, pixels: PixelSet::from_sorted(px) })
        .collect();
    let pair = RegisteredFramePair::new(index, RgbFrame::new(w, h, rgb)?, DepthFrame::new(w, h, depth)?)?;
    Ok(RenderedScene { pair, truth })
}

/// Renders a single frame with index 1.
pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    let blobs: Vec<(usize, &Blob)> = spec.blobs.iter().enumerate().collect();
    render_blobs(spec, &blobs, 1)
}

/// Camera-frame position of a blob's center at its nominal depth.
pub fn blob_position(blob: &Blob, k: &CameraIntrinsics) -> Point3 {
    backproject(blob.center[0], blob.center[1], blob.depth_mm as f64 / MM_PER_M, k).expect("positive depth")
}

/// One moving blob. Position `i` is the 3D center in frame `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    /// Shape, size and color; center and depth come from `positions`.
    pub blob: Blob,
    pub positions: Vec<Point3>,
    pub visible: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    /// Background, occluders, static blobs, noise and base seed.
    pub scene: SceneSpec,
    pub num_frames: usize,
    pub tracks: Vec<Track>,
    /// Track holding the object.
    pub held_track: usize,
    pub label: ObjectClass,
    /// Gate used to derive the expected labels.
    pub gate: f64,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if self.num_frames == 0 {
            return bad("trajectory needs at least one frame".into());
        }
        if self.held_track >= self.tracks.len() {
            return bad(format!("held track {} does not exist", self.held_track));
        }
        if self.label == ObjectClass::NoObject {
            return bad("held object label must be 1..=4".into());
        }
        for (t, track) in self.tracks.iter().enumerate() {
            if track.positions.len() != self.num_frames || track.visible.len() != self.num_frames {
                return bad(format!("track {t} must have one position and visibility flag per frame"));
            }
            if track.positions.iter().any(|p| !(p.z > 0.0)) {
                return bad(format!("track {t} has a position behind the camera"));
            }
        }
        if !self.tracks[self.held_track].visible[0] {
            return bad("the held track must be visible in frame 1".into());
        }
        Ok(())
    }

    fn frame_seed(&self, frame: usize) -> u64 {
        self.scene.seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }

    fn placed_blob(&self, t: usize, frame: usize) -> Result<Blob> {
        let track = &self.tracks[t];
        let (col, row, d) = project(track.positions[frame], &self.scene.intrinsics)?;
        let depth_mm = (d * MM_PER_M).round();
        if !(1.0..=u16::MAX as f64).contains(&depth_mm) {
            return Err(Error::InvalidScene(format!("track {t} depth out of range in frame {}", frame + 1)));
        }
        Ok(Blob { center: [col, row], depth_mm: depth_mm as u16, ..track.blob.clone() })
    }

    /// Analytic expected labels: the held track is labeled in a frame iff it
    /// is visible and lies within the gate of where it was last labeled.
    /// Assumes every other hand stays farther than the gate from it.
    pub fn expected_held_frames(&self) -> Vec<bool> {
        let held = &self.tracks[self.held_track];
        let mut last = held.positions[0];
        let mut out = vec![true];
        for i in 1..self.num_frames {
            let p = held.positions[i];
            let hit = held.visible[i] && p.distance(last) <= self.gate;
            if hit {
                last = p;
            }
            out.push(hit);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSequence {
    pub frames: Vec<RegisteredFramePair>,
    /// Per frame, visible blobs; `blob` is the track index for tracks and
    /// `tracks.len() + i` for static blob `i`.
    pub truth: Vec<Vec<TruthInstance>>,
    /// Per frame, the track carrying the label (if any).
    pub held: Vec<Option<usize>>,
    pub label: ObjectClass,
}

impl RenderedSequence {
    /// Expected labels laid out over each frame's truth instances.
    pub fn truth_labels(&self) -> SequenceLabels {
        let frames = self
            .truth
            .iter()
            .zip(&self.held)
            .map(|(truth, held)| {
                truth
                    .iter()
                    .map(|t| if Some(t.blob) == *held { self.label } else { ObjectClass::NoObject })
                    .collect()
            })
            .collect();
        SequenceLabels { frames }
    }
}

/// Ground truth as labeled frame instances, with centroids measured on the
/// rendered depth.
pub fn truth_frames(
    frames: &[RegisteredFramePair],
    truth: &[Vec<TruthInstance>],
    k: &CameraIntrinsics,
) -> Result<Vec<FrameInstances>> {
    frames
        .iter()
        .zip(truth)
        .map(|(pair, instances)| {
            let instances = instances
                .iter()
                .map(|t| {
                    Ok(InstanceMask {
                        centroid: mask_centroid_3d(&t.pixels, &pair.depth, k)?,
                        bbox: mask_to_bbox(&t.pixels)?,
                        pixels: t.pixels.clone(),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(FrameInstances { index: pair.index, instances })
        })
        .collect()
}

pub fn render_sequence(spec: &TrajectorySpec) -> Result<RenderedSequence> {
    spec.validate()?;
    let expected = spec.expected_held_frames();
    let n_tracks = spec.tracks.len();
    let mut frames = Vec::with_capacity(spec.num_frames);
    let mut truth = Vec::with_capacity(spec.num_frames);
    for i in 0..spec.num_frames {
        let mut placed = Vec::new();
        for t in 0..n_tracks {
            if spec.tracks[t].visible[i] {
                placed.push((t, spec.placed_blob(t, i)?));
            }
        }
        let mut blobs: Vec<(usize, &Blob)> = placed.iter().map(|(t, b)| (*t, b)).collect();
        blobs.extend(spec.scene.blobs.iter().enumerate().map(|(s, b)| (n_tracks + s, b)));
        let scene = SceneSpec { seed: spec.frame_seed(i), ..spec.scene.clone() };
        let rendered = render_blobs(&scene, &blobs, i + 1)?;
        frames.push(rendered.pair);
        truth.push(rendered.truth);
    }
    let held = expected.into_iter().map(|hit| hit.then_some(spec.held_track)).collect();
    Ok(RenderedSequence { frames, truth, held, label: spec.label })
}

/// Uniform gray or red-dominant background color.
pub fn random_background(rng: &mut impl Rng) -> [u8; 3] {
    if rng.random_bool(0.5) {
        let v = rng.random_range(40..=220);
        [v, v, v]
    } else {
        [rng.random_range(150..=230), rng.random_range(20..=80), rng.random_range(20..=80)]
    }
}

/// Pixel gap between the bounding boxes of two blobs (negative if they overlap).
pub fn bbox_gap(a: &Blob, b: &Blob) -> f64 {
    let gx = (a.center[0] - b.center[0]).abs() - a.radii[0] - b.radii[0];
    let gy = (a.center[1] - b.center[1]).abs() - a.radii[1] - b.radii[1];
    gx.max(gy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSceneOptions {
    pub max_hands: usize,
    /// Minimum 3D distance between hand centers, meters.
    pub min_separation: f64,
    pub num_specks: usize,
    pub depth_noise_sigma: f64,
}

impl Default for RandomSceneOptions {
    fn default() -> Self {
        Self { max_hands: 4, min_separation: 0.15, num_specks: 2, depth_noise_sigma: 3.0 }
    }
}

/// A native-resolution scene of 1..=`max_hands` well-separated hands plus
/// 15-pixel green specks placed away from every hand. Hands are blob indices
/// `0..hands`, specks follow.
pub fn random_scene(seed: u64, opts: &RandomSceneOptions) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = DEFAULT_INTRINSICS;
    let (w, h) = (NATIVE_WIDTH as f64, NATIVE_HEIGHT as f64);
    let want = rng.random_range(1..=opts.max_hands.max(1));
    let mut hands: Vec<Blob> = Vec::new();
    for _ in 0..want * 200 {
        if hands.len() == want {
            break;
        }
        let radii = [rng.random_range(10.0..40.0), rng.random_range(10.0..40.0)];
        let center = [
            rng.random_range(radii[0] + 2.0..w - radii[0] - 3.0),
            rng.random_range(radii[1] + 2.0..h - radii[1] - 3.0),
        ];
        let blob = Blob::hand(center, radii, rng.random_range(500..=2000));
        let p = blob_position(&blob, &k);
        if hands.iter().all(|o| bbox_gap(o, &blob) >= 3.0 && blob_position(o, &k).distance(p) > opts.min_separation)
        {
            hands.push(blob);
        }
    }
    let mut blobs = hands.clone();
    for _ in 0..opts.num_specks * 200 {
        if blobs.len() == hands.len() + opts.num_specks {
            break;
        }
        // 3x5 rectangle: exactly 15 pixels when centered on a pixel
        let center = [rng.random_range(4..w as i64 - 4) as f64, rng.random_range(4..h as i64 - 4) as f64];
        let speck = Blob {
            shape: Shape::Rect,
            center,
            radii: [2.0, 1.0],
            color: BlobColor::Hand,
            depth_mm: rng.random_range(500..=2000),
        };
        let p = blob_position(&speck, &k);
        if blobs.iter().all(|o| bbox_gap(o, &speck) >= 3.0 && blob_position(o, &k).distance(p) > 0.1) {
            blobs.push(speck);
        }
    }
    SceneSpec {
        background: random_background(&mut rng),
        blobs,
        depth_noise_sigma: opts.depth_noise_sigma,
        seed,
        ..SceneSpec::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomTrajectoryOptions {
    pub num_frames: usize,
    /// Upper bound on per-frame motion, meters.
    pub max_step: f64,
    pub num_gaps: usize,
    pub num_jumps: usize,
    /// Length range of injected jumps, meters.
    pub jump_range: (f64, f64),
    pub num_distractors: usize,
    /// Minimum 3D distance from any distractor to the held hand, meters.
    pub distractor_clearance: f64,
    pub depth_noise_sigma: f64,
}

impl Default for RandomTrajectoryOptions {
    fn default() -> Self {
        Self {
            num_frames: 30,
            max_step: 0.03,
            num_gaps: 1,
            num_jumps: 1,
            jump_range: (0.25, 0.35),
            num_distractors: 1,
            distractor_clearance: 0.4,
            depth_noise_sigma: 3.0,
        }
    }
}

/// Injected events of a random trajectory, as 0-based frame indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InjectedEvents {
    pub gaps: Vec<usize>,
    pub jumps: Vec<usize>,
}

fn random_unit(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// A held hand drifting at most `max_step` per frame, with 1-3 frame
/// visibility gaps and one-frame jumps away from the camera, plus static
/// distractor hands kept clear of it in 2D and 3D.
pub fn random_trajectory(seed: u64, label: ObjectClass, opts: &RandomTrajectoryOptions) -> (TrajectorySpec, InjectedEvents) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = DEFAULT_INTRINSICS;
    let n = opts.num_frames.max(1);
    let (lo, hi) = (Point3::new(-0.2, -0.12, 0.7), Point3::new(0.2, 0.12, 1.1));
    let radii = [rng.random_range(14.0..24.0), rng.random_range(14.0..24.0)];

    let mut path = vec![Point3::new(
        rng.random_range(lo.x..hi.x),
        rng.random_range(lo.y..hi.y),
        rng.random_range(lo.z..hi.z),
    )];
    for _ in 1..n {
        let prev = *path.last().expect("non-empty");
        let step = random_unit(&mut rng) * rng.random_range(0.0..opts.max_step);
        let mut p = prev + step;
        // reflect back into the box by stepping the other way
        if p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y || p.z < lo.z || p.z > hi.z {
            p = prev - step;
        }
        path.push(p);
    }

    // events on disjoint, non-adjacent frame windows, never frame 1
    let mut events = InjectedEvents::default();
    let mut busy = vec![false; n];
    busy[0] = true;
    let mut visible = vec![true; n];
    let mut positions = path.clone();
    let place = |len: usize, rng: &mut ChaCha8Rng, busy: &mut Vec<bool>| -> Option<usize> {
        for _ in 0..100 {
            if n < len + 3 {
                return None;
            }
            let start = rng.random_range(1..n - len);
            let window = start.saturating_sub(1)..(start + len + 1).min(n);
            if !busy[window.clone()].iter().any(|&b| b) {
                busy[window].iter_mut().for_each(|b| *b = true);
                return Some(start);
            }
        }
        None
    };
    for _ in 0..opts.num_gaps {
        let len = rng.random_range(1..=3);
        if let Some(start) = place(len, &mut rng, &mut busy) {
            visible[start..start + len].fill(false);
            events.gaps.extend(start..start + len);
        }
    }
    for _ in 0..opts.num_jumps {
        if let Some(f) = place(1, &mut rng, &mut busy) {
            positions[f] = path[f] + Point3::new(0.0, 0.0, rng.random_range(opts.jump_range.0..opts.jump_range.1));
            events.jumps.push(f);
        }
    }
    events.gaps.sort_unstable();
    events.jumps.sort_unstable();

    let held_blob = Blob::hand([0.0, 0.0], radii, 1);
    let held_pixels: Vec<Blob> = positions
        .iter()
        .map(|&p| {
            let (c, r, _) = project(p, &k).expect("positive depth");
            Blob { center: [c, r], ..held_blob.clone() }
        })
        .collect();

    let mut tracks = vec![Track { blob: held_blob, positions, visible }];
    for _ in 0..opts.num_distractors {
        for _ in 0..500 {
            let dr = [rng.random_range(12.0..30.0), rng.random_range(12.0..30.0)];
            let z = rng.random_range(0.6..1.5);
            let c = rng.random_range(dr[0] + 2.0..NATIVE_WIDTH as f64 - dr[0] - 3.0);
            let r = rng.random_range(dr[1] + 2.0..NATIVE_HEIGHT as f64 - dr[1] - 3.0);
            let p = backproject(c, r, z, &k).expect("positive depth");
            let blob = Blob::hand([c, r], dr, (z * MM_PER_M).round() as u16);
            let clear_3d = tracks[0].positions.iter().chain(&path).all(|q| q.distance(p) >= opts.distractor_clearance);
            let clear_2d = held_pixels.iter().all(|h| bbox_gap(h, &blob) >= 3.0)
                && tracks[1..].iter().all(|t| {
                    let (oc, or, _) = project(t.positions[0], &k).expect("positive depth");
                    bbox_gap(&Blob { center: [oc, or], ..t.blob.clone() }, &blob) >= 3.0
                });
            let clear_others = tracks[1..].iter().all(|t| t.positions[0].distance(p) >= opts.distractor_clearance);
            if clear_3d && clear_2d && clear_others {
                tracks.push(Track { blob: Blob { depth_mm: 1, ..blob }, positions: vec![p; n], visible: vec![true; n] });
                break;
            }
        }
    }

    let spec = TrajectorySpec {
        scene: SceneSpec {
            background: random_background(&mut rng),
            depth_noise_sigma: opts.depth_noise_sigma,
            seed,
            ..SceneSpec::default()
        },
        num_frames: n,
        tracks,
        held_track: 0,
        label,
        gate: DEFAULT_GATE,
    };
    (spec, events)
}

/// Pixels with `r_in <= distance to center <= r_out`.
pub fn annulus(center: [f64; 2], r_in: f64, r_out: f64, width: usize, height: usize) -> PixelSet {
    let mut out = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let d = ((c as f64 - center[0]).powi(2) + (r as f64 - center[1]).powi(2)).sqrt();
            if d >= r_in && d <= r_out {
                out.push(Pixel::new(r as u32, c as u32));
            }
        }
    }
    PixelSet::from_sorted(out)
}
