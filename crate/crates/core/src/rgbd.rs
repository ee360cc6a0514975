//! Registered RGB-D frames and on-disk sequences.
//!
//! A sequence directory holds
//!
//! ```text
//! manifest.json                  {"id", "num_frames", "frame_pattern"}
//! intrinsics.json                {"fx", "fy", "cx", "cy"}
//! frames/frame_000001.rgb.png    8-bit RGB
//! frames/frame_000001.depth.png  16-bit grayscale, millimeters, 0 = hole
//! ```
//!
//! Frames are numbered from 1. Every frame's RGB and depth dimensions are
//! checked from the PNG headers when the sequence is opened, so a
//! registration mismatch never surfaces halfway through processing.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageReader, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub use crate::geometry::CameraIntrinsics;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INTRINSICS_FILE: &str = "intrinsics.json";
pub const DEFAULT_FRAME_PATTERN: &str = "frames/frame_%06d";
const RGB_SUFFIX: &str = ".rgb.png";
const DEPTH_SUFFIX: &str = ".depth.png";

/// Native sensor resolution (width x height).
pub const NATIVE_WIDTH: usize = 512;
pub const NATIVE_HEIGHT: usize = 424;

/// Depth image in millimeters; 0 marks a pixel without a return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    pub width: usize,
    pub height: usize,
    values: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "depth buffer has {} values, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        Self { width, height, values: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u16) {
        self.values[row * self.width + col] = value;
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [u16] {
        &mut self.values
    }

    pub fn hole_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }

    /// `(min, max)` over non-hole pixels.
    pub fn observed_range(&self) -> Option<(u16, u16)> {
        self.values
            .iter()
            .filter(|&&v| v > 0)
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::image(path, e))?;
        let luma = match img {
            image::DynamicImage::ImageLuma16(buf) => buf,
            other => {
                return Err(Error::parse(
                    path,
                    format!("depth must be 16-bit grayscale, found {:?}", other.color()),
                ))
            }
        };
        let (w, h) = luma.dimensions();
        Self::new(w as usize, h as usize, luma.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.values.clone())
                .expect("buffer size checked at construction");
        buf.save(path).map_err(|e| Error::image(path, e))
    }
}

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "rgb buffer has {} pixels, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, color: [u8; 3]) {
        self.pixels[row * self.width + col] = color;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn to_image(&self) -> RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size checked at construction")
    }

    pub fn from_image(img: &RgbImage) -> Self {
        let pixels = img.pixels().map(|Rgb(c)| *c).collect();
        Self { width: img.width() as usize, height: img.height() as usize, pixels }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::image(path, e))?;
        Ok(Self::from_image(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|e| Error::image(path, e))
    }
}

/// Pixel-aligned RGB and depth for one frame (1-based `index`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisteredFramePair {
    pub index: usize,
    pub rgb: RgbFrame,
    pub depth: DepthFrame,
}

impl RegisteredFramePair {
    pub fn new(index: usize, rgb: RgbFrame, depth: DepthFrame) -> Result<Self> {
        check_registration(index, (rgb.width, rgb.height), (depth.width, depth.height))?;
        Ok(Self { index, rgb, depth })
    }

    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }
}

fn check_registration(index: usize, rgb: (usize, usize), depth: (usize, usize)) -> Result<()> {
    if rgb != depth {
        return Err(Error::RegistrationMismatch {
            index,
            rgb_width: rgb.0,
            rgb_height: rgb.1,
            depth_width: depth.0,
            depth_height: depth.1,
        });
    }
    Ok(())
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub id: String,
    pub num_frames: usize,
    #[serde(default = "default_pattern")]
    pub frame_pattern: String,
}

fn default_pattern() -> String {
    DEFAULT_FRAME_PATTERN.to_string()
}

impl ManifestFile {
    pub fn new(id: impl Into<String>, num_frames: usize) -> Self {
        Self { id: id.into(), num_frames, frame_pattern: default_pattern() }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let m: ManifestFile = serde_json::from_str(text).map_err(|e| Error::parse(path, e))?;
        if m.num_frames == 0 {
            return Err(Error::InvalidManifest("num_frames must be at least 1".into()));
        }
        m.format_stem(1)?;
        Ok(m)
    }

    /// Normalized serialization: pretty-printed, fixed key order, trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Expands the `%0Nd` / `%d` placeholder for frame `index`.
    pub fn format_stem(&self, index: usize) -> Result<String> {
        format_pattern(&self.frame_pattern, index)
    }
}

fn format_pattern(pattern: &str, index: usize) -> Result<String> {
    let start = pattern
        .find('%')
        .ok_or_else(|| Error::InvalidManifest(format!("frame_pattern {pattern:?} has no %d placeholder")))?;
    let rest = &pattern[start + 1..];
    let end = rest
        .find('d')
        .ok_or_else(|| Error::InvalidManifest(format!("frame_pattern {pattern:?} has no %d placeholder")))?;
    let spec = &rest[..end];
    let width = if spec.is_empty() {
        0
    } else if let Some(w) = spec.strip_prefix('0').and_then(|w| w.parse::<usize>().ok()) {
        w
    } else {
        return Err(Error::InvalidManifest(format!("unsupported placeholder %{spec}d")));
    };
    if rest[end + 1..].contains('%') {
        return Err(Error::InvalidManifest(format!("frame_pattern {pattern:?} has more than one placeholder")));
    }
    Ok(format!("{}{:0width$}{}", &pattern[..start], index, &rest[end + 1..], width = width))
}

/// Reads and validates `intrinsics.json`. Image bounds are checked once the
/// frame size is known (see [`load_sequence`]).
pub fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let k: CameraIntrinsics = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if !(k.fx > 0.0) || !(k.fy > 0.0) {
        return Err(Error::InvalidIntrinsics(format!("non-positive focal length (fx={}, fy={})", k.fx, k.fy)));
    }
    Ok(k)
}

pub fn save_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    let mut s = serde_json::to_string_pretty(k).expect("intrinsics serialize");
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// A validated manifest: id, frame count, intrinsics and per-frame paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub id: String,
    pub num_frames: usize,
    pub intrinsics: CameraIntrinsics,
    /// `(rgb, depth)` paths, entry `i - 1` for frame `i`.
    pub frame_paths: Vec<(PathBuf, PathBuf)>,
    pub file: ManifestFile,
}

/// An opened sequence directory; frames are decoded on demand.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub root: PathBuf,
    pub manifest: SequenceManifest,
    pub width: usize,
    pub height: usize,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.manifest.num_frames
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.num_frames == 0
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.manifest.intrinsics
    }

    /// Decodes frame `index` (1-based).
    pub fn frame(&self, index: usize) -> Result<RegisteredFramePair> {
        if index == 0 || index > self.manifest.num_frames {
            return Err(Error::FrameOutOfRange { index, count: self.manifest.num_frames });
        }
        let (rgb_path, depth_path) = &self.manifest.frame_paths[index - 1];
        let rgb = RgbFrame::load_png(rgb_path)?;
        let depth = DepthFrame::load_png(depth_path)?;
        RegisteredFramePair::new(index, rgb, depth)
    }

    /// Decodes every frame, in parallel when enabled.
    pub fn load_all(&self) -> Result<Vec<RegisteredFramePair>> {
        par::map_range(self.len(), |i| self.frame(i + 1)).into_iter().collect()
    }
}

fn png_dimensions(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .into_dimensions()
        .map_err(|e| Error::image(path, e))?;
    Ok((w as usize, h as usize))
}

/// Frame indices present on disk for the manifest's pattern and `suffix`.
fn indices_on_disk(root: &Path, file: &ManifestFile, suffix: &str) -> Result<BTreeSet<usize>> {
    let stem = file.format_stem(1)?;
    let rel = Path::new(&stem);
    let dir = root.join(rel.parent().unwrap_or(Path::new("")));
    let pct = file.frame_pattern.find('%').unwrap_or(0);
    let prefix_full = &file.frame_pattern[..pct];
    let name_prefix = Path::new(prefix_full)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|_| !prefix_full.ends_with('/'))
        .unwrap_or_default();
    let mut out = BTreeSet::new();
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(_) => return Ok(out),
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(core) = name.strip_prefix(name_prefix.as_str()).and_then(|n| n.strip_suffix(suffix)) else {
            continue;
        };
        if let Ok(i) = core.parse::<usize>() {
            out.insert(i);
        }
    }
    Ok(out)
}

/// Opens and validates a sequence directory.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let file = ManifestFile::parse(&text, &manifest_path)?;
    let intrinsics = load_intrinsics(&dir.join(INTRINSICS_FILE))?;

    let expected: BTreeSet<usize> = (1..=file.num_frames).collect();
    for suffix in [RGB_SUFFIX, DEPTH_SUFFIX] {
        let found = indices_on_disk(dir, &file, suffix)?;
        if found != expected {
            let missing: Vec<_> = expected.difference(&found).take(5).collect();
            let extra: Vec<_> = found.difference(&expected).take(5).collect();
            return Err(Error::InvalidManifest(format!(
                "non-contiguous {suffix} frames for 1..={}: missing {missing:?}, unexpected {extra:?}",
                file.num_frames
            )));
        }
    }

    let mut frame_paths = Vec::with_capacity(file.num_frames);
    let mut size = None;
    for i in 1..=file.num_frames {
        let stem = file.format_stem(i)?;
        let rgb = dir.join(format!("{stem}{RGB_SUFFIX}"));
        let depth = dir.join(format!("{stem}{DEPTH_SUFFIX}"));
        for p in [&rgb, &depth] {
            if !p.is_file() {
                return Err(Error::MissingFrame(p.clone()));
            }
        }
        let rgb_dims = png_dimensions(&rgb)?;
        let depth_dims = png_dimensions(&depth)?;
        check_registration(i, rgb_dims, depth_dims)?;
        match size {
            None => size = Some(depth_dims),
            Some((w, h)) if (w, h) != depth_dims => {
                return Err(Error::FrameSizeMismatch {
                    index: i,
                    width: depth_dims.0,
                    height: depth_dims.1,
                    expected_width: w,
                    expected_height: h,
                })
            }
            Some(_) => {}
        }
        frame_paths.push((rgb, depth));
    }
    let (width, height) = size.expect("num_frames >= 1");
    intrinsics.validate(width, height)?;

    Ok(Sequence {
        root: dir.to_path_buf(),
        manifest: SequenceManifest {
            id: file.id.clone(),
            num_frames: file.num_frames,
            intrinsics,
            frame_paths,
            file,
        },
        width,
        height,
    })
}

/// Writes a complete sequence directory (manifest, intrinsics, frames).
pub fn write_sequence(
    dir: &Path,
    id: &str,
    intrinsics: &CameraIntrinsics,
    frames: &[RegisteredFramePair],
) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let file = ManifestFile::new(id, frames.len());
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let first = file.format_stem(1)?;
    if let Some(parent) = Path::new(&first).parent() {
        let frames_dir = dir.join(parent);
        fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, file.to_json_string()).map_err(|e| Error::io(&manifest_path, e))?;
    save_intrinsics(&dir.join(INTRINSICS_FILE), intrinsics)?;
    let results = par::map(frames, |f| -> Result<()> {
        let stem = file.format_stem(f.index)?;
        f.rgb.save_png(&dir.join(format!("{stem}{RGB_SUFFIX}")))?;
        f.depth.save_png(&dir.join(format!("{stem}{DEPTH_SUFFIX}")))
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: CameraIntrinsics = CameraIntrinsics { fx: 365.0, fy: 365.0, cx: 256.0, cy: 212.0 };

    fn pair(index: usize, w: usize, h: usize) -> RegisteredFramePair {
        RegisteredFramePair::new(index, RgbFrame::filled(w, h, [90, 90, 90]), DepthFrame::filled(w, h, 1200)).unwrap()
    }

    #[test]
    fn pattern_expansion() {
        assert_eq!(format_pattern("frames/frame_%06d", 7).unwrap(), "frames/frame_000007");
        assert_eq!(format_pattern("f%d", 12).unwrap(), "f12");
        assert!(format_pattern("frames/frame", 1).is_err());
        assert!(format_pattern("f%xd", 1).is_err());
        assert!(format_pattern("f%d_%d", 1).is_err());
    }

    #[test]
    fn three_frame_sequence_loads() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (1..=3).map(|i| pair(i, 16, 12)).collect();
        let k = CameraIntrinsics { fx: 20.0, fy: 20.0, cx: 8.0, cy: 6.0 };
        write_sequence(dir.path(), "s", &k, &frames).unwrap();
        let seq = load_sequence(dir.path()).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!((seq.width, seq.height), (16, 12));
        assert_eq!(seq.frame(2).unwrap(), frames[1]);
        assert!(matches!(seq.frame(0), Err(Error::FrameOutOfRange { .. })));
        assert!(matches!(seq.frame(4), Err(Error::FrameOutOfRange { .. })));
        assert_eq!(seq.load_all().unwrap(), frames);
    }

    #[test]
    fn native_resolution_accepted() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), "native", &K, &[pair(1, NATIVE_WIDTH, NATIVE_HEIGHT)]).unwrap();
        let seq = load_sequence(dir.path()).unwrap();
        assert_eq!((seq.width, seq.height), (512, 424));
    }

    #[test]
    fn registration_mismatch_rejected_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (1..=3).map(|i| pair(i, 512, 424)).collect();
        write_sequence(dir.path(), "s", &K, &frames).unwrap();
        RgbFrame::filled(640, 480, [0, 0, 0])
            .save_png(&dir.path().join("frames/frame_000002.rgb.png"))
            .unwrap();
        match load_sequence(dir.path()) {
            Err(Error::RegistrationMismatch { index: 2, rgb_width: 640, depth_width: 512, .. }) => {}
            other => panic!("expected registration mismatch, got {other:?}"),
        }
        assert!(RegisteredFramePair::new(1, RgbFrame::filled(640, 480, [0; 3]), DepthFrame::filled(512, 424, 1)).is_err());
    }

    #[test]
    fn missing_manifest_and_gaps() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::MissingManifest(_))));

        let frames: Vec<_> = (1..=3).map(|i| pair(i, 8, 8)).collect();
        let k = CameraIntrinsics { fx: 5.0, fy: 5.0, cx: 4.0, cy: 4.0 };
        write_sequence(dir.path(), "s", &k, &frames).unwrap();
        fs::remove_file(dir.path().join("frames/frame_000002.depth.png")).unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::InvalidManifest(_))));

        write_sequence(dir.path(), "s", &k, &frames).unwrap();
        frames[0].rgb.save_png(&dir.path().join("frames/frame_000005.rgb.png")).unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::InvalidManifest(_))));
    }

    #[test]
    fn intrinsics_file_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        fs::write(&path, r#"{"fx":365.0,"fy":365.0,"cx":256.0,"cy":212.0}"#).unwrap();
        assert_eq!(load_intrinsics(&path).unwrap(), K);
        fs::write(&path, r#"{"fx":0,"fy":365.0,"cx":256.0,"cy":212.0}"#).unwrap();
        assert!(matches!(load_intrinsics(&path), Err(Error::InvalidIntrinsics(_))));
        fs::write(&path, r#"{"fx":365.0,"fy":365.0,"cx":256.0}"#).unwrap();
        assert!(matches!(load_intrinsics(&path), Err(Error::Parse { .. })));

        // principal point outside a 512-wide image is caught once the size is known
        let seq_dir = dir.path().join("seq");
        let bad = CameraIntrinsics { cx: 600.0, ..K };
        write_sequence(&seq_dir, "s", &bad, &[pair(1, 512, 424)]).unwrap();
        assert!(matches!(load_sequence(&seq_dir), Err(Error::InvalidIntrinsics(_))));
    }

    #[test]
    fn manifest_round_trip_is_byte_identical() {
        let m = ManifestFile::new("drive_07", 30);
        let text = m.to_json_string();
        let parsed = ManifestFile::parse(&text, Path::new("manifest.json")).unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.to_json_string(), text);

        let compact = r#"{"num_frames":2,"id":"x","frame_pattern":"frames/frame_%06d"}"#;
        let once = ManifestFile::parse(compact, Path::new("m")).unwrap().to_json_string();
        let twice = ManifestFile::parse(&once, Path::new("m")).unwrap().to_json_string();
        assert_eq!(once, twice);
        assert!(ManifestFile::parse(r#"{"id":"x","num_frames":0}"#, Path::new("m")).is_err());
    }

    #[test]
    fn depth_png_round_trip_preserves_16_bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let d = DepthFrame::new(3, 2, vec![0, 1, 500, 65535, 4095, 1200]).unwrap();
        d.save_png(&path).unwrap();
        assert_eq!(DepthFrame::load_png(&path).unwrap(), d);
        assert_eq!(d.hole_count(), 1);
        assert_eq!(d.observed_range(), Some((1, 65535)));

        let rgb_path = dir.path().join("c.png");
        RgbFrame::filled(3, 2, [1, 2, 3]).save_png(&rgb_path).unwrap();
        assert!(matches!(DepthFrame::load_png(&rgb_path), Err(Error::Parse { .. })));
    }
}
