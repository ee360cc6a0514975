//! Pixel sets and binary masks.

use serde::{Deserialize, Serialize};

/// Integer pixel position. Ordering is row-major (row first, then column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: u32,
    pub col: u32,
}

impl Pixel {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

/// A duplicate-free set of pixels kept sorted in row-major order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PixelSet(Vec<Pixel>);

impl PixelSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Builds a set from pixels in any order; duplicates are dropped.
    pub fn from_pixels(mut pixels: Vec<Pixel>) -> Self {
        pixels.sort_unstable();
        pixels.dedup();
        Self(pixels)
    }

    /// Wraps pixels that are already sorted and unique (e.g. produced by a
    /// raster scan). Checked in debug builds.
    pub fn from_sorted(pixels: Vec<Pixel>) -> Self {
        debug_assert!(pixels.windows(2).all(|w| w[0] < w[1]));
        Self(pixels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pixel> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Pixel] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Pixel> {
        self.0
    }

    /// Top-left-most pixel in raster order.
    pub fn first(&self) -> Option<Pixel> {
        self.0.first().copied()
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn intersection_len(&self, other: &PixelSet) -> usize {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union(&self, other: &PixelSet) -> PixelSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        PixelSet(out)
    }

    pub fn is_disjoint(&self, other: &PixelSet) -> bool {
        self.intersection_len(other) == 0
    }

    /// True when every pixel lies inside a `width`x`height` image.
    pub fn within(&self, width: usize, height: usize) -> bool {
        self.0.iter().all(|p| (p.col as usize) < width && (p.row as usize) < height)
    }
}

impl<'a> IntoIterator for &'a PixelSet {
    type Item = &'a Pixel;
    type IntoIter = std::slice::Iter<'a, Pixel>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl FromIterator<Pixel> for PixelSet {
    fn from_iter<I: IntoIterator<Item = Pixel>>(iter: I) -> Self {
        PixelSet::from_pixels(iter.into_iter().collect())
    }
}

/// Dense row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height, "mask buffer size");
        Self { width, height, data }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: &PixelSet) -> Self {
        let mut m = Self::new(width, height);
        for p in pixels {
            m.set(p.row as usize, p.col as usize, true);
        }
        m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Set pixels in raster order.
    pub fn to_pixel_set(&self) -> PixelSet {
        let mut out = Vec::new();
        for (i, &b) in self.data.iter().enumerate() {
            if b {
                out.push(Pixel::new((i / self.width) as u32, (i % self.width) as u32));
            }
        }
        PixelSet::from_sorted(out)
    }
}
