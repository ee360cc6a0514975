//! Handheld-object label propagation through a sequence.
//!
//! A human marks which frame-1 instance holds the object. From then on, each
//! frame's instance nearest (by 3D centroid) to the last instance known to
//! hold the object inherits the label, provided it lies within the gate.
//! Frames where nothing is close enough (the hand is occluded or missing)
//! get no label and leave the reference instance unchanged.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chromakey::FrameInstances;
use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const DEFAULT_GATE: f64 = 0.15;

/// Handheld object categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ObjectClass {
    NoObject = 0,
    Smartphone = 1,
    Tablet = 2,
    Drink = 3,
    Book = 4,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 5] =
        [ObjectClass::NoObject, ObjectClass::Smartphone, ObjectClass::Tablet, ObjectClass::Drink, ObjectClass::Book];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::NoObject => "no object",
            ObjectClass::Smartphone => "smartphone",
            ObjectClass::Tablet => "tablet",
            ObjectClass::Drink => "drink",
            ObjectClass::Book => "book",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<u8> for ObjectClass {
    type Error = String;

    fn try_from(id: u8) -> Result<Self, String> {
        Self::from_id(id).ok_or_else(|| format!("object class id must be in 0..=4, got {id}"))
    }
}

impl From<ObjectClass> for u8 {
    fn from(c: ObjectClass) -> u8 {
        c.id()
    }
}

/// The one human input: which frame-1 instance (1-based) holds which object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSelection {
    pub label: ObjectClass,
    pub instance: usize,
}

impl SeedSelection {
    pub fn new(label: ObjectClass, instance: usize) -> Result<Self> {
        if label == ObjectClass::NoObject {
            return Err(Error::InvalidSeed("seed label must be an object class (1..=4), not 0".into()));
        }
        if instance == 0 {
            return Err(Error::InvalidSeed("seed instance is 1-based".into()));
        }
        Ok(Self { label, instance })
    }
}

/// Per-frame object labels, one entry per instance, in instance order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SequenceLabels {
    pub frames: Vec<Vec<ObjectClass>>,
}

impl SequenceLabels {
    /// Index of the labeled instance in frame `i` (0-based frame position).
    pub fn labeled_instance(&self, frame: usize) -> Option<usize> {
        self.frames[frame].iter().position(|&c| c != ObjectClass::NoObject)
    }

    pub fn labeled_frame_count(&self) -> usize {
        (0..self.frames.len()).filter(|&i| self.labeled_instance(i).is_some()).count()
    }
}

/// Closest centroid to `last`; ties go to the lowest index. `None` for an
/// empty frame.
pub fn nearest_instance(centroids: &[Point3], last: Point3) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &c) in centroids.iter().enumerate() {
        let d = c.distance(last);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best
}

/// One propagation step: the instance that inherits the label, if any.
pub fn gated_nearest(centroids: &[Point3], last: Point3, gate: f64) -> Option<usize> {
    nearest_instance(centroids, last).filter(|&(_, d)| d <= gate).map(|(j, _)| j)
}

/// Propagation over bare centroids; `frames[i]` lists frame `i + 1`'s
/// instance centroids in instance order.
pub fn propagate_centroids(frames: &[Vec<Point3>], seed: SeedSelection, gate: f64) -> Result<SequenceLabels> {
    if !(gate > 0.0) {
        return Err(Error::InvalidParam(format!("gate must be > 0, got {gate}")));
    }
    let first = frames.first().ok_or(Error::EmptySequence)?;
    if seed.instance == 0 || seed.instance > first.len() {
        return Err(Error::InvalidSeed(format!(
            "seed instance {} not in 1..={} (frame 1 instance count)",
            seed.instance,
            first.len()
        )));
    }

    let mut labels = Vec::with_capacity(frames.len());
    let mut o1 = vec![ObjectClass::NoObject; first.len()];
    o1[seed.instance - 1] = seed.label;
    labels.push(o1);

    let mut last = first[seed.instance - 1];
    for centroids in &frames[1..] {
        let mut o = vec![ObjectClass::NoObject; centroids.len()];
        if let Some(j) = gated_nearest(centroids, last, gate) {
            o[j] = seed.label;
            last = centroids[j];
        }
        labels.push(o);
    }
    Ok(SequenceLabels { frames: labels })
}

/// Propagates `seed` through extracted instances.
pub fn propagate_labels(frames: &[FrameInstances], seed: SeedSelection, gate: f64) -> Result<SequenceLabels> {
    let centroids: Vec<Vec<Point3>> = frames.iter().map(FrameInstances::centroids).collect();
    propagate_centroids(&centroids, seed, gate)
}
