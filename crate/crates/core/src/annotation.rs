//! COCO-compatible annotation and results files.
//!
//! Masks are stored as uncompressed RLE: run lengths over the column-major
//! flattening of the image, alternating background and foreground and
//! always starting with a (possibly zero) background run.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chromakey::FrameInstances;
use crate::error::{Error, Result};
use crate::eval::{GtInstance, PredInstance};
use crate::geometry::{expand_roi, Point3};
use crate::mask::{Pixel, PixelSet};
use crate::propagate::{ObjectClass, SequenceLabels};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    /// `[height, width]`
    pub size: [usize; 2],
    pub counts: Vec<u64>,
}

impl Rle {
    pub fn height(&self) -> usize {
        self.size[0]
    }

    pub fn width(&self) -> usize {
        self.size[1]
    }

    pub fn encode(pixels: &PixelSet, width: usize, height: usize) -> Result<Self> {
        if !pixels.within(width, height) {
            return Err(Error::Annotation(format!("mask exceeds {width}x{height} image")));
        }
        let mut flat: Vec<u64> =
            pixels.iter().map(|p| p.col as u64 * height as u64 + p.row as u64).collect();
        flat.sort_unstable();

        let mut counts = Vec::new();
        let mut pos = 0u64;
        let mut i = 0;
        while i < flat.len() {
            let start = flat[i];
            let mut end = start + 1;
            i += 1;
            while i < flat.len() && flat[i] == end {
                end += 1;
                i += 1;
            }
            counts.push(start - pos);
            counts.push(end - start);
            pos = end;
        }
        let total = (width * height) as u64;
        if pos < total || counts.is_empty() {
            counts.push(total - pos);
        }
        Ok(Self { size: [height, width], counts })
    }

    pub fn decode(&self) -> Result<PixelSet> {
        let (h, w) = (self.height() as u64, self.width() as u64);
        let total: u64 = self.counts.iter().sum();
        if total != h * w {
            return Err(Error::Annotation(format!("RLE counts sum to {total}, expected {}", h * w)));
        }
        let mut pixels = Vec::new();
        let mut pos = 0u64;
        for (i, &run) in self.counts.iter().enumerate() {
            if i % 2 == 1 {
                pixels.extend((pos..pos + run).map(|f| Pixel::new((f % h) as u32, (f / h) as u32)));
            }
            pos += run;
        }
        Ok(PixelSet::from_pixels(pixels))
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u8,
    pub segmentation: Rle,
    pub area: u64,
    /// `[x, y, w, h]`
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Camera-frame centroid in meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<[f64; 3]>,
    /// Expanded box fed to the object classifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox_plus: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: u8,
    pub name: String,
}

pub fn categories() -> Vec<CategoryRecord> {
    ObjectClass::ALL.iter().map(|c| CategoryRecord { id: c.id(), name: c.name().to_string() }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub categories: Vec<CategoryRecord>,
}

/// One entry of a COCO results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub image_id: u64,
    pub category_id: u8,
    pub score: f64,
    pub segmentation: Rle,
}

impl AnnotationFile {
    /// Builds a file from labeled frames. Frame `i` becomes image id `i`.
    /// Without `labels` every instance gets category 0.
    pub fn from_frames(
        frames: &[FrameInstances],
        labels: Option<&SequenceLabels>,
        width: usize,
        height: usize,
        file_name: impl Fn(usize) -> String,
        roi_alpha: f64,
    ) -> Result<Self> {
        let mut images = Vec::with_capacity(frames.len());
        let mut annotations = Vec::new();
        for (fi, frame) in frames.iter().enumerate() {
            images.push(ImageRecord { id: frame.index as u64, file_name: file_name(frame.index), width, height });
            for (ii, inst) in frame.instances.iter().enumerate() {
                let category = labels.map_or(ObjectClass::NoObject, |l| l.frames[fi][ii]);
                annotations.push(AnnotationRecord {
                    id: annotations.len() as u64 + 1,
                    image_id: frame.index as u64,
                    category_id: category.id(),
                    segmentation: Rle::encode(&inst.pixels, width, height)?,
                    area: inst.area() as u64,
                    bbox: inst.bbox.to_array(),
                    score: None,
                    centroid: Some(inst.centroid.to_array()),
                    bbox_plus: Some(expand_roi(inst.bbox, roi_alpha).to_array()),
                });
            }
        }
        let file = Self { images, annotations, categories: categories() };
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        let mut image_ids = HashSet::new();
        for img in &self.images {
            if !image_ids.insert(img.id) {
                return Err(Error::Annotation(format!("duplicate image id {}", img.id)));
            }
        }
        let sizes: BTreeMap<u64, (usize, usize)> = self.images.iter().map(|i| (i.id, (i.height, i.width))).collect();
        let mut ann_ids = HashSet::new();
        for a in &self.annotations {
            if !ann_ids.insert(a.id) {
                return Err(Error::Annotation(format!("duplicate annotation id {}", a.id)));
            }
            let Some(&(h, w)) = sizes.get(&a.image_id) else {
                return Err(Error::Annotation(format!("annotation {} references unknown image {}", a.id, a.image_id)));
            };
            if ObjectClass::from_id(a.category_id).is_none() {
                return Err(Error::Annotation(format!("annotation {} has category {} outside 0..=4", a.id, a.category_id)));
            }
            if a.segmentation.size != [h, w] {
                return Err(Error::Annotation(format!("annotation {} RLE size does not match its image", a.id)));
            }
            if let Some(s) = a.score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::Annotation(format!("annotation {} score {s} outside [0, 1]", a.id)));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("annotation file serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// Annotations grouped by image, in image order, each group in file
    /// order (which is the instance numbering used for seeding).
    pub fn by_image(&self) -> Vec<(&ImageRecord, Vec<&AnnotationRecord>)> {
        let mut groups: BTreeMap<u64, Vec<&AnnotationRecord>> = BTreeMap::new();
        for a in &self.annotations {
            groups.entry(a.image_id).or_default().push(a);
        }
        self.images.iter().map(|img| (img, groups.remove(&img.id).unwrap_or_default())).collect()
    }

    /// Stored centroids per image, for label propagation.
    pub fn centroids_by_image(&self) -> Result<Vec<Vec<Point3>>> {
        self.by_image()
            .into_iter()
            .map(|(_, anns)| {
                anns.iter()
                    .map(|a| {
                        a.centroid
                            .map(Point3::from)
                            .ok_or_else(|| Error::Annotation(format!("annotation {} has no centroid", a.id)))
                    })
                    .collect()
            })
            .collect()
    }

    /// Writes propagated labels into `category_id`, in [`Self::by_image`] order.
    pub fn apply_labels(&mut self, labels: &SequenceLabels) -> Result<()> {
        let mut order: Vec<(usize, usize)> = Vec::new();
        {
            let index: BTreeMap<u64, usize> = self.images.iter().enumerate().map(|(i, img)| (img.id, i)).collect();
            let mut seen = vec![0usize; self.images.len()];
            for a in &self.annotations {
                let fi = index[&a.image_id];
                order.push((fi, seen[fi]));
                seen[fi] += 1;
            }
            if labels.frames.len() != self.images.len()
                || labels.frames.iter().zip(&seen).any(|(f, &n)| f.len() != n)
            {
                return Err(Error::Annotation("labels do not match the annotation layout".into()));
            }
        }
        for (a, (fi, ii)) in self.annotations.iter_mut().zip(order) {
            a.category_id = labels.frames[fi][ii].id();
        }
        Ok(())
    }

    pub fn to_gt_instances(&self) -> Result<Vec<GtInstance>> {
        self.annotations
            .iter()
            .map(|a| {
                Ok(GtInstance {
                    image_id: a.image_id,
                    mask: a.segmentation.decode()?,
                    category: ObjectClass::from_id(a.category_id).expect("validated"),
                })
            })
            .collect()
    }

    /// Predictions from an annotation file; missing scores count as 1.0.
    pub fn to_predictions(&self) -> Result<Vec<PredInstance>> {
        self.annotations
            .iter()
            .map(|a| {
                Ok(PredInstance {
                    image_id: a.image_id,
                    mask: a.segmentation.decode()?,
                    category: ObjectClass::from_id(a.category_id).expect("validated"),
                    score: a.score.unwrap_or(1.0),
                })
            })
            .collect()
    }

    pub fn to_results(&self) -> Vec<ResultRecord> {
        self.annotations
            .iter()
            .map(|a| ResultRecord {
                image_id: a.image_id,
                category_id: a.category_id,
                score: a.score.unwrap_or(1.0),
                segmentation: a.segmentation.clone(),
            })
            .collect()
    }
}

pub fn results_to_predictions(records: &[ResultRecord]) -> Result<Vec<PredInstance>> {
    records
        .iter()
        .map(|r| {
            let category = ObjectClass::from_id(r.category_id)
                .ok_or_else(|| Error::Annotation(format!("result category {} outside 0..=4", r.category_id)))?;
            Ok(PredInstance { image_id: r.image_id, mask: r.segmentation.decode()?, category, score: r.score })
        })
        .collect()
}

pub fn load_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Loads predictions from either a results array or a full annotation file.
pub fn load_predictions(path: &Path) -> Result<Vec<PredInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if value.is_array() {
        let records: Vec<ResultRecord> =
            serde_json::from_value(value).map_err(|e| Error::parse(path, e.to_string()))?;
        results_to_predictions(&records)
    } else {
        let file: AnnotationFile = serde_json::from_value(value).map_err(|e| Error::parse(path, e.to_string()))?;
        file.validate()?;
        file.to_predictions()
    }
}
