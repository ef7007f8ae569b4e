//! Box arithmetic: IoU, class-aware greedy NMS, horizontal flip and flip-TTA merge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub iou_threshold: f64,
    pub score_threshold: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.70,
            score_threshold: 0.001,
        }
    }
}

impl NmsConfig {
    pub fn new(iou_threshold: f64, score_threshold: f64) -> Result<Self> {
        for v in [iou_threshold, score_threshold] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidThreshold(v));
            }
        }
        Ok(Self {
            iou_threshold,
            score_threshold,
        })
    }

    /// Drops detections below the score threshold, keeping input order.
    pub fn filter_scores(&self, dets: &[Detection]) -> Vec<Detection> {
        dets.iter()
            .filter(|d| d.score() >= self.score_threshold)
            .copied()
            .collect()
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let iw = (a.right().min(b.right()) - a.x().max(b.x())).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y().max(b.y())).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Sorts by score, highest first. Ties keep input order.
pub fn sort_by_score(dets: &mut [Detection]) {
    dets.sort_by(|a, b| b.score().total_cmp(&a.score()));
}

/// Greedy, class-aware non-maximum suppression.
///
/// Output is sorted by score descending. A candidate is dropped when it
/// overlaps an already kept box of the same class with IoU above the
/// configured threshold.
pub fn nms(dets: &[Detection], cfg: &NmsConfig) -> Vec<Detection> {
    let mut candidates = cfg.filter_scores(dets);
    sort_by_score(&mut candidates);

    let mut kept: Vec<Detection> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let suppressed = kept
            .iter()
            .any(|k| k.category_id == cand.category_id && iou(&k.bbox, &cand.bbox) > cfg.iou_threshold);
        if !suppressed {
            kept.push(cand);
        }
    }
    kept
}

/// Mirrors a box across the vertical center line of an image `image_width` wide.
///
/// Boxes sticking out horizontally are clamped to the image first.
pub fn hflip_box(b: &BBox, image_width: f64) -> BBox {
    let b = if b.x() < 0.0 || b.right() > image_width {
        b.clamp_to(image_width, f64::INFINITY).unwrap_or(*b)
    } else {
        *b
    };
    let x = (image_width - b.w()) - b.x();
    BBox::new(x, b.y(), b.w(), b.h()).expect("flip preserves size")
}

pub fn hflip_detection(d: &Detection, image_width: f64) -> Detection {
    Detection {
        bbox: hflip_box(&d.bbox, image_width),
        ..*d
    }
}

/// Un-flips `flipped`, pools it with `base` and suppresses duplicates.
///
/// On equal scores the base detection wins.
pub fn tta_merge(base: &[Detection], flipped: &[Detection], image_width: f64, cfg: &NmsConfig) -> Vec<Detection> {
    let pooled: Vec<Detection> = base
        .iter()
        .copied()
        .chain(flipped.iter().map(|d| hflip_detection(d, image_width)))
        .collect();
    nms(&pooled, cfg)
}
