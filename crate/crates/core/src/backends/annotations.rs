//! COCO instances annotation files (the subset needed for box evaluation).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{BBox, GroundTruthBox, ImageRecord};

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    #[serde(default)]
    bbox: Option<Vec<f64>>,
    category_id: u32,
    #[serde(default)]
    iscrowd: CrowdFlag,
}

#[derive(Deserialize, Default)]
#[serde(untagged)]
enum CrowdFlag {
    #[default]
    Absent,
    Int(u8),
    Bool(bool),
}

impl CrowdFlag {
    fn is_set(&self) -> bool {
        match self {
            CrowdFlag::Absent => false,
            CrowdFlag::Int(v) => *v != 0,
            CrowdFlag::Bool(b) => *b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotations {
    pub records: Vec<ImageRecord>,
    /// Annotations dropped for a missing or empty box.
    pub skipped: usize,
}

pub fn parse_annotations(path: impl AsRef<Path>) -> Result<Annotations> {
    parse_annotations_str(&std::fs::read_to_string(path)?)
}

pub fn parse_annotations_str(text: &str) -> Result<Annotations> {
    let file: CocoFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("annotation file: {e}"),
    })?;

    let mut records = Vec::with_capacity(file.images.len());
    let mut index = HashMap::with_capacity(file.images.len());
    for img in &file.images {
        if index.insert(img.id, records.len()).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate image id {} in annotations", img.id)));
        }
        records.push(ImageRecord::new(img.id, img.width, img.height, Vec::new())?);
    }

    let mut skipped = 0;
    for ann in file.annotations {
        let &slot = index.get(&ann.image_id).ok_or(Error::UnknownAnnotationImage(ann.image_id))?;
        let record = &mut records[slot];
        let bbox = match ann.bbox.as_deref() {
            Some(&[x, y, w, h]) => BBox::new(x, y, w, h)
                .ok()
                .and_then(|b| b.clamp_to(f64::from(record.width), f64::from(record.height))),
            _ => None,
        };
        match bbox {
            Some(bbox) => record.ground_truth.push(GroundTruthBox {
                bbox,
                category_id: ann.category_id,
                iscrowd: ann.iscrowd.is_set(),
            }),
            None => skipped += 1,
        }
    }
    Ok(Annotations { records, skipped })
}

/// Writes records as a COCO instances file.
pub fn emit_annotations(records: &[ImageRecord]) -> String {
    let images: Vec<_> = records
        .iter()
        .map(|r| json!({"id": r.image_id, "width": r.width, "height": r.height}))
        .collect();
    let mut annotations = Vec::new();
    let mut categories = BTreeSet::new();
    for r in records {
        for g in &r.ground_truth {
            categories.insert(g.category_id);
            annotations.push(json!({
                "id": annotations.len() + 1,
                "image_id": r.image_id,
                "bbox": [g.bbox.x(), g.bbox.y(), g.bbox.w(), g.bbox.h()],
                "area": g.bbox.area(),
                "category_id": g.category_id,
                "iscrowd": u8::from(g.iscrowd),
            }));
        }
    }
    let categories: Vec<_> = categories
        .into_iter()
        .map(|c| json!({"id": c, "name": format!("class_{c}")}))
        .collect();
    let doc = json!({"images": images, "annotations": annotations, "categories": categories});
    let mut out = serde_json::to_string(&doc).expect("json values always serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "info": {"description": "ignored"},
        "images": [{"id": 7, "width": 640, "height": 480, "file_name": "a.jpg"}],
        "annotations": [{"id": 1, "image_id": 7, "bbox": [10, 20, 30, 40], "category_id": 3, "iscrowd": 0, "segmentation": []}]
    }"#;

    #[test]
    fn minimal_file() {
        let a = parse_annotations_str(MINIMAL).unwrap();
        assert_eq!(a.records.len(), 1);
        assert_eq!(a.skipped, 0);
        let g = a.records[0].ground_truth[0];
        assert_eq!((g.bbox.x(), g.bbox.h(), g.category_id, g.iscrowd), (10.0, 40.0, 3, false));
    }

    #[test]
    fn zero_width_box_is_skipped() {
        let text = r#"{"images":[{"id":1,"width":10,"height":10}],
            "annotations":[{"image_id":1,"bbox":[1,1,0,3],"category_id":1},
                           {"image_id":1,"category_id":1},
                           {"image_id":1,"bbox":[1,1,2,2],"category_id":1,"iscrowd":true}]}"#;
        let a = parse_annotations_str(text).unwrap();
        assert_eq!(a.skipped, 2);
        assert_eq!(a.records[0].ground_truth.len(), 1);
        assert!(a.records[0].ground_truth[0].iscrowd);
    }

    #[test]
    fn boxes_are_clamped() {
        let text = r#"{"images":[{"id":1,"width":10,"height":10}],
            "annotations":[{"image_id":1,"bbox":[-2,5,6,9],"category_id":1}]}"#;
        let g = parse_annotations_str(text).unwrap().records[0].ground_truth[0];
        assert_eq!((g.bbox.x(), g.bbox.y(), g.bbox.w(), g.bbox.h()), (0.0, 5.0, 4.0, 5.0));
    }

    #[test]
    fn errors() {
        let err = parse_annotations_str("{\"images\": [\n{\"id\": }]}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let text = r#"{"images":[],"annotations":[{"image_id":5,"bbox":[0,0,1,1],"category_id":1}]}"#;
        assert!(matches!(parse_annotations_str(text), Err(Error::UnknownAnnotationImage(5))));
    }

    #[test]
    fn emit_round_trip() {
        let a = parse_annotations_str(MINIMAL).unwrap();
        let again = parse_annotations_str(&emit_annotations(&a.records)).unwrap();
        assert_eq!(again, a);
    }
}
