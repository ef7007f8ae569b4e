#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;

use gatebench::model::{BBox, Detection, GroundTruthBox, ImageRecord};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Scene {
    pub dataset: Vec<ImageRecord>,
    pub predictions: BTreeMap<u64, Vec<Detection>>,
}

/// Small random scene: up to 10 images, 5 boxes each, 3 classes.
///
/// Predictions mix exact copies, jittered copies, wrong-class copies and
/// background boxes. Scores are drawn on a coarse grid so ties occur.
pub fn random_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = rng.random_range(1..=10u64);
    let mut dataset = Vec::new();
    let mut predictions = BTreeMap::new();
    for i in 0..images {
        let id = 1000 + i * 7;
        let (w, h) = (rng.random_range(50..=200u32), rng.random_range(50..=200u32));
        let (wf, hf) = (f64::from(w), f64::from(h));
        let n = rng.random_range(0..=5);
        let mut gts = Vec::new();
        for _ in 0..n {
            let bw = rng.random_range(4.0..wf * 0.6);
            let bh = rng.random_range(4.0..hf * 0.6);
            gts.push(GroundTruthBox {
                bbox: BBox::new(rng.random_range(0.0..wf - bw), rng.random_range(0.0..hf - bh), bw, bh).unwrap(),
                category_id: rng.random_range(0..3),
                iscrowd: rng.random_bool(0.1),
            });
        }
        let mut dets = Vec::new();
        for g in &gts {
            for _ in 0..rng.random_range(0..=2) {
                let b = g.bbox;
                let bbox = match rng.random_range(0..3) {
                    0 => b,
                    _ => {
                        let s = rng.random_range(0.0..0.4) * b.w().min(b.h());
                        BBox::new(
                            b.x() + rng.random_range(-s..=s),
                            b.y() + rng.random_range(-s..=s),
                            (b.w() + rng.random_range(-s..=s)).max(1.0),
                            (b.h() + rng.random_range(-s..=s)).max(1.0),
                        )
                        .unwrap()
                    }
                };
                let class = if rng.random_bool(0.15) { rng.random_range(0..3) } else { g.category_id };
                dets.push(Detection::new(bbox, f64::from(rng.random_range(0..=20u32)) / 20.0, class).unwrap());
            }
        }
        for _ in 0..rng.random_range(0..=3) {
            let bw = rng.random_range(2.0..wf * 0.5);
            let bh = rng.random_range(2.0..hf * 0.5);
            let bbox = BBox::new(rng.random_range(0.0..wf - bw), rng.random_range(0.0..hf - bh), bw, bh).unwrap();
            dets.push(Detection::new(bbox, rng.random_range(0.0..1.0), rng.random_range(0..3)).unwrap());
        }
        dataset.push(ImageRecord::new(id, w, h, gts).unwrap());
        if !dets.is_empty() || rng.random_bool(0.5) {
            predictions.insert(id, dets);
        }
    }
    Scene { dataset, predictions }
}
