//! Simple/complex scene categorisation and balanced subset sampling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ImageRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Complexity {
    Simple,
    Complex,
}

/// Object count and clutter knobs for [`categorize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub simple_max_objects: usize,
    /// Minimum median box area, as a fraction of the image, for a simple scene.
    pub clutter_area_frac: f64,
}

impl Default for CategoryRule {
    fn default() -> Self {
        Self {
            simple_max_objects: 3,
            clutter_area_frac: 0.05,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Simple when there are few objects and they are not small; images without
/// ground truth count as simple.
pub fn categorize(record: &ImageRecord, rule: &CategoryRule) -> Complexity {
    let gts = &record.ground_truth;
    if gts.is_empty() {
        return Complexity::Simple;
    }
    let image_area = f64::from(record.width) * f64::from(record.height);
    let median_frac = median(gts.iter().map(|g| g.bbox.area() / image_area).collect());
    if gts.len() <= rule.simple_max_objects && median_frac >= rule.clutter_area_frac {
        Complexity::Simple
    } else {
        Complexity::Complex
    }
}

/// Samples `per_class` simple and `per_class` complex images without replacement.
///
/// Returns the simple ids followed by the complex ids, each ascending.
pub fn balanced_subset(dataset: &[ImageRecord], per_class: usize, rng_seed: u64, rule: &CategoryRule) -> Result<Vec<u64>> {
    let (simple, complex): (Vec<&ImageRecord>, Vec<&ImageRecord>) = dataset
        .iter()
        .partition(|r| categorize(r, rule) == Complexity::Simple);
    if simple.len() < per_class || complex.len() < per_class {
        return Err(Error::InsufficientCategory {
            required: per_class,
            simple: simple.len(),
            complex: complex.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for group in [simple, complex] {
        let mut ids: Vec<u64> = index::sample(&mut rng, group.len(), per_class)
            .into_iter()
            .map(|i| group[i].image_id)
            .collect();
        ids.sort_unstable();
        out.extend(ids);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, GroundTruthBox};

    fn record(id: u64, boxes: &[(f64, f64, f64, f64)]) -> ImageRecord {
        let gts = boxes
            .iter()
            .map(|&(x, y, w, h)| GroundTruthBox {
                bbox: BBox::new(x, y, w, h).unwrap(),
                category_id: 0,
                iscrowd: false,
            })
            .collect();
        ImageRecord::new(id, 100, 100, gts).unwrap()
    }

    #[test]
    fn examples() {
        let rule = CategoryRule::default();
        assert_eq!(categorize(&record(1, &[(20.0, 20.0, 60.0, 60.0)]), &rule), Complexity::Simple);
        let many: Vec<_> = (0..12).map(|i| (i as f64 * 8.0, 0.0, 5.0, 5.0)).collect();
        assert_eq!(categorize(&record(2, &many), &rule), Complexity::Complex);
        // 10x10 on 100x100 is 1% each
        let two = [(0.0, 0.0, 10.0, 10.0), (50.0, 50.0, 10.0, 10.0)];
        assert_eq!(categorize(&record(3, &two), &rule), Complexity::Complex);
        assert_eq!(categorize(&record(4, &[]), &rule), Complexity::Simple);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    fn mixed(n: u64) -> Vec<ImageRecord> {
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    record(i, &[(0.0, 0.0, 50.0, 50.0)])
                } else {
                    record(i, &[(0.0, 0.0, 2.0, 2.0)])
                }
            })
            .collect()
    }

    #[test]
    fn balanced_composition() {
        let ds = mixed(5000);
        let rule = CategoryRule::default();
        let ids = balanced_subset(&ds, 1250, 123, &rule).unwrap();
        assert_eq!(ids.len(), 2500);
        let simple = ids.iter().filter(|&&id| categorize(&ds[id as usize], &rule) == Complexity::Simple).count();
        assert_eq!(simple, 1250);
        assert_eq!(balanced_subset(&ds, 1250, 123, &rule).unwrap(), ids);
        let mut uniq = ids.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 2500);
    }

    #[test]
    fn degenerate_requests() {
        let rule = CategoryRule::default();
        assert!(balanced_subset(&mixed(10), 0, 1, &rule).unwrap().is_empty());
        let all_simple: Vec<_> = (0..10).map(|i| record(i, &[])).collect();
        assert!(matches!(
            balanced_subset(&all_simple, 1, 1, &rule),
            Err(Error::InsufficientCategory { simple: 10, complex: 0, .. })
        ));
    }
}
