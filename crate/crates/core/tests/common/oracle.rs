//! Brute-force reference mAP, written straight from the protocol definition.
//!
//! Nothing here calls into the crate's geometry or evaluator code.

use std::collections::BTreeMap;

use gatebench::model::{Detection, ImageRecord};

fn overlap(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a[2] * a[3] + b[2] * b[3] - inter)
}

fn corners(d: &gatebench::model::BBox) -> [f64; 4] {
    [d.x(), d.y(), d.w(), d.h()]
}

#[derive(Clone, Copy, PartialEq)]
enum Outcome {
    Hit,
    Miss,
    Skip,
}

/// Labels for one image at one threshold, indexed like `dets`.
fn label_image(dets: &[Detection], record: &ImageRecord, t: f64) -> Vec<Outcome> {
    let mut visit: Vec<usize> = (0..dets.len()).collect();
    // insertion sort by score, descending, equal scores keep input order
    for i in 1..visit.len() {
        let mut j = i;
        while j > 0 && dets[visit[j - 1]].score() < dets[visit[j]].score() {
            visit.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut taken = vec![false; record.ground_truth.len()];
    let mut out = vec![Outcome::Miss; dets.len()];
    for &p in &visit {
        let d = &dets[p];
        let candidates: Vec<(usize, f64)> = record
            .ground_truth
            .iter()
            .enumerate()
            .filter(|(g, gt)| !gt.iscrowd && !taken[*g] && gt.category_id == d.category_id)
            .map(|(g, gt)| {
                let v = if corners(&gt.bbox) == corners(&d.bbox) { 1.0 } else { overlap(corners(&gt.bbox), corners(&d.bbox)) };
                (g, v)
            })
            .filter(|&(_, v)| v >= t)
            .collect();
        let top = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        if let Some(&(g, _)) = candidates.iter().find(|c| c.1 == top) {
            taken[g] = true;
            out[p] = Outcome::Hit;
            continue;
        }
        let near_crowd = record.ground_truth.iter().any(|gt| {
            gt.iscrowd && gt.category_id == d.category_id && {
                let v = if corners(&gt.bbox) == corners(&d.bbox) { 1.0 } else { overlap(corners(&gt.bbox), corners(&d.bbox)) };
                v >= t
            }
        });
        if near_crowd {
            out[p] = Outcome::Skip;
        }
    }
    out
}

/// Interpolated AP straight from the definition: for each recall level, the
/// best precision among all ranked prefixes whose recall reaches it.
fn interpolated_ap(ranked: &[Outcome], positives: usize, levels: usize) -> f64 {
    let mut curve = Vec::new();
    let (mut hits, mut misses) = (0usize, 0usize);
    for &o in ranked {
        match o {
            Outcome::Hit => hits += 1,
            Outcome::Miss => misses += 1,
            Outcome::Skip => continue,
        }
        curve.push((hits as f64 / positives as f64, hits as f64 / (hits + misses) as f64));
    }
    let mut sum = 0.0;
    for k in 0..levels {
        let r = k as f64 / (levels - 1) as f64;
        let best = curve
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|(_, prec)| *prec)
            .fold(0.0, f64::max);
        sum += best;
    }
    sum / levels as f64
}

pub struct OracleResult {
    pub map_50_95: f64,
    pub map_50: f64,
}

pub fn reference_map(
    predictions: &BTreeMap<u64, Vec<Detection>>,
    dataset: &[ImageRecord],
    thresholds: &[f64],
    levels: usize,
    max_dets: usize,
) -> OracleResult {
    let mut classes: BTreeMap<u32, usize> = BTreeMap::new();
    for r in dataset {
        for g in r.ground_truth.iter().filter(|g| !g.iscrowd) {
            *classes.entry(g.category_id).or_insert(0) += 1;
        }
    }

    // Keep each image's top `max_dets` by score; ties keep input order.
    let mut kept: Vec<(u64, Vec<(usize, Detection)>)> = Vec::new();
    for (&id, dets) in predictions {
        let mut idx: Vec<usize> = (0..dets.len()).collect();
        idx.sort_by(|&a, &b| dets[b].score().partial_cmp(&dets[a].score()).unwrap().then(a.cmp(&b)));
        idx.truncate(max_dets);
        idx.sort_unstable();
        kept.push((id, idx.into_iter().map(|i| (i, dets[i])).collect()));
    }

    let ap_at = |t: f64| -> BTreeMap<u32, f64> {
        // (score, image id, input index, class, outcome)
        let mut all: Vec<(f64, u64, usize, u32, Outcome)> = Vec::new();
        for (id, items) in &kept {
            let record = dataset.iter().find(|r| r.image_id == *id).expect("known image");
            let dets: Vec<Detection> = items.iter().map(|x| x.1).collect();
            let labels = label_image(&dets, record, t);
            for ((orig, d), o) in items.iter().zip(labels) {
                all.push((d.score(), *id, *orig, d.category_id, o));
            }
        }
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        classes
            .iter()
            .map(|(&c, &n)| {
                let ranked: Vec<Outcome> = all.iter().filter(|e| e.3 == c).map(|e| e.4).collect();
                (c, interpolated_ap(&ranked, n, levels))
            })
            .collect()
    };

    let mut flat = Vec::new();
    for &t in thresholds {
        flat.extend(ap_at(t).into_values());
    }
    let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let at50: Vec<f64> = ap_at(0.5).into_values().collect();
    OracleResult {
        map_50_95: avg(&flat),
        map_50: avg(&at50),
    }
}
