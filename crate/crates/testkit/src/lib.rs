//! Test support: naive reference implementations and synthetic corpora.

pub mod invariants;
pub mod oracle;
pub mod synth;
pub mod thresholds;

use domainscope_core::eval::EvalImage;
use domainscope_core::{BoundingBox, Detection, GrayImage};
use rand::Rng;

/// Random integer-valued luminance image; integer pixels keep convolution
/// sums exact in any order.
pub fn random_gray(rng: &mut impl Rng, width: usize, height: usize) -> GrayImage {
    GrayImage::from_fn(width, height, |_, _| rng.gen_range(0..=255) as f64).expect("valid image")
}

pub fn to_grid(img: &GrayImage) -> oracle::Grid {
    (0..img.height())
        .map(|y| (0..img.width()).map(|x| img.get(x, y)).collect())
        .collect()
}

/// Small random detection problem: up to `max_images` images, each with up
/// to `max_gts` ground-truth boxes and `max_dets` detections over
/// `classes` classes (ids from 1). Detections are mostly jittered copies of
/// ground truth so that matches, misses and duplicates all occur; confidences
/// come from a coarse grid so ties are common.
pub fn random_eval_images(
    rng: &mut impl Rng,
    max_images: usize,
    max_dets: usize,
    max_gts: usize,
    classes: u64,
) -> Vec<EvalImage> {
    let n = rng.gen_range(1..=max_images);
    (0..n as u64)
        .map(|image_id| {
            let gts: Vec<BoundingBox> = (0..rng.gen_range(0..=max_gts))
                .map(|_| {
                    BoundingBox::new(
                        rng.gen_range(0.0..80.0),
                        rng.gen_range(0.0..80.0),
                        rng.gen_range(5.0..30.0),
                        rng.gen_range(5.0..30.0),
                        rng.gen_range(1..=classes),
                    )
                })
                .collect();
            let dets = (0..rng.gen_range(0..=max_dets))
                .map(|_| {
                    let bbox = if !gts.is_empty() && rng.gen_bool(0.7) {
                        let g = gts[rng.gen_range(0..gts.len())];
                        let j = |rng: &mut dyn rand::RngCore, v: f64| v + rng.gen_range(-3.0..3.0);
                        let category_id = if rng.gen_bool(0.85) { g.category_id } else { rng.gen_range(1..=classes) };
                        BoundingBox::new(j(rng, g.x), j(rng, g.y), j(rng, g.w).max(1.0), j(rng, g.h).max(1.0), category_id)
                    } else {
                        BoundingBox::new(
                            rng.gen_range(0.0..80.0),
                            rng.gen_range(0.0..80.0),
                            rng.gen_range(5.0..30.0),
                            rng.gen_range(5.0..30.0),
                            rng.gen_range(1..=classes),
                        )
                    };
                    Detection {
                        bbox,
                        confidence: rng.gen_range(1..=10) as f64 / 10.0,
                    }
                })
                .collect();
            EvalImage { image_id, gts, dets }
        })
        .collect()
}

/// `(confidence, is_true_positive)` of every detection of `class` under
/// the reference matcher, plus the class's ground-truth count.
pub fn reference_scored(images: &[EvalImage], class: u64, iou: f64) -> (Vec<(f64, bool)>, usize) {
    let mut scored = Vec::new();
    let mut n_gt = 0;
    for img in images {
        let flags = oracle::match_flags(&img.gts, &img.dets, iou);
        n_gt += img.gts.iter().filter(|g| g.category_id == class).count();
        for (d, tp) in img.dets.iter().zip(flags) {
            if d.bbox.category_id == class {
                scored.push((d.confidence, tp));
            }
        }
    }
    (scored, n_gt)
}
