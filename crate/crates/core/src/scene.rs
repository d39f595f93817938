//! Scene-composition axis: layout, object scale and background complexity.
//! Layout and scale use only ground-truth boxes; background statistics are
//! restricted to pixels outside every box.

use serde::{Deserialize, Serialize};

use crate::appearance::weighted_score;
use crate::calibration::{
    BackgroundThresholds, CalibrationProfile, LayoutThresholds, MetricKey, OperatorParams,
    ScaleThresholds,
};
use crate::error::{Error, Result};
use crate::labels::{reason, Background, Layout, Scale};
use crate::vision::{canny_edges_with, fast_keypoints, laplacian, GrayImage, PixelMask};

/// Axis-aligned box in pixel coordinates (`x, y` is the top-left corner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub category_id: u64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, category_id: u64) -> Self {
        Self {
            x,
            y,
            w,
            h,
            category_id,
        }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Clips the box to `[0, width] × [0, height]`. `None` if nothing is left.
    pub fn clamped(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        (x1 > x0 && y1 > y0).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0, self.category_id))
    }

    /// Whether the centre of pixel `(px, py)` lies inside the box.
    pub fn covers_pixel(&self, px: usize, py: usize) -> bool {
        let cx = px as f64 + 0.5;
        let cy = py as f64 + 0.5;
        cx >= self.x && cx < self.right() && cy >= self.y && cy < self.bottom()
    }
}

/// Exact area of the union of boxes, by sweeping x-slabs and merging the
/// y-intervals active in each.
pub fn union_area(boxes: &[BoundingBox]) -> f64 {
    let mut xs: Vec<f64> = boxes
        .iter()
        .filter(|b| b.area() > 0.0)
        .flat_map(|b| [b.x, b.right()])
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut total = 0.0;
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for slab in xs.windows(2) {
        let (x0, x1) = (slab[0], slab[1]);
        spans.clear();
        spans.extend(
            boxes
                .iter()
                .filter(|b| b.area() > 0.0 && b.x <= x0 && b.right() >= x1)
                .map(|b| (b.y, b.bottom())),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(s, e) in &spans[1..] {
            if s > hi {
                covered += hi - lo;
                lo = s;
                hi = e;
            } else {
                hi = hi.max(e);
            }
        }
        covered += hi - lo;
        total += covered * (x1 - x0);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutMetrics {
    pub object_count: usize,
    pub coverage: f64,
    pub overlap: f64,
}

/// Object count, union coverage and pairwise overlap. Each unordered pair
/// of boxes contributes its intersection once.
pub fn compute_layout(boxes: &[BoundingBox], image_area: f64) -> LayoutMetrics {
    assert!(image_area > 0.0, "image area must be positive");
    let total: f64 = boxes.iter().map(BoundingBox::area).sum();
    let mut pairwise = 0.0;
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            pairwise += a.intersection_area(b);
        }
    }
    LayoutMetrics {
        object_count: boxes.len(),
        coverage: (union_area(boxes) / image_area).clamp(0.0, 1.0),
        overlap: if boxes.len() > 1 && total > 0.0 {
            pairwise / total
        } else {
            0.0
        },
    }
}

/// Crowded is tested first; an empty image satisfies the sparse rule.
pub fn classify_layout(m: &LayoutMetrics, t: &LayoutThresholds) -> Layout {
    if m.object_count >= t.crowded_min_count
        || m.coverage > t.crowded_coverage
        || m.overlap > t.crowded_overlap
    {
        Layout::Crowded
    } else if m.object_count <= t.sparse_max_count
        && m.coverage < t.sparse_coverage
        && m.overlap < t.sparse_overlap
    {
        Layout::Sparse
    } else {
        Layout::Moderate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMetrics {
    pub mean_norm_area: f64,
    pub small_ratio: f64,
    pub large_ratio: f64,
}

/// `None` when there are no boxes.
pub fn compute_scale(boxes: &[BoundingBox], image_area: f64, t: &ScaleThresholds) -> Option<ScaleMetrics> {
    assert!(image_area > 0.0, "image area must be positive");
    if boxes.is_empty() {
        return None;
    }
    let n = boxes.len() as f64;
    let areas: Vec<f64> = boxes.iter().map(|b| b.area() / image_area).collect();
    Some(ScaleMetrics {
        mean_norm_area: areas.iter().sum::<f64>() / n,
        small_ratio: areas.iter().filter(|a| **a < t.small_area).count() as f64 / n,
        large_ratio: areas.iter().filter(|a| **a > t.large_area).count() as f64 / n,
    })
}

/// When both the small and the large rule fire, the side with the larger
/// object ratio wins and a tie is medium.
pub fn classify_scale(m: &ScaleMetrics, t: &ScaleThresholds) -> Scale {
    let small = m.small_ratio >= t.dominant_ratio || m.mean_norm_area < t.small_area;
    let large = m.large_ratio >= t.dominant_ratio || m.mean_norm_area > t.large_area;
    match (small, large) {
        (true, false) => Scale::Small,
        (false, true) => Scale::Large,
        (false, false) => Scale::Medium,
        (true, true) => {
            if m.small_ratio > m.large_ratio {
                Scale::Small
            } else if m.large_ratio > m.small_ratio {
                Scale::Large
            } else {
                Scale::Medium
            }
        }
    }
}

/// True for every pixel whose centre lies outside all boxes.
pub fn background_mask(boxes: &[BoundingBox], width: usize, height: usize) -> PixelMask {
    let mut mask = PixelMask::filled(width, height, true);
    for b in boxes {
        let x0 = (b.x - 0.5).ceil().max(0.0) as usize;
        let y0 = (b.y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((b.right() - 0.5).ceil().max(0.0) as usize).min(width);
        let y1 = ((b.bottom() - 0.5).ceil().max(0.0) as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                mask.set(x, y, false);
            }
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRaw {
    /// FAST keypoints per megapixel of background.
    pub keypoint_density: f64,
    /// Canny edge pixels / background pixels.
    pub edge_density: f64,
    /// Mean absolute Laplacian over background pixels.
    pub laplacian_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundMetrics {
    pub raw: BackgroundRaw,
    /// Normalized components in weight order (K, E, M).
    pub normalized: [f64; 3],
    pub score: f64,
}

pub fn background_raw(
    img: &GrayImage,
    mask: &PixelMask,
    ops: &OperatorParams,
    min_fraction: f64,
) -> Result<BackgroundRaw> {
    if !mask.matches(img.width(), img.height()) {
        return Err(Error::InvalidInput(format!(
            "mask is {}×{}, image is {}×{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    let n = mask.count();
    let fraction = n as f64 / img.len() as f64;
    if n == 0 || fraction < min_fraction {
        return Err(Error::Excluded {
            reason: reason::BACKGROUND_TOO_SMALL,
            detail: format!("background covers {:.2}% of the image", fraction * 100.0),
        });
    }
    let keypoints = fast_keypoints(img, ops.fast_threshold)?
        .into_iter()
        .filter(|k| mask.get(k.x, k.y))
        .count();
    let edges = canny_edges_with(img, &ops.canny())?;
    let edge_count = edges
        .bits()
        .iter()
        .zip(mask.bits())
        .filter(|(e, m)| **e && **m)
        .count();
    let lap = laplacian(img)?;
    let lap_sum: f64 = lap
        .iter()
        .zip(mask.bits())
        .filter(|(_, m)| **m)
        .map(|(v, _)| v.abs())
        .sum();
    Ok(BackgroundRaw {
        keypoint_density: keypoints as f64 / (n as f64 / 1e6),
        edge_density: edge_count as f64 / n as f64,
        laplacian_mean: lap_sum / n as f64,
    })
}

pub fn background_from_raw(raw: BackgroundRaw, profile: &CalibrationProfile) -> Result<BackgroundMetrics> {
    let normalized = [
        profile.norm(MetricKey::KeypointDensity)?.apply(raw.keypoint_density),
        profile.norm(MetricKey::EdgeDensity)?.apply(raw.edge_density),
        profile.norm(MetricKey::LaplacianMean)?.apply(raw.laplacian_mean),
    ];
    Ok(BackgroundMetrics {
        raw,
        normalized,
        score: weighted_score(&normalized, &profile.weights.background),
    })
}

/// Background complexity on masked pixels. Fails with
/// [`Error::Excluded`] when the background is under the profile's minimum
/// fraction of the image.
pub fn compute_background(img: &GrayImage, mask: &PixelMask, profile: &CalibrationProfile) -> Result<BackgroundMetrics> {
    for k in [
        MetricKey::KeypointDensity,
        MetricKey::EdgeDensity,
        MetricKey::LaplacianMean,
    ] {
        profile.norm(k)?;
    }
    let raw = background_raw(
        img,
        mask,
        &profile.operators,
        profile.background.min_background_fraction,
    )?;
    background_from_raw(raw, profile)
}

pub fn classify_background(score: f64, t: &BackgroundThresholds) -> Background {
    if score < t.simple {
        Background::Simple
    } else if score > t.complex {
        Background::Complex
    } else {
        Background::Textured
    }
}
