//! Slow, direct reference implementations used to cross-check the
//! optimized operators and metrics.

use std::collections::BTreeMap;

use domainscope_core::scene::BoundingBox;
use domainscope_core::Detection;

/// Image as rows of luminance values.
pub type Grid = Vec<Vec<f64>>;

fn pixel_replicated(img: &Grid, x: i64, y: i64) -> f64 {
    let h = img.len() as i64;
    let w = img[0].len() as i64;
    let yy = if y < 0 { 0 } else if y >= h { h - 1 } else { y };
    let xx = if x < 0 { 0 } else if x >= w { w - 1 } else { x };
    img[yy as usize][xx as usize]
}

/// Correlation (kernel not flipped) with edge replication. The kernel is
/// visited top row first, left to right.
pub fn correlate(img: &Grid, kernel: &[Vec<f64>]) -> Grid {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![vec![0.0; img[0].len()]; img.len()];
    for (y, row) in out.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, krow) in kernel.iter().enumerate() {
                for (i, k) in krow.iter().enumerate() {
                    acc += k * pixel_replicated(img, x as i64 + i as i64 - r, y as i64 + j as i64 - r);
                }
            }
            *cell = acc;
        }
    }
    out
}

pub fn sobel(img: &Grid) -> (Grid, Grid) {
    let kx = vec![vec![-1.0, 0.0, 1.0], vec![-2.0, 0.0, 2.0], vec![-1.0, 0.0, 1.0]];
    let ky = vec![vec![-1.0, -2.0, -1.0], vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0]];
    (correlate(img, &kx), correlate(img, &ky))
}

pub fn laplacian(img: &Grid) -> Grid {
    let k = vec![vec![0.0, 1.0, 0.0], vec![1.0, -4.0, 1.0], vec![0.0, 1.0, 0.0]];
    correlate(img, &k)
}

pub fn gaussian_kernel(sigma: f64) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = (0..5)
        .map(|j| {
            (0..5)
                .map(|i| {
                    let (dx, dy) = (i as f64 - 2.0, j as f64 - 2.0);
                    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for row in &raw {
        for v in row {
            total += v;
        }
    }
    raw.iter().map(|row| row.iter().map(|v| v / total).collect()).collect()
}

/// Gaussian smoothing, Sobel, then non-maximum suppression along the
/// gradient direction binned by slope rather than angle.
pub fn canny_nms(img: &Grid, sigma: f64) -> Grid {
    let smoothed = correlate(img, &gaussian_kernel(sigma));
    let (gx, gy) = sobel(&smoothed);
    let h = img.len();
    let w = img[0].len();
    let mag: Grid = (0..h)
        .map(|y| (0..w).map(|x| (gx[y][x] * gx[y][x] + gy[y][x] * gy[y][x]).sqrt()).collect())
        .collect();
    let get = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            mag[y as usize][x as usize]
        }
    };
    let t22 = (22.5f64).to_radians().tan();
    let t67 = (67.5f64).to_radians().tan();
    let mut out = vec![vec![0.0; w]; h];
    for y in 0..h {
        for x in 0..w {
            let m = mag[y][x];
            if m == 0.0 {
                continue;
            }
            // Fold the direction into the upper half plane.
            let (mut a, mut b) = (gx[y][x], gy[y][x]);
            if b < 0.0 || (b == 0.0 && a < 0.0) {
                a = -a;
                b = -b;
            }
            let (dx, dy) = if (a > 0.0 && b < t22 * a) || (a < 0.0 && b <= t22 * -a) {
                (1, 0)
            } else if b < t67 * a {
                (1, 1)
            } else if a < 0.0 && b <= t67 * -a {
                (-1, 1)
            } else {
                (0, 1)
            };
            let before = get(x as i64 - dx, y as i64 - dy);
            let after = get(x as i64 + dx, y as i64 + dy);
            if m >= before && m > after {
                out[y][x] = m;
            }
        }
    }
    out
}

const CIRCLE: [(i64, i64); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// FAST-9 by trying every start position of a 9-pixel arc.
pub fn fast_score(img: &Grid, x: usize, y: usize, t: f64) -> Option<f64> {
    let c = img[y][x];
    let ring: Vec<f64> = CIRCLE
        .iter()
        .map(|(dx, dy)| img[(y as i64 + dy) as usize][(x as i64 + dx) as usize])
        .collect();
    let arc = |pred: &dyn Fn(f64) -> bool| (0..16).any(|s| (0..9).all(|k| pred(ring[(s + k) % 16])));
    let brighter = |p: f64| p > c + t;
    let darker = |p: f64| p < c - t;
    if !arc(&brighter) && !arc(&darker) {
        return None;
    }
    let up: f64 = ring.iter().filter(|p| brighter(**p)).map(|p| p - c - t).sum();
    let down: f64 = ring.iter().filter(|p| darker(**p)).map(|p| c - p - t).sum();
    Some(if up > down { up } else { down })
}

/// Corners after 3×3 suppression, as `(x, y, score)` in raster order.
pub fn fast_keypoints(img: &Grid, t: f64) -> Vec<(usize, usize, f64)> {
    let h = img.len();
    let w = img[0].len();
    let mut scores = BTreeMap::new();
    for y in 3..h.saturating_sub(3) {
        for x in 3..w.saturating_sub(3) {
            if let Some(s) = fast_score(img, x, y, t) {
                scores.insert((y, x), s);
            }
        }
    }
    let mut out = Vec::new();
    for (&(y, x), &s) in &scores {
        let beaten = (y - 1..=y + 1).any(|ny| {
            (x - 1..=x + 1).any(|nx| {
                (ny, nx) != (y, x)
                    && scores
                        .get(&(ny, nx))
                        .is_some_and(|&o| o > s || (o == s && (ny, nx) < (y, x)))
            })
        });
        if !beaten {
            out.push((x, y, s));
        }
    }
    out
}

/// Direct O(N²) DFT of the mean-subtracted image, then the share of AC
/// energy at normalized radius `>= cutoff`.
pub fn highfreq_ratio(img: &Grid, cutoff: f64) -> f64 {
    let h = img.len();
    let w = img[0].len();
    let n = (w * h) as f64;
    let mean = img.iter().flatten().sum::<f64>() / n;
    let tau = std::f64::consts::TAU;
    let (mut total, mut high) = (0.0, 0.0);
    for v in 0..h {
        for u in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for (y, row) in img.iter().enumerate() {
                for (x, p) in row.iter().enumerate() {
                    let phase = -tau * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    re += (p - mean) * phase.cos();
                    im += (p - mean) * phase.sin();
                }
            }
            let e = re * re + im * im;
            // Signed frequency in cycles per pixel, over Nyquist.
            let fu = if 2 * u <= w { u as f64 } else { w as f64 - u as f64 } / w as f64 * 2.0;
            let fv = if 2 * v <= h { v as f64 } else { h as f64 - v as f64 } / h as f64 * 2.0;
            total += e;
            if fu.hypot(fv) >= cutoff {
                high += e;
            }
        }
    }
    // Constant images leave only rounding noise.
    if total <= 1e-9 * n * n {
        0.0
    } else {
        high / total
    }
}

/// Greedy matching written out directly; returns, per detection in input
/// order, whether it is a true positive.
pub fn match_flags(gts: &[BoundingBox], dets: &[Detection], iou_thresh: f64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|a, b| {
        dets[*b]
            .confidence
            .partial_cmp(&dets[*a].confidence)
            .unwrap()
            .then(a.cmp(b))
    });
    let mut taken = vec![false; gts.len()];
    let mut tp = vec![false; dets.len()];
    for i in idx {
        let d = dets[i].bbox;
        let mut best = None;
        let mut best_iou = -1.0;
        for (j, g) in gts.iter().enumerate() {
            if taken[j] || g.category_id != d.category_id {
                continue;
            }
            let ix = (d.x + d.w).min(g.x + g.w) - d.x.max(g.x);
            let iy = (d.y + d.h).min(g.y + g.h) - d.y.max(g.y);
            let inter = if ix > 0.0 && iy > 0.0 { ix * iy } else { 0.0 };
            let union = d.w * d.h + g.w * g.h - inter;
            let v = if union > 0.0 { inter / union } else { 0.0 };
            if v >= iou_thresh && v > best_iou {
                best_iou = v;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            taken[j] = true;
            tp[i] = true;
        }
    }
    tp
}

/// Operating points at every distinct confidence threshold, then the area
/// under the running-maximum precision from the right, by brute force.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    assert!(n_gt > 0);
    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let kept: Vec<&(f64, bool)> = scored.iter().filter(|s| s.0 >= t).collect();
            let tp = kept.iter().filter(|s| s.1).count() as f64;
            (tp / n_gt as f64, tp / kept.len() as f64)
        })
        .collect();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (i, &(r, _)) in points.iter().enumerate() {
        let best = points[i..].iter().map(|p| p.1).fold(0.0, f64::max);
        area += (r - prev_recall) * best;
        prev_recall = r;
    }
    area
}

/// Lower nearest-rank percentile by counting rather than indexing: the
/// smallest value with at least `floor(q (n - 1)) + 1` values at or below it.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let need = (q * (values.len() - 1) as f64 + 1e-9).floor() as usize + 1;
    let mut candidates = values.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    *candidates
        .iter()
        .find(|c| values.iter().filter(|v| *v <= *c).count() >= need)
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_of_hand_traced_curves() {
        assert_eq!(average_precision(&[(0.9, false), (0.8, true)], 1), 0.5);
        assert_eq!(average_precision(&[(0.9, true), (0.8, true), (0.7, false)], 2), 1.0);
    }

    #[test]
    fn percentile_counts() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 50.0);
        assert_eq!(percentile(&v, 0.99), 99.0);
    }

    #[test]
    fn dft_of_cosine() {
        let img: Grid = (0..4)
            .map(|_| (0..16).map(|x| (std::f64::consts::TAU * x as f64 / 16.0).cos()).collect())
            .collect();
        assert!(highfreq_ratio(&img, 0.25) < 1e-12);
    }
}
