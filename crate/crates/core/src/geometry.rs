//! Acquisition-geometry axis from a precomputed relative depth map, plus a
//! vertical brightness gradient used as a fallback cue for open water.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    percentile, CalibrationProfile, GeometryParams, OrientationThresholds, PerspectiveThresholds,
};
use crate::error::{Error, Result};
use crate::labels::{reason, Orientation, Perspective};
use crate::vision::{GrayImage, PixelMask};

/// Per-pixel relative depth, row-major. Invalid pixels are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Option<Vec<bool>>,
}

impl DepthMap {
    /// Non-finite values are marked invalid.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "depth map of {} values does not match {width}×{height}",
                values.len()
            )));
        }
        let valid = values
            .iter()
            .any(|v| !v.is_finite())
            .then(|| values.iter().map(|v| v.is_finite()).collect());
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid.as_ref().is_none_or(|v| v[i])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    /// Bilinear resampling with corner alignment: the four corner samples of
    /// the source land exactly on the corners of the target.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("cannot resize depth map to zero size".into()));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let map = |dst: usize, dst_n: usize, src_n: usize| -> (usize, usize, f64) {
            if dst_n == 1 || src_n == 1 {
                return (0, 0, 0.0);
            }
            let s = dst as f64 * (src_n - 1) as f64 / (dst_n - 1) as f64;
            let i0 = (s.floor() as usize).min(src_n - 1);
            let i1 = (i0 + 1).min(src_n - 1);
            (i0, i1, s - i0 as f64)
        };
        let mut values = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for y in 0..height {
            let (y0, y1, fy) = map(y, height, self.height);
            for x in 0..width {
                let (x0, x1, fx) = map(x, width, self.width);
                let idx = [
                    y0 * self.width + x0,
                    y0 * self.width + x1,
                    y1 * self.width + x0,
                    y1 * self.width + x1,
                ];
                let ok = idx.iter().all(|i| self.is_valid(*i));
                let [a, b, c, d] = idx.map(|i| self.values[i]);
                let top = a + (b - a) * fx;
                let bottom = c + (d - c) * fx;
                values.push(if ok { top + (bottom - top) * fy } else { f64::NAN });
                valid.push(ok);
            }
        }
        Ok(Self {
            width,
            height,
            values,
            valid: valid.iter().any(|v| !v).then_some(valid),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryMetrics {
    pub delta_lr: f64,
    pub delta_tb: f64,
    pub depth_range: f64,
    /// Mean luminance of the top band minus the bottom band.
    pub brightness_gradient: f64,
}

/// Which band a coordinate falls in along one axis. The near band covers
/// pixel centres below `n * fraction`, the far band centres above
/// `n * (1 - fraction)`. The two bands mirror each other exactly.
fn band(i: usize, n: usize, fraction: f64) -> Option<bool> {
    let c = i as f64 + 0.5;
    if c < n as f64 * fraction {
        Some(false)
    } else if c > n as f64 * (1.0 - fraction) {
        Some(true)
    } else {
        None
    }
}

/// Top-band minus bottom-band mean luminance over all pixels.
pub fn brightness_gradient(img: &GrayImage, split_fraction: f64) -> f64 {
    let (mut top, mut nt, mut bottom, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..img.height() {
        let Some(far) = band(y, img.height(), split_fraction) else { continue };
        let row: f64 = (0..img.width()).map(|x| img.get(x, y)).sum();
        if far {
            bottom += row;
            nb += img.width();
        } else {
            top += row;
            nt += img.width();
        }
    }
    if nt == 0 || nb == 0 {
        return 0.0;
    }
    top / nt as f64 - bottom / nb as f64
}

/// Depth differences across background halves, trimmed depth range and the
/// brightness fallback.
///
/// Fails with [`Error::Excluded`] when any half-region holds fewer than
/// `min_region_pixels` valid background pixels.
pub fn compute_geometry(
    depth: &DepthMap,
    img: &GrayImage,
    bg_mask: &PixelMask,
    params: &GeometryParams,
) -> Result<GeometryMetrics> {
    let (w, h) = (img.width(), img.height());
    if depth.width != w || depth.height != h || !bg_mask.matches(w, h) {
        return Err(Error::InvalidInput(format!(
            "depth {}×{} / mask {}×{} do not match image {w}×{h}",
            depth.width,
            depth.height,
            bg_mask.width(),
            bg_mask.height()
        )));
    }
    let f = params.split_fraction;
    // Sums and counts for left, right, top, bottom.
    let mut sum = [0.0f64; 4];
    let mut cnt = [0usize; 4];
    let mut all = Vec::new();
    for y in 0..h {
        let vband = band(y, h, f);
        for x in 0..w {
            let i = y * w + x;
            if !bg_mask.get(x, y) || !depth.is_valid(i) {
                continue;
            }
            let d = depth.values[i];
            all.push(d);
            if let Some(right) = band(x, w, f) {
                let k = right as usize;
                sum[k] += d;
                cnt[k] += 1;
            }
            if let Some(bottom) = vband {
                let k = 2 + bottom as usize;
                sum[k] += d;
                cnt[k] += 1;
            }
        }
    }
    let min = params.min_region_pixels.max(1);
    if let Some(k) = cnt.iter().position(|c| *c < min) {
        let name = ["left", "right", "top", "bottom"][k];
        return Err(Error::Excluded {
            reason: reason::REGION_UNDERPOPULATED,
            detail: format!("{name} region has {} valid background pixels, need {min}", cnt[k]),
        });
    }
    let mean = |k: usize| sum[k] / cnt[k] as f64;
    all.sort_by(f64::total_cmp);
    let depth_range = if params.trim_depth_range {
        percentile(&all, params.trim_hi) - percentile(&all, params.trim_lo)
    } else {
        all[all.len() - 1] - all[0]
    };
    Ok(GeometryMetrics {
        delta_lr: (mean(0) - mean(1)).abs(),
        delta_tb: (mean(2) - mean(3)).abs(),
        depth_range: depth_range.max(0.0),
        brightness_gradient: brightness_gradient(img, f),
    })
}

/// Convenience wrapper reading the geometry parameters from a profile.
pub fn compute_geometry_with_profile(
    depth: &DepthMap,
    img: &GrayImage,
    bg_mask: &PixelMask,
    profile: &CalibrationProfile,
) -> Result<GeometryMetrics> {
    compute_geometry(depth, img, bg_mask, &profile.geometry)
}

pub fn classify_orientation(m: &GeometryMetrics, t: &OrientationThresholds) -> Orientation {
    if m.delta_lr < t.upright {
        Orientation::Upright
    } else if m.delta_lr > t.rotated {
        Orientation::Rotated
    } else {
        Orientation::SlightlyTilted
    }
}

/// Front is tested first, including the signed brightness fallback.
pub fn classify_perspective(m: &GeometryMetrics, t: &PerspectiveThresholds) -> Perspective {
    if m.delta_tb > t.front_delta_tb || m.depth_range > t.front_range || m.brightness_gradient > t.front_brightness {
        Perspective::Front
    } else if m.delta_tb < t.nadir_delta_tb && m.depth_range < t.nadir_range {
        Perspective::Nadir
    } else {
        Perspective::Oblique
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GeometryParams {
        CalibrationProfile::identity().geometry
    }

    fn full(w: usize, h: usize) -> PixelMask {
        PixelMask::filled(w, h, true)
    }

    #[test]
    fn constant_depth() {
        let d = DepthMap::from_fn(40, 40, |_, _| 2.0).unwrap();
        let img = GrayImage::filled(40, 40, 50.0).unwrap();
        let g = compute_geometry(&d, &img, &full(40, 40), &params()).unwrap();
        assert_eq!((g.delta_lr, g.delta_tb, g.depth_range), (0.0, 0.0, 0.0));
    }

    #[test]
    fn horizontal_ramp() {
        // Closed form: pixel-centre samples of 6x/w average to 1.5 and 4.5.
        let w = 40;
        let d = DepthMap::from_fn(w, 40, |x, _| 6.0 * (x as f64 + 0.5) / w as f64).unwrap();
        let img = GrayImage::filled(w, 40, 50.0).unwrap();
        let g = compute_geometry(&d, &img, &full(w, 40), &params()).unwrap();
        assert!((g.delta_lr - 3.0).abs() < 1e-12);
        assert!(g.delta_tb.abs() < 1e-12);
    }

    #[test]
    fn brightness_top_minus_bottom() {
        let img = GrayImage::from_fn(20, 20, |_, y| if y < 10 { 200.0 } else { 100.0 }).unwrap();
        assert_eq!(brightness_gradient(&img, 0.5), 100.0);
    }

    #[test]
    fn odd_width_excludes_centre_column() {
        let d = DepthMap::from_fn(21, 20, |x, _| if x == 10 { 100.0 } else { 1.0 }).unwrap();
        let img = GrayImage::filled(21, 20, 0.0).unwrap();
        let mut p = params();
        p.trim_depth_range = true;
        let g = compute_geometry(&d, &img, &full(21, 20), &p).unwrap();
        assert_eq!(g.delta_lr, 0.0);
    }

    #[test]
    fn underpopulated_region() {
        let d = DepthMap::from_fn(20, 20, |_, _| 1.0).unwrap();
        let img = GrayImage::filled(20, 20, 0.0).unwrap();
        // Each half has 200 pixels; drop most of the left one.
        let mut mask = full(20, 20);
        for y in 0..20 {
            for x in 0..9 {
                mask.set(x, y, false);
            }
        }
        match compute_geometry(&d, &img, &mask, &params()) {
            Err(Error::Excluded { reason, .. }) => assert_eq!(reason, reason::REGION_UNDERPOPULATED),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_depth_pixels_are_skipped() {
        let d = DepthMap::from_fn(20, 20, |x, _| if x == 0 { f64::NAN } else { 3.0 }).unwrap();
        let img = GrayImage::filled(20, 20, 0.0).unwrap();
        let g = compute_geometry(&d, &img, &full(20, 20), &params()).unwrap();
        assert_eq!(g.depth_range, 0.0);
    }

    #[test]
    fn trimming_ignores_outliers() {
        let d = DepthMap::from_fn(20, 20, |x, y| if (x, y) == (3, 3) { 1000.0 } else { 1.0 }).unwrap();
        let img = GrayImage::filled(20, 20, 0.0).unwrap();
        let mut p = params();
        let g = compute_geometry(&d, &img, &full(20, 20), &p).unwrap();
        assert_eq!(g.depth_range, 0.0);
        p.trim_depth_range = false;
        let g = compute_geometry(&d, &img, &full(20, 20), &p).unwrap();
        assert_eq!(g.depth_range, 999.0);
    }

    #[test]
    fn orientation_classes() {
        let t = CalibrationProfile::identity().orientation;
        let m = |d| GeometryMetrics {
            delta_lr: d,
            delta_tb: 0.0,
            depth_range: 0.0,
            brightness_gradient: 0.0,
        };
        assert_eq!(classify_orientation(&m(0.0), &t), Orientation::Upright);
        assert_eq!(classify_orientation(&m(1.8), &t), Orientation::SlightlyTilted);
        assert_eq!(classify_orientation(&m(3.0), &t), Orientation::Rotated);
    }

    #[test]
    fn perspective_classes() {
        let t = CalibrationProfile::identity().perspective;
        let m = |tb, r, g| GeometryMetrics {
            delta_lr: 0.0,
            delta_tb: tb,
            depth_range: r,
            brightness_gradient: g,
        };
        assert_eq!(classify_perspective(&m(0.0, 0.0, 0.0), &t), Perspective::Nadir);
        assert_eq!(classify_perspective(&m(1.0, 1.0, 60.0), &t), Perspective::Front);
        assert_eq!(classify_perspective(&m(3.0, 4.0, 0.0), &t), Perspective::Oblique);
        // A darker top is not a front cue.
        assert_eq!(classify_perspective(&m(0.0, 0.0, -80.0), &t), Perspective::Nadir);
    }

    #[test]
    fn bilinear_upsample_keeps_corners() {
        let d = DepthMap::from_fn(4, 4, |x, y| (x + 4 * y) as f64).unwrap();
        let r = d.resized(8, 8).unwrap();
        assert_eq!(r.get(0, 0), 0.0);
        assert_eq!(r.get(7, 0), 3.0);
        assert_eq!(r.get(0, 7), 12.0);
        assert_eq!(r.get(7, 7), 15.0);
        // Linear input stays linear: x' = 7 maps to 3, so x' = 7/3 maps to 1.
        let mid = r.get(1, 0);
        assert!((mid - 3.0 / 7.0).abs() < 1e-12);
    }
}
