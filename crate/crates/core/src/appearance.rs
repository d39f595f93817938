//! Image-appearance axis: visibility, illumination and color.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    CalibrationProfile, ColorThresholds, IlluminationThresholds, MetricKey, VisibilityThresholds,
};
use crate::error::{Error, Result};
use crate::labels::{Color, Illumination, Visibility};
use crate::vision::{highfreq_energy_ratio, laplacian, sobel_gradients, GrayImage, RasterImage};

/// Raw sharpness, blur, contrast and spectral statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityRaw {
    /// Mean of `gx² + gy²` over all pixels.
    pub tenengrad: f64,
    pub laplacian_var: f64,
    /// Population standard deviation of luminance / 255.
    pub rms_contrast: f64,
    pub freq_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMetrics {
    pub raw: VisibilityRaw,
    /// Normalized components in weight order (T, V, R, F).
    pub normalized: [f64; 4],
    pub score: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn visibility_raw(img: &GrayImage, freq_cutoff: f64) -> Result<VisibilityRaw> {
    let grad = sobel_gradients(img)?;
    let tenengrad = grad
        .gx
        .iter()
        .zip(&grad.gy)
        .map(|(x, y)| x * x + y * y)
        .sum::<f64>()
        / img.len() as f64;
    let lap = laplacian(img)?;
    Ok(VisibilityRaw {
        tenengrad,
        laplacian_var: variance(&lap),
        rms_contrast: variance(img.data()).sqrt() / 255.0,
        freq_energy: highfreq_energy_ratio(img, freq_cutoff)?,
    })
}

/// Weighted visibility score from raw metrics under the profile's
/// normalization entries.
pub fn visibility_from_raw(raw: VisibilityRaw, profile: &CalibrationProfile) -> Result<VisibilityMetrics> {
    let normalized = [
        profile.norm(MetricKey::Tenengrad)?.apply(raw.tenengrad),
        profile.norm(MetricKey::LaplacianVar)?.apply(raw.laplacian_var),
        profile.norm(MetricKey::RmsContrast)?.apply(raw.rms_contrast),
        profile.norm(MetricKey::FreqEnergy)?.apply(raw.freq_energy),
    ];
    Ok(VisibilityMetrics {
        raw,
        normalized,
        score: weighted_score(&normalized, &profile.weights.visibility),
    })
}

pub fn compute_visibility(img: &GrayImage, profile: &CalibrationProfile) -> Result<VisibilityMetrics> {
    // Fail on a missing entry before doing any image work.
    for k in [
        MetricKey::Tenengrad,
        MetricKey::LaplacianVar,
        MetricKey::RmsContrast,
        MetricKey::FreqEnergy,
    ] {
        profile.norm(k)?;
    }
    let raw = visibility_raw(img, profile.operators.freq_cutoff)?;
    visibility_from_raw(raw, profile)
}

pub(crate) fn weighted_score(components: &[f64], weights: &[f64]) -> f64 {
    components
        .iter()
        .zip(weights)
        .map(|(c, w)| c * w)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

pub fn classify_visibility(score: f64, t: &VisibilityThresholds) -> Visibility {
    if score < t.low {
        Visibility::Low
    } else if score > t.high {
        Visibility::High
    } else {
        Visibility::Moderate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlluminationMetrics {
    pub median_luminance: f64,
    pub overexposed_ratio: f64,
    pub underexposed_ratio: f64,
}

/// Lower median of luminance plus the fractions of pixels strictly above
/// `l_over` and strictly below `l_under`.
pub fn compute_illumination(img: &GrayImage, t: &IlluminationThresholds) -> IlluminationMetrics {
    let mut sorted = img.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let over = sorted.iter().filter(|v| **v > t.l_over).count() as f64;
    let under = sorted.iter().filter(|v| **v < t.l_under).count() as f64;
    IlluminationMetrics {
        median_luminance: sorted[(sorted.len() - 1) / 2],
        overexposed_ratio: over / n,
        underexposed_ratio: under / n,
    }
}

/// Median-luminance rule; exposure ratios only break ties inside the
/// medium band.
pub fn classify_illumination(m: &IlluminationMetrics, t: &IlluminationThresholds) -> Illumination {
    if m.median_luminance < t.dark {
        Illumination::Dark
    } else if m.median_luminance > t.bright {
        Illumination::Bright
    } else if m.underexposed_ratio > t.extreme_under {
        Illumination::Dark
    } else if m.overexposed_ratio > t.extreme_over {
        Illumination::Bright
    } else {
        Illumination::Medium
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorMetrics {
    pub mean_r: f64,
    pub mean_g: f64,
    pub mean_b: f64,
    pub distortion: f64,
    /// `+inf` when the green mean is zero and blue is not; 1 when both are zero.
    pub blue_green_ratio: f64,
}

impl ColorMetrics {
    /// Builds the derived quantities from channel means on a unit scale.
    pub fn from_means(mean_r: f64, mean_g: f64, mean_b: f64) -> Self {
        let distortion = ((mean_r - mean_g).powi(2) + (mean_r - mean_b).powi(2) + (mean_g - mean_b).powi(2)).sqrt();
        let blue_green_ratio = if mean_g > 0.0 {
            mean_b / mean_g
        } else if mean_b > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        Self {
            mean_r,
            mean_g,
            mean_b,
            distortion,
            blue_green_ratio,
        }
    }
}

pub fn compute_color(img: &RasterImage) -> Result<ColorMetrics> {
    if img.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "color metrics need 3 channels, got {}",
            img.channels()
        )));
    }
    let mut sums = [0u64; 3];
    for px in img.data().chunks_exact(3) {
        for c in 0..3 {
            sums[c] += px[c] as u64;
        }
    }
    let n = (img.width() * img.height()) as f64 * 255.0;
    Ok(ColorMetrics::from_means(
        sums[0] as f64 / n,
        sums[1] as f64 / n,
        sums[2] as f64 / n,
    ))
}

pub fn classify_color(m: &ColorMetrics, t: &ColorThresholds) -> Color {
    if m.distortion > t.distortion && m.blue_green_ratio > t.blue_bgr {
        Color::Blue
    } else if m.distortion > t.distortion && m.blue_green_ratio < t.green_bgr {
        Color::Green
    } else {
        Color::Natural
    }
}
