//! Low-level image operators: grayscale conversion, 3×3 derivative filters,
//! Canny edges, FAST-9 corners and a radial spectral energy ratio.
//!
//! All convolutions are correlations with edge-replicate padding. Operators
//! are pure and allocate their outputs, so they can run on many images in
//! parallel without coordination.

use std::collections::VecDeque;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Interleaved 8-bit raster as decoded from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("raster has zero size".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "raster buffer holds {} bytes, expected {width}×{height}×{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an RGB raster from a per-pixel closure.
    pub fn from_rgb_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Single-channel luminance image with values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("gray image has zero size".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "gray buffer holds {} values, expected {width}×{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "luminance {v} outside [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Horizontal and vertical Sobel responses of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    pub fn magnitude(&self) -> Vec<f64> {
        self.gx
            .iter()
            .zip(&self.gy)
            .map(|(x, y)| (x * x + y * y).sqrt())
            .collect()
    }
}

/// One boolean per pixel, row-major. `true` marks an included pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "mask holds {} bits, expected {width}×{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn matches(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// ITU-R BT.601 luma. Integer weights keep white at exactly 255.
pub fn to_grayscale(img: &RasterImage) -> Result<GrayImage> {
    if img.channels != 3 {
        return Err(Error::InvalidInput(format!(
            "grayscale conversion needs 3 channels, got {}",
            img.channels
        )));
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32) as f64 / 1000.0)
        .collect();
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        data,
    })
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
const LAPLACE: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];

fn require_min_size(width: usize, height: usize, min: usize, what: &str) -> Result<()> {
    if width < min || height < min {
        return Err(Error::InvalidInput(format!(
            "{what} needs at least {min}×{min} pixels, got {width}×{height}"
        )));
    }
    Ok(())
}

fn correlate<const K: usize>(width: usize, height: usize, src: &[f64], kernel: &[[f64; K]; K]) -> Vec<f64> {
    let r = (K / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (ky, row) in kernel.iter().enumerate() {
                let sy = clamp(y as isize + ky as isize - r, height);
                for (kx, w) in row.iter().enumerate() {
                    let sx = clamp(x as isize + kx as isize - r, width);
                    acc += w * src[sy * width + sx];
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

pub fn sobel_gradients(img: &GrayImage) -> Result<GradientField> {
    require_min_size(img.width, img.height, 3, "Sobel filter")?;
    Ok(sobel_raw(img.width, img.height, &img.data))
}

fn sobel_raw(width: usize, height: usize, src: &[f64]) -> GradientField {
    GradientField {
        width,
        height,
        gx: correlate(width, height, src, &SOBEL_X),
        gy: correlate(width, height, src, &SOBEL_Y),
    }
}

/// 4-neighbour Laplacian response, row-major.
pub fn laplacian(img: &GrayImage) -> Result<Vec<f64>> {
    require_min_size(img.width, img.height, 3, "Laplacian filter")?;
    Ok(correlate(img.width, img.height, &img.data, &LAPLACE))
}

/// Normalized 5×5 Gaussian kernel.
pub fn gaussian_kernel_5x5(sigma: f64) -> [[f64; 5]; 5] {
    let mut k = [[0.0; 5]; 5];
    let mut sum = 0.0;
    for (j, row) in k.iter_mut().enumerate() {
        for (i, w) in row.iter_mut().enumerate() {
            let dx = i as f64 - 2.0;
            let dy = j as f64 - 2.0;
            *w = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            sum += *w;
        }
    }
    for w in k.iter_mut().flatten() {
        *w /= sum;
    }
    k
}

pub fn gaussian_blur_5x5(img: &GrayImage, sigma: f64) -> Vec<f64> {
    correlate(img.width, img.height, &img.data, &gaussian_kernel_5x5(sigma))
}

/// Sobel gradients of the Gaussian-smoothed image: the first stage of Canny.
pub fn canny_gradients(img: &GrayImage, sigma: f64) -> Result<GradientField> {
    require_min_size(img.width, img.height, 3, "Canny")?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("Gaussian sigma must be positive, got {sigma}")));
    }
    let smoothed = gaussian_blur_5x5(img, sigma);
    Ok(sobel_raw(img.width, img.height, &smoothed))
}

/// Suppresses every gradient magnitude that is not a local maximum along the
/// gradient direction quantized to 0°, 45°, 90° or 135°.
///
/// A pixel survives when it is `>=` its neighbour against the gradient and
/// strictly `>` its neighbour along it, so a plateau two pixels wide keeps
/// exactly one pixel. Neighbours outside the image count as zero.
pub fn non_max_suppression(grad: &GradientField) -> Vec<f64> {
    let (w, h) = (grad.width, grad.height);
    let mag = grad.magnitude();
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let (dx, dy) = quantized_direction(grad.gx[i], grad.gy[i]);
            let (xi, yi) = (x as isize, y as isize);
            let before = at(xi - dx, yi - dy);
            let after = at(xi + dx, yi + dy);
            if m >= before && m > after {
                out[i] = m;
            }
        }
    }
    out
}

fn quantized_direction(gx: f64, gy: f64) -> (isize, isize) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if angle >= 180.0 {
        angle -= 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 50.0,
            high: 150.0,
        }
    }
}

/// Canny edges with the default σ = 1.4 smoothing.
pub fn canny_edges(img: &GrayImage, low_thresh: f64, high_thresh: f64) -> Result<PixelMask> {
    canny_edges_with(
        img,
        &CannyParams {
            low: low_thresh,
            high: high_thresh,
            ..CannyParams::default()
        },
    )
}

pub fn canny_edges_with(img: &GrayImage, params: &CannyParams) -> Result<PixelMask> {
    if !(params.low > 0.0 && params.low < params.high) {
        return Err(Error::InvalidInput(format!(
            "Canny thresholds must satisfy 0 < low < high, got {} / {}",
            params.low, params.high
        )));
    }
    let grad = canny_gradients(img, params.sigma)?;
    let nms = non_max_suppression(&grad);
    Ok(hysteresis(img.width, img.height, &nms, params.low, params.high))
}

fn hysteresis(width: usize, height: usize, nms: &[f64], low: f64, high: f64) -> PixelMask {
    let mut mask = PixelMask::filled(width, height, false);
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, &m) in nms.iter().enumerate() {
        if m >= high {
            mask.bits[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if !mask.bits[j] && nms[j] >= low {
                    mask.bits[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    mask
}

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
pub const FAST_CIRCLE: [(isize, isize); 16] = [
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

const FAST_ARC: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// FAST-9 segment test at `(x, y)`. Returns the corner score (sum of absolute
/// differences beyond the threshold on the winning side) when the pixel is a
/// corner. The pixel must lie at least 3 pixels from every border.
pub fn fast_score(img: &GrayImage, x: usize, y: usize, thresh: f64) -> Option<f64> {
    let c = img.get(x, y);
    let mut bright = [false; 16];
    let mut dark = [false; 16];
    let mut circle = [0.0; 16];
    for (k, (dx, dy)) in FAST_CIRCLE.iter().enumerate() {
        let p = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
        circle[k] = p;
        bright[k] = p > c + thresh;
        dark[k] = p < c - thresh;
    }
    let is_bright = has_arc(&bright);
    let is_dark = has_arc(&dark);
    if !is_bright && !is_dark {
        return None;
    }
    let mut sum_bright = 0.0;
    let mut sum_dark = 0.0;
    for k in 0..16 {
        if bright[k] {
            sum_bright += circle[k] - c - thresh;
        }
        if dark[k] {
            sum_dark += c - circle[k] - thresh;
        }
    }
    Some(sum_bright.max(sum_dark))
}

fn has_arc(flags: &[bool; 16]) -> bool {
    let mut run = 0;
    for k in 0..16 + FAST_ARC - 1 {
        if flags[k % 16] {
            run += 1;
            if run >= FAST_ARC {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// FAST-9 corners followed by 3×3 non-maximum suppression on the score.
///
/// A corner is dropped when a neighbouring corner has a higher score, or an
/// equal score and an earlier raster position. Output is in raster order.
pub fn fast_keypoints(img: &GrayImage, intensity_thresh: f64) -> Result<Vec<Keypoint>> {
    require_min_size(img.width, img.height, 7, "FAST")?;
    let (w, h) = (img.width, img.height);
    let mut scores: Vec<Option<f64>> = vec![None; w * h];
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            scores[y * w + x] = fast_score(img, x, y, intensity_thresh);
        }
    }
    let mut out = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let i = y * w + x;
            let Some(s) = scores[i] else { continue };
            let mut keep = true;
            'nbr: for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    let j = ny * w + nx;
                    if j == i {
                        continue;
                    }
                    if let Some(t) = scores[j] {
                        if t > s || (t == s && j < i) {
                            keep = false;
                            break 'nbr;
                        }
                    }
                }
            }
            if keep {
                out.push(Keypoint { x, y, score: s });
            }
        }
    }
    Ok(out)
}

/// Fraction of AC spectral energy at normalized radial frequency `>= cutoff`.
///
/// Frequencies are expressed in cycles per pixel divided by the Nyquist
/// frequency (0.5), so the axis Nyquist bins sit at radius 1 and the
/// diagonal corner at √2. The DC bin is excluded and the image is
/// mean-subtracted first. A constant image yields 0.
pub fn highfreq_energy_ratio(img: &GrayImage, cutoff: f64) -> Result<f64> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidInput(format!(
            "frequency cutoff must lie in (0, 1), got {cutoff}"
        )));
    }
    let power = power_spectrum(img);
    let (w, h) = (img.width, img.height);
    let mut total = 0.0;
    let mut high = 0.0;
    for v in 0..h {
        let fy = v.min(h - v) as f64 / h as f64 / 0.5;
        for u in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let fx = u.min(w - u) as f64 / w as f64 / 0.5;
            let e = power[v * w + u];
            total += e;
            if (fx * fx + fy * fy).sqrt() >= cutoff {
                high += e;
            }
        }
    }
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok((high / total).clamp(0.0, 1.0))
}

/// `|X(u, v)|²` of the mean-subtracted image, row-major over `(v, u)`.
pub fn power_spectrum(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let mean = img.data.iter().sum::<f64>() / img.data.len() as f64;
    let mut buf: Vec<Complex<f64>> = img.data.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for u in 0..w {
        for v in 0..h {
            column[v] = buf[v * w + u];
        }
        col_fft.process(&mut column);
        for v in 0..h {
            buf[v * w + u] = column[v];
        }
    }
    buf.iter().map(|c| c.norm_sqr()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> GrayImage {
        GrayImage::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn grayscale_luma_weights() {
        let white = RasterImage::from_rgb_fn(2, 2, |_, _| [255, 255, 255]);
        assert!(to_grayscale(&white).unwrap().data().iter().all(|v| *v == 255.0));
        let red = RasterImage::from_rgb_fn(2, 2, |_, _| [255, 0, 0]);
        assert!(to_grayscale(&red).unwrap().data().iter().all(|v| (*v - 76.245).abs() < 1e-12));
        let blue = RasterImage::from_rgb_fn(2, 2, |_, _| [0, 0, 255]);
        assert!(to_grayscale(&blue).unwrap().data().iter().all(|v| (*v - 29.07).abs() < 1e-12));
    }

    #[test]
    fn grayscale_rejects_wrong_channels() {
        let rgba = RasterImage::new(1, 1, 4, vec![0; 4]).unwrap();
        assert!(matches!(to_grayscale(&rgba), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gray_image_rejects_out_of_range() {
        assert!(GrayImage::new(1, 1, vec![256.0]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn sobel_constant_is_zero() {
        let g = sobel_gradients(&GrayImage::filled(6, 5, 77.0).unwrap()).unwrap();
        assert!(g.gx.iter().chain(&g.gy).all(|v| *v == 0.0));
    }

    #[test]
    fn sobel_vertical_step() {
        let img = gray(8, 8, |x, _| if x < 4 { 0.0 } else { 255.0 });
        let g = sobel_gradients(&img).unwrap();
        let max = g.gx.iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1020.0);
        assert_eq!(g.gx[3 * 8 + 3], 1020.0);
        assert_eq!(g.gx[3 * 8 + 4], 1020.0);
        assert_eq!(g.gx[3 * 8 + 1], 0.0);
    }

    #[test]
    fn sobel_ramp_interior() {
        let img = gray(5, 5, |x, _| x as f64);
        let g = sobel_gradients(&img).unwrap();
        for y in 1..4 {
            for x in 1..4 {
                assert_eq!(g.gx[y * 5 + x], 8.0);
            }
        }
        assert!(g.gy.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn small_images_rejected() {
        let tiny = GrayImage::filled(2, 5, 0.0).unwrap();
        assert!(sobel_gradients(&tiny).is_err());
        assert!(laplacian(&tiny).is_err());
        assert!(fast_keypoints(&GrayImage::filled(6, 9, 0.0).unwrap(), 20.0).is_err());
    }

    #[test]
    fn laplacian_impulse() {
        let img = gray(5, 5, |x, y| if x == 2 && y == 2 { 255.0 } else { 0.0 });
        let l = laplacian(&img).unwrap();
        assert_eq!(l[2 * 5 + 2], -1020.0);
        for (x, y) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert_eq!(l[y * 5 + x], 255.0);
        }
        assert_eq!(l[0], 0.0);
    }

    #[test]
    fn laplacian_of_ramp_vanishes_inside() {
        let img = gray(6, 6, |x, y| 3.0 * x as f64 + 2.0 * y as f64);
        let l = laplacian(&img).unwrap();
        for y in 1..5 {
            for x in 1..5 {
                assert_eq!(l[y * 6 + x], 0.0);
            }
        }
    }

    #[test]
    fn gaussian_kernel_is_normalized() {
        let k = gaussian_kernel_5x5(1.4);
        let s: f64 = k.iter().flatten().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(k[0][1], k[1][0]);
    }

    #[test]
    fn canny_constant_is_empty() {
        let m = canny_edges(&GrayImage::filled(16, 16, 100.0).unwrap(), 50.0, 150.0).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn canny_step_gives_single_line() {
        let img = gray(16, 16, |x, _| if x < 8 { 0.0 } else { 255.0 });
        let m = canny_edges(&img, 50.0, 150.0).unwrap();
        for y in 0..16 {
            let cols: Vec<usize> = (0..16).filter(|x| m.get(*x, y)).collect();
            assert_eq!(cols, vec![8], "row {y}");
        }
    }

    #[test]
    fn canny_faint_ramp_is_empty() {
        // Interior Sobel magnitude of a unit ramp is 8, far below 50.
        let img = gray(16, 16, |x, _| x as f64);
        assert_eq!(canny_edges(&img, 50.0, 150.0).unwrap().count(), 0);
    }

    #[test]
    fn canny_rejects_bad_thresholds() {
        let img = GrayImage::filled(8, 8, 0.0).unwrap();
        assert!(canny_edges(&img, 150.0, 50.0).is_err());
        assert!(canny_edges(&img, 0.0, 50.0).is_err());
    }

    #[test]
    fn fast_constant_is_empty() {
        let img = GrayImage::filled(15, 15, 128.0).unwrap();
        assert!(fast_keypoints(&img, 20.0).unwrap().is_empty());
    }

    #[test]
    fn fast_square_corners() {
        let img = gray(15, 15, |x, y| {
            if (6..9).contains(&x) && (6..9).contains(&y) {
                255.0
            } else {
                0.0
            }
        });
        for (x, y) in [(6, 6), (8, 6), (6, 8), (8, 8)] {
            assert!(fast_score(&img, x, y, 20.0).is_some(), "corner ({x},{y})");
        }
        let kps = fast_keypoints(&img, 20.0).unwrap();
        assert!(!kps.is_empty());
        assert!(kps.iter().all(|k| (6..9).contains(&k.x) && (6..9).contains(&k.y)));
    }

    #[test]
    fn fast_radial_gradient_is_empty() {
        let img = gray(32, 32, |x, y| {
            let dx = x as f64 - 15.5;
            let dy = y as f64 - 15.5;
            (dx * dx + dy * dy).sqrt() * 5.0
        });
        assert!(fast_keypoints(&img, 30.0).unwrap().is_empty());
    }

    #[test]
    fn highfreq_constant_is_zero() {
        let img = GrayImage::filled(9, 7, 40.0).unwrap();
        assert_eq!(highfreq_energy_ratio(&img, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn highfreq_checkerboard_is_one() {
        let img = gray(8, 8, |x, y| if (x + y) % 2 == 0 { 0.0 } else { 255.0 });
        assert!((highfreq_energy_ratio(&img, 0.25).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn highfreq_slow_cosine_is_zero() {
        let w = 16;
        let img = gray(w, 16, |x, _| {
            127.5 + 127.5 * (2.0 * std::f64::consts::PI * x as f64 / w as f64).cos()
        });
        assert!(highfreq_energy_ratio(&img, 0.25).unwrap() < 1e-12);
    }

    #[test]
    fn highfreq_rejects_bad_cutoff() {
        let img = GrayImage::filled(4, 4, 0.0).unwrap();
        assert!(highfreq_energy_ratio(&img, 0.0).is_err());
        assert!(highfreq_energy_ratio(&img, 1.0).is_err());
    }
}
