//! Metric invariants as seed-driven checks, shared by the property tests
//! and the acceptance run. Each returns a description of the first
//! violation.

use domainscope_core::appearance::{compute_color, compute_illumination, visibility_raw};
use domainscope_core::geometry::{compute_geometry, GeometryMetrics};
use domainscope_core::scene::{background_mask, BoundingBox};
use domainscope_core::vision::{fast_keypoints, to_grayscale};
use domainscope_core::{CalibrationProfile, DepthMap, GrayImage, RasterImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REL_TOL: f64 = 1e-9;

pub type Check = fn(u64) -> Result<(), String>;

/// Named checks in a fixed order.
pub const CHECKS: [(&str, Check); 5] = [
    ("intensity offset", intensity_offset),
    ("gain scaling", gain_scaling),
    ("pixel permutation", pixel_permutation),
    ("depth offset", depth_offset),
    ("flip symmetry", flip_symmetry),
];

fn close(what: &str, a: f64, b: f64) -> Result<(), String> {
    let scale = a.abs().max(b.abs());
    if (a - b).abs() <= REL_TOL * scale + 1e-12 {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b}"))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gray(rng: &mut ChaCha8Rng, w: usize, h: usize, max: i32) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen_range(0..=max) as f64).expect("valid image")
}

fn map(img: &GrayImage, f: impl Fn(f64) -> f64) -> GrayImage {
    GrayImage::new(img.width(), img.height(), img.data().iter().map(|v| f(*v)).collect()).expect("same size")
}

/// Tenengrad, Laplacian variance, RMS contrast, spectral ratio, FAST count
/// and color distortion do not change when a constant is added to every
/// pixel.
pub fn intensity_offset(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (w, h) = (r.gen_range(8..=32), r.gen_range(8..=32));
    let img = gray(&mut r, w, h, 200);
    let offset = r.gen_range(1..=55) as f64;
    let shifted = map(&img, |v| v + offset);
    let (a, b) = (visibility_raw(&img, 0.25).unwrap(), visibility_raw(&shifted, 0.25).unwrap());
    close("tenengrad", a.tenengrad, b.tenengrad)?;
    close("laplacian variance", a.laplacian_var, b.laplacian_var)?;
    close("rms contrast", a.rms_contrast, b.rms_contrast)?;
    close("spectral ratio", a.freq_energy, b.freq_energy)?;
    let t = r.gen_range(5..40) as f64;
    let (ka, kb) = (fast_keypoints(&img, t).unwrap().len(), fast_keypoints(&shifted, t).unwrap().len());
    if ka != kb {
        return Err(format!("FAST count: {ka} vs {kb}"));
    }
    let rgb: Vec<u8> = (0..w * h * 3).map(|_| r.gen_range(0..=200)).collect();
    let off = offset as u8;
    let lifted: Vec<u8> = rgb.iter().map(|v| v + off).collect();
    let ca = compute_color(&RasterImage::new(w, h, 3, rgb).unwrap()).unwrap();
    let cb = compute_color(&RasterImage::new(w, h, 3, lifted).unwrap()).unwrap();
    close("color distortion", ca.distortion, cb.distortion)
}

/// Multiplying every pixel by `alpha` scales Tenengrad and Laplacian
/// variance by `alpha²`.
pub fn gain_scaling(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (w, h) = (r.gen_range(4..=32), r.gen_range(4..=32));
    let alpha: f64 = r.gen_range(0.1..4.0);
    // Luminance stays within [0, 255] after scaling.
    let img = gray(&mut r, w, h, (255.0 / alpha).floor().min(255.0) as i32);
    let scaled = map(&img, |v| v * alpha);
    let (a, b) = (visibility_raw(&img, 0.25).unwrap(), visibility_raw(&scaled, 0.25).unwrap());
    close("tenengrad", a.tenengrad * alpha * alpha, b.tenengrad)?;
    close("laplacian variance", a.laplacian_var * alpha * alpha, b.laplacian_var)
}

/// Global statistics ignore where pixels are: shuffling them leaves median
/// luminance, exposure ratios, RMS contrast and channel statistics alone.
pub fn pixel_permutation(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let (w, h) = (r.gen_range(3..=32), r.gen_range(3..=32));
    let mut pixels: Vec<[u8; 3]> = (0..w * h).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    let build = |p: &[[u8; 3]]| RasterImage::from_rgb_fn(w, h, |x, y| p[y * w + x]);
    let a = build(&pixels);
    pixels.shuffle(&mut r);
    let b = build(&pixels);
    let (ga, gb) = (to_grayscale(&a).unwrap(), to_grayscale(&b).unwrap());
    let t = CalibrationProfile::identity().illumination;
    let (ia, ib) = (compute_illumination(&ga, &t), compute_illumination(&gb, &t));
    close("median luminance", ia.median_luminance, ib.median_luminance)?;
    close("overexposed ratio", ia.overexposed_ratio, ib.overexposed_ratio)?;
    close("underexposed ratio", ia.underexposed_ratio, ib.underexposed_ratio)?;
    close(
        "rms contrast",
        visibility_raw(&ga, 0.25).unwrap().rms_contrast,
        visibility_raw(&gb, 0.25).unwrap().rms_contrast,
    )?;
    let (ca, cb) = (compute_color(&a).unwrap(), compute_color(&b).unwrap());
    close("mean red", ca.mean_r, cb.mean_r)?;
    close("mean green", ca.mean_g, cb.mean_g)?;
    close("mean blue", ca.mean_b, cb.mean_b)?;
    close("color distortion", ca.distortion, cb.distortion)?;
    close("blue/green ratio", ca.blue_green_ratio, cb.blue_green_ratio)
}

struct Scene {
    depth: DepthMap,
    img: GrayImage,
    boxes: Vec<BoundingBox>,
}

fn scene(r: &mut ChaCha8Rng) -> Scene {
    let (w, h) = (r.gen_range(12..=40), r.gen_range(12..=40));
    let (a, b) = (r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5));
    let depth = DepthMap::from_fn(w, h, |x, y| {
        if r.gen_bool(0.05) {
            f64::NAN
        } else {
            3.0 + a * x as f64 + b * y as f64 + r.gen_range(-1.0..1.0)
        }
    })
    .unwrap();
    let img = gray(r, w, h, 255);
    let boxes = (0..r.gen_range(0..3))
        .map(|_| BoundingBox::new(r.gen_range(0.0..w as f64), r.gen_range(0.0..h as f64), 4.0, 4.0, 1))
        .collect();
    Scene { depth, img, boxes }
}

fn geometry(s: &Scene) -> Result<GeometryMetrics, String> {
    let mut params = CalibrationProfile::identity().geometry;
    params.min_region_pixels = 1;
    let mask = background_mask(&s.boxes, s.img.width(), s.img.height());
    compute_geometry(&s.depth, &s.img, &mask, &params).map_err(|e| e.to_string())
}

/// Adding a constant to every depth value leaves the depth differences and
/// the depth range unchanged.
pub fn depth_offset(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let s = scene(&mut r);
    let c = r.gen_range(-2.0..50.0);
    let shifted = Scene {
        depth: DepthMap::new(s.depth.width(), s.depth.height(), s.depth.values().iter().map(|v| v + c).collect())
            .unwrap(),
        img: s.img.clone(),
        boxes: s.boxes.clone(),
    };
    let (a, b) = (geometry(&s)?, geometry(&shifted)?);
    close("delta_lr", a.delta_lr, b.delta_lr)?;
    close("delta_tb", a.delta_tb, b.delta_tb)?;
    close("depth range", a.depth_range, b.depth_range)
}

fn flipped(s: &Scene, horizontal: bool) -> Scene {
    let (w, h) = (s.img.width(), s.img.height());
    let src = |x: usize, y: usize| if horizontal { (w - 1 - x, y) } else { (x, h - 1 - y) };
    let depth = DepthMap::from_fn(w, h, |x, y| {
        let (sx, sy) = src(x, y);
        s.depth.get(sx, sy)
    })
    .unwrap();
    let img = GrayImage::from_fn(w, h, |x, y| {
        let (sx, sy) = src(x, y);
        s.img.get(sx, sy)
    })
    .unwrap();
    let boxes = s
        .boxes
        .iter()
        .map(|b| {
            if horizontal {
                BoundingBox::new(w as f64 - b.x - b.w, b.y, b.w, b.h, b.category_id)
            } else {
                BoundingBox::new(b.x, h as f64 - b.y - b.h, b.w, b.h, b.category_id)
            }
        })
        .collect();
    Scene { depth, img, boxes }
}

/// Mirroring left-right keeps every geometry metric; mirroring top-bottom
/// keeps the depth metrics and negates the brightness gradient.
pub fn flip_symmetry(seed: u64) -> Result<(), String> {
    let s = scene(&mut rng(seed));
    let base = geometry(&s)?;
    let lr = geometry(&flipped(&s, true))?;
    let tb = geometry(&flipped(&s, false))?;
    for (name, m) in [("horizontal flip", lr), ("vertical flip", tb)] {
        close(&format!("{name} delta_lr"), base.delta_lr, m.delta_lr)?;
        close(&format!("{name} delta_tb"), base.delta_tb, m.delta_tb)?;
        close(&format!("{name} depth range"), base.depth_range, m.depth_range)?;
    }
    close("horizontal flip brightness gradient", base.brightness_gradient, lr.brightness_gradient)?;
    close("vertical flip brightness gradient", -base.brightness_gradient, tb.brightness_gradient)
}
