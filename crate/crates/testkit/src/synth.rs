//! Synthetic underwater-ish corpora with planted domain properties.
//!
//! Every image draws independent factors from balanced lists: clarity
//! (sharp and cluttered, or blurred and flat), brightness, color cast,
//! object boxes and a depth map. Each factor maps to the condition the
//! labeler should assign.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use domainscope_core::dataset::write_dmap;
use domainscope_core::labels::Category;
use domainscope_core::DepthMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clarity {
    Sharp,
    Blurred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Brightness {
    Dark,
    Bright,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cast {
    Blue,
    Green,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objects {
    None,
    Tiny,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    None,
    Flat,
    VerticalRamp,
    HorizontalRamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factors {
    pub clarity: Clarity,
    pub brightness: Brightness,
    pub cast: Cast,
    pub objects: Objects,
    pub depth: Depth,
}

impl Factors {
    /// Conditions the labeler should assign. Categories a factor does not
    /// pin down are left out.
    pub fn planted(&self) -> BTreeMap<Category, &'static str> {
        let mut m = BTreeMap::new();
        let sharp = self.clarity == Clarity::Sharp;
        m.insert(Category::Visibility, if sharp { "high" } else { "low" });
        m.insert(Category::Background, if sharp { "complex" } else { "simple" });
        m.insert(
            Category::Illumination,
            match self.brightness {
                Brightness::Dark => "dark",
                Brightness::Bright => "bright",
            },
        );
        m.insert(
            Category::Color,
            match self.cast {
                Cast::Blue => "blue",
                Cast::Green => "green",
                Cast::Neutral => "natural",
            },
        );
        match self.objects {
            Objects::None => {
                m.insert(Category::Layout, "sparse");
            }
            Objects::Tiny => {
                m.insert(Category::Layout, "crowded");
                m.insert(Category::Scale, "small");
            }
            Objects::Large => {
                m.insert(Category::Layout, "crowded");
                m.insert(Category::Scale, "large");
            }
        }
        match self.depth {
            Depth::None => {}
            Depth::Flat => {
                m.insert(Category::Orientation, "upright");
                m.insert(Category::Perspective, "nadir");
            }
            Depth::VerticalRamp => {
                m.insert(Category::Orientation, "upright");
                m.insert(Category::Perspective, "front");
            }
            Depth::HorizontalRamp => {
                m.insert(Category::Orientation, "rotated");
            }
        }
        m
    }

    fn base_color(&self) -> [f64; 3] {
        match (self.brightness, self.cast) {
            (Brightness::Dark, Cast::Blue) => [25.0, 55.0, 170.0],
            (Brightness::Bright, Cast::Blue) => [50.0, 170.0, 230.0],
            (Brightness::Dark, Cast::Green) => [20.0, 140.0, 20.0],
            (Brightness::Bright, Cast::Green) => [70.0, 225.0, 130.0],
            (Brightness::Dark, Cast::Neutral) => [65.0, 65.0, 65.0],
            (Brightness::Bright, Cast::Neutral) => [180.0, 180.0, 180.0],
        }
    }
}

pub const CLASS_NAMES: [&str; 4] = ["holothurian", "echinus", "scallop", "starfish"];

#[derive(Debug, Clone)]
pub struct PlantedImage {
    pub image_id: u64,
    pub file_name: String,
    pub factors: Factors,
    /// `[x, y, w, h, category_id]`
    pub boxes: Vec<[f64; 5]>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub annotations: PathBuf,
    pub images_dir: PathBuf,
    pub depth_dir: PathBuf,
    pub images: Vec<PlantedImage>,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusSpec {
    pub images: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            images: 60,
            width: 128,
            height: 96,
            seed: 7,
        }
    }
}

/// `n` values cycling through `options`, shuffled.
fn balanced<T: Copy>(rng: &mut ChaCha8Rng, options: &[T], n: usize) -> Vec<T> {
    let mut v: Vec<T> = (0..n).map(|i| options[i % options.len()]).collect();
    v.shuffle(rng);
    v
}

fn blur(field: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let ks: f64 = k.iter().sum();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    let d = j as isize - r;
                    let (sx, sy) = if horizontal {
                        ((x as isize + d).clamp(0, w as isize - 1) as usize, y)
                    } else {
                        (x, (y as isize + d).clamp(0, h as isize - 1) as usize)
                    };
                    acc += kv * src[sy * w + sx];
                }
                out[y * w + x] = acc / ks;
            }
        }
        out
    };
    pass(&pass(field, true), false)
}

/// Zero-mean luminance offsets: dense random patches plus pixel noise for
/// sharp images, a faint smoothed swell for blurred ones.
fn texture(rng: &mut ChaCha8Rng, clarity: Clarity, w: usize, h: usize) -> Vec<f64> {
    match clarity {
        Clarity::Sharp => {
            let mut f = vec![0.0; w * h];
            for _ in 0..(w * h) / 25 {
                let (pw, ph) = (rng.gen_range(2..8), rng.gen_range(2..8));
                let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
                let v = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(25.0..40.0);
                for y in y0..(y0 + ph).min(h) {
                    for x in x0..(x0 + pw).min(w) {
                        f[y * w + x] = v;
                    }
                }
            }
            for v in &mut f {
                *v += rng.gen_range(-6.0..6.0);
            }
            f
        }
        Clarity::Blurred => {
            let (px, py) = (rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3));
            let tau = std::f64::consts::TAU;
            let swell: Vec<f64> = (0..w * h)
                .map(|i| {
                    let (x, y) = ((i % w) as f64, (i / w) as f64);
                    6.0 * (tau * x / 45.0 + px).sin() * (tau * y / 55.0 + py).cos() + rng.gen_range(-8.0..8.0)
                })
                .collect();
            blur(&swell, w, h, 2.5)
        }
    }
}

fn boxes_for(rng: &mut ChaCha8Rng, objects: Objects, w: usize, h: usize) -> Vec<[f64; 5]> {
    let class = |rng: &mut ChaCha8Rng| rng.gen_range(1..=CLASS_NAMES.len()) as f64;
    match objects {
        Objects::None => Vec::new(),
        Objects::Tiny => (0..15)
            .map(|_| {
                let x = rng.gen_range(0..w - 6) as f64;
                let y = rng.gen_range(0..h - 6) as f64;
                [x, y, 6.0, 6.0, class(rng)]
            })
            .collect(),
        Objects::Large => {
            // 5 × 3 grid of 20 × 20 boxes, symmetric about both centre lines.
            let (sx, sy) = (w as f64 / 5.0, h as f64 / 3.0);
            let mut v = Vec::new();
            for j in 0..3 {
                for i in 0..5 {
                    let x = (i as f64 + 0.5) * sx - 10.0;
                    let y = (j as f64 + 0.5) * sy - 10.0;
                    v.push([x.round(), y.round(), 20.0, 20.0, class(rng)]);
                }
            }
            v
        }
    }
}

fn depth_map(kind: Depth, w: usize, h: usize) -> Option<DepthMap> {
    let f: fn(f64, f64) -> f64 = match kind {
        Depth::None => return None,
        Depth::Flat => |_, _| 3.0,
        Depth::VerticalRamp => |_, v| 10.0 * v,
        Depth::HorizontalRamp => |u, _| 6.0 * u,
    };
    DepthMap::from_fn(w, h, |x, y| f((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64)).ok()
}

fn write_depth_png(path: &Path, map: &DepthMap, scale: f64) -> io::Result<()> {
    let data: Vec<u16> = map.values().iter().map(|v| (v * scale).round() as u16).collect();
    image::ImageBuffer::<image::Luma<u16>, _>::from_raw(map.width() as u32, map.height() as u32, data)
        .expect("buffer size")
        .save(path)
        .map_err(io::Error::other)
}

/// Writes `images/`, `depth/` and `annotations.json` under `root`. Depth
/// maps are stored at half resolution, alternating 16-bit PNG and DMAP.
pub fn generate(root: &Path, spec: CorpusSpec) -> io::Result<Corpus> {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.images;
    let clarity = balanced(&mut rng, &[Clarity::Sharp, Clarity::Blurred], n);
    let brightness = balanced(&mut rng, &[Brightness::Dark, Brightness::Bright], n);
    let cast = balanced(&mut rng, &[Cast::Blue, Cast::Green, Cast::Neutral], n);
    let objects = balanced(&mut rng, &[Objects::None, Objects::Tiny, Objects::Large], n);
    let depth = balanced(
        &mut rng,
        &[Depth::None, Depth::Flat, Depth::VerticalRamp, Depth::HorizontalRamp],
        n,
    );

    let images_dir = root.join("images");
    let depth_dir = root.join("depth");
    fs::create_dir_all(&images_dir)?;
    fs::create_dir_all(&depth_dir)?;

    let mut images = Vec::with_capacity(n);
    for i in 0..n {
        let image_id = i as u64 + 1;
        let factors = Factors {
            clarity: clarity[i],
            brightness: brightness[i],
            cast: cast[i],
            objects: objects[i],
            depth: depth[i],
        };
        let tex = texture(&mut rng, factors.clarity, w, h);
        let base = factors.base_color();
        let mut buf = Vec::with_capacity(w * h * 3);
        for t in &tex {
            for c in base {
                buf.push((c + t).round().clamp(0.0, 255.0) as u8);
            }
        }
        let file_name = format!("img_{image_id:04}.png");
        image::RgbImage::from_raw(w as u32, h as u32, buf)
            .expect("buffer size")
            .save(images_dir.join(&file_name))
            .map_err(io::Error::other)?;
        if let Some(map) = depth_map(factors.depth, w / 2, h / 2) {
            if image_id % 2 == 0 {
                write_depth_png(&depth_dir.join(format!("{image_id}.png")), &map, 1000.0)?;
            } else {
                write_dmap(&depth_dir.join(format!("{image_id}.dmap")), &map).map_err(io::Error::other)?;
            }
        }
        let boxes = boxes_for(&mut rng, factors.objects, w, h);
        images.push(PlantedImage {
            image_id,
            file_name,
            factors,
            boxes,
        });
    }

    let annotations = root.join("annotations.json");
    fs::write(&annotations, serde_json::to_vec_pretty(&coco_json(&images, w, h)).unwrap())?;
    Ok(Corpus {
        root: root.to_path_buf(),
        annotations,
        images_dir,
        depth_dir,
        images,
        width: w,
        height: h,
    })
}

fn coco_json(images: &[PlantedImage], w: usize, h: usize) -> Value {
    let mut anns = Vec::new();
    for img in images {
        for b in &img.boxes {
            anns.push(json!({
                "id": anns.len() + 1,
                "image_id": img.image_id,
                "category_id": b[4] as u64,
                "bbox": [b[0], b[1], b[2], b[3]],
            }));
        }
    }
    json!({
        "images": images.iter().map(|i| json!({
            "id": i.image_id, "file_name": i.file_name, "width": w, "height": h,
        })).collect::<Vec<_>>(),
        "annotations": anns,
        "categories": CLASS_NAMES.iter().enumerate().map(|(k, name)| json!({
            "id": k + 1, "name": name,
        })).collect::<Vec<_>>(),
    })
}

impl Corpus {
    /// A detector that finds every object at confidence 0.9 and, on every
    /// blurred image, also fires `false_positives` times at confidence 0.6
    /// with a near-full-frame box.
    pub fn detections(&self, false_positives: usize) -> Value {
        let mut out = Vec::new();
        for img in &self.images {
            for b in &img.boxes {
                out.push(json!({
                    "image_id": img.image_id, "category_id": b[4] as u64,
                    "bbox": [b[0], b[1], b[2], b[3]], "score": 0.9,
                }));
            }
            if img.factors.clarity == Clarity::Blurred {
                for k in 0..false_positives {
                    // Near-full-frame boxes overlap any ground truth by far
                    // less than IoU 0.5, so they never match.
                    let inset = 2.0 * k as f64;
                    out.push(json!({
                        "image_id": img.image_id, "category_id": 1 + (k % CLASS_NAMES.len()) as u64,
                        "bbox": [inset, inset, self.width as f64 - 2.0 * inset, self.height as f64 - 2.0 * inset],
                        "score": 0.6,
                    }));
                }
            }
        }
        Value::Array(out)
    }

    pub fn write_detections(&self, path: &Path, false_positives: usize) -> io::Result<()> {
        fs::write(path, serde_json::to_vec(&self.detections(false_positives)).unwrap())
    }

    /// Manual labels equal to the planted conditions, one JSON object per line.
    pub fn write_planted_labels(&self, path: &Path) -> io::Result<()> {
        let mut text = String::new();
        for img in &self.images {
            let mut obj = serde_json::Map::new();
            obj.insert("image_id".into(), json!(img.image_id));
            for (cat, cond) in img.factors.planted() {
                obj.insert(cat.as_str().into(), json!(cond));
            }
            text.push_str(&Value::Object(obj).to_string());
            text.push('\n');
        }
        fs::write(path, text)
    }
}
