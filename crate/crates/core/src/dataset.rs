//! Ground truth, detections, images, depth rasters and label files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::GeometryParams;
use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::labels::{Category, DomainLabelRecord};
use crate::scene::BoundingBox;
use crate::vision::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub id: u64,
    pub name: String,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    #[serde(default)]
    id: Option<u64>,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<ImageEntry>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CategoryEntry>,
}

/// Validated ground truth. Images and categories are sorted by id, so the
/// index does not depend on the order of the source arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub image_root: PathBuf,
    pub images: Vec<ImageEntry>,
    pub categories: Vec<CategoryEntry>,
    /// Clamped boxes per image id, sorted by annotation id then geometry.
    pub annotations: BTreeMap<u64, Vec<BoundingBox>>,
    /// Boxes changed by clamping to the image bounds.
    pub clamped_boxes: usize,
    /// Boxes with no area left after clamping.
    pub dropped_boxes: usize,
}

impl DatasetIndex {
    pub fn boxes(&self, image_id: u64) -> &[BoundingBox] {
        self.annotations.get(&image_id).map_or(&[], Vec::as_slice)
    }

    pub fn image_path(&self, entry: &ImageEntry) -> PathBuf {
        self.image_root.join(&entry.file_name)
    }

    pub fn image(&self, image_id: u64) -> Option<&ImageEntry> {
        self.images
            .binary_search_by_key(&image_id, |e| e.id)
            .ok()
            .map(|i| &self.images[i])
    }

    pub fn category_ids(&self) -> Vec<u64> {
        self.categories.iter().map(|c| c.id).collect()
    }

    pub fn annotation_count(&self) -> usize {
        self.annotations.values().map(Vec::len).sum()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::parse(path, e))
}

/// Loads COCO-format ground truth. Every dangling reference and invalid
/// entry is reported in one [`Error::Validation`].
pub fn load_dataset(ann_path: &Path, image_root: &Path) -> Result<DatasetIndex> {
    let file: CocoFile = parse_json(ann_path, &read_file(ann_path)?)?;
    let mut problems = Vec::new();

    let mut images = file.images;
    images.sort_by_key(|e| e.id);
    for pair in images.windows(2) {
        if pair[0].id == pair[1].id {
            problems.push(format!("duplicate image id {}", pair[0].id));
        }
    }
    for e in &images {
        if e.width == 0 || e.height == 0 {
            problems.push(format!("image {} has zero size {}×{}", e.id, e.width, e.height));
        }
    }
    let mut categories = file.categories;
    categories.sort_by_key(|c| c.id);
    for pair in categories.windows(2) {
        if pair[0].id == pair[1].id {
            problems.push(format!("duplicate category id {}", pair[0].id));
        }
    }
    let image_sizes: BTreeMap<u64, (usize, usize)> =
        images.iter().map(|e| (e.id, (e.width, e.height))).collect();
    let category_ids: BTreeSet<u64> = categories.iter().map(|c| c.id).collect();

    let mut anns = file.annotations;
    anns.sort_by(|a, b| {
        (a.image_id, a.id)
            .cmp(&(b.image_id, b.id))
            .then_with(|| a.category_id.cmp(&b.category_id))
            .then_with(|| {
                a.bbox
                    .iter()
                    .zip(&b.bbox)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });

    let mut annotations: BTreeMap<u64, Vec<BoundingBox>> = BTreeMap::new();
    let (mut clamped_boxes, mut dropped_boxes) = (0, 0);
    for (i, a) in anns.iter().enumerate() {
        let label = a.id.map_or_else(|| format!("annotation #{i}"), |id| format!("annotation {id}"));
        let Some(&(w, h)) = image_sizes.get(&a.image_id) else {
            problems.push(format!("{label} references unknown image_id {}", a.image_id));
            continue;
        };
        if !category_ids.contains(&a.category_id) {
            problems.push(format!("{label} references unknown category_id {}", a.category_id));
            continue;
        }
        let [x, y, bw, bh] = a.bbox;
        if !a.bbox.iter().all(|v| v.is_finite()) || bw < 0.0 || bh < 0.0 {
            problems.push(format!("{label} has invalid bbox {:?}", a.bbox));
            continue;
        }
        let raw = BoundingBox::new(x, y, bw, bh, a.category_id);
        match raw.clamped(w as f64, h as f64) {
            Some(b) => {
                if b != raw {
                    clamped_boxes += 1;
                }
                annotations.entry(a.image_id).or_default().push(b);
            }
            None => dropped_boxes += 1,
        }
    }
    if !problems.is_empty() {
        return Err(Error::validation(ann_path, problems));
    }
    Ok(DatasetIndex {
        image_root: image_root.to_path_buf(),
        images,
        categories,
        annotations,
        clamped_boxes,
        dropped_boxes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Carries the predicted class in `category_id`.
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Deserialize)]
struct CocoResult {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    score: f64,
}

/// Detections grouped by image id, in file order within each image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub by_image: BTreeMap<u64, Vec<Detection>>,
}

impl DetectionSet {
    pub fn for_image(&self, image_id: u64) -> &[Detection] {
        self.by_image.get(&image_id).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.by_image.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loads a COCO results list and checks it against the dataset.
pub fn load_detections(path: &Path, index: &DatasetIndex) -> Result<DetectionSet> {
    let results: Vec<CocoResult> = parse_json(path, &read_file(path)?)?;
    let category_ids: BTreeSet<u64> = index.categories.iter().map(|c| c.id).collect();
    let mut problems = Vec::new();
    let mut set = DetectionSet::default();
    for (i, r) in results.into_iter().enumerate() {
        if index.image(r.image_id).is_none() {
            problems.push(format!("detection #{i} references unknown image_id {}", r.image_id));
            continue;
        }
        if !category_ids.contains(&r.category_id) {
            problems.push(format!("detection #{i} references unknown category_id {}", r.category_id));
            continue;
        }
        if !(0.0..=1.0).contains(&r.score) {
            problems.push(format!("detection #{i} has confidence {} outside [0, 1]", r.score));
            continue;
        }
        if !r.bbox.iter().all(|v| v.is_finite()) || r.bbox[2] < 0.0 || r.bbox[3] < 0.0 {
            problems.push(format!("detection #{i} has invalid bbox {:?}", r.bbox));
            continue;
        }
        let [x, y, w, h] = r.bbox;
        set.by_image.entry(r.image_id).or_default().push(Detection {
            bbox: BoundingBox::new(x, y, w, h, r.category_id),
            confidence: r.score,
        });
    }
    if !problems.is_empty() {
        return Err(Error::validation(path, problems));
    }
    Ok(set)
}

/// Decodes an 8-bit PNG or baseline JPEG into 3-channel RGB. Alpha is
/// dropped and grayscale is expanded.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let img_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        Some(other) => return Err(img_err(format!("unsupported format {other:?}"))),
        None => return Err(img_err("unrecognized image format".into())),
    }
    let decoded = reader.decode().map_err(|e| img_err(e.to_string()))?;
    let rgb = match decoded {
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageRgb8(_)
        | DynamicImage::ImageRgba8(_) => decoded.into_rgb8(),
        other => return Err(img_err(format!("unsupported pixel type {:?}, need 8-bit", other.color()))),
    };
    let (w, h) = rgb.dimensions();
    RasterImage::new(w as usize, h as usize, 3, rgb.into_raw())
}

pub const DMAP_MAGIC: &[u8; 4] = b"DMAP";

/// Looks for `<root>/<image_id>.png`, then `<root>/<image_id>.dmap`.
pub fn find_depth(depth_root: &Path, image_id: u64) -> Option<PathBuf> {
    ["png", "dmap"]
        .iter()
        .map(|ext| depth_root.join(format!("{image_id}.{ext}")))
        .find(|p| p.is_file())
}

fn parse_dmap(path: &Path, bytes: &[u8]) -> Result<DepthMap> {
    let bad = |message: String| Error::Depth {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < 16 || &bytes[..4] != DMAP_MAGIC {
        return Err(bad("missing DMAP header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h) = (word(4), word(8));
    if w == 0 || h == 0 {
        return Err(bad(format!("zero-sized raster {w}×{h}")));
    }
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("raster dimensions overflow".into()))?;
    if bytes.len() - 16 != expected {
        return Err(bad(format!(
            "{}×{} raster needs {expected} payload bytes, found {}",
            w,
            h,
            bytes.len() - 16
        )));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    DepthMap::new(w, h, values).map_err(|e| bad(e.to_string()))
}

fn parse_depth_png(path: &Path, bytes: &[u8], png_scale: f64) -> Result<DepthMap> {
    let bad = |message: String| Error::Depth {
        path: path.to_path_buf(),
        message,
    };
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| bad(e.to_string()))?;
    let DynamicImage::ImageLuma16(buf) = decoded else {
        return Err(bad(format!("need 16-bit grayscale PNG, got {:?}", decoded.color())));
    };
    let (w, h) = buf.dimensions();
    let values = buf.into_raw().into_iter().map(|v| v as f64 / png_scale).collect();
    DepthMap::new(w as usize, h as usize, values).map_err(|e| bad(e.to_string()))
}

/// Reads a 16-bit PNG or DMAP raster, applies the profile's scale factors
/// and resamples bilinearly to the target size.
pub fn load_depth(path: &Path, target_w: usize, target_h: usize, params: &GeometryParams) -> Result<DepthMap> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::Depth {
            path: path.to_path_buf(),
            message: format!("cannot resample to {target_w}×{target_h}"),
        });
    }
    let bytes = read_file(path)?;
    let map = if bytes.starts_with(DMAP_MAGIC) {
        parse_dmap(path, &bytes)?
    } else {
        parse_depth_png(path, &bytes, params.depth_png_scale)?
    };
    map.scaled(params.depth_scale).resized(target_w, target_h)
}

pub fn write_dmap(path: &Path, map: &DepthMap) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + 4 * map.values().len());
    bytes.extend_from_slice(DMAP_MAGIC);
    bytes.extend_from_slice(&(map.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(map.height() as u32).to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    for v in map.values() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// One record per line, keys in [`DomainLabelRecord`] field order.
pub fn labels_to_jsonl(records: &[DomainLabelRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("label record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_labels(records: &[DomainLabelRecord], path: &Path) -> Result<()> {
    write_atomic(path, labels_to_jsonl(records).as_bytes())
}

/// Reads a JSON Lines file of `T`, skipping blank lines. Parse errors carry
/// the file line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<DomainLabelRecord>> {
    read_jsonl(path)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Flat CSV: identifiers, one column per category (condition name or
/// `unlabeled:<reason>`), then raw and normalized metrics.
pub fn write_labels_csv(records: &[DomainLabelRecord], path: &Path) -> Result<()> {
    let mut header: Vec<String> = ["image_id", "file_name", "profile_id"].map(String::from).to_vec();
    header.extend(Category::ALL.iter().map(|c| c.as_str().to_string()));
    header.extend(
        [
            "tenengrad",
            "laplacian_var",
            "rms_contrast",
            "freq_energy",
            "median_luminance",
            "overexposed_ratio",
            "underexposed_ratio",
            "mean_r",
            "mean_g",
            "mean_b",
            "color_distortion",
            "blue_green_ratio",
            "object_count",
            "coverage",
            "overlap",
            "mean_norm_area",
            "small_ratio",
            "large_ratio",
            "keypoint_density",
            "edge_density",
            "laplacian_mean",
            "delta_lr",
            "delta_tb",
            "depth_range",
            "brightness_gradient",
            "visibility_score",
            "background_score",
        ]
        .map(String::from),
    );
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for r in records {
            let m = &r.metrics.raw;
            let mut row = vec![r.image_id.to_string(), r.file_name.clone(), r.profile_id.clone()];
            for c in Category::ALL {
                row.push(match r.condition(c) {
                    Ok(name) => name.to_string(),
                    Err(reason) => format!("unlabeled:{reason}"),
                });
            }
            row.extend([
                m.tenengrad.to_string(),
                m.laplacian_var.to_string(),
                m.rms_contrast.to_string(),
                m.freq_energy.to_string(),
                m.median_luminance.to_string(),
                m.overexposed_ratio.to_string(),
                m.underexposed_ratio.to_string(),
                m.mean_r.to_string(),
                m.mean_g.to_string(),
                m.mean_b.to_string(),
                m.color_distortion.to_string(),
                m.blue_green_ratio.to_string(),
                m.object_count.to_string(),
                m.coverage.to_string(),
                m.overlap.to_string(),
                opt(m.mean_norm_area),
                opt(m.small_ratio),
                opt(m.large_ratio),
                opt(m.keypoint_density),
                opt(m.edge_density),
                opt(m.laplacian_mean),
                opt(m.delta_lr),
                opt(m.delta_tb),
                opt(m.depth_range),
                m.brightness_gradient.to_string(),
                r.metrics.normalized.visibility_score.to_string(),
                opt(r.metrics.normalized.background_score),
            ]);
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

/// Buffered writer helper for callers streaming text to a file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    const MINIMAL: &str = r#"{
        "images": [{"id": 1, "file_name": "a.png", "width": 10, "height": 10}],
        "annotations": [{"id": 1, "image_id": 1, "category_id": 3, "bbox": [1, 1, 4, 4]}],
        "categories": [{"id": 3, "name": "fish"}]
    }"#;

    #[test]
    fn minimal_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "gt.json", MINIMAL);
        let idx = load_dataset(&p, dir.path()).unwrap();
        assert_eq!(idx.images.len(), 1);
        assert_eq!(idx.categories.len(), 1);
        assert_eq!(idx.annotation_count(), 1);
        assert_eq!(idx.clamped_boxes, 0);
    }

    #[test]
    fn dangling_image_reference_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace("\"image_id\": 1", "\"image_id\": 77");
        let p = write(dir.path(), "gt.json", &text);
        match load_dataset(&p, dir.path()) {
            Err(Error::Validation { problems, .. }) => {
                assert_eq!(problems.len(), 1);
                assert!(problems[0].contains("77"), "{problems:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_box_is_clamped() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace("[1, 1, 4, 4]", "[8, 8, 5, 5]");
        let p = write(dir.path(), "gt.json", &text);
        let idx = load_dataset(&p, dir.path()).unwrap();
        assert_eq!(idx.clamped_boxes, 1);
        assert_eq!(idx.boxes(1)[0], BoundingBox::new(8.0, 8.0, 2.0, 2.0, 3));
    }

    #[test]
    fn box_outside_image_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace("[1, 1, 4, 4]", "[12, 1, 4, 4]");
        let p = write(dir.path(), "gt.json", &text);
        let idx = load_dataset(&p, dir.path()).unwrap();
        assert_eq!((idx.dropped_boxes, idx.annotation_count()), (1, 0));
    }

    #[test]
    fn parse_error_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace("\"width\": 10", "\"width\": \"ten\"");
        let p = write(dir.path(), "gt.json", &text);
        match load_dataset(&p, dir.path()) {
            Err(Error::Parse { field, line, .. }) => {
                assert_eq!(field, "images[0].width");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detections() {
        let dir = tempfile::tempdir().unwrap();
        let idx = load_dataset(&write(dir.path(), "gt.json", MINIMAL), dir.path()).unwrap();
        let empty = load_detections(&write(dir.path(), "e.json", "[]"), &idx).unwrap();
        assert!(empty.is_empty());
        let two = r#"[{"image_id":1,"category_id":3,"bbox":[0,0,2,2],"score":0.9},
                      {"image_id":1,"category_id":3,"bbox":[5,5,2,2],"score":0.4}]"#;
        let set = load_detections(&write(dir.path(), "d.json", two), &idx).unwrap();
        assert_eq!(set.for_image(1).len(), 2);
        let bad = r#"[{"image_id":1,"category_id":3,"bbox":[0,0,2,2],"score":1.5}]"#;
        assert!(matches!(
            load_detections(&write(dir.path(), "b.json", bad), &idx),
            Err(Error::Validation { .. })
        ));
        let unknown = r#"[{"image_id":9,"category_id":3,"bbox":[0,0,2,2],"score":0.5}]"#;
        assert!(load_detections(&write(dir.path(), "u.json", unknown), &idx).is_err());
    }

    fn params() -> GeometryParams {
        crate::calibration::CalibrationProfile::identity().geometry
    }

    #[test]
    fn dmap_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1.dmap");
        let map = DepthMap::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        write_dmap(&p, &map).unwrap();
        let back = load_depth(&p, 2, 2, &params()).unwrap();
        assert_eq!(back.values(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn png16_zero_depth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(3, 2, vec![0u16; 6])
            .unwrap()
            .save(&p)
            .unwrap();
        let d = load_depth(&p, 3, 2, &params()).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn png16_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(1, 1, vec![2500u16])
            .unwrap()
            .save(&p)
            .unwrap();
        let mut g = params();
        g.depth_scale = 2.0;
        let d = load_depth(&p, 1, 1, &g).unwrap();
        assert_eq!(d.values(), &[5.0]);
    }

    #[test]
    fn depth_zero_target_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1.dmap");
        write_dmap(&p, &DepthMap::new(1, 1, vec![1.0]).unwrap()).unwrap();
        assert!(load_depth(&p, 0, 4, &params()).is_err());
    }

    #[test]
    fn truncated_dmap_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("1.dmap");
        let mut bytes = DMAP_MAGIC.to_vec();
        for v in [2u32, 2, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0; 8]);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_depth(&p, 2, 2, &params()), Err(Error::Depth { .. })));
    }

    #[test]
    fn image_decoding() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        image::GrayImage::from_raw(2, 1, vec![10, 200]).unwrap().save(&p).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.data(), &[10, 10, 10, 200, 200, 200]);
        let p16 = dir.path().join("y.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(1, 1, vec![5u16])
            .unwrap()
            .save(&p16)
            .unwrap();
        assert!(matches!(load_image(&p16), Err(Error::Image { .. })));
        let junk = write(dir.path(), "z.png", "not an image");
        assert!(load_image(&junk).is_err());
    }

    #[test]
    fn empty_labels_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        write_labels(&[], &p).unwrap();
        assert_eq!(fs::read(&p).unwrap().len(), 0);
        assert!(read_labels(&p).unwrap().is_empty());
    }
}
