//! Per-image labeling and the parallel labeling job.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::appearance::{
    classify_color, classify_illumination, classify_visibility, compute_color, compute_illumination,
    compute_visibility,
};
use crate::calibration::CalibrationProfile;
use crate::dataset::{find_depth, load_depth, load_image, DatasetIndex, ImageEntry};
use crate::error::{Error, Result};
use crate::geometry::{brightness_gradient, classify_orientation, classify_perspective, compute_geometry, DepthMap};
use crate::labels::{
    reason, Assignment, Axis, Category, DomainLabelRecord, MetricVector, NormalizedMetrics, RawMetrics, LABEL_SCHEMA,
};
use crate::scene::{
    background_mask, classify_background, classify_layout, classify_scale, compute_background, compute_layout,
    compute_scale, BoundingBox,
};
use crate::vision::{to_grayscale, RasterImage};

/// Depth input for one image.
#[derive(Debug, Clone, Copy)]
pub enum DepthInput<'a> {
    Missing,
    /// A depth file exists but could not be read.
    Unreadable,
    Map(&'a DepthMap),
}

impl<'a> From<Option<&'a DepthMap>> for DepthInput<'a> {
    fn from(d: Option<&'a DepthMap>) -> Self {
        d.map_or(DepthInput::Missing, DepthInput::Map)
    }
}

/// A profile paired with its fingerprint, computed once.
#[derive(Debug, Clone)]
pub struct Labeler {
    profile: CalibrationProfile,
    profile_id: String,
}

impl Labeler {
    pub fn new(profile: CalibrationProfile) -> Result<Self> {
        profile.validate()?;
        let profile_id = profile.profile_id();
        Ok(Self { profile, profile_id })
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    pub fn profile_id(&self) -> &str {
        &self.profile_id
    }

    /// Computes every metric and assigns all eight categories. Categories
    /// that cannot be scored become unlabeled with a reason.
    pub fn label(
        &self,
        image_id: u64,
        file_name: &str,
        img: &RasterImage,
        boxes: &[BoundingBox],
        depth: DepthInput<'_>,
    ) -> Result<DomainLabelRecord> {
        let p = &self.profile;
        let (w, h) = (img.width(), img.height());
        let area = (w * h) as f64;
        let boxes: Vec<BoundingBox> = boxes.iter().filter_map(|b| b.clamped(w as f64, h as f64)).collect();

        let gray = to_grayscale(img)?;
        let vis = compute_visibility(&gray, p)?;
        let illum = compute_illumination(&gray, &p.illumination);
        let color = compute_color(img)?;

        let layout = compute_layout(&boxes, area);
        let scale = compute_scale(&boxes, area, &p.scale);
        let mask = background_mask(&boxes, w, h);
        let background = match compute_background(&gray, &mask, p) {
            Ok(b) => Ok(b),
            Err(Error::Excluded { reason, .. }) => Err(reason),
            Err(e) => return Err(e),
        };

        let geometry = match depth {
            DepthInput::Missing => Err(reason::NO_DEPTH),
            DepthInput::Unreadable => Err(reason::DEPTH_UNREADABLE),
            DepthInput::Map(d) => match compute_geometry(d, &gray, &mask, &p.geometry) {
                Ok(g) => Ok(g),
                Err(Error::Excluded { reason, .. }) => Err(reason),
                Err(e) => return Err(e),
            },
        };

        let raw = RawMetrics {
            tenengrad: vis.raw.tenengrad,
            laplacian_var: vis.raw.laplacian_var,
            rms_contrast: vis.raw.rms_contrast,
            freq_energy: vis.raw.freq_energy,
            median_luminance: illum.median_luminance,
            overexposed_ratio: illum.overexposed_ratio,
            underexposed_ratio: illum.underexposed_ratio,
            mean_r: color.mean_r,
            mean_g: color.mean_g,
            mean_b: color.mean_b,
            color_distortion: color.distortion,
            blue_green_ratio: color.blue_green_ratio,
            object_count: layout.object_count,
            coverage: layout.coverage,
            overlap: layout.overlap,
            mean_norm_area: scale.map(|s| s.mean_norm_area),
            small_ratio: scale.map(|s| s.small_ratio),
            large_ratio: scale.map(|s| s.large_ratio),
            keypoint_density: background.ok().map(|b| b.raw.keypoint_density),
            edge_density: background.ok().map(|b| b.raw.edge_density),
            laplacian_mean: background.ok().map(|b| b.raw.laplacian_mean),
            delta_lr: geometry.ok().map(|g| g.delta_lr),
            delta_tb: geometry.ok().map(|g| g.delta_tb),
            depth_range: geometry.ok().map(|g| g.depth_range),
            brightness_gradient: match geometry {
                Ok(g) => g.brightness_gradient,
                Err(_) => brightness_gradient(&gray, p.geometry.split_fraction),
            },
        };
        let normalized = NormalizedMetrics {
            tenengrad: vis.normalized[0],
            laplacian_var: vis.normalized[1],
            rms_contrast: vis.normalized[2],
            freq_energy: vis.normalized[3],
            visibility_score: vis.score,
            keypoint_density: background.ok().map(|b| b.normalized[0]),
            edge_density: background.ok().map(|b| b.normalized[1]),
            laplacian_mean: background.ok().map(|b| b.normalized[2]),
            background_score: background.ok().map(|b| b.score),
        };

        Ok(DomainLabelRecord {
            schema: LABEL_SCHEMA.to_string(),
            image_id,
            file_name: file_name.to_string(),
            profile_id: self.profile_id.clone(),
            visibility: Assignment::Labeled(classify_visibility(vis.score, &p.visibility)),
            illumination: Assignment::Labeled(classify_illumination(&illum, &p.illumination)),
            color: Assignment::Labeled(classify_color(&color, &p.color)),
            layout: Assignment::Labeled(classify_layout(&layout, &p.layout)),
            scale: match scale {
                Some(s) => Assignment::Labeled(classify_scale(&s, &p.scale)),
                None => Assignment::unlabeled(reason::NO_OBJECTS),
            },
            background: match background {
                Ok(b) => Assignment::Labeled(classify_background(b.score, &p.background)),
                Err(r) => Assignment::unlabeled(r),
            },
            orientation: match geometry {
                Ok(g) => Assignment::Labeled(classify_orientation(&g, &p.orientation)),
                Err(r) => Assignment::unlabeled(r),
            },
            perspective: match geometry {
                Ok(g) => Assignment::Labeled(classify_perspective(&g, &p.perspective)),
                Err(r) => Assignment::unlabeled(r),
            },
            metrics: MetricVector { raw, normalized },
        })
    }
}

/// One-off labeling of a single image. Prefer [`Labeler`] for many images.
pub fn label_image(
    img: &RasterImage,
    boxes: &[BoundingBox],
    depth: Option<&DepthMap>,
    profile: &CalibrationProfile,
) -> Result<DomainLabelRecord> {
    Labeler::new(profile.clone())?.label(0, "", img, boxes, depth.into())
}

#[derive(Debug, Clone)]
pub struct LabelingJob {
    pub dataset: DatasetIndex,
    pub depth_root: Option<PathBuf>,
    pub profile: CalibrationProfile,
    pub worker_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFailure {
    pub image_id: u64,
    pub file_name: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    /// In dataset order; failed images are absent.
    pub records: Vec<DomainLabelRecord>,
    pub failures: Vec<ImageFailure>,
    pub summary: Summary,
    pub profile_id: String,
}

fn label_entry(labeler: &Labeler, job: &LabelingJob, entry: &ImageEntry) -> Result<DomainLabelRecord> {
    let img = load_image(&job.dataset.image_path(entry))?;
    let depth_path = job.depth_root.as_deref().and_then(|root| find_depth(root, entry.id));
    let loaded = depth_path.map(|p| load_depth(&p, img.width(), img.height(), &labeler.profile.geometry));
    let depth = match &loaded {
        None => DepthInput::Missing,
        Some(Ok(map)) => DepthInput::Map(map),
        Some(Err(_)) => DepthInput::Unreadable,
    };
    labeler.label(entry.id, &entry.file_name, &img, job.dataset.boxes(entry.id), depth)
}

/// Labels every image on a pool of `worker_count` threads. Output order is
/// dataset order regardless of the worker count. Per-image failures are
/// collected; the job fails only when their fraction exceeds the profile's
/// limit.
pub fn run_job(job: &LabelingJob) -> Result<JobOutput> {
    if job.worker_count == 0 {
        return Err(Error::InvalidInput("worker count must be at least 1".into()));
    }
    let labeler = Labeler::new(job.profile.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.worker_count)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<DomainLabelRecord>> = pool.install(|| {
        job.dataset
            .images
            .par_iter()
            .map(|entry| label_entry(&labeler, job, entry))
            .collect()
    });

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (entry, result) in job.dataset.images.iter().zip(results) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push(ImageFailure {
                image_id: entry.id,
                file_name: entry.file_name.clone(),
                error: e.to_string(),
            }),
        }
    }
    let total = job.dataset.images.len();
    let limit = job.profile.max_failure_fraction;
    if total > 0 && failures.len() as f64 / total as f64 > limit {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            max_fraction: limit,
        });
    }
    let summary = Summary::from_records(&records, failures.len());
    Ok(JobOutput {
        records,
        failures,
        summary,
        profile_id: labeler.profile_id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCount {
    pub condition: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPopulation {
    pub category: Category,
    /// Every condition in low-to-high order, including empty ones.
    pub conditions: Vec<ConditionCount>,
    /// Unlabeled counts keyed by reason.
    pub unlabeled: BTreeMap<String, ConditionCount>,
}

/// Population of each condition over the labeled images. Percentages are
/// over all records, so labeled and unlabeled rows sum to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub images: usize,
    pub failed: usize,
    pub categories: Vec<CategoryPopulation>,
}

impl Summary {
    pub fn from_records(records: &[DomainLabelRecord], failed: usize) -> Self {
        let n = records.len();
        let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
        let categories = Category::ALL
            .iter()
            .map(|&cat| {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                let mut unlabeled: BTreeMap<String, usize> = BTreeMap::new();
                for r in records {
                    match r.condition(cat) {
                        Ok(name) => *counts.entry(name).or_default() += 1,
                        Err(reason) => *unlabeled.entry(reason.to_string()).or_default() += 1,
                    }
                }
                CategoryPopulation {
                    category: cat,
                    conditions: cat
                        .conditions()
                        .iter()
                        .map(|name| {
                            let count = counts.get(name).copied().unwrap_or(0);
                            ConditionCount {
                                condition: name.to_string(),
                                count,
                                percent: pct(count),
                            }
                        })
                        .collect(),
                    unlabeled: unlabeled
                        .into_iter()
                        .map(|(reason, count)| {
                            let row = ConditionCount {
                                condition: format!("unlabeled:{reason}"),
                                count,
                                percent: pct(count),
                            };
                            (reason, row)
                        })
                        .collect(),
                }
            })
            .collect();
        Self {
            images: n,
            failed,
            categories,
        }
    }

    pub fn population(&self, category: Category, condition: &str) -> Option<&ConditionCount> {
        self.categories
            .iter()
            .find(|c| c.category == category)?
            .conditions
            .iter()
            .find(|c| c.condition == condition)
    }

    fn rows(&self) -> impl Iterator<Item = (Category, &ConditionCount)> {
        self.categories.iter().flat_map(|c| {
            c.conditions
                .iter()
                .chain(c.unlabeled.values())
                .map(move |row| (c.category, row))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,category,condition,count,percent\n");
        for (cat, row) in self.rows() {
            let axis = serde_json::to_value(cat.axis()).expect("axis serializes");
            writeln!(
                out,
                "{},{},{},{},{:.2}",
                axis.as_str().unwrap_or_default(),
                cat,
                row.condition,
                row.count,
                row.percent
            )
            .unwrap();
        }
        out
    }

    /// Axis / category / condition breakdown for reading in a terminal.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} images labeled, {} failed\n", self.images, self.failed);
        for axis in [Axis::Appearance, Axis::Scene, Axis::Geometry] {
            writeln!(out, "\n{}", axis.title()).unwrap();
            for c in self.categories.iter().filter(|c| c.category.axis() == axis) {
                writeln!(out, "  {}", c.category).unwrap();
                for row in c.conditions.iter().chain(c.unlabeled.values()) {
                    writeln!(out, "    {:<34} {:>7} {:>6.1}%", row.condition, row.count, row.percent).unwrap();
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{Background, Color, Illumination, Layout, Orientation, Perspective, Visibility};

    fn gray_image() -> RasterImage {
        RasterImage::from_rgb_fn(64, 48, |_, _| [128, 128, 128])
    }

    #[test]
    fn constant_gray_chain() {
        let r = label_image(&gray_image(), &[], None, &CalibrationProfile::shipped()).unwrap();
        assert_eq!(r.visibility.label(), Some(Visibility::Low));
        assert_eq!(r.metrics.normalized.visibility_score, 0.0);
        assert_eq!(r.illumination.label(), Some(Illumination::Medium));
        assert_eq!(r.metrics.raw.median_luminance, 128.0);
        assert_eq!(r.color.label(), Some(Color::Natural));
        assert_eq!(r.layout.label(), Some(Layout::Sparse));
        assert_eq!(r.scale, Assignment::unlabeled(reason::NO_OBJECTS));
        assert_eq!(r.background.label(), Some(Background::Simple));
        assert_eq!(r.orientation, Assignment::unlabeled(reason::NO_DEPTH));
        assert_eq!(r.perspective, Assignment::unlabeled(reason::NO_DEPTH));
    }

    #[test]
    fn constant_depth_is_upright_nadir() {
        let d = DepthMap::from_fn(64, 48, |_, _| 1.0).unwrap();
        let r = label_image(&gray_image(), &[], Some(&d), &CalibrationProfile::shipped()).unwrap();
        assert_eq!(r.orientation.label(), Some(Orientation::Upright));
        assert_eq!(r.perspective.label(), Some(Perspective::Nadir));
    }

    #[test]
    fn covered_image_excludes_background() {
        let b = BoundingBox::new(0.0, 0.0, 64.0, 48.0, 1);
        let r = label_image(&gray_image(), &[b], None, &CalibrationProfile::shipped()).unwrap();
        assert_eq!(r.background, Assignment::unlabeled(reason::BACKGROUND_TOO_SMALL));
        assert_eq!(r.metrics.raw.keypoint_density, None);
    }

    #[test]
    fn summary_percentages() {
        let base = label_image(&gray_image(), &[], None, &CalibrationProfile::shipped()).unwrap();
        let records: Vec<_> = [Visibility::Low, Visibility::Low, Visibility::High, Visibility::Moderate]
            .into_iter()
            .map(|v| DomainLabelRecord {
                visibility: Assignment::Labeled(v),
                ..base.clone()
            })
            .collect();
        let s = Summary::from_records(&records, 0);
        let pct = |c| s.population(Category::Visibility, c).unwrap().percent;
        assert_eq!((pct("low"), pct("moderate"), pct("high")), (50.0, 25.0, 25.0));
        for c in &s.categories {
            let total: f64 = c.conditions.iter().chain(c.unlabeled.values()).map(|r| r.percent).sum();
            assert!((total - 100.0).abs() < 1e-9);
        }
        assert!(s.to_csv().contains("appearance,visibility,low,2,50.00"));
    }
}
