//! Detection matching, average precision, failure rates and the
//! domain-stratified report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_atomic, CategoryEntry, DatasetIndex, Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::labels::{Axis, Category, DomainLabelRecord};
use crate::scene::BoundingBox;

/// 0.50, 0.55, …, 0.95.
pub const IOU_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
/// IoU used for AP50, failure rates and the exported curves.
pub const FAILURE_IOU: f64 = 0.5;
/// Confidence of the fixed operating point for precision, recall, FP and FN.
pub const OPERATING_CONFIDENCE: f64 = 0.5;

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetOutcome {
    pub category_id: u64,
    pub confidence: f64,
    /// Index of the matched ground-truth box, `None` for a false positive.
    pub gt_index: Option<usize>,
}

/// Matching of one image at one IoU threshold. `detections` is in input
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub iou_thresh: f64,
    pub detections: Vec<DetOutcome>,
    pub gt_categories: Vec<u64>,
    pub gt_matched: Vec<bool>,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.detections.iter().filter(|d| d.gt_index.is_some()).count()
    }

    pub fn fp(&self) -> usize {
        self.detections.len() - self.tp()
    }

    pub fn fn_count(&self) -> usize {
        self.gt_matched.iter().filter(|m| !**m).count()
    }
}

/// Greedy matching: detections by confidence descending (ties by input
/// order), each taking the unmatched same-class ground truth with the
/// highest IoU at or above the threshold (ties by lower index).
pub fn match_detections(gts: &[BoundingBox], dets: &[Detection], iou_thresh: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    let mut gt_matched = vec![false; gts.len()];
    let mut detections: Vec<DetOutcome> = dets
        .iter()
        .map(|d| DetOutcome {
            category_id: d.bbox.category_id,
            confidence: d.confidence,
            gt_index: None,
        })
        .collect();
    for i in order {
        let det = &dets[i].bbox;
        let mut best: Option<(usize, f64)> = None;
        for (j, gt) in gts.iter().enumerate() {
            if gt_matched[j] || gt.category_id != det.category_id {
                continue;
            }
            let v = iou(det, gt);
            if v >= iou_thresh && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        if let Some((j, _)) = best {
            gt_matched[j] = true;
            detections[i].gt_index = Some(j);
        }
    }
    MatchResult {
        iou_thresh,
        detections,
        gt_categories: gts.iter().map(|g| g.category_id).collect(),
        gt_matched,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Exact area under the precision envelope.
    AllPoints,
    /// Envelope sampled at recall 0.00, 0.01, …, 1.00.
    #[default]
    Interp101,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub recall: f64,
    pub precision: f64,
    /// Highest precision at this recall or beyond.
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub category_id: u64,
    pub gt_count: usize,
    pub points: Vec<PrPoint>,
    pub ap: f64,
}

/// Builds the curve from `(confidence, is_true_positive)` pairs. Detections
/// with equal confidence form one step, so the curve does not depend on
/// their order. `None` when there is no ground truth.
pub fn pr_curve(scored: &[(f64, bool)], gt_count: usize, category_id: u64, mode: ApMode) -> Option<PrCurve> {
    if gt_count == 0 {
        return None;
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(conf, hit)) in sorted.iter().enumerate() {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        if sorted.get(i + 1).is_none_or(|next| next.0 != conf) {
            points.push(PrPoint {
                confidence: conf,
                recall: tp as f64 / gt_count as f64,
                precision: tp as f64 / (tp + fp) as f64,
                envelope: 0.0,
            });
        }
    }
    let mut best = 0.0f64;
    for p in points.iter_mut().rev() {
        best = best.max(p.precision);
        p.envelope = best;
    }
    let ap = match mode {
        ApMode::AllPoints => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for p in &points {
                area += (p.recall - prev) * p.envelope;
                prev = p.recall;
            }
            area
        }
        ApMode::Interp101 => {
            let sum: f64 = (0..=100)
                .map(|k| {
                    let r = k as f64 / 100.0;
                    points.iter().find(|p| p.recall >= r).map_or(0.0, |p| p.envelope)
                })
                .sum();
            sum / 101.0
        }
    };
    Some(PrCurve {
        category_id,
        gt_count,
        points,
        ap: ap.clamp(0.0, 1.0),
    })
}

/// Pools detections of one class across images.
pub fn compute_pr_curve<'a>(
    matches: impl IntoIterator<Item = &'a MatchResult>,
    category_id: u64,
    mode: ApMode,
) -> Option<PrCurve> {
    let (scored, gt_count) = pooled(matches, category_id);
    pr_curve(&scored, gt_count, category_id, mode)
}

fn pooled<'a>(matches: impl IntoIterator<Item = &'a MatchResult>, category_id: u64) -> (Vec<(f64, bool)>, usize) {
    let mut scored = Vec::new();
    let mut gt_count = 0;
    for m in matches {
        gt_count += m.gt_categories.iter().filter(|c| **c == category_id).count();
        scored.extend(
            m.detections
                .iter()
                .filter(|d| d.category_id == category_id)
                .map(|d| (d.confidence, d.gt_index.is_some())),
        );
    }
    (scored, gt_count)
}

/// Ground truth and detections of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalImage {
    pub image_id: u64,
    pub gts: Vec<BoundingBox>,
    pub dets: Vec<Detection>,
}

/// Evaluation images in dataset order.
pub fn eval_images(index: &DatasetIndex, dets: &DetectionSet) -> Vec<EvalImage> {
    index
        .images
        .iter()
        .map(|e| EvalImage {
            image_id: e.id,
            gts: index.boxes(e.id).to_vec(),
            dets: dets.for_image(e.id).to_vec(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub category_id: u64,
    pub gt_count: usize,
    pub detections: usize,
    /// `None` when the class has no ground truth in the image set.
    pub ap50: Option<f64>,
    pub ap50_95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub map50: Option<f64>,
    pub map50_95: Option<f64>,
    pub per_class: Vec<ClassAp>,
}

/// Matches for every image at every threshold in [`IOU_THRESHOLDS`].
struct MatchTable {
    rows: Vec<Vec<MatchResult>>,
}

impl MatchTable {
    fn new(images: &[EvalImage]) -> Self {
        let rows = images
            .par_iter()
            .map(|img| {
                IOU_THRESHOLDS
                    .iter()
                    .map(|t| match_detections(&img.gts, &img.dets, *t))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    fn at<'a>(&'a self, subset: &'a [usize], t: usize) -> impl Iterator<Item = &'a MatchResult> + 'a {
        subset.iter().map(move |&i| &self.rows[i][t])
    }

    fn map(&self, subset: &[usize], classes: &[u64], mode: ApMode) -> (MapResult, Vec<Option<PrCurve>>) {
        let mut per_class = Vec::new();
        let mut curves50 = Vec::new();
        for &c in classes {
            let curves: Vec<Option<PrCurve>> = (0..IOU_THRESHOLDS.len())
                .map(|t| compute_pr_curve(self.at(subset, t), c, mode))
                .collect();
            let (scored, gt_count) = pooled(self.at(subset, 0), c);
            let ap50 = curves[0].as_ref().map(|k| k.ap);
            let ap50_95 = ap50.map(|_| curves.iter().flatten().map(|k| k.ap).sum::<f64>() / IOU_THRESHOLDS.len() as f64);
            per_class.push(ClassAp {
                category_id: c,
                gt_count,
                detections: scored.len(),
                ap50,
                ap50_95,
            });
            curves50.push(curves.into_iter().next().flatten());
        }
        let mean = |f: fn(&ClassAp) -> Option<f64>| {
            let v: Vec<f64> = per_class.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let result = MapResult {
            map50: mean(|c| c.ap50),
            map50_95: mean(|c| c.ap50_95),
            per_class,
        };
        (result, curves50)
    }

    /// The greedy matcher visits detections at or above the operating
    /// confidence first, so its IoU-0.5 matches restricted to them equal a
    /// matching run on the filtered detections.
    fn operating_counts(&self, images: &[EvalImage], subset: &[usize]) -> FailureCounts {
        let mut counts = FailureCounts::default();
        for &i in subset {
            let m = &self.rows[i][0];
            counts.objects += images[i].gts.len();
            for d in m.detections.iter().filter(|d| d.confidence >= OPERATING_CONFIDENCE) {
                counts.detections += 1;
                if d.gt_index.is_some() {
                    counts.tp += 1;
                } else {
                    counts.fp += 1;
                }
            }
        }
        counts.fn_count = counts.objects - counts.tp;
        counts
    }
}

/// Per-class AP at IoU 0.5 and averaged over [`IOU_THRESHOLDS`]; class
/// means skip classes without ground truth.
pub fn compute_map(images: &[EvalImage], classes: &[u64], mode: ApMode) -> MapResult {
    let table = MatchTable::new(images);
    let all: Vec<usize> = (0..images.len()).collect();
    table.map(&all, classes, mode).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    pub objects: usize,
    /// Detections at or above the confidence threshold.
    pub detections: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
}

impl FailureCounts {
    pub fn fp_per_object(&self) -> Option<f64> {
        (self.objects > 0).then(|| self.fp as f64 / self.objects as f64)
    }

    pub fn fn_per_object(&self) -> Option<f64> {
        (self.objects > 0).then(|| self.fn_count as f64 / self.objects as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        (self.detections > 0).then(|| self.tp as f64 / self.detections as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.objects > 0).then(|| self.tp as f64 / self.objects as f64)
    }
}

/// FP and FN counts after dropping detections below `conf`.
pub fn failure_rates(images: &[EvalImage], iou_thresh: f64, conf: f64) -> FailureCounts {
    let mut counts = FailureCounts::default();
    for img in images {
        let kept: Vec<Detection> = img.dets.iter().copied().filter(|d| d.confidence >= conf).collect();
        let m = match_detections(&img.gts, &kept, iou_thresh);
        counts.objects += img.gts.len();
        counts.detections += kept.len();
        counts.tp += m.tp();
        counts.fp += m.fp();
        counts.fn_count += m.fn_count();
    }
    counts
}

/// Image ids per evaluated condition, in low-to-high order. Ordered
/// categories keep only their two endpoints; unlabeled images are left out.
pub fn stratify(records: &[DomainLabelRecord], category: Category) -> Vec<(&'static str, BTreeSet<u64>)> {
    category
        .evaluated_conditions()
        .into_iter()
        .map(|cond| {
            let ids = records
                .iter()
                .filter(|r| r.condition(category) == Ok(cond))
                .map(|r| r.image_id)
                .collect();
            (cond, ids)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Slight,
    Moderate,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

/// Relative change of a stratum metric against the mixed row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub percent: f64,
    pub strength: Strength,
    pub direction: Direction,
}

impl Change {
    /// Buckets: below 3% slight, 3% to 8% inclusive moderate, above 8%
    /// strong. `None` when the mixed value is zero and the stratum is not.
    pub fn classify(stratum: f64, mixed: f64) -> Option<Change> {
        let percent = if stratum == mixed {
            0.0
        } else if mixed == 0.0 {
            return None;
        } else {
            (stratum - mixed) / mixed * 100.0
        };
        let magnitude = percent.abs();
        let strength = if magnitude < 3.0 {
            Strength::Slight
        } else if magnitude <= 8.0 {
            Strength::Moderate
        } else {
            Strength::Strong
        };
        let direction = if percent > 0.0 {
            Direction::Up
        } else if percent < 0.0 {
            Direction::Down
        } else {
            Direction::Flat
        };
        Some(Change {
            percent,
            strength,
            direction,
        })
    }

    /// `^`/`v` repeated once to three times by strength, `=` for no change.
    pub fn arrow(&self) -> String {
        let n = match self.strength {
            Strength::Slight => 1,
            Strength::Moderate => 2,
            Strength::Strong => 3,
        };
        match self.direction {
            Direction::Up => "^".repeat(n),
            Direction::Down => "v".repeat(n),
            Direction::Flat => "=".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    pub map50: Option<f64>,
    pub map50_95: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fp_per_object: Option<f64>,
    pub fn_per_object: Option<f64>,
}

/// Metric names in report column order.
pub const ROW_METRICS: [&str; 6] = ["map50", "map50_95", "precision", "recall", "fp_per_object", "fn_per_object"];

impl RowMetrics {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.map50,
            self.map50_95,
            self.precision,
            self.recall,
            self.fp_per_object,
            self.fn_per_object,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `None` for the mixed row.
    pub category: Option<Category>,
    pub condition: String,
    pub images: usize,
    pub counts: FailureCounts,
    pub metrics: RowMetrics,
    /// Why the row has no metrics, if it has none.
    pub unscorable: Option<String>,
    pub per_class: Vec<ClassAp>,
    /// Change against the mixed row, aligned with [`ROW_METRICS`].
    pub changes: [Option<Change>; 6],
}

impl ReportRow {
    pub fn key(&self) -> String {
        match self.category {
            None => "mixed".into(),
            Some(c) => format!("{c}-{}", self.condition),
        }
    }

    pub fn label(&self) -> String {
        match self.category {
            None => "mixed".into(),
            Some(c) => format!("{c}: {}", self.condition),
        }
    }

    pub fn change(&self, metric: &str) -> Option<Change> {
        ROW_METRICS.iter().position(|m| *m == metric).and_then(|i| self.changes[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub mode: ApMode,
    pub iou_thresholds: Vec<f64>,
    pub failure_iou: f64,
    pub confidence: f64,
    pub classes: Vec<CategoryEntry>,
    /// Evaluation images with no label record; they appear only in mixed.
    pub unlabeled_images: usize,
    /// Mixed first, then the evaluated conditions in category order.
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone)]
pub struct StratumCurves {
    pub key: String,
    pub label: String,
    /// Aligned with the report's classes; `None` marks an absent class.
    pub curves: Vec<Option<PrCurve>>,
    pub detections: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: StratifiedReport,
    pub curves: Vec<StratumCurves>,
}

fn build_row(
    table: &MatchTable,
    images: &[EvalImage],
    subset: &[usize],
    classes: &[u64],
    mode: ApMode,
    category: Option<Category>,
    condition: &str,
) -> (ReportRow, Vec<Option<PrCurve>>) {
    let (map, curves) = table.map(subset, classes, mode);
    let counts = table.operating_counts(images, subset);
    let unscorable = if subset.is_empty() {
        Some("no_images".to_string())
    } else if counts.objects == 0 {
        Some("no_ground_truth".to_string())
    } else {
        None
    };
    let metrics = if unscorable.is_some() {
        RowMetrics {
            map50: None,
            map50_95: None,
            precision: None,
            recall: None,
            fp_per_object: None,
            fn_per_object: None,
        }
    } else {
        RowMetrics {
            map50: map.map50,
            map50_95: map.map50_95,
            precision: counts.precision(),
            recall: counts.recall(),
            fp_per_object: counts.fp_per_object(),
            fn_per_object: counts.fn_per_object(),
        }
    };
    let row = ReportRow {
        category,
        condition: condition.to_string(),
        images: subset.len(),
        counts,
        metrics,
        unscorable,
        per_class: map.per_class,
        changes: [None; 6],
    };
    (row, curves)
}

/// Mixed row over every evaluation image, then one row per evaluated
/// condition of each category.
pub fn build_report(
    records: &[DomainLabelRecord],
    images: &[EvalImage],
    classes: &[CategoryEntry],
    mode: ApMode,
) -> Evaluation {
    let table = MatchTable::new(images);
    let class_ids: Vec<u64> = classes.iter().map(|c| c.id).collect();
    let position: BTreeMap<u64, usize> = images.iter().enumerate().map(|(i, img)| (img.image_id, i)).collect();
    let labeled: BTreeSet<u64> = records.iter().map(|r| r.image_id).collect();
    let unlabeled_images = images.iter().filter(|i| !labeled.contains(&i.image_id)).count();

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut push = |row: ReportRow, c: Vec<Option<PrCurve>>| {
        curves.push(StratumCurves {
            key: row.key(),
            label: row.label(),
            detections: row.per_class.iter().map(|p| p.detections).collect(),
            curves: c,
        });
        rows.push(row);
    };

    let all: Vec<usize> = (0..images.len()).collect();
    let (mixed, c) = build_row(&table, images, &all, &class_ids, mode, None, "mixed");
    let mixed_values = mixed.metrics.values();
    push(mixed, c);
    for cat in Category::ALL {
        for (cond, ids) in stratify(records, cat) {
            let subset: Vec<usize> = ids.iter().filter_map(|id| position.get(id).copied()).collect();
            let mut subset = subset;
            subset.sort_unstable();
            let (mut row, c) = build_row(&table, images, &subset, &class_ids, mode, Some(cat), cond);
            let values = row.metrics.values();
            for k in 0..6 {
                row.changes[k] = match (values[k], mixed_values[k]) {
                    (Some(s), Some(m)) => Change::classify(s, m),
                    _ => None,
                };
            }
            push(row, c);
        }
    }
    Evaluation {
        report: StratifiedReport {
            mode,
            iou_thresholds: IOU_THRESHOLDS.to_vec(),
            failure_iou: FAILURE_IOU,
            confidence: OPERATING_CONFIDENCE,
            classes: classes.to_vec(),
            unlabeled_images,
            rows,
        },
        curves,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

fn fmt_cell(v: Option<f64>, change: Option<Change>, show_arrow: bool) -> String {
    match v {
        None => "n/a".into(),
        Some(v) => match change.filter(|_| show_arrow) {
            Some(c) => format!("{v:.3} {}", c.arrow()),
            None => format!("{v:.3}"),
        },
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

impl StratifiedReport {
    pub fn mixed(&self) -> &ReportRow {
        &self.rows[0]
    }

    pub fn row(&self, category: Category, condition: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.category == Some(category) && r.condition == condition)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["category", "condition", "images", "objects", "detections", "tp", "fp", "fn"]
            .map(String::from)
            .to_vec();
        h.extend(ROW_METRICS.iter().map(|m| m.to_string()));
        for m in ROW_METRICS {
            h.push(format!("{m}_change_pct"));
            h.push(format!("{m}_trend"));
        }
        h.push("unscorable".into());
        for c in &self.classes {
            h.push(format!("ap50_{}", sanitize(&c.name)));
        }
        h
    }

    /// Fixed leading columns, then per-metric change columns, then one AP50
    /// column per class in id order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.csv_header()).expect("in-memory csv");
        for r in &self.rows {
            let mut rec = vec![
                r.category.map_or_else(|| "mixed".to_string(), |c| c.to_string()),
                r.condition.clone(),
                r.images.to_string(),
                r.counts.objects.to_string(),
                r.counts.detections.to_string(),
                r.counts.tp.to_string(),
                r.counts.fp.to_string(),
                r.counts.fn_count.to_string(),
            ];
            rec.extend(r.metrics.values().iter().map(|v| fmt_opt(*v)));
            for c in &r.changes {
                match c {
                    Some(c) => {
                        rec.push(format!("{:.2}", c.percent));
                        rec.push(c.arrow());
                    }
                    None => {
                        rec.push(String::new());
                        rec.push(String::new());
                    }
                }
            }
            rec.push(r.unscorable.clone().unwrap_or_default());
            rec.extend(r.per_class.iter().map(|p| fmt_opt(p.ap50)));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    /// One line per row with trend arrows against mixed.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "AP mode {:?}, IoU 0.50:0.95, operating point IoU {} / confidence {}\n\n",
            self.mode, self.failure_iou, self.confidence
        );
        writeln!(
            out,
            "{:<26} {:>6} {:>7} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}",
            "condition", "images", "objects", "mAP50", "mAP50-95", "precision", "recall", "FP/object", "FN/object"
        )
        .unwrap();
        for r in &self.rows {
            let values = r.metrics.values();
            write!(out, "{:<26} {:>6} {:>7}", r.label(), r.images, r.counts.objects).unwrap();
            for k in 0..6 {
                write!(out, " {:>13}", fmt_cell(values[k], r.changes[k], true)).unwrap();
            }
            if let Some(why) = &r.unscorable {
                write!(out, "  ({why})").unwrap();
            }
            out.push('\n');
        }
        if self.unlabeled_images > 0 {
            writeln!(out, "\n{} images without labels are counted in mixed only", self.unlabeled_images).unwrap();
        }
        out
    }

    /// Conditions as columns grouped by axis, metrics as rows.
    pub fn to_markdown(&self) -> String {
        let rows: Vec<&ReportRow> = self.rows.iter().collect();
        let mut out = String::from("| metric |");
        for r in &rows {
            write!(out, " {} |", r.label()).unwrap();
        }
        out.push_str("\n|---|");
        for _ in &rows {
            out.push_str("---|");
        }
        out.push_str("\n| axis |");
        let mut last: Option<Axis> = None;
        for r in &rows {
            let cell = match r.category.map(Category::axis) {
                None => "",
                Some(a) if last == Some(a) => "",
                Some(a) => {
                    last = Some(a);
                    a.title()
                }
            };
            write!(out, " {cell} |").unwrap();
        }
        out.push('\n');
        let names = ["mAP50", "mAP50-95", "precision", "recall", "FP/object", "FN/object"];
        for (k, name) in names.iter().enumerate() {
            write!(out, "| {name} |").unwrap();
            for r in &rows {
                write!(out, " {} |", fmt_cell(r.metrics.values()[k], r.changes[k], r.category.is_some())).unwrap();
            }
            out.push('\n');
        }
        for (ci, class) in self.classes.iter().enumerate() {
            write!(out, "| AP50 {} |", class.name).unwrap();
            for r in &rows {
                write!(out, " {} |", fmt_cell(r.per_class.get(ci).and_then(|p| p.ap50), None, false)).unwrap();
            }
            out.push('\n');
        }
        write!(out, "| images |").unwrap();
        for r in &rows {
            write!(out, " {} |", r.images).unwrap();
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub stratum: String,
    pub category_id: u64,
    pub class_name: String,
    pub gt_instances: usize,
    pub detections: usize,
    /// Relative path of the CSV, absent for classes without ground truth.
    pub file: Option<String>,
}

/// One CSV per stratum and class under `out_dir/<stratum>/`, plus
/// `out_dir/manifest.json` listing every file and every absent class.
pub fn export_pr_curves(eval: &Evaluation, out_dir: &Path) -> Result<Vec<CurveEntry>> {
    let mut entries = Vec::new();
    for s in &eval.curves {
        let dir = out_dir.join(&s.key);
        for (ci, class) in eval.report.classes.iter().enumerate() {
            let curve = s.curves.get(ci).cloned().flatten();
            let mut entry = CurveEntry {
                stratum: s.key.clone(),
                category_id: class.id,
                class_name: class.name.clone(),
                gt_instances: curve.as_ref().map_or(0, |c| c.gt_count),
                detections: s.detections.get(ci).copied().unwrap_or(0),
                file: None,
            };
            if let Some(curve) = curve {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let rel: PathBuf = [s.key.clone(), format!("class_{}_{}.csv", class.id, sanitize(&class.name))]
                    .iter()
                    .collect();
                write_atomic(&out_dir.join(&rel), pr_curve_csv(&curve, &s.label, &class.name).as_bytes())?;
                entry.file = Some(rel.to_string_lossy().replace('\\', "/"));
            }
            entries.push(entry);
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest = serde_json::to_string_pretty(&entries).expect("curve manifest serializes");
    write_atomic(&out_dir.join("manifest.json"), manifest.as_bytes())?;
    Ok(entries)
}

/// `# ...` header line with the ground-truth support, then
/// `recall,precision,envelope,confidence` rows.
pub fn pr_curve_csv(curve: &PrCurve, stratum: &str, class_name: &str) -> String {
    let mut out = format!(
        "# stratum={stratum} class={class_name} category_id={} iou={FAILURE_IOU} gt_instances={} ap={:.6}\n",
        curve.category_id, curve.gt_count, curve.ap
    );
    out.push_str("recall,precision,envelope,confidence\n");
    for p in &curve.points {
        writeln!(out, "{},{},{},{}", p.recall, p.precision, p.envelope, p.confidence).unwrap();
    }
    out
}
