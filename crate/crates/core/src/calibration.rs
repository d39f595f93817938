//! Calibration profile, corpus statistics, normalization fitting and
//! agreement scoring against manually labeled images.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::labels::{Category, DomainLabelRecord, MetricVector};
use crate::vision::CannyParams;

/// Raw metrics that pass through clipped min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKey {
    Tenengrad,
    LaplacianVar,
    RmsContrast,
    FreqEnergy,
    KeypointDensity,
    EdgeDensity,
    LaplacianMean,
}

impl MetricKey {
    pub const ALL: [MetricKey; 7] = [
        MetricKey::Tenengrad,
        MetricKey::LaplacianVar,
        MetricKey::RmsContrast,
        MetricKey::FreqEnergy,
        MetricKey::KeypointDensity,
        MetricKey::EdgeDensity,
        MetricKey::LaplacianMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKey::Tenengrad => "tenengrad",
            MetricKey::LaplacianVar => "laplacian_var",
            MetricKey::RmsContrast => "rms_contrast",
            MetricKey::FreqEnergy => "freq_energy",
            MetricKey::KeypointDensity => "keypoint_density",
            MetricKey::EdgeDensity => "edge_density",
            MetricKey::LaplacianMean => "laplacian_mean",
        }
    }

    /// Heavy-tailed energy and count statistics are log1p-scaled by default.
    pub fn default_log_transform(self) -> bool {
        !matches!(self, MetricKey::RmsContrast | MetricKey::EdgeDensity)
    }

    pub fn from_raw(self, m: &MetricVector) -> Option<f64> {
        let r = &m.raw;
        match self {
            MetricKey::Tenengrad => Some(r.tenengrad),
            MetricKey::LaplacianVar => Some(r.laplacian_var),
            MetricKey::RmsContrast => Some(r.rms_contrast),
            MetricKey::FreqEnergy => Some(r.freq_energy),
            MetricKey::KeypointDensity => r.keypoint_density,
            MetricKey::EdgeDensity => r.edge_density,
            MetricKey::LaplacianMean => r.laplacian_mean,
        }
    }
}

impl fmt::Display for MetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Clipped min-max normalization for one raw metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub log_transform: bool,
    pub clip_lo: f64,
    pub clip_hi: f64,
    /// Set when the corpus had no spread; such entries map everything to 0.
    #[serde(default)]
    pub degenerate: bool,
}

impl NormEntry {
    pub fn new(log_transform: bool, clip_lo: f64, clip_hi: f64) -> Self {
        Self {
            log_transform,
            clip_lo,
            clip_hi,
            degenerate: false,
        }
    }

    pub fn identity() -> Self {
        Self::new(false, 0.0, 1.0)
    }

    pub fn apply(&self, raw: f64) -> f64 {
        apply_normalization(raw, self)
    }
}

/// Optional log1p, clamp to `[clip_lo, clip_hi]`, then map linearly to `[0, 1]`.
pub fn apply_normalization(raw: f64, entry: &NormEntry) -> f64 {
    if entry.degenerate || !(entry.clip_hi > entry.clip_lo) {
        return 0.0;
    }
    let x = if entry.log_transform { raw.ln_1p() } else { raw };
    if x.is_nan() {
        return 0.0;
    }
    let x = x.clamp(entry.clip_lo, entry.clip_hi);
    ((x - entry.clip_lo) / (entry.clip_hi - entry.clip_lo)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityThresholds {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationThresholds {
    pub dark: f64,
    pub bright: f64,
    pub l_over: f64,
    pub l_under: f64,
    pub extreme_under: f64,
    pub extreme_over: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorThresholds {
    pub distortion: f64,
    pub green_bgr: f64,
    pub blue_bgr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutThresholds {
    pub sparse_max_count: usize,
    pub crowded_min_count: usize,
    pub sparse_coverage: f64,
    pub crowded_coverage: f64,
    pub sparse_overlap: f64,
    pub crowded_overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleThresholds {
    pub small_area: f64,
    pub large_area: f64,
    pub dominant_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundThresholds {
    pub simple: f64,
    pub complex: f64,
    /// Minimum background fraction of the image for the category to be scored.
    pub min_background_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationThresholds {
    pub upright: f64,
    pub rotated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveThresholds {
    pub nadir_delta_tb: f64,
    pub nadir_range: f64,
    pub front_delta_tb: f64,
    pub front_range: f64,
    pub front_brightness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    /// Tenengrad, Laplacian variance, RMS contrast, high-frequency energy.
    pub visibility: [f64; 4],
    /// Keypoint density, edge density, mean absolute Laplacian.
    pub background: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Multiplier applied to every depth value at load time.
    pub depth_scale: f64,
    /// 16-bit PNG depth files store `depth * depth_png_scale`.
    pub depth_png_scale: f64,
    /// Left/top regions cover `[0, split)`; right/bottom mirror them.
    pub split_fraction: f64,
    pub min_region_pixels: usize,
    pub trim_depth_range: bool,
    pub trim_lo: f64,
    pub trim_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub fast_threshold: f64,
    pub freq_cutoff: f64,
}

impl OperatorParams {
    pub fn canny(&self) -> CannyParams {
        CannyParams {
            sigma: self.canny_sigma,
            low: self.canny_low,
            high: self.canny_high,
        }
    }
}

/// Every tunable that affects a domain label. Immutable once built; the
/// content hash ([`CalibrationProfile::profile_id`]) identifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    #[serde(default)]
    pub note: String,
    pub normalization: BTreeMap<MetricKey, NormEntry>,
    pub visibility: VisibilityThresholds,
    pub illumination: IlluminationThresholds,
    pub color: ColorThresholds,
    pub layout: LayoutThresholds,
    pub scale: ScaleThresholds,
    pub background: BackgroundThresholds,
    pub orientation: OrientationThresholds,
    pub perspective: PerspectiveThresholds,
    pub weights: ScoreWeights,
    pub geometry: GeometryParams,
    pub operators: OperatorParams,
    pub max_failure_fraction: f64,
}

pub const PROFILE_SCHEMA: &str = "domainscope-profile/v1";

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    schema: String,
    #[serde(default)]
    profile_id: String,
    #[serde(flatten)]
    profile: CalibrationProfile,
}

const SHIPPED_PROFILE: &str = include_str!("../../../profiles/default.json");

impl CalibrationProfile {
    /// Category thresholds and weights at their published values, with the
    /// given normalization entries.
    pub fn with_normalization(normalization: BTreeMap<MetricKey, NormEntry>) -> Self {
        Self {
            note: String::new(),
            normalization,
            visibility: VisibilityThresholds { low: 0.35, high: 0.65 },
            illumination: IlluminationThresholds {
                dark: 100.0,
                bright: 130.0,
                l_over: 225.0,
                l_under: 30.0,
                extreme_under: 0.5,
                extreme_over: 0.5,
            },
            color: ColorThresholds {
                distortion: 0.6,
                green_bgr: 0.7,
                blue_bgr: 0.8,
            },
            layout: LayoutThresholds {
                sparse_max_count: 4,
                crowded_min_count: 12,
                sparse_coverage: 0.05,
                crowded_coverage: 0.4,
                sparse_overlap: 0.05,
                crowded_overlap: 0.15,
            },
            scale: ScaleThresholds {
                small_area: 0.005,
                large_area: 0.025,
                dominant_ratio: 0.5,
            },
            background: BackgroundThresholds {
                simple: 0.15,
                complex: 0.4,
                min_background_fraction: 0.01,
            },
            orientation: OrientationThresholds {
                upright: 1.0,
                rotated: 2.5,
            },
            perspective: PerspectiveThresholds {
                nadir_delta_tb: 2.0,
                nadir_range: 3.0,
                front_delta_tb: 4.0,
                front_range: 5.0,
                front_brightness: 50.0,
            },
            weights: ScoreWeights {
                visibility: [0.35, 0.30, 0.20, 0.15],
                background: [0.45, 0.35, 0.20],
            },
            geometry: GeometryParams {
                depth_scale: 1.0,
                depth_png_scale: 1000.0,
                split_fraction: 0.5,
                min_region_pixels: 100,
                trim_depth_range: true,
                trim_lo: 0.02,
                trim_hi: 0.98,
            },
            operators: OperatorParams {
                canny_sigma: 1.4,
                canny_low: 50.0,
                canny_high: 150.0,
                fast_threshold: 20.0,
                freq_cutoff: 0.25,
            },
            max_failure_fraction: 0.05,
        }
    }

    /// Every metric passes through unchanged (`[0, 1]` clip, no log).
    pub fn identity() -> Self {
        let norm = MetricKey::ALL
            .into_iter()
            .map(|k| (k, NormEntry::identity()))
            .collect();
        Self::with_normalization(norm)
    }

    /// The checked-in profile under `profiles/default.json`. Its clip bounds
    /// come from a synthetic validation corpus and are not canonical.
    pub fn shipped() -> Self {
        Self::from_json_str(SHIPPED_PROFILE).expect("shipped profile is valid")
    }

    pub fn norm(&self, key: MetricKey) -> Result<&NormEntry> {
        self.normalization
            .get(&key)
            .ok_or(Error::MissingNormalization(key))
    }

    /// Hex SHA-256 prefix of the canonical JSON serialization.
    pub fn profile_id(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("profile serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (key, e) in &self.normalization {
            if !e.clip_lo.is_finite() || !e.clip_hi.is_finite() {
                problems.push(format!("{key}: clip bounds must be finite"));
            } else if !e.degenerate && !(e.clip_lo < e.clip_hi) {
                problems.push(format!("{key}: clip_lo {} >= clip_hi {}", e.clip_lo, e.clip_hi));
            }
        }
        let check_weights = |name: &str, w: &[f64], problems: &mut Vec<String>| {
            if w.iter().any(|v| !(*v >= 0.0)) {
                problems.push(format!("{name} weights must be nonnegative"));
            }
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                problems.push(format!("{name} weights sum to {s}, expected 1"));
            }
        };
        check_weights("visibility", &self.weights.visibility, &mut problems);
        check_weights("background", &self.weights.background, &mut problems);

        let mut ordered = |name: &str, lo: f64, hi: f64| {
            if !(lo < hi) {
                problems.push(format!("{name}: {lo} must be below {hi}"));
            }
        };
        ordered("visibility", self.visibility.low, self.visibility.high);
        ordered("illumination", self.illumination.dark, self.illumination.bright);
        ordered("exposure", self.illumination.l_under, self.illumination.l_over);
        ordered("color bgr", self.color.green_bgr, self.color.blue_bgr);
        ordered(
            "layout count",
            self.layout.sparse_max_count as f64,
            self.layout.crowded_min_count as f64,
        );
        ordered("layout coverage", self.layout.sparse_coverage, self.layout.crowded_coverage);
        ordered("layout overlap", self.layout.sparse_overlap, self.layout.crowded_overlap);
        ordered("scale area", self.scale.small_area, self.scale.large_area);
        ordered("background", self.background.simple, self.background.complex);
        ordered("orientation", self.orientation.upright, self.orientation.rotated);
        ordered(
            "perspective delta_tb",
            self.perspective.nadir_delta_tb,
            self.perspective.front_delta_tb,
        );
        ordered("perspective range", self.perspective.nadir_range, self.perspective.front_range);
        ordered("canny thresholds", self.operators.canny_low, self.operators.canny_high);
        ordered("depth trim", self.geometry.trim_lo, self.geometry.trim_hi);
        if !(self.operators.canny_low > 0.0) {
            problems.push("canny_low must be positive".into());
        }
        if !(self.operators.freq_cutoff > 0.0 && self.operators.freq_cutoff < 1.0) {
            problems.push("freq_cutoff must lie in (0, 1)".into());
        }
        if !(self.geometry.split_fraction > 0.0 && self.geometry.split_fraction <= 0.5) {
            problems.push("split_fraction must lie in (0, 0.5]".into());
        }
        if !(self.geometry.depth_scale > 0.0 && self.geometry.depth_png_scale > 0.0) {
            problems.push("depth scales must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            problems.push("max_failure_fraction must lie in [0, 1]".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Profile(problems.join("; ")))
        }
    }

    pub fn to_json_string(&self) -> String {
        let file = ProfileFile {
            schema: PROFILE_SCHEMA.into(),
            profile_id: self.profile_id(),
            profile: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("profile serializes") + "\n"
    }

    /// Parses and validates a profile document. A stored `profile_id` is
    /// ignored; the id is always recomputed from content.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ProfileFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::parse("<profile>", e))?;
        Self::from_file_struct(file)
    }

    fn from_file_struct(file: ProfileFile) -> Result<Self> {
        if file.schema != PROFILE_SCHEMA {
            return Err(Error::Profile(format!(
                "unsupported profile schema `{}`",
                file.schema
            )));
        }
        file.profile.validate()?;
        Ok(file.profile)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let file: ProfileFile =
            serde_path_to_error::deserialize(de).map_err(|e| Error::parse(path, e))?;
        Self::from_file_struct(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::dataset::write_atomic(path, self.to_json_string().as_bytes())
    }
}

/// Percentile by lower nearest rank: index `floor(q * (n - 1))` of the sorted
/// values. `q = 0.5` is the lower median.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let idx = (q * (sorted.len() - 1) as f64 + 1e-9).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

pub const HISTOGRAM_BINS: usize = 256;
pub const DEFAULT_RETENTION: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p1: f64,
    pub p2: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p98: f64,
    pub p99: f64,
}

impl Percentiles {
    fn from_sorted(sorted: &[f64]) -> Self {
        Self {
            p1: percentile(sorted, 0.01),
            p2: percentile(sorted, 0.02),
            p25: percentile(sorted, 0.25),
            p50: percentile(sorted, 0.50),
            p75: percentile(sorted, 0.75),
            p98: percentile(sorted, 0.98),
            p99: percentile(sorted, 0.99),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            p1: f(self.p1),
            p2: f(self.p2),
            p25: f(self.p25),
            p50: f(self.p50),
            p75: f(self.p75),
            p98: f(self.p98),
            p99: f(self.p99),
        }
    }
}

/// Summary of one metric over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Equal-width bins over `[min, max]`.
    pub histogram: Vec<u64>,
    pub percentiles: Percentiles,
}

impl CorpusStats {
    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / HISTOGRAM_BINS as f64
    }
}

/// Streaming accumulator for one metric. Keeps every sample up to the
/// retention cap, then switches to reservoir sampling. Accumulators built
/// on disjoint chunks combine with [`StatsAccumulator::merge`].
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    retained: Vec<f64>,
    seen: u64,
    min: f64,
    max: f64,
    sum: f64,
    cap: usize,
    rng: ChaCha8Rng,
}

impl Default for StatsAccumulator {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_RETENTION)
    }
}

impl StatsAccumulator {
    pub fn with_capacity(cap: usize) -> Self {
        assert!(cap > 0);
        Self {
            retained: Vec::new(),
            seen: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            cap,
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
        }
    }

    pub fn push(&mut self, v: f64) {
        self.seen += 1;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.sum += v;
        if self.retained.len() < self.cap {
            self.retained.push(v);
        } else {
            let j = self.rng.gen_range(0..self.seen);
            if (j as usize) < self.cap {
                self.retained[j as usize] = v;
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.seen
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        let total = self.seen + other.seen;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.sum += other.sum;
        if self.retained.len() + other.retained.len() <= self.cap {
            self.retained.extend_from_slice(&other.retained);
        } else {
            // Keep each side in proportion to how many samples it has seen.
            let take_self = ((self.cap as f64) * self.seen as f64 / total as f64).round() as usize;
            let take_self = take_self.min(self.retained.len());
            let take_other = (self.cap - take_self).min(other.retained.len());
            self.retained.shuffle(&mut self.rng);
            self.retained.truncate(take_self);
            let mut theirs = other.retained.clone();
            theirs.shuffle(&mut self.rng);
            self.retained.extend_from_slice(&theirs[..take_other]);
        }
        self.seen = total;
    }

    pub fn finish(&self) -> Result<CorpusStats> {
        if self.seen < 2 {
            return Err(Error::InvalidInput(format!(
                "corpus statistics need at least 2 samples, got {}",
                self.seen
            )));
        }
        let mut sorted = self.retained.clone();
        sorted.sort_by(f64::total_cmp);
        let mut histogram = vec![0u64; HISTOGRAM_BINS];
        let span = self.max - self.min;
        for v in &sorted {
            let bin = if span > 0.0 {
                (((v - self.min) / span) * HISTOGRAM_BINS as f64) as usize
            } else {
                0
            };
            histogram[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        if sorted.len() as u64 != self.seen {
            histogram = rescale_counts(&histogram, self.seen);
        }
        Ok(CorpusStats {
            count: self.seen,
            min: self.min,
            max: self.max,
            mean: self.sum / self.seen as f64,
            histogram,
            percentiles: Percentiles::from_sorted(&sorted),
        })
    }
}

/// Scales sampled bin counts up to `total` by largest remainder.
fn rescale_counts(counts: &[u64], total: u64) -> Vec<u64> {
    let n: u64 = counts.iter().sum();
    let exact: Vec<f64> = counts
        .iter()
        .map(|c| *c as f64 * total as f64 / n as f64)
        .collect();
    let mut out: Vec<u64> = exact.iter().map(|v| v.floor() as u64).collect();
    let mut short = total - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|a, b| {
        let ra = exact[*a] - exact[*a].floor();
        let rb = exact[*b] - exact[*b].floor();
        rb.total_cmp(&ra).then(a.cmp(b))
    });
    for i in order {
        if short == 0 {
            break;
        }
        out[i] += 1;
        short -= 1;
    }
    out
}

/// One sample: whatever subset of raw metrics an image produced.
pub type MetricSample = BTreeMap<MetricKey, f64>;

/// Per-metric accumulators over a stream of samples.
#[derive(Debug, Clone, Default)]
pub struct CorpusAccumulator {
    metrics: BTreeMap<MetricKey, StatsAccumulator>,
}

impl CorpusAccumulator {
    pub fn push(&mut self, sample: &MetricSample) {
        for (k, v) in sample {
            self.metrics.entry(*k).or_default().push(*v);
        }
    }

    pub fn merge(&mut self, other: &CorpusAccumulator) {
        for (k, acc) in &other.metrics {
            self.metrics.entry(*k).or_default().merge(acc);
        }
    }

    pub fn finish(&self, required: &[MetricKey]) -> Result<BTreeMap<MetricKey, CorpusStats>> {
        let mut out = BTreeMap::new();
        for key in required {
            let acc = self.metrics.get(key).ok_or_else(|| {
                Error::InvalidInput(format!("no samples for metric `{key}`"))
            })?;
            let stats = acc
                .finish()
                .map_err(|e| Error::InvalidInput(format!("metric `{key}`: {e}")))?;
            out.insert(*key, stats);
        }
        for (key, acc) in &self.metrics {
            if !out.contains_key(key) && acc.count() >= 2 {
                out.insert(*key, acc.finish()?);
            }
        }
        Ok(out)
    }
}

/// Collects per-metric statistics over a sample stream.
pub fn collect_stats<'a>(
    samples: impl IntoIterator<Item = &'a MetricSample>,
    required: &[MetricKey],
) -> Result<BTreeMap<MetricKey, CorpusStats>> {
    let mut acc = CorpusAccumulator::default();
    for s in samples {
        acc.push(s);
    }
    acc.finish(required)
}

/// Clip bounds at p1/p99 of the (optionally log1p-scaled) distribution.
/// log1p is monotone, so the nearest-rank percentiles transform exactly.
pub fn fit_normalization(stats: &CorpusStats, log_transform: bool) -> NormEntry {
    let p = if log_transform {
        stats.percentiles.map(f64::ln_1p)
    } else {
        stats.percentiles.clone()
    };
    if p.p99 > p.p1 {
        NormEntry::new(log_transform, p.p1, p.p99)
    } else {
        NormEntry {
            log_transform,
            clip_lo: p.p1,
            clip_hi: p.p1,
            degenerate: true,
        }
    }
}

/// Raw values of every normalized metric the record defines.
pub fn metric_sample(m: &MetricVector) -> MetricSample {
    MetricKey::ALL
        .into_iter()
        .filter_map(|k| k.from_raw(m).map(|v| (k, v)))
        .collect()
}

/// Metrics every corpus must provide; the background ones are optional
/// because fully covered images have none.
pub const REQUIRED_METRICS: [MetricKey; 4] = [
    MetricKey::Tenengrad,
    MetricKey::LaplacianVar,
    MetricKey::RmsContrast,
    MetricKey::FreqEnergy,
];

/// `base` with normalization refitted to `stats` using each metric's default
/// log setting. Metrics missing from `stats` keep the base entry.
pub fn fit_profile(base: &CalibrationProfile, stats: &BTreeMap<MetricKey, CorpusStats>) -> CalibrationProfile {
    let mut profile = base.clone();
    for key in MetricKey::ALL {
        if let Some(s) = stats.get(&key) {
            profile
                .normalization
                .insert(key, fit_normalization(s, key.default_log_transform()));
        }
    }
    profile
}

/// Manual labels for one image: any subset of categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualLabels {
    pub image_id: u64,
    #[serde(flatten)]
    pub labels: BTreeMap<Category, String>,
}

/// Reads manual labels from JSON Lines (one object per line).
pub fn load_manual_labels(path: &Path) -> Result<Vec<ManualLabels>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(line);
        let rec: ManualLabels = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut err = Error::parse(path, e);
            if let Error::Parse { line, .. } = &mut err {
                *line = n + 1;
            }
            err
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAgreement {
    pub category: Category,
    pub conditions: Vec<String>,
    /// `matrix[manual][auto]` counts over images labeled by both sides.
    pub matrix: Vec<Vec<u64>>,
    pub total: u64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub images: usize,
    pub categories: Vec<CategoryAgreement>,
}

/// Confusion matrices of automatic labels against manual ones, per category.
/// Images unlabeled on either side are left out of that category.
pub fn agreement_report(auto: &[DomainLabelRecord], manual: &[ManualLabels]) -> Result<AgreementReport> {
    if manual.is_empty() {
        return Err(Error::InvalidInput("manual label set is empty".into()));
    }
    let by_id: BTreeMap<u64, &DomainLabelRecord> = auto.iter().map(|r| (r.image_id, r)).collect();
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    for m in manual {
        if !by_id.contains_key(&m.image_id) {
            problems.push(format!("manual image_id {} has no automatic label", m.image_id));
        }
        if !seen.insert(m.image_id) {
            problems.push(format!("manual image_id {} listed twice", m.image_id));
        }
        for (cat, cond) in &m.labels {
            if !cat.conditions().contains(&cond.as_str()) {
                problems.push(format!(
                    "image {}: `{cond}` is not a {cat} condition",
                    m.image_id
                ));
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::validation("<manual labels>", problems));
    }

    let categories = Category::ALL
        .into_iter()
        .map(|cat| {
            let names = cat.conditions();
            let k = names.len();
            let mut matrix = vec![vec![0u64; k]; k];
            let mut total = 0;
            for m in manual {
                let Some(want) = m.labels.get(&cat) else { continue };
                let Ok(got) = by_id[&m.image_id].condition(cat) else { continue };
                let i = names.iter().position(|n| n == want).expect("validated");
                let j = names.iter().position(|n| *n == got).expect("known condition");
                matrix[i][j] += 1;
                total += 1;
            }
            let trace: u64 = (0..k).map(|i| matrix[i][i]).sum();
            CategoryAgreement {
                category: cat,
                conditions: names.iter().map(|s| s.to_string()).collect(),
                matrix,
                total,
                accuracy: (total > 0).then(|| trace as f64 / total as f64),
            }
        })
        .collect();
    Ok(AgreementReport {
        images: manual.len(),
        categories,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub below: usize,
    pub at_or_above: usize,
}

/// Population on each side of a moving threshold, for recalibration by eye.
/// Records where `metric` yields `None` are skipped.
pub fn threshold_sweep(
    records: &[DomainLabelRecord],
    metric: impl Fn(&MetricVector) -> Option<f64>,
    thresholds: &[f64],
) -> Vec<SweepPoint> {
    let values: Vec<f64> = records.iter().filter_map(|r| metric(&r.metrics)).collect();
    thresholds
        .iter()
        .map(|&t| {
            let below = values.iter().filter(|v| **v < t).count();
            SweepPoint {
                threshold: t,
                below,
                at_or_above: values.len() - below,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_of(values: impl IntoIterator<Item = f64>) -> CorpusStats {
        let mut acc = StatsAccumulator::default();
        for v in values {
            acc.push(v);
        }
        acc.finish().unwrap()
    }

    #[test]
    fn order_statistics_of_1_to_100() {
        let s = stats_of((1..=100).map(f64::from));
        assert_eq!(s.percentiles.p50, 50.0);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 100.0);
        assert_eq!(s.count, 100);
        assert_eq!(s.histogram.iter().sum::<u64>(), 100);
    }

    #[test]
    fn constant_corpus() {
        let s = stats_of(std::iter::repeat(4.5).take(10));
        let p = &s.percentiles;
        for v in [p.p1, p.p2, p.p25, p.p50, p.p75, p.p98, p.p99] {
            assert_eq!(v, 4.5);
        }
        let e = fit_normalization(&s, false);
        assert!(e.degenerate);
        assert_eq!(apply_normalization(4.5, &e), 0.0);
        assert_eq!(apply_normalization(1e9, &e), 0.0);
    }

    #[test]
    fn too_few_samples() {
        let mut acc = StatsAccumulator::default();
        acc.push(1.0);
        assert!(acc.finish().is_err());
    }

    #[test]
    fn merge_extremes() {
        let mut a = StatsAccumulator::default();
        let mut b = StatsAccumulator::default();
        (1..=50).for_each(|v| a.push(v as f64));
        (51..=100).for_each(|v| b.push(v as f64));
        a.merge(&b);
        let merged = a.finish().unwrap();
        let whole = stats_of((1..=100).map(f64::from));
        assert_eq!(merged.count, whole.count);
        assert_eq!(merged.min, whole.min);
        assert_eq!(merged.max, whole.max);
        assert_eq!(merged.percentiles, whole.percentiles);
    }

    #[test]
    fn reservoir_keeps_counts_exact() {
        let mut acc = StatsAccumulator::with_capacity(64);
        (0..1000).for_each(|v| acc.push(v as f64));
        let s = acc.finish().unwrap();
        assert_eq!(s.count, 1000);
        assert_eq!(s.histogram.iter().sum::<u64>(), 1000);
        assert_eq!(s.min, 0.0);
        assert_eq!(s.max, 999.0);
        // Uniform sample median stays near the middle.
        assert!((s.percentiles.p50 - 500.0).abs() < 200.0);
    }

    #[test]
    fn uniform_fit() {
        let s = stats_of((0..=1000).map(f64::from));
        let e = fit_normalization(&s, false);
        assert_eq!((e.clip_lo, e.clip_hi), (10.0, 990.0));
        assert_eq!(apply_normalization(10.0, &e), 0.0);
        assert_eq!(apply_normalization(990.0, &e), 1.0);
    }

    #[test]
    fn log_fit_heavy_tail() {
        let mut values = vec![0.0; 99];
        values.push(1e6);
        let s = stats_of(values.iter().copied());
        let e = fit_normalization(&s, true);
        // p1 = 0, p99 = index 98 = 0: the tail sits above p99.
        assert!(e.degenerate);
        let mut values: Vec<f64> = (0..98).map(|_| 0.0).collect();
        values.extend([1e6, 1e6]);
        let e = fit_normalization(&stats_of(values), true);
        assert_eq!(e.clip_lo, 0.0);
        assert_eq!(e.clip_hi, (1e6f64).ln_1p());
        assert_eq!(apply_normalization(1e6, &e), 1.0);
    }

    #[test]
    fn apply_examples() {
        let e = NormEntry::new(false, 0.0, 10.0);
        assert_eq!(apply_normalization(2.5, &e), 0.25);
        assert_eq!(apply_normalization(0.0, &e), 0.0);
        assert_eq!(apply_normalization(10.0, &e), 1.0);
        assert_eq!(apply_normalization(-3.0, &e), 0.0);
        assert_eq!(apply_normalization(30.0, &e), 1.0);
    }

    #[test]
    fn shipped_profile_is_valid() {
        let p = CalibrationProfile::shipped();
        p.validate().unwrap();
        for k in MetricKey::ALL {
            assert!(p.norm(k).is_ok(), "{k}");
        }
        assert_eq!(p.visibility.low, 0.35);
    }

    #[test]
    fn profile_round_trip_and_hash() {
        let p = CalibrationProfile::identity();
        let back = CalibrationProfile::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.profile_id(), p.profile_id());
        let mut q = p.clone();
        q.color.distortion = 0.61;
        assert_ne!(q.profile_id(), p.profile_id());
        let mut r = p.clone();
        r.normalization.get_mut(&MetricKey::Tenengrad).unwrap().clip_hi = 2.0;
        assert_ne!(r.profile_id(), p.profile_id());
    }

    #[test]
    fn profile_validation_catches_problems() {
        let mut p = CalibrationProfile::identity();
        p.weights.visibility = [0.5, 0.5, 0.5, 0.0];
        assert!(p.validate().is_err());
        let mut p = CalibrationProfile::identity();
        p.visibility.low = 0.7;
        assert!(p.validate().is_err());
        let mut p = CalibrationProfile::identity();
        p.normalization.insert(MetricKey::Tenengrad, NormEntry::new(true, 3.0, 3.0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn missing_entry_is_reported() {
        let mut p = CalibrationProfile::identity();
        p.normalization.remove(&MetricKey::FreqEnergy);
        assert!(matches!(
            p.norm(MetricKey::FreqEnergy),
            Err(Error::MissingNormalization(MetricKey::FreqEnergy))
        ));
    }

    #[test]
    fn manual_labels_parse() {
        let m: ManualLabels =
            serde_json::from_str(r#"{"image_id": 7, "visibility": "low", "color": "green"}"#).unwrap();
        assert_eq!(m.image_id, 7);
        assert_eq!(m.labels[&Category::Visibility], "low");
        assert_eq!(m.labels.len(), 2);
    }

    #[test]
    fn sweep_counts() {
        use crate::labels::*;
        let raw = RawMetrics {
            tenengrad: 0.0,
            laplacian_var: 0.0,
            rms_contrast: 0.0,
            freq_energy: 0.0,
            median_luminance: 0.0,
            overexposed_ratio: 0.0,
            underexposed_ratio: 0.0,
            mean_r: 0.0,
            mean_g: 0.0,
            mean_b: 0.0,
            color_distortion: 0.0,
            blue_green_ratio: 1.0,
            object_count: 0,
            coverage: 0.0,
            overlap: 0.0,
            mean_norm_area: None,
            small_ratio: None,
            large_ratio: None,
            keypoint_density: None,
            edge_density: None,
            laplacian_mean: None,
            delta_lr: None,
            delta_tb: None,
            depth_range: None,
            brightness_gradient: 0.0,
        };
        let make = |score: f64| DomainLabelRecord {
            schema: LABEL_SCHEMA.into(),
            image_id: 0,
            file_name: String::new(),
            profile_id: String::new(),
            visibility: Assignment::Labeled(Visibility::Low),
            illumination: Assignment::Labeled(Illumination::Medium),
            color: Assignment::Labeled(Color::Natural),
            layout: Assignment::Labeled(Layout::Sparse),
            scale: Assignment::unlabeled(reason::NO_OBJECTS),
            background: Assignment::Labeled(Background::Simple),
            orientation: Assignment::unlabeled(reason::NO_DEPTH),
            perspective: Assignment::unlabeled(reason::NO_DEPTH),
            metrics: MetricVector {
                raw: raw.clone(),
                normalized: NormalizedMetrics {
                    tenengrad: 0.0,
                    laplacian_var: 0.0,
                    rms_contrast: 0.0,
                    freq_energy: 0.0,
                    visibility_score: score,
                    keypoint_density: None,
                    edge_density: None,
                    laplacian_mean: None,
                    background_score: None,
                },
            },
        };
        let records: Vec<_> = [0.1, 0.3, 0.5, 0.9].into_iter().map(make).collect();
        let sweep = threshold_sweep(&records, |m| Some(m.normalized.visibility_score), &[0.35, 0.65]);
        assert_eq!((sweep[0].below, sweep[0].at_or_above), (2, 2));
        assert_eq!((sweep[1].below, sweep[1].at_or_above), (3, 1));
    }
}
