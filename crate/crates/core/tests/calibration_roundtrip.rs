use std::collections::BTreeMap;

use domainscope_core::calibration::{
    apply_normalization, collect_stats, fit_normalization, fit_profile, MetricSample, StatsAccumulator,
};
use domainscope_core::{CalibrationProfile, MetricKey};
use proptest::prelude::*;

/// 10 000 evenly spaced values on [0, 100).
fn uniform() -> Vec<f64> {
    (0..10_000).map(|i| i as f64 / 100.0).collect()
}

fn naive_percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(q * (v.len() - 1) as f64).floor() as usize]
}

#[test]
fn uniform_fixture_clips_at_first_and_last_percentile() {
    let values = uniform();
    let mut acc = StatsAccumulator::default();
    for v in &values {
        acc.push(*v);
    }
    let stats = acc.finish().unwrap();
    let entry = fit_normalization(&stats, false);
    let bin = stats.bin_width();
    assert!((entry.clip_lo - 1.0).abs() <= bin, "{}", entry.clip_lo);
    assert!((entry.clip_hi - 99.0).abs() <= bin, "{}", entry.clip_hi);
    assert_eq!(entry.clip_lo, naive_percentile(&values, 0.01));
    assert_eq!(entry.clip_hi, naive_percentile(&values, 0.99));
    assert_eq!(apply_normalization(entry.clip_lo, &entry), 0.0);
    assert_eq!(apply_normalization(entry.clip_hi, &entry), 1.0);
    assert_eq!(apply_normalization(-5.0, &entry), 0.0);
    assert_eq!(apply_normalization(500.0, &entry), 1.0);
}

#[test]
fn log_entries_clip_in_log_space() {
    let values = uniform();
    let samples: Vec<MetricSample> = values.iter().map(|v| BTreeMap::from([(MetricKey::Tenengrad, *v)])).collect();
    let stats = collect_stats(&samples, &[MetricKey::Tenengrad]).unwrap();
    let profile = fit_profile(&CalibrationProfile::identity(), &stats);
    let entry = profile.norm(MetricKey::Tenengrad).unwrap();
    assert!(entry.log_transform);
    assert_eq!(entry.clip_lo, naive_percentile(&values, 0.01).ln_1p());
    assert_eq!(entry.clip_hi, naive_percentile(&values, 0.99).ln_1p());
    // Untouched metrics keep the base entry.
    assert_eq!(profile.norm(MetricKey::EdgeDensity).unwrap(), CalibrationProfile::identity().norm(MetricKey::EdgeDensity).unwrap());
}

#[test]
fn profile_survives_json() {
    let mut p = CalibrationProfile::shipped();
    p.note = "round trip".into();
    let back = CalibrationProfile::from_json_str(&p.to_json_string()).unwrap();
    assert_eq!(back, p);
    assert_eq!(back.profile_id(), p.profile_id());
}

proptest! {
    #[test]
    fn normalization_is_monotone_and_bounded(lo in -100.0f64..100.0, span in 1e-3f64..100.0, a: f64, b: f64) {
        prop_assume!(a.is_finite() && b.is_finite());
        let entry = domainscope_core::NormEntry::new(false, lo, lo + span);
        let (x, y) = (apply_normalization(a.min(b), &entry), apply_normalization(a.max(b), &entry));
        prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        prop_assert!(x <= y);
    }
}
