use std::fs;
use std::path::Path;

use domainscope_cli::{run, RunManifest, EXIT_DATA_QUALITY, EXIT_IO, EXIT_OK, EXIT_USAGE};
use domainscope_core::calibration::{metric_sample, CorpusStats};
use domainscope_core::dataset::read_labels;
use domainscope_core::eval::StratifiedReport;
use domainscope_core::{CalibrationProfile, MetricKey};
use domainscope_testkit::synth::{generate, Corpus, CorpusSpec};

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["domainscope"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, images: usize) -> Corpus {
    generate(
        &dir.join("fixture"),
        CorpusSpec {
            images,
            ..CorpusSpec::default()
        },
    )
    .unwrap()
}

fn label(c: &Corpus, profile: &Path, out: &Path, workers: &str) -> i32 {
    cli(&[
        "label",
        "--annotations",
        s(&c.annotations),
        "--images",
        s(&c.images_dir),
        "--depth",
        s(&c.depth_dir),
        "--profile",
        s(profile),
        "--out",
        s(out),
        "--workers",
        workers,
    ])
    .0
}

fn shipped_profile(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("profile.json");
    CalibrationProfile::shipped().save(&p).unwrap();
    p
}

#[test]
fn missing_flag_is_a_usage_error() {
    assert_eq!(cli(&["label", "--images", "x"]).0, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(cli(&["--help"]).0, EXIT_OK);
}

#[test]
fn missing_annotation_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let profile = shipped_profile(dir.path());
    let missing = dir.path().join("nope.json");
    let out = dir.path().join("labels.jsonl");
    let code = cli(&[
        "label",
        "--annotations",
        s(&missing),
        "--images",
        s(dir.path()),
        "--profile",
        s(&profile),
        "--out",
        s(&out),
    ])
    .0;
    assert_eq!(code, EXIT_IO);
    let manifest = RunManifest::load(&dir.path().join("labels.manifest.json")).unwrap();
    assert_eq!(manifest.exit_status, EXIT_IO);
}

#[test]
fn labels_are_identical_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 24);
    let profile = shipped_profile(dir.path());
    let mut outputs = Vec::new();
    for w in ["1", "4", "8"] {
        let out = dir.path().join(format!("labels_{w}.jsonl"));
        assert_eq!(label(&c, &profile, &out, w), EXIT_OK);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(fs::read_to_string(dir.path().join("labels_1.jsonl")).unwrap().lines().count(), 24);
    let m = RunManifest::load(&dir.path().join("labels_4.manifest.json")).unwrap();
    assert_eq!(m.subcommand, "label");
    assert_eq!(m.flags["workers"], 4);
    assert_eq!(m.profile_id.as_deref(), Some(CalibrationProfile::shipped().profile_id().as_str()));
    assert!(dir.path().join("labels_1.summary.csv").is_file());
}

#[test]
fn unreadable_images_abort_with_data_quality_code() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 12);
    for img in c.images.iter().take(3) {
        fs::write(c.images_dir.join(&img.file_name), b"not an image").unwrap();
    }
    let profile = shipped_profile(dir.path());
    assert_eq!(label(&c, &profile, &dir.path().join("l.jsonl"), "2"), EXIT_DATA_QUALITY);
}

#[test]
fn calibration_needs_ten_images() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 5);
    let out = dir.path().join("p.json");
    let args = ["calibrate", "--annotations", s(&c.annotations), "--images", s(&c.images_dir), "--out-profile", s(&out)];
    assert_eq!(cli(&args).0, EXIT_USAGE);
    assert!(!out.exists());
}

#[test]
fn calibrated_clip_bounds_are_corpus_percentiles() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 20);
    let profile_path = dir.path().join("fitted.json");
    let manual = dir.path().join("manual.jsonl");
    c.write_planted_labels(&manual).unwrap();
    let (code, out) = cli(&[
        "calibrate",
        "--annotations",
        s(&c.annotations),
        "--images",
        s(&c.images_dir),
        "--depth",
        s(&c.depth_dir),
        "--out-profile",
        s(&profile_path),
        "--manual-labels",
        s(&manual),
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let profile = CalibrationProfile::load(&profile_path).unwrap();

    let labels = dir.path().join("labels.jsonl");
    assert_eq!(label(&c, &profile_path, &labels, "2"), EXIT_OK);
    let records = read_labels(&labels).unwrap();
    for key in [MetricKey::Tenengrad, MetricKey::RmsContrast, MetricKey::EdgeDensity] {
        let mut v: Vec<f64> = records.iter().filter_map(|r| metric_sample(&r.metrics).get(&key).copied()).collect();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[(q * (v.len() - 1) as f64).floor() as usize];
        let tf = |x: f64| if key.default_log_transform() { x.ln_1p() } else { x };
        let e = profile.norm(key).unwrap();
        assert_eq!((e.clip_lo, e.clip_hi), (tf(at(0.01)), tf(at(0.99))), "{key}");
    }
    let stats: std::collections::BTreeMap<MetricKey, CorpusStats> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fitted.stats.json")).unwrap()).unwrap();
    assert_eq!(stats[&MetricKey::Tenengrad].count, 20);

    let agreement: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fitted.agreement.json")).unwrap()).unwrap();
    for cat in agreement["categories"].as_array().unwrap() {
        if cat["total"].as_u64().unwrap() > 0 {
            assert_eq!(cat["accuracy"].as_f64(), Some(1.0), "{cat}");
        }
    }
}

struct Evaluated {
    _dir: tempfile::TempDir,
    c: Corpus,
    labels: std::path::PathBuf,
    detections: std::path::PathBuf,
    run_dir: std::path::PathBuf,
}

fn evaluated(false_positives: usize) -> Evaluated {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 30);
    let profile = shipped_profile(dir.path());
    let labels = dir.path().join("labels.jsonl");
    assert_eq!(label(&c, &profile, &labels, "2"), EXIT_OK);
    let detections = dir.path().join("detections.json");
    c.write_detections(&detections, false_positives).unwrap();
    let run_dir = dir.path().join("run");
    let (code, _) = cli(&[
        "evaluate",
        "--annotations",
        s(&c.annotations),
        "--detections",
        s(&detections),
        "--labels",
        s(&labels),
        "--out-dir",
        s(&run_dir),
        "--pr-curves",
    ]);
    assert_eq!(code, EXIT_OK);
    Evaluated {
        _dir: dir,
        c,
        labels,
        detections,
        run_dir,
    }
}

fn stored_report(dir: &Path) -> StratifiedReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn perfect_detections_score_one_everywhere() {
    let e = evaluated(0);
    let report = stored_report(&e.run_dir);
    assert_eq!(report.rows.len(), 18);
    for row in &report.rows {
        if let Some(v) = row.metrics.map50 {
            assert_eq!(v, 1.0, "{}", row.key());
        }
        for c in row.changes.iter().flatten() {
            assert_eq!(c.percent, 0.0);
            assert_eq!(c.arrow(), "=");
        }
    }
    assert!(e.run_dir.join("pr_curves/manifest.json").is_file());
}

#[test]
fn evaluation_is_reproducible() {
    let e = evaluated(2);
    let second = e.run_dir.with_file_name("run2");
    let (code, _) = cli(&[
        "evaluate",
        "--annotations",
        s(&e.c.annotations),
        "--detections",
        s(&e.detections),
        "--labels",
        s(&e.labels),
        "--out-dir",
        s(&second),
        "--pr-curves",
    ]);
    assert_eq!(code, EXIT_OK);
    for name in ["report.csv", "report.json", "report.txt", "report.md", "pr_curves/manifest.json"] {
        assert_eq!(fs::read(e.run_dir.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
    let (a, b) = (
        RunManifest::load(&e.run_dir.join("manifest.json")).unwrap(),
        RunManifest::load(&second.join("manifest.json")).unwrap(),
    );
    let hashes = |m: &RunManifest| m.outputs.values().cloned().collect::<Vec<_>>();
    assert_eq!(hashes(&a), hashes(&b));
}

#[test]
fn mixed_profiles_need_force() {
    let e = evaluated(0);
    let other = e.labels.with_file_name("other.jsonl");
    let text = fs::read_to_string(&e.labels).unwrap();
    let id = CalibrationProfile::shipped().profile_id();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let half = lines.len() / 2;
    let moved: Vec<String> = lines.drain(half..).map(|l| l.replace(&id, "0000000000000000")).collect();
    fs::write(&e.labels, lines.join("\n") + "\n").unwrap();
    fs::write(&other, moved.join("\n") + "\n").unwrap();
    let out = e.run_dir.with_file_name("forced");
    let mut args = vec![
        "evaluate",
        "--annotations",
        s(&e.c.annotations),
        "--detections",
        s(&e.detections),
        "--labels",
        s(&e.labels),
        "--labels",
        s(&other),
        "--out-dir",
        s(&out),
    ];
    assert_eq!(cli(&args).0, EXIT_USAGE);
    args.push("--force");
    assert_eq!(cli(&args).0, EXIT_OK);
}

#[test]
fn report_formats() {
    let e = evaluated(1);
    let dir = s(&e.run_dir);
    let (code, md) = cli(&["report", "--run-dir", dir, "--format", "markdown"]);
    assert_eq!(code, EXIT_OK);
    let header = md.lines().next().unwrap();
    // metric + mixed + 17 conditions.
    assert_eq!(header.matches('|').count() - 1, 19, "{header}");
    let (code, csv) = cli(&["report", "--run-dir", dir, "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(csv, fs::read_to_string(e.run_dir.join("report.csv")).unwrap());
    assert!(csv.starts_with("category,condition,"), "{}", csv.lines().next().unwrap());
    let (code, text) = cli(&["report", "--run-dir", dir]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(text, fs::read_to_string(e.run_dir.join("report.txt")).unwrap());

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["report", "--run-dir", s(empty.path())]).0, EXIT_USAGE);
}
