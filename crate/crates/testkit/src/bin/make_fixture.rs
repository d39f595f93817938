//! Writes a synthetic corpus, a detection file and planted labels.
//!
//! usage: make-fixture OUT_DIR [IMAGES [SEED [FALSE_POSITIVES]]]

use std::path::PathBuf;
use std::process::ExitCode;

use domainscope_testkit::synth::{generate, CorpusSpec};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(out) = args.first().map(PathBuf::from) else {
        eprintln!("usage: make-fixture OUT_DIR [IMAGES [SEED [FALSE_POSITIVES]]]");
        return ExitCode::from(2);
    };
    let num = |i: usize, default: u64| -> Result<u64, String> {
        args.get(i)
            .map_or(Ok(default), |s| s.parse().map_err(|e| format!("argument {i}: {e}")))
    };
    let parsed = (|| Ok::<_, String>((num(1, 60)?, num(2, 7)?, num(3, 3)?)))();
    let (images, seed, fps) = match parsed {
        Ok(v) => v,
        Err(e) => {
            eprintln!("make-fixture: {e}");
            return ExitCode::from(2);
        }
    };
    let spec = CorpusSpec {
        images: images as usize,
        seed,
        ..CorpusSpec::default()
    };
    let result = generate(&out, spec).and_then(|c| {
        c.write_detections(&out.join("detections.json"), fps as usize)?;
        c.write_planted_labels(&out.join("planted.jsonl"))?;
        Ok(c)
    });
    match result {
        Ok(c) => {
            println!("wrote {} images to {}", c.images.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("make-fixture: {e}");
            ExitCode::from(4)
        }
    }
}
