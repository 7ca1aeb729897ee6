//! Full-scale run against a real corpus and live providers. Ignored by
//! default; enable with
//!
//! ```text
//! REVDETECT_FULL_CORPUS=/data/corpus.jsonl REVDETECT_FULL_CONFIG=/data/pipeline.toml \
//!     cargo test -p revdetect --test full_corpus -- --ignored
//! ```
//!
//! The config must point at HTTP providers; credentials come from the
//! environment variables it names.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

const MIN_BINARY_AUC: f64 = 0.99;
const MAX_REFINED_AS_AI: f64 = 0.05;

fn step(config: &str, out: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_revdetect"))
        .args(["--config", config, "--out"])
        .arg(out)
        .args(args)
        .status()
        .expect("binary runs");
    assert!(status.success(), "{args:?} exited with {status}");
}

#[test]
#[ignore = "needs the full corpus and live providers"]
fn headline_numbers_at_full_scale() {
    let (Ok(corpus), Ok(config)) = (
        std::env::var("REVDETECT_FULL_CORPUS"),
        std::env::var("REVDETECT_FULL_CONFIG"),
    ) else {
        panic!("set REVDETECT_FULL_CORPUS and REVDETECT_FULL_CONFIG");
    };
    let out = tempfile::tempdir().unwrap();
    let out = out.path();
    step(&config, out, &["ingest", "--input", &corpus]);
    step(&config, out, &["generate", "--seed", "0"]);
    step(&config, out, &["extract-claims"]);
    step(&config, out, &["featurize"]);
    step(&config, out, &["train", "--seed", "0", "--search", "50"]);
    step(&config, out, &["evaluate"]);

    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let auc = report["auc"].as_f64().unwrap();
    assert!(auc >= MIN_BINARY_AUC, "binary AUC {auc}");

    let preds = std::fs::read_to_string(out.join("predictions.jsonl")).unwrap();
    let (mut refined, mut as_ai) = (0usize, 0usize);
    for line in preds.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        if v["label"] == "refined" {
            refined += 1;
            as_ai += usize::from(v["predicted"] == "ai");
        }
    }
    let rate = as_ai as f64 / refined.max(1) as f64;
    assert!(rate <= MAX_REFINED_AS_AI, "refined misread as AI: {as_ai}/{refined}");
}
