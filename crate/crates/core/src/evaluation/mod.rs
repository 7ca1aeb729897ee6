//! Detection metrics, bootstrap uncertainty and selective-prediction
//! analysis over classifier outputs.

mod bootstrap;
mod metrics;
mod threshold;

pub use bootstrap::{bootstrap, percentile, BootstrapSummary, DEFAULT_ITERATIONS};
pub use metrics::{
    accuracy, confusion_matrix, macro_f1, roc_auc, roc_auc_trapezoid, roc_curve, tpr_at_fpr, ConfusionMatrix, MacroF1,
    RocPoint,
};
pub use threshold::{collapse_binary, default_theta_grid, threshold_sweep, BinaryMode, ThresholdPoint};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Prediction;
use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples")]
    Empty,
    #[error("only one class present")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("score {index} is not finite")]
    NonFinite { index: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const TPR_CONVENTION: &str =
    "tpr_at_fpr is the largest TPR over ROC operating points whose FPR is at or below the target (no interpolation)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub fpr_targets: Vec<f64>,
    pub bootstrap_iterations: usize,
    pub seed: u64,
    pub theta_grid: Vec<f64>,
    pub binary_mode: BinaryMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fpr_targets: vec![0.001, 0.01],
            bootstrap_iterations: DEFAULT_ITERATIONS,
            seed: 0,
            theta_grid: default_theta_grid(),
            binary_mode: BinaryMode::AiVsRest,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tpr_convention: String,
    pub n: usize,
    pub binary_mode: BinaryMode,
    pub auc: f64,
    /// FPR target (formatted) to TPR.
    pub tpr_at: BTreeMap<String, f64>,
    pub macro_f1: f64,
    pub per_class_f1: [f64; 3],
    pub absent_classes: Vec<Label>,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Metric name to bootstrap summary; the `std` field is the reported
    /// uncertainty.
    pub bootstrap: BTreeMap<String, BootstrapSummary>,
    pub bootstrap_std: BTreeMap<String, f64>,
    pub threshold_curve: Vec<ThresholdPoint>,
    pub roc: Vec<RocPoint>,
}

fn fpr_key(t: f64) -> String {
    format!("{t}")
}

/// Full evaluation of 3-class predictions against their labels.
pub fn evaluate(predictions: &[Prediction<f64>], labels: &[Label], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let (scores, binary) = collapse_binary(predictions, labels, cfg.binary_mode)?;
    let auc = roc_auc(&scores, &binary)?;
    let mut tpr_at = BTreeMap::new();
    for &t in &cfg.fpr_targets {
        tpr_at.insert(fpr_key(t), tpr_at_fpr(&scores, &binary, t)?);
    }
    let pred_labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    let f1 = macro_f1(&pred_labels, labels)?;
    if !f1.absent.is_empty() {
        log::warn!(
            "macro-F1: classes {:?} absent from predictions and labels; scored as 0",
            f1.absent
        );
    }
    let confusion = confusion_matrix(&pred_labels, labels)?;

    let rows: Vec<(Prediction<f64>, Label)> = predictions.iter().cloned().zip(labels.iter().copied()).collect();
    let mut boot = BTreeMap::new();
    let mode = cfg.binary_mode;
    let binary_of = |s: &[(Prediction<f64>, Label)]| {
        let (p, l): (Vec<_>, Vec<_>) = s.iter().cloned().unzip();
        collapse_binary(&p, &l, mode).ok()
    };
    boot.insert(
        "auc".to_string(),
        bootstrap(
            &rows,
            |s| binary_of(s).and_then(|(sc, b)| roc_auc(&sc, &b).ok()),
            cfg.bootstrap_iterations,
            cfg.seed,
        )?,
    );
    for &t in &cfg.fpr_targets {
        boot.insert(
            format!("tpr_at_{}", fpr_key(t)),
            bootstrap(
                &rows,
                |s| binary_of(s).and_then(|(sc, b)| tpr_at_fpr(&sc, &b, t).ok()),
                cfg.bootstrap_iterations,
                cfg.seed,
            )?,
        );
    }
    boot.insert(
        "macro_f1".to_string(),
        bootstrap(
            &rows,
            |s| {
                let (p, l): (Vec<Label>, Vec<Label>) = s.iter().map(|(p, l)| (p.label, *l)).unzip();
                macro_f1(&p, &l).ok().map(|m| m.value)
            },
            cfg.bootstrap_iterations,
            cfg.seed,
        )?,
    );
    let bootstrap_std = boot.iter().map(|(k, v)| (k.clone(), v.std)).collect();

    Ok(EvalReport {
        tpr_convention: TPR_CONVENTION.to_string(),
        n: labels.len(),
        binary_mode: cfg.binary_mode,
        auc,
        tpr_at,
        macro_f1: f1.value,
        per_class_f1: f1.per_class,
        absent_classes: f1.absent,
        accuracy: accuracy(&pred_labels, labels)?,
        confusion,
        bootstrap: boot,
        bootstrap_std,
        threshold_curve: threshold_sweep(predictions, labels, &cfg.theta_grid)?,
        roc: roc_curve(&scores, &binary)?,
    })
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut s = String::from("threshold,fpr,tpr\n");
    for p in points {
        let t = p.threshold.map_or("inf".to_string(), |t| t.to_string());
        let _ = writeln!(s, "{t},{},{}", p.fpr, p.tpr);
    }
    s
}

pub fn theta_csv(points: &[ThresholdPoint]) -> String {
    let mut s = String::from("theta,coverage,selective_accuracy\n");
    for p in points {
        let acc = p.selective_accuracy.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", p.theta, p.coverage, acc);
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<(), EvalError> {
    std::fs::write(path, contents).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `report.json`, `roc.csv` and `theta.csv` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let json = serde_json::to_string_pretty(report).map_err(|e| EvalError::Invalid(e.to_string()))?;
    write(&dir.join("report.json"), &(json + "\n"))?;
    write(&dir.join("roc.csv"), &roc_csv(&report.roc))?;
    write(&dir.join("theta.csv"), &theta_csv(&report.threshold_curve))
}
