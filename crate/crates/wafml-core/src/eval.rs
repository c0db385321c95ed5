//! Evaluation harness: labeled splits, TPR/TNR metrics, λ sweeps.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract_features, Lexicon};
use crate::gmm::GmmModel;
use crate::http::{filter_headers, parse_request, read_container, HttpRequest, RawRequest};
use crate::verdict::Verdict;

/// Labeled request corpus: valid traffic for training, plus valid and
/// attack traffic for testing.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train_valid: Vec<RawRequest>,
    pub test_valid: Vec<RawRequest>,
    pub test_attack: Vec<RawRequest>,
}

/// Loads a split from container files. Multiple training files concatenate
/// in argument order (mixed-dataset training). Request ids must be unique
/// across the whole split so rule-verdict lookups and reports stay
/// unambiguous.
pub fn load_dataset(
    train_paths: &[PathBuf],
    valid_path: &Path,
    attack_path: &Path,
) -> Result<DatasetSplit> {
    let mut train_valid = Vec::new();
    for path in train_paths {
        train_valid.extend(read_container(path)?);
    }
    let split = DatasetSplit {
        train_valid,
        test_valid: read_container(valid_path)?,
        test_attack: read_container(attack_path)?,
    };

    let mut seen = std::collections::HashSet::new();
    for raw in split
        .train_valid
        .iter()
        .chain(&split.test_valid)
        .chain(&split.test_attack)
    {
        if !seen.insert(raw.id.as_str()) {
            return Err(Error::Config(format!(
                "request id {:?} appears twice in the split; container files must have distinct base names",
                raw.id
            )));
        }
    }
    Ok(split)
}

/// Confusion counts with the derived rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    pub true_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
}

impl Metrics {
    /// Fraction of attacks flagged; NaN when the split has no attacks.
    pub fn tpr(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    /// Fraction of valid traffic passed; NaN when there is none.
    pub fn tnr(&self) -> f64 {
        ratio(self.true_negatives, self.true_negatives + self.false_positives)
    }
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        f64::NAN
    } else {
        num as f64 / denom as f64
    }
}

/// Metrics plus the requests that never reached the classifier.
/// Unparseable requests are excluded from both denominators rather than
/// coerced to a label, which would bias the rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOutcome {
    pub metrics: Metrics,
    pub unparseable_valid: u64,
    pub unparseable_attack: u64,
}

/// Runs a classifier over the test halves of a split. Classification is
/// parallel; the result is a pure count, so the outcome is deterministic
/// regardless of scheduling.
pub fn evaluate<F>(classify: F, split: &DatasetSplit) -> EvalOutcome
where
    F: Fn(&HttpRequest) -> Verdict + Sync,
{
    let (valid_attacked, valid_passed, unparseable_valid) = tally(&split.test_valid, &classify);
    let (attack_caught, attack_missed, unparseable_attack) = tally(&split.test_attack, &classify);
    EvalOutcome {
        metrics: Metrics {
            true_positives: attack_caught,
            false_negatives: attack_missed,
            true_negatives: valid_passed,
            false_positives: valid_attacked,
        },
        unparseable_valid,
        unparseable_attack,
    }
}

/// (flagged attack, passed normal, unparseable) counts for one request list.
fn tally<F>(requests: &[RawRequest], classify: &F) -> (u64, u64, u64)
where
    F: Fn(&HttpRequest) -> Verdict + Sync,
{
    requests
        .par_iter()
        .map(|raw| match parse_request(raw) {
            Err(_) => (0, 0, 1),
            Ok(req) => {
                if classify(&req).label.is_attack() {
                    (1, 0, 0)
                } else {
                    (0, 1, 0)
                }
            }
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
}

/// One λ operating point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub lambda: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocOutcome {
    pub points: Vec<RocPoint>,
    pub unparseable_valid: u64,
    pub unparseable_attack: u64,
}

/// λ grid of 0.01, 0.02, .., 1.00.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 / 100.0).collect()
}

/// Sweeps the mixture classifier across λ values.
///
/// A request is normal at λ iff some component's distance is within λ
/// times its base threshold, so each request has a critical λ* = min over
/// components of distance/base_threshold and is normal exactly when
/// λ* ≤ λ. Computing λ* once per request makes the sweep one pass over the
/// data and the resulting curve monotone by construction.
pub fn roc_sweep(
    model: &GmmModel,
    lexicon: &Lexicon,
    split: &DatasetSplit,
    grid: &[f64],
) -> Result<RocOutcome> {
    validate_grid(grid)?;
    let base = model.base_thresholds();

    let critical = |requests: &[RawRequest]| -> (Vec<f64>, u64) {
        let lambdas: Vec<Option<f64>> = requests
            .par_iter()
            .map(|raw| {
                let req = parse_request(raw).ok()?;
                let scanned = filter_headers(&req, &crate::http::ONECLASS_HEADER_DROP_LIST);
                let features = extract_features(&scanned, lexicon);
                let star = model
                    .distances(&features.counts)
                    .iter()
                    .zip(&base)
                    .map(|(&d, &b)| {
                        if b > 0.0 {
                            d / b
                        } else if d == 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min);
                Some(star)
            })
            .collect();
        let unparseable = lambdas.iter().filter(|l| l.is_none()).count() as u64;
        let mut stars: Vec<f64> = lambdas.into_iter().flatten().collect();
        stars.sort_unstable_by(|a, b| a.partial_cmp(b).expect("critical λ is never NaN"));
        (stars, unparseable)
    };

    let (valid_stars, unparseable_valid) = critical(&split.test_valid);
    let (attack_stars, unparseable_attack) = critical(&split.test_attack);

    let points = grid
        .iter()
        .map(|&lambda| {
            let accepted = |stars: &[f64]| stars.partition_point(|&s| s <= lambda) as u64;
            let tn = accepted(&valid_stars);
            let fn_ = accepted(&attack_stars);
            RocPoint {
                lambda,
                metrics: Metrics {
                    true_positives: attack_stars.len() as u64 - fn_,
                    false_negatives: fn_,
                    true_negatives: tn,
                    false_positives: valid_stars.len() as u64 - tn,
                },
            }
        })
        .collect();

    Ok(RocOutcome {
        points,
        unparseable_valid,
        unparseable_attack,
    })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty λ grid".to_string()));
    }
    for window in grid.windows(2) {
        if !(window[0] < window[1]) {
            return Err(Error::Config(format!(
                "λ grid must be strictly increasing, got {} then {}",
                window[0], window[1]
            )));
        }
    }
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    if !(first > 0.0 && last <= 1.0) {
        return Err(Error::Config(format!(
            "λ grid must stay within (0, 1], got [{first}, {last}]"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Output rendering

/// One row of the metrics table; λ is empty for methods without one.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub metrics: Metrics,
}

pub const METRICS_CSV_HEADER: &str = "method,lambda,tnr,tpr,tp,fn,tn,fp";

pub fn render_metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let m = &row.metrics;
        let lambda = row.lambda.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.method,
            lambda,
            fmt_rate(m.tnr()),
            fmt_rate(m.tpr()),
            m.true_positives,
            m.false_negatives,
            m.true_negatives,
            m.false_positives,
        ));
    }
    out
}

fn fmt_rate(rate: f64) -> String {
    if rate.is_nan() {
        "nan".to_string()
    } else {
        format!("{rate:.6}")
    }
}

/// Verdict lines (`<id>\t<label>\t<score>`), consumable as a rule-verdict
/// file for detector chaining.
pub fn render_verdict_lines(verdicts: &[(String, Verdict)]) -> String {
    let mut out = String::new();
    for (id, verdict) in verdicts {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            id,
            verdict.label.as_str(),
            verdict.score
        ));
    }
    out
}

/// Writes a file atomically: temp sibling first, rename on success, so a
/// failure never leaves a partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
