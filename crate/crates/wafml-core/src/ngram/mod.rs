//! Per-field language-signature anomaly detection.
//!
//! Training learns, for every request field seen in valid traffic, the
//! distribution of its token n-grams (after text abstraction) plus a length
//! attribute. A request field is scored by how many standard deviations its
//! n-gram profile sits from the learned means; a request is normal when
//! every field score falls inside the range observed during training.
//!
//! Unlike the count-vector detector, this one keys on field identity:
//! a parameter name never seen in training is itself an attack signal.

pub mod config;
pub mod model;

use std::collections::BTreeMap;
use std::path::Path;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub use config::{ConfigSet, FieldConfig, PriorRequirement, ValueMode, DEFAULT_N_MAX};
pub use model::{Distribution, FieldModel, Gram, NgramModel, Prior, ScoreRange};

use crate::error::{Error, Result};
use crate::http::{extract_model_fields, HttpRequest};
use crate::ngram::model::{Bins, DistributionBuilder};
use crate::verdict::Verdict;

/// Canonicalizes text before tokenization: every ASCII digit becomes `N`,
/// letters are lowercased, accents are stripped after canonical
/// decomposition. Idempotent: `N` itself never lowercases, and the output
/// contains no digits, no combining marks, and no recomposable letters.
pub fn abstract_text(text: &str) -> String {
    let mut mapped = String::with_capacity(text.len());
    for c in text.chars() {
        if c == 'N' || c.is_ascii_digit() {
            mapped.push('N');
        } else {
            mapped.extend(c.to_lowercase());
        }
    }
    mapped.nfd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Splits text into tokens: one per character without a delimiter,
/// maximal non-delimiter substrings with one (empty tokens dropped).
pub fn tokenize(text: &str, delimiter: Option<&regex::Regex>) -> Vec<String> {
    match delimiter {
        None => text.chars().map(String::from).collect(),
        Some(re) => re
            .split(text)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    }
}

/// Counts all consecutive m-token windows for every m in 1..=n_max;
/// index is order minus one. L tokens yield max(L-m+1, 0) m-grams.
pub fn extract_ngrams(tokens: &[String], n_max: usize) -> Vec<BTreeMap<Gram, u64>> {
    assert!(n_max >= 1, "n-gram order must be at least 1");
    (1..=n_max)
        .map(|m| {
            let mut counts: BTreeMap<Gram, u64> = BTreeMap::new();
            for window in tokens.windows(m) {
                *counts.entry(window.to_vec()).or_insert(0) += 1;
            }
            counts
        })
        .collect()
}

/// Attribute values of one field occurrence: per-order gram values
/// (counts or frequencies per the field mode) and the character length of
/// the decoded, pre-abstraction contents.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAttributes {
    pub length: f64,
    /// Index order-1; missing grams simply absent (never zero entries).
    pub by_order: Vec<BTreeMap<Gram, f64>>,
}

pub fn field_attributes(contents: &str, cfg: &FieldConfig) -> FieldAttributes {
    let length = contents.chars().count() as f64;
    let abstracted = abstract_text(contents);
    let tokens = tokenize(&abstracted, cfg.delimiter.as_ref().map(|d| d.regex()));
    let by_order = extract_ngrams(&tokens, cfg.n_max)
        .into_iter()
        .map(|counts| {
            let total: u64 = counts.values().sum();
            counts
                .into_iter()
                .map(|(gram, count)| {
                    let value = match cfg.mode {
                        ValueMode::Count => count as f64,
                        ValueMode::Frequency => count as f64 / total as f64,
                    };
                    (gram, value)
                })
                .collect()
        })
        .collect();
    FieldAttributes { length, by_order }
}

/// Trains a model on parsed requests. Two passes: Welford statistics over
/// every attribute of every non-excluded field occurrence, then each
/// training request is re-scored to establish per-field score ranges.
/// Sequential by design: Welford updates are order-dependent in floating
/// point, so a fixed request order gives a bit-identical model.
pub fn train(
    requests: &[HttpRequest],
    configs: ConfigSet,
    priors: BTreeMap<String, Prior>,
) -> Result<NgramModel> {
    if requests.is_empty() {
        return Err(Error::EmptyTraining("no training requests".to_string()));
    }
    for requirement in configs.prior_requirements()? {
        if !priors.contains_key(&requirement.id) {
            return Err(Error::Config(format!(
                "configured prior {:?} was not loaded",
                requirement.id
            )));
        }
    }

    struct FieldBuilder {
        config: FieldConfig,
        samples_by_order: Vec<u64>,
        length: DistributionBuilder,
        grams: Vec<BTreeMap<Gram, DistributionBuilder>>,
    }

    let mut builders: BTreeMap<crate::http::FieldKey, FieldBuilder> = BTreeMap::new();
    for req in requests {
        for field in extract_model_fields(req) {
            let cfg = configs.resolve(&field.key);
            if cfg.excluded {
                continue;
            }
            let n_max = cfg.n_max;
            let b = builders.entry(field.key).or_insert_with(|| FieldBuilder {
                config: cfg,
                samples_by_order: vec![0; n_max],
                length: DistributionBuilder::new(),
                grams: vec![BTreeMap::new(); n_max],
            });
            let attrs = field_attributes(&field.contents, &b.config);
            let bins = Bins::for_mode(b.config.mode);
            // Order 1 samples on every occurrence: length always
            // contributes. Higher orders need at least one window.
            b.samples_by_order[0] += 1;
            b.length.push(attrs.length, Bins::Integer);
            for (ix, order_attrs) in attrs.by_order.iter().enumerate() {
                if ix > 0 && !order_attrs.is_empty() {
                    b.samples_by_order[ix] += 1;
                }
                for (gram, value) in order_attrs {
                    b.grams[ix]
                        .entry(gram.clone())
                        .or_default()
                        .push(*value, bins);
                }
            }
        }
    }
    if builders.is_empty() {
        return Err(Error::EmptyTraining(
            "every field is excluded by configuration".to_string(),
        ));
    }

    let mut fields: BTreeMap<crate::http::FieldKey, FieldModel> = builders
        .into_iter()
        .map(|(key, b)| {
            let n_max = b.config.n_max;
            (
                key,
                FieldModel {
                    config: b.config,
                    samples_by_order: b.samples_by_order,
                    length: b.length.freeze(),
                    grams: b
                        .grams
                        .into_iter()
                        .map(|m| m.into_iter().map(|(g, db)| (g, db.freeze())).collect())
                        .collect(),
                    // Placeholder until the scoring pass below.
                    score_range: ScoreRange {
                        per_order: vec![(f64::INFINITY, f64::NEG_INFINITY); n_max],
                        total: (f64::INFINITY, f64::NEG_INFINITY),
                    },
                },
            )
        })
        .collect();

    let mut ranges: BTreeMap<crate::http::FieldKey, ScoreRange> = fields
        .iter()
        .map(|(key, fm)| (key.clone(), fm.score_range.clone()))
        .collect();
    for req in requests {
        for field in extract_model_fields(req) {
            let Some(fm) = fields.get(&field.key) else {
                continue; // excluded
            };
            let attrs = field_attributes(&field.contents, &fm.config);
            let prior = fm.config.prior.as_ref().and_then(|id| priors.get(id));
            let range = ranges.get_mut(&field.key).expect("range for every field");
            let mut total = 0.0;
            for order in 1..=fm.config.n_max {
                let s = order_score(fm, prior, &attrs, order);
                let slot = &mut range.per_order[order - 1];
                slot.0 = slot.0.min(s);
                slot.1 = slot.1.max(s);
                total += s;
            }
            range.total.0 = range.total.0.min(total);
            range.total.1 = range.total.1.max(total);
        }
    }
    for (key, range) in ranges {
        fields.get_mut(&key).expect("same keys").score_range = range;
    }

    Ok(NgramModel {
        fields,
        configs,
        priors,
        trained_requests: requests.len() as u64,
    })
}

/// Distance of one field occurrence from the model at a single n-gram
/// order: sqrt of the sum over the union of model and observed grams of
/// |mu - f|^2 / (1/|T| + sigma^2), where |T| is the number of training
/// samples the field produced at this order. The length attribute joins at
/// order 1. Grams unknown to the model use the configured prior when it
/// knows them, else the zero singleton (mu = sigma = 0).
pub fn order_score(
    fm: &FieldModel,
    prior: Option<&Prior>,
    attrs: &FieldAttributes,
    order: usize,
) -> f64 {
    let t = fm.samples_by_order[order - 1];
    if t == 0 {
        // Training never reached this order; 1/|T| diverges and every
        // term vanishes.
        return 0.0;
    }
    let inv_t = 1.0 / t as f64;
    let model_grams = &fm.grams[order - 1];
    let observed = attrs
        .by_order
        .get(order - 1)
        .expect("attrs computed with the model's n_max");

    let mut sum = 0.0;
    for (gram, dist) in model_grams {
        let f = observed.get(gram).copied().unwrap_or(0.0);
        sum += (dist.mu - f).powi(2) / (inv_t + dist.sigma2);
    }
    for (gram, &f) in observed {
        if model_grams.contains_key(gram) {
            continue;
        }
        let (mu, sigma2) = match prior.and_then(|p| p.lookup(order, gram)) {
            Some(d) => (d.mu, d.sigma2),
            None => (0.0, 0.0),
        };
        sum += (mu - f).powi(2) / (inv_t + sigma2);
    }
    if order == 1 {
        sum += (fm.length.mu - attrs.length).powi(2) / (inv_t + fm.length.sigma2);
    }
    sum.sqrt()
}

impl NgramModel {
    /// Summed field score across orders, the quantity checked against the
    /// training score range.
    pub fn field_score(&self, fm: &FieldModel, attrs: &FieldAttributes) -> f64 {
        let prior = fm.config.prior.as_ref().and_then(|id| self.priors.get(id));
        (1..=fm.config.n_max)
            .map(|order| order_score(fm, prior, attrs, order))
            .sum()
    }

    /// Classifies one request. A non-excluded field identity the model has
    /// never seen is an immediate attack; otherwise the verdict score is
    /// the worst signed score-range violation across fields (≤ 0 normal).
    pub fn classify(&self, req: &HttpRequest) -> Verdict {
        let mut worst = f64::NEG_INFINITY;
        for field in extract_model_fields(req) {
            if self.configs.resolve(&field.key).excluded {
                continue;
            }
            let Some(fm) = self.fields.get(&field.key) else {
                return Verdict::from_score(f64::INFINITY);
            };
            let attrs = field_attributes(&field.contents, &fm.config);
            let score = self.field_score(fm, &attrs);
            worst = worst.max(fm.score_range.violation(score));
        }
        Verdict::from_score(worst)
    }
}

/// Builds a prior language signature from a corpus, one document per line.
/// Each line contributes one frequency sample per n-gram it contains;
/// empty lines are skipped.
pub fn prior_from_text(text: &str, requirement: &PriorRequirement) -> Option<Prior> {
    use sha2::{Digest, Sha256};
    let digest = format!("{:x}", Sha256::digest(text.as_bytes()));

    let mut by_order: Vec<BTreeMap<Gram, DistributionBuilder>> =
        vec![BTreeMap::new(); requirement.n_max];
    let mut saw_document = false;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        saw_document = true;
        let abstracted = abstract_text(line);
        let tokens = tokenize(
            &abstracted,
            requirement.delimiter.as_ref().map(|d| d.regex()),
        );
        for (ix, counts) in extract_ngrams(&tokens, requirement.n_max)
            .into_iter()
            .enumerate()
        {
            let total: u64 = counts.values().sum();
            for (gram, count) in counts {
                by_order[ix]
                    .entry(gram)
                    .or_default()
                    .push(count as f64 / total as f64, Bins::Percent);
            }
        }
    }
    if !saw_document {
        return None;
    }
    Some(Prior {
        digest,
        by_order: by_order
            .into_iter()
            .map(|m| m.into_iter().map(|(g, db)| (g, db.freeze())).collect())
            .collect(),
    })
}

pub fn load_prior(path: &Path, requirement: &PriorRequirement) -> Result<Prior> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    prior_from_text(&text, requirement).ok_or_else(|| Error::EmptyCorpus(path.to_path_buf()))
}
