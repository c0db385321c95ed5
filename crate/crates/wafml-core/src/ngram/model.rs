//! Model types and serialization for the n-gram detector.
//!
//! A trained model is immutable. Training accumulates `DistributionBuilder`s
//! (Welford statistics plus a histogram) which freeze into `Distribution`s,
//! the form that both scores requests and serializes. Scoring reads the
//! frozen variance directly, so a reloaded model reproduces every verdict
//! bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::FieldKey;
use crate::ngram::config::{
    field_config_from_wire, field_config_to_wire, ConfigSet, FieldConfig, ValueMode,
    WireConfigSet, WireFieldConfig,
};
use crate::stats::RunningStats;

/// A token sequence; order = number of tokens.
pub type Gram = Vec<String>;

/// Frozen sample statistics of one attribute.
///
/// `sigma2` is the population variance. The histogram is diagnostic only
/// and never consulted by classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub histogram: Vec<(u64, u64)>,
    pub max: f64,
    pub min: f64,
    pub mu: f64,
    pub n_samples: u64,
    pub sigma2: f64,
}

impl Distribution {
    fn validate(&self, what: &str) -> Result<()> {
        let bad = |reason: String| Error::InvalidModel(format!("{what}: {reason}"));
        if self.n_samples == 0 {
            return Err(bad("no samples".to_string()));
        }
        for v in [self.mu, self.sigma2, self.min, self.max] {
            if !v.is_finite() {
                return Err(bad(format!("non-finite statistic {v}")));
            }
        }
        if self.sigma2 < 0.0 {
            return Err(bad(format!("negative variance {}", self.sigma2)));
        }
        // Welford keeps the mean inside [min, max] up to rounding.
        let slack = 1e-9 * self.mu.abs().max(1.0);
        if self.mu < self.min - slack || self.mu > self.max + slack {
            return Err(bad(format!(
                "mean {} outside [{}, {}]",
                self.mu, self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Histogram key layout for a distribution under construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bins {
    /// 100 equal bins over [0, 1]; values at 1.0 land in the last bin.
    Percent,
    /// Exact non-negative integer keys.
    Integer,
}

impl Bins {
    pub fn for_mode(mode: ValueMode) -> Bins {
        match mode {
            ValueMode::Count => Bins::Integer,
            ValueMode::Frequency => Bins::Percent,
        }
    }

    fn key(self, value: f64) -> u64 {
        match self {
            Bins::Percent => (value * 100.0).floor().clamp(0.0, 99.0) as u64,
            Bins::Integer => value.max(0.0) as u64,
        }
    }
}

/// Welford accumulator that freezes into a [`Distribution`].
#[derive(Debug, Clone, Default)]
pub struct DistributionBuilder {
    stats: RunningStats,
    histogram: BTreeMap<u64, u64>,
}

impl DistributionBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64, bins: Bins) {
        self.stats.push(value);
        *self.histogram.entry(bins.key(value)).or_insert(0) += 1;
    }

    pub fn freeze(self) -> Distribution {
        debug_assert!(!self.stats.is_empty(), "freezing an empty distribution");
        Distribution {
            histogram: self.histogram.into_iter().collect(),
            max: self.stats.max(),
            min: self.stats.min(),
            mu: self.stats.mean(),
            n_samples: self.stats.n(),
            sigma2: self.stats.variance(),
        }
    }
}

/// Training score bounds for one field: per n-gram order and for the
/// summed field score. Classification checks only the summed range.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRange {
    pub per_order: Vec<(f64, f64)>,
    pub total: (f64, f64),
}

impl ScoreRange {
    pub fn contains(&self, score: f64) -> bool {
        self.total.0 <= score && score <= self.total.1
    }

    /// Signed distance outside the summed range; ≤ 0 inside.
    pub fn violation(&self, score: f64) -> f64 {
        (score - self.total.1).max(self.total.0 - score)
    }
}

/// Everything the model knows about one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub config: FieldConfig,
    /// `samples_by_order[i-1]` = training occurrences that yielded at least
    /// one order-i sample. Order 1 counts every occurrence (the length
    /// attribute is always sampled); higher orders require enough tokens.
    pub samples_by_order: Vec<u64>,
    pub length: Distribution,
    /// Gram distributions per order, index order-1.
    pub grams: Vec<BTreeMap<Gram, Distribution>>,
    pub score_range: ScoreRange,
}

impl FieldModel {
    /// Training occurrences of the field.
    pub fn occurrences(&self) -> u64 {
        self.samples_by_order[0]
    }
}

/// A reference language signature consulted for grams the training data
/// never produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    /// SHA-256 of the source corpus bytes, hex.
    pub digest: String,
    /// Per-order frequency distributions, index order-1.
    pub by_order: Vec<BTreeMap<Gram, Distribution>>,
}

impl Prior {
    pub fn lookup(&self, order: usize, gram: &Gram) -> Option<&Distribution> {
        self.by_order.get(order - 1).and_then(|m| m.get(gram))
    }
}

/// A trained per-field language-signature model.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    pub fields: BTreeMap<FieldKey, FieldModel>,
    pub configs: ConfigSet,
    pub priors: BTreeMap<String, Prior>,
    pub trained_requests: u64,
}

impl NgramModel {
    pub fn to_json_string(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.to_wire()).expect("model serializes to JSON");
        text.push('\n');
        text
    }

    pub fn from_json_str(text: &str) -> Result<NgramModel> {
        let wire: WireNgramModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidModel(format!("JSON parse: {e}")))?;
        NgramModel::from_wire(wire)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::eval::write_atomic(path, self.to_json_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<NgramModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        NgramModel::from_json_str(&text)
    }

    fn to_wire(&self) -> WireNgramModel {
        WireNgramModel {
            configs: self.configs.to_wire(),
            fields: self
                .fields
                .iter()
                .map(|(key, fm)| {
                    (
                        key.wire_name(),
                        WireFieldModel {
                            config: field_config_to_wire(&fm.config),
                            grams: fm.grams.iter().map(grams_to_wire).collect(),
                            length: fm.length.clone(),
                            samples_by_order: fm.samples_by_order.clone(),
                            score_range: WireScoreRange {
                                per_order: fm.score_range.per_order.clone(),
                                total: fm.score_range.total,
                            },
                        },
                    )
                })
                .collect(),
            priors: self
                .priors
                .iter()
                .map(|(id, prior)| {
                    (
                        id.clone(),
                        WirePrior {
                            by_order: prior.by_order.iter().map(grams_to_wire).collect(),
                            digest: prior.digest.clone(),
                        },
                    )
                })
                .collect(),
            trained_requests: self.trained_requests,
        }
    }

    fn from_wire(wire: WireNgramModel) -> Result<NgramModel> {
        let bad = |reason: String| Error::InvalidModel(reason);
        if wire.trained_requests == 0 {
            return Err(bad("trained on zero requests".to_string()));
        }
        if wire.fields.is_empty() {
            return Err(bad("no fields".to_string()));
        }

        let configs = ConfigSet::from_wire(wire.configs)?;
        let mut fields = BTreeMap::new();
        for (name, wf) in wire.fields {
            let key = FieldKey::parse_wire_name(&name)
                .ok_or_else(|| bad(format!("bad field name {name:?}")))?;
            let config = field_config_from_wire(wf.config)?;
            let n_max = config.n_max;
            if wf.samples_by_order.len() != n_max || wf.grams.len() != n_max {
                return Err(bad(format!(
                    "field {name:?}: order count disagrees with n_max {n_max}"
                )));
            }
            if wf.samples_by_order[0] == 0 {
                return Err(bad(format!("field {name:?}: zero occurrences")));
            }
            if wf.score_range.per_order.len() != n_max {
                return Err(bad(format!("field {name:?}: bad score range arity")));
            }
            for (lo, hi) in wf
                .score_range
                .per_order
                .iter()
                .chain(std::iter::once(&wf.score_range.total))
            {
                if !(lo <= hi) {
                    return Err(bad(format!("field {name:?}: score range {lo} > {hi}")));
                }
            }
            wf.length.validate(&format!("field {name:?} length"))?;
            let mut grams = Vec::with_capacity(n_max);
            for (ix, wire_grams) in wf.grams.into_iter().enumerate() {
                grams.push(grams_from_wire(
                    wire_grams,
                    ix + 1,
                    &format!("field {name:?}"),
                )?);
            }
            fields.insert(
                key,
                FieldModel {
                    config,
                    samples_by_order: wf.samples_by_order,
                    length: wf.length,
                    grams,
                    score_range: ScoreRange {
                        per_order: wf.score_range.per_order,
                        total: wf.score_range.total,
                    },
                },
            );
        }

        let mut priors = BTreeMap::new();
        for (id, wp) in wire.priors {
            let mut by_order = Vec::with_capacity(wp.by_order.len());
            for (ix, wire_grams) in wp.by_order.into_iter().enumerate() {
                by_order.push(grams_from_wire(wire_grams, ix + 1, &format!("prior {id:?}"))?);
            }
            priors.insert(
                id,
                Prior {
                    digest: wp.digest,
                    by_order,
                },
            );
        }
        for fm in fields.values() {
            if let Some(id) = &fm.config.prior {
                if !priors.contains_key(id) {
                    return Err(bad(format!("missing prior {id:?}")));
                }
            }
        }

        Ok(NgramModel {
            fields,
            configs,
            priors,
            trained_requests: wire.trained_requests,
        })
    }
}

fn grams_to_wire(grams: &BTreeMap<Gram, Distribution>) -> Vec<(Gram, Distribution)> {
    grams.iter().map(|(g, d)| (g.clone(), d.clone())).collect()
}

fn grams_from_wire(
    wire: Vec<(Gram, Distribution)>,
    order: usize,
    what: &str,
) -> Result<BTreeMap<Gram, Distribution>> {
    let mut map = BTreeMap::new();
    for (gram, dist) in wire {
        if gram.len() != order {
            return Err(Error::InvalidModel(format!(
                "{what}: gram {gram:?} under order {order}"
            )));
        }
        dist.validate(&format!("{what} gram {gram:?}"))?;
        if map.insert(gram.clone(), dist).is_some() {
            return Err(Error::InvalidModel(format!(
                "{what}: duplicate gram {gram:?}"
            )));
        }
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Wire form (field order = JSON key order; keep alphabetical)

#[derive(Serialize, Deserialize)]
struct WireNgramModel {
    configs: WireConfigSet,
    fields: BTreeMap<String, WireFieldModel>,
    priors: BTreeMap<String, WirePrior>,
    trained_requests: u64,
}

#[derive(Serialize, Deserialize)]
struct WireFieldModel {
    config: WireFieldConfig,
    grams: Vec<Vec<(Gram, Distribution)>>,
    length: Distribution,
    samples_by_order: Vec<u64>,
    score_range: WireScoreRange,
}

#[derive(Serialize, Deserialize)]
struct WireScoreRange {
    per_order: Vec<(f64, f64)>,
    total: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct WirePrior {
    by_order: Vec<Vec<(Gram, Distribution)>>,
    digest: String,
}
