//! Cross-cutting invariants checked on generated inputs.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wafml_core::features::FeatureVector;
use wafml_core::gmm::{fit_gmm, GmmModel};
use wafml_core::http::{parse_request, FieldKey, RawRequest};
use wafml_core::ngram::{
    abstract_text, extract_ngrams, field_attributes, train, ConfigSet, FieldConfig, ValueMode,
};
use wafml_core::stats::RunningStats;
use wafml_core::verdict::Label;
use wafml_core::Verdict;

proptest! {
    /// Running statistics agree with a two-pass batch computation.
    #[test]
    fn welford_matches_two_pass(values in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let mut running = RunningStats::new();
        for &v in &values {
            running.push(v);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;

        let tol = 1e-9 * mean.abs().max(1.0);
        prop_assert!((running.mean() - mean).abs() <= tol);
        let tol = 1e-9 * var.abs().max(1.0);
        prop_assert!((running.variance() - var).abs() <= tol);
        prop_assert_eq!(running.n(), values.len() as u64);
    }

    /// Abstraction is a projection: applying it twice changes nothing.
    #[test]
    fn abstraction_is_idempotent(text in any::<String>()) {
        let once = abstract_text(&text);
        prop_assert_eq!(abstract_text(&once), once);
    }

    /// Abstracted text never contains digits or combining marks, and `N`
    /// is the only capital ASCII letter that survives.
    #[test]
    fn abstraction_postconditions(text in any::<String>()) {
        let out = abstract_text(&text);
        for c in out.chars() {
            prop_assert!(!c.is_ascii_digit(), "digit {c:?} survived");
            prop_assert!(
                !unicode_normalization::char::is_combining_mark(c),
                "combining mark {c:?} survived"
            );
            if c.is_ascii_uppercase() {
                prop_assert_eq!(c, 'N');
            }
        }
    }

    /// L tokens yield exactly max(L - m + 1, 0) m-grams, counted with
    /// multiplicity.
    #[test]
    fn ngram_window_count_law(
        tokens in prop::collection::vec("[ab]", 0..30),
        n_max in 1usize..5,
    ) {
        let grams = extract_ngrams(&tokens, n_max);
        for (ix, counts) in grams.iter().enumerate() {
            let m = ix + 1;
            let expected = tokens.len().saturating_sub(m - 1).min(tokens.len());
            let total: u64 = counts.values().sum();
            prop_assert_eq!(total, expected as u64, "order {}", m);
        }
    }

    /// Frequency-mode attribute values sum to one at every order the field
    /// actually produced.
    #[test]
    fn frequencies_sum_to_one(contents in "\\PC{0,24}", n_max in 1usize..5) {
        let cfg = FieldConfig {
            n_max,
            delimiter: None,
            mode: ValueMode::Frequency,
            excluded: false,
            prior: None,
        };
        let attrs = field_attributes(&contents, &cfg);
        for (ix, order) in attrs.by_order.iter().enumerate() {
            if order.is_empty() {
                continue;
            }
            let sum: f64 = order.values().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "order {} sums to {}", ix + 1, sum);
        }
    }

    /// Raising λ only widens the acceptance region.
    #[test]
    fn lambda_widens_acceptance(
        counts in prop::collection::vec(0u32..30, 4),
        a in 0.01f64..1.0,
        b in 0.01f64..1.0,
    ) {
        let model = two_blob_model();
        let x = FeatureVector { request_id: "p".to_string(), counts };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if model.classify(&x, lo).label == Label::Normal {
            prop_assert_eq!(model.classify(&x, hi).label, Label::Normal);
        }
    }

    /// Every training request classifies Normal right after training: its
    /// own scores defined the acceptance ranges.
    #[test]
    fn ngram_training_set_is_accepted(
        rows in prop::collection::vec(("[a-c]{1,4}", 0u32..100, "[a-z]{1,6}"), 1..6),
    ) {
        let requests: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, (seg, page, word))| {
                parse_request(&RawRequest {
                    id: format!("t:{i}"),
                    text: format!(
                        "GET /{seg}/list?page={page}&q={word} HTTP/1.1\nHost: shop.example"
                    ),
                })
                .expect("generated request parses")
            })
            .collect();
        let model = train(&requests, ConfigSet::builtin(3), BTreeMap::new()).unwrap();
        for r in &requests {
            let v = model.classify(r);
            prop_assert_eq!(v.label, Label::Normal, "{}: score {}", &r.id, v.score);
        }
    }

    /// Rule-verdict files survive a render/parse round trip.
    #[test]
    fn rule_verdicts_round_trip(
        entries in prop::collection::hash_map("[A-Za-z0-9:._-]{1,12}", any::<bool>(), 0..20),
    ) {
        let text: String = entries
            .iter()
            .map(|(id, attack)| {
                let label = if *attack { Label::Attack } else { Label::Normal };
                format!("{id}\t{}\n", label.as_str())
            })
            .collect();
        let set = wafml_core::combine::RuleVerdictSet::from_tsv_text(&text, "prop").unwrap();
        prop_assert_eq!(set.len(), entries.len());
        for (id, attack) in &entries {
            let expected = if *attack { Label::Attack } else { Label::Normal };
            prop_assert_eq!(set.get(id), Some(expected));
        }
    }

    /// Field identities survive their wire spelling.
    #[test]
    fn field_key_wire_round_trip(
        header in "[a-z][a-z0-9-]{0,10}",
        param in "[A-Za-z_][A-Za-z0-9_]{0,10}",
    ) {
        let keys = [
            FieldKey::Uri,
            FieldKey::Body,
            FieldKey::header(&header),
            FieldKey::Param(param),
        ];
        for key in keys {
            prop_assert_eq!(FieldKey::parse_wire_name(&key.wire_name()), Some(key));
        }
    }

    /// Combination never flags what the detector alone would pass, and
    /// never passes what both experts flag.
    #[test]
    fn combine_is_conjunction(oc_attack in any::<bool>(), rules_attack in any::<bool>()) {
        let oc = Verdict::from_score(if oc_attack { 1.0 } else { -1.0 });
        let rules = if rules_attack { Label::Attack } else { Label::Normal };
        let combined = wafml_core::combine::combine(oc, rules);
        prop_assert_eq!(
            combined.label == Label::Attack,
            oc_attack && rules_attack
        );
        prop_assert_eq!(combined.score, oc.score);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    /// The covariance floor applied after each M-step can knock the
    /// likelihood down, so the fit keeps the best iterate rather than the
    /// last. Recomputing the training log-likelihood under the returned
    /// mixture (textbook Cholesky, public fields only) must reproduce the
    /// maximum of the recorded trace.
    #[test]
    fn em_keeps_the_best_iterate(seed in 0u64..1u64 << 48) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = blob(&mut rng, &[12.0, 1.0, 4.0], 1.5, 30);
        vectors.extend(blob(&mut rng, &[2.0, 9.0, 0.0], 1.5, 30));
        let model = fit_gmm(&vectors, 3, seed, "trace-test").unwrap();
        let trace = &model.meta.loglik_trace;
        prop_assert!(!trace.is_empty());
        prop_assert!(trace.iter().all(|v| v.is_finite()));
        let best = trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let recomputed = mixture_loglik(&model, &vectors);
        let tol = 1e-9 * best.abs().max(1.0);
        prop_assert!(
            (recomputed - best).abs() <= tol,
            "returned mixture scores {}, trace max is {}",
            recomputed,
            best
        );
    }
}

/// Dense lower-triangular Cholesky, independent of the crate's internals.
fn cholesky_lower(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for t in 0..j {
                s -= l[i][t] * l[j][t];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Total log-likelihood of `vectors` under the returned mixture, computed
/// from public component fields only.
fn mixture_loglik(model: &GmmModel, vectors: &[FeatureVector]) -> f64 {
    let d = model.components[0].mean.len();
    let comps: Vec<(f64, Vec<f64>, Vec<Vec<f64>>, f64)> = model
        .components
        .iter()
        .map(|c| {
            let cov: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| c.covariance[(i, j)]).collect())
                .collect();
            let l = cholesky_lower(&cov).expect("returned covariance is positive-definite");
            let logdet = 2.0 * (0..d).map(|i| l[i][i].ln()).sum::<f64>();
            let mean: Vec<f64> = (0..d).map(|i| c.mean[i]).collect();
            (c.weight, mean, l, logdet)
        })
        .collect();

    let norm = (d as f64) * (2.0 * std::f64::consts::PI).ln();
    vectors
        .iter()
        .map(|v| {
            let logps: Vec<f64> = comps
                .iter()
                .map(|(w, mean, l, logdet)| {
                    let mut y: Vec<f64> = v
                        .counts
                        .iter()
                        .zip(mean)
                        .map(|(&c, m)| f64::from(c) - m)
                        .collect();
                    for i in 0..d {
                        let mut s = y[i];
                        for j in 0..i {
                            s -= l[i][j] * y[j];
                        }
                        y[i] = s / l[i][i];
                    }
                    let maha2: f64 = y.iter().map(|v| v * v).sum();
                    w.ln() - 0.5 * (norm + logdet + maha2)
                })
                .collect();
            let hi = logps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi + logps.iter().map(|v| (v - hi).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// Integer count vectors scattered around a center.
fn blob(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64, count: usize) -> Vec<FeatureVector> {
    (0..count)
        .map(|i| {
            let counts = center
                .iter()
                .map(|&c| {
                    let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
                    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    (c + sigma * z).round().max(0.0) as u32
                })
                .collect();
            FeatureVector {
                request_id: format!("b:{i}"),
                counts,
            }
        })
        .collect()
}

/// Shared fixture: a mixture fit on two well-separated blobs in 4-D.
fn two_blob_model() -> &'static GmmModel {
    static MODEL: OnceLock<GmmModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x2b10b);
        let mut vectors = blob(&mut rng, &[10.0, 0.0, 3.0, 1.0], 1.2, 40);
        vectors.extend(blob(&mut rng, &[0.0, 8.0, 0.0, 5.0], 1.2, 40));
        fit_gmm(&vectors, 3, 7, "prop-fixture").expect("fixture fits")
    })
}
