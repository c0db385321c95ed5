//! One-class Gaussian mixture classifier over feature vectors.
//!
//! Training fits mixtures for every candidate component count k = 1..k_max
//! (EM, k-means++ seeding, fixed seed, 5 restarts), picks k by BIC, then
//! records per-cluster Mahalanobis distance statistics over the training
//! set. Classification accepts a vector when at least one cluster's
//! distance falls within that cluster's threshold λ·(mean + 10·std).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::stats::RunningStats;
use crate::verdict::Verdict;

const RESTARTS: u64 = 5;
const MAX_ITERS: usize = 200;
const REL_TOL: f64 = 1e-6;
/// Regularization fallback when every covariance diagonal entry is zero.
const EPS_FALLBACK: f64 = 1e-6;

/// One mixture component with its training distance statistics.
#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    /// Regularized covariance (symmetric positive-definite).
    pub covariance: DMatrix<f64>,
    pub dist_mean: f64,
    pub dist_std: f64,
    /// Lower Cholesky factor of `covariance`, cached for distance queries.
    chol_l: DMatrix<f64>,
}

impl GmmComponent {
    /// Builds a component from an already-regularized covariance.
    pub fn new(
        weight: f64,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        dist_mean: f64,
        dist_std: f64,
    ) -> Result<GmmComponent> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::InvalidModel(format!(
                "covariance is {}x{}, mean has dimension {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[(i, j)], covariance[(j, i)]);
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidModel(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::InvalidModel(format!("weight {weight} not in (0,1]")));
        }
        if !(dist_mean >= 0.0 && dist_std >= 0.0) {
            return Err(Error::InvalidModel(
                "negative distance statistics".to_string(),
            ));
        }
        let chol = nalgebra::Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::InvalidModel("covariance not positive-definite".to_string()))?;
        Ok(GmmComponent {
            weight,
            mean,
            covariance,
            dist_mean,
            dist_std,
            chol_l: chol.l(),
        })
    }

    fn mahalanobis_vec(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.mean.len(), "dimension mismatch");
        let mut d = x - &self.mean;
        let solved = self.chol_l.solve_lower_triangular_mut(&mut d);
        debug_assert!(solved, "Cholesky factor has zero diagonal");
        d.norm()
    }
}

/// Mahalanobis distance sqrt((x−μ)ᵀ Σ⁻¹ (x−μ)) to a component.
pub fn mahalanobis(x: &FeatureVector, c: &GmmComponent) -> f64 {
    c.mahalanobis_vec(&counts_to_vector(&x.counts))
}

/// Cluster acceptance threshold λ·(dist_mean + 10·dist_std).
pub fn compute_threshold(c: &GmmComponent, lambda: f64) -> f64 {
    debug_assert!(lambda > 0.0 && lambda <= 1.0, "lambda outside (0,1]");
    lambda * (c.dist_mean + 10.0 * c.dist_std)
}

/// Training provenance and diagnostics carried inside the model file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub k_max: usize,
    /// BIC per candidate k, in candidate order.
    pub bic_by_k: Vec<(usize, f64)>,
    /// False when the chosen fit hit the iteration cap before converging.
    pub converged: bool,
    /// True when all training vectors were identical.
    pub degenerate: bool,
    /// Log-likelihood after each E-step of the chosen fit. EM alone never
    /// lowers it, but the ε·Id floor applied after each M-step can knock
    /// it down by a lot when the data is well spread (ε is a full standard
    /// deviation), which is why the best iterate is kept, not the last.
    pub loglik_trace: Vec<f64>,
    pub n_training: usize,
    /// Clusters whose max training distance exceeds mean + 10·std; training
    /// vectors in them are not guaranteed to classify Normal at λ = 1.
    pub threshold_violations: Vec<usize>,
}

/// A trained mixture bound to the lexicon that produced its vectors.
#[derive(Debug, Clone)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    pub lexicon_hash: String,
    pub meta: TrainingMeta,
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Mahalanobis distance to every component, in component order.
    pub fn distances(&self, counts: &[u32]) -> Vec<f64> {
        let x = counts_to_vector(counts);
        self.components
            .iter()
            .map(|c| c.mahalanobis_vec(&x))
            .collect()
    }

    /// Per-component thresholds at λ = 1 (scale by λ for other operating
    /// points).
    pub fn base_thresholds(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| compute_threshold(c, 1.0))
            .collect()
    }

    pub fn classify(&self, x: &FeatureVector, lambda: f64) -> Verdict {
        classify(self, x, lambda)
    }
}

/// Accepts x when some cluster's distance is within its threshold.
/// Score is min over clusters of (distance − threshold), ≤ 0 ⇔ Normal.
pub fn classify(model: &GmmModel, x: &FeatureVector, lambda: f64) -> Verdict {
    let score = model
        .distances(&x.counts)
        .iter()
        .zip(&model.components)
        .map(|(dist, c)| dist - compute_threshold(c, lambda))
        .fold(f64::INFINITY, f64::min);
    Verdict::from_score(score)
}

fn counts_to_vector(counts: &[u32]) -> DVector<f64> {
    DVector::from_iterator(counts.len(), counts.iter().map(|&c| c as f64))
}

// ---------------------------------------------------------------------------
// Fitting

/// Deduplicated training set: unique points as matrix columns with
/// multiplicities as weights. EM over weighted unique points is exactly EM
/// over the raw list, at a fraction of the cost on repetitive traffic.
struct Data {
    /// d × m, one column per unique point.
    x: DMatrix<f64>,
    /// Multiplicity of each column.
    w: Vec<f64>,
    /// Total vector count including duplicates.
    n_total: usize,
    d: usize,
    m: usize,
}

impl Data {
    fn from_vectors(vectors: &[FeatureVector]) -> Data {
        let d = vectors[0].counts.len();
        let mut index: std::collections::HashMap<&[u32], usize> = std::collections::HashMap::new();
        let mut unique: Vec<&[u32]> = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        for v in vectors {
            match index.entry(v.counts.as_slice()) {
                std::collections::hash_map::Entry::Occupied(e) => w[*e.get()] += 1.0,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(unique.len());
                    unique.push(&v.counts);
                    w.push(1.0);
                }
            }
        }
        let m = unique.len();
        let x = DMatrix::from_fn(d, m, |i, j| unique[j][i] as f64);
        Data {
            x,
            w,
            n_total: vectors.len(),
            d,
            m,
        }
    }
}

#[derive(Clone)]
struct FittedComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    logdet: f64,
}

struct EmResult {
    components: Vec<FittedComponent>,
    loglik: f64,
    converged: bool,
    /// Log-likelihood after each E-step, in iteration order.
    trace: Vec<f64>,
}

/// Fits mixtures for k = 1..k_max, selects k by BIC (ties to smaller k),
/// and computes per-cluster distance statistics over the training vectors.
///
/// All vectors identical is not an error: the result is a single component
/// centered on the point with a fallback-regularized covariance, flagged
/// `degenerate`. Hitting the iteration cap yields the best iterate with
/// `converged = false`.
pub fn fit_gmm(
    vectors: &[FeatureVector],
    k_max: usize,
    seed: u64,
    lexicon_hash: &str,
) -> Result<GmmModel> {
    if vectors.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 training vectors, got {}",
            vectors.len()
        )));
    }
    assert!(k_max >= 1, "k_max must be at least 1");
    let d = vectors[0].counts.len();
    assert!(d >= 1, "feature dimension must be at least 1");
    assert!(
        vectors.iter().all(|v| v.counts.len() == d),
        "feature vectors have mixed dimensions"
    );

    let data = Data::from_vectors(vectors);
    let degenerate = data.m == 1;
    let k_hi = k_max.min(data.m);

    // Candidate (k, restart) fits are independent; each seeds its own RNG,
    // so the parallel schedule cannot affect results.
    let specs: Vec<(usize, u64)> = (1..=k_hi)
        .flat_map(|k| {
            let restarts = if k == 1 { 1 } else { RESTARTS };
            (0..restarts).map(move |r| (k, r))
        })
        .collect();
    let fits: Vec<EmResult> = specs
        .par_iter()
        .map(|&(k, restart)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, k as u64, restart));
            run_em(&data, k, &mut rng)
        })
        .collect();

    // Best restart per k by likelihood, first wins ties; then BIC over k.
    let mut best_per_k: Vec<(usize, &EmResult)> = Vec::new();
    for (&(k, _), fit) in specs.iter().zip(&fits) {
        match best_per_k.last_mut() {
            Some((last_k, best)) if *last_k == k => {
                if fit.loglik > best.loglik {
                    *best = fit;
                }
            }
            _ => best_per_k.push((k, fit)),
        }
    }
    let n = data.n_total as f64;
    let bic_by_k: Vec<(usize, f64)> = best_per_k
        .iter()
        .map(|&(k, fit)| {
            let p = (k - 1) + k * d + k * d * (d + 1) / 2;
            (k, p as f64 * n.ln() - 2.0 * fit.loglik)
        })
        .collect();
    let (chosen_ix, _) = bic_by_k
        .iter()
        .enumerate()
        .min_by(|(_, (_, a)), (_, (_, b))| a.total_cmp(b))
        .expect("at least one candidate");
    let chosen = best_per_k[chosen_ix].1;

    // Hard-assign training points by responsibility and collect distance
    // statistics per cluster, duplicates counted by weight.
    let k = chosen.components.len();
    let mut dist_stats = vec![RunningStats::new(); k];
    let log_weights: Vec<f64> = chosen.components.iter().map(|c| c.weight.ln()).collect();
    for j in 0..data.m {
        let x = data.x.column(j).into_owned();
        let mut best_k = 0;
        let mut best_logp = f64::NEG_INFINITY;
        for (ki, comp) in chosen.components.iter().enumerate() {
            let logp = log_weights[ki] + log_gauss(&x, comp, data.d);
            if logp > best_logp {
                best_logp = logp;
                best_k = ki;
            }
        }
        let mut diff = &x - &chosen.components[best_k].mean;
        chosen.components[best_k]
            .chol_l
            .solve_lower_triangular_mut(&mut diff);
        dist_stats[best_k].push_weighted(diff.norm(), data.w[j]);
    }

    let mut components = Vec::with_capacity(k);
    let mut threshold_violations = Vec::new();
    for (ki, comp) in chosen.components.iter().enumerate() {
        let stats = &dist_stats[ki];
        let (dist_mean, dist_std) = if stats.is_empty() {
            (0.0, 0.0)
        } else {
            (stats.mean(), stats.std_dev())
        };
        if !stats.is_empty() && stats.max() > dist_mean + 10.0 * dist_std {
            threshold_violations.push(ki);
        }
        components.push(GmmComponent {
            weight: comp.weight,
            mean: comp.mean.clone(),
            covariance: comp.cov.clone(),
            dist_mean,
            dist_std,
            chol_l: comp.chol_l.clone(),
        });
    }

    Ok(GmmModel {
        components,
        lexicon_hash: lexicon_hash.to_string(),
        meta: TrainingMeta {
            seed,
            k_max,
            bic_by_k,
            converged: chosen.converged,
            degenerate,
            loglik_trace: chosen.trace.clone(),
            n_training: vectors.len(),
            threshold_violations,
        },
    })
}

/// SplitMix64-style mixer keeping candidate RNG streams disjoint.
fn mix_seed(seed: u64, k: u64, restart: u64) -> u64 {
    let mut z = seed
        ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ restart.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn log_gauss(x: &DVector<f64>, comp: &FittedComponent, d: usize) -> f64 {
    let mut diff = x - &comp.mean;
    comp.chol_l.solve_lower_triangular_mut(&mut diff);
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + comp.logdet + diff.norm_squared())
}

fn run_em(data: &Data, k: usize, rng: &mut ChaCha8Rng) -> EmResult {
    let (d, m) = (data.d, data.m);
    let n: f64 = data.w.iter().sum();

    // Initial parameters: k-means++ seeds for means, the global covariance
    // for every component, uniform weights.
    let seeds = kmeanspp_seeds(data, k, rng);
    let global_mean = weighted_mean_all(data, n);
    let global_cov = weighted_cov_all(data, &global_mean, n);
    let mut comps: Vec<FittedComponent> = seeds
        .into_iter()
        .map(|j| {
            let (chol_l, logdet, cov) = regularize(global_cov.clone());
            FittedComponent {
                weight: 1.0 / k as f64,
                mean: data.x.column(j).into_owned(),
                cov,
                chol_l,
                logdet,
            }
        })
        .collect();

    let mut logp = DMatrix::<f64>::zeros(k, m);
    let mut resp = DMatrix::<f64>::zeros(k, m);
    let mut diffs = DMatrix::<f64>::zeros(d, m);
    let mut prev_loglik = f64::NEG_INFINITY;
    let mut converged = false;
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<FittedComponent>)> = None;

    for _iter in 0..MAX_ITERS {
        // E-step: log responsibilities via logsumexp per point.
        for (ki, comp) in comps.iter().enumerate() {
            diffs.copy_from(&data.x);
            for mut col in diffs.column_iter_mut() {
                col -= &comp.mean;
            }
            comp.chol_l.solve_lower_triangular_mut(&mut diffs);
            let base = comp.weight.ln()
                - 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + comp.logdet);
            for j in 0..m {
                logp[(ki, j)] = base - 0.5 * diffs.column(j).norm_squared();
            }
        }
        let mut loglik = 0.0;
        for j in 0..m {
            let col = logp.column(j);
            let hi = col.max();
            let lse = hi + col.iter().map(|&v| (v - hi).exp()).sum::<f64>().ln();
            loglik += data.w[j] * lse;
            for ki in 0..k {
                resp[(ki, j)] = (logp[(ki, j)] - lse).exp();
            }
        }
        debug_assert!(loglik.is_finite(), "log-likelihood diverged");
        trace.push(loglik);
        // Plain EM never decreases the likelihood, but the ε·Id
        // regularization after each M-step perturbs it, so keep the best
        // iterate rather than trusting the last.
        if best.as_ref().is_none_or(|(b, _)| loglik > *b) {
            best = Some((loglik, comps.clone()));
        }

        if (loglik - prev_loglik).abs() <= REL_TOL * loglik.abs().max(1e-12) {
            converged = true;
            break;
        }
        prev_loglik = loglik;

        // M-step: weighted updates from responsibilities, then regularize.
        for (ki, comp) in comps.iter_mut().enumerate() {
            let wr: Vec<f64> = (0..m).map(|j| data.w[j] * resp[(ki, j)]).collect();
            let nk: f64 = wr.iter().sum::<f64>().max(1e-300);
            comp.weight = nk / n;
            let mut mean = DVector::<f64>::zeros(d);
            for j in 0..m {
                mean.axpy(wr[j], &data.x.column(j), 1.0);
            }
            mean /= nk;
            diffs.copy_from(&data.x);
            for (j, mut col) in diffs.column_iter_mut().enumerate() {
                col -= &mean;
                col *= wr[j].sqrt();
            }
            let cov = &diffs * diffs.transpose() / nk;
            let (chol_l, logdet, cov) = regularize(cov);
            comp.mean = mean;
            comp.cov = cov;
            comp.chol_l = chol_l;
            comp.logdet = logdet;
        }
    }

    let (loglik, components) = best.expect("at least one EM iteration ran");
    EmResult {
        components,
        loglik,
        converged,
        trace,
    }
}

/// Adds ε·Id where ε is the smallest non-zero standard deviation on the
/// diagonal (fallback when the whole diagonal is zero), escalating in the
/// rare case the factorization still fails numerically.
fn regularize(mut cov: DMatrix<f64>) -> (DMatrix<f64>, f64, DMatrix<f64>) {
    let mut eps = cov
        .diagonal()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v.sqrt())
        .fold(f64::INFINITY, f64::min);
    if !eps.is_finite() {
        eps = EPS_FALLBACK;
    }
    loop {
        for i in 0..cov.nrows() {
            cov[(i, i)] += eps;
        }
        if let Some(chol) = nalgebra::Cholesky::new(cov.clone()) {
            let l = chol.l();
            let logdet = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            return (l, logdet, cov);
        }
        eps *= 10.0;
    }
}

fn weighted_mean_all(data: &Data, n: f64) -> DVector<f64> {
    let mut mean = DVector::<f64>::zeros(data.d);
    for j in 0..data.m {
        mean.axpy(data.w[j], &data.x.column(j), 1.0);
    }
    mean / n
}

fn weighted_cov_all(data: &Data, mean: &DVector<f64>, n: f64) -> DMatrix<f64> {
    let mut diffs = data.x.clone();
    for (j, mut col) in diffs.column_iter_mut().enumerate() {
        col -= mean;
        col *= data.w[j].sqrt();
    }
    &diffs * diffs.transpose() / n
}

/// k-means++ seeding over the weighted unique points: first seed by weight,
/// later seeds proportional to weight × squared distance to nearest seed.
fn kmeanspp_seeds(data: &Data, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut seeds = Vec::with_capacity(k);
    let first = weighted_pick(&data.w, rng);
    seeds.push(first);
    let mut min_d2: Vec<f64> = (0..data.m)
        .map(|j| (data.x.column(j) - data.x.column(first)).norm_squared())
        .collect();
    while seeds.len() < k {
        let probs: Vec<f64> = min_d2
            .iter()
            .zip(&data.w)
            .map(|(&d2, &w)| d2 * w)
            .collect();
        let next = if probs.iter().sum::<f64>() > 0.0 {
            weighted_pick(&probs, rng)
        } else {
            // All remaining mass sits on existing seeds; any point works.
            weighted_pick(&data.w, rng)
        };
        seeds.push(next);
        for j in 0..data.m {
            let d2 = (data.x.column(j) - data.x.column(next)).norm_squared();
            if d2 < min_d2[j] {
                min_d2[j] = d2;
            }
        }
    }
    seeds
}

fn weighted_pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// Serialization

/// Wire structs declare fields alphabetically: serde emits them in
/// declaration order and the format promises sorted keys.
#[derive(Serialize, Deserialize)]
struct WireModel {
    bic_by_k: Vec<(usize, f64)>,
    components: Vec<WireComponent>,
    converged: bool,
    degenerate: bool,
    k_max: usize,
    lexicon_hash: String,
    loglik_trace: Vec<f64>,
    n_components: usize,
    n_training: usize,
    seed: u64,
    threshold_violations: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct WireComponent {
    /// Row-major d×d matrix.
    covariance: Vec<f64>,
    dist_mean: f64,
    dist_std: f64,
    mean: Vec<f64>,
    weight: f64,
}

impl GmmModel {
    pub fn to_json_string(&self) -> String {
        let wire = WireModel {
            bic_by_k: self.meta.bic_by_k.clone(),
            components: self
                .components
                .iter()
                .map(|c| WireComponent {
                    covariance: c.covariance.transpose().as_slice().to_vec(),
                    dist_mean: c.dist_mean,
                    dist_std: c.dist_std,
                    mean: c.mean.as_slice().to_vec(),
                    weight: c.weight,
                })
                .collect(),
            converged: self.meta.converged,
            degenerate: self.meta.degenerate,
            k_max: self.meta.k_max,
            lexicon_hash: self.lexicon_hash.clone(),
            loglik_trace: self.meta.loglik_trace.clone(),
            n_components: self.components.len(),
            n_training: self.meta.n_training,
            seed: self.meta.seed,
            threshold_violations: self.meta.threshold_violations.clone(),
        };
        let mut out = serde_json::to_string_pretty(&wire).expect("model serializes");
        out.push('\n');
        out
    }

    pub fn from_json_str(text: &str) -> Result<GmmModel> {
        let wire: WireModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidModel(format!("model JSON: {e}")))?;
        if wire.components.is_empty() {
            return Err(Error::InvalidModel("no components".to_string()));
        }
        if wire.n_components != wire.components.len() {
            return Err(Error::InvalidModel(format!(
                "n_components {} does not match component count {}",
                wire.n_components,
                wire.components.len()
            )));
        }
        let weight_sum: f64 = wire.components.iter().map(|c| c.weight).sum();
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "component weights sum to {weight_sum}, expected 1"
            )));
        }
        let mut components = Vec::with_capacity(wire.components.len());
        for (i, wc) in wire.components.into_iter().enumerate() {
            let d = wc.mean.len();
            if wc.covariance.len() != d * d {
                return Err(Error::InvalidModel(format!(
                    "component {i}: covariance has {} entries, expected {}",
                    wc.covariance.len(),
                    d * d
                )));
            }
            if wc.mean.iter().chain(&wc.covariance).any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "component {i}: non-finite parameter"
                )));
            }
            let mean = DVector::from_vec(wc.mean);
            let covariance = DMatrix::from_row_slice(d, d, &wc.covariance);
            components.push(
                GmmComponent::new(wc.weight, mean, covariance, wc.dist_mean, wc.dist_std)
                    .map_err(|e| Error::InvalidModel(format!("component {i}: {e}")))?,
            );
        }
        let dim = components[0].mean.len();
        if components.iter().any(|c| c.mean.len() != dim) {
            return Err(Error::InvalidModel(
                "components have mixed dimensions".to_string(),
            ));
        }
        Ok(GmmModel {
            components,
            lexicon_hash: wire.lexicon_hash,
            meta: TrainingMeta {
                seed: wire.seed,
                k_max: wire.k_max,
                bic_by_k: wire.bic_by_k,
                converged: wire.converged,
                degenerate: wire.degenerate,
                loglik_trace: wire.loglik_trace,
                n_training: wire.n_training,
                threshold_violations: wire.threshold_violations,
            },
        })
    }

    /// Writes atomically: temp file in the target directory, rename on
    /// success, so failures never leave a partial model behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::eval::write_atomic(path, self.to_json_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<GmmModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GmmModel::from_json_str(&text)
    }
}
