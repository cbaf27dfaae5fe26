//! Sample-set diagnostics: a log-likelihood contest between two sample sets
//! and per-pattern marginal reports.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::binomial;
use crate::marginals::{MarginalKernel, MarginalTable};
use crate::permanent::Interferometer;
use crate::sampler::Sample;
use crate::states::{multiplicity_of, Distinguishability, InputState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContestConfig {
    pub x: Distinguishability,
    pub resamples: usize,
    pub seed: u64,
    /// Two-sided coverage of the bootstrap interval.
    pub confidence: f64,
}

impl ContestConfig {
    pub fn new(x: Distinguishability) -> Self {
        Self {
            x,
            resamples: 1000,
            seed: 0,
            confidence: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContestResult {
    /// Total log-likelihood of the scored samples in each set.
    pub log_likelihood_a: f64,
    pub log_likelihood_b: f64,
    pub per_sample_a: Vec<f64>,
    pub per_sample_b: Vec<f64>,
    /// Samples with zero model probability, left out of the totals.
    pub excluded_a: usize,
    pub excluded_b: usize,
    /// Mean per-sample log-likelihood of A minus that of B.
    pub mean_difference: f64,
    pub bootstrap_ci: (f64, f64),
    pub winner: Winner,
}

/// Probabilities below this are treated as zero when scoring.
const ZERO_PROBABILITY: f64 = 1e-300;

/// Scores both sample sets under the model `(u, state, cfg.x)`.
///
/// Sets are compared by mean log-likelihood per scored sample. The tie band
/// is a percentile bootstrap of that mean difference, resampling each set
/// independently; if the interval contains zero the contest is a tie. Each
/// set's resampling stream is derived from the seed and the set's own
/// scores, so swapping the inputs exactly mirrors the result.
pub fn likelihood_contest(
    u: &Interferometer,
    state: &InputState,
    a: &[Sample],
    b: &[Sample],
    cfg: &ContestConfig,
) -> Result<ContestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("contest needs two non-empty sample sets".into()));
    }
    if cfg.resamples == 0 || !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::InvalidInput("contest needs resamples > 0 and confidence in (0, 1)".into()));
    }
    let n = state.photon_number();
    if let Some(s) = a.iter().chain(b).find(|s| s.n_detected() != n) {
        return Err(Error::InvalidInput(format!(
            "sample {:?} has {} photons, model has {n}",
            s.modes,
            s.n_detected()
        )));
    }
    if let Some(&m) = a.iter().chain(b).flat_map(|s| &s.modes).find(|&&m| m >= u.n_modes()) {
        return Err(Error::Bounds {
            index: m,
            bound: u.n_modes(),
        });
    }

    let kernel = MarginalKernel::new(state, n, cfg.x, None)?;
    let mut patterns: Vec<Vec<usize>> = a.iter().chain(b).map(Sample::pattern).collect();
    patterns.sort_unstable();
    patterns.dedup();
    let probs: HashMap<Vec<usize>, f64> = patterns
        .into_par_iter()
        .map(|p| {
            let s: Complex64 = kernel.raw_sum(u, &p);
            let prob = s.re / multiplicity_of(&p) as f64;
            (p, prob)
        })
        .collect();

    let score = |set: &[Sample]| -> (Vec<f64>, usize) {
        let mut lls = Vec::with_capacity(set.len());
        let mut excluded = 0;
        for s in set {
            let p = probs[&s.pattern()];
            if p > ZERO_PROBABILITY {
                lls.push(p.ln());
            } else {
                excluded += 1;
            }
        }
        (lls, excluded)
    };
    let (per_sample_a, excluded_a) = score(a);
    let (per_sample_b, excluded_b) = score(b);
    if excluded_a > 0 || excluded_b > 0 {
        log::warn!("excluded zero-probability samples: {excluded_a} from A, {excluded_b} from B");
    }
    if per_sample_a.is_empty() || per_sample_b.is_empty() {
        return Err(Error::InvalidInput(
            "a sample set has no outcome with nonzero model probability".into(),
        ));
    }

    let mean_difference = mean(&per_sample_a) - mean(&per_sample_b);
    let boot_a = bootstrap_means(&per_sample_a, cfg.resamples, stream_seed(cfg.seed, &per_sample_a));
    let boot_b = bootstrap_means(&per_sample_b, cfg.resamples, stream_seed(cfg.seed, &per_sample_b));
    let mut diffs: Vec<f64> = boot_a.iter().zip(&boot_b).map(|(x, y)| x - y).collect();
    diffs.sort_by(f64::total_cmp);
    let tail = (1.0 - cfg.confidence) / 2.0;
    let bootstrap_ci = (quantile(&diffs, tail), quantile(&diffs, 1.0 - tail));
    let winner = if bootstrap_ci.0 > 0.0 {
        Winner::A
    } else if bootstrap_ci.1 < 0.0 {
        Winner::B
    } else {
        Winner::Tie
    };

    Ok(ContestResult {
        log_likelihood_a: per_sample_a.iter().sum(),
        log_likelihood_b: per_sample_b.iter().sum(),
        per_sample_a,
        per_sample_b,
        excluded_a,
        excluded_b,
        mean_difference,
        bootstrap_ci,
        winner,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn stream_seed(seed: u64, values: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for v in values {
        v.to_bits().hash(&mut h);
    }
    seed ^ h.finish()
}

fn bootstrap_means(values: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| {
            let total: f64 = (0..values.len())
                .map(|_| values[rng.random_range(0..values.len())])
                .sum();
            total / values.len() as f64
        })
        .collect()
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pattern: Vec<usize>,
    pub empirical: f64,
    pub reference: f64,
    pub sigma: f64,
    pub z: f64,
}

/// Compares empirical k-marginals of `samples` with a reference table.
///
/// Each sample contributes the fraction of its k-photon subsets whose modes
/// form the table pattern, so samples of different sizes (lossy runs) can be
/// mixed. Standard errors are the multinomial `sqrt(p (1 - p) / M)` of the
/// reference value.
pub fn marginal_report(samples: &[Sample], table: &MarginalTable) -> Result<Vec<ReportRow>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to report on".into()));
    }
    let k = table.k;
    let min_photons = samples.iter().map(Sample::n_detected).min().unwrap_or(0);
    if k > min_photons {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds the smallest sample photon count {min_photons}"
        )));
    }
    let mut sums: BTreeMap<&[usize], f64> = BTreeMap::new();
    for s in samples {
        let mut occ: BTreeMap<usize, u64> = BTreeMap::new();
        for &m in &s.modes {
            *occ.entry(m).or_default() += 1;
        }
        let subsets = binomial(s.n_detected() as u64, k as u64) as f64;
        for e in &table.entries {
            let ways = subset_ways(&occ, &e.pattern);
            if ways > 0 {
                *sums.entry(&e.pattern).or_default() += ways as f64 / subsets;
            }
        }
    }
    let count = samples.len() as f64;
    Ok(table
        .entries
        .iter()
        .map(|e| {
            let empirical = sums.get(e.pattern.as_slice()).copied().unwrap_or(0.0) / count;
            let reference = e.probability;
            let sigma = (reference.clamp(0.0, 1.0) * (1.0 - reference.clamp(0.0, 1.0)) / count).sqrt();
            let diff = empirical - reference;
            let z = if sigma > 0.0 {
                diff / sigma
            } else if diff.abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
            ReportRow {
                pattern: e.pattern.clone(),
                empirical,
                reference,
                sigma,
                z,
            }
        })
        .collect())
}

/// Number of ways to choose photons with the given (sorted) mode multiset.
fn subset_ways(occ: &BTreeMap<usize, u64>, pattern: &[usize]) -> u128 {
    let mut ways = 1u128;
    for group in pattern.chunk_by(|a, b| a == b) {
        let have = occ.get(&group[0]).copied().unwrap_or(0);
        ways *= binomial(have, group.len() as u64);
        if ways == 0 {
            break;
        }
    }
    ways
}

/// Relative frequency of each detected multiset.
pub fn histogram(samples: &[Sample]) -> BTreeMap<Vec<usize>, f64> {
    let mut h: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for s in samples {
        *h.entry(s.pattern()).or_default() += 1.0;
    }
    let total = samples.len() as f64;
    h.values_mut().for_each(|v| *v /= total);
    h
}

/// Total variation distance between two distributions over the same keys;
/// missing keys count as zero.
pub fn total_variation<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut d: f64 = p
        .iter()
        .map(|(k, v)| (v - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    d += q
        .iter()
        .filter(|(k, _)| !p.contains_key(k))
        .map(|(_, v)| v.abs())
        .sum::<f64>();
    d / 2.0
}
