//! Sequential chain-rule sampling over marginal probabilities.
//!
//! Photons are placed one at a time in the expanded sample space: photon
//! `t` is drawn from `P(phi_1..phi_t) / P(phi_1..phi_{t-1})` with the earlier
//! placements held fixed. Collisions need no special treatment because the
//! ordered marginals are defined for repeated modes too.
//!
//! Each sample draws from its own ChaCha stream (`seed`, stream = sample
//! index), so the output depends only on the seed and config, never on the
//! number of worker threads.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::MarginalKernel;
use crate::permanent::Interferometer;
use crate::states::{Distinguishability, InputState};

/// Tolerance for negative or non-normalized conditionals in exact mode.
const CONDITIONAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub x: Distinguishability,
    /// Truncation order; `None` samples the exact distribution.
    pub j_max: Option<usize>,
    /// Photon-number distribution for the outer loop. `None` uses the
    /// state's own photon number.
    pub n_distribution: Option<BTreeMap<usize, f64>>,
    /// Per-photon survival probability under uniform loss.
    pub loss_eta: Option<f64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl SamplerConfig {
    pub fn new(seed: u64, x: Distinguishability) -> Self {
        Self {
            seed,
            x,
            j_max: None,
            n_distribution: None,
            loss_eta: None,
            workers: None,
        }
    }

    pub fn with_j_max(mut self, j_max: usize) -> Self {
        self.j_max = Some(j_max);
        self
    }

    pub fn with_loss(mut self, eta: f64) -> Self {
        self.loss_eta = Some(eta);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn with_n_distribution(mut self, dist: BTreeMap<usize, f64>) -> Self {
        self.n_distribution = Some(dist);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eta) = self.loss_eta {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidInput(format!("loss_eta = {eta} outside [0, 1]")));
            }
        }
        if let Some(dist) = &self.n_distribution {
            if dist.values().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidInput("n_distribution has a negative weight".into()));
            }
            let total: f64 = dist.values().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "n_distribution sums to {total}, expected 1"
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidInput("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output modes in placement order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub modes: Vec<usize>,
}

impl Sample {
    pub fn n_detected(&self) -> usize {
        self.modes.len()
    }

    /// Sorted mode list, i.e. the detected multiset.
    pub fn pattern(&self) -> Vec<usize> {
        let mut p = self.modes.clone();
        p.sort_unstable();
        p
    }
}

/// Precomputed marginal kernels of every order for one input state.
pub struct ChainSampler<'a> {
    u: &'a Interferometer,
    kernels: Vec<MarginalKernel>,
    truncated: bool,
}

impl<'a> ChainSampler<'a> {
    pub fn new(
        u: &'a Interferometer,
        state: &InputState,
        x: Distinguishability,
        j_max: Option<usize>,
    ) -> Result<Self> {
        if u.n_modes() != state.n_modes() {
            return Err(Error::Dimension(format!(
                "interferometer has {} modes, state has {}",
                u.n_modes(),
                state.n_modes()
            )));
        }
        let n = state.photon_number();
        let kernels = (0..=n)
            .map(|k| MarginalKernel::new(state, k, x, j_max))
            .collect::<Result<Vec<_>>>()?;
        // Truncation below the state's photon number changes some conditional.
        let truncated = j_max.is_some_and(|j| j < n) && x.value() != 0.0;
        Ok(Self {
            u,
            kernels,
            truncated,
        })
    }

    pub fn photon_number(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Distribution of the next photon's mode given the placed `prefix`.
    ///
    /// In exact mode a materially negative or vanishing conditional is an
    /// internal error. In truncated mode negative weights are clipped to
    /// zero and the rest renormalized; if nothing survives the step falls
    /// back to a uniform choice.
    pub fn conditional(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        let k = prefix.len() + 1;
        if k > self.photon_number() {
            return Err(Error::InvalidQuery(format!(
                "cannot place photon {k} of {}",
                self.photon_number()
            )));
        }
        let sums = self.kernels[k].extension_sums(self.u, prefix);
        let scale: f64 = sums.iter().map(|z| z.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
        if let Some(z) = sums.iter().find(|z| z.im.abs() > 1e-10 * scale.max(1.0)) {
            return Err(Error::Consistency(format!(
                "conditional weight {z} after {prefix:?} is not real"
            )));
        }
        let mut weights: Vec<f64> = sums.iter().map(|z| z.re).collect();

        if self.truncated {
            weights.iter_mut().for_each(|w| *w = w.max(0.0));
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                weights.iter_mut().for_each(|w| *w /= total);
            } else {
                log::warn!("all conditional weights clipped after {prefix:?}; drawing uniformly");
                let n = weights.len() as f64;
                weights.iter_mut().for_each(|w| *w = 1.0 / n);
            }
            return Ok(weights);
        }

        if let Some(w) = weights.iter().find(|&&w| w < -CONDITIONAL_TOLERANCE * scale) {
            return Err(Error::Consistency(format!(
                "negative conditional weight {w:.3e} after {prefix:?}"
            )));
        }
        weights.iter_mut().for_each(|w| *w = w.max(0.0));
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Consistency(format!(
                "conditional normalizer {total:.3e} after {prefix:?}"
            )));
        }
        if cfg!(debug_assertions) {
            // Summing over the next photon must give back the prefix marginal,
            // times (n - k + 1) from the ratio of ordered scales.
            let prefix_sum: Complex64 = self.kernels[k - 1].raw_sum(self.u, prefix);
            let expected = prefix_sum.re * (self.photon_number() - k + 1) as f64;
            debug_assert!(
                (total - expected).abs() <= CONDITIONAL_TOLERANCE * expected.abs().max(1.0),
                "conditional after {prefix:?} sums to {total}, expected {expected}"
            );
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(weights)
    }

    /// Places `photons` photons (at most the state's photon number).
    pub fn draw<R: Rng + ?Sized>(&self, photons: usize, rng: &mut R) -> Result<Vec<usize>> {
        let mut modes = Vec::with_capacity(photons);
        for _ in 0..photons {
            let weights = self.conditional(&modes)?;
            modes.push(pick(&weights, rng));
        }
        Ok(modes)
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return i;
        }
    }
    // Rounding left `acc` slightly below one; take the last mode with weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples from a mixture of fixed-photon-number states.
///
/// `states` supplies one state per photon number; `cfg.n_distribution`
/// weights them (it may also put mass on `n = 0`, which yields empty
/// samples). With a single state and no distribution every sample uses that
/// state.
pub fn sample_mixture(
    u: &Interferometer,
    states: &[InputState],
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let dist: Vec<(usize, f64)> = match (&cfg.n_distribution, states) {
        (Some(d), _) => d.iter().filter(|(_, &p)| p > 0.0).map(|(&n, &p)| (n, p)).collect(),
        (None, [only]) => vec![(only.photon_number(), 1.0)],
        (None, _) => {
            return Err(Error::InvalidInput(
                "several states given without an n_distribution".into(),
            ))
        }
    };
    let mut samplers: BTreeMap<usize, ChainSampler<'_>> = BTreeMap::new();
    for &(n, _) in &dist {
        if n == 0 || samplers.contains_key(&n) {
            continue;
        }
        let state = states
            .iter()
            .find(|s| s.photon_number() == n)
            .ok_or_else(|| Error::InvalidPhotonNumber(format!("no input state with {n} photons")))?;
        samplers.insert(n, ChainSampler::new(u, state, cfg.x, cfg.j_max)?);
    }

    let draw_one = |index: usize| -> Result<Sample> {
        let mut rng = sample_rng(cfg.seed, index as u64);
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut n = dist.last().map_or(0, |d| d.0);
        for &(m, p) in &dist {
            acc += p;
            if r < acc {
                n = m;
                break;
            }
        }
        let survivors = match cfg.loss_eta {
            Some(eta) if n > 0 => Binomial::new(n as u64, eta)
                .map_err(|e| Error::InvalidInput(format!("loss_eta: {e}")))?
                .sample(&mut rng) as usize,
            _ => n,
        };
        if survivors == 0 {
            return Ok(Sample { modes: Vec::new() });
        }
        let modes = samplers[&n].draw(survivors, &mut rng)?;
        Ok(Sample { modes })
    };

    match cfg.workers {
        Some(1) => (0..count).map(draw_one).collect(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| (0..count).into_par_iter().map(draw_one).collect()),
        None => (0..count).into_par_iter().map(draw_one).collect(),
    }
}

/// Chain-rule samples from `state`; truncated and lossy behaviour follow
/// `cfg.j_max` and `cfg.loss_eta`.
pub fn sample(
    u: &Interferometer,
    state: &InputState,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<Sample>> {
    sample_mixture(u, std::slice::from_ref(state), cfg, count)
}

/// Samples with interference truncated at `cfg.j_max` (required).
pub fn sample_truncated(
    u: &Interferometer,
    state: &InputState,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<Sample>> {
    if cfg.j_max.is_none() {
        return Err(Error::InvalidInput("truncated sampling needs j_max".into()));
    }
    sample(u, state, cfg, count)
}

/// Samples under uniform loss `cfg.loss_eta` (required): each sample keeps
/// a Binomial(n, eta) number of photons, placed by the same chain rule.
pub fn sample_lossy(
    u: &Interferometer,
    state: &InputState,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<Sample>> {
    if cfg.loss_eta.is_none() {
        return Err(Error::InvalidInput("lossy sampling needs loss_eta".into()));
    }
    sample(u, state, cfg, count)
}

/// First line of a sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub seed: u64,
    pub x: f64,
    pub j_max: Option<usize>,
    pub loss_eta: Option<f64>,
    pub n_distribution: Option<BTreeMap<usize, f64>>,
    pub count: usize,
    pub mode: String,
}

impl SampleHeader {
    pub fn from_config(cfg: &SamplerConfig, count: usize) -> Self {
        let mode = match (cfg.j_max, cfg.loss_eta) {
            (Some(_), Some(_)) => "truncated+lossy",
            (Some(_), None) => "truncated",
            (None, Some(_)) => "lossy",
            (None, None) => "exact",
        };
        Self {
            seed: cfg.seed,
            x: cfg.x.value(),
            j_max: cfg.j_max,
            loss_eta: cfg.loss_eta,
            n_distribution: cfg.n_distribution.clone(),
            count,
            mode: mode.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: SampleHeader,
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    modes: Vec<usize>,
    n_detected: usize,
}

/// Writes the header line followed by one JSON object per sample.
pub fn write_jsonl<W: Write>(mut out: W, header: &SampleHeader, samples: &[Sample]) -> Result<()> {
    serde_json::to_writer(
        &mut out,
        &HeaderLine {
            header: header.clone(),
        },
    )?;
    out.write_all(b"\n")?;
    for s in samples {
        serde_json::to_writer(
            &mut out,
            &SampleLine {
                modes: s.modes.clone(),
                n_detected: s.n_detected(),
            },
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a sample file; the header line is optional.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<(Option<SampleHeader>, Vec<Sample>)> {
    let mut header = None;
    let mut samples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 0 && line.contains("\"header\"") {
            header = Some(serde_json::from_str::<HeaderLine>(&line)?.header);
            continue;
        }
        let parsed: SampleLine = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("sample line {}: {e}", lineno + 1)))?;
        if parsed.n_detected != parsed.modes.len() {
            return Err(Error::InvalidInput(format!(
                "sample line {}: n_detected {} but {} modes",
                lineno + 1,
                parsed.n_detected,
                parsed.modes.len()
            )));
        }
        samples.push(Sample {
            modes: parsed.modes,
        });
    }
    Ok((header, samples))
}
