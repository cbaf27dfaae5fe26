//! Brute-force reference distributions.
//!
//! Nothing here reuses the permanent kernels or the marginal expansion: the
//! full distribution is a double sum over photon-to-output assignments with
//! the overlap applied slot by slot, and the classical distribution routes
//! photons one at a time. Both scale factorially and are meant for
//! desk-sized checks only.

use std::collections::BTreeMap;
use std::path::Path;

use itertools::Itertools;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limits::{binomial, EnumerationLimits};
use crate::permanent::Interferometer;
use crate::states::{Distinguishability, InputState};

/// Largest photon number the oracle accepts.
pub const MAX_ORACLE_PHOTONS: usize = 7;

/// Probability of every output multiset (collisions included), keyed by the
/// sorted mode list.
#[derive(Clone, Debug, PartialEq)]
pub struct FullDistribution {
    pub n_modes: usize,
    pub photon_number: usize,
    pub entries: BTreeMap<Vec<usize>, f64>,
}

impl FullDistribution {
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn get(&self, pattern: &[usize]) -> f64 {
        let mut key = pattern.to_vec();
        key.sort_unstable();
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    /// Total probability of outcomes with two or more photons in one mode.
    pub fn collision_weight(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(p, _)| !p.iter().all_unique())
            .map(|(_, v)| v)
            .sum()
    }

    /// Dump as a JSON object mapping `"m0,m1,..."` to probability.
    pub fn to_json(&self) -> serde_json::Value {
        let map = self
            .entries
            .iter()
            .map(|(k, v)| (k.iter().join(","), serde_json::json!(v)))
            .collect::<serde_json::Map<_, _>>();
        serde_json::Value::Object(map)
    }

    pub fn from_json(value: &serde_json::Value, n_modes: usize) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidInput("distribution dump must be a JSON object".into()))?;
        let mut entries = BTreeMap::new();
        let mut photon_number = None;
        for (key, v) in obj {
            let mut pattern = if key.is_empty() {
                Vec::new()
            } else {
                key.split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidInput(format!("bad pattern key {key:?}")))?
            };
            pattern.sort_unstable();
            if let Some(&index) = pattern.iter().find(|&&m| m >= n_modes) {
                return Err(Error::Bounds {
                    index,
                    bound: n_modes,
                });
            }
            match photon_number {
                None => photon_number = Some(pattern.len()),
                Some(n) if n != pattern.len() => {
                    return Err(Error::InvalidInput(format!(
                        "pattern {key:?} has {} photons, expected {n}",
                        pattern.len()
                    )))
                }
                _ => {}
            }
            let p = v
                .as_f64()
                .ok_or_else(|| Error::InvalidInput(format!("probability for {key:?} is not a number")))?;
            entries.insert(pattern, p);
        }
        Ok(Self {
            n_modes,
            photon_number: photon_number.unwrap_or(0),
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, n_modes: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?, n_modes)
    }
}

fn check_size(u: &Interferometer, state: &InputState, limits: &EnumerationLimits) -> Result<()> {
    if u.n_modes() != state.n_modes() {
        return Err(Error::Dimension(format!(
            "interferometer has {} modes, state has {}",
            u.n_modes(),
            state.n_modes()
        )));
    }
    let n = state.photon_number();
    if n > MAX_ORACLE_PHOTONS {
        return Err(Error::EnumerationLimit {
            what: "oracle photon number",
            needed: n as u128,
            limit: MAX_ORACLE_PHOTONS as u128,
        });
    }
    let count = binomial((u.n_modes() + n).saturating_sub(1) as u64, n as u64);
    EnumerationLimits::check("oracle output multisets", count, limits.max_oracle_patterns)
}

fn occupation_factorials(pattern: &[usize]) -> f64 {
    pattern
        .iter()
        .counts()
        .values()
        .map(|&c| (1..=c).map(|i| i as f64).product::<f64>())
        .product()
}

fn clamp(p: Complex64, pattern: &[usize]) -> Result<f64> {
    if p.im.abs() > 1e-10 {
        return Err(Error::Consistency(format!(
            "oracle probability for {pattern:?} has imaginary part {:.3e}",
            p.im
        )));
    }
    if p.re < -1e-12 {
        return Err(Error::Consistency(format!(
            "oracle probability for {pattern:?} is negative ({:.3e})",
            p.re
        )));
    }
    Ok(p.re.max(0.0))
}

/// Output distribution of `state` through `u` at overlap `x`.
///
/// For each output multiset `phi` (slots `s = 0..n`):
///
/// ```text
/// P(phi) = 1/mu(phi) sum_{xi, chi} c_xi conj(c_chi)
///          sum_{sigma, tau} prod_s U[xi_sigma(s), phi_s] conj(U[chi_tau(s), phi_s]) G(xi_sigma(s), chi_tau(s))
/// ```
///
/// with `G(a, b) = 1` when the input modes agree and `x` otherwise.
pub fn full_distribution(
    u: &Interferometer,
    state: &InputState,
    x: Distinguishability,
    limits: &EnumerationLimits,
) -> Result<FullDistribution> {
    check_size(u, state, limits)?;
    let n = state.photon_number();
    let n_modes = u.n_modes();
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let overlap = x.value();

    let entries = (0..n_modes)
        .combinations_with_replacement(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|phi| {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in state.terms() {
                let xi = t.xi.modes();
                for s in state.terms() {
                    let chi = s.xi.modes();
                    let w = t.amplitude * s.amplitude.conj();
                    let mut pair_sum = Complex64::new(0.0, 0.0);
                    for sigma in &perms {
                        for tau in &perms {
                            let mut prod = Complex64::new(1.0, 0.0);
                            for slot in 0..n {
                                let a = xi[sigma[slot]];
                                let b = chi[tau[slot]];
                                let g = if a == b { 1.0 } else { overlap };
                                prod *= u.amplitude(a, phi[slot]) * u.amplitude(b, phi[slot]).conj() * g;
                            }
                            pair_sum += prod;
                        }
                    }
                    acc += w * pair_sum;
                }
            }
            let p = acc / occupation_factorials(&phi);
            clamp(p, &phi).map(|p| (phi, p))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(FullDistribution {
        n_modes,
        photon_number: n,
        entries,
    })
}

/// Distribution for fully distinguishable particles: each photon is routed
/// independently with probabilities `|U[in, out]|^2`, mixed over input
/// assignments with weights `|c_xi|^2 mu(xi)`.
pub fn classical_distribution(
    u: &Interferometer,
    state: &InputState,
    limits: &EnumerationLimits,
) -> Result<FullDistribution> {
    check_size(u, state, limits)?;
    let n_modes = u.n_modes();
    let mut entries: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for term in state.terms() {
        let mut partial: BTreeMap<Vec<usize>, f64> = BTreeMap::from([(Vec::new(), term.weight())]);
        for &input in term.xi.modes() {
            let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for (pattern, p) in &partial {
                for out in 0..n_modes {
                    let q = u.amplitude(input, out).norm_sqr();
                    if q == 0.0 {
                        continue;
                    }
                    let mut grown = pattern.clone();
                    let at = grown.partition_point(|&m| m <= out);
                    grown.insert(at, out);
                    *next.entry(grown).or_insert(0.0) += p * q;
                }
            }
            partial = next;
        }
        for (pattern, p) in partial {
            *entries.entry(pattern).or_insert(0.0) += p;
        }
    }
    for pattern in (0..n_modes).combinations_with_replacement(state.photon_number()) {
        entries.entry(pattern).or_insert(0.0);
    }
    Ok(FullDistribution {
        n_modes,
        photon_number: state.photon_number(),
        entries,
    })
}

/// `E[prod_s n_{modes_s}]` over the distribution, for distinct modes.
///
/// Summed over single modes this is the mean photon number `n`.
pub fn moment(d: &FullDistribution, modes: &[usize]) -> Result<f64> {
    if !modes.iter().all_unique() {
        return Err(Error::UnsupportedCollision(modes.to_vec()));
    }
    Ok(d.entries
        .iter()
        .map(|(pattern, p)| {
            let counts = pattern.iter().counts();
            let hits: usize = modes.iter().map(|m| counts.get(m).copied().unwrap_or(0)).product();
            p * hits as f64
        })
        .sum())
}

/// Unordered k-marginal read off the full distribution: the probability
/// that a uniformly chosen k-subset of the detected photons occupies the
/// multiset `modes`, i.e. `E[prod_m C(n_m, a_m)] / C(n, k)` with `a_m` the
/// multiplicity of `m` in `modes`. For distinct modes this is
/// `E[prod n_m] / C(n, k)`.
pub fn marginalize(d: &FullDistribution, modes: &[usize]) -> Result<f64> {
    let k = modes.len();
    if k > d.photon_number {
        return Err(Error::InvalidQuery(format!(
            "marginal of order {k} from a {}-photon distribution",
            d.photon_number
        )));
    }
    let wanted = modes.iter().counts();
    let ways = binomial(d.photon_number as u64, k as u64) as f64;
    let total: f64 = d
        .entries
        .iter()
        .map(|(pattern, p)| {
            let have = pattern.iter().counts();
            let hits: u128 = wanted
                .iter()
                .map(|(m, &a)| binomial(have.get(m).copied().unwrap_or(0) as u64, a as u64))
                .product();
            p * hits as f64
        })
        .sum();
    Ok(total / ways)
}
