//! Exact and truncated k-photon marginal probabilities.
//!
//! Two pattern conventions are supported. An *ordered* pattern is a k-tuple
//! of output modes in the expanded sample space: the probability that the
//! first k photons, in placement order, land in those modes. An *unordered*
//! pattern is a set of k distinct modes: the probability of finding the k
//! photons on exactly that set, which is `k!` times the ordered value. For
//! `k = n` the unordered value is the ordinary output probability, and for
//! `k = 1` both conventions give the single-photon detection distribution.
//!
//! Partial distinguishability follows the uniform-overlap model: photons
//! from different input modes have overlap `x`, so a pairing between the
//! `xi` and `chi` sides is weighted by `x^j` with `j` the number of
//! positions whose input modes differ. Truncation keeps `j <= j_max`.

mod enumerate;
mod kernel;

use std::collections::BTreeMap;

use itertools::Itertools;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use enumerate::{
    derangement_count, derangements, enumerate_rho, enumerate_sigma, PermutationClass, RhoSplit,
};
pub use kernel::MarginalKernel;

use crate::error::{Error, Result};
use crate::limits::{binomial, factorial, EnumerationLimits};
use crate::permanent::{hadamard_conj_permanent, submatrix, Interferometer};
use crate::states::{multiplicity_of, Distinguishability, InputState};

/// Largest residual imaginary part tolerated before a probability is
/// declared inconsistent.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutputPattern {
    modes: Vec<usize>,
    ordered: bool,
}

impl OutputPattern {
    /// A set of distinct output modes.
    pub fn unordered(modes: Vec<usize>) -> Self {
        Self {
            modes,
            ordered: false,
        }
    }

    /// A placement-ordered tuple in the expanded sample space. Repeated
    /// modes are allowed.
    pub fn ordered(modes: Vec<usize>) -> Self {
        Self {
            modes,
            ordered: true,
        }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalQuery {
    pub pattern: OutputPattern,
    pub x: Distinguishability,
    /// Highest interference order kept; `None` keeps all.
    pub j_max: Option<usize>,
}

impl MarginalQuery {
    pub fn new(pattern: OutputPattern, x: Distinguishability, j_max: Option<usize>) -> Result<Self> {
        if let Some(j) = j_max.filter(|&j| j > pattern.k()) {
            return Err(Error::InvalidQuery(format!(
                "j_max = {j} exceeds pattern order {}",
                pattern.k()
            )));
        }
        Ok(Self { pattern, x, j_max })
    }

    pub fn exact(pattern: OutputPattern, x: Distinguishability) -> Self {
        Self {
            pattern,
            x,
            j_max: None,
        }
    }
}

fn validate(u: &Interferometer, state: &InputState, q: &MarginalQuery) -> Result<()> {
    if u.n_modes() != state.n_modes() {
        return Err(Error::Dimension(format!(
            "interferometer has {} modes, state has {}",
            u.n_modes(),
            state.n_modes()
        )));
    }
    let k = q.pattern.k();
    let n = state.photon_number();
    if k == 0 || k > n {
        return Err(Error::InvalidQuery(format!(
            "pattern order {k} must be in 1..={n}"
        )));
    }
    if let Some(j) = q.j_max.filter(|&j| j > k) {
        return Err(Error::InvalidQuery(format!("j_max = {j} exceeds pattern order {k}")));
    }
    if let Some(&index) = q.pattern.modes().iter().find(|&&m| m >= u.n_modes()) {
        return Err(Error::Bounds {
            index,
            bound: u.n_modes(),
        });
    }
    if !q.pattern.is_ordered() && !q.pattern.modes().iter().all_unique() {
        return Err(Error::UnsupportedCollision(q.pattern.modes().to_vec()));
    }
    Ok(())
}

/// Converts a complex sum to a real value, failing if the imaginary residue
/// is larger than [`IMAGINARY_TOLERANCE`] (relative to the magnitude when
/// that exceeds one).
pub(crate) fn real_part(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() > IMAGINARY_TOLERANCE * z.re.abs().max(1.0) {
        return Err(Error::Consistency(format!(
            "{what} has imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

fn pattern_scale(pattern: &OutputPattern, kernel: &MarginalKernel) -> f64 {
    if pattern.is_ordered() {
        kernel.ordered_scale()
    } else {
        kernel.ordered_scale() * factorial(pattern.k())
    }
}

/// Marginal probability of `q.pattern`, honouring `q.j_max` when present.
pub fn marginal_probability(u: &Interferometer, state: &InputState, q: &MarginalQuery) -> Result<f64> {
    validate(u, state, q)?;
    let kernel = MarginalKernel::new(state, q.pattern.k(), q.x, q.j_max)?;
    let value = kernel.raw_sum(u, q.pattern.modes()) * pattern_scale(&q.pattern, &kernel);
    real_part(value, "marginal probability")
}

/// Marginal with interference orders above `q.j_max` removed. The result
/// can be negative; no clipping happens here.
pub fn truncated_marginal(u: &Interferometer, state: &InputState, q: &MarginalQuery) -> Result<f64> {
    if q.j_max.is_none() {
        return Err(Error::InvalidQuery("truncated marginal needs j_max".into()));
    }
    marginal_probability(u, state, q)
}

/// Direct evaluation of the marginal sum: every `(xi, chi)`, every
/// permutation `sigma` of the `chi` photons and every retained subset `rho`,
/// with the complement-match check applied per term and one permanent per
/// surviving term.
///
/// Exponentially slower than [`marginal_probability`]; it exists as a
/// second route through the same formula for cross-checking.
pub fn marginal_probability_literal(
    u: &Interferometer,
    state: &InputState,
    q: &MarginalQuery,
) -> Result<f64> {
    validate(u, state, q)?;
    let n = state.photon_number();
    if n > 8 {
        return Err(Error::EnumerationLimit {
            what: "literal marginal permutations",
            needed: factorial(n) as u128,
            limit: 40_320,
        });
    }
    let k = q.pattern.k();
    let j_limit = q.j_max.unwrap_or(k);
    let phi = q.pattern.modes();
    let mut total = Complex64::new(0.0, 0.0);
    for t in state.terms() {
        for s in state.terms() {
            let w = t.amplitude * s.amplitude.conj();
            let xi = t.xi.modes();
            for sigma in enumerate_sigma(n, n) {
                let chi_sigma: Vec<usize> = sigma.sigma.iter().map(|&p| s.xi.modes()[p]).collect();
                for rho in enumerate_rho(n, k) {
                    if rho.complement.iter().any(|&p| xi[p] != chi_sigma[p]) {
                        continue;
                    }
                    let j = rho.chosen.iter().filter(|&&p| xi[p] != chi_sigma[p]).count();
                    if j > j_limit {
                        continue;
                    }
                    let weight = q.x.weight(j);
                    if weight == 0.0 {
                        continue;
                    }
                    let rows_a: Vec<usize> = rho.chosen.iter().map(|&p| xi[p]).collect();
                    let rows_b: Vec<usize> = rho.chosen.iter().map(|&p| chi_sigma[p]).collect();
                    let a = submatrix(u, &rows_a, phi)?;
                    let b = submatrix(u, &rows_b, phi)?;
                    total += w * weight * hadamard_conj_permanent(&a, &b)?;
                }
            }
        }
    }
    let scale = factorial(n - k) / factorial(n)
        * if q.pattern.is_ordered() { 1.0 } else { factorial(k) };
    real_part(total * scale, "literal marginal probability")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub pattern: Vec<usize>,
    pub probability: f64,
}

/// Probabilities of k-photon output patterns, sorted by pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub n_modes: usize,
    pub k: usize,
    pub x: f64,
    pub j_max: Option<usize>,
    /// Whether multisets with repeated modes are included.
    pub includes_collisions: bool,
    pub entries: Vec<TableEntry>,
}

impl MarginalTable {
    /// Looks up a pattern given in any order.
    pub fn get(&self, pattern: &[usize]) -> Option<f64> {
        let mut key = pattern.to_vec();
        key.sort_unstable();
        self.entries
            .binary_search_by(|e| e.pattern.cmp(&key))
            .ok()
            .map(|i| self.entries[i].probability)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn as_map(&self) -> BTreeMap<Vec<usize>, f64> {
        self.entries.iter().map(|e| (e.pattern.clone(), e.probability)).collect()
    }
}

/// Unordered marginals for every set of `k` distinct output modes.
///
/// In exact mode the entries sum to one minus the probability that two of
/// the k photons share a mode; [`marginal_multiset_distribution`] includes
/// those collision multisets as well.
pub fn marginal_distribution(
    u: &Interferometer,
    state: &InputState,
    k: usize,
    x: Distinguishability,
    j_max: Option<usize>,
    limits: &EnumerationLimits,
) -> Result<MarginalTable> {
    let n_modes = u.n_modes();
    EnumerationLimits::check(
        "marginal patterns",
        binomial(n_modes as u64, k as u64),
        limits.max_patterns,
    )?;
    let patterns: Vec<Vec<usize>> = (0..n_modes).combinations(k).collect();
    build_table(u, state, k, x, j_max, patterns, false)
}

/// Distribution of the multiset of the first `k` placed photons, collisions
/// included. Sums to one in exact mode.
pub fn marginal_multiset_distribution(
    u: &Interferometer,
    state: &InputState,
    k: usize,
    x: Distinguishability,
    j_max: Option<usize>,
    limits: &EnumerationLimits,
) -> Result<MarginalTable> {
    let n_modes = u.n_modes();
    EnumerationLimits::check(
        "marginal multisets",
        binomial((n_modes + k).saturating_sub(1) as u64, k as u64),
        limits.max_patterns,
    )?;
    let patterns: Vec<Vec<usize>> = (0..n_modes).combinations_with_replacement(k).collect();
    build_table(u, state, k, x, j_max, patterns, true)
}

fn build_table(
    u: &Interferometer,
    state: &InputState,
    k: usize,
    x: Distinguishability,
    j_max: Option<usize>,
    patterns: Vec<Vec<usize>>,
    includes_collisions: bool,
) -> Result<MarginalTable> {
    let probe = MarginalQuery::new(OutputPattern::ordered(vec![0; k]), x, j_max)?;
    validate(u, state, &probe)?;
    let kernel = MarginalKernel::new(state, k, x, j_max)?;
    let scale = kernel.ordered_scale() * factorial(k);
    let entries = patterns
        .into_par_iter()
        .map(|pattern| {
            let mu = multiplicity_of(&pattern) as f64;
            let value = kernel.raw_sum(u, &pattern) * (scale / mu);
            real_part(value, "marginal table entry").map(|probability| TableEntry {
                pattern,
                probability,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalTable {
        n_modes: u.n_modes(),
        k,
        x: x.value(),
        j_max,
        includes_collisions,
        entries,
    })
}
