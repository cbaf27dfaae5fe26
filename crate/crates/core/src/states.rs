//! Input states restricted to the n-photon subspace.
//!
//! A state is a list of product Fock assignments `xi` (which input modes hold
//! how many photons) with amplitudes `c_xi = <xi|Psi> / sqrt(mu(xi))`, where
//! `mu(xi)` is the product of occupation factorials. With this convention the
//! state is `sum_xi c_xi prod_t a^dagger_{xi_t} |0>`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{binomial, EnumerationLimits};

/// Photon assignment over input modes, stored as a sorted mode list with
/// one entry per photon.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockVector(Vec<usize>);

impl FockVector {
    pub fn new(mut modes: Vec<usize>) -> Self {
        modes.sort_unstable();
        Self(modes)
    }

    pub fn from_occupations(occupations: &[usize]) -> Self {
        Self(
            occupations
                .iter()
                .enumerate()
                .flat_map(|(mode, &m)| std::iter::repeat_n(mode, m))
                .collect(),
        )
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn photon_number(&self) -> usize {
        self.0.len()
    }

    pub fn occupations(&self, n_modes: usize) -> Vec<usize> {
        let mut occ = vec![0; n_modes];
        for &m in &self.0 {
            occ[m] += 1;
        }
        occ
    }

    pub fn multiplicity(&self) -> u64 {
        multiplicity_of(&self.0)
    }

    pub fn max_mode(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl fmt::Debug for FockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "xi{:?}", self.0)
    }
}

/// `mu(xi) = prod_i m_i!` over occupation numbers.
pub fn multiplicity(xi: &FockVector) -> u64 {
    xi.multiplicity()
}

/// Multiplicity of any mode list (sorted or not).
pub fn multiplicity_of(modes: &[usize]) -> u64 {
    let mut sorted = modes.to_vec();
    sorted.sort_unstable();
    sorted
        .chunk_by(|a, b| a == b)
        .map(|run| (1..=run.len() as u64).product::<u64>())
        .product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeTerm {
    pub xi: FockVector,
    /// `c_xi`, including the `1/sqrt(mu(xi))` factor.
    pub amplitude: Complex64,
}

impl AmplitudeTerm {
    /// `|c_xi|^2 mu(xi)`, the probability of this assignment.
    pub fn weight(&self) -> f64 {
        self.amplitude.norm_sqr() * self.xi.multiplicity() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    Fock,
    Gbs,
    DisjointSuperposition,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputState {
    n_modes: usize,
    photon_number: usize,
    terms: Vec<AmplitudeTerm>,
    family: StateFamily,
}

impl InputState {
    /// Validates and stores a list of `(xi, c_xi)` terms.
    ///
    /// Zero amplitudes are dropped. The total weight must not exceed one.
    pub fn new(
        n_modes: usize,
        terms: Vec<(FockVector, Complex64)>,
        family: StateFamily,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut kept = Vec::with_capacity(terms.len());
        let mut photon_number = None;
        for (xi, amplitude) in terms {
            if !amplitude.re.is_finite() || !amplitude.im.is_finite() {
                return Err(Error::InvalidState(format!("non-finite amplitude for {xi:?}")));
            }
            if let Some(index) = xi.max_mode().filter(|&m| m >= n_modes) {
                return Err(Error::Bounds {
                    index,
                    bound: n_modes,
                });
            }
            match photon_number {
                None => photon_number = Some(xi.photon_number()),
                Some(n) if n != xi.photon_number() => {
                    return Err(Error::InvalidState(format!(
                        "{xi:?} has {} photons, expected {n}",
                        xi.photon_number()
                    )))
                }
                _ => {}
            }
            if !seen.insert(xi.clone()) {
                return Err(Error::InvalidState(format!("{xi:?} listed twice")));
            }
            if amplitude != Complex64::new(0.0, 0.0) {
                kept.push(AmplitudeTerm { xi, amplitude });
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidState("state has no support in the subspace".into()));
        }
        let state = Self {
            n_modes,
            photon_number: photon_number.unwrap_or(0),
            terms: kept,
            family,
        };
        let norm = state.norm_sqr();
        if norm > 1.0 + 1e-9 {
            return Err(Error::InvalidState(format!(
                "subspace weight {norm} exceeds one"
            )));
        }
        Ok(state)
    }

    /// Same terms scaled to unit weight within the subspace.
    pub fn renormalized(mut self) -> Self {
        let scale = self.norm_sqr().sqrt();
        for t in &mut self.terms {
            t.amplitude /= scale;
        }
        self
    }

    /// `sum_xi |c_xi sqrt(mu(xi))|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(AmplitudeTerm::weight).sum()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn photon_number(&self) -> usize {
        self.photon_number
    }

    pub fn terms(&self) -> &[AmplitudeTerm] {
        &self.terms
    }

    pub fn family(&self) -> StateFamily {
        self.family
    }
}

/// Uniform pairwise overlap `x` between photons from different input modes.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Distinguishability(f64);

impl Distinguishability {
    pub const INDISTINGUISHABLE: Self = Self(1.0);
    pub const DISTINGUISHABLE: Self = Self(0.0);

    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Self(x))
        } else {
            Err(Error::InvalidInput(format!("overlap x = {x} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Weight of a pairing with `mismatches` photons paired across different input modes.
    pub fn weight(self, mismatches: usize) -> f64 {
        self.0.powi(mismatches as i32)
    }
}

impl TryFrom<f64> for Distinguishability {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Self::new(x)
    }
}

impl From<Distinguishability> for f64 {
    fn from(x: Distinguishability) -> f64 {
        x.0
    }
}

/// Two-mode squeezed sources feeding disjoint mode pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct GbsSpec {
    pub pairs: Vec<(usize, usize)>,
    /// Squeezing magnitude per source.
    pub r: Vec<f64>,
    /// Squeezing phase per source, radians.
    pub phase: Vec<f64>,
}

impl GbsSpec {
    pub fn equal(pairs: Vec<(usize, usize)>, r: f64) -> Self {
        let s = pairs.len();
        Self {
            pairs,
            r: vec![r; s],
            phase: vec![0.0; s],
        }
    }

    pub fn n_squeezers(&self) -> usize {
        self.pairs.len()
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        let s = self.pairs.len();
        if self.r.len() != s || self.phase.len() != s {
            return Err(Error::InvalidState(format!(
                "{s} pairs but {} squeezing values and {} phases",
                self.r.len(),
                self.phase.len()
            )));
        }
        if s == 0 {
            return Err(Error::InvalidState("no squeezers".into()));
        }
        let mut used = BTreeSet::new();
        for &(a, b) in &self.pairs {
            for m in [a, b] {
                if m >= n_modes {
                    return Err(Error::Bounds {
                        index: m,
                        bound: n_modes,
                    });
                }
                if !used.insert(m) {
                    return Err(Error::InvalidState(format!("mode {m} used by two sources")));
                }
            }
        }
        if let Some(r) = self.r.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidState(format!("squeezing {r} must be finite and >= 0")));
        }
        if let Some(p) = self.phase.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidState(format!("phase {p} is not finite")));
        }
        Ok(())
    }
}

fn check_modes(n_modes: usize, modes: &[usize]) -> Result<()> {
    if let Some(&index) = modes.iter().find(|&&m| m >= n_modes) {
        return Err(Error::Bounds {
            index,
            bound: n_modes,
        });
    }
    if modes.iter().all_unique() {
        Ok(())
    } else {
        Err(Error::InvalidState(format!(
            "repeated mode in {modes:?}; single-photon inputs only"
        )))
    }
}

/// Single photons in each of `occupied_modes`, vacuum elsewhere.
pub fn fock_state(n_modes: usize, occupied_modes: &[usize]) -> Result<InputState> {
    check_modes(n_modes, occupied_modes)?;
    InputState::new(
        n_modes,
        vec![(FockVector::new(occupied_modes.to_vec()), Complex64::new(1.0, 0.0))],
        StateFamily::Fock,
    )
}

/// Product of two-mode squeezed vacua, projected on `n_photons` total photons.
///
/// Enumerates every multiset of `n/2` emitted pairs over the sources. A
/// source emitting `p` pairs contributes `(e^{-i phase} tanh r)^p` to the
/// Fock amplitude; the result is renormalized within the subspace.
pub fn gbs_state(
    n_modes: usize,
    spec: &GbsSpec,
    n_photons: usize,
    limits: &EnumerationLimits,
) -> Result<InputState> {
    if !n_photons.is_multiple_of(2) {
        return Err(Error::InvalidPhotonNumber(format!(
            "two-mode squeezed sources emit pairs; {n_photons} is odd"
        )));
    }
    spec.validate(n_modes)?;
    let sources = spec.n_squeezers();
    let pairs = n_photons / 2;
    let count = binomial((sources + pairs - 1) as u64, pairs as u64);
    EnumerationLimits::check("GBS basis terms", count, limits.max_state_terms)?;

    let per_pair: Vec<Complex64> = (0..sources)
        .map(|s| Complex64::from_polar(spec.r[s].tanh(), -spec.phase[s]))
        .collect();

    let terms = (0..sources)
        .combinations_with_replacement(pairs)
        .map(|chosen| {
            let mut emitted = vec![0usize; sources];
            for &s in &chosen {
                emitted[s] += 1;
            }
            let mut modes = Vec::with_capacity(n_photons);
            let mut fock_amplitude = Complex64::new(1.0, 0.0);
            for (s, &p) in emitted.iter().enumerate() {
                let (a, b) = spec.pairs[s];
                for _ in 0..p {
                    modes.push(a);
                    modes.push(b);
                }
                fock_amplitude *= per_pair[s].powu(p as u32);
            }
            let xi = FockVector::new(modes);
            let c = fock_amplitude / (xi.multiplicity() as f64).sqrt();
            (xi, c)
        })
        .collect::<Vec<_>>();

    // Unnormalized weights can exceed one; scale before validation.
    let norm: f64 = terms
        .iter()
        .map(|(xi, c)| c.norm_sqr() * xi.multiplicity() as f64)
        .sum();
    if norm.is_nan() || norm <= 0.0 {
        return Err(Error::InvalidState(format!(
            "no {n_photons}-photon component (all squeezing zero?)"
        )));
    }
    let scale = norm.sqrt();
    let terms = terms.into_iter().map(|(xi, c)| (xi, c / scale)).collect();
    Ok(InputState::new(n_modes, terms, StateFamily::Gbs)?.renormalized())
}

/// Equal superposition of two Fock inputs on disjoint mode sets.
pub fn disjoint_superposition(
    n_modes: usize,
    modes1: &[usize],
    modes2: &[usize],
) -> Result<InputState> {
    check_modes(n_modes, modes1)?;
    check_modes(n_modes, modes2)?;
    if modes1.len() != modes2.len() {
        return Err(Error::InvalidState(format!(
            "branches carry {} and {} photons",
            modes1.len(),
            modes2.len()
        )));
    }
    if modes1.is_empty() {
        return Err(Error::InvalidState("branches are empty".into()));
    }
    if let Some(m) = modes1.iter().find(|m| modes2.contains(m)) {
        return Err(Error::InvalidState(format!("mode {m} occupied in both branches")));
    }
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    InputState::new(
        n_modes,
        vec![
            (FockVector::new(modes1.to_vec()), amp),
            (FockVector::new(modes2.to_vec()), amp),
        ],
        StateFamily::DisjointSuperposition,
    )
}

/// JSON state description. `n_modes` comes from the interferometer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Fock {
        modes: Vec<usize>,
    },
    Gbs {
        pairs: Vec<[usize; 2]>,
        r: Vec<f64>,
        phi: Vec<f64>,
        n_photons: usize,
    },
    DisjointSuperposition {
        modes1: Vec<usize>,
        modes2: Vec<usize>,
    },
    /// Arbitrary state given by Fock-basis amplitudes `<xi|Psi>`.
    Custom {
        terms: Vec<CustomTerm>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTerm {
    pub modes: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl StateSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn photon_number(&self) -> usize {
        match self {
            StateSpec::Fock { modes } => modes.len(),
            StateSpec::Gbs { n_photons, .. } => *n_photons,
            StateSpec::DisjointSuperposition { modes1, .. } => modes1.len(),
            StateSpec::Custom { terms } => terms.first().map_or(0, |t| t.modes.len()),
        }
    }

    pub fn build(&self, n_modes: usize, limits: &EnumerationLimits) -> Result<InputState> {
        self.build_with_photon_number(n_modes, self.photon_number(), limits)
    }

    /// Builds the state at a different photon number. Only GBS specs
    /// describe more than one photon-number sector.
    pub fn build_with_photon_number(
        &self,
        n_modes: usize,
        n: usize,
        limits: &EnumerationLimits,
    ) -> Result<InputState> {
        if n != self.photon_number() && !matches!(self, StateSpec::Gbs { .. }) {
            return Err(Error::InvalidPhotonNumber(format!(
                "state spec has a fixed photon number {}, requested {n}",
                self.photon_number()
            )));
        }
        match self {
            StateSpec::Fock { modes } => fock_state(n_modes, modes),
            StateSpec::Gbs { pairs, r, phi, .. } => {
                let spec = GbsSpec {
                    pairs: pairs.iter().map(|p| (p[0], p[1])).collect(),
                    r: r.clone(),
                    phase: phi.clone(),
                };
                gbs_state(n_modes, &spec, n, limits)
            }
            StateSpec::DisjointSuperposition { modes1, modes2 } => {
                disjoint_superposition(n_modes, modes1, modes2)
            }
            StateSpec::Custom { terms } => {
                EnumerationLimits::check("custom terms", terms.len() as u128, limits.max_state_terms)?;
                let terms: Vec<_> = terms
                    .iter()
                    .map(|t| {
                        let xi = FockVector::new(t.modes.clone());
                        let c = Complex64::new(t.re, t.im) / (xi.multiplicity() as f64).sqrt();
                        (xi, c)
                    })
                    .collect();
                let norm: f64 = terms
                    .iter()
                    .map(|(xi, c)| c.norm_sqr() * xi.multiplicity() as f64)
                    .sum();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::InvalidState("custom state has zero norm".into()));
                }
                let scale = norm.sqrt();
                let terms = terms.into_iter().map(|(xi, c)| (xi, c / scale)).collect();
                Ok(InputState::new(n_modes, terms, StateFamily::Custom)?.renormalized())
            }
        }
    }
}
