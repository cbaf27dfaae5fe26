//! Pattern-independent expansion of the k-photon marginal sum.
//!
//! For a k-mode output list `phi` the unnormalized marginal sum is
//!
//! ```text
//! S(phi) = sum_{xi, chi} c_xi conj(c_chi)
//!          sum_{pi in S_n} x^{j(pi)} sum_{rho} Perm(M[xi_rho, phi] o conj(M[chi_pi(rho), phi]))
//!                          * [xi_t == chi_pi(t) for every t outside rho]
//! ```
//!
//! where `j(pi)` counts positions whose paired input modes differ. Grouping
//! `rho` by the retained sub-multiset `A = xi_rho` and the image by `B`, the
//! complement condition only asks that `xi \ A == chi \ B` as multisets, with
//! `mu(xi \ A)` mode-preserving bijections on the complement. What is left is
//! a list of `(coef, A, B_tau)` terms whose permanents are the only
//! pattern-dependent part, so one kernel serves every output pattern.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_complex::Complex64;

use super::enumerate::enumerate_sigma;
use crate::error::{Error, Result};
use crate::limits::factorial;
use crate::permanent::{permanent_square, Interferometer};
use crate::states::{multiplicity_of, Distinguishability, InputState};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug)]
struct PairedTerm {
    coef: Complex64,
    rows_a: Vec<usize>,
    rows_b: Vec<usize>,
}

#[derive(Clone, Debug)]
enum Terms {
    /// Every pairing has unit weight, so the permutation sum over `B`
    /// orderings collapses to `Perm(M_A) conj(Perm(M_B))`.
    Factorized {
        row_sets: Vec<Vec<usize>>,
        pairs: Vec<(usize, usize, Complex64)>,
    },
    /// `coef * Perm(M_a o conj(M_b))` per term.
    Paired(Vec<PairedTerm>),
}

/// Precomputed marginal expansion for one `(state, k, x, j_max)`.
#[derive(Clone, Debug)]
pub struct MarginalKernel {
    n_modes: usize,
    photon_number: usize,
    order: usize,
    terms: Terms,
}

/// Retained sub-multisets of size `k` of a sorted mode list, with the number
/// of position subsets producing each and the leftover multiset.
fn subset_groups(xi: &[usize], k: usize) -> BTreeMap<Vec<usize>, (u64, Vec<usize>)> {
    let mut groups: BTreeMap<Vec<usize>, (u64, Vec<usize>)> = BTreeMap::new();
    for positions in (0..xi.len()).combinations(k) {
        let retained: Vec<usize> = positions.iter().map(|&p| xi[p]).collect();
        groups
            .entry(retained)
            .and_modify(|(count, _)| *count += 1)
            .or_insert_with(|| {
                let rest = (0..xi.len())
                    .filter(|p| !positions.contains(p))
                    .map(|p| xi[p])
                    .collect();
                (1, rest)
            });
    }
    groups
}

impl MarginalKernel {
    /// Builds the expansion for k-photon marginals; `j_max = None` keeps
    /// every interference order.
    pub fn new(
        state: &InputState,
        k: usize,
        x: Distinguishability,
        j_max: Option<usize>,
    ) -> Result<Self> {
        let n = state.photon_number();
        if k > n {
            return Err(Error::InvalidQuery(format!(
                "marginal of order {k} for a {n}-photon state"
            )));
        }
        let j_limit = if x.value() == 0.0 {
            0
        } else {
            j_max.unwrap_or(k).min(k)
        };
        let factorized = x.value() == 1.0 && j_limit >= k;

        let groups: Vec<_> = state
            .terms()
            .iter()
            .map(|t| subset_groups(t.xi.modes(), k))
            .collect();

        let mut paired: BTreeMap<(Vec<usize>, Vec<usize>), Complex64> = BTreeMap::new();
        for (ti, t) in state.terms().iter().enumerate() {
            for (si, s) in state.terms().iter().enumerate() {
                let w = t.amplitude * s.amplitude.conj();
                for (a, (count_a, rest_a)) in &groups[ti] {
                    for (b, (count_b, rest_b)) in &groups[si] {
                        if rest_a != rest_b {
                            continue;
                        }
                        let base = w * (count_a * count_b * multiplicity_of(rest_a)) as f64;
                        if factorized {
                            *paired.entry((a.clone(), b.clone())).or_insert(ZERO) += base;
                            continue;
                        }
                        for_each_pairing(a, b, j_limit, |rows_b, mismatches| {
                            let weight = x.weight(mismatches);
                            if weight != 0.0 {
                                *paired.entry((a.clone(), rows_b.to_vec())).or_insert(ZERO) +=
                                    base * weight;
                            }
                        });
                    }
                }
            }
        }
        paired.retain(|_, c| *c != ZERO);

        let terms = if factorized {
            let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let mut row_sets = Vec::new();
            let mut id = |rows: &Vec<usize>| {
                *index.entry(rows.clone()).or_insert_with(|| {
                    row_sets.push(rows.clone());
                    row_sets.len() - 1
                })
            };
            let pairs = paired
                .into_iter()
                .map(|((a, b), coef)| (id(&a), id(&b), coef))
                .collect();
            Terms::Factorized { row_sets, pairs }
        } else {
            Terms::Paired(
                paired
                    .into_iter()
                    .map(|((rows_a, rows_b), coef)| PairedTerm {
                        coef,
                        rows_a,
                        rows_b,
                    })
                    .collect(),
            )
        };

        Ok(Self {
            n_modes: state.n_modes(),
            photon_number: n,
            order: k,
            terms,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn photon_number(&self) -> usize {
        self.photon_number
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn term_count(&self) -> usize {
        match &self.terms {
            Terms::Factorized { pairs, .. } => pairs.len(),
            Terms::Paired(t) => t.len(),
        }
    }

    /// `(n - k)! / n!`: converts the raw sum into the probability of an
    /// ordered k-tuple in the expanded sample space.
    pub fn ordered_scale(&self) -> f64 {
        factorial(self.photon_number - self.order) / factorial(self.photon_number)
    }

    /// Unnormalized sum `S(cols)` for `cols.len() == k` output modes
    /// (repeats allowed).
    pub fn raw_sum(&self, u: &Interferometer, cols: &[usize]) -> Complex64 {
        debug_assert_eq!(cols.len(), self.order);
        let k = self.order;
        let mut buf = vec![ZERO; k * k];
        match &self.terms {
            Terms::Factorized { row_sets, pairs } => {
                let perms: Vec<Complex64> = row_sets
                    .iter()
                    .map(|rows| {
                        for (i, &r) in rows.iter().enumerate() {
                            for (s, &c) in cols.iter().enumerate() {
                                buf[i * k + s] = u.amplitude(r, c);
                            }
                        }
                        permanent_square(&buf, k)
                    })
                    .collect();
                pairs
                    .iter()
                    .map(|&(a, b, coef)| coef * perms[a] * perms[b].conj())
                    .sum()
            }
            Terms::Paired(terms) => terms
                .iter()
                .map(|t| {
                    for i in 0..k {
                        for (s, &c) in cols.iter().enumerate() {
                            buf[i * k + s] =
                                u.amplitude(t.rows_a[i], c) * u.amplitude(t.rows_b[i], c).conj();
                        }
                    }
                    t.coef * permanent_square(&buf, k)
                })
                .sum(),
        }
    }

    /// Expanded-space probability of the ordered tuple `cols`.
    pub fn ordered_probability(&self, u: &Interferometer, cols: &[usize]) -> Complex64 {
        self.raw_sum(u, cols) * self.ordered_scale()
    }

    /// `S(prefix ++ [j])` for every output mode `j`, using a Laplace expansion
    /// along the appended column so each term needs only `k` permanents of
    /// size `k - 1`, shared by all candidates.
    pub fn extension_sums(&self, u: &Interferometer, prefix: &[usize]) -> Vec<Complex64> {
        let k = self.order;
        assert_eq!(prefix.len() + 1, k, "kernel order must be prefix length + 1");
        let p = prefix.len();
        let n_modes = u.n_modes();
        let mut out = vec![ZERO; n_modes];
        let mut full = vec![ZERO; k * p];
        let mut minor = vec![ZERO; p * p];
        let mut minors = vec![ZERO; k];

        let mut fill_minors = |full: &[Complex64], minors: &mut [Complex64]| {
            for (skip, m) in minors.iter_mut().enumerate() {
                for (r, i) in (0..k).filter(|&i| i != skip).enumerate() {
                    minor[r * p..(r + 1) * p].copy_from_slice(&full[i * p..(i + 1) * p]);
                }
                *m = permanent_square(&minor, p);
            }
        };

        match &self.terms {
            Terms::Factorized { row_sets, pairs } => {
                let mut perms = vec![ZERO; row_sets.len() * n_modes];
                for (idx, rows) in row_sets.iter().enumerate() {
                    for (i, &r) in rows.iter().enumerate() {
                        for (s, &c) in prefix.iter().enumerate() {
                            full[i * p + s] = u.amplitude(r, c);
                        }
                    }
                    fill_minors(&full, &mut minors);
                    for j in 0..n_modes {
                        perms[idx * n_modes + j] = rows
                            .iter()
                            .zip(&minors)
                            .map(|(&r, m)| u.amplitude(r, j) * m)
                            .sum();
                    }
                }
                for &(a, b, coef) in pairs {
                    for (j, slot) in out.iter_mut().enumerate() {
                        *slot += coef * perms[a * n_modes + j] * perms[b * n_modes + j].conj();
                    }
                }
            }
            Terms::Paired(terms) => {
                for t in terms {
                    for i in 0..k {
                        for (s, &c) in prefix.iter().enumerate() {
                            full[i * p + s] =
                                u.amplitude(t.rows_a[i], c) * u.amplitude(t.rows_b[i], c).conj();
                        }
                    }
                    fill_minors(&full, &mut minors);
                    for (j, slot) in out.iter_mut().enumerate() {
                        let col: Complex64 = (0..k)
                            .map(|i| {
                                u.amplitude(t.rows_a[i], j)
                                    * u.amplitude(t.rows_b[i], j).conj()
                                    * minors[i]
                            })
                            .sum();
                        *slot += t.coef * col;
                    }
                }
            }
        }
        out
    }
}

/// Calls `f(b_tau, mismatches)` for every ordering `b_tau` of `b` matched
/// position-by-position against `a` with at most `j_limit` mismatches.
fn for_each_pairing(a: &[usize], b: &[usize], j_limit: usize, mut f: impl FnMut(&[usize], usize)) {
    let k = a.len();
    let mut rows_b = vec![0; k];
    if a == b && a.iter().all_unique() {
        // Mismatches coincide with moved points here.
        for class in enumerate_sigma(k, j_limit) {
            for (i, &s) in class.sigma.iter().enumerate() {
                rows_b[i] = b[s];
            }
            f(&rows_b, class.non_fixed);
        }
        return;
    }
    for tau in (0..k).permutations(k) {
        let mut mismatches = 0;
        for (i, &s) in tau.iter().enumerate() {
            rows_b[i] = b[s];
            mismatches += usize::from(a[i] != b[s]);
        }
        if mismatches <= j_limit {
            f(&rows_b, mismatches);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{fock_state, gbs_state, GbsSpec};
    use crate::EnumerationLimits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn groups_of_repeated_modes() {
        let g = subset_groups(&[0, 0, 1, 1], 2);
        assert_eq!(g.len(), 3);
        assert_eq!(g[&vec![0, 0]], (1, vec![1, 1]));
        assert_eq!(g[&vec![0, 1]], (4, vec![0, 1]));
        assert_eq!(g[&vec![1, 1]], (1, vec![0, 0]));
    }

    #[test]
    fn pairing_enumeration_respects_limit() {
        let mut seen = Vec::new();
        for_each_pairing(&[0, 1, 2], &[0, 1, 2], 2, |b, j| seen.push((b.to_vec(), j)));
        assert_eq!(seen.len(), 4);
        let mut seen = Vec::new();
        for_each_pairing(&[0, 0, 1], &[0, 0, 1], 0, |b, j| seen.push((b.to_vec(), j)));
        // both orderings of the repeated 0 match everywhere
        assert_eq!(seen.len(), 2);
        assert!(seen.iter().all(|(b, j)| b == &vec![0, 0, 1] && *j == 0));
    }

    #[test]
    fn zeroth_order_is_norm() {
        let spec = GbsSpec::equal(vec![(0, 1), (2, 3)], 0.7);
        let state = gbs_state(4, &spec, 4, &EnumerationLimits::default()).unwrap();
        let u = Interferometer::identity(4);
        for x in [0.0, 0.4, 1.0] {
            let kernel = MarginalKernel::new(&state, 0, Distinguishability::new(x).unwrap(), None).unwrap();
            assert!((kernel.raw_sum(&u, &[]) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn extension_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = Interferometer::haar_random(6, &mut rng);
        let spec = GbsSpec {
            pairs: vec![(0, 1), (2, 3)],
            r: vec![0.5, 0.8],
            phase: vec![0.0, 0.9],
        };
        let states = [
            fock_state(6, &[0, 2, 4]).unwrap(),
            gbs_state(6, &spec, 4, &EnumerationLimits::default()).unwrap(),
        ];
        for state in &states {
            for x in [0.0, 0.6, 1.0] {
                let x = Distinguishability::new(x).unwrap();
                for j_max in [None, Some(0), Some(2)] {
                    let kernel = MarginalKernel::new(state, 3, x, j_max).unwrap();
                    let prefix = [5, 1];
                    let ext = kernel.extension_sums(&u, &prefix);
                    for (j, e) in ext.iter().enumerate() {
                        let direct = kernel.raw_sum(&u, &[5, 1, j]);
                        assert!((direct - e).norm() < 1e-12, "j={j}: {direct} vs {e}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_order_above_photon_number() {
        let state = fock_state(4, &[0, 1]).unwrap();
        assert!(MarginalKernel::new(&state, 3, Distinguishability::INDISTINGUISHABLE, None).is_err());
    }
}
