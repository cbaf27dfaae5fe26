//! Permutations graded by their number of non-fixed points, and k-subsets
//! with complements.

use itertools::Itertools;

/// A permutation of `0..n` together with its count of moved points.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PermutationClass {
    /// `sigma[i]` is the image of `i`.
    pub sigma: Vec<usize>,
    pub non_fixed: usize,
}

impl PermutationClass {
    pub fn is_identity(&self) -> bool {
        self.non_fixed == 0
    }

    pub fn moved_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.sigma.iter().enumerate().filter(|(i, &s)| *i != s).map(|(i, _)| i)
    }
}

/// Number of fixed-point-free permutations of `n` elements.
pub fn derangement_count(n: usize) -> u64 {
    // D_0 = 1, D_1 = 0, D_n = (n - 1)(D_{n-1} + D_{n-2})
    let (mut prev, mut cur) = (1u64, 0u64);
    if n == 0 {
        return 1;
    }
    for i in 2..=n as u64 {
        let next = (i - 1) * (cur + prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// All derangements of `0..n` in lexicographic order.
pub fn derangements(n: usize) -> Vec<Vec<usize>> {
    fn place(pos: usize, n: usize, used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if v == pos || used[v] {
                continue;
            }
            used[v] = true;
            cur.push(v);
            place(pos + 1, n, used, cur, out);
            cur.pop();
            used[v] = false;
        }
    }
    let mut out = Vec::with_capacity(derangement_count(n) as usize);
    place(0, n, &mut vec![false; n], &mut Vec::with_capacity(n), &mut out);
    out
}

/// Every permutation of `0..n` with at most `j_max` non-fixed points, each
/// exactly once, grouped by increasing non-fixed count.
///
/// There are `C(n, j) * D_j` permutations with exactly `j` moved points.
pub fn enumerate_sigma(n: usize, j_max: usize) -> impl Iterator<Item = PermutationClass> {
    let j_max = j_max.min(n);
    (0..=j_max).filter(|&j| j != 1).flat_map(move |j| {
        let patterns = derangements(j);
        (0..n).combinations(j).flat_map(move |moved| {
            patterns
                .clone()
                .into_iter()
                .map(move |d| {
                    let mut sigma: Vec<usize> = (0..n).collect();
                    for (slot, &target) in d.iter().enumerate() {
                        sigma[moved[slot]] = moved[target];
                    }
                    PermutationClass { sigma, non_fixed: j }
                })
        })
    })
}

/// A k-subset of `0..n` and its complement, both ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhoSplit {
    pub chosen: Vec<usize>,
    pub complement: Vec<usize>,
}

/// All `C(n, k)` subsets of size `k`, in lexicographic order.
pub fn enumerate_rho(n: usize, k: usize) -> impl Iterator<Item = RhoSplit> {
    (0..n).combinations(k).map(move |chosen| {
        let complement = (0..n).filter(|i| !chosen.contains(i)).collect();
        RhoSplit { chosen, complement }
    })
}
