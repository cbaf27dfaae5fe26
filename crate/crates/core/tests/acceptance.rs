//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p boson-marginals --test acceptance`.

use std::collections::BTreeMap;
use std::time::Instant;

use itertools::Itertools;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use boson_marginals::marginals::{marginal_multiset_distribution, MarginalTable};
use boson_marginals::oracle::{classical_distribution, full_distribution, marginalize, FullDistribution};
use boson_marginals::permanent::{hadamard_conj_permanent, permanent, submatrix};
use boson_marginals::sampler::{sample, write_jsonl, Sample, SampleHeader, SamplerConfig};
use boson_marginals::verify::{histogram, likelihood_contest, marginal_report, total_variation, ContestConfig, Winner};
use boson_marginals::{
    disjoint_superposition, fock_state, gbs_state, marginal_probability, Distinguishability, EnumerationLimits,
    GbsSpec, InputState, Interferometer, MarginalQuery, OutputPattern,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn x(v: f64) -> Distinguishability {
    Distinguishability::new(v).unwrap()
}

fn lim() -> EnumerationLimits {
    EnumerationLimits::default()
}

/// Input states of the oracle grid for `(N, n)`. GBS needs an even photon
/// number and the superposition needs `2n <= N`; other combinations are
/// skipped.
fn grid_states(n_modes: usize, n: usize) -> Vec<(&'static str, InputState)> {
    let mut out = vec![("fock", fock_state(n_modes, &(0..n).collect_vec()).unwrap())];
    if n.is_multiple_of(2) {
        let spec = GbsSpec {
            pairs: vec![(0, 1), (2, 3)],
            r: vec![0.5, 0.8],
            phase: vec![0.3, 1.1],
        };
        out.push(("gbs", gbs_state(n_modes, &spec, n, &lim()).unwrap()));
    }
    if 2 * n <= n_modes {
        let a = (0..n).collect_vec();
        let b = (n..2 * n).collect_vec();
        out.push(("superposition", disjoint_superposition(n_modes, &a, &b).unwrap()));
    }
    out
}

const GRID_X: [f64; 4] = [0.0, 0.3, 0.7, 1.0];

fn criterion_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    let mut skipped = 0usize;
    for n_modes in [4, 6, 8] {
        let u = Interferometer::haar_random(n_modes, &mut rng);
        for n in [2, 3, 4] {
            let states = grid_states(n_modes, n);
            skipped += 3 - states.len();
            for (_, state) in &states {
                for &xv in &GRID_X {
                    let full = full_distribution(&u, state, x(xv), &lim()).unwrap();
                    for k in 1..=n {
                        // distinct mode sets through the public query
                        for modes in (0..n_modes).combinations(k) {
                            let q = MarginalQuery::exact(OutputPattern::unordered(modes.clone()), x(xv));
                            let fast = marginal_probability(&u, state, &q).unwrap();
                            let slow = marginalize(&full, &modes).unwrap();
                            worst = worst.max((fast - slow).abs());
                            checks += 1;
                        }
                        // every multiset, collisions included
                        let table = marginal_multiset_distribution(&u, state, k, x(xv), None, &lim()).unwrap();
                        for e in &table.entries {
                            let slow = marginalize(&full, &e.pattern).unwrap();
                            worst = worst.max((e.probability - slow).abs());
                            checks += 1;
                        }
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!(
            "{checks} marginals, max |diff| = {worst:.2e} (tol 1e-9); {skipped} invalid state/size combinations skipped"
        ),
    }
}

fn criterion_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n_modes in [4, 6, 8] {
        let u = Interferometer::haar_random(n_modes, &mut rng);
        for n in [2, 3, 4] {
            for (_, state) in grid_states(n_modes, n) {
                for &xv in &GRID_X {
                    let full = full_distribution(&u, &state, x(xv), &lim()).unwrap();
                    worst = worst.max((full.total() - 1.0).abs());
                    count += 1;
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("{count} distributions, max |total - 1| = {worst:.2e} (tol 1e-9)"),
    }
}

fn criterion_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst3 = 0.0f64;
    let mut worst4 = 0.0f64;
    for trial in 0..50 {
        let n_modes = 5 + trial % 3;
        let u = Interferometer::haar_random(n_modes, &mut rng);

        // product of two permanents as a sum of elementwise-product permanents
        let s = 1 + trial % 5;
        let rows = |rng: &mut ChaCha8Rng| (0..s).map(|_| rng.random_range(0..n_modes)).collect_vec();
        let xi = rows(&mut rng);
        let chi = rows(&mut rng);
        let phi = rows(&mut rng);
        let a = submatrix(&u, &xi, &phi).unwrap();
        let b = submatrix(&u, &chi, &phi).unwrap();
        let lhs = permanent(&a).unwrap() * permanent(&b).unwrap().conj();
        let rhs: Complex64 = (0..s)
            .permutations(s)
            .map(|sigma| {
                let permuted = sigma.iter().map(|&i| chi[i]).collect_vec();
                hadamard_conj_permanent(&a, &submatrix(&u, &permuted, &phi).unwrap()).unwrap()
            })
            .sum();
        worst3 = worst3.max((lhs - rhs).norm());

        // orthonormality summed over all ordered output tuples
        let m = 1 + trial % 4;
        let a_rows = (0..n_modes).collect_vec();
        let mut shuffled = a_rows.clone();
        for i in (1..n_modes).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a_list = shuffled[..m].to_vec();
        let b_list = match trial % 3 {
            0 => a_list.clone(),
            1 => {
                let mut b = a_list.clone();
                b.rotate_left(1);
                b
            }
            _ => shuffled[n_modes - m..].to_vec(),
        };
        let sum: Complex64 = (0..m)
            .map(|_| 0..n_modes)
            .multi_cartesian_product()
            .map(|phi| {
                hadamard_conj_permanent(
                    &submatrix(&u, &a_list, &phi).unwrap(),
                    &submatrix(&u, &b_list, &phi).unwrap(),
                )
                .unwrap()
            })
            .sum();
        let expected = if a_list == b_list {
            (1..=m).product::<usize>() as f64
        } else {
            0.0
        };
        worst4 = worst4.max((sum - expected).norm());
    }
    Outcome {
        pass: worst3 <= 1e-10 && worst4 <= 1e-10,
        detail: format!(
            "50 unitaries each, product expansion max err {worst3:.2e}, orthonormality max err {worst4:.2e} (tol 1e-10)"
        ),
    }
}

fn criterion_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let u = Interferometer::haar_random(8, &mut rng);
    let pairs = vec![(0, 1), (2, 3), (4, 5)];
    let squeezed = [0, 1, 2, 3, 4, 5];
    let mut worst_gbs = 0.0f64;
    for n in [2, 4, 6] {
        let state = gbs_state(8, &GbsSpec::equal(pairs.clone(), 0.7), n, &lim()).unwrap();
        for xv in [0.0, 0.5, 1.0] {
            for out in 0..8 {
                let q = MarginalQuery::exact(OutputPattern::unordered(vec![out]), x(xv));
                let got = marginal_probability(&u, &state, &q).unwrap();
                let expected: f64 =
                    squeezed.iter().map(|&j| u.amplitude(j, out).norm_sqr()).sum::<f64>() / squeezed.len() as f64;
                worst_gbs = worst_gbs.max((got - expected).abs());
            }
        }
    }
    let bs = Interferometer::balanced_beamsplitter();
    let pair = fock_state(2, &[0, 1]).unwrap();
    let mut worst_hom = 0.0f64;
    for xv in [0.0, 0.5, 1.0] {
        let q = MarginalQuery::exact(OutputPattern::unordered(vec![0, 1]), x(xv));
        let got = marginal_probability(&bs, &pair, &q).unwrap();
        worst_hom = worst_hom.max((got - (1.0 - xv * xv) / 2.0).abs());
    }
    Outcome {
        pass: worst_gbs <= 1e-12 && worst_hom <= 1e-12,
        detail: format!(
            "GBS first order max err {worst_gbs:.2e}, HOM coincidence max err {worst_hom:.2e} (tol 1e-12)"
        ),
    }
}

fn full_as_map(d: &FullDistribution) -> BTreeMap<Vec<usize>, f64> {
    d.entries.clone()
}

fn criterion_sampler_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let u = Interferometer::haar_random(6, &mut rng);
    let state = fock_state(6, &[0, 1, 2]).unwrap();
    let count = 100_000;

    let quantum = sample(&u, &state, &SamplerConfig::new(11, x(1.0)), count).unwrap();
    let exact = full_distribution(&u, &state, x(1.0), &lim()).unwrap();
    let tvd_q = total_variation(&histogram(&quantum), &full_as_map(&exact));

    let classical_samples = sample(&u, &state, &SamplerConfig::new(12, x(0.0)), count).unwrap();
    let classical = classical_distribution(&u, &state, &lim()).unwrap();
    let tvd_c = total_variation(&histogram(&classical_samples), &full_as_map(&classical));

    Outcome {
        pass: tvd_q < 0.02 && tvd_c < 0.02,
        detail: format!("N=6 n=3, 1e5 samples: TVD x=1 {tvd_q:.4}, TVD x=0 vs classical {tvd_c:.4} (bound 0.02)"),
    }
}

fn report_within(samples: &[Sample], table: &MarginalTable) -> (bool, f64) {
    let rows = marginal_report(samples, table).unwrap();
    let mut worst_excess = f64::NEG_INFINITY;
    for r in &rows {
        let excess = (r.empirical - r.reference).abs() - (3.0 * r.sigma + 0.01);
        worst_excess = worst_excess.max(excess);
    }
    (worst_excess <= 0.0, worst_excess)
}

fn criterion_truncation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let u6 = Interferometer::haar_random(6, &mut rng);
    let state6 = fock_state(6, &[0, 1, 2]).unwrap();
    let count = 100_000;
    let truncated = sample(&u6, &state6, &SamplerConfig::new(21, x(0.7)).with_j_max(3), count).unwrap();
    let exact = sample(&u6, &state6, &SamplerConfig::new(22, x(0.7)), count).unwrap();
    let tvd = total_variation(&histogram(&truncated), &histogram(&exact));

    let u8 = Interferometer::haar_random(8, &mut rng);
    let state8 = fock_state(8, &[0, 1, 2, 3]).unwrap();
    let low = sample(&u8, &state8, &SamplerConfig::new(23, x(1.0)).with_j_max(2), count).unwrap();
    let mut tables_ok = true;
    let mut excess = Vec::new();
    for k in [1, 2] {
        let table = marginal_multiset_distribution(&u8, &state8, k, x(1.0), None, &lim()).unwrap();
        let (ok, worst) = report_within(&low, &table);
        tables_ok &= ok;
        excess.push(worst);
    }
    Outcome {
        pass: tvd < 0.02 && tables_ok,
        detail: format!(
            "j_max=n vs exact TVD {tvd:.4} (bound 0.02); j_max=2 n=4 N=8 worst |emp-ref|-(3 sigma+0.01): k=1 {:.4}, k=2 {:.4} (must be <= 0)",
            excess[0], excess[1]
        ),
    }
}

fn criterion_loss() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let u = Interferometer::haar_random(6, &mut rng);
    let state = fock_state(6, &[0, 1, 2]).unwrap();
    // Enough draws that every survivor count 1..=3 has about 1e5 samples.
    let count = 800_000;
    let samples = sample(&u, &state, &SamplerConfig::new(31, x(1.0)).with_loss(0.5), count).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for k in 1..=3 {
        let kept: Vec<Sample> = samples.iter().filter(|s| s.n_detected() == k).cloned().collect();
        let table = marginal_multiset_distribution(&u, &state, k, x(1.0), None, &lim()).unwrap();
        let tvd = total_variation(&histogram(&kept), &table.as_map());
        pass &= tvd < 0.02;
        parts.push(format!("k={k}: {} samples TVD {tvd:.4}", kept.len()));
    }
    // survivor counts should be Binomial(3, 0.5)
    let expected = [0.125, 0.375, 0.375, 0.125];
    let mut chi2 = 0.0;
    for (k, p) in expected.iter().enumerate() {
        let obs = samples.iter().filter(|s| s.n_detected() == k).count() as f64;
        let exp = p * count as f64;
        chi2 += (obs - exp).powi(2) / exp;
    }
    // 3 degrees of freedom; 16.27 is the 0.999 quantile
    pass &= chi2 < 16.27;
    Outcome {
        pass,
        detail: format!("eta=0.5 N=6 n=3: {}; survivor-count chi2 {chi2:.2} (bound 16.27)", parts.join(", ")),
    }
}

fn stream(u: &Interferometer, state: &InputState, cfg: &SamplerConfig, count: usize) -> Vec<u8> {
    let samples = sample(u, state, cfg, count).unwrap();
    let mut out = Vec::new();
    write_jsonl(&mut out, &SampleHeader::from_config(cfg, count), &samples).unwrap();
    out
}

fn criterion_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let u = Interferometer::haar_random(6, &mut rng);
    let state = fock_state(6, &[0, 2, 4]).unwrap();
    let max_workers = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    let configs = [
        SamplerConfig::new(41, x(1.0)),
        SamplerConfig::new(42, x(0.6)).with_j_max(2),
        SamplerConfig::new(43, x(1.0)).with_loss(0.5),
    ];
    let mut identical = 0;
    for cfg in &configs {
        let one = stream(&u, &state, &cfg.clone().with_workers(1), 5000);
        let many = stream(&u, &state, &cfg.clone().with_workers(max_workers), 5000);
        if one == many {
            identical += 1;
        }
    }
    Outcome {
        pass: identical == configs.len(),
        detail: format!(
            "{identical}/{} configurations byte-identical between 1 and {max_workers} workers",
            configs.len()
        ),
    }
}

fn criterion_contest() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let u = Interferometer::haar_random(6, &mut rng);
    let state = fock_state(6, &[0, 1, 2]).unwrap();
    let exact = sample(&u, &state, &SamplerConfig::new(51, x(1.0)), 10_000).unwrap();
    let classical = sample(&u, &state, &SamplerConfig::new(52, x(0.0)), 10_000).unwrap();
    let mut cfg = ContestConfig::new(x(1.0));
    cfg.seed = 53;
    let r = likelihood_contest(&u, &state, &exact, &classical, &cfg).unwrap();
    Outcome {
        pass: r.winner == Winner::A && r.bootstrap_ci.0 > 0.0,
        detail: format!(
            "winner {:?}, mean LL difference {:.4}, 95% CI ({:.4}, {:.4}), excluded {}/{}",
            r.winner, r.mean_difference, r.bootstrap_ci.0, r.bootstrap_ci.1, r.excluded_a, r.excluded_b
        ),
    }
}

fn main() {
    // `cargo test -- <filter>` passes extra args; this target always runs everything.
    let criteria: [Criterion; 9] = [
        ("1 oracle equivalence", criterion_oracle_equivalence),
        ("2 normalization", criterion_normalization),
        ("3 permanent identities", criterion_identities),
        ("4 closed forms", criterion_closed_forms),
        ("5 sampler fidelity", criterion_sampler_fidelity),
        ("6 truncation correctness", criterion_truncation),
        ("7 loss equivalence", criterion_loss),
        ("8 determinism", criterion_determinism),
        ("9 contest sanity", criterion_contest),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
