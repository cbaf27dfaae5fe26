//! Oracle-equivalence self-check on shipped fixtures (and, at medium
//! scale, on a grid of seeded random unitaries).

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use boson_marginals::marginals::marginal_multiset_distribution;
use boson_marginals::oracle::{classical_distribution, full_distribution, marginalize, FullDistribution};
use boson_marginals::permanent::{UnitaryFile, DEFAULT_UNITARITY_TOL};
use boson_marginals::sampler::{sample, SamplerConfig};
use boson_marginals::verify::{histogram, total_variation};
use boson_marginals::{
    disjoint_superposition, fock_state, gbs_state, marginal_probability, Distinguishability, EnumerationLimits,
    GbsSpec, InputState, Interferometer, MarginalQuery, OutputPattern, StateSpec,
};

use crate::Status;

const UNITARY: &str = "unitary6.json";
const STATES: [&str; 3] = ["fock3.json", "gbs2.json", "superposition.json"];
const EXPECTED: &str = "expected_fock3_x07.json";

fn embedded(name: &str) -> Option<&'static str> {
    Some(match name {
        UNITARY => include_str!("../fixtures/unitary6.json"),
        "fock3.json" => include_str!("../fixtures/fock3.json"),
        "gbs2.json" => include_str!("../fixtures/gbs2.json"),
        "superposition.json" => include_str!("../fixtures/superposition.json"),
        EXPECTED => include_str!("../fixtures/expected_fock3_x07.json"),
        _ => return None,
    })
}

struct Fixtures<'a> {
    dir: Option<&'a Path>,
}

impl Fixtures<'_> {
    fn read(&self, name: &str) -> Result<String> {
        match self.dir {
            Some(dir) => {
                let path = dir.join(name);
                std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
            }
            None => embedded(name)
                .map(str::to_owned)
                .ok_or_else(|| anyhow!("no built-in fixture {name}")),
        }
    }
}

struct Check {
    name: String,
    residual: f64,
    tolerance: f64,
    error: Option<String>,
}

impl Check {
    fn passed(&self) -> bool {
        self.error.is_none() && self.residual <= self.tolerance
    }
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn record(&mut self, name: impl Into<String>, tolerance: f64, result: Result<f64>) {
        let (residual, error) = match result {
            Ok(r) => (r, None),
            Err(e) => (f64::NAN, Some(format!("{e:#}"))),
        };
        self.checks.push(Check {
            name: name.into(),
            residual,
            tolerance,
            error,
        });
    }
}

fn x(v: f64) -> Distinguishability {
    Distinguishability::new(v).expect("fixed overlap in range")
}

/// Largest deviation between the marginal routes and the marginalized
/// oracle, over every order, every distinct mode set and every multiset.
fn oracle_residual(u: &Interferometer, state: &InputState, xv: f64, limits: &EnumerationLimits) -> Result<f64> {
    let full = full_distribution(u, state, x(xv), limits)?;
    let mut worst = 0.0f64;
    for k in 1..=state.photon_number() {
        for modes in (0..u.n_modes()).combinations(k) {
            let q = MarginalQuery::exact(OutputPattern::unordered(modes.clone()), x(xv));
            let fast = marginal_probability(u, state, &q)?;
            worst = worst.max((fast - marginalize(&full, &modes)?).abs());
        }
        for e in marginal_multiset_distribution(u, state, k, x(xv), None, limits)?.entries {
            worst = worst.max((e.probability - marginalize(&full, &e.pattern)?).abs());
        }
    }
    Ok(worst)
}

fn normalization_residual(u: &Interferometer, state: &InputState, xv: f64, limits: &EnumerationLimits) -> Result<f64> {
    Ok((full_distribution(u, state, x(xv), limits)?.total() - 1.0).abs())
}

fn dump_residual(expected: &str, u: &Interferometer, state: &InputState, limits: &EnumerationLimits) -> Result<f64> {
    let value: serde_json::Value = serde_json::from_str(expected)?;
    let xv = value["x"].as_f64().ok_or_else(|| anyhow!("missing \"x\""))?;
    let dump = FullDistribution::from_json(&value["distribution"], u.n_modes())?;
    let fresh = full_distribution(u, state, x(xv), limits)?;
    let keys: BTreeSet<&Vec<usize>> = dump.entries.keys().chain(fresh.entries.keys()).collect();
    Ok(keys
        .into_iter()
        .map(|k| (dump.get(k) - fresh.get(k)).abs())
        .fold(0.0, f64::max))
}

fn fixture_checks(report: &mut Report, fixtures: &Fixtures, limits: &EnumerationLimits) {
    let unitary = fixtures.read(UNITARY).and_then(|text| {
        let file: UnitaryFile = serde_json::from_str(&text)?;
        Ok(Interferometer::from_file(&file, DEFAULT_UNITARITY_TOL)?)
    });
    let u = match unitary {
        Ok(u) => {
            report.record(format!("load {UNITARY}"), 0.0, Ok(0.0));
            u
        }
        Err(e) => {
            report.record(format!("load {UNITARY}"), 0.0, Err(e));
            return;
        }
    };

    let mut states = Vec::new();
    for name in STATES {
        let built = fixtures.read(name).and_then(|text| {
            let spec: StateSpec = serde_json::from_str(&text)?;
            Ok(spec.build(u.n_modes(), limits)?)
        });
        match built {
            Ok(s) => {
                report.record(format!("load {name}"), 0.0, Ok(0.0));
                states.push((name.trim_end_matches(".json"), s));
            }
            Err(e) => report.record(format!("load {name}"), 0.0, Err(e)),
        }
    }

    if let Some((_, fock)) = states.iter().find(|(n, _)| *n == "fock3") {
        let residual = fixtures
            .read(EXPECTED)
            .and_then(|text| dump_residual(&text, &u, fock, limits));
        report.record(format!("reference dump {EXPECTED}"), 1e-9, residual);

        let classical = (|| -> Result<f64> {
            let q = full_distribution(&u, fock, x(0.0), limits)?;
            let c = classical_distribution(&u, fock, limits)?;
            Ok(q.entries.iter().map(|(k, p)| (p - c.get(k)).abs()).fold(0.0, f64::max))
        })();
        report.record("classical limit fock3", 1e-12, classical);

        let sampled = (|| -> Result<f64> {
            let samples = sample(&u, fock, &SamplerConfig::new(1, x(1.0)), 20_000)?;
            let exact = full_distribution(&u, fock, x(1.0), limits)?;
            Ok(total_variation(&histogram(&samples), &exact.entries))
        })();
        report.record("sampler TVD fock3 x=1 (20000 samples)", 0.05, sampled);
    }

    for (name, state) in &states {
        for xv in [0.0, 0.3, 0.7, 1.0] {
            report.record(
                format!("oracle equivalence {name} x={xv}"),
                1e-9,
                oracle_residual(&u, state, xv, limits),
            );
            report.record(
                format!("normalization {name} x={xv}"),
                1e-9,
                normalization_residual(&u, state, xv, limits),
            );
        }
    }

    let bs = Interferometer::balanced_beamsplitter();
    for xv in [0.0, 0.5, 1.0] {
        let residual = (|| -> Result<f64> {
            let state = fock_state(2, &[0, 1])?;
            let q = MarginalQuery::exact(OutputPattern::unordered(vec![0, 1]), x(xv));
            Ok((marginal_probability(&bs, &state, &q)? - (1.0 - xv * xv) / 2.0).abs())
        })();
        report.record(format!("hong-ou-mandel x={xv}"), 1e-12, residual);
    }
}

fn grid_checks(report: &mut Report, limits: &EnumerationLimits) {
    for n_modes in [4, 6, 8] {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + n_modes as u64);
        let u = Interferometer::haar_random(n_modes, &mut rng);
        for n in [2, 3, 4] {
            let mut states: Vec<(&str, Result<InputState>)> =
                vec![("fock", fock_state(n_modes, &(0..n).collect_vec()).map_err(Into::into))];
            if n % 2 == 0 {
                let spec = GbsSpec {
                    pairs: vec![(0, 1), (2, 3)],
                    r: vec![0.5, 0.8],
                    phase: vec![0.3, 1.1],
                };
                states.push(("gbs", gbs_state(n_modes, &spec, n, limits).map_err(Into::into)));
            }
            if 2 * n <= n_modes {
                let a = (0..n).collect_vec();
                let b = (n..2 * n).collect_vec();
                states.push(("superposition", disjoint_superposition(n_modes, &a, &b).map_err(Into::into)));
            }
            for (name, state) in states {
                let residual = state.and_then(|s| {
                    [0.0, 0.3, 0.7, 1.0].iter().try_fold(0.0f64, |acc, &xv| {
                        let r = oracle_residual(&u, &s, xv, limits)?;
                        Ok(acc.max(r).max(normalization_residual(&u, &s, xv, limits)?))
                    })
                });
                report.record(format!("grid N={n_modes} n={n} {name}"), 1e-9, residual);
            }
        }
    }
}

pub fn run(medium: bool, fixture_dir: Option<&Path>) -> Result<Status> {
    let limits = EnumerationLimits::from_env().context("enumeration limit environment variables")?;
    let fixtures = Fixtures { dir: fixture_dir };
    let mut report = Report::default();
    fixture_checks(&mut report, &fixtures, &limits);
    if medium {
        grid_checks(&mut report, &limits);
    }

    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        match &c.error {
            None if c.tolerance == 0.0 => println!("{tag}  {:<width$}", c.name),
            None => println!(
                "{tag}  {:<width$}  residual {:.2e}  tol {:.0e}",
                c.name, c.residual, c.tolerance
            ),
            Some(e) => println!("{tag}  {:<width$}  {e}", c.name),
        }
    }
    let failed = report.checks.iter().filter(|c| !c.passed()).count();
    println!("{} checks, {failed} failed", report.checks.len());
    Ok(if failed == 0 { Status::Ok } else { Status::CheckFailed })
}
