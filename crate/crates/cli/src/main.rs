//! `bsmarg`: marginal probabilities, sampling and checks from the command line.
//!
//! Exit codes: 0 success, 1 failed check or contest expectation, 2 bad input.

mod selfcheck;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use boson_marginals::marginals::{marginal_multiset_distribution, MarginalTable};
use boson_marginals::oracle::{classical_distribution, full_distribution};
use boson_marginals::permanent::{permanent, submatrix, ComplexMatrix, DEFAULT_UNITARITY_TOL};
use boson_marginals::sampler::{read_jsonl, sample_mixture, write_jsonl, Sample, SampleHeader, SamplerConfig};
use boson_marginals::verify::{likelihood_contest, marginal_report, ContestConfig, Winner};
use boson_marginals::{
    marginal_distribution, marginal_probability, Distinguishability, EnumerationLimits, InputState, Interferometer,
    MarginalQuery, OutputPattern, StateSpec,
};

#[derive(Parser)]
#[command(name = "bsmarg", version, about = "Boson sampling marginals, sampling and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Permanent of a matrix file, or of a submatrix of a unitary.
    Perm(PermArgs),
    /// Write a Haar-random unitary.
    Unitary(UnitaryArgs),
    /// Marginal probability of one pattern, or the full k-th order table.
    Marginal(MarginalArgs),
    /// Brute-force output distribution over all multisets (small sizes).
    Distribution(DistributionArgs),
    /// Draw samples as JSON lines.
    Sample(SampleArgs),
    /// Log-likelihood contest between two sample files.
    Contest(ContestArgs),
    /// Empirical k-th order marginals of a sample file against the model.
    Report(ReportArgs),
    /// Run the built-in oracle-equivalence checks.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Unitary JSON file {"n_modes", "re", "im"}.
    #[arg(long)]
    unitary: PathBuf,
    /// Input state JSON file.
    #[arg(long)]
    state: PathBuf,
    /// Pairwise overlap between photons from different input modes.
    #[arg(long, default_value_t = 1.0)]
    x: f64,
    /// Largest deviation from unitarity accepted when loading.
    #[arg(long, default_value_t = DEFAULT_UNITARITY_TOL)]
    unitarity_tol: f64,
}

#[derive(Args)]
struct OutputArg {
    /// Output file; standard output if omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PermArgs {
    /// Square matrix JSON file {"re": [[..]], "im": [[..]]}.
    #[arg(long, conflicts_with_all = ["unitary", "rows", "cols"])]
    matrix: Option<PathBuf>,
    #[arg(long, requires_all = ["rows", "cols"])]
    unitary: Option<PathBuf>,
    /// Input modes (rows), comma separated, repeats allowed.
    #[arg(long, value_delimiter = ',')]
    rows: Option<Vec<usize>>,
    /// Output modes (columns), comma separated, repeats allowed.
    #[arg(long, value_delimiter = ',')]
    cols: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_UNITARITY_TOL)]
    unitarity_tol: f64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct UnitaryArgs {
    #[arg(long)]
    modes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct MarginalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Order of the table to compute.
    #[arg(long, conflicts_with = "pattern", required_unless_present = "pattern")]
    k: Option<usize>,
    /// Output modes of a single pattern, comma separated.
    #[arg(long, value_delimiter = ',')]
    pattern: Option<Vec<usize>>,
    /// Treat --pattern as an ordered tuple (repeated modes allowed).
    #[arg(long, requires = "pattern")]
    ordered: bool,
    /// Include multisets with repeated modes in the --k table.
    #[arg(long, requires = "k")]
    collisions: bool,
    /// Keep interference terms of at most this order.
    #[arg(long)]
    jmax: Option<usize>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct DistributionArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Route photons independently (fully distinguishable), ignoring --x.
    #[arg(long)]
    classical: bool,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jmax: Option<usize>,
    /// Per-photon survival probability.
    #[arg(long)]
    loss: Option<f64>,
    /// Photon-number distribution, e.g. "2:0.5,4:0.5".
    #[arg(long)]
    n_dist: Option<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    A,
    B,
    Tie,
}

#[derive(Args)]
struct ContestArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with status 1 unless this set wins.
    #[arg(long, value_enum)]
    expect: Option<Expect>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    k: usize,
    /// Reference marginals computed with this truncation order.
    #[arg(long)]
    jmax: Option<usize>,
    /// Include multisets with repeated modes.
    #[arg(long)]
    collisions: bool,
    /// Exit with status 1 if any |z| exceeds this value.
    #[arg(long)]
    fail_above: Option<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Small,
    Medium,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long, value_enum, default_value = "small")]
    scale: Scale,
    /// Directory with fixture files replacing the built-in ones.
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Perm(a) => cmd_perm(a),
        Command::Unitary(a) => cmd_unitary(a),
        Command::Marginal(a) => cmd_marginal(a),
        Command::Distribution(a) => cmd_distribution(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Contest(a) => cmd_contest(a),
        Command::Report(a) => cmd_report(a),
        Command::Selfcheck(a) => selfcheck::run(
            matches!(a.scale, Scale::Medium),
            a.fixtures.as_deref(),
        ),
    }
}

fn open_output(out: &OutputArg) -> Result<Box<dyn Write>> {
    Ok(match &out.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("--output {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(out: &OutputArg, value: &serde_json::Value) -> Result<()> {
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_unitary(path: &Path, tol: f64) -> Result<Interferometer> {
    Interferometer::load(path, tol).with_context(|| format!("--unitary {}", path.display()))
}

fn limits() -> Result<EnumerationLimits> {
    EnumerationLimits::from_env().context("enumeration limit environment variables")
}

fn overlap(x: f64) -> Result<Distinguishability> {
    Distinguishability::new(x).context("--x")
}

struct Model {
    u: Interferometer,
    spec: StateSpec,
    state: InputState,
    x: Distinguishability,
    limits: EnumerationLimits,
}

fn load_model(m: &ModelArgs) -> Result<Model> {
    let u = load_unitary(&m.unitary, m.unitarity_tol)?;
    let limits = limits()?;
    let spec = StateSpec::load(&m.state).with_context(|| format!("--state {}", m.state.display()))?;
    let state = spec
        .build(u.n_modes(), &limits)
        .with_context(|| format!("--state {}", m.state.display()))?;
    Ok(Model {
        u,
        spec,
        state,
        x: overlap(m.x)?,
        limits,
    })
}

#[derive(Deserialize)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Option<Vec<Vec<f64>>>,
}

fn cmd_perm(a: PermArgs) -> Result<Status> {
    let m = match (&a.matrix, &a.unitary) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("--matrix {}", path.display()))?;
            let f: MatrixFile = serde_json::from_str(&text).with_context(|| format!("--matrix {}", path.display()))?;
            let im = f
                .im
                .unwrap_or_else(|| f.re.iter().map(|r| vec![0.0; r.len()]).collect());
            ComplexMatrix::from_parts(&f.re, &im).context("--matrix")?
        }
        (None, Some(path)) => {
            let u = load_unitary(path, a.unitarity_tol)?;
            submatrix(&u, a.rows.as_deref().unwrap_or(&[]), a.cols.as_deref().unwrap_or(&[]))
                .context("--rows/--cols")?
        }
        (None, None) => bail!("give --matrix, or --unitary with --rows and --cols"),
    };
    let p = permanent(&m).context("permanent")?;
    write_json(&a.out, &json!({"re": p.re, "im": p.im, "abs2": p.norm_sqr()}))?;
    Ok(Status::Ok)
}

fn cmd_unitary(a: UnitaryArgs) -> Result<Status> {
    if a.modes == 0 {
        bail!("--modes must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let u = Interferometer::haar_random(a.modes, &mut rng);
    write_json(&a.out, &serde_json::to_value(u.to_file())?)?;
    Ok(Status::Ok)
}

fn cmd_marginal(a: MarginalArgs) -> Result<Status> {
    let m = load_model(&a.model)?;
    if let Some(modes) = a.pattern {
        let pattern = if a.ordered {
            OutputPattern::ordered(modes)
        } else {
            OutputPattern::unordered(modes)
        };
        let q = MarginalQuery::new(pattern.clone(), m.x, a.jmax).context("--jmax")?;
        let p = marginal_probability(&m.u, &m.state, &q).context("--pattern")?;
        write_json(
            &a.out,
            &json!({
                "pattern": pattern.modes(),
                "ordered": pattern.is_ordered(),
                "x": m.x.value(),
                "j_max": a.jmax,
                "probability": p,
            }),
        )?;
        return Ok(Status::Ok);
    }
    let k = a.k.expect("clap enforces --k or --pattern");
    let jmax = a.jmax.map(|j| j.min(k));
    let table: MarginalTable = if a.collisions {
        marginal_multiset_distribution(&m.u, &m.state, k, m.x, jmax, &m.limits)
    } else {
        marginal_distribution(&m.u, &m.state, k, m.x, jmax, &m.limits)
    }
    .context("--k")?;
    write_json(&a.out, &serde_json::to_value(&table)?)?;
    Ok(Status::Ok)
}

fn cmd_distribution(a: DistributionArgs) -> Result<Status> {
    let m = load_model(&a.model)?;
    let d = if a.classical {
        classical_distribution(&m.u, &m.state, &m.limits)
    } else {
        full_distribution(&m.u, &m.state, m.x, &m.limits)
    }
    .context("distribution")?;
    write_json(
        &a.out,
        &json!({
            "n_modes": d.n_modes,
            "photon_number": d.photon_number,
            "x": if a.classical { 0.0 } else { m.x.value() },
            "classical": a.classical,
            "distribution": d.to_json(),
        }),
    )?;
    Ok(Status::Ok)
}

fn parse_n_dist(text: &str) -> Result<BTreeMap<usize, f64>> {
    text.split(',')
        .map(|item| {
            let (n, p) = item
                .split_once(':')
                .with_context(|| format!("--n-dist entry {item:?} is not n:p"))?;
            let n: usize = n.trim().parse().with_context(|| format!("--n-dist photon number {n:?}"))?;
            let p: f64 = p.trim().parse().with_context(|| format!("--n-dist probability {p:?}"))?;
            Ok((n, p))
        })
        .collect()
}

fn cmd_sample(a: SampleArgs) -> Result<Status> {
    let m = load_model(&a.model)?;
    let mut cfg = SamplerConfig::new(a.seed, m.x);
    cfg.j_max = a.jmax;
    cfg.loss_eta = a.loss;
    cfg.workers = a.workers;
    let mut states = vec![m.state.clone()];
    if let Some(text) = &a.n_dist {
        let dist = parse_n_dist(text)?;
        states = dist
            .iter()
            .filter(|(&n, &p)| n > 0 && p > 0.0)
            .map(|(&n, _)| {
                m.spec
                    .build_with_photon_number(m.u.n_modes(), n, &m.limits)
                    .with_context(|| format!("--n-dist photon number {n}"))
            })
            .collect::<Result<_>>()?;
        cfg.n_distribution = Some(dist);
    }
    cfg.validate().context("sampler options")?;
    let samples = sample_mixture(&m.u, &states, &cfg, a.count).context("sampling")?;
    let mut w = open_output(&a.out)?;
    write_jsonl(&mut w, &SampleHeader::from_config(&cfg, a.count), &samples)?;
    Ok(Status::Ok)
}

fn load_samples(path: &Path, flag: &str) -> Result<Vec<Sample>> {
    let file = File::open(path).with_context(|| format!("{flag} {}", path.display()))?;
    let (_, samples) = read_jsonl(BufReader::new(file)).with_context(|| format!("{flag} {}", path.display()))?;
    Ok(samples)
}

fn cmd_contest(a: ContestArgs) -> Result<Status> {
    let m = load_model(&a.model)?;
    let set_a = load_samples(&a.a, "--a")?;
    let set_b = load_samples(&a.b, "--b")?;
    let mut cfg = ContestConfig::new(m.x);
    cfg.resamples = a.resamples;
    cfg.seed = a.seed;
    let r = likelihood_contest(&m.u, &m.state, &set_a, &set_b, &cfg).context("contest")?;
    write_json(
        &a.out,
        &json!({
            "totals": {"a": r.log_likelihood_a, "b": r.log_likelihood_b},
            "scored": {"a": r.per_sample_a.len(), "b": r.per_sample_b.len()},
            "excluded": {"a": r.excluded_a, "b": r.excluded_b},
            "mean_difference": r.mean_difference,
            "winner": r.winner,
            "bootstrap_ci": [r.bootstrap_ci.0, r.bootstrap_ci.1],
        }),
    )?;
    let expected = a.expect.map(|e| match e {
        Expect::A => Winner::A,
        Expect::B => Winner::B,
        Expect::Tie => Winner::Tie,
    });
    Ok(match expected {
        Some(w) if w != r.winner => {
            eprintln!("contest winner {:?}, expected {w:?}", r.winner);
            Status::CheckFailed
        }
        _ => Status::Ok,
    })
}

fn cmd_report(a: ReportArgs) -> Result<Status> {
    let m = load_model(&a.model)?;
    let samples = load_samples(&a.samples, "--samples")?;
    let jmax = a.jmax.map(|j| j.min(a.k));
    let table = if a.collisions {
        marginal_multiset_distribution(&m.u, &m.state, a.k, m.x, jmax, &m.limits)
    } else {
        marginal_distribution(&m.u, &m.state, a.k, m.x, jmax, &m.limits)
    }
    .context("--k")?;
    let rows = marginal_report(&samples, &table).context("report")?;
    let max_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    write_json(
        &a.out,
        &json!({
            "k": a.k,
            "samples": samples.len(),
            "max_abs_z": max_z,
            "rows": rows,
        }),
    )?;
    Ok(match a.fail_above {
        Some(limit) if max_z > limit => {
            eprintln!("max |z| = {max_z:.3} exceeds {limit}");
            Status::CheckFailed
        }
        _ => Status::Ok,
    })
}
