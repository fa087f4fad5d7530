//! `expressive`: build and check expressive-encoding parents, and run the
//! flipping-challenge and block-assembly experiments.
//!
//! Exit status is 0 on success, 2 when the input is invalid and 1 when a
//! valid run fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use expressive::constructions::{
    build_direct_nn_parents, build_gp_crossover_parents, build_gp_mutation_parent, build_lookup_parents,
    build_nn_crossover_parents, build_nn_mutation_parent_with, exact_crossover_distribution,
    exact_mutation_distribution, sampled_child_distribution, ApproxTarget, ConstructionReport, TruthTable,
    WeightedFunction,
};
use expressive::gp::make_miracle_gp_pair;
use expressive::harness::{parse_config, run_experiment, ExperimentConfig};
use expressive::metrics::{max_pointwise_error, tv_distance};
use expressive::nn::{make_miracle_nn_pair, MIRACLE_GAIN};
use expressive::operators::{OperatorKind, DEFAULT_SIGMA_MUT};
use expressive::{direct_encoding, nn_encode, BitVector, DiscreteDistribution, Error, FeedForwardNet, GpProgram, SeededStream};

#[derive(Parser)]
#[command(name = "expressive", version, about = "Expressive genetic encodings: constructions and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build parents whose child distribution approximates a target.
    Construct(ConstructArgs),
    /// Compute the child distribution of parent files under an operator.
    Verify(VerifyArgs),
    /// Run an experiment described by a config file.
    Run(RunArgs),
    /// Miracle-jump demo: all-zero parents, all-ones children.
    Miracle(MiracleArgs),
    /// Run an experiment or a construction over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstructKind {
    GpCrossover,
    GpMutation,
    NnCrossover,
    NnMutation,
    Lookup,
    DirectNn,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    kind: ConstructKind,
    /// Target distribution file (`n m` header, then `<bits> <p>` lines); for
    /// `direct-nn`, a function file.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Parent phenotypes for crossover kinds, `Y1,Y2` (default all zeros and
    /// all ones).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    parents: Option<Vec<String>>,
    /// Parent phenotype for mutation kinds (default all zeros).
    #[arg(long)]
    parent: Option<String>,
    /// Override the control, bottleneck or table width.
    #[arg(long)]
    width: Option<usize>,
    /// Mutation scale for `nn-mutation`.
    #[arg(long, default_value_t = DEFAULT_SIGMA_MUT)]
    sigma: f64,
    /// Directory for the parent files and `report.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OperatorArg {
    Crossover,
    Bitflip,
    Gaussian,
}

#[derive(Args)]
struct VerifyArgs {
    /// One or two parent files (GP program or network dumps).
    #[arg(long, num_args = 1..=2, required = true)]
    parents: Vec<PathBuf>,
    /// Defaults to crossover for two parents, bit flip for a program and
    /// Gaussian for a network.
    #[arg(long, value_enum)]
    operator: Option<OperatorArg>,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MUT)]
    sigma: f64,
    /// Sample this many children instead of enumerating (required for
    /// Gaussian mutation, default 200000 there).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Distribution to compare against.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Write the child distribution here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MiracleArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 64, 1024])]
    n: Vec<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config swept over `--n`, `--lambda` and `--L`.
    #[arg(long, conflicts_with = "construct")]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<usize>,
    #[arg(long = "L", value_delimiter = ',')]
    control_len: Vec<usize>,
    /// Construction swept over `--epsilon`.
    #[arg(long, value_enum, requires = "target")]
    construct: Option<ConstructKind>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

type CliResult<T> = Result<T, Failure>;

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

/// Bad inputs exit with 2, everything else with 1.
fn classify(e: Error) -> Failure {
    match e {
        Error::Parse { .. }
        | Error::InvalidDistribution(_)
        | Error::InvalidArgument(_)
        | Error::Dimension(_)
        | Error::LengthMismatch(..)
        | Error::SupportTooLarge { .. }
        | Error::StarNeedsStatic
        | Error::UndefinedName(_)
        | Error::InvalidProgram(_)
        | Error::Incompatible => Failure::Invalid(e.into()),
        other => Failure::Runtime(other.into()),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::Runtime)?;
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Runtime)
}

fn bits(s: &str, what: &str) -> CliResult<BitVector> {
    s.trim()
        .parse()
        .map_err(|e: Error| invalid(anyhow!("{what} `{s}`: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct(a) => construct(&a).map(|(text, _)| print!("{text}")),
        Command::Verify(a) => verify(&a),
        Command::Run(a) => run(&a),
        Command::Miracle(a) => miracle(&a),
        Command::Sweep(a) => sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------------------
// construct
// ---------------------------------------------------------------------------

/// Function file: a header `n_in n_out`, then one line per function,
/// `<probability> <row 0> <row 1> ...` with `2^n_in` output rows.
fn parse_functions(text: &str) -> CliResult<Vec<WeightedFunction>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| invalid(anyhow!("empty function file")))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| invalid(anyhow!("line {hl}: bad header `{header}`"))))
        .collect::<CliResult<_>>()?;
    let [n_in, n_out] = dims[..] else {
        return Err(invalid(anyhow!("line {hl}: header must be `n_in n_out`")));
    };
    lines
        .map(|(ln, l)| {
            let mut toks = l.split_whitespace();
            let p: f64 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| invalid(anyhow!("line {ln}: expected a probability")))?;
            let rows = toks
                .map(|t| bits(t, &format!("line {ln}: row")))
                .collect::<CliResult<Vec<_>>>()?;
            if rows.iter().any(|r| r.len() != n_out) {
                return Err(invalid(anyhow!("line {ln}: rows must have {n_out} bits")));
            }
            let table = TruthTable::new(n_in, rows).map_err(|e| invalid(anyhow!("line {ln}: {e}")))?;
            Ok(WeightedFunction { table, probability: p })
        })
        .collect()
}

fn crossover_target(a: &ConstructArgs, mu: DiscreteDistribution) -> CliResult<ApproxTarget> {
    let n = mu.dim();
    let (y1, y2) = match &a.parents {
        Some(p) => (bits(&p[0], "parent")?, bits(&p[1], "parent")?),
        None => (BitVector::zeros(n), BitVector::ones(n)),
    };
    let t = ApproxTarget::crossover(mu, a.epsilon, y1, y2).map_err(classify)?;
    Ok(match a.width {
        Some(w) => t.with_width(w),
        None => t,
    })
}

fn mutation_target(a: &ConstructArgs, mu: DiscreteDistribution) -> CliResult<ApproxTarget> {
    let y = match &a.parent {
        Some(p) => bits(p, "parent")?,
        None => BitVector::zeros(mu.dim()),
    };
    let t = ApproxTarget::mutation(mu, a.epsilon, y).map_err(classify)?;
    Ok(match a.width {
        Some(w) => t.with_width(w),
        None => t,
    })
}

/// Builds the parents; returns the printed report and the report itself.
fn construct(a: &ConstructArgs) -> CliResult<(String, ConstructionReport)> {
    let text = read(&a.target)?;
    let mut files: Vec<(&str, String)> = Vec::new();
    let report = if a.kind == ConstructKind::DirectNn {
        let fs_ = parse_functions(&text)?;
        let width = a.width.unwrap_or(6);
        let (p1, p2, r) = build_direct_nn_parents(&fs_, a.epsilon, width, None).map_err(classify)?;
        files.push(("parent1.nn", p1.to_string()));
        files.push(("parent2.nn", p2.to_string()));
        r
    } else {
        let mu = DiscreteDistribution::parse(&text)
            .map_err(|e| invalid(anyhow!("{}: {e}", a.target.display())))?;
        match a.kind {
            ConstructKind::GpCrossover => {
                let (p1, p2, r) = build_gp_crossover_parents(&crossover_target(a, mu)?).map_err(classify)?;
                files.push(("parent1.gp", p1.to_string()));
                files.push(("parent2.gp", p2.to_string()));
                r
            }
            ConstructKind::GpMutation => {
                let (p, r) = build_gp_mutation_parent(&mutation_target(a, mu)?).map_err(classify)?;
                files.push(("parent.gp", p.to_string()));
                r
            }
            ConstructKind::NnCrossover => {
                let (p1, p2, r) = build_nn_crossover_parents(&crossover_target(a, mu)?).map_err(classify)?;
                files.push(("parent1.nn", p1.to_string()));
                files.push(("parent2.nn", p2.to_string()));
                r
            }
            ConstructKind::NnMutation => {
                let (p, r) = build_nn_mutation_parent_with(&mutation_target(a, mu)?, a.sigma).map_err(classify)?;
                files.push(("parent.nn", p.to_string()));
                r
            }
            ConstructKind::Lookup => {
                let t = crossover_target(a, mu)?;
                let width = a.width.unwrap_or(8);
                let (p1, p2, r) = build_lookup_parents(&t, width).map_err(classify)?;
                let mut table = String::new();
                for y in p1.table() {
                    let _ = writeln!(table, "{y}");
                }
                files.push(("table.txt", table));
                files.push(("parent1.key", format!("{}\n", p1.key())));
                files.push(("parent2.key", format!("{}\n", p2.key())));
                r
            }
            ConstructKind::DirectNn => unreachable!(),
        }
    };
    let text = report.to_text();
    if let Some(dir) = &a.out {
        for (name, body) in &files {
            write(&dir.join(name), body)?;
        }
        write(&dir.join("report.txt"), &text)?;
    }
    Ok((text, report))
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

enum Parent {
    Program(GpProgram),
    Network(FeedForwardNet),
}

fn load_parent(path: &Path) -> CliResult<Parent> {
    let text = read(path)?;
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let wrap = |e: Error| invalid(anyhow!("{}: {e}", path.display()));
    if first.starts_with("program") {
        GpProgram::parse(&text).map(Parent::Program).map_err(wrap)
    } else if first.starts_with("network") {
        FeedForwardNet::parse(&text).map(Parent::Network).map_err(wrap)
    } else {
        Err(invalid(anyhow!("{}: neither a program nor a network dump", path.display())))
    }
}

fn child_distribution(a: &VerifyArgs) -> CliResult<DiscreteDistribution> {
    let parents = a.parents.iter().map(|p| load_parent(p)).collect::<CliResult<Vec<_>>>()?;
    let operator = a.operator.unwrap_or(match (&parents[..], parents.len()) {
        (_, 2) => OperatorArg::Crossover,
        ([Parent::Program(_)], _) => OperatorArg::Bitflip,
        _ => OperatorArg::Gaussian,
    });
    let op = match operator {
        OperatorArg::Crossover => OperatorKind::UniformCrossover,
        OperatorArg::Bitflip => OperatorKind::SinglePointBitFlip,
        OperatorArg::Gaussian => OperatorKind::GaussianSingleWeight { std: a.sigma },
    };
    if op.arity() != parents.len() {
        return Err(invalid(anyhow!(
            "operator takes {} parent(s), {} given",
            op.arity(),
            parents.len()
        )));
    }
    let mut rng = SeededStream::new(a.seed);
    match &parents[..] {
        [Parent::Program(x1), Parent::Program(x2)] => match a.samples {
            Some(s) => sampled_child_distribution(&[x1, x2], op, s, &mut rng, GpProgram::evaluate),
            None => exact_crossover_distribution(x1, x2, GpProgram::evaluate),
        },
        [Parent::Network(x1), Parent::Network(x2)] => match a.samples {
            Some(s) => sampled_child_distribution(&[x1, x2], op, s, &mut rng, nn_encode),
            None => exact_crossover_distribution(x1, x2, nn_encode),
        },
        [Parent::Program(x)] => match (op, a.samples) {
            (OperatorKind::SinglePointBitFlip, None) => exact_mutation_distribution(x, GpProgram::evaluate),
            (_, s) => sampled_child_distribution(&[x], op, s.unwrap_or(200_000), &mut rng, GpProgram::evaluate),
        },
        [Parent::Network(x)] => {
            sampled_child_distribution(&[x], op, a.samples.unwrap_or(200_000), &mut rng, nn_encode)
        }
        _ => return Err(invalid(anyhow!("parents must be both programs or both networks"))),
    }
    .map_err(classify)
}

fn verify(a: &VerifyArgs) -> CliResult<()> {
    let d = child_distribution(a)?;
    let mut text = d.to_text();
    if let Some(t) = &a.target {
        let mu = DiscreteDistribution::parse(&read(t)?)
            .map_err(|e| invalid(anyhow!("{}: {e}", t.display())))?;
        let err = max_pointwise_error(&d, &mu).map_err(classify)?;
        let tv = tv_distance(&d, &mu).map_err(classify)?;
        let _ = writeln!(text, "# max_pointwise_error = {err}");
        let _ = writeln!(text, "# tv_distance = {tv}");
    }
    match &a.out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// run, sweep
// ---------------------------------------------------------------------------

fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = read(path)?;
    parse_config(&text).map_err(|e| invalid(anyhow!("{}:\n{e}", path.display())))
}

fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seed: Option<u64>,
    trials: Option<usize>,
    workers: Option<usize>,
    out: Option<&PathBuf>,
) -> CliResult<()> {
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.algorithm.seed = s;
    }
    if let Some(t) = trials {
        if t == 0 {
            return Err(invalid(anyhow!("--trials must be at least 1")));
        }
        cfg.trials = t;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(o) = out {
        cfg.out = o.clone();
    }
    Ok(())
}

fn run(a: &RunArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.config)?;
    apply_overrides(&mut cfg, a.seed, a.trials, a.workers, a.out.as_ref())?;
    let report = run_experiment(&cfg).map_err(|e| Failure::Runtime(e.into()))?;
    print!("{}", report.summary);
    println!();
    println!("summary written to {}", report.summary_path.display());
    Ok(())
}

fn sweep(a: &SweepArgs) -> CliResult<()> {
    if let Some(kind) = a.construct {
        if a.epsilon.is_empty() {
            return Err(invalid(anyhow!("--construct needs --epsilon")));
        }
        let mut csv = String::from("epsilon,genome_size,evolvable_size,achieved_error,certified\n");
        for &eps in &a.epsilon {
            let args = ConstructArgs {
                kind,
                target: a.target.clone().expect("required by clap"),
                epsilon: eps,
                parents: None,
                parent: None,
                width: None,
                sigma: DEFAULT_SIGMA_MUT,
                out: None,
            };
            let (_, r) = construct(&args)?;
            let _ = writeln!(
                csv,
                "{eps},{},{},{},{}",
                r.genome_size,
                r.evolvable_size,
                r.achieved_error,
                r.certified()
            );
        }
        return emit(a.out.as_ref().map(|o| o.join("sweep.csv")), &csv);
    }
    let Some(path) = &a.config else {
        return Err(invalid(anyhow!("sweep needs --config or --construct")));
    };
    let mut base = load_config(path)?;
    apply_overrides(&mut base, a.seed, a.trials, a.workers, a.out.as_ref())?;
    let ns = if a.n.is_empty() { vec![base.problem.n] } else { a.n.clone() };
    let lambdas = if a.lambda.is_empty() {
        vec![base.algorithm.lambda]
    } else {
        a.lambda.clone()
    };
    let ls = if a.control_len.is_empty() {
        vec![base.algorithm.control_len]
    } else {
        a.control_len.clone()
    };
    let mut csv = String::from(
        "n,lambda,L,encoding,trials,converged,mean_generations,mean_evaluations,mean_proportion_at_optimum\n",
    );
    for &n in &ns {
        for &lambda in &lambdas {
            for &l in &ls {
                let mut cfg = base.clone();
                cfg.problem.n = n;
                cfg.algorithm.n = n;
                cfg.algorithm.lambda = lambda;
                cfg.algorithm.control_len = l;
                cfg.out = base.out.join(format!("n{n}_lambda{lambda}_L{l}"));
                // re-validate the grid point through the parser
                let cfg = parse_config(&cfg.to_text())
                    .map_err(|e| invalid(anyhow!("grid point n={n}, lambda={lambda}, L={l}:\n{e}")))?;
                let report = run_experiment(&cfg).map_err(|e| Failure::Runtime(e.into()))?;
                for r in &report.results {
                    let k = r.trials.len() as f64;
                    let mean = |f: &dyn Fn(&expressive::harness::TrialOutcome) -> f64| {
                        r.trials.iter().map(f).sum::<f64>() / k
                    };
                    let _ = writeln!(
                        csv,
                        "{n},{lambda},{l},{},{},{},{},{},{}",
                        r.encoding.name(),
                        r.trials.len(),
                        r.converged(),
                        mean(&|t| t.generations as f64),
                        mean(&|t| t.evaluations as f64),
                        mean(&|t| t.proportion_after_burn_in),
                    );
                }
            }
        }
    }
    emit(Some(base.out.join("sweep.csv")), &csv)
}

fn emit(path: Option<PathBuf>, text: &str) -> CliResult<()> {
    print!("{text}");
    match path {
        Some(p) => write(&p, text),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// miracle
// ---------------------------------------------------------------------------

fn miracle(a: &MiracleArgs) -> CliResult<()> {
    for &n in &a.n {
        let ones = BitVector::ones(n);
        let (g1, g2) = make_miracle_gp_pair(n).map_err(classify)?;
        let gp = exact_crossover_distribution(&g1, &g2, GpProgram::evaluate).map_err(classify)?;
        let (n1, n2) = make_miracle_nn_pair(n, MIRACLE_GAIN).map_err(classify)?;
        let nn = exact_crossover_distribution(&n1, &n2, nn_encode).map_err(classify)?;
        let zeros = BitVector::zeros(n);
        let direct = exact_crossover_distribution(&zeros, &zeros, |x: &BitVector| direct_encoding(x))
            .map_err(classify)?;
        let parents_zero = [g1.evaluate(), g2.evaluate(), nn_encode(&n1), nn_encode(&n2)]
            .into_iter()
            .all(|y| y.as_ref() == Ok(&zeros));
        println!(
            "n = {n}: P[all ones] gp = {} nn = {} direct = {}; parents encode all zeros: {parents_zero}",
            gp.prob(&ones),
            nn.prob(&ones),
            direct.prob(&ones)
        );
    }
    Ok(())
}
