//! Running an experiment: per-trial seeding, parallel trials and output
//! files.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bits::BitVector;
use crate::engine::{run_ea, EncodingKind, TrialStatus, TrialTrace};
use crate::error::{Error, Result};
use crate::metrics::adaptation_after;
use crate::problems::{make_lbap_instance, DfcState, Problem, RfcState, TargetPair};
use crate::stream::SeededStream;

use super::config::{ExperimentConfig, ProblemKind, ProblemSpec, TargetSpec};

const PROBLEM_SALT: u64 = 0x5052_4f42;
const COIN_SALT: u64 = 0x434f_494e;

/// Header of every per-trial CSV.
pub const TRACE_HEADER: &str = "generation,champion_fitness,target_id,at_optimum,evaluations,restarts";
/// Statistics written per aggregate row, in order.
pub const AGGREGATE_STATS: [&str; 5] = ["mean", "min", "max", "p05", "p95"];

/// The problem instance for trial `trial`; every encoding sees the same one.
pub fn build_problem(spec: &ProblemSpec, trial: usize) -> Result<Problem> {
    let mut rng = SeededStream::derive(spec.problem_seed, trial as u64).fork(PROBLEM_SALT);
    let target = |rng: &mut SeededStream| match &spec.target {
        TargetSpec::Ones => BitVector::ones(spec.n),
        TargetSpec::Random => BitVector::from_fn(spec.n, |_| rng.coin()),
        TargetSpec::Fixed(v) => v.clone(),
    };
    Ok(match spec.kind {
        ProblemKind::Dfc => Problem::Dfc(DfcState::new(TargetPair::new(target(&mut rng)))),
        ProblemKind::Rfc => {
            let coins = SeededStream::derive(spec.problem_seed, trial as u64).fork(COIN_SALT);
            Problem::Rfc(RfcState::new(TargetPair::new(target(&mut rng)), coins))
        }
        ProblemKind::Lbap => Problem::Lbap(make_lbap_instance(spec.n, spec.placement, &mut rng)?),
        ProblemKind::Match => Problem::Match(target(&mut rng)),
    })
}

/// Stream index of (encoding, trial) under the master seed.
pub fn trial_stream(encoding_index: usize, trial: usize) -> u64 {
    ((encoding_index as u64) << 32) | trial as u64
}

/// One trial of one encoding, exactly as `run_experiment` runs it.
pub fn run_trial(cfg: &ExperimentConfig, encoding_index: usize, trial: usize) -> Result<TrialTrace> {
    let mut ea = cfg.algorithm.clone();
    ea.encoding = cfg.encodings[encoding_index];
    ea.n = cfg.problem.n;
    ea.seed = cfg.seed;
    let stream = trial_stream(encoding_index, trial);
    let wrap = |e: Error| Error::Trial {
        trial,
        seed: cfg.seed,
        stream,
        message: e.to_string(),
    };
    let mut problem = build_problem(&cfg.problem, trial).map_err(wrap)?;
    let mut rng = SeededStream::derive(cfg.seed, stream);
    run_ea(&ea, &mut problem, &mut rng).map_err(wrap)
}

/// What one trial leaves behind once its CSV is written.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub status: TrialStatus,
    pub generations: u64,
    pub evaluations: u64,
    pub restarts: u64,
    pub final_fitness: usize,
    /// Share of generations at or after the burn-in spent at the optimum,
    /// counted over every generation rather than the recorded ones.
    pub proportion_after_burn_in: f64,
    pub away_after_burn_in: u64,
    pub at_after_burn_in: u64,
    /// `(generation, metric)` per record; see [`trace_metric`].
    pub series: Vec<(u64, f64)>,
}

/// The per-record quantity aggregated across trials: the running share of
/// records at the optimum for dynamic problems, champion fitness for static
/// ones. Computable from a trial CSV alone.
pub fn trace_metric(rows: &[(u64, usize, bool)], dynamic: bool) -> Vec<(u64, f64)> {
    let mut hits = 0u64;
    rows.iter()
        .enumerate()
        .map(|(i, &(g, f, at))| {
            hits += u64::from(at);
            let v = if dynamic {
                hits as f64 / (i + 1) as f64
            } else {
                f as f64
            };
            (g, v)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingResult {
    pub encoding: EncodingKind,
    pub trials: Vec<TrialOutcome>,
    pub aggregate_path: PathBuf,
}

impl EncodingResult {
    pub fn converged(&self) -> usize {
        self.trials.iter().filter(|t| t.status == TrialStatus::Converged).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub results: Vec<EncodingResult>,
    pub summary: String,
    pub summary_path: PathBuf,
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn trial_csv_path(out: &Path, encoding: EncodingKind, trial: usize) -> PathBuf {
    out.join(encoding.name()).join(format!("trial_{trial:04}.csv"))
}

fn write_trace(path: &Path, trace: &TrialTrace) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &trace.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.generation,
                r.champion_fitness,
                r.target_id,
                u8::from(r.at_optimum),
                r.evaluations,
                r.restarts
            )?;
        }
        Ok(())
    })
}

/// Reads back the `(generation, champion_fitness, at_optimum)` columns of a
/// trial CSV.
pub fn read_trace_csv(path: &Path) -> Result<Vec<(u64, usize, bool)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, m: &str| Error::Parse {
        line,
        message: format!("{}: {m}", path.display()),
    };
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i + 2, "expected 6 fields"));
            }
            let g = f[0].parse().map_err(|_| bad(i + 2, "bad generation"))?;
            let fit = f[1].parse().map_err(|_| bad(i + 2, "bad fitness"))?;
            Ok((g, fit, f[3] == "1"))
        })
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Long-format aggregate rows `(generation, stat, value)`.
///
/// The grid is every `stride`-th generation up to the longest trial, plus
/// that trial's last recorded generation; a trial contributes the metric of
/// its last record at or before each grid point (a finished trial holds its
/// final value).
pub fn aggregate_series(series: &[Vec<(u64, f64)>], stride: u64) -> Vec<(u64, &'static str, f64)> {
    let last = series.iter().filter_map(|s| s.last().map(|p| p.0)).max();
    let Some(last) = last else {
        return Vec::new();
    };
    let mut grid: Vec<u64> = (0..=last / stride).map(|k| k * stride).collect();
    if *grid.last().unwrap() != last {
        grid.push(last);
    }
    let mut cursors = vec![0usize; series.len()];
    let mut rows = Vec::with_capacity(grid.len() * AGGREGATE_STATS.len());
    for g in grid {
        let mut values: Vec<f64> = Vec::with_capacity(series.len());
        for (s, c) in series.iter().zip(cursors.iter_mut()) {
            while *c + 1 < s.len() && s[*c + 1].0 <= g {
                *c += 1;
            }
            if let Some(&(sg, v)) = s.get(*c) {
                if sg <= g {
                    values.push(v);
                }
            }
        }
        if values.is_empty() {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let stats = [
            mean,
            sorted[0],
            sorted[sorted.len() - 1],
            percentile(&sorted, 0.05),
            percentile(&sorted, 0.95),
        ];
        for (name, v) in AGGREGATE_STATS.iter().zip(stats) {
            rows.push((g, *name, v));
        }
    }
    rows
}

fn write_aggregate(path: &Path, rows: &[(u64, &str, f64)]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "generation,stat,value")?;
        for (g, s, v) in rows {
            writeln!(w, "{g},{s},{v}")?;
        }
        Ok(())
    })
}

fn summary_text(cfg: &ExperimentConfig, results: &[EncodingResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment = {}", cfg.name);
    let _ = writeln!(s, "problem = {} (n = {})", cfg.problem.kind.name(), cfg.problem.n);
    let _ = writeln!(s, "trials = {}", cfg.trials);
    let _ = writeln!(s, "burn_in = {}", cfg.burn_in);
    for r in results {
        let k = r.trials.len() as f64;
        let mean = |f: &dyn Fn(&TrialOutcome) -> f64| r.trials.iter().map(f).sum::<f64>() / k;
        let props: Vec<f64> = r.trials.iter().map(|t| t.proportion_after_burn_in).collect();
        let (away, at) = r
            .trials
            .iter()
            .fold((0u64, 0u64), |(a, b), t| (a + t.away_after_burn_in, b + t.at_after_burn_in));
        let _ = writeln!(s);
        let _ = writeln!(s, "[{}]", r.encoding.name());
        let _ = writeln!(s, "converged = {}/{}", r.converged(), r.trials.len());
        let _ = writeln!(s, "mean_generations = {:.1}", mean(&|t| t.generations as f64));
        let _ = writeln!(s, "mean_evaluations = {:.1}", mean(&|t| t.evaluations as f64));
        let _ = writeln!(s, "total_restarts = {}", r.trials.iter().map(|t| t.restarts).sum::<u64>());
        let _ = writeln!(
            s,
            "max_final_fitness = {}",
            r.trials.iter().map(|t| t.final_fitness).max().unwrap_or(0)
        );
        let _ = writeln!(
            s,
            "proportion_at_optimum = min {:.4} mean {:.4} max {:.4}",
            props.iter().copied().fold(f64::INFINITY, f64::min),
            props.iter().sum::<f64>() / k,
            props.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        if at == 0 {
            let _ = writeln!(s, "adaptation_ratio = inf");
        } else {
            let _ = writeln!(s, "adaptation_ratio = {:.4}", away as f64 / at as f64);
        }
    }
    s
}

fn outcome(cfg: &ExperimentConfig, trial: usize, trace: &TrialTrace) -> TrialOutcome {
    let after = adaptation_after(trace, cfg.burn_in, cfg.window);
    let rows: Vec<(u64, usize, bool)> = trace
        .records
        .iter()
        .map(|r| (r.generation, r.champion_fitness, r.at_optimum))
        .collect();
    TrialOutcome {
        trial,
        status: trace.status,
        generations: trace.generations,
        evaluations: trace.evaluations,
        restarts: trace.restarts,
        final_fitness: trace.final_fitness,
        proportion_after_burn_in: after.proportion_at(),
        away_after_burn_in: after.away,
        at_after_burn_in: after.at,
        series: trace_metric(&rows, cfg.problem.kind.is_dynamic()),
    }
}

/// Runs every trial of every encoding and writes
///
/// - `<out>/<encoding>/trial_NNNN.csv` per trial,
/// - `<out>/<encoding>/aggregate.csv`,
/// - `<out>/summary.txt` and `<out>/config.txt`.
///
/// Outputs depend only on the config, not on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let config_path = cfg.out.join("config.txt");
    write_file(&config_path, |w| w.write_all(cfg.to_text().as_bytes()))?;
    let mut results = Vec::new();
    for (ei, &encoding) in cfg.encodings.iter().enumerate() {
        let dir = cfg.out.join(encoding.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let trials: Vec<TrialOutcome> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let trace = run_trial(cfg, ei, t)?;
                    write_trace(&trial_csv_path(&cfg.out, encoding, t), &trace)?;
                    Ok(outcome(cfg, t, &trace))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let series: Vec<Vec<(u64, f64)>> = trials.iter().map(|t| t.series.clone()).collect();
        let rows = aggregate_series(&series, cfg.algorithm.record_every);
        let aggregate_path = dir.join("aggregate.csv");
        write_aggregate(&aggregate_path, &rows)?;
        results.push(EncodingResult {
            encoding,
            trials,
            aggregate_path,
        });
    }
    let summary = summary_text(cfg, &results);
    let summary_path = cfg.out.join("summary.txt");
    write_file(&summary_path, |w| w.write_all(summary.as_bytes()))?;
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        results,
        summary,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert!((percentile(&v, 0.05) - 0.2).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.95), 7.0);
    }

    #[test]
    fn aggregate_holds_finished_trials() {
        let a = vec![(0, 1.0), (1, 2.0), (2, 3.0)];
        let b = vec![(0, 5.0)];
        let rows = aggregate_series(&[a, b], 1);
        let at2: Vec<f64> = rows.iter().filter(|r| r.0 == 2).map(|r| r.2).collect();
        assert_eq!(at2, vec![4.0, 3.0, 5.0, 3.1, 4.9]);
    }

    #[test]
    fn single_trial_aggregate_is_the_trace() {
        let a = vec![(0, 1.0), (3, 2.0)];
        let rows = aggregate_series(std::slice::from_ref(&a), 2);
        let grid: Vec<u64> = rows.iter().map(|r| r.0).step_by(5).collect();
        assert_eq!(grid, vec![0, 2, 3]);
        assert!(rows.iter().filter(|r| r.0 == 2).all(|r| r.2 == 1.0));
        assert!(rows.iter().filter(|r| r.0 == 3).all(|r| r.2 == 2.0));
    }

    #[test]
    fn running_share_for_dynamic() {
        let m = trace_metric(&[(0, 0, false), (1, 4, true), (2, 0, false), (3, 4, true)], true);
        assert_eq!(m.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0 / 3.0, 0.5]);
    }
}
