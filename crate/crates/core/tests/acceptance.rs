//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use expressive::constructions::{
    build_direct_nn_parents, build_gp_crossover_parents, build_gp_mutation_parent, build_lookup_parents,
    build_nn_crossover_parents, build_nn_mutation_parent, exact_crossover_distribution, realized_truth_table,
    sampled_child_distribution, ApproxTarget, TruthTable, WeightedFunction,
};
use expressive::engine::{Champion, EncodingKind, TrialStatus};
use expressive::gp::{make_miracle_gp_pair, make_switch_template, make_xor_block_template};
use expressive::harness::{parse_config, run_experiment, run_trial, ExperimentConfig};
use expressive::metrics::{adaptation_after, tv_distance};
use expressive::nn::{make_miracle_nn_pair, Activation, Layer, MIRACLE_GAIN};
use expressive::operators::{uniform_crossover, OperatorKind, DEFAULT_SIGMA_MUT};
use expressive::{
    direct_encoding, nn_encode, BitVector, DiscreteDistribution, FeedForwardNet, Genome, GpProgram, SeededStream,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// `m` distinct points of `{0,1}^n` with random positive probabilities.
fn random_distribution(n: usize, m: usize, rng: &mut SeededStream) -> DiscreteDistribution {
    let mut points = BTreeSet::new();
    while points.len() < m {
        points.insert(BitVector::from_fn(n, |_| rng.coin()));
    }
    let weights: Vec<f64> = (0..m).map(|_| 0.05 + rng.unit()).collect();
    let total: f64 = weights.iter().sum();
    DiscreteDistribution::new(n, points.into_iter().zip(weights).map(|(y, w)| (y, w / total)).collect())
        .expect("normalized")
}

fn random_bits(n: usize, rng: &mut SeededStream) -> BitVector {
    BitVector::from_fn(n, |_| rng.coin())
}

/// The 50 targets shared by the two GP universality criteria.
fn gp_targets() -> Vec<(DiscreteDistribution, BitVector, BitVector, BitVector)> {
    let mut rng = SeededStream::new(2024);
    (0..50)
        .map(|_| {
            let m = 2 + rng.below(7);
            let mu = random_distribution(8, m, &mut rng);
            (mu, random_bits(8, &mut rng), random_bits(8, &mut rng), random_bits(8, &mut rng))
        })
        .collect()
}

fn miracle() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    for n in [4usize, 64, 1024] {
        let (zeros, ones) = (BitVector::zeros(n), BitVector::ones(n));
        let (g1, g2) = make_miracle_gp_pair(n).unwrap();
        let (n1, n2) = make_miracle_nn_pair(n, MIRACLE_GAIN).unwrap();
        let gp = exact_crossover_distribution(&g1, &g2, GpProgram::evaluate).unwrap();
        let nn = exact_crossover_distribution(&n1, &n2, nn_encode).unwrap();
        let direct = exact_crossover_distribution(&zeros, &zeros, direct_encoding).unwrap();
        ok &= gp.prob(&ones) == 0.25 && nn.prob(&ones) == 0.25 && direct.prob(&ones) == 0.0;
        ok &= [g1.evaluate(), g2.evaluate(), nn_encode(&n1), nn_encode(&n2)]
            .iter()
            .all(|y| y.as_ref() == Ok(&zeros));
    }
    let t = start.elapsed();
    outcome(ok && t < Duration::from_secs(1), format!("P[all ones] = 0.25 (gp, nn), 0 (direct), {t:.2?}"))
}

fn gp_crossover_universality() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (mu, y1, y2, _) in gp_targets() {
        let (p1, p2, r) = build_gp_crossover_parents(&ApproxTarget::crossover(mu, 0.05, y1.clone(), y2.clone()).unwrap()).unwrap();
        ok &= r.exact && r.parameter("L") == Some("7") && r.achieved_error < 0.05;
        ok &= p1.evaluate().unwrap() == y1 && p2.evaluate().unwrap() == y2;
        worst = worst.max(r.achieved_error);
    }
    let t = start.elapsed();
    outcome(ok && t < Duration::from_secs(10), format!("50 targets, L = 7, worst error {worst:.4}, {t:.2?}"))
}

fn gp_mutation_universality() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (mu, _, _, y) in gp_targets() {
        let (p, r) = build_gp_mutation_parent(&ApproxTarget::mutation(mu, 0.1, y.clone()).unwrap()).unwrap();
        ok &= r.exact && r.achieved_error < 0.1 && p.evaluate().unwrap() == y;
        worst = worst.max(r.achieved_error);
    }
    outcome(ok, format!("50 targets, worst error {worst:.4}"))
}

fn size_scaling() -> Outcome {
    let mut rng = SeededStream::new(77);
    let mu = random_distribution(8, 4, &mut rng);
    let (y1, y2, y) = (random_bits(8, &mut rng), random_bits(8, &mut rng), random_bits(8, &mut rng));
    let mut rows = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let (_, _, rc) = build_gp_crossover_parents(&ApproxTarget::crossover(mu.clone(), eps, y1.clone(), y2.clone()).unwrap()).unwrap();
        let (_, rm) = build_gp_mutation_parent(&ApproxTarget::mutation(mu.clone(), eps, y.clone()).unwrap()).unwrap();
        let l: usize = rc.parameter("L").unwrap().parse().unwrap();
        let sum_l: usize = rm
            .parameter("control_lengths")
            .unwrap()
            .split_whitespace()
            .map(|s| s.parse::<usize>().unwrap())
            .sum();
        rows.push((rc.genome_size, l, sum_l));
    }
    let ok = rows.windows(2).all(|w| {
        let (s0, l0, m0) = w[0];
        let (s1, l1, m1) = w[1];
        s1 - s0 == 4 * (l1 - l0) && m1 >= 2 * m0
    });
    let sizes: Vec<String> = rows.iter().map(|r| format!("{}/{}", r.0, r.2)).collect();
    outcome(ok, format!("crossover size / mutation ΣL per ε: {}", sizes.join(", ")))
}

/// Every crossover child of the two networks is saturated in the
/// threshold and switch layers and has output margins of at least 1.
fn calibrated(p1: &FeedForwardNet, p2: &FeedForwardNet) -> bool {
    let (s1, s2) = (p1.symbols(), p2.symbols());
    let diff: Vec<usize> = (0..s1.len()).filter(|&i| s1[i].to_bits() != s2[i].to_bits()).collect();
    (0..1u64 << diff.len()).all(|mask| {
        let mut s = s1.clone();
        for (k, &i) in diff.iter().enumerate() {
            if mask >> k & 1 == 1 {
                s[i] = s2[i];
            }
        }
        let child = p1.with_symbols(&s).unwrap();
        let outs = child.forward_layers(&[1.0]).unwrap();
        let depth = outs.len();
        let saturated = outs[2..depth - 1]
            .iter()
            .flatten()
            .all(|v| v.min(1.0 - v) <= 1e-6);
        saturated && child.final_pre_activations(&[1.0]).unwrap().iter().all(|p| p.abs() >= 1.0)
    })
}

fn nn_crossover_universality() -> Outcome {
    let mut rng = SeededStream::new(4303);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for _ in 0..20 {
        let m = 1 + rng.below(4);
        let mu = random_distribution(6, m, &mut rng);
        let (y1, y2) = (random_bits(6, &mut rng), random_bits(6, &mut rng));
        let (p1, p2, r) = build_nn_crossover_parents(&ApproxTarget::crossover(mu, 0.1, y1.clone(), y2.clone()).unwrap()).unwrap();
        ok &= r.exact && r.achieved_error < 0.1 && calibrated(&p1, &p2);
        ok &= nn_encode(&p1).unwrap() == y1 && nn_encode(&p2).unwrap() == y2;
        worst = worst.max(r.achieved_error);
    }
    outcome(ok, format!("20 targets, worst error {worst:.4}, all children calibrated"))
}

fn nn_mutation_universality() -> Outcome {
    let mut rng = SeededStream::new(4404);
    let targets: Vec<(DiscreteDistribution, BitVector)> = (0..10)
        .map(|_| {
            let m = 1 + rng.below(3);
            (random_distribution(4, m, &mut rng), random_bits(4, &mut rng))
        })
        .collect();
    let results: Vec<(bool, f64)> = targets
        .par_iter()
        .enumerate()
        .map(|(i, (mu, y))| {
            let (net, _) = build_nn_mutation_parent(&ApproxTarget::mutation(mu.clone(), 0.1, y.clone()).unwrap()).unwrap();
            let mut s = SeededStream::derive(4405, i as u64);
            let op = OperatorKind::GaussianSingleWeight { std: DEFAULT_SIGMA_MUT };
            let d = sampled_child_distribution(&[&net], op, 200_000, &mut s, nn_encode).unwrap();
            let tv = tv_distance(&d, mu).unwrap();
            (nn_encode(&net).unwrap() == *y && tv < 0.11, tv)
        })
        .collect();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    outcome(results.iter().all(|r| r.0), format!("10 targets, 2e5 samples each, worst TV {worst:.4}"))
}

fn lookup_universality() -> Outcome {
    let mut rng = SeededStream::new(4505);
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..20 {
        let m = 2 + rng.below(7);
        let mu = random_distribution(8, m, &mut rng);
        let t = ApproxTarget::crossover(mu, 0.5, random_bits(8, &mut rng), random_bits(8, &mut rng)).unwrap();
        for l in 4..=8 {
            let (_, _, r) = build_lookup_parents(&t, l).unwrap();
            let bound = 2f64.powi(1 - l as i32);
            ok &= r.exact && r.achieved_error <= bound;
            worst_ratio = worst_ratio.max(r.achieved_error / bound);
        }
    }
    outcome(ok, format!("20 targets x L = 4..8, worst error / 2^(1-L) = {worst_ratio:.3}"))
}

fn direct_nn_universality() -> Outcome {
    let mut rng = SeededStream::new(4606);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n_in in 1..=3usize {
        for _ in 0..5 {
            let n_out = 1 + rng.below(2);
            let k = 1 + rng.below(4);
            let mut tables = BTreeSet::new();
            while tables.len() < k {
                tables.insert((0..1usize << n_in).map(|_| random_bits(n_out, &mut rng)).collect::<Vec<_>>());
            }
            let weights: Vec<f64> = (0..k).map(|_| 0.05 + rng.unit()).collect();
            let total: f64 = weights.iter().sum();
            let fs: Vec<WeightedFunction> = tables
                .into_iter()
                .zip(&weights)
                .map(|(rows, w)| WeightedFunction {
                    table: TruthTable::new(n_in, rows).unwrap(),
                    probability: w / total,
                })
                .collect();
            let (p1, p2, r) = build_direct_nn_parents(&fs, 0.1, 6, None).unwrap();
            ok &= r.exact && r.achieved_error < 0.1;
            ok &= realized_truth_table(&p1).unwrap() == fs[0].table;
            ok &= realized_truth_table(&p2).unwrap() == fs[fs.len() - 1].table;
            worst = worst.max(r.achieved_error);
            cases += 1;
        }
    }
    outcome(ok, format!("{cases} function sets, n_in = 1..3, L = 6, worst error {worst:.4}"))
}

fn flip_config(problem: &str, encoding: &str) -> ExperimentConfig {
    parse_config(&format!(
        "name = {problem}-{encoding}\nproblem = {problem}\nn = 16\ntarget = random\nencoding = {encoding}\n\
         lambda = 2\nL = 100000\nmax_generations = 700000\ntrials = 20\nseed = 5\nburn_in = 600000\n"
    ))
    .unwrap()
}

/// Share of the final 10^5 of 7·10^5 generations spent at the optimum, per
/// trial.
fn flip_proportions(problem: &str, encoding: &str) -> Vec<f64> {
    let cfg = flip_config(problem, encoding);
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let trace = run_trial(&cfg, 0, t).unwrap();
            adaptation_after(&trace, 600_000, 100_000).proportion_at()
        })
        .collect()
}

fn flip_criterion(problem: &str, gp_min: f64, direct_max: f64) -> Outcome {
    let start = Instant::now();
    let gp = flip_proportions(problem, "gp-switch");
    let direct = flip_proportions(problem, "direct");
    let gp_ok = gp.iter().filter(|&&p| p >= gp_min).count();
    let direct_ok = direct.iter().filter(|&&p| p <= direct_max).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    outcome(
        gp_ok >= 18 && direct_ok >= 18,
        format!(
            "gp >= {gp_min} in {gp_ok}/20 (mean {:.3}), direct <= {direct_max} in {direct_ok}/20 (mean {:.3}), {:.1?}",
            mean(&gp),
            mean(&direct),
            start.elapsed()
        ),
    )
}

fn lbap() -> Outcome {
    let start = Instant::now();
    let cfg = parse_config(
        "name = lbap\nproblem = lbap\nn = 64\nencoding = gp-xor-block,direct\nlambda = 1\nmode = star\n\
         R = 100000\nmax_evaluations = 2000000\ntrials = 20\nseed = 6\n",
    )
    .unwrap();
    let counts: Vec<(usize, usize)> = (0..2)
        .map(|e| {
            let traces: Vec<_> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(&cfg, e, t).unwrap())
                .collect();
            let converged = traces.iter().filter(|t| t.status == TrialStatus::Converged).count();
            let best = traces.iter().map(|t| t.final_fitness).max().unwrap();
            (converged, best)
        })
        .collect();
    outcome(
        counts[0].0 == 20 && counts[1].0 == 0,
        format!(
            "gp-xor-block converged {}/20, direct converged {}/20 (best fitness {}), {:.1?}",
            counts[0].0,
            counts[1].0,
            counts[1].1,
            start.elapsed()
        ),
    )
}

fn random_net(rng: &mut SeededStream) -> FeedForwardNet {
    let input = 1 + rng.below(3);
    let depth = 1 + rng.below(3);
    let mut layers = Vec::new();
    let mut width = input;
    for d in 0..depth {
        let out = 1 + rng.below(5);
        let act = if d + 1 == depth { Activation::Identity } else { Activation::Sigmoid };
        let w = (0..out * width).map(|_| rng.normal(2.0)).collect();
        let b = (0..out).map(|_| rng.normal(2.0)).collect();
        layers.push(Layer::new(width, w, b, act).unwrap());
        width = out;
    }
    FeedForwardNet::new(input, layers).unwrap()
}

fn properties() -> Outcome {
    let mut rng = SeededStream::new(1212);
    let mut failures = Vec::new();

    // incremental versus full evaluation
    let mut incremental_ok = true;
    for seq in 0..10_000 {
        let kind = [EncodingKind::Direct, EncodingKind::GpSwitch, EncodingKind::GpXorBlock][seq % 3];
        let n = 1 + rng.below(40);
        let refs = vec![random_bits(n, &mut rng), random_bits(n, &mut rng)];
        let mut c = Champion::random(kind, n, 1 + rng.below(100), refs, &mut rng).unwrap();
        let mut out = BitVector::zeros(n);
        for _ in 0..20 {
            let pos = rng.below(c.len());
            c.candidate_phenotype(pos, &mut out);
            c.incremental_refresh(pos);
            incremental_ok &= out == *c.phenotype() && c == c.recomputed();
        }
        if let Some(p) = c.program().unwrap() {
            incremental_ok &= p.evaluate().unwrap() == *c.phenotype();
        }
    }
    if !incremental_ok {
        failures.push("incremental evaluation");
    }

    // flatten / unflatten
    let mut round_trip_ok = true;
    for i in 0..10_000 {
        let n = 1 + rng.below(20);
        let p = if i % 2 == 0 {
            make_switch_template(1 + rng.below(64), random_bits(n, &mut rng), random_bits(n, &mut rng), &mut rng).unwrap()
        } else {
            make_xor_block_template(random_bits(n, &mut rng), random_bits(n, &mut rng), rng.coin(), rng.coin()).unwrap()
        };
        let (g, _) = p.flatten();
        let fresh = random_bits(g.len(), &mut rng);
        let q = p.unflatten(&fresh).unwrap();
        round_trip_ok &= p.unflatten(&g).unwrap() == p && q.flatten().0 == fresh;
        round_trip_ok &= GpProgram::parse(&p.to_string()).unwrap() == p;
        let net = random_net(&mut rng);
        let s: Vec<f64> = net.symbols().iter().map(|_| rng.normal(1.0)).collect();
        let other = net.with_symbols(&s).unwrap();
        round_trip_ok &= other.symbols() == s && other.with_symbols(&net.symbols()).unwrap() == net;
        round_trip_ok &= FeedForwardNet::parse(&net.to_string()).unwrap() == net;
    }
    if !round_trip_ok {
        failures.push("flatten round trip");
    }

    // seed determinism through the harness, byte for byte
    let dir = tempfile::tempdir().unwrap();
    let text = "name = det\nproblem = rfc\nn = 8\nencoding = gp-switch,direct\nlambda = 2\nL = 50\n\
                max_generations = 3000\ntrials = 4\nseed = 9\n";
    let files: Vec<Vec<(String, Vec<u8>)>> = [1usize, 3]
        .iter()
        .map(|&workers| {
            let mut cfg = parse_config(text).unwrap();
            cfg.workers = workers;
            cfg.out = dir.path().join(format!("w{workers}"));
            run_experiment(&cfg).unwrap();
            let mut all = Vec::new();
            for e in ["gp-switch", "direct"] {
                for entry in std::fs::read_dir(cfg.out.join(e)).unwrap() {
                    let path = entry.unwrap().path();
                    all.push((format!("{e}/{}", path.file_name().unwrap().to_string_lossy()), std::fs::read(&path).unwrap()));
                }
            }
            all.sort();
            all
        })
        .collect();
    if files[0] != files[1] || files[0].is_empty() {
        failures.push("seed determinism");
    }

    // uniform crossover keeps agreements and splits disagreements evenly
    let (x1, x2) = (random_bits(200, &mut rng), random_bits(200, &mut rng));
    let mut from_first = vec![0u32; 200];
    let trials = 4000;
    let mut agree_ok = true;
    for _ in 0..trials {
        let child = uniform_crossover(&x1, &x2, &mut rng).unwrap();
        for (i, count) in from_first.iter_mut().enumerate() {
            if x1.get(i) == x2.get(i) {
                agree_ok &= child.get(i) == x1.get(i);
            } else if child.get(i) == x1.get(i) {
                *count += 1;
            }
        }
    }
    // 5σ band for a fair coin over `trials` draws
    let band = 5.0 * (trials as f64 * 0.25).sqrt();
    let marginal_ok = (0..200)
        .filter(|&i| x1.get(i) != x2.get(i))
        .all(|i| (from_first[i] as f64 - trials as f64 / 2.0).abs() < band);
    if !agree_ok {
        failures.push("crossover agreement");
    }
    if !marginal_ok {
        failures.push("crossover marginals");
    }

    if failures.is_empty() {
        outcome(true, "1e4 flip sequences, 1e4 round trips, byte-identical reruns, crossover marginals")
    } else {
        outcome(false, format!("failed: {}", failures.join(", ")))
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("miracle jumps", miracle),
        ("GP crossover universality", gp_crossover_universality),
        ("GP mutation universality", gp_mutation_universality),
        ("parent size scaling", size_scaling),
        ("NN crossover universality", nn_crossover_universality),
        ("NN mutation universality", nn_mutation_universality),
        ("lookup-table instantiation", lookup_universality),
        ("direct-encoded NN functions", direct_nn_universality),
        ("deterministic flipping challenge", || flip_criterion("dfc", 0.4, 0.2)),
        ("random flipping challenge", || flip_criterion("rfc", 0.35, 0.1)),
        ("large block assembly", lbap),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
