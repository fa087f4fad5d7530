//! Experiment configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. The format is
//! described key by key in `docs/config-format.md`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::bits::BitVector;
use crate::engine::{AcceptanceMode, EaConfig, EncodingKind};
use crate::operators::DEFAULT_SIGMA_MUT;
use crate::problems::Placement;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Dfc,
    Rfc,
    Lbap,
    /// Static match against one target (OneMax for the all-ones target).
    Match,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Dfc => "dfc",
            ProblemKind::Rfc => "rfc",
            ProblemKind::Lbap => "lbap",
            ProblemKind::Match => "match",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dfc" => ProblemKind::Dfc,
            "rfc" => ProblemKind::Rfc,
            "lbap" => ProblemKind::Lbap,
            "match" => ProblemKind::Match,
            _ => return None,
        })
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, ProblemKind::Dfc | ProblemKind::Rfc)
    }
}

/// First target of a flipping pair, or the target of a static match.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetSpec {
    Ones,
    /// Fresh fair-coin target per trial.
    Random,
    Fixed(BitVector),
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Ones => f.write_str("ones"),
            TargetSpec::Random => f.write_str("random"),
            TargetSpec::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub target: TargetSpec,
    pub placement: Placement,
    pub problem_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    /// Each listed encoding runs `trials` trials on the same problem
    /// instances.
    pub encodings: Vec<EncodingKind>,
    /// Algorithm settings; `encoding`, `n` and `seed` are filled per run.
    pub algorithm: EaConfig,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub burn_in: u64,
    pub window: usize,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

/// One problem found while reading a config.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line, or `None` for a key that is missing altogether.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigIssue { line: Some(l), message } => write!(f, "line {l}: {message}"),
            ConfigIssue { line: None, message } => write!(f, "{message}"),
        }
    }
}

/// Every issue in a config, in line order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KEYS: &[&str] = &[
    "name",
    "problem",
    "n",
    "target",
    "placement",
    "block",
    "problem_seed",
    "encoding",
    "lambda",
    "L",
    "mode",
    "R",
    "max_generations",
    "max_evaluations",
    "simultaneous",
    "sigma_mut",
    "nn_hidden",
    "record_every",
    "trials",
    "seed",
    "out",
    "burn_in",
    "window",
    "workers",
];

struct Reader {
    values: BTreeMap<String, (usize, String)>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, line: Option<usize>, message: String) {
        self.issues.push(ConfigIssue { line, message });
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&mut self, key: &str) -> Option<(usize, String)> {
        match self.values.get(key) {
            Some((l, v)) => Some((*l, v.clone())),
            None => {
                self.issue(None, format!("missing required key `{key}`"));
                None
            }
        }
    }

    fn parse_with<T>(&mut self, key: &str, line: usize, v: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Option<T> {
        match f(v) {
            Some(x) => Some(x),
            None => {
                self.issue(Some(line), format!("`{key}`: expected {what}, found `{v}`"));
                None
            }
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Option<T> {
        match self.raw(key).map(|(l, v)| (l, v.to_string())) {
            Some((l, v)) => self.parse_with(key, l, &v, |s| s.replace('_', "").parse().ok(), "a number"),
            None if default.is_some() => default,
            None => {
                self.issue(None, format!("missing required key `{key}`"));
                None
            }
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|(l, _)| *l)
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Parses and validates a config, reporting every issue found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut r = Reader {
        values: BTreeMap::new(),
        issues: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            r.issue(Some(line), format!("expected `key = value`, found `{content}`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            r.issue(Some(line), format!("unknown key `{k}`"));
            continue;
        }
        if let Some((first, _)) = r.values.get(k) {
            let first = *first;
            r.issue(Some(line), format!("duplicate key `{k}` (first set on line {first})"));
            continue;
        }
        r.values.insert(k.to_string(), (line, v.to_string()));
    }

    let name = r.required("name").map(|(_, v)| v);
    let kind = r
        .required("problem")
        .and_then(|(l, v)| r.parse_with("problem", l, &v, ProblemKind::parse, "dfc, rfc, lbap or match"));
    let n: Option<usize> = r.number("n", None);
    let target = match r.raw("target").map(|(l, v)| (l, v.to_string())) {
        None => Some(TargetSpec::Ones),
        Some((l, v)) => r.parse_with(
            "target",
            l,
            &v,
            |s| match s {
                "ones" => Some(TargetSpec::Ones),
                "random" => Some(TargetSpec::Random),
                bits => bits.parse().ok().map(TargetSpec::Fixed),
            },
            "ones, random or a bit string",
        ),
    };
    let block: Option<usize> = r.number("block", Some(0));
    let placement = match r.raw("placement").map(|(l, v)| (l, v.to_string())) {
        None => Some(Placement::Halves),
        Some((_, v)) if v == "halves" => Some(Placement::Halves),
        Some((l, v)) if v == "random" => match block {
            Some(b) if b > 0 => Some(Placement::Random { block: b }),
            Some(_) => {
                r.issue(Some(l), "`placement = random` needs `block`".into());
                None
            }
            None => None,
        },
        Some((l, v)) => {
            r.issue(Some(l), format!("`placement`: expected halves or random, found `{v}`"));
            None
        }
    };
    let seed: Option<u64> = r.number("seed", Some(0));
    let problem_seed: Option<u64> = r.number("problem_seed", seed);
    let encodings = r.required("encoding").and_then(|(l, v)| {
        let parsed: Vec<Option<EncodingKind>> = v.split(',').map(|s| EncodingKind::parse(s.trim())).collect();
        if parsed.iter().any(Option::is_none) || parsed.is_empty() {
            r.issue(
                Some(l),
                format!("`encoding`: expected a comma-separated list of direct, gp-switch, gp-xor-block, nn; found `{v}`"),
            );
            None
        } else {
            Some(parsed.into_iter().flatten().collect::<Vec<_>>())
        }
    });
    let lambda: Option<usize> = r.number("lambda", None);
    let control_len: Option<usize> = r.number("L", Some(1));
    let mode = match r.raw("mode").map(|(l, v)| (l, v.to_string())) {
        None => Some(AcceptanceMode::Plain),
        Some((l, v)) => r.parse_with(
            "mode",
            l,
            &v,
            |s| match s {
                "plain" => Some(AcceptanceMode::Plain),
                "star" => Some(AcceptanceMode::Star),
                _ => None,
            },
            "plain or star",
        ),
    };
    let star = mode == Some(AcceptanceMode::Star);
    let restart_after: Option<u64> = if star {
        r.number("R", None)
    } else {
        r.number("R", Some(u64::MAX))
    };
    let max_generations: Option<u64> = r.number("max_generations", Some(u64::MAX));
    let max_evaluations: Option<u64> = r.number("max_evaluations", Some(u64::MAX));
    if r.raw("max_generations").is_none() && r.raw("max_evaluations").is_none() {
        r.issue(None, "one of `max_generations` or `max_evaluations` is required".into());
    }
    let simultaneous = match r.raw("simultaneous").map(|(l, v)| (l, v.to_string())) {
        None => Some(false),
        Some((l, v)) => r.parse_with("simultaneous", l, &v, parse_bool, "true or false"),
    };
    let sigma_mut: Option<f64> = r.number("sigma_mut", Some(DEFAULT_SIGMA_MUT));
    let nn_hidden: Option<usize> = r.number("nn_hidden", Some(0));
    let record_every: Option<u64> = r.number("record_every", Some(1));
    let trials: Option<usize> = r.number("trials", Some(1));
    let burn_in: Option<u64> = r.number("burn_in", Some(0));
    let window: Option<usize> = r.number("window", Some(1000));
    let workers: Option<usize> = r.number("workers", Some(0));
    let out = r
        .raw("out")
        .map(|(_, v)| PathBuf::from(v))
        .or_else(|| name.as_ref().map(|n| PathBuf::from("results").join(n)));

    // constraint checks on whatever parsed
    let mut check = |cond: bool, key: &str, message: &str| {
        if !cond {
            let line = r.line_of(key);
            r.issue(line, format!("`{key}`: {message}"));
        }
    };
    if let Some(l) = lambda {
        check(l >= 1, "lambda", "must be at least 1");
    }
    if let Some(t) = trials {
        check(t >= 1, "trials", "must be at least 1");
    }
    if let Some(w) = window {
        check(w >= 1, "window", "must be at least 1");
    }
    if let Some(k) = record_every {
        check(k >= 1, "record_every", "must be at least 1");
    }
    if let Some(s) = sigma_mut {
        check(s >= 0.0 && s.is_finite(), "sigma_mut", "must be a non-negative number");
    }
    if let Some(n) = n {
        check(n >= 1, "n", "must be at least 1");
    }
    if let (Some(encs), Some(l)) = (&encodings, control_len) {
        if encs.contains(&EncodingKind::GpSwitch) {
            check(l >= 1, "L", "must be at least 1 for gp-switch");
        }
    }
    if star {
        if let Some(rr) = restart_after {
            check(rr >= 1, "R", "must be at least 1");
        }
        if let Some(k) = kind {
            check(!k.is_dynamic(), "mode", "EA* defined for static fitness");
        }
    }
    if let (Some(TargetSpec::Fixed(t)), Some(n)) = (&target, n) {
        check(t.len() == n, "target", &format!("has {} bits, n = {n}", t.len()));
    }
    if let (Some(ProblemKind::Lbap), Some(n)) = (kind, n) {
        check(n >= 8 && n % 2 == 0, "n", "must be even and at least 8 for lbap");
        if let Some(Placement::Random { block }) = placement {
            check(block >= 2 && 2 * block <= n, "block", "two blocks must fit in n");
        }
    }

    let mut issues = r.issues;
    if !issues.is_empty() {
        issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        return Err(ConfigErrors(issues));
    }
    let (n, encodings) = (n.unwrap(), encodings.unwrap());
    let mut algorithm = EaConfig::new(encodings[0], n, lambda.unwrap());
    algorithm.control_len = control_len.unwrap();
    algorithm.mode = mode.unwrap();
    algorithm.restart_after = restart_after.unwrap();
    algorithm.max_generations = max_generations.unwrap();
    algorithm.max_evaluations = max_evaluations.unwrap();
    algorithm.seed = seed.unwrap();
    algorithm.simultaneous = simultaneous.unwrap();
    algorithm.sigma_mut = sigma_mut.unwrap();
    algorithm.nn_hidden = nn_hidden.unwrap();
    algorithm.record_every = record_every.unwrap();
    Ok(ExperimentConfig {
        name: name.unwrap(),
        problem: ProblemSpec {
            kind: kind.unwrap(),
            n,
            target: target.unwrap(),
            placement: placement.unwrap(),
            problem_seed: problem_seed.unwrap(),
        },
        encodings,
        algorithm,
        trials: trials.unwrap(),
        seed: seed.unwrap(),
        out: out.unwrap(),
        burn_in: burn_in.unwrap(),
        window: window.unwrap(),
        workers: workers.unwrap(),
    })
}

impl ExperimentConfig {
    /// Canonical text form; `parse_config(&c.to_text())` gives back `c`.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let a = &self.algorithm;
        kv("name", &self.name);
        kv("problem", &self.problem.kind.name());
        kv("n", &self.problem.n);
        kv("target", &self.problem.target);
        match self.problem.placement {
            Placement::Halves => kv("placement", &"halves"),
            Placement::Random { block } => {
                kv("placement", &"random");
                kv("block", &block);
            }
        }
        kv("problem_seed", &self.problem.problem_seed);
        let encs: Vec<&str> = self.encodings.iter().map(|e| e.name()).collect();
        kv("encoding", &encs.join(","));
        kv("lambda", &a.lambda);
        kv("L", &a.control_len);
        kv(
            "mode",
            &match a.mode {
                AcceptanceMode::Plain => "plain",
                AcceptanceMode::Star => "star",
            },
        );
        kv("R", &a.restart_after);
        kv("max_generations", &a.max_generations);
        kv("max_evaluations", &a.max_evaluations);
        kv("simultaneous", &a.simultaneous);
        kv("sigma_mut", &a.sigma_mut);
        kv("nn_hidden", &a.nn_hidden);
        kv("record_every", &a.record_every);
        kv("trials", &self.trials);
        kv("seed", &self.seed);
        kv("out", &self.out.display());
        kv("burn_in", &self.burn_in);
        kv("window", &self.window);
        kv("workers", &self.workers);
        s
    }
}
