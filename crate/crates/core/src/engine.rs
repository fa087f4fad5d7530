//! The (1+λ) evolutionary algorithm and its starred variant.
//!
//! Bit-string encodings run on a [`Champion`] that keeps the phenotype,
//! control parities and match counts up to date flip by flip, so a
//! generation costs O(n/64) regardless of the control length `L`.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::gp::{make_xor_block_template, switch_template, GpProgram};
use crate::nn::{nn_encode, Activation, FeedForwardNet, Layer, ParamRef};
use crate::operators::{draw_gaussian_mutation, DEFAULT_SIGMA_MUT};
use crate::problems::{matches, Problem};
use crate::stream::SeededStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    Direct,
    GpSwitch,
    GpXorBlock,
    Nn,
}

impl EncodingKind {
    pub fn name(self) -> &'static str {
        match self {
            EncodingKind::Direct => "direct",
            EncodingKind::GpSwitch => "gp-switch",
            EncodingKind::GpXorBlock => "gp-xor-block",
            EncodingKind::Nn => "nn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "direct" => EncodingKind::Direct,
            "gp-switch" => EncodingKind::GpSwitch,
            "gp-xor-block" => EncodingKind::GpXorBlock,
            "nn" => EncodingKind::Nn,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcceptanceMode {
    /// Strictly better fitness only.
    Plain,
    /// Better fitness, a phenotype more than one bit away, or equal fitness
    /// with fewer ones; restarts after `R` generations without the optimum.
    Star,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EaConfig {
    pub lambda: usize,
    pub encoding: EncodingKind,
    pub n: usize,
    /// Control-vector length of the switch template.
    pub control_len: usize,
    pub mode: AcceptanceMode,
    /// Generations without the optimum before a restart (star mode).
    pub restart_after: u64,
    pub max_generations: u64,
    pub max_evaluations: u64,
    pub seed: u64,
    /// Compare all candidates against the generation's starting champion and
    /// keep the best, instead of comparing them one after another.
    pub simultaneous: bool,
    pub sigma_mut: f64,
    /// Hidden width of the network encoding.
    pub nn_hidden: usize,
    /// Keep one trace record every this many generations.
    pub record_every: u64,
}

impl EaConfig {
    pub fn new(encoding: EncodingKind, n: usize, lambda: usize) -> Self {
        EaConfig {
            lambda,
            encoding,
            n,
            control_len: 1,
            mode: AcceptanceMode::Plain,
            restart_after: u64::MAX,
            max_generations: u64::MAX,
            max_evaluations: u64::MAX,
            seed: 0,
            simultaneous: false,
            sigma_mut: DEFAULT_SIGMA_MUT,
            nn_hidden: 0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.lambda == 0 {
            return bad("lambda must be at least 1");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.encoding == EncodingKind::GpSwitch && self.control_len == 0 {
            return bad("L must be at least 1 for the switch template");
        }
        if self.mode == AcceptanceMode::Star && self.restart_after == 0 {
            return bad("R must be at least 1");
        }
        if self.record_every == 0 {
            return bad("record stride must be at least 1");
        }
        if !(self.sigma_mut >= 0.0 && self.sigma_mut.is_finite()) {
            return bad("sigma_mut must be non-negative");
        }
        Ok(())
    }
}

/// The champion at the start of one generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerationRecord {
    pub generation: u64,
    pub champion_fitness: usize,
    /// Active target (1 or 2) of a dynamic problem; 0 for static ones.
    pub target_id: u8,
    pub at_optimum: bool,
    /// Evaluations spent before this generation's candidates.
    pub evaluations: u64,
    pub restarts: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Converged,
    BudgetExhausted,
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrialStatus::Converged => "converged",
            TrialStatus::BudgetExhausted => "budget-exhausted",
        }
    }
}

/// How often each acceptance rule replaced the champion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Acceptances {
    pub fitness: u64,
    pub diversity: u64,
    pub sparsity: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub records: Vec<GenerationRecord>,
    pub status: TrialStatus,
    pub generations: u64,
    pub evaluations: u64,
    pub restarts: u64,
    /// Generations whose starting champion was at the optimum.
    pub at_optimum: u64,
    /// The at-optimum flag of every generation, recorded or not.
    pub optimum_flags: Vec<bool>,
    pub acceptances: Acceptances,
    /// Champion fitness when the run stopped.
    pub final_fitness: usize,
}

impl TrialTrace {
    pub fn converged(&self) -> bool {
        self.status == TrialStatus::Converged
    }
}

// ---------------------------------------------------------------------------
// Bit-string champions
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Template {
    Direct,
    Switch,
    XorBlock,
}

/// A bit-string genome with cached phenotype, control parity, ones count
/// and match counts against fixed reference vectors.
///
/// The flattened genome is the control segment followed by the data
/// segments: `(x)` for the direct encoding, `(a, b, c)` for the switch
/// template and `(a1, a2, b, c)` for the xor-block template.
#[derive(Clone, Debug, PartialEq)]
pub struct Champion {
    template: Template,
    control: BitVector,
    data: Vec<BitVector>,
    parity: bool,
    phenotype: BitVector,
    ones: usize,
    references: Vec<BitVector>,
    matches: Vec<usize>,
}

impl Champion {
    pub fn direct(x: BitVector, references: Vec<BitVector>) -> Self {
        Self::build(Template::Direct, BitVector::zeros(0), vec![x], references)
    }

    pub fn switch(a: BitVector, b: BitVector, c: BitVector, references: Vec<BitVector>) -> Self {
        Self::build(Template::Switch, a, vec![b, c], references)
    }

    pub fn xor_block(a1: bool, a2: bool, b: BitVector, c: BitVector, references: Vec<BitVector>) -> Self {
        Self::build(Template::XorBlock, BitVector::from_bits(&[a1, a2]), vec![b, c], references)
    }

    /// A champion with i.i.d. fair-coin evolvable bits.
    pub fn random(
        encoding: EncodingKind,
        n: usize,
        control_len: usize,
        references: Vec<BitVector>,
        rng: &mut SeededStream,
    ) -> Result<Self> {
        let mut v = |len: usize| BitVector::from_fn(len, |_| rng.coin());
        Ok(match encoding {
            EncodingKind::Direct => Self::direct(v(n), references),
            EncodingKind::GpSwitch => {
                let a = v(control_len);
                let (b, c) = (v(n), v(n));
                Self::switch(a, b, c, references)
            }
            EncodingKind::GpXorBlock => {
                let a = v(2);
                let (b, c) = (v(n), v(n));
                Self::xor_block(a.get(0), a.get(1), b, c, references)
            }
            EncodingKind::Nn => {
                return Err(Error::NotApplicable("networks are not bit strings".into()))
            }
        })
    }

    fn build(template: Template, control: BitVector, data: Vec<BitVector>, references: Vec<BitVector>) -> Self {
        let mut c = Champion {
            template,
            control,
            data,
            parity: false,
            phenotype: BitVector::zeros(0),
            ones: 0,
            references,
            matches: Vec::new(),
        };
        c.recompute();
        c
    }

    /// Rebuilds every cache from the genome.
    fn recompute(&mut self) {
        self.parity = self.control.count_ones() % 2 == 1;
        self.phenotype = self.full_phenotype();
        self.ones = self.phenotype.count_ones();
        self.matches = self
            .references
            .iter()
            .map(|r| matches(&self.phenotype, r))
            .collect();
    }

    fn full_phenotype(&self) -> BitVector {
        match self.template {
            Template::Direct => self.data[0].clone(),
            Template::Switch => {
                if self.control.count_ones() % 2 == 1 {
                    self.data[0].clone()
                } else {
                    self.data[1].clone()
                }
            }
            Template::XorBlock => {
                let mut y = BitVector::zeros(self.data[0].len());
                if self.control.get(0) {
                    y.xor_assign(&self.data[0]);
                }
                if self.control.get(1) {
                    y.xor_assign(&self.data[1]);
                }
                y
            }
        }
    }

    pub fn phenotype(&self) -> &BitVector {
        &self.phenotype
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    /// Cached match count against reference `k`.
    pub fn matches(&self, k: usize) -> usize {
        self.matches[k]
    }

    pub fn parity(&self) -> bool {
        self.parity
    }

    pub fn control(&self) -> &BitVector {
        &self.control
    }

    pub fn data(&self) -> &[BitVector] {
        &self.data
    }

    /// Number of evolvable bits `T`.
    pub fn len(&self) -> usize {
        self.control.len() + self.data.iter().map(BitVector::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The flattened genome.
    pub fn genome(&self) -> BitVector {
        let mut parts = vec![&self.control];
        parts.extend(self.data.iter());
        BitVector::concat(&parts)
    }

    /// The equivalent GP program (templates only).
    pub fn program(&self) -> Result<Option<GpProgram>> {
        Ok(match self.template {
            Template::Direct => None,
            Template::Switch => Some(switch_template(
                self.control.clone(),
                self.data[0].clone(),
                self.data[1].clone(),
            )?),
            Template::XorBlock => Some(make_xor_block_template(
                self.data[0].clone(),
                self.data[1].clone(),
                self.control.get(0),
                self.control.get(1),
            )?),
        })
    }

    /// Which segment position `pos` falls in, and the offset inside it.
    /// Segment `None` is the control segment.
    #[inline]
    fn locate(&self, pos: usize) -> (Option<usize>, usize) {
        let cl = self.control.len();
        if pos < cl {
            (None, pos)
        } else {
            let n = self.data[0].len();
            let d = pos - cl;
            (Some(d / n), d % n)
        }
    }

    /// Whether data segment `s` currently shows in the phenotype.
    #[inline]
    fn segment_active(&self, s: usize) -> bool {
        match self.template {
            Template::Direct => true,
            Template::Switch => self.parity == (s == 0),
            Template::XorBlock => self.control.get(s),
        }
    }

    /// Phenotype after flipping `pos`, written into `out`, without touching
    /// the champion.
    #[inline]
    pub fn candidate_phenotype(&self, pos: usize, out: &mut BitVector) {
        out.clone_from(&self.phenotype);
        match self.locate(pos) {
            (Some(s), j) => {
                if self.segment_active(s) {
                    out.flip(j);
                }
            }
            (None, i) => match self.template {
                Template::Switch => {
                    // toggling one control bit toggles the parity
                    let other = if self.parity { 1 } else { 0 };
                    out.clone_from(&self.data[other]);
                }
                Template::XorBlock => out.xor_assign(&self.data[i]),
                Template::Direct => unreachable!("direct genomes have no control bits"),
            },
        }
    }

    /// Flips `pos` and updates every cache in place.
    pub fn incremental_refresh(&mut self, pos: usize) {
        match self.locate(pos) {
            (Some(s), j) => {
                self.data[s].flip(j);
                if self.segment_active(s) {
                    self.phenotype.flip(j);
                    let bit = self.phenotype.get(j);
                    if bit {
                        self.ones += 1;
                    } else {
                        self.ones -= 1;
                    }
                    for (k, r) in self.references.iter().enumerate() {
                        if r.get(j) == bit {
                            self.matches[k] += 1;
                        } else {
                            self.matches[k] -= 1;
                        }
                    }
                }
            }
            (None, i) => {
                self.control.flip(i);
                self.parity = !self.parity;
                match self.template {
                    Template::Switch => {
                        let active = if self.parity { 0 } else { 1 };
                        self.phenotype.clone_from(&self.data[active]);
                    }
                    Template::XorBlock => self.phenotype.xor_assign(&self.data[i]),
                    Template::Direct => unreachable!("direct genomes have no control bits"),
                }
                self.ones = self.phenotype.count_ones();
                for (k, r) in self.references.iter().enumerate() {
                    self.matches[k] = matches(&self.phenotype, r);
                }
            }
        }
    }

    /// Copy with every cache rebuilt from the genome.
    pub fn recomputed(&self) -> Champion {
        let mut c = self.clone();
        c.recompute();
        c
    }

    fn randomize(&mut self, rng: &mut SeededStream) {
        for i in 0..self.control.len() {
            self.control.set(i, rng.coin());
        }
        for seg in &mut self.data {
            for j in 0..seg.len() {
                seg.set(j, rng.coin());
            }
        }
        self.recompute();
    }
}

/// Free-function form of [`Champion::incremental_refresh`].
pub fn incremental_refresh(mut champ: Champion, pos: usize) -> Champion {
    champ.incremental_refresh(pos);
    champ
}

// ---------------------------------------------------------------------------
// Representations driven by the loop
// ---------------------------------------------------------------------------

trait Representation {
    type Move: Copy;
    fn phenotype(&self) -> &BitVector;
    fn cached_matches(&self, k: usize) -> Option<usize>;
    fn propose(&mut self, rng: &mut SeededStream, out: &mut BitVector) -> Result<Self::Move>;
    fn accept(&mut self, mv: Self::Move, phenotype: &BitVector);
    fn randomize(&mut self, rng: &mut SeededStream) -> Result<()>;
}

impl Representation for Champion {
    type Move = usize;

    fn phenotype(&self) -> &BitVector {
        &self.phenotype
    }

    fn cached_matches(&self, k: usize) -> Option<usize> {
        self.matches.get(k).copied()
    }

    #[inline]
    fn propose(&mut self, rng: &mut SeededStream, out: &mut BitVector) -> Result<usize> {
        let pos = rng.below(self.len());
        self.candidate_phenotype(pos, out);
        Ok(pos)
    }

    #[inline]
    fn accept(&mut self, pos: usize, _phenotype: &BitVector) {
        self.incremental_refresh(pos);
    }

    fn randomize(&mut self, rng: &mut SeededStream) -> Result<()> {
        Champion::randomize(self, rng);
        Ok(())
    }
}

/// A network genome mutated by single-weight Gaussian noise.
struct NetChampion {
    net: FeedForwardNet,
    phenotype: BitVector,
    ones: usize,
    sigma: f64,
}

impl NetChampion {
    fn random(n: usize, hidden: usize, sigma: f64, rng: &mut SeededStream) -> Result<Self> {
        let hidden = if hidden == 0 { n } else { hidden };
        let first = Layer::zeros(1, hidden, Activation::Sigmoid);
        let out = Layer::zeros(hidden, n, Activation::Identity);
        let mut net = FeedForwardNet::new(1, vec![first, out])?;
        let mut c = NetChampion {
            phenotype: BitVector::zeros(n),
            net: net.clone(),
            ones: 0,
            sigma,
        };
        Self::fill(&mut net, rng);
        c.net = net;
        c.refresh()?;
        Ok(c)
    }

    fn fill(net: &mut FeedForwardNet, rng: &mut SeededStream) {
        let params: Vec<ParamRef> = net.layout().params().to_vec();
        for p in params {
            net.set_param(p, rng.normal(1.0));
        }
    }

    fn refresh(&mut self) -> Result<()> {
        self.phenotype = nn_encode(&self.net)?;
        self.ones = self.phenotype.count_ones();
        Ok(())
    }
}

impl Representation for NetChampion {
    type Move = (usize, f64);

    fn phenotype(&self) -> &BitVector {
        &self.phenotype
    }

    fn cached_matches(&self, _k: usize) -> Option<usize> {
        None
    }

    fn propose(&mut self, rng: &mut SeededStream, out: &mut BitVector) -> Result<(usize, f64)> {
        let (i, delta) = draw_gaussian_mutation(self.net.layout().len(), self.sigma, rng)?;
        let p = self.net.layout().params()[i];
        let old = self.net.param(p);
        self.net.set_param(p, old + delta);
        let y = nn_encode(&self.net);
        self.net.set_param(p, old);
        *out = y?;
        Ok((i, old + delta))
    }

    fn accept(&mut self, (i, value): (usize, f64), phenotype: &BitVector) {
        let p = self.net.layout().params()[i];
        self.net.set_param(p, value);
        self.phenotype.clone_from(phenotype);
        self.ones = phenotype.count_ones();
    }

    fn randomize(&mut self, rng: &mut SeededStream) -> Result<()> {
        Self::fill(&mut self.net, rng);
        self.refresh()
    }
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Reject,
    Fitness,
    Diversity,
    Sparsity,
}

/// Which candidate, if any, replaces the champion at the end of a generation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub winner: Option<usize>,
    /// Every replacement that happened along the way, in order.
    pub events: Vec<Verdict>,
}

fn judge(y: &BitVector, f: usize, champ: &BitVector, champ_f: usize, star: bool) -> Verdict {
    if f > champ_f {
        Verdict::Fitness
    } else if !star {
        Verdict::Reject
    } else if y.hamming_unchecked(champ) > 1 {
        Verdict::Diversity
    } else if f == champ_f && y.count_ones() < champ.count_ones() {
        Verdict::Sparsity
    } else {
        Verdict::Reject
    }
}

/// One generation's replacement step. All candidates are mutants of the
/// starting champion `(champion, fitness)`.
///
/// Sequentially, candidate `i` faces whichever genotype is champion after
/// candidates `0..i`, and the last replacement stands. With `simultaneous`
/// every candidate faces the starting champion and the fittest accepted one
/// (earliest on ties) wins; in plain mode the two agree.
pub fn select_candidate(
    champion: &BitVector,
    fitness: usize,
    candidates: &[(&BitVector, usize)],
    star: bool,
    simultaneous: bool,
) -> Selection {
    let mut winner: Option<usize> = None;
    let mut events = Vec::new();
    for (i, &(y, f)) in candidates.iter().enumerate() {
        if simultaneous {
            let v = judge(y, f, champion, fitness, star);
            if v != Verdict::Reject && winner.is_none_or(|w| f > candidates[w].1) {
                winner = Some(i);
                events = vec![v];
            }
        } else {
            let (cy, cf) = winner.map_or((champion, fitness), |w| candidates[w]);
            let v = judge(y, f, cy, cf, star);
            if v != Verdict::Reject {
                winner = Some(i);
                events.push(v);
            }
        }
    }
    Selection { winner, events }
}

/// Runs the configured algorithm; plain or starred according to `cfg.mode`.
pub fn run_ea(cfg: &EaConfig, problem: &mut Problem, rng: &mut SeededStream) -> Result<TrialTrace> {
    cfg.validate()?;
    if cfg.mode == AcceptanceMode::Star && problem.is_dynamic() {
        return Err(Error::StarNeedsStatic);
    }
    if problem.dim() != cfg.n {
        return Err(Error::Dimension(format!(
            "encoding produces {} bits, problem expects {}",
            cfg.n,
            problem.dim()
        )));
    }
    match cfg.encoding {
        EncodingKind::Nn => {
            let champ = NetChampion::random(cfg.n, cfg.nn_hidden, cfg.sigma_mut, rng)?;
            run_loop(cfg, problem, rng, champ)
        }
        kind => {
            let champ = Champion::random(kind, cfg.n, cfg.control_len, problem.references(), rng)?;
            run_loop(cfg, problem, rng, champ)
        }
    }
}

/// The starred algorithm: `cfg.mode` must be [`AcceptanceMode::Star`] and
/// the problem static.
pub fn run_ea_star(cfg: &EaConfig, problem: &mut Problem, rng: &mut SeededStream) -> Result<TrialTrace> {
    if problem.is_dynamic() {
        return Err(Error::StarNeedsStatic);
    }
    let mut cfg = cfg.clone();
    cfg.mode = AcceptanceMode::Star;
    run_ea(&cfg, problem, rng)
}

fn champion_fitness<R: Representation>(r: &R, problem: &Problem, id: u8) -> usize {
    match problem.reference_for(id).and_then(|k| r.cached_matches(k)) {
        Some(m) => m,
        None => problem.fitness(r.phenotype(), id),
    }
}

fn run_loop<R: Representation>(
    cfg: &EaConfig,
    problem: &mut Problem,
    rng: &mut SeededStream,
    mut champ: R,
) -> Result<TrialTrace> {
    let optimum = problem.optimum();
    let dynamic = problem.is_dynamic();
    let star = cfg.mode == AcceptanceMode::Star;
    let per_generation = cfg.lambda as u64 + u64::from(dynamic);
    let mut trace = TrialTrace {
        records: Vec::new(),
        status: TrialStatus::BudgetExhausted,
        generations: 0,
        evaluations: 0,
        restarts: 0,
        at_optimum: 0,
        optimum_flags: Vec::new(),
        acceptances: Acceptances::default(),
        final_fitness: 0,
    };
    if cfg.max_generations == 0 || cfg.max_evaluations == 0 {
        return Ok(trace);
    }
    let mut fitness = 0;
    if !dynamic {
        fitness = champion_fitness(&champ, problem, 0);
        trace.evaluations = 1;
    }
    let mut candidates: Vec<(Option<R::Move>, BitVector, usize)> =
        (0..cfg.lambda).map(|_| (None, BitVector::zeros(cfg.n), 0)).collect();
    let mut since_restart = 0u64;
    let mut generation = 0u64;
    loop {
        if !dynamic && fitness == optimum {
            trace.status = TrialStatus::Converged;
            trace.records.push(GenerationRecord {
                generation,
                champion_fitness: fitness,
                target_id: 0,
                at_optimum: true,
                evaluations: trace.evaluations,
                restarts: trace.restarts,
            });
            break;
        }
        if star && since_restart >= cfg.restart_after {
            if trace.evaluations + 1 + cfg.lambda as u64 > cfg.max_evaluations {
                break;
            }
            champ.randomize(rng)?;
            fitness = champion_fitness(&champ, problem, 0);
            trace.evaluations += 1;
            trace.restarts += 1;
            since_restart = 0;
            continue;
        }
        if generation >= cfg.max_generations || trace.evaluations + per_generation > cfg.max_evaluations {
            break;
        }
        let id = problem.begin_generation();
        if dynamic {
            fitness = champion_fitness(&champ, problem, id);
            trace.evaluations += 1;
        }
        let start_fitness = fitness;
        let at = start_fitness == optimum;
        if at {
            trace.at_optimum += 1;
        }
        trace.optimum_flags.push(at);
        if generation.is_multiple_of(cfg.record_every) {
            trace.records.push(GenerationRecord {
                generation,
                champion_fitness: start_fitness,
                target_id: id,
                at_optimum: at,
                evaluations: trace.evaluations - u64::from(dynamic),
                restarts: trace.restarts,
            });
        }
        for slot in candidates.iter_mut() {
            slot.0 = Some(champ.propose(rng, &mut slot.1)?);
            slot.2 = problem.fitness(&slot.1, id);
        }
        trace.evaluations += cfg.lambda as u64;
        let scored: Vec<(&BitVector, usize)> = candidates.iter().map(|c| (&c.1, c.2)).collect();
        let chosen = select_candidate(champ.phenotype(), fitness, &scored, star, cfg.simultaneous);
        for &v in &chosen.events {
            match v {
                Verdict::Fitness => trace.acceptances.fitness += 1,
                Verdict::Diversity => trace.acceptances.diversity += 1,
                Verdict::Sparsity => trace.acceptances.sparsity += 1,
                Verdict::Reject => {}
            }
        }
        if let Some(i) = chosen.winner {
            let (mv, y, f) = &candidates[i];
            champ.accept(mv.expect("proposed above"), y);
            fitness = *f;
        }
        problem.end_generation(start_fitness);
        generation += 1;
        since_restart += 1;
        if fitness == optimum {
            since_restart = 0;
        }
    }
    trace.generations = generation;
    trace.final_fitness = fitness;
    Ok(trace)
}
