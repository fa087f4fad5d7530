//! Fitness environments: the deterministic and random flipping challenges,
//! the large block assembly problem and a static target match.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::stream::SeededStream;

/// Two complementary targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetPair {
    first: BitVector,
    second: BitVector,
}

impl TargetPair {
    pub fn new(first: BitVector) -> Self {
        let second = first.complement();
        TargetPair { first, second }
    }

    /// Target `id` ∈ {1, 2}.
    pub fn target(&self, id: u8) -> &BitVector {
        if id == 1 {
            &self.first
        } else {
            &self.second
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }
}

/// Matched bits between `y` and `target`.
#[inline]
pub fn matches(y: &BitVector, target: &BitVector) -> usize {
    y.len() - y.hamming_unchecked(target)
}

fn check_lengths<'a>(n: usize, ys: impl IntoIterator<Item = &'a BitVector>) -> Result<()> {
    for y in ys {
        if y.len() != n {
            return Err(Error::LengthMismatch(y.len(), n));
        }
    }
    Ok(())
}

/// Deterministic flipping challenge: the target switches to the other one
/// in the generation after the champion scored `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DfcState {
    pub pair: TargetPair,
    pub active: u8,
}

impl DfcState {
    pub fn new(pair: TargetPair) -> Self {
        DfcState { pair, active: 1 }
    }

    pub fn active_target(&self) -> &BitVector {
        self.pair.target(self.active)
    }

    /// State for the next generation given this generation's champion fitness.
    pub fn next(&self, champion_fitness: usize) -> DfcState {
        let mut s = self.clone();
        if champion_fitness == self.pair.dim() {
            s.active = 3 - s.active;
        }
        s
    }
}

/// Scores champion and candidates under the same active target; returns the
/// fitnesses (champion first) and the next generation's state.
pub fn dfc_evaluate_generation(
    state: &DfcState,
    champion: &BitVector,
    candidates: &[BitVector],
) -> Result<(Vec<usize>, DfcState)> {
    let n = state.pair.dim();
    check_lengths(n, std::iter::once(champion).chain(candidates))?;
    let t = state.active_target();
    let fit: Vec<usize> = std::iter::once(champion)
        .chain(candidates)
        .map(|y| matches(y, t))
        .collect();
    let next = state.next(fit[0]);
    Ok((fit, next))
}

/// Random flipping challenge: each generation's target is a fair coin flip
/// between the two, drawn once and shared by every evaluation of it.
#[derive(Clone, Debug)]
pub struct RfcState {
    pub pair: TargetPair,
    coins: SeededStream,
}

impl RfcState {
    pub fn new(pair: TargetPair, coins: SeededStream) -> Self {
        RfcState { pair, coins }
    }

    /// Draws the next generation's target id.
    pub fn draw(&mut self) -> u8 {
        if self.coins.coin() {
            1
        } else {
            2
        }
    }
}

/// Draws this generation's target and scores champion and candidates
/// against it. Returns the target id and the fitnesses, champion first.
pub fn rfc_evaluate_generation(
    state: &mut RfcState,
    champion: &BitVector,
    candidates: &[BitVector],
) -> Result<(u8, Vec<usize>)> {
    check_lengths(state.pair.dim(), std::iter::once(champion).chain(candidates))?;
    let id = state.draw();
    let t = state.pair.target(id);
    let fit = std::iter::once(champion)
        .chain(candidates)
        .map(|y| matches(y, t))
        .collect();
    Ok((id, fit))
}

/// Large block assembly: two hidden blocks at disjoint index sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LbapInstance {
    n: usize,
    blocks: [Vec<usize>; 2],
    targets: [BitVector; 2],
    masks: [BitVector; 2],
    placed: [BitVector; 2],
}

/// Where the blocks of a generated instance sit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    /// First block on the first half, second block on the second half.
    Halves,
    /// Disjoint random index sets of `block` bits each; `2·block ≤ n`, so
    /// some positions may belong to neither block.
    Random { block: usize },
}

impl LbapInstance {
    pub fn new(n: usize, blocks: [Vec<usize>; 2], targets: [BitVector; 2]) -> Result<Self> {
        for k in 0..2 {
            if blocks[k].len() != targets[k].len() || blocks[k].is_empty() {
                return Err(Error::Dimension(format!(
                    "block {} has {} indices for a {}-bit target",
                    k + 1,
                    blocks[k].len(),
                    targets[k].len()
                )));
            }
            if targets[k].count_ones() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "target {} needs at least two ones",
                    k + 1
                )));
            }
        }
        let mut seen = vec![false; n];
        for &i in blocks.iter().flatten() {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of range or shared between blocks"
                )));
            }
            seen[i] = true;
        }
        let mask = |k: usize| {
            let mut m = BitVector::zeros(n);
            for &i in &blocks[k] {
                m.set(i, true);
            }
            m
        };
        let place = |k: usize| {
            let mut p = BitVector::zeros(n);
            for (j, &i) in blocks[k].iter().enumerate() {
                p.set(i, targets[k].get(j));
            }
            p
        };
        let masks = [mask(0), mask(1)];
        let placed = [place(0), place(1)];
        Ok(LbapInstance {
            n,
            blocks,
            targets,
            masks,
            placed,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>; 2] {
        &self.blocks
    }

    pub fn targets(&self) -> &[BitVector; 2] {
        &self.targets
    }

    /// Matched bits of `y` inside block `k`.
    #[inline]
    pub fn block_matches(&self, y: &BitVector, k: usize) -> usize {
        let wrong: u32 = y
            .words()
            .iter()
            .zip(self.placed[k].words())
            .zip(self.masks[k].words())
            .map(|((a, t), m)| ((a ^ t) & m).count_ones())
            .sum();
        self.blocks[k].len() - wrong as usize
    }

    #[inline]
    pub fn fitness(&self, y: &BitVector) -> usize {
        let (m1, m2) = (self.block_matches(y, 0), self.block_matches(y, 1));
        if m1 == self.blocks[0].len() && m2 == self.blocks[1].len() {
            self.n
        } else {
            m1.max(m2)
        }
    }
}

pub fn lbap_fitness(inst: &LbapInstance, y: &BitVector) -> Result<usize> {
    check_lengths(inst.n, [y])?;
    Ok(inst.fitness(y))
}

fn random_block(len: usize, rng: &mut SeededStream) -> BitVector {
    loop {
        let t = BitVector::from_fn(len, |_| rng.coin());
        if t.count_ones() >= 2 {
            return t;
        }
    }
}

/// A random instance: targets uniform over vectors with at least two ones.
pub fn make_lbap_instance(n: usize, placement: Placement, rng: &mut SeededStream) -> Result<LbapInstance> {
    if n < 8 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("n = {n} must be even and at least 8")));
    }
    let blocks = match placement {
        Placement::Halves => [(0..n / 2).collect(), (n / 2..n).collect()],
        Placement::Random { block } => {
            if block < 2 || 2 * block > n {
                return Err(Error::InvalidArgument(format!(
                    "two blocks of {block} bits do not fit in {n}"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            // partial Fisher-Yates over the first 2·block slots
            for i in 0..2 * block {
                let j = i + rng.below(n - i);
                idx.swap(i, j);
            }
            let mut b1 = idx[..block].to_vec();
            let mut b2 = idx[block..2 * block].to_vec();
            b1.sort_unstable();
            b2.sort_unstable();
            [b1, b2]
        }
    };
    let t1 = random_block(blocks[0].len(), rng);
    let t2 = random_block(blocks[1].len(), rng);
    LbapInstance::new(n, blocks, [t1, t2])
}

/// A fitness environment as seen by the evolutionary algorithm.
#[derive(Clone, Debug)]
pub enum Problem {
    Dfc(DfcState),
    Rfc(RfcState),
    Lbap(LbapInstance),
    /// Static fitness `n − hamming(y, target)`.
    Match(BitVector),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Dfc(s) => s.pair.dim(),
            Problem::Rfc(s) => s.pair.dim(),
            Problem::Lbap(i) => i.dim(),
            Problem::Match(t) => t.len(),
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, Problem::Dfc(_) | Problem::Rfc(_))
    }

    /// Best attainable fitness; the same `n` for every problem here.
    pub fn optimum(&self) -> usize {
        self.dim()
    }

    /// Vectors whose match counts a champion may cache.
    pub fn references(&self) -> Vec<BitVector> {
        match self {
            Problem::Dfc(s) => vec![s.pair.first.clone(), s.pair.second.clone()],
            Problem::Rfc(s) => vec![s.pair.first.clone(), s.pair.second.clone()],
            Problem::Match(t) => vec![t.clone()],
            Problem::Lbap(_) => Vec::new(),
        }
    }

    /// Starts a generation and returns its target id (0 for static problems).
    pub fn begin_generation(&mut self) -> u8 {
        match self {
            Problem::Dfc(s) => s.active,
            Problem::Rfc(s) => s.draw(),
            _ => 0,
        }
    }

    /// Fitness of `y` under target `id`.
    #[inline]
    pub fn fitness(&self, y: &BitVector, id: u8) -> usize {
        match self {
            Problem::Dfc(s) => matches(y, s.pair.target(id)),
            Problem::Rfc(s) => matches(y, s.pair.target(id)),
            Problem::Lbap(i) => i.fitness(y),
            Problem::Match(t) => matches(y, t),
        }
    }

    /// Index into [`Problem::references`] whose match count equals the
    /// fitness under target `id`, when one exists.
    pub fn reference_for(&self, id: u8) -> Option<usize> {
        match self {
            Problem::Dfc(_) | Problem::Rfc(_) => Some(id as usize - 1),
            Problem::Match(_) => Some(0),
            Problem::Lbap(_) => None,
        }
    }

    /// Ends a generation in which the champion, evaluated before any
    /// candidate, scored `champion_fitness`.
    pub fn end_generation(&mut self, champion_fitness: usize) {
        if let Problem::Dfc(s) = self {
            *s = s.next(champion_fitness);
        }
    }
}
