//! Adaptation and distribution-distance measurements.

use crate::distribution::DiscreteDistribution;
use crate::engine::TrialTrace;
use crate::error::{Error, Result};

/// Time spent away from and at the optimum over a finite horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationSummary {
    pub away: u64,
    pub at: u64,
    /// `away / at`; `f64::INFINITY` when the optimum was never held.
    pub ratio: f64,
    /// Proportion of generations at the optimum in consecutive windows.
    pub windows: Vec<f64>,
}

impl AdaptationSummary {
    pub fn total(&self) -> u64 {
        self.away + self.at
    }

    /// Share of generations spent at the optimum.
    pub fn proportion_at(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.at as f64 / self.total() as f64
        }
    }
}

/// Summary over an explicit sequence of at-optimum flags.
pub fn adaptation_from_flags(flags: impl IntoIterator<Item = bool>, window: usize) -> AdaptationSummary {
    let (mut away, mut at) = (0u64, 0u64);
    let mut windows = Vec::new();
    let (mut in_window, mut hits) = (0usize, 0usize);
    for f in flags {
        if f {
            at += 1;
            hits += 1;
        } else {
            away += 1;
        }
        in_window += 1;
        if window > 0 && in_window == window {
            windows.push(hits as f64 / window as f64);
            in_window = 0;
            hits = 0;
        }
    }
    if window > 0 && in_window > 0 {
        windows.push(hits as f64 / in_window as f64);
    }
    let ratio = if at == 0 {
        f64::INFINITY
    } else {
        away as f64 / at as f64
    };
    AdaptationSummary {
        away,
        at,
        ratio,
        windows,
    }
}

/// Summary of a whole trace, with windows of `window` generations.
pub fn adaptation_ratio(trace: &TrialTrace, window: usize) -> AdaptationSummary {
    adaptation_from_flags(trace.optimum_flags.iter().copied(), window)
}

/// Summary of every generation numbered `burn_in` and later, whether or not
/// it was kept in `records`.
pub fn adaptation_after(trace: &TrialTrace, burn_in: u64, window: usize) -> AdaptationSummary {
    let skip = usize::try_from(burn_in).unwrap_or(usize::MAX);
    adaptation_from_flags(trace.optimum_flags.iter().skip(skip).copied(), window)
}

fn same_dim(d: &DiscreteDistribution, mu: &DiscreteDistribution) -> Result<()> {
    if d.dim() != mu.dim() {
        return Err(Error::Dimension(format!(
            "distributions over {} and {} bits",
            d.dim(),
            mu.dim()
        )));
    }
    Ok(())
}

/// `max_y |d(y) − μ(y)|` over the union of both supports.
pub fn max_pointwise_error(d: &DiscreteDistribution, mu: &DiscreteDistribution) -> Result<f64> {
    same_dim(d, mu)?;
    Ok(d.union_support(mu)
        .into_iter()
        .map(|y| (d.prob(y) - mu.prob(y)).abs())
        .fold(0.0, f64::max))
}

/// Total variation distance `½ Σ_y |d(y) − μ(y)|`.
pub fn tv_distance(d: &DiscreteDistribution, mu: &DiscreteDistribution) -> Result<f64> {
    same_dim(d, mu)?;
    let sum: f64 = d
        .union_support(mu)
        .into_iter()
        .map(|y| (d.prob(y) - mu.prob(y)).abs())
        .sum();
    Ok((0.5 * sum).min(1.0))
}
