//! Network parents built from a bottleneck unit, threshold units, switch
//! units and an output layer.
//!
//! The first layer feeds one bottleneck unit whose output carries all the
//! randomness of the child. Threshold unit `k` fires when the bottleneck
//! output exceeds cut `k`; switch unit `s` fires when the output lies in
//! interval `s` between consecutive cuts; the output layer writes the
//! phenotype assigned to the firing switch.

use statrs::function::erf::erf;

use crate::bits::BitVector;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::nn::{nn_encode, sigmoid, Activation, FeedForwardNet, Layer};
use crate::operators::DEFAULT_SIGMA_MUT;

use super::gp::{collect_mass, threshold_cuts};
use super::oracle::{exact_crossover_distribution, MAX_DISAGREEMENTS};
use super::{crossover_width, ApproxTarget, ConstructionReport};

/// Switch gain.
const SWITCH_GAIN: f64 = 50.0;
/// Output gain.
const OUTPUT_GAIN: f64 = 100.0;
/// Threshold gain per cell of the crossover construction, times `2^L`.
const CELL_GAIN: f64 = 160.0;
/// Threshold gain of the mutation construction; large enough that a
/// Gaussian mutation of a threshold weight or bias moves its cut by ~1e-7.
const MUTATION_GAIN: f64 = 1e7;

const SATURATION: f64 = 1e-6;
const MIN_MARGIN: f64 = 1.0;

/// Threshold, switch and output layers classifying a scalar input by the
/// interval between `cuts` it falls into. `labels` has one phenotype per
/// interval, so `cuts.len() + 1` entries.
fn classifier_layers(cuts: &[f64], labels: &[BitVector], gain: f64) -> Result<Vec<Layer>> {
    let k = cuts.len();
    let n = labels[0].len();
    let threshold = Layer::new(
        1,
        vec![gain; k],
        cuts.iter().map(|c| -gain * c).collect(),
        Activation::Sigmoid,
    )?;
    let mut sw = Layer::zeros(k, k + 1, Activation::Sigmoid);
    for s in 0..=k {
        // interval s lies above cut s−1 and below cut s
        if s > 0 {
            sw.set_weight(s, s - 1, SWITCH_GAIN);
        }
        if s < k {
            sw.set_weight(s, s, -SWITCH_GAIN);
        }
        let b = if s == 0 { 0.5 } else { -0.5 };
        sw.set_bias(s, b * SWITCH_GAIN);
    }
    let mut out = Layer::zeros(k + 1, n, Activation::Identity);
    for (s, y) in labels.iter().enumerate() {
        for j in 0..n {
            out.set_weight(j, s, if y.get(j) { OUTPUT_GAIN } else { -OUTPUT_GAIN });
        }
    }
    Ok(vec![threshold, sw, out])
}

/// Checks that threshold and switch units saturate and that every output
/// pre-activation is far from zero.
fn validate(net: &FeedForwardNet, saturation: bool, what: &str) -> Result<()> {
    let outs = net.forward_layers(&[1.0])?;
    let depth = outs.len();
    if saturation {
        for (li, layer) in outs.iter().enumerate().take(depth - 1).skip(2) {
            for &v in layer {
                if v.min(1.0 - v) > SATURATION {
                    return Err(Error::Calibration(format!(
                        "{what}: unit output {v} in layer {li} not within {SATURATION} of 0 or 1"
                    )));
                }
            }
        }
    }
    let pre = net.final_pre_activations(&[1.0])?;
    if let Some(&p) = pre.iter().find(|p| p.abs() < MIN_MARGIN) {
        return Err(Error::Calibration(format!(
            "{what}: output pre-activation {p} closer than {MIN_MARGIN} to zero"
        )));
    }
    Ok(())
}

/// Parents that differ only in the `L` bottleneck weights: zero in the
/// first, `2^j · 2^{1−L}` in the second. First-layer units have zero input
/// weight, so each outputs `σ(0) = 1/2`, and a crossover child's bottleneck
/// pre-activation is `K · 2^{−L}` for a uniform integer `K ∈ [0, 2^L)`.
/// The cuts are those of the threshold-chain GP construction.
pub fn build_nn_crossover_parents(
    target: &ApproxTarget,
) -> Result<(FeedForwardNet, FeedForwardNet, ConstructionReport)> {
    let (y1, y2) = target.crossover_parents()?;
    let mu = &target.mu;
    let width = target.width.unwrap_or_else(|| crossover_width(target.epsilon));
    if width == 0 || width > MAX_DISAGREEMENTS {
        return Err(Error::InvalidArgument(format!("bottleneck width {width} outside 1..=24")));
    }
    if mu.len() + 2 > 1 << width {
        return Err(Error::SupportTooLarge {
            support: mu.len(),
            width,
        });
    }
    let cells = (1u64 << width) as f64;
    let bottleneck = |k: u64| sigmoid(k as f64 / cells);
    let cuts: Vec<f64> = threshold_cuts(mu, width)
        .into_iter()
        .map(|c| 0.5 * (bottleneck(c - 1) + bottleneck(c)))
        .collect();
    let mut labels = vec![y1.clone()];
    labels.extend(mu.support().iter().map(|(y, _)| y.clone()));
    labels.push(y2.clone());

    let build = |scale: f64| -> Result<FeedForwardNet> {
        let first = Layer::zeros(1, width, Activation::Sigmoid);
        let weights = (0..width).map(|j| scale * 2f64.powi(j as i32 + 1 - width as i32)).collect();
        let neck = Layer::new(width, weights, vec![0.0], Activation::Sigmoid)?;
        let mut layers = vec![first, neck];
        layers.extend(classifier_layers(&cuts, &labels, CELL_GAIN * cells)?);
        FeedForwardNet::new(1, layers)
    };
    let p1 = build(0.0)?;
    let p2 = build(1.0)?;

    // calibration: every child, identified by its bottleneck weights
    for k in 0..1u64 << width {
        let mut child = p1.clone();
        for j in 0..width {
            if k >> j & 1 == 1 {
                let p = crate::nn::ParamRef::Weight { layer: 1, row: 0, col: j };
                child.set_param(p, p2.param(p));
            }
        }
        validate(&child, true, &format!("child K = {k}"))?;
    }
    let achieved = exact_crossover_distribution(&p1, &p2, nn_encode)?;
    let report = ConstructionReport::new(
        mu,
        &achieved,
        target.epsilon,
        p1.parameter_count(),
        p1.layout().len(),
        true,
    )?
    .with_parameter("L", width)
    .with_parameter("threshold_gain", CELL_GAIN * cells)
    .with_parameter("switch_gain", SWITCH_GAIN)
    .with_parameter("output_gain", OUTPUT_GAIN);
    Ok((p1, p2, report))
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Distribution of the bottleneck pre-activation `z` of a mutated child,
/// conditioned on the mutation landing in the first layer or the bottleneck.
///
/// The parent has `L` first-layer units with weight and bias zero, equal
/// bottleneck weights `ω` and bottleneck bias `−ωL/2`, so `z = 0`. Noise
/// `δ ~ N(0, σ²)` on a first-layer weight or bias gives `z = ω(σ(δ) − ½)`;
/// on a bottleneck weight `z = δ/2`; on the bottleneck bias `z = δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationMixture {
    pub width: usize,
    pub omega: f64,
    pub sigma: f64,
}

impl MutationMixture {
    /// Mutable positions that move `z`: `3L + 1`.
    pub fn positions(&self) -> usize {
        3 * self.width + 1
    }

    pub fn cdf(&self, r: f64) -> f64 {
        let l = self.width as f64;
        let total = 3.0 * l + 1.0;
        let s = self.sigma;
        let first = {
            let u = r / self.omega + 0.5;
            if u <= 0.0 {
                0.0
            } else if u >= 1.0 {
                1.0
            } else {
                std_normal_cdf((u / (1.0 - u)).ln() / s)
            }
        };
        let neck_weight = std_normal_cdf(2.0 * r / s);
        let neck_bias = std_normal_cdf(r / s);
        (2.0 * l * first + l * neck_weight + neck_bias) / total
    }

    /// The `z` with `cdf(z) = level`, by bisection to 1e-12.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Bracket(level));
        }
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        while self.cdf(lo) > level {
            lo *= 2.0;
            if lo < -1e6 {
                return Err(Error::Bracket(level));
            }
        }
        while self.cdf(hi) < level {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Bracket(level));
            }
        }
        for _ in 0..200 {
            if hi - lo <= 1e-12 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Layout of the mutation construction, fixed before any weight is set.
#[derive(Clone, Debug, PartialEq)]
pub struct NnMutationDesign {
    pub mixture: MutationMixture,
    /// Cut levels of the mixture CDF, one per interval boundary.
    pub levels: Vec<f64>,
    /// Bottleneck pre-activation cuts solving `cdf(z) = level`.
    pub z_cuts: Vec<f64>,
    /// Phenotype per interval.
    pub labels: Vec<BitVector>,
    pub early_positions: usize,
    pub total_positions: usize,
    /// Predicted child distribution, charging mutations past the
    /// bottleneck to the parent phenotype.
    pub predicted: DiscreteDistribution,
}

/// F-space intervals: the support in order with a parent band of mass
/// `band` centred at `1/2`, splitting the support point that straddles it.
fn interval_plan(mu: &DiscreteDistribution, parent: &BitVector, band: f64) -> (Vec<f64>, Vec<BitVector>) {
    let lo = 0.5 - band / 2.0;
    let mut pieces: Vec<(f64, BitVector)> = Vec::new();
    let mut push = |mass: f64, y: &BitVector| {
        if mass <= 0.0 {
            return;
        }
        match pieces.last_mut() {
            Some((m, z)) if z == y => *m += mass,
            _ => pieces.push((mass, y.clone())),
        }
    };
    let mut u = 0.0;
    let mut band_done = false;
    for (y, p) in mu.support() {
        let mass = (1.0 - band) * p;
        if !band_done && u + mass >= lo {
            push(lo - u, y);
            push(band, parent);
            push(u + mass - lo, y);
            band_done = true;
        } else {
            push(mass, y);
        }
        u += mass;
    }
    if !band_done {
        push(band, parent);
    }
    let mut levels = Vec::new();
    let mut cum = 0.0;
    for (m, _) in &pieces[..pieces.len() - 1] {
        cum += m;
        levels.push(cum);
    }
    (levels, pieces.into_iter().map(|(_, y)| y).collect())
}

fn late_positions(cuts: usize, n: usize) -> usize {
    2 * cuts + (cuts + 1) * cuts + (cuts + 1) + n * (cuts + 1) + n
}

/// Plans the mutation construction: interval masses, first-layer width and
/// quantile cuts.
pub fn design_nn_mutation(target: &ApproxTarget, sigma: f64) -> Result<NnMutationDesign> {
    let parent = target.mutation_parent()?;
    let mu = &target.mu;
    let eps = target.epsilon;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("σ_mut = {sigma} must be positive")));
    }
    let band = eps / 4.0;
    let (levels, labels) = interval_plan(mu, parent, band);
    let late = late_positions(levels.len(), mu.dim());
    let base = ((mu.len() * mu.dim()) as f64 / (2.0 * eps) - 1e-9).ceil().max(1.0) as usize;
    let width = match target.width {
        Some(w) => w,
        None => {
            let mut pad = 1;
            // smallest padding with late hits at most ε/2 of all positions
            while (late as f64) > eps / 2.0 * (3 * base * pad + 1 + late) as f64 {
                pad += 1;
            }
            base * pad
        }
    };
    let mixture = MutationMixture {
        width,
        omega: 1.0,
        sigma,
    };
    let z_cuts = levels
        .iter()
        .map(|&l| mixture.quantile(l))
        .collect::<Result<Vec<_>>>()?;
    let early = mixture.positions();
    let total = early + late;
    let hit = early as f64 / total as f64;
    let mut mass = Vec::new();
    let mut prev = 0.0;
    for (i, y) in labels.iter().enumerate() {
        let next = levels.get(i).copied().unwrap_or(1.0);
        mass.push((y.clone(), hit * (next - prev)));
        prev = next;
    }
    mass.push((parent.clone(), 1.0 - hit));
    let predicted = collect_mass(mu.dim(), mass)?;
    Ok(NnMutationDesign {
        mixture,
        levels,
        z_cuts,
        labels,
        early_positions: early,
        total_positions: total,
        predicted,
    })
}

/// A single parent whose single-weight Gaussian mutations approximate the
/// target, using the default mutation scale.
pub fn build_nn_mutation_parent(target: &ApproxTarget) -> Result<(FeedForwardNet, ConstructionReport)> {
    build_nn_mutation_parent_with(target, DEFAULT_SIGMA_MUT)
}

/// As [`build_nn_mutation_parent`] for mutation scale `sigma`.
pub fn build_nn_mutation_parent_with(
    target: &ApproxTarget,
    sigma: f64,
) -> Result<(FeedForwardNet, ConstructionReport)> {
    let design = design_nn_mutation(target, sigma)?;
    let width = design.mixture.width;
    let omega = design.mixture.omega;
    let first = Layer::zeros(1, width, Activation::Sigmoid);
    let neck = Layer::new(width, vec![omega; width], vec![-0.5 * omega * width as f64], Activation::Sigmoid)?;
    let cuts: Vec<f64> = design.z_cuts.iter().map(|&z| sigmoid(z)).collect();
    let mut layers = vec![first, neck];
    layers.extend(classifier_layers(&cuts, &design.labels, MUTATION_GAIN)?);
    let net = FeedForwardNet::new(1, layers)?;
    debug_assert_eq!(net.layout().len(), design.total_positions);
    validate(&net, false, "parent")?;
    let parent = target.mutation_parent()?;
    if &nn_encode(&net)? != parent {
        return Err(Error::Calibration("parent does not encode its phenotype".into()));
    }
    let z: Vec<String> = design.z_cuts.iter().map(|z| format!("{z:.12}")).collect();
    let report = ConstructionReport::new(
        &target.mu,
        &design.predicted,
        target.epsilon,
        net.parameter_count(),
        net.layout().len(),
        false,
    )?
    .with_parameter("L", width)
    .with_parameter("early_positions", design.early_positions)
    .with_parameter("sigma_mut", sigma)
    .with_parameter("z_cuts", z.join(" "))
    .with_parameter("threshold_gain", MUTATION_GAIN);
    Ok((net, report))
}
