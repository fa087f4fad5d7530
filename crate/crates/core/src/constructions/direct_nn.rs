//! Directly encoded networks: the phenotype is the Boolean function the
//! network computes, and the randomness of a crossover child sits in the
//! first-layer biases.

use crate::bits::BitVector;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, Activation, FeedForwardNet, Layer, ParamRef, WeightLayout};

use super::oracle::exact_crossover_distribution;
use super::{apportion_cells, ConstructionReport};

const MAX_INPUTS: usize = 4;
const MAX_BIAS_UNITS: usize = 8;
/// Pre-activation magnitude of a matched (or unmatched) conjunction unit.
const CONJUNCTION_MARGIN: f64 = 20.0;
const OUTPUT_GAIN: f64 = 100.0;

/// A function `{0,1}^{n_in} → {0,1}^{n_out}`; row `x` holds the output for
/// the input whose bits, most significant first, spell `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    inputs: usize,
    rows: Vec<BitVector>,
}

impl TruthTable {
    pub fn new(inputs: usize, rows: Vec<BitVector>) -> Result<Self> {
        if inputs > 20 || rows.len() != 1 << inputs {
            return Err(Error::Dimension(format!(
                "{} rows for {inputs} inputs",
                rows.len()
            )));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) || width == 0 {
            return Err(Error::Dimension("rows of unequal or zero width".into()));
        }
        Ok(TruthTable { inputs, rows })
    }

    pub fn from_fn(inputs: usize, outputs: usize, f: impl Fn(&BitVector) -> BitVector) -> Result<Self> {
        let rows = (0..1u64 << inputs)
            .map(|x| {
                let y = f(&BitVector::from_integer(x, inputs)?);
                if y.len() == outputs {
                    Ok(y)
                } else {
                    Err(Error::LengthMismatch(y.len(), outputs))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, rows)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &BitVector {
        &self.rows[x]
    }

    /// All rows concatenated: the phenotype of a network computing this
    /// function.
    pub fn phenotype(&self) -> BitVector {
        let parts: Vec<&BitVector> = self.rows.iter().collect();
        BitVector::concat(&parts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedFunction {
    pub table: TruthTable,
    pub probability: f64,
}

fn input_vector(x: usize, inputs: usize) -> Vec<f64> {
    (0..inputs)
        .map(|i| ((x >> (inputs - 1 - i)) & 1) as f64)
        .collect()
}

/// The function a network computes on `{0,1}^{inputs}`.
pub fn realized_truth_table(net: &FeedForwardNet) -> Result<TruthTable> {
    let inputs = net.input_dim();
    let rows = (0..1usize << inputs)
        .map(|x| net.encode_input(&input_vector(x, inputs)))
        .collect::<Result<Vec<_>>>()?;
    TruthTable::new(inputs, rows)
}

/// Parents that differ only in the biases of `L` zero-input first-layer
/// units: all 0 in the first parent, all 1 in the second. A child's bias
/// pattern is uniform on `{0,1}^L`; read as an integer it selects a cell,
/// and a shared layer of conjunction units, one per (pattern, input) pair,
/// routes each cell to the function it was assigned.
///
/// `parents` fixes the functions of the two parents; by default they are
/// the first and last functions listed.
pub fn build_direct_nn_parents(
    functions: &[WeightedFunction],
    epsilon: f64,
    width: usize,
    parents: Option<(&TruthTable, &TruthTable)>,
) -> Result<(FeedForwardNet, FeedForwardNet, ConstructionReport)> {
    let first = functions
        .first()
        .ok_or_else(|| Error::InvalidArgument("no functions given".into()))?;
    let (n_in, n_out) = (first.table.inputs(), first.table.outputs());
    if n_in == 0 || n_in > MAX_INPUTS {
        return Err(Error::InvalidArgument(format!("{n_in} inputs outside 1..=4")));
    }
    if width == 0 || width > MAX_BIAS_UNITS {
        return Err(Error::InvalidArgument(format!("{width} bias units outside 1..=8")));
    }
    if functions
        .iter()
        .any(|f| f.table.inputs() != n_in || f.table.outputs() != n_out)
    {
        return Err(Error::Dimension("functions of different shapes".into()));
    }
    let (h1, h2) = match parents {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (first.table.clone(), functions[functions.len() - 1].table.clone()),
    };
    if h1.inputs() != n_in || h2.inputs() != n_in || h1.outputs() != n_out || h2.outputs() != n_out {
        return Err(Error::Dimension("parent functions of a different shape".into()));
    }
    let cells = 1usize << width;
    if cells < functions.len() {
        return Err(Error::SupportTooLarge {
            support: functions.len(),
            width,
        });
    }
    let mu = DiscreteDistribution::new(
        n_out << n_in,
        functions
            .iter()
            .map(|f| (f.table.phenotype(), f.probability))
            .collect(),
    )?;
    let (y1, y2) = (h1.phenotype(), h2.phenotype());
    let counts = apportion_cells(&mu, cells, &[&y1, &y2]);
    let mut cell_fn: Vec<&TruthTable> = vec![&h1];
    for (f, &c) in functions.iter().zip(&counts) {
        cell_fn.extend(std::iter::repeat_n(&f.table, c));
    }
    cell_fn.push(&h2);

    let inputs_count = 1usize << n_in;
    let literals = n_in + width;
    let (lo, hi) = (sigmoid(0.0), sigmoid(1.0));
    let (centre, gap) = (0.5 * (lo + hi), hi - lo);
    let gain = 2.0 * CONJUNCTION_MARGIN / gap;

    let mut input_layer = Layer::zeros(n_in, literals, Activation::Sigmoid);
    for i in 0..n_in {
        input_layer.set_weight(i, i, 1.0);
    }
    let units = cells * inputs_count;
    let mut conj = Layer::zeros(literals, units, Activation::Sigmoid);
    let mut out = Layer::zeros(units, n_out, Activation::Identity);
    for (k, table) in cell_fn.iter().enumerate() {
        for x in 0..inputs_count {
            let u = k * inputs_count + x;
            let mut bias = -gain * (literals as f64 - 1.0) * gap / 2.0;
            for lit in 0..literals {
                let want = if lit < n_in {
                    (x >> (n_in - 1 - lit)) & 1 == 1
                } else {
                    (k >> (width - 1 - (lit - n_in))) & 1 == 1
                };
                let sign = if want { 1.0 } else { -1.0 };
                conj.set_weight(u, lit, gain * sign);
                bias -= gain * sign * centre;
            }
            conj.set_bias(u, bias);
            let row = table.row(x);
            for j in 0..n_out {
                out.set_weight(j, u, if row.get(j) { OUTPUT_GAIN } else { -OUTPUT_GAIN });
            }
        }
    }
    let layout = WeightLayout::new(
        (0..width)
            .map(|k| ParamRef::Bias { layer: 0, index: n_in + k })
            .collect(),
    );
    let base = FeedForwardNet::new(n_in, vec![input_layer, conj, out])?.with_layout(layout)?;
    let with_biases = |pattern: usize| {
        let mut net = base.clone();
        for k in 0..width {
            let bit = (pattern >> (width - 1 - k)) & 1;
            net.set_param(ParamRef::Bias { layer: 0, index: n_in + k }, bit as f64);
        }
        net
    };
    let p1 = with_biases(0);
    let p2 = with_biases(cells - 1);

    for pattern in 0..cells {
        let child = with_biases(pattern);
        for x in 0..inputs_count {
            let input = input_vector(x, n_in);
            let outs = child.forward_layers(&input)?;
            if let Some(v) = outs[1].iter().find(|v| v.min(1.0 - *v) > 1e-6) {
                return Err(Error::Calibration(format!(
                    "conjunction output {v} for pattern {pattern}, input {x}"
                )));
            }
            let pre = child.final_pre_activations(&input)?;
            if let Some(p) = pre.iter().find(|p| p.abs() < 1.0) {
                return Err(Error::Calibration(format!(
                    "output pre-activation {p} for pattern {pattern}, input {x}"
                )));
            }
        }
    }

    let dim = mu.dim();
    let achieved = exact_crossover_distribution(&p1, &p2, |net: &FeedForwardNet| {
        let y = realized_truth_table(net)?.phenotype();
        debug_assert_eq!(y.len(), dim);
        Ok(y)
    })?;
    let report = ConstructionReport::new(&mu, &achieved, epsilon, p1.parameter_count(), width, true)?
        .with_parameter("L", width)
        .with_parameter("conjunction_units", units);
    Ok((p1, p2, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bv;
    use crate::genome::Genome;

    fn identity_and_negation() -> Vec<WeightedFunction> {
        let id = TruthTable::from_fn(1, 1, |x| x.clone()).unwrap();
        let neg = TruthTable::from_fn(1, 1, |x| x.complement()).unwrap();
        vec![
            WeightedFunction { table: id, probability: 0.5 },
            WeightedFunction { table: neg, probability: 0.5 },
        ]
    }

    #[test]
    fn identity_negation_pair() {
        let fs = identity_and_negation();
        let (p1, p2, r) = build_direct_nn_parents(&fs, 0.3, 3, None).unwrap();
        assert!(r.achieved_error <= 2.0 / 8.0, "{}", r.to_text());
        assert_eq!(realized_truth_table(&p1).unwrap(), fs[0].table);
        assert_eq!(realized_truth_table(&p2).unwrap(), fs[1].table);
        assert_eq!(fs[0].table.phenotype(), bv("01"));
    }

    #[test]
    fn child_biases_uniform() {
        let fs = identity_and_negation();
        let (p1, p2, _) = build_direct_nn_parents(&fs, 0.3, 3, None).unwrap();
        let biases = |n: &FeedForwardNet| Ok(BitVector::from_fn(3, |k| n.symbols()[k] == 1.0));
        let d = exact_crossover_distribution(&p1, &p2, biases).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.support().iter().all(|(_, p)| *p == 0.125));
    }

    #[test]
    fn explicit_parent_functions() {
        let fs = identity_and_negation();
        let zero = TruthTable::from_fn(1, 1, |_| bv("0")).unwrap();
        let one = TruthTable::from_fn(1, 1, |_| bv("1")).unwrap();
        let (p1, p2, r) = build_direct_nn_parents(&fs, 0.2, 6, Some((&zero, &one))).unwrap();
        assert_eq!(realized_truth_table(&p1).unwrap(), zero);
        assert_eq!(realized_truth_table(&p2).unwrap(), one);
        assert!(r.certified());
    }
}
