//! Layered feed-forward networks as genotypes.
//!
//! A network maps the constant input `[1]` to `n` pre-activations; bit `j`
//! of the phenotype is `round(σ(pre_j))` with ties rounded up, which is the
//! same as `pre_j ≥ 0`.

use std::fmt;
use std::fmt::Write as _;

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::genome::Genome;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

/// One affine-then-activation layer. Weights are row-major, one row per
/// output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    inputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(inputs: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != inputs * bias.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} inputs and {} outputs",
                weights.len(),
                inputs,
                bias.len()
            )));
        }
        if !weights.iter().chain(&bias).all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight or bias".into()));
        }
        Ok(Layer {
            inputs,
            weights,
            bias,
            activation,
        })
    }

    /// A layer with all weights and biases zero.
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer {
            inputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    #[inline]
    pub fn set_weight(&mut self, row: usize, col: usize, w: f64) {
        self.weights[row * self.inputs + col] = w;
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn set_bias(&mut self, index: usize, b: f64) {
        self.bias[index] = b;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.inputs..(row + 1) * self.inputs]
    }

    /// Pre-activations for `input`, written into `out`.
    pub fn affine_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.outputs()).map(|r| {
            self.row(r)
                .iter()
                .zip(input)
                .fold(self.bias[r], |acc, (w, x)| acc + w * x)
        }));
    }
}

/// Address of one real parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamRef {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, index: usize },
}

/// The evolvable parameters, in flattening order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct WeightLayout {
    params: Vec<ParamRef>,
}

impl WeightLayout {
    pub fn new(params: Vec<ParamRef>) -> Self {
        WeightLayout { params }
    }

    pub fn params(&self) -> &[ParamRef] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedForwardNet {
    input_dim: usize,
    layers: Vec<Layer>,
    layout: WeightLayout,
}

impl FeedForwardNet {
    /// A network with every weight and bias evolvable.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        let mut width = input_dim;
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != width {
                return Err(Error::Dimension(format!(
                    "layer {i} takes {} inputs but receives {width}",
                    l.inputs
                )));
            }
            width = l.outputs();
        }
        let mut params = Vec::new();
        for (li, l) in layers.iter().enumerate() {
            for row in 0..l.outputs() {
                for col in 0..l.inputs {
                    params.push(ParamRef::Weight { layer: li, row, col });
                }
            }
            for index in 0..l.outputs() {
                params.push(ParamRef::Bias { layer: li, index });
            }
        }
        Ok(FeedForwardNet {
            input_dim,
            layers,
            layout: WeightLayout { params },
        })
    }

    /// Restricts the evolvable parameters to `layout`.
    pub fn with_layout(mut self, layout: WeightLayout) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for p in &layout.params {
            if !self.in_range(p) {
                return Err(Error::InvalidArgument(format!("{p:?} outside the network")));
            }
            if !seen.insert(*p) {
                return Err(Error::InvalidArgument(format!("{p:?} listed twice")));
            }
        }
        self.layout = layout;
        Ok(self)
    }

    fn in_range(&self, p: &ParamRef) -> bool {
        match *p {
            ParamRef::Weight { layer, row, col } => self
                .layers
                .get(layer)
                .is_some_and(|l| row < l.outputs() && col < l.inputs),
            ParamRef::Bias { layer, index } => {
                self.layers.get(layer).is_some_and(|l| index < l.outputs())
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layout(&self) -> &WeightLayout {
        &self.layout
    }

    /// Total number of real parameters, evolvable or not.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    #[inline]
    pub fn param(&self, p: ParamRef) -> f64 {
        match p {
            ParamRef::Weight { layer, row, col } => self.layers[layer].weight(row, col),
            ParamRef::Bias { layer, index } => self.layers[layer].bias[index],
        }
    }

    #[inline]
    pub fn set_param(&mut self, p: ParamRef, value: f64) {
        match p {
            ParamRef::Weight { layer, row, col } => self.layers[layer].set_weight(row, col, value),
            ParamRef::Bias { layer, index } => self.layers[layer].bias[index] = value,
        }
    }

    /// Outputs of every layer, after activation.
    pub fn forward_layers(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim {
            return Err(Error::LengthMismatch(input.len(), self.input_dim));
        }
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::new();
        for l in &self.layers {
            let x = outs.last().map_or(input, Vec::as_slice);
            l.affine_into(x, &mut pre);
            outs.push(pre.iter().map(|&z| l.activation.apply(z)).collect());
        }
        Ok(outs)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_layers(input)?.pop().unwrap_or_default())
    }

    /// Final-layer pre-activations.
    pub fn final_pre_activations(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::LengthMismatch(input.len(), self.input_dim));
        }
        let mut cur = input.to_vec();
        let mut pre = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.affine_into(&cur, &mut pre);
            if i + 1 == self.layers.len() {
                return Ok(pre);
            }
            cur.clear();
            cur.extend(pre.iter().map(|&z| l.activation.apply(z)));
        }
        unreachable!("networks have at least one layer")
    }

    /// Phenotype for a given input: bit `j` set iff pre-activation `j ≥ 0`.
    pub fn encode_input(&self, input: &[f64]) -> Result<BitVector> {
        let pre = self.final_pre_activations(input)?;
        Ok(BitVector::from_fn(pre.len(), |j| pre[j] >= 0.0))
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_net(text)
    }
}

/// Free-function form of [`FeedForwardNet::forward`].
pub fn nn_forward(net: &FeedForwardNet, input: &[f64]) -> Result<Vec<f64>> {
    net.forward(input)
}

/// The encoding `E(h) = round(σ(h(1)))`.
pub fn nn_encode(net: &FeedForwardNet) -> Result<BitVector> {
    if net.input_dim != 1 {
        return Err(Error::Dimension(format!(
            "encoding feeds one input, network takes {}",
            net.input_dim
        )));
    }
    net.encode_input(&[1.0])
}

impl Genome for FeedForwardNet {
    type Symbol = f64;

    fn symbols(&self) -> Vec<f64> {
        self.layout.params.iter().map(|&p| self.param(p)).collect()
    }

    fn with_symbols(&self, symbols: &[f64]) -> Result<Self> {
        if symbols.len() != self.layout.len() {
            return Err(Error::LengthMismatch(symbols.len(), self.layout.len()));
        }
        let mut net = self.clone();
        for (&p, &v) in self.layout.params.iter().zip(symbols) {
            net.set_param(p, v);
        }
        Ok(net)
    }

    fn compatible(&self, other: &Self) -> bool {
        if self.input_dim != other.input_dim
            || self.layout != other.layout
            || self.layers.len() != other.layers.len()
        {
            return false;
        }
        let evolvable: std::collections::HashSet<_> = self.layout.params.iter().collect();
        self.layers.iter().zip(&other.layers).enumerate().all(|(li, (a, b))| {
            a.inputs == b.inputs
                && a.outputs() == b.outputs()
                && a.activation == b.activation
                && (0..a.outputs()).all(|row| {
                    (0..a.inputs).all(|col| {
                        evolvable.contains(&ParamRef::Weight { layer: li, row, col })
                            || a.weight(row, col).to_bits() == b.weight(row, col).to_bits()
                    }) && (evolvable.contains(&ParamRef::Bias { layer: li, index: row })
                        || a.bias[row].to_bits() == b.bias[row].to_bits())
                })
        })
    }

    fn symbol_count(&self) -> usize {
        self.layout.len()
    }
}

/// Gain used by the command-line demo and the tests.
pub const MIRACLE_GAIN: f64 = 10.0;

/// Parents identical except two first-layer weights, `(+c, −c)` and
/// `(−c, +c)`. Both encode all zeros; the child with both weights `+c`
/// encodes all ones.
pub fn make_miracle_nn_pair(n: usize, c: f64) -> Result<(FeedForwardNet, FeedForwardNet)> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale {c} must be positive")));
    }
    let build = |w0: f64, w1: f64| -> Result<FeedForwardNet> {
        let first = Layer::new(1, vec![w0, w1], vec![0.0, 0.0], Activation::Sigmoid)?;
        // fires only when both first-layer units are on
        let hidden = Layer::new(2, vec![c, c], vec![-1.5 * c], Activation::Sigmoid)?;
        let out = Layer::new(1, vec![4.0 * c; n], vec![-3.0 * c; n], Activation::Identity)?;
        FeedForwardNet::new(1, vec![first, hidden, out])?.with_layout(WeightLayout::new(vec![
            ParamRef::Weight { layer: 0, row: 0, col: 0 },
            ParamRef::Weight { layer: 0, row: 1, col: 0 },
        ]))
    };
    Ok((build(c, -c)?, build(-c, c)?))
}

// ---------------------------------------------------------------------------
// Text form
// ---------------------------------------------------------------------------

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

impl fmt::Display for FeedForwardNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "network {} {}", self.input_dim, self.layers.len());
        for l in &self.layers {
            let _ = writeln!(out, "layer {} {} {}", l.inputs, l.outputs(), l.activation.name());
            for r in 0..l.outputs() {
                let row: Vec<String> = l.row(r).iter().map(|&w| real(w)).collect();
                let _ = writeln!(out, "w {}", row.join(" "));
            }
            let bias: Vec<String> = l.bias.iter().map(|&b| real(b)).collect();
            let _ = writeln!(out, "b {}", bias.join(" "));
        }
        let _ = writeln!(out, "evolvable {}", self.layout.len());
        for p in &self.layout.params {
            let _ = match *p {
                ParamRef::Weight { layer, row, col } => writeln!(out, "pw {layer} {row} {col}"),
                ParamRef::Bias { layer, index } => writeln!(out, "pb {layer} {index}"),
            };
        }
        f.write_str(&out)
    }
}

fn parse_net(text: &str) -> Result<FeedForwardNet> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let err = |line: usize, message: &str| Error::Parse {
        line,
        message: message.to_string(),
    };
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));
    fn fields<'a>(l: &'a str, tag: &str) -> Option<Vec<&'a str>> {
        let mut it = l.split_whitespace();
        (it.next()? == tag).then(|| it.collect())
    }
    fn nums<T: std::str::FromStr>(xs: &[&str]) -> Option<Vec<T>> {
        xs.iter().map(|x| x.parse().ok()).collect()
    }

    let (hl, header) = next("`network` header")?;
    let h: Vec<usize> = fields(header, "network")
        .and_then(|f| nums(&f))
        .filter(|v: &Vec<usize>| v.len() == 2)
        .ok_or_else(|| err(hl, "expected `network <inputs> <layers>`"))?;
    let mut layers = Vec::with_capacity(h[1]);
    for _ in 0..h[1] {
        let (ll, lhead) = next("`layer` line")?;
        let f = fields(lhead, "layer")
            .filter(|f| f.len() == 3)
            .ok_or_else(|| err(ll, "expected `layer <in> <out> <activation>`"))?;
        let dims: Vec<usize> = nums(&f[..2]).ok_or_else(|| err(ll, "bad layer sizes"))?;
        let activation = match f[2] {
            "sigmoid" => Activation::Sigmoid,
            "identity" => Activation::Identity,
            other => return Err(err(ll, &format!("unknown activation `{other}`"))),
        };
        let mut weights = Vec::with_capacity(dims[0] * dims[1]);
        for _ in 0..dims[1] {
            let (wl, w) = next("weight row")?;
            let row: Vec<f64> = fields(w, "w")
                .and_then(|f| nums(&f))
                .filter(|r: &Vec<f64>| r.len() == dims[0])
                .ok_or_else(|| err(wl, &format!("expected `w` with {} reals", dims[0])))?;
            weights.extend(row);
        }
        let (bl, b) = next("bias line")?;
        let bias: Vec<f64> = fields(b, "b")
            .and_then(|f| nums(&f))
            .filter(|r: &Vec<f64>| r.len() == dims[1])
            .ok_or_else(|| err(bl, &format!("expected `b` with {} reals", dims[1])))?;
        layers.push(Layer::new(dims[0], weights, bias, activation).map_err(|e| err(ll, &e.to_string()))?);
    }
    let net = FeedForwardNet::new(h[0], layers).map_err(|e| err(hl, &e.to_string()))?;
    let (el, e) = next("`evolvable` line")?;
    let count: usize = fields(e, "evolvable")
        .filter(|f| f.len() == 1)
        .and_then(|f| f[0].parse().ok())
        .ok_or_else(|| err(el, "expected `evolvable <count>`"))?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (pl, p) = next("parameter line")?;
        let param = if let Some(v) = fields(p, "pw").and_then(|f| nums::<usize>(&f)).filter(|v| v.len() == 3) {
            ParamRef::Weight { layer: v[0], row: v[1], col: v[2] }
        } else if let Some(v) = fields(p, "pb").and_then(|f| nums::<usize>(&f)).filter(|v| v.len() == 2) {
            ParamRef::Bias { layer: v[0], index: v[1] }
        } else {
            return Err(err(pl, "expected `pw <layer> <row> <col>` or `pb <layer> <index>`"));
        };
        params.push(param);
    }
    if let Some((l, _)) = lines.next() {
        return Err(err(l, "trailing content"));
    }
    net.with_layout(WeightLayout::new(params))
        .map_err(|e| err(el, &e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::SeededStream;

    fn single(w: f64, b: f64, activation: Activation) -> FeedForwardNet {
        FeedForwardNet::new(1, vec![Layer::new(1, vec![w], vec![b], activation).unwrap()]).unwrap()
    }

    #[test]
    fn forward_examples() {
        assert_eq!(single(0.0, 0.0, Activation::Sigmoid).forward(&[1.0]).unwrap(), [0.5]);
        let y = single(3.0, 0.0, Activation::Sigmoid).forward(&[1.0]).unwrap()[0];
        assert!((y - 0.9526).abs() < 1e-4);
        assert_eq!(single(-2.5, 0.25, Activation::Identity).forward(&[1.0]).unwrap(), [-2.25]);
        assert!(single(1.0, 0.0, Activation::Sigmoid).forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn encode_thresholds_at_zero() {
        let l = Layer::new(1, vec![0.2, -0.2, 0.0], vec![0.0; 3], Activation::Identity).unwrap();
        let net = FeedForwardNet::new(1, vec![l]).unwrap();
        assert_eq!(nn_encode(&net).unwrap().to_string(), "101");
        let zero = FeedForwardNet::new(
            1,
            vec![
                Layer::zeros(1, 3, Activation::Sigmoid),
                Layer::zeros(3, 5, Activation::Identity),
            ],
        )
        .unwrap();
        assert_eq!(nn_encode(&zero).unwrap(), BitVector::ones(5));
    }

    #[test]
    fn rejects_mismatched_layers() {
        let a = Layer::zeros(1, 3, Activation::Sigmoid);
        let b = Layer::zeros(2, 1, Activation::Identity);
        assert!(matches!(FeedForwardNet::new(1, vec![a, b]), Err(Error::Dimension(_))));
        assert!(Layer::new(1, vec![f64::NAN], vec![0.0], Activation::Identity).is_err());
    }

    fn random_net(rng: &mut SeededStream) -> FeedForwardNet {
        let depth = 1 + rng.below(3);
        let mut width = 1;
        let mut layers = Vec::new();
        for d in 0..depth {
            let out = 1 + rng.below(5);
            let act = if d + 1 == depth { Activation::Identity } else { Activation::Sigmoid };
            let w = (0..width * out).map(|_| rng.normal(3.0)).collect();
            let b = (0..out).map(|_| rng.normal(3.0)).collect();
            layers.push(Layer::new(width, w, b, act).unwrap());
            width = out;
        }
        FeedForwardNet::new(1, layers).unwrap()
    }

    #[test]
    fn encode_matches_rounded_sigmoid() {
        let mut rng = SeededStream::new(99);
        for _ in 0..10_000 {
            let net = random_net(&mut rng);
            let pre = net.final_pre_activations(&[1.0]).unwrap();
            let literal = BitVector::from_fn(pre.len(), |j| (sigmoid(pre[j]) + 0.5).floor() >= 1.0);
            assert_eq!(nn_encode(&net).unwrap(), literal);
        }
    }

    #[test]
    fn miracle_pair_all_outcomes() {
        for n in [4, 64] {
            let (p1, p2) = make_miracle_nn_pair(n, 10.0).unwrap();
            assert_eq!(nn_encode(&p1).unwrap(), BitVector::zeros(n));
            assert_eq!(nn_encode(&p2).unwrap(), BitVector::zeros(n));
            assert_eq!(p1.symbol_count(), 2);
            assert!(p1.compatible(&p2));
            for (w, expect_ones) in [
                ([10.0, 10.0], true),
                ([10.0, -10.0], false),
                ([-10.0, 10.0], false),
                ([-10.0, -10.0], false),
            ] {
                let child = p1.with_symbols(&w).unwrap();
                let want = if expect_ones { BitVector::ones(n) } else { BitVector::zeros(n) };
                assert_eq!(nn_encode(&child).unwrap(), want);
            }
        }
    }

    #[test]
    fn dump_round_trip_is_lossless() {
        let mut rng = SeededStream::new(3);
        for _ in 0..200 {
            let net = random_net(&mut rng);
            let back = FeedForwardNet::parse(&net.to_string()).unwrap();
            assert_eq!(back, net);
        }
        let (p1, _) = make_miracle_nn_pair(3, 10.0).unwrap();
        assert_eq!(FeedForwardNet::parse(&p1.to_string()).unwrap(), p1);
    }

    #[test]
    fn symbols_round_trip_10k() {
        let mut rng = SeededStream::new(17);
        for _ in 0..10_000 {
            let net = random_net(&mut rng);
            let s = net.symbols();
            assert_eq!(net.with_symbols(&s).unwrap(), net);
            let mut t = s.clone();
            let k = rng.below(t.len());
            t[k] += 1.0;
            let other = net.with_symbols(&t).unwrap();
            assert_eq!(other.symbols(), t);
            assert!(other.compatible(&net));
        }
    }

    #[test]
    fn parse_errors_report_lines() {
        let text = "network 1 1\nlayer 1 2 sigmoid\nw 1.0\nw 2.0 3.0\nb 0 0\nevolvable 0\n";
        let e = FeedForwardNet::parse(text).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e:?}");
    }
}
