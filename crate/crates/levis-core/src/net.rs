//! Network, specification, and geometry data model.
//!
//! A [`Network`] is a dense feed-forward ReLU model: every layer but the last
//! applies `relu(W x + b)`, the last is affine only. A [`Specification`] is a
//! conjunction of output half-spaces `a·f(x) + b > 0`; an input is adversarial
//! as soon as one margin is non-positive (the boundary counts as adversarial,
//! so the verified set is open). [`Ball`] and [`InputBox`] carry the geometry
//! used by the solvers and search strategies.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LevisError, Result};

/// One affine layer: `z = weight · input + bias`.
///
/// `weight` has shape `(out, in)`, row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(LevisError::InvalidNetwork(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        if weight.iter().any(|w| !w.is_finite()) || bias.iter().any(|b| !b.is_finite()) {
            return Err(LevisError::InvalidNetwork(
                "non-finite weight or bias".into(),
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// Dense feed-forward ReLU network.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Intermediate values from one forward pass: pre- and post-activations for
/// every hidden layer plus the final output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub output: Array1<f64>,
    /// Pre-activations `z^i`, one entry per hidden layer.
    pub pre: Vec<Array1<f64>>,
    /// Post-activations `relu(z^i)`, one entry per hidden layer.
    pub post: Vec<Array1<f64>>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(LevisError::InvalidNetwork(
                "need at least one hidden layer and one output layer".into(),
            ));
        }
        if input_dim == 0 {
            return Err(LevisError::InvalidNetwork("input dimension is zero".into()));
        }
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != prev {
                return Err(LevisError::InvalidNetwork(format!(
                    "layer {} expects input dim {} but previous layer produces {}",
                    i,
                    layer.in_dim(),
                    prev
                )));
            }
            prev = layer.out_dim();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of hidden (ReLU) layers; the final layer is affine only.
    pub fn hidden_layer_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    /// Total hidden neuron count N.
    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden_sizes().iter().sum()
    }

    /// Flat index of hidden neuron `index` in hidden layer `layer` (0-based).
    pub fn flat_neuron_index(&self, layer: usize, index: usize) -> usize {
        self.hidden_sizes()[..layer].iter().sum::<usize>() + index
    }

    /// Inverse of [`Self::flat_neuron_index`].
    pub fn neuron_position(&self, flat: usize) -> (usize, usize) {
        let mut rest = flat;
        for (layer, size) in self.hidden_sizes().iter().enumerate() {
            if rest < *size {
                return (layer, rest);
            }
            rest -= size;
        }
        panic!("flat neuron index {flat} out of range");
    }

    /// Exact layer-by-layer evaluation with all intermediates.
    pub fn forward(&self, x: &Array1<f64>) -> Result<ForwardTrace> {
        if x.len() != self.input_dim {
            return Err(LevisError::DimensionMismatch(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let hidden = self.hidden_layer_count();
        let mut pre = Vec::with_capacity(hidden);
        let mut post = Vec::with_capacity(hidden);
        let mut cur = x.clone();
        for layer in &self.layers[..hidden] {
            let z = layer.weight.dot(&cur) + &layer.bias;
            let a = z.mapv(|v| v.max(0.0));
            pre.push(z);
            post.push(a.clone());
            cur = a;
        }
        let last = &self.layers[hidden];
        let output = last.weight.dot(&cur) + &last.bias;
        Ok(ForwardTrace { output, pre, post })
    }

    /// Output only; see [`Self::forward`] for intermediates.
    pub fn forward_output(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// The affine map `f(x) = A x + v` valid wherever `pattern` is realized.
    ///
    /// Composes the layer weights with 0/1 diagonal masks; every phase must be
    /// fixed (no `Free` entries).
    pub fn affine_region(&self, pattern: &ActivationPattern) -> Result<(Array2<f64>, Array1<f64>)> {
        let n = self.hidden_neuron_count();
        if pattern.len() != n {
            return Err(LevisError::DimensionMismatch(format!(
                "pattern has {} phases, network has {} hidden neurons",
                pattern.len(),
                n
            )));
        }
        if pattern.phases().iter().any(|p| *p == Phase::Free) {
            return Err(LevisError::InvalidArgument(
                "affine_region requires a fully determined pattern".into(),
            ));
        }
        let mut a = Array2::eye(self.input_dim);
        let mut v = Array1::zeros(self.input_dim);
        let mut flat = 0usize;
        for layer in &self.layers[..self.hidden_layer_count()] {
            let mut wa = layer.weight.dot(&a);
            let mut wv = layer.weight.dot(&v) + &layer.bias;
            for j in 0..layer.out_dim() {
                if pattern.phases()[flat + j] == Phase::Inactive {
                    wa.row_mut(j).fill(0.0);
                    wv[j] = 0.0;
                }
            }
            flat += layer.out_dim();
            a = wa;
            v = wv;
        }
        let last = &self.layers[self.hidden_layer_count()];
        Ok((last.weight.dot(&a), last.weight.dot(&v) + &last.bias))
    }

    /// The pattern realized by an input: `Active` where the pre-activation is
    /// non-negative, `Inactive` where it is negative.
    pub fn pattern_at(&self, x: &Array1<f64>) -> Result<ActivationPattern> {
        let trace = self.forward(x)?;
        let phases = trace
            .pre
            .iter()
            .flat_map(|z| z.iter().map(|&v| if v >= 0.0 { Phase::Active } else { Phase::Inactive }))
            .collect();
        Ok(ActivationPattern::new(phases))
    }
}

/// One output half-space `a·y + b > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub a: Array1<f64>,
    pub b: f64,
}

/// Conjunction of output half-spaces. An output is verified iff every margin
/// `a_j·y + b_j` is strictly positive; a margin of exactly zero is adversarial.
#[derive(Debug, Clone, PartialEq)]
pub struct Specification {
    constraints: Vec<HalfSpace>,
}

/// Result of evaluating a specification on one output vector.
#[derive(Debug, Clone)]
pub struct SpecEval {
    pub verified: bool,
    pub margins: Vec<f64>,
}

impl Specification {
    pub fn new(constraints: Vec<HalfSpace>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(LevisError::InvalidSpec("empty constraint list".into()));
        }
        for (j, c) in constraints.iter().enumerate() {
            if c.a.iter().all(|&v| v == 0.0) {
                return Err(LevisError::InvalidSpec(format!(
                    "constraint {j} has a zero normal vector"
                )));
            }
            if c.a.iter().any(|v| !v.is_finite()) || !c.b.is_finite() {
                return Err(LevisError::InvalidSpec(format!(
                    "constraint {j} has non-finite coefficients"
                )));
            }
        }
        Ok(Self { constraints })
    }

    pub fn constraints(&self) -> &[HalfSpace] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Margins `a_j·y + b_j`; verified iff all are strictly positive.
    pub fn eval(&self, y: &Array1<f64>) -> Result<SpecEval> {
        let margins: Vec<f64> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if c.a.len() != y.len() {
                    Err(LevisError::DimensionMismatch(format!(
                        "constraint {j} has {} coefficients, output has {}",
                        c.a.len(),
                        y.len()
                    )))
                } else {
                    Ok(c.a.dot(y) + c.b)
                }
            })
            .collect::<Result<_>>()?;
        let verified = margins.iter().all(|&m| m > 0.0);
        Ok(SpecEval { verified, margins })
    }
}

/// Norm order for distances and balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl Norm {
    pub fn norm(&self, v: &Array1<f64>) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::LInf => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }

    pub fn dist(&self, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        self.norm(&(a - b))
    }

    /// The dual norm order (1↔∞, 2↔2), used by the Lipschitz baseline.
    pub fn dual(&self) -> Norm {
        match self {
            Norm::L1 => Norm::LInf,
            Norm::L2 => Norm::L2,
            Norm::LInf => Norm::L1,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(Norm::L1),
            "2" => Ok(Norm::L2),
            "inf" | "infinity" | "oo" => Ok(Norm::LInf),
            other => Err(LevisError::Parse(format!(
                "unknown norm order {other:?}; expected 1, 2, or inf"
            ))),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::L1 => write!(f, "1"),
            Norm::L2 => write!(f, "2"),
            Norm::LInf => write!(f, "inf"),
        }
    }
}

/// A verifiable ball: no adversarial point in its open interior, with the
/// nearest adversarial point recorded as `witness` when known.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Array1<f64>,
    pub radius: f64,
    pub norm: Norm,
    pub witness: Option<Array1<f64>>,
}

impl Ball {
    pub fn new(center: Array1<f64>, radius: f64, norm: Norm, witness: Option<Array1<f64>>) -> Result<Self> {
        if radius < 0.0 || !radius.is_finite() {
            return Err(LevisError::InvalidArgument(format!(
                "ball radius must be finite and non-negative, got {radius}"
            )));
        }
        Ok(Self { center, radius, norm, witness })
    }

    /// Closed-ball membership: `‖x − c‖_p ≤ r`.
    pub fn contains(&self, x: &Array1<f64>) -> bool {
        self.norm.dist(x, &self.center) <= self.radius
    }

    /// Checks the witness invariant: witness at distance `r` (1e-8 relative)
    /// and adversarial under `spec`.
    pub fn validate_witness(&self, net: &Network, spec: &Specification) -> Result<()> {
        let Some(w) = &self.witness else {
            return Ok(());
        };
        let d = self.norm.dist(w, &self.center);
        let scale = self.radius.abs().max(1.0);
        if (d - self.radius).abs() > 1e-8 * scale {
            return Err(LevisError::Numerical(format!(
                "witness at distance {d}, ball radius {}",
                self.radius
            )));
        }
        let eval = spec.eval(&net.forward(w)?.output)?;
        if eval.verified {
            return Err(LevisError::Numerical(
                "ball witness is not adversarial".into(),
            ));
        }
        Ok(())
    }
}

/// Per-neuron ReLU phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Pre-activation pinned non-negative: `ẑ = z`.
    Active,
    /// Pre-activation pinned non-positive: `ẑ = 0`.
    Inactive,
    /// Undetermined (still relaxed / to be branched).
    Free,
}

/// Phase assignment for every hidden neuron, layer-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    phases: Vec<Phase>,
}

impl ActivationPattern {
    pub fn new(phases: Vec<Phase>) -> Self {
        Self { phases }
    }

    pub fn all_free(n: usize) -> Self {
        Self { phases: vec![Phase::Free; n] }
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn get(&self, flat: usize) -> Phase {
        self.phases[flat]
    }

    pub fn set(&mut self, flat: usize, phase: Phase) {
        self.phases[flat] = phase;
    }

    pub fn free_count(&self) -> usize {
        self.phases.iter().filter(|p| **p == Phase::Free).count()
    }
}

/// Axis-aligned input box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBox {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl InputBox {
    pub fn new(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(LevisError::InvalidBox(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().any(|v| !v.is_finite()) || upper.iter().any(|v| !v.is_finite()) {
            return Err(LevisError::InvalidBox("non-finite bound".into()));
        }
        for i in 0..lower.len() {
            if lower[i] > upper[i] {
                return Err(LevisError::InvalidBox(format!(
                    "lower[{i}] = {} exceeds upper[{i}] = {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The `±half_width` default box used when no search box is supplied.
    pub fn symmetric(dim: usize, half_width: f64) -> Self {
        Self {
            lower: Array1::from_elem(dim, -half_width),
            upper: Array1::from_elem(dim, half_width),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Array1<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<f64> {
        &self.upper
    }

    pub fn contains(&self, x: &Array1<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Array1<f64> {
        Array1::from_iter(
            self.lower
                .iter()
                .zip(self.upper.iter())
                .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..=u) }),
        )
    }
}

// ---------------------------------------------------------------------------
// File formats (JSON). Weight matrices are nested row-major arrays.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    input_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecConstraintFile {
    a: Vec<f64>,
    b: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    constraints: Vec<SpecConstraintFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoxFile {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn parse_err(what: &str, e: serde_json::Error) -> LevisError {
    LevisError::Parse(format!("{what}: {e} (line {}, column {})", e.line(), e.column()))
}

impl Network {
    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s).map_err(|e| parse_err("network file", e))?;
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let rows = l.weight.len();
                let cols = l.weight.first().map_or(0, Vec::len);
                if l.weight.iter().any(|r| r.len() != cols) {
                    return Err(LevisError::Parse(format!(
                        "layer {i}: ragged weight matrix"
                    )));
                }
                let flat: Vec<f64> = l.weight.into_iter().flatten().collect();
                let weight = Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| LevisError::Parse(format!("layer {i}: {e}")))?;
                Layer::new(weight, Array1::from_vec(l.bias))
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(file.input_dim, layers)
    }
}

impl Specification {
    pub fn to_json(&self) -> String {
        let file = SpecFile {
            constraints: self
                .constraints
                .iter()
                .map(|c| SpecConstraintFile { a: c.a.to_vec(), b: c.b })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("spec serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(s).map_err(|e| parse_err("specification file", e))?;
        Specification::new(
            file.constraints
                .into_iter()
                .map(|c| HalfSpace { a: Array1::from_vec(c.a), b: c.b })
                .collect(),
        )
    }
}

impl InputBox {
    pub fn to_json(&self) -> String {
        let file = BoxFile { lower: self.lower.to_vec(), upper: self.upper.to_vec() };
        serde_json::to_string_pretty(&file).expect("box serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: BoxFile = serde_json::from_str(s).map_err(|e| parse_err("box file", e))?;
        InputBox::new(Array1::from_vec(file.lower), Array1::from_vec(file.upper))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;

    #[test]
    fn forward_identity_net() {
        let net = fixtures::identity_net();
        let t = net.forward(&array![2.0]).unwrap();
        assert_eq!(t.output, array![2.0]);
        assert_eq!(t.pre.len(), 1);
        assert_eq!(t.pre[0], array![2.0, -2.0]);
        assert_eq!(t.post[0], array![2.0, 0.0]);
    }

    #[test]
    fn forward_min_net() {
        let net = fixtures::min_net();
        assert_eq!(net.forward(&array![2.0, 1.0]).unwrap().output, array![1.0]);
        assert_eq!(net.forward(&array![-1.0, 3.0]).unwrap().output, array![-1.0]);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = fixtures::min_net();
        assert!(net.forward(&array![1.0]).is_err());
    }

    #[test]
    fn eval_spec_examples() {
        let spec = Specification::new(vec![HalfSpace { a: array![1.0], b: 0.0 }]).unwrap();
        let e = spec.eval(&array![0.5]).unwrap();
        assert!(e.verified);
        assert_eq!(e.margins, vec![0.5]);

        // Margin exactly zero counts as adversarial.
        let e = spec.eval(&array![0.0]).unwrap();
        assert!(!e.verified);
        assert_eq!(e.margins, vec![0.0]);

        let upper = Specification::new(vec![HalfSpace { a: array![-1.0], b: 100.0 }]).unwrap();
        let e = upper.eval(&array![125.0]).unwrap();
        assert!(!e.verified);
        assert_eq!(e.margins, vec![-25.0]);
    }

    #[test]
    fn spec_validation() {
        assert!(Specification::new(vec![]).is_err());
        assert!(Specification::new(vec![HalfSpace { a: array![0.0, 0.0], b: 1.0 }]).is_err());
    }

    #[test]
    fn affine_region_identity() {
        let net = fixtures::identity_net();
        let pat = ActivationPattern::new(vec![Phase::Active, Phase::Inactive]);
        let (a, v) = net.affine_region(&pat).unwrap();
        assert_eq!(a, array![[1.0]]);
        assert_eq!(v, array![0.0]);
    }

    #[test]
    fn affine_region_min_net() {
        let net = fixtures::min_net();
        // x1 <= x2, x1 >= 0: f = x1.
        let pat = ActivationPattern::new(vec![Phase::Inactive, Phase::Active, Phase::Inactive]);
        let (a, v) = net.affine_region(&pat).unwrap();
        assert_eq!(a, array![[1.0, 0.0]]);
        assert_eq!(v, array![0.0]);
        // x1 >= x2, x1 >= 0: f = x2.
        let pat = ActivationPattern::new(vec![Phase::Active, Phase::Active, Phase::Inactive]);
        let (a, v) = net.affine_region(&pat).unwrap();
        assert_eq!(a, array![[0.0, 1.0]]);
        assert_eq!(v, array![0.0]);
    }

    #[test]
    fn affine_region_rejects_free() {
        let net = fixtures::identity_net();
        let pat = ActivationPattern::new(vec![Phase::Active, Phase::Free]);
        assert!(net.affine_region(&pat).is_err());
    }

    #[test]
    fn forward_matches_region_map_on_random_nets() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let net = fixtures::random_net(trial, 3, &[5, 4], 2);
            let x = Array1::from_iter((0..3).map(|_| rng.gen_range(-2.0..2.0)));
            let trace = net.forward(&x).unwrap();
            // Skip inputs that land exactly on a ReLU boundary.
            if trace.pre.iter().flatten().any(|z| z.abs() < 1e-9) {
                continue;
            }
            let pat = net.pattern_at(&x).unwrap();
            let (a, v) = net.affine_region(&pat).unwrap();
            let lin = a.dot(&x) + &v;
            for (p, q) in lin.iter().zip(trace.output.iter()) {
                assert!((p - q).abs() <= 1e-12, "affine map mismatch: {p} vs {q}");
            }
        }
    }

    #[test]
    fn network_json_round_trip_is_value_identical() {
        let net = fixtures::random_net(3, 2, &[7], 3);
        let json = net.to_json();
        let back = Network::from_json(&json).unwrap();
        assert_eq!(net, back);
        // And a second trip produces identical text.
        assert_eq!(json, back.to_json());
    }

    #[test]
    fn spec_and_box_json_round_trip() {
        let spec = Specification::new(vec![
            HalfSpace { a: array![1.0, -0.25], b: 0.5 },
            HalfSpace { a: array![0.0, 1.0], b: -3.0 },
        ])
        .unwrap();
        assert_eq!(Specification::from_json(&spec.to_json()).unwrap(), spec);

        let b = InputBox::new(array![-1.0, 0.0], array![2.0, 4.0]).unwrap();
        assert_eq!(InputBox::from_json(&b.to_json()).unwrap(), b);
        assert!(InputBox::new(array![1.0], array![0.0]).is_err());
    }

    #[test]
    fn parse_error_carries_location() {
        let err = Network::from_json("{\"input_dim\": 1,\n  \"layers\": oops}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "message was: {msg}");
    }

    #[test]
    fn ball_membership_and_witness() {
        let ball = Ball::new(array![0.0, 0.0], 1.0, Norm::LInf, None).unwrap();
        assert!(ball.contains(&array![0.5, -0.5]));
        assert!(!ball.contains(&array![1.5, 0.0]));
        assert!(ball.contains(&array![1.0, 1.0]));

        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let good = Ball::new(array![2.0, 1.0], 1.0, Norm::LInf, Some(array![2.0, 0.0])).unwrap();
        good.validate_witness(&net, &spec).unwrap();
        let bad = Ball::new(array![2.0, 1.0], 1.0, Norm::LInf, Some(array![2.0, 0.5])).unwrap();
        assert!(bad.validate_witness(&net, &spec).is_err());
    }

    #[test]
    fn norm_values() {
        let v = array![3.0, -4.0];
        assert_eq!(Norm::L1.norm(&v), 7.0);
        assert_eq!(Norm::L2.norm(&v), 5.0);
        assert_eq!(Norm::LInf.norm(&v), 4.0);
        assert_eq!(Norm::parse("inf").unwrap(), Norm::LInf);
        assert!(Norm::parse("3").is_err());
    }
}
