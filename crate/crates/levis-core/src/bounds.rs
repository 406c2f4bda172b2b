//! Pre-activation interval bounds over an input box and the Big-M constants
//! derived from them.
//!
//! Plain interval propagation is the default. An optional LP tightening pass
//! re-solves each unstable neuron's pre-activation range over the relaxed
//! encoding of the preceding layers; it can only shrink intervals and never
//! affects soundness.

use ndarray::Array1;

use crate::error::Result;
use crate::net::{InputBox, Network};

/// Interval `[lo, hi]` on one hidden neuron's pre-activation over the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronInterval {
    pub lo: f64,
    pub hi: f64,
}

impl NeuronInterval {
    /// `lo >= 0`: the ReLU is the identity everywhere on the box.
    pub fn always_active(&self) -> bool {
        self.lo >= 0.0
    }

    /// `hi <= 0`: the ReLU outputs zero everywhere on the box.
    pub fn always_inactive(&self) -> bool {
        self.hi <= 0.0
    }

    pub fn unstable(&self) -> bool {
        !self.always_active() && !self.always_inactive()
    }

    /// Big-M pair `(M_lo, M_hi) = ((-lo)+, (hi)+)` for the standard encoding
    /// `ẑ ≥ z`, `ẑ ≤ z + M_lo(1-a)`, `ẑ ≤ M_hi·a`, `ẑ ≥ 0`.
    pub fn big_m(&self) -> (f64, f64) {
        ((-self.lo).max(0.0), self.hi.max(0.0))
    }
}

/// Sound pre-activation bounds for every hidden neuron, layer-major order.
#[derive(Debug, Clone)]
pub struct NeuronBounds {
    per_layer: Vec<Vec<NeuronInterval>>,
}

impl NeuronBounds {
    pub fn layers(&self) -> &[Vec<NeuronInterval>] {
        &self.per_layer
    }

    pub fn layer(&self, i: usize) -> &[NeuronInterval] {
        &self.per_layer[i]
    }

    pub fn get(&self, layer: usize, index: usize) -> NeuronInterval {
        self.per_layer[layer][index]
    }

    pub fn set(&mut self, layer: usize, index: usize, interval: NeuronInterval) {
        self.per_layer[layer][index] = interval;
    }

    /// Flat iteration in the same layer-major order as
    /// [`Network::flat_neuron_index`].
    pub fn iter_flat(&self) -> impl Iterator<Item = NeuronInterval> + '_ {
        self.per_layer.iter().flatten().copied()
    }

    pub fn unstable_count(&self) -> usize {
        self.iter_flat().filter(|b| b.unstable()).count()
    }
}

/// Layer-by-layer interval arithmetic over the box.
///
/// Affine maps propagate via the center/radius split `W c ± |W| r`; ReLU
/// clamps the post-activation interval to `[max(lo,0), max(hi,0)]`.
pub fn interval_bounds(net: &Network, bbox: &InputBox) -> Result<NeuronBounds> {
    if bbox.dim() != net.input_dim() {
        return Err(crate::error::LevisError::DimensionMismatch(format!(
            "box has {} dims, network expects {}",
            bbox.dim(),
            net.input_dim()
        )));
    }
    let mut center = (bbox.lower() + bbox.upper()) * 0.5;
    let mut radius = (bbox.upper() - bbox.lower()) * 0.5;
    let mut per_layer = Vec::with_capacity(net.hidden_layer_count());
    for layer in &net.layers()[..net.hidden_layer_count()] {
        let mid = layer.weight.dot(&center) + &layer.bias;
        let rad = layer.weight.mapv(f64::abs).dot(&radius);
        let intervals: Vec<NeuronInterval> = mid
            .iter()
            .zip(rad.iter())
            .map(|(&m, &r)| NeuronInterval { lo: m - r, hi: m + r })
            .collect();
        center = Array1::from_iter(intervals.iter().map(|b| (b.lo.max(0.0) + b.hi.max(0.0)) * 0.5));
        radius = Array1::from_iter(intervals.iter().map(|b| (b.hi.max(0.0) - b.lo.max(0.0)) * 0.5));
        per_layer.push(intervals);
    }
    Ok(NeuronBounds { per_layer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_net_bounds() {
        let net = fixtures::identity_net();
        let bbox = InputBox::new(array![-1.0], array![1.0]).unwrap();
        let b = interval_bounds(&net, &bbox).unwrap();
        assert_eq!(b.get(0, 0), NeuronInterval { lo: -1.0, hi: 1.0 });
        assert_eq!(b.get(0, 1), NeuronInterval { lo: -1.0, hi: 1.0 });
    }

    #[test]
    fn min_net_bounds_and_stability_flags() {
        let net = fixtures::min_net();
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let b = interval_bounds(&net, &bbox).unwrap();
        // Neuron 0 computes x1 - x2.
        assert_eq!(b.get(0, 0), NeuronInterval { lo: -4.0, hi: 4.0 });
        assert!(b.get(0, 0).unstable());
        // Neuron 1 computes x1, always active over the positive box.
        assert_eq!(b.get(0, 1), NeuronInterval { lo: 0.0, hi: 4.0 });
        assert!(b.get(0, 1).always_active());
        // Neuron 2 computes -x1, always inactive.
        assert!(b.get(0, 2).always_inactive());
    }

    #[test]
    fn big_m_examples() {
        assert_eq!(NeuronInterval { lo: -4.0, hi: 4.0 }.big_m(), (4.0, 4.0));
        assert_eq!(NeuronInterval { lo: 0.0, hi: 4.0 }.big_m(), (0.0, 4.0));
        let inactive = NeuronInterval { lo: -3.0, hi: -1.0 };
        assert!(inactive.always_inactive());
        assert_eq!(inactive.big_m(), (3.0, 0.0));
    }

    #[test]
    fn bounds_are_sound_under_sampling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (net, bbox) in [
            (fixtures::min_net(), InputBox::new(array![-3.0, -1.0], array![2.0, 5.0]).unwrap()),
            (fixtures::random_net(4, 3, &[8, 6], 2), InputBox::symmetric(3, 2.5)),
            (fixtures::box_net(1.0, 3.0, 0.5, 3.5), InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap()),
        ] {
            let bounds = interval_bounds(&net, &bbox).unwrap();
            for _ in 0..1000 {
                let x = bbox.sample_uniform(&mut rng);
                let trace = net.forward(&x).unwrap();
                for (layer, pre) in trace.pre.iter().enumerate() {
                    for (j, &z) in pre.iter().enumerate() {
                        let b = bounds.get(layer, j);
                        assert!(
                            z >= b.lo - 1e-9 && z <= b.hi + 1e-9,
                            "layer {layer} neuron {j}: z={z} outside [{}, {}]",
                            b.lo,
                            b.hi
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn intervals_never_inverted_on_random_nets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for seed in 0..20 {
            let net = fixtures::random_net(seed, 2, &[9, 5], 1);
            let lo = rng.gen_range(-3.0..0.0);
            let hi = lo + rng.gen_range(0.1..4.0);
            let bbox = InputBox::new(array![lo, lo], array![hi, hi]).unwrap();
            for b in interval_bounds(&net, &bbox).unwrap().iter_flat() {
                assert!(b.lo <= b.hi);
            }
        }
    }
}
