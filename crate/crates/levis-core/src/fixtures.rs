//! Small hand-built and seeded random networks used throughout the test
//! suites and the README examples.

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{HalfSpace, Layer, Network, Specification};

/// 1-D identity: one hidden layer `(relu(x), relu(-x))`, output `h1 - h2 = x`.
pub fn identity_net() -> Network {
    Network::new(
        1,
        vec![
            Layer::new(array![[1.0], [-1.0]], array![0.0, 0.0]).unwrap(),
            Layer::new(array![[1.0, -1.0]], array![0.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// 2-D min: `f(x) = min(x1, x2)` via `x1 - relu(x1 - x2)` with an exact
/// passthrough of `x1`.
pub fn min_net() -> Network {
    Network::new(
        2,
        vec![
            Layer::new(
                array![[1.0, -1.0], [1.0, 0.0], [-1.0, 0.0]],
                array![0.0, 0.0, 0.0],
            )
            .unwrap(),
            Layer::new(array![[-1.0, 1.0, -1.0]], array![0.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// 2-D strip: `f(x) = min(x1 - a, b - x1)`, positive exactly on `a < x1 < b`.
pub fn strip_net(a: f64, b: f64) -> Network {
    Network::new(
        2,
        vec![
            Layer::new(
                array![[2.0, 0.0], [1.0, 0.0], [-1.0, 0.0]],
                array![-a - b, -a, a],
            )
            .unwrap(),
            Layer::new(array![[-1.0, 1.0, -1.0]], array![0.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// 2-D rectangle: `f(x) = min(x1-a1, b1-x1, x2-a2, b2-x2)`, positive exactly
/// on the open rectangle `(a1,b1) × (a2,b2)`. The verifiable region is convex
/// and its entire boundary is adversarial, which makes this the fixture of
/// choice for the boundary-touching ball checks.
pub fn box_net(a1: f64, b1: f64, a2: f64, b2: f64) -> Network {
    // Layer 1: A = relu(2x1-a1-b1), X± = relu(±x1), B = relu(2x2-a2-b2), Y± = relu(±x2)
    // so that m1 = (X+ - X-) - a1 - A = min(x1-a1, b1-x1) and likewise m2.
    let w1 = array![
        [2.0, 0.0],
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 2.0],
        [0.0, 1.0],
        [0.0, -1.0],
    ];
    let b1v = array![-a1 - b1, 0.0, 0.0, -a2 - b2, 0.0, 0.0];
    // Layer 2 over (A, X+, X-, B, Y+, Y-):
    //   C  = relu(m1 - m2), M± = relu(±m1)
    let m1 = [-1.0, 1.0, -1.0, 0.0, 0.0, 0.0];
    let m2 = [0.0, 0.0, 0.0, -1.0, 1.0, -1.0];
    let mut rows = Array2::zeros((3, 6));
    for k in 0..6 {
        rows[[0, k]] = m1[k] - m2[k];
        rows[[1, k]] = m1[k];
        rows[[2, k]] = -m1[k];
    }
    let b2v = array![a2 - a1, -a1, a1];
    // Output: f = (M+ - M-) - C = min(m1, m2).
    Network::new(
        2,
        vec![
            Layer::new(w1, b1v).unwrap(),
            Layer::new(rows, b2v).unwrap(),
            Layer::new(array![[-1.0, 1.0, -1.0]], array![0.0]).unwrap(),
        ],
    )
    .unwrap()
}

/// Specification `f_k(x) > 0` for every output coordinate.
pub fn positive_spec(output_dim: usize) -> Specification {
    Specification::new(
        (0..output_dim)
            .map(|k| {
                let mut a = Array1::zeros(output_dim);
                a[k] = 1.0;
                HalfSpace { a, b: 0.0 }
            })
            .collect(),
    )
    .unwrap()
}

/// Seeded random dense ReLU network, weights and biases uniform in
/// `±1/sqrt(fan_in)`.
pub fn random_net(seed: u64, input_dim: usize, hidden: &[usize], output_dim: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(output_dim);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-scale..scale));
            let bias = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-scale..scale));
            Layer::new(weight, bias).unwrap()
        })
        .collect();
    Network::new(input_dim, layers).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn strip_net_computes_min_of_margins() {
        let net = strip_net(1.0, 3.0);
        for &(x1, x2) in &[(0.5, 7.0), (1.0, -2.0), (2.0, 0.0), (2.9, 4.0), (3.5, 1.0)] {
            let out = net.forward(&array![x1, x2]).unwrap().output[0];
            let expect = (x1 - 1.0_f64).min(3.0 - x1);
            assert!((out - expect).abs() < 1e-12, "at ({x1},{x2}): {out} vs {expect}");
        }
    }

    #[test]
    fn box_net_computes_min_of_four_margins() {
        let net = box_net(1.0, 3.0, 0.5, 3.5);
        for &(x1, x2) in &[
            (2.0, 2.0),
            (0.5, 2.0),
            (3.2, 1.0),
            (2.0, 0.1),
            (2.0, 3.9),
            (1.0, 0.5),
            (-1.0, -1.0),
        ] {
            let out = net.forward(&array![x1, x2]).unwrap().output[0];
            let expect = (x1 - 1.0_f64).min(3.0 - x1).min(x2 - 0.5).min(3.5 - x2);
            assert!((out - expect).abs() < 1e-12, "at ({x1},{x2}): {out} vs {expect}");
        }
    }
}
