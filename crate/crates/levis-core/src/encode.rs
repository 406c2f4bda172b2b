//! Shared big-M LP encoding of the ReLU layers.
//!
//! Pre-activation variables are eliminated: each hidden neuron contributes
//! rows over its input block (the x or k columns for layer 0, the previous
//! post-activation block otherwise), its own post-activation column, and — if
//! it carries a binary — a relaxed indicator column:
//!
//! ```text
//!   ẑ - w·prev            ≥ β            (ẑ ≥ z)
//!   ẑ - w·prev + M_lo·a   ≤ M_lo + β     (ẑ ≤ z + M_lo(1-a))
//!   ẑ - M_hi·a            ≤ 0            (ẑ ≤ M_hi·a)
//! ```
//!
//! A neuron fixed active collapses to the equality `ẑ = w·prev + β` (with
//! `ẑ ≥ 0` enforcing the sign); a neuron fixed inactive pins its ẑ column to
//! zero and, when the interval does not already prove it, adds `w·prev ≤ -β`.

use ndarray::Array1;

use crate::bounds::NeuronBounds;
use crate::lp::{LinearProgram, LpRow, Sense};
use crate::net::{InputBox, Network};

/// How one hidden neuron enters the encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NeuronEnc {
    /// Big-M rows plus a relaxed indicator column.
    Binary,
    FixedActive,
    FixedInactive,
}

/// One branchable ReLU indicator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BinaryVar {
    pub col: usize,
    /// Layer-major flat neuron index.
    pub flat: usize,
}

/// How the network input enters the LP.
pub(crate) enum InputMode<'a> {
    /// Input is a free point in a box: one column per coordinate.
    Point { bbox: &'a InputBox },
    /// Input is `origin + k·phi`: a single scalar column `k`.
    Ray {
        origin: &'a Array1<f64>,
        phi: &'a Array1<f64>,
        k_range: (f64, f64),
    },
}

pub(crate) struct ReluEncoding {
    pub lp: LinearProgram,
    /// Columns of the input block (x coordinates, or the single k column).
    pub input_cols: std::ops::Range<usize>,
    /// Post-activation column ranges, one per hidden layer.
    pub zhat_cols: Vec<std::ops::Range<usize>>,
    pub binaries: Vec<BinaryVar>,
    pub num_cols: usize,
}

impl ReluEncoding {
    /// Margin row `a·f + b ≤ 0` for one specification constraint, expressed
    /// over the last post-activation block.
    pub fn violation_row(&self, net: &Network, a: &Array1<f64>, b: f64) -> LpRow {
        let last = net.layers().last().expect("network has layers");
        let folded = last.weight.t().dot(a);
        let mut coeffs = Array1::zeros(self.num_cols);
        let block = self.zhat_cols.last().expect("at least one hidden layer");
        for (offset, col) in block.clone().enumerate() {
            coeffs[col] = folded[offset];
        }
        LpRow {
            coeffs,
            sense: Sense::Le,
            rhs: -(a.dot(&last.bias) + b),
        }
    }
}

/// Interval-driven directives: a binary for every unstable neuron, fixings
/// for proven-stable ones (or binaries everywhere when `fix_stable` is off).
pub(crate) fn directives_from_bounds(bounds: &NeuronBounds, fix_stable: bool) -> Vec<NeuronEnc> {
    bounds
        .iter_flat()
        .map(|itv| {
            if !fix_stable || itv.unstable() {
                NeuronEnc::Binary
            } else if itv.always_active() {
                NeuronEnc::FixedActive
            } else {
                NeuronEnc::FixedInactive
            }
        })
        .collect()
}

/// Build the relaxed encoding of the first `upto_hidden` hidden layers.
/// `extra_cols` columns are reserved at the end for the caller's objective
/// machinery (epigraph variables); their bounds default to `[0, +inf)`.
pub(crate) fn encode_network(
    net: &Network,
    bounds: &NeuronBounds,
    mode: InputMode<'_>,
    upto_hidden: usize,
    directives: &[NeuronEnc],
    extra_cols: usize,
) -> ReluEncoding {
    let sizes = net.hidden_sizes();
    assert!(upto_hidden <= sizes.len());

    let input_width = match mode {
        InputMode::Point { .. } => net.input_dim(),
        InputMode::Ray { .. } => 1,
    };
    let input_cols = 0..input_width;

    let mut zhat_cols = Vec::with_capacity(upto_hidden);
    let mut next = input_width;
    for &s in &sizes[..upto_hidden] {
        zhat_cols.push(next..next + s);
        next += s;
    }
    let mut binaries = Vec::new();
    for layer in 0..upto_hidden {
        for index in 0..sizes[layer] {
            let flat = net.flat_neuron_index(layer, index);
            if directives[flat] == NeuronEnc::Binary {
                binaries.push(BinaryVar { col: next, flat });
                next += 1;
            }
        }
    }
    let num_cols = next + extra_cols;

    let mut lower = Array1::from_elem(num_cols, f64::NEG_INFINITY);
    let mut upper = Array1::from_elem(num_cols, f64::INFINITY);
    match mode {
        InputMode::Point { bbox } => {
            for j in 0..input_width {
                lower[j] = bbox.lower()[j];
                upper[j] = bbox.upper()[j];
            }
        }
        InputMode::Ray { k_range, .. } => {
            lower[0] = k_range.0;
            upper[0] = k_range.1;
        }
    }
    for b in &binaries {
        lower[b.col] = 0.0;
        upper[b.col] = 1.0;
    }
    for extra in num_cols - extra_cols..num_cols {
        lower[extra] = 0.0;
    }

    let bin_col: std::collections::HashMap<usize, usize> =
        binaries.iter().map(|b| (b.flat, b.col)).collect();

    let mut rows = Vec::new();
    for layer in 0..upto_hidden {
        let w = &net.layers()[layer].weight;
        let beta = &net.layers()[layer].bias;
        for index in 0..sizes[layer] {
            let flat = net.flat_neuron_index(layer, index);
            let itv = bounds.get(layer, index);
            let zhat = zhat_cols[layer].start + index;
            lower[zhat] = 0.0;
            upper[zhat] = itv.hi.max(0.0);

            // `base` holds ẑ - z over the input/previous block; the affine
            // constant of z folds into `rhs_base`.
            let mut base = Array1::zeros(num_cols);
            let mut rhs_base = beta[index];
            base[zhat] = 1.0;
            if layer == 0 {
                match mode {
                    InputMode::Point { .. } => {
                        for j in 0..input_width {
                            base[j] = -w[[index, j]];
                        }
                    }
                    InputMode::Ray { origin, phi, .. } => {
                        let wrow = w.row(index);
                        base[0] = -wrow.dot(phi);
                        rhs_base += wrow.dot(origin);
                    }
                }
            } else {
                for (jprev, col) in zhat_cols[layer - 1].clone().enumerate() {
                    base[col] = -w[[index, jprev]];
                }
            }

            match directives[flat] {
                NeuronEnc::Binary => {
                    let (m_lo, m_hi) = itv.big_m();
                    let acol = bin_col[&flat];
                    rows.push(LpRow {
                        coeffs: base.clone(),
                        sense: Sense::Ge,
                        rhs: rhs_base,
                    });
                    let mut r2 = base.clone();
                    r2[acol] = m_lo;
                    rows.push(LpRow {
                        coeffs: r2,
                        sense: Sense::Le,
                        rhs: m_lo + rhs_base,
                    });
                    let mut r3 = Array1::zeros(num_cols);
                    r3[zhat] = 1.0;
                    r3[acol] = -m_hi;
                    rows.push(LpRow {
                        coeffs: r3,
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                }
                NeuronEnc::FixedActive => {
                    if itv.always_active() {
                        lower[zhat] = itv.lo.max(0.0);
                    }
                    rows.push(LpRow {
                        coeffs: base.clone(),
                        sense: Sense::Eq,
                        rhs: rhs_base,
                    });
                }
                NeuronEnc::FixedInactive => {
                    upper[zhat] = 0.0;
                    if itv.hi > 0.0 {
                        // z <= 0 is not implied by the interval; add it as
                        // w·prev <= -rhs_base.
                        let mut r = base.clone();
                        r[zhat] = 0.0;
                        rows.push(LpRow {
                            coeffs: -r,
                            sense: Sense::Le,
                            rhs: -rhs_base,
                        });
                    }
                }
            }
        }
    }

    let lp = LinearProgram {
        objective: Array1::zeros(num_cols),
        rows,
        lower,
        upper,
    };
    ReluEncoding {
        lp,
        input_cols,
        zhat_cols,
        binaries,
        num_cols,
    }
}

/// Tightened pre-activation bounds: after plain interval propagation, each
/// unstable neuron's range is re-solved as two LPs over the relaxed encoding
/// of the layers before it. Only ever shrinks intervals.
pub(crate) fn lp_tightened_bounds(
    net: &Network,
    bbox: &InputBox,
) -> crate::error::Result<NeuronBounds> {
    use crate::bounds::interval_bounds;
    use crate::lp::solve_lp;

    let mut nb = interval_bounds(net, bbox)?;
    let sizes = net.hidden_sizes();
    for layer in 0..sizes.len() {
        for index in 0..sizes[layer] {
            if !nb.get(layer, index).unstable() {
                continue;
            }
            let directives = directives_from_bounds(&nb, true);
            let enc = encode_network(net, &nb, InputMode::Point { bbox }, layer, &directives, 0);
            // Objective: the neuron's pre-activation over its input block.
            let w = &net.layers()[layer].weight;
            let beta = net.layers()[layer].bias[index];
            let mut obj = Array1::zeros(enc.num_cols);
            if layer == 0 {
                for j in 0..net.input_dim() {
                    obj[j] = w[[index, j]];
                }
            } else {
                for (jprev, col) in enc.zhat_cols[layer - 1].clone().enumerate() {
                    obj[col] = w[[index, jprev]];
                }
            }
            let mut lp = enc.lp;
            lp.objective = obj.clone();
            let lo = match solve_lp(&lp)? {
                crate::lp::LpOutcome::Optimal(s) => s.objective + beta,
                _ => continue,
            };
            lp.objective = -obj;
            let hi = match solve_lp(&lp)? {
                crate::lp::LpOutcome::Optimal(s) => -s.objective + beta,
                _ => continue,
            };
            let cur = nb.get(layer, index);
            let tightened = crate::bounds::NeuronInterval {
                lo: lo.max(cur.lo),
                hi: hi.min(cur.hi),
            };
            if tightened.lo <= tightened.hi {
                nb.set(layer, index, tightened);
            }
        }
    }
    Ok(nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::interval_bounds;
    use crate::fixtures;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn tightened_bounds_shrink_and_stay_sound() {
        let net = fixtures::random_net(21, 2, &[6, 6], 1);
        let bbox = InputBox::symmetric(2, 2.0);
        let ibp = interval_bounds(&net, &bbox).unwrap();
        let tight = lp_tightened_bounds(&net, &bbox).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for layer in 0..2 {
            for j in 0..6 {
                let a = ibp.get(layer, j);
                let b = tight.get(layer, j);
                assert!(b.lo >= a.lo - 1e-9 && b.hi <= a.hi + 1e-9);
            }
        }
        for _ in 0..500 {
            let x = bbox.sample_uniform(&mut rng);
            let trace = net.forward(&x).unwrap();
            for (layer, pre) in trace.pre.iter().enumerate() {
                for (j, &z) in pre.iter().enumerate() {
                    let b = tight.get(layer, j);
                    assert!(z >= b.lo - 1e-6 && z <= b.hi + 1e-6);
                }
            }
        }
    }

    #[test]
    fn violation_row_matches_forward_margin() {
        let net = fixtures::min_net();
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let nb = interval_bounds(&net, &bbox).unwrap();
        let directives = directives_from_bounds(&nb, true);
        let enc = encode_network(&net, &nb, InputMode::Point { bbox: &bbox }, 1, &directives, 0);
        let spec = fixtures::positive_spec(1);
        let row = enc.violation_row(&net, &spec.constraints()[0].a, spec.constraints()[0].b);
        // At x = (2,1): post = (1, 2, 0); margin = f = 1 = coeffs·ẑ - rhs.
        let post = net.forward(&array![2.0, 1.0]).unwrap().post[0].clone();
        let mut acc = 0.0;
        for (offset, col) in enc.zhat_cols[0].clone().enumerate() {
            acc += row.coeffs[col] * post[offset];
        }
        assert!((acc - row.rhs - 1.0).abs() < 1e-12);
    }
}
