//! Independent ground-truth machinery: brute-force grid / ray / sampling
//! oracles, exhaustive fixed-pattern enumeration, and the Lipschitz
//! lower-bound baseline.
//!
//! The grid and ray oracles use nothing but exact forward evaluation, which
//! is what makes them fit to validate the exact solvers.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::interval_bounds;
use crate::error::{LevisError, Result};
use crate::milp::{region_nearest_point, region_system};
use crate::net::{ActivationPattern, Ball, InputBox, Network, Norm, Phase, Specification};

/// Summary of one oracle run; violation witnesses are re-checkable inputs.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub method: String,
    pub distance: Option<f64>,
    pub step: Option<f64>,
    pub samples: usize,
    pub violation_count: usize,
    /// At most the first 16 violating inputs.
    pub witnesses: Vec<Vec<f64>>,
    pub seed: Option<u64>,
}

const WITNESS_CAP: usize = 16;

fn forward_batch(net: &Network, points: &Array2<f64>) -> Array2<f64> {
    let mut cur = points.clone();
    let hidden = net.hidden_layer_count();
    for layer in &net.layers()[..hidden] {
        cur = cur.dot(&layer.weight.t()) + &layer.bias;
        cur.mapv_inplace(|v| v.max(0.0));
    }
    let last = &net.layers()[hidden];
    cur.dot(&last.weight.t()) + &last.bias
}

fn adversarial_mask(spec: &Specification, outputs: &Array2<f64>) -> Vec<bool> {
    let n = outputs.nrows();
    let mut mask = vec![false; n];
    for hs in spec.constraints() {
        let margins = outputs.dot(&hs.a);
        for i in 0..n {
            if margins[i] + hs.b <= 0.0 {
                mask[i] = true;
            }
        }
    }
    mask
}

/// Exhaustive scan of the grid `lower + i·step` over the box; returns the
/// nearest adversarial grid point under the p-norm, or `None` if the grid is
/// entirely verified.
pub fn grid_oracle_nearest(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    step: f64,
) -> Result<Option<(f64, Array1<f64>)>> {
    let d = net.input_dim();
    if d > 3 {
        return Err(LevisError::InvalidArgument(
            "grid oracle supports at most 3 input dimensions".into(),
        ));
    }
    if step <= 0.0 {
        return Err(LevisError::InvalidArgument("grid step must be positive".into()));
    }
    let counts: Vec<usize> = (0..d)
        .map(|i| ((bbox.upper()[i] - bbox.lower()[i]) / step + 1e-9).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();

    let chunk = 1 << 15;
    let mut best: Option<(f64, Array1<f64>)> = None;
    let mut buf = Vec::with_capacity(chunk * d);
    let mut pts = Vec::with_capacity(chunk);
    let flush = |buf: &mut Vec<f64>, pts: &mut Vec<Array1<f64>>, best: &mut Option<(f64, Array1<f64>)>| {
        if pts.is_empty() {
            return;
        }
        let mat = Array2::from_shape_vec((pts.len(), d), std::mem::take(buf)).expect("chunk shape");
        let out = forward_batch(net, &mat);
        let mask = adversarial_mask(spec, &out);
        for (i, hit) in mask.iter().enumerate() {
            if *hit {
                let dist = norm.dist(&pts[i], center);
                if best.as_ref().map_or(true, |(b, _)| dist < *b - 1e-15) {
                    *best = Some((dist, pts[i].clone()));
                }
            }
        }
        pts.clear();
        buf.clear();
    };

    for flat in 0..total {
        let mut rest = flat;
        let mut p = Array1::zeros(d);
        for i in 0..d {
            let idx = rest % counts[i];
            rest /= counts[i];
            p[i] = (bbox.lower()[i] + idx as f64 * step).min(bbox.upper()[i]);
        }
        buf.extend(p.iter());
        pts.push(p);
        if pts.len() == chunk {
            flush(&mut buf, &mut pts, &mut best);
        }
    }
    flush(&mut buf, &mut pts, &mut best);
    Ok(best)
}

/// Scan `k = step, 2·step, …` along `center + k·φ` up to and including the
/// box exit scale; returns the first adversarial scale.
pub fn ray_oracle(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    phi: &Array1<f64>,
    bbox: &InputBox,
    step: f64,
) -> Result<Option<f64>> {
    if Norm::LInf.norm(phi) <= 0.0 {
        return Err(LevisError::InvalidArgument("ray direction is zero".into()));
    }
    if step <= 0.0 {
        return Err(LevisError::InvalidArgument("ray step must be positive".into()));
    }
    let d = center.len();
    let mut k_exit = f64::INFINITY;
    for i in 0..d {
        if phi[i] > 1e-15 {
            k_exit = k_exit.min((bbox.upper()[i] - center[i]) / phi[i]);
        } else if phi[i] < -1e-15 {
            k_exit = k_exit.min((bbox.lower()[i] - center[i]) / phi[i]);
        } else if center[i] < bbox.lower()[i] || center[i] > bbox.upper()[i] {
            return Ok(None);
        }
    }
    if !k_exit.is_finite() || k_exit < step {
        return Ok(None);
    }
    let steps = (k_exit / step).floor() as usize;
    let chunk = 4096;
    let mut i = 1usize;
    let mut done = false;
    while !done {
        let mut ks = Vec::with_capacity(chunk);
        while ks.len() < chunk && i <= steps {
            ks.push(i as f64 * step);
            i += 1;
        }
        if i > steps && !ks.last().map_or(false, |&k| k >= k_exit) {
            // Include the exact box exit point in the final chunk.
            ks.push(k_exit);
            done = true;
        }
        if ks.is_empty() {
            return Ok(None);
        }
        let mut buf = Vec::with_capacity(ks.len() * d);
        for &k in &ks {
            buf.extend((center + &(phi * k)).iter());
        }
        let mat = Array2::from_shape_vec((ks.len(), d), buf).expect("chunk shape");
        let out = forward_batch(net, &mat);
        let mask = adversarial_mask(spec, &out);
        if let Some(pos) = mask.iter().position(|m| *m) {
            return Ok(Some(ks[pos]));
        }
    }
    Ok(None)
}

/// Draw `n` points uniformly from the ball shrunk by a relative 1e-6 and
/// count specification violations. The verified set is open, hence the
/// shrink; a sound ball reports zero violations.
pub fn soundness_sample(
    net: &Network,
    spec: &Specification,
    ball: &Ball,
    n: usize,
    seed: u64,
) -> Result<OracleReport> {
    let d = ball.center.len();
    let r = ball.radius * (1.0 - 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violation_count = 0usize;
    let mut witnesses = Vec::new();
    let chunk = 8192;
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(chunk);
        let mut buf = Vec::with_capacity(take * d);
        for _ in 0..take {
            let p = sample_in_ball(&ball.center, r, ball.norm, &mut rng)?;
            buf.extend(p.iter());
        }
        let mat = Array2::from_shape_vec((take, d), buf).expect("chunk shape");
        let out = forward_batch(net, &mat);
        for (i, hit) in adversarial_mask(spec, &out).iter().enumerate() {
            if *hit {
                violation_count += 1;
                if witnesses.len() < WITNESS_CAP {
                    witnesses.push(mat.row(i).to_vec());
                }
            }
        }
        remaining -= take;
    }
    Ok(OracleReport {
        method: "soundness-sample".into(),
        distance: Some(ball.radius),
        step: None,
        samples: n,
        violation_count,
        witnesses,
        seed: Some(seed),
    })
}

fn sample_in_ball<R: Rng>(center: &Array1<f64>, r: f64, norm: Norm, rng: &mut R) -> Result<Array1<f64>> {
    let d = center.len();
    if r == 0.0 {
        return Ok(center.clone());
    }
    match norm {
        Norm::LInf => Ok(Array1::from_iter(
            center.iter().map(|&c| c + rng.gen_range(-r..=r)),
        )),
        Norm::L1 | Norm::L2 => {
            for _ in 0..10_000 {
                let v = Array1::from_iter((0..d).map(|_| rng.gen_range(-r..=r)));
                if norm.norm(&v) <= r {
                    return Ok(center + &v);
                }
            }
            Err(LevisError::Numerical(
                "rejection sampling failed; dimension too high for this oracle".into(),
            ))
        }
    }
}

/// For networks with few unstable neurons: the exact optimum as the minimum
/// over every fixed-pattern region solve. Independent of the branch-and-bound
/// search path; the reference for pattern-enumeration equivalence checks.
pub fn exhaustive_nearest(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
) -> Result<Option<(f64, Array1<f64>)>> {
    let bounds = interval_bounds(net, bbox)?;
    let flats: Vec<usize> = bounds
        .iter_flat()
        .enumerate()
        .filter(|(_, b)| b.unstable())
        .map(|(i, _)| i)
        .collect();
    if flats.len() > 22 {
        return Err(LevisError::InvalidArgument(format!(
            "{} unstable neurons is too many to enumerate",
            flats.len()
        )));
    }
    let mut base = ActivationPattern::all_free(net.hidden_neuron_count());
    for (flat, itv) in bounds.iter_flat().enumerate() {
        if itv.always_active() {
            base.set(flat, Phase::Active);
        } else if itv.always_inactive() {
            base.set(flat, Phase::Inactive);
        }
    }
    let mut best: Option<(f64, Array1<f64>)> = None;
    for bits in 0..(1usize << flats.len()) {
        let mut pattern = base.clone();
        for (pos, &flat) in flats.iter().enumerate() {
            pattern.set(
                flat,
                if bits >> pos & 1 == 1 {
                    Phase::Active
                } else {
                    Phase::Inactive
                },
            );
        }
        let region = region_system(net, &pattern);
        for hs in spec.constraints() {
            if let Some((dist, x)) =
                region_nearest_point(&region, &hs.a, hs.b, center, norm, bbox)?
            {
                if best.as_ref().map_or(true, |(b, _)| dist < *b - 1e-12) {
                    best = Some((dist, x));
                }
            }
        }
    }
    Ok(best)
}

/// Lipschitz lower-bound baseline: `r_LB = min_j margin_j(c) / (‖a_j‖_* · L_f)`
/// with `L_f = Π_i ‖W^i‖_p` (induced operator norms).
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub r_lb: f64,
    pub lipschitz_constant: f64,
    pub margins: Vec<f64>,
    pub per_constraint: Vec<f64>,
}

pub fn lipschitz_radius(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
) -> Result<LipschitzReport> {
    let lipschitz_constant: f64 = net
        .layers()
        .iter()
        .map(|l| operator_norm(&l.weight, norm))
        .product();
    let eval = spec.eval(&net.forward(center)?.output)?;
    let dual = norm.dual();
    let mut per_constraint = Vec::with_capacity(spec.len());
    let mut r_lb = f64::INFINITY;
    for (j, hs) in spec.constraints().iter().enumerate() {
        let lj = dual.norm(&hs.a) * lipschitz_constant;
        let rj = if lj > 0.0 {
            (eval.margins[j] / lj).max(0.0)
        } else {
            f64::INFINITY
        };
        per_constraint.push(rj);
        r_lb = r_lb.min(rj);
    }
    Ok(LipschitzReport {
        r_lb,
        lipschitz_constant,
        margins: eval.margins,
        per_constraint,
    })
}

/// Induced matrix norm: max row sum (∞), max column sum (1), or the spectral
/// norm via power iteration (2; 500 iterations, 1e-8 relative tolerance,
/// all-ones start).
pub fn operator_norm(w: &Array2<f64>, norm: Norm) -> f64 {
    match norm {
        Norm::LInf => w
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        Norm::L1 => w
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        Norm::L2 => {
            let n = w.ncols();
            let mut v = Array1::from_elem(n, (n as f64).sqrt().recip());
            let mut lambda = 0.0_f64;
            for _ in 0..500 {
                let y = w.t().dot(&w.dot(&v));
                let ny = Norm::L2.norm(&y);
                if ny == 0.0 {
                    return 0.0;
                }
                let next = v.dot(&y);
                v = y / ny;
                if (next - lambda).abs() <= 1e-8 * next.abs().max(1e-30) {
                    lambda = next;
                    break;
                }
                lambda = next;
            }
            lambda.max(0.0).sqrt()
        }
    }
}
