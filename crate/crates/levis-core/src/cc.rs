//! Fast approximate-then-exact solver: a complementarity-constrained NLP
//! relaxation of the nearest-adversary problem, neuron phase classification,
//! and a reduced MIP that branches only on the ambiguous (bi-active) set.
//!
//! Each ReLU is rewritten as `z = p − q`, `ẑ = p` with `p, q ≥ 0` and
//! `p·q ≤ ε`. The NLP is solved by an augmented-Lagrangian scheme with
//! projected-gradient inner iterations; neurons then classify by their
//! complementarity pair: clearly active, clearly inactive, or bi-active.
//! Bi-active neurons keep their binaries in a reduced MIP; the others are
//! pinned. A consistency certificate (the reduced optimum's activations agree
//! strictly with the pinnings) gates the result; any failure — NLP
//! non-convergence, infeasible reduction, or a failed certificate — escalates
//! to the full MIP so the returned radius is never unsound.

use std::time::Instant;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LevisError, Result};
use crate::milp::{
    nearest_adversarial, nearest_adversarial_forced, AdversaryQuery, NearestOutcome, SolveStats,
    SolverConfig,
};
use crate::net::{
    ActivationPattern, Ball, HalfSpace, InputBox, Network, Norm, Phase, Specification,
};

/// Default complementarity regularization `p·q ≤ ε_reg`.
pub const DEFAULT_EPS_REG: f64 = 1e-5;
/// Default classification threshold τ.
pub const DEFAULT_TAU: f64 = 1e-6;
/// Inner-iteration budget across all augmented-Lagrangian rounds.
pub const MAX_INNER_ITERATIONS: usize = 10_000;

/// Complementarity variables per hidden neuron, flat layer-major order.
#[derive(Debug, Clone)]
pub struct CCState {
    pub p: Vec<Array1<f64>>,
    pub q: Vec<Array1<f64>>,
    pub eps_reg: f64,
    pub tau: f64,
}

impl CCState {
    pub fn flat_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p
            .iter()
            .zip(self.q.iter())
            .flat_map(|(p, q)| p.iter().copied().zip(q.iter().copied()))
    }

    pub fn neuron_count(&self) -> usize {
        self.p.iter().map(Array1::len).sum()
    }
}

/// Index sets `I₊ / I₋ / I₀` (flat neuron indices); always a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronPhases {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub biactive: Vec<usize>,
}

impl NeuronPhases {
    pub fn len(&self) -> usize {
        self.active.len() + self.inactive.len() + self.biactive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The forced pattern for the reduced MIP: bi-active neurons stay `Free`.
    pub fn to_forced_pattern(&self, n: usize) -> ActivationPattern {
        let mut pat = ActivationPattern::all_free(n);
        for &f in &self.active {
            pat.set(f, Phase::Active);
        }
        for &f in &self.inactive {
            pat.set(f, Phase::Inactive);
        }
        pat
    }
}

/// Thresholded partition of the complementarity pairs: `p > τ ∧ q ≤ τ` is
/// active, `q > τ ∧ p ≤ τ` inactive, anything ambiguous — both small or both
/// large — earns a binary in `I₀`.
pub fn classify_neurons(state: &CCState, tau: f64) -> NeuronPhases {
    let mut phases = NeuronPhases {
        active: Vec::new(),
        inactive: Vec::new(),
        biactive: Vec::new(),
    };
    for (flat, (p, q)) in state.flat_pairs().enumerate() {
        if p > tau && q <= tau {
            phases.active.push(flat);
        } else if q > tau && p <= tau {
            phases.inactive.push(flat);
        } else {
            phases.biactive.push(flat);
        }
    }
    phases
}

/// Result of one NLP solve.
#[derive(Debug, Clone)]
pub struct NlpResult {
    pub candidate: Array1<f64>,
    pub distance: f64,
    pub state: CCState,
    pub converged: bool,
    pub inner_iterations: usize,
}

/// Locally solve `min ‖x − c‖_p` under the CC reformulation, spec violation,
/// and box. Multi-constraint specifications run one solve per constraint;
/// the best candidate is returned. Non-convergence is reported, not fatal.
pub fn solve_cc_nlp(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    eps_reg: f64,
    seed: u64,
) -> Result<NlpResult> {
    let mut best: Option<NlpResult> = None;
    for hs in spec.constraints() {
        let r = solve_cc_nlp_constraint(net, hs, center, norm, bbox, eps_reg, seed)?;
        let better = match &best {
            None => true,
            Some(b) => {
                (r.converged && !b.converged) || (r.converged == b.converged && r.distance < b.distance)
            }
        };
        if better {
            best = Some(r);
        }
    }
    best.ok_or_else(|| LevisError::InvalidSpec("empty specification".into()))
}

struct AlWork {
    x: Array1<f64>,
    p: Vec<Array1<f64>>,
    q: Vec<Array1<f64>>,
}

impl AlWork {
    fn project(&mut self, bbox: &InputBox) {
        for i in 0..self.x.len() {
            self.x[i] = self.x[i].clamp(bbox.lower()[i], bbox.upper()[i]);
        }
        for p in &mut self.p {
            p.mapv_inplace(|v| v.max(0.0));
        }
        for q in &mut self.q {
            q.mapv_inplace(|v| v.max(0.0));
        }
    }
}

fn subgradient_of_norm(v: &Array1<f64>, norm: Norm) -> Array1<f64> {
    match norm {
        Norm::L1 => v.mapv(|t| {
            if t > 0.0 {
                1.0
            } else if t < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        Norm::L2 => {
            let n = Norm::L2.norm(v);
            if n == 0.0 {
                Array1::zeros(v.len())
            } else {
                v / n
            }
        }
        Norm::LInf => {
            let mut g = Array1::zeros(v.len());
            let mut best = (0usize, 0.0f64);
            for (i, t) in v.iter().enumerate() {
                if t.abs() > best.1 {
                    best = (i, t.abs());
                }
            }
            if best.1 > 0.0 {
                g[best.0] = v[best.0].signum();
            }
            g
        }
    }
}

fn solve_cc_nlp_constraint(
    net: &Network,
    hs: &HalfSpace,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    eps_reg: f64,
    seed: u64,
) -> Result<NlpResult> {
    solve_cc_nlp_budgeted(net, hs, center, norm, bbox, eps_reg, seed, MAX_INNER_ITERATIONS)
}

#[allow(clippy::too_many_arguments)]
fn solve_cc_nlp_budgeted(
    net: &Network,
    hs: &HalfSpace,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    eps_reg: f64,
    seed: u64,
    budget: usize,
) -> Result<NlpResult> {
    let hidden = net.hidden_layer_count();
    let sizes = net.hidden_sizes();
    let last = &net.layers()[hidden];
    // Gradient of the margin w.r.t. the last post-activation block.
    let out_grad = last.weight.t().dot(&hs.a);
    let margin_const = hs.a.dot(&last.bias) + hs.b;

    // Seeded start: a small perturbation of the center, complementarity pairs
    // from its exact forward pass (network residuals start at zero).
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = bbox.upper() - bbox.lower();
    let mut x = center.clone();
    for i in 0..x.len() {
        let w = width[i].max(1e-6);
        x[i] = (x[i] + 0.01 * w * rng.gen_range(-1.0..1.0)).clamp(bbox.lower()[i], bbox.upper()[i]);
    }
    let trace = net.forward(&x)?;
    let mut work = AlWork {
        x,
        p: trace.pre.iter().map(|z| z.mapv(|v| v.max(0.0))).collect(),
        q: trace.pre.iter().map(|z| z.mapv(|v| (-v).max(0.0))).collect(),
    };

    let mut lambda: Vec<Array1<f64>> = sizes.iter().map(|&s| Array1::zeros(s)).collect();
    let mut mu = 0.0f64;
    let mut nu: Vec<Array1<f64>> = sizes.iter().map(|&s| Array1::zeros(s)).collect();
    let mut rho = 10.0f64;

    // Network residuals h, margin s, complementarity comp at the current point.
    let residuals = |w: &AlWork| -> (Vec<Array1<f64>>, f64, Vec<Array1<f64>>) {
        let mut h = Vec::with_capacity(hidden);
        let mut prev = w.x.clone();
        for i in 0..hidden {
            let layer = &net.layers()[i];
            let zlin = layer.weight.dot(&prev) + &layer.bias;
            h.push(&w.p[i] - &w.q[i] - &zlin);
            prev = w.p[i].clone();
        }
        let s = out_grad.dot(&w.p[hidden - 1]) + margin_const;
        let comp = (0..hidden)
            .map(|i| (&w.p[i] * &w.q[i]).mapv(|v| v - eps_reg))
            .collect();
        (h, s, comp)
    };

    let al_value = |w: &AlWork, lambda: &[Array1<f64>], mu: f64, nu: &[Array1<f64>], rho: f64| -> f64 {
        let (h, s, comp) = residuals(w);
        let mut val = norm.dist(&w.x, center);
        for i in 0..hidden {
            val += lambda[i].dot(&h[i]) + 0.5 * rho * h[i].dot(&h[i]);
        }
        let t = (mu / rho + s).max(0.0);
        val += 0.5 * rho * (t * t - (mu / rho) * (mu / rho));
        for i in 0..hidden {
            for (k, &c) in comp[i].iter().enumerate() {
                let t = (nu[i][k] / rho + c).max(0.0);
                val += 0.5 * rho * (t * t - (nu[i][k] / rho) * (nu[i][k] / rho));
            }
        }
        val
    };

    let max_res = |h: &[Array1<f64>], s: f64, comp: &[Array1<f64>]| -> f64 {
        let mut r: f64 = s.max(0.0);
        for hi in h {
            r = r.max(hi.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        }
        for c in comp {
            r = r.max(c.iter().fold(0.0f64, |a, v| a.max(*v)));
        }
        r
    };

    let mut inner_total = 0usize;
    let mut converged = false;
    let mut step = 0.1 * width.iter().fold(0.0f64, |a, &v| a.max(v)).max(1e-3);
    let mut prev_res = f64::INFINITY;
    // Exact-forward bookkeeping along the trajectory: the most-violating
    // iterate seen, and the nearest genuinely adversarial one.
    let margin_of = |x: &Array1<f64>| -> Result<f64> { Ok(hs.a.dot(&net.forward(x)?.output) + hs.b) };
    let mut best_margin: (Array1<f64>, f64) = (work.x.clone(), margin_of(&work.x)?);
    let mut best_adv: Option<(Array1<f64>, f64)> = None;
    let mut note_iterate = |x: &Array1<f64>, m: f64, best_margin: &mut (Array1<f64>, f64), best_adv: &mut Option<(Array1<f64>, f64)>| {
        if m < best_margin.1 {
            *best_margin = (x.clone(), m);
        }
        if m <= 0.0 {
            let d = norm.dist(x, center);
            if best_adv.as_ref().map_or(true, |(_, bd)| d < *bd) {
                *best_adv = Some((x.clone(), d));
            }
        }
    };

    // The refinement stage does the precision work; the Lagrangian loop only
    // has to land in the right activation basin.
    let budget = budget.min(MAX_INNER_ITERATIONS);
    'outer: for _round in 0..40 {
        let mut fval = al_value(&work, &lambda, mu, &nu, rho);
        for _ in 0..250 {
            if inner_total >= budget {
                break 'outer;
            }
            inner_total += 1;

            // Gradient of the AL function.
            let (h, s, comp) = residuals(&work);
            let glam: Vec<Array1<f64>> = (0..hidden)
                .map(|i| &lambda[i] + &(h[i].mapv(|v| v * rho)))
                .collect();
            let gmu = (mu + rho * s).max(0.0);
            let gnu: Vec<Array1<f64>> = (0..hidden)
                .map(|i| {
                    Array1::from_iter(
                        comp[i]
                            .iter()
                            .enumerate()
                            .map(|(k, &c)| (nu[i][k] + rho * c).max(0.0)),
                    )
                })
                .collect();

            let mut gx = subgradient_of_norm(&(&work.x - center), norm);
            gx = gx - net.layers()[0].weight.t().dot(&glam[0]);
            let mut gp: Vec<Array1<f64>> = Vec::with_capacity(hidden);
            let mut gq: Vec<Array1<f64>> = Vec::with_capacity(hidden);
            for i in 0..hidden {
                let mut gpi = glam[i].clone();
                if i + 1 < hidden {
                    gpi = gpi - net.layers()[i + 1].weight.t().dot(&glam[i + 1]);
                }
                if i == hidden - 1 {
                    gpi = gpi + &out_grad * gmu;
                }
                gpi = gpi + &(&gnu[i] * &work.q[i]);
                gp.push(gpi);
                gq.push(-&glam[i] + &(&gnu[i] * &work.p[i]));
            }

            // Backtracking projected step.
            let mut accepted = false;
            let mut eta = step;
            for _try in 0..25 {
                let mut cand = AlWork {
                    x: &work.x - &(&gx * eta),
                    p: work
                        .p
                        .iter()
                        .zip(gp.iter())
                        .map(|(p, g)| p - &(g * eta))
                        .collect(),
                    q: work
                        .q
                        .iter()
                        .zip(gq.iter())
                        .map(|(q, g)| q - &(g * eta))
                        .collect(),
                };
                cand.project(bbox);
                let fc = al_value(&cand, &lambda, mu, &nu, rho);
                if fc < fval - 1e-14 {
                    work = cand;
                    fval = fc;
                    step = (eta * 1.5).min(1e3);
                    accepted = true;
                    break;
                }
                eta *= 0.4;
            }
            if !accepted {
                step = (step * 0.4).max(1e-14);
                break;
            }
            if inner_total % 25 == 0 {
                let m = margin_of(&work.x)?;
                note_iterate(&work.x, m, &mut best_margin, &mut best_adv);
            }
        }

        let (h, s, comp) = residuals(&work);
        let res = max_res(&h, s, &comp);
        let m = margin_of(&work.x)?;
        note_iterate(&work.x, m, &mut best_margin, &mut best_adv);
        if res <= 1e-6 {
            converged = true;
            break;
        }
        // Multiplier updates, penalty growth on stagnation.
        for i in 0..hidden {
            lambda[i] = &lambda[i] + &h[i].mapv(|v| v * rho);
            for k in 0..nu[i].len() {
                nu[i][k] = (nu[i][k] + rho * comp[i][k]).max(0.0);
            }
        }
        mu = (mu + rho * s).max(0.0);
        if res > 0.5 * prev_res {
            rho = (rho * 2.0).min(1e8);
        }
        prev_res = res;
    }

    // Feasibility restoration + local refinement. Starting points: the most
    // violating iterate, the nearest adversarial iterate, the final iterate,
    // and the first boundary crossing along the ray through the best iterate
    // (the AL trajectory often stops just short of the boundary). Each start
    // is refined by exact region solves; the nearest adversarial result wins.
    let mut starts: Vec<Array1<f64>> = vec![best_margin.0.clone(), work.x.clone()];
    if let Some((x, _)) = &best_adv {
        starts.insert(0, x.clone());
    }
    if let Some(cross) = ray_crossing(net, hs, center, bbox, &best_margin.0)? {
        starts.insert(0, cross);
    }
    let mut refined: Option<(Array1<f64>, f64)> = None;
    let mut fallback: Option<(Array1<f64>, f64, f64)> = None;
    for s in starts {
        let (x, d, m) = region_walk(net, hs, center, norm, bbox, s)?;
        if m <= 1e-9 {
            if refined.as_ref().map_or(true, |(_, bd)| d < *bd) {
                refined = Some((x, d));
            }
        } else if fallback.as_ref().map_or(true, |(_, _, bm)| m < *bm) {
            fallback = Some((x, d, m));
        }
    }
    let (candidate, distance, converged) = match refined {
        Some((x, d)) => (x, d, true),
        None => {
            let (x, d, m) = fallback.expect("at least one start");
            (x, d, converged && m <= 1e-6)
        }
    };

    // The reported complementarity state comes from the refined point, where
    // kink neurons land exactly on p = q = 0 and route into the bi-active
    // set; the raw subgradient iterate carries ~1e-3 noise that would
    // misclassify exactly those neurons.
    let trace = net.forward(&candidate)?;
    let state = CCState {
        p: trace.pre.iter().map(|z| z.mapv(|v| v.max(0.0))).collect(),
        q: trace.pre.iter().map(|z| z.mapv(|v| (-v).max(0.0))).collect(),
        eps_reg,
        tau: DEFAULT_TAU,
    };

    Ok(NlpResult {
        candidate,
        distance,
        state,
        converged,
        inner_iterations: inner_total,
    })
}

/// Deterministic direction-probe start: ray crossings along the coordinate
/// axes plus seeded random directions, the nearest one refined by the region
/// walk. Complements the Lagrangian starts with global directional coverage.
fn probe_start(
    net: &Network,
    hs: &HalfSpace,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    eps_reg: f64,
    seed: u64,
) -> Result<Option<NlpResult>> {
    let d = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70b3_d591_f0a4_9c1d);
    let mut dirs: Vec<Array1<f64>> = Vec::with_capacity(2 * d + 16);
    for i in 0..d {
        let mut e = Array1::zeros(d);
        e[i] = 1.0;
        dirs.push(e.clone());
        e[i] = -1.0;
        dirs.push(e);
    }
    for _ in 0..16 {
        let v = Array1::from_iter((0..d).map(|_| rng.gen_range(-1.0..1.0) as f64));
        let n = norm.norm(&v);
        if n > 1e-9 {
            dirs.push(v / n);
        }
    }
    let mut best: Option<(Array1<f64>, f64)> = None;
    for dir in dirs {
        let probe = center + &dir;
        if let Some(x) = ray_crossing(net, hs, center, bbox, &probe)? {
            let dist = norm.dist(&x, center);
            if best.as_ref().map_or(true, |(_, b)| dist < *b) {
                best = Some((x, dist));
            }
        }
    }
    let Some((start, _)) = best else {
        return Ok(None);
    };
    let (candidate, distance, margin) = region_walk(net, hs, center, norm, bbox, start)?;
    let trace = net.forward(&candidate)?;
    Ok(Some(NlpResult {
        state: CCState {
            p: trace.pre.iter().map(|z| z.mapv(|v| v.max(0.0))).collect(),
            q: trace.pre.iter().map(|z| z.mapv(|v| (-v).max(0.0))).collect(),
            eps_reg,
            tau: DEFAULT_TAU,
        },
        candidate,
        distance,
        converged: margin <= 1e-9,
        inner_iterations: 0,
    }))
}

/// First sign change of the exact margin along the ray from the center
/// through `probe`, located by a coarse scan plus bisection. `None` when the
/// whole ray segment inside the box stays verified.
fn ray_crossing(
    net: &Network,
    hs: &HalfSpace,
    center: &Array1<f64>,
    bbox: &InputBox,
    probe: &Array1<f64>,
) -> Result<Option<Array1<f64>>> {
    let dir = probe - center;
    let scale = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale <= 0.0 {
        return Ok(None);
    }
    let mut t_exit = f64::INFINITY;
    for i in 0..center.len() {
        if dir[i] > 1e-15 {
            t_exit = t_exit.min((bbox.upper()[i] - center[i]) / dir[i]);
        } else if dir[i] < -1e-15 {
            t_exit = t_exit.min((bbox.lower()[i] - center[i]) / dir[i]);
        }
    }
    if !t_exit.is_finite() || t_exit <= 0.0 {
        return Ok(None);
    }
    let margin_at = |t: f64| -> Result<f64> {
        Ok(hs.a.dot(&net.forward(&(center + &(&dir * t)))?.output) + hs.b)
    };
    let steps = 256;
    let mut lo = 0.0f64;
    let mut hit = None;
    for i in 1..=steps {
        let t = t_exit * i as f64 / steps as f64;
        if margin_at(t)? <= 0.0 {
            hit = Some(t);
            break;
        }
        lo = t;
    }
    let Some(mut hi) = hit else {
        return Ok(None);
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if margin_at(mid)? <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(center + &(&dir * hi)))
}

/// Deterministic local refinement: within the iterate's activation region,
/// either project onto the adversarial set (when the region touches it) or
/// descend the region's affine margin under a locality cap, crossing into the
/// neighboring region. Stops when the point stabilizes or a step cap hits.
fn region_walk(
    net: &Network,
    hs: &HalfSpace,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    mut x: Array1<f64>,
) -> Result<(Array1<f64>, f64, f64)> {
    use crate::lp::{LinearProgram, LpOutcome, LpRow, Sense};

    let margin_of = |x: &Array1<f64>| -> Result<f64> {
        Ok(hs.a.dot(&net.forward(x)?.output) + hs.b)
    };
    for i in 0..x.len() {
        x[i] = x[i].clamp(bbox.lower()[i], bbox.upper()[i]);
    }
    let mut best: Option<(Array1<f64>, f64)> = None;
    let mut last_margin = f64::INFINITY;
    for _step in 0..25 {
        let pattern = net.pattern_at(&x)?;
        let region = crate::milp::region_system(net, &pattern);
        if let Some((d, xp)) =
            crate::milp::region_nearest_point(&region, &hs.a, hs.b, center, norm, bbox)?
        {
            // Adversarial set reachable in this region.
            if best.as_ref().map_or(true, |(_, bd)| d < bd - 1e-12) {
                best = Some((xp.clone(), d));
                x = xp;
                continue;
            }
            break;
        }
        // Walk downhill on the region's affine margin, staying local.
        let dist_now = norm.dist(&x, center).max(1e-6);
        let cap = 2.0 * dist_now + 1e-3;
        let dvar = x.len();
        let m_g = region.out_a.t().dot(&hs.a);
        let mut rows = Vec::with_capacity(region.g.nrows());
        for i in 0..region.g.nrows() {
            rows.push(LpRow {
                coeffs: region.g.row(i).to_owned(),
                sense: Sense::Le,
                rhs: region.h[i],
            });
        }
        let mut lower = Array1::zeros(dvar);
        let mut upper = Array1::zeros(dvar);
        for k in 0..dvar {
            lower[k] = bbox.lower()[k].max(center[k] - cap);
            upper[k] = bbox.upper()[k].min(center[k] + cap);
        }
        let lp = LinearProgram {
            objective: m_g,
            rows,
            lower,
            upper,
        };
        let next = match crate::lp::solve_lp(&lp)? {
            LpOutcome::Optimal(s) => s.x,
            _ => break,
        };
        let m = margin_of(&next)?;
        if m >= last_margin - 1e-12 {
            break;
        }
        last_margin = m;
        x = next;
    }
    match best {
        Some((xp, d)) => {
            let m = margin_of(&xp)?;
            Ok((xp, d, m))
        }
        None => {
            let m = margin_of(&x)?;
            Ok((x.clone(), norm.dist(&x, center), m))
        }
    }
}

/// Outcome of the reduced MIP over a phase partition.
#[derive(Debug)]
pub enum ReducedOutcome {
    Found {
        ball: Ball,
        pattern: ActivationPattern,
        stats: SolveStats,
    },
    /// The restricted problem has no adversary (the fixings cut everything off).
    Infeasible { stats: SolveStats },
    DegenerateCenter { ball: Ball },
}

/// Same branch-and-bound engine with `I₊` pinned active, `I₋` pinned
/// inactive, and binaries only for `I₀`.
pub fn reduced_mip(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    phases: &NeuronPhases,
    config: &SolverConfig,
) -> Result<ReducedOutcome> {
    if phases.len() != net.hidden_neuron_count() {
        return Err(LevisError::InvalidArgument(format!(
            "phase partition covers {} neurons, network has {}",
            phases.len(),
            net.hidden_neuron_count()
        )));
    }
    let forced = phases.to_forced_pattern(net.hidden_neuron_count());
    let mut query = AdversaryQuery::new(net, spec, center.clone(), norm, bbox.clone());
    query.config = config.clone();
    match nearest_adversarial_forced(&query, Some(&forced))? {
        NearestOutcome::Found {
            ball,
            pattern,
            stats,
        } => Ok(ReducedOutcome::Found {
            ball,
            pattern,
            stats,
        }),
        NearestOutcome::NoAdversaryInBox { stats } => Ok(ReducedOutcome::Infeasible { stats }),
        NearestOutcome::DegenerateCenter { ball } => Ok(ReducedOutcome::DegenerateCenter { ball }),
    }
}

/// Hybrid pipeline report. Wall times are in seconds; `r_full` and `gap` are
/// present when auditing (or when every constraint escalated anyway).
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub r_hybrid: Option<f64>,
    pub r_full: Option<f64>,
    pub gap: Option<f64>,
    pub t_nlp: f64,
    pub t_mip: f64,
    pub t_full: Option<f64>,
    pub certificate_ok: bool,
    pub escalated: bool,
}

#[derive(Debug)]
pub enum HybridOutcome {
    Found {
        ball: Ball,
        pattern: ActivationPattern,
    },
    NoAdversaryInBox,
    DegenerateCenter {
        ball: Ball,
    },
}

#[derive(Debug)]
pub struct HybridResult {
    pub outcome: HybridOutcome,
    pub report: GapReport,
}

pub struct HybridOptions {
    pub eps_reg: f64,
    pub tau: f64,
    pub seed: u64,
    pub audit: bool,
    pub solver: SolverConfig,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self {
            eps_reg: DEFAULT_EPS_REG,
            tau: DEFAULT_TAU,
            seed: 0,
            audit: false,
            solver: SolverConfig::default(),
        }
    }
}

/// Strict activation agreement of a witness with the pinned sets: every
/// pinned-active neuron clearly on (`z > 1e-7`), every pinned-inactive neuron
/// clearly off (`z < -1e-7`). A binding pinned constraint fails the
/// certificate on purpose: it is exactly the case where the fixing may have
/// displaced the true optimum.
fn activation_agreement(net: &Network, phases: &NeuronPhases, witness: &Array1<f64>) -> Result<bool> {
    const STRICT: f64 = 1e-7;
    let trace = net.forward(witness)?;
    let z_flat: Vec<f64> = trace.pre.iter().flat_map(|z| z.iter().copied()).collect();
    for &f in &phases.active {
        if z_flat[f] <= STRICT {
            return Ok(false);
        }
    }
    for &f in &phases.inactive {
        if z_flat[f] >= -STRICT {
            return Ok(false);
        }
    }
    Ok(true)
}

struct Best {
    value: f64,
    witness: Array1<f64>,
    certificate_ok: bool,
}

/// NLP → classify → reduced MIP, with escalation to the full MIP on any
/// failure (non-convergence, infeasible reduction, or failed certificate).
/// With `audit` the full MIP also runs for the gap report.
pub fn hybrid_nearest_adversarial(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    opts: &HybridOptions,
) -> Result<HybridResult> {
    let eval = spec.eval(&net.forward(center)?.output)?;
    if !eval.verified {
        let ball = Ball::new(center.clone(), 0.0, norm, Some(center.clone()))?;
        return Ok(HybridResult {
            outcome: HybridOutcome::DegenerateCenter { ball },
            report: GapReport {
                r_hybrid: Some(0.0),
                r_full: Some(0.0),
                gap: Some(0.0),
                t_nlp: 0.0,
                t_mip: 0.0,
                t_full: None,
                certificate_ok: true,
                escalated: false,
            },
        });
    }

    let mut t_nlp = 0.0f64;
    let mut t_mip = 0.0f64;
    let mut escalated = false;
    let mut best: Option<Best> = None;

    for (j, hs) in spec.constraints().iter().enumerate() {
        let single = Specification::new(vec![hs.clone()])?;

        // Multi-start NLP plus a direction probe: the certificate below
        // demands that every converged start lands on the same local distance
        // before trusting the phases. The Lagrangian starts use a reduced
        // working budget; the refinement stage supplies the precision.
        let t0 = Instant::now();
        let seeds = [opts.seed, opts.seed ^ 0x9e37_79b9_7f4a_7c15];
        let mut runs = Vec::with_capacity(seeds.len() + 1);
        for s in seeds {
            runs.push(solve_cc_nlp_budgeted(
                net, hs, center, norm, bbox, opts.eps_reg, s, 2_000,
            )?);
        }
        if let Some(probe) = probe_start(net, hs, center, norm, bbox, opts.eps_reg, opts.seed)? {
            runs.push(probe);
        }
        t_nlp += t0.elapsed().as_secs_f64();
        let best_run = runs
            .iter()
            .filter(|r| r.converged)
            .min_by(|a, b| a.distance.total_cmp(&b.distance));
        let starts_agree = best_run.map_or(false, |best| {
            runs.iter().filter(|r| r.converged).all(|r| {
                (r.distance - best.distance).abs() <= 1e-6 * best.distance.max(1.0)
            })
        });

        // Incumbent sharing: the best distance so far caps this tree.
        let mut reduced_result: Option<(f64, Array1<f64>)> = None;
        let mut cert = false;
        if let (Some(nlp), true) = (best_run, starts_agree) {
            let phases = classify_neurons(&nlp.state, opts.tau);
            let t0 = Instant::now();
            let outcome = reduced_mip(net, &single, center, norm, bbox, &phases, &opts.solver)?;
            t_mip += t0.elapsed().as_secs_f64();
            match outcome {
                ReducedOutcome::Found { ball, .. } => {
                    let w = ball.witness.clone().expect("solver balls carry witnesses");
                    cert = activation_agreement(net, &phases, &w)?;
                    if cert {
                        // Interior sampling backstop: a certified ball must
                        // survive a seeded violation search.
                        let probe = crate::oracle::soundness_sample(
                            net,
                            &single,
                            &ball,
                            2048,
                            opts.seed ^ (j as u64).wrapping_mul(0x9e37_79b9),
                        )?;
                        cert = probe.violation_count == 0;
                    }
                    if cert {
                        reduced_result = Some((ball.radius, w));
                    }
                }
                ReducedOutcome::Infeasible { .. } => {}
                ReducedOutcome::DegenerateCenter { .. } => unreachable!("center verified above"),
            }
        }

        let (value, witness, cert_ok) = if let Some((r, w)) = reduced_result {
            (Some(r), Some(w), true)
        } else {
            escalated = true;
            let t0 = Instant::now();
            let mut query = AdversaryQuery::new(net, &single, center.clone(), norm, bbox.clone());
            query.config = opts.solver.clone();
            let out = nearest_adversarial(&query)?;
            t_mip += t0.elapsed().as_secs_f64();
            match out {
                NearestOutcome::Found { ball, .. } => {
                    (Some(ball.radius), ball.witness, cert)
                }
                NearestOutcome::NoAdversaryInBox { .. } => (None, None, cert),
                NearestOutcome::DegenerateCenter { .. } => unreachable!("center verified above"),
            }
        };

        if let (Some(v), Some(w)) = (value, witness) {
            if best.as_ref().map_or(true, |b| v < b.value - 1e-12) {
                best = Some(Best {
                    value: v,
                    witness: w,
                    certificate_ok: cert_ok,
                });
            }
        }
    }

    // Independent full solve for the audit gap.
    let (r_full, t_full) = if opts.audit {
        let t0 = Instant::now();
        let mut query = AdversaryQuery::new(net, spec, center.clone(), norm, bbox.clone());
        query.config = opts.solver.clone();
        let r = match nearest_adversarial(&query)? {
            NearestOutcome::Found { ball, .. } => Some(ball.radius),
            _ => None,
        };
        (r, Some(t0.elapsed().as_secs_f64()))
    } else {
        (None, None)
    };

    match best {
        None => Ok(HybridResult {
            outcome: HybridOutcome::NoAdversaryInBox,
            report: GapReport {
                r_hybrid: None,
                r_full,
                gap: None,
                t_nlp,
                t_mip,
                t_full,
                certificate_ok: true,
                escalated,
            },
        }),
        Some(b) => {
            let witness =
                crate::milp::repair_witness(net, spec, center, b.witness)?;
            let pattern = net.pattern_at(&witness)?;
            let ball = Ball::new(center.clone(), b.value, norm, Some(witness))?;
            let gap = r_full.map(|rf| (b.value - rf).abs());
            Ok(HybridResult {
                outcome: HybridOutcome::Found { ball, pattern },
                report: GapReport {
                    r_hybrid: Some(b.value),
                    r_full,
                    gap,
                    t_nlp,
                    t_mip,
                    t_full,
                    certificate_ok: b.certificate_ok,
                    escalated,
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;

    #[test]
    fn classify_examples() {
        let state = CCState {
            p: vec![array![3.0, 0.0, 1e-9]],
            q: vec![array![0.0, 2.5, 1e-9]],
            eps_reg: DEFAULT_EPS_REG,
            tau: DEFAULT_TAU,
        };
        let phases = classify_neurons(&state, 1e-6);
        assert_eq!(phases.active, vec![0]);
        assert_eq!(phases.inactive, vec![1]);
        assert_eq!(phases.biactive, vec![2]);
        assert_eq!(phases.len(), state.neuron_count());
    }

    #[test]
    fn nlp_identity_net_reaches_the_boundary() {
        let net = fixtures::identity_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-3.0], array![3.0]).unwrap();
        let r = solve_cc_nlp(&net, &spec, &array![1.0], Norm::LInf, &bbox, DEFAULT_EPS_REG, 1)
            .unwrap();
        assert!((r.distance - 1.0).abs() <= 1e-4, "distance {}", r.distance);
        assert!(r.candidate[0].abs() <= 1e-4, "candidate {}", r.candidate[0]);
    }

    #[test]
    fn nlp_min_net_close_to_exact() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let r = solve_cc_nlp(
            &net,
            &spec,
            &array![2.0, 1.0],
            Norm::LInf,
            &bbox,
            DEFAULT_EPS_REG,
            3,
        )
        .unwrap();
        assert!(
            r.distance >= 1.0 - 1e-9 && r.distance <= 1.01,
            "distance {}",
            r.distance
        );
    }

    #[test]
    fn nlp_zero_regularization_keeps_pairs_nonnegative() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let r = solve_cc_nlp(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, 0.0, 5).unwrap();
        for (p, q) in r.state.flat_pairs() {
            assert!(p >= 0.0 && q >= 0.0);
        }
    }

    #[test]
    fn reduced_mip_with_true_phases_matches_full() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let c = array![2.0, 1.0];
        // True optimal pattern at witness (2, 0): neuron x1-x2 active, x1
        // active, -x1 inactive; no binaries remain.
        let phases = NeuronPhases {
            active: vec![0, 1],
            inactive: vec![2],
            biactive: vec![],
        };
        match reduced_mip(&net, &spec, &c, Norm::LInf, &bbox, &phases, &SolverConfig::default())
            .unwrap()
        {
            ReducedOutcome::Found { ball, .. } => {
                assert!((ball.radius - 1.0).abs() < 1e-7, "r = {}", ball.radius)
            }
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn reduced_mip_all_biactive_equals_full_mip() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let c = array![2.0, 1.0];
        let phases = NeuronPhases {
            active: vec![],
            inactive: vec![],
            biactive: vec![0, 1, 2],
        };
        match reduced_mip(&net, &spec, &c, Norm::LInf, &bbox, &phases, &SolverConfig::default())
            .unwrap()
        {
            ReducedOutcome::Found { ball, .. } => {
                assert!((ball.radius - 1.0).abs() < 1e-7)
            }
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn wrong_phase_fixing_never_undercuts_the_optimum() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let c = array![2.0, 1.0];
        // Swap the x1 passthrough pair: force x1 <= 0 side.
        let phases = NeuronPhases {
            active: vec![0, 2],
            inactive: vec![1],
            biactive: vec![],
        };
        match reduced_mip(&net, &spec, &c, Norm::LInf, &bbox, &phases, &SolverConfig::default())
            .unwrap()
        {
            ReducedOutcome::Found { ball, .. } => {
                assert!(ball.radius >= 1.0 - 1e-6, "restriction undercut: {}", ball.radius)
            }
            ReducedOutcome::Infeasible { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hybrid_identity_net_gap_zero() {
        let net = fixtures::identity_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-3.0], array![3.0]).unwrap();
        let opts = HybridOptions {
            audit: true,
            seed: 2,
            ..Default::default()
        };
        let res =
            hybrid_nearest_adversarial(&net, &spec, &array![1.0], Norm::LInf, &bbox, &opts).unwrap();
        let gap = res.report.gap.expect("audited");
        assert!(gap <= 1e-6, "gap {gap}");
    }

    #[test]
    fn hybrid_min_net_certified_and_tight() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let opts = HybridOptions {
            audit: true,
            seed: 4,
            ..Default::default()
        };
        let res = hybrid_nearest_adversarial(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, &opts)
            .unwrap();
        let rep = &res.report;
        let r_full = rep.r_full.unwrap();
        let r_hyb = rep.r_hybrid.unwrap();
        assert!(r_hyb >= r_full - 1e-6, "restriction violated");
        assert!(rep.gap.unwrap() <= 0.01, "gap {}", rep.gap.unwrap());
        match res.outcome {
            HybridOutcome::Found { ball, .. } => ball.validate_witness(&net, &spec).unwrap(),
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn hybrid_restriction_property_on_random_fixture() {
        let net = fixtures::random_net(77, 2, &[16], 1);
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::symmetric(2, 2.0);
        let center = array![0.3, -0.1];
        if !spec
            .eval(&net.forward(&center).unwrap().output)
            .unwrap()
            .verified
        {
            return;
        }
        let opts = HybridOptions {
            audit: true,
            seed: 9,
            ..Default::default()
        };
        let res = hybrid_nearest_adversarial(&net, &spec, &center, Norm::LInf, &bbox, &opts).unwrap();
        if let (Some(rh), Some(rf)) = (res.report.r_hybrid, res.report.r_full) {
            assert!(rh >= rf - 1e-6, "hybrid {rh} undercuts full {rf}");
        }
    }
}
