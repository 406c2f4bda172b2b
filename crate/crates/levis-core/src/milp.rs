//! Exact nearest- and directional-adversarial points via branch-and-bound on
//! ReLU activation binaries over the big-M encoding.
//!
//! Multi-constraint specifications are decomposed per constraint: one MIP per
//! half-space, with the best distance so far shared as the incumbent across
//! the remaining trees. For p ∈ {1, ∞} (and the ray problem) the node LP is
//! exact once every indicator is integral; for p = 2 the ℓ∞ epigraph value
//! serves as the node lower bound (‖v‖₂ ≥ ‖v‖∞) and fully fixed leaves are
//! solved exactly as small Euclidean projections onto the region polytope.
//! Exploration is best-first on the lower bound; branching picks the most
//! fractional relaxed indicator with ties broken by lowest (layer, index).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bounds::{interval_bounds, NeuronBounds};
use crate::encode::{encode_network, BinaryVar, InputMode, NeuronEnc, ReluEncoding};
use crate::error::{LevisError, Result};
use crate::lp::{LinearProgram, LpOutcome, LpRow, Sense};
use crate::net::{ActivationPattern, Ball, InputBox, Network, Norm, Phase, Specification};
use crate::qp::nearest_point_qp;

/// Strict positivity floor standing in for `k > 0` in the ray problem.
pub const KAPPA_MIN: f64 = 1e-9;

/// Branch-and-bound knobs. Defaults match the assertions used in the test
/// suite; loosen `max_nodes` for larger networks.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Prune nodes whose lower bound is within this of the incumbent.
    pub opt_tol: f64,
    /// Integrality tolerance on relaxed indicators.
    pub int_tol: f64,
    /// Hard cap on explored nodes; exceeding it is an error, never a wrong answer.
    pub max_nodes: usize,
    /// LP solves scheduled speculatively in parallel. 1 = fully serial; any
    /// value returns the same result, speculation only wastes solves.
    pub jobs: usize,
    /// Pre-fix indicators of neurons that interval bounds prove stable.
    pub fix_stable: bool,
    /// Run the LP bound-tightening pass before encoding (point queries).
    pub lp_tighten: bool,
    /// Exact region solve on the relaxation point's pattern at every node;
    /// supplies early incumbents.
    pub dive: bool,
    /// Record every solved node's (pattern, bound) for property tests.
    pub record_nodes: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            opt_tol: 1e-7,
            int_tol: 1e-6,
            max_nodes: 400_000,
            jobs: 1,
            fix_stable: true,
            lp_tighten: false,
            dive: true,
            record_nodes: false,
        }
    }
}

/// One open node: a partial phase assignment plus the best known lower bound
/// on any adversary distance realizing it.
#[derive(Debug, Clone)]
pub struct BnBNode {
    pub pattern: ActivationPattern,
    pub bound: f64,
    pub depth: usize,
    seq: u64,
    solved: Option<NodeSol>,
}

#[derive(Debug, Clone)]
struct NodeSol {
    input: Array1<f64>,
    binvals: Vec<f64>,
}

/// A solved node snapshot, kept when `record_nodes` is on.
#[derive(Debug, Clone)]
pub struct RecordedNode {
    pub pattern: ActivationPattern,
    pub bound: f64,
}

/// Search counters accumulated across the per-constraint trees.
#[derive(Debug, Clone)]
pub struct SolveStats {
    pub nodes: usize,
    pub expanded: usize,
    pub lp_solves: usize,
    pub incumbent_updates: usize,
    /// Largest solved bound among expanded nodes; at termination it never
    /// exceeds the optimum by more than the optimality tolerance.
    pub max_expanded_bound: f64,
    pub wall: Duration,
    pub recorded: Vec<RecordedNode>,
}

impl Default for SolveStats {
    fn default() -> Self {
        Self {
            nodes: 0,
            expanded: 0,
            lp_solves: 0,
            incumbent_updates: 0,
            max_expanded_bound: f64::NEG_INFINITY,
            wall: Duration::ZERO,
            recorded: Vec::new(),
        }
    }
}

/// One nearest- or directional-adversary query.
#[derive(Debug, Clone)]
pub struct AdversaryQuery<'a> {
    pub net: &'a Network,
    pub spec: &'a Specification,
    pub center: Array1<f64>,
    pub norm: Norm,
    pub bbox: InputBox,
    pub config: SolverConfig,
}

impl<'a> AdversaryQuery<'a> {
    pub fn new(
        net: &'a Network,
        spec: &'a Specification,
        center: Array1<f64>,
        norm: Norm,
        bbox: InputBox,
    ) -> Self {
        Self {
            net,
            spec,
            center,
            norm,
            bbox,
            config: SolverConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.center.len() != self.net.input_dim() {
            return Err(LevisError::DimensionMismatch(format!(
                "center has {} entries, network expects {}",
                self.center.len(),
                self.net.input_dim()
            )));
        }
        if self.bbox.dim() != self.net.input_dim() {
            return Err(LevisError::DimensionMismatch(
                "box dimension does not match network input".into(),
            ));
        }
        if !self.bbox.contains(&self.center) {
            return Err(LevisError::InvalidQuery("center outside box".into()));
        }
        Ok(())
    }
}

/// Search-direction geometry: `φ(θ) = d·cos θ + q·sin θ` with
/// `d = (c − b)/‖c − b‖∞` and `q` the component of `ξ` orthogonal to `d`.
#[derive(Debug, Clone)]
pub struct Direction {
    pub anchor: Array1<f64>,
    pub theta_deg: f64,
    pub xi: Array1<f64>,
    pub d: Array1<f64>,
    pub q: Array1<f64>,
    pub phi: Array1<f64>,
}

impl Direction {
    pub fn new(
        center: &Array1<f64>,
        anchor: Array1<f64>,
        theta_deg: f64,
        xi: Array1<f64>,
    ) -> Result<Self> {
        if anchor.len() != center.len() || xi.len() != center.len() {
            return Err(LevisError::DimensionMismatch(
                "direction anchor/xi dimension mismatch".into(),
            ));
        }
        let diff = center - &anchor;
        let scale = Norm::LInf.norm(&diff);
        if scale <= 0.0 {
            return Err(LevisError::InvalidArgument(
                "direction anchor coincides with center".into(),
            ));
        }
        let d = diff / scale;
        let q = &xi - &(&d * (xi.dot(&d) / d.dot(&d)));
        let th = theta_deg.to_radians();
        let phi = &d * th.cos() + &q * th.sin();
        Ok(Self {
            anchor,
            theta_deg,
            xi,
            d,
            q,
            phi,
        })
    }

    /// Draws `ξ ~ N(0, 1)^d` from the caller's seeded generator.
    pub fn sample<R: Rng>(
        center: &Array1<f64>,
        anchor: Array1<f64>,
        theta_deg: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let xi = Array1::from_iter((0..center.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Self::new(center, anchor, theta_deg, xi)
    }

    /// A direction whose ray degenerates to a point (φ ≈ 0) can never reach
    /// an adversary.
    pub fn is_degenerate(&self) -> bool {
        Norm::LInf.norm(&self.phi) < 1e-12
    }
}

#[derive(Debug)]
pub enum NearestOutcome {
    Found {
        ball: Ball,
        pattern: ActivationPattern,
        stats: SolveStats,
    },
    /// Every per-constraint subproblem was infeasible: the whole box is verified.
    NoAdversaryInBox { stats: SolveStats },
    /// The center itself is adversarial; the ball degenerates to radius zero.
    DegenerateCenter { ball: Ball },
}

#[derive(Debug)]
pub enum DirectionalOutcome {
    Found {
        point: Array1<f64>,
        k: f64,
        distance: f64,
        stats: SolveStats,
    },
    /// The ray leaves the box (at scale `k_exit`) before any violation.
    NoAdversaryOnRay {
        k_exit: Option<f64>,
        stats: SolveStats,
    },
}

// ---------------------------------------------------------------------------
// Fixed-pattern region machinery
// ---------------------------------------------------------------------------

/// The polytope `{x : G x ≤ h}` of inputs realizing a full activation
/// pattern, together with the affine output map valid on it.
#[derive(Debug, Clone)]
pub(crate) struct RegionSystem {
    pub g: Array2<f64>,
    pub h: Array1<f64>,
    pub out_a: Array2<f64>,
    pub out_v: Array1<f64>,
}

pub(crate) fn region_system(net: &Network, pattern: &ActivationPattern) -> RegionSystem {
    let d = net.input_dim();
    let n = net.hidden_neuron_count();
    let mut g = Array2::zeros((n, d));
    let mut h = Array1::zeros(n);
    let mut a = Array2::eye(d);
    let mut v = Array1::zeros(d);
    let mut flat = 0usize;
    for layer in &net.layers()[..net.hidden_layer_count()] {
        let mut za = layer.weight.dot(&a);
        let mut zv = layer.weight.dot(&v) + &layer.bias;
        for j in 0..layer.out_dim() {
            match pattern.get(flat + j) {
                Phase::Active => {
                    // z >= 0  <=>  -g·x <= r
                    g.row_mut(flat + j).assign(&(-&za.row(j)));
                    h[flat + j] = zv[j];
                }
                Phase::Inactive => {
                    g.row_mut(flat + j).assign(&za.row(j));
                    h[flat + j] = -zv[j];
                    za.row_mut(j).fill(0.0);
                    zv[j] = 0.0;
                }
                Phase::Free => panic!("region_system requires a fully fixed pattern"),
            }
        }
        flat += layer.out_dim();
        a = za;
        v = zv;
    }
    let last = &net.layers()[net.hidden_layer_count()];
    RegionSystem {
        g,
        h,
        out_a: last.weight.dot(&a),
        out_v: last.weight.dot(&v) + &last.bias,
    }
}

/// `min ‖x − center‖_p` over `region ∩ box ∩ {a·f(x) + b ≤ 0}`.
/// `None` when that set is empty.
pub(crate) fn region_nearest_point(
    region: &RegionSystem,
    a: &Array1<f64>,
    b: f64,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
) -> Result<Option<(f64, Array1<f64>)>> {
    let d = center.len();
    let n_extra = match norm {
        Norm::L1 => d,
        _ => 1,
    };
    let ncols = d + n_extra;
    let margin_g = region.out_a.t().dot(a);
    let margin_h = -(a.dot(&region.out_v) + b);

    let mut rows = Vec::with_capacity(region.g.nrows() + 1 + 2 * d);
    for i in 0..region.g.nrows() {
        let mut c = Array1::zeros(ncols);
        c.slice_mut(ndarray::s![..d]).assign(&region.g.row(i));
        rows.push(LpRow {
            coeffs: c,
            sense: Sense::Le,
            rhs: region.h[i],
        });
    }
    {
        let mut c = Array1::zeros(ncols);
        c.slice_mut(ndarray::s![..d]).assign(&margin_g);
        rows.push(LpRow {
            coeffs: c,
            sense: Sense::Le,
            rhs: margin_h,
        });
    }
    let mut objective = Array1::zeros(ncols);
    for k in 0..d {
        let t_col = match norm {
            Norm::L1 => d + k,
            _ => d,
        };
        // t >= x_k - c_k  and  t >= c_k - x_k
        let mut r1 = Array1::zeros(ncols);
        r1[t_col] = 1.0;
        r1[k] = -1.0;
        rows.push(LpRow {
            coeffs: r1,
            sense: Sense::Ge,
            rhs: -center[k],
        });
        let mut r2 = Array1::zeros(ncols);
        r2[t_col] = 1.0;
        r2[k] = 1.0;
        rows.push(LpRow {
            coeffs: r2,
            sense: Sense::Ge,
            rhs: center[k],
        });
    }
    match norm {
        Norm::L1 => {
            for k in 0..d {
                objective[d + k] = 1.0;
            }
        }
        _ => objective[d] = 1.0,
    }
    let mut lower = Array1::from_elem(ncols, 0.0);
    let mut upper = Array1::from_elem(ncols, f64::INFINITY);
    for k in 0..d {
        lower[k] = bbox.lower()[k];
        upper[k] = bbox.upper()[k];
    }
    let lp = LinearProgram {
        objective,
        rows,
        lower,
        upper,
    };
    let sol = match crate::lp::solve_lp(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => return Ok(None),
        LpOutcome::Unbounded => {
            return Err(LevisError::Numerical(
                "region subproblem reported unbounded".into(),
            ))
        }
    };
    let x_lp = Array1::from_iter(sol.x.iter().take(d).copied());
    match norm {
        Norm::L1 | Norm::LInf => Ok(Some((sol.objective, x_lp))),
        Norm::L2 => {
            // Exact Euclidean projection onto the same polytope, box included.
            let nrows = region.g.nrows() + 1 + 2 * d;
            let mut g_all = Array2::zeros((nrows, d));
            let mut h_all = Array1::zeros(nrows);
            for i in 0..region.g.nrows() {
                g_all.row_mut(i).assign(&region.g.row(i));
                h_all[i] = region.h[i];
            }
            g_all.row_mut(region.g.nrows()).assign(&margin_g);
            h_all[region.g.nrows()] = margin_h;
            for k in 0..d {
                let base = region.g.nrows() + 1 + 2 * k;
                g_all[[base, k]] = 1.0;
                h_all[base] = bbox.upper()[k];
                g_all[[base + 1, k]] = -1.0;
                h_all[base + 1] = -bbox.lower()[k];
            }
            let x = nearest_point_qp(center, &g_all, &h_all, &x_lp)?;
            let dist = Norm::L2.dist(&x, center);
            Ok(Some((dist, x)))
        }
    }
}

/// `min k` over `{k ∈ k_range : origin + kφ ∈ region, margin ≤ 0}` by direct
/// interval intersection (everything is affine in the scalar k).
pub(crate) fn region_nearest_ray(
    region: &RegionSystem,
    a: &Array1<f64>,
    b: f64,
    origin: &Array1<f64>,
    phi: &Array1<f64>,
    k_range: (f64, f64),
) -> Option<(f64, Array1<f64>)> {
    let (mut lo, mut hi) = k_range;
    let mut clip = |alpha: f64, beta: f64| -> bool {
        // alpha·k <= beta
        if alpha.abs() <= 1e-12 {
            beta >= -1e-9
        } else if alpha > 0.0 {
            hi = hi.min(beta / alpha);
            true
        } else {
            lo = lo.max(beta / alpha);
            true
        }
    };
    for i in 0..region.g.nrows() {
        let row = region.g.row(i);
        if !clip(row.dot(phi), region.h[i] - row.dot(origin)) {
            return None;
        }
    }
    let margin_g = region.out_a.t().dot(a);
    let margin_h = -(a.dot(&region.out_v) + b);
    if !clip(margin_g.dot(phi), margin_h - margin_g.dot(origin)) {
        return None;
    }
    if lo > hi + 1e-12 {
        return None;
    }
    let k = lo.min(hi);
    Some((k, origin + &(phi * k)))
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Incumbent {
    /// Objective units: the p-distance for point queries, the ray scale k for
    /// directional ones.
    value: f64,
    point: Array1<f64>,
}

enum QueryMode<'a> {
    Point {
        center: &'a Array1<f64>,
        bbox: &'a InputBox,
    },
    Ray {
        origin: &'a Array1<f64>,
        phi: &'a Array1<f64>,
        k_range: (f64, f64),
    },
}

struct ConstraintTree<'a> {
    net: &'a Network,
    norm: Norm,
    mode: QueryMode<'a>,
    spec_a: &'a Array1<f64>,
    spec_b: f64,
    lp: LinearProgram,
    binaries: Vec<BinaryVar>,
    input_cols: std::ops::Range<usize>,
    template: ActivationPattern,
    config: &'a SolverConfig,
}

struct HeapEntry {
    bound: f64,
    seq: u64,
    node: BnBNode,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Reversed: BinaryHeap is a max-heap, we want lowest bound first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<'a> ConstraintTree<'a> {
    fn set_binary_bounds(&self, lp: &mut LinearProgram, pattern: &ActivationPattern) {
        for b in &self.binaries {
            let (lo, hi) = match pattern.get(b.flat) {
                Phase::Free => (0.0, 1.0),
                Phase::Active => (1.0, 1.0),
                Phase::Inactive => (0.0, 0.0),
            };
            lp.lower[b.col] = lo;
            lp.upper[b.col] = hi;
        }
    }

    fn solve_node(
        &self,
        scratch: &mut LinearProgram,
        pattern: &ActivationPattern,
    ) -> Result<Option<(f64, NodeSol)>> {
        self.set_binary_bounds(scratch, pattern);
        match crate::lp::solve_lp(scratch)? {
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(LevisError::Numerical(
                "node relaxation reported unbounded".into(),
            )),
            LpOutcome::Optimal(s) => {
                let input = Array1::from_iter(self.input_cols.clone().map(|c| s.x[c]));
                let binvals = self.binaries.iter().map(|b| s.x[b.col]).collect();
                Ok(Some((s.objective, NodeSol { input, binvals })))
            }
        }
    }

    fn point_of(&self, sol: &NodeSol) -> Array1<f64> {
        match &self.mode {
            QueryMode::Point { .. } => sol.input.clone(),
            QueryMode::Ray { origin, phi, .. } => *origin + &(*phi * sol.input[0]),
        }
    }

    /// Exact solve over one fully fixed pattern's region; used for dives,
    /// integral nodes, and leaves.
    fn region_exact(&self, pattern: &ActivationPattern) -> Result<Option<(f64, Array1<f64>)>> {
        let region = region_system(self.net, pattern);
        match &self.mode {
            QueryMode::Point { center, bbox } => {
                region_nearest_point(&region, self.spec_a, self.spec_b, center, self.norm, bbox)
            }
            QueryMode::Ray {
                origin,
                phi,
                k_range,
            } => Ok(region_nearest_ray(
                &region, self.spec_a, self.spec_b, origin, phi, *k_range,
            )
            .map(|(k, _)| {
                let point = *origin + &(*phi * k);
                (k, point)
            })),
        }
    }

    /// Full pattern with remaining Free slots filled from rounded indicator
    /// values (only binaries can still be Free).
    fn complete_pattern(&self, pattern: &ActivationPattern, binvals: &[f64]) -> ActivationPattern {
        let mut full = pattern.clone();
        for (b, &v) in self.binaries.iter().zip(binvals) {
            if full.get(b.flat) == Phase::Free {
                full.set(
                    b.flat,
                    if v >= 0.5 { Phase::Active } else { Phase::Inactive },
                );
            }
        }
        full
    }

    fn run(&self, start: Option<Incumbent>, stats: &mut SolveStats) -> Result<Option<Incumbent>> {
        let t0 = Instant::now();
        let mut incumbent = start;
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut scratch = self.lp.clone();

        let root = BnBNode {
            pattern: self.template.clone(),
            bound: f64::NEG_INFINITY,
            depth: 0,
            seq,
            solved: None,
        };
        heap.push(HeapEntry {
            bound: root.bound,
            seq: root.seq,
            node: root,
        });
        seq += 1;

        let cutoff = |inc: &Option<Incumbent>, tol: f64| inc.as_ref().map_or(f64::INFINITY, |i| i.value - tol);

        while let Some(entry) = heap.pop() {
            let mut node = entry.node;
            stats.nodes += 1;
            if stats.nodes > self.config.max_nodes {
                return Err(LevisError::NodeLimit(self.config.max_nodes));
            }
            if node.bound >= cutoff(&incumbent, self.config.opt_tol) {
                // Best-first: everything left is at least as bad.
                break;
            }

            if node.solved.is_none() {
                // Speculatively solve a batch when a worker pool is allowed.
                if self.config.jobs > 1 {
                    let mut batch = vec![node];
                    while batch.len() < self.config.jobs {
                        match heap.pop() {
                            Some(e) => batch.push(e.node),
                            None => break,
                        }
                    }
                    use rayon::prelude::*;
                    let results: Vec<_> = batch
                        .par_iter()
                        .map_init(
                            || self.lp.clone(),
                            |lp, nd| {
                                if nd.solved.is_some() {
                                    Ok(None)
                                } else {
                                    self.solve_node(lp, &nd.pattern).map(Some)
                                }
                            },
                        )
                        .collect::<Result<Vec<_>>>()?;
                    for (mut nd, res) in batch.into_iter().zip(results) {
                        match res {
                            None => {
                                // already solved; push back untouched
                            }
                            Some(None) => {
                                stats.lp_solves += 1;
                                continue; // infeasible: drop
                            }
                            Some(Some((obj, sol))) => {
                                stats.lp_solves += 1;
                                nd.bound = nd.bound.max(obj);
                                nd.solved = Some(sol);
                                if self.config.record_nodes {
                                    stats.recorded.push(RecordedNode {
                                        pattern: nd.pattern.clone(),
                                        bound: nd.bound,
                                    });
                                }
                            }
                        }
                        heap.push(HeapEntry {
                            bound: nd.bound,
                            seq: nd.seq,
                            node: nd,
                        });
                    }
                    stats.nodes -= 1; // batch nodes get re-counted on re-pop
                    continue;
                }
                stats.lp_solves += 1;
                match self.solve_node(&mut scratch, &node.pattern)? {
                    None => continue, // infeasible
                    Some((obj, sol)) => {
                        node.bound = node.bound.max(obj);
                        node.solved = Some(sol);
                        if self.config.record_nodes {
                            stats.recorded.push(RecordedNode {
                                pattern: node.pattern.clone(),
                                bound: node.bound,
                            });
                        }
                    }
                }
                if node.bound >= cutoff(&incumbent, self.config.opt_tol) {
                    continue;
                }
                // Keep pops ordered by solved bounds.
                if let Some(top) = heap.peek() {
                    if top.bound < node.bound - 1e-12 {
                        heap.push(HeapEntry {
                            bound: node.bound,
                            seq: node.seq,
                            node,
                        });
                        continue;
                    }
                }
            } else if node.bound >= cutoff(&incumbent, self.config.opt_tol) {
                break;
            }

            // Expand.
            let sol = node.solved.clone().expect("expanded nodes are solved");
            stats.expanded += 1;
            stats.max_expanded_bound = stats.max_expanded_bound.max(node.bound);

            let mut update = |cand: Option<(f64, Array1<f64>)>, inc: &mut Option<Incumbent>| {
                if let Some((v, p)) = cand {
                    if inc.as_ref().map_or(true, |i| v < i.value - 1e-12) {
                        *inc = Some(Incumbent { value: v, point: p });
                        stats.incumbent_updates += 1;
                    }
                }
            };

            if self.config.dive {
                let at = self.point_of(&sol);
                if let Ok(mut pat) = self.net.pattern_at(&at) {
                    // Fixed phases (stable or caller-forced) stay authoritative;
                    // the dive must not step outside the restricted problem.
                    for flat in 0..pat.len() {
                        let t = self.template.get(flat);
                        if t != Phase::Free {
                            pat.set(flat, t);
                        }
                    }
                    update(self.region_exact(&pat)?, &mut incumbent);
                }
            }

            let free: Vec<(usize, usize, f64)> = self
                .binaries
                .iter()
                .enumerate()
                .filter(|(_, b)| node.pattern.get(b.flat) == Phase::Free)
                .map(|(i, b)| (i, b.flat, sol.binvals[i]))
                .collect();

            if free.is_empty() {
                // Leaf: the pattern is fully fixed; solve its region exactly.
                update(self.region_exact(&node.pattern)?, &mut incumbent);
                continue;
            }

            let integral = free
                .iter()
                .all(|(_, _, v)| v.min(1.0 - v).abs() <= self.config.int_tol || (v - v.round()).abs() <= self.config.int_tol);
            if integral && self.norm != Norm::L2 {
                // The relaxation optimum is MIP-feasible: this subtree is done.
                let full = self.complete_pattern(&node.pattern, &sol.binvals);
                let exact = self.region_exact(&full)?;
                match exact {
                    Some(_) => update(exact, &mut incumbent),
                    None => update(Some((node.bound, self.point_of(&sol))), &mut incumbent),
                }
                continue;
            }

            // Branch on the most fractional indicator, ties by lowest flat index.
            let (bin_idx, flat, val) = free
                .iter()
                .copied()
                .max_by(|a, b| {
                    let fa = a.2.clamp(0.0, 1.0);
                    let fb = b.2.clamp(0.0, 1.0);
                    let (fa, fb) = (fa.min(1.0 - fa), fb.min(1.0 - fb));
                    fa.total_cmp(&fb).then_with(|| b.1.cmp(&a.1))
                })
                .expect("free set is non-empty");
            let _ = bin_idx;
            let phases = if val >= 0.5 {
                [Phase::Active, Phase::Inactive]
            } else {
                [Phase::Inactive, Phase::Active]
            };
            for ph in phases {
                let mut pat = node.pattern.clone();
                pat.set(flat, ph);
                let child = BnBNode {
                    pattern: pat,
                    bound: node.bound,
                    depth: node.depth + 1,
                    seq,
                    solved: None,
                };
                heap.push(HeapEntry {
                    bound: child.bound,
                    seq: child.seq,
                    node: child,
                });
                seq += 1;
            }
        }

        stats.wall += t0.elapsed();
        Ok(incumbent)
    }
}

/// Encoding directives plus the matching root pattern. A phase forced by the
/// caller wins over interval stability; only unforced unstable neurons get
/// indicators.
fn plan_encoding(
    net: &Network,
    bounds: &NeuronBounds,
    fix_stable: bool,
    forced: Option<&ActivationPattern>,
) -> (Vec<NeuronEnc>, ActivationPattern) {
    let n = net.hidden_neuron_count();
    let mut directives = Vec::with_capacity(n);
    let mut template = ActivationPattern::all_free(n);
    for (flat, itv) in bounds.iter_flat().enumerate() {
        let forced_phase = forced.map(|p| p.get(flat)).unwrap_or(Phase::Free);
        let enc = match forced_phase {
            Phase::Active => NeuronEnc::FixedActive,
            Phase::Inactive => NeuronEnc::FixedInactive,
            Phase::Free => {
                if !fix_stable || itv.unstable() {
                    NeuronEnc::Binary
                } else if itv.always_active() {
                    NeuronEnc::FixedActive
                } else {
                    NeuronEnc::FixedInactive
                }
            }
        };
        match enc {
            NeuronEnc::FixedActive => template.set(flat, Phase::Active),
            NeuronEnc::FixedInactive => template.set(flat, Phase::Inactive),
            NeuronEnc::Binary => {}
        }
        directives.push(enc);
    }
    (directives, template)
}

fn install_point_objective(enc: &mut ReluEncoding, norm: Norm, center: &Array1<f64>) {
    let d = center.len();
    let base = enc.num_cols
        - match norm {
            Norm::L1 => d,
            _ => 1,
        };
    let mut objective = Array1::zeros(enc.num_cols);
    for k in 0..d {
        let t_col = match norm {
            Norm::L1 => base + k,
            _ => base,
        };
        let mut r1 = Array1::zeros(enc.num_cols);
        r1[t_col] = 1.0;
        r1[k] = -1.0;
        enc.lp.rows.push(LpRow {
            coeffs: r1,
            sense: Sense::Ge,
            rhs: -center[k],
        });
        let mut r2 = Array1::zeros(enc.num_cols);
        r2[t_col] = 1.0;
        r2[k] = 1.0;
        enc.lp.rows.push(LpRow {
            coeffs: r2,
            sense: Sense::Ge,
            rhs: center[k],
        });
        objective[t_col] = 1.0;
    }
    enc.lp.objective = objective;
}

/// Radial nudge so the reported witness is adversarial under exact forward
/// evaluation, not just within LP tolerance of the boundary. Stays within
/// 1e-8 relative distance of the optimum.
pub(crate) fn repair_witness(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    witness: Array1<f64>,
) -> Result<Array1<f64>> {
    let adversarial = |w: &Array1<f64>| -> Result<bool> {
        Ok(!spec.eval(&net.forward(w)?.output)?.verified)
    };
    if adversarial(&witness)? {
        return Ok(witness);
    }
    let dir = &witness - center;
    for t in [1e-12, 1e-11, 1e-10, 1e-9, 3e-9, 1e-8] {
        let cand = center + &(&dir * (1.0 + t));
        if adversarial(&cand)? {
            return Ok(cand);
        }
    }
    Ok(witness)
}

/// Nearest adversarial point: global minimum of `‖x − c‖_p` over the box,
/// subject to the network constraints and violation of some specification
/// constraint.
pub fn nearest_adversarial(query: &AdversaryQuery) -> Result<NearestOutcome> {
    nearest_adversarial_forced(query, None)
}

/// As [`nearest_adversarial`] but with caller-forced phases: any non-`Free`
/// entry pins that neuron's sign constraints instead of giving it a binary.
/// This is the reduced-MIP entry point.
pub(crate) fn nearest_adversarial_forced(
    query: &AdversaryQuery,
    forced: Option<&ActivationPattern>,
) -> Result<NearestOutcome> {
    query.validate()?;
    let eval = query.spec.eval(&query.net.forward(&query.center)?.output)?;
    if !eval.verified {
        let ball = Ball::new(
            query.center.clone(),
            0.0,
            query.norm,
            Some(query.center.clone()),
        )?;
        return Ok(NearestOutcome::DegenerateCenter { ball });
    }

    let bounds = if query.config.lp_tighten {
        crate::encode::lp_tightened_bounds(query.net, &query.bbox)?
    } else {
        interval_bounds(query.net, &query.bbox)?
    };
    let d = query.net.input_dim();
    let extra = match query.norm {
        Norm::L1 => d,
        _ => 1,
    };
    let (directives, template) = plan_encoding(query.net, &bounds, query.config.fix_stable, forced);
    let mut enc = encode_network(
        query.net,
        &bounds,
        InputMode::Point { bbox: &query.bbox },
        query.net.hidden_layer_count(),
        &directives,
        extra,
    );
    install_point_objective(&mut enc, query.norm, &query.center);

    let mut stats = SolveStats::default();
    let mut best: Option<Incumbent> = None;
    for hs in query.spec.constraints() {
        let mut lp = enc.lp.clone();
        lp.rows.push(enc.violation_row(query.net, &hs.a, hs.b));
        let tree = ConstraintTree {
            net: query.net,
            norm: query.norm,
            mode: QueryMode::Point {
                center: &query.center,
                bbox: &query.bbox,
            },
            spec_a: &hs.a,
            spec_b: hs.b,
            lp,
            binaries: enc.binaries.clone(),
            input_cols: enc.input_cols.clone(),
            template: template.clone(),
            config: &query.config,
        };
        best = tree.run(best.take(), &mut stats)?;
    }

    match best {
        None => Ok(NearestOutcome::NoAdversaryInBox { stats }),
        Some(inc) => {
            let witness = repair_witness(query.net, query.spec, &query.center, inc.point)?;
            let pattern = query.net.pattern_at(&witness)?;
            let ball = Ball::new(query.center.clone(), inc.value, query.norm, Some(witness))?;
            Ok(NearestOutcome::Found {
                ball,
                pattern,
                stats,
            })
        }
    }
}

/// Nearest adversarial point on the ray `c + kφ`, `k ≥ κ_min`, within the
/// box. Minimizing k is equivalent to minimizing `‖b̂ − c‖_p = k·‖φ‖_p`; the
/// reported distance uses the query's p-norm.
pub fn directional_adversarial(query: &AdversaryQuery, dir: &Direction) -> Result<DirectionalOutcome> {
    query.validate()?;
    let stats0 = SolveStats::default();
    if dir.is_degenerate() {
        return Ok(DirectionalOutcome::NoAdversaryOnRay {
            k_exit: None,
            stats: stats0,
        });
    }
    // Box exit scale along the ray.
    let mut k_hi = f64::INFINITY;
    for i in 0..query.center.len() {
        let p = dir.phi[i];
        if p > 1e-15 {
            k_hi = k_hi.min((query.bbox.upper()[i] - query.center[i]) / p);
        } else if p < -1e-15 {
            k_hi = k_hi.min((query.bbox.lower()[i] - query.center[i]) / p);
        }
    }
    if !k_hi.is_finite() || k_hi < KAPPA_MIN {
        return Ok(DirectionalOutcome::NoAdversaryOnRay {
            k_exit: k_hi.is_finite().then_some(k_hi),
            stats: stats0,
        });
    }
    let k_range = (KAPPA_MIN, k_hi);

    // Sound pre-activation bounds over the ray's bounding box.
    let seg_lo = Array1::from_shape_fn(query.center.len(), |i| {
        let a = query.center[i] + KAPPA_MIN * dir.phi[i];
        let b = query.center[i] + k_hi * dir.phi[i];
        a.min(b)
    });
    let seg_hi = Array1::from_shape_fn(query.center.len(), |i| {
        let a = query.center[i] + KAPPA_MIN * dir.phi[i];
        let b = query.center[i] + k_hi * dir.phi[i];
        a.max(b)
    });
    let hull = InputBox::new(seg_lo, seg_hi)?;
    let bounds = interval_bounds(query.net, &hull)?;

    let (directives, template) = plan_encoding(query.net, &bounds, query.config.fix_stable, None);
    let mut enc = encode_network(
        query.net,
        &bounds,
        InputMode::Ray {
            origin: &query.center,
            phi: &dir.phi,
            k_range,
        },
        query.net.hidden_layer_count(),
        &directives,
        0,
    );
    let mut objective = Array1::zeros(enc.num_cols);
    objective[0] = 1.0;
    enc.lp.objective = objective;

    let mut stats = SolveStats::default();
    let mut best: Option<Incumbent> = None;
    for hs in query.spec.constraints() {
        let mut lp = enc.lp.clone();
        lp.rows.push(enc.violation_row(query.net, &hs.a, hs.b));
        let tree = ConstraintTree {
            net: query.net,
            norm: query.norm,
            mode: QueryMode::Ray {
                origin: &query.center,
                phi: &dir.phi,
                k_range,
            },
            spec_a: &hs.a,
            spec_b: hs.b,
            lp,
            binaries: enc.binaries.clone(),
            input_cols: enc.input_cols.clone(),
            template: template.clone(),
            config: &query.config,
        };
        best = tree.run(best.take(), &mut stats)?;
    }

    match best {
        None => Ok(DirectionalOutcome::NoAdversaryOnRay {
            k_exit: Some(k_hi),
            stats,
        }),
        Some(inc) => {
            // Nudge k forward until the exact forward pass is adversarial.
            let mut k = inc.value;
            let adversarial = |k: f64| -> Result<bool> {
                let p = &query.center + &(&dir.phi * k);
                Ok(!query.spec.eval(&query.net.forward(&p)?.output)?.verified)
            };
            if !adversarial(k)? {
                for t in [1e-12, 1e-11, 1e-10, 1e-9, 3e-9, 1e-8] {
                    let cand = k * (1.0 + t) + t * 1e-12;
                    if adversarial(cand)? {
                        k = cand;
                        break;
                    }
                }
            }
            let point = &query.center + &(&dir.phi * k);
            let distance = k * query.norm.norm(&dir.phi);
            Ok(DirectionalOutcome::Found {
                point,
                k,
                distance,
                stats,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;

    fn minnet_query(center: [f64; 2], norm: Norm) -> (Network, Specification, Array1<f64>, Norm, InputBox) {
        (
            fixtures::min_net(),
            fixtures::positive_spec(1),
            array![center[0], center[1]],
            norm,
            InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap(),
        )
    }

    fn solve_nearest(
        net: &Network,
        spec: &Specification,
        center: Array1<f64>,
        norm: Norm,
        bbox: InputBox,
    ) -> NearestOutcome {
        let q = AdversaryQuery::new(net, spec, center, norm, bbox);
        nearest_adversarial(&q).unwrap()
    }

    #[test]
    fn min_net_nearest_linf_and_l1() {
        for norm in [Norm::LInf, Norm::L1] {
            let (net, spec, c, _, bbox) = minnet_query([2.0, 1.0], norm);
            match solve_nearest(&net, &spec, c, norm, bbox) {
                NearestOutcome::Found { ball, stats, .. } => {
                    assert!((ball.radius - 1.0).abs() < 1e-7, "{norm}: r = {}", ball.radius);
                    ball.validate_witness(&net, &spec).unwrap();
                    assert!(stats.max_expanded_bound <= ball.radius + 1e-6);
                }
                other => panic!("expected Found, got {other:?}"),
            }
        }
    }

    #[test]
    fn min_net_nearest_l2_unique_witness() {
        let (net, spec, c, _, bbox) = minnet_query([2.0, 1.0], Norm::L2);
        match solve_nearest(&net, &spec, c, Norm::L2, bbox) {
            NearestOutcome::Found { ball, .. } => {
                assert!((ball.radius - 1.0).abs() < 1e-7);
                let w = ball.witness.clone().unwrap();
                assert!((w[0] - 2.0).abs() < 1e-6 && w[1].abs() < 1e-6, "witness {w}");
                ball.validate_witness(&net, &spec).unwrap();
            }
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn identity_net_nearest_every_norm() {
        let net = fixtures::identity_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-2.0], array![2.0]).unwrap();
        for norm in [Norm::L1, Norm::L2, Norm::LInf] {
            match solve_nearest(&net, &spec, array![1.0], norm, bbox.clone()) {
                NearestOutcome::Found { ball, .. } => {
                    assert!((ball.radius - 1.0).abs() < 1e-7);
                    ball.validate_witness(&net, &spec).unwrap();
                }
                other => panic!("expected Found, got {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_center() {
        let (net, spec, c, _, bbox) = minnet_query([-1.0, 3.0], Norm::LInf);
        match solve_nearest(&net, &spec, c, Norm::LInf, bbox) {
            NearestOutcome::DegenerateCenter { ball } => {
                assert_eq!(ball.radius, 0.0);
                assert_eq!(ball.witness.unwrap(), array![-1.0, 3.0]);
            }
            other => panic!("expected DegenerateCenter, got {other:?}"),
        }
    }

    #[test]
    fn fully_verified_box_reports_no_adversary() {
        let net = fixtures::min_net();
        let spec = Specification::new(vec![crate::net::HalfSpace {
            a: array![1.0],
            b: 1e6,
        }])
        .unwrap();
        let bbox = InputBox::new(array![0.0, 0.0], array![1.0, 1.0]).unwrap();
        match solve_nearest(&net, &spec, array![0.5, 0.5], Norm::LInf, bbox) {
            NearestOutcome::NoAdversaryInBox { .. } => {}
            other => panic!("expected NoAdversaryInBox, got {other:?}"),
        }
    }

    #[test]
    fn center_outside_box_is_rejected() {
        let (net, spec, _, _, _) = minnet_query([2.0, 1.0], Norm::LInf);
        let bbox = InputBox::new(array![0.0, 0.0], array![1.0, 1.0]).unwrap();
        let q = AdversaryQuery::new(&net, &spec, array![2.0, 1.0], Norm::LInf, bbox);
        let err = nearest_adversarial(&q).unwrap_err();
        assert!(err.to_string().contains("center outside box"));
    }

    #[test]
    fn direction_geometry_invariants() {
        let c = array![2.0, 1.0];
        let dir = Direction::new(&c, array![2.0, 0.0], 90.0, array![1.0, 0.25]).unwrap();
        assert!(dir.q.dot(&dir.d).abs() < 1e-10);
        let dir0 = Direction::new(&c, array![2.0, 0.0], 0.0, array![1.0, 0.25]).unwrap();
        assert_eq!(dir0.phi, dir0.d);
        assert!(dir.phi.dot(&dir.d).abs() < 1e-10);
    }

    #[test]
    fn directional_cases_on_min_net() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let c = array![2.0, 1.0];
        let bbox = InputBox::new(array![0.0, 0.0], array![5.0, 5.0]).unwrap();
        let q = AdversaryQuery::new(&net, &spec, c.clone(), Norm::LInf, bbox);

        // theta = 180 recovers the anchor adversary below the center.
        let dir = Direction::new(&c, array![2.0, 0.0], 180.0, array![0.3, 0.7]).unwrap();
        match directional_adversarial(&q, &dir).unwrap() {
            DirectionalOutcome::Found { point, k, distance, .. } => {
                assert!((k - 1.0).abs() < 1e-6, "k = {k}");
                assert!((distance - 1.0).abs() < 1e-6);
                assert!(
                    Norm::LInf.dist(&point, &(&c + &(&dir.phi * k))) <= 1e-8,
                    "point off the ray"
                );
            }
            other => panic!("expected Found, got {other:?}"),
        }

        // theta = 90 with xi = (1, 0): moving +x stays verified until the box.
        let dir = Direction::new(&c, array![2.0, 0.0], 90.0, array![1.0, 0.0]).unwrap();
        match directional_adversarial(&q, &dir).unwrap() {
            DirectionalOutcome::NoAdversaryOnRay { k_exit, .. } => {
                let k = k_exit.unwrap();
                assert!((k - 3.0).abs() < 1e-6, "box exit at {k}");
            }
            other => panic!("expected NoAdversaryOnRay, got {other:?}"),
        }

        // theta = 90 with xi = (-1, 0): crossing x1 = 0 at k = 2.
        let dir = Direction::new(&c, array![2.0, 0.0], 90.0, array![-1.0, 0.0]).unwrap();
        match directional_adversarial(&q, &dir).unwrap() {
            DirectionalOutcome::Found { point, k, distance, .. } => {
                assert!((k - 2.0).abs() < 1e-6, "k = {k}");
                assert!((distance - 2.0).abs() < 1e-6);
                assert!((point[0] - 0.0).abs() < 1e-6 && (point[1] - 1.0).abs() < 1e-6);
            }
            other => panic!("expected Found, got {other:?}"),
        }
    }

    #[test]
    fn stability_prefixing_is_conservative() {
        // Same optimum with and without pre-fixed stable binaries.
        for seed in [2u64, 9, 14] {
            let net = fixtures::random_net(seed, 2, &[6], 1);
            let spec = fixtures::positive_spec(1);
            let bbox = InputBox::symmetric(2, 2.0);
            let mut center = array![0.0, 0.0];
            // Find a verified center; shift if needed.
            if !spec.eval(&net.forward(&center).unwrap().output).unwrap().verified {
                center = array![0.5, -0.5];
                if !spec.eval(&net.forward(&center).unwrap().output).unwrap().verified {
                    continue;
                }
            }
            let mut q = AdversaryQuery::new(&net, &spec, center.clone(), Norm::LInf, bbox.clone());
            let r_fixed = match nearest_adversarial(&q).unwrap() {
                NearestOutcome::Found { ball, .. } => Some(ball.radius),
                NearestOutcome::NoAdversaryInBox { .. } => None,
                NearestOutcome::DegenerateCenter { .. } => continue,
            };
            q.config.fix_stable = false;
            let r_all = match nearest_adversarial(&q).unwrap() {
                NearestOutcome::Found { ball, .. } => Some(ball.radius),
                NearestOutcome::NoAdversaryInBox { .. } => None,
                NearestOutcome::DegenerateCenter { .. } => continue,
            };
            match (r_fixed, r_all) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-8, "seed {seed}: {a} vs {b}"),
                (None, None) => {}
                other => panic!("seed {seed}: disagreement {other:?}"),
            }
        }
    }

    #[test]
    fn deterministic_given_identical_query() {
        let (net, spec, c, _, bbox) = minnet_query([2.0, 1.0], Norm::LInf);
        let q = AdversaryQuery::new(&net, &spec, c, Norm::LInf, bbox);
        let (a, b) = (nearest_adversarial(&q).unwrap(), nearest_adversarial(&q).unwrap());
        match (a, b) {
            (NearestOutcome::Found { ball: x, .. }, NearestOutcome::Found { ball: y, .. }) => {
                assert_eq!(x.radius, y.radius);
                assert_eq!(x.witness.unwrap(), y.witness.unwrap());
            }
            _ => panic!("expected Found twice"),
        }
    }

    #[test]
    fn parallel_jobs_match_serial_result() {
        let net = fixtures::random_net(33, 2, &[10, 8], 1);
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::symmetric(2, 2.0);
        let center = array![0.1, -0.2];
        if !spec.eval(&net.forward(&center).unwrap().output).unwrap().verified {
            return;
        }
        let mut q = AdversaryQuery::new(&net, &spec, center, Norm::LInf, bbox);
        let serial = nearest_adversarial(&q).unwrap();
        q.config.jobs = 4;
        let par = nearest_adversarial(&q).unwrap();
        match (serial, par) {
            (NearestOutcome::Found { ball: x, .. }, NearestOutcome::Found { ball: y, .. }) => {
                assert_eq!(x.radius, y.radius);
                assert_eq!(x.witness.unwrap(), y.witness.unwrap());
            }
            (NearestOutcome::NoAdversaryInBox { .. }, NearestOutcome::NoAdversaryInBox { .. }) => {}
            other => panic!("serial/parallel disagreement: {other:?}"),
        }
    }
}
