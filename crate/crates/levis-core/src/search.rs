//! The two search strategies: iterative center refinement toward a large
//! boundary-touching ball, and queue-driven collection of a union of
//! verifiable balls, plus ball-union geometry.

use std::collections::VecDeque;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LevisError, Result};
use crate::milp::{
    directional_adversarial, nearest_adversarial, AdversaryQuery, Direction, DirectionalOutcome,
    NearestOutcome, SolverConfig,
};
use crate::net::{Ball, InputBox, Network, Norm, Specification};

// ---------------------------------------------------------------------------
// Center refinement (single large ball)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AlphaConfig {
    /// Stop once the radius changes by less than this between iterations.
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_iter: 100,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlphaIteration {
    pub iteration: usize,
    pub center: Array1<f64>,
    pub radius: f64,
}

#[derive(Debug)]
pub struct AlphaResult {
    /// The last exactly solved ball; when `converged`, re-solving from its
    /// center reproduces its radius.
    pub ball: Ball,
    pub trace: Vec<AlphaIteration>,
    pub converged: bool,
    pub aborted: Option<String>,
    /// First-iteration radius: the exact fixed-center baseline.
    pub r_efc: f64,
}

/// A boundary point used for center averaging: a true adversary, or the box
/// exit of a ray that left the search box before any violation.
enum BoundaryPoint {
    Adversary(Array1<f64>),
    BoxExit(Array1<f64>),
}

impl BoundaryPoint {
    fn point(&self) -> &Array1<f64> {
        match self {
            BoundaryPoint::Adversary(p) | BoundaryPoint::BoxExit(p) => p,
        }
    }
}

/// Directional boundary point with resampling: orthogonal rays that exit the
/// box get a fresh ξ (up to 10 draws); if every ray exits, the last exit
/// point itself serves as the boundary point (the box bounds the search).
/// In one dimension no orthogonal direction exists and θ = 90° falls back to
/// the collinear ray.
fn directional_boundary_point(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    anchor: &Array1<f64>,
    theta_deg: f64,
    rng: &mut ChaCha8Rng,
    solver: &SolverConfig,
) -> Result<Option<BoundaryPoint>> {
    let theta = if net.input_dim() == 1 && theta_deg == 90.0 {
        0.0
    } else {
        theta_deg
    };
    let attempts = if theta == 0.0 { 1 } else { 10 };
    let mut exit_point: Option<Array1<f64>> = None;
    for _ in 0..attempts {
        let dir = Direction::sample(center, anchor.clone(), theta, rng)?;
        if dir.is_degenerate() {
            continue;
        }
        let mut query = AdversaryQuery::new(net, spec, center.clone(), norm, bbox.clone());
        query.config = solver.clone();
        match directional_adversarial(&query, &dir)? {
            DirectionalOutcome::Found { point, .. } => {
                return Ok(Some(BoundaryPoint::Adversary(point)))
            }
            DirectionalOutcome::NoAdversaryOnRay { k_exit, .. } => {
                if let Some(k) = k_exit {
                    exit_point = Some(center + &(&dir.phi * k));
                }
            }
        }
    }
    Ok(exit_point.map(BoundaryPoint::BoxExit))
}

/// Iterative center refinement: per iteration the nearest adversary sets the
/// radius, an orthogonal point pairs with it, and d−1 further pairs alternate
/// orthogonal (anchored at the previous odd point) and collinear (anchored at
/// the previous even point, i.e. the ray through the center away from it).
/// The center moves to the mean of all 2d points until the radius stabilizes.
pub fn levis_alpha(
    net: &Network,
    spec: &Specification,
    x0: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    cfg: &AlphaConfig,
) -> Result<AlphaResult> {
    let d = net.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut center = x0.clone();
    let mut trace = Vec::new();
    let mut r_prev: Option<f64> = None;
    let mut last_ball: Option<Ball> = None;
    let mut aborted = None;
    let mut converged = false;

    for iteration in 1..=cfg.max_iter {
        let mut query = AdversaryQuery::new(net, spec, center.clone(), norm, bbox.clone());
        query.config = cfg.solver.clone();
        let (ball, witness) = match nearest_adversarial(&query)? {
            NearestOutcome::Found { ball, .. } => {
                let w = ball.witness.clone().expect("solver balls carry witnesses");
                (ball, w)
            }
            NearestOutcome::DegenerateCenter { .. } => {
                if iteration == 1 {
                    return Err(LevisError::InvalidQuery(
                        "initial center is adversarial".into(),
                    ));
                }
                aborted = Some(format!("iteration {iteration}: averaged center became adversarial"));
                break;
            }
            NearestOutcome::NoAdversaryInBox { .. } => {
                aborted = Some(format!(
                    "iteration {iteration}: no adversary anywhere in the box"
                ));
                break;
            }
        };
        let r = ball.radius;
        trace.push(AlphaIteration {
            iteration,
            center: center.clone(),
            radius: r,
        });
        last_ball = Some(ball);

        if let Some(rp) = r_prev {
            if (r - rp).abs() < cfg.eps {
                converged = true;
                break;
            }
        }

        // 2d boundary points in d collinear pairs: the nearest adversary and
        // its opposite along the ray through the center, then one orthogonal
        // direction per remaining dimension, each with its own opposite.
        let mut points: Vec<BoundaryPoint> = vec![BoundaryPoint::Adversary(witness)];
        let mut failed = false;
        let b2 = directional_boundary_point(
            net, spec, &center, norm, bbox, points[0].point(), 0.0, &mut rng, &cfg.solver,
        )?;
        match b2 {
            Some(p) => points.push(p),
            None => failed = true,
        }
        for _j in 1..d {
            if failed {
                break;
            }
            // New direction: orthogonal to the previous pair's axis.
            let odd_anchor = points[points.len() - 2].point().clone();
            let odd = match directional_boundary_point(
                net, spec, &center, norm, bbox, &odd_anchor, 90.0, &mut rng, &cfg.solver,
            )? {
                Some(p) => p,
                None => {
                    failed = true;
                    break;
                }
            };
            let even_anchor = odd.point().clone();
            points.push(odd);
            // Its collinear opposite through the center.
            match directional_boundary_point(
                net, spec, &center, norm, bbox, &even_anchor, 0.0, &mut rng, &cfg.solver,
            )? {
                Some(p) => points.push(p),
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            aborted = Some(format!(
                "iteration {iteration}: directional search failed after resampling"
            ));
            break;
        }

        let mut mean = Array1::zeros(d);
        for p in &points {
            mean = mean + p.point();
        }
        center = mean / points.len() as f64;
        r_prev = Some(r);
    }

    let ball = last_ball.ok_or_else(|| {
        LevisError::Numerical("center refinement produced no verifiable ball".into())
    })?;
    let r_efc = trace.first().map(|t| t.radius).unwrap_or(ball.radius);
    if !converged && aborted.is_none() {
        aborted = Some(format!("stopped at max_iter = {}", cfg.max_iter));
    }
    Ok(AlphaResult {
        ball,
        trace,
        converged,
        aborted: if converged { None } else { aborted },
        r_efc,
    })
}

/// The two boundary points predicted by the converged ball: the nearest
/// adversary and the adversary on the opposite ray through the center.
/// Returns their symmetry mismatch `‖(b₁−c) + (b₂−c)‖_p`; `None` when the
/// opposite ray exits the box before the boundary.
pub fn symmetric_boundary_pair(
    net: &Network,
    spec: &Specification,
    center: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    solver: &SolverConfig,
) -> Result<Option<(Array1<f64>, Array1<f64>, f64)>> {
    let mut query = AdversaryQuery::new(net, spec, center.clone(), norm, bbox.clone());
    query.config = solver.clone();
    let b1 = match nearest_adversarial(&query)? {
        NearestOutcome::Found { ball, .. } => ball.witness.expect("witness"),
        _ => return Ok(None),
    };
    let dir = Direction::new(center, b1.clone(), 0.0, Array1::zeros(center.len()))?;
    let b2 = match directional_adversarial(&query, &dir)? {
        DirectionalOutcome::Found { point, .. } => point,
        DirectionalOutcome::NoAdversaryOnRay { .. } => return Ok(None),
    };
    let mismatch = norm.norm(&(&(&b1 - center) + &(&b2 - center)));
    Ok(Some((b1, b2, mismatch)))
}

// ---------------------------------------------------------------------------
// Ball union collection
// ---------------------------------------------------------------------------

/// The next candidate center: strictly inside the ball at distance `γ·r`
/// from `c`, on the far side from the adversary `b` along the c–b line.
pub fn surface_point(
    c: &Array1<f64>,
    b: &Array1<f64>,
    r: f64,
    gamma: f64,
    norm: Norm,
) -> Result<Array1<f64>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LevisError::InvalidArgument(format!(
            "shift factor must lie in (0, 1), got {gamma}"
        )));
    }
    let diff = c - b;
    let n = norm.norm(&diff);
    if n <= 0.0 {
        return Err(LevisError::InvalidArgument(
            "surface point undefined for coincident center and adversary".into(),
        ));
    }
    Ok(c + &(&diff * (gamma * r / n)))
}

/// One recorded ball with its creation metadata.
#[derive(Debug, Clone)]
pub struct UnionBall {
    pub ball: Ball,
    pub parent: Option<usize>,
    pub theta_deg: f64,
    pub delta: Vec<f64>,
    pub seed: u64,
}

/// Ordered union of verifiable balls (the set V).
#[derive(Debug, Clone, Default)]
pub struct BallUnion {
    pub balls: Vec<UnionBall>,
}

impl BallUnion {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

/// Membership in the union: `‖x − c_i‖_{p_i} ≤ r_i` for some ball.
pub fn union_contains(union: &BallUnion, x: &Array1<f64>) -> bool {
    union.balls.iter().any(|b| b.ball.contains(x))
}

/// Monte-Carlo covered fraction of the box; deterministic under a fixed seed.
pub fn union_coverage(union: &BallUnion, bbox: &InputBox, n_samples: usize, seed: u64) -> f64 {
    if n_samples == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hit = 0usize;
    for _ in 0..n_samples {
        let x = bbox.sample_uniform(&mut rng);
        if union_contains(union, &x) {
            hit += 1;
        }
    }
    hit as f64 / n_samples as f64
}

#[derive(Debug, Clone)]
pub struct BetaConfig {
    /// Balls with radius below this are not recorded; the branch resamples.
    pub eps: f64,
    /// Shift factor for the next-center surface point.
    pub gamma: f64,
    /// Offset of the first candidate center from x0.
    pub delta: Array1<f64>,
    /// Search angle for the directional adversary.
    pub theta_deg: f64,
    pub seed: u64,
    pub max_balls: usize,
    pub solver: SolverConfig,
}

impl BetaConfig {
    pub fn new(delta: Array1<f64>) -> Self {
        Self {
            eps: 1e-3,
            gamma: 0.99,
            delta,
            theta_deg: 90.0,
            seed: 0,
            max_balls: 50,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct BetaResult {
    pub union: BallUnion,
    pub diagnostics: Vec<String>,
    /// The ball cap is an artifact of this implementation, not part of the
    /// queue discipline; flag when it cut the search short.
    pub truncated_by_max_balls: bool,
}

const NUDGE_CAP: usize = 60;
const RESAMPLE_CAP: usize = 100;

/// Queue-driven collection of verifiable balls. Each popped center either
/// records its exact ball and enqueues the surface point along the away ray
/// (nudged toward the directional adversary while it overlaps the union), or
/// — when its ball degenerates — resamples a verified point between the
/// center and an alternating box corner.
pub fn levis_beta(
    net: &Network,
    spec: &Specification,
    x0: &Array1<f64>,
    norm: Norm,
    bbox: &InputBox,
    cfg: &BetaConfig,
) -> Result<BetaResult> {
    if cfg.delta.len() != net.input_dim() {
        return Err(LevisError::DimensionMismatch(
            "delta dimension does not match network input".into(),
        ));
    }
    let start = x0 + &cfg.delta;
    if !bbox.contains(&start) {
        return Err(LevisError::InvalidQuery(
            "x0 + delta lies outside the box".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut union = BallUnion::default();
    let mut diagnostics = Vec::new();
    let mut truncated = false;
    let mut resample_flip = 0usize;
    let mut queue: VecDeque<(Array1<f64>, Option<usize>)> = VecDeque::new();
    queue.push_back((start, None));

    while let Some((center, parent)) = queue.pop_front() {
        if union.len() >= cfg.max_balls {
            truncated = true;
            break;
        }
        let mut query = AdversaryQuery::new(net, spec, center.clone(), norm, bbox.clone());
        query.config = cfg.solver.clone();
        let ball = match nearest_adversarial(&query)? {
            NearestOutcome::Found { ball, .. } => ball,
            NearestOutcome::DegenerateCenter { ball } => ball,
            NearestOutcome::NoAdversaryInBox { .. } => {
                diagnostics.push("no adversary in box from попped center".into());
                continue;
            }
        };

        if ball.radius < cfg.eps {
            // Escape a degenerate pocket: sample between the center and an
            // alternating box corner until a verified point appears.
            let mut revived = false;
            for attempt in 0..RESAMPLE_CAP {
                let toward_lower = (resample_flip + attempt) % 2 == 0;
                let cand = Array1::from_shape_fn(center.len(), |i| {
                    let (a, b) = if toward_lower {
                        (bbox.lower()[i], center[i])
                    } else {
                        (center[i], bbox.upper()[i])
                    };
                    if a == b {
                        a
                    } else {
                        rng.gen_range(a.min(b)..=a.max(b))
                    }
                });
                if spec.eval(&net.forward(&cand)?.output)?.verified {
                    queue.push_back((cand, parent));
                    revived = true;
                    break;
                }
            }
            resample_flip += 1;
            if !revived {
                diagnostics.push(format!(
                    "branch terminated: {RESAMPLE_CAP} resamples found no verified point"
                ));
            }
            continue;
        }

        // The union only grows outward: a center swallowed by balls recorded
        // since it was enqueued is dropped.
        if union_contains(&union, &center) {
            diagnostics.push("candidate center already inside the union".into());
            continue;
        }
        ball.validate_witness(net, spec)?;
        let witness = ball.witness.clone().expect("solver balls carry witnesses");
        let radius = ball.radius;
        let index = union.len();
        union.balls.push(UnionBall {
            ball,
            parent,
            theta_deg: cfg.theta_deg,
            delta: cfg.delta.to_vec(),
            seed: cfg.seed,
        });

        // Directional adversary along φ(θ); a box exit still gives a nudge
        // target on the verified side.
        let dir = Direction::sample(&center, witness.clone(), cfg.theta_deg, &mut rng)?;
        let nudge_target = if dir.is_degenerate() {
            None
        } else {
            match directional_adversarial(&query, &dir)? {
                DirectionalOutcome::Found { point, .. } => Some(point),
                DirectionalOutcome::NoAdversaryOnRay { k_exit, .. } => {
                    k_exit.map(|k| &center + &(&dir.phi * k))
                }
            }
        };

        let mut m = surface_point(&center, &witness, radius, cfg.gamma, norm)?;
        if !bbox.contains(&m) {
            diagnostics.push(format!("branch {index} terminated: surface point left the box"));
            continue;
        }
        if let Some(target) = &nudge_target {
            let mut steps = 0;
            while union_contains(&union, &m)
                && norm.dist(&m, target) > cfg.eps
                && steps < NUDGE_CAP
            {
                m = (&m + target) / 2.0;
                steps += 1;
            }
        }
        if !bbox.contains(&m) {
            diagnostics.push(format!("branch {index} terminated: nudged point left the box"));
            continue;
        }
        queue.push_back((m, Some(index)));
    }

    Ok(BetaResult {
        union,
        diagnostics,
        truncated_by_max_balls: truncated,
    })
}

/// Concatenate unions from independent runs, re-validating every ball.
pub fn merge_unions(
    net: &Network,
    spec: &Specification,
    unions: Vec<BallUnion>,
) -> Result<BallUnion> {
    let mut merged = BallUnion::default();
    for u in unions {
        for ub in u.balls {
            let eval = spec.eval(&net.forward(&ub.ball.center)?.output)?;
            if !eval.verified {
                return Err(LevisError::Numerical(
                    "merge rejected a ball with unverified center".into(),
                ));
            }
            ub.ball.validate_witness(net, spec)?;
            merged.balls.push(ub);
        }
    }
    Ok(merged)
}

// ---------------------------------------------------------------------------
// Union JSON format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct UnionBallFile {
    center: Vec<f64>,
    radius: f64,
    p: Norm,
    witness: Option<Vec<f64>>,
    parent: Option<usize>,
    theta: f64,
    delta: Vec<f64>,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct UnionFile {
    balls: Vec<UnionBallFile>,
    coverage: f64,
    truncated_by_max_balls: bool,
}

pub fn union_to_json(result: &BetaResult, coverage: f64) -> String {
    let file = UnionFile {
        balls: result
            .union
            .balls
            .iter()
            .map(|ub| UnionBallFile {
                center: ub.ball.center.to_vec(),
                radius: ub.ball.radius,
                p: ub.ball.norm,
                witness: ub.ball.witness.as_ref().map(|w| w.to_vec()),
                parent: ub.parent,
                theta: ub.theta_deg,
                delta: ub.delta.clone(),
                seed: ub.seed,
            })
            .collect(),
        coverage,
        truncated_by_max_balls: result.truncated_by_max_balls,
    };
    serde_json::to_string_pretty(&file).expect("union serialization cannot fail")
}

pub fn union_from_json(s: &str) -> Result<(BallUnion, f64)> {
    let file: UnionFile = serde_json::from_str(s)
        .map_err(|e| LevisError::Parse(format!("union file: {e} (line {}, column {})", e.line(), e.column())))?;
    let balls = file
        .balls
        .into_iter()
        .map(|b| {
            Ok(UnionBall {
                ball: Ball::new(
                    Array1::from_vec(b.center),
                    b.radius,
                    b.p,
                    b.witness.map(Array1::from_vec),
                )?,
                parent: b.parent,
                theta_deg: b.theta,
                delta: b.delta,
                seed: b.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((BallUnion { balls }, file.coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;

    #[test]
    fn surface_point_examples() {
        // Away from the adversary below: straight up.
        let m = surface_point(&array![2.0, 1.0], &array![2.0, 0.0], 1.0, 0.99, Norm::LInf).unwrap();
        assert!((m[0] - 2.0).abs() < 1e-12 && (m[1] - 1.99).abs() < 1e-12);

        // Euclidean variant.
        let m = surface_point(&array![0.0, 0.0], &array![1.0, 0.0], 2.0, 0.5, Norm::L2).unwrap();
        assert!((m[0] + 1.0).abs() < 1e-12 && m[1].abs() < 1e-12);

        // Rejected parameters.
        assert!(surface_point(&array![0.0], &array![1.0], 1.0, 0.0, Norm::L2).is_err());
        assert!(surface_point(&array![0.0], &array![1.0], 1.0, 1.0, Norm::L2).is_err());
        assert!(surface_point(&array![1.0], &array![1.0], 1.0, 0.5, Norm::L2).is_err());
    }

    #[test]
    fn union_membership_examples() {
        let mut union = BallUnion::default();
        union.balls.push(UnionBall {
            ball: Ball::new(array![0.0, 0.0], 1.0, Norm::LInf, None).unwrap(),
            parent: None,
            theta_deg: 90.0,
            delta: vec![0.0, 0.0],
            seed: 0,
        });
        assert!(union_contains(&union, &array![0.5, -0.5]));
        assert!(!union_contains(&union, &array![1.5, 0.0]));
        assert!(union_contains(&union, &array![1.0, 1.0]));
    }

    #[test]
    fn coverage_estimates_area_ratio() {
        let mut union = BallUnion::default();
        union.balls.push(UnionBall {
            ball: Ball::new(array![0.0, 0.0], 1.0, Norm::LInf, None).unwrap(),
            parent: None,
            theta_deg: 90.0,
            delta: vec![0.0, 0.0],
            seed: 0,
        });
        let bbox = InputBox::new(array![-2.0, -2.0], array![2.0, 2.0]).unwrap();
        let frac = union_coverage(&union, &bbox, 1_000_000, 11);
        assert!((frac - 0.25).abs() <= 2e-3, "fraction {frac}");
        assert_eq!(union_coverage(&BallUnion::default(), &bbox, 1000, 1), 0.0);
        // A ball covering the whole box.
        let mut full = BallUnion::default();
        full.balls.push(UnionBall {
            ball: Ball::new(array![0.0, 0.0], 4.0, Norm::LInf, None).unwrap(),
            parent: None,
            theta_deg: 90.0,
            delta: vec![0.0, 0.0],
            seed: 0,
        });
        assert_eq!(union_coverage(&full, &bbox, 10_000, 5), 1.0);
    }

    #[test]
    fn alpha_identity_net_drifts_to_box_midpoint() {
        let net = fixtures::identity_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![0.0], array![10.0]).unwrap();
        let cfg = AlphaConfig {
            seed: 3,
            ..Default::default()
        };
        let res = levis_alpha(&net, &spec, &array![1.0], Norm::LInf, &bbox, &cfg).unwrap();
        assert!(res.converged, "did not converge: {:?}", res.aborted);
        assert!(
            (res.ball.center[0] - 5.0).abs() < 0.05,
            "center {}",
            res.ball.center[0]
        );
        assert!((res.ball.radius - 5.0).abs() < 0.05, "radius {}", res.ball.radius);
        assert!(res.ball.radius >= res.r_efc);
    }

    #[test]
    fn alpha_on_box_net_touches_opposite_faces() {
        let net = fixtures::box_net(1.0, 3.0, 0.5, 3.5);
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let cfg = AlphaConfig {
            seed: 7,
            ..Default::default()
        };
        let res = levis_alpha(&net, &spec, &array![1.3, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        assert!(res.converged);
        // Largest inscribed cube of (1,3)x(0.5,3.5) has half-width 1.
        assert!((res.ball.radius - 1.0).abs() < 0.02, "radius {}", res.ball.radius);
        assert!(res.ball.radius >= res.r_efc - 1e-9);
        // Re-solving from the final center reproduces the radius.
        let q = AdversaryQuery::new(&net, &spec, res.ball.center.clone(), Norm::LInf, bbox.clone());
        match nearest_adversarial(&q).unwrap() {
            NearestOutcome::Found { ball, .. } => {
                assert!((ball.radius - res.ball.radius).abs() <= 1e-6)
            }
            other => panic!("expected Found, got {other:?}"),
        }
        // Theorem-style pair: two adversarial points nearly symmetric about c.
        let pair = symmetric_boundary_pair(&net, &spec, &res.ball.center, Norm::LInf, &bbox, &cfg.solver)
            .unwrap()
            .expect("boundary pair exists");
        assert!(pair.2 <= cfg.eps + 1e-6, "mismatch {}", pair.2);
    }

    #[test]
    fn alpha_rejects_adversarial_start() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![-5.0, -5.0], array![5.0, 5.0]).unwrap();
        let err = levis_alpha(
            &net,
            &spec,
            &array![-1.0, 3.0],
            Norm::LInf,
            &bbox,
            &AlphaConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("adversarial"));
    }

    #[test]
    fn beta_on_min_net_box() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let mut cfg = BetaConfig::new(array![0.02, 0.02]);
        cfg.max_balls = 12;
        cfg.seed = 5;
        let res = levis_beta(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        assert!(!res.union.is_empty(), "no balls recorded: {:?}", res.diagnostics);
        // Every recorded center is verified and every witness adversarial.
        for ub in &res.union.balls {
            let eval = spec.eval(&net.forward(&ub.ball.center).unwrap().output).unwrap();
            assert!(eval.verified);
            ub.ball.validate_witness(&net, &spec).unwrap();
        }
        // Coverage is monotone in the number of balls.
        let mut prev = 0.0;
        for k in 0..=res.union.len() {
            let partial = BallUnion {
                balls: res.union.balls[..k].to_vec(),
            };
            let frac = union_coverage(&partial, &bbox, 20_000, 99);
            assert!(frac >= prev - 1e-12);
            prev = frac;
        }
    }

    #[test]
    fn beta_is_deterministic() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let mut cfg = BetaConfig::new(array![0.02, 0.02]);
        cfg.max_balls = 8;
        cfg.seed = 17;
        let a = levis_beta(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        let b = levis_beta(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        assert_eq!(a.union.len(), b.union.len());
        for (x, y) in a.union.balls.iter().zip(b.union.balls.iter()) {
            assert_eq!(x.ball.center, y.ball.center);
            assert_eq!(x.ball.radius, y.ball.radius);
            assert_eq!(x.parent, y.parent);
        }
    }

    #[test]
    fn beta_fully_adversarial_box_returns_empty_union() {
        let net = fixtures::min_net();
        // f > 10 is violated everywhere on this box.
        let spec = Specification::new(vec![crate::net::HalfSpace {
            a: array![1.0],
            b: -10.0,
        }])
        .unwrap();
        let bbox = InputBox::new(array![0.0, 0.0], array![2.0, 2.0]).unwrap();
        let cfg = BetaConfig::new(array![0.01, 0.01]);
        let res = levis_beta(&net, &spec, &array![1.0, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        assert!(res.union.is_empty());
        assert!(!res.diagnostics.is_empty());
    }

    #[test]
    fn beta_zero_max_balls_gives_empty_union() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let mut cfg = BetaConfig::new(array![0.02, 0.02]);
        cfg.max_balls = 0;
        let res = levis_beta(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        assert!(res.union.is_empty());
        assert!(res.truncated_by_max_balls);
    }

    #[test]
    fn union_json_round_trip() {
        let net = fixtures::min_net();
        let spec = fixtures::positive_spec(1);
        let bbox = InputBox::new(array![0.0, 0.0], array![4.0, 4.0]).unwrap();
        let mut cfg = BetaConfig::new(array![0.02, 0.02]);
        cfg.max_balls = 4;
        let res = levis_beta(&net, &spec, &array![2.0, 1.0], Norm::LInf, &bbox, &cfg).unwrap();
        let coverage = union_coverage(&res.union, &bbox, 10_000, 1);
        let json = union_to_json(&res, coverage);
        let (back, cov) = union_from_json(&json).unwrap();
        assert_eq!(back.len(), res.union.len());
        assert_eq!(cov, coverage);
        for (a, b) in back.balls.iter().zip(res.union.balls.iter()) {
            assert_eq!(a.ball.center, b.ball.center);
            assert_eq!(a.ball.radius, b.ball.radius);
        }
    }
}
