//! `levis`: exact adversarial-free input regions for ReLU networks.
//!
//! Exit codes: 0 success, 2 infeasible or degenerate query (no adversary in
//! the box, degenerate center, ray without violation, center outside box),
//! 1 any other error. All randomness flows from explicit `--seed` flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use levis_cli::dispatch::{datagen_dispatch, demand_box, Dataset, DispatchConfig};
use levis_cli::svg::render_union;
use levis_cli::train::{train_fixture, TrainConfig};
use levis_core::cc::{hybrid_nearest_adversarial, HybridOptions, HybridOutcome};
use levis_core::milp::{
    directional_adversarial, nearest_adversarial, AdversaryQuery, Direction, DirectionalOutcome,
    NearestOutcome, SolverConfig,
};
use levis_core::net::{Ball, InputBox, Network, Norm, Specification};
use levis_core::oracle;
use levis_core::search::{
    levis_alpha, levis_beta, merge_unions, union_coverage, union_from_json, union_to_json,
    AlphaConfig, BetaConfig, BetaResult,
};
use levis_core::{LevisError, DEFAULT_BOX_HALF_WIDTH};

#[derive(Parser)]
#[command(
    name = "levis",
    version,
    about = "Adversarial-free input regions for ReLU networks: exact nearest/directional adversaries, ball refinement, and ball-union search"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Largest verifiable ball around a center (nearest adversarial point).
    Ball(BallArgs),
    /// Nearest adversarial point along a directed ray from the center.
    Direction(DirectionArgs),
    /// Iterative center refinement toward a large boundary-touching ball.
    Alpha(AlphaArgs),
    /// Collect a union of verifiable balls.
    Beta(BetaArgs),
    /// Lipschitz lower-bound baseline radius.
    Baseline(BaselineArgs),
    /// Brute-force oracles: grid scan, ray scan, or ball sampling.
    Oracle(OracleArgs),
    /// Generate a synthetic economic-dispatch dataset.
    Datagen(DatagenArgs),
    /// Train a fixture network on a dataset.
    Train(TrainArgs),
    /// Render a ball union as SVG.
    ExportSvg(ExportSvgArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Network file (JSON).
    #[arg(long)]
    net: PathBuf,
    /// Specification file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Center / initial point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    center: String,
    /// Norm order: 1, 2, or inf.
    #[arg(long, default_value = "inf")]
    p: String,
    /// Search box file (JSON); defaults to ±1e4 per coordinate.
    #[arg(long = "box")]
    bbox: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Mip,
    Hybrid,
}

#[derive(Args)]
struct BallArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "mip")]
    solver: SolverChoice,
    /// With the hybrid solver: also run the full MIP and report the gap.
    #[arg(long)]
    audit: bool,
    /// Complementarity regularization for the hybrid NLP.
    #[arg(long, default_value_t = levis_core::cc::DEFAULT_EPS_REG)]
    eps_reg: f64,
    /// Phase classification threshold for the hybrid solver.
    #[arg(long, default_value_t = levis_core::cc::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Speculative parallel LP solves in branch-and-bound.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// LP-tighten the interval bounds before encoding.
    #[arg(long)]
    tighten: bool,
    /// Dump the per-neuron pre-activation bounds as JSON.
    #[arg(long)]
    dump_bounds: Option<PathBuf>,
    /// Output file for the ball (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DirectionArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Anchor adversarial point b, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    anchor: String,
    /// Angle θ in degrees against the anchor-to-center direction.
    #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
    theta: f64,
    /// Seed for the random orthogonal seed vector ξ.
    #[arg(long, default_value_t = 0)]
    xi_seed: u64,
    /// Explicit ξ vector (comma separated), overriding --xi-seed.
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlphaArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Radius-evolution trace CSV: iter,r,c_0..c_{d-1}.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BetaArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Shift factor γ for the next-center surface point.
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Offset Δ of the first candidate center, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    delta: String,
    #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    max_balls: usize,
    /// Run this many independent searches (seeds seed..seed+jobs) and merge.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Monte-Carlo samples for the coverage estimate.
    #[arg(long, default_value_t = 20_000)]
    coverage_samples: usize,
    /// Union output file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Radii CSV: ball_index,radius,dist_to_x0.
    #[arg(long)]
    radii_csv: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMode {
    Grid,
    Ray,
    Sample,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    mode: OracleMode,
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Center for grid/ray modes.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long, default_value = "inf")]
    p: String,
    #[arg(long = "box")]
    bbox: Option<PathBuf>,
    /// Step for grid/ray scans.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Ray direction φ for ray mode, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Ball file for sample mode.
    #[arg(long)]
    ball: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatagenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.10)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Merit-order generator costs, comma separated (ascending = cheapest first).
    #[arg(long, default_value = "1,2,3")]
    costs: String,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "16,16")]
    widths: String,
    #[arg(long, default_value_t = 10_000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportSvgArgs {
    /// Union file produced by `levis beta`.
    #[arg(long)]
    union: PathBuf,
    #[arg(long = "box")]
    bbox: PathBuf,
    /// The two plotted coordinates, e.g. "0,1".
    #[arg(long, default_value = "0,1")]
    dims: String,
    #[arg(long)]
    out: PathBuf,
}

// ---------------------------------------------------------------------------

fn parse_vec(s: &str, what: &str) -> Result<Array1<f64>> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .with_context(|| format!("parsing {what} {s:?} as comma-separated reals"))?;
    if vals.is_empty() {
        bail!("{what} is empty");
    }
    Ok(Array1::from_vec(vals))
}

fn parse_usizes(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("parsing {what} {s:?}")))
        .collect()
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

struct Problem {
    net: Network,
    spec: Specification,
    center: Array1<f64>,
    norm: Norm,
    bbox: InputBox,
    default_box: bool,
}

fn load_problem(args: &ProblemArgs) -> Result<Problem> {
    let net = Network::from_json(&read_to_string(&args.net)?)?;
    let spec = Specification::from_json(&read_to_string(&args.spec)?)?;
    let center = parse_vec(&args.center, "--center")?;
    let norm = Norm::parse(&args.p)?;
    let (bbox, default_box) = match &args.bbox {
        Some(path) => (InputBox::from_json(&read_to_string(path)?)?, false),
        None => (
            InputBox::symmetric(net.input_dim(), DEFAULT_BOX_HALF_WIDTH),
            true,
        ),
    };
    Ok(Problem {
        net,
        spec,
        center,
        norm,
        bbox,
        default_box,
    })
}

/// Ball artifact schema shared by `ball` output and `oracle --mode sample` input.
#[derive(Serialize, Deserialize)]
struct BallFile {
    center: Vec<f64>,
    radius: f64,
    p: Norm,
    witness: Option<Vec<f64>>,
    box_lower: Vec<f64>,
    box_upper: Vec<f64>,
    /// True when no `--box` was given and the ±1e4 default was imposed.
    default_box_applied: bool,
    solver: String,
    seed: Option<u64>,
}

impl BallFile {
    fn new(ball: &Ball, p: &Problem, solver: &str, seed: Option<u64>) -> Self {
        Self {
            center: ball.center.to_vec(),
            radius: ball.radius,
            p: ball.norm,
            witness: ball.witness.as_ref().map(|w| w.to_vec()),
            box_lower: p.bbox.lower().to_vec(),
            box_upper: p.bbox.upper().to_vec(),
            default_box_applied: p.default_box,
            solver: solver.into(),
            seed,
        }
    }

    fn to_ball(&self) -> Result<Ball> {
        Ok(Ball::new(
            Array1::from_vec(self.center.clone()),
            self.radius,
            self.p,
            self.witness.clone().map(Array1::from_vec),
        )?)
    }
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => write_file(path, &text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_ball(args: &BallArgs) -> Result<i32> {
    let p = load_problem(&args.problem)?;
    if let Some(path) = &args.dump_bounds {
        let bounds = levis_core::bounds::interval_bounds(&p.net, &p.bbox)?;
        #[derive(Serialize)]
        struct BoundsFile {
            layers: Vec<Vec<(f64, f64)>>,
        }
        let dump = BoundsFile {
            layers: bounds
                .layers()
                .iter()
                .map(|l| l.iter().map(|b| (b.lo, b.hi)).collect())
                .collect(),
        };
        write_file(path, &serde_json::to_string_pretty(&dump)?)?;
    }

    let mut solver = SolverConfig::default();
    solver.jobs = args.jobs.max(1);
    solver.lp_tighten = args.tighten;

    match args.solver {
        SolverChoice::Mip => {
            let mut query =
                AdversaryQuery::new(&p.net, &p.spec, p.center.clone(), p.norm, p.bbox.clone());
            query.config = solver;
            match nearest_adversarial(&query)? {
                NearestOutcome::Found { ball, stats, .. } => {
                    emit(&args.out, &BallFile::new(&ball, &p, "mip", None))?;
                    eprintln!(
                        "r = {} (nodes {}, lp solves {})",
                        ball.radius, stats.nodes, stats.lp_solves
                    );
                    Ok(0)
                }
                NearestOutcome::NoAdversaryInBox { .. } => {
                    eprintln!("no adversary in box: the whole box is verified");
                    Ok(2)
                }
                NearestOutcome::DegenerateCenter { ball } => {
                    emit(&args.out, &BallFile::new(&ball, &p, "mip", None))?;
                    eprintln!("degenerate center: the center itself is adversarial (r = 0)");
                    Ok(2)
                }
            }
        }
        SolverChoice::Hybrid => {
            let opts = HybridOptions {
                eps_reg: args.eps_reg,
                tau: args.tau,
                seed: args.seed,
                audit: args.audit,
                solver,
            };
            let res =
                hybrid_nearest_adversarial(&p.net, &p.spec, &p.center, p.norm, &p.bbox, &opts)?;
            // The gap report (with wall times) goes to stdout, never into the
            // artifact file, so identical runs produce identical files.
            println!("{}", serde_json::to_string_pretty(&res.report)?);
            match res.outcome {
                HybridOutcome::Found { ball, .. } => {
                    emit(&args.out, &BallFile::new(&ball, &p, "hybrid", Some(args.seed)))?;
                    Ok(0)
                }
                HybridOutcome::NoAdversaryInBox => {
                    eprintln!("no adversary in box: the whole box is verified");
                    Ok(2)
                }
                HybridOutcome::DegenerateCenter { ball } => {
                    emit(&args.out, &BallFile::new(&ball, &p, "hybrid", Some(args.seed)))?;
                    eprintln!("degenerate center: the center itself is adversarial (r = 0)");
                    Ok(2)
                }
            }
        }
    }
}

fn cmd_direction(args: &DirectionArgs) -> Result<i32> {
    let p = load_problem(&args.problem)?;
    let anchor = parse_vec(&args.anchor, "--anchor")?;
    let dir = match &args.xi {
        Some(xi) => Direction::new(&p.center, anchor, args.theta, parse_vec(xi, "--xi")?)?,
        None => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.xi_seed);
            Direction::sample(&p.center, anchor, args.theta, &mut rng)?
        }
    };
    let query = AdversaryQuery::new(&p.net, &p.spec, p.center.clone(), p.norm, p.bbox.clone());

    #[derive(Serialize)]
    struct DirectionFile {
        point: Option<Vec<f64>>,
        k: Option<f64>,
        distance: Option<f64>,
        k_exit: Option<f64>,
        theta: f64,
        xi_seed: Option<u64>,
        xi: Vec<f64>,
        d: Vec<f64>,
        q: Vec<f64>,
        phi: Vec<f64>,
        anchor: Vec<f64>,
        center: Vec<f64>,
        p: Norm,
    }
    let mut file = DirectionFile {
        point: None,
        k: None,
        distance: None,
        k_exit: None,
        theta: args.theta,
        xi_seed: args.xi.is_none().then_some(args.xi_seed),
        xi: dir.xi.to_vec(),
        d: dir.d.to_vec(),
        q: dir.q.to_vec(),
        phi: dir.phi.to_vec(),
        anchor: dir.anchor.to_vec(),
        center: p.center.to_vec(),
        p: p.norm,
    };
    match directional_adversarial(&query, &dir)? {
        DirectionalOutcome::Found {
            point, k, distance, ..
        } => {
            file.point = Some(point.to_vec());
            file.k = Some(k);
            file.distance = Some(distance);
            emit(&args.out, &file)?;
            eprintln!("k = {k}, distance = {distance}");
            Ok(0)
        }
        DirectionalOutcome::NoAdversaryOnRay { k_exit, .. } => {
            file.k_exit = k_exit;
            emit(&args.out, &file)?;
            eprintln!("no adversary on ray before the box exit");
            Ok(2)
        }
    }
}

fn cmd_alpha(args: &AlphaArgs) -> Result<i32> {
    let p = load_problem(&args.problem)?;
    let cfg = AlphaConfig {
        eps: args.eps,
        max_iter: args.max_iter,
        seed: args.seed,
        solver: SolverConfig::default(),
    };
    let res = levis_alpha(&p.net, &p.spec, &p.center, p.norm, &p.bbox, &cfg)?;
    if let Some(path) = &args.trace_csv {
        let d = p.net.input_dim();
        let mut csv = String::from("iter,r");
        for i in 0..d {
            csv.push_str(&format!(",c_{i}"));
        }
        csv.push('\n');
        for t in &res.trace {
            csv.push_str(&format!("{},{:.17e}", t.iteration, t.radius));
            for v in t.center.iter() {
                csv.push_str(&format!(",{v:.17e}"));
            }
            csv.push('\n');
        }
        write_file(path, &csv)?;
    }
    #[derive(Serialize)]
    struct AlphaFile {
        center: Vec<f64>,
        radius: f64,
        p: Norm,
        witness: Option<Vec<f64>>,
        converged: bool,
        iterations: usize,
        r_efc: f64,
        aborted: Option<String>,
        seed: u64,
        eps: f64,
    }
    let file = AlphaFile {
        center: res.ball.center.to_vec(),
        radius: res.ball.radius,
        p: p.norm,
        witness: res.ball.witness.as_ref().map(|w| w.to_vec()),
        converged: res.converged,
        iterations: res.trace.len(),
        r_efc: res.r_efc,
        aborted: res.aborted.clone(),
        seed: args.seed,
        eps: args.eps,
    };
    emit(&args.out, &file)?;
    eprintln!(
        "r = {} after {} iterations (fixed-center baseline {})",
        res.ball.radius,
        res.trace.len(),
        res.r_efc
    );
    Ok(0)
}

fn cmd_beta(args: &BetaArgs) -> Result<i32> {
    let p = load_problem(&args.problem)?;
    let delta = parse_vec(&args.delta, "--delta")?;
    let base = BetaConfig {
        eps: args.eps,
        gamma: args.gamma,
        delta,
        theta_deg: args.theta,
        seed: args.seed,
        max_balls: args.max_balls,
        solver: SolverConfig::default(),
    };
    let result = if args.jobs <= 1 {
        levis_beta(&p.net, &p.spec, &p.center, p.norm, &p.bbox, &base)?
    } else {
        // Independent seeded searches merged into one union.
        let runs = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for i in 0..args.jobs {
                let mut cfg = base.clone();
                cfg.seed = args.seed + i as u64;
                let (net, spec, center, bbox) = (&p.net, &p.spec, &p.center, &p.bbox);
                let norm = p.norm;
                handles.push(
                    scope.spawn(move || levis_beta(net, spec, center, norm, bbox, &cfg)),
                );
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("search thread panicked"))
                .collect::<std::result::Result<Vec<_>, _>>()
        })?;
        let mut diagnostics = Vec::new();
        let mut truncated = false;
        let mut unions = Vec::new();
        for r in runs {
            diagnostics.extend(r.diagnostics);
            truncated |= r.truncated_by_max_balls;
            unions.push(r.union);
        }
        BetaResult {
            union: merge_unions(&p.net, &p.spec, unions)?,
            diagnostics,
            truncated_by_max_balls: truncated,
        }
    };

    let coverage = union_coverage(&result.union, &p.bbox, args.coverage_samples, args.seed);
    let json = union_to_json(&result, coverage);
    match &args.out {
        Some(path) => write_file(path, &json)?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.radii_csv {
        let mut csv = String::from("ball_index,radius,dist_to_x0\n");
        for (i, ub) in result.union.balls.iter().enumerate() {
            csv.push_str(&format!(
                "{i},{:.17e},{:.17e}\n",
                ub.ball.radius,
                p.norm.dist(&ub.ball.center, &p.center)
            ));
        }
        write_file(path, &csv)?;
    }
    eprintln!(
        "{} balls, coverage {:.4}{}",
        result.union.len(),
        coverage,
        if result.truncated_by_max_balls {
            " (truncated by max_balls)"
        } else {
            ""
        }
    );
    for d in &result.diagnostics {
        eprintln!("note: {d}");
    }
    Ok(0)
}

fn cmd_baseline(args: &BaselineArgs) -> Result<i32> {
    let p = load_problem(&args.problem)?;
    let rep = oracle::lipschitz_radius(&p.net, &p.spec, &p.center, p.norm)?;
    emit(&args.out, &rep)?;
    eprintln!("r_lb = {} (L = {})", rep.r_lb, rep.lipschitz_constant);
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let net = Network::from_json(&read_to_string(&args.net)?)?;
    let spec = Specification::from_json(&read_to_string(&args.spec)?)?;
    let norm = Norm::parse(&args.p)?;
    let bbox = match &args.bbox {
        Some(path) => InputBox::from_json(&read_to_string(path)?)?,
        None => InputBox::symmetric(net.input_dim(), DEFAULT_BOX_HALF_WIDTH),
    };
    match args.mode {
        OracleMode::Grid => {
            let center = parse_vec(
                args.center.as_deref().context("grid mode needs --center")?,
                "--center",
            )?;
            let found = oracle::grid_oracle_nearest(&net, &spec, &center, norm, &bbox, args.step)?;
            let report = oracle::OracleReport {
                method: "grid".into(),
                distance: found.as_ref().map(|(d, _)| *d),
                step: Some(args.step),
                samples: 0,
                violation_count: usize::from(found.is_some()),
                witnesses: found.iter().map(|(_, x)| x.to_vec()).collect(),
                seed: None,
            };
            emit(&args.out, &report)?;
            Ok(if report.distance.is_some() { 0 } else { 2 })
        }
        OracleMode::Ray => {
            let center = parse_vec(
                args.center.as_deref().context("ray mode needs --center")?,
                "--center",
            )?;
            let phi = parse_vec(args.phi.as_deref().context("ray mode needs --phi")?, "--phi")?;
            let k = oracle::ray_oracle(&net, &spec, &center, &phi, &bbox, args.step)?;
            let report = oracle::OracleReport {
                method: "ray".into(),
                distance: k,
                step: Some(args.step),
                samples: 0,
                violation_count: usize::from(k.is_some()),
                witnesses: k.iter().map(|&k| (&center + &(&phi * k)).to_vec()).collect(),
                seed: None,
            };
            emit(&args.out, &report)?;
            Ok(if k.is_some() { 0 } else { 2 })
        }
        OracleMode::Sample => {
            let path = args.ball.as_ref().context("sample mode needs --ball")?;
            let file: BallFile = serde_json::from_str(&read_to_string(path)?)
                .with_context(|| format!("parsing ball file {}", path.display()))?;
            let ball = file.to_ball()?;
            let report = oracle::soundness_sample(&net, &spec, &ball, args.n, args.seed)?;
            emit(&args.out, &report)?;
            Ok(0)
        }
    }
}

fn cmd_datagen(args: &DatagenArgs) -> Result<i32> {
    let costs = parse_vec(&args.costs, "--costs")?.to_vec();
    let cfg = DispatchConfig {
        costs,
        noise: args.noise,
        samples: args.n,
        seed: args.seed,
        ..Default::default()
    };
    let data = datagen_dispatch(&cfg)?;
    write_file(&args.out, &data.to_json())?;
    let (lo, hi) = demand_box(&cfg);
    eprintln!(
        "{} samples written; demand box [{lo}] .. [{hi}]",
        data.samples.len()
    );
    Ok(0)
}

fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let data = Dataset::from_json(&read_to_string(&args.data)?)?;
    let cfg = TrainConfig {
        hidden: parse_usizes(&args.widths, "--widths")?,
        learning_rate: args.lr,
        epochs: args.epochs,
        train_fraction: args.train_frac,
        seed: args.seed,
    };
    let (net, report) = train_fixture(&data, &cfg)?;
    write_file(&args.out, &net.to_json())?;
    if let Some(path) = &args.metrics_out {
        write_file(path, &serde_json::to_string_pretty(&report)?)?;
    }
    eprintln!(
        "test RMSE {:.4} (relative {:.4})",
        report.test_rmse, report.relative_rmse
    );
    Ok(0)
}

fn cmd_export_svg(args: &ExportSvgArgs) -> Result<i32> {
    let (union, _coverage) = union_from_json(&read_to_string(&args.union)?)?;
    let bbox = InputBox::from_json(&read_to_string(&args.bbox)?)?;
    let dims = parse_usizes(&args.dims, "--dims")?;
    if dims.len() != 2 || dims[0] >= bbox.dim() || dims[1] >= bbox.dim() || dims[0] == dims[1] {
        bail!("--dims must name two distinct box coordinates");
    }
    let svg = render_union(&union, &bbox, (dims[0], dims[1]));
    write_file(&args.out, &svg)?;
    eprintln!("{} balls rendered to {}", union.len(), args.out.display());
    Ok(0)
}

fn run() -> Result<i32> {
    match &Cli::parse().cmd {
        Command::Ball(a) => cmd_ball(a),
        Command::Direction(a) => cmd_direction(a),
        Command::Alpha(a) => cmd_alpha(a),
        Command::Beta(a) => cmd_beta(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Datagen(a) => cmd_datagen(a),
        Command::Train(a) => cmd_train(a),
        Command::ExportSvg(a) => cmd_export_svg(a),
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            // Degenerate/invalid queries exit 2, everything else 1.
            let code = match err.downcast_ref::<LevisError>() {
                Some(LevisError::InvalidQuery(_)) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
