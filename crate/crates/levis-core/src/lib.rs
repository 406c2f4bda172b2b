//! Exact adversarial-free input regions for ReLU networks.
//!
//! The crate identifies "verifiable balls" — p-norm balls around a center
//! whose open interior contains no input violating an output specification —
//! and unions of such balls. The pieces:
//!
//! - [`net`]: network / specification / geometry data model and exact forward
//!   evaluation.
//! - [`bounds`]: interval bounds per hidden neuron over a box, and the Big-M
//!   constants they induce.
//! - [`lp`]: dense bounded-variable simplex, the relaxation engine.
//! - [`milp`]: branch-and-bound over ReLU activation binaries; nearest and
//!   directional adversarial points with global optimality.
//! - [`cc`]: fast hybrid solver — complementarity-constrained NLP relaxation,
//!   neuron phase classification, and a reduced MIP over the ambiguous set.
//! - [`search`]: the ball-refinement and ball-union search strategies.
//! - [`oracle`]: brute-force grid/ray/sampling oracles and the Lipschitz
//!   lower-bound baseline.
//! - [`fixtures`]: small hand-built and seeded networks for tests and demos.

pub mod bounds;
pub mod cc;
pub mod error;
pub mod fixtures;
pub mod lp;
pub mod milp;
pub mod net;
pub mod oracle;
pub mod search;
#[cfg(feature = "testkit")]
pub mod testkit;

mod encode;
mod qp;

pub use error::{LevisError, Result};
pub use net::{
    ActivationPattern, Ball, ForwardTrace, HalfSpace, InputBox, Layer, Network, Norm, Phase,
    SpecEval, Specification,
};

/// Half-width of the default search box imposed when a query has no explicit
/// box. Big-M encodings need finite bounds; the value is deliberately loud in
/// outputs so callers can widen or replace it.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 1e4;
