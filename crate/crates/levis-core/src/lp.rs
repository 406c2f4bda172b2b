//! Dense primal simplex with bounded variables.
//!
//! The relaxation engine used by branch-and-bound, the fixed-pattern region
//! solves, and the optional bound-tightening pass. Two-phase method on a dense
//! tableau: rows are converted to equalities with slack variables, artificial
//! variables cover rows infeasible at the initial bound assignment, and phase
//! one minimizes the artificial sum. Dantzig pricing with a switch to Bland's
//! rule after 5,000 degenerate pivots guarantees termination; the hard pivot
//! cap surfaces as an explicit error instead of a wrong answer.

use ndarray::Array1;

use crate::error::{LevisError, Result};

/// Row sense for [`LpRow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Array1<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min objective·x` subject to `rows` and `lower ≤ x ≤ upper`
/// (infinite bounds allowed).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Array1<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Array1<f64>,
    pub upper: Array1<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LevisError::DimensionMismatch(
                "bound vectors do not match objective length".into(),
            ));
        }
        if self.objective.iter().any(|c| c.is_nan())
            || self.lower.iter().any(|c| c.is_nan())
            || self.upper.iter().any(|c| c.is_nan())
        {
            return Err(LevisError::InvalidArgument("NaN in LP data".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LevisError::DimensionMismatch(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if row.coeffs.iter().any(|c| c.is_nan()) || row.rhs.is_nan() {
                return Err(LevisError::InvalidArgument(format!("NaN in LP row {i}")));
            }
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] {
                return Err(LevisError::InvalidArgument(format!(
                    "variable {j}: lower bound {} exceeds upper bound {}",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    /// One dual multiplier per input row.
    pub row_duals: Vec<f64>,
    /// Reduced costs of the structural variables at the optimum.
    pub reduced_costs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

const FEAS_TOL: f64 = 1e-7;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const DEGEN_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 1_000_000;
const BLAND_AFTER_DEGEN: usize = 5_000;
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NbState {
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeZero,
}

struct Tableau {
    m: usize,
    ntot: usize,
    /// Row-major `m × (ntot + 1)`; the last column is `B⁻¹ b`.
    tab: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    nb_state: Vec<NbState>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    degen_count: usize,
    pivots: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot_op(&mut self, r: usize, j: usize) {
        let w = self.ntot + 1;
        let piv = self.tab[r * w + j];
        let inv = 1.0 / piv;
        for v in &mut self.tab[r * w..(r + 1) * w] {
            *v *= inv;
        }
        // Split borrows: copy the pivot row once, then eliminate.
        let prow: Vec<f64> = self.tab[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + j];
            if f != 0.0 {
                let row = &mut self.tab[i * w..(i + 1) * w];
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        let f = self.cost[j];
        if f != 0.0 {
            for (a, b) in self.cost.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
        }
    }

    /// Recompute basic variable values from the tableau to shed drift.
    fn refresh_basic_values(&mut self) {
        let w = self.ntot + 1;
        let mut vals: Vec<f64> = (0..self.m).map(|i| self.tab[i * w + self.ntot]).collect();
        for j in 0..self.ntot {
            if self.in_basis[j] || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for (i, v) in vals.iter_mut().enumerate() {
                *v -= self.tab[i * w + j] * xj;
            }
        }
        for (i, v) in vals.into_iter().enumerate() {
            self.x[self.basis[i]] = v;
        }
    }

    /// Rebuild the reduced-cost row for a new cost vector.
    fn install_costs(&mut self, c: &[f64]) {
        let w = self.ntot + 1;
        self.cost.copy_from_slice(c);
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.ntot {
                    self.cost[j] -= cb * self.tab[i * w + j];
                }
            }
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (j, dir, score)
        for j in 0..self.ntot {
            if self.in_basis[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.cost[j];
            let cand = match self.nb_state[j] {
                NbState::AtLower => (d < -OPT_TOL).then_some((1.0, -d)),
                NbState::AtUpper => (d > OPT_TOL).then_some((-1.0, d)),
                NbState::FreeZero => {
                    if d < -OPT_TOL {
                        Some((1.0, -d))
                    } else if d > OPT_TOL {
                        Some((-1.0, d))
                    } else {
                        None
                    }
                }
            };
            if let Some((dir, score)) = cand {
                if bland {
                    return Some((j, dir));
                }
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run_phase(&mut self, detect_unbounded: bool) -> Result<PhaseEnd> {
        let w = self.ntot + 1;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LevisError::LpStalled(self.pivots));
            }
            let bland = self.degen_count > BLAND_AFTER_DEGEN;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };

            // Ratio test: how far can x_j move in direction `dir`?
            let flip = if self.lo[j].is_finite() && self.hi[j].is_finite() {
                self.hi[j] - self.lo[j]
            } else {
                f64::INFINITY
            };
            let mut t_best = flip;
            let mut leave: Option<(usize, f64)> = None; // (row, |pivot|)
            for i in 0..self.m {
                let wij = self.tab[i * w + j] * dir;
                let b = self.basis[i];
                let t = if wij > PIVOT_TOL {
                    if self.lo[b].is_finite() {
                        (self.x[b] - self.lo[b]) / wij
                    } else {
                        continue;
                    }
                } else if wij < -PIVOT_TOL {
                    if self.hi[b].is_finite() {
                        (self.hi[b] - self.x[b]) / (-wij)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let mag = self.tab[i * w + j].abs();
                let better = match leave {
                    None => t < t_best - 1e-12,
                    Some((li, lmag)) => {
                        if t < t_best - 1e-12 {
                            true
                        } else if t <= t_best + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                mag > lmag + 1e-12 || (mag >= lmag - 1e-12 && i < li)
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    t_best = t.min(t_best);
                    leave = Some((i, mag));
                }
            }

            if t_best.is_infinite() {
                if detect_unbounded {
                    return Ok(PhaseEnd::Unbounded);
                }
                return Err(LevisError::Numerical(
                    "phase-1 ratio test found no blocking bound".into(),
                ));
            }

            if t_best <= DEGEN_TOL {
                self.degen_count += 1;
            }

            match leave {
                None => {
                    // Bound flip: x_j jumps to its opposite bound, no basis change.
                    let delta = dir * flip;
                    for i in 0..self.m {
                        let wij = self.tab[i * w + j];
                        if wij != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= delta * wij;
                        }
                    }
                    self.x[j] += delta;
                    self.nb_state[j] = match self.nb_state[j] {
                        NbState::AtLower => NbState::AtUpper,
                        NbState::AtUpper => NbState::AtLower,
                        NbState::FreeZero => unreachable!("free variables have no bounds to flip"),
                    };
                }
                Some((r, _)) => {
                    let delta = dir * t_best;
                    for i in 0..self.m {
                        if i == r {
                            continue;
                        }
                        let wij = self.tab[i * w + j];
                        if wij != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= delta * wij;
                        }
                    }
                    let newval = self.x[j] + delta;
                    let leaving = self.basis[r];
                    // Pin the leaving variable to the bound it hit.
                    let wrj = self.tab[r * w + j] * dir;
                    if wrj > 0.0 {
                        self.x[leaving] = self.lo[leaving];
                        self.nb_state[leaving] = NbState::AtLower;
                    } else {
                        self.x[leaving] = self.hi[leaving];
                        self.nb_state[leaving] = NbState::AtUpper;
                    }
                    self.in_basis[leaving] = false;
                    self.x[j] = newval;
                    self.in_basis[j] = true;
                    self.basis[r] = j;
                    self.pivot_op(r, j);
                }
            }
            self.pivots += 1;
            if self.pivots % REFRESH_EVERY == 0 {
                self.refresh_basic_values();
            }
        }
    }
}

/// Solve a bounded-variable LP. Deterministic for identical input.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.rows.len();

    // Column layout: structural | slack (one per row, Eq rows skipped) | artificial.
    let num_slack = lp.rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let slack_col: Vec<Option<usize>> = {
        let mut next = n;
        lp.rows
            .iter()
            .map(|r| {
                if r.sense == Sense::Eq {
                    None
                } else {
                    let c = next;
                    next += 1;
                    Some(c)
                }
            })
            .collect()
    };

    // Initial structural values: the finite bound nearest zero, or zero if free.
    let mut x0 = vec![0.0; n];
    let mut nb0 = vec![NbState::FreeZero; n];
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() && u.is_finite() {
            if l.abs() <= u.abs() {
                x0[j] = l;
                nb0[j] = NbState::AtLower;
            } else {
                x0[j] = u;
                nb0[j] = NbState::AtUpper;
            }
        } else if l.is_finite() {
            x0[j] = l;
            nb0[j] = NbState::AtLower;
        } else if u.is_finite() {
            x0[j] = u;
            nb0[j] = NbState::AtUpper;
        }
    }

    // Row residuals decide whether the slack can start basic or an artificial
    // is needed; rows taking an artificial are scaled so its column is +e_i.
    let mut resid = vec![0.0; m];
    for (i, row) in lp.rows.iter().enumerate() {
        let mut dot = 0.0;
        for j in 0..n {
            dot += row.coeffs[j] * x0[j];
        }
        resid[i] = row.rhs - dot;
    }
    let mut needs_artificial = vec![false; m];
    let mut row_scale = vec![1.0; m];
    for (i, row) in lp.rows.iter().enumerate() {
        let slack_ok = match row.sense {
            Sense::Le => resid[i] >= 0.0,
            Sense::Ge => resid[i] <= 0.0,
            Sense::Eq => false,
        };
        if !slack_ok {
            needs_artificial[i] = true;
            if resid[i] < 0.0 {
                row_scale[i] = -1.0;
            }
        }
    }
    let num_art: usize = needs_artificial.iter().filter(|b| **b).count();
    let ntot = n + num_slack + num_art;

    let mut t = Tableau {
        m,
        ntot,
        tab: vec![0.0; m * (ntot + 1)],
        cost: vec![0.0; ntot],
        basis: vec![usize::MAX; m],
        in_basis: vec![false; ntot],
        nb_state: vec![NbState::FreeZero; ntot],
        x: vec![0.0; ntot],
        lo: vec![f64::NEG_INFINITY; ntot],
        hi: vec![f64::INFINITY; ntot],
        degen_count: 0,
        pivots: 0,
    };
    let w = ntot + 1;
    for j in 0..n {
        t.lo[j] = lp.lower[j];
        t.hi[j] = lp.upper[j];
        t.x[j] = x0[j];
        t.nb_state[j] = nb0[j];
    }

    let mut art_cols = Vec::with_capacity(num_art);
    let mut ident_col = vec![usize::MAX; m];
    {
        let mut next_art = n + num_slack;
        for (i, row) in lp.rows.iter().enumerate() {
            let s = row_scale[i];
            for j in 0..n {
                t.tab[i * w + j] = s * row.coeffs[j];
            }
            t.tab[i * w + ntot] = s * row.rhs;
            if let Some(sc) = slack_col[i] {
                t.tab[i * w + sc] = s;
                match row.sense {
                    Sense::Le => {
                        t.lo[sc] = 0.0;
                        t.hi[sc] = f64::INFINITY;
                    }
                    Sense::Ge => {
                        t.lo[sc] = f64::NEG_INFINITY;
                        t.hi[sc] = 0.0;
                    }
                    Sense::Eq => unreachable!(),
                }
                t.x[sc] = 0.0;
                t.nb_state[sc] = if row.sense == Sense::Le {
                    NbState::AtLower
                } else {
                    NbState::AtUpper
                };
            }
            if needs_artificial[i] {
                let ac = next_art;
                next_art += 1;
                t.tab[i * w + ac] = 1.0;
                t.lo[ac] = 0.0;
                t.x[ac] = s * resid[i];
                t.basis[i] = ac;
                t.in_basis[ac] = true;
                art_cols.push(ac);
                ident_col[i] = ac;
            } else {
                let sc = slack_col[i].expect("rows without artificials have slacks");
                t.x[sc] = resid[i];
                t.basis[i] = sc;
                t.in_basis[sc] = true;
                ident_col[i] = sc;
            }
        }
    }

    // Phase 1: drive the artificials to zero.
    if num_art > 0 {
        let mut c1 = vec![0.0; ntot];
        for &ac in &art_cols {
            c1[ac] = 1.0;
        }
        t.install_costs(&c1);
        match t.run_phase(false)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(LevisError::Numerical("phase 1 reported unbounded".into()))
            }
        }
        t.refresh_basic_values();
        let infeas: f64 = art_cols.iter().map(|&ac| t.x[ac].abs()).sum();
        if infeas > FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // Pivot lingering artificials out of the basis where possible, then
        // freeze all of them at zero.
        for r in 0..m {
            let b = t.basis[r];
            if b >= n + num_slack {
                let col = (0..n + num_slack)
                    .find(|&j| !t.in_basis[j] && t.tab[r * w + j].abs() > 1e-8);
                if let Some(j) = col {
                    t.in_basis[b] = false;
                    t.x[b] = 0.0;
                    t.nb_state[b] = NbState::AtLower;
                    t.in_basis[j] = true;
                    t.basis[r] = j;
                    t.pivot_op(r, j);
                    let rhs = t.tab[r * w + ntot];
                    let _ = rhs;
                    t.refresh_basic_values();
                }
            }
        }
        for &ac in &art_cols {
            t.lo[ac] = 0.0;
            t.hi[ac] = 0.0;
            if !t.in_basis[ac] {
                t.x[ac] = 0.0;
                t.nb_state[ac] = NbState::AtLower;
            }
        }
    }

    // Phase 2: the real objective.
    let mut c2 = vec![0.0; ntot];
    c2[..n].copy_from_slice(lp.objective.as_slice().expect("contiguous"));
    t.install_costs(&c2);
    let end = t.run_phase(true)?;
    t.refresh_basic_values();
    if matches!(end, PhaseEnd::Unbounded) {
        return Ok(LpOutcome::Unbounded);
    }

    let x = Array1::from_iter(t.x[..n].iter().copied());
    let objective = lp.objective.dot(&x);
    let row_duals: Vec<f64> = (0..m)
        .map(|i| -t.cost[ident_col[i]] * row_scale[i])
        .collect();
    let reduced_costs = t.cost[..n].to_vec();
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        objective,
        row_duals,
        reduced_costs,
    }))
}
