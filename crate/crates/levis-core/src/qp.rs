//! Primal active-set solver for the fixed-pattern Euclidean leaf problem
//! `min ½‖x − c‖²  s.t.  G x ≤ h`.
//!
//! Equality subproblems are solved by normal equations on the working set:
//! `(G_W G_Wᵀ) μ = G_W c − h_W`, `x = c − G_Wᵀ μ`. Problems here are tiny
//! (dimension = network input dim, a few dozen rows), so dense Gaussian
//! elimination with partial pivoting is plenty.

use ndarray::{Array1, Array2};

use crate::error::{LevisError, Result};

const QP_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 500;

/// Solve the dense symmetric system `m·y = rhs` in place; near-zero pivots
/// (dependent working-set rows) get a zero multiplier.
fn solve_symmetric(mut m: Array2<f64>, mut rhs: Array1<f64>) -> Array1<f64> {
    let n = rhs.len();
    let scale = m.iter().fold(1e-12_f64, |a, v| a.max(v.abs()));
    for k in 0..n {
        let (mut piv_row, mut piv_val) = (k, 0.0_f64);
        for i in k..n {
            let v = m[[i, k]].abs();
            if v > piv_val {
                piv_val = v;
                piv_row = i;
            }
        }
        if piv_val <= 1e-12 * scale {
            // Dependent row: zero out and carry on.
            for i in k..n {
                m[[i, k]] = 0.0;
            }
            continue;
        }
        if piv_row != k {
            for j in 0..n {
                let tmp = m[[k, j]];
                m[[k, j]] = m[[piv_row, j]];
                m[[piv_row, j]] = tmp;
            }
            rhs.swap(k, piv_row);
        }
        for i in k + 1..n {
            let f = m[[i, k]] / m[[k, k]];
            if f != 0.0 {
                for j in k..n {
                    m[[i, j]] -= f * m[[k, j]];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    let mut y = Array1::zeros(n);
    for k in (0..n).rev() {
        if m[[k, k]].abs() <= 1e-12 * scale {
            y[k] = 0.0;
            continue;
        }
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= m[[k, j]] * y[j];
        }
        y[k] = acc / m[[k, k]];
    }
    y
}

/// Nearest point to `center` in the polyhedron `{x : g_i·x ≤ h_i}`, starting
/// from a feasible `x0`. Convergence tolerance 1e-8 on steps and multipliers.
pub(crate) fn nearest_point_qp(
    center: &Array1<f64>,
    g: &Array2<f64>,
    h: &Array1<f64>,
    x0: &Array1<f64>,
) -> Result<Array1<f64>> {
    let m = g.nrows();
    let mut x = x0.clone();
    // Start with the constraints active at x0.
    let mut working: Vec<usize> = (0..m)
        .filter(|&i| (g.row(i).dot(&x) - h[i]).abs() <= QP_TOL)
        .collect();

    for _ in 0..MAX_ITERS {
        // Equality subproblem on the working set.
        let k = working.len();
        let (x_sub, mu) = if k == 0 {
            (center.clone(), Array1::zeros(0))
        } else {
            let mut gw = Array2::zeros((k, g.ncols()));
            let mut rhs = Array1::zeros(k);
            for (r, &i) in working.iter().enumerate() {
                gw.row_mut(r).assign(&g.row(i));
                rhs[r] = g.row(i).dot(center) - h[i];
            }
            let gram = gw.dot(&gw.t());
            let mu = solve_symmetric(gram, rhs);
            (center - &gw.t().dot(&mu), mu)
        };

        let step = &x_sub - &x;
        let step_norm = step.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if step_norm <= QP_TOL {
            // Stationary on the working set; check multiplier signs.
            match working
                .iter()
                .enumerate()
                .filter(|&(r, _)| mu[r] < -QP_TOL)
                .min_by(|a, b| mu[a.0].partial_cmp(&mu[b.0]).unwrap())
            {
                None => return Ok(x),
                Some((r, _)) => {
                    working.remove(r);
                    continue;
                }
            }
        }

        // Step toward x_sub, blocked by the first violated inactive row.
        let mut alpha = 1.0_f64;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) {
                continue;
            }
            let gd = g.row(i).dot(&step);
            if gd > QP_TOL {
                let room = h[i] - g.row(i).dot(&x);
                let a = (room / gd).max(0.0);
                if a < alpha - 1e-14 {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        x = &x + &(step * alpha);
        if let Some(i) = blocking {
            working.push(i);
            working.sort_unstable();
        }
    }
    Err(LevisError::Numerical(
        "active-set QP failed to converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn projection_onto_halfplane() {
        // Project (0,0) onto x1 >= 2, i.e. -x1 <= -2.
        let g = array![[-1.0, 0.0]];
        let h = array![-2.0];
        let x = nearest_point_qp(&array![0.0, 0.0], &g, &h, &array![3.0, 1.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-8);
        assert!(x[1].abs() < 1e-8);
    }

    #[test]
    fn projection_onto_box_corner() {
        // Feasible set: x >= 1 componentwise; center at origin -> corner (1,1).
        let g = array![[-1.0, 0.0], [0.0, -1.0]];
        let h = array![-1.0, -1.0];
        let x = nearest_point_qp(&array![0.0, 0.0], &g, &h, &array![2.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn interior_center_returns_center() {
        let g = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let h = array![5.0, 5.0, 5.0, 5.0];
        let c = array![0.25, -0.75];
        let x = nearest_point_qp(&c, &g, &h, &array![4.0, 4.0]).unwrap();
        assert!((&x - &c).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn projection_matches_analytic_on_slab() {
        // Slab 1 <= x1 + x2 <= 4 shifted; nearest point to c on the lower face.
        let g = array![[-1.0, -1.0], [1.0, 1.0]];
        let h = array![-2.0, 8.0];
        let c = array![0.0, 0.0];
        let x = nearest_point_qp(&c, &g, &h, &array![2.0, 2.0]).unwrap();
        // Projection of origin onto x1+x2 >= 2 is (1,1).
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn redundant_rows_do_not_break_the_solve() {
        let g = array![[-1.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]];
        let h = array![-2.0, -2.0, -4.0];
        let x = nearest_point_qp(&array![0.0, 0.0], &g, &h, &array![2.0, 0.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-8);
    }
}
