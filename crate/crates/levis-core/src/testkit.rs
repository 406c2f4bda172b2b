//! Test support behind the `testkit` feature: a rational-arithmetic
//! vertex-enumeration oracle for small LPs, a random LP generator with
//! guaranteed feasibility, and seeded verification fixtures with a
//! guaranteed in-box adversary. Used by the integration and acceptance
//! suites; not part of the solver API.

use crate::fixtures;
use crate::lp::{LinearProgram, LpRow, Sense};
use crate::net::{HalfSpace, InputBox, Network, Specification};
use ndarray::{Array1, Array2};
use num::rational::BigRational;
use num::{BigInt, FromPrimitive, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rat(i: i64) -> BigRational {
    BigRational::from_integer(BigInt::from_i64(i).unwrap())
}

/// A generated LP whose data is exactly representable as small integers.
pub struct IntLp {
    pub lp: LinearProgram,
    pub obj: Vec<i64>,
    pub rows: Vec<(Vec<i64>, Sense, i64)>,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
}

/// Random feasible bounded LP: every variable is boxed and the right-hand
/// sides are built from an interior integer point, so an optimum exists.
pub fn random_int_lp(seed: u64) -> IntLp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4usize);
    let m = rng.gen_range(1..=n + 1);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let l = rng.gen_range(-4..=0i64);
        let u = l + rng.gen_range(1..=8i64);
        lower.push(l);
        upper.push(u);
        x0.push(rng.gen_range(l..=u));
    }
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5i64)).collect();
        if coeffs.iter().all(|&c| c == 0) {
            coeffs[0] = 1;
        }
        let at_x0: i64 = coeffs.iter().zip(&x0).map(|(c, x)| c * x).sum();
        let (sense, rhs) = match rng.gen_range(0..6u8) {
            0 => (Sense::Eq, at_x0),
            1 | 2 => (Sense::Ge, at_x0 - rng.gen_range(0..=6i64)),
            _ => (Sense::Le, at_x0 + rng.gen_range(0..=6i64)),
        };
        rows.push((coeffs, sense, rhs));
    }
    let obj: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5i64)).collect();

    let lp = LinearProgram {
        objective: Array1::from_iter(obj.iter().map(|&v| v as f64)),
        rows: rows
            .iter()
            .map(|(c, s, r)| LpRow {
                coeffs: Array1::from_iter(c.iter().map(|&v| v as f64)),
                sense: *s,
                rhs: *r as f64,
            })
            .collect(),
        lower: Array1::from_iter(lower.iter().map(|&v| v as f64)),
        upper: Array1::from_iter(upper.iter().map(|&v| v as f64)),
    };
    IntLp {
        lp,
        obj,
        rows,
        lower,
        upper,
    }
}

/// Exact rational Gaussian elimination; `None` when singular.
fn solve_square(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = b.len();
    let mut m: Vec<Vec<BigRational>> = a.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let piv = (k..n).find(|&i| !m[i][k].is_zero())?;
        m.swap(k, piv);
        rhs.swap(k, piv);
        for i in k + 1..n {
            if m[i][k].is_zero() {
                continue;
            }
            let f = &m[i][k] / &m[k][k];
            for j in k..n {
                let t = &f * &m[k][j];
                m[i][j] = &m[i][j] - &t;
            }
            let t = &f * &rhs[k];
            rhs[i] = &rhs[i] - &t;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for k in (0..n).rev() {
        let mut acc = rhs[k].clone();
        for j in k + 1..n {
            let t = &m[k][j] * &x[j];
            acc = acc - t;
        }
        x[k] = acc / m[k][k].clone();
    }
    Some(x)
}

/// Exact optimum by vertex enumeration: every subset of n constraints (with
/// equality rows forced in) defines a candidate vertex; feasible candidates
/// are scored exactly.
pub fn rational_vertex_optimum(ilp: &IntLp) -> Option<BigRational> {
    let n = ilp.obj.len();
    // Constraint list: rows, then upper bounds, then lower bounds.
    let mut cons: Vec<(Vec<BigRational>, BigRational, Sense)> = Vec::new();
    for (coeffs, sense, rhs) in &ilp.rows {
        cons.push((
            coeffs.iter().map(|&c| rat(c)).collect(),
            rat(*rhs),
            *sense,
        ));
    }
    for j in 0..n {
        let mut e = vec![BigRational::zero(); n];
        e[j] = rat(1);
        cons.push((e, rat(ilp.upper[j]), Sense::Le));
        let mut e = vec![BigRational::zero(); n];
        e[j] = rat(-1);
        cons.push((e, rat(-ilp.lower[j]), Sense::Le));
    }
    let eq_idx: Vec<usize> = cons
        .iter()
        .enumerate()
        .filter(|(_, c)| c.2 == Sense::Eq)
        .map(|(i, _)| i)
        .collect();
    let rest: Vec<usize> = (0..cons.len()).filter(|i| !eq_idx.contains(i)).collect();
    if eq_idx.len() > n {
        return None;
    }
    let need = n - eq_idx.len();

    let mut best: Option<BigRational> = None;
    let mut choice = vec![0usize; need];
    fn combos(rest: &[usize], need: usize, start: usize, choice: &mut Vec<usize>, pos: usize, f: &mut impl FnMut(&[usize])) {
        if pos == need {
            f(choice);
            return;
        }
        for i in start..rest.len() {
            choice[pos] = rest[i];
            combos(rest, need, i + 1, choice, pos + 1, f);
        }
    }
    let cons_ref = &cons;
    let obj: Vec<BigRational> = ilp.obj.iter().map(|&c| rat(c)).collect();
    let mut visit = |subset: &[usize]| {
        let active: Vec<usize> = eq_idx.iter().chain(subset.iter()).copied().collect();
        let a: Vec<Vec<BigRational>> = active.iter().map(|&i| cons_ref[i].0.clone()).collect();
        let b: Vec<BigRational> = active.iter().map(|&i| cons_ref[i].1.clone()).collect();
        let Some(x) = solve_square(&a, &b) else {
            return;
        };
        // Exact feasibility against every constraint.
        for (coeffs, rhs, sense) in cons_ref {
            let dot: BigRational = coeffs
                .iter()
                .zip(&x)
                .map(|(c, v)| c * v)
                .fold(BigRational::zero(), |a, t| a + t);
            let ok = match sense {
                Sense::Le => dot <= *rhs,
                Sense::Ge => dot >= *rhs,
                Sense::Eq => dot == *rhs,
            };
            if !ok {
                return;
            }
        }
        let val: BigRational = obj
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .fold(BigRational::zero(), |a, t| a + t);
        if best.as_ref().map_or(true, |b| val < *b) {
            best = Some(val);
        }
    };
    if need == 0 {
        visit(&[]);
    } else {
        combos(&rest, need, 0, &mut choice, 0, &mut visit);
    }
    best
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let numer = r.numer();
    let denom = r.denom();
    // Small magnitudes in these tests; direct conversion is exact enough.
    let n = numer.to_string().parse::<f64>().unwrap_or_else(|_| {
        if numer.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    });
    let d = denom.to_string().parse::<f64>().unwrap();
    n / d
}

/// A seeded 2-input verification instance whose center is verified and whose
/// box provably contains an adversary: the output threshold sits halfway
/// between the center value and the coarse grid minimum.
pub struct VerifInstance {
    pub net: Network,
    pub spec: Specification,
    pub center: Array1<f64>,
    pub bbox: InputBox,
}

pub fn random_verified_instance(seed: u64, hidden: &[usize], half_width: f64) -> Option<VerifInstance> {
    let net = fixtures::random_net(seed, 2, hidden, 1);
    let bbox = InputBox::symmetric(2, half_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // Coarse scan for the minimum output over the box.
    let steps = 60;
    let mut fmin = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = ndarray::array![
                -half_width + 2.0 * half_width * i as f64 / steps as f64,
                -half_width + 2.0 * half_width * j as f64 / steps as f64
            ];
            fmin = fmin.min(net.forward(&x).unwrap().output[0]);
        }
    }
    for _ in 0..50 {
        let center = Array1::from_iter([
            rng.gen_range(-0.5 * half_width..0.5 * half_width),
            rng.gen_range(-0.5 * half_width..0.5 * half_width),
        ]);
        let fc = net.forward(&center).unwrap().output[0];
        if fc - fmin < 0.05 {
            continue; // too flat around this center
        }
        let threshold = 0.5 * (fc + fmin);
        let spec =
            Specification::new(vec![HalfSpace { a: ndarray::array![1.0], b: -threshold }]).unwrap();
        if spec.eval(&net.forward(&center).unwrap().output).unwrap().verified {
            return Some(VerifInstance {
                net,
                spec,
                center,
                bbox,
            });
        }
    }
    None
}

/// Verify a dual certificate for an `Optimal` outcome: reduced costs match
/// `c − Aᵀy`, signs fit the senses, and the dual objective equals the primal.
pub fn check_dual_certificate(ilp: &IntLp, x: &Array1<f64>, obj: f64, y: &[f64], d: &[f64], tol: f64) {
    let n = ilp.obj.len();
    // Reduced costs consistent with the duals.
    for j in 0..n {
        let mut t = ilp.obj[j] as f64;
        for (i, (coeffs, _, _)) in ilp.rows.iter().enumerate() {
            t -= y[i] * coeffs[j] as f64;
        }
        assert!(
            (t - d[j]).abs() <= 1e-6,
            "reduced cost mismatch at {j}: {t} vs {}",
            d[j]
        );
    }
    // Sense-consistent dual signs and complementary slackness.
    for (i, (coeffs, sense, rhs)) in ilp.rows.iter().enumerate() {
        let act: f64 = coeffs.iter().zip(x.iter()).map(|(&c, &v)| c as f64 * v).sum();
        match sense {
            Sense::Le => assert!(y[i] <= tol, "row {i}: Le dual {} > 0", y[i]),
            Sense::Ge => assert!(y[i] >= -tol, "row {i}: Ge dual {} < 0", y[i]),
            Sense::Eq => {}
        }
        if y[i].abs() > tol {
            assert!(
                (act - *rhs as f64).abs() <= 1e-5,
                "row {i}: inactive row has dual {}",
                y[i]
            );
        }
    }
    // Strong duality over the box: g(y) = y·b + Σ_j min(d_j l_j, d_j u_j).
    let mut g = 0.0;
    for (i, (_, _, rhs)) in ilp.rows.iter().enumerate() {
        g += y[i] * *rhs as f64;
    }
    for j in 0..n {
        g += if d[j] >= 0.0 {
            d[j] * ilp.lower[j] as f64
        } else {
            d[j] * ilp.upper[j] as f64
        };
    }
    assert!(
        (g - obj).abs() <= tol * obj.abs().max(1.0),
        "duality gap: dual {g} vs primal {obj}"
    );
}

/// Batch forward pass used by the test-side grid scans.
pub fn forward_batch(net: &Network, points: &Array2<f64>) -> Array2<f64> {
    let mut cur = points.clone();
    let hidden = net.hidden_layer_count();
    for layer in &net.layers()[..hidden] {
        cur = cur.dot(&layer.weight.t()) + &layer.bias;
        cur.mapv_inplace(|v| v.max(0.0));
    }
    let last = &net.layers()[hidden];
    cur.dot(&last.weight.t()) + &last.bias
}
