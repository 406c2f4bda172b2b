//! LP kernel validation against an exact rational vertex-enumeration oracle,
//! plus dual certificates on the same suite.

use levis_core::testkit::{check_dual_certificate, random_int_lp, rational_to_f64, rational_vertex_optimum};
use levis_core::lp::{solve_lp, LpOutcome};

#[test]
fn random_suite_matches_rational_oracle() {
    let mut solved = 0;
    for seed in 0..200u64 {
        let ilp = random_int_lp(seed);
        let expect = rational_vertex_optimum(&ilp)
            .map(|r| rational_to_f64(&r))
            .expect("generated LPs are feasible and bounded");
        let outcome = solve_lp(&ilp.lp).expect("no stall on the random suite");
        let sol = match outcome {
            LpOutcome::Optimal(s) => s,
            other => panic!("seed {seed}: expected optimal, got {other:?}"),
        };
        assert!(
            (sol.objective - expect).abs() <= 1e-6,
            "seed {seed}: solver {} vs oracle {expect}",
            sol.objective
        );
        solved += 1;
    }
    assert_eq!(solved, 200);
}

#[test]
fn duality_certificates_on_random_suite() {
    for seed in 0..200u64 {
        let ilp = random_int_lp(seed);
        let sol = match solve_lp(&ilp.lp).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("seed {seed}: expected optimal, got {other:?}"),
        };
        check_dual_certificate(
            &ilp,
            &sol.x,
            sol.objective,
            &sol.row_duals,
            &sol.reduced_costs,
            1e-5,
        );
    }
}

#[test]
fn primal_solutions_are_feasible() {
    for seed in 200..280u64 {
        let ilp = random_int_lp(seed);
        let sol = match solve_lp(&ilp.lp).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("seed {seed}: expected optimal, got {other:?}"),
        };
        for (j, &v) in sol.x.iter().enumerate() {
            assert!(v >= ilp.lower[j] as f64 - 1e-7 && v <= ilp.upper[j] as f64 + 1e-7);
        }
        for (coeffs, sense, rhs) in &ilp.rows {
            let act: f64 = coeffs
                .iter()
                .zip(sol.x.iter())
                .map(|(&c, &v)| c as f64 * v)
                .sum();
            let rhs = *rhs as f64;
            let ok = match sense {
                levis_core::lp::Sense::Le => act <= rhs + 1e-7,
                levis_core::lp::Sense::Ge => act >= rhs - 1e-7,
                levis_core::lp::Sense::Eq => (act - rhs).abs() <= 1e-7,
            };
            assert!(ok, "seed {seed}: row violated ({act} vs {rhs})");
        }
    }
}
