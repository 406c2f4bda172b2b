//! Scratch diagnostics for the hybrid certificate path.

use levis_core::cc::{classify_neurons, reduced_mip, solve_cc_nlp, ReducedOutcome};
use levis_core::milp::{nearest_adversarial, AdversaryQuery, NearestOutcome, SolverConfig};
use levis_core::net::Norm;
use levis_core::testkit::random_verified_instance;

fn main() {
    let inst = random_verified_instance(1, &[16, 16], 1.2).unwrap();
    let norm = Norm::LInf;

    let q = AdversaryQuery::new(&inst.net, &inst.spec, inst.center.clone(), norm, inst.bbox.clone());
    let full = match nearest_adversarial(&q).unwrap() {
        NearestOutcome::Found { ball, .. } => ball,
        other => panic!("{other:?}"),
    };
    println!("full r = {}", full.radius);
    let wz = inst.net.forward(full.witness.as_ref().unwrap()).unwrap();
    let small: Vec<(usize, f64)> = wz
        .pre
        .iter()
        .flatten()
        .enumerate()
        .filter(|(_, z)| z.abs() < 1e-4)
        .map(|(i, z)| (i, *z))
        .collect();
    println!("full witness near-zero pre-activations: {small:?}");

    let nlp = solve_cc_nlp(
        &inst.net,
        &inst.spec,
        &inst.center,
        norm,
        &inst.bbox,
        levis_core::cc::DEFAULT_EPS_REG,
        1,
    )
    .unwrap();
    println!(
        "nlp: converged {}, distance {}, iterations {}",
        nlp.converged, nlp.distance, nlp.inner_iterations
    );
    let cz = inst.net.forward(&nlp.candidate).unwrap();
    let small: Vec<(usize, f64)> = cz
        .pre
        .iter()
        .flatten()
        .enumerate()
        .filter(|(_, z)| z.abs() < 1e-4)
        .map(|(i, z)| (i, *z))
        .collect();
    println!("polished candidate near-zero pre-activations: {small:?}");
    let margins = inst.spec.eval(&cz.output).unwrap();
    println!(
        "polished candidate margins: {:?} verified {} dist {}",
        margins.margins,
        margins.verified,
        norm.dist(&nlp.candidate, &inst.center)
    );

    let phases = classify_neurons(&nlp.state, levis_core::cc::DEFAULT_TAU);
    println!(
        "phases: |I+| {}, |I-| {}, |I0| {} -> {:?}",
        phases.active.len(),
        phases.inactive.len(),
        phases.biactive.len(),
        phases.biactive
    );

    match reduced_mip(
        &inst.net,
        &inst.spec,
        &inst.center,
        norm,
        &inst.bbox,
        &phases,
        &SolverConfig::default(),
    )
    .unwrap()
    {
        ReducedOutcome::Found { ball, .. } => {
            println!("reduced r = {}", ball.radius);
            let rz = inst.net.forward(ball.witness.as_ref().unwrap()).unwrap();
            let z: Vec<f64> = rz.pre.iter().flatten().copied().collect();
            for &f in &phases.active {
                if z[f] <= 1e-7 {
                    println!("BINDING pinned-active neuron {f}: z = {}", z[f]);
                }
            }
            for &f in &phases.inactive {
                if z[f] >= -1e-7 {
                    println!("BINDING pinned-inactive neuron {f}: z = {}", z[f]);
                }
            }
        }
        other => println!("reduced outcome: {other:?}"),
    }
}
