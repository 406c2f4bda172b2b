//! Timing scratchpad: hybrid vs full MIP across fixture sizes.

use levis_core::cc::{hybrid_nearest_adversarial, HybridOptions};
use levis_core::milp::SolverConfig;
use levis_core::net::Norm;
use levis_core::testkit::random_verified_instance;
use std::time::Instant;

fn main() {
    let mut wins = 0;
    let mut total = 0;
    for (widths, label) in [
        (vec![32usize, 16], "32x16"),
        (vec![24, 16], "24x16"),
        (vec![24, 24], "24x24"),
        (vec![32, 24], "32x24"),
    ] {
        for seed in 1..=10u64 {
            let Some(inst) = random_verified_instance(seed, &widths, 1.1) else {
                continue;
            };
            let unstable = levis_core::bounds::interval_bounds(&inst.net, &inst.bbox)
                .unwrap()
                .unstable_count();
            let opts = HybridOptions {
                audit: true,
                seed,
                solver: SolverConfig::default(),
                ..Default::default()
            };
            let t0 = Instant::now();
            let res = hybrid_nearest_adversarial(
                &inst.net,
                &inst.spec,
                &inst.center,
                Norm::LInf,
                &inst.bbox,
                &opts,
            )
            .unwrap();
            let wall = t0.elapsed().as_secs_f64();
            let rep = &res.report;
            let hybrid_time = rep.t_nlp + rep.t_mip;
            let win = hybrid_time < rep.t_full.unwrap_or(f64::INFINITY);
            total += 1;
            wins += win as usize;
            println!(
                "{label} seed {seed}: unstable {unstable}, gap {:?}, cert {}, esc {}, t_hyb {:.3}, t_full {:.3}, win {}, wall {:.2}",
                rep.gap,
                rep.certificate_ok,
                rep.escalated,
                hybrid_time,
                rep.t_full.unwrap_or(0.0),
                win,
                wall
            );
        }
    }
    println!("wins: {wins}/{total}");
}
