//! AICc-based selection of the KDE smoothing multiplier: fit the
//! semi-parametric model at each zeta, compare effective DoF and AICc.
//!
//! ```bash
//! cargo run --release --example select_smoothing
//! ```

use retas::estimation::{select_smoothing, OptimizerConfig};
use retas::kernels::{MagnitudeParams, RetasParams};
use retas::simulator::{simulate_replicate, NuSampler, SimConfig};

fn main() {
    let config = SimConfig {
        params: RetasParams {
            kappa: 0.8,
            beta: 1.25,
            p: 1.2,
            c: 0.01,
            sigma1_sq: 0.01,
            sigma2_sq: 0.02,
            a: 0.5,
            alpha: 1.0,
        },
        mag: MagnitudeParams { gamma: 5.0, m0: 5.0 },
        nu: NuSampler { mean_x: 0.0, mean_y: 0.0, var_x: 0.05, var_y: 0.1 },
        t_end: 120.0,
        seed: 2,
    };
    let sim = simulate_replicate(&config, 0).expect("simulation");
    println!("simulated {} events; scanning the smoothing grid ...\n", sim.catalog.n());

    let grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let selection = select_smoothing(&sim.catalog, &grid, &OptimizerConfig::default())
        .expect("selection");

    println!(
        "{:>5} {:>9} {:>8} {:>9} {:>8} {:>8} {:>8}",
        "zeta", "loglik", "dof", "aicc", "A", "p", "beta"
    );
    for (zeta, report) in &selection.reports {
        match report {
            Ok(r) => println!(
                "{:>5} {:>9.2} {:>8.2} {:>9.2} {:>8.3} {:>8.3} {:>8.3}",
                zeta, r.loglik, r.dof_kde, r.aicc, r.params.a, r.params.p, r.params.beta
            ),
            Err(e) => println!("{zeta:>5} failed: {e}"),
        }
    }
    println!("\nselected zeta = {}", selection.best_zeta);
}
