//! Stochastic declustering: smoothed vs filtered main-shock and parent
//! probabilities, MAP branching labels, cluster summaries, and accuracy
//! against the simulated truth.
//!
//! ```bash
//! cargo run --release --example decluster_catalog
//! ```

use retas::estimation::{mle_fixed_background, telescoping_init, OptimizerConfig};
use retas::evaluation::{branching_accuracy, cluster_report, roc_auc};
use retas::kernels::{MagnitudeParams, RetasParams};
use retas::likelihood::{forward_filter, BackgroundIntensity};
use retas::simulator::{simulate_replicate, NuSampler, SimConfig};
use retas::smoother::{decluster, decluster_filtered, most_probable_labels};

fn main() {
    let config = SimConfig {
        params: RetasParams {
            kappa: 0.5,
            beta: 2.0,
            p: 1.2,
            c: 0.01,
            sigma1_sq: 0.01,
            sigma2_sq: 0.02,
            a: 0.5,
            alpha: 1.0,
        },
        mag: MagnitudeParams { gamma: 5.0, m0: 5.0 },
        nu: NuSampler { mean_x: 0.0, mean_y: 0.0, var_x: 0.05, var_y: 0.1 },
        t_end: 150.0,
        seed: 99,
    };
    let sim = simulate_replicate(&config, 0).expect("simulation");
    let true_mains = sim.labels.iter().filter(|&&l| l == 0).count();
    println!("simulated {} events ({} true main-shocks)", sim.catalog.n(), true_mains);

    let nu = BackgroundIntensity::BivariateNormal { mean_x: 0.0, mean_y: 0.0, var_x: 0.05, var_y: 0.1 };
    let init = telescoping_init(&sim.catalog).expect("init");
    let fit = mle_fixed_background(&sim.catalog, &nu, &init, &OptimizerConfig::default())
        .expect("fit");
    let state = forward_filter(&sim.catalog, &fit.params, &nu).expect("filter");

    let smoothed = decluster(&sim.catalog, &fit.params, &nu, &state).expect("smoothing");
    let filtered = decluster_filtered(&state, &sim.catalog, &fit.params, &nu).expect("filtering");

    for (name, result) in [("smoothed", &smoothed), ("filtered", &filtered)] {
        let labels: Vec<bool> = sim.labels.iter().skip(1).map(|&l| l == 0).collect();
        let scores: Vec<f64> = result.omega.iter().skip(1).copied().collect();
        let (_, auc) = roc_auc(&scores, &labels).expect("roc");
        let accuracy = branching_accuracy(result, &sim).expect("accuracy");
        let map_mains = most_probable_labels(result).iter().filter(|&&l| l == 0).count();
        println!(
            "{name:>9}: AUC {auc:.4}  branching accuracy {accuracy:.4}  MAP main-shocks {map_mains}"
        );
    }

    println!("\nlargest MAP clusters (smoothed):");
    for cluster in cluster_report(&smoothed, &sim.catalog).iter().take(5) {
        println!(
            "  root event {:>4} at t = {:>8.3}, m = {:.2}: size {}, {} generations",
            cluster.root + 1,
            sim.catalog.events[cluster.root].t,
            sim.catalog.events[cluster.root].m,
            cluster.size,
            cluster.generations
        );
    }
}
