//! Miniature Monte-Carlo study: simulate a handful of catalogs, fit with
//! the true background, and compare smoothed / filtered / ETAS
//! declustering by AUC and branching accuracy.
//!
//! ```bash
//! cargo run --release --example evaluate_declustering
//! ```

use retas::estimation::OptimizerConfig;
use retas::evaluation::{run_study, FitMode, StudyConfig, StudyDecluster};
use retas::kernels::{MagnitudeParams, RetasParams};
use retas::simulator::{NuSampler, SimConfig};

fn main() {
    let config = StudyConfig {
        sim: SimConfig {
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
            t_end: 100.0,
            seed: 31,
        },
        replicates: 8,
        fit: FitMode::KnownNu,
        decluster: vec![StudyDecluster::Smoothed, StudyDecluster::Filtered, StudyDecluster::Etas],
        trim_frac: 0.0,
        compute_se: false,
        optimizer: OptimizerConfig::default(),
    };

    println!("running {} replicates at kappa = 0.5 ...\n", config.replicates);
    let result = run_study(&config).expect("study");

    println!("{:>10} {:>10} {:>10}", "mode", "mean AUC", "accuracy");
    for (mode, auc, accuracy) in &result.mode_means {
        println!("{:>10} {:>10.4} {:>10.4}", format!("{mode:?}"), auc, accuracy);
    }

    let names = ["kappa", "beta", "p", "c", "sigma1^2", "sigma2^2", "A", "alpha"];
    let truth = [0.5, 2.0, 1.2, 0.01, 0.01, 0.02, 0.5, 1.0];
    println!("\nestimates over replicates (true background):");
    println!("{:>10} {:>8} {:>10} {:>10}", "parameter", "true", "mean", "sd");
    for d in 0..8 {
        println!(
            "{:>10} {:>8.4} {:>10.4} {:>10.4}",
            names[d], truth[d], result.aggregate.est[d], result.aggregate.se[d]
        );
    }
    if !result.failures.is_empty() {
        println!("\nfailures: {:?}", result.failures);
    }
}
