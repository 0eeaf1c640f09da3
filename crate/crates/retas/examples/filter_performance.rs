//! Timing probe for the likelihood machinery: one forward+backward pass
//! and repeated objective evaluations on a realistically sized catalog.
//!
//! ```bash
//! cargo run --release --example filter_performance
//! ```

use retas::estimation::telescoping_init;
use retas::kernels::{MagnitudeParams, RetasParams};
use retas::likelihood::{BackgroundIntensity, Evaluator};
use retas::simulator::{simulate_catalog, NuSampler, SimConfig};
use retas::smoother;
use std::time::Instant;

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
        t_end: 500.0,
        seed: 20_240_811,
    };
    let sim = simulate_catalog(&config).expect("simulation");
    let catalog = sim.catalog;
    println!("catalog: n = {} events over T = {}", catalog.n(), catalog.t_end);

    let nu = BackgroundIntensity::BivariateNormal { mean_x: 0.0, mean_y: 0.0, var_x: 0.05, var_y: 0.1 };
    let t0 = Instant::now();
    let evaluator = Evaluator::new(&catalog, &nu).expect("evaluator");
    println!("evaluator setup: {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);

    let reps = 20;
    let t0 = Instant::now();
    let mut acc = 0.0;
    for i in 0..reps {
        let mut p = config.params;
        p.kappa += 1e-6 * i as f64;
        acc += evaluator.loglik(&p).expect("loglik");
    }
    let per_eval = t0.elapsed().as_secs_f64() / reps as f64;
    println!("loglik: {:.2} ms per evaluation (checksum {acc:.3})", per_eval * 1e3);

    let t0 = Instant::now();
    let state = evaluator.forward_filter(&config.params).expect("filter");
    let forward = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let result = smoother::decluster(&catalog, &config.params, &nu, &state).expect("decluster");
    let backward = t0.elapsed().as_secs_f64();
    println!(
        "forward pass {:.1} ms, backward smoothing {:.1} ms (loglik {:.3}, mean omega {:.3})",
        forward * 1e3,
        backward * 1e3,
        state.loglik,
        result.omega.iter().sum::<f64>() / result.omega.len() as f64
    );

    let t0 = Instant::now();
    let init = telescoping_init(&catalog).expect("init");
    println!(
        "telescoping init {:.1} ms: kappa {:.3}, beta {:.3}, p {:.3}, c {:.5}, A {:.3}, alpha {:.3}",
        t0.elapsed().as_secs_f64() * 1e3,
        init.kappa,
        init.beta,
        init.p,
        init.c,
        init.a,
        init.alpha
    );
}
