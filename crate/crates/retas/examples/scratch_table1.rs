use retas::estimation::OptimizerConfig;
use retas::evaluation::{run_study, FitMode, StudyConfig};
use retas::kernels::{MagnitudeParams, RetasParams};
use retas::simulator::{NuSampler, SimConfig};

fn main() {
    let reps: u64 = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(40);
    let config = StudyConfig {
        sim: SimConfig {
            params: RetasParams { kappa: 0.8, beta: 1.25, p: 1.2, c: 0.01, sigma1_sq: 0.01, sigma2_sq: 0.02, a: 0.5, alpha: 1.0 },
            mag: MagnitudeParams { gamma: 5.0, m0: 5.0 },
            nu: NuSampler { mean_x: 0.0, mean_y: 0.0, var_x: 0.05, var_y: 0.1 },
            t_end: 250.0,
            seed: 119_050,
        },
        replicates: reps,
        fit: FitMode::KnownNu,
        decluster: vec![],
        trim_frac: 0.0,
        compute_se: true,
        optimizer: OptimizerConfig::default(),
    };
    let r = run_study(&config).unwrap();
    let names = ["kappa", "beta", "p", "c", "s1sq", "s2sq", "A", "alpha"];
    let paper_est = [0.818, 1.254, 1.224, 0.0116, 0.0107, 0.0214, 0.523, 0.984];
    let paper_se = [0.097, 0.203, 0.091, 0.0050, 0.0020, 0.0037, 0.149, 0.342];
    println!("{} replicates ok, {} failed", r.outcomes.len(), r.failures.len());
    println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>7}", "param", "mean", "paper", "tol(.5SE)", "sd", "paperSD", "cp");
    for d in 0..8 {
        println!(
            "{:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            names[d], r.aggregate.est[d], paper_est[d], 0.5 * paper_se[d], r.aggregate.se[d], paper_se[d],
            r.aggregate.cp[d].map_or("-".into(), |c| format!("{c:.2}")),
        );
    }
}
