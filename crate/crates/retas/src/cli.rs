//! File-based command-line interface: simulate, fit, decluster, select,
//! evaluate. Every command writes a provenance record before any long
//! computation starts, prints floats at 17 significant digits, and is
//! bit-reproducible given identical inputs and seed.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use crate::catalog::{self, fmt_g17, Catalog, ColumnMap, LoadOptions, SpatialWindow};
use crate::estimation::{
    fixed_background_fit_report, semiparametric_fit_with, FitOptions, FitReport, OptimizerConfig,
};
use crate::evaluation::{self, StudyConfig};
use crate::kde::{BandwidthMatrix, WeightedKde};
use crate::kernels::{MagnitudeParams, RetasParams};
use crate::likelihood::BackgroundIntensity;
use crate::simulator::{self, NuSampler, SimConfig};
use crate::smoother::{self, DeclusterResult};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Declarative run configuration; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Model parameters: simulation truth or fit initializer.
    pub params: Option<RetasParams>,
    pub magnitude: Option<MagnitudeParams>,
    /// Parametric background: simulation sampler or known-background fit.
    pub background: Option<NuSampler>,
    pub t_end: Option<f64>,
    pub window: Option<SpatialWindow>,
    pub m0: Option<f64>,
    pub columns: Option<ColumnMap>,
    /// ISO-8601 calendar origin for datetime catalogs.
    pub origin: Option<String>,
    pub zeta: Option<f64>,
    pub zeta_grid: Option<Vec<f64>>,
    /// Semi-parametric convergence tolerance on the log-likelihood.
    pub tolerance: Option<f64>,
    pub optimizer: Option<OptimizerConfig>,
    pub fix_kappa: Option<f64>,
    /// Explicit base bandwidth matrix (otherwise normal-reference).
    pub bandwidth: Option<BandwidthMatrix>,
    pub compute_se: Option<bool>,
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    /// Full study specification for `evaluate`.
    pub study: Option<StudyConfig>,
    /// Grid resolution for the background-intensity dump.
    pub grid_resolution: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "retas", version, about = "Renewal-ETAS modeling: simulate, fit, decluster, select, evaluate")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (overrides the RETAS_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw catalogs with ground-truth branching labels.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of catalogs to draw (numbered files).
        #[arg(long)]
        replicates: Option<u64>,
    },
    /// Fit the model to a catalog (semi-parametric unless a parametric
    /// background is configured).
    Fit {
        catalog: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        zeta: Option<f64>,
        /// Pin the renewal shape (1 = ETAS).
        #[arg(long)]
        fix_kappa: Option<f64>,
        /// Column remap, e.g. time=origintime,x=longitude,y=latitude,magnitude=mag
        #[arg(long)]
        columns: Option<String>,
    },
    /// Branching-structure probabilities from a finished fit.
    Decluster {
        catalog: PathBuf,
        /// Output directory of a `fit` run (report.json + kde.csv).
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Smoothed)]
        mode: ModeArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        columns: Option<String>,
    },
    /// Semi-parametric fits across a smoothing grid with AICc selection.
    Select {
        catalog: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated zeta grid, e.g. 0.5,1,1.5,2
        #[arg(long)]
        zeta: Option<String>,
        #[arg(long)]
        columns: Option<String>,
    },
    /// Monte-Carlo evaluation studies (estimator tables, ROC/AUC,
    /// branching accuracy).
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Smoothed,
    Filtered,
    /// Alias for filtered declustering of a kappa = 1 fit.
    Etas,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn data_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn num_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Entry point for the `retas` binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let result = match cli.command {
        Command::Simulate { config, out, seed, replicates } => cmd_simulate(&config, &out, seed, replicates),
        Command::Fit { catalog, config, out, zeta, fix_kappa, columns } => {
            cmd_fit(&catalog, &config, &out, zeta, fix_kappa, columns.as_deref())
        }
        Command::Decluster { catalog, fit, out, mode, config, columns } => {
            cmd_decluster(&catalog, &fit, &out, mode, config.as_deref(), columns.as_deref())
        }
        Command::Select { catalog, config, out, zeta, columns } => {
            cmd_select(&catalog, &config, &out, zeta.as_deref(), columns.as_deref())
        }
        Command::Evaluate { config, out, seed, replicates } => cmd_evaluate(&config, &out, seed, replicates),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("RETAS_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config parse error: {e}")))
}

fn parse_columns(spec: Option<&str>, config: &RunConfig) -> CliResult<ColumnMap> {
    let mut map = config.columns.clone().unwrap_or_default();
    if let Some(spec) = spec {
        for pair in spec.split(',') {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("bad --columns entry {pair:?}")))?;
            match key.trim() {
                "time" => map.time = value.trim().to_string(),
                "x" => map.x = value.trim().to_string(),
                "y" => map.y = value.trim().to_string(),
                "magnitude" => map.magnitude = value.trim().to_string(),
                other => return Err(CliError::Usage(format!("unknown column key {other:?}"))),
            }
        }
    }
    Ok(map)
}

fn load_catalog_cli(path: &Path, config: &RunConfig, columns: Option<&str>) -> CliResult<Catalog> {
    let m0 = config.m0.ok_or_else(|| CliError::Usage("config needs m0 for ingestion".into()))?;
    let window = config.window.unwrap_or(SpatialWindow::WholePlane);
    let origin = match &config.origin {
        Some(text) => Some(parse_origin(text)?),
        None => None,
    };
    let options = LoadOptions {
        columns: parse_columns(columns, config)?,
        m0,
        window,
        origin,
        t_end: config.t_end,
    };
    let loaded = catalog::load_catalog(path, &options).map_err(data_err)?;
    if loaded.dropped > 0 || loaded.sort_warning || loaded.ties_broken > 0 {
        eprintln!(
            "catalog: kept {} events (dropped {}, sorted: {}, ties broken: {})",
            loaded.catalog.n(),
            loaded.dropped,
            loaded.sort_warning,
            loaded.ties_broken
        );
    }
    Ok(loaded.catalog)
}

fn parse_origin(text: &str) -> CliResult<chrono::NaiveDateTime> {
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(text, fmt) {
            return Ok(dt);
        }
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
    }
    Err(CliError::Usage(format!("unparsable origin {text:?}")))
}

fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config_hash: String,
    config: &'a RunConfig,
}

/// Written before any long computation starts (crash forensics).
fn write_provenance(out: &Path, command: &str, seed: Option<u64>, config: &RunConfig) -> CliResult<()> {
    let canonical = serde_json::to_string(config).map_err(data_err)?;
    let record = Provenance {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_hash: format!("{:016x}", fnv1a(canonical.as_bytes())),
        config,
    };
    let text = serde_json::to_string_pretty(&record).map_err(data_err)?;
    std::fs::write(out.join("provenance.json"), text)
        .map_err(|e| CliError::Usage(format!("cannot write provenance: {e}")))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_simulate(config_path: &Path, out: &Path, seed: Option<u64>, replicates: Option<u64>) -> CliResult<()> {
    let mut config = load_config(config_path)?;
    if let Some(s) = seed {
        config.seed = Some(s);
    }
    let params = config.params.ok_or_else(|| CliError::Usage("config needs params".into()))?;
    let mag = config.magnitude.ok_or_else(|| CliError::Usage("config needs magnitude".into()))?;
    let nu = config.background.ok_or_else(|| CliError::Usage("config needs background".into()))?;
    let t_end = config.t_end.ok_or_else(|| CliError::Usage("config needs t_end".into()))?;
    let sim = SimConfig { params, mag, nu, t_end, seed: config.seed.unwrap_or(0) };
    let n_reps = replicates.or(config.replicates).unwrap_or(1);

    ensure_out_dir(out)?;
    write_provenance(out, "simulate", config.seed, &config)?;
    for rep in 0..n_reps {
        let drawn = simulator::simulate_replicate(&sim, rep).map_err(num_err)?;
        let cat_path = out.join(format!("catalog_{rep:03}.csv"));
        catalog::save_catalog(&drawn.catalog, &cat_path).map_err(data_err)?;
        let mut labels = String::from("index,parent,generation\n");
        for (i, (&label, &generation)) in drawn.labels.iter().zip(&drawn.generation).enumerate() {
            let _ = writeln!(labels, "{},{},{}", i + 1, label, generation);
        }
        write_file(&out.join(format!("labels_{rep:03}.csv")), &labels)?;
        println!("catalog {rep}: {} events -> {}", drawn.catalog.n(), cat_path.display());
    }
    Ok(())
}

const REPORT_SCHEMA_VERSION: u32 = 1;

fn report_files(
    out: &Path,
    report: &FitReport,
    catalog: &Catalog,
    grid_resolution: usize,
) -> CliResult<()> {
    let mut value = serde_json::to_value(report).map_err(data_err)?;
    value
        .as_object_mut()
        .expect("report serializes to an object")
        .insert("schema_version".into(), REPORT_SCHEMA_VERSION.into());
    let json = serde_json::to_string_pretty(&value).map_err(data_err)?;
    write_file(&out.join("report.json"), &json)?;

    let mut omega = String::from("index,value\n");
    for (i, w) in report.omega.iter().enumerate() {
        let _ = writeln!(omega, "{},{}", i + 1, fmt_g17(*w));
    }
    write_file(&out.join("omega.csv"), &omega)?;

    if let Some(h) = report.h {
        let mut kde = format!(
            "# h11,h12,h22 = {},{},{}\nx,y,weight\n",
            fmt_g17(h.h11),
            fmt_g17(h.h12),
            fmt_g17(h.h22)
        );
        let weights = if report.nu_weights.is_empty() {
            vec![1.0; catalog.n()]
        } else {
            report.nu_weights.clone()
        };
        for (e, w) in catalog.events.iter().zip(&weights) {
            let _ = writeln!(kde, "{},{},{}", fmt_g17(e.x), fmt_g17(e.y), fmt_g17(*w));
        }
        write_file(&out.join("kde.csv"), &kde)?;

        // Plot-ready evaluation of nu_hat over the data bounding box.
        let kde_nu = WeightedKde::new(
            catalog.events.iter().map(|e| (e.x, e.y)).collect(),
            weights,
            h,
        )
        .map_err(num_err)?;
        let (mut x_min, mut x_max, mut y_min, mut y_max) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for e in &catalog.events {
            x_min = x_min.min(e.x);
            x_max = x_max.max(e.x);
            y_min = y_min.min(e.y);
            y_max = y_max.max(e.y);
        }
        let pad_x = 0.05 * (x_max - x_min).max(1e-9);
        let pad_y = 0.05 * (y_max - y_min).max(1e-9);
        let res = grid_resolution.max(2);
        let mut grid = String::from("x,y,nu\n");
        for ix in 0..res {
            let x = x_min - pad_x + (x_max - x_min + 2.0 * pad_x) * ix as f64 / (res - 1) as f64;
            for iy in 0..res {
                let y = y_min - pad_y + (y_max - y_min + 2.0 * pad_y) * iy as f64 / (res - 1) as f64;
                let _ = writeln!(grid, "{},{},{}", fmt_g17(x), fmt_g17(y), fmt_g17(kde_nu.evaluate(x, y)));
            }
        }
        write_file(&out.join("nu_grid.csv"), &grid)?;
    }
    Ok(())
}

fn cmd_fit(
    catalog_path: &Path,
    config_path: &Path,
    out: &Path,
    zeta: Option<f64>,
    fix_kappa: Option<f64>,
    columns: Option<&str>,
) -> CliResult<()> {
    let config = load_config(config_path)?;
    let catalog = load_catalog_cli(catalog_path, &config, columns)?;
    ensure_out_dir(out)?;
    write_provenance(out, "fit", config.seed, &config)?;

    let optimizer = config.optimizer.unwrap_or_default();
    let fix_kappa = fix_kappa.or(config.fix_kappa);
    let compute_se = config.compute_se.unwrap_or(true);
    let report = if let Some(nu) = &config.background {
        let background = BackgroundIntensity::BivariateNormal {
            mean_x: nu.mean_x,
            mean_y: nu.mean_y,
            var_x: nu.var_x,
            var_y: nu.var_y,
        };
        fixed_background_fit_report(&catalog, &background, &optimizer, config.params, fix_kappa, compute_se)
            .map_err(num_err)?
    } else {
        let opts = FitOptions {
            zeta: zeta.or(config.zeta).unwrap_or(1.0),
            tol: config.tolerance.unwrap_or(1e-3),
            fix_kappa,
            compute_se,
            init: config.params,
            h_override: config.bandwidth,
            ..FitOptions::default()
        };
        semiparametric_fit_with(&catalog, &optimizer, &opts).map_err(num_err)?
    };

    report_files(out, &report, &catalog, config.grid_resolution.unwrap_or(101))?;
    println!(
        "loglik {:.4}  aicc {:.4}  dof {:.2}  pct_mainshocks {:.2}  iterations {}  converged {}",
        report.loglik, report.aicc, report.dof_kde, report.pct_mainshocks, report.iterations, report.converged
    );
    Ok(())
}

fn sparse_triangle_csv(header: &str, tri: &crate::likelihood::Triangle, floor: f64) -> String {
    let mut text = format!("{header}\n");
    for r in 0..tri.rows() {
        for (j, &v) in tri.row(r).iter().enumerate() {
            if v >= floor {
                let _ = writeln!(text, "{},{},{}", r + 2, j + 1, fmt_g17(v));
            }
        }
    }
    text
}

fn decluster_files(out: &Path, result: &DeclusterResult, catalog: &Catalog) -> CliResult<()> {
    let mut omega = String::from("index,value\n");
    for (i, w) in result.omega.iter().enumerate() {
        let _ = writeln!(omega, "{},{}", i + 1, fmt_g17(*w));
    }
    write_file(&out.join("omega.csv"), &omega)?;
    write_file(&out.join("pi.csv"), &sparse_triangle_csv("i,j,value", &result.pi, 1e-12))?;
    write_file(&out.join("q.csv"), &sparse_triangle_csv("i,j,value", &result.q, 1e-12))?;

    let labels = smoother::most_probable_labels(result);
    let mut label_text = String::from("index,label\n");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(label_text, "{},{}", i + 1, l);
    }
    write_file(&out.join("labels.csv"), &label_text)?;

    let clusters = evaluation::cluster_report(result, catalog);
    let mut cluster_text = String::from("root,size,generations\n");
    for c in &clusters {
        let _ = writeln!(cluster_text, "{},{},{}", c.root + 1, c.size, c.generations);
    }
    write_file(&out.join("clusters.csv"), &cluster_text)?;

    // Histogram of the main-shock probabilities (20 equal bins).
    let bins = 20usize;
    let mut counts = vec![0usize; bins];
    for &w in &result.omega {
        let b = ((w * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut hist = String::from("bin_lo,bin_hi,count\n");
    for (b, c) in counts.iter().enumerate() {
        let _ = writeln!(
            hist,
            "{},{},{}",
            fmt_g17(b as f64 / bins as f64),
            fmt_g17((b + 1) as f64 / bins as f64),
            c
        );
    }
    write_file(&out.join("omega_hist.csv"), &hist)?;

    let mains = result.omega.iter().filter(|&&w| w > 0.5).count();
    let map_mains = labels.iter().filter(|&&l| l == 0).count();
    println!(
        "threshold-0.5 main-shocks: {} ({:.2}%)  MAP main-shocks: {} ({:.2}%)  largest cluster: {}",
        mains,
        100.0 * mains as f64 / catalog.n() as f64,
        map_mains,
        100.0 * map_mains as f64 / catalog.n() as f64,
        clusters.first().map_or(0, |c| c.size)
    );
    Ok(())
}

fn cmd_decluster(
    catalog_path: &Path,
    fit_dir: &Path,
    out: &Path,
    mode: ModeArg,
    config_path: Option<&Path>,
    columns: Option<&str>,
) -> CliResult<()> {
    let config = match config_path {
        Some(p) => load_config(p)?,
        None => {
            // The fit directory's provenance embeds the config it ran with.
            let text = std::fs::read_to_string(fit_dir.join("provenance.json"))
                .map_err(|e| CliError::Usage(format!("cannot read fit provenance: {e}")))?;
            let prov: serde_json::Value = serde_json::from_str(&text).map_err(data_err)?;
            serde_json::from_value(prov["config"].clone()).map_err(data_err)?
        }
    };
    let catalog = load_catalog_cli(catalog_path, &config, columns)?;

    let report_text = std::fs::read_to_string(fit_dir.join("report.json"))
        .map_err(|e| CliError::Usage(format!("cannot read fit report: {e}")))?;
    let report: serde_json::Value = serde_json::from_str(&report_text).map_err(data_err)?;
    let params: RetasParams = serde_json::from_value(report["params"].clone()).map_err(data_err)?;

    // Background: the fit's KDE dump when present, else the parametric form.
    let kde_path = fit_dir.join("kde.csv");
    let nu = if kde_path.exists() {
        let text = std::fs::read_to_string(&kde_path).map_err(data_err)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Data("empty kde.csv".into()))?
            .trim_start_matches("# h11,h12,h22 = ");
        let hvals: Vec<f64> = header
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Data(format!("kde.csv bandwidth header: {e}")))?;
        let h = BandwidthMatrix::new(hvals[0], hvals[1], hvals[2]).map_err(data_err)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for line in lines.skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            points.push((
                cells[0].parse::<f64>().map_err(data_err)?,
                cells[1].parse::<f64>().map_err(data_err)?,
            ));
            weights.push(cells[2].parse::<f64>().map_err(data_err)?);
        }
        BackgroundIntensity::WeightedKde(WeightedKde::new(points, weights, h).map_err(data_err)?)
    } else {
        let nu = config
            .background
            .ok_or_else(|| CliError::Data("fit has no kde.csv and config has no background".into()))?;
        BackgroundIntensity::BivariateNormal {
            mean_x: nu.mean_x,
            mean_y: nu.mean_y,
            var_x: nu.var_x,
            var_y: nu.var_y,
        }
    };

    ensure_out_dir(out)?;
    write_provenance(out, "decluster", config.seed, &config)?;

    let state = crate::likelihood::forward_filter(&catalog, &params, &nu).map_err(num_err)?;
    let result = match mode {
        ModeArg::Smoothed => smoother::decluster(&catalog, &params, &nu, &state).map_err(num_err)?,
        ModeArg::Filtered | ModeArg::Etas => {
            smoother::decluster_filtered(&state, &catalog, &params, &nu).map_err(num_err)?
        }
    };
    decluster_files(out, &result, &catalog)
}

fn cmd_select(
    catalog_path: &Path,
    config_path: &Path,
    out: &Path,
    zeta_arg: Option<&str>,
    columns: Option<&str>,
) -> CliResult<()> {
    let config = load_config(config_path)?;
    let catalog = load_catalog_cli(catalog_path, &config, columns)?;
    let grid: Vec<f64> = match zeta_arg {
        Some(text) => text
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("bad --zeta list: {e}")))?,
        None => config
            .zeta_grid
            .clone()
            .ok_or_else(|| CliError::Usage("need --zeta or zeta_grid in config".into()))?,
    };
    if grid.is_empty() {
        return Err(CliError::Usage("zeta grid is empty".into()));
    }
    ensure_out_dir(out)?;
    write_provenance(out, "select", config.seed, &config)?;

    let optimizer = config.optimizer.unwrap_or_default();
    let mut table = String::from(
        "zeta,kappa,beta,p,c,sigma1_sq,sigma2_sq,a,alpha,productivity,pct_mainshocks,loglik,dof,aicc,converged\n",
    );
    let mut carry = config.params;
    let mut warmed = false;
    let mut best: Option<(f64, f64)> = None;
    for &zeta in &grid {
        let opts = FitOptions {
            zeta,
            tol: config.tolerance.unwrap_or(1e-3),
            fix_kappa: config.fix_kappa,
            compute_se: config.compute_se.unwrap_or(false),
            init: carry,
            warm_start: warmed,
            h_override: config.bandwidth,
            ..FitOptions::default()
        };
        match semiparametric_fit_with(&catalog, &optimizer, &opts) {
            Ok(report) => {
                carry = Some(report.params);
                warmed = true;
                let p = &report.params;
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    zeta,
                    fmt_g17(p.kappa),
                    fmt_g17(p.beta),
                    fmt_g17(p.p),
                    fmt_g17(p.c),
                    fmt_g17(p.sigma1_sq),
                    fmt_g17(p.sigma2_sq),
                    fmt_g17(p.a),
                    fmt_g17(p.alpha),
                    fmt_g17(report.productivity),
                    fmt_g17(report.pct_mainshocks),
                    fmt_g17(report.loglik),
                    fmt_g17(report.dof_kde),
                    fmt_g17(report.aicc),
                    report.converged
                );
                let dir = out.join(format!("zeta_{zeta}"));
                ensure_out_dir(&dir)?;
                report_files(&dir, &report, &catalog, config.grid_resolution.unwrap_or(101))?;
                if best.map_or(true, |(_, aicc)| report.aicc < aicc) {
                    best = Some((zeta, report.aicc));
                }
                println!("zeta {zeta}: loglik {:.4}, dof {:.2}, aicc {:.4}", report.loglik, report.dof_kde, report.aicc);
            }
            Err(e) => {
                eprintln!("zeta {zeta}: fit failed: {e}");
                let _ = writeln!(table, "{zeta},,,,,,,,,,,,,,failed");
            }
        }
    }
    let (best_zeta, best_aicc) =
        best.ok_or_else(|| CliError::Numerical("every smoothing candidate failed".into()))?;
    write_file(&out.join("selection.csv"), &table)?;
    write_file(
        &out.join("selected.json"),
        &serde_json::json!({ "zeta": best_zeta, "aicc": best_aicc }).to_string(),
    )?;
    println!("selected zeta = {best_zeta} (aicc {best_aicc:.4})");
    Ok(())
}

fn cmd_evaluate(config_path: &Path, out: &Path, seed: Option<u64>, replicates: Option<u64>) -> CliResult<()> {
    let mut config = load_config(config_path)?;
    let mut study = config
        .study
        .clone()
        .ok_or_else(|| CliError::Usage("config needs a study section".into()))?;
    if let Some(s) = seed {
        study.sim.seed = s;
    }
    if let Some(r) = replicates {
        study.replicates = r;
    }
    config.study = Some(study.clone());
    ensure_out_dir(out)?;
    write_provenance(out, "evaluate", Some(study.sim.seed), &config)?;

    let result = evaluation::run_study(&study).map_err(num_err)?;

    let mut raw = String::from(
        "replicate,n_events,kept,kappa,beta,p,c,sigma1_sq,sigma2_sq,a,alpha,loglik,selected_zeta\n",
    );
    for (i, o) in result.outcomes.iter().enumerate() {
        let p = &o.estimate;
        let _ = writeln!(
            raw,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            o.replicate,
            o.n_events,
            result.kept[i],
            fmt_g17(p.kappa),
            fmt_g17(p.beta),
            fmt_g17(p.p),
            fmt_g17(p.c),
            fmt_g17(p.sigma1_sq),
            fmt_g17(p.sigma2_sq),
            fmt_g17(p.a),
            fmt_g17(p.alpha),
            fmt_g17(o.loglik),
            o.selected_zeta.map_or(String::new(), |z| z.to_string()),
        );
    }
    write_file(&out.join("study_estimates.csv"), &raw)?;

    let names = ["kappa", "beta", "p", "c", "sigma1_sq", "sigma2_sq", "a", "alpha"];
    let mut agg = String::from("parameter,est,se,se_hat,cp\n");
    for (d, name) in names.iter().enumerate() {
        let _ = writeln!(
            agg,
            "{},{},{},{},{}",
            name,
            fmt_g17(result.aggregate.est[d]),
            fmt_g17(result.aggregate.se[d]),
            result.aggregate.se_hat[d].map_or(String::new(), fmt_g17),
            result.aggregate.cp[d].map_or(String::new(), fmt_g17),
        );
    }
    write_file(&out.join("study_aggregate.csv"), &agg)?;

    let mut metrics = String::from("replicate,mode,auc,accuracy,pct_mainshocks\n");
    for o in &result.outcomes {
        for m in &o.metrics {
            let _ = writeln!(
                metrics,
                "{},{:?},{},{},{}",
                o.replicate,
                m.mode,
                m.auc.map_or(String::new(), fmt_g17),
                fmt_g17(m.accuracy),
                fmt_g17(m.pct_mainshocks),
            );
        }
    }
    write_file(&out.join("study_metrics.csv"), &metrics)?;

    if !result.failures.is_empty() {
        let mut failures = String::from("replicate,error\n");
        for (rep, err) in &result.failures {
            let _ = writeln!(failures, "{},{}", rep, err.replace(',', ";"));
        }
        write_file(&out.join("study_failures.csv"), &failures)?;
    }

    for (mode, auc, acc) in &result.mode_means {
        println!("{mode:?}: mean AUC {auc:.4}, mean accuracy {acc:.4}");
    }
    println!(
        "replicates: {} ok, {} failed; estimates trimmed to {}",
        result.outcomes.len(),
        result.failures.len(),
        result.kept.iter().filter(|&&k| k).count()
    );
    Ok(())
}
