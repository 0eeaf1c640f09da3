//! Monte-Carlo evaluation harness: simulate catalogs, fit (known
//! background, fixed-smoothing semi-parametric, or AICc-selected), apply
//! the declustering variants, and aggregate estimator summaries
//! (Est / SE / SE-hat / CP), ROC/AUC for main-shock classification,
//! branching-structure accuracy, and Mahalanobis-trimmed tables.

use crate::catalog::Catalog;
use crate::estimation::{
    self, standard_errors, telescoping_init, EstimationError, FitOptions, OptimizerConfig,
};
use crate::kernels::RetasParams;
use crate::likelihood::{BackgroundIntensity, Evaluator, LikelihoodError};
use crate::simulator::{simulate_replicate, SimConfig, SimulatedCatalog};
use crate::smoother::{self, DeclusterResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need both classes for a ROC curve")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} estimates for trimming, got {n}")]
    TooFewEstimates { n: usize, min: usize },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error("simulation failed: {0}")]
    Simulation(String),
}

/// ROC curve (FPR, TPR sweep) and AUC equal to the Mann-Whitney statistic
/// with ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(Vec<(f64, f64)>, f64), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Threshold sweep over unique score values, descending.
    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        let s = scores[order[idx]];
        while idx < order.len() && scores[order[idx] ] == s {
            if labels[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        curve.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }

    // Mann-Whitney with midranks for ties.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    let ranked = order.iter().rev().collect::<Vec<_>>(); // ascending by score
    while i < ranked.len() {
        let s = scores[*ranked[i]];
        let mut j = i;
        while j < ranked.len() && scores[*ranked[j]] == s {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0; // average of ranks i+1..=j
        for &&k in &ranked[i..j] {
            if labels[k] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let auc = (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok((curve, auc))
}

/// Fraction of events i = 2..n whose most probable label matches the true
/// branching label.
pub fn branching_accuracy(result: &DeclusterResult, truth: &SimulatedCatalog) -> Result<f64, EvalError> {
    let n = truth.labels.len();
    if result.omega.len() != n {
        return Err(EvalError::LengthMismatch { left: result.omega.len(), right: n });
    }
    if n < 2 {
        return Err(EvalError::LengthMismatch { left: n, right: 2 });
    }
    let map = smoother::most_probable_labels(result);
    let correct = (1..n).filter(|&i| map[i] == truth.labels[i]).count();
    Ok(correct as f64 / (n - 1) as f64)
}

/// Keep-mask after removing the largest `frac` of Mahalanobis distances
/// from the truth, using the sample covariance of the estimates; falls
/// back to per-coordinate standardized distances when that covariance is
/// singular (`fallback` reports which route ran).
pub struct TrimResult {
    pub keep: Vec<bool>,
    pub fallback_diagonal: bool,
}

pub fn mahalanobis_trim(
    estimates: &[[f64; 8]],
    truth: &RetasParams,
    frac: f64,
) -> Result<TrimResult, EvalError> {
    let n = estimates.len();
    if frac > 0.0 && n < 20 {
        return Err(EvalError::TooFewEstimates { n, min: 20 });
    }
    let center = [
        truth.kappa,
        truth.beta,
        truth.p,
        truth.c,
        truth.sigma1_sq,
        truth.sigma2_sq,
        truth.a,
        truth.alpha,
    ];
    let dim = 8;
    let mut mean = [0.0; 8];
    for est in estimates {
        for d in 0..dim {
            mean[d] += est[d] / n as f64;
        }
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for est in estimates {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += (est[i] - mean[i]) * (est[j] - mean[j]) / (n as f64 - 1.0);
            }
        }
    }

    let inv = estimation::invert_spd_for_trim(&cov);
    let (dists, fallback): (Vec<f64>, bool) = match inv {
        Some(ci) => (
            estimates
                .iter()
                .map(|est| {
                    let d: Vec<f64> = (0..dim).map(|k| est[k] - center[k]).collect();
                    (0..dim)
                        .map(|i| d[i] * (0..dim).map(|j| ci[i][j] * d[j]).sum::<f64>())
                        .sum::<f64>()
                })
                .collect(),
            false,
        ),
        None => (
            estimates
                .iter()
                .map(|est| {
                    (0..dim)
                        .map(|k| {
                            let v = cov[k][k];
                            if v > 0.0 {
                                (est[k] - center[k]).powi(2) / v
                            } else {
                                0.0
                            }
                        })
                        .sum()
                })
                .collect(),
            true,
        ),
    };

    let n_drop = (frac * n as f64).round() as usize;
    let mut keep = vec![true; n];
    if n_drop > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]));
        for &i in order.iter().take(n_drop) {
            keep[i] = false;
        }
    }
    Ok(TrimResult { keep, fallback_diagonal: fallback })
}

/// How the background is handled during fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FitMode {
    /// Background fixed at the true simulation density.
    KnownNu,
    /// Semi-parametric fit at one smoothing multiplier.
    Semiparametric { zeta: f64 },
    /// Semi-parametric fits across a grid with AICc selection.
    AiccSelected { grid: Vec<f64> },
}

/// Declustering variants evaluated per replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyDecluster {
    /// RETAS fit, backward-smoothed probabilities.
    Smoothed,
    /// RETAS fit, filtered-only probabilities.
    Filtered,
    /// Kappa fixed at 1 (ETAS); filtered and smoothed coincide.
    Etas,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sim: SimConfig,
    pub replicates: u64,
    pub fit: FitMode,
    pub decluster: Vec<StudyDecluster>,
    /// Mahalanobis trim fraction for the estimate table (0.05 in the studies).
    pub trim_frac: f64,
    pub compute_se: bool,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaFit {
    pub zeta: f64,
    pub params: RetasParams,
    pub loglik: f64,
    pub aicc: f64,
    pub dof: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeMetrics {
    pub mode: StudyDecluster,
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub pct_mainshocks: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub n_events: usize,
    pub estimate: RetasParams,
    pub se: Vec<Option<f64>>,
    pub loglik: f64,
    pub selected_zeta: Option<f64>,
    pub by_zeta: Vec<ZetaFit>,
    pub metrics: Vec<ModeMetrics>,
}

/// Per-parameter aggregate rows over the kept replicates.
#[derive(Debug, Clone, Serialize)]
pub struct ParamAggregate {
    pub est: [f64; 8],
    /// Standard deviation of the estimates.
    pub se: [f64; 8],
    /// Mean of the per-replicate standard-error estimates.
    pub se_hat: [Option<f64>; 8],
    /// Empirical coverage of theta_hat +/- 1.96 se_hat intervals.
    pub cp: [Option<f64>; 8],
}

#[derive(Debug, Serialize)]
pub struct StudyResult {
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<(u64, String)>,
    pub kept: Vec<bool>,
    pub trim_fallback: bool,
    pub aggregate: ParamAggregate,
    /// Mean AUC and accuracy per requested decluster mode, over all
    /// successful replicates (classification metrics are not trimmed).
    pub mode_means: Vec<(StudyDecluster, f64, f64)>,
}

fn params_array(p: &RetasParams) -> [f64; 8] {
    [p.kappa, p.beta, p.p, p.c, p.sigma1_sq, p.sigma2_sq, p.a, p.alpha]
}

fn decluster_metrics(
    mode: StudyDecluster,
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
    truth: &SimulatedCatalog,
) -> Result<ModeMetrics, EvalError> {
    let evaluator = Evaluator::new(catalog, nu)?;
    let state = evaluator.forward_filter(params)?;
    let result = match mode {
        StudyDecluster::Smoothed => {
            let log_f = smoother::backward_messages_with(&evaluator, &state, params)?;
            let q = smoother::smooth_q(&state, &log_f)?;
            smoother::decluster_smoothed_with(&evaluator, &state, &log_f, &q, params)?
        }
        StudyDecluster::Filtered | StudyDecluster::Etas => {
            smoother::decluster_filtered(&state, catalog, params, nu)?
        }
    };
    // omega_1 is deterministically a main-shock; excluded from the ROC.
    let labels: Vec<bool> = truth.labels.iter().skip(1).map(|&l| l == 0).collect();
    let scores: Vec<f64> = result.omega.iter().skip(1).copied().collect();
    let auc = roc_auc(&scores, &labels).map(|(_, a)| a).ok();
    let accuracy = branching_accuracy(&result, truth)?;
    let n = catalog.n() as f64;
    let pct = 100.0 * result.omega.iter().sum::<f64>() / n;
    Ok(ModeMetrics { mode, auc, accuracy, pct_mainshocks: pct })
}

fn run_replicate(config: &StudyConfig, rep: u64) -> Result<ReplicateOutcome, EvalError> {
    let sim = simulate_replicate(&config.sim, rep).map_err(|e| EvalError::Simulation(e.to_string()))?;
    let catalog = &sim.catalog;
    let points: Vec<(f64, f64)> = catalog.events.iter().map(|e| (e.x, e.y)).collect();

    // RETAS fit under the configured background handling.
    let (retas_params, retas_nu, loglik, se, selected_zeta, by_zeta) = match &config.fit {
        FitMode::KnownNu => {
            let nu = BackgroundIntensity::BivariateNormal {
                mean_x: config.sim.nu.mean_x,
                mean_y: config.sim.nu.mean_y,
                var_x: config.sim.nu.var_x,
                var_y: config.sim.nu.var_y,
            };
            let init = telescoping_init(catalog)?;
            let fit = estimation::mle_fixed_background(catalog, &nu, &init, &config.optimizer)?;
            let se = if config.compute_se {
                standard_errors(catalog, &nu, &fit.params)?.se
            } else {
                vec![None; 8]
            };
            (fit.params, nu, fit.loglik, se, None, Vec::new())
        }
        FitMode::Semiparametric { zeta } => {
            let opts = FitOptions { zeta: *zeta, compute_se: config.compute_se, ..FitOptions::default() };
            let report = estimation::semiparametric_fit_with(catalog, &config.optimizer, &opts)?;
            let nu = BackgroundIntensity::WeightedKde(crate::kde::WeightedKde::new(
                points.clone(),
                report.nu_weights.clone(),
                report.h.expect("kde fit carries a bandwidth"),
            ).map_err(EstimationError::from)?);
            (report.params, nu, report.loglik, report.se.clone(), None, Vec::new())
        }
        FitMode::AiccSelected { grid } => {
            let mut carry: Option<RetasParams> = None;
            let mut fits: Vec<(f64, estimation::FitReport)> = Vec::new();
            for &zeta in grid {
                let opts = FitOptions {
                    zeta,
                    compute_se: false,
                    init: carry,
                    warm_start: carry.is_some(),
                    ..FitOptions::default()
                };
                match estimation::semiparametric_fit_with(catalog, &config.optimizer, &opts) {
                    Ok(report) => {
                        carry = Some(report.params);
                        fits.push((zeta, report));
                    }
                    Err(_) => continue,
                }
            }
            let best = fits
                .iter()
                .min_by(|a, b| a.1.aicc.total_cmp(&b.1.aicc))
                .ok_or(EstimationError::AllCandidatesFailed)?;
            let (best_zeta, report) = (best.0, best.1.clone());
            let by_zeta = fits
                .iter()
                .map(|(z, r)| ZetaFit {
                    zeta: *z,
                    params: r.params,
                    loglik: r.loglik,
                    aicc: r.aicc,
                    dof: r.dof_kde,
                })
                .collect();
            let se = if config.compute_se {
                let nu = BackgroundIntensity::WeightedKde(crate::kde::WeightedKde::new(
                    points.clone(),
                    report.nu_weights.clone(),
                    report.h.expect("kde fit carries a bandwidth"),
                ).map_err(EstimationError::from)?);
                standard_errors(catalog, &nu, &report.params)?.se
            } else {
                report.se.clone()
            };
            let nu = BackgroundIntensity::WeightedKde(crate::kde::WeightedKde::new(
                points.clone(),
                report.nu_weights.clone(),
                report.h.expect("kde fit carries a bandwidth"),
            ).map_err(EstimationError::from)?);
            (report.params, nu, report.loglik, se, Some(best_zeta), by_zeta)
        }
    };

    // Declustering metrics; the ETAS comparison refits with kappa pinned.
    let mut metrics = Vec::new();
    let mut etas_fit: Option<(RetasParams, BackgroundIntensity)> = None;
    for &mode in &config.decluster {
        match mode {
            StudyDecluster::Smoothed | StudyDecluster::Filtered => {
                metrics.push(decluster_metrics(mode, catalog, &retas_params, &retas_nu, &sim)?);
            }
            StudyDecluster::Etas => {
                if etas_fit.is_none() {
                    let (params, nu) = match &config.fit {
                        FitMode::KnownNu => {
                            let nu = retas_nu.clone();
                            let init = telescoping_init(catalog)?;
                            let fit = estimation::mle_with_options(
                                catalog,
                                &nu,
                                &init,
                                &config.optimizer,
                                Some(1.0),
                            )?;
                            (fit.params, nu)
                        }
                        FitMode::Semiparametric { .. } | FitMode::AiccSelected { .. } => {
                            let zeta = match &config.fit {
                                FitMode::Semiparametric { zeta } => *zeta,
                                FitMode::AiccSelected { .. } => selected_zeta.unwrap_or(1.0),
                                FitMode::KnownNu => unreachable!(),
                            };
                            let opts = FitOptions {
                                zeta,
                                compute_se: false,
                                fix_kappa: Some(1.0),
                                ..FitOptions::default()
                            };
                            let report =
                                estimation::semiparametric_fit_with(catalog, &config.optimizer, &opts)?;
                            let nu = BackgroundIntensity::WeightedKde(crate::kde::WeightedKde::new(
                                points.clone(),
                                report.nu_weights.clone(),
                                report.h.expect("kde fit carries a bandwidth"),
                            ).map_err(EstimationError::from)?);
                            (report.params, nu)
                        }
                    };
                    etas_fit = Some((params, nu));
                }
                let (params, nu) = etas_fit.as_ref().expect("just set");
                metrics.push(decluster_metrics(mode, catalog, params, nu, &sim)?);
            }
        }
    }

    Ok(ReplicateOutcome {
        replicate: rep,
        n_events: catalog.n(),
        estimate: retas_params,
        se,
        loglik,
        selected_zeta,
        by_zeta,
        metrics,
    })
}

/// Run the full study: simulate, fit, decluster, aggregate. Replicates run
/// in parallel on fixed per-replicate RNG streams; results are reduced in
/// replicate order, so identical seeds reproduce bit-identical output.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult, EvalError> {
    let progress = std::env::var("RETAS_PROGRESS").is_ok();
    let results: Vec<(u64, Result<ReplicateOutcome, EvalError>)> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let out = run_replicate(config, rep);
            if progress {
                eprintln!(
                    "replicate {rep}: {}",
                    match &out {
                        Ok(o) => format!("ok (n = {})", o.n_events),
                        Err(e) => format!("failed: {e}"),
                    }
                );
            }
            (rep, out)
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (rep, res) in results {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    if outcomes.is_empty() {
        return Err(EvalError::Simulation("every replicate failed".into()));
    }

    // Trim on the estimates, then aggregate the estimator table.
    let estimates: Vec<[f64; 8]> = outcomes.iter().map(|o| params_array(&o.estimate)).collect();
    let (kept, trim_fallback) = if config.trim_frac > 0.0 && estimates.len() >= 20 {
        let trim = mahalanobis_trim(&estimates, &config.sim.params, config.trim_frac)?;
        (trim.keep, trim.fallback_diagonal)
    } else {
        (vec![true; estimates.len()], false)
    };

    let truth = params_array(&config.sim.params);
    let mut est = [0.0; 8];
    let mut se = [0.0; 8];
    let mut se_hat = [None; 8];
    let mut cp = [None; 8];
    let kept_idx: Vec<usize> = (0..outcomes.len()).filter(|&i| kept[i]).collect();
    let kn = kept_idx.len() as f64;
    for d in 0..8 {
        let vals: Vec<f64> = kept_idx.iter().map(|&i| estimates[i][d]).collect();
        let mean = vals.iter().sum::<f64>() / kn;
        est[d] = mean;
        se[d] = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kn - 1.0).max(1.0)).sqrt();
        let ses: Vec<f64> = kept_idx
            .iter()
            .filter_map(|&i| outcomes[i].se.get(d).copied().flatten())
            .collect();
        if !ses.is_empty() {
            se_hat[d] = Some(ses.iter().sum::<f64>() / ses.len() as f64);
            let covered = kept_idx
                .iter()
                .filter(|&&i| {
                    outcomes[i].se[d].is_some_and(|s| (estimates[i][d] - truth[d]).abs() <= 1.96 * s)
                })
                .count();
            cp[d] = Some(covered as f64 / ses.len() as f64);
        }
    }

    let mut mode_means = Vec::new();
    for &mode in &config.decluster {
        let aucs: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.metrics.iter().filter(|m| m.mode == mode).filter_map(|m| m.auc))
            .collect();
        let accs: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.metrics.iter().filter(|m| m.mode == mode).map(|m| m.accuracy))
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        mode_means.push((mode, mean(&aucs), mean(&accs)));
    }

    Ok(StudyResult {
        outcomes,
        failures,
        kept,
        trim_fallback,
        aggregate: ParamAggregate { est, se, se_hat, cp },
        mode_means,
    })
}

/// One cluster of the MAP branching forest.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    /// 0-based index of the root (main-shock) event.
    pub root: usize,
    /// Number of events including the main-shock.
    pub size: usize,
    /// Number of aftershock generations (0 for a singleton).
    pub generations: u32,
    /// 0-based member indices in time order.
    pub members: Vec<usize>,
}

/// Build the most-probable-label forest and summarize each cluster,
/// largest first.
pub fn cluster_report(result: &DeclusterResult, catalog: &Catalog) -> Vec<ClusterSummary> {
    let labels = smoother::most_probable_labels(result);
    let n = catalog.n();
    let mut depth = vec![0u32; n];
    let mut root = vec![0usize; n];
    for i in 0..n {
        if labels[i] == 0 {
            root[i] = i;
            depth[i] = 0;
        } else {
            let parent = labels[i] - 1;
            root[i] = root[parent];
            depth[i] = depth[parent] + 1;
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, ClusterSummary> = Default::default();
    for i in 0..n {
        let entry = clusters.entry(root[i]).or_insert_with(|| ClusterSummary {
            root: root[i],
            size: 0,
            generations: 0,
            members: Vec::new(),
        });
        entry.size += 1;
        entry.generations = entry.generations.max(depth[i]);
        entry.members.push(i);
    }
    let mut out: Vec<ClusterSummary> = clusters.into_values().collect();
    out.sort_by(|a, b| b.size.cmp(&a.size).then(a.root.cmp(&b.root)));
    out
}
