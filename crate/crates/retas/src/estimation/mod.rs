//! Maximum-likelihood fitting: fixed-background optimization in a
//! transformed parameter space, observed-information standard errors, the
//! iterative semi-parametric procedure, AICc-based smoothing selection,
//! telescoping initialization, and waiting-time summaries.
//!
//! The semi-parametric loop alternates
//!
//! 1. equal-weight KDE for the background intensity,
//! 2. likelihood maximization with the background held fixed,
//! 3. smoothed main-shock probabilities from the declustering recursions,
//! 4. weighted-KDE update of the background,
//!
//! until the log-likelihood changes by less than the tolerance (default
//! 0.001) between successive iterations.

mod optimizer;

pub use optimizer::MinimizeResult;

use crate::catalog::Catalog;
use crate::kde::{self, BandwidthMatrix, WeightedKde};
use crate::kernels::{self, KernelError, MagnitudeParams, RetasParams};
use crate::likelihood::{BackgroundIntensity, Evaluator, LikelihoodError};
use crate::smoother;
use crate::special::digamma;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("kde error: {0}")]
    Kde(#[from] kde::KdeError),
    #[error("not enough events: {n} (need >= {min})")]
    TooFewEvents { n: usize, min: usize },
    #[error("all smoothing candidates failed")]
    AllCandidatesFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Nelder-Mead followed by a numeric-gradient BFGS polish.
    NelderMead,
    /// BFGS with numeric gradients from the starting point.
    QuasiNewtonNumericGrad,
}

/// Optimizer budget and tolerances. The parameter transform is fixed:
/// log for kappa, beta, p-1, c, sigma1^2, sigma2^2, A; identity for alpha.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial simplex step in the transformed space.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: Algorithm::NelderMead,
            max_evals: 4000,
            x_tol: 1e-7,
            f_tol: 1e-5,
            initial_step: 0.25,
        }
    }
}

impl OptimizerConfig {
    /// Budget for restarts from a near-optimal point.
    pub fn warm(&self) -> OptimizerConfig {
        OptimizerConfig { initial_step: 0.05, max_evals: self.max_evals.min(1500), ..*self }
    }
}

/// Fixed log/identity transform between the constrained parameter vector
/// and the unconstrained optimizer space; `fix_kappa` drops the first
/// coordinate for ETAS-style fits.
#[derive(Debug, Clone, Copy)]
struct Transform {
    fix_kappa: Option<f64>,
}

impl Transform {
    fn dim(&self) -> usize {
        if self.fix_kappa.is_some() {
            7
        } else {
            8
        }
    }

    fn to_z(&self, p: &RetasParams) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim());
        if self.fix_kappa.is_none() {
            z.push(p.kappa.ln());
        }
        z.extend_from_slice(&[
            p.beta.ln(),
            (p.p - 1.0).ln(),
            p.c.ln(),
            p.sigma1_sq.ln(),
            p.sigma2_sq.ln(),
            p.a.ln(),
            p.alpha,
        ]);
        z
    }

    fn to_params(&self, z: &[f64]) -> RetasParams {
        let clamp = |v: f64| v.clamp(-300.0, 300.0).exp();
        let (kappa, rest) = match self.fix_kappa {
            Some(k) => (k, z),
            None => (clamp(z[0]), &z[1..]),
        };
        RetasParams {
            kappa,
            beta: clamp(rest[0]),
            p: 1.0 + clamp(rest[1]),
            c: clamp(rest[2]),
            sigma1_sq: clamp(rest[3]),
            sigma2_sq: clamp(rest[4]),
            a: clamp(rest[5]),
            alpha: rest[6].clamp(-50.0, 50.0),
        }
    }
}

/// A maximum-likelihood fit with the background held fixed.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub params: RetasParams,
    pub loglik: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Maximize the log-likelihood over the RETAS parameters with nu fixed.
pub fn mle_fixed_background(
    catalog: &Catalog,
    nu: &BackgroundIntensity,
    init: &RetasParams,
    cfg: &OptimizerConfig,
) -> Result<MleFit, EstimationError> {
    mle_with_options(catalog, nu, init, cfg, None)
}

/// As [`mle_fixed_background`], optionally pinning kappa (ETAS nesting).
pub fn mle_with_options(
    catalog: &Catalog,
    nu: &BackgroundIntensity,
    init: &RetasParams,
    cfg: &OptimizerConfig,
    fix_kappa: Option<f64>,
) -> Result<MleFit, EstimationError> {
    mle_run(catalog, nu, init, cfg, fix_kappa, true)
}

fn mle_run(
    catalog: &Catalog,
    nu: &BackgroundIntensity,
    init: &RetasParams,
    cfg: &OptimizerConfig,
    fix_kappa: Option<f64>,
    polish: bool,
) -> Result<MleFit, EstimationError> {
    init.validate()?;
    let evaluator = Evaluator::new(catalog, nu)?;
    let transform = Transform { fix_kappa };
    let objective = |z: &[f64]| -> f64 {
        let params = transform.to_params(z);
        match evaluator.loglik(&params) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };
    let z0 = transform.to_z(init);
    let result = match cfg.algorithm {
        Algorithm::NelderMead => {
            let coarse = optimizer::nelder_mead(
                objective,
                &z0,
                cfg.initial_step,
                cfg.f_tol,
                cfg.x_tol,
                cfg.max_evals,
            );
            if polish {
                let remaining = cfg.max_evals.saturating_sub(coarse.evals).min(1200).max(200);
                let polished = optimizer::bfgs(objective, &coarse.x, 1e-5, cfg.f_tol, remaining);
                if polished.f <= coarse.f {
                    MinimizeResult {
                        evals: coarse.evals + polished.evals,
                        converged: polished.converged || coarse.converged,
                        ..polished
                    }
                } else {
                    coarse
                }
            } else {
                coarse
            }
        }
        Algorithm::QuasiNewtonNumericGrad => {
            optimizer::bfgs(objective, &z0, 1e-5, cfg.f_tol, cfg.max_evals)
        }
    };
    let params = transform.to_params(&result.x);
    Ok(MleFit { params, loglik: -result.f, evals: result.evals, converged: result.converged })
}

/// Standard errors from the observed information matrix.
#[derive(Debug, Clone, Serialize)]
pub struct StdErrors {
    /// Per-parameter standard errors in the order
    /// (kappa, beta, p, c, sigma1_sq, sigma2_sq, A, alpha); None where the
    /// inverse information is not positive.
    pub se: Vec<Option<f64>>,
    /// Inverse observed information (covariance) when available.
    #[serde(skip)]
    pub cov: Option<Vec<Vec<f64>>>,
    /// The Hessian failed a positive-definiteness check.
    pub not_positive_definite: bool,
}

fn params_to_array(p: &RetasParams) -> [f64; 8] {
    [p.kappa, p.beta, p.p, p.c, p.sigma1_sq, p.sigma2_sq, p.a, p.alpha]
}

fn array_to_params(a: &[f64; 8]) -> RetasParams {
    RetasParams {
        kappa: a[0],
        beta: a[1],
        p: a[2],
        c: a[3],
        sigma1_sq: a[4],
        sigma2_sq: a[5],
        a: a[6],
        alpha: a[7],
    }
}

/// Central-difference Hessian of -loglik at theta_hat in the original
/// parameterization, symmetrized; SEs are square roots of the inverse's
/// diagonal. Step sizes h_i = max(1e-5 |theta_i|, 1e-7).
pub fn standard_errors(
    catalog: &Catalog,
    nu: &BackgroundIntensity,
    params_hat: &RetasParams,
) -> Result<StdErrors, EstimationError> {
    let evaluator = Evaluator::new(catalog, nu)?;
    let f = |theta: &[f64; 8]| -> f64 {
        let p = array_to_params(theta);
        if p.validate().is_err() {
            return f64::NAN;
        }
        match evaluator.loglik(&p) {
            Ok(ll) => -ll,
            Err(_) => f64::NAN,
        }
    };
    let theta = params_to_array(params_hat);
    let h: Vec<f64> = theta.iter().map(|t| (1e-5 * t.abs()).max(1e-7)).collect();
    let hessian = central_hessian(&f, &theta, &h);
    Ok(invert_information(hessian))
}

fn central_hessian<F: Fn(&[f64; 8]) -> f64>(f: &F, x: &[f64; 8], h: &[f64]) -> Vec<Vec<f64>> {
    let n = 8;
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut xp = *x;
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut xx = *x;
            let mut val = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                xx[i] = x[i] + si * h[i];
                xx[j] = x[j] + sj * h[j];
                val += sign * f(&xx);
                xx[i] = x[i];
                xx[j] = x[j];
            }
            let v = val / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    // Symmetrize (H + H^T)/2; already symmetric by construction but kept
    // explicit to absorb rounding.
    for i in 0..n {
        for j in 0..n {
            let m = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = m;
            hess[j][i] = m;
        }
    }
    hess
}

fn cholesky_ok(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

fn invert_matrix(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.iter().map(|row| {
        let mut r = row.clone();
        r.extend((0..n).map(|_| 0.0));
        r
    }).collect();
    for i in 0..n {
        a[i][n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        let pv = a[col][col];
        for v in a[col].iter_mut() {
            *v /= pv;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col];
                if factor != 0.0 {
                    for k in 0..2 * n {
                        a[row][k] -= factor * a[col][k];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Inverse of a sample covariance for Mahalanobis distances; None when
/// the matrix is not usable as an SPD form.
pub(crate) fn invert_spd_for_trim(cov: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    if !cholesky_ok(cov) {
        return None;
    }
    invert_matrix(cov)
}

fn invert_information(hessian: Vec<Vec<f64>>) -> StdErrors {
    let pd = cholesky_ok(&hessian);
    match invert_matrix(&hessian) {
        Some(cov) => {
            let se = (0..8)
                .map(|i| {
                    let v = cov[i][i];
                    if v.is_finite() && v > 0.0 {
                        Some(v.sqrt())
                    } else {
                        None
                    }
                })
                .collect();
            StdErrors { se, cov: Some(cov), not_positive_definite: !pd }
        }
        None => StdErrors { se: vec![None; 8], cov: None, not_positive_definite: true },
    }
}

/// Full report of one semi-parametric (or fixed-background) fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub params: RetasParams,
    pub se: Vec<Option<f64>>,
    /// Maximized log-likelihood, magnitude term excluded.
    pub loglik: f64,
    pub mag: MagnitudeParams,
    pub mag_loglik: f64,
    pub dof_kde: f64,
    pub aicc: f64,
    pub productivity: f64,
    pub supercritical: bool,
    /// 100 * sum(omega_hat) / n.
    pub pct_mainshocks: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Smoothing multiplier; None for fixed parametric-background fits.
    pub zeta: Option<f64>,
    /// Bandwidth matrix of the KDE; None for fixed parametric-background fits.
    pub h: Option<BandwidthMatrix>,
    pub loglik_trajectory: Vec<f64>,
    pub optimizer_evals: usize,
    /// Smoothed main-shock probabilities at the reported fit.
    #[serde(skip)]
    pub omega: Vec<f64>,
    /// KDE weights of the background the final maximization conditioned on
    /// (all ones when convergence hit on the first pass).
    #[serde(skip)]
    pub nu_weights: Vec<f64>,
    #[serde(skip)]
    pub cov: Option<Vec<Vec<f64>>>,
}

/// Options for [`semiparametric_fit_with`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub zeta: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub fix_kappa: Option<f64>,
    /// Compute observed-information standard errors at the end.
    pub compute_se: bool,
    pub init: Option<RetasParams>,
    /// Externally supplied base bandwidth (e.g. a plug-in matrix); zeta
    /// still multiplies it. Defaults to the normal-reference matrix.
    pub h_override: Option<BandwidthMatrix>,
    /// The supplied init is already near-optimal (a neighboring fit), so
    /// the first maximization can start from a small simplex.
    pub warm_start: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            zeta: 1.0,
            tol: 1e-3,
            max_iterations: 50,
            fix_kappa: None,
            compute_se: true,
            init: None,
            h_override: None,
            warm_start: false,
        }
    }
}

/// The five-step semi-parametric iterative fit at one smoothing level.
pub fn semiparametric_fit(
    catalog: &Catalog,
    zeta: f64,
    cfg: &OptimizerConfig,
    tol: f64,
) -> Result<FitReport, EstimationError> {
    semiparametric_fit_with(catalog, cfg, &FitOptions { zeta, tol, ..FitOptions::default() })
}

pub fn semiparametric_fit_with(
    catalog: &Catalog,
    cfg: &OptimizerConfig,
    opts: &FitOptions,
) -> Result<FitReport, EstimationError> {
    let n = catalog.n();
    if n < 10 {
        return Err(EstimationError::TooFewEvents { n, min: 10 });
    }
    let points: Vec<(f64, f64)> = catalog.events.iter().map(|e| (e.x, e.y)).collect();
    let base_h = match opts.h_override {
        Some(h) => h,
        None => kde::default_bandwidth(catalog)?,
    };
    let h = base_h.scaled(opts.zeta);

    // Step 1: equal-weight KDE initializer.
    let mut nu = BackgroundIntensity::WeightedKde(WeightedKde::equal_weights(points.clone(), h)?);
    let mut init = match &opts.init {
        Some(p) => *p,
        None => telescoping_init(catalog)?,
    };
    if let Some(k) = opts.fix_kappa {
        init.kappa = k;
    }

    let mut trajectory: Vec<f64> = Vec::new();
    let mut evals = 0usize;
    let mut converged = false;
    let mut fit = None;
    let mut omega: Vec<f64> = vec![1.0; n];
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        // Step 2: maximize with the current background fixed. Restarts
        // from a solved neighboring problem go straight to quasi-Newton;
        // the full quasi-Newton polish waits until the loop has settled.
        let run_cfg = if iter == 0 && !opts.warm_start {
            *cfg
        } else {
            OptimizerConfig {
                algorithm: Algorithm::QuasiNewtonNumericGrad,
                max_evals: cfg.max_evals.min(500),
                ..cfg.warm()
            }
        };
        let current = mle_run(catalog, &nu, &init, &run_cfg, opts.fix_kappa, false)?;
        evals += current.evals;
        trajectory.push(current.loglik);
        let done = iter >= 1
            && (current.loglik - trajectory[iter - 1]).abs() < opts.tol;
        init = current.params;
        fit = Some((current, nu.clone()));

        if done {
            converged = true;
            break;
        }
        // Steps 3-4: smoothed weights, weighted-KDE update.
        let (current_fit, _) = fit.as_ref().expect("just set");
        let evaluator = Evaluator::new(catalog, &nu)?;
        let state = evaluator.forward_filter(&current_fit.params)?;
        let log_f = smoother::backward_messages_with(&evaluator, &state, &current_fit.params)?;
        let q = smoother::smooth_q(&state, &log_f)?;
        let declustered =
            smoother::decluster_smoothed_with(&evaluator, &state, &log_f, &q, &current_fit.params)?;
        omega = declustered.omega;
        nu = BackgroundIntensity::WeightedKde(WeightedKde::new(points.clone(), omega.clone(), h)?);
    }

    let (final_fit, final_nu) = fit.expect("at least one iteration");

    // Quasi-Newton polish of the settled optimum against the background
    // the last maximization conditioned on.
    let polish_cfg = OptimizerConfig {
        algorithm: Algorithm::QuasiNewtonNumericGrad,
        max_evals: 600,
        ..*cfg
    };
    let final_fit = match mle_run(catalog, &final_nu, &final_fit.params, &polish_cfg, opts.fix_kappa, false)
    {
        Ok(polished) if polished.loglik >= final_fit.loglik => {
            evals += polished.evals;
            trajectory.push(polished.loglik);
            MleFit { converged: converged || polished.converged, ..polished }
        }
        _ => final_fit,
    };

    let nu_weights = match &final_nu {
        BackgroundIntensity::WeightedKde(kde) => kde.weights().to_vec(),
        _ => vec![1.0; n],
    };

    // Recompute omega at the reported parameters against the background the
    // final maximization used (fixed-background conditioning throughout).
    {
        let evaluator = Evaluator::new(catalog, &final_nu)?;
        let state = evaluator.forward_filter(&final_fit.params)?;
        let log_f = smoother::backward_messages_with(&evaluator, &state, &final_fit.params)?;
        let q = smoother::smooth_q(&state, &log_f)?;
        let declustered =
            smoother::decluster_smoothed_with(&evaluator, &state, &log_f, &q, &final_fit.params)?;
        omega = declustered.omega;
    }

    let (se, cov, not_pd) = if opts.compute_se {
        let errs = standard_errors(catalog, &final_nu, &final_fit.params)?;
        (errs.se, errs.cov, errs.not_positive_definite)
    } else {
        (vec![None; 8], None, false)
    };
    let _ = not_pd;

    let mag = kernels::magnitude_mle(catalog)?;
    let mag_loglik = kernels::magnitude_loglik(catalog, &mag)?;
    let dof_kde = kde::kde_dof(&points, &h);
    let aicc = kde::aicc(final_fit.loglik, 8.0 + dof_kde, n as f64)?;
    let prod = kernels::productivity(&final_fit.params, mag.gamma);
    let pct = 100.0 * omega.iter().sum::<f64>() / n as f64;

    Ok(FitReport {
        params: final_fit.params,
        se,
        loglik: final_fit.loglik,
        mag,
        mag_loglik,
        dof_kde,
        aicc,
        productivity: prod.value,
        supercritical: prod.supercritical,
        pct_mainshocks: pct,
        iterations,
        converged,
        zeta: Some(opts.zeta),
        h: Some(h),
        loglik_trajectory: trajectory,
        optimizer_evals: evals,
        omega,
        nu_weights,
        cov,
    })
}

/// Full fit report for a fixed (typically parametric) background: one
/// maximization, no KDE iterations.
pub fn fixed_background_fit_report(
    catalog: &Catalog,
    nu: &BackgroundIntensity,
    cfg: &OptimizerConfig,
    init: Option<RetasParams>,
    fix_kappa: Option<f64>,
    compute_se: bool,
) -> Result<FitReport, EstimationError> {
    let n = catalog.n();
    let init = match init {
        Some(p) => p,
        None => telescoping_init(catalog)?,
    };
    let fit = mle_with_options(catalog, nu, &init, cfg, fix_kappa)?;
    let (se, cov) = if compute_se {
        let errs = standard_errors(catalog, nu, &fit.params)?;
        (errs.se, errs.cov)
    } else {
        (vec![None; 8], None)
    };
    let evaluator = Evaluator::new(catalog, nu)?;
    let state = evaluator.forward_filter(&fit.params)?;
    let log_f = smoother::backward_messages_with(&evaluator, &state, &fit.params)?;
    let q = smoother::smooth_q(&state, &log_f)?;
    let declustered = smoother::decluster_smoothed_with(&evaluator, &state, &log_f, &q, &fit.params)?;
    let omega = declustered.omega;

    let mag = kernels::magnitude_mle(catalog)?;
    let mag_loglik = kernels::magnitude_loglik(catalog, &mag)?;
    let aicc = kde::aicc(fit.loglik, 8.0, n as f64)?;
    let prod = kernels::productivity(&fit.params, mag.gamma);
    let pct = 100.0 * omega.iter().sum::<f64>() / n as f64;
    Ok(FitReport {
        params: fit.params,
        se,
        loglik: fit.loglik,
        mag,
        mag_loglik,
        dof_kde: 0.0,
        aicc,
        productivity: prod.value,
        supercritical: prod.supercritical,
        pct_mainshocks: pct,
        iterations: 1,
        converged: fit.converged,
        zeta: None,
        h: None,
        loglik_trajectory: vec![fit.loglik],
        optimizer_evals: fit.evals,
        omega,
        nu_weights: Vec::new(),
        cov,
    })
}

/// Result of AICc-based smoothing selection over a zeta grid.
#[derive(Debug)]
pub struct SelectionResult {
    pub best_zeta: f64,
    pub reports: Vec<(f64, Result<FitReport, EstimationError>)>,
}

/// Fit every zeta in the grid and pick the smallest AICc; failed fits are
/// skipped (selection over survivors). Successive fits warm-start from the
/// previous zeta's optimum.
pub fn select_smoothing(
    catalog: &Catalog,
    zeta_grid: &[f64],
    cfg: &OptimizerConfig,
) -> Result<SelectionResult, EstimationError> {
    if zeta_grid.is_empty() {
        return Err(EstimationError::AllCandidatesFailed);
    }
    let mut reports = Vec::with_capacity(zeta_grid.len());
    let mut carry: Option<RetasParams> = None;
    for &zeta in zeta_grid {
        let opts =
            FitOptions { zeta, init: carry, warm_start: carry.is_some(), ..FitOptions::default() };
        let res = semiparametric_fit_with(catalog, cfg, &opts);
        if let Ok(report) = &res {
            carry = Some(report.params);
        }
        reports.push((zeta, res));
    }
    let best = reports
        .iter()
        .filter_map(|(z, r)| r.as_ref().ok().map(|rep| (*z, rep.aicc)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((best_zeta, _)) => Ok(SelectionResult { best_zeta, reports }),
        None => Err(EstimationError::AllCandidatesFailed),
    }
}

/// Gamma MLE of (shape, scale) for positive samples via Newton iterations
/// on ln(shape).
fn gamma_mle(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = (mean.ln() - mean_ln).max(1e-12);
    // Minka's initializer, then Newton on g(k) = ln k - psi(k) - s.
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..40 {
        k = k.clamp(1e-3, 1e6);
        let g = k.ln() - digamma(k) - s;
        let dh = 1e-6 * k;
        let gp = ((k + dh).ln() - digamma(k + dh) - s - g) / dh;
        let step = g / gp;
        let next = k - step;
        if !next.is_finite() || next <= 0.0 {
            k *= 0.5;
        } else {
            let moved = (next - k).abs();
            k = next;
            if moved < 1e-10 * k {
                break;
            }
        }
    }
    let k = k.clamp(1e-3, 1e3);
    (k, mean / k)
}

/// Initialize the full model by fitting telescopically simpler nested
/// models: a pure renewal fit for (kappa, beta), a temporal ETAS fit for
/// (p, c, A, alpha), and nearest-neighbor spreads for the spatial
/// variances.
pub fn telescoping_init(catalog: &Catalog) -> Result<RetasParams, EstimationError> {
    let n = catalog.n();
    if n < 10 {
        return Err(EstimationError::TooFewEvents { n, min: 10 });
    }
    let t: Vec<f64> = catalog.events.iter().map(|e| e.t).collect();

    // Stage 1: renewal-only gamma MLE on inter-event waiting times.
    let gaps: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]).max(1e-9)).collect();
    let (kappa, beta) = gamma_mle(&gaps);

    // Stage 3 spreads first: squared offsets to the previous event among
    // close-in-time pairs, a crude aftershock length scale.
    let mut close_dx2: Vec<f64> = Vec::new();
    let mut close_dy2: Vec<f64> = Vec::new();
    let mut sorted_gaps = gaps.clone();
    sorted_gaps.sort_by(f64::total_cmp);
    let median_gap = sorted_gaps[sorted_gaps.len() / 2].max(1e-9);
    for i in 1..n {
        if t[i] - t[i - 1] <= median_gap {
            let dx = catalog.events[i].x - catalog.events[i - 1].x;
            let dy = catalog.events[i].y - catalog.events[i - 1].y;
            close_dx2.push(dx * dx);
            close_dy2.push(dy * dy);
        }
    }
    let robust_scale = |mut v: Vec<f64>, fallback: f64| -> f64 {
        if v.is_empty() {
            return fallback;
        }
        v.sort_by(f64::total_cmp);
        v[v.len() / 2].max(1e-8)
    };
    let whole_var = |f: &dyn Fn(&crate::catalog::Event) -> f64| -> f64 {
        let mean = catalog.events.iter().map(|e| f(e)).sum::<f64>() / n as f64;
        (catalog.events.iter().map(|e| (f(e) - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0))
            .max(1e-8)
    };
    let sigma1_sq = robust_scale(close_dx2, 0.1 * whole_var(&|e| e.x));
    let sigma2_sq = robust_scale(close_dy2, 0.1 * whole_var(&|e| e.y));

    // Stage 2: temporal ETAS (kappa = 1, space integrated out).
    let k_base: Vec<f64> = catalog.events.iter().map(|e| e.m - catalog.m0).collect();
    let t_end = catalog.t_end;
    let objective = |z: &[f64]| -> f64 {
        let mu0 = z[0].clamp(-300.0, 300.0).exp();
        let p = 1.0 + z[1].clamp(-300.0, 300.0).exp();
        let c = z[2].clamp(-300.0, 300.0).exp();
        let a = z[3].clamp(-300.0, 300.0).exp();
        let alpha = z[4].clamp(-50.0, 50.0);
        let mut ll = 0.0;
        for i in 0..n {
            let mut exc = 0.0;
            for j in 0..i {
                let lag = t[i] - t[j];
                let g = (p - 1.0) / c * (-p * (lag / c).ln_1p()).exp();
                exc += g * a * (alpha * k_base[j]).exp();
            }
            ll += (mu0 + exc).ln();
        }
        ll -= mu0 * t_end;
        for j in 0..n {
            let gg = -f64::exp_m1((1.0 - p) * ((t_end - t[j]) / c).ln_1p());
            ll -= a * (alpha * k_base[j]).exp() * gg;
        }
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let z0 = [
        (0.5 * n as f64 / t_end).ln(),
        (0.3f64).ln(),
        (0.05 * median_gap).max(1e-6).ln(),
        (0.3f64).ln(),
        1.0,
    ];
    let stage2 = optimizer::nelder_mead(objective, &z0, 0.4, 1e-4, 1e-6, 800);
    let (p, c, a, alpha) = if stage2.f.is_finite() {
        (
            1.0 + stage2.x[1].clamp(-300.0, 300.0).exp(),
            stage2.x[2].clamp(-300.0, 300.0).exp(),
            stage2.x[3].clamp(-300.0, 300.0).exp(),
            stage2.x[4].clamp(-50.0, 50.0),
        )
    } else {
        (1.2, 0.05 * median_gap, 0.3, 1.0)
    };

    let init = RetasParams {
        kappa,
        beta,
        p: p.clamp(1.001, 30.0),
        c: c.clamp(1e-9, t_end),
        sigma1_sq,
        sigma2_sq,
        a: a.clamp(1e-6, 50.0),
        alpha,
    };
    init.validate()?;
    Ok(init)
}

/// Renewal waiting-time summaries with delta-method standard errors from
/// the (kappa, beta) covariance block.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaitingTimeSummary {
    pub mean: f64,
    pub sd: f64,
    pub se_mean: Option<f64>,
    pub se_sd: Option<f64>,
}

pub fn waiting_time_summary(params: &RetasParams, cov: Option<&[[f64; 2]; 2]>) -> WaitingTimeSummary {
    let (k, b) = (params.kappa, params.beta);
    let mean = k * b;
    let sd = b * k.sqrt();
    let delta = |g: [f64; 2], c: &[[f64; 2]; 2]| -> f64 {
        let v = g[0] * (c[0][0] * g[0] + c[0][1] * g[1]) + g[1] * (c[1][0] * g[0] + c[1][1] * g[1]);
        v.max(0.0).sqrt()
    };
    let (se_mean, se_sd) = match cov {
        Some(c) => (
            Some(delta([b, k], c)),
            Some(delta([0.5 * b / k.sqrt(), k.sqrt()], c)),
        ),
        None => (None, None),
    };
    WaitingTimeSummary { mean, sd, se_mean, se_sd }
}
