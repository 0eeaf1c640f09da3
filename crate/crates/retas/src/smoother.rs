//! Backward smoothing and stochastic declustering.
//!
//! Starting from the filtered probabilities `p_ij`, a backward recursion
//! over messages
//!
//! ```text
//! f_ij = exp(-int_{t_{i-1}}^{t_i} mu(s - t_j) ds) [ f_{i+1,j} phi_i + f_{i+1,i} mu(t_i - t_j) nu_i ]
//! ```
//!
//! yields the smoothed most-recent-main-shock probabilities
//! `q_ij = f_ij p_ij / sum_k f_ik p_ik`, the smoothed main-shock
//! probabilities `omega_i`, and the parent probabilities `pi_ij`. The
//! exp(-Delta Phi) factors of the message recursion are constant within a
//! row and all downstream formulas use only within-row ratios, so messages
//! are stored row-normalized in log space with the (irrelevant) normalizer
//! discarded. A filtered-only variant conditions on the pre-event history
//! alone, and an enumeration oracle covers small catalogs.

use crate::catalog::{Catalog, SpatialWindow};
use crate::kernels::RetasParams;
use crate::likelihood::{
    enumerate_posterior, BackgroundIntensity, Evaluator, FilterState, LikelihoodError, Triangle,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclusterMode {
    /// Conditional on the complete catalog (backward-smoothed).
    Smoothed,
    /// Conditional on the history up to and including each event.
    Filtered,
}

/// Branching-structure probabilities for one catalog.
///
/// Triangular rows r = 0..n-2 correspond to events i = r + 2 (1-based):
/// `q.row(r)[j]` is P(I(t_i) = j+1 | data), `pi.row(r)[j]` is
/// P(B_i = j+1 | data). `omega[0]` is 1 by convention: the first event has
/// no possible parent. `log_f` holds the row-normalized backward messages
/// (rows i = 2..n+1); it is empty in filtered mode.
#[derive(Debug, Clone)]
pub struct DeclusterResult {
    pub mode: DeclusterMode,
    pub q: Triangle,
    pub omega_ij: Triangle,
    pub omega: Vec<f64>,
    pub pi: Triangle,
    pub log_f: Triangle,
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn normalize_log_row(row: &mut [f64]) -> Result<(), LikelihoodError> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(LikelihoodError::NonFinite { event: 0 });
    }
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for v in row.iter_mut() {
        *v -= lse;
    }
    Ok(())
}

/// Backward messages f_ij, row-normalized in log space (rows i = 2..n+1).
pub fn backward_messages(
    state: &FilterState,
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
) -> Result<Triangle, LikelihoodError> {
    let ev = Evaluator::new(catalog, nu)?;
    backward_messages_with(&ev, state, params)
}

pub(crate) fn backward_messages_with(
    ev: &Evaluator,
    state: &FilterState,
    params: &RetasParams,
) -> Result<Triangle, LikelihoodError> {
    let n = ev.catalog().n();
    let ctx = ev.context(params)?;
    let mut log_f = Triangle::zeros(n);

    // Initial conditions f_{n+1,j}: exactly the stored survival row; the
    // Phi(T) - Phi(t_n) factor is row-constant and drops on normalization.
    let tail = state.log_s.row(n - 1).to_vec();
    log_f.row_mut(n - 1).copy_from_slice(&tail);
    normalize_log_row(log_f.row_mut(n - 1))?;

    // Rows i = n..2 (0-based event e = i - 1 supplies phi, mu, nu).
    for e in (1..n).rev() {
        let r = e - 1;
        let ln_phi_e = ctx.ln_phi[e];
        let ln_nu_e = ev.ln_nu()[e];
        for j in 0..e {
            let next_j = log_f.row(r + 1)[j];
            let next_e = log_f.row(r + 1)[e];
            let ln_mu = ev.ln_mu_cell(&ctx, e, j);
            let inner = log_add_exp(next_j + ln_phi_e, next_e + ln_mu + ln_nu_e);
            log_f.row_mut(r)[j] = state.log_s.row(r)[j] + inner;
        }
        normalize_log_row(log_f.row_mut(r)).map_err(|_| LikelihoodError::NonFinite { event: e + 1 })?;
    }
    Ok(log_f)
}

/// Smoothed most-recent-main-shock probabilities q_ij (rows i = 2..n).
pub fn smooth_q(state: &FilterState, log_f: &Triangle) -> Result<Triangle, LikelihoodError> {
    let n = state.log_p.rows();
    let mut q = Triangle::zeros(n - 1);
    for r in 0..n - 1 {
        let pf: Vec<f64> = state
            .log_p
            .row(r)
            .iter()
            .zip(log_f.row(r))
            .map(|(lp, lf)| lp + lf)
            .collect();
        let max = pf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(LikelihoodError::NonFinite { event: r + 2 });
        }
        let denom: f64 = pf.iter().map(|v| (v - max).exp()).sum();
        for (dst, v) in q.row_mut(r).iter_mut().zip(&pf) {
            *dst = (v - max).exp() / denom;
        }
    }
    Ok(q)
}

/// Smoothed branching-structure probabilities from the messages and q.
pub fn decluster_smoothed(
    state: &FilterState,
    log_f: &Triangle,
    q: &Triangle,
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
) -> Result<DeclusterResult, LikelihoodError> {
    let ev = Evaluator::new(catalog, nu)?;
    decluster_smoothed_with(&ev, state, log_f, q, params)
}

pub(crate) fn decluster_smoothed_with(
    ev: &Evaluator,
    _state: &FilterState,
    log_f: &Triangle,
    q: &Triangle,
    params: &RetasParams,
) -> Result<DeclusterResult, LikelihoodError> {
    let n = ev.catalog().n();
    let ctx = ev.context(params)?;
    let mut omega = vec![0.0; n];
    omega[0] = 1.0;
    let mut omega_ij = Triangle::zeros(n.saturating_sub(1));
    let mut pi = Triangle::zeros(n.saturating_sub(1));

    for e in 1..n {
        let r = e - 1;
        let lf_next = log_f.row(r + 1);
        let lf_next_e = lf_next[e];
        let ln_phi_e = ctx.ln_phi[e];
        let ln_nu_e = ev.ln_nu()[e];
        let q_row = q.row(r);

        // omega_ij and the row constant C_i = sum_k q_ik f_{i+1,k} / D_k,
        // where D_k = f_{i+1,i} mu(t_i - t_k) nu_i + f_{i+1,k} phi_i.
        let mut ln_c = f64::NEG_INFINITY;
        let mut omega_acc = 0.0;
        for k in 0..e {
            let lm = lf_next_e + ev.ln_mu_cell(&ctx, e, k) + ln_nu_e;
            let le = lf_next[k] + ln_phi_e;
            let ld = log_add_exp(lm, le);
            let w = q_row[k] * (lm - ld).exp();
            omega_ij.row_mut(r)[k] = w;
            omega_acc += w;
            if q_row[k] > 0.0 {
                ln_c = log_add_exp(ln_c, q_row[k].ln() + lf_next[k] - ld);
            }
        }
        omega[e] = omega_acc;

        // pi_ij = k(m_j) g f * C_i: the parent term factors out of the k-sum.
        for j in 0..e {
            pi.row_mut(r)[j] = (ev.ln_gfk_cell(params, &ctx, e, j) + ln_c).exp();
        }
        if !omega[e].is_finite() {
            return Err(LikelihoodError::NonFinite { event: e + 1 });
        }
    }

    Ok(DeclusterResult {
        mode: DeclusterMode::Smoothed,
        q: q.clone(),
        omega_ij,
        omega,
        pi,
        log_f: log_f.clone(),
    })
}

/// Full smoothing pipeline: messages, q, then omega and pi.
pub fn decluster(
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
    state: &FilterState,
) -> Result<DeclusterResult, LikelihoodError> {
    let ev = Evaluator::new(catalog, nu)?;
    let log_f = backward_messages_with(&ev, state, params)?;
    let q = smooth_q(state, &log_f)?;
    decluster_smoothed_with(&ev, state, &log_f, &q, params)
}

/// Filtered-only declustering: posterior of B_i given the history up to
/// and including event i (the ETAS-style algorithm). The most-recent-
/// main-shock mixture weights are the event-updated filtered
/// probabilities p_ij d_ij / sum_k p_ik d_ik, and nu multiplies the
/// renewal hazard exactly as in the smoothed formulas; the prefix
/// enumeration oracle pins both choices.
pub fn decluster_filtered(
    state: &FilterState,
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
) -> Result<DeclusterResult, LikelihoodError> {
    let ev = Evaluator::new(catalog, nu)?;
    let n = catalog.n();
    let ctx = ev.context(params)?;
    let mut omega = vec![0.0; n];
    omega[0] = 1.0;
    let mut q = Triangle::zeros(n.saturating_sub(1));
    let mut omega_ij = Triangle::zeros(n.saturating_sub(1));
    let mut pi = Triangle::zeros(n.saturating_sub(1));

    for e in 1..n {
        let r = e - 1;
        let ln_phi_e = ctx.ln_phi[e];
        let ln_nu_e = ev.ln_nu()[e];

        // Event-updated most-recent-main-shock posterior.
        let lpd: Vec<f64> = state
            .log_p
            .row(r)
            .iter()
            .zip(state.log_d.row(r))
            .map(|(lp, ld)| lp + ld)
            .collect();
        let max = lpd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(LikelihoodError::NonFinite { event: e + 1 });
        }
        let denom: f64 = lpd.iter().map(|v| (v - max).exp()).sum();
        let ln_z = max + denom.ln();

        let mut ln_c = f64::NEG_INFINITY;
        let mut omega_acc = 0.0;
        for k in 0..e {
            let p_tilde = (lpd[k] - ln_z).exp();
            q.row_mut(r)[k] = p_tilde;
            let lm = ev.ln_mu_cell(&ctx, e, k) + ln_nu_e;
            let ld = log_add_exp(lm, ln_phi_e);
            let w = p_tilde * (lm - ld).exp();
            omega_ij.row_mut(r)[k] = w;
            omega_acc += w;
            ln_c = log_add_exp(ln_c, lpd[k] - ln_z - ld);
        }
        omega[e] = omega_acc;
        for j in 0..e {
            pi.row_mut(r)[j] = (ev.ln_gfk_cell(params, &ctx, e, j) + ln_c).exp();
        }
    }

    Ok(DeclusterResult {
        mode: DeclusterMode::Filtered,
        q,
        omega_ij,
        omega,
        pi,
        log_f: Triangle::zeros(0),
    })
}

/// Most probable label per event: 0 for main-shock, otherwise the 1-based
/// parent index. Ties break toward main-shock, then the earliest parent.
pub fn most_probable_labels(result: &DeclusterResult) -> Vec<usize> {
    let n = result.omega.len();
    let mut labels = vec![0usize; n];
    for e in 1..n {
        let r = e - 1;
        let mut best = result.omega[e];
        let mut label = 0usize;
        for (j, &p) in result.pi.row(r).iter().enumerate() {
            if p > best {
                best = p;
                label = j + 1;
            }
        }
        labels[e] = label;
    }
    labels
}

/// Exhaustive-enumeration declustering oracle; refused above n = 8.
pub fn brute_force_decluster(
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
    window: &SpatialWindow,
) -> Result<DeclusterResult, LikelihoodError> {
    const MAX_N: usize = 8;
    if catalog.n() > MAX_N {
        return Err(LikelihoodError::TooLarge { n: catalog.n(), max: MAX_N });
    }
    let post = enumerate_posterior(catalog, params, nu, window)?;
    Ok(DeclusterResult {
        mode: DeclusterMode::Smoothed,
        q: post.q,
        omega_ij: post.omega_ij,
        omega: post.omega,
        pi: post.pi,
        log_f: Triangle::zeros(0),
    })
}
