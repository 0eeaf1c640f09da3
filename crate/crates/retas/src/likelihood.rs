//! Forward filtering over the latent most-recent-main-shock index and the
//! exact RETAS log-likelihood, plus a brute-force enumeration oracle for
//! small catalogs.
//!
//! With `d_1 = mu(t_1) nu_1 exp(-int_0^{t_1} mu)`, and for i = 2..n,
//! j = 1..i-1,
//!
//! ```text
//! S_ij = exp(-int_{t_{i-1}}^{t_i} mu(t - t_j) dt)
//! d_ij = (mu(t_i - t_j) nu(x_i, y_i) + phi(t_i, x_i, y_i)) S_ij
//! ```
//!
//! the log-likelihood is
//!
//! ```text
//! l = ln d_1 + sum_i ln( sum_j p_ij d_ij ) + ln( sum_j p_{n+1,j} S_{n+1,j} ) - Phi(T)
//! ```
//!
//! with the filtered probabilities p_ij updated recursively from the
//! initial condition p_21 = 1. The excitation compensator enters with a
//! negative sign: the enumeration oracle settles the sign empirically.
//!
//! Everything triangular is stored and combined in log space; rows of p
//! are normalized with log-sum-exp reductions. The inner cells run off a
//! per-call quintic-Hermite table for ln Q(kappa, x) (see
//! [`crate::special::LnQTable`]), so one objective evaluation costs
//! O(n^2) cheap cells rather than O(n^2) series iterations.

use crate::catalog::{Catalog, SpatialWindow};
use crate::kde::WeightedKde;
use crate::kernels::{self, KernelError, RetasParams};
use crate::special::{self, ln_gamma, LnQTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("catalog has no events")]
    Empty,
    #[error("non-finite intermediate at event {event}")]
    NonFinite { event: usize },
    #[error("brute force refused: n = {n} exceeds cap {max}")]
    TooLarge { n: usize, max: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Background spatial intensity nu(x, y): a fixed parametric form, a
/// weighted KDE handle, or a constant level.
#[derive(Debug, Clone)]
pub enum BackgroundIntensity {
    Constant(f64),
    BivariateNormal { mean_x: f64, mean_y: f64, var_x: f64, var_y: f64 },
    WeightedKde(WeightedKde),
}

impl BackgroundIntensity {
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        match self {
            BackgroundIntensity::Constant(level) => *level,
            BackgroundIntensity::BivariateNormal { mean_x, mean_y, var_x, var_y } => {
                let dx = x - mean_x;
                let dy = y - mean_y;
                (-0.5 * dx * dx / var_x - 0.5 * dy * dy / var_y).exp()
                    / (2.0 * std::f64::consts::PI * (var_x * var_y).sqrt())
            }
            BackgroundIntensity::WeightedKde(kde) => kde.evaluate(x, y),
        }
    }
}

/// Packed lower-triangular array of f64: row r (0-based) has r + 1 entries.
///
/// Spec-style indices map as row i (i = 2..) -> r = i - 2 with entries
/// j = 1..i-1 -> column j - 1.
#[derive(Debug, Clone)]
pub struct Triangle {
    data: Vec<f64>,
    rows: usize,
}

impl Triangle {
    pub fn zeros(rows: usize) -> Triangle {
        Triangle { data: vec![0.0; rows * (rows + 1) / 2], rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        let start = r * (r + 1) / 2;
        &self.data[start..start + r + 1]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let start = r * (r + 1) / 2;
        &mut self.data[start..start + r + 1]
    }
}

/// Result of the forward pass: filtered probabilities, survival and
/// event-density factors (all in log space), the per-event excitation
/// cache, the compensator at T, and the accumulated log-likelihood.
///
/// Triangular rows r = 0..n-1 correspond to recursion rows i = r + 2,
/// so `log_p.row(0)` is p_21 = 1 and `log_p.row(n-1)` holds p_{n+1,j}.
/// `log_s` shares that shape; its last row holds S_{n+1,j}. `log_d` has
/// rows i = 2..n only.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub log_p: Triangle,
    pub log_s: Triangle,
    pub log_d: Triangle,
    /// phi(t_i, x_i, y_i) per event (zero for the first event).
    pub phi: Vec<f64>,
    /// Excitation compensator Phi(T).
    pub phi_t_end: f64,
    /// Log-likelihood, magnitude term excluded.
    pub loglik: f64,
}

impl FilterState {
    /// Filtered probability P(I(t_i) = j | history), 1-based spec indices
    /// (2 <= i <= n+1, 1 <= j <= i-1).
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.log_p.row(i - 2)[j - 1].exp()
    }
}

/// Direct excitation sum phi(t, x, y) over strictly earlier events.
pub fn excitation(
    t: f64,
    x: f64,
    y: f64,
    catalog: &Catalog,
    params: &RetasParams,
) -> Result<f64, LikelihoodError> {
    let mut acc = 0.0;
    for e in catalog.events.iter().take_while(|e| e.t < t) {
        acc += kernels::omori_density(t - e.t, params)?
            * kernels::spatial_density(x - e.x, y - e.y, params)?
            * kernels::boost(e.m, params, catalog.m0)?;
    }
    Ok(acc)
}

/// Excitation compensator Phi(t): expected number of aftershocks in
/// [0, t] x S given the realized history.
pub fn excitation_compensator(
    t: f64,
    catalog: &Catalog,
    params: &RetasParams,
    window: &SpatialWindow,
) -> Result<f64, LikelihoodError> {
    let mut acc = 0.0;
    for e in catalog.events.iter().take_while(|e| e.t < t) {
        acc += kernels::boost(e.m, params, catalog.m0)?
            * kernels::omori_cdf(t - e.t, params)?
            * kernels::spatial_mass((e.x, e.y), window, params)?;
    }
    Ok(acc)
}

/// Per-catalog geometry reused across objective evaluations: packed
/// triangles of pairwise lags and squared offsets, plus per-event copies.
struct Geometry {
    n: usize,
    t: Vec<f64>,
    m: Vec<f64>,
    t_end: f64,
    /// Row i-1 (for event i, 0-based, i >= 1) holds t_i - t_j, j < i.
    u: Triangle,
    ln_u: Triangle,
    dx2: Triangle,
    dy2: Triangle,
}

impl Geometry {
    fn new(catalog: &Catalog) -> Geometry {
        let n = catalog.n();
        let ev = &catalog.events;
        let mut u = Triangle::zeros(n.saturating_sub(1));
        let mut ln_u = Triangle::zeros(n.saturating_sub(1));
        let mut dx2 = Triangle::zeros(n.saturating_sub(1));
        let mut dy2 = Triangle::zeros(n.saturating_sub(1));
        for i in 1..n {
            for j in 0..i {
                let lag = ev[i].t - ev[j].t;
                u.row_mut(i - 1)[j] = lag;
                ln_u.row_mut(i - 1)[j] = lag.ln();
                let dx = ev[i].x - ev[j].x;
                let dy = ev[i].y - ev[j].y;
                dx2.row_mut(i - 1)[j] = dx * dx;
                dy2.row_mut(i - 1)[j] = dy * dy;
            }
        }
        Geometry {
            n,
            t: ev.iter().map(|e| e.t).collect(),
            m: ev.iter().map(|e| e.m).collect(),
            t_end: catalog.t_end,
            u,
            ln_u,
            dx2,
            dy2,
        }
    }
}

/// Reusable likelihood evaluator for one (catalog, background) pair.
///
/// Building it precomputes the pairwise geometry and the background
/// intensity at the event locations, so repeated objective evaluations
/// (the optimizer hot path) cost one O(n^2) pass each.
pub struct Evaluator<'a> {
    catalog: &'a Catalog,
    geom: Geometry,
    ln_nu: Vec<f64>,
    window: SpatialWindow,
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

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Per-parameter quantities shared by the forward and backward passes.
pub struct ParamContext {
    pub kappa: f64,
    pub inv_beta: f64,
    /// -kappa ln beta - ln Gamma(kappa): the mu(t) normalization.
    pub ln_mu_norm: f64,
    pub table: LnQTable,
    /// Boost k(m_j) per event.
    pub k: Vec<f64>,
    /// ln phi(t_i, x_i, y_i) per event; first entry is -inf.
    pub ln_phi: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_t_end: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(catalog: &'a Catalog, nu: &BackgroundIntensity) -> Result<Evaluator<'a>, LikelihoodError> {
        if catalog.n() == 0 {
            return Err(LikelihoodError::Empty);
        }
        let ln_nu = catalog.events.iter().map(|e| nu.evaluate(e.x, e.y).ln()).collect();
        Ok(Evaluator { catalog, geom: Geometry::new(catalog), ln_nu, window: catalog.window })
    }

    pub fn context(&self, params: &RetasParams) -> Result<ParamContext, LikelihoodError> {
        params.validate()?;
        let g = &self.geom;
        let kappa = params.kappa;
        let beta = params.beta;
        let table = LnQTable::new(kappa, g.t_end / beta * (1.0 + 1e-12) + 1e-12);
        let k: Vec<f64> =
            g.m.iter().map(|m| params.a * (params.alpha * (m - self.catalog.m0)).exp()).collect();

        // Excitation phi_i = C sum_j exp(-p ln1p(u/c) - dx^2/(2 s1) - dy^2/(2 s2)) k_j.
        // Terms more than ~60 nats below scale contribute < 1e-19 after the
        // boost and normalization factors; the spatial part alone bounds the
        // exponent, so most far pairs skip both transcendentals.
        let c_gf = (params.p - 1.0)
            / (params.c * 2.0 * std::f64::consts::PI * (params.sigma1_sq * params.sigma2_sq).sqrt());
        let a1 = 0.5 / params.sigma1_sq;
        let a2 = 0.5 / params.sigma2_sq;
        let inv_c = 1.0 / params.c;
        let ln_k_max = k.iter().fold(f64::MIN_POSITIVE, |m: f64, &v| m.max(v)).ln();
        let cut = -60.0 - ln_k_max.max(0.0);
        let mut phi = vec![0.0; g.n];
        for i in 1..g.n {
            let (ur, xr, yr) = (g.u.row(i - 1), g.dx2.row(i - 1), g.dy2.row(i - 1));
            let mut acc = 0.0;
            for j in 0..i {
                let e_spatial = -a1 * xr[j] - a2 * yr[j];
                if e_spatial <= cut {
                    continue;
                }
                let e = e_spatial - params.p * (ur[j] * inv_c).ln_1p();
                if e > cut {
                    acc += e.exp() * k[j];
                }
            }
            phi[i] = c_gf * acc;
        }
        let ln_phi = phi.iter().map(|p| p.ln()).collect();

        // Compensator Phi(T) = sum_j k_j G(T - t_j) mass_j.
        let mut phi_t_end = 0.0;
        for (j, &tj) in g.t.iter().enumerate() {
            let gg = -f64::exp_m1((1.0 - params.p) * ((g.t_end - tj) * inv_c).ln_1p());
            let mass =
                kernels::spatial_mass((self.catalog.events[j].x, self.catalog.events[j].y), &self.window, params)?;
            phi_t_end += k[j] * gg * mass;
        }

        Ok(ParamContext {
            kappa,
            inv_beta: 1.0 / beta,
            ln_mu_norm: -kappa * beta.ln() - ln_gamma(kappa),
            table,
            k,
            ln_phi,
            phi,
            phi_t_end,
        })
    }

    /// Log-likelihood only: no triangular storage, two row buffers.
    pub fn loglik(&self, params: &RetasParams) -> Result<f64, LikelihoodError> {
        self.pass(params, false).map(|(ll, _)| ll)
    }

    /// Full forward pass retaining the filter state for smoothing.
    pub fn forward_filter(&self, params: &RetasParams) -> Result<FilterState, LikelihoodError> {
        let (_, state) = self.pass(params, true)?;
        Ok(state.expect("state requested"))
    }

    fn pass(
        &self,
        params: &RetasParams,
        store: bool,
    ) -> Result<(f64, Option<FilterState>), LikelihoodError> {
        let ctx = self.context(params)?;
        let g = &self.geom;
        let n = g.n;
        let km1 = ctx.kappa - 1.0;

        let mut log_p_tri = store.then(|| Triangle::zeros(n));
        let mut log_s_tri = store.then(|| Triangle::zeros(n));
        let mut log_d_tri = (store && n >= 2).then(|| Triangle::zeros(n - 1));

        // d_1 = mu(t_1) nu_1 exp(-int_0^{t_1} mu).
        let x1 = g.t[0] * ctx.inv_beta;
        let lq1 = ctx.table.eval(x1);
        let ln_mu_1 = km1 * g.t[0].ln() - x1 + ctx.ln_mu_norm - lq1;
        let mut loglik = ln_mu_1 + self.ln_nu[0] + lq1;
        if !loglik.is_finite() {
            return Err(LikelihoodError::NonFinite { event: 1 });
        }

        // Row i holds ln p_{i,j}; lq_prev[j] = ln Q((t_{i-1} - t_j)/beta).
        let mut log_p: Vec<f64> = vec![0.0];
        let mut lq_prev: Vec<f64> = vec![0.0];
        let mut lw_exc: Vec<f64> = Vec::with_capacity(n);
        let mut lw_main: Vec<f64> = Vec::with_capacity(n);

        for i in 1..n {
            if let Some(tri) = log_p_tri.as_mut() {
                tri.row_mut(i - 1).copy_from_slice(&log_p);
            }
            let (ur, lnur) = (g.u.row(i - 1), g.ln_u.row(i - 1));
            let ln_phi_i = ctx.ln_phi[i];
            let ln_nu_i = self.ln_nu[i];
            lw_exc.clear();
            lw_main.clear();
            let mut max_w = f64::NEG_INFINITY;
            for j in 0..i {
                let u = ur[j];
                let lq_cur = ctx.table.eval(u * ctx.inv_beta);
                let log_s = lq_cur - lq_prev[j];
                let ln_mu = km1 * lnur[j] - u * ctx.inv_beta + ctx.ln_mu_norm - lq_cur;
                let base = log_p[j] + log_s;
                let we = base + ln_phi_i;
                let wm = base + ln_mu + ln_nu_i;
                max_w = max_w.max(we).max(wm);
                lw_exc.push(we);
                lw_main.push(wm);
                if let Some(tri) = log_s_tri.as_mut() {
                    tri.row_mut(i - 1)[j] = log_s;
                }
                if let Some(tri) = log_d_tri.as_mut() {
                    tri.row_mut(i - 1)[j] = log_add_exp(ln_mu + ln_nu_i, ln_phi_i) + log_s;
                }
                lq_prev[j] = lq_cur;
            }
            if !max_w.is_finite() {
                return Err(LikelihoodError::NonFinite { event: i + 1 });
            }
            // Weights 60+ nats under the max are irrelevant to the sums.
            let mut sum_all = 0.0;
            let mut sum_main = 0.0;
            for j in 0..i {
                let de = lw_exc[j] - max_w;
                if de > -60.0 {
                    sum_all += de.exp();
                }
                let dm = lw_main[j] - max_w;
                if dm > -60.0 {
                    let em = dm.exp();
                    sum_all += em;
                    sum_main += em;
                }
            }
            let log_z = max_w + sum_all.ln();
            loglik += log_z;
            if !loglik.is_finite() {
                return Err(LikelihoodError::NonFinite { event: i + 1 });
            }
            log_p.clear();
            log_p.extend(lw_exc.iter().map(|w| w - log_z));
            log_p.push(max_w + sum_main.ln() - log_z);
            lq_prev.push(0.0);
        }

        // Survival of the renewal past T plus the excitation compensator.
        if let Some(tri) = log_p_tri.as_mut() {
            tri.row_mut(n - 1).copy_from_slice(&log_p);
        }
        let mut tail = Vec::with_capacity(n);
        for j in 0..n {
            let log_s = ctx.table.eval((g.t_end - g.t[j]) * ctx.inv_beta) - lq_prev[j];
            if let Some(tri) = log_s_tri.as_mut() {
                tri.row_mut(n - 1)[j] = log_s;
            }
            tail.push(log_p[j] + log_s);
        }
        loglik += log_sum_exp(tail.iter().copied());
        loglik -= ctx.phi_t_end;
        if !loglik.is_finite() {
            return Err(LikelihoodError::NonFinite { event: n });
        }

        let state = store.then(|| FilterState {
            log_p: log_p_tri.expect("stored"),
            log_s: log_s_tri.expect("stored"),
            log_d: log_d_tri.unwrap_or_else(|| Triangle::zeros(0)),
            phi: ctx.phi.clone(),
            phi_t_end: ctx.phi_t_end,
            loglik,
        });
        Ok((loglik, state))
    }

    pub(crate) fn catalog(&self) -> &Catalog {
        self.catalog
    }

    pub(crate) fn ln_nu(&self) -> &[f64] {
        &self.ln_nu
    }

    /// ln mu(t_i - t_j) for 0-based event indices (j < i); backward-pass helper.
    pub(crate) fn ln_mu_cell(&self, ctx: &ParamContext, i: usize, j: usize) -> f64 {
        let u = self.geom.u.row(i - 1)[j];
        let lq = ctx.table.eval(u * ctx.inv_beta);
        (ctx.kappa - 1.0) * self.geom.ln_u.row(i - 1)[j] - u * ctx.inv_beta + ctx.ln_mu_norm - lq
    }

    /// ln k(m_j) g(t_i - t_j) f(offsets) for 0-based indices (j < i);
    /// the boost is the parent's, matching the excitation sum.
    pub(crate) fn ln_gfk_cell(&self, params: &RetasParams, ctx: &ParamContext, i: usize, j: usize) -> f64 {
        let u = self.geom.u.row(i - 1)[j];
        let c_gf = (params.p - 1.0)
            / (params.c * 2.0 * std::f64::consts::PI * (params.sigma1_sq * params.sigma2_sq).sqrt());
        c_gf.ln() - params.p * (u / params.c).ln_1p()
            - 0.5 * self.geom.dx2.row(i - 1)[j] / params.sigma1_sq
            - 0.5 * self.geom.dy2.row(i - 1)[j] / params.sigma2_sq
            + ctx.k[j].ln()
    }
}

/// One-shot forward filter; see [`Evaluator`] for the reusable form.
pub fn forward_filter(
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
) -> Result<FilterState, LikelihoodError> {
    Evaluator::new(catalog, nu)?.forward_filter(params)
}

/// Marginal posterior quantities recovered by exhaustive enumeration of
/// branching vectors; the independent oracle for the recursions.
pub(crate) struct EnumeratedPosterior {
    pub loglik: f64,
    /// q rows i = 2..n (0-based row i-2): P(I(t_i) = j | full catalog).
    pub q: Triangle,
    /// omega_i = P(B_i = 0 | full catalog), omega_1 = 1.
    pub omega: Vec<f64>,
    /// omega_ij rows i = 2..n: P(B_i = 0, I(t_i) = j | full catalog).
    pub omega_ij: Triangle,
    /// pi rows i = 2..n: P(B_i = j | full catalog).
    pub pi: Triangle,
}

pub(crate) fn enumerate_posterior(
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
    window: &SpatialWindow,
) -> Result<EnumeratedPosterior, LikelihoodError> {
    params.validate()?;
    let n = catalog.n();
    if n == 0 {
        return Err(LikelihoodError::Empty);
    }
    let ev = &catalog.events;
    let kappa = params.kappa;
    let beta = params.beta;
    let ln_gamma_pdf = |dt: f64| -> f64 {
        (kappa - 1.0) * dt.ln() - dt / beta - ln_gamma(kappa) - kappa * beta.ln()
    };
    let ln_surv = |dt: f64| -> f64 { special::ln_reg_upper_q(kappa, dt / beta).expect("dt >= 0") };
    let ln_nu: Vec<f64> = ev.iter().map(|e| nu.evaluate(e.x, e.y).ln()).collect();
    let mut ln_gfk = Triangle::zeros(n.saturating_sub(1));
    for i in 1..n {
        for j in 0..i {
            ln_gfk.row_mut(i - 1)[j] = kernels::omori_density(ev[i].t - ev[j].t, params)?.ln()
                + kernels::spatial_density(ev[i].x - ev[j].x, ev[i].y - ev[j].y, params)?.ln()
                + kernels::boost(ev[j].m, params, catalog.m0)?.ln();
        }
    }
    let phi_t_end = excitation_compensator(catalog.t_end, catalog, params, window)?;

    // Mixed-radix sweep over b_2..b_n with b_i in 0..=i-1 (1-based parents).
    let mut b = vec![0usize; n];
    let mut weights: Vec<f64> = Vec::new();
    let mut vectors: Vec<Vec<usize>> = Vec::new();
    loop {
        let mut w = 0.0;
        let mut prev_main = 0.0;
        for i in 0..n {
            if b[i] == 0 {
                w += ln_gamma_pdf(ev[i].t - prev_main) + ln_nu[i];
                prev_main = ev[i].t;
            } else {
                w += ln_gfk.row(i - 1)[b[i] - 1];
            }
        }
        w += ln_surv(catalog.t_end - prev_main);
        weights.push(w);
        vectors.push(b.clone());

        // Next vector.
        let mut pos = n - 1;
        loop {
            if pos == 0 {
                break;
            }
            if b[pos] < pos {
                b[pos] += 1;
                break;
            }
            b[pos] = 0;
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
    }

    let loglik = log_sum_exp(weights.iter().copied()) - phi_t_end;
    let max_w = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let probs: Vec<f64> = weights.iter().map(|w| (w - max_w).exp()).collect();
    let total: f64 = probs.iter().sum();

    let mut q = Triangle::zeros(n.saturating_sub(1));
    let mut pi = Triangle::zeros(n.saturating_sub(1));
    let mut omega_ij = Triangle::zeros(n.saturating_sub(1));
    let mut omega = vec![0.0; n];
    for (vec_b, p_raw) in vectors.iter().zip(&probs) {
        let p = p_raw / total;
        let mut last_main = 0usize;
        for i in 0..n {
            if i >= 1 {
                q.row_mut(i - 1)[last_main] += p;
                if vec_b[i] == 0 {
                    omega[i] += p;
                    omega_ij.row_mut(i - 1)[last_main] += p;
                } else {
                    pi.row_mut(i - 1)[vec_b[i] - 1] += p;
                }
            }
            if vec_b[i] == 0 {
                last_main = i;
            }
        }
    }
    omega[0] = 1.0;
    Ok(EnumeratedPosterior { loglik, q, omega, omega_ij, pi })
}

/// Exact log-likelihood by enumeration over all branching vectors;
/// refused above n = 10.
pub fn brute_force_loglik(
    catalog: &Catalog,
    params: &RetasParams,
    nu: &BackgroundIntensity,
    window: &SpatialWindow,
) -> Result<f64, LikelihoodError> {
    const MAX_N: usize = 10;
    if catalog.n() > MAX_N {
        return Err(LikelihoodError::TooLarge { n: catalog.n(), max: MAX_N });
    }
    Ok(enumerate_posterior(catalog, params, nu, window)?.loglik)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::test_catalog;

    fn params() -> RetasParams {
        RetasParams {
            kappa: 0.8,
            beta: 1.25,
            p: 1.2,
            c: 0.01,
            sigma1_sq: 0.01,
            sigma2_sq: 0.02,
            a: 0.5,
            alpha: 1.0,
        }
    }

    fn toy_catalog(n: usize, seed: u64, t_end: f64) -> Catalog {
        use rand::Rng;
        let mut rng = crate::simulator::replicate_rng(seed, 0);
        let mut times: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * t_end * 0.9 + 0.01).collect();
        times.sort_by(f64::total_cmp);
        let rows: Vec<(f64, f64, f64, f64)> = times
            .iter()
            .map(|&t| {
                (
                    t,
                    rng.gen::<f64>() * 0.4 - 0.2,
                    rng.gen::<f64>() * 0.4 - 0.2,
                    5.0 + rng.gen::<f64>(),
                )
            })
            .collect();
        test_catalog(&rows, t_end, 5.0)
    }

    #[test]
    fn excitation_empty_and_single() {
        let cat = test_catalog(&[(1.0, 0.0, 0.0, 5.0)], 2.0, 5.0);
        let pr = params();
        assert_eq!(excitation(0.5, 0.0, 0.0, &cat, &pr).unwrap(), 0.0);
        // Events at exactly t contribute nothing (strict past).
        assert_eq!(excitation(1.0, 0.0, 0.0, &cat, &pr).unwrap(), 0.0);
        let got = excitation(1.01, 0.0, 0.0, &cat, &pr).unwrap();
        let want = kernels::omori_density(0.01, &pr).unwrap()
            * kernels::spatial_density(0.0, 0.0, &pr).unwrap()
            * kernels::boost(5.0, &pr, 5.0).unwrap();
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn excitation_matches_term_by_term_sum() {
        let cat = toy_catalog(5, 42, 10.0);
        let pr = params();
        let (t, x, y) = (9.7, 0.05, -0.03);
        let mut manual = 0.0;
        for e in &cat.events {
            if e.t < t {
                let g = (pr.p - 1.0) / pr.c * (1.0 + (t - e.t) / pr.c).powf(-pr.p);
                let f = (-0.5 * (x - e.x).powi(2) / pr.sigma1_sq
                    - 0.5 * (y - e.y).powi(2) / pr.sigma2_sq)
                    .exp()
                    / (2.0 * std::f64::consts::PI * (pr.sigma1_sq * pr.sigma2_sq).sqrt());
                let k = pr.a * (pr.alpha * (e.m - 5.0)).exp();
                manual += g * f * k;
            }
        }
        let got = excitation(t, x, y, &cat, &pr).unwrap();
        assert!((got - manual).abs() <= 1e-12 * manual);
    }

    #[test]
    fn compensator_zero_before_first_event_and_whole_plane_form() {
        let cat = toy_catalog(4, 7, 10.0);
        let pr = params();
        assert_eq!(
            excitation_compensator(cat.events[0].t, &cat, &pr, &SpatialWindow::WholePlane).unwrap(),
            0.0
        );
        let t = 8.0;
        let manual: f64 = cat
            .events
            .iter()
            .filter(|e| e.t < t)
            .map(|e| {
                kernels::boost(e.m, &pr, 5.0).unwrap() * kernels::omori_cdf(t - e.t, &pr).unwrap()
            })
            .sum();
        let got = excitation_compensator(t, &cat, &pr, &SpatialWindow::WholePlane).unwrap();
        assert!((got - manual).abs() < 1e-12 * manual.max(1.0));
    }

    #[test]
    fn compensator_matches_quadrature_on_rectangle() {
        // Time quadrature of g and 2-d space quadrature of f, composed per
        // event, against the closed-form G x mass product.
        let rows = [
            (0.5, 0.02, -0.03, 5.2),
            (1.0, -0.05, 0.01, 5.7),
            (2.2, 0.0, 0.0, 5.1),
            (3.1, 0.08, 0.04, 6.0),
            (4.0, -0.02, -0.06, 5.4),
            (5.5, 0.01, 0.02, 5.3),
        ];
        let mut cat = test_catalog(&rows, 7.0, 5.0);
        cat.window = SpatialWindow::Rectangle { x_min: -0.2, x_max: 0.2, y_min: -0.2, y_max: 0.2 };
        let pr = params();
        let t = 6.5;

        fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, steps: usize) -> f64 {
            // Composite Simpson on a fixed fine grid.
            let h = (b - a) / steps as f64;
            let mut acc = f(a) + f(b);
            for s in 1..steps {
                let w = if s % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(a + s as f64 * h);
            }
            acc * h / 3.0
        }

        let mut oracle = 0.0;
        for e in &cat.events {
            if e.t >= t {
                continue;
            }
            let k = kernels::boost(e.m, &pr, 5.0).unwrap();
            let tq = integrate(|s| kernels::omori_density(s, &pr).unwrap(), 1e-9, t - e.t, 20000);
            let sq = integrate(
                |x| {
                    integrate(
                        |y| kernels::spatial_density(x - e.x, y - e.y, &pr).unwrap(),
                        -0.2,
                        0.2,
                        400,
                    )
                },
                -0.2,
                0.2,
                400,
            );
            oracle += k * tq * sq;
        }
        let got = excitation_compensator(t, &cat, &pr, &cat.window.clone()).unwrap();
        assert!((got - oracle).abs() < 1e-6 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn single_event_loglik_closed_form() {
        let cat = test_catalog(&[(1.5, 0.1, -0.2, 5.5)], 4.0, 5.0);
        let pr = params();
        let nu = BackgroundIntensity::BivariateNormal {
            mean_x: 0.0,
            mean_y: 0.0,
            var_x: 0.05,
            var_y: 0.1,
        };
        let state = forward_filter(&cat, &pr, &nu).unwrap();

        let nu1 = nu.evaluate(0.1, -0.2);
        let d1 = kernels::renewal_hazard(1.5, &pr).unwrap()
            * nu1
            * (-kernels::renewal_hazard_integral(0.0, 1.5, &pr).unwrap()).exp();
        let s21 = (-kernels::renewal_hazard_integral(1.5 - 1.5, 4.0 - 1.5, &pr).unwrap()).exp();
        let phi_t = kernels::boost(5.5, &pr, 5.0).unwrap() * kernels::omori_cdf(2.5, &pr).unwrap();
        let want = d1.ln() + s21.ln() - phi_t;
        assert!((state.loglik - want).abs() < 1e-10, "{} vs {want}", state.loglik);
        assert_eq!(state.p(2, 1), 1.0);
    }

    #[test]
    fn brute_force_two_events_hand_check() {
        let cat = test_catalog(&[(1.0, 0.0, 0.0, 5.5), (1.4, 0.05, -0.02, 5.2)], 3.0, 5.0);
        let pr = params();
        let nu = BackgroundIntensity::Constant(0.7);
        let window = SpatialWindow::WholePlane;

        let lgpdf = |dt: f64| {
            (pr.kappa - 1.0) * dt.ln() - dt / pr.beta
                - ln_gamma(pr.kappa)
                - pr.kappa * pr.beta.ln()
        };
        let surv = |dt: f64| special::reg_upper_q(pr.kappa, dt / pr.beta).unwrap();
        // B_2 = 0: both main-shocks.
        let w0 = (lgpdf(1.0) + 0.7f64.ln()) + (lgpdf(0.4) + 0.7f64.ln()) + surv(1.6).ln();
        // B_2 = 1: second triggered by first.
        let w1 = (lgpdf(1.0) + 0.7f64.ln())
            + (kernels::omori_density(0.4, &pr).unwrap()
                * kernels::spatial_density(0.05, -0.02, &pr).unwrap()
                * kernels::boost(5.5, &pr, 5.0).unwrap())
            .ln()
            + surv(2.0).ln();
        let phi_t = excitation_compensator(3.0, &cat, &pr, &window).unwrap();
        let want = log_add_exp(w0, w1) - phi_t;
        let got = brute_force_loglik(&cat, &pr, &nu, &window).unwrap();
        assert!((got - want).abs() < 1e-12 * want.abs(), "{got} vs {want}");
    }

    /// Independent constant-background ETAS log-likelihood (kappa = 1).
    fn etas_loglik(cat: &Catalog, pr: &RetasParams, nu: &BackgroundIntensity) -> f64 {
        let mu0 = 1.0 / pr.beta;
        let mut ll = 0.0;
        for (i, e) in cat.events.iter().enumerate() {
            let mut phi = 0.0;
            for prior in &cat.events[..i] {
                phi += kernels::omori_density(e.t - prior.t, pr).unwrap()
                    * kernels::spatial_density(e.x - prior.x, e.y - prior.y, pr).unwrap()
                    * kernels::boost(prior.m, pr, cat.m0).unwrap();
            }
            ll += (mu0 * nu.evaluate(e.x, e.y) + phi).ln();
        }
        ll -= mu0 * cat.t_end;
        ll -= excitation_compensator(cat.t_end, cat, pr, &SpatialWindow::WholePlane).unwrap();
        ll
    }

    #[test]
    fn exponential_renewal_reduces_to_etas() {
        let cat = toy_catalog(24, 3, 12.0);
        let mut pr = params();
        pr.kappa = 1.0;
        let nu = BackgroundIntensity::Constant(1.3);
        let state = forward_filter(&cat, &pr, &nu).unwrap();
        let want = etas_loglik(&cat, &pr, &nu);
        assert!(
            (state.loglik - want).abs() < 1e-10 * want.abs(),
            "{} vs {want}",
            state.loglik
        );
    }

    #[test]
    fn brute_force_exponential_case_matches_etas_formula() {
        let cat = toy_catalog(5, 11, 6.0);
        let mut pr = params();
        pr.kappa = 1.0;
        let nu = BackgroundIntensity::Constant(0.9);
        let got = brute_force_loglik(&cat, &pr, &nu, &SpatialWindow::WholePlane).unwrap();
        let want = etas_loglik(&cat, &pr, &nu);
        assert!((got - want).abs() < 1e-10 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn forward_filter_matches_enumeration_oracle() {
        let nu = BackgroundIntensity::BivariateNormal {
            mean_x: 0.0,
            mean_y: 0.0,
            var_x: 0.05,
            var_y: 0.1,
        };
        for (seed, n, kappa) in [(1u64, 8usize, 0.2f64), (2, 6, 1.0), (3, 8, 5.0), (4, 2, 0.8)] {
            let cat = toy_catalog(n, seed, 8.0);
            let mut pr = params();
            pr.kappa = kappa;
            pr.beta = 1.0 / kappa;
            let ff = forward_filter(&cat, &pr, &nu).unwrap();
            let bf = brute_force_loglik(&cat, &pr, &nu, &SpatialWindow::WholePlane).unwrap();
            let rel = (ff.loglik - bf).abs() / bf.abs();
            assert!(rel < 1e-8, "seed={seed}: forward {} vs brute {bf}", ff.loglik);
        }
    }

    #[test]
    fn filtered_rows_are_stochastic() {
        let cat = toy_catalog(40, 9, 15.0);
        let pr = params();
        let nu = BackgroundIntensity::Constant(1.0);
        let state = forward_filter(&cat, &pr, &nu).unwrap();
        for r in 0..state.log_p.rows() {
            let row = state.log_p.row(r);
            let sum: f64 = row.iter().map(|lp| lp.exp()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {r}: sum {sum}");
            assert!(row.iter().all(|lp| *lp <= 1e-12));
        }
    }

    #[test]
    fn brute_force_size_cap() {
        let cat = toy_catalog(11, 5, 12.0);
        let err = brute_force_loglik(&cat, &params(), &BackgroundIntensity::Constant(1.0), &SpatialWindow::WholePlane);
        assert!(matches!(err, Err(LikelihoodError::TooLarge { n: 11, max: 10 })));
    }

    #[test]
    fn rectangle_window_agrees_with_oracle() {
        let mut cat = toy_catalog(7, 21, 9.0);
        cat.window = SpatialWindow::Rectangle { x_min: -0.5, x_max: 0.5, y_min: -0.5, y_max: 0.5 };
        let pr = params();
        let nu = BackgroundIntensity::Constant(1.0);
        let ff = forward_filter(&cat, &pr, &nu).unwrap();
        let bf = brute_force_loglik(&cat, &pr, &nu, &cat.window.clone()).unwrap();
        assert!((ff.loglik - bf).abs() / bf.abs() < 1e-8);
    }
}
