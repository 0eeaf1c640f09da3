//! Parametric model components: the gamma renewal hazard for main-shock
//! waiting times, the modified Omori temporal response, the bivariate
//! normal spatial response, the exponential magnitude boost, and the
//! shifted-exponential magnitude law.
//!
//! ```text
//! mu(t)  = t^(kappa-1) e^(-t/beta) / (Gamma(t/beta, kappa) beta^kappa)
//! g(t)   = ((p-1)/c) (1 + t/c)^(-p)
//! f(x,y) = exp(-x^2/(2 s1) - y^2/(2 s2)) / (2 pi sqrt(s1 s2))
//! k(m)   = A e^(alpha (m - m0))
//! J(m)   = gamma e^(-gamma (m - m0))
//! ```
//!
//! All evaluations are pure; the likelihood hot paths use the log-scale
//! forms to avoid underflow.

use crate::catalog::{Catalog, SpatialWindow};
use crate::special::{self, ln_gamma, normal_cdf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

/// The eight intensity parameters of the RETAS model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetasParams {
    /// Shape of the gamma renewal law (> 0).
    pub kappa: f64,
    /// Scale of the gamma renewal law in days (> 0).
    pub beta: f64,
    /// Omori shape (> 1).
    pub p: f64,
    /// Omori scale in days (> 0).
    pub c: f64,
    /// Spatial variance in the x direction (> 0).
    pub sigma1_sq: f64,
    /// Spatial variance in the y direction (> 0).
    pub sigma2_sq: f64,
    /// Boost scale: expected offspring of a threshold-magnitude event (> 0).
    pub a: f64,
    /// Magnitude sensitivity of the boost.
    pub alpha: f64,
}

impl RetasParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let checks = [
            (self.kappa > 0.0, "kappa must be > 0"),
            (self.beta > 0.0, "beta must be > 0"),
            (self.p > 1.0, "p must be > 1"),
            (self.c > 0.0, "c must be > 0"),
            (self.sigma1_sq > 0.0, "sigma1_sq must be > 0"),
            (self.sigma2_sq > 0.0, "sigma2_sq must be > 0"),
            (self.a > 0.0, "A must be > 0"),
            (self.alpha.is_finite(), "alpha must be finite"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(KernelError::Domain(msg.to_string()));
            }
        }
        Ok(())
    }
}

/// Parameters of the shifted-exponential magnitude law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeParams {
    /// Rate of the shifted exponential (> 0).
    pub gamma: f64,
    /// Threshold magnitude.
    pub m0: f64,
}

pub use crate::special::{ln_upper_incomplete_gamma, upper_incomplete_gamma};

/// Gamma renewal hazard mu(t) for t > 0.
pub fn renewal_hazard(t: f64, params: &RetasParams) -> Result<f64, KernelError> {
    if t <= 0.0 {
        return Err(KernelError::Domain(format!("hazard needs t > 0, got {t}")));
    }
    Ok(ln_renewal_hazard(t, params.kappa, params.beta).exp())
}

/// ln mu(t); shared by the recursions, which work in log space.
pub(crate) fn ln_renewal_hazard(t: f64, kappa: f64, beta: f64) -> f64 {
    let x = t / beta;
    let ln_q = special::ln_reg_upper_q(kappa, x).expect("hazard argument in domain");
    (kappa - 1.0) * t.ln() - x - kappa * beta.ln() - ln_gamma(kappa) - ln_q
}

/// Cumulative renewal hazard int_a^b mu(s) ds via the survival identity
/// int_0^t mu = -ln Q(kappa, t/beta).
pub fn renewal_hazard_integral(a: f64, b: f64, params: &RetasParams) -> Result<f64, KernelError> {
    if a < 0.0 || a > b {
        return Err(KernelError::Domain(format!(
            "hazard integral needs 0 <= a <= b, got [{a}, {b}]"
        )));
    }
    let lq_a = special::ln_reg_upper_q(params.kappa, a / params.beta)
        .map_err(|e| KernelError::Domain(e.to_string()))?;
    let lq_b = special::ln_reg_upper_q(params.kappa, b / params.beta)
        .map_err(|e| KernelError::Domain(e.to_string()))?;
    Ok(lq_a - lq_b)
}

/// Modified Omori density g(t) for t > 0.
pub fn omori_density(t: f64, params: &RetasParams) -> Result<f64, KernelError> {
    check_omori(params)?;
    if t <= 0.0 {
        return Err(KernelError::Domain(format!("omori density needs t > 0, got {t}")));
    }
    Ok((params.p - 1.0) / params.c * (1.0 + t / params.c).powf(-params.p))
}

/// Omori CDF G(t) = 1 - (1 + t/c)^(1-p) for t >= 0.
pub fn omori_cdf(t: f64, params: &RetasParams) -> Result<f64, KernelError> {
    check_omori(params)?;
    if t < 0.0 {
        return Err(KernelError::Domain(format!("omori cdf needs t >= 0, got {t}")));
    }
    Ok(-f64::exp_m1((1.0 - params.p) * (t / params.c).ln_1p()))
}

fn check_omori(params: &RetasParams) -> Result<(), KernelError> {
    if params.p <= 1.0 || params.c <= 0.0 {
        return Err(KernelError::Domain(format!(
            "omori needs p > 1 and c > 0, got p={}, c={}",
            params.p, params.c
        )));
    }
    Ok(())
}

/// Bivariate normal spatial response with independent marginals.
pub fn spatial_density(dx: f64, dy: f64, params: &RetasParams) -> Result<f64, KernelError> {
    let (s1, s2) = (params.sigma1_sq, params.sigma2_sq);
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(KernelError::Domain("spatial variances must be > 0".into()));
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * (s1 * s2).sqrt());
    Ok(norm * (-0.5 * dx * dx / s1 - 0.5 * dy * dy / s2).exp())
}

/// Probability mass of the spatial response centred at `center` inside the
/// window: exactly 1 on the whole plane, a product of normal CDF
/// differences on a rectangle.
pub fn spatial_mass(
    center: (f64, f64),
    window: &SpatialWindow,
    params: &RetasParams,
) -> Result<f64, KernelError> {
    let (s1, s2) = (params.sigma1_sq, params.sigma2_sq);
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(KernelError::Domain("spatial variances must be > 0".into()));
    }
    match window {
        SpatialWindow::WholePlane => Ok(1.0),
        SpatialWindow::Rectangle { x_min, x_max, y_min, y_max } => {
            let sd1 = s1.sqrt();
            let sd2 = s2.sqrt();
            let px = normal_cdf((x_max - center.0) / sd1) - normal_cdf((x_min - center.0) / sd1);
            let py = normal_cdf((y_max - center.1) / sd2) - normal_cdf((y_min - center.1) / sd2);
            Ok(px * py)
        }
    }
}

/// Magnitude boost k(m) = A e^(alpha (m - m0)) for m >= m0.
pub fn boost(m: f64, params: &RetasParams, m0: f64) -> Result<f64, KernelError> {
    if m < m0 {
        return Err(KernelError::Domain(format!("boost needs m >= m0 = {m0}, got {m}")));
    }
    Ok(params.a * (params.alpha * (m - m0)).exp())
}

/// Shifted-exponential magnitude density J(m) for m >= m0.
pub fn magnitude_density(m: f64, mag: &MagnitudeParams) -> Result<f64, KernelError> {
    if mag.gamma <= 0.0 {
        return Err(KernelError::Domain("gamma must be > 0".into()));
    }
    if m < mag.m0 {
        return Err(KernelError::Domain(format!("magnitude below threshold: {m} < {}", mag.m0)));
    }
    Ok(mag.gamma * (-mag.gamma * (m - mag.m0)).exp())
}

/// Magnitude log-likelihood sum_i ln J(m_i).
pub fn magnitude_loglik(catalog: &Catalog, mag: &MagnitudeParams) -> Result<f64, KernelError> {
    if catalog.events.is_empty() {
        return Err(KernelError::Degenerate("empty catalog".into()));
    }
    let n = catalog.events.len() as f64;
    let excess: f64 = catalog.events.iter().map(|e| e.m - mag.m0).sum();
    Ok(n * mag.gamma.ln() - mag.gamma * excess)
}

/// Closed-form MLE for the shifted-exponential magnitude rate:
/// gamma_hat = n / sum_i (m_i - m0).
pub fn magnitude_mle(catalog: &Catalog) -> Result<MagnitudeParams, KernelError> {
    if catalog.events.is_empty() {
        return Err(KernelError::Degenerate("empty catalog".into()));
    }
    let n = catalog.events.len() as f64;
    let excess: f64 = catalog.events.iter().map(|e| e.m - catalog.m0).sum();
    if excess <= 0.0 {
        return Err(KernelError::Degenerate(
            "all magnitudes at threshold: magnitude MLE diverges".into(),
        ));
    }
    Ok(MagnitudeParams { gamma: n / excess, m0: catalog.m0 })
}

/// Mean offspring per event under the magnitude law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Productivity {
    /// A gamma / (gamma - alpha); +inf when gamma <= alpha.
    pub value: f64,
    /// True when the branching process is not subcritical (value >= 1).
    pub supercritical: bool,
}

/// Productivity A gamma / (gamma - alpha) of the boost under J(m).
pub fn productivity(params: &RetasParams, gamma: f64) -> Productivity {
    if gamma <= params.alpha {
        return Productivity { value: f64::INFINITY, supercritical: true };
    }
    let value = params.a * gamma / (gamma - params.alpha);
    Productivity { value, supercritical: value >= 1.0 }
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

    fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                left + right + delta / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
                    + rec(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        rec(&f, a, b, f(a), f(m), f(b), tol, 60)
    }

    #[test]
    fn hazard_exponential_case_is_constant() {
        let mut pr = params();
        pr.kappa = 1.0;
        for t in [0.01, 1.0, 10.0, 300.0] {
            let mu = renewal_hazard(t, &pr).unwrap();
            assert!((mu - 1.0 / pr.beta).abs() < 1e-12 / pr.beta, "t={t}: {mu}");
        }
    }

    #[test]
    fn hazard_matches_density_over_survival_quadrature() {
        let pr = params();
        let t = 1.0;
        let (k, b) = (pr.kappa, pr.beta);
        let pdf = |s: f64| s.powf(k - 1.0) * (-s / b).exp() / (ln_gamma(k).exp() * b.powf(k));
        let density = pdf(t);
        let survival = integrate(pdf, t, t + 200.0 * b, 1e-15);
        let oracle = density / survival;
        let got = renewal_hazard(t, &pr).unwrap();
        assert!((got - oracle).abs() < 1e-10 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn hazard_vanishes_at_origin_for_shape_above_one() {
        let mut pr = params();
        pr.kappa = 2.0;
        pr.beta = 1.0;
        assert!(renewal_hazard(1e-12, &pr).unwrap() < 1e-10);
        assert!(renewal_hazard(0.0, &pr).is_err());
    }

    #[test]
    fn hazard_integral_exponential_and_empty_cases() {
        let mut pr = params();
        pr.kappa = 1.0;
        let got = renewal_hazard_integral(2.0, 5.0, &pr).unwrap();
        assert!((got - 3.0 / pr.beta).abs() < 1e-12);
        assert_eq!(renewal_hazard_integral(3.0, 3.0, &params()).unwrap(), 0.0);
        assert!(renewal_hazard_integral(2.0, 1.0, &params()).is_err());
    }

    #[test]
    fn hazard_integral_matches_quadrature() {
        let pr = params();
        let oracle = integrate(|s| renewal_hazard(s, &pr).unwrap(), 0.5, 2.0, 1e-14);
        let got = renewal_hazard_integral(0.5, 2.0, &pr).unwrap();
        assert!((got - oracle).abs() < 1e-10 * oracle.max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn hazard_integral_nondecreasing_and_matches_survival() {
        let pr = params();
        let mut prev = 0.0;
        for i in 1..=40 {
            let t = 0.25 * i as f64;
            let cum = renewal_hazard_integral(0.0, t, &pr).unwrap();
            assert!(cum >= prev);
            prev = cum;
            let survival = special::reg_upper_q(pr.kappa, t / pr.beta).unwrap();
            assert!(((-cum).exp() - survival).abs() < 1e-10 * survival.max(1e-12));
        }
    }

    #[test]
    fn omori_basics() {
        let pr = params();
        assert_eq!(omori_cdf(0.0, &pr).unwrap(), 0.0);
        // Proper density: the survivor (1 + t/c)^(1-p) drops below 1e-8
        // once t/c > 10^(8/(p-1)).
        let far = pr.c * 10f64.powf(8.0 / (pr.p - 1.0)) * 10.0;
        assert!(omori_cdf(far, &pr).unwrap() > 1.0 - 1e-8);
        let direct = (0.2 / 0.01) * 2f64.powf(-1.2);
        assert!((omori_density(0.01, &pr).unwrap() - direct).abs() < 1e-12 * direct);
        let mut bad = pr;
        bad.p = 1.0;
        assert!(omori_density(1.0, &bad).is_err());
    }

    #[test]
    fn omori_density_integrates_to_cdf() {
        // Quadrature of the density formula over [0, t] against the
        // closed-form CDF.
        for (p, c, t) in [(1.2f64, 0.01f64, 0.5f64), (2.5, 0.3, 4.0), (1.05, 1.0, 10.0)] {
            let pr = RetasParams { p, c, ..params() };
            let quad = integrate(|s| (p - 1.0) / c * (1.0 + s / c).powf(-p), 0.0, t, 1e-14);
            let cdf = omori_cdf(t, &pr).unwrap();
            assert!((quad - cdf).abs() < 1e-10, "p={p}, c={c}, t={t}: {quad} vs {cdf}");
        }
    }

    #[test]
    fn spatial_mass_whole_plane_and_far_window() {
        let pr = params();
        assert_eq!(spatial_mass((3.0, -7.0), &SpatialWindow::WholePlane, &pr).unwrap(), 1.0);
        let sd1 = pr.sigma1_sq.sqrt();
        let sd2 = pr.sigma2_sq.sqrt();
        let window = SpatialWindow::Rectangle {
            x_min: -10.0 * sd1,
            x_max: 10.0 * sd1,
            y_min: -10.0 * sd2,
            y_max: 10.0 * sd2,
        };
        let mass = spatial_mass((0.0, 0.0), &window, &pr).unwrap();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spatial_mass_matches_2d_quadrature() {
        let pr = RetasParams { sigma1_sq: 0.01, sigma2_sq: 0.02, ..params() };
        let window =
            SpatialWindow::Rectangle { x_min: -0.1, x_max: 0.1, y_min: -0.1, y_max: 0.1 };
        let inner = |x: f64| {
            integrate(|y| spatial_density(x, y, &pr).unwrap(), -0.1, 0.1, 1e-13)
        };
        let oracle = integrate(inner, -0.1, 0.1, 1e-12);
        let got = spatial_mass((0.0, 0.0), &window, &pr).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn boost_values() {
        let pr = RetasParams { a: 0.264, alpha: 1.506, ..params() };
        assert!((boost(5.0, &pr, 5.0).unwrap() - 0.264).abs() < 1e-15);
        assert!((boost(6.0, &pr, 5.0).unwrap() - 1.19).abs() < 0.005);
        assert!((boost(7.0, &pr, 5.0).unwrap() - 5.35).abs() < 0.02);
        let flat = RetasParams { alpha: 0.0, ..pr };
        assert_eq!(boost(8.3, &flat, 5.0).unwrap(), flat.a);
        assert!(boost(4.9, &pr, 5.0).is_err());
    }

    #[test]
    fn magnitude_mle_closed_form_and_degenerate() {
        let cat = test_catalog(&[(1.0, 0.0, 0.0, 5.4), (2.0, 0.0, 0.0, 5.1), (3.0, 0.0, 0.0, 5.5)], 10.0, 5.0);
        let mle = magnitude_mle(&cat).unwrap();
        assert!((mle.gamma - 3.0 / 1.0).abs() < 1e-12);
        let ll = magnitude_loglik(&cat, &mle).unwrap();
        assert!((ll - (3.0 * mle.gamma.ln() - 3.0)).abs() < 1e-12);

        let flat = test_catalog(&[(1.0, 0.0, 0.0, 5.0), (2.0, 0.0, 0.0, 5.0)], 10.0, 5.0);
        assert!(magnitude_mle(&flat).is_err());
    }

    #[test]
    fn magnitude_mle_monte_carlo_consistency() {
        // n = 1e5 draws from gamma = 5: the rate MLE lands within 0.05.
        use rand::Rng;
        let mut rng = crate::simulator::replicate_rng(99, 0);
        let n = 100_000;
        let events: Vec<(f64, f64, f64, f64)> = (0..n)
            .map(|i| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (i as f64 + 1.0, 0.0, 0.0, 5.0 - u.ln() / 5.0)
            })
            .collect();
        let cat = test_catalog(&events, n as f64 + 1.0, 5.0);
        let mle = magnitude_mle(&cat).unwrap();
        assert!((mle.gamma - 5.0).abs() < 0.05, "gamma_hat = {}", mle.gamma);
    }

    #[test]
    fn productivity_values() {
        let pr = RetasParams { a: 0.5, alpha: 1.0, ..params() };
        let prod = productivity(&pr, 5.0);
        assert!((prod.value - 0.625).abs() < 1e-12);
        assert!(!prod.supercritical);

        let flat = RetasParams { alpha: 0.0, a: 0.37, ..pr };
        assert_eq!(productivity(&flat, 5.0).value, 0.37);

        // Fitted NZ-style triple: with the magnitude rate at 1/0.336 the
        // supercritical row reproduces 1.075.
        let nz = RetasParams { a: 0.563, alpha: 1.417, ..pr };
        let prod = productivity(&nz, 1.0 / 0.336);
        assert!((prod.value - 1.075).abs() < 0.005, "{}", prod.value);
        assert!(prod.supercritical);

        let diverging = productivity(&pr, 0.5);
        assert!(diverging.value.is_infinite() && diverging.supercritical);
    }

    #[test]
    fn params_validation() {
        assert!(params().validate().is_ok());
        let mut bad = params();
        bad.sigma2_sq = 0.0;
        assert!(bad.validate().is_err());
    }
}
