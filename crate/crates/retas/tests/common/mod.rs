//! Shared fixtures for the integration suites: random catalog generation
//! and an independently coded constant-background ETAS log-likelihood.
// Each integration target compiles its own copy; not every target uses
// every helper.
#![allow(dead_code)]

use rand::Rng;
use retas::catalog::{Catalog, Event, SpatialWindow};
use retas::kernels::{self, RetasParams};
use retas::likelihood::BackgroundIntensity;
use retas::simulator::replicate_rng;

pub fn study_params() -> RetasParams {
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

/// Random catalog of n events on [0, t_end] with locations in the given
/// half-width box around the origin and magnitudes m0 + Exp(2).
pub fn random_catalog(n: usize, seed: u64, t_end: f64, half_width: f64, window: SpatialWindow) -> Catalog {
    let mut rng = replicate_rng(seed, 1_000_000);
    let mut times: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * t_end * 0.92 + 0.02).collect();
    times.sort_by(f64::total_cmp);
    for i in 1..times.len() {
        if times[i] <= times[i - 1] {
            times[i] = times[i - 1] + 1e-9;
        }
    }
    let events = times
        .into_iter()
        .map(|t| Event {
            t,
            x: (rng.gen::<f64>() - 0.5) * 2.0 * half_width,
            y: (rng.gen::<f64>() - 0.5) * 2.0 * half_width,
            m: 5.0 - (rng.gen_range(f64::MIN_POSITIVE..1.0f64)).ln() / 2.0,
        })
        .collect();
    Catalog::new(events, t_end, 5.0, window).expect("valid random catalog")
}

/// Constant-background spatiotemporal ETAS log-likelihood, written from
/// the closed form (mu_0 = 1/beta): the independent route for the
/// kappa = 1 reduction checks.
pub fn etas_direct_loglik(catalog: &Catalog, params: &RetasParams, nu: &BackgroundIntensity) -> f64 {
    assert_eq!(params.kappa, 1.0, "direct form is the kappa = 1 model");
    let mu0 = 1.0 / params.beta;
    let mut ll = 0.0;
    for (i, e) in catalog.events.iter().enumerate() {
        let mut phi = 0.0;
        for prior in &catalog.events[..i] {
            phi += kernels::omori_density(e.t - prior.t, params).unwrap()
                * kernels::spatial_density(e.x - prior.x, e.y - prior.y, params).unwrap()
                * kernels::boost(prior.m, params, catalog.m0).unwrap();
        }
        ll += (mu0 * nu.evaluate(e.x, e.y) + phi).ln();
    }
    ll -= mu0 * catalog.t_end;
    for e in &catalog.events {
        ll -= kernels::boost(e.m, params, catalog.m0).unwrap()
            * kernels::omori_cdf(catalog.t_end - e.t, params).unwrap()
            * kernels::spatial_mass((e.x, e.y), &catalog.window, params).unwrap();
    }
    ll
}
