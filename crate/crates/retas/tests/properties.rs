//! Property tests for the spec-level invariants that hold for arbitrary
//! inputs, not just the curated fixtures.

mod common;

use common::random_catalog;
use proptest::prelude::*;
use retas::catalog::{load_catalog_str, LoadOptions, SpatialWindow};
use retas::evaluation::roc_auc;
use retas::kde::{BandwidthMatrix, WeightedKde};
use retas::kernels::{renewal_hazard_integral, spatial_mass, RetasParams};
use retas::likelihood::{forward_filter, BackgroundIntensity};
use retas::smoother;

fn arb_params() -> impl Strategy<Value = RetasParams> {
    (
        0.15f64..6.0,
        0.2f64..4.0,
        1.05f64..2.5,
        0.002f64..0.2,
        0.002f64..0.1,
        0.002f64..0.1,
        0.05f64..0.9,
        -0.5f64..2.0,
    )
        .prop_map(|(kappa, beta, p, c, s1, s2, a, alpha)| RetasParams {
            kappa,
            beta,
            p,
            c,
            sigma1_sq: s1,
            sigma2_sq: s2,
            a,
            alpha,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn hazard_integral_is_additive_and_nonnegative(
        params in arb_params(),
        a in 0.0f64..5.0,
        gap1 in 0.01f64..5.0,
        gap2 in 0.01f64..5.0,
    ) {
        let b = a + gap1;
        let c = b + gap2;
        let whole = renewal_hazard_integral(a, c, &params).unwrap();
        let split = renewal_hazard_integral(a, b, &params).unwrap()
            + renewal_hazard_integral(b, c, &params).unwrap();
        prop_assert!(whole >= 0.0);
        prop_assert!((whole - split).abs() <= 1e-9 * whole.max(1.0));
    }

    #[test]
    fn spatial_mass_is_a_probability(
        params in arb_params(),
        cx in -3.0f64..3.0,
        cy in -3.0f64..3.0,
        half_x in 0.01f64..4.0,
        half_y in 0.01f64..4.0,
    ) {
        let window = SpatialWindow::Rectangle {
            x_min: cx - half_x, x_max: cx + half_x,
            y_min: cy - half_y, y_max: cy + half_y,
        };
        let mass = spatial_mass((0.0, 0.0), &window, &params).unwrap();
        prop_assert!((0.0..=1.0).contains(&mass));
        prop_assert_eq!(spatial_mass((0.0, 0.0), &SpatialWindow::WholePlane, &params).unwrap(), 1.0);
    }

    #[test]
    fn filter_and_decluster_rows_normalize(
        params in arb_params(),
        n in 2usize..40,
        seed in 0u64..5_000,
    ) {
        let catalog = random_catalog(n, seed, 4.0, 0.4, SpatialWindow::WholePlane);
        let nu = BackgroundIntensity::Constant(1.0);
        let state = forward_filter(&catalog, &params, &nu).unwrap();
        for r in 0..state.log_p.rows() {
            let sum: f64 = state.log_p.row(r).iter().map(|lp| lp.exp()).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
        let result = smoother::decluster(&catalog, &params, &nu, &state).unwrap();
        for e in 1..n {
            let total = result.omega[e] + result.pi.row(e - 1).iter().sum::<f64>();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn loglik_ignores_subthreshold_rows(
        params in arb_params(),
        n in 2usize..20,
        seed in 0u64..1_000,
        extra in 1usize..6,
    ) {
        let catalog = random_catalog(n, seed, 4.0, 0.4, SpatialWindow::WholePlane);
        let mut csv = String::from("time,x,y,magnitude\n");
        for e in &catalog.events {
            csv.push_str(&format!("{},{},{},{}\n", e.t, e.x, e.y, e.m));
        }
        let mut with_noise = csv.clone();
        for k in 0..extra {
            with_noise.push_str(&format!("{},0.0,0.0,4.2\n", 0.3 + 0.17 * k as f64));
        }
        let mut opts = LoadOptions::new(5.0, SpatialWindow::WholePlane);
        opts.t_end = Some(catalog.t_end);
        let clean = load_catalog_str(&csv, &opts).unwrap();
        let noisy = load_catalog_str(&with_noise, &opts).unwrap();
        prop_assert_eq!(noisy.dropped, extra);

        let nu = BackgroundIntensity::Constant(1.0);
        let a = forward_filter(&clean.catalog, &params, &nu).unwrap().loglik;
        let b = forward_filter(&noisy.catalog, &params, &nu).unwrap().loglik;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn kde_scale_invariance_and_positivity(
        scale in 0.001f64..1_000.0,
        h11 in 0.01f64..2.0,
        h22 in 0.01f64..2.0,
        query_x in -2.0f64..2.0,
        query_y in -2.0f64..2.0,
    ) {
        let h = BandwidthMatrix::new(h11, 0.0, h22).unwrap();
        let points = vec![(0.0, 0.0), (0.5, 0.5), (-0.5, 1.0), (1.0, -1.0)];
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let scaled: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let a = WeightedKde::new(points.clone(), w, h).unwrap();
        let b = WeightedKde::new(points, scaled, h).unwrap();
        let va = a.evaluate(query_x, query_y);
        prop_assert!(va >= 0.0);
        prop_assert!((va - b.evaluate(query_x, query_y)).abs() <= 1e-12 * va.max(1e-300));
    }

    #[test]
    fn auc_complement_symmetry(
        scores in prop::collection::vec(0.0f64..1.0, 10..200),
        flip in prop::collection::vec(any::<bool>(), 10..200),
    ) {
        let n = scores.len().min(flip.len());
        let scores = &scores[..n];
        let labels = &flip[..n];
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let (_, auc) = roc_auc(scores, labels).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let (_, auc_neg) = roc_auc(&neg, labels).unwrap();
        prop_assert!((auc + auc_neg - 1.0).abs() < 1e-10);
    }
}
