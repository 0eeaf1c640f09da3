//! Weighted 2-d kernel density estimation of the background spatial
//! intensity, its effective degrees of freedom, and the corrected AIC.
//!
//! ```text
//! nu_hat(x,y) = sum_i |det h|^(-1/2) K(|h^(-1/2) (x_i - x, y_i - y)|) w_i / sum_j w_j
//! DoF         = sum_i W_h(i,i) / sum_l W_h(l,i)
//! AICc        = -2 l + 2 n k / (n - k - 1)
//! ```
//!
//! with the radial Gaussian kernel K(r) = exp(-r^2/2) / (2 pi). The default
//! bandwidth is the bivariate normal-reference matrix `n^(-1/3) * Cov`,
//! which users can override (or rescale through the zeta multiplier) when
//! an externally computed plug-in matrix is preferred. No boundary
//! correction is applied near window edges.

use crate::catalog::Catalog;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KdeError {
    #[error("bandwidth matrix must be symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("degenerate point configuration: {0}")]
    Degenerate(String),
    #[error("AICc undefined: sample size {n} <= k + 1 = {k_plus_one}")]
    AiccUndefined { n: f64, k_plus_one: f64 },
}

/// Symmetric positive-definite 2x2 smoothing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthMatrix {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl BandwidthMatrix {
    pub fn new(h11: f64, h12: f64, h22: f64) -> Result<BandwidthMatrix, KdeError> {
        let h = BandwidthMatrix { h11, h12, h22 };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<(), KdeError> {
        if !(self.h11 > 0.0 && self.det() > 0.0) {
            return Err(KdeError::NotPositiveDefinite(format!(
                "h11 = {}, det = {}",
                self.h11,
                self.det()
            )));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    /// Multiply by a scalar smoothing factor zeta.
    pub fn scaled(&self, zeta: f64) -> BandwidthMatrix {
        BandwidthMatrix { h11: self.h11 * zeta, h12: self.h12 * zeta, h22: self.h22 * zeta }
    }

    /// Entries of the inverse matrix (i11, i12, i22).
    fn inverse(&self) -> (f64, f64, f64) {
        let inv_det = 1.0 / self.det();
        (self.h22 * inv_det, -self.h12 * inv_det, self.h11 * inv_det)
    }
}

/// Bivariate normal-reference bandwidth: the sample covariance of the
/// epicenters scaled by n^(-1/3) (the d = 2 normal-reference constant is 1).
pub fn default_bandwidth(catalog: &Catalog) -> Result<BandwidthMatrix, KdeError> {
    let n = catalog.n();
    if n < 2 {
        return Err(KdeError::Degenerate("need at least 2 points".into()));
    }
    let nf = n as f64;
    let mean_x = catalog.events.iter().map(|e| e.x).sum::<f64>() / nf;
    let mean_y = catalog.events.iter().map(|e| e.y).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for e in &catalog.events {
        let dx = e.x - mean_x;
        let dy = e.y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let denom = nf - 1.0;
    let scale = nf.powf(-1.0 / 3.0) / denom;
    let h = BandwidthMatrix { h11: sxx * scale, h12: sxy * scale, h22: syy * scale };
    h.check().map_err(|_| {
        KdeError::Degenerate("sample covariance of epicenters is singular (collinear points)".into())
    })?;
    Ok(h)
}

/// Weighted kernel density estimate with a fixed bandwidth matrix.
///
/// Immutable after construction; evaluation is exact O(n) per query.
#[derive(Debug, Clone)]
pub struct WeightedKde {
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
    h: BandwidthMatrix,
    weight_sum: f64,
    inv: (f64, f64, f64),
    /// |det h|^(-1/2) / (2 pi), the kernel normalization.
    norm: f64,
}

impl WeightedKde {
    pub fn new(
        points: Vec<(f64, f64)>,
        weights: Vec<f64>,
        h: BandwidthMatrix,
    ) -> Result<WeightedKde, KdeError> {
        h.check()?;
        if points.is_empty() || points.len() != weights.len() {
            return Err(KdeError::Degenerate(format!(
                "{} points vs {} weights",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(KdeError::Degenerate("weights must be finite and >= 0".into()));
        }
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum <= 0.0 {
            return Err(KdeError::Degenerate("weight sum must be > 0".into()));
        }
        let norm = 1.0 / (h.det().sqrt() * 2.0 * std::f64::consts::PI);
        Ok(WeightedKde { points, weights, inv: h.inverse(), h, weight_sum, norm })
    }

    /// Equal-weight construction (the semi-parametric initializer).
    pub fn equal_weights(points: Vec<(f64, f64)>, h: BandwidthMatrix) -> Result<WeightedKde, KdeError> {
        let w = vec![1.0; points.len()];
        WeightedKde::new(points, w, h)
    }

    pub fn bandwidth(&self) -> BandwidthMatrix {
        self.h
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Density estimate at (x, y).
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let (i11, i12, i22) = self.inv;
        let mut acc = 0.0;
        for ((px, py), w) in self.points.iter().zip(&self.weights) {
            let dx = px - x;
            let dy = py - y;
            let q = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy;
            acc += w * (-0.5 * q).exp();
        }
        self.norm * acc / self.weight_sum
    }
}

/// Effective degrees of freedom of the kernel smoother: the trace of the
/// hat matrix. W_h(a, a) is the same constant for every point, so the
/// weights drop out and the DoF is fixed across the estimation iterations.
/// Always in [1, n].
pub fn kde_dof(points: &[(f64, f64)], h: &BandwidthMatrix) -> f64 {
    let (i11, i12, i22) = h.inverse();
    let n = points.len();
    let mut dof = 0.0;
    for i in 0..n {
        let (xi, yi) = points[i];
        let mut denom = 0.0;
        for &(xl, yl) in points {
            let dx = xl - xi;
            let dy = yl - yi;
            let q = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy;
            denom += (-0.5 * q).exp();
        }
        dof += 1.0 / denom;
    }
    dof
}

/// Corrected Akaike information criterion -2 l + 2 n k / (n - k - 1).
pub fn aicc(loglik: f64, k: f64, n: f64) -> Result<f64, KdeError> {
    if n <= k + 1.0 {
        return Err(KdeError::AiccUndefined { n, k_plus_one: k + 1.0 });
    }
    Ok(-2.0 * loglik + 2.0 * n * k / (n - k - 1.0))
}
