//! Derivative-free and numeric-gradient minimizers used by the fitters:
//! adaptive Nelder-Mead followed by a BFGS polish. Both are deterministic
//! given the starting point and budget, and both treat non-finite
//! objective values as +inf so domain violations simply repel the search.

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn guard<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], evals: &mut usize) -> f64 {
    *evals += 1;
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Adaptive Nelder-Mead (Gao-Han coefficients) from an axis-aligned
/// initial simplex with the given step.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    f_tol: f64,
    x_tol: f64,
    max_evals: usize,
) -> MinimizeResult {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut evals = 0usize;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut fs: Vec<f64> = simplex.iter().map(|v| guard(&mut f, v, &mut evals)).collect();

    let mut converged = false;
    while evals < max_evals {
        // Order ascending by objective.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        let reorder: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let refs: Vec<f64> = idx.iter().map(|&i| fs[i]).collect();
        simplex = reorder;
        fs = refs;

        let spread = fs[n] - fs[0];
        let diameter = (0..n)
            .map(|d| {
                simplex.iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max)
                    - simplex.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        if spread.is_finite() && (spread < f_tol || diameter < x_tol) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / nf)
            .collect();
        let at = |base: &[f64], coef: f64, other: &[f64]| -> Vec<f64> {
            base.iter().zip(other).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let xr = at(&centroid, alpha, &simplex[n]);
        let fr = guard(&mut f, &xr, &mut evals);
        if fr < fs[0] {
            let xe = at(&centroid, alpha * beta, &simplex[n]);
            let fe = guard(&mut f, &xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                fs[n] = fe;
            } else {
                simplex[n] = xr;
                fs[n] = fr;
            }
        } else if fr < fs[n - 1] {
            simplex[n] = xr;
            fs[n] = fr;
        } else if fr < fs[n] {
            // Outside contraction.
            let xc = at(&centroid, alpha * gamma, &simplex[n]);
            let fc = guard(&mut f, &xc, &mut evals);
            if fc <= fr {
                simplex[n] = xc;
                fs[n] = fc;
            } else {
                shrink(&mut simplex, &mut fs, delta, &mut f, &mut evals);
            }
        } else {
            // Inside contraction.
            let xc = at(&centroid, -gamma, &simplex[n]);
            let fc = guard(&mut f, &xc, &mut evals);
            if fc < fs[n] {
                simplex[n] = xc;
                fs[n] = fc;
            } else {
                shrink(&mut simplex, &mut fs, delta, &mut f, &mut evals);
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).expect("nonempty simplex");
    MinimizeResult { x: simplex[best].clone(), f: fs[best], evals, converged }
}

fn shrink<F: FnMut(&[f64]) -> f64>(
    simplex: &mut [Vec<f64>],
    fs: &mut [f64],
    delta: f64,
    f: &mut F,
    evals: &mut usize,
) {
    let best = simplex[0].clone();
    for i in 1..simplex.len() {
        for (v, b) in simplex[i].iter_mut().zip(&best) {
            *v = b + delta * (*v - b);
        }
        fs[i] = guard(f, &simplex[i].clone(), evals);
    }
}

fn numeric_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    h: f64,
    evals: &mut usize,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = guard(f, &xp, evals);
        xp[i] = x[i] - h;
        let fm = guard(f, &xp, evals);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// BFGS with central-difference gradients and Armijo backtracking.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    grad_step: f64,
    f_tol: f64,
    max_evals: usize,
) -> MinimizeResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    let mut fx = guard(&mut f, &x, &mut evals);
    if !fx.is_finite() {
        return MinimizeResult { x, f: fx, evals, converged: false };
    }
    let mut g = numeric_gradient(&mut f, &x, grad_step, &mut evals);
    // Inverse Hessian approximation.
    let mut h_inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut converged = false;

    while evals < max_evals {
        let mut dir: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h_inv[i][j] * g[j]).sum::<f64>())
            .collect();
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            // Reset to steepest descent if curvature information went bad.
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
        }
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope.abs() < 1e-18 {
            converged = true;
            break;
        }

        let mut t = 1.0;
        let mut x_new = x.clone();
        let mut f_new = f64::INFINITY;
        let mut ok = false;
        for _ in 0..30 {
            for i in 0..n {
                x_new[i] = x[i] + t * dir[i];
            }
            f_new = guard(&mut f, &x_new, &mut evals);
            if f_new <= fx + 1e-4 * t * slope {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if !ok {
            converged = true; // no descent achievable at this resolution
            break;
        }

        let g_new = numeric_gradient(&mut f, &x_new, grad_step, &mut evals);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let improvement = fx - f_new;
        x = x_new.clone();
        fx = f_new;
        g = g_new;
        if improvement < f_tol {
            converged = true;
            break;
        }
        if sy > 1e-12 {
            // Standard BFGS inverse update.
            let rho = 1.0 / sy;
            let hy: Vec<f64> =
                (0..n).map(|i| (0..n).map(|j| h_inv[i][j] * y[j]).sum::<f64>()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += (sy + yhy) * rho * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }

    MinimizeResult { x, f: fx, evals, converged }
}
