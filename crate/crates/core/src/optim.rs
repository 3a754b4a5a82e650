//! Internal optimization kernels: line-searched BFGS ascent and damped
//! Newton root finding. Shared by the orbit finders; not part of the
//! public API.

use nalgebra::{DMatrix, DVector};

use crate::symplectic::fd_jacobian;

pub(crate) struct AscentResult {
    pub x: DVector<f64>,
    pub converged: bool,
}

/// Maximizes `f` by BFGS with Armijo backtracking. The inverse-Hessian
/// approximation is reset to identity whenever the search direction stops
/// being an ascent direction.
pub(crate) fn bfgs_max<F, G>(
    f: F,
    grad: G,
    x0: DVector<f64>,
    max_iter: usize,
    gtol: f64,
) -> AscentResult
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let dim = x0.len();
    let mut x = x0;
    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(dim, dim);

    for _ in 0..max_iter {
        if g.norm() <= gtol {
            return AscentResult { x, converged: true };
        }
        let mut d = &h * &g;
        let mut slope = g.dot(&d);
        if !(slope > 0.0) {
            h = DMatrix::identity(dim, dim);
            d = g.clone();
            slope = g.norm_squared();
        }

        let f0 = f(&x);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = &x + &d * alpha;
            if f(&trial) >= f0 + 1e-4 * alpha * slope {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(x_new) = accepted else {
            // Line search stalled: gradient noise floor reached.
            return AscentResult {
                converged: g.norm() <= gtol,
                x,
            };
        };

        let g_new = grad(&x_new);
        let s = &x_new - &x;
        // Curvature pair for the minimization of -f.
        let yv = &g - &g_new;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // Inverse BFGS update: (I - rho s y^T) H (I - rho y s^T) + rho s s^T.
            let sy_outer = &s * hy.transpose();
            h = &h - (&sy_outer + sy_outer.transpose()) * rho
                + (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        x = x_new;
        g = g_new;
    }

    AscentResult {
        converged: g.norm() <= gtol,
        x,
    }
}

/// Damped Newton iteration on a residual map, with finite-difference
/// Jacobians. Returns the root when the max-norm residual drops below
/// `tol`; `None` on divergence or a singular Jacobian step.
pub(crate) fn newton_root<G>(
    g: G,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
    fd_step: f64,
) -> Option<DVector<f64>>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0;
    let mut r = g(&x);
    for _ in 0..max_iter {
        if r.amax() <= tol {
            return Some(x);
        }
        let jac = fd_jacobian(&g, &x, fd_step).ok()?;
        let delta = jac.lu().solve(&r)?;
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..25 {
            let trial = &x - &delta * lambda;
            let r_trial = g(&trial);
            if r_trial.norm() < r.norm() {
                x = trial;
                r = r_trial;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            return None;
        }
    }
    if r.amax() <= tol {
        Some(x)
    } else {
        None
    }
}
