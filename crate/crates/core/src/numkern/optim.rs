//! Box-constrained maximization: projected quasi-Newton (BFGS curvature,
//! backtracking line search) when an analytic gradient is available, and a
//! Nelder–Mead simplex clipped to the box otherwise. Deterministic given the
//! spec and start points; the best multistart result wins.

use crate::{Error, Result};

/// Search configuration for [`maximize`].
#[derive(Debug, Clone)]
pub struct OptimizerSpec {
    /// Per-coordinate (lower, upper); infinities allowed.
    pub bounds: Vec<(f64, f64)>,
    /// Convergence threshold on the projected-gradient sup norm (gradient
    /// path) or on the simplex diameter (derivative-free path).
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Start points; each is clipped into the box.
    pub starts: Vec<Vec<f64>>,
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::Invalid("each lower bound must be < upper bound".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Invalid("gradient tolerance must be > 0".into()));
        }
        if self.starts.is_empty() {
            return Err(Error::Invalid("at least one start point required".into()));
        }
        if self.starts.iter().any(|s| s.len() != self.bounds.len()) {
            return Err(Error::Invalid("start dimension mismatch".into()));
        }
        Ok(())
    }

    /// Default multistart: the given point plus two ±10% perturbations,
    /// all clipped to the box.
    pub fn multistart(base: Vec<f64>, bounds: Vec<(f64, f64)>) -> Self {
        let up: Vec<f64> = base
            .iter()
            .map(|&v| v + 0.1 * v.abs().max(0.5))
            .collect();
        let down: Vec<f64> = base
            .iter()
            .map(|&v| v - 0.1 * v.abs().max(0.5))
            .collect();
        OptimizerSpec {
            bounds,
            grad_tol: 1e-9,
            max_iter: 500,
            starts: vec![base, up, down],
        }
    }
}

/// Result of a box-constrained maximization.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    /// Per-coordinate flag: argmax touches a bound.
    pub at_boundary: Vec<bool>,
    pub iterations: usize,
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn boundary_flags(x: &[f64], bounds: &[(f64, f64)]) -> Vec<bool> {
    x.iter()
        .zip(bounds)
        .map(|(&xi, &(lo, hi))| {
            let scale = xi.abs().max(1.0);
            (lo.is_finite() && (xi - lo).abs() <= 1e-8 * scale)
                || (hi.is_finite() && (hi - xi).abs() <= 1e-8 * scale)
        })
        .collect()
}

/// Maximize `objective` over the box, optionally using `gradient`.
pub fn maximize<F, G>(objective: F, gradient: Option<G>, spec: &OptimizerSpec) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    spec.validate()?;
    let mut best: Option<OptResult> = None;
    let mut any_finite = false;
    for start in &spec.starts {
        let mut x0 = start.clone();
        clip(&mut x0, &spec.bounds);
        if !objective(&x0).is_finite() {
            continue;
        }
        any_finite = true;
        let run = match &gradient {
            Some(g) => projected_bfgs(&objective, g, x0, spec),
            None => nelder_mead(&objective, x0, spec),
        };
        best = Some(match best {
            Some(b) if b.value >= run.value => b,
            _ => run,
        });
    }
    if !any_finite {
        return Err(Error::Optimization(
            "objective not finite at any start point".into(),
        ));
    }
    Ok(best.unwrap())
}

fn projected_bfgs<F, G>(f: &F, grad: &G, mut x: Vec<f64>, spec: &OptimizerSpec) -> OptResult
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let bounds = &spec.bounds;
    let mut fx = f(&x);
    // negate: we minimize -f with gradient -grad
    let mut g: Vec<f64> = grad(&x).iter().map(|v| -v).collect();
    let mut h = eye(n);
    let mut converged = false;
    let mut iterations = 0;

    let active = |x: &[f64], i: usize| -> (bool, bool) {
        let (lo, hi) = bounds[i];
        let scale = x[i].abs().max(1.0);
        (
            lo.is_finite() && x[i] - lo <= 1e-12 * scale,
            hi.is_finite() && hi - x[i] <= 1e-12 * scale,
        )
    };
    let proj_grad = |x: &[f64], g: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let (at_lo, at_hi) = active(x, i);
                if (at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0) {
                    0.0
                } else {
                    g[i]
                }
            })
            .collect()
    };

    for iter in 0..spec.max_iter {
        iterations = iter + 1;
        let pg = proj_grad(&x, &g);
        if sup_norm(&pg) <= spec.grad_tol {
            converged = true;
            break;
        }
        // quasi-Newton direction, with components into active bounds removed
        let mut d = neg_mat_vec(&h, &g);
        for i in 0..n {
            let (at_lo, at_hi) = active(&x, i);
            if (at_lo && d[i] < 0.0) || (at_hi && d[i] > 0.0) {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 || sup_norm(&d) == 0.0 {
            h = eye(n);
            d = pg.iter().map(|v| -v).collect();
        }

        // backtracking line search on the projected path
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            x_new = x
                .iter()
                .zip(&d)
                .map(|(&xi, &di)| xi + alpha * di)
                .collect();
            clip(&mut x_new, bounds);
            f_new = f(&x_new);
            if f_new.is_finite() {
                let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                if sup_norm(&step) == 0.0 {
                    break;
                }
                // Armijo on the minimization objective -f
                if -f_new <= -fx + 1e-4 * dot(&g, &step) {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no admissible improvement along d; stop at the current point
            converged = sup_norm(&pg) <= spec.grad_tol.max(1e-6);
            break;
        }

        let g_new: Vec<f64> = grad(&x_new).iter().map(|v| -v).collect();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    OptResult {
        at_boundary: boundary_flags(&x, bounds),
        argmax: x,
        value: fx,
        converged,
        iterations,
    }
}

fn nelder_mead<F>(f: &F, x0: Vec<f64>, spec: &OptimizerSpec) -> OptResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let bounds = &spec.bounds;
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    // initial simplex: x0 plus a step along each axis, stepping inward when a
    // vertex would leave the box
    let mut verts: Vec<Vec<f64>> = vec![x0.clone()];
    for i in 0..n {
        let mut v = x0.clone();
        let span = match bounds[i] {
            (lo, hi) if lo.is_finite() && hi.is_finite() => 0.05 * (hi - lo),
            _ => 0.0,
        };
        let mut step = span.max(0.1 * v[i].abs().max(0.5));
        if v[i] + step > bounds[i].1 {
            step = -step;
        }
        v[i] += step;
        clip(&mut v, bounds);
        if (v[i] - x0[i]).abs() < 1e-12 {
            v[i] = x0[i] + 0.5 * (bounds[i].0.max(-1e3) - x0[i]);
            clip(&mut v, bounds);
        }
        verts.push(v);
    }
    let mut fv: Vec<f64> = verts.iter().map(|v| eval(v)).collect();

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..spec.max_iter {
        iterations = iter + 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap());
        let reorder_v: Vec<Vec<f64>> = order.iter().map(|&i| verts[i].clone()).collect();
        let reorder_f: Vec<f64> = order.iter().map(|&i| fv[i]).collect();
        verts = reorder_v;
        fv = reorder_f;

        let f_spread = fv[n] - fv[0];
        let x_spread = (0..n)
            .map(|i| {
                verts[1..]
                    .iter()
                    .map(|v| (v[i] - verts[0][i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if x_spread <= spec.grad_tol.max(1e-10) && f_spread <= 1e-12 * (1.0 + fv[0].abs()) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| verts[..n].iter().map(|v| v[i]).sum::<f64>() / n as f64)
            .collect();
        let try_point = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n)
                .map(|i| centroid[i] + coef * (centroid[i] - verts[n][i]))
                .collect();
            clip(&mut p, bounds);
            p
        };

        let xr = try_point(1.0);
        let fr = eval(&xr);
        if fr < fv[0] {
            let xe = try_point(2.0);
            let fe = eval(&xe);
            if fe < fr {
                verts[n] = xe;
                fv[n] = fe;
            } else {
                verts[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            verts[n] = xr;
            fv[n] = fr;
        } else {
            let xc = try_point(if fr < fv[n] { 0.5 } else { -0.5 });
            let fc = eval(&xc);
            if fc < fv[n].min(fr) {
                verts[n] = xc;
                fv[n] = fc;
            } else {
                let v0 = verts[0].clone();
                for (v, fvi) in verts.iter_mut().zip(fv.iter_mut()).skip(1) {
                    for i in 0..n {
                        v[i] = v0[i] + 0.5 * (v[i] - v0[i]);
                    }
                    clip(v, bounds);
                    *fvi = eval(v);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap());
    let best = order[0];
    OptResult {
        at_boundary: boundary_flags(&verts[best], bounds),
        argmax: verts[best].clone(),
        value: -fv[best],
        converged,
        iterations,
    }
}

fn eye(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn neg_mat_vec(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    h.iter().map(|row| -dot(row, g)).collect()
}

// BFGS inverse-Hessian update:
// H <- (I - ρ s y')H(I - ρ y s') + ρ s s', ρ = 1/(s'y).
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bounds: Vec<(f64, f64)>, starts: Vec<Vec<f64>>) -> OptimizerSpec {
        OptimizerSpec {
            bounds,
            grad_tol: 1e-10,
            max_iter: 1000,
            starts,
        }
    }

    #[test]
    fn quadratic_bowl_from_any_start() {
        let c = [1.5, -2.0, 0.25];
        let f = |x: &[f64]| -> f64 {
            -x.iter().zip(&c).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum::<f64>()
        };
        let g = |x: &[f64]| -> Vec<f64> {
            x.iter().zip(&c).map(|(xi, ci)| -2.0 * (xi - ci)).collect()
        };
        let s = spec(
            vec![(f64::NEG_INFINITY, f64::INFINITY); 3],
            vec![vec![10.0, 10.0, 10.0], vec![-3.0, 0.0, 5.0]],
        );
        let r = maximize(f, Some(g), &s).unwrap();
        assert!(r.converged);
        for i in 0..3 {
            assert!((r.argmax[i] - c[i]).abs() < 1e-7);
            assert!(!r.at_boundary[i]);
        }
        // derivative-free path reaches the same point
        let r2 = maximize(f, None::<fn(&[f64]) -> Vec<f64>>, &s).unwrap();
        for i in 0..3 {
            assert!((r2.argmax[i] - c[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn bound_hit_is_flagged() {
        // maximize -(x+1)^2 on [0, inf): optimum at 0, on the boundary
        let f = |x: &[f64]| -(x[0] + 1.0) * (x[0] + 1.0);
        let g = |x: &[f64]| vec![-2.0 * (x[0] + 1.0)];
        let s = spec(vec![(0.0, f64::INFINITY)], vec![vec![3.0]]);
        let r = maximize(f, Some(g), &s).unwrap();
        assert!((r.argmax[0]).abs() < 1e-10);
        assert!(r.at_boundary[0]);
        assert!(r.converged);
    }

    #[test]
    fn negated_rosenbrock_beats_grid_oracle() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            -((1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a))
        };
        let g = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            vec![
                2.0 * (1.0 - a) + 400.0 * a * (b - a * a),
                -200.0 * (b - a * a),
            ]
        };
        let s = OptimizerSpec {
            bounds: vec![(-5.0, 5.0), (-5.0, 5.0)],
            grad_tol: 1e-9,
            max_iter: 5000,
            starts: vec![vec![-1.2, 1.0], vec![0.0, 0.0], vec![3.0, -3.0]],
        };
        let r = maximize(f, Some(g), &s).unwrap();
        // grid-search oracle on a 200x200 lattice
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let x = [-5.0 + 0.05 * i as f64, -5.0 + 0.05 * j as f64];
                grid_best = grid_best.max(f(&x));
            }
        }
        // the lattice contains the true optimum (1, 1) exactly
        assert!((grid_best - 0.0).abs() < 1e-12);
        assert!(r.value >= grid_best - 1e-10);
        assert!((r.argmax[0] - 1.0).abs() < 1e-5 && (r.argmax[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn deterministic_given_identical_spec() {
        let f = |x: &[f64]| -(x[0] * x[0] + (x[1] - 0.3).powi(2)) + (x[0] * 3.0).sin() * 0.01;
        let s = spec(vec![(-2.0, 2.0), (-2.0, 2.0)], vec![vec![1.0, -1.0]]);
        let a = maximize(f, None::<fn(&[f64]) -> Vec<f64>>, &s).unwrap();
        let b = maximize(f, None::<fn(&[f64]) -> Vec<f64>>, &s).unwrap();
        assert_eq!(a.argmax, b.argmax);
        assert_eq!(a.value, b.value);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn all_starts_nonfinite_is_an_error() {
        let f = |_: &[f64]| f64::NAN;
        let s = spec(vec![(-1.0, 1.0)], vec![vec![0.0]]);
        assert!(maximize(f, None::<fn(&[f64]) -> Vec<f64>>, &s).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let f = |x: &[f64]| -x[0] * x[0];
        let bad_bounds = spec(vec![(1.0, 1.0)], vec![vec![0.0]]);
        assert!(maximize(f, None::<fn(&[f64]) -> Vec<f64>>, &bad_bounds).is_err());
        let mut bad_tol = spec(vec![(-1.0, 1.0)], vec![vec![0.0]]);
        bad_tol.grad_tol = 0.0;
        assert!(maximize(f, None::<fn(&[f64]) -> Vec<f64>>, &bad_tol).is_err());
    }
}
