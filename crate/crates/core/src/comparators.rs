//! Reference fixed-effects estimators of the autoregressive parameter, used
//! as comparison columns in the simulation tables: within-OLS, its
//! large-T bias correction (BCOLS), and two-step GMM in the Arellano-Bond
//! and Ahn-Schmidt forms. All of them condition on y_{i,0} = 0, so the
//! first usable differenced equation is t = 3 (the t = 2 instrument would be
//! the constant y_{i,0}) and AB/AS require T ≥ 3.

use crate::numkern::{maximize, sym_eig, OptimizerSpec, SymMat};
use crate::{Error, Result};
use ndarray::Array2;

/// Outcome of a comparator estimator.
#[derive(Debug, Clone)]
pub struct ComparatorResult {
    /// Point estimate; meaningless when `available` is false.
    pub rho: f64,
    /// False exactly when the estimator is undefined at this T.
    pub available: bool,
    /// Condition numbers of the GMM weighting matrices (before ridge).
    pub diagnostics: Vec<f64>,
}

impl ComparatorResult {
    fn unavailable() -> Self {
        ComparatorResult {
            rho: f64::NAN,
            available: false,
            diagnostics: Vec::new(),
        }
    }
}

/// Within (fixed-effects) OLS of y_t on y_{t-1}, both series demeaned per
/// individual over t = 1..T, with y_{i,0} = 0 included as the first lag.
pub fn within_ols(y: &Array2<f64>) -> Result<f64> {
    let (n, t) = y.dim();
    if t < 2 {
        return Err(Error::Invalid(format!("within OLS needs T >= 2, got {t}")));
    }
    let tf = t as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut scale = 0.0;
    for i in 0..n {
        let cur_mean: f64 = (0..t).map(|s| y[(i, s)]).sum::<f64>() / tf;
        let lag_mean: f64 = (0..t - 1).map(|s| y[(i, s)]).sum::<f64>() / tf;
        for s in 0..t {
            let lag = if s == 0 { 0.0 } else { y[(i, s - 1)] };
            let l = lag - lag_mean;
            let c = y[(i, s)] - cur_mean;
            num += l * c;
            den += l * l;
            scale += c * c;
        }
    }
    if den <= 1e-12 * scale.max(1.0) {
        return Err(Error::Estimation(
            "degenerate data: demeaned lags have no variation".into(),
        ));
    }
    Ok(num / den)
}

/// Bias-corrected OLS: ρ̂ ↦ ((T+1)/T) ρ̂ + 1/T.
pub fn bcols(y: &Array2<f64>) -> Result<ComparatorResult> {
    let t = y.ncols() as f64;
    let rho = within_ols(y)?;
    Ok(ComparatorResult {
        rho: (t + 1.0) / t * rho + 1.0 / t,
        available: true,
        diagnostics: Vec::new(),
    })
}

// Per-individual linear moment pieces for the differenced equations:
// moment (t, s) is y_s (Δy_t - ρ Δy_{t-1}) = b - ρ d with b = y_s Δy_t,
// d = y_s Δy_{t-1}; equations t = 3..T, instruments s = 1..t-2.
// Time subscripts are the paper's 1-based ones; column s of `y` is t = s+1.
struct AbMoments {
    q: usize,
    b: Vec<Vec<f64>>, // per individual
    d: Vec<Vec<f64>>,
    // equation index (0-based among t = 3..T) per moment, for the MA weight
    eq: Vec<usize>,
    // instrument value per individual per moment
    inst: Vec<Vec<f64>>,
}

fn ab_moments(y: &Array2<f64>) -> AbMoments {
    let (n, t) = y.dim();
    let yv = |i: usize, tt: usize| -> f64 {
        if tt == 0 {
            0.0
        } else {
            y[(i, tt - 1)]
        }
    };
    let mut eq = Vec::new();
    let mut pairs = Vec::new(); // (t, s)
    for tt in 3..=t {
        for s in 1..=tt - 2 {
            pairs.push((tt, s));
            eq.push(tt - 3);
        }
    }
    let q = pairs.len();
    let mut b = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut inst = Vec::with_capacity(n);
    for i in 0..n {
        let mut bi = Vec::with_capacity(q);
        let mut di = Vec::with_capacity(q);
        let mut zi = Vec::with_capacity(q);
        for &(tt, s) in &pairs {
            let dy_t = yv(i, tt) - yv(i, tt - 1);
            let dy_tm1 = yv(i, tt - 1) - yv(i, tt - 2);
            let z = yv(i, s);
            bi.push(z * dy_t);
            di.push(z * dy_tm1);
            zi.push(z);
        }
        b.push(bi);
        d.push(di);
        inst.push(zi);
    }
    AbMoments { q, b, d, eq, inst }
}

// Invert an SPD-ish matrix with a small ridge; returns (inverse, condition
// number before the ridge).
fn ridge_inverse(m: &SymMat) -> Result<(SymMat, f64)> {
    let (vals, _) = sym_eig(m);
    let top = vals[0].max(f64::MIN_POSITIVE);
    let bottom = *vals.last().unwrap();
    let cond = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
    let dim = m.dim();
    let ridge = 1e-10 * (m.trace() / dim as f64).max(1e-300);
    let mut r = m.clone();
    for i in 0..dim {
        r.set(i, i, r.get(i, i) + ridge);
    }
    Ok((r.inverse_spd().map_err(|e| {
        Error::Estimation(format!("GMM weighting not invertible: {e}"))
    })?, cond))
}

fn mean_vec(vs: &[Vec<f64>]) -> Vec<f64> {
    let n = vs.len() as f64;
    let q = vs[0].len();
    let mut out = vec![0.0; q];
    for v in vs {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x / n;
        }
    }
    out
}

/// Two-step Arellano-Bond GMM on the first-differenced equations. Not
/// available for T = 2.
pub fn arellano_bond(y: &Array2<f64>) -> Result<ComparatorResult> {
    let (n, t) = y.dim();
    if t < 3 {
        return Ok(ComparatorResult::unavailable());
    }
    let m = ab_moments(y);
    let nf = n as f64;

    // step 1: weighting from the MA(1) structure of the differenced errors,
    // W1 = (Σ_i Z_i' H Z_i / N)^{-1} with H tridiagonal (2, -1)
    let mut zhz = SymMat::zeros(m.q)?;
    for i in 0..n {
        for a in 0..m.q {
            for b in 0..=a {
                let h = if m.eq[a] == m.eq[b] {
                    2.0
                } else if m.eq[a].abs_diff(m.eq[b]) == 1 {
                    -1.0
                } else {
                    0.0
                };
                if h != 0.0 {
                    zhz.set(a, b, zhz.get(a, b) + h * m.inst[i][a] * m.inst[i][b] / nf);
                }
            }
        }
    }
    let (w1, cond1) = ridge_inverse(&zhz)?;
    let b_bar = mean_vec(&m.b);
    let d_bar = mean_vec(&m.d);
    let solve_rho = |w: &SymMat| -> Result<f64> {
        let dwd = w.quad(&d_bar, &d_bar);
        if dwd <= 0.0 {
            return Err(Error::Estimation("GMM denominator vanished".into()));
        }
        Ok(w.quad(&d_bar, &b_bar) / dwd)
    };
    let rho1 = solve_rho(&w1)?;

    // step 2: weighting from first-step residual moments
    let mut s = SymMat::zeros(m.q)?;
    for i in 0..n {
        for a in 0..m.q {
            let ma = m.b[i][a] - rho1 * m.d[i][a];
            for b in 0..=a {
                let mb = m.b[i][b] - rho1 * m.d[i][b];
                s.set(a, b, s.get(a, b) + ma * mb / nf);
            }
        }
    }
    let (w2, cond2) = ridge_inverse(&s)?;
    let rho2 = solve_rho(&w2)?;

    Ok(ComparatorResult {
        rho: rho2,
        available: true,
        diagnostics: vec![cond1, cond2],
    })
}

// Ahn-Schmidt adds the level moments E[(y_T - ρ y_{T-1})(Δy_t - ρ Δy_{t-1})]
// = 0 for t = 2..T-1; each is quadratic in ρ: p0 + p1 ρ + p2 ρ².
struct AsMoments {
    q: usize,
    p0: Vec<Vec<f64>>,
    p1: Vec<Vec<f64>>,
    p2: Vec<Vec<f64>>,
}

fn as_moments(y: &Array2<f64>) -> AsMoments {
    let (n, t) = y.dim();
    let yv = |i: usize, tt: usize| -> f64 {
        if tt == 0 {
            0.0
        } else {
            y[(i, tt - 1)]
        }
    };
    let ab = ab_moments(y);
    let extra: Vec<usize> = (2..t).collect(); // t = 2..T-1
    let q = ab.q + extra.len();
    let mut p0 = Vec::with_capacity(n);
    let mut p1 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    for i in 0..n {
        let mut a0 = Vec::with_capacity(q);
        let mut a1 = Vec::with_capacity(q);
        let mut a2 = Vec::with_capacity(q);
        for j in 0..ab.q {
            a0.push(ab.b[i][j]);
            a1.push(-ab.d[i][j]);
            a2.push(0.0);
        }
        let y_t = yv(i, t);
        let y_tm1 = yv(i, t - 1);
        for &tt in &extra {
            let dy_t = yv(i, tt) - yv(i, tt - 1);
            let dy_tm1 = yv(i, tt - 1) - yv(i, tt - 2);
            a0.push(y_t * dy_t);
            a1.push(-(y_tm1 * dy_t + y_t * dy_tm1));
            a2.push(y_tm1 * dy_tm1);
        }
        p0.push(a0);
        p1.push(a1);
        p2.push(a2);
    }
    AsMoments { q, p0, p1, p2 }
}

/// Two-step Ahn-Schmidt GMM: Arellano-Bond moments plus the nonlinear
/// no-serial-correlation level moments, minimized numerically over ρ. Not
/// available for T = 2.
pub fn ahn_schmidt(y: &Array2<f64>) -> Result<ComparatorResult> {
    let (n, t) = y.dim();
    if t < 3 {
        return Ok(ComparatorResult::unavailable());
    }
    let m = as_moments(y);
    let nf = n as f64;
    let ab = arellano_bond(y)?;
    let rho0 = if ab.rho.is_finite() { ab.rho } else { 0.0 };

    let weight_at = |rho: f64| -> Result<(SymMat, f64)> {
        let mut s = SymMat::zeros(m.q)?;
        for i in 0..n {
            for a in 0..m.q {
                let ma = m.p0[i][a] + rho * m.p1[i][a] + rho * rho * m.p2[i][a];
                for b in 0..=a {
                    let mb = m.p0[i][b] + rho * m.p1[i][b] + rho * rho * m.p2[i][b];
                    s.set(a, b, s.get(a, b) + ma * mb / nf);
                }
            }
        }
        ridge_inverse(&s)
    };
    let mean_at = |rho: f64| -> Vec<f64> {
        (0..m.q)
            .map(|j| {
                (0..n)
                    .map(|i| m.p0[i][j] + rho * m.p1[i][j] + rho * rho * m.p2[i][j])
                    .sum::<f64>()
                    / nf
            })
            .collect()
    };
    let gmm_rho = |w: &SymMat, start: f64| -> Result<f64> {
        let crit = |v: &[f64]| {
            let mu = mean_at(v[0]);
            -w.quad(&mu, &mu)
        };
        let spec = OptimizerSpec {
            bounds: vec![(-2.0, 2.0)],
            grad_tol: 1e-9,
            max_iter: 300,
            starts: vec![vec![start], vec![0.0], vec![0.5]],
        };
        let opt = maximize(crit, None::<fn(&[f64]) -> Vec<f64>>, &spec)?;
        Ok(opt.argmax[0])
    };

    let (w1, cond1) = weight_at(rho0)?;
    let rho1 = gmm_rho(&w1, rho0)?;
    let (w2, cond2) = weight_at(rho1)?;
    let rho2 = gmm_rho(&w2, rho1)?;

    Ok(ComparatorResult {
        rho: rho2,
        available: true,
        diagnostics: vec![cond1, cond2],
    })
}
