//! Stationary linear panel with fixed effects and AR(1) errors.
//!
//! Per-individual translation by the fixed effect is removed by first
//! differencing; the likelihood of the differenced outcome is an ordinary
//! Gaussian criterion in (β, σ², ρ). The maximizer profiles β (GLS) and σ²
//! (mean residual quadratic form) analytically, leaving a one-dimensional
//! search over ρ.

use crate::numkern::{maximize, OptimizerSpec, SymMat};
use crate::report::EstimateReport;
use crate::{Error, Result};
use ndarray::{Array2, Array3};

pub const RHO_BOUND: f64 = 0.99;
pub const SIGMA2_MIN: f64 = 1e-8;
pub const SIGMA2_MAX: f64 = 1e8;

/// Balanced panel: outcomes N×T and regressors N×T×K (K may be 0).
#[derive(Debug, Clone)]
pub struct StaticPanelData {
    pub y: Array2<f64>,
    pub x: Array3<f64>,
}

impl StaticPanelData {
    pub fn new(y: Array2<f64>, x: Array3<f64>) -> Result<Self> {
        let (n, t) = y.dim();
        let (xn, xt, _k) = x.dim();
        if n == 0 || t < 2 {
            return Err(Error::Invalid(format!(
                "panel needs N >= 1 and T >= 2, got N={n}, T={t}"
            )));
        }
        if xn != n || xt != t {
            return Err(Error::Invalid(format!(
                "regressor array is {xn}x{xt}x_, expected {n}x{t}x_"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("panel contains non-finite values".into()));
        }
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }
    pub fn t(&self) -> usize {
        self.y.ncols()
    }
    pub fn k(&self) -> usize {
        self.x.dim().2
    }
}

/// Maximal-invariant parameter point (β, σ², ρ).
#[derive(Debug, Clone)]
pub struct ThetaStatic {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub rho: f64,
}

impl ThetaStatic {
    pub fn new(beta: Vec<f64>, sigma2: f64, rho: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::Domain(format!("sigma2 must be > 0, got {sigma2}")));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::Domain(format!("|rho| must be < 1, got {rho}")));
        }
        Ok(Self { beta, sigma2, rho })
    }
}

/// First-differencing matrix: row t has +1 in column t and -1 in column t+1.
/// Annihilates the constant vector; rank T-1.
pub fn diff_matrix(t: usize) -> Result<Array2<f64>> {
    if t < 2 {
        return Err(Error::Domain(format!("diff_matrix needs T >= 2, got {t}")));
    }
    let mut d = Array2::<f64>::zeros((t - 1, t));
    for r in 0..t - 1 {
        d[(r, r)] = 1.0;
        d[(r, r + 1)] = -1.0;
    }
    Ok(d)
}

/// AR(1) covariance: entry (s, t) is ρ^{|s-t|} / (1-ρ²). Positive definite
/// for |ρ| < 1.
pub fn ar1_cov(rho: f64, t: usize) -> Result<SymMat> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("|rho| must be < 1, got {rho}")));
    }
    let scale = 1.0 / (1.0 - rho * rho);
    SymMat::from_fn(t, |i, j| rho.powi((i - j) as i32) * scale)
}

// D Σ_T(ρ) D' for the differencing matrix: entry (r, s) built directly from
// the four Σ entries it touches.
fn diff_cov(rho: f64, t: usize) -> Result<SymMat> {
    let sig = ar1_cov(rho, t)?;
    SymMat::from_fn(t - 1, |r, s| {
        sig.get(r, s) - sig.get(r, s + 1) - sig.get(r + 1, s) + sig.get(r + 1, s + 1)
    })
}

/// Log-likelihood of the differenced panel at θ (full value, summed over
/// individuals).
pub fn loglik_static(data: &StaticPanelData, theta: &ThetaStatic) -> Result<f64> {
    let (n, t, k) = (data.n(), data.t(), data.k());
    if theta.beta.len() != k {
        return Err(Error::Invalid(format!(
            "beta has length {}, expected {k}",
            theta.beta.len()
        )));
    }
    let m = diff_cov(theta.rho, t)?;
    let chol = m.cholesky()?;
    let log_det: f64 = 2.0 * (0..t - 1).map(|i| chol[(i, i)].ln()).sum::<f64>();

    let mut quad_sum = 0.0;
    let mut resid = vec![0.0; t];
    let mut dr = vec![0.0; t - 1];
    for i in 0..n {
        for s in 0..t {
            let mut xb = 0.0;
            for j in 0..k {
                xb += data.x[(i, s, j)] * theta.beta[j];
            }
            resid[s] = data.y[(i, s)] - xb;
        }
        for s in 0..t - 1 {
            dr[s] = resid[s] - resid[s + 1];
        }
        quad_sum += spd_quad(&chol, &dr);
    }

    let tm1 = (t - 1) as f64;
    Ok(
        n as f64 * (-0.5 * tm1 * (2.0 * std::f64::consts::PI * theta.sigma2).ln() - 0.5 * log_det)
            - quad_sum / (2.0 * theta.sigma2),
    )
}

// x' M^{-1} x given the Cholesky factor of M: forward-solve once.
fn spd_quad(chol: &Array2<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..i {
            y[i] -= chol[(i, k)] * y[k];
        }
        y[i] /= chol[(i, i)];
        acc += y[i] * y[i];
    }
    acc
}

struct ProfiledFit {
    beta: Vec<f64>,
    sigma2_raw: f64,
    log_det: f64,
}

// GLS in β and closed-form σ² for a fixed ρ.
fn profile_at_rho(data: &StaticPanelData, rho: f64) -> Result<ProfiledFit> {
    let (n, t, k) = (data.n(), data.t(), data.k());
    let m = diff_cov(rho, t)?;
    let chol = m.cholesky()?;
    let log_det: f64 = 2.0 * (0..t - 1).map(|i| chol[(i, i)].ln()).sum::<f64>();

    // whiten rows: solve L w = v, then OLS of w_y on w_x
    let whiten = |v: &[f64], out: &mut [f64]| {
        for i in 0..v.len() {
            let mut s = v[i];
            for kk in 0..i {
                s -= chol[(i, kk)] * out[kk];
            }
            out[i] = s / chol[(i, i)];
        }
    };

    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let mut yty = 0.0;
    let mut dy = vec![0.0; t - 1];
    let mut wy = vec![0.0; t - 1];
    let mut dx = vec![0.0; (t - 1) * k.max(1)];
    let mut wx = vec![0.0; t - 1];
    let mut wx_all = vec![0.0; (t - 1) * k.max(1)];

    for i in 0..n {
        for s in 0..t - 1 {
            dy[s] = data.y[(i, s)] - data.y[(i, s + 1)];
            for j in 0..k {
                dx[s * k + j] = data.x[(i, s, j)] - data.x[(i, s + 1, j)];
            }
        }
        whiten(&dy, &mut wy);
        for j in 0..k {
            let col: Vec<f64> = (0..t - 1).map(|s| dx[s * k + j]).collect();
            whiten(&col, &mut wx);
            wx_all[j * (t - 1)..(j + 1) * (t - 1)].copy_from_slice(&wx);
        }
        for s in 0..t - 1 {
            yty += wy[s] * wy[s];
            for a in 0..k {
                xty[a] += wx_all[a * (t - 1) + s] * wy[s];
                for b in a..k {
                    xtx[a * k + b] += wx_all[a * (t - 1) + s] * wx_all[b * (t - 1) + s];
                }
            }
        }
    }

    let beta = if k > 0 {
        let gram = SymMat::from_fn(k, |i, j| xtx[j * k + i])?;
        gram.solve_spd(&xty).map_err(|_| {
            Error::Estimation("degenerate design: differenced regressors are collinear".into())
        })?
    } else {
        Vec::new()
    };

    let mut rss = yty;
    for a in 0..k {
        rss -= beta[a] * xty[a];
    }
    // GLS identity leaves rss = y'Ay - β'X'Ay; guard tiny negative rounding
    let rss = rss.max(0.0);
    Ok(ProfiledFit {
        beta,
        sigma2_raw: rss / (n as f64 * (t - 1) as f64),
        log_det,
    })
}

fn profiled_objective(data: &StaticPanelData, rho: f64) -> Result<(f64, ProfiledFit, f64, bool)> {
    let fit = profile_at_rho(data, rho)?;
    let (sigma2, clamped) = if fit.sigma2_raw < SIGMA2_MIN {
        (SIGMA2_MIN, true)
    } else if fit.sigma2_raw > SIGMA2_MAX {
        (SIGMA2_MAX, true)
    } else {
        (fit.sigma2_raw, false)
    };
    let n = data.n() as f64;
    let tm1 = (data.t() - 1) as f64;
    let rss = fit.sigma2_raw * n * tm1;
    let value = -0.5 * n * tm1 * (2.0 * std::f64::consts::PI * sigma2).ln()
        - 0.5 * n * fit.log_det
        - rss / (2.0 * sigma2);
    Ok((value, fit, sigma2, clamped))
}

/// Maximum invariant likelihood estimate: GLS-profiled β and σ², numeric
/// search over ρ in [-0.99, 0.99].
pub fn estimate_static(data: &StaticPanelData) -> Result<EstimateReport> {
    let (n, t, k) = (data.n(), data.t(), data.k());
    if n * (t - 1) <= k + 2 {
        return Err(Error::Invalid(format!(
            "not enough degrees of freedom: N(T-1) = {} must exceed K+2 = {}",
            n * (t - 1),
            k + 2
        )));
    }
    // surface degenerate designs eagerly rather than as a flat objective
    profile_at_rho(data, 0.0)?;

    let objective = |v: &[f64]| match profiled_objective(data, v[0]) {
        Ok((val, _, _, _)) => val,
        Err(_) => f64::NEG_INFINITY,
    };
    let spec = OptimizerSpec {
        bounds: vec![(-RHO_BOUND, RHO_BOUND)],
        grad_tol: 1e-10,
        max_iter: 400,
        starts: vec![vec![0.0], vec![0.5], vec![-0.5]],
    };
    let opt = maximize(objective, None::<fn(&[f64]) -> Vec<f64>>, &spec)?;
    let rho = opt.argmax[0];
    let (value, fit, sigma2, sigma2_clamped) = profiled_objective(data, rho)?;

    let mut names: Vec<String> = (1..=k).map(|j| format!("beta_{j}")).collect();
    names.push("sigma2".into());
    names.push("rho".into());
    let mut estimates = fit.beta.clone();
    estimates.push(sigma2);
    estimates.push(rho);
    let mut at_boundary = vec![false; k];
    at_boundary.push(sigma2_clamped);
    at_boundary.push(opt.at_boundary[0]);

    Ok(EstimateReport {
        model: "static".into(),
        names,
        estimates,
        objective: value,
        converged: opt.converged,
        at_boundary,
        std_errors: None,
        iterations: opt.iterations,
    })
}
