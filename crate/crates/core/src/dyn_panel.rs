//! Invariant likelihood for the dynamic panel with fixed effects and zero
//! initial conditions.
//!
//! Left-multiplication of the N×T outcome matrix by any N×N orthogonal
//! matrix preserves the model, so the usable statistic is `W = Y'Y/N`,
//! noncentral-Wishart with noncentrality λ = η'η/(Nσ²). The working
//! objective is the θ-dependent part of its log density divided by NT:
//!
//! `Q(ρ, σ², λ) = -½ ln σ² - tr(D W D')/(2σ²T) - λ/2
//!                + (1/NT) ln( Z^{-ν} I_ν(N Z / 2) )`,
//!
//! with D = I - ρJ (J the subdiagonal shift), ν = (N-2)/2 and
//! Z = 2√(λ · 1'DWD'1 / σ²). For N < T the density's |W| term does not
//! exist, but it is θ-free, so the same pseudo-likelihood expression applies
//! unchanged. Everything the objective and scores need reduces to six
//! scalars of W, so likelihood evaluations are O(1) after an O(T²) setup.

use crate::numkern::{
    bessel_i_ratio, log_bessel_i, log_gamma, maximize, scaled_bessel_term, vech, OptimizerSpec,
    SymMat,
};
use crate::report::EstimateReport;
use crate::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub const RHO_MIN: f64 = -2.0;
pub const RHO_MAX: f64 = 2.0;
pub const SIGMA2_MIN: f64 = 1e-8;
pub const SIGMA2_MAX: f64 = 1e8;
pub const LAMBDA_MAX: f64 = 1e6;

/// `W = Y'Y/N` with its reduction metadata. Singular when N < T, which the
/// pseudo-likelihood path tolerates.
#[derive(Debug, Clone)]
pub struct WStatDyn {
    pub w: SymMat,
    pub n: usize,
    pub t: usize,
}

/// Maximal-invariant parameter point (ρ, σ², λ).
#[derive(Debug, Clone, Copy)]
pub struct ThetaDyn {
    pub rho: f64,
    pub sigma2: f64,
    pub lambda: f64,
}

impl ThetaDyn {
    pub fn new(rho: f64, sigma2: f64, lambda: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::Domain(format!("sigma2 must be > 0, got {sigma2}")));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { rho, sigma2, lambda })
    }
}

/// Error law for the simulated innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorLaw {
    Normal,
    /// (χ²(1) - 1)/√2: mean zero, unit variance, skewed.
    CenteredChiSq,
}

/// Score regimes: exact Bessel-ratio gradient, the large-N form with
/// `1 + √(1+Z²)` denominators, and the large-T limiting form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynScoreRegime {
    Exact,
    LargeN,
    LargeT,
}

/// Cumulation matrix B(ρ): entry (s, t) is ρ^{s-t} for s ≥ t, zero above the
/// diagonal.
pub fn b_matrix(rho: f64, t: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, t), |(i, j)| {
        if i >= j {
            rho.powi((i - j) as i32)
        } else {
            0.0
        }
    })
}

/// Its inverse D(ρ) = I - ρJ, the AR(1) quasi-differencing operator.
pub fn d_matrix(rho: f64, t: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, t), |(i, j)| {
        if i == j {
            1.0
        } else if i == j + 1 {
            -rho
        } else {
            0.0
        }
    })
}

/// Simulate the panel recursion y_t = ρ y_{t-1} + η_i + u_t from y_0 = 0.
pub fn simulate_dyn(
    n: usize,
    t: usize,
    rho_star: f64,
    sigma2_star: f64,
    effects: &[f64],
    errors: ErrorLaw,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    if !(sigma2_star > 0.0) {
        return Err(Error::Domain(format!(
            "sigma2 must be > 0, got {sigma2_star}"
        )));
    }
    if effects.len() != n || n == 0 || t == 0 {
        return Err(Error::Invalid("effects length must equal N >= 1, T >= 1".into()));
    }
    let sd = sigma2_star.sqrt();
    let mut y = Array2::<f64>::zeros((n, t));
    for i in 0..n {
        let mut prev = 0.0;
        for s in 0..t {
            let g: f64 = rng.sample(StandardNormal);
            let u = match errors {
                ErrorLaw::Normal => sd * g,
                ErrorLaw::CenteredChiSq => sd * (g * g - 1.0) / std::f64::consts::SQRT_2,
            };
            prev = rho_star * prev + effects[i] + u;
            y[(i, s)] = prev;
        }
    }
    Ok(y)
}

/// `W = Y'Y/N`.
pub fn wishart_stat_dyn(y: &Array2<f64>) -> Result<WStatDyn> {
    let (n, t) = y.dim();
    if n == 0 || t == 0 {
        return Err(Error::Invalid("need N >= 1 and T >= 1".into()));
    }
    let nf = n as f64;
    let w = SymMat::from_fn(t, |a, b| {
        (0..n).map(|i| y[(i, a)] * y[(i, b)]).sum::<f64>() / nf
    })?;
    Ok(WStatDyn { w, n, t })
}

// The six scalars of W that the objective and scores consume:
//   tw   = tr W            tjw  = Σ_t W[t,t+1]      tjwj = Σ_{t<T-1} W[t,t]
//   s1   = 1'W1            s2   = s'W1              s3   = s'Ws
// with s = J'1 = (1,..,1,0)'. Then with D = I - ρJ:
//   tr(DWD')  = tw - 2ρ tjw + ρ² tjwj      1'DWD'1  = s1 - 2ρ s2 + ρ² s3
//   tr(JWD')  = tjw - ρ tjwj               1'JWD'1  = s2 - ρ s3
struct SuffStats {
    tw: f64,
    tjw: f64,
    tjwj: f64,
    s1: f64,
    s2: f64,
    s3: f64,
    n: usize,
    t: usize,
}

impl SuffStats {
    fn new(ws: &WStatDyn) -> Self {
        let t = ws.t;
        let w = &ws.w;
        let tw = w.trace();
        let tjw: f64 = (0..t.saturating_sub(1)).map(|i| w.get(i, i + 1)).sum();
        let tjwj: f64 = (0..t.saturating_sub(1)).map(|i| w.get(i, i)).sum();
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for a in 0..t {
            for b in 0..t {
                let v = w.get(a, b);
                s1 += v;
                if a < t - 1 {
                    s2 += v;
                }
                if a < t - 1 && b < t - 1 {
                    s3 += v;
                }
            }
        }
        SuffStats { tw, tjw, tjwj, s1, s2, s3, n: ws.n, t }
    }

    fn tr_dwd(&self, rho: f64) -> f64 {
        self.tw - 2.0 * rho * self.tjw + rho * rho * self.tjwj
    }
    fn one_dwd_one(&self, rho: f64) -> f64 {
        self.s1 - 2.0 * rho * self.s2 + rho * rho * self.s3
    }
    fn tr_jwd(&self, rho: f64) -> f64 {
        self.tjw - rho * self.tjwj
    }
    fn one_jwd_one(&self, rho: f64) -> f64 {
        self.s2 - rho * self.s3
    }

    fn objective(&self, theta: &ThetaDyn) -> Result<f64> {
        let t = self.t as f64;
        let n = self.n as f64;
        let a = self.tr_dwd(theta.rho);
        let c = self.one_dwd_one(theta.rho);
        let tol = 1e-9 * (1.0 + self.tw.abs());
        if a < -tol || c < -tol {
            return Err(Error::Domain(
                "W is not positive semidefinite (negative quadratic form)".into(),
            ));
        }
        let nu = (n - 2.0) / 2.0;
        let z = 2.0 * ((theta.lambda * c.max(0.0)) / theta.sigma2).sqrt();
        Ok(-0.5 * theta.sigma2.ln() - a.max(0.0) / (2.0 * theta.sigma2 * t)
            - 0.5 * theta.lambda
            + scaled_bessel_term(nu, z, n)? / t)
    }

    fn score(&self, theta: &ThetaDyn, regime: DynScoreRegime) -> Result<Vec<f64>> {
        let t = self.t as f64;
        let n = self.n as f64;
        let (rho, s2p, lam) = (theta.rho, theta.sigma2, theta.lambda);
        let a = self.tr_dwd(rho).max(0.0);
        let c = self.one_dwd_one(rho).max(0.0);
        let a_jd = self.tr_jwd(rho);
        let c_jd = self.one_jwd_one(rho);
        let z2 = 4.0 * lam * c / s2p;
        match regime {
            DynScoreRegime::Exact => {
                let nu = (n - 2.0) / 2.0;
                if lam == 0.0 || c == 0.0 {
                    // series limit of the ratio term; only S_λ keeps a
                    // Bessel contribution
                    return Ok(vec![
                        a_jd / (s2p * t),
                        -0.5 / s2p + a / (2.0 * s2p * s2p * t),
                        -0.5 + n * c / (4.0 * (nu + 1.0) * s2p * t),
                    ]);
                }
                let z = z2.sqrt();
                let x = 0.5 * n * z;
                let r = if nu < 0.0 {
                    x.tanh() // N = 1: I_{1/2}/I_{-1/2}
                } else {
                    bessel_i_ratio(nu, x)?
                };
                let s_rho = a_jd / (s2p * t) - r * (lam / (s2p * c)).sqrt() * c_jd / t;
                let s_sig = -0.5 / s2p + a / (2.0 * s2p * s2p * t) - r * z / (4.0 * s2p * t);
                let s_lam = -0.5 + r * z / (4.0 * lam * t);
                Ok(vec![s_rho, s_sig, s_lam])
            }
            DynScoreRegime::LargeN => {
                let den = 1.0 + (1.0 + z2).sqrt();
                Ok(vec![
                    a_jd / (s2p * t) - 2.0 * lam * c_jd / (s2p * t * den),
                    -0.5 / s2p + a / (2.0 * s2p * s2p * t) - lam * c / (s2p * s2p * t * den),
                    -0.5 + c / (s2p * t * den),
                ])
            }
            DynScoreRegime::LargeT => {
                if c <= 0.0 || lam <= 0.0 {
                    return Err(Error::Domain(
                        "large-T score needs lambda > 0 and 1'DWD'1 > 0".into(),
                    ));
                }
                Ok(vec![
                    a_jd / (s2p * t) - (lam / s2p).sqrt() * c_jd / (t * c.sqrt()),
                    -0.5 / s2p + a / (2.0 * s2p * s2p * t)
                        - lam.sqrt() * c.sqrt() / (2.0 * s2p.powf(1.5) * t),
                    -0.5 + c.sqrt() / (2.0 * (s2p * lam).sqrt() * t),
                ])
            }
        }
    }
}

/// θ-dependent part of the invariant log-likelihood divided by NT.
pub fn loglik_dyn(ws: &WStatDyn, theta: &ThetaDyn) -> Result<f64> {
    SuffStats::new(ws).objective(theta)
}

/// Gradient of the chosen objective in (ρ, σ², λ).
pub fn score_dyn(ws: &WStatDyn, theta: &ThetaDyn, regime: DynScoreRegime) -> Result<Vec<f64>> {
    SuffStats::new(ws).score(theta, regime)
}

/// `E[W] = σ² B(ρ)(I + λ 1 1')B(ρ)'` at the given parameter point.
pub fn model_mean(theta: &ThetaDyn, t: usize) -> Result<SymMat> {
    let b = b_matrix(theta.rho, t);
    // B 1 is the vector of partial geometric sums
    let b1: Vec<f64> = (0..t).map(|i| (0..=i).map(|j| b[(i, j)]).sum()).collect();
    SymMat::from_fn(t, |i, j| {
        let bbt: f64 = (0..=i.min(j)).map(|k| b[(i, k)] * b[(j, k)]).sum();
        theta.sigma2 * (bbt + theta.lambda * b1[i] * b1[j])
    })
}

/// First-moment distance `vech(W - σ² B(I + λ11')B')`, length T(T+1)/2.
pub fn moment_dyn(ws: &WStatDyn, theta: &ThetaDyn) -> Result<Vec<f64>> {
    let mean = model_mean(theta, ws.t)?;
    let wv = vech(&ws.w);
    let mv = vech(&mean);
    Ok(wv.iter().zip(&mv).map(|(a, b)| a - b).collect())
}

// Within-OLS moments expressed through the W scalars; used for start values.
// Returns (rho0, sigma2_0_raw, s1/T-adjusted residual variance basis).
fn within_start(stats: &SuffStats) -> (f64, f64) {
    let t = stats.t as f64;
    let num = stats.tjw - stats.s2 / t;
    let den = stats.tjwj - stats.s3 / t;
    let rho0 = if den.abs() > 1e-12 * (1.0 + stats.tw.abs()) {
        (num / den).clamp(RHO_MIN, RHO_MAX)
    } else {
        0.0
    };
    let cc = stats.tw - stats.s1 / t;
    let sigma2_0 = (cc - 2.0 * rho0 * num + rho0 * rho0 * den) / t;
    (rho0, sigma2_0)
}

/// Maximum invariant likelihood estimate over (ρ, σ², λ), multistarted from
/// within-OLS moments.
pub fn mile_dyn(ws: &WStatDyn) -> Result<EstimateReport> {
    if ws.t < 2 {
        return Err(Error::Invalid("estimation needs T >= 2".into()));
    }
    let stats = SuffStats::new(ws);
    let (rho0, sigma2_0_raw) = within_start(&stats);
    if sigma2_0_raw <= 1e-12 * (1.0 + stats.tw.abs()) {
        return Err(Error::Estimation(
            "degenerate data: no residual variation around the AR recursion".into(),
        ));
    }
    let sigma2_0 = sigma2_0_raw.clamp(SIGMA2_MIN, SIGMA2_MAX);
    // moment start for λ from the (1,1) component: E W₁₁ = σ²(1 + λ)
    let lambda0 = (ws.w.get(0, 0) / sigma2_0 - 1.0).clamp(0.0, LAMBDA_MAX);

    let objective = |v: &[f64]| {
        ThetaDyn::new(v[0], v[1], v[2].max(0.0))
            .and_then(|th| stats.objective(&th))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let gradient = |v: &[f64]| {
        ThetaDyn::new(v[0], v[1], v[2].max(0.0))
            .and_then(|th| stats.score(&th, DynScoreRegime::Exact))
            .unwrap_or_else(|_| vec![0.0, 0.0, 0.0])
    };
    let mut spec = OptimizerSpec::multistart(
        vec![rho0, sigma2_0, lambda0],
        vec![
            (RHO_MIN, RHO_MAX),
            (SIGMA2_MIN, SIGMA2_MAX),
            (0.0, LAMBDA_MAX),
        ],
    );
    spec.grad_tol = 1e-9;
    spec.max_iter = 600;
    let opt = maximize(objective, Some(gradient), &spec)
        .map_err(|e| Error::Estimation(format!("dynamic panel likelihood search failed: {e}")))?;

    let std_errors = match ThetaDyn::new(opt.argmax[0], opt.argmax[1], opt.argmax[2]) {
        Ok(th) if th.lambda > 0.0 => info_t(th.rho, th.sigma2, th.lambda, ws.t)
            .and_then(|i| i.inverse())
            .ok()
            .map(|inv| {
                let nt = (ws.n * ws.t) as f64;
                (0..3).map(|j| (inv.get(j, j) / nt).sqrt()).collect()
            }),
        _ => None,
    };

    Ok(EstimateReport {
        model: "dyn".into(),
        names: vec!["rho".into(), "sigma2".into(), "lambda".into()],
        estimates: opt.argmax.clone(),
        objective: opt.value,
        converged: opt.converged,
        at_boundary: opt.at_boundary,
        std_errors,
        iterations: opt.iterations,
    })
}

/// Convenience: estimate from the raw outcome matrix.
pub fn mile_dyn_from_y(y: &Array2<f64>) -> Result<EstimateReport> {
    mile_dyn(&wishart_stat_dyn(y)?)
}

pub use crate::iv_model::InfoMatrix;

// F = J B(ρ*) sums: tr(FF'), 1'F1 and |F1|² (= |F'1|² for this F). Row s of
// F holds ρ^0..ρ^{s-1}, so the row sums satisfy one-step recurrences and the
// whole thing is O(T).
fn f_sums(rho: f64, t: usize) -> (f64, f64, f64) {
    let mut tr_ff = 0.0;
    let mut one_f_one = 0.0;
    let mut f1_sq = 0.0;
    let mut row_sum = 0.0; // Σ_u ρ^u over the current row
    let mut row_sq = 0.0; // Σ_u ρ^{2u}
    for _s in 1..t {
        row_sum = rho * row_sum + 1.0;
        row_sq = rho * rho * row_sq + 1.0;
        tr_ff += row_sq;
        one_f_one += row_sum;
        f1_sq += row_sum * row_sum;
    }
    (tr_ff, one_f_one, f1_sq)
}

/// Fixed-T information matrix for (ρ, σ², λ) at the true point: the limit of
/// the negative likelihood Hessian as N → ∞ with T fixed. Singular at T = 1
/// (ρ is unidentified from one period).
pub fn info_t(rho_star: f64, sigma2_star: f64, lambda_star: f64, t: usize) -> Result<InfoMatrix> {
    if !(lambda_star > 0.0) {
        return Err(Error::Domain("information requires lambda > 0".into()));
    }
    if !(sigma2_star > 0.0) {
        return Err(Error::Domain("information requires sigma2 > 0".into()));
    }
    if t == 0 {
        return Err(Error::Domain("T must be >= 1".into()));
    }
    let tf = t as f64;
    let (tr_ff, one_f_one, f1_sq) = f_sums(rho_star, t);
    let lam = lambda_star;
    let s2 = sigma2_star;
    let d = 1.0 + 2.0 * lam * tf;

    let h1 = tr_ff / tf + lam * f1_sq / tf;
    let h2 = 2.0 * lam * lam * one_f_one * one_f_one / (d * tf);
    let h3 = -(lam / (1.0 + lam * tf)) * (f1_sq / tf + lam * one_f_one * one_f_one / tf);

    let mut m = SymMat::zeros(3)?;
    m.set(0, 0, h1 + h2 + h3);
    m.set(1, 0, lam * lam * one_f_one / (s2 * d));
    m.set(2, 0, (1.0 + lam * tf) / d * one_f_one / tf);
    m.set(1, 1, 0.5 / (s2 * s2) + lam * lam * tf / (2.0 * s2 * s2 * d));
    m.set(2, 1, (1.0 + lam * tf) / (2.0 * s2 * d));
    m.set(2, 2, tf / (2.0 * d));
    Ok(InfoMatrix {
        labels: vec!["rho", "sigma2", "lambda"],
        mat: m,
    })
}

/// Large-T limit of [`info_t`]; requires |ρ*| < 1. Its inverse has
/// (1 - ρ*²) in the (1,1) coordinate.
pub fn info_inf(rho_star: f64, sigma2_star: f64, lambda_star: f64) -> Result<InfoMatrix> {
    if !(rho_star.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "|rho| must be < 1 for the large-T limit, got {rho_star}"
        )));
    }
    if !(lambda_star > 0.0) || !(sigma2_star > 0.0) {
        return Err(Error::Domain("information requires lambda > 0, sigma2 > 0".into()));
    }
    let lam = lambda_star;
    let s2 = sigma2_star;
    let r = rho_star;
    let mut m = SymMat::zeros(3)?;
    m.set(0, 0, 1.0 / (1.0 - r * r) + lam / ((1.0 - r) * (1.0 - r)));
    m.set(1, 0, lam / (2.0 * s2 * (1.0 - r)));
    m.set(2, 0, 1.0 / (2.0 * (1.0 - r)));
    m.set(1, 1, (2.0 + lam) / (4.0 * s2 * s2));
    m.set(2, 1, 1.0 / (4.0 * s2));
    m.set(2, 2, 1.0 / (4.0 * lam));
    Ok(InfoMatrix {
        labels: vec!["rho", "sigma2", "lambda"],
        mat: m,
    })
}

// Full Wishart log-density of W for N ≥ T (test oracle support): includes
// the normalizing constant and the |W| term dropped from the working
// objective.
#[doc(hidden)]
pub fn full_log_density_dyn(ws: &WStatDyn, theta: &ThetaDyn) -> Result<f64> {
    let n = ws.n as f64;
    let t = ws.t as f64;
    if ws.n < ws.t {
        return Err(Error::Domain("full density requires N >= T".into()));
    }
    let stats = SuffStats::new(ws);
    let a = stats.tr_dwd(theta.rho).max(0.0);
    let c = stats.one_dwd_one(theta.rho).max(0.0);
    let nu = (n - 2.0) / 2.0;
    let mut log_c2 = -((0.5 * n * t - nu) * std::f64::consts::LN_2
        + 0.25 * t * (t - 1.0) * std::f64::consts::PI.ln());
    for i in 1..ws.t {
        log_c2 -= log_gamma((n - i as f64) / 2.0)?;
    }
    let arg = n * (theta.lambda * c / theta.sigma2).sqrt();
    let bessel = if arg == 0.0 {
        -nu * std::f64::consts::LN_2 - log_gamma(nu + 1.0)?
    } else {
        -nu * arg.ln() + log_bessel_i(nu, arg)?
    };
    Ok(log_c2 - 0.5 * n * t * theta.sigma2.ln() + 0.5 * (n - t - 1.0) * ws.w.log_det_spd()?
        - 0.5 * n * a / theta.sigma2
        - 0.5 * n * t * theta.lambda
        + bessel
        + 0.5 * n * t * n.ln())
}
