//! Invariant likelihood for the simultaneous-equations IV model with known
//! reduced-form error covariance.
//!
//! Orthogonal transformations of the instrument block leave the model
//! invariant; the usable statistic is the scaled cross product
//! `W = Y' P_Z Y / N`, noncentral-Wishart distributed with one-dimensional
//! noncentrality λ = η'η/N. Only the θ-dependent part of its log density is
//! kept:
//!
//! `Q(β, λ) = -½ λ a'Σ⁻¹a + (1/N) ln( Z^{-ν} I_ν(N Z / 2) )`,
//!
//! with a = (β, 1)', ν = (K-2)/2 and Z = 2√(λ · a'Σ⁻¹WΣ⁻¹a). The maximizer
//! in β is the LIMLK top-eigenvector solution, which [`limlk`] computes
//! directly and [`mile_iv`] reproduces from the likelihood itself.

use crate::numkern::{
    bessel_i_ratio, log_gamma, maximize, scaled_bessel_term, sym_eig, vech, OptimizerSpec, SymMat,
};
use crate::report::EstimateReport;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

pub const BETA_BOUND: f64 = 50.0;
pub const LAMBDA_MAX: f64 = 1e3;

/// Observed IV data: outcome, endogenous regressor, instruments, and the
/// known 2×2 reduced-form error covariance.
#[derive(Debug, Clone)]
pub struct IVData {
    pub y1: Array1<f64>,
    pub y2: Array1<f64>,
    pub z: Array2<f64>,
    pub sigma: SymMat,
}

impl IVData {
    pub fn new(y1: Array1<f64>, y2: Array1<f64>, z: Array2<f64>, sigma: SymMat) -> Result<Self> {
        let n = y1.len();
        let (zn, k) = z.dim();
        if y2.len() != n || zn != n {
            return Err(Error::Invalid("y1, y2 and Z row counts disagree".into()));
        }
        if k == 0 || n <= k {
            return Err(Error::Invalid(format!(
                "need N > K >= 1, got N={n}, K={k}"
            )));
        }
        if sigma.dim() != 2 {
            return Err(Error::Invalid("Sigma must be 2x2".into()));
        }
        sigma.cholesky().map_err(|_| {
            Error::Invalid("Sigma must be positive definite".into())
        })?;
        Ok(Self { y1, y2, z, sigma })
    }
}

/// The projected cross-product statistic `W = Y' P_Z Y / N` with its
/// reduction metadata.
#[derive(Debug, Clone)]
pub struct WStatIV {
    pub w: SymMat,
    pub k: usize,
    pub n: usize,
}

/// Maximal-invariant parameter point (β, λ).
#[derive(Debug, Clone, Copy)]
pub struct ThetaIV {
    pub beta: f64,
    pub lambda: f64,
}

impl ThetaIV {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { beta, lambda })
    }
}

/// Score regimes: the exact Bessel-ratio gradient of the invariant
/// likelihood, the strong-instrument closed form (needs λ > 0), and the
/// many-weak-instrument form with concentration parameter α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IvScoreRegime {
    Exact,
    Siv,
    Mwiv(f64),
}

/// `W = Y'Z(Z'Z)⁻¹Z'Y / N` via a thin orthogonal factorization of Z; the
/// N×N projector is never formed.
pub fn wishart_stat_iv(data: &IVData) -> Result<WStatIV> {
    let (n, k) = data.z.dim();
    let q = thin_orthonormal(&data.z)?;
    // C = Q'Y, a K×2 matrix; W = C'C / N
    let mut c = vec![[0.0f64; 2]; k];
    for j in 0..k {
        let mut c1 = 0.0;
        let mut c2 = 0.0;
        for i in 0..n {
            c1 += q[(i, j)] * data.y1[i];
            c2 += q[(i, j)] * data.y2[i];
        }
        c[j] = [c1, c2];
    }
    let nf = n as f64;
    let w = SymMat::from_fn(2, |a, b| {
        c.iter().map(|row| row[a] * row[b]).sum::<f64>() / nf
    })?;
    Ok(WStatIV { w, k, n })
}

// Modified Gram-Schmidt with one reorthogonalization pass; errors out on
// rank deficiency.
fn thin_orthonormal(z: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, k) = z.dim();
    let mut q = z.clone();
    for j in 0..k {
        for _pass in 0..2 {
            for p in 0..j {
                let dot: f64 = (0..n).map(|i| q[(i, p)] * q[(i, j)]).sum();
                for i in 0..n {
                    q[(i, j)] -= dot * q[(i, p)];
                }
            }
        }
        let norm: f64 = (0..n).map(|i| q[(i, j)] * q[(i, j)]).sum::<f64>().sqrt();
        let col_norm: f64 = (0..n).map(|i| z[(i, j)] * z[(i, j)]).sum::<f64>().sqrt();
        if norm <= 1e-12 * col_norm.max(1.0) {
            return Err(Error::Domain(format!(
                "instrument matrix is rank deficient at column {j}"
            )));
        }
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    Ok(q)
}

// Quadratic forms the likelihood needs, all through u = Σ⁻¹a and e = Σ⁻¹e₁.
struct IvForms {
    qa: f64,  // a'Σ⁻¹a
    qae: f64, // a'Σ⁻¹e₁
    qee: f64, // e₁'Σ⁻¹e₁
    g: f64,   // a'Σ⁻¹WΣ⁻¹a
    ge: f64,  // a'Σ⁻¹WΣ⁻¹e₁
}

fn sigma_inv(sigma: &SymMat) -> Result<[[f64; 2]; 2]> {
    let det = sigma.get(0, 0) * sigma.get(1, 1) - sigma.get(0, 1) * sigma.get(0, 1);
    if det <= 0.0 {
        return Err(Error::Domain("Sigma is not positive definite".into()));
    }
    Ok([
        [sigma.get(1, 1) / det, -sigma.get(0, 1) / det],
        [-sigma.get(0, 1) / det, sigma.get(0, 0) / det],
    ])
}

fn iv_forms(w: &SymMat, beta: f64, sigma: &SymMat) -> Result<IvForms> {
    let si = sigma_inv(sigma)?;
    let a = [beta, 1.0];
    let u = [si[0][0] * a[0] + si[0][1] * a[1], si[1][0] * a[0] + si[1][1] * a[1]];
    let e = [si[0][0], si[1][0]];
    let wu = [
        w.get(0, 0) * u[0] + w.get(0, 1) * u[1],
        w.get(1, 0) * u[0] + w.get(1, 1) * u[1],
    ];
    Ok(IvForms {
        qa: a[0] * u[0] + a[1] * u[1],
        qae: u[0],
        qee: si[0][0],
        // W is PSD; clamp rounding noise so √ stays real
        g: (u[0] * wu[0] + u[1] * wu[1]).max(0.0),
        ge: e[0] * wu[0] + e[1] * wu[1],
    })
}

/// θ-dependent part of the invariant log-likelihood divided by N. Finite for
/// all λ ≥ 0, including λ = 0.
pub fn loglik_iv(wstat: &WStatIV, theta: &ThetaIV, sigma: &SymMat) -> Result<f64> {
    if theta.lambda < 0.0 {
        return Err(Error::Domain("lambda must be >= 0".into()));
    }
    let f = iv_forms(&wstat.w, theta.beta, sigma)?;
    let nu = (wstat.k as f64 - 2.0) / 2.0;
    let z = 2.0 * (theta.lambda * f.g).sqrt();
    Ok(-0.5 * theta.lambda * f.qa + scaled_bessel_term(nu, z, wstat.n as f64)?)
}

/// Gradient of the chosen objective in (β, λ).
pub fn score_iv(
    wstat: &WStatIV,
    theta: &ThetaIV,
    sigma: &SymMat,
    regime: IvScoreRegime,
) -> Result<Vec<f64>> {
    let f = iv_forms(&wstat.w, theta.beta, sigma)?;
    let (lam, n) = (theta.lambda, wstat.n as f64);
    let nu = (wstat.k as f64 - 2.0) / 2.0;
    match regime {
        IvScoreRegime::Exact => {
            if lam == 0.0 || f.g == 0.0 {
                // removable singularity: series limit of the ratio term
                let s_beta = -lam * f.qae
                    + if lam == 0.0 { 0.0 } else { n * lam * f.ge / (2.0 * (nu + 1.0)) };
                let s_lambda = -0.5 * f.qa + n * f.g / (4.0 * (nu + 1.0));
                return Ok(vec![s_beta, s_lambda]);
            }
            let z = 2.0 * (lam * f.g).sqrt();
            let r = bessel_i_ratio(nu.max(0.0), 0.5 * n * z)?;
            // K = 1 gives ν = -1/2 where I_{1/2}/I_{-1/2} = tanh
            let r = if nu < 0.0 { (0.5 * n * z).tanh() } else { r };
            let s_beta = -lam * f.qae + r * lam.sqrt() * f.ge / f.g.sqrt();
            let s_lambda = -0.5 * f.qa + 0.5 * r * (f.g / lam).sqrt();
            Ok(vec![s_beta, s_lambda])
        }
        IvScoreRegime::Siv => {
            if lam <= 0.0 {
                return Err(Error::Domain(
                    "strong-instrument score divides by sqrt(lambda); need lambda > 0".into(),
                ));
            }
            let s_beta = -lam * f.qae + lam.sqrt() * f.ge / f.g.sqrt();
            let s_lambda = -0.5 * f.qa + 0.5 * (f.g / lam).sqrt();
            Ok(vec![s_beta, s_lambda])
        }
        IvScoreRegime::Mwiv(alpha) => {
            if !(alpha > 0.0) {
                return Err(Error::Domain("mwiv regime needs alpha > 0".into()));
            }
            let z2 = 4.0 * lam * f.g;
            let den = alpha * (1.0 + (1.0 + z2 / (alpha * alpha)).sqrt());
            let s_beta = -lam * f.qae + 2.0 * lam * f.ge / den;
            let s_lambda = -0.5 * f.qa + f.g / den;
            Ok(vec![s_beta, s_lambda])
        }
    }
}

/// LIMLK point estimate of β: top eigenvector of Σ^{-1/2} W Σ^{-1/2}, mapped
/// back through Σ^{1/2} and normalized to a = (β, 1)'.
pub fn limlk(wstat: &WStatIV, sigma: &SymMat) -> Result<f64> {
    let (shalf, shalf_inv) = sqrt_2x2(sigma)?;
    let sw = SymMat::from_fn(2, |i, j| {
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                acc += shalf_inv[i][p] * wstat.w.get(p, q) * shalf_inv[q][j];
            }
        }
        acc
    })?;
    let (vals, vecs) = sym_eig(&sw);
    let gap = vals[0] - vals[1];
    if gap <= 1e-12 * sw.trace().abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Ties(format!(
            "top eigenvalue is not simple (gap {gap:.3e})"
        )));
    }
    let v = [vecs[(0, 0)], vecs[(1, 0)]];
    let a = [
        shalf[0][0] * v[0] + shalf[0][1] * v[1],
        shalf[1][0] * v[0] + shalf[1][1] * v[1],
    ];
    if a[1].abs() < 1e-12 * (a[0].abs() + a[1].abs()) {
        return Err(Error::Estimation(
            "LIMLK direction has zero second coordinate; beta is unbounded".into(),
        ));
    }
    Ok(a[0] / a[1])
}

// Symmetric square root and inverse square root of a 2×2 SPD matrix.
fn sqrt_2x2(sigma: &SymMat) -> Result<([[f64; 2]; 2], [[f64; 2]; 2])> {
    let (vals, vecs) = sym_eig(sigma);
    if vals[1] <= 0.0 {
        return Err(Error::Domain("Sigma is not positive definite".into()));
    }
    let build = |f: fn(f64) -> f64, vals: &[f64], vecs: &Array2<f64>| {
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = (0..2).map(|k| vecs[(i, k)] * f(vals[k]) * vecs[(j, k)]).sum();
            }
        }
        m
    };
    Ok((
        build(f64::sqrt, &vals, &vecs),
        build(|v| 1.0 / v.sqrt(), &vals, &vecs),
    ))
}

/// Maximum invariant likelihood estimate over (β, λ), started from the LIMLK
/// β and the first-moment λ.
pub fn mile_iv(wstat: &WStatIV, sigma: &SymMat) -> Result<EstimateReport> {
    let beta0 = limlk(wstat, sigma).unwrap_or(0.0);
    let f0 = iv_forms(&wstat.w, beta0, sigma)?;
    // E W = λ a a' + (K/N) Σ solved for λ at the start β
    let lambda0 = (f0.g / (f0.qa * f0.qa) - wstat.k as f64 / (wstat.n as f64 * f0.qa)).max(0.0);

    let objective = |v: &[f64]| {
        ThetaIV::new(v[0], v[1])
            .and_then(|th| loglik_iv(wstat, &th, sigma))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let gradient = |v: &[f64]| {
        ThetaIV::new(v[0], v[1].max(0.0))
            .and_then(|th| score_iv(wstat, &th, sigma, IvScoreRegime::Exact))
            .unwrap_or_else(|_| vec![0.0, 0.0])
    };
    let mut spec = OptimizerSpec::multistart(
        vec![beta0, lambda0],
        vec![(-BETA_BOUND, BETA_BOUND), (0.0, LAMBDA_MAX)],
    );
    spec.grad_tol = 1e-10;
    spec.max_iter = 600;
    let opt = maximize(objective, Some(gradient), &spec)
        .map_err(|e| Error::Estimation(format!("IV likelihood search failed: {e}")))?;

    let std_errors = match ThetaIV::new(opt.argmax[0], opt.argmax[1]) {
        Ok(th) if th.lambda > 0.0 => {
            let alpha = wstat.k as f64 / wstat.n as f64;
            info_iv(&th, sigma, alpha)
                .and_then(|i| i.inverse())
                .ok()
                .map(|inv| {
                    vec![
                        (inv.get(0, 0) / wstat.n as f64).sqrt(),
                        (inv.get(1, 1) / wstat.n as f64).sqrt(),
                    ]
                })
        }
        _ => None,
    };

    Ok(EstimateReport {
        model: "iv".into(),
        names: vec!["beta".into(), "lambda".into()],
        estimates: opt.argmax.clone(),
        objective: opt.value,
        converged: opt.converged,
        at_boundary: opt.at_boundary,
        std_errors,
        iterations: opt.iterations,
    })
}

/// Labeled symmetric information matrix.
#[derive(Debug, Clone)]
pub struct InfoMatrix {
    pub labels: Vec<&'static str>,
    pub mat: SymMat,
}

impl InfoMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }
    pub fn inverse(&self) -> Result<SymMat> {
        self.mat.inverse_spd()
    }
}

/// Limiting information for (β, λ): α = 0 is the strong-instrument case,
/// α > 0 the many-weak-instrument case with K/N → α.
pub fn info_iv(theta_star: &ThetaIV, sigma: &SymMat, alpha: f64) -> Result<InfoMatrix> {
    if !(theta_star.lambda > 0.0) {
        return Err(Error::Domain("information requires lambda > 0".into()));
    }
    if alpha < 0.0 {
        return Err(Error::Domain("alpha must be >= 0".into()));
    }
    let f = iv_forms(&SymMat::zeros(2)?, theta_star.beta, sigma)?;
    let (qa, qae, qee) = (f.qa, f.qae, f.qee);
    let lam = theta_star.lambda;
    let d1 = alpha + lam * qa;
    let d2 = alpha + 2.0 * lam * qa;
    let i_bb = lam * lam * (qa * qee * d2 + alpha * qae * qae) / (d1 * d2);
    let i_bl = lam * qae * qa / d2;
    let i_ll = qa * qa / (2.0 * d2);
    let mut mat = SymMat::zeros(2)?;
    mat.set(0, 0, i_bb);
    mat.set(1, 0, i_bl);
    mat.set(1, 1, i_ll);
    Ok(InfoMatrix {
        labels: vec!["beta", "lambda"],
        mat,
    })
}

/// Closed-form asymptotic variance of √N(β̂ - β*): (σ_u²/λ*²)(λ* + α/a'Σ⁻¹a)
/// with σ_u² = b'Σb, b = (1, -β*)'.
pub fn asyvar_limlk(theta_star: &ThetaIV, sigma: &SymMat, alpha: f64) -> Result<f64> {
    if !(theta_star.lambda > 0.0) {
        return Err(Error::Domain("asymptotic variance requires lambda > 0".into()));
    }
    if alpha < 0.0 {
        return Err(Error::Domain("alpha must be >= 0".into()));
    }
    let b = [1.0, -theta_star.beta];
    let sigma_u2 = b[0] * b[0] * sigma.get(0, 0)
        + 2.0 * b[0] * b[1] * sigma.get(0, 1)
        + b[1] * b[1] * sigma.get(1, 1);
    let f = iv_forms(&SymMat::zeros(2)?, theta_star.beta, sigma)?;
    let lam = theta_star.lambda;
    Ok(sigma_u2 / (lam * lam) * (lam + alpha / f.qa))
}

/// First-moment distance `vech(W) - vech(λ a a' + (K/N) Σ)`; zero in
/// expectation iff θ is the truth (for λ* > 0).
pub fn md_moment_iv(wstat: &WStatIV, theta: &ThetaIV, sigma: &SymMat) -> Result<Vec<f64>> {
    let a = [theta.beta, 1.0];
    let kn = wstat.k as f64 / wstat.n as f64;
    let model = SymMat::from_fn(2, |i, j| theta.lambda * a[i] * a[j] + kn * sigma.get(i, j))?;
    let wv = vech(&wstat.w);
    let mv = vech(&model);
    Ok(wv.iter().zip(&mv).map(|(a, b)| a - b).collect())
}

/// Simulate the canonical-form statistic directly: `R₁ = η a' + V` with
/// `η'η/N = λ*` and V rows iid N(0, Σ); returns `W = R₁'R₁ / N`.
pub fn simulate_wstat_iv(
    beta_star: f64,
    lambda_star: f64,
    sigma: &SymMat,
    n: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<WStatIV> {
    if k == 0 || n == 0 {
        return Err(Error::Invalid("need N >= 1, K >= 1".into()));
    }
    let chol = sigma.cholesky()?;
    let a = [beta_star, 1.0];
    let eta = (lambda_star * n as f64 / k as f64).sqrt();
    let mut r1 = vec![[0.0f64; 2]; k];
    for row in r1.iter_mut() {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let v = [chol[(0, 0)] * g1, chol[(1, 0)] * g1 + chol[(1, 1)] * g2];
        row[0] = eta * a[0] + v[0];
        row[1] = eta * a[1] + v[1];
    }
    let nf = n as f64;
    let w = SymMat::from_fn(2, |i, j| {
        r1.iter().map(|r| r[i] * r[j]).sum::<f64>() / nf
    })?;
    Ok(WStatIV { w, k, n })
}

/// Full-data simulation `y₂ = Zπ + v₂`, `y₁ = y₂β + u`, with π scaled so
/// that `π'Z'Zπ/N = λ*`.
pub fn simulate_iv_data(
    beta_star: f64,
    lambda_star: f64,
    sigma: &SymMat,
    n: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<IVData> {
    let mut z = Array2::<f64>::zeros((n, k));
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    // scale a constant-direction π so the concentration is exactly λ*
    let pi_dir = vec![1.0 / (k as f64).sqrt(); k];
    let mut zp = vec![0.0; n];
    for i in 0..n {
        zp[i] = (0..k).map(|j| z[(i, j)] * pi_dir[j]).sum();
    }
    let ss: f64 = zp.iter().map(|v| v * v).sum();
    let scale = (lambda_star * n as f64 / ss).sqrt();
    let chol = sigma.cholesky()?;
    let mut y1 = Array1::<f64>::zeros(n);
    let mut y2 = Array1::<f64>::zeros(n);
    for i in 0..n {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let v1 = chol[(0, 0)] * g1;
        let v2 = chol[(1, 0)] * g1 + chol[(1, 1)] * g2;
        let zpi = scale * zp[i];
        // reduced form: Y = Zπ a' + V
        y1[i] = zpi * beta_star + v1;
        y2[i] = zpi + v2;
    }
    IVData::new(y1, y2, z, sigma.clone())
}

// Full Wishart log-density of W (test oracle support): includes the
// normalizing constant and the |w| term dropped from the working objective.
#[doc(hidden)]
pub fn full_log_density_iv(wstat: &WStatIV, theta: &ThetaIV, sigma: &SymMat) -> Result<f64> {
    let k = wstat.k as f64;
    let n = wstat.n as f64;
    let f = iv_forms(&wstat.w, theta.beta, sigma)?;
    let det_w = wstat.w.get(0, 0) * wstat.w.get(1, 1) - wstat.w.get(0, 1) * wstat.w.get(0, 1);
    let det_s = sigma.get(0, 0) * sigma.get(1, 1) - sigma.get(0, 1) * sigma.get(0, 1);
    let tr = sigma_inv(sigma)?
        .iter()
        .enumerate()
        .map(|(i, row)| row[0] * wstat.w.get(0, i) + row[1] * wstat.w.get(1, i))
        .sum::<f64>();
    let log_c = -((k + 2.0) / 2.0 * std::f64::consts::LN_2
        + 0.5 * std::f64::consts::PI.ln()
        + log_gamma((k - 1.0) / 2.0)?);
    let arg = n * (theta.lambda * f.g).sqrt();
    let bessel = if arg == 0.0 {
        // z^{-ν}I_ν(z) -> 2^{-ν}/Γ(ν+1) as z -> 0
        -((k - 2.0) / 2.0) * std::f64::consts::LN_2 - log_gamma(k / 2.0)?
    } else {
        -arg.ln() * ((k - 2.0) / 2.0) + crate::numkern::log_bessel_i((k - 2.0) / 2.0, arg)?
    };
    Ok(log_c + k * n.ln() - 0.5 * n * theta.lambda * f.qa - 0.5 * k * det_s.ln()
        + 0.5 * (k - 3.0) * det_w.ln()
        - 0.5 * n * tr
        + bessel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn eye2() -> SymMat {
        SymMat::from_fn(2, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap()
    }

    fn sigma_generic() -> SymMat {
        SymMat::from_fn(2, |i, j| if i == j { [1.4, 0.8][i] } else { 0.3 }).unwrap()
    }

    #[test]
    fn wishart_stat_projection_identities() {
        // orthonormal Z and Y in col(Z): W = C'C/N
        let n = 12;
        let k = 3;
        let mut z = Array2::<f64>::zeros((n, k));
        for j in 0..k {
            z[(4 * j, j)] = 1.0; // disjoint unit columns are orthonormal
        }
        let coef = [[1.0, 2.0], [-0.5, 0.7], [0.3, -0.2]];
        let mut y1 = Array1::<f64>::zeros(n);
        let mut y2 = Array1::<f64>::zeros(n);
        for j in 0..k {
            y1[4 * j] = coef[j][0];
            y2[4 * j] = coef[j][1];
        }
        let data = IVData::new(y1, y2, z, eye2()).unwrap();
        let ws = wishart_stat_iv(&data).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let want: f64 =
                    coef.iter().map(|r| r[a] * r[b]).sum::<f64>() / n as f64;
                assert!((ws.w.get(a, b) - want).abs() < 1e-12);
            }
        }

        // Y orthogonal to col(Z): W = 0
        let mut z = Array2::<f64>::zeros((6, 2));
        z[(0, 0)] = 1.0;
        z[(1, 1)] = 1.0;
        let mut y1 = Array1::<f64>::zeros(6);
        let mut y2 = Array1::<f64>::zeros(6);
        y1[3] = 2.0;
        y2[4] = -1.0;
        let data = IVData::new(y1, y2, z, eye2()).unwrap();
        let ws = wishart_stat_iv(&data).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!(ws.w.get(a, b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn wishart_stat_matches_explicit_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let k = 5;
        let sigma = sigma_generic();
        let data = simulate_iv_data(0.7, 1.3, &sigma, n, k, &mut rng).unwrap();
        let ws = wishart_stat_iv(&data).unwrap();

        // oracle: P = Z (Z'Z)^{-1} Z' formed densely
        let z = &data.z;
        let ztz = SymMat::from_fn(k, |a, b| (0..n).map(|i| z[(i, a)] * z[(i, b)]).sum()).unwrap();
        let inv = ztz.inverse_spd().unwrap();
        let mut p = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        acc += z[(i, a)] * inv.get(a, b) * z[(j, b)];
                    }
                }
                p[(i, j)] = acc;
            }
        }
        let ys = [&data.y1, &data.y2];
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += ys[a][i] * p[(i, j)] * ys[b][j];
                    }
                }
                let want = acc / n as f64;
                assert!(
                    (ws.w.get(a, b) - want).abs() < 1e-10 * want.abs().max(1.0),
                    "({a},{b})"
                );
            }
        }
    }

    #[test]
    fn instrument_rotation_leaves_w_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 60;
        let k = 4;
        let data = simulate_iv_data(0.5, 1.0, &eye2(), n, k, &mut rng).unwrap();
        let ws = wishart_stat_iv(&data).unwrap();

        // random orthogonal Q from Gram-Schmidt on a Gaussian matrix
        let mut gauss = Array2::<f64>::zeros((k, k));
        for v in gauss.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let q = thin_orthonormal(&gauss).unwrap();
        let mut zq = Array2::<f64>::zeros((n, k));
        for i in 0..n {
            for j in 0..k {
                zq[(i, j)] = (0..k).map(|p| data.z[(i, p)] * q[(p, j)]).sum();
            }
        }
        let rotated = IVData::new(data.y1.clone(), data.y2.clone(), zq, eye2()).unwrap();
        let wr = wishart_stat_iv(&rotated).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!(
                    (ws.w.get(a, b) - wr.w.get(a, b)).abs() <= 1e-12 * ws.w.get(a, b).abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn loglik_constant_in_beta_at_lambda_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ws = simulate_wstat_iv(0.4, 1.0, &eye2(), 200, 5, &mut rng).unwrap();
        let v0 = loglik_iv(&ws, &ThetaIV::new(-3.0, 0.0).unwrap(), &eye2()).unwrap();
        let v1 = loglik_iv(&ws, &ThetaIV::new(2.0, 0.0).unwrap(), &eye2()).unwrap();
        assert_eq!(v0, v1);
        assert!(v0.is_finite());
    }

    #[test]
    fn loglik_differences_match_full_density() {
        // the dropped terms are θ-free: Q(θ1) - Q(θ2) = (ln g(θ1) - ln g(θ2))/N
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = sigma_generic();
        let ws = simulate_wstat_iv(0.6, 1.1, &sigma, 40, 5, &mut rng).unwrap();
        let t1 = ThetaIV::new(0.3, 0.8).unwrap();
        let t2 = ThetaIV::new(-0.9, 2.0).unwrap();
        let lhs = loglik_iv(&ws, &t1, &sigma).unwrap() - loglik_iv(&ws, &t2, &sigma).unwrap();
        let rhs = (full_log_density_iv(&ws, &t1, &sigma).unwrap()
            - full_log_density_iv(&ws, &t2, &sigma).unwrap())
            / 40.0;
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn score_zero_at_mean_w_in_mwiv_regime() {
        // W = λ* a a' + (K/N)Σ is the first moment; the MWIV score with
        // α = K/N vanishes there exactly.
        let sigma = sigma_generic();
        let (beta, lam) = (0.7, 1.3);
        let (n, k) = (500usize, 100usize);
        let a = [beta, 1.0];
        let kn = k as f64 / n as f64;
        let w = SymMat::from_fn(2, |i, j| lam * a[i] * a[j] + kn * sigma.get(i, j)).unwrap();
        let ws = WStatIV { w, k, n };
        let s = score_iv(
            &ws,
            &ThetaIV::new(beta, lam).unwrap(),
            &sigma,
            IvScoreRegime::Mwiv(kn),
        )
        .unwrap();
        assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn exact_score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sigma = sigma_generic();
        for trial in 0..20 {
            let k = 3 + (trial % 4);
            let n = 150 + 40 * (trial % 5);
            let ws = simulate_wstat_iv(0.5, 1.2, &sigma, n, k, &mut rng).unwrap();
            let beta = -1.5 + 3.0 * rng.gen::<f64>();
            let lam = 0.3 + 2.0 * rng.gen::<f64>();
            let th = ThetaIV::new(beta, lam).unwrap();
            let s = score_iv(&ws, &th, &sigma, IvScoreRegime::Exact).unwrap();
            let h = 1e-5;
            let q = |b: f64, l: f64| {
                loglik_iv(&ws, &ThetaIV::new(b, l).unwrap(), &sigma).unwrap()
            };
            let fd = [
                (q(beta + h, lam) - q(beta - h, lam)) / (2.0 * h),
                (q(beta, lam + h) - q(beta, lam - h)) / (2.0 * h),
            ];
            for i in 0..2 {
                let denom = fd[i].abs().max(1e-8);
                assert!(
                    (s[i] - fd[i]).abs() / denom < 1e-6,
                    "trial {trial} comp {i}: {} vs {}",
                    s[i],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn lambda_score_sign_brackets_profile_maximizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ws = simulate_wstat_iv(0.4, 1.5, &eye2(), 400, 5, &mut rng).unwrap();
        let beta = 0.4;
        // find the profile maximizer in λ on a fine grid
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 1..4000 {
            let l = i as f64 * 1e-3;
            let v = loglik_iv(&ws, &ThetaIV::new(beta, l).unwrap(), &eye2()).unwrap();
            if v > best.1 {
                best = (l, v);
            }
        }
        let lam_star = best.0;
        let below = score_iv(
            &ws,
            &ThetaIV::new(beta, 0.5 * lam_star).unwrap(),
            &eye2(),
            IvScoreRegime::Exact,
        )
        .unwrap();
        let above = score_iv(
            &ws,
            &ThetaIV::new(beta, 1.5 * lam_star).unwrap(),
            &eye2(),
            IvScoreRegime::Exact,
        )
        .unwrap();
        assert!(below[1] > 0.0 && above[1] < 0.0);
    }

    #[test]
    fn limlk_closed_form_cases() {
        // W = a a' with Σ = I: top eigenvector is a itself
        let a = [2.0, 1.0];
        let w = SymMat::from_fn(2, |i, j| a[i] * a[j]).unwrap();
        let ws = WStatIV { w, k: 3, n: 50 };
        assert!((limlk(&ws, &eye2()).unwrap() - 2.0).abs() < 1e-12);

        // scale invariance
        let w = SymMat::from_fn(2, |i, j| {
            7.5 * (a[i] * a[j] + if i == j { 0.3 } else { 0.1 })
        })
        .unwrap();
        let base = limlk(&WStatIV { w: w.clone(), k: 3, n: 50 }, &eye2()).unwrap();
        let mut scaled = w.clone();
        for i in 0..2 {
            for j in 0..=i {
                scaled.set(i, j, 3.0 * w.get(i, j));
            }
        }
        let s = limlk(&WStatIV { w: scaled, k: 3, n: 50 }, &eye2()).unwrap();
        assert!((base - s).abs() < 1e-12);

        // spectral tie -> tie error
        let ws = WStatIV { w: eye2(), k: 3, n: 50 };
        assert!(matches!(limlk(&ws, &eye2()), Err(Error::Ties(_))));
    }

    #[test]
    fn limlk_maximizes_rayleigh_quotient_vs_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sigma = sigma_generic();
        let ws = simulate_wstat_iv(0.8, 2.0, &sigma, 300, 4, &mut rng).unwrap();
        let bhat = limlk(&ws, &sigma).unwrap();
        let rayleigh = |beta: f64| {
            let f = iv_forms(&ws.w, beta, &sigma).unwrap();
            f.g / f.qa
        };
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..100_000 {
            let b = -10.0 + 20.0 * (i as f64) / 100_000.0;
            let v = rayleigh(b);
            if v > best.0 {
                best = (v, b);
            }
        }
        assert!(rayleigh(bhat) >= best.0 - 1e-9);
        assert!((bhat - best.1).abs() < 1e-3);
    }

    #[test]
    fn mile_equals_limlk_and_recovers_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sigma = sigma_generic();
        for _ in 0..25 {
            let ws = simulate_wstat_iv(0.5, 1.0, &sigma, 600, 5, &mut rng).unwrap();
            let rep = mile_iv(&ws, &sigma).unwrap();
            let bl = limlk(&ws, &sigma).unwrap();
            assert!(
                (rep.get("beta").unwrap() - bl).abs() <= 1e-6,
                "mile {} vs limlk {bl}",
                rep.get("beta").unwrap()
            );
        }
    }

    #[test]
    fn mile_on_noiseless_rank_one_w() {
        // W = λ* a a' exactly: at the K/N -> 0 limit the maximizer sits at
        // (β*, λ*) up to the K/(N qa) moment adjustment.
        let (beta, lam) = (1.5, 2.0);
        let a = [beta, 1.0];
        let w = SymMat::from_fn(2, |i, j| lam * a[i] * a[j]).unwrap();
        let ws = WStatIV { w, k: 2, n: 2_000_000 };
        let rep = mile_iv(&ws, &eye2()).unwrap();
        assert!((rep.get("beta").unwrap() - beta).abs() < 1e-6);
        assert!((rep.get("lambda").unwrap() - lam).abs() < 1e-4);
    }

    #[test]
    fn info_iv_closed_forms() {
        // Σ = I, β* = 0, α = 0 -> diag(λ*, 1/(4λ*))
        let lam = 0.7;
        let th = ThetaIV::new(0.0, lam).unwrap();
        let info = info_iv(&th, &eye2(), 0.0).unwrap();
        assert!((info.get(0, 0) - lam).abs() < 1e-14);
        assert!(info.get(0, 1).abs() < 1e-14);
        assert!((info.get(1, 1) - 1.0 / (4.0 * lam)).abs() < 1e-14);
        // inverse (1,1) equals σ_u²/λ* = 1/λ* here
        let inv = info.inverse().unwrap();
        assert!((inv.get(0, 0) - 1.0 / lam).abs() < 1e-12);
    }

    #[test]
    fn info_inverse_matches_corollary_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..50 {
            let beta = -2.0 + 4.0 * rng.gen::<f64>();
            let lam = 0.2 + 3.0 * rng.gen::<f64>();
            let alpha = 1.5 * rng.gen::<f64>();
            let s11 = 0.5 + rng.gen::<f64>();
            let s22 = 0.5 + rng.gen::<f64>();
            let s12 = (s11 * s22).sqrt() * (rng.gen::<f64>() - 0.5);
            let sigma =
                SymMat::from_fn(2, |i, j| if i == j { [s11, s22][i] } else { s12 }).unwrap();
            let th = ThetaIV::new(beta, lam).unwrap();
            let inv11 = info_iv(&th, &sigma, alpha).unwrap().inverse().unwrap().get(0, 0);
            let want = asyvar_limlk(&th, &sigma, alpha).unwrap();
            assert!(
                (inv11 - want).abs() <= 1e-10 * want.abs(),
                "{inv11} vs {want}"
            );
        }
    }

    #[test]
    fn info_is_continuous_at_alpha_zero_and_variance_monotone() {
        let sigma = sigma_generic();
        let th = ThetaIV::new(0.8, 1.1).unwrap();
        let at0 = info_iv(&th, &sigma, 0.0).unwrap();
        let near = info_iv(&th, &sigma, 1e-9).unwrap();
        for i in 0..2 {
            for j in 0..=i {
                assert!((at0.get(i, j) - near.get(i, j)).abs() < 1e-7);
            }
        }
        // SIV variance σ_u²/λ*
        let b = [1.0, -th.beta];
        let su2 = b[0] * b[0] * sigma.get(0, 0)
            + 2.0 * b[0] * b[1] * sigma.get(0, 1)
            + b[1] * b[1] * sigma.get(1, 1);
        assert!(
            (asyvar_limlk(&th, &sigma, 0.0).unwrap() - su2 / th.lambda).abs() < 1e-12
        );
        let mut prev = 0.0;
        for i in 0..5 {
            let v = asyvar_limlk(&th, &sigma, i as f64 * 0.3).unwrap();
            assert!(v > prev || i == 0);
            prev = v;
        }
    }

    #[test]
    fn moment_vector_zero_at_mean_and_sensitive_to_beta() {
        let sigma = sigma_generic();
        let (beta, lam) = (0.4, 0.9);
        let a = [beta, 1.0];
        let (n, k) = (800usize, 6usize);
        let kn = k as f64 / n as f64;
        let w = SymMat::from_fn(2, |i, j| lam * a[i] * a[j] + kn * sigma.get(i, j)).unwrap();
        let ws = WStatIV { w, k, n };
        let m = md_moment_iv(&ws, &ThetaIV::new(beta, lam).unwrap(), &sigma).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-14));

        // MC average at the truth is near zero; perturbing β moves it
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 10_000;
        let mut acc = [0.0f64; 3];
        let mut acc2 = [0.0f64; 3];
        for _ in 0..reps {
            let wsim = simulate_wstat_iv(beta, lam, &sigma, n, k, &mut rng).unwrap();
            let m = md_moment_iv(&wsim, &ThetaIV::new(beta, lam).unwrap(), &sigma).unwrap();
            for (j, v) in m.iter().enumerate() {
                acc[j] += v;
                acc2[j] += v * v;
            }
        }
        for j in 0..3 {
            let mean = acc[j] / reps as f64;
            let sd = ((acc2[j] / reps as f64 - mean * mean) / reps as f64).sqrt();
            assert!(mean.abs() <= 3.0 * sd.max(1e-12), "component {j}: {mean} vs se {sd}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut acc_b = 0.0f64;
        for _ in 0..reps {
            let wsim = simulate_wstat_iv(beta, lam, &sigma, n, k, &mut rng).unwrap();
            let m =
                md_moment_iv(&wsim, &ThetaIV::new(beta + 0.5, lam).unwrap(), &sigma).unwrap();
            acc_b += m[0]; // λβ² enters the (1,1) component
        }
        assert!((acc_b / reps as f64).abs() > 0.1);
    }

    #[test]
    fn mean_of_simulated_w_matches_first_moment() {
        let sigma = sigma_generic();
        let (beta, lam) = (0.6, 1.4);
        let (n, k) = (300usize, 8usize);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let reps = 4000;
        let mut acc = SymMat::zeros(2).unwrap();
        for _ in 0..reps {
            let ws = simulate_wstat_iv(beta, lam, &sigma, n, k, &mut rng).unwrap();
            for i in 0..2 {
                for j in 0..=i {
                    acc.set(i, j, acc.get(i, j) + ws.w.get(i, j) / reps as f64);
                }
            }
        }
        let a = [beta, 1.0];
        let kn = k as f64 / n as f64;
        for i in 0..2 {
            for j in 0..=i {
                let want = lam * a[i] * a[j] + kn * sigma.get(i, j);
                assert!((acc.get(i, j) - want).abs() < 0.03 * want.abs().max(1.0));
            }
        }
    }
}
