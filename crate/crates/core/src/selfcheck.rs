//! Fast invariant suite behind the `check` CLI subcommand: Bessel oracles,
//! gradient checks, the LIMLK/likelihood-maximizer equivalence, and the
//! information-matrix identities. Each item runs in well under a second.

use crate::dyn_panel::{
    info_inf, info_t, loglik_dyn, mile_dyn, score_dyn, simulate_dyn, wishart_stat_dyn,
    DynScoreRegime, ErrorLaw, ThetaDyn,
};
use crate::iv_model::{
    asyvar_limlk, info_iv, limlk, loglik_iv, mile_iv, score_iv, simulate_wstat_iv, IvScoreRegime,
    ThetaIV,
};
use crate::numkern::{log_bessel_i, log_gamma, SymMat};
use crate::static_panel::{loglik_static, StaticPanelData, ThetaStatic};
use ndarray::{Array2, Array3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// One pass/fail line of the suite.
#[derive(Debug, Clone)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn item(name: &'static str, passed: bool, detail: String) -> CheckItem {
    CheckItem { name, passed, detail }
}

/// Run the whole suite with a fixed internal seed.
pub fn run_all() -> Vec<CheckItem> {
    let mut out = Vec::new();
    out.push(bessel_oracles());
    out.push(gamma_oracle());
    out.push(iv_gradient());
    out.push(dyn_gradient());
    out.push(mile_limlk_agreement());
    out.push(iv_information_identity());
    out.push(dyn_information_limit());
    out.push(efficiency_bound());
    out.push(dyn_orthogonal_invariance());
    out.push(static_translation_invariance());
    out
}

fn bessel_oracles() -> CheckItem {
    // spot values from the extended-precision table in the bessel tests
    let cases = [
        (0.0, 10.0, 7.942_972_083_118_695_6),
        (17.5, 50.0, 44.065_772_842_163_72),
        (100.0, 200.0, 171.862_104_814_144_15),
        (499.0, 600.0, 398.290_963_402_831_53),
    ];
    let mut worst = 0.0f64;
    for &(nu, x, want) in &cases {
        match log_bessel_i(nu, x) {
            Ok(got) => worst = worst.max((got - want).abs() / want.abs()),
            Err(e) => return item("bessel-oracles", false, e.to_string()),
        }
    }
    item(
        "bessel-oracles",
        worst <= 1e-10,
        format!("max relative error {worst:.2e} (tolerance 1e-10)"),
    )
}

fn gamma_oracle() -> CheckItem {
    let got = log_gamma(10.0).unwrap_or(f64::NAN);
    let want = 12.801_827_480_081_469_6;
    let err = (got - want).abs() / want;
    item(
        "log-gamma-oracle",
        err <= 1e-12,
        format!("ln Γ(10) relative error {err:.2e}"),
    )
}

fn sigma_generic() -> SymMat {
    SymMat::from_fn(2, |i, j| if i == j { [1.4, 0.8][i] } else { 0.3 }).unwrap()
}

fn iv_gradient() -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sigma = sigma_generic();
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let ws = match simulate_wstat_iv(0.5, 1.2, &sigma, 300, 5, &mut rng) {
            Ok(w) => w,
            Err(e) => return item("iv-score-gradient", false, e.to_string()),
        };
        let beta = -1.0 + 2.0 * rng.gen::<f64>();
        let lam = 0.4 + 1.5 * rng.gen::<f64>();
        let th = ThetaIV::new(beta, lam).unwrap();
        let s = score_iv(&ws, &th, &sigma, IvScoreRegime::Exact).unwrap();
        let h = 1e-5;
        let q = |b: f64, l: f64| loglik_iv(&ws, &ThetaIV::new(b, l).unwrap(), &sigma).unwrap();
        let fd = [
            (q(beta + h, lam) - q(beta - h, lam)) / (2.0 * h),
            (q(beta, lam + h) - q(beta, lam - h)) / (2.0 * h),
        ];
        for i in 0..2 {
            worst = worst.max((s[i] - fd[i]).abs() / fd[i].abs().max(1e-8));
        }
    }
    item(
        "iv-score-gradient",
        worst <= 1e-6,
        format!("max relative error vs central differences {worst:.2e}"),
    )
}

fn dyn_gradient() -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let n = 80;
        let eta: Vec<f64> = (0..n).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let y = simulate_dyn(n, 4, 0.5, 1.0, &eta, ErrorLaw::Normal, &mut rng).unwrap();
        let ws = wishart_stat_dyn(&y).unwrap();
        let th = ThetaDyn::new(
            -0.5 + rng.gen::<f64>(),
            0.6 + rng.gen::<f64>(),
            0.4 + 1.5 * rng.gen::<f64>(),
        )
        .unwrap();
        let s = score_dyn(&ws, &th, DynScoreRegime::Exact).unwrap();
        let h = 1e-5;
        let q = |r: f64, v: f64, l: f64| {
            loglik_dyn(&ws, &ThetaDyn::new(r, v, l).unwrap()).unwrap()
        };
        let fd = [
            (q(th.rho + h, th.sigma2, th.lambda) - q(th.rho - h, th.sigma2, th.lambda)) / (2.0 * h),
            (q(th.rho, th.sigma2 + h, th.lambda) - q(th.rho, th.sigma2 - h, th.lambda)) / (2.0 * h),
            (q(th.rho, th.sigma2, th.lambda + h) - q(th.rho, th.sigma2, th.lambda - h)) / (2.0 * h),
        ];
        for i in 0..3 {
            worst = worst.max((s[i] - fd[i]).abs() / fd[i].abs().max(1e-8));
        }
    }
    item(
        "dyn-score-gradient",
        worst <= 1e-6,
        format!("max relative error vs central differences {worst:.2e}"),
    )
}

fn mile_limlk_agreement() -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let sigma = sigma_generic();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let ws = match simulate_wstat_iv(0.5, 1.0, &sigma, 500, 5, &mut rng) {
            Ok(w) => w,
            Err(e) => return item("mile-equals-limlk", false, e.to_string()),
        };
        let a = match mile_iv(&ws, &sigma) {
            Ok(r) => r.get("beta").unwrap(),
            Err(e) => return item("mile-equals-limlk", false, e.to_string()),
        };
        let b = match limlk(&ws, &sigma) {
            Ok(b) => b,
            Err(e) => return item("mile-equals-limlk", false, e.to_string()),
        };
        worst = worst.max((a - b).abs());
    }
    item(
        "mile-equals-limlk",
        worst <= 1e-6,
        format!("max |β̂_MILE − β̂_LIMLK| = {worst:.2e}"),
    )
}

fn iv_information_identity() -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let beta = -2.0 + 4.0 * rng.gen::<f64>();
        let lam = 0.2 + 3.0 * rng.gen::<f64>();
        let alpha = 1.5 * rng.gen::<f64>();
        let s11 = 0.5 + rng.gen::<f64>();
        let s22 = 0.5 + rng.gen::<f64>();
        let s12 = (s11 * s22).sqrt() * (rng.gen::<f64>() - 0.5);
        let sigma = SymMat::from_fn(2, |i, j| if i == j { [s11, s22][i] } else { s12 }).unwrap();
        let th = ThetaIV::new(beta, lam).unwrap();
        let inv11 = match info_iv(&th, &sigma, alpha).and_then(|i| i.inverse()) {
            Ok(inv) => inv.get(0, 0),
            Err(e) => return item("iv-information-identity", false, e.to_string()),
        };
        let want = asyvar_limlk(&th, &sigma, alpha).unwrap();
        worst = worst.max((inv11 - want).abs() / want.abs());
    }
    item(
        "iv-information-identity",
        worst <= 1e-10,
        format!("max relative gap (info⁻¹)₁₁ vs closed form {worst:.2e}"),
    )
}

fn dyn_information_limit() -> CheckItem {
    let mut worst = 0.0f64;
    for &rho in &[-0.5, 0.0, 0.5] {
        let inv11 = match info_t(rho, 1.0, 1.0, 500).and_then(|i| i.inverse()) {
            Ok(inv) => inv.get(0, 0),
            Err(e) => return item("dyn-information-large-t", false, e.to_string()),
        };
        let want = 1.0 - rho * rho;
        worst = worst.max((inv11 - want).abs() / want);
    }
    item(
        "dyn-information-large-t",
        worst <= 0.01,
        format!("max relative gap to 1−ρ*² at T=500 is {worst:.2e}"),
    )
}

fn efficiency_bound() -> CheckItem {
    let mut worst = 0.0f64;
    for &rho in &[-0.7, -0.2, 0.3, 0.8] {
        let inv11 = match info_inf(rho, 1.3, 0.9).and_then(|i| i.inverse()) {
            Ok(inv) => inv.get(0, 0),
            Err(e) => return item("efficiency-bound", false, e.to_string()),
        };
        worst = worst.max((inv11 - (1.0 - rho * rho)).abs());
    }
    item(
        "efficiency-bound",
        worst <= 1e-10,
        format!("max |(I_∞⁻¹)₁₁ − (1−ρ*²)| = {worst:.2e}"),
    )
}

fn dyn_orthogonal_invariance() -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (n, t) = (12usize, 4usize);
    let eta: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let y = simulate_dyn(n, t, 0.5, 1.0, &eta, ErrorLaw::Normal, &mut rng).unwrap();
    // Householder reflection Q = I - 2vv'
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    let mut qy = Array2::<f64>::zeros((n, t));
    for s in 0..t {
        let dot: f64 = (0..n).map(|i| v[i] * y[(i, s)]).sum();
        for i in 0..n {
            qy[(i, s)] = y[(i, s)] - 2.0 * v[i] * dot;
        }
    }
    let wa = wishart_stat_dyn(&y).unwrap();
    let wb = wishart_stat_dyn(&qy).unwrap();
    let scale = wa.w.trace().abs().max(1.0);
    let mut worst = 0.0f64;
    for a in 0..t {
        for b in 0..=a {
            worst = worst.max((wa.w.get(a, b) - wb.w.get(a, b)).abs() / scale);
        }
    }
    let ra = mile_dyn(&wa).unwrap();
    let rb = mile_dyn(&wb).unwrap();
    let drift = ra
        .estimates
        .iter()
        .zip(&rb.estimates)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    item(
        "dyn-orthogonal-invariance",
        worst <= 1e-12 && drift <= 1e-6,
        format!("W drift {worst:.2e}, estimate drift {drift:.2e}"),
    )
}

fn static_translation_invariance() -> CheckItem {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (n, t) = (15usize, 4usize);
    let mut y = Array2::<f64>::zeros((n, t));
    let mut x = Array3::<f64>::zeros((n, t, 1));
    for i in 0..n {
        let eta: f64 = rng.sample(StandardNormal);
        for s in 0..t {
            let xv: f64 = rng.sample(StandardNormal);
            x[(i, s, 0)] = xv;
            y[(i, s)] = eta + 0.8 * xv + rng.sample::<f64, _>(StandardNormal);
        }
    }
    let data = StaticPanelData::new(y.clone(), x.clone()).unwrap();
    let theta = ThetaStatic::new(vec![0.7], 1.1, 0.2).unwrap();
    let base = loglik_static(&data, &theta).unwrap();
    let mut shifted = data;
    shifted.y.mapv_inplace(|v| v + 37.5);
    let moved = loglik_static(&shifted, &theta).unwrap();
    let drift = (base - moved).abs() / base.abs().max(1.0);
    item(
        "static-translation-invariance",
        drift <= 1e-9,
        format!("relative drift after shifting y by 37.5: {drift:.2e}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes() {
        let items = run_all();
        assert_eq!(items.len(), 10);
        for it in &items {
            assert!(it.passed, "{}: {}", it.name, it.detail);
        }
    }
}
