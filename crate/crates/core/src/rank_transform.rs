//! Rank likelihood for the agent-specific monotone transformation model.
//!
//! Each individual's outcome vector is observed only up to an unknown
//! strictly increasing transformation, so the within-individual rank vector
//! is the usable statistic. Its probability mass involves an expectation over
//! ordered standard-normal samples, estimated here by Monte Carlo with common
//! random numbers: one fixed table of ordered draws is reused at every β so
//! the objective is smooth and deterministic. The estimate is normalized by
//! the empirical sum over all T! orderings of the same draws, which makes the
//! pmf sum to one exactly and reduces to 1/T! exactly at β = 0.

use crate::numkern::{maximize, sym_eig, OptimizerSpec, SymMat};
use crate::report::EstimateReport;
use crate::{Error, Result};
use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Largest panel length for which the exact T!-term normalization is
/// enumerated.
pub const MAX_T: usize = 8;

/// Balanced panel for the transformation model; requires T > K and no
/// within-individual ties.
#[derive(Debug, Clone)]
pub struct RankData {
    pub y: Array2<f64>,
    pub x: Array3<f64>,
}

impl RankData {
    pub fn new(y: Array2<f64>, x: Array3<f64>) -> Result<Self> {
        let (n, t) = y.dim();
        let (xn, xt, k) = x.dim();
        if n == 0 || t < 2 {
            return Err(Error::Invalid(format!(
                "rank panel needs N >= 1 and T >= 2, got N={n}, T={t}"
            )));
        }
        if t <= k {
            return Err(Error::Invalid(format!(
                "rank model requires T > K, got T={t}, K={k}"
            )));
        }
        if t > MAX_T {
            return Err(Error::Invalid(format!(
                "rank likelihood enumerates T! orderings; T={t} exceeds the supported {MAX_T}"
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

/// Within-individual ranks: entry t is `#{s : y_s <= y_t}`, a permutation of
/// 1..=T when there are no ties.
pub fn compute_ranks(y_row: &[f64]) -> Result<Vec<usize>> {
    let t = y_row.len();
    let mut ranks = vec![0usize; t];
    for a in 0..t {
        for b in 0..t {
            if a != b && y_row[a] == y_row[b] {
                return Err(Error::Ties(format!(
                    "tied outcomes at positions {a} and {b} (value {})",
                    y_row[a]
                )));
            }
        }
        ranks[a] = y_row.iter().filter(|&&v| v <= y_row[a]).count();
    }
    Ok(ranks)
}

/// Common-random-number table: R independent ordered standard-normal samples
/// of size T, drawn once and then read-only.
#[derive(Debug, Clone)]
pub struct CrnTable {
    draws: Array2<f64>, // R x T, each row sorted ascending
}

impl CrnTable {
    pub fn generate(t: usize, r: usize, rng: &mut impl Rng) -> Result<Self> {
        if r == 0 {
            return Err(Error::Invalid("need at least one draw".into()));
        }
        let mut draws = Array2::<f64>::zeros((r, t));
        let mut row = vec![0.0f64; t];
        for i in 0..r {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (j, &v) in row.iter().enumerate() {
                draws[(i, j)] = v;
            }
        }
        Ok(Self { draws })
    }

    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }
    pub fn t(&self) -> usize {
        self.draws.ncols()
    }
}

// All permutations of 0..t in a fixed deterministic order.
fn permutations(t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..t).collect();
    heap_permute(&mut cur, t, &mut out);
    out
}

fn heap_permute(a: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k {
        heap_permute(a, k - 1, out);
        if k % 2 == 0 {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
}

fn log_sum_exp(vals: impl Iterator<Item = f64>, m: f64) -> f64 {
    let s: f64 = vals.map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// Monte Carlo log-pmf of one individual's rank vector.
///
/// `m_row` holds ranks 1..=T, `x_row` is T×K rows of regressors. Under common
/// random numbers the exponentiated values sum to one exactly over all T!
/// orderings.
pub fn rank_log_pmf_mc(
    m_row: &[usize],
    x_row: &Array2<f64>,
    beta: &[f64],
    crn: &CrnTable,
) -> Result<f64> {
    let t = m_row.len();
    if x_row.nrows() != t || crn.t() != t {
        return Err(Error::Invalid("rank/regressor/draw dimensions disagree".into()));
    }
    if x_row.ncols() != beta.len() {
        return Err(Error::Invalid("beta length does not match regressors".into()));
    }
    let mut seen = vec![false; t];
    for &m in m_row {
        if m == 0 || m > t || seen[m - 1] {
            return Err(Error::Invalid(format!("ranks {m_row:?} are not a permutation")));
        }
        seen[m - 1] = true;
    }

    // c_t = x_t' β
    let c: Vec<f64> = (0..t)
        .map(|s| (0..beta.len()).map(|j| x_row[(s, j)] * beta[j]).sum())
        .collect();

    let r = crn.n_draws();
    let perms = permutations(t);

    // numerator terms s_r(m) and denominator terms s_r(π) for every ordering,
    // combined by max-shifted log-sum-exp
    let mut num = Vec::with_capacity(r);
    let mut den = Vec::with_capacity(r * perms.len());
    let mut num_max = f64::NEG_INFINITY;
    let mut den_max = f64::NEG_INFINITY;
    for i in 0..r {
        let s_num: f64 = (0..t).map(|s| crn.draws[(i, m_row[s] - 1)] * c[s]).sum();
        num.push(s_num);
        num_max = num_max.max(s_num);
        for p in &perms {
            let s_p: f64 = (0..t).map(|s| crn.draws[(i, p[s])] * c[s]).sum();
            den.push(s_p);
            den_max = den_max.max(s_p);
        }
    }
    Ok(log_sum_exp(num.into_iter(), num_max) - log_sum_exp(den.into_iter(), den_max))
}

/// Rank-likelihood estimate of β by common-random-number Monte Carlo.
pub fn estimate_rank(data: &RankData, draws: usize, rng: &mut impl Rng) -> Result<EstimateReport> {
    let (n, t, k) = (data.n(), data.t(), data.k());
    if k == 0 {
        return Err(Error::Invalid("rank model needs at least one regressor".into()));
    }

    // identification: within-demeaned regressors must have full column rank
    let mut gram = vec![0.0; k * k];
    for i in 0..n {
        let means: Vec<f64> =
            (0..k).map(|j| (0..t).map(|s| data.x[(i, s, j)]).sum::<f64>() / t as f64).collect();
        for s in 0..t {
            for a in 0..k {
                let xa = data.x[(i, s, a)] - means[a];
                for b in a..k {
                    gram[a * k + b] += xa * (data.x[(i, s, b)] - means[b]);
                }
            }
        }
    }
    let gram = SymMat::from_fn(k, |i, j| gram[j * k + i])?;
    let (evals, _) = sym_eig(&gram);
    if evals[0] <= 0.0 || evals[k - 1] <= 1e-10 * evals[0] {
        return Err(Error::Estimation(
            "regressor differences are rank deficient; beta is not identified".into(),
        ));
    }

    let ranks: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..t).map(|s| data.y[(i, s)]).collect();
            compute_ranks(&row)
        })
        .collect::<Result<_>>()?;
    let x_rows: Vec<Array2<f64>> = (0..n)
        .map(|i| Array2::from_shape_fn((t, k), |(s, j)| data.x[(i, s, j)]))
        .collect();
    let crn = CrnTable::generate(t, draws, rng)?;

    let objective = |beta: &[f64]| -> f64 {
        let per: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                rank_log_pmf_mc(&ranks[i], &x_rows[i], beta, &crn).unwrap_or(f64::NEG_INFINITY)
            })
            .collect();
        per.iter().sum::<f64>() / n as f64
    };

    let zero = vec![0.0; k];
    let spec = OptimizerSpec {
        bounds: vec![(-50.0, 50.0); k],
        grad_tol: 1e-6,
        max_iter: 250,
        starts: vec![zero.clone(), vec![0.5; k], vec![-0.5; k]],
    };
    let opt = maximize(objective, None::<fn(&[f64]) -> Vec<f64>>, &spec)?;

    Ok(EstimateReport {
        model: "rank".into(),
        names: (1..=k).map(|j| format!("beta_{j}")).collect(),
        estimates: opt.argmax.clone(),
        objective: opt.value,
        converged: opt.converged,
        at_boundary: opt.at_boundary,
        std_errors: None,
        iterations: opt.iterations,
    })
}
