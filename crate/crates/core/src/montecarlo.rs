//! Reproducible simulation harness for the dynamic-panel comparison tables.
//!
//! Every replication draws from a ChaCha stream keyed by a counter-based
//! hash of (master seed, N, T, replication index), so results are
//! byte-identical across runs and across thread counts; replications within
//! a cell run in parallel and are reduced in fixed order.

use crate::comparators::{ahn_schmidt, arellano_bond, bcols};
use crate::dyn_panel::{mile_dyn_from_y, simulate_dyn, ErrorLaw};
use crate::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Deserialize;
use std::time::Instant;

/// Standard deviation of the random-effects draw (variance 4 in all table
/// designs).
pub const EFFECT_SD: f64 = 2.0;
/// AB/AS are skipped for T at or above this unless the design overrides it.
pub const DEFAULT_AB_AS_T_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectsKind {
    /// η_i iid N(0, 4).
    RandomNormal,
    /// η_i = σ*√N for every i, so λ_N = N exactly.
    Nonconvergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorsKind {
    Normal,
    CenteredChiSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mile,
    Bcols,
    Ab,
    As,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Mile => "mile",
            EstimatorKind::Bcols => "bcols",
            EstimatorKind::Ab => "ab",
            EstimatorKind::As => "as",
        }
    }
}

/// One simulation design: the table caption plus the grid it runs over.
#[derive(Debug, Clone, Deserialize)]
pub struct McDesign {
    pub rho_star: f64,
    #[serde(default = "one")]
    pub sigma_star2: f64,
    pub effects: EffectsKind,
    pub errors: ErrorsKind,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    #[serde(rename = "T")]
    pub t_list: Vec<usize>,
    pub reps: usize,
    pub estimators: Vec<EstimatorKind>,
    #[serde(rename = "seed")]
    pub master_seed: u64,
    #[serde(default = "default_ab_as_limit")]
    pub ab_as_t_limit: usize,
}

fn one() -> f64 {
    1.0
}
fn default_ab_as_limit() -> usize {
    DEFAULT_AB_AS_T_LIMIT
}

impl McDesign {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: McDesign = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("design JSON: {e}")))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Invalid("reps must be >= 1".into()));
        }
        if !(self.sigma_star2 > 0.0) {
            return Err(Error::Invalid("sigma_star2 must be > 0".into()));
        }
        if self.n_list.is_empty() || self.t_list.is_empty() {
            return Err(Error::Invalid("N and T lists must be non-empty".into()));
        }
        if self.n_list.iter().any(|&n| n == 0) || self.t_list.iter().any(|&t| t == 0) {
            return Err(Error::Invalid("all N and T must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Invalid("at least one estimator required".into()));
        }
        Ok(())
    }
}

/// Status of one estimator in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Computed,
    /// Undefined at this T (AB/AS at T = 2); rendered "*".
    Unavailable,
    /// Skipped for cost at large T; rendered "**".
    Skipped,
}

#[derive(Debug, Clone)]
pub struct EstimatorCell {
    pub estimator: EstimatorKind,
    pub status: CellStatus,
    pub mean: f64,
    pub mse: f64,
    pub n_failed: usize,
}

/// Per-(T, N) results: mean and MSE of ρ̂ per estimator over the successful
/// replications.
#[derive(Debug, Clone)]
pub struct McCellResult {
    pub t: usize,
    pub n: usize,
    pub cells: Vec<EstimatorCell>,
    pub wall_seconds: f64,
}

impl McCellResult {
    pub fn cell(&self, which: EstimatorKind) -> Option<&EstimatorCell> {
        self.cells.iter().find(|c| c.estimator == which)
    }
}

// SplitMix64 finalizer; chaining it over the coordinates gives a
// counter-based stream key independent of scheduling.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derived seed for replication `rep` of cell (N, T).
pub fn rep_seed(master: u64, n: usize, t: usize, rep: usize) -> u64 {
    let mut h = mix(master);
    h = mix(h ^ (n as u64).wrapping_mul(0x517c_c1b7_2722_0a95));
    h = mix(h ^ (t as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
    mix(h ^ rep as u64)
}

fn draw_effects(design: &McDesign, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match design.effects {
        EffectsKind::RandomNormal => (0..n)
            .map(|_| EFFECT_SD * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        EffectsKind::Nonconvergent => {
            vec![design.sigma_star2.sqrt() * (n as f64).sqrt(); n]
        }
    }
}

fn error_law(design: &McDesign) -> ErrorLaw {
    match design.errors {
        ErrorsKind::Normal => ErrorLaw::Normal,
        ErrorsKind::CenteredChiSq => ErrorLaw::CenteredChiSq,
    }
}

/// Run every replication of one (N, T) cell and aggregate.
pub fn run_cell(design: &McDesign, n: usize, t: usize) -> Result<McCellResult> {
    design.validate()?;
    let start = Instant::now();
    let law = error_law(design);

    let status_of = |est: EstimatorKind| -> CellStatus {
        match est {
            EstimatorKind::Ab | EstimatorKind::As => {
                if t < 3 {
                    CellStatus::Unavailable
                } else if t >= design.ab_as_t_limit {
                    CellStatus::Skipped
                } else {
                    CellStatus::Computed
                }
            }
            _ => CellStatus::Computed,
        }
    };
    let active: Vec<EstimatorKind> = design
        .estimators
        .iter()
        .copied()
        .filter(|&e| status_of(e) == CellStatus::Computed)
        .collect();

    // one Option<f64> per active estimator per replication, in rep order
    let per_rep: Vec<Vec<Option<f64>>> = (0..design.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed(design.master_seed, n, t, rep));
            let eta = draw_effects(design, n, &mut rng);
            let y = match simulate_dyn(
                n,
                t,
                design.rho_star,
                design.sigma_star2,
                &eta,
                law,
                &mut rng,
            ) {
                Ok(y) => y,
                Err(_) => return vec![None; active.len()],
            };
            active
                .iter()
                .map(|est| match est {
                    EstimatorKind::Mile => {
                        mile_dyn_from_y(&y).ok().and_then(|r| r.get("rho"))
                    }
                    EstimatorKind::Bcols => bcols(&y).ok().map(|r| r.rho),
                    EstimatorKind::Ab => arellano_bond(&y)
                        .ok()
                        .and_then(|r| r.available.then_some(r.rho)),
                    EstimatorKind::As => ahn_schmidt(&y)
                        .ok()
                        .and_then(|r| r.available.then_some(r.rho)),
                })
                .map(|v| v.filter(|x| x.is_finite()))
                .collect()
        })
        .collect();

    let mut cells = Vec::with_capacity(design.estimators.len());
    for &est in &design.estimators {
        let status = status_of(est);
        if status != CellStatus::Computed {
            cells.push(EstimatorCell {
                estimator: est,
                status,
                mean: f64::NAN,
                mse: f64::NAN,
                n_failed: 0,
            });
            continue;
        }
        let col = active.iter().position(|&e| e == est).unwrap();
        let mut count = 0usize;
        let mut mean = 0.0;
        let mut mse = 0.0;
        for rep in &per_rep {
            if let Some(v) = rep[col] {
                count += 1;
                mean += v;
                let e = v - design.rho_star;
                mse += e * e;
            }
        }
        let n_failed = design.reps - count;
        if count > 0 {
            mean /= count as f64;
            mse /= count as f64;
        } else {
            mean = f64::NAN;
            mse = f64::NAN;
        }
        cells.push(EstimatorCell {
            estimator: est,
            status,
            mean,
            mse,
            n_failed,
        });
    }

    Ok(McCellResult {
        t,
        n,
        cells,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Run the whole design grid, one row per (T, N) in table order.
pub fn run_design(design: &McDesign) -> Result<Vec<McCellResult>> {
    design.validate()?;
    let mut out = Vec::with_capacity(design.t_list.len() * design.n_list.len());
    for &t in &design.t_list {
        for &n in &design.n_list {
            out.push(run_cell(design, n, t)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(Error::Invalid(format!(
                "unknown table format '{other}' (expected csv or markdown)"
            ))),
        }
    }
}

// Six significant digits, fixed notation.
fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0.000000".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).clamp(0, 12) as usize;
    format!("{v:.decimals$}")
}

/// Render cell results as CSV or markdown. Unavailable estimators print "*",
/// cost-skipped ones "**".
pub fn render_table(results: &[McCellResult], format: TableFormat) -> String {
    let estimators: Vec<EstimatorKind> = results
        .first()
        .map(|r| r.cells.iter().map(|c| c.estimator).collect())
        .unwrap_or_default();
    let mut header = vec!["T".to_string(), "N".to_string()];
    for &e in &estimators {
        header.push(format!("mean_{}", e.label()));
        header.push(format!("mse_{}", e.label()));
        header.push(format!("failed_{}", e.label()));
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let mut row = vec![r.t.to_string(), r.n.to_string()];
            for c in &r.cells {
                match c.status {
                    CellStatus::Computed => {
                        row.push(format_sig6(c.mean));
                        row.push(format_sig6(c.mse));
                        row.push(c.n_failed.to_string());
                    }
                    CellStatus::Unavailable => {
                        row.extend(["*".into(), "*".into(), "*".into()]);
                    }
                    CellStatus::Skipped => {
                        row.extend(["**".into(), "**".into(), "**".into()]);
                    }
                }
            }
            row
        })
        .collect();

    match format {
        TableFormat::Csv => {
            let mut out = header.join(",");
            out.push('\n');
            for row in rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
            out
        }
        TableFormat::Markdown => {
            let mut out = format!("| {} |\n", header.join(" | "));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for row in rows {
                out.push_str(&format!("| {} |\n", row.join(" | ")));
            }
            out
        }
    }
}
