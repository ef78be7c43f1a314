//! Input readers for the CLI: long-format panel CSV (i, t, y [, x_1..x_K]),
//! wide IV CSV (y1, y2, z_1..z_K), and the JSON sidecar carrying Σ and
//! tuning knobs. Parse failures report the offending line.

use mile_core::numkern::SymMat;
use ndarray::{Array1, Array2, Array3};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

type IoResult<T> = Result<T, InputError>;

fn open_reader(path: &Path) -> IoResult<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)
        .map_err(|e| InputError(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_field(raw: &str, name: &str, line: usize) -> IoResult<f64> {
    raw.parse::<f64>()
        .map_err(|_| InputError(format!("line {line}: cannot parse {name} value '{raw}'")))
}

/// Long panel: one row per (i, t). Returns y as N×T plus regressors N×T×K,
/// with individuals ordered by first appearance and t required to be 1..T.
pub struct LongPanel {
    pub y: Array2<f64>,
    pub x: Array3<f64>,
}

pub fn read_long_panel(path: &Path) -> IoResult<LongPanel> {
    let mut rdr = open_reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| InputError(format!("bad header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "i" || cols[1] != "t" || cols[2] != "y" {
        return Err(InputError(format!(
            "expected header starting 'i,t,y', got '{}'",
            cols.join(",")
        )));
    }
    for (j, c) in cols.iter().enumerate().skip(3) {
        let want = format!("x_{}", j - 2);
        if **c != want {
            return Err(InputError(format!(
                "regressor column {} must be named '{want}', got '{c}'",
                j + 1
            )));
        }
    }
    let k = cols.len() - 3;

    // (i -> t -> (y, x))
    let mut per_ind: BTreeMap<i64, BTreeMap<i64, (f64, Vec<f64>)>> = BTreeMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = record.map_err(|e| InputError(format!("line {line}: {e}")))?;
        if rec.len() != cols.len() {
            return Err(InputError(format!(
                "line {line}: expected {} fields, got {}",
                cols.len(),
                rec.len()
            )));
        }
        let i: i64 = rec[0]
            .parse()
            .map_err(|_| InputError(format!("line {line}: bad individual id '{}'", &rec[0])))?;
        let t: i64 = rec[1]
            .parse()
            .map_err(|_| InputError(format!("line {line}: bad time index '{}'", &rec[1])))?;
        let yv = parse_field(&rec[2], "y", line)?;
        let mut xs = Vec::with_capacity(k);
        for j in 0..k {
            xs.push(parse_field(&rec[3 + j], &format!("x_{}", j + 1), line)?);
        }
        if per_ind.entry(i).or_default().insert(t, (yv, xs)).is_some() {
            return Err(InputError(format!("line {line}: duplicate (i={i}, t={t})")));
        }
    }
    if per_ind.is_empty() {
        return Err(InputError("no data rows".into()));
    }
    let t_len = per_ind.values().next().unwrap().len();
    let n = per_ind.len();
    let mut y = Array2::<f64>::zeros((n, t_len));
    let mut x = Array3::<f64>::zeros((n, t_len, k));
    for (row, (i, times)) in per_ind.iter().enumerate() {
        if times.len() != t_len {
            return Err(InputError(format!(
                "panel is unbalanced: individual {i} has {} periods, expected {t_len}",
                times.len()
            )));
        }
        for (s, tt) in (1..=t_len as i64).enumerate() {
            match times.get(&tt) {
                Some((yv, xs)) => {
                    y[(row, s)] = *yv;
                    for j in 0..k {
                        x[(row, s, j)] = xs[j];
                    }
                }
                None => {
                    return Err(InputError(format!(
                        "individual {i} is missing period t={tt} (periods must be 1..T)"
                    )));
                }
            }
        }
    }
    Ok(LongPanel { y, x })
}

/// Wide IV data: columns y1, y2, z_1..z_K.
pub struct IvCsv {
    pub y1: Array1<f64>,
    pub y2: Array1<f64>,
    pub z: Array2<f64>,
}

pub fn read_iv_csv(path: &Path) -> IoResult<IvCsv> {
    let mut rdr = open_reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| InputError(format!("bad header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "y1" || cols[1] != "y2" {
        return Err(InputError(format!(
            "expected header starting 'y1,y2,z_1,...', got '{}'",
            cols.join(",")
        )));
    }
    for (j, c) in cols.iter().enumerate().skip(2) {
        let want = format!("z_{}", j - 1);
        if **c != want {
            return Err(InputError(format!(
                "instrument column {} must be named '{want}', got '{c}'",
                j + 1
            )));
        }
    }
    let k = cols.len() - 2;
    let mut y1 = Vec::new();
    let mut y2 = Vec::new();
    let mut z = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = record.map_err(|e| InputError(format!("line {line}: {e}")))?;
        if rec.len() != cols.len() {
            return Err(InputError(format!(
                "line {line}: expected {} fields, got {}",
                cols.len(),
                rec.len()
            )));
        }
        y1.push(parse_field(&rec[0], "y1", line)?);
        y2.push(parse_field(&rec[1], "y2", line)?);
        for j in 0..k {
            z.push(parse_field(&rec[2 + j], &format!("z_{}", j + 1), line)?);
        }
    }
    if y1.is_empty() {
        return Err(InputError("no data rows".into()));
    }
    let n = y1.len();
    Ok(IvCsv {
        y1: Array1::from_vec(y1),
        y2: Array1::from_vec(y2),
        z: Array2::from_shape_vec((n, k), z)
            .map_err(|e| InputError(format!("instrument matrix: {e}")))?,
    })
}

/// Sidecar JSON: `{"sigma": [[s11, s12], [s12, s22]], "rank_draws": 2000}`.
#[derive(Debug, Default, serde::Deserialize)]
pub struct SideConfig {
    pub sigma: Option<Vec<Vec<f64>>>,
    pub rank_draws: Option<usize>,
}

pub fn read_side_config(path: Option<&Path>) -> IoResult<SideConfig> {
    let Some(path) = path else {
        return Ok(SideConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| InputError(format!("config JSON: {e}")))
}

pub fn sigma_from_config(cfg: &SideConfig) -> IoResult<SymMat> {
    let rows = cfg.sigma.as_ref().ok_or_else(|| {
        InputError(
            "the IV model needs the known reduced-form covariance: pass --config with \
             {\"sigma\": [[s11, s12], [s12, s22]]}"
                .into(),
        )
    })?;
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return Err(InputError("sigma must be a 2x2 matrix".into()));
    }
    if (rows[0][1] - rows[1][0]).abs() > 1e-12 * rows[0][1].abs().max(1.0) {
        return Err(InputError("sigma must be symmetric".into()));
    }
    SymMat::from_fn(2, |i, j| rows[i][j]).map_err(|e| InputError(e.to_string()))
}
