//! Symmetric matrices with packed lower-triangle storage, half-vectorization
//! helpers, a cyclic Jacobi eigensolver and Cholesky-based SPD solves. All of
//! it targets the small dense matrices this library works with (cross-product
//! statistics up to a few hundred rows, information matrices of dimension 3).

use crate::{Error, Result};
use ndarray::{Array1, Array2};

/// Symmetric real matrix, stored as the lower triangle stacked column-wise
/// (the same layout `vech` produces).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    dim: usize,
    lower: Vec<f64>,
}

impl SymMat {
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("SymMat dimension must be >= 1".into()));
        }
        Ok(Self {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        })
    }

    /// Build from `f(i, j)` evaluated on the lower triangle (i >= j).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for j in 0..dim {
            for i in j..dim {
                let v = f(i, j);
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Build from a dense square matrix, symmetrizing by averaging.
    pub fn from_dense(a: &Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::Invalid(format!("matrix is {r}x{c}, not square")));
        }
        Self::from_fn(r, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
    }

    pub fn from_vech(dim: usize, v: &[f64]) -> Result<Self> {
        if v.len() != dim * (dim + 1) / 2 {
            return Err(Error::Invalid(format!(
                "vech length {} does not match dimension {dim}",
                v.len()
            )));
        }
        Ok(Self {
            dim,
            lower: v.to_vec(),
        })
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        j * self.dim - j * (j + 1) / 2 + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.lower[k] = v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// x' S y.
    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.get(i, j) * y[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// Cholesky factor L with S = LL', or an error when S is not positive
    /// definite.
    pub fn cholesky(&self) -> Result<Array2<f64>> {
        let n = self.dim;
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Numeric(format!(
                    "matrix not positive definite (pivot {d:.3e} at {j})"
                )));
            }
            l[(j, j)] = d.sqrt();
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / l[(j, j)];
            }
        }
        Ok(l)
    }

    /// Solve S x = b for SPD S.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.cholesky()?;
        Ok(chol_solve(&l, b))
    }

    /// Inverse of an SPD matrix, as another `SymMat`.
    pub fn inverse_spd(&self) -> Result<SymMat> {
        let l = self.cholesky()?;
        let n = self.dim;
        let mut inv = SymMat::zeros(n)?;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = chol_solve(&l, &e);
            e[j] = 0.0;
            for i in j..n {
                inv.set(i, j, col[i]);
            }
        }
        Ok(inv)
    }

    /// log det of an SPD matrix.
    pub fn log_det_spd(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok(2.0 * (0..self.dim).map(|i| l[(i, i)].ln()).sum::<f64>())
    }
}

fn chol_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Half-vectorization: the lower triangle stacked column-wise, length
/// dim(dim+1)/2.
pub fn vech(s: &SymMat) -> Vec<f64> {
    s.lower.clone()
}

/// Inverse of `vech`.
pub fn unvech(dim: usize, v: &[f64]) -> Result<SymMat> {
    SymMat::from_vech(dim, v)
}

/// Duplication matrix D of size dim² x dim(dim+1)/2 with D·vech(S) = vec(S)
/// (vec stacks columns).
pub fn duplication(dim: usize) -> Array2<f64> {
    let cols = dim * (dim + 1) / 2;
    let mut d = Array2::<f64>::zeros((dim * dim, cols));
    let mut col = 0;
    for j in 0..dim {
        for i in j..dim {
            d[(i + j * dim, col)] = 1.0;
            if i != j {
                d[(j + i * dim, col)] = 1.0;
            }
            col += 1;
        }
    }
    d
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending and the matching orthonormal
/// eigenvectors as columns. Ties are allowed; callers needing a unique top
/// eigenvector must check the spectral gap themselves.
pub fn sym_eig(s: &SymMat) -> (Vec<f64>, Array2<f64>) {
    let n = s.dim();
    let mut a = s.to_dense();
    let mut v = Array2::<f64>::eye(n);
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new)] = v[(k, old)];
        }
    }
    (vals, vecs)
}

/// Dense symmetric matrix-vector product helper used in tests and callers.
pub fn mat_vec(a: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    let (r, c) = a.dim();
    let mut out = vec![0.0; r];
    for i in 0..r {
        let mut acc = 0.0;
        for j in 0..c {
            acc += a[(i, j)] * x[j];
        }
        out[i] = acc;
    }
    out
}

pub fn vec_to_array(v: &[f64]) -> Array1<f64> {
    Array1::from_vec(v.to_vec())
}
