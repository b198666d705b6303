use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot tolerance for the Cholesky factorization.
const PIVOT_TOLERANCE: f64 = 1e-13;

/// `inverse_sqrt` rejects when the smallest eigenvalue is at or below this
/// fraction of the largest.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense symmetric matrix. Construction symmetrizes the input, so the
/// stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn identity(order: usize) -> Self {
        Self(DMatrix::identity(order, order))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    /// Principal submatrix on `idx` (rows and columns).
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.0[(idx[i], idx[j])])
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows have unequal length".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Lower Cholesky factor of `a`.
pub fn cholesky(a: &SymMatrix) -> Result<DMatrix<f64>> {
    let n = a.order();
    let m = a.as_matrix();
    let scale = m.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tol = PIVOT_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d <= tol {
            return Err(Error::NotPositiveDefinite { index: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn spd_solve(a: &SymMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != a.order() {
        return Err(Error::InvalidInput(format!(
            "right-hand side has {} rows, matrix order is {}",
            b.nrows(),
            a.order()
        )));
    }
    let l = cholesky(a)?;
    let n = a.order();
    let mut x = b.clone();
    for c in 0..x.ncols() {
        // forward: L z = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for p in 0..i {
                s -= l[(i, p)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // back: L' x = z
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for p in i + 1..n {
                s -= l[(p, i)] * x[(p, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

pub fn spd_inverse(a: &SymMatrix) -> Result<SymMatrix> {
    let inv = spd_solve(a, &DMatrix::identity(a.order(), a.order()))?;
    SymMatrix::new(inv)
}

/// Symmetric inverse square root `S` with `S A S = I`, via the
/// eigendecomposition of `A`.
pub fn inverse_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let max = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(max > 0.0) || min <= EIGEN_FLOOR * max {
        return Err(Error::NearSingular { min, max });
    }
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| {
        v[(i, j)] / eig.eigenvalues[j].sqrt()
    });
    SymMatrix::new(&scaled * v.transpose())
}

/// Moore-Penrose inverse of a symmetric matrix, discarding eigenvalues at or
/// below `RANK_TOLERANCE` times the largest magnitude. Returns the inverse
/// and the retained rank.
pub fn pseudo_inverse(a: &SymMatrix) -> (SymMatrix, usize) {
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = RANK_TOLERANCE * max;
    let v = &eig.eigenvectors;
    let mut rank = 0;
    let inv_vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l.abs() > cut {
                rank += 1;
                1.0 / l
            } else {
                0.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * inv_vals[j]);
    let inv = SymMatrix::new(&scaled * v.transpose()).expect("finite eigen-decomposition");
    (inv, rank)
}

/// Index of the first column that is (numerically) a linear combination of
/// the columns before it, judged on unit-normalized columns by the ratio of
/// smallest to largest singular value.
pub fn collinear_column(x: &DMatrix<f64>) -> Option<usize> {
    let mut normalized = x.clone();
    for (j, mut col) in normalized.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Some(j);
        }
        col /= norm;
    }
    for j in 1..normalized.ncols() {
        let sub = normalized.columns(0, j + 1).into_owned();
        let sv = sub.singular_values();
        let max = sv.iter().fold(0.0_f64, |m, &v| m.max(v));
        let min = sv.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if min <= RANK_TOLERANCE * max {
            return Some(j);
        }
    }
    None
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
