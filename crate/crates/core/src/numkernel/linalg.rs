//! Dense matrices and partial-pivoting LU over [`DScalar`].

use crate::error::{GeomError, Result};
use crate::numkernel::DScalar;

/// Pivots with magnitude below this are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-12;
/// Condition estimates above this are flagged.
pub const CONDITION_WARNING: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<DScalar>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![DScalar::constant(0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = DScalar::constant(1.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<DScalar>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GeomError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_rows(rows, cols, data.iter().map(|&v| DScalar::constant(v)).collect())
    }

    pub fn data(&self) -> &[DScalar] {
        &self.data
    }

    pub fn into_data(self) -> Vec<DScalar> {
        self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(GeomError::Shape("matmul dimension mismatch".into()));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.value() == 0.0 && a.width() == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[DScalar]) -> Result<Vec<DScalar>> {
        if self.cols != v.len() {
            return Err(GeomError::Shape("matvec dimension mismatch".into()));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    /// Max-abs value over the scalar parts.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.value().abs()).fold(0.0, f64::max)
    }

    /// Infinity norm of the scalar part.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].value().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = DScalar;
    fn index(&self, (i, j): (usize, usize)) -> &DScalar {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut DScalar {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors with row permutation. Pivoting decisions use scalar parts
/// only, so the factorization is differentiable wherever pivots stay put.
#[derive(Clone, Debug)]
pub struct LuDecomposition {
    lu: DenseMatrix,
    perm: Vec<usize>,
    /// Estimated ∞-norm condition number of the scalar part.
    pub condition: f64,
}

impl LuDecomposition {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(GeomError::Shape(format!("{}x{} is not square", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(1.0);
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[(i, k)].value().abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < PIVOT_THRESHOLD * scale {
                return Err(GeomError::SingularMatrix { pivot: best, column: k });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f.value() == 0.0 && f.width() == 0 {
                    continue;
                }
                for j in k + 1..n {
                    let t = lu[(k, j)];
                    lu[(i, j)] -= f * t;
                }
            }
        }
        let mut dec = LuDecomposition { lu, perm, condition: 0.0 };
        dec.condition = a.norm_inf() * dec.inverse_norm_inf();
        Ok(dec)
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARNING
    }

    pub fn solve(&self, b: &[DScalar]) -> Result<Vec<DScalar>> {
        let n = self.dim();
        if b.len() != n {
            return Err(GeomError::Shape("right-hand side length mismatch".into()));
        }
        let mut y: Vec<DScalar> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(i, j)] * y[j];
                y[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(i, j)] * y[j];
                y[i] -= t;
            }
            y[i] = y[i] / self.lu[(i, i)];
        }
        Ok(y)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if b.rows != n {
            return Err(GeomError::Shape("right-hand side rows mismatch".into()));
        }
        let mut out = DenseMatrix::zeros(n, b.cols);
        for j in 0..b.cols {
            let col: Vec<DScalar> = (0..n).map(|i| b[(i, j)]).collect();
            let x = self.solve(&col)?;
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    pub fn determinant(&self) -> DScalar {
        let n = self.dim();
        let mut det = DScalar::constant(1.0);
        for i in 0..n {
            det *= self.lu[(i, i)];
        }
        // permutation parity
        let mut seen = vec![false; n];
        let mut sign = 1.0;
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let mut len = 0;
            let mut j = i;
            while !seen[j] {
                seen[j] = true;
                j = self.perm[j];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        det * sign
    }

    fn inverse_norm_inf(&self) -> f64 {
        let n = self.dim();
        let mut row_sums = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![DScalar::constant(0.0); n];
            e[j] = DScalar::constant(1.0);
            let col: Vec<DScalar> = match self.solve(&e) {
                Ok(c) => c.iter().map(|v| DScalar::constant(v.value())).collect(),
                Err(_) => return f64::INFINITY,
            };
            for i in 0..n {
                row_sums[i] += col[i].value().abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }
}

/// Solves `A x = b` with partial pivoting.
pub fn solve_linear(a: &DenseMatrix, b: &[DScalar]) -> Result<Vec<DScalar>> {
    LuDecomposition::new(a)?.solve(b)
}

/// Plain-real convenience wrapper around [`solve_linear`].
pub fn solve_linear_f64(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let m = DenseMatrix::from_f64(n, n, a)?;
    let rhs: Vec<DScalar> = b.iter().map(|&v| DScalar::constant(v)).collect();
    Ok(solve_linear(&m, &rhs)?.iter().map(|v| v.value()).collect())
}

/// Pfaffian of an antisymmetric matrix by expansion along the first row.
pub fn pfaffian(a: &DenseMatrix) -> Result<DScalar> {
    if a.rows != a.cols {
        return Err(GeomError::Shape("pfaffian of non-square matrix".into()));
    }
    let idx: Vec<usize> = (0..a.rows).collect();
    Ok(pf_rec(a, &idx))
}

fn pf_rec(a: &DenseMatrix, idx: &[usize]) -> DScalar {
    let m = idx.len();
    if m == 0 {
        return DScalar::constant(1.0);
    }
    if m % 2 == 1 {
        return DScalar::constant(0.0);
    }
    let i0 = idx[0];
    let mut acc = DScalar::constant(0.0);
    for k in 1..m {
        let entry = a[(i0, idx[k])];
        if entry.value() == 0.0 && entry.width() == 0 {
            continue;
        }
        let rest: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != 0 && j != k)
            .map(|(_, &v)| v)
            .collect();
        let term = entry * pf_rec(a, &rest);
        if k % 2 == 1 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}
