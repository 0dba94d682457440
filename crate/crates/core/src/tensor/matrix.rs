use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Row-major dense matrix of `f64`.
///
/// All arithmetic uses a fixed summation order (left to right over the inner
/// index) so results are bit-reproducible across runs and platforms.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{}) [", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(r, c))?;
            }
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), n_cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    fn check_same_shape(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let (n, m, p) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * p];
        for i in 0..n {
            let out_row = &mut out[i * p..(i + 1) * p];
            for l in 0..m {
                let a = self.data[i * m + l];
                let b_row = &rhs.data[l * p..(l + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols: p,
            data: out,
        })
    }

    /// `selfᵀ · rhs` without materialising the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::Shape {
                op: "t_matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let (n, m, p) = (self.cols, self.rows, rhs.cols);
        let mut out = vec![0.0; n * p];
        for l in 0..m {
            let a_row = &self.data[l * n..(l + 1) * n];
            let b_row = &rhs.data[l * p..(l + 1) * p];
            for (i, &a) in a_row.iter().enumerate() {
                let out_row = &mut out[i * p..(i + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols: p,
            data: out,
        })
    }

    /// `self · rhsᵀ` without materialising the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::Shape {
                op: "matmul_t",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let (n, m, p) = (self.rows, self.cols, rhs.rows);
        let mut out = vec![0.0; n * p];
        for i in 0..n {
            let a_row = &self.data[i * m..(i + 1) * m];
            for j in 0..p {
                let b_row = &rhs.data[j * m..(j + 1) * m];
                let mut acc = 0.0;
                for (&a, &b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out[i * p + j] = acc;
            }
        }
        Ok(Matrix {
            rows: n,
            cols: p,
            data: out,
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, "hadamard", |a, b| a * b)
    }

    pub fn zip_map(
        &self,
        other: &Matrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        self.check_same_shape(other, op)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        self.map(|v| alpha * v)
    }

    /// In-place `self += alpha · x`.
    pub fn add_scaled(&mut self, alpha: f64, x: &Matrix) -> Result<()> {
        self.check_same_shape(x, "add_scaled")?;
        for (y, &v) in self.data.iter_mut().zip(&x.data) {
            *y += alpha * v;
        }
        Ok(())
    }

    /// In-place `self += x`.
    pub fn add_assign(&mut self, x: &Matrix) -> Result<()> {
        self.check_same_shape(x, "add_assign")?;
        for (y, &v) in self.data.iter_mut().zip(&x.data) {
            *y += v;
        }
        Ok(())
    }

    /// Adds the column vector `bias` (rows × 1) to every column.
    pub fn add_column_broadcast(&mut self, bias: &[f64]) -> Result<()> {
        if bias.len() != self.rows {
            return Err(Error::Shape {
                op: "add_column_broadcast",
                lhs: self.shape(),
                rhs: (bias.len(), 1),
            });
        }
        for r in 0..self.rows {
            let b = bias[r];
            for v in &mut self.data[r * self.cols..(r + 1) * self.cols] {
                *v += b;
            }
        }
        Ok(())
    }

    /// Copies columns `start..end` into a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.cols, "column block out of range");
        let width = end - start;
        let mut out = Matrix::zeros(self.rows, width);
        for r in 0..self.rows {
            out.data[r * width..(r + 1) * width]
                .copy_from_slice(&self.data[r * self.cols + start..r * self.cols + end]);
        }
        out
    }

    /// Writes `block` into columns starting at `start`.
    pub fn set_column_block(&mut self, start: usize, block: &Matrix) {
        assert_eq!(block.rows, self.rows, "row count mismatch");
        assert!(start + block.cols <= self.cols, "column block out of range");
        for r in 0..self.rows {
            self.data[r * self.cols + start..r * self.cols + start + block.cols]
                .copy_from_slice(&block.data[r * block.cols..(r + 1) * block.cols]);
        }
    }

    /// Reorders columns so that output column `j` is input column `order[j]`.
    pub fn select_columns(&self, order: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, order.len());
        for r in 0..self.rows {
            for (j, &src) in order.iter().enumerate() {
                out.data[r * order.len() + j] = self.data[r * self.cols + src];
            }
        }
        out
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hstack(parts: &[&Matrix]) -> Result<Matrix> {
        let Some(first) = parts.first() else {
            return Ok(Matrix::zeros(0, 0));
        };
        let rows = first.rows;
        let mut cols = 0;
        for p in parts {
            if p.rows != rows {
                return Err(Error::Shape {
                    op: "hstack",
                    lhs: first.shape(),
                    rhs: p.shape(),
                });
            }
            cols += p.cols;
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            out.set_column_block(at, p);
            at += p.cols;
        }
        Ok(out)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Little-endian bytes of the shape followed by every entry.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.data.len());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

pub fn matmul(lhs: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    lhs.matmul(rhs)
}

/// `alpha · x + y`.
pub fn axpy(alpha: f64, x: &Matrix, y: &Matrix) -> Result<Matrix> {
    let mut out = y.clone();
    out.add_scaled(alpha, x).map_err(|_| Error::Shape {
        op: "axpy",
        lhs: x.shape(),
        rhs: y.shape(),
    })?;
    Ok(out)
}

/// Matrix of i.i.d. `N(mean, std²)` draws, filled row-major.
pub fn seeded_gaussian(
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
    rng: &mut RngState,
) -> Result<Matrix> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::param(format!(
            "standard deviation must be finite and >= 0, got {std}"
        )));
    }
    let data = (0..rows * cols)
        .map(|_| mean + std * rng.standard_normal())
        .collect();
    Ok(Matrix { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_example() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]);
        assert_eq!(
            a.matmul(&b).unwrap(),
            Matrix::from_rows(&[[19.0, 22.0], [43.0, 50.0]])
        );
    }

    #[test]
    fn matmul_identity_and_zero() {
        let m = Matrix::from_rows(&[[0.3, -1.5], [2.25, 7.0]]);
        assert_eq!(Matrix::identity(2).matmul(&m).unwrap(), m);
        assert_eq!(Matrix::zeros(2, 2).matmul(&m).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        assert!(matches!(err, Error::Shape { lhs: (2, 3), rhs: (2, 3), .. }));
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let mut rng = RngState::new(3);
        let a = seeded_gaussian(4, 3, 0.0, 1.0, &mut rng).unwrap();
        let b = seeded_gaussian(4, 5, 0.0, 1.0, &mut rng).unwrap();
        let c = seeded_gaussian(6, 3, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(a.t_matmul(&b).unwrap(), a.transpose().matmul(&b).unwrap());
        assert_eq!(a.matmul_t(&c).unwrap(), a.matmul(&c.transpose()).unwrap());
    }

    #[test]
    fn axpy_cases() {
        let x = Matrix::from_rows(&[[1.0]]);
        let y = Matrix::from_rows(&[[3.0]]);
        assert_eq!(axpy(2.0, &x, &y).unwrap(), Matrix::from_rows(&[[5.0]]));
        assert_eq!(axpy(0.0, &x, &y).unwrap(), y);
        assert_eq!(axpy(1.0, &x, &Matrix::zeros(1, 1)).unwrap(), x);
        assert!(axpy(1.0, &Matrix::zeros(1, 2), &y).is_err());
    }

    #[test]
    fn gaussian_degenerate_and_deterministic() {
        let mut rng = RngState::new(9);
        let m = seeded_gaussian(3, 4, 1.5, 0.0, &mut rng).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.5));

        let a = seeded_gaussian(5, 5, 0.0, 1.0, &mut RngState::new(11)).unwrap();
        let b = seeded_gaussian(5, 5, 0.0, 1.0, &mut RngState::new(11)).unwrap();
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());

        assert!(seeded_gaussian(1, 1, 0.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let m = seeded_gaussian(1, 100_000, 0.0, 1.0, &mut RngState::new(2024)).unwrap();
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let var = m.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn column_helpers() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        assert_eq!(m.column_block(1, 3), Matrix::from_rows(&[[2.0, 3.0], [5.0, 6.0]]));
        assert_eq!(
            m.select_columns(&[2, 0]),
            Matrix::from_rows(&[[3.0, 1.0], [6.0, 4.0]])
        );
        let left = m.column_block(0, 1);
        let right = m.column_block(1, 3);
        assert_eq!(Matrix::hstack(&[&left, &right]).unwrap(), m);
    }
}
