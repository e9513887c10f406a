use crate::error::{QrlsError, Result};

use super::vector::DenseVector;

/// Real matrix in compressed sparse row form.
///
/// The storage is canonical: column indices within a row are strictly
/// increasing, duplicate triplets are summed and exact zeros are dropped at
/// construction. `d` is the largest number of nonzeros in any row or column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    d: usize,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= n_rows {
                return Err(QrlsError::DimensionMismatch {
                    op: "from_triplets (row index)",
                    expected: n_rows,
                    found: r,
                });
            }
            if c >= n_cols {
                return Err(QrlsError::DimensionMismatch {
                    op: "from_triplets (column index)",
                    expected: n_cols,
                    found: c,
                });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                rows.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_offsets[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self::from_parts(
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        ))
    }

    fn from_parts(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let mut col_counts = vec![0usize; n_cols];
        for &c in &col_indices {
            col_counts[c] += 1;
        }
        let max_row = row_offsets
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0);
        let max_col = col_counts.into_iter().max().unwrap_or(0);
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
            d: max_row.max(max_col),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::from_parts(n_rows, n_cols, vec![0; n_rows + 1], Vec::new(), Vec::new())
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
            .expect("diagonal indices are in range")
    }

    /// Symmetric tridiagonal Toeplitz matrix with `diag` on the diagonal and
    /// `off` on both off-diagonals.
    pub fn tridiagonal(n: usize, off: f64, diag: f64) -> Self {
        let mut t = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, off));
            }
            t.push((i, i, diag));
            if i + 1 < n {
                t.push((i, i + 1, off));
            }
        }
        Self::from_triplets(n, n, t).expect("tridiagonal indices are in range")
    }

    /// Dense row-major input; zeros are skipped.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(QrlsError::DimensionMismatch {
                    op: "from_dense_rows",
                    expected: n_cols,
                    found: row.len(),
                });
            }
            t.extend(row.iter().enumerate().map(|(j, &v)| (i, j, v)));
        }
        Self::from_triplets(n_rows, n_cols, t)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Maximum number of nonzeros in any row or column.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        Self::from_triplets(
            self.n_cols,
            self.n_rows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
        .expect("transposed indices are in range")
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.triplets().all(|(i, j, v)| self.get(j, i) == v)
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.triplets().all(|(i, j, _)| j <= i)
    }

    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        Self::from_triplets(
            self.n_rows,
            self.n_cols,
            self.triplets().map(|(i, j, v)| (i, j, v * factor)),
        )
        .expect("indices unchanged")
    }

    /// Rows scaled by `factors[i]`, i.e. `diag(factors) * self`.
    pub fn row_scaled(&self, factors: &[f64]) -> Result<SparseMatrix> {
        if factors.len() != self.n_rows {
            return Err(QrlsError::DimensionMismatch {
                op: "row_scaled",
                expected: self.n_rows,
                found: factors.len(),
            });
        }
        Self::from_triplets(
            self.n_rows,
            self.n_cols,
            self.triplets().map(|(i, j, v)| (i, j, v * factors[i])),
        )
    }

    /// Largest absolute row sum (the infinity norm).
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `y = A x` without shape checks; callers guarantee `x.len() == n_cols`
    /// and `y.len() == n_rows`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            *yi = self.col_indices[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }
}

/// Sparse matrix-vector product.
pub fn spmv(a: &SparseMatrix, x: &[f64]) -> Result<DenseVector> {
    if a.n_cols != x.len() {
        return Err(QrlsError::DimensionMismatch {
            op: "spmv",
            expected: a.n_cols,
            found: x.len(),
        });
    }
    let mut y = DenseVector::zeros(a.n_rows);
    a.mul_vec_into(x, &mut y);
    Ok(y)
}

/// The symmetric matrix `[[0, M], [Mᵀ, 0]]` whose eigenvalues are `±σ_i(M)`.
pub fn hermitian_dilation(m: &SparseMatrix) -> Result<SparseMatrix> {
    if !m.is_square() {
        return Err(QrlsError::NotSquare {
            op: "hermitian_dilation",
            rows: m.n_rows,
            cols: m.n_cols,
        });
    }
    let n = m.n_rows;
    let upper = m.triplets().map(|(i, j, v)| (i, n + j, v));
    let lower = m.triplets().map(|(i, j, v)| (n + j, i, v));
    SparseMatrix::from_triplets(2 * n, 2 * n, upper.chain(lower))
}
