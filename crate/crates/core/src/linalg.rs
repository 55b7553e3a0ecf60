//! Dense linear algebra used by the sampler and the walk.
//!
//! Matrices are `nalgebra` column-major `DMatrix<f64>`; bulk products go
//! through its GEMM kernels. Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Symmetry tolerance accepted by [`spectral_decompose_psd`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_TOL * max(1, λ_max)` are clamped to zero.
pub const PSD_TOL: f64 = 1e-8;

/// `U = Q diag(λ) Qᵀ` with `λ` nonincreasing and nonnegative.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> DenseMatrix {
        let scaled = scale_columns(&self.eigenvectors, &self.eigenvalues);
        &scaled * self.eigenvectors.transpose()
    }
}

/// Symmetric eigendecomposition sorted by nonincreasing eigenvalue.
fn sorted_symmetric_eigen(m: DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn scale_columns(m: &DenseMatrix, scale: &[f64]) -> DenseMatrix {
    let mut out = m.clone();
    for (mut col, &s) in out.column_iter_mut().zip(scale) {
        col *= s;
    }
    out
}

/// Top `count` singular values (nonincreasing) of `mat` with their right
/// singular vectors as orthonormal columns.
pub fn top_right_singular(mat: &DenseMatrix, count: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    let limit = mat.nrows().min(mat.ncols());
    if count > limit {
        return Err(Error::InvalidParameter(format!("requested {count} singular vectors of a {}x{} matrix", mat.nrows(), mat.ncols())));
    }
    let gram = mat.transpose() * mat;
    let (values, vectors) = sorted_symmetric_eigen(symmetrize(gram));
    let sigma = values.iter().take(count).map(|v| v.max(0.0).sqrt()).collect();
    Ok((sigma, vectors.columns(0, count).into_owned()))
}

fn symmetrize(mut m: DenseMatrix) -> DenseMatrix {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// Eigendecomposition of a symmetric positive semidefinite matrix; tiny
/// negative eigenvalues are clamped to zero.
pub fn spectral_decompose_psd(u: &DenseMatrix) -> Result<SpectralDecomposition> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch { expected: u.nrows(), got: u.ncols() });
    }
    let n = u.nrows();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((u[(i, j)] - u[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let (mut values, vectors) = sorted_symmetric_eigen(symmetrize(u.clone()));
    let top = values.first().copied().unwrap_or(0.0).max(1.0);
    if let Some(&min) = values.last() {
        if min < -PSD_TOL * top {
            return Err(Error::NotPsd(min));
        }
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    Ok(SpectralDecomposition { eigenvalues: values, eigenvectors: vectors })
}

/// Incrementally built orthonormal basis of a subspace of `R^dim`.
///
/// New vectors are projected twice against the current basis (block classical
/// Gram-Schmidt with reorthogonalization, so the bulk of the work is GEMM) and
/// then twice against the earlier vectors of their own block. A vector whose
/// residual norm falls below the tolerance is dropped. Columns are stored
/// contiguously so the basis grows without copying.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    dim: usize,
    data: Vec<f64>,
}

const BLOCK: usize = 48;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl OrthoBasis {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(q: DenseMatrix) -> Self {
        Self { dim: q.nrows(), data: q.as_slice().to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The basis as a `dim x len` column-major view.
    pub fn matrix(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.dim, self.len())
    }

    pub fn into_matrix(self) -> DenseMatrix {
        let len = self.len();
        DenseMatrix::from_vec(self.dim, len, self.data)
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    /// Appends the columns of `block`, dropping those whose residual after
    /// projection has norm below `tol`. Returns the number accepted.
    pub fn extend(&mut self, block: &DenseMatrix, tol: f64) -> usize {
        assert_eq!(block.nrows(), self.dim, "vector dimension mismatch");
        let mut accepted = 0;
        let mut start = 0;
        while start < block.ncols() {
            let width = BLOCK.min(block.ncols() - start);
            let chunk = block.columns(start, width).into_owned();
            accepted += self.extend_chunk(chunk, tol);
            start += width;
        }
        accepted
    }

    fn extend_chunk(&mut self, mut chunk: DenseMatrix, tol: f64) -> usize {
        if !self.is_empty() {
            let q = self.matrix();
            for _ in 0..2 {
                let coeffs = q.tr_mul(&chunk);
                chunk.gemm(-1.0, &q, &coeffs, 1.0);
            }
        }
        let dim = self.dim;
        let start = self.data.len();
        for c in 0..chunk.ncols() {
            let v = &mut chunk.as_mut_slice()[c * dim..(c + 1) * dim];
            let kept = &self.data[start..];
            for _ in 0..2 {
                for u in kept.chunks_exact(dim) {
                    let d = dot(u, v);
                    axpy(-d, u, v);
                }
            }
            let norm = dot(v, v).sqrt();
            if norm >= tol && norm > 0.0 {
                let inv = 1.0 / norm;
                self.data.extend(v.iter().map(|x| x * inv));
            }
        }
        (self.data.len() - start) / dim.max(1)
    }

    /// Pushes a single vector; returns whether it was kept.
    pub fn push(&mut self, v: &[f64], tol: f64) -> bool {
        self.extend(&DenseMatrix::from_column_slice(self.dim, 1, v), tol) == 1
    }

    /// Removes from `v` its component in the span, twice for stability.
    pub fn project_out(&self, v: &mut [f64]) {
        if self.is_empty() {
            return;
        }
        let q = self.matrix();
        let mut w = DVector::from_column_slice(v);
        for _ in 0..2 {
            let c = q.tr_mul(&w);
            w.gemv(-1.0, &q, &c, 1.0);
        }
        v.copy_from_slice(w.as_slice());
    }
}

/// Orthonormal basis of the span of `vectors`; vectors with residual norm
/// below `tol` after projection onto the earlier ones are dropped.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Result<DenseMatrix> {
    let Some(first) = vectors.first() else {
        return Ok(DenseMatrix::zeros(0, 0));
    };
    let dim = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let mut basis = OrthoBasis::new(dim);
    basis.extend(&columns_from(vectors, dim), tol);
    Ok(basis.into_matrix())
}

/// Rank tolerance used for blocking bases: `1e-8` times the largest norm.
pub fn rank_tolerance<'a>(vectors: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let max = vectors.into_iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    1e-8 * max
}

pub(crate) fn columns_from(vectors: &[Vec<f64>], dim: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(dim, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        m.column_mut(c).copy_from_slice(v);
    }
    m
}

/// Row-compressed sparse matrix, used for the walk's `E` matrices.
#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(ncols: usize) -> Self {
        Self { ncols, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.ncols);
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            for (c, v) in self.row(i) {
                m[(i, c)] = v;
            }
        }
        m
    }

    /// `self * b` for a dense `b` with `ncols` rows.
    pub fn mul_dense(&self, b: &DenseMatrix) -> DenseMatrix {
        let width = b.ncols();
        // Row-major scratch keeps the inner loop contiguous.
        let bt = b.transpose();
        let bt = bt.as_slice();
        let mut out = vec![0.0; width * self.nrows()];
        for (i, acc) in out.chunks_exact_mut(width.max(1)).enumerate().take(self.nrows()) {
            for (c, v) in self.row(i) {
                axpy(v, &bt[c * width..(c + 1) * width], acc);
            }
        }
        DenseMatrix::from_vec(width, self.nrows(), out).transpose()
    }

    /// `selfᵀ * z` for a dense `z` with `nrows` rows.
    pub fn tr_mul_dense(&self, z: &DenseMatrix) -> DenseMatrix {
        let width = z.ncols();
        let zt = z.transpose();
        let zt = zt.as_slice();
        let mut out = vec![0.0; width * self.ncols];
        for i in 0..self.nrows() {
            let zi = &zt[i * width..(i + 1) * width];
            for (c, v) in self.row(i) {
                axpy(v, zi, &mut out[c * width..(c + 1) * width]);
            }
        }
        DenseMatrix::from_vec(width, self.ncols, out).transpose()
    }

    /// Gram matrix `self * selfᵀ`.
    pub fn row_gram(&self) -> DenseMatrix {
        let dense = self.to_dense();
        &dense * dense.transpose()
    }
}

/// Knobs for [`truncated_svd`] on large inputs.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceIterOptions {
    /// Extra block columns beyond the requested count.
    pub oversample: usize,
    /// Stop once every requested Ritz pair has residual
    /// `‖MᵀM v − θ v‖ ≤ tol · θ₁`.
    pub tol: f64,
    pub max_iter: usize,
    /// Inputs with at most this many rows use an exact small Gram solve.
    pub exact_rows: usize,
}

impl Default for SubspaceIterOptions {
    fn default() -> Self {
        Self { oversample: 10, tol: 1e-6, max_iter: 200, exact_rows: 400 }
    }
}

/// Result of a truncated singular value computation.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Nonincreasing singular values.
    pub values: Vec<f64>,
    /// Matching right singular vectors as orthonormal columns.
    pub vectors: DenseMatrix,
    pub iterations: usize,
    /// Largest relative residual among the returned pairs.
    pub residual: f64,
}

/// Top right singular pairs of a sparse matrix.
///
/// Matrices with few rows are handled exactly through the row Gram matrix.
/// Otherwise block subspace iteration with Rayleigh-Ritz extraction runs on
/// `MᵀM`, optionally warm-started from `warm` (columns are used as the first
/// block vectors, then topped up with Gaussian draws). Fewer than `count`
/// pairs come back when the rank is smaller.
pub fn truncated_svd<R: Rng + ?Sized>(
    mat: &CsrMatrix,
    count: usize,
    opts: &SubspaceIterOptions,
    warm: Option<&DenseMatrix>,
    rng: &mut R,
) -> TruncatedSvd {
    let n = mat.ncols();
    let count = count.min(n).min(mat.nrows());
    if count == 0 || mat.nnz() == 0 {
        return TruncatedSvd { values: Vec::new(), vectors: DenseMatrix::zeros(n, 0), iterations: 0, residual: 0.0 };
    }
    if mat.nrows() <= opts.exact_rows.max(count) {
        return svd_via_row_gram(mat, count);
    }

    let width = (count + opts.oversample).min(n);
    let mut basis = OrthoBasis::new(n);
    if let Some(w) = warm {
        let take = w.ncols().min(width);
        basis.extend(&w.columns(0, take).into_owned(), 1e-8);
    }
    while basis.len() < width {
        let need = width - basis.len();
        let fill = DenseMatrix::from_fn(n, need, |_, _| rng.sample::<f64, _>(StandardNormal));
        if basis.extend(&fill, 1e-8) == 0 {
            break;
        }
    }

    let mut q = basis.into_matrix();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let z = mat.mul_dense(&q);
        let y = mat.tr_mul_dense(&z);
        let h = symmetrize(z.tr_mul(&z));
        let (theta, s) = sorted_symmetric_eigen(h);
        let ritz = &q * &s;
        let ys = &y * &s;
        let top = theta[0].max(f64::MIN_POSITIVE);
        let keep = count.min(theta.len());
        let mut residual = 0.0f64;
        for c in 0..keep {
            let r = ys.column(c) - ritz.column(c) * theta[c];
            residual = residual.max(r.norm() / top);
        }
        if residual <= opts.tol || iterations >= opts.max_iter {
            return finish_ritz(theta, ritz, keep, iterations, residual);
        }
        let mut next = OrthoBasis::new(n);
        next.extend(&ys, 1e-12 * ys.norm().max(f64::MIN_POSITIVE));
        if next.is_empty() {
            return finish_ritz(theta, ritz, keep, iterations, residual);
        }
        q = next.into_matrix();
    }
}

fn finish_ritz(theta: Vec<f64>, ritz: DenseMatrix, keep: usize, iterations: usize, residual: f64) -> TruncatedSvd {
    let top = theta.first().copied().unwrap_or(0.0).max(0.0);
    let rank = theta.iter().take(keep).take_while(|&&t| t > 1e-18 * top && t > 0.0).count();
    TruncatedSvd {
        values: theta[..rank].iter().map(|t| t.sqrt()).collect(),
        vectors: ritz.columns(0, rank).into_owned(),
        iterations,
        residual,
    }
}

fn svd_via_row_gram(mat: &CsrMatrix, count: usize) -> TruncatedSvd {
    let dense = mat.to_dense();
    let (values, left) = sorted_symmetric_eigen(symmetrize(&dense * dense.transpose()));
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank = values.iter().take(count).take_while(|&&v| v > 1e-18 * top && v > 0.0).count();
    let sigma: Vec<f64> = values[..rank].iter().map(|v| v.sqrt()).collect();
    let mut right = dense.tr_mul(&left.columns(0, rank));
    for (mut col, s) in right.column_iter_mut().zip(&sigma) {
        col /= *s;
    }
    // Re-orthonormalize to clean up the division by small singular values.
    let mut basis = OrthoBasis::new(mat.ncols());
    basis.extend(&right, 0.0);
    TruncatedSvd { values: sigma, vectors: basis.into_matrix(), iterations: 0, residual: 0.0 }
}
