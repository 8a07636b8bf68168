//! Dense real/complex linear algebra and log-domain arithmetic used by the
//! detectors.
//!
//! Matrices are small (at most a few tens of rows) and stored row-major.
//! Complex values are `num_complex::Complex64`, which is laid out as an
//! interleaved `(re, im)` pair. Inside the PDA detector the canonical
//! representation is the real composite form, where a complex vector `x` of
//! length `n` becomes `[Re x; Im x]` of length `2n`.
//!
//! Routines on the detector hot path take an [`OpCount`] so the harness can
//! report the number of real multiplications actually performed.

use num_complex::Complex64;
use thiserror::Error;

/// Maximum tolerated deviation from Hermitian / complex-symmetric structure.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix dimensions must be strictly positive")]
    Empty,
    #[error("matrix or vector contains a non-finite entry")]
    NonFinite,
    #[error("covariance is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("pseudo-covariance is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Running count of real multiplications (divisions and square roots count
/// as one each; additions are free).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct OpCount(pub u64);

impl OpCount {
    #[inline]
    pub fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }

    pub fn get(&self) -> u64 {
        self.0
    }
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    data: Vec<Complex64>,
}

impl ComplexVector {
    pub fn new(data: Vec<Complex64>) -> Result<Self> {
        if data.is_empty() {
            return Err(NumericsError::Empty);
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        Self {
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// `[Re x; Im x]`.
    pub fn composite(&self) -> Vec<f64> {
        let n = self.data.len();
        let mut out = vec![0.0; 2 * n];
        for (k, z) in self.data.iter().enumerate() {
            out[k] = z.re;
            out[n + k] = z.im;
        }
        out
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl std::ops::Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, k: usize) -> &Complex64 {
        &self.data[k]
    }
}

/// Row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::Empty);
        }
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.data[k * n + k] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from real-valued rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumericsError::DimensionMismatch("ragged rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)))
            .collect();
        Self::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        let cols = columns.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(NumericsError::DimensionMismatch("ragged columns".into()));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (r, z) in col.iter().enumerate() {
                data[r * cols + j] = *z;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> Result<ComplexVector> {
        if x.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let data = (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(x.as_slice())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(ComplexVector { data })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// Largest `|A - A^H|` entry.
    pub fn hermitian_deviation(&self) -> f64 {
        self.structure_deviation(|z| z.conj())
    }

    /// Largest `|A - A^T|` entry.
    pub fn symmetric_deviation(&self) -> f64 {
        self.structure_deviation(|z| z)
    }

    fn structure_deviation(&self, f: impl Fn(Complex64) -> Complex64) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self.get(r, c) - f(self.get(c, r))).norm());
            }
        }
        worst
    }
}

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::Empty);
        }
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, value: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.data[k * n + k] = value;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            m.data[k * n + k] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<RealMatrix> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = RealMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> RealMatrix {
        let mut out = RealMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &RealMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|A - A^T|` entry; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }

    fn mirror_upper(&mut self) {
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                let v = self.get(r, c);
                self.set(c, r, v);
            }
        }
    }
}

/// The `2N_r x 2N_r` real composite covariance of an improper complex
/// Gaussian vector, kept together with the complex covariance and
/// pseudo-covariance it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeCovariance {
    lambda: RealMatrix,
    cov: ComplexMatrix,
    pseudo: ComplexMatrix,
}

impl CompositeCovariance {
    pub fn matrix(&self) -> &RealMatrix {
        &self.lambda
    }

    pub fn covariance(&self) -> &ComplexMatrix {
        &self.cov
    }

    pub fn pseudo_covariance(&self) -> &ComplexMatrix {
        &self.pseudo
    }

    pub fn inverse(&self) -> Result<RealMatrix> {
        pd_inverse(&self.lambda)
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.lambda
    }
}

/// Assembles `[Re(C+P), -Im(C-P); Im(C+P), Re(C-P)]` from a Hermitian
/// covariance `C` and a complex-symmetric pseudo-covariance `P`.
pub fn compose_covariance(cov: &ComplexMatrix, pseudo: &ComplexMatrix) -> Result<CompositeCovariance> {
    let n = cov.rows();
    if cov.cols() != n || pseudo.rows() != n || pseudo.cols() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "covariance {}x{}, pseudo-covariance {}x{}",
            cov.rows(),
            cov.cols(),
            pseudo.rows(),
            pseudo.cols()
        )));
    }
    let dev = cov.hermitian_deviation();
    if dev > STRUCTURE_TOL {
        return Err(NumericsError::NotHermitian(dev));
    }
    let dev = pseudo.symmetric_deviation();
    if dev > STRUCTURE_TOL {
        return Err(NumericsError::NotSymmetric(dev));
    }
    let mut lambda = RealMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let sum = cov.get(r, c) + pseudo.get(r, c);
            let diff = cov.get(r, c) - pseudo.get(r, c);
            lambda.set(r, c, sum.re);
            lambda.set(r, n + c, -diff.im);
            lambda.set(n + r, c, sum.im);
            lambda.set(n + r, n + c, diff.re);
        }
    }
    // Symmetrise away the sub-tolerance Hermitian residue.
    for r in 0..2 * n {
        for c in r + 1..2 * n {
            let v = 0.5 * (lambda.get(r, c) + lambda.get(c, r));
            lambda.set(r, c, v);
            lambda.set(c, r, v);
        }
    }
    Ok(CompositeCovariance {
        lambda,
        cov: cov.clone(),
        pseudo: pseudo.clone(),
    })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &RealMatrix, ops: &mut OpCount) -> Result<RealMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumericsError::DimensionMismatch(
            "Cholesky of a non-square matrix".into(),
        ));
    }
    let mut l = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        ops.add(j);
        if !(d > 0.0) || !d.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l.set(j, j, d);
        ops.add(1);
        let inv = 1.0 / d;
        ops.add(1);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s * inv);
            ops.add(j + 1);
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
///
/// Factorisation failure is reported as [`NumericsError::NotPositiveDefinite`];
/// the input is never regularised.
pub fn pd_inverse(a: &RealMatrix) -> Result<RealMatrix> {
    pd_inverse_counted(a, &mut OpCount::default())
}

pub fn pd_inverse_counted(a: &RealMatrix, ops: &mut OpCount) -> Result<RealMatrix> {
    let n = a.rows();
    let l = cholesky(a, ops)?;
    // Invert the lower factor in place: m = L^{-1}.
    let mut m = RealMatrix::zeros(n, n);
    for j in 0..n {
        let d = 1.0 / l.get(j, j);
        m.set(j, j, d);
        ops.add(1);
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s += l.get(i, k) * m.get(k, j);
            }
            ops.add(i - j);
            m.set(i, j, -s / l.get(i, i));
            ops.add(1);
        }
    }
    // A^{-1} = L^{-T} L^{-1}; only the upper triangle is computed.
    let mut inv = RealMatrix::zeros(n, n);
    for r in 0..n {
        for c in r..n {
            let mut s = 0.0;
            for k in c..n {
                s += m.get(k, r) * m.get(k, c);
            }
            ops.add(n - c);
            inv.set(r, c, s);
        }
    }
    inv.mirror_upper();
    Ok(inv)
}

/// Rank-2 composite term `G D G^T` contributed by one symbol with variance
/// `C` and pseudo-variance `C_p` along channel column `h`.
///
/// `G = [g1 g2]` with `g1 = [Re h; Im h]` and `g2 = [-Im h; Re h]` (the
/// composite of `j h`), and
/// `D = [[C + Re C_p, Im C_p], [Im C_p, C - Re C_p]]`.
/// This equals `compose_covariance(C h h^H, C_p h h^T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTwoTerm {
    g1: Vec<f64>,
    g2: Vec<f64>,
    core: [[f64; 2]; 2],
}

impl RankTwoTerm {
    pub fn new(h: &[Complex64], variance: f64, pseudo: Complex64) -> Self {
        let n = h.len();
        let mut g1 = vec![0.0; 2 * n];
        let mut g2 = vec![0.0; 2 * n];
        for (k, z) in h.iter().enumerate() {
            g1[k] = z.re;
            g1[n + k] = z.im;
            g2[k] = -z.im;
            g2[n + k] = z.re;
        }
        let core = [[variance + pseudo.re, pseudo.im], [pseudo.im, variance - pseudo.re]];
        Self { g1, g2, core }
    }

    pub fn dim(&self) -> usize {
        self.g1.len()
    }

    pub fn is_zero(&self) -> bool {
        self.core.iter().flatten().all(|&v| v == 0.0)
    }

    /// `target += sign * G D G^T`.
    pub fn accumulate(&self, target: &mut RealMatrix, sign: f64, ops: &mut OpCount) {
        let n = self.dim();
        debug_assert_eq!(target.rows(), n);
        if self.is_zero() {
            return;
        }
        let d = &self.core;
        // (G D) columns.
        let a: Vec<f64> = (0..n).map(|k| self.g1[k] * d[0][0] + self.g2[k] * d[1][0]).collect();
        let b: Vec<f64> = (0..n).map(|k| self.g1[k] * d[0][1] + self.g2[k] * d[1][1]).collect();
        ops.add(4 * n);
        for r in 0..n {
            for c in r..n {
                let v = sign * (a[r] * self.g1[c] + b[r] * self.g2[c]);
                target.data[r * n + c] += v;
                if c != r {
                    target.data[c * n + r] += v;
                }
            }
        }
        ops.add(n * (n + 1));
    }
}

/// Inverse of `A + sign * G D G^T` given `A^{-1}`, via the
/// Sherman-Morrison-Woodbury identity in the form
/// `A^{-1} - A^{-1} G K G^T A^{-1}` with `K = sign * D (I + sign * S D)^{-1}`
/// and `S = G^T A^{-1} G`. This form stays valid for singular `D`.
///
/// For a downdate (`sign < 0`) the result is positive definite iff both
/// eigenvalues of `I - S D` are positive; otherwise the call fails.
pub fn rank_two_update(inverse: &RealMatrix, term: &RankTwoTerm, sign: f64, ops: &mut OpCount) -> Result<RealMatrix> {
    let n = inverse.rows();
    if inverse.cols() != n || term.dim() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "{}x{} inverse with a rank-2 term of dimension {}",
            inverse.rows(),
            inverse.cols(),
            term.dim()
        )));
    }
    if term.is_zero() {
        return Ok(inverse.clone());
    }
    // Z = A^{-1} G
    let mut z1 = vec![0.0; n];
    let mut z2 = vec![0.0; n];
    for r in 0..n {
        let row = inverse.row(r);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for k in 0..n {
            s1 += row[k] * term.g1[k];
            s2 += row[k] * term.g2[k];
        }
        z1[r] = s1;
        z2[r] = s2;
    }
    ops.add(2 * n * n);
    // S = G^T Z (symmetric)
    let s11: f64 = term.g1.iter().zip(&z1).map(|(a, b)| a * b).sum();
    let s12: f64 = term.g1.iter().zip(&z2).map(|(a, b)| a * b).sum();
    let s22: f64 = term.g2.iter().zip(&z2).map(|(a, b)| a * b).sum();
    ops.add(3 * n);
    let d = &term.core;
    // M = I + sign * S D
    let m11 = 1.0 + sign * (s11 * d[0][0] + s12 * d[1][0]);
    let m12 = sign * (s11 * d[0][1] + s12 * d[1][1]);
    let m21 = sign * (s12 * d[0][0] + s22 * d[1][0]);
    let m22 = 1.0 + sign * (s12 * d[0][1] + s22 * d[1][1]);
    ops.add(8);
    let det = m11 * m22 - m12 * m21;
    let trace = m11 + m22;
    ops.add(2);
    if !(det > 0.0) || !(trace > 0.0) {
        return Err(NumericsError::NotPositiveDefinite {
            pivot: 0,
            value: det.min(trace),
        });
    }
    let inv_det = 1.0 / det;
    let (i11, i12, i21, i22) = (m22 * inv_det, -m12 * inv_det, -m21 * inv_det, m11 * inv_det);
    ops.add(5);
    // K = sign * D M^{-1}
    let k11 = sign * (d[0][0] * i11 + d[0][1] * i21);
    let k12 = sign * (d[0][0] * i12 + d[0][1] * i22);
    let k21 = sign * (d[1][0] * i11 + d[1][1] * i21);
    let k22 = sign * (d[1][0] * i12 + d[1][1] * i22);
    ops.add(8);
    let k12 = 0.5 * (k12 + k21);
    // Y = Z K
    let y1: Vec<f64> = (0..n).map(|r| z1[r] * k11 + z2[r] * k12).collect();
    let y2: Vec<f64> = (0..n).map(|r| z1[r] * k12 + z2[r] * k22).collect();
    ops.add(4 * n);
    let mut out = inverse.clone();
    for r in 0..n {
        for c in r..n {
            let v = out.get(r, c) - (y1[r] * z1[c] + y2[r] * z2[c]);
            out.set(r, c, v);
        }
    }
    ops.add(n * (n + 1));
    out.mirror_upper();
    for k in 0..n {
        let v = out.get(k, k);
        if !(v > 0.0) || !v.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { pivot: k, value: v });
        }
    }
    Ok(out)
}

/// Inverse of the total composite covariance with one symbol's rank-2
/// contribution removed.
pub fn downdate_inverse(total_inverse: &RealMatrix, contribution: &RankTwoTerm) -> Result<RealMatrix> {
    rank_two_update(total_inverse, contribution, -1.0, &mut OpCount::default())
}

/// `-w^T A w` for a symmetric `A`.
pub fn quadratic_form(w: &[f64], inverse: &RealMatrix) -> Result<f64> {
    quadratic_form_counted(w, inverse, &mut OpCount::default())
}

pub fn quadratic_form_counted(w: &[f64], inverse: &RealMatrix, ops: &mut OpCount) -> Result<f64> {
    let n = w.len();
    if inverse.rows() != n || inverse.cols() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "length-{n} vector with a {}x{} matrix",
            inverse.rows(),
            inverse.cols()
        )));
    }
    let mut acc = 0.0;
    for r in 0..n {
        let row = inverse.row(r);
        let mut s = 0.0;
        for c in 0..n {
            s += row[c] * w[c];
        }
        acc += w[r] * s;
    }
    ops.add(n * n + n);
    Ok(-acc)
}

/// Jacobian logarithm `ln(e^a + e^b)`.
#[inline]
pub fn max_star(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    a.max(b) + (-(a - b).abs()).exp().ln_1p()
}

#[inline]
pub fn max_star_maxlog(a: f64, b: f64) -> f64 {
    a.max(b)
}

const CORRECTION_STEP: f64 = 0.5;
/// `ln(1 + e^{-x})` sampled at the centre of each `[k/2, (k+1)/2)` bin.
const CORRECTION_TABLE: [f64; 8] = [
    0.5759394198788436,
    0.38687100611489994,
    0.2519290813453729,
    0.16022415043808724,
    0.10020655891674721,
    0.061967589003198625,
    0.038041371687783126,
    0.02324546437242503,
];

/// Max-log with an 8-entry tabulated correction term.
#[inline]
pub fn max_star_table(a: f64, b: f64) -> f64 {
    // The ninth slot is the zero correction beyond the table.
    const PADDED: [f64; 9] = {
        let mut t = [0.0; 9];
        let mut k = 0;
        while k < 8 {
            t[k] = CORRECTION_TABLE[k];
            k += 1;
        }
        t
    };
    let m = a.max(b);
    let bin = ((a - b).abs() * (1.0 / CORRECTION_STEP)).min(8.0) as usize;
    m + PADDED[bin]
}

/// How pairs of log-domain values are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogSumMode {
    /// Exact Jacobian logarithm.
    #[default]
    Exact,
    /// `max(a, b)`.
    MaxLog,
    /// `max(a, b)` plus a lookup-table correction ("approximate log-MAP").
    Table,
}

impl LogSumMode {
    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            LogSumMode::Exact => max_star(a, b),
            LogSumMode::MaxLog => max_star_maxlog(a, b),
            LogSumMode::Table => max_star_table(a, b),
        }
    }

    /// Left fold of [`combine`](Self::combine) starting from `-inf`.
    pub fn fold<I: IntoIterator<Item = f64>>(self, values: I) -> f64 {
        values
            .into_iter()
            .fold(f64::NEG_INFINITY, |acc, v| self.combine(acc, v))
    }
}

impl std::str::FromStr for LogSumMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "log-map" => Ok(LogSumMode::Exact),
            "max-log" | "maxlog" => Ok(LogSumMode::MaxLog),
            "table" | "approx" | "approximate" => Ok(LogSumMode::Table),
            other => Err(format!("unknown log-sum mode `{other}`")),
        }
    }
}

impl std::fmt::Display for LogSumMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogSumMode::Exact => write!(f, "exact"),
            LogSumMode::MaxLog => write!(f, "max-log"),
            LogSumMode::Table => write!(f, "table"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_spd(n: usize, rng: &mut impl Rng) -> RealMatrix {
        let a = RealMatrix::new(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut m = a.matmul(&a.transpose()).unwrap();
        for k in 0..n {
            m.set(k, k, m.get(k, k) + 1.0);
        }
        m
    }

    #[test]
    fn noise_only_composite_is_scaled_identity() {
        let sigma2 = 0.3;
        let cov = ComplexMatrix::identity(3).scale(2.0 * sigma2);
        let pseudo = ComplexMatrix::zeros(3, 3);
        let lam = compose_covariance(&cov, &pseudo).unwrap();
        assert!(lam.matrix().max_abs_diff(&RealMatrix::scaled_identity(6, 2.0 * sigma2)) < 1e-15);
    }

    #[test]
    fn fully_improper_scalar() {
        let cov = ComplexMatrix::identity(1);
        let pseudo = ComplexMatrix::identity(1);
        let lam = compose_covariance(&cov, &pseudo).unwrap();
        assert_eq!(lam.matrix().as_slice(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn real_pam_interference_block_assembly() {
        // Two receive antennas, real channel column, interference variance 5.
        let sigma2 = 0.631;
        let h2 = [c(-1.0689, 0.0), c(-0.8095, 0.0)];
        let mut cov = ComplexMatrix::identity(2).scale(2.0 * sigma2);
        let mut pseudo = ComplexMatrix::zeros(2, 2);
        for r in 0..2 {
            for col in 0..2 {
                cov.set(r, col, cov.get(r, col) + h2[r] * h2[col].conj() * 5.0);
                pseudo.set(r, col, h2[r] * h2[col] * 5.0);
            }
        }
        let lam = compose_covariance(&cov, &pseudo).unwrap();
        // Direct block assembly: real signals put all interference energy in
        // the real-part block and leave the imaginary block at the noise level.
        let mut expected = RealMatrix::zeros(4, 4);
        for r in 0..2 {
            for col in 0..2 {
                let noise = if r == col { 2.0 * sigma2 } else { 0.0 };
                expected.set(r, col, noise + 10.0 * h2[r].re * h2[col].re);
                expected.set(2 + r, 2 + col, noise);
            }
        }
        assert!(lam.matrix().max_abs_diff(&expected) < 1e-12);
        assert!(lam.matrix().asymmetry() <= 1e-12);
        // The same Λ through the rank-2 term route.
        let mut via_term = RealMatrix::scaled_identity(4, 2.0 * sigma2);
        RankTwoTerm::new(&h2, 5.0, c(5.0, 0.0)).accumulate(&mut via_term, 1.0, &mut OpCount::default());
        assert!(via_term.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn compose_rejects_bad_inputs() {
        let cov = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let pseudo = ComplexMatrix::zeros(2, 2);
        assert!(matches!(
            compose_covariance(&cov, &pseudo),
            Err(NumericsError::NotHermitian(_))
        ));
        let good = ComplexMatrix::identity(2);
        let asym = ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            compose_covariance(&good, &asym),
            Err(NumericsError::NotSymmetric(_))
        ));
        assert!(matches!(
            compose_covariance(&good, &ComplexMatrix::zeros(3, 3)),
            Err(NumericsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn proper_specialisation_block_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let cols: Vec<Vec<Complex64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let a = ComplexMatrix::from_columns(&cols).unwrap();
        let mut cov = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for col in 0..n {
                let v: Complex64 = (0..n).map(|k| a.get(r, k) * a.get(col, k).conj()).sum();
                cov.set(r, col, v);
            }
        }
        let lam = compose_covariance(&cov, &ComplexMatrix::zeros(n, n)).unwrap();
        for r in 0..n {
            for col in 0..n {
                let z = cov.get(r, col);
                assert!((lam.matrix().get(r, col) - z.re).abs() < 1e-12);
                assert!((lam.matrix().get(r, n + col) + z.im).abs() < 1e-12);
                assert!((lam.matrix().get(n + r, col) - z.im).abs() < 1e-12);
                assert!((lam.matrix().get(n + r, n + col) - z.re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_small_cases() {
        assert_eq!(pd_inverse(&RealMatrix::identity(4)).unwrap(), RealMatrix::identity(4));
        let inv = pd_inverse(&RealMatrix::diag(&[2.0, 2.0])).unwrap();
        assert!(inv.max_abs_diff(&RealMatrix::diag(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn inverse_residual_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 6, 8, 12, 16] {
            for _ in 0..20 {
                let a = random_spd(n, &mut rng);
                let inv = pd_inverse(&a).unwrap();
                let prod = a.matmul(&inv).unwrap();
                assert!(prod.max_abs_diff(&RealMatrix::identity(n)) <= 1e-9, "n = {n}");
                assert!(inv.asymmetry() == 0.0);
            }
        }
    }

    #[test]
    fn inverse_reports_non_pd() {
        let singular = RealMatrix::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            pd_inverse(&singular),
            Err(NumericsError::NotPositiveDefinite { .. })
        ));
        let indefinite = RealMatrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            pd_inverse(&indefinite),
            Err(NumericsError::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn zero_rank_downdate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inv = pd_inverse(&random_spd(4, &mut rng)).unwrap();
        let term = RankTwoTerm::new(&[c(1.0, 2.0), c(-0.5, 0.1)], 0.0, c(0.0, 0.0));
        assert_eq!(downdate_inverse(&inv, &term).unwrap(), inv);
    }

    #[test]
    fn downdate_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for nr in 1..=8 {
            for _ in 0..25 {
                let sigma2 = rng.random_range(0.05..2.0);
                let h: Vec<Complex64> = (0..nr)
                    .map(|_| c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
                    .collect();
                let var = rng.random_range(0.0..2.0);
                let pmag = rng.random_range(0.0..=var);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let term = RankTwoTerm::new(&h, var, Complex64::from_polar(pmag, phase));
                let base = random_spd(2 * nr, &mut rng);
                let mut base = base;
                for k in 0..2 * nr {
                    base.set(k, k, base.get(k, k) + 2.0 * sigma2);
                }
                let mut total = base.clone();
                term.accumulate(&mut total, 1.0, &mut OpCount::default());
                let down = downdate_inverse(&pd_inverse(&total).unwrap(), &term).unwrap();
                let direct = pd_inverse(&base).unwrap();
                assert!(down.max_abs_diff(&direct) <= 1e-8, "nr = {nr}");
            }
        }
    }

    #[test]
    fn downdate_detects_loss_of_definiteness() {
        // Removing more energy than the matrix holds.
        let inv = pd_inverse(&RealMatrix::identity(2)).unwrap();
        let term = RankTwoTerm::new(&[c(1.0, 0.0)], 2.0, c(0.0, 0.0));
        assert!(matches!(
            downdate_inverse(&inv, &term),
            Err(NumericsError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn quadratic_form_cases() {
        assert_eq!(quadratic_form(&[0.0, 0.0], &RealMatrix::identity(2)).unwrap(), 0.0);
        assert_eq!(
            quadratic_form(&[1.0, 1.0], &RealMatrix::diag(&[0.5, 0.5])).unwrap(),
            -1.0
        );
        assert!(matches!(
            quadratic_form(&[1.0], &RealMatrix::identity(2)),
            Err(NumericsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn quadratic_form_noise_only_is_scaled_distance() {
        let sigma2 = 0.4;
        let y = ComplexVector::new(vec![c(0.3, -1.2), c(0.9, 0.4)]).unwrap();
        let h = [c(0.5, 0.5), c(-1.0, 0.2)];
        let a = c(-0.7071, 0.7071);
        let w = ComplexVector::new(y.as_slice().iter().zip(&h).map(|(yy, hh)| yy - a * hh).collect()).unwrap();
        let inv = pd_inverse(&RealMatrix::scaled_identity(4, 2.0 * sigma2)).unwrap();
        let beta = quadratic_form(&w.composite(), &inv).unwrap();
        assert!((beta + w.norm_sqr() / (2.0 * sigma2)).abs() < 1e-12);
    }

    #[test]
    fn max_star_values() {
        assert!((max_star(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(max_star(3.5, f64::NEG_INFINITY), 3.5);
        assert_eq!(max_star(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        let direct = (1f64.exp() + 2f64.exp()).ln();
        assert!((max_star(1.0, 2.0) - direct).abs() < 1e-14);
        assert!((max_star(1.0, 2.0) - 2.313_261_687_518_223).abs() < 1e-12);
        assert_eq!(max_star_maxlog(1.0, 2.0), 2.0);
    }

    #[test]
    fn correction_table_matches_bin_centres() {
        for (k, v) in CORRECTION_TABLE.iter().enumerate() {
            let x = (k as f64 + 0.5) * CORRECTION_STEP;
            assert!((v - (-x).exp().ln_1p()).abs() < 1e-12);
        }
        assert_eq!(max_star_table(10.0, 0.0), 10.0);
        assert!((max_star_table(0.0, 0.0) - max_star(0.0, 0.0)).abs() < 0.12);
    }

    proptest::proptest! {
        #[test]
        fn max_star_bounds(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let exact = max_star(a, b);
            let approx = max_star_maxlog(a, b);
            proptest::prop_assert!(approx <= exact);
            proptest::prop_assert!(exact <= approx + std::f64::consts::LN_2 + 1e-15);
        }

        #[test]
        fn max_star_fold_matches_compensated_sum(values in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            // Kahan-compensated sum of exponentials as the reference.
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for v in &values {
                let y = v.exp() - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            let folded = LogSumMode::Exact.fold(values.iter().copied());
            proptest::prop_assert!((folded - sum.ln()).abs() <= 1e-12);
        }

        #[test]
        fn composite_is_symmetric(entries in proptest::collection::vec(-2.0f64..2.0, 16)) {
            let n = 2;
            let mut cov = ComplexMatrix::zeros(n, n);
            let mut pseudo = ComplexMatrix::zeros(n, n);
            for r in 0..n {
                for col in r..n {
                    let k = 4 * (r * n + col);
                    let z = if r == col { c(entries[k].abs(), 0.0) } else { c(entries[k], entries[k + 1]) };
                    cov.set(r, col, z);
                    cov.set(col, r, z.conj());
                    let p = c(entries[k + 2], entries[k + 3]);
                    pseudo.set(r, col, p);
                    pseudo.set(col, r, p);
                }
            }
            let lam = compose_covariance(&cov, &pseudo).unwrap();
            proptest::prop_assert!(lam.matrix().asymmetry() <= 1e-12);
        }
    }
}
