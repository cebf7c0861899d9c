//! Dense complex matrices, density operators and the spectral routines the
//! rest of the crate builds on.
//!
//! Matrices are stored row-major. Eigen- and singular-value decompositions are
//! delegated to `nalgebra`; everything else is written directly against the
//! flat buffer.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Numerical tolerances used when validating operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max entrywise deviation from Hermiticity.
    pub herm: f64,
    /// Deviation of the trace from its target.
    pub trace: f64,
    /// Deviation of a vector norm from one.
    pub norm: f64,
    /// Smallest admissible eigenvalue, relative to the trace.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-9,
            trace: 1e-9,
            norm: 1e-9,
            psd: 1e-9,
        }
    }
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a row-major buffer.
    ///
    /// # Errors
    /// Returns [`Error::Shape`] if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// `|i><j|` in dimension `rows x cols`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Checked matrix product.
    ///
    /// # Errors
    /// Returns [`Error::Shape`] when the inner dimensions disagree.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(Error::Shape(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `<v| self |v>` without forming intermediates.
    pub fn quadratic_form(&self, v: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..self.rows {
            let row: C64 = self.row(r).iter().zip(v).map(|(a, b)| a * b).sum();
            acc += v[r].conj() * row;
        }
        acc
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.cols, other.rows);
        debug_assert_eq!(self.rows, other.cols);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        acc
    }

    /// Hilbert-Schmidt inner product `Tr(self^dag other)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Self::from_fn(r, c, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(M + M^dag) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// Deviation of `self^dag self` from the identity (max entry).
    pub fn unitarity_defect(&self) -> f64 {
        match self.adjoint().matmul(self) {
            Ok(p) => (&p - &Self::identity(self.cols)).max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in add"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in sub"
        );
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for the checked form.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

impl std::ops::AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch in add"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues sorted in
/// descending order. Column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// Rebuilds `sum_k f(lambda_k) |v_k><v_k|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d = self.vectors.rows();
        let mut out = ComplexMatrix::zeros(d, d);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..d {
                let vi = self.vectors[(i, k)] * w;
                for j in 0..d {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrised first, so tiny anti-Hermitian noise is ignored.
///
/// # Errors
/// Returns [`Error::Shape`] for non-square input and [`Error::InvalidInput`]
/// when the Hermiticity defect exceeds `1e-6 * (1 + max|m_ij|)`.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "eig of non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let defect = m.hermiticity_defect();
    if defect > 1e-6 * (1.0 + m.max_abs()) {
        return Err(Error::InvalidInput(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let eig = nalgebra::SymmetricEigen::new(m.hermitian_part().to_nalgebra());
    let mut order: Vec<usize> = (0..m.rows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors =
        ComplexMatrix::from_fn(m.rows(), m.rows(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig { values, vectors })
}

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Schatten norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SchattenP {
    One,
    Two,
    Inf,
}

/// Schatten p-norm for p in {1, 2, inf}.
///
/// Hermitian inputs go through the eigenvalues, which is more accurate than
/// an SVD for the nearly-singular differences this crate mostly deals with.
pub fn schatten_norm(m: &ComplexMatrix, p: SchattenP) -> f64 {
    if p == SchattenP::Two {
        return m.frobenius_norm();
    }
    let svals: Vec<f64> = if m.is_square() && m.is_hermitian(1e-12 * (1.0 + m.max_abs())) {
        match hermitian_eig(m) {
            Ok(e) => e.values.iter().map(|v| v.abs()).collect(),
            Err(_) => singular_values(m),
        }
    } else {
        singular_values(m)
    };
    match p {
        SchattenP::One => svals.iter().sum(),
        SchattenP::Inf => svals.iter().copied().fold(0.0, f64::max),
        SchattenP::Two => unreachable!(),
    }
}

pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    schatten_norm(m, SchattenP::One)
}

pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    schatten_norm(m, SchattenP::Inf)
}

/// Square root of a PSD matrix, negative eigenvalues clipped to zero.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(m)?.map(|v| v.max(0.0).sqrt()))
}

/// `m^{-1/2}` for a positive definite matrix.
///
/// # Errors
/// Returns [`Error::Numerical`] if the smallest eigenvalue is not positive.
pub fn inv_sqrt_pd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = hermitian_eig(m)?;
    let min = *e.values.last().unwrap_or(&0.0);
    if min <= 0.0 {
        return Err(Error::Numerical(format!(
            "inverse square root of singular matrix (min eig {min:.3e})"
        )));
    }
    Ok(e.map(|v| 1.0 / v.sqrt()))
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u|v>`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// `u (x) v` for vectors.
pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter()
        .flat_map(|a| v.iter().map(move |b| a * b))
        .collect()
}

/// Normalised maximally entangled vector `(1/sqrt d) sum_i |ii>`.
pub fn max_entangled(d: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); d * d];
    let amp = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = C64::new(amp, 0.0);
    }
    v
}

/// Normalised pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(Vec<C64>);

impl PureState {
    /// # Errors
    /// Returns [`Error::InvalidInput`] if the vector is empty or its norm is
    /// further than the default tolerance from one.
    pub fn new(v: Vec<C64>) -> Result<Self> {
        Self::with_tolerance(v, Tolerances::default().norm)
    }

    pub fn with_tolerance(v: Vec<C64>, tol: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidInput("empty state vector".into()));
        }
        let n = vec_norm(&v);
        if (n - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!("state norm {n} is not 1")));
        }
        Ok(Self(v))
    }

    /// Normalises `v`; fails only for the zero vector.
    pub fn normalized(v: Vec<C64>) -> Result<Self> {
        let n = vec_norm(&v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput(
                "cannot normalise a zero or non-finite vector".into(),
            ));
        }
        Ok(Self(v.into_iter().map(|z| z / n).collect()))
    }

    /// Computational basis vector `|i>`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidInput(format!(
                "basis index {i} out of range for d = {d}"
            )));
        }
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[i] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(ComplexMatrix::outer(&self.0, &self.0))
    }
}

/// Hermitian, PSD, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// # Errors
    /// Returns [`Error::InvalidInput`] if the matrix is not square, not
    /// Hermitian, not unit trace or has an eigenvalue below `-tol.psd`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::InvalidInput(format!(
                "density matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let defect = m.hermiticity_defect();
        if defect > tol.herm {
            return Err(Error::InvalidInput(format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::InvalidInput(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        let min = *hermitian_eig(&m)?.values.last().unwrap();
        if min < -tol.psd {
            return Err(Error::InvalidInput(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self(m))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    /// Wraps a matrix the caller knows to be a state.
    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.0.hs_inner(&self.0).re
    }
}

/// Squared Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, in `[0, 1]`.
///
/// # Errors
/// Returns [`Error::Shape`] when the dimensions differ.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!(
            "fidelity of {}-dim and {}-dim states",
            rho.dim(),
            sigma.dim()
        )));
    }
    // F = ||A^dag B||_1^2 for rho = A A^dag, sigma = B B^dag; eigenvalues at
    // rounding level are dropped so their square roots do not leak in.
    let a = psd_factor(rho.matrix())?;
    let b = psd_factor(sigma.matrix())?;
    if a.cols() == 0 || b.cols() == 0 {
        return Ok(0.0);
    }
    let root: f64 = singular_values(&a.adjoint().matmul(&b)?).iter().sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// Columns `sqrt(lambda_k) v_k` over eigenvalues above rounding level.
fn psd_factor(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = hermitian_eig(m)?;
    let cutoff = 1e-14 * e.values.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..e.values.len())
        .filter(|&k| e.values[k] > cutoff)
        .collect();
    let d = m.rows();
    Ok(ComplexMatrix::from_fn(d, keep.len(), |i, c| {
        e.vectors[(i, keep[c])] * e.values[keep[c]].sqrt()
    }))
}

/// Which tensor factor of a bipartite operator to keep or act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

fn check_bipartite(m: &ComplexMatrix, (da, db): (usize, usize)) -> Result<()> {
    if !m.is_square() || m.rows() != da * db {
        return Err(Error::Shape(format!(
            "{}x{} matrix is not an operator on {da} x {db}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Partial trace over the factor not named by `keep`.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (da, db) = dims;
    Ok(match keep {
        Subsystem::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()
        }),
        Subsystem::B => ComplexMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()
        }),
    })
}

/// Transpose of one tensor factor.
pub fn partial_transpose(
    m: &ComplexMatrix,
    dims: (usize, usize),
    which: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (_, db) = dims;
    let n = m.rows();
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        let (a, b, a2, b2) = (r / db, r % db, c / db, c % db);
        match which {
            Subsystem::A => m[(a2 * db + b, a * db + b2)],
            Subsystem::B => m[(a * db + b2, a2 * db + b)],
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn trace_norm_of_pauli_y() {
        let y = ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
            .unwrap();
        assert!((trace_norm(&y) - 2.0).abs() < 1e-12);
        assert!((operator_norm(&y) - 1.0).abs() < 1e-12);
        assert!((schatten_norm(&y, SchattenP::Two) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_non_hermitian() {
        // singular values of [[0,2],[0,0]] are {2, 0}
        let m = ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(2., 0.), c(0., 0.), c(0., 0.)])
            .unwrap();
        assert!((trace_norm(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_orthogonal_and_equal_states() {
        let z0 = PureState::basis(2, 0).unwrap().projector();
        let z1 = PureState::basis(2, 1).unwrap().projector();
        assert!(fidelity(&z0, &z1).unwrap().abs() < 1e-12);
        assert!((fidelity(&z0, &z0).unwrap() - 1.0).abs() < 1e-12);
        let mix = DensityMatrix::maximally_mixed(2);
        assert!((fidelity(&z0, &mix).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_dimension_mismatch() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(3);
        assert!(matches!(fidelity(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn density_validation() {
        let bad_trace = ComplexMatrix::identity(2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let neg = ComplexMatrix::from_diag(&[1.5, -0.5]);
        assert!(DensityMatrix::new(neg).is_err());
        let nonherm =
            ComplexMatrix::from_vec(2, 2, vec![c(0.5, 0.), c(0.1, 0.), c(0., 0.), c(0.5, 0.)])
                .unwrap();
        assert!(DensityMatrix::new(nonherm).is_err());
        assert!(PureState::new(vec![c(1., 0.), c(1., 0.)]).is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let a = ComplexMatrix::from_diag(&[0.25, 0.75]);
        let b = ComplexMatrix::from_diag(&[0.1, 0.2, 0.7]);
        let ab = a.kron(&b);
        let ta = partial_trace(&ab, (2, 3), Subsystem::A).unwrap();
        let tb = partial_trace(&ab, (2, 3), Subsystem::B).unwrap();
        assert!((&ta - &a).max_abs() < 1e-14);
        assert!((&tb - &b).max_abs() < 1e-14);
    }

    #[test]
    fn partial_transpose_of_bell_state_has_negative_eigenvalue() {
        let psi = max_entangled(2);
        let rho = ComplexMatrix::outer(&psi, &psi);
        let pt = partial_transpose(&rho, (2, 2), Subsystem::B).unwrap();
        let e = hermitian_eig(&pt).unwrap();
        assert!((e.values[3] + 0.5).abs() < 1e-12);
        // transposing both factors is the full transpose
        let both = partial_transpose(&pt, (2, 2), Subsystem::A).unwrap();
        assert!((&both - &rho.transpose()).max_abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs() {
        let m = ComplexMatrix::from_vec(2, 2, vec![c(2., 0.), c(0., 1.), c(0., -1.), c(3., 0.)])
            .unwrap();
        let e = hermitian_eig(&m).unwrap();
        assert!(e.values[0] >= e.values[1]);
        assert!((&e.map(|v| v) - &m).max_abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
        assert!(ComplexMatrix::from_vec(2, 2, vec![c(0., 0.); 3]).is_err());
        assert!(partial_trace(&ComplexMatrix::identity(5), (2, 3), Subsystem::A).is_err());
    }
}
