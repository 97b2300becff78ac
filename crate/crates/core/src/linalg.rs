//! Dense complex matrices and the handful of factorizations the rest of the
//! crate needs.
//!
//! Storage is row-major. Vectorization of operators (see [`CMatrix::vec`]) is
//! column-major stacking, so that the two-sided map `ρ ↦ AρB` has matrix
//! `Bᵀ ⊗ A` on vectorized operators.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QdsError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Comparison thresholds shared by every check in the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative Frobenius tolerance for matrix equality.
    pub eq_tol: f64,
    /// Absolute eigenvalue slack for positive-semidefinite tests.
    pub psd_tol: f64,
    /// Pivot rejection threshold for the Gram factorization, relative to the
    /// Gram trace.
    pub pivot_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eq_tol: 1e-10,
            psd_tol: 1e-10,
            pivot_tol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(eq_tol: f64, psd_tol: f64, pivot_tol: f64) -> Result<Self> {
        for (name, v) in [
            ("eq_tol", eq_tol),
            ("psd_tol", psd_tol),
            ("pivot_tol", pivot_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(QdsError::InvalidTolerance(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        Ok(Self {
            eq_tol,
            psd_tol,
            pivot_tol,
        })
    }

    /// `‖a − b‖_F ≤ eq_tol · max(1, ‖a‖_F, ‖b‖_F)`
    pub fn matrices_equal(&self, a: &CMatrix, b: &CMatrix) -> bool {
        a.rows == b.rows && a.cols == b.cols && relative_distance(a, b) <= self.eq_tol
    }
}

/// `‖a − b‖_F / max(1, ‖a‖_F, ‖b‖_F)`. Panics on shape mismatch.
pub fn relative_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).frobenius_norm();
    diff / 1f64.max(a.frobenius_norm()).max(b.frobenius_norm())
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(QdsError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QdsError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &z) in diag.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Row-major real entries.
    pub fn from_real(rows: usize, cols: usize, re: &[f64]) -> Result<Self> {
        Self::new(rows, cols, re.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// `|a⟩⟨b|`
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |r, c| a[r] * b[c].conj())
    }

    /// Matrix unit `|e_row⟩⟨e_col|` of size `n`.
    pub fn unit(n: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(row, col)] = ONE;
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

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(QdsError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(QdsError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * p];
        for r in 0..n {
            let out_row = &mut out[r * p..(r + 1) * p];
            for k in 0..m {
                let a = self.data[r * m + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(CMatrix {
            rows: n,
            cols: p,
            data: out,
        })
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(QdsError::DimensionMismatch(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> CMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `(A + A†)/2`
    pub fn hermitian_part(&self) -> CMatrix {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// `‖A − A†‖_F`
    pub fn hermiticity_residual(&self) -> f64 {
        (self - &self.adjoint()).frobenius_norm()
    }

    /// Column-major stacking: `vec(A)[r + rows·c] = A[r, c]`.
    pub fn vec(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                v.push(self[(r, c)]);
            }
        }
        v
    }

    /// Inverse of [`CMatrix::vec`] for a square `dim × dim` operator.
    pub fn unvec(dim: usize, v: &[C64]) -> Result<CMatrix> {
        if v.len() != dim * dim {
            return Err(QdsError::DimensionMismatch(format!(
                "vector of length {} does not reshape to {dim}x{dim}",
                v.len()
            )));
        }
        Ok(CMatrix::from_fn(dim, dim, |r, c| v[r + dim * c]))
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (p, q) = (other.rows, other.cols);
        CMatrix::from_fn(self.rows * p, self.cols * q, |r, c| {
            self[(r / p, c / q)] * other[(r % p, c % q)]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> CMatrix {
        CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

fn assert_same_shape(a: &CMatrix, b: &CMatrix) {
    assert!(
        a.rows == b.rows && a.cols == b.cols,
        "shape mismatch: {}x{} vs {}x{}",
        a.rows,
        a.cols,
        b.rows,
        b.cols
    );
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(mut self, rhs: CMatrix) -> CMatrix {
        self += &rhs;
        self
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(mut self, rhs: CMatrix) -> CMatrix {
        self -= &rhs;
        self
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_same_shape(self, rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_same_shape(self, rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

/// Panics on inner-dimension mismatch; use [`CMatrix::matmul`] for a checked product.
impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        &self * &rhs
    }
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vector_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.matmul(b)
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
    /// `‖A − A†‖_F` of the input before symmetrization.
    pub asymmetry: f64,
}

impl HermitianEigen {
    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }
}

/// Symmetrizes `(A + A†)/2` and diagonalizes it.
pub fn eig_hermitian(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.ensure_square()?;
    let asymmetry = a.hermiticity_residual();
    let sym = a.hermitian_part();
    let eig = nalgebra::SymmetricEigen::new(sym.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen {
        values,
        vectors,
        asymmetry,
    })
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let svd = nalgebra::SVD::new(a.to_nalgebra(), false, false);
    svd.singular_values.iter().copied().collect()
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> Result<f64> {
    a.ensure_square()?;
    Ok(singular_values(a).iter().sum())
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a degree-13 Padé
/// approximant.
pub fn matrix_exp(a: &CMatrix) -> Result<CMatrix> {
    let n = a.ensure_square()?;
    let norm = a.norm_one();
    if norm == 0.0 {
        return Ok(CMatrix::identity(n));
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale_real(0.5f64.powi(squarings));
    let b = &PADE13;
    let id = CMatrix::identity(n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lincomb = |c6: f64, c4: f64, c2: f64, c0: f64| {
        let mut m = a6.scale_real(c6);
        m += &a4.scale_real(c4);
        m += &a2.scale_real(c2);
        m += &id.scale_real(c0);
        m
    };
    let inner_u = lincomb(b[13], b[11], b[9], 0.0);
    let u = &scaled * &(&(&a6 * &inner_u) + &lincomb(b[7], b[5], b[3], b[1]));
    let inner_v = lincomb(b[12], b[10], b[8], 0.0);
    let v = &(&a6 * &inner_v) + &lincomb(b[6], b[4], b[2], b[0]);

    let p = (&v + &u).to_nalgebra();
    let q = (&v - &u).to_nalgebra();
    let lu = q.lu();
    let mut r = CMatrix::from_nalgebra(
        &lu.solve(&p)
            .ok_or_else(|| QdsError::InvalidParameter("singular Padé denominator".into()))?,
    );
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !r.is_finite() {
        return Err(QdsError::NonFinite);
    }
    Ok(r)
}
