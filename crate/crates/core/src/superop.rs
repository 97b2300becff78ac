//! Linear maps on operators: the matrix-on-vec representation, Choi
//! matrices, and the positivity tests characterizing channels and generators.
//!
//! Convention (frozen): operators are vectorized by column-major stacking,
//! `vec(ρ)[k + d·l] = ρ[k, l]`. Consequently `ρ ↦ AρB` has matrix `Bᵀ ⊗ A`,
//! and the superoperator entry `S[i + d·j, k + d·l]` equals
//! `⟨e_i|Q(E_{k,l})|e_j⟩`.
//!
//! The Choi matrix is `C = Σ_{k,l} E_{k,l} ⊗ Q(E_{k,l})`, i.e.
//! `C[k·d + i, l·d + j] = ⟨e_i|Q(E_{k,l})|e_j⟩`. The identity map has
//! `C = |Ω⟩⟨Ω|` with the unnormalized `Ω = Σ_i e_i ⊗ e_i`.

use rand::Rng;

use crate::error::{QdsError, Result};
use crate::linalg::{
    eig_hermitian, inner, CMatrix, Tolerances, C64, ONE, ZERO,
};
use crate::random::{random_orthogonal_unit, random_unit_vector, seeded};

/// `E_{row,col} = |e_row⟩⟨e_col|` on a `dim`-dimensional space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MatrixUnit {
    pub row: usize,
    pub col: usize,
    pub dim: usize,
}

impl MatrixUnit {
    pub fn new(row: usize, col: usize, dim: usize) -> Result<Self> {
        if row >= dim || col >= dim {
            return Err(QdsError::InvalidParameter(format!(
                "matrix unit ({row},{col}) out of range for dimension {dim}"
            )));
        }
        Ok(Self { row, col, dim })
    }

    pub fn to_matrix(self) -> CMatrix {
        CMatrix::unit(self.dim, self.row, self.col)
    }

    /// All `d²` units, in vectorization order (`row` fastest).
    pub fn all(dim: usize) -> impl Iterator<Item = MatrixUnit> {
        (0..dim).flat_map(move |col| (0..dim).map(move |row| MatrixUnit { row, col, dim }))
    }
}

/// Matrix of a linear map on `d × d` operators acting on column-major
/// vectorizations.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    mat: CMatrix,
}

impl SuperOperator {
    pub fn new(dim: usize, mat: CMatrix) -> Result<Self> {
        if dim == 0 || mat.rows() != dim * dim || mat.cols() != dim * dim {
            return Err(QdsError::DimensionMismatch(format!(
                "superoperator on dimension {dim} must be {0}x{0}, got {1}x{2}",
                dim * dim,
                mat.rows(),
                mat.cols()
            )));
        }
        Ok(Self { dim, mat })
    }

    /// Infers `d` from a `d² × d²` matrix.
    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        let n = mat.ensure_square()?;
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n {
            return Err(QdsError::DimensionMismatch(format!(
                "superoperator size {n} is not a perfect square"
            )));
        }
        Self::new(d, mat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: CMatrix::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            mat: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// `ρ ↦ AρB`, matrix `Bᵀ ⊗ A`.
    pub fn two_sided(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        let d = a.ensure_square()?;
        if b.rows() != d || b.cols() != d {
            return Err(QdsError::DimensionMismatch(
                "two-sided multiplication needs equal square factors".into(),
            ));
        }
        Ok(Self {
            dim: d,
            mat: b.transpose().kron(a),
        })
    }

    /// `ρ ↦ Aρ`
    pub fn left(a: &CMatrix) -> Result<Self> {
        Self::two_sided(a, &CMatrix::identity(a.rows()))
    }

    /// `ρ ↦ ρB`
    pub fn right(b: &CMatrix) -> Result<Self> {
        Self::two_sided(&CMatrix::identity(b.rows()), b)
    }

    /// `ρ ↦ KρK†`
    pub fn conjugation(k: &CMatrix) -> Result<Self> {
        Self::two_sided(k, &k.adjoint())
    }

    /// `ρ ↦ Σ_α K_α ρ K_α†`. An empty list gives the zero map on `dim`.
    pub fn from_kraus(dim: usize, kraus: &[CMatrix]) -> Result<Self> {
        let mut out = Self::zero(dim);
        for k in kraus {
            let term = Self::conjugation(k)?;
            if term.dim != dim {
                return Err(QdsError::DimensionMismatch(format!(
                    "Kraus operator of dimension {} in a map on dimension {dim}",
                    term.dim
                )));
            }
            out.mat += &term.mat;
        }
        Ok(out)
    }

    /// `ρ ↦ ρᵀ`
    pub fn transpose_map(dim: usize) -> Self {
        Self::from_action(dim, |u| Some(CMatrix::unit(dim, u.col, u.row)))
            .expect("transpose is defined on every matrix unit")
    }

    /// `ρ ↦ Mρ + ρM†`
    pub fn anticommutator_like(m: &CMatrix) -> Result<Self> {
        let a = Self::left(m)?;
        let b = Self::right(&m.adjoint())?;
        Ok(a.add(&b))
    }

    /// Tabulates a map from its action on the `d²` matrix units.
    pub fn from_action(
        dim: usize,
        mut action: impl FnMut(MatrixUnit) -> Option<CMatrix>,
    ) -> Result<Self> {
        let n = dim * dim;
        let mut mat = CMatrix::zeros(n, n);
        for unit in MatrixUnit::all(dim) {
            let image = action(unit).ok_or(QdsError::MissingMatrixUnit {
                row: unit.row,
                col: unit.col,
            })?;
            if image.rows() != dim || image.cols() != dim {
                return Err(QdsError::DimensionMismatch(format!(
                    "image of E[{},{}] is {}x{}, expected {dim}x{dim}",
                    unit.row,
                    unit.col,
                    image.rows(),
                    image.cols()
                )));
            }
            let column = unit.row + dim * unit.col;
            for (r, z) in image.vec().into_iter().enumerate() {
                mat[(r, column)] = z;
            }
        }
        Ok(Self { dim, mat })
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(QdsError::DimensionMismatch(format!(
                "cannot apply superoperator on dimension {} to a {}x{} matrix",
                self.dim,
                rho.rows(),
                rho.cols()
            )));
        }
        CMatrix::unvec(self.dim, &self.mat.mul_vec(&rho.vec())?)
    }

    pub fn apply_unit(&self, unit: MatrixUnit) -> CMatrix {
        let column = unit.row + self.dim * unit.col;
        CMatrix::unvec(self.dim, &self.mat.column(column)).expect("column has d² entries")
    }

    pub fn add(&self, other: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        SuperOperator {
            dim: self.dim,
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        SuperOperator {
            dim: self.dim,
            mat: &self.mat - &other.mat,
        }
    }

    pub fn scale(&self, s: f64) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: self.mat.scale_real(s),
        }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        SuperOperator {
            dim: self.dim,
            mat: &self.mat * &other.mat,
        }
    }

    pub fn to_choi(&self) -> ChoiMatrix {
        to_choi(self)
    }

    /// `max ‖S(ρ†) − S(ρ)†‖_F` over the matrix units.
    pub fn hermiticity_preservation_residual(&self) -> f64 {
        let d = self.dim;
        MatrixUnit::all(d)
            .map(|u| {
                let image = self.apply_unit(u);
                let image_of_adjoint = self.apply_unit(MatrixUnit {
                    row: u.col,
                    col: u.row,
                    dim: d,
                });
                (&image_of_adjoint - &image.adjoint()).frobenius_norm()
            })
            .fold(0.0, f64::max)
    }
}

/// `C[k·d + i, l·d + j] = ⟨e_i|Q(E_{k,l})|e_j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    mat: CMatrix,
}

impl ChoiMatrix {
    pub fn new(dim: usize, mat: CMatrix) -> Result<Self> {
        if mat.rows() != dim * dim || mat.cols() != dim * dim {
            return Err(QdsError::DimensionMismatch(format!(
                "Choi matrix on dimension {dim} must be {0}x{0}",
                dim * dim
            )));
        }
        Ok(Self { dim, mat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

pub fn to_choi(s: &SuperOperator) -> ChoiMatrix {
    let d = s.dim;
    let mat = CMatrix::from_fn(d * d, d * d, |r, c| {
        let (k, i) = (r / d, r % d);
        let (l, j) = (c / d, c % d);
        s.mat[(i + d * j, k + d * l)]
    });
    ChoiMatrix { dim: d, mat }
}

pub fn from_choi(c: &ChoiMatrix) -> SuperOperator {
    let d = c.dim;
    let mat = CMatrix::from_fn(d * d, d * d, |r, col| {
        let (i, j) = (r % d, r / d);
        let (k, l) = (col % d, col / d);
        c.mat[(k * d + i, l * d + j)]
    });
    SuperOperator { dim: d, mat }
}

/// Outcome of a positive-semidefiniteness test on a Choi-type matrix.
#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub passes: bool,
    pub min_eigenvalue: f64,
    /// On failure, the eigenvector of the most negative eigenvalue reshaped
    /// to `d × d` with `W[k, i]` the coefficient of `e_k ⊗ e_i`.
    pub witness: Option<CMatrix>,
}

fn psd_report(dim: usize, m: &CMatrix, tol: &Tolerances) -> PositivityReport {
    let eig = eig_hermitian(m).expect("Choi matrices are square");
    let min_eigenvalue = eig.min_value();
    let passes = min_eigenvalue >= -tol.psd_tol;
    let witness = (!passes).then(|| {
        let v = eig.vector(0);
        CMatrix::from_fn(dim, dim, |k, i| v[k * dim + i])
    });
    PositivityReport {
        passes,
        min_eigenvalue,
        witness,
    }
}

/// Choi criterion: `Q` is completely positive iff its Choi matrix is PSD.
pub fn is_completely_positive(s: &SuperOperator, tol: &Tolerances) -> PositivityReport {
    psd_report(s.dim, to_choi(s).matrix(), tol)
}

/// Projector onto the orthogonal complement of `Ω = Σ_i e_i ⊗ e_i`.
fn omega_complement_projector(dim: usize) -> CMatrix {
    let n = dim * dim;
    let mut p = CMatrix::identity(n);
    let w = 1.0 / dim as f64;
    for a in 0..dim {
        for b in 0..dim {
            p[(a * dim + a, b * dim + b)] -= C64::new(w, 0.0);
        }
    }
    p
}

/// Conditional complete positivity: the Choi matrix compressed to `Ω⊥` is PSD.
///
/// Vectors `Σ_k φ_k ⊗ ψ_k` orthogonal to `Ω` are exactly the families with
/// `Σ_k ⟨φ_k|ψ_k⟩ = 0`.
pub fn is_conditionally_cp(gen: &SuperOperator, tol: &Tolerances) -> PositivityReport {
    let p = omega_complement_projector(gen.dim);
    let compressed = &(&p * to_choi(gen).matrix()) * &p;
    psd_report(gen.dim, &compressed, tol)
}

/// Random sampling of the pointwise positivity conditions on a generator:
/// `⟨φ|𝓛(|φ⟩⟨φ|)|φ⟩ ≤ 0` and `⟨ψ|𝓛(|φ⟩⟨φ|)|ψ⟩ ≥ 0` for `ψ ⊥ φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseReport {
    pub trials: usize,
    /// Largest sampled `Re⟨φ|𝓛(|φ⟩⟨φ|)|φ⟩`.
    pub diagonal_max: f64,
    /// Smallest sampled `Re⟨ψ|𝓛(|φ⟩⟨φ|)|ψ⟩`.
    pub off_diagonal_min: f64,
    pub diagonal_violations: usize,
    pub off_diagonal_violations: usize,
}

impl PointwiseReport {
    pub fn passes(&self) -> bool {
        self.diagonal_violations == 0 && self.off_diagonal_violations == 0
    }
}

pub fn check_pointwise_positivity(
    gen: &SuperOperator,
    trials: usize,
    seed: u64,
    tol: &Tolerances,
) -> PointwiseReport {
    let mut rng = seeded(seed);
    check_pointwise_positivity_with(gen, trials, &mut rng, tol)
}

pub fn check_pointwise_positivity_with(
    gen: &SuperOperator,
    trials: usize,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> PointwiseReport {
    let d = gen.dim;
    let mut report = PointwiseReport {
        trials,
        diagonal_max: f64::NEG_INFINITY,
        off_diagonal_min: f64::INFINITY,
        diagonal_violations: 0,
        off_diagonal_violations: 0,
    };
    for _ in 0..trials.max(1) {
        let phi = random_unit_vector(d, rng);
        let image = gen
            .apply(&CMatrix::outer(&phi, &phi))
            .expect("dimensions agree");
        let diag = inner(&phi, &image.mul_vec(&phi).expect("dimensions agree")).re;
        report.diagonal_max = report.diagonal_max.max(diag);
        if diag > tol.psd_tol {
            report.diagonal_violations += 1;
        }
        if d >= 2 {
            let psi = random_orthogonal_unit(&phi, rng);
            let off = inner(&psi, &image.mul_vec(&psi).expect("dimensions agree")).re;
            report.off_diagonal_min = report.off_diagonal_min.min(off);
            if off < -tol.psd_tol {
                report.off_diagonal_violations += 1;
            }
        }
    }
    if d < 2 {
        report.off_diagonal_min = 0.0;
    }
    report
}

/// `max_{k,l} |Tr 𝓛(E_{k,l})|`.
pub fn trace_annihilation_residual(gen: &SuperOperator) -> f64 {
    let d = gen.dim;
    (0..d * d)
        .map(|col| {
            (0..d)
                .map(|i| gen.mat[(i + d * i, col)])
                .sum::<C64>()
                .norm()
        })
        .fold(0.0, f64::max)
}

/// `|Tr 𝓛(E_{k,l})| ≤ eq_tol · max(1, ‖𝓛‖_F)` for every matrix unit.
pub fn check_trace_annihilation(gen: &SuperOperator, tol: &Tolerances) -> bool {
    trace_annihilation_residual(gen) <= tol.eq_tol * gen.mat.frobenius_norm().max(1.0)
}

/// Sum of `Σ_{k,l} ⟨ψ_k|Q(|φ_k⟩⟨φ_l|)|ψ_l⟩` for a finite family.
pub fn family_form(q: &SuperOperator, phis: &[Vec<C64>], psis: &[Vec<C64>]) -> C64 {
    let mut total = ZERO;
    for (phi_k, psi_k) in phis.iter().zip(psis) {
        for (phi_l, psi_l) in phis.iter().zip(psis) {
            let image = q
                .apply(&CMatrix::outer(phi_k, phi_l))
                .expect("dimensions agree");
            total += inner(psi_k, &image.mul_vec(psi_l).expect("dimensions agree"));
        }
    }
    total
}

/// `Ω = Σ_i e_i ⊗ e_i`, unnormalized, in Choi index order.
pub fn omega(dim: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = ONE;
    }
    v
}
