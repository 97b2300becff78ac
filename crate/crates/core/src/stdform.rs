//! Generators in generalized standard form,
//! `𝓛(ρ) = Σ_k L_k ρ L_k† − Mρ − ρM†` with `Σ_k L_k†L_k = M + M†`.

use crate::error::{QdsError, Result};
use crate::linalg::{eig_hermitian, inner, vector_norm, CMatrix, Tolerances, C64, I};
use crate::random::{random_unit_vector, seeded};
use crate::superop::SuperOperator;

/// The pair `(M, {L_k})`.
///
/// `M` is stored directly; there is no canonical Hermitian split of an `M`
/// obtained by decomposition. Kraus order matters for serialization only.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardForm {
    dim: usize,
    m: CMatrix,
    kraus: Vec<CMatrix>,
    chi_index: Option<usize>,
}

impl StandardForm {
    /// Shape checks only; see [`StandardForm::validate`] for the form
    /// equality and accretivity checks.
    pub fn new(m: CMatrix, kraus: Vec<CMatrix>) -> Result<Self> {
        let dim = m.ensure_square()?;
        for (k, l) in kraus.iter().enumerate() {
            if l.rows() != dim || l.cols() != dim {
                return Err(QdsError::DimensionMismatch(format!(
                    "Kraus operator {k} is {}x{}, expected {dim}x{dim}",
                    l.rows(),
                    l.cols()
                )));
            }
        }
        Ok(Self {
            dim,
            m,
            kraus,
            chi_index: None,
        })
    }

    pub fn with_chi_index(mut self, chi_index: Option<usize>) -> Self {
        self.chi_index = chi_index;
        self
    }

    /// `M = iH + ½ Σ_k L_k†L_k`, the norm-continuous GKSL case.
    pub fn from_hamiltonian_jumps(
        h: &CMatrix,
        jumps: Vec<CMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let dim = h.ensure_square()?;
        let residual = h.hermiticity_residual();
        if residual > tol.eq_tol * h.frobenius_norm().max(1.0) {
            return Err(QdsError::NotHermitian { residual });
        }
        let mut m = h.hermitian_part().scale(I);
        let mut half_sum = CMatrix::zeros(dim, dim);
        for l in &jumps {
            half_sum += &(&l.adjoint() * l);
        }
        m += &half_sum.scale_real(0.5);
        Self::new(m, jumps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> &CMatrix {
        &self.m
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn chi_index(&self) -> Option<usize> {
        self.chi_index
    }

    /// `(M − M†)/(2i)`
    pub fn effective_hamiltonian(&self) -> CMatrix {
        (&self.m - &self.m.adjoint()).scale(C64::new(0.0, -0.5))
    }

    /// `Σ_k L_k†L_k`
    pub fn kraus_sum(&self) -> CMatrix {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for l in &self.kraus {
            sum += &(&l.adjoint() * l);
        }
        sum
    }

    /// `M + M†`
    pub fn dissipative_part(&self) -> CMatrix {
        &self.m + &self.m.adjoint()
    }

    /// `‖Σ_k L_k†L_k − M − M†‖_F`
    pub fn verify_form_equality(&self) -> f64 {
        (&self.kraus_sum() - &self.dissipative_part()).frobenius_norm()
    }

    /// `eq_tol · max(1, ‖M + M†‖_F)`
    pub fn form_equality_bound(&self, tol: &Tolerances) -> f64 {
        tol.eq_tol * self.dissipative_part().frobenius_norm().max(1.0)
    }

    /// Smallest eigenvalue of `M + M†`.
    pub fn accretivity_margin(&self) -> f64 {
        eig_hermitian(&self.dissipative_part())
            .expect("square")
            .min_value()
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let residual = self.verify_form_equality();
        let bound = self.form_equality_bound(tol);
        if residual > bound {
            return Err(QdsError::FormEquality { residual, bound });
        }
        let min_eigenvalue = self.accretivity_margin();
        if min_eigenvalue < -tol.psd_tol {
            return Err(QdsError::NotAccretive { min_eigenvalue });
        }
        Ok(())
    }

    /// The superoperator of `𝓛`. Rejects forms violating form equality,
    /// whose generator would not annihilate the trace.
    pub fn build_generator(&self, tol: &Tolerances) -> Result<SuperOperator> {
        let residual = self.verify_form_equality();
        let bound = self.form_equality_bound(tol);
        if residual > bound {
            return Err(QdsError::FormEquality { residual, bound });
        }
        Ok(self.generator_unchecked())
    }

    /// `Σ_k conj(L_k) ⊗ L_k − I ⊗ M − conj(M) ⊗ I`, without validation.
    pub fn generator_unchecked(&self) -> SuperOperator {
        let mut gen = SuperOperator::from_kraus(self.dim, &self.kraus)
            .expect("shapes checked at construction");
        let contraction =
            SuperOperator::anticommutator_like(&self.m).expect("shapes checked at construction");
        gen = gen.sub(&contraction);
        gen
    }

    /// `Σ_k L_k ρ L_k† − Mρ − ρM†` evaluated directly.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(QdsError::DimensionMismatch(format!(
                "state is {}x{}, form acts on dimension {}",
                rho.rows(),
                rho.cols(),
                self.dim
            )));
        }
        let m_rho = &self.m * rho;
        let mut out = -&(&m_rho + &(rho * &self.m.adjoint()));
        for l in &self.kraus {
            out += &(&(l * rho) * &l.adjoint());
        }
        Ok(out)
    }

    /// Kraus list mixed by a coefficient matrix, `L'_k = Σ_j U[k, j] L_j`.
    pub fn remix_kraus(&self, u: &CMatrix) -> Result<Self> {
        if u.cols() != self.kraus.len() {
            return Err(QdsError::DimensionMismatch(format!(
                "mixing matrix has {} columns for {} Kraus operators",
                u.cols(),
                self.kraus.len()
            )));
        }
        let kraus = (0..u.rows())
            .map(|k| {
                let mut acc = CMatrix::zeros(self.dim, self.dim);
                for (j, l) in self.kraus.iter().enumerate() {
                    acc += &l.scale(u[(k, j)]);
                }
                acc
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            m: self.m.clone(),
            kraus,
            chi_index: self.chi_index,
        })
    }
}

/// Sampled check of `Σ_k ‖L_kφ‖² = ⟨φ|(M + M†)|φ⟩ ≤ 2‖φ‖‖Mφ‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeBoundReport {
    pub samples: usize,
    /// Largest `|Σ_k ‖L_kφ‖² − ⟨φ|(M + M†)|φ⟩|`.
    pub max_equality_gap: f64,
    /// Smallest `2‖φ‖‖Mφ‖ − Σ_k ‖L_kφ‖²`; nonnegative when the bound holds.
    pub min_bound_slack: f64,
    pub violations: usize,
}

impl RelativeBoundReport {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

pub fn check_relative_bound(
    sf: &StandardForm,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> RelativeBoundReport {
    let mut rng = seeded(seed);
    let vectors: Vec<Vec<C64>> = (0..samples)
        .map(|_| random_unit_vector(sf.dim, &mut rng))
        .collect();
    relative_bound_on(sf, &vectors, tol)
}

pub fn relative_bound_on(
    sf: &StandardForm,
    vectors: &[Vec<C64>],
    tol: &Tolerances,
) -> RelativeBoundReport {
    let dissipative = sf.dissipative_part();
    let scale = dissipative.frobenius_norm().max(1.0);
    let mut report = RelativeBoundReport {
        samples: vectors.len(),
        max_equality_gap: 0.0,
        min_bound_slack: f64::INFINITY,
        violations: 0,
    };
    for phi in vectors {
        let jump_weight: f64 = sf
            .kraus
            .iter()
            .map(|l| vector_norm(&l.mul_vec(phi).expect("dimensions agree")).powi(2))
            .sum();
        let form = inner(phi, &dissipative.mul_vec(phi).expect("dimensions agree")).re;
        let m_phi = vector_norm(&sf.m.mul_vec(phi).expect("dimensions agree"));
        let gap = (jump_weight - form).abs();
        let slack = 2.0 * vector_norm(phi) * m_phi - jump_weight;
        report.max_equality_gap = report.max_equality_gap.max(gap);
        report.min_bound_slack = report.min_bound_slack.min(slack);
        if gap > tol.eq_tol * scale || slack < -tol.eq_tol * scale {
            report.violations += 1;
        }
    }
    report
}
