//! From a generator back to a standard form.
//!
//! The pipeline: extract `M` from the generator and a unit reference vector
//! `χ`, form the expander `𝓛₊ = 𝓛 + 𝓜` (completely positive), read its Gram
//! data, and factor that Gram matrix by the ordered Gram-Schmidt recursion
//! (a Cholesky factorization with pivot rejection) into generalized Kraus
//! operators.
//!
//! Gram convention: with basis labels `(i, k)` ranked by [`PairOrdering`],
//! `G[α(i,k), α(j,l)] = ⟨e_i|Q(E_{k,l})|e_j⟩ = ⟨Φ_{i,k}|Φ_{j,l}⟩`. Writing
//! `Φ_α = Σ_{β≤α} γ_{α,β} b_β` in an orthonormal basis `b_β` gives
//! `G = conj(Γ)·Γᵀ`, equivalently `Γ·Γ† = conj(G)`, and the Kraus operators
//! are `K_α[i, k] = conj(γ_{α(i,k), α})`.

use crate::error::{QdsError, Result};
use crate::linalg::{eig_hermitian, inner, trace_norm, vector_norm, CMatrix, Tolerances, C64, ZERO};
use crate::random::{random_density_matrix, random_unit_vector, random_vector};
use rand::Rng;
use crate::stdform::StandardForm;
use crate::superop::{
    check_trace_annihilation, is_completely_positive, is_conditionally_cp,
    trace_annihilation_residual, ChoiMatrix, SuperOperator,
};

/// `Mψ = −𝓛(|ψ⟩⟨χ|)χ + ½⟨χ|𝓛(|χ⟩⟨χ|)|χ⟩ψ`, assembled column by column on
/// the basis vectors.
pub fn extract_m(gen: &SuperOperator, chi: &[C64], tol: &Tolerances) -> Result<CMatrix> {
    let d = gen.dim();
    if chi.len() != d {
        return Err(QdsError::DimensionMismatch(format!(
            "reference vector has length {}, generator acts on dimension {d}",
            chi.len()
        )));
    }
    let norm = vector_norm(chi);
    if (norm - 1.0).abs() > tol.eq_tol {
        return Err(QdsError::NonUnitVector { norm });
    }
    let on_chi = gen.apply(&CMatrix::outer(chi, chi))?;
    let shift = 0.5 * inner(chi, &on_chi.mul_vec(chi)?);
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        let mut e_j = vec![ZERO; d];
        e_j[j] = C64::new(1.0, 0.0);
        let image = gen.apply(&CMatrix::outer(&e_j, chi))?.mul_vec(chi)?;
        for (r, z) in image.into_iter().enumerate() {
            m[(r, j)] = -z;
        }
        m[(j, j)] += shift;
    }
    Ok(m)
}

/// `𝓛₊ : ρ ↦ 𝓛(ρ) + Mρ + ρM†`
pub fn expander(gen: &SuperOperator, m: &CMatrix) -> Result<SuperOperator> {
    if m.rows() != gen.dim() || m.cols() != gen.dim() {
        return Err(QdsError::DimensionMismatch(format!(
            "M is {}x{}, generator acts on dimension {}",
            m.rows(),
            m.cols(),
            gen.dim()
        )));
    }
    Ok(gen.add(&SuperOperator::anticommutator_like(m)?))
}

/// Ranking of basis index pairs, `α(i, k) = n² + n + i − k` with
/// `n = max(i, k)` (the one-based rule `n² − n + i − k` shifted to zero-based
/// labels), applied after cyclically relabelling the basis by `shift`.
///
/// Pairs sharing `n` form a contiguous block `n² .. (n+1)²`, so the ranking
/// is a bijection onto `0 .. d²` and `α(0, 0) = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairOrdering {
    dim: usize,
    shift: usize,
}

impl PairOrdering {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_shift(dim, 0)
    }

    /// Basis relabelled so that label `0` is original index `shift`.
    pub fn with_shift(dim: usize, shift: usize) -> Result<Self> {
        if dim == 0 || shift >= dim {
            return Err(QdsError::InvalidParameter(format!(
                "pair ordering needs dim ≥ 1 and shift < dim, got dim {dim}, shift {shift}"
            )));
        }
        let ord = Self { dim, shift };
        let mut seen = vec![false; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                let a = ord.rank(i, k);
                if a >= dim * dim || seen[a] || ord.pair(a) != (i, k) {
                    return Err(QdsError::InvalidParameter(format!(
                        "pair ranking is not a bijection at ({i},{k})"
                    )));
                }
                seen[a] = true;
            }
        }
        Ok(ord)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    fn relabel(&self, i: usize) -> usize {
        (i + self.dim - self.shift) % self.dim
    }

    fn original(&self, label: usize) -> usize {
        (label + self.shift) % self.dim
    }

    /// Rank of the original index pair `(i, k)`.
    pub fn rank(&self, i: usize, k: usize) -> usize {
        let (i, k) = (self.relabel(i), self.relabel(k));
        let n = i.max(k);
        n * n + n + i - k
    }

    /// Inverse of [`PairOrdering::rank`].
    pub fn pair(&self, alpha: usize) -> (usize, usize) {
        let mut n = (alpha as f64).sqrt() as usize;
        while n * n > alpha {
            n -= 1;
        }
        while (n + 1) * (n + 1) <= alpha {
            n += 1;
        }
        let centre = n * n + n;
        let (i, k) = if alpha >= centre {
            (n, n - (alpha - centre))
        } else {
            (n - (centre - alpha), n)
        };
        (self.original(i), self.original(k))
    }
}

/// `G[α(i,k), α(j,l)] = ⟨e_i|Q(E_{k,l})|e_j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    dim: usize,
    mat: CMatrix,
    ordering: PairOrdering,
}

impl GramMatrix {
    pub fn from_map(q: &SuperOperator, ordering: &PairOrdering) -> Result<Self> {
        let d = q.dim();
        if ordering.dim != d {
            return Err(QdsError::DimensionMismatch(format!(
                "ordering for dimension {}, map on dimension {d}",
                ordering.dim
            )));
        }
        let s = q.matrix();
        let mat = CMatrix::from_fn(d * d, d * d, |a, b| {
            let (i, k) = ordering.pair(a);
            let (j, l) = ordering.pair(b);
            s[(i + d * j, k + d * l)]
        });
        Ok(Self {
            dim: d,
            mat,
            ordering: ordering.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn ordering(&self) -> &PairOrdering {
        &self.ordering
    }

    /// `Σ_α ‖Φ_α‖² = Tr Q(I)`
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }
}

/// Lower-triangular `Γ` in the pair ordering, with `Γ·Γ† = conj(G)`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    pub gamma: CMatrix,
    /// Pivots `β` with `γ_{β,β} = 0`; their columns are zero.
    pub rejected_pivots: Vec<usize>,
    pub ordering: PairOrdering,
}

impl CholeskyFactor {
    /// `conj(Γ)·Γᵀ`, which reproduces the Gram matrix.
    pub fn gram(&self) -> CMatrix {
        &self.gamma.conj() * &self.gamma.transpose()
    }

    pub fn rank(&self) -> usize {
        self.gamma.rows() - self.rejected_pivots.len()
    }
}

/// Operators with `Q(ρ) = Σ_α K_α ρ K_α†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(dim: usize, operators: Vec<CMatrix>) -> Result<Self> {
        if operators.iter().any(|k| k.rows() != dim || k.cols() != dim) {
            return Err(QdsError::DimensionMismatch(format!(
                "Kraus operators must be {dim}x{dim}"
            )));
        }
        Ok(Self { dim, operators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn into_operators(self) -> Vec<CMatrix> {
        self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.operators {
            out += &(&(k * rho) * &k.adjoint());
        }
        out
    }

    pub fn to_superop(&self) -> SuperOperator {
        SuperOperator::from_kraus(self.dim, &self.operators).expect("shapes checked")
    }

    /// `Σ_α K_α†K_α`
    pub fn completeness(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.operators {
            out += &(&k.adjoint() * k);
        }
        out
    }
}

/// Rotates the global phase so the largest-modulus entry (first in row-major
/// order among ties) is real and positive.
pub fn normalize_phase(k: &CMatrix) -> CMatrix {
    let max = k.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return k.clone();
    }
    let pivot = k
        .as_slice()
        .iter()
        .find(|z| z.norm() >= max * (1.0 - 1e-9))
        .copied()
        .expect("maximum is attained");
    k.scale(pivot.conj() / pivot.norm())
}

fn pivot_threshold(trace: f64, tol: &Tolerances) -> f64 {
    tol.pivot_tol * trace.max(0.0)
}

/// Factors a PSD Gram matrix by the ordered recursion
/// `⟨Φ_β|Φ_α⟩ = Σ_{β'<β} γ*_{β,β'} γ_{α,β'} + γ*_{β,β} γ_{α,β}`,
/// rejecting every pivot whose `γ²_{β,β}` falls below
/// `pivot_tol · Tr G`.
pub fn cholesky_kraus(g: &GramMatrix, tol: &Tolerances) -> Result<(CholeskyFactor, KrausSet)> {
    let eig = eig_hermitian(&g.mat)?;
    if eig.min_value() < -tol.psd_tol {
        return Err(QdsError::NotCompletelyPositive {
            min_eigenvalue: eig.min_value(),
            witness: None,
        });
    }
    let n = g.mat.rows();
    let threshold = pivot_threshold(g.trace(), tol);
    let mut gamma = CMatrix::zeros(n, n);
    let mut rejected = vec![false; n];

    for alpha in 0..n {
        for beta in 0..alpha {
            if rejected[beta] {
                continue;
            }
            let mut acc = g.mat[(beta, alpha)];
            for bp in 0..beta {
                acc -= gamma[(beta, bp)].conj() * gamma[(alpha, bp)];
            }
            gamma[(alpha, beta)] = acc / gamma[(beta, beta)].re;
        }
        let mut pivot = g.mat[(alpha, alpha)].re;
        for beta in 0..alpha {
            pivot -= gamma[(alpha, beta)].norm_sqr();
        }
        if pivot < -threshold.max(tol.psd_tol) {
            return Err(QdsError::NegativePivot {
                index: alpha,
                pivot,
            });
        }
        if pivot <= threshold {
            rejected[alpha] = true;
        } else {
            gamma[(alpha, alpha)] = C64::new(pivot.sqrt(), 0.0);
        }
    }

    let ord = &g.ordering;
    let d = g.dim;
    let operators = (0..n)
        .filter(|&a| !rejected[a])
        .map(|a| {
            let k = CMatrix::from_fn(d, d, |i, kk| gamma[(ord.rank(i, kk), a)].conj());
            normalize_phase(&k)
        })
        .collect();
    let factor = CholeskyFactor {
        gamma,
        rejected_pivots: (0..n).filter(|&a| rejected[a]).collect(),
        ordering: ord.clone(),
    };
    Ok((factor, KrausSet { dim: d, operators }))
}

/// Picks the smallest cyclic relabelling making `‖Φ_{0,0}‖² = ⟨e_s|Q(E_{s,s})|e_s⟩`
/// exceed the pivot threshold. Falls back to no shift when no basis vector
/// qualifies; pivot rejection then handles the leading zero.
pub fn choose_ordering(q: &SuperOperator, tol: &Tolerances) -> Result<PairOrdering> {
    let d = q.dim();
    let s = q.matrix();
    let trace: f64 = (0..d)
        .flat_map(|i| (0..d).map(move |k| (i, k)))
        .map(|(i, k)| s[(i + d * i, k + d * k)].re)
        .sum();
    let threshold = pivot_threshold(trace, tol);
    let shift = (0..d)
        .find(|&j| s[(j + d * j, j + d * j)].re > threshold)
        .unwrap_or(0);
    PairOrdering::with_shift(d, shift)
}

/// Generalized Kraus operators of a completely positive map.
pub fn kraus_decomposition(q: &SuperOperator, tol: &Tolerances) -> Result<(CholeskyFactor, KrausSet)> {
    let ordering = choose_ordering(q, tol)?;
    let gram = GramMatrix::from_map(q, &ordering)?;
    cholesky_kraus(&gram, tol)
}

/// Independent route: eigendecompose the Choi matrix and take
/// `K_α[i, k] = √λ_α · v_α[k·d + i]` for eigenvalues above the pivot threshold.
pub fn spectral_kraus_oracle(c: &ChoiMatrix, tol: &Tolerances) -> Result<KrausSet> {
    let d = c.dim();
    let eig = eig_hermitian(c.matrix())?;
    if eig.min_value() < -tol.psd_tol {
        let v = eig.vector(0);
        return Err(QdsError::NotCompletelyPositive {
            min_eigenvalue: eig.min_value(),
            witness: Some(CMatrix::from_fn(d, d, |k, i| v[k * d + i])),
        });
    }
    let threshold = pivot_threshold(c.matrix().trace().re, tol);
    let operators = eig
        .values
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &l)| l > threshold)
        .map(|(idx, &l)| {
            let v = eig.vector(idx);
            let k = CMatrix::from_fn(d, d, |i, kk| v[kk * d + i] * l.sqrt());
            normalize_phase(&k)
        })
        .collect();
    Ok(KrausSet { dim: d, operators })
}

/// Diagnostics of a successful decomposition.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub form: StandardForm,
    pub factor: CholeskyFactor,
    pub form_equality_residual: f64,
    /// Relative Frobenius distance between the rebuilt and input generators.
    pub round_trip_residual: f64,
}

/// Full pipeline with every precondition checked.
pub fn decompose_generator(gen: &SuperOperator, chi: &[C64], tol: &Tolerances) -> Result<StandardForm> {
    decompose_detailed(gen, chi, tol).map(|d| d.form)
}

/// [`decompose_generator`] with `χ = e_index`, recorded in the result.
pub fn decompose_generator_at(gen: &SuperOperator, index: usize, tol: &Tolerances) -> Result<StandardForm> {
    let d = gen.dim();
    if index >= d {
        return Err(QdsError::InvalidParameter(format!(
            "reference index {index} out of range for dimension {d}"
        )));
    }
    let mut chi = vec![ZERO; d];
    chi[index] = C64::new(1.0, 0.0);
    Ok(decompose_detailed(gen, &chi, tol)?
        .form
        .with_chi_index(Some(index)))
}

pub fn decompose_detailed(gen: &SuperOperator, chi: &[C64], tol: &Tolerances) -> Result<Decomposition> {
    if !check_trace_annihilation(gen, tol) {
        return Err(QdsError::NotTraceAnnihilating {
            residual: trace_annihilation_residual(gen),
        });
    }
    let ccp = is_conditionally_cp(gen, tol);
    if !ccp.passes {
        return Err(QdsError::NotConditionallyCp {
            min_eigenvalue: ccp.min_eigenvalue,
            witness: ccp.witness.expect("failing report carries a witness"),
        });
    }
    let m = extract_m(gen, chi, tol)?;
    let plus = expander(gen, &m)?;
    let cp = is_completely_positive(&plus, tol);
    if !cp.passes {
        return Err(QdsError::NotCompletelyPositive {
            min_eigenvalue: cp.min_eigenvalue,
            witness: cp.witness,
        });
    }
    let (factor, kraus) = kraus_decomposition(&plus, tol)?;
    let form = StandardForm::new(m, kraus.into_operators())?;
    let form_equality_residual = form.verify_form_equality();
    let bound = form.form_equality_bound(tol);
    if form_equality_residual > bound {
        return Err(QdsError::FormEquality {
            residual: form_equality_residual,
            bound,
        });
    }
    let rebuilt = form.build_generator(tol)?;
    let round_trip_residual = crate::linalg::relative_distance(rebuilt.matrix(), gen.matrix());
    if round_trip_residual > tol.eq_tol {
        return Err(QdsError::RoundTrip {
            residual: round_trip_residual,
        });
    }
    Ok(Decomposition {
        form,
        factor,
        form_equality_residual,
        round_trip_residual,
    })
}

/// Largest amount by which sampled instances exceed an inequality's
/// right-hand side (negative when every sample holds with room to spare).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub samples: usize,
    pub max_excess: f64,
}

impl BoundReport {
    fn new() -> Self {
        Self {
            samples: 0,
            max_excess: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        self.samples += 1;
        self.max_excess = self.max_excess.max(lhs - rhs);
    }

    pub fn passes(&self, slack: f64) -> bool {
        self.max_excess <= slack
    }
}

/// Samples `‖𝓛₊(|φ⟩⟨ψ|)‖₁ ≤ (‖𝓛₊(|φ⟩⟨φ|)‖₁ · ‖𝓛₊(|ψ⟩⟨ψ|)‖₁)^{1/2}` over random
/// unit vectors; holds for every completely positive `𝓛₊`.
pub fn schwarz_bound_check(plus: &SuperOperator, samples: usize, rng: &mut impl Rng) -> Result<BoundReport> {
    let d = plus.dim();
    let mut report = BoundReport::new();
    for _ in 0..samples {
        let phi = random_unit_vector(d, rng);
        let psi = random_unit_vector(d, rng);
        let lhs = trace_norm(&plus.apply(&CMatrix::outer(&phi, &psi))?)?;
        let a = trace_norm(&plus.apply(&CMatrix::outer(&phi, &phi))?)?;
        let b = trace_norm(&plus.apply(&CMatrix::outer(&psi, &psi))?)?;
        report.record(lhs, (a * b).sqrt());
    }
    Ok(report)
}

/// Graph-norm continuity of `𝓜 : ρ ↦ Mρ + ρM†` and of `𝓛₊`: for pairs with
/// `‖φ − e‖, ‖M(φ − e)‖, ‖ψ − f‖, ‖M(ψ − f)‖ ≤ ε`, the trace-norm change of
/// the image of `|φ⟩⟨ψ|` is at most `ε(‖φ‖ + ‖Mφ‖ + ‖ψ‖ + ‖Mψ‖ + 2ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphNormReport {
    pub contraction_part: BoundReport,
    pub expander_part: BoundReport,
}

impl GraphNormReport {
    pub fn passes(&self, slack: f64) -> bool {
        self.contraction_part.passes(slack) && self.expander_part.passes(slack)
    }
}

/// Random perturbation `δ` with `max(‖δ‖, ‖Mδ‖) = ε`.
fn graph_perturbation(m: &CMatrix, eps: f64, rng: &mut impl Rng) -> Result<Vec<C64>> {
    let u = random_vector(m.rows(), rng);
    let scale = vector_norm(&u).max(vector_norm(&m.mul_vec(&u)?));
    Ok(u.into_iter().map(|z| z * (eps / scale)).collect())
}

pub fn graph_norm_check(
    m: &CMatrix,
    plus: &SuperOperator,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<GraphNormReport> {
    let d = plus.dim();
    if m.rows() != d || m.cols() != d {
        return Err(QdsError::DimensionMismatch(format!(
            "M is {}x{}, expander acts on dimension {d}",
            m.rows(),
            m.cols()
        )));
    }
    let contraction = SuperOperator::anticommutator_like(m)?;
    let mut report = GraphNormReport {
        contraction_part: BoundReport::new(),
        expander_part: BoundReport::new(),
    };
    for _ in 0..samples {
        let eps = 10f64.powf(rng.random_range(-6.0..0.0));
        let phi = random_vector(d, rng);
        let psi = random_vector(d, rng);
        let dphi = graph_perturbation(m, eps, rng)?;
        let dpsi = graph_perturbation(m, eps, rng)?;
        let e: Vec<C64> = phi.iter().zip(&dphi).map(|(a, b)| a - b).collect();
        let f: Vec<C64> = psi.iter().zip(&dpsi).map(|(a, b)| a - b).collect();
        let rhs = eps
            * (vector_norm(&phi)
                + vector_norm(&m.mul_vec(&phi)?)
                + vector_norm(&psi)
                + vector_norm(&m.mul_vec(&psi)?)
                + 2.0 * eps);
        let near = CMatrix::outer(&phi, &psi);
        let far = CMatrix::outer(&e, &f);
        let lhs = trace_norm(&(&contraction.apply(&near)? - &contraction.apply(&far)?))?;
        report.contraction_part.record(lhs, rhs);
        let lhs = trace_norm(&(&plus.apply(&near)? - &plus.apply(&far)?))?;
        report.expander_part.record(lhs, rhs);
    }
    Ok(report)
}

/// For random density matrices `ρ`: `0 ≤ Tr 𝓛₊(ρ) = Tr 𝓜(ρ) ≤ ‖𝓜(ρ)‖₁`.
/// The excess is the worst violation among the three relations.
pub fn trace_domination_check(
    m: &CMatrix,
    plus: &SuperOperator,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<BoundReport> {
    let d = plus.dim();
    let contraction = SuperOperator::anticommutator_like(m)?;
    let mut report = BoundReport::new();
    for _ in 0..samples {
        let rank = rng.random_range(1..=d);
        let rho = random_density_matrix(d, rank, rng);
        let gained = plus.apply(&rho)?.trace();
        let lost = contraction.apply(&rho)?;
        let excess = (-gained.re)
            .max((gained - lost.trace()).norm())
            .max(lost.trace().re - trace_norm(&lost)?);
        report.record(excess, 0.0);
    }
    Ok(report)
}
