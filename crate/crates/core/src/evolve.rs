//! Semigroup propagation `T^t = exp(t𝓛)` with conservation diagnostics.
//!
//! Two propagators share one trajectory driver: [`SuperPropagator`] works on
//! the dense `d² × d²` superoperator, and [`FormPropagator`] applies a
//! standard form `(M, {L_k})` directly to `d × d` states, which is the only
//! practical route once `d` reaches the hundreds (lattice models).

use std::collections::HashMap;

use crate::error::{QdsError, Result};
use crate::linalg::{eig_hermitian, matrix_exp, trace_norm, CMatrix, Tolerances, C64, ZERO};
use crate::stdform::StandardForm;
use crate::superop::SuperOperator;

/// Dense exponentials are used up to this superoperator size; beyond it the
/// action `exp(tS)·v` is evaluated by truncated Taylor steps.
const DENSE_EXP_LIMIT: usize = 400;
/// Norm bound per Taylor step.
const TAYLOR_STEP_NORM: f64 = 4.0;
const TAYLOR_MAX_TERMS: usize = 80;

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        return Err(QdsError::NegativeTime(t));
    }
    Ok(())
}

fn check_state(dim: usize, rho: &CMatrix) -> Result<()> {
    if rho.rows() != dim || rho.cols() != dim {
        return Err(QdsError::DimensionMismatch(format!(
            "state is {}x{}, generator acts on dimension {dim}",
            rho.rows(),
            rho.cols()
        )));
    }
    Ok(())
}

fn frobenius(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(t·A)·v` for a linear `A` with `‖A‖ ≤ norm_bound`, by `s` Taylor
/// steps of norm at most [`TAYLOR_STEP_NORM`], each truncated once two
/// consecutive terms are negligible.
fn expm_action(
    apply: &mut impl FnMut(&[C64]) -> Vec<C64>,
    norm_bound: f64,
    t: f64,
    v: &[C64],
) -> Vec<C64> {
    let steps = ((t * norm_bound) / TAYLOR_STEP_NORM).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut x = v.to_vec();
    for _ in 0..steps {
        let mut term = x.clone();
        let mut prev_norm = f64::INFINITY;
        for k in 1..=TAYLOR_MAX_TERMS {
            term = apply(&term);
            let c = h / k as f64;
            for z in term.iter_mut() {
                *z *= c;
            }
            for (xi, ti) in x.iter_mut().zip(&term) {
                *xi += ti;
            }
            let norm = frobenius(&term);
            let scale = frobenius(&x).max(f64::MIN_POSITIVE);
            if norm + prev_norm <= 1e-17 * scale || norm == 0.0 {
                break;
            }
            prev_norm = norm;
        }
    }
    x
}

/// `ρ(t) = unvec(exp(t𝓛)·vec(ρ₀))`. Negative times are rejected.
pub fn propagate(gen: &SuperOperator, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    check_time(t)?;
    check_state(gen.dim(), rho0)?;
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    SuperPropagator::new(gen.clone()).step(rho0, t)
}

/// Something that advances states by a nonnegative time.
pub trait Propagator {
    fn dim(&self) -> usize;
    fn step(&mut self, rho: &CMatrix, dt: f64) -> Result<CMatrix>;
}

/// Dense superoperator exponentials, cached per step length.
#[derive(Clone, Debug)]
pub struct SuperPropagator {
    gen: SuperOperator,
    cache: HashMap<u64, CMatrix>,
}

impl SuperPropagator {
    pub fn new(gen: SuperOperator) -> Self {
        Self {
            gen,
            cache: HashMap::new(),
        }
    }
}

impl Propagator for SuperPropagator {
    fn dim(&self) -> usize {
        self.gen.dim()
    }

    fn step(&mut self, rho: &CMatrix, dt: f64) -> Result<CMatrix> {
        check_time(dt)?;
        check_state(self.gen.dim(), rho)?;
        if dt == 0.0 {
            return Ok(rho.clone());
        }
        let d = self.gen.dim();
        let mat = self.gen.matrix();
        let v = rho.vec();
        let out = if mat.rows() <= DENSE_EXP_LIMIT {
            let prop = match self.cache.get(&dt.to_bits()) {
                Some(p) => p,
                None => {
                    let p = matrix_exp(&mat.scale_real(dt))?;
                    self.cache.entry(dt.to_bits()).or_insert(p)
                }
            };
            prop.mul_vec(&v)?
        } else {
            let bound = mat.norm_one().min(mat.frobenius_norm());
            expm_action(&mut |x| mat.mul_vec(x).expect("square"), bound, dt, &v)
        };
        CMatrix::unvec(d, &out)
    }
}

/// `(row, col, value)` entry of a sparse operator.
pub type Triplet = (usize, usize, C64);

/// Row-compressed sparse operator; only used inside propagation.
#[derive(Clone, Debug)]
struct SparseOp {
    n: usize,
    rows: Vec<Vec<(usize, C64)>>,
    nnz: usize,
}

impl SparseOp {
    fn from_dense(m: &CMatrix) -> Self {
        let n = m.rows();
        let rows: Vec<Vec<(usize, C64)>> = (0..n)
            .map(|r| {
                (0..m.cols())
                    .filter_map(|c| {
                        let z = m[(r, c)];
                        (z != ZERO).then_some((c, z))
                    })
                    .collect()
            })
            .collect();
        let nnz = rows.iter().map(Vec::len).sum();
        Self { n, rows, nnz }
    }

    fn from_triplets(n: usize, entries: &[Triplet]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for &(r, c, z) in entries {
            if r >= n || c >= n {
                return Err(QdsError::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside a {n}x{n} operator"
                )));
            }
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(QdsError::NonFinite);
            }
            match rows[r].iter_mut().find(|(col, _)| *col == c) {
                Some((_, acc)) => *acc += z,
                None => rows[r].push((c, z)),
            }
        }
        for row in &mut rows {
            row.retain(|&(_, z)| z != ZERO);
            row.sort_by_key(|&(c, _)| c);
        }
        let nnz = rows.iter().map(Vec::len).sum();
        Ok(Self { n, rows, nnz })
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, z)| (r, c, z)))
    }

    /// `out += scale · A·X` for row-major `n × n` dense `X`.
    fn mul_dense_into(&self, x: &[C64], scale: C64, out: &mut [C64]) {
        let n = self.n;
        for (r, row) in self.rows.iter().enumerate() {
            let out_row = &mut out[r * n..(r + 1) * n];
            for &(c, a) in row {
                let coef = scale * a;
                for (o, xv) in out_row.iter_mut().zip(&x[c * n..(c + 1) * n]) {
                    *o += coef * xv;
                }
            }
        }
    }

    /// Spectral-norm bound `√(‖A‖₁‖A‖∞)`.
    fn norm_bound(&self) -> f64 {
        let mut col_sums = vec![0.0; self.n];
        let mut max_row: f64 = 0.0;
        for row in &self.rows {
            let mut s = 0.0;
            for &(c, z) in row {
                s += z.norm();
                col_sums[c] += z.norm();
            }
            max_row = max_row.max(s);
        }
        let max_col = col_sums.into_iter().fold(0.0, f64::max);
        (max_row * max_col).sqrt()
    }
}

fn conj_transpose_into(n: usize, x: &[C64], out: &mut [C64]) {
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = x[r * n + c].conj();
        }
    }
}

/// Applies `ρ ↦ Σ_k L_kρL_k† − Mρ − ρM†` to dense states using the sparsity
/// of `M` and the `L_k`. Does not require form equality, so defective
/// discretizations can be propagated and their trace leakage measured.
#[derive(Clone, Debug)]
pub struct FormPropagator {
    dim: usize,
    m: SparseOp,
    jumps: Vec<SparseOp>,
    norm_bound: f64,
}

impl FormPropagator {
    pub fn new(sf: &StandardForm) -> Self {
        let m = SparseOp::from_dense(sf.m());
        let jumps = sf.kraus().iter().map(SparseOp::from_dense).collect();
        Self::from_sparse(sf.dim(), m, jumps)
    }

    /// Builds the propagator from `(row, col, value)` entries of `M` and of
    /// each jump operator, for models too large to hold dense jump matrices.
    /// Repeated positions are summed.
    pub fn from_triplets(dim: usize, m: &[Triplet], jumps: &[Vec<Triplet>]) -> Result<Self> {
        if dim == 0 {
            return Err(QdsError::InvalidParameter("dimension must be positive".into()));
        }
        let m = SparseOp::from_triplets(dim, m)?;
        let jumps = jumps
            .iter()
            .map(|l| SparseOp::from_triplets(dim, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_sparse(dim, m, jumps))
    }

    fn from_sparse(dim: usize, m: SparseOp, jumps: Vec<SparseOp>) -> Self {
        // ‖𝓛‖_{1→1} ≤ 2‖M‖ + ‖Σ L†L‖ (the jump part is completely positive)
        let mut kraus_sum: HashMap<(usize, usize), C64> = HashMap::new();
        for l in &jumps {
            for row in &l.rows {
                for &(c, a) in row {
                    for &(e, b) in row {
                        *kraus_sum.entry((c, e)).or_insert(ZERO) += a.conj() * b;
                    }
                }
            }
        }
        let mut row_sums = vec![0.0; dim];
        let mut col_sums = vec![0.0; dim];
        for (&(r, c), z) in &kraus_sum {
            row_sums[r] += z.norm();
            col_sums[c] += z.norm();
        }
        let kraus_bound = (row_sums.into_iter().fold(0.0, f64::max)
            * col_sums.into_iter().fold(0.0, f64::max))
        .sqrt();
        let norm_bound = 2.0 * m.norm_bound() + kraus_bound;
        Self {
            dim,
            m,
            jumps,
            norm_bound,
        }
    }

    /// `𝓛(ρ)` on a row-major `d × d` buffer.
    fn apply_flat(&self, rho: &[C64], scratch: &mut [C64]) -> Vec<C64> {
        let n = self.dim;
        let minus_one = C64::new(-1.0, 0.0);
        let mut out = vec![ZERO; n * n];
        // −Mρ
        self.m.mul_dense_into(rho, minus_one, &mut out);
        // −ρM† = −(Mρ†)†
        conj_transpose_into(n, rho, scratch);
        let mut z = vec![ZERO; n * n];
        self.m.mul_dense_into(scratch, C64::new(1.0, 0.0), &mut z);
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] -= z[c * n + r].conj();
            }
        }
        for l in &self.jumps {
            if l.nnz * l.nnz <= 4 * l.nnz * n {
                for (a, c, x) in l.entries() {
                    for (b, e, y) in l.entries() {
                        out[a * n + b] += x * rho[c * n + e] * y.conj();
                    }
                }
            } else {
                let mut t = vec![ZERO; n * n];
                l.mul_dense_into(rho, C64::new(1.0, 0.0), &mut t);
                conj_transpose_into(n, &t, scratch);
                let mut u = vec![ZERO; n * n];
                l.mul_dense_into(scratch, C64::new(1.0, 0.0), &mut u);
                for r in 0..n {
                    for c in 0..n {
                        out[r * n + c] += u[c * n + r].conj();
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_state(self.dim, rho)?;
        let mut scratch = vec![ZERO; self.dim * self.dim];
        CMatrix::new(self.dim, self.dim, self.apply_flat(rho.as_slice(), &mut scratch))
    }

    /// Upper bound on `‖𝓛‖` used to size Taylor steps.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn propagate(&self, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
        check_time(t)?;
        check_state(self.dim, rho0)?;
        if t == 0.0 {
            return Ok(rho0.clone());
        }
        let mut scratch = vec![ZERO; self.dim * self.dim];
        let out = expm_action(
            &mut |x| self.apply_flat(x, &mut scratch),
            self.norm_bound,
            t,
            rho0.as_slice(),
        );
        CMatrix::new(self.dim, self.dim, out)
    }
}

impl Propagator for FormPropagator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn step(&mut self, rho: &CMatrix, dt: f64) -> Result<CMatrix> {
        self.propagate(rho, dt)
    }
}

/// Per-state conservation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub trace: C64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
    pub trace_norm: f64,
}

impl StepDiagnostics {
    pub fn of(rho: &CMatrix) -> Self {
        let eig = eig_hermitian(rho).expect("states are square");
        let hermitian = eig.asymmetry <= 1e-12 * rho.frobenius_norm().max(1.0);
        let trace_norm = if hermitian {
            eig.values.iter().map(|x| x.abs()).sum()
        } else {
            trace_norm(rho).expect("states are square")
        };
        Self {
            trace: rho.trace(),
            min_eigenvalue: eig.min_value(),
            trace_norm,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Non-fatal issues with the initial state.
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_n |Tr ρ(t_n) − Tr ρ(t_0)|`
    pub fn max_trace_drift(&self) -> f64 {
        let t0 = self.diagnostics.first().map(|d| d.trace).unwrap_or(ZERO);
        self.diagnostics
            .iter()
            .map(|d| (d.trace - t0).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// `⟨e_j|ρ(t_n)|e_j⟩` for every time.
    pub fn population(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[(j, j)].re).collect()
    }
}

fn initial_state_warnings(rho0: &CMatrix, tol: &Tolerances) -> Vec<String> {
    let mut warnings = Vec::new();
    let tr = rho0.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol.eq_tol {
        warnings.push(format!("initial state has trace {tr}, not 1"));
    }
    let eig = eig_hermitian(rho0).expect("square");
    if eig.asymmetry > tol.eq_tol * rho0.frobenius_norm().max(1.0) {
        warnings.push(format!(
            "initial state is not Hermitian (asymmetry {:.3e})",
            eig.asymmetry
        ));
    }
    if eig.min_value() < -tol.psd_tol {
        warnings.push(format!(
            "initial state is not positive (min eigenvalue {:.3e})",
            eig.min_value()
        ));
    }
    warnings
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(QdsError::InvalidParameter("empty time grid".into()));
    }
    check_time(times[0])?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QdsError::InvalidParameter(
            "times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Step-to-step propagation over `times`, with diagnostics at every time.
pub fn trajectory_with(
    prop: &mut impl Propagator,
    rho0: &CMatrix,
    times: &[f64],
    tol: &Tolerances,
) -> Result<Trajectory> {
    check_state(prop.dim(), rho0)?;
    check_times(times)?;
    let warnings = initial_state_warnings(rho0, tol);
    let mut states = Vec::with_capacity(times.len());
    let mut current = prop.step(rho0, times[0])?;
    let mut last = times[0];
    for &t in times {
        if t > last {
            current = prop.step(&current, quantize_step(t - last))?;
            last = t;
        }
        states.push(current.clone());
    }
    let diagnostics = states.iter().map(StepDiagnostics::of).collect();
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        diagnostics,
        warnings,
    })
}

/// Rounds a step length to 12 significant digits so that uniform grids hit
/// the propagator cache.
fn quantize_step(dt: f64) -> f64 {
    let q: f64 = format!("{dt:.11e}").parse().unwrap_or(dt);
    if q > 0.0 {
        q
    } else {
        dt
    }
}

pub fn trajectory(gen: &SuperOperator, rho0: &CMatrix, times: &[f64]) -> Result<Trajectory> {
    trajectory_with(
        &mut SuperPropagator::new(gen.clone()),
        rho0,
        times,
        &Tolerances::default(),
    )
}

/// `r(Δ) = ‖(T^Δ(ρ) − ρ)/Δ − 𝓛(ρ)‖₁` for each `Δ`.
pub fn finite_difference_generator(
    gen: &SuperOperator,
    rho: &CMatrix,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    if deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(QdsError::InvalidParameter(
            "finite-difference steps must be positive".into(),
        ));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QdsError::InvalidParameter(
            "finite-difference steps must be descending".into(),
        ));
    }
    let exact = gen.apply(rho)?;
    deltas
        .iter()
        .map(|&delta| {
            let moved = propagate(gen, rho, delta)?;
            let quotient = (&moved - rho).scale_real(1.0 / delta);
            trace_norm(&(&quotient - &exact))
        })
        .collect()
}

/// `r[i+1] / r[i]`; `NaN` where `r[i] = 0`.
pub fn halving_ratios(residuals: &[f64]) -> Vec<f64> {
    residuals
        .windows(2)
        .map(|w| if w[0] == 0.0 { f64::NAN } else { w[1] / w[0] })
        .collect()
}

/// `‖T^{s+t}(ρ₀) − T^s(T^t(ρ₀))‖₁`
pub fn semigroup_property_check(gen: &SuperOperator, rho0: &CMatrix, s: f64, t: f64) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    let joint = propagate(gen, rho0, s + t)?;
    let split = propagate(gen, &propagate(gen, rho0, t)?, s)?;
    trace_norm(&(&joint - &split))
}
