//! Lattice models with an absorbing sink state `ω`.
//!
//! Both models discretize a half-line `x ≥ 0` (or `z ≥ 0`) with `N` sites at
//! `x_j = j·h` and append one sink state at index `N`. State vectors store
//! `√h·ψ(x_j)`, so the lattice `ℓ²` norm equals the continuum `L²` norm and
//! a point evaluation `ψ(0)` is represented by `⟨e_0|/√h`.
//!
//! * Dropout: translation towards the origin, with everything crossing it
//!   moved to the sink. The `Hopping` variant is an exactly trace-preserving
//!   jump process; the `Upwind` variant discretizes `M = −∂` directly and
//!   leaks trace at first order in `h`.
//! * Sticking: the free Hamiltonian `−d²/dz²` with a Robin wall whose
//!   imaginary coefficient feeds the sink.

use crate::error::{QdsError, Result};
use crate::evolve::{FormPropagator, Triplet};
use crate::linalg::{CMatrix, C64, I, ONE, ZERO};
use crate::stdform::StandardForm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutVariant {
    Hopping,
    Upwind,
}

impl std::str::FromStr for DropoutVariant {
    type Err = QdsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hopping" => Ok(Self::Hopping),
            "upwind" => Ok(Self::Upwind),
            other => Err(QdsError::InvalidParameter(format!(
                "unknown dropout variant '{other}' (expected hopping or upwind)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropoutModel {
    pub sites: usize,
    pub h: f64,
    pub variant: DropoutVariant,
}

impl DropoutModel {
    pub fn dim(&self) -> usize {
        self.sites + 1
    }

    pub fn sink(&self) -> usize {
        self.sites
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StickingModel {
    pub sites: usize,
    pub h: f64,
    /// Robin coefficient in `ψ'(0) = wψ(0)`.
    pub w: C64,
}

impl StickingModel {
    pub fn dim(&self) -> usize {
        self.sites + 1
    }

    pub fn sink(&self) -> usize {
        self.sites
    }
}

fn check_spacing(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(QdsError::InvalidParameter(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    Ok(())
}

/// Sparse description of a model: entries of `M` and of each jump operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParts {
    pub dim: usize,
    pub m: Vec<Triplet>,
    pub jumps: Vec<Vec<Triplet>>,
}

impl ModelParts {
    fn dense(&self, entries: &[Triplet]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, z) in entries {
            out[(r, c)] += z;
        }
        out
    }

    pub fn to_standard_form(&self) -> Result<StandardForm> {
        let jumps = self.jumps.iter().map(|l| self.dense(l)).collect();
        StandardForm::new(self.dense(&self.m), jumps)
    }

    pub fn propagator(&self) -> Result<FormPropagator> {
        FormPropagator::from_triplets(self.dim, &self.m, &self.jumps)
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn dropout_parts(model: &DropoutModel) -> Result<ModelParts> {
    let n = model.sites;
    if n < 2 {
        return Err(QdsError::InvalidParameter(format!(
            "dropout model needs at least 2 sites, got {n}"
        )));
    }
    check_spacing(model.h)?;
    let sink = model.sink();
    let rate = real(1.0 / model.h.sqrt());
    let parts = match model.variant {
        DropoutVariant::Hopping => {
            let mut jumps: Vec<Vec<Triplet>> = (1..n).map(|j| vec![(j - 1, j, rate)]).collect();
            jumps.push(vec![(sink, 0, rate)]);
            let m = (0..n).map(|j| (j, j, real(0.5 / model.h))).collect();
            ModelParts { dim: model.dim(), m, jumps }
        }
        DropoutVariant::Upwind => {
            // M = −∂_h, (∂_h ψ)_j = (ψ_{j+1} − ψ_j)/h with ψ_N ≡ 0
            let mut m = Vec::with_capacity(2 * n);
            for j in 0..n {
                m.push((j, j, real(1.0 / model.h)));
                if j + 1 < n {
                    m.push((j, j + 1, real(-1.0 / model.h)));
                }
            }
            ModelParts {
                dim: model.dim(),
                m,
                jumps: vec![vec![(sink, 0, rate)]],
            }
        }
    };
    Ok(parts)
}

pub fn build_dropout(model: &DropoutModel) -> Result<StandardForm> {
    dropout_parts(model)?.to_standard_form()
}

fn check_sticking(model: &StickingModel) -> Result<()> {
    if model.sites < 3 {
        return Err(QdsError::InvalidParameter(format!(
            "sticking model needs at least 3 sites, got {}",
            model.sites
        )));
    }
    check_spacing(model.h)?;
    if !(model.w.re.is_finite() && model.w.im.is_finite()) {
        return Err(QdsError::InvalidParameter("w must be finite".into()));
    }
    if model.w.im < 0.0 {
        return Err(QdsError::InvalidParameter(format!(
            "Im(w) = {} < 0 would violate accretivity",
            model.w.im
        )));
    }
    Ok(())
}

/// Entries of the discrete `−d²/dz²` with the ghost point
/// `ψ_{−1} = ψ_0(1 − h·Re w)` folded into the first row and a Dirichlet far
/// end. The sink row and column are zero.
fn sticking_hamiltonian_entries(model: &StickingModel) -> Vec<Triplet> {
    let (n, h) = (model.sites, model.h);
    let inv = 1.0 / (h * h);
    let mut entries = vec![(0, 0, real((1.0 + h * model.w.re) * inv))];
    for j in 1..n {
        entries.push((j, j, real(2.0 * inv)));
    }
    for j in 0..n - 1 {
        entries.push((j, j + 1, real(-inv)));
        entries.push((j + 1, j, real(-inv)));
    }
    entries
}

pub fn sticking_hamiltonian(model: &StickingModel) -> Result<CMatrix> {
    check_sticking(model)?;
    let mut hm = CMatrix::zeros(model.dim(), model.dim());
    for (r, c, z) in sticking_hamiltonian_entries(model) {
        hm[(r, c)] = z;
    }
    Ok(hm)
}

/// `M = iH + ½L†L` with the single jump `L = √(2 Im w / h)·|ω⟩⟨e_0|`, absent
/// when `Im w = 0`.
pub fn sticking_parts(model: &StickingModel) -> Result<ModelParts> {
    check_sticking(model)?;
    let mut m: Vec<Triplet> = sticking_hamiltonian_entries(model)
        .into_iter()
        .map(|(r, c, z)| (r, c, z * I))
        .collect();
    let mut jumps = Vec::new();
    if model.w.im > 0.0 {
        let rate = 2.0 * model.w.im / model.h;
        m.push((0, 0, real(0.5 * rate)));
        jumps.push(vec![(model.sink(), 0, real(rate.sqrt()))]);
    }
    Ok(ModelParts {
        dim: model.dim(),
        m,
        jumps,
    })
}

pub fn build_sticking(model: &StickingModel) -> Result<StandardForm> {
    sticking_parts(model)?.to_standard_form()
}

/// Gaussian wave packet `ψ(x) ∝ exp(−(x − x₀)²/(4σ²) + i k₀ x)`, so that
/// `|ψ|²` has standard deviation `σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
}

impl Packet {
    /// Function samples `ψ(x_j)` on `n` sites, normalized so that
    /// `Σ_j h|ψ(x_j)|² = 1`.
    pub fn samples(&self, n: usize, h: f64) -> Vec<C64> {
        let raw: Vec<C64> = (0..n)
            .map(|j| {
                let x = j as f64 * h;
                let envelope = (-(x - self.x0).powi(2) / (4.0 * self.sigma * self.sigma)).exp();
                C64::from_polar(envelope, self.k0 * x)
            })
            .collect();
        let norm = (raw.iter().map(|z| z.norm_sqr()).sum::<f64>() * h).sqrt();
        raw.into_iter().map(|z| z / norm).collect()
    }

    /// `|v⟩⟨v|` with `v_j = √h·ψ(x_j)` on the lattice and zero on the sink.
    pub fn density(&self, sites: usize, h: f64) -> CMatrix {
        let mut v: Vec<C64> = self
            .samples(sites, h)
            .into_iter()
            .map(|z| z * h.sqrt())
            .collect();
        v.push(ZERO);
        CMatrix::outer(&v, &v)
    }
}

/// `∫₀^T |ψ(x)|² dx` with `T = min(t, N·h)`, by the trapezoidal rule on the
/// grid (linear interpolation of `|ψ|²` at `T`, `ψ(N·h) = 0`).
pub fn dropout_sink_oracle(packet: &[C64], h: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(QdsError::NegativeTime(t));
    }
    check_spacing(h)?;
    let mut density: Vec<f64> = packet.iter().map(|z| z.norm_sqr()).collect();
    density.push(0.0);
    let end = t.min(packet.len() as f64 * h);
    let mut total = 0.0;
    for j in 0..packet.len() {
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        if a >= end {
            break;
        }
        let (fa, fb) = (density[j], density[j + 1]);
        if b <= end {
            total += 0.5 * h * (fa + fb);
        } else {
            let f_end = fa + (fb - fa) * (end - a) / h;
            total += 0.5 * (end - a) * (fa + f_end);
        }
    }
    Ok(total)
}

/// One row of a grid-refinement table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinementLevel {
    pub h: f64,
    pub sites: usize,
    pub sink_population: f64,
    /// `1 − Tr ρ(t)`
    pub trace_deficit: f64,
}

/// Final-time sink population and trace deficit for a packet started on the
/// lattice of `parts` (sites `0..dim-1`, sink last).
pub fn evolve_packet(parts: &ModelParts, packet: &Packet, h: f64, t: f64) -> Result<(f64, f64)> {
    let sites = parts.dim - 1;
    let rho0 = packet.density(sites, h);
    let rho = parts.propagator()?.propagate(&rho0, t)?;
    Ok((rho[(sites, sites)].re, 1.0 - rho.trace().re))
}

fn refine(
    levels: usize,
    parts_at: impl Fn(usize) -> Result<(ModelParts, f64)>,
    packet: &Packet,
    t: f64,
) -> Result<Vec<RefinementLevel>> {
    (0..=levels)
        .map(|level| {
            let (parts, h) = parts_at(1 << level)?;
            let (sink_population, trace_deficit) = evolve_packet(&parts, packet, h, t)?;
            Ok(RefinementLevel {
                h,
                sites: parts.dim - 1,
                sink_population,
                trace_deficit,
            })
        })
        .collect()
}

/// Halves `h` and doubles `N` `levels` times, keeping the domain length.
pub fn dropout_refinement(
    base: &DropoutModel,
    packet: &Packet,
    t: f64,
    levels: usize,
) -> Result<Vec<RefinementLevel>> {
    let parts_at = |factor: usize| {
        let model = DropoutModel {
            sites: base.sites * factor,
            h: base.h / factor as f64,
            variant: base.variant,
        };
        Ok((dropout_parts(&model)?, model.h))
    };
    refine(levels, parts_at, packet, t)
}

pub fn sticking_refinement(
    base: &StickingModel,
    packet: &Packet,
    t: f64,
    levels: usize,
) -> Result<Vec<RefinementLevel>> {
    let parts_at = |factor: usize| {
        let model = StickingModel {
            sites: base.sites * factor,
            h: base.h / factor as f64,
            w: base.w,
        };
        Ok((sticking_parts(&model)?, model.h))
    };
    refine(levels, parts_at, packet, t)
}

/// `|ω⟩⟨ω|` for a model of dimension `d` with the sink at the last index.
pub fn sink_state(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(d - 1, d - 1)] = ONE;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{trajectory_with, FormPropagator};
    use crate::linalg::testing::assert_close;
    use crate::linalg::Tolerances;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn hopping_small_instance() {
        let sf = build_dropout(&DropoutModel {
            sites: 2,
            h: 1.0,
            variant: DropoutVariant::Hopping,
        })
        .unwrap();
        assert_eq!(sf.kraus().len(), 2);
        assert_eq!(sf.kraus()[0], CMatrix::unit(3, 0, 1));
        assert_eq!(sf.kraus()[1], CMatrix::unit(3, 2, 0));
        assert_close(
            sf.m(),
            &CMatrix::from_diag(&[C64::new(0.5, 0.0), C64::new(0.5, 0.0), ZERO]),
            0.0,
        );
        assert_eq!(sf.verify_form_equality(), 0.0);
    }

    #[test]
    fn builders_reject_bad_parameters() {
        let bad = DropoutModel {
            sites: 1,
            h: 1.0,
            variant: DropoutVariant::Hopping,
        };
        assert!(build_dropout(&bad).is_err());
        let bad = StickingModel {
            sites: 10,
            h: 0.1,
            w: C64::new(0.0, -1.0),
        };
        let err = build_sticking(&bad).unwrap_err();
        assert!(err.to_string().contains("accretivity"));
        assert!(build_sticking(&StickingModel { sites: 2, h: 0.1, w: I }).is_err());
        assert!("sideways".parse::<DropoutVariant>().is_err());
    }

    #[test]
    fn sink_is_absorbing() {
        for variant in [DropoutVariant::Hopping, DropoutVariant::Upwind] {
            let sf = build_dropout(&DropoutModel { sites: 6, h: 0.5, variant }).unwrap();
            let out = sf.apply(&sink_state(7)).unwrap();
            assert_eq!(out.frobenius_norm(), 0.0);
        }
        let sf = build_sticking(&StickingModel {
            sites: 6,
            h: 0.5,
            w: C64::new(0.3, 1.0),
        })
        .unwrap();
        assert_eq!(sf.apply(&sink_state(7)).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn forms_satisfy_form_equality() {
        let sf = build_dropout(&DropoutModel {
            sites: 50,
            h: 0.1,
            variant: DropoutVariant::Hopping,
        })
        .unwrap();
        assert!(sf.validate(&tol()).is_ok());
        assert!(sf.verify_form_equality() < 1e-12);
        let sf = build_sticking(&StickingModel {
            sites: 50,
            h: 0.1,
            w: C64::new(0.5, 2.0),
        })
        .unwrap();
        assert!(sf.validate(&tol()).is_ok());
        assert!(sf.verify_form_equality() < 1e-12 * sf.dissipative_part().frobenius_norm().max(1.0));

        let up = build_dropout(&DropoutModel {
            sites: 50,
            h: 0.1,
            variant: DropoutVariant::Upwind,
        })
        .unwrap();
        assert!(up.verify_form_equality() > 1.0);
        assert!(up.accretivity_margin() >= -1e-12);
    }

    #[test]
    fn sticking_without_imaginary_part_is_unitary() {
        let sf = build_sticking(&StickingModel {
            sites: 20,
            h: 0.2,
            w: C64::new(0.7, 0.0),
        })
        .unwrap();
        assert!(sf.kraus().is_empty());
        let packet = Packet { x0: 2.0, sigma: 0.5, k0: -1.0 };
        let parts = sticking_parts(&StickingModel { sites: 20, h: 0.2, w: C64::new(0.7, 0.0) }).unwrap();
        let (sink, deficit) = evolve_packet(&parts, &packet, 0.2, 1.0).unwrap();
        assert!(sink.abs() < 1e-10);
        assert!(deficit.abs() < 1e-10);
    }

    #[test]
    fn oracle_examples() {
        let packet = Packet { x0: 8.0, sigma: 0.3, k0: 0.0 }.samples(100, 0.1);
        assert!(dropout_sink_oracle(&packet, 0.1, 3.0).unwrap() < 1e-30);
        let full = dropout_sink_oracle(&packet, 0.1, 20.0).unwrap();
        assert!((full - 1.0).abs() < 1e-6);

        // Gaussian density of std 1 centred at 5, integrated over [0, 5]:
        // ½(1 + erf(0)) − ½(1 − erf(5/√2)) ≈ ½
        let packet = Packet { x0: 5.0, sigma: 1.0, k0: 0.3 }.samples(1000, 0.01);
        let half = dropout_sink_oracle(&packet, 0.01, 5.0).unwrap();
        assert!((half - 0.5).abs() < 1e-4, "{half}");
        assert!(dropout_sink_oracle(&packet, 0.01, -1.0).is_err());
    }

    #[test]
    fn hopping_conserves_probability_and_fills_sink() {
        let model = DropoutModel {
            sites: 60,
            h: 0.1,
            variant: DropoutVariant::Hopping,
        };
        let sf = build_dropout(&model).unwrap();
        let rho0 = Packet { x0: 3.0, sigma: 0.7, k0: 0.0 }.density(60, 0.1);
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 10.0 / 49.0).collect();
        let traj = trajectory_with(&mut FormPropagator::new(&sf), &rho0, &times, &tol()).unwrap();
        assert!(traj.max_trace_drift() < 1e-9);
        let sink = traj.population(model.sink());
        assert!(sink.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(*sink.last().unwrap() > 0.99);
    }

    #[test]
    fn sparse_and_dense_propagation_agree() {
        let model = StickingModel { sites: 12, h: 0.3, w: C64::new(0.4, 0.8) };
        let parts = sticking_parts(&model).unwrap();
        let rho0 = Packet { x0: 1.5, sigma: 0.5, k0: -1.0 }.density(12, 0.3);
        let sparse = parts.propagator().unwrap().propagate(&rho0, 0.4).unwrap();
        let gen = build_sticking(&model).unwrap().build_generator(&tol()).unwrap();
        let dense = crate::evolve::propagate(&gen, &rho0, 0.4).unwrap();
        assert_close(&sparse, &dense, 1e-11);
    }

    #[test]
    fn upwind_trace_deficit_is_first_order() {
        let base = DropoutModel {
            sites: 100,
            h: 0.1,
            variant: DropoutVariant::Upwind,
        };
        let packet = Packet { x0: 5.0, sigma: 1.0, k0: 0.0 };
        let table = dropout_refinement(&base, &packet, 2.0, 2).unwrap();
        for pair in table.windows(2) {
            let ratio = pair[0].trace_deficit / pair[1].trace_deficit;
            assert!((1.5..=2.5).contains(&ratio), "{table:?}");
        }
        assert!(table.iter().all(|l| l.trace_deficit > 0.0));
    }

    #[test]
    fn sticking_sink_grows_monotonically() {
        let model = StickingModel { sites: 80, h: 0.1, w: I };
        let sf = build_sticking(&model).unwrap();
        let rho0 = Packet { x0: 4.0, sigma: 0.8, k0: -1.0 }.density(80, 0.1);
        let times: Vec<f64> = (0..21).map(|i| i as f64 * 0.15).collect();
        let traj = trajectory_with(&mut FormPropagator::new(&sf), &rho0, &times, &tol()).unwrap();
        assert!(traj.max_trace_drift() < 1e-9);
        let sink = traj.population(model.sink());
        assert!(sink.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(*sink.last().unwrap() > 0.01 && *sink.last().unwrap() <= 1.0);
    }
}
