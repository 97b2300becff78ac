//! WebAssembly entry points for the browser demo in `www/`.
//!
//! Each exported function has a plain Rust twin returning `Result<_, String>`
//! so it can be tested natively; the exported wrappers only convert errors.

use std::fmt::Write as _;

use qds_core::decompose::decompose_detailed;
use qds_core::evolve::trajectory_with;
use qds_core::linalg::{CMatrix, Tolerances, C64, ZERO};
use qds_core::models::{
    dropout_parts, dropout_sink_oracle, sticking_parts, DropoutModel, DropoutVariant, ModelParts,
    Packet, StickingModel,
};
use qds_core::stdform::StandardForm;
use wasm_bindgen::prelude::*;

const MAX_SITES: usize = 400;
const MAX_POINTS: usize = 400;

fn time_grid(t_max: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(format!("final time must be positive, got {t_max}"));
    }
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("number of time points must be in 2..={MAX_POINTS}"));
    }
    Ok((0..points)
        .map(|k| t_max * k as f64 / (points - 1) as f64)
        .collect())
}

fn check_sites(sites: usize) -> Result<(), String> {
    if sites > MAX_SITES {
        return Err(format!("at most {MAX_SITES} sites in the browser"));
    }
    Ok(())
}

/// Sink population and trace along a packet trajectory.
fn sink_series(parts: &ModelParts, packet: &Packet, h: f64, times: &[f64]) -> Result<(Vec<f64>, Vec<f64>), String> {
    let sites = parts.dim - 1;
    let rho0 = packet.density(sites, h);
    let mut prop = parts.propagator().map_err(|e| e.to_string())?;
    let traj = trajectory_with(&mut prop, &rho0, times, &Tolerances::default()).map_err(|e| e.to_string())?;
    let trace = traj.diagnostics.iter().map(|d| d.trace.re).collect();
    Ok((traj.population(sites), trace))
}

/// `[times | sink | continuum | trace]`, each block `points` long.
pub fn dropout_curve_values(
    sites: usize,
    h: f64,
    x0: f64,
    sigma: f64,
    upwind: bool,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    check_sites(sites)?;
    let times = time_grid(t_max, points)?;
    let variant = if upwind {
        DropoutVariant::Upwind
    } else {
        DropoutVariant::Hopping
    };
    let parts = dropout_parts(&DropoutModel { sites, h, variant }).map_err(|e| e.to_string())?;
    let packet = Packet { x0, sigma, k0: 0.0 };
    let (sink, trace) = sink_series(&parts, &packet, h, &times)?;
    let samples = packet.samples(sites, h);
    let oracle = times
        .iter()
        .map(|&t| dropout_sink_oracle(&samples, h, t).map_err(|e| e.to_string()))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok([times, sink, oracle, trace].concat())
}

/// `[times | sink | trace]`, each block `points` long.
#[allow(clippy::too_many_arguments)]
pub fn sticking_curve_values(
    sites: usize,
    h: f64,
    w_re: f64,
    w_im: f64,
    x0: f64,
    sigma: f64,
    k0: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    check_sites(sites)?;
    let times = time_grid(t_max, points)?;
    let model = StickingModel {
        sites,
        h,
        w: C64::new(w_re, w_im),
    };
    let parts = sticking_parts(&model).map_err(|e| e.to_string())?;
    let (sink, trace) = sink_series(&parts, &Packet { x0, sigma, k0 }, h, &times)?;
    Ok([times, sink, trace].concat())
}

fn fmt_matrix(out: &mut String, name: &str, m: &CMatrix) {
    let _ = writeln!(out, "{name} =");
    for r in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|c| {
                let z = m[(r, c)];
                format!("{:>8.4}{:+.4}i", z.re, z.im)
            })
            .collect();
        let _ = writeln!(out, "  [{}]", row.join("  "));
    }
}

/// Builds a qubit generator with Hamiltonian `(ω/2)σ_z`, decay `γ↓`,
/// excitation `γ↑` and dephasing `γ_φ`, decomposes it with reference vector
/// `e_chi` and reports the recovered standard form.
pub fn decompose_qubit_report(
    omega: f64,
    gamma_down: f64,
    gamma_up: f64,
    gamma_phi: f64,
    chi: usize,
) -> Result<String, String> {
    if [gamma_down, gamma_up, gamma_phi].iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err("rates must be nonnegative".into());
    }
    if chi > 1 {
        return Err("reference index must be 0 or 1".into());
    }
    let re = |x: f64| C64::new(x, 0.0);
    let h = CMatrix::from_diag(&[re(omega / 2.0), re(-omega / 2.0)]);
    let mut jumps = Vec::new();
    for (rate, op) in [
        (gamma_down, CMatrix::unit(2, 0, 1)),
        (gamma_up, CMatrix::unit(2, 1, 0)),
        (gamma_phi / 2.0, CMatrix::from_diag(&[re(1.0), re(-1.0)])),
    ] {
        if rate > 0.0 {
            jumps.push(op.scale_real(rate.sqrt()));
        }
    }
    let tol = Tolerances::default();
    let gen = StandardForm::from_hamiltonian_jumps(&h, jumps, &tol)
        .and_then(|sf| sf.build_generator(&tol))
        .map_err(|e| e.to_string())?;
    let mut e = vec![ZERO; 2];
    e[chi] = re(1.0);
    let dec = decompose_detailed(&gen, &e, &tol).map_err(|e| e.to_string())?;

    let mut out = String::new();
    fmt_matrix(&mut out, "generator (4x4 superoperator)", gen.matrix());
    let _ = writeln!(out, "\nreference vector e_{chi}");
    fmt_matrix(&mut out, "M", dec.form.m());
    fmt_matrix(&mut out, "effective Hamiltonian (M - M^dagger)/2i", &dec.form.effective_hamiltonian());
    let _ = writeln!(out, "\n{} generalized Kraus operator(s)", dec.form.kraus().len());
    for (k, l) in dec.form.kraus().iter().enumerate() {
        fmt_matrix(&mut out, &format!("L{k}"), l);
    }
    let _ = writeln!(
        out,
        "\nrejected pivots: {}\nform-equality residual: {:.3e}\nround-trip residual: {:.3e}",
        dec.factor.rejected_pivots.len(),
        dec.form_equality_residual,
        dec.round_trip_residual
    );
    Ok(out)
}

#[wasm_bindgen]
pub fn dropout_curve(
    sites: usize,
    h: f64,
    x0: f64,
    sigma: f64,
    upwind: bool,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    dropout_curve_values(sites, h, x0, sigma, upwind, t_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn sticking_curve(
    sites: usize,
    h: f64,
    w_re: f64,
    w_im: f64,
    x0: f64,
    sigma: f64,
    k0: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    sticking_curve_values(sites, h, w_re, w_im, x0, sigma, k0, t_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn decompose_qubit(
    omega: f64,
    gamma_down: f64,
    gamma_up: f64,
    gamma_phi: f64,
    chi: usize,
) -> Result<String, JsError> {
    decompose_qubit_report(omega, gamma_down, gamma_up, gamma_phi, chi).map_err(|e| JsError::new(&e))
}
