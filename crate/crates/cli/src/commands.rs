use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qds_core::decompose::decompose_detailed;
use qds_core::evolve::{trajectory_with, FormPropagator, Propagator, SuperPropagator, Trajectory};
use qds_core::linalg::{CMatrix, Tolerances, C64, ZERO};
use qds_core::QdsError;
use qds_core::models::{
    dropout_parts, dropout_refinement, sticking_parts, sticking_refinement, DropoutModel,
    DropoutVariant, ModelParts, Packet, RefinementLevel, StickingModel,
};
use qds_core::superop::{
    check_pointwise_positivity, check_trace_annihilation, is_conditionally_cp,
    trace_annihilation_residual, SuperOperator,
};

use crate::schema::{
    read_form, read_generator, read_matrix, write_json, write_trajectory_csv, GeneratorFile,
    MatrixJson, StandardFormJson,
};
use crate::CliError;

/// Tolerance overrides from the command line; unset fields fall back to the
/// input file's tolerances, then to the defaults.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToleranceFlags {
    pub eq_tol: Option<f64>,
    pub psd_tol: Option<f64>,
    pub pivot_tol: Option<f64>,
}

impl ToleranceFlags {
    pub fn resolve(&self, file: Option<Tolerances>) -> Result<Tolerances, CliError> {
        let base = file.unwrap_or_default();
        Tolerances::new(
            self.eq_tol.unwrap_or(base.eq_tol),
            self.psd_tol.unwrap_or(base.psd_tol),
            self.pivot_tol.unwrap_or(base.pivot_tol),
        )
        .map_err(|e| CliError::Schema(e.to_string()))
    }
}

fn file_tolerances(form: &StandardFormJson) -> Result<Option<Tolerances>, CliError> {
    form.tolerances
        .map(|t| Tolerances::new(t.eq_tol, t.psd_tol, t.pivot_tol))
        .transpose()
        .map_err(|e| CliError::Schema(e.to_string()))
}

/// `t0:t1:n`, `n ≥ 2` equally spaced times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Schema(format!("time grid '{text}' is not of the form t0:t1:n"));
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = a.trim().parse().map_err(|_| bad())?;
        let end: f64 = b.trim().parse().map_err(|_| bad())?;
        let count: usize = n.trim().parse().map_err(|_| bad())?;
        if !(start.is_finite() && end.is_finite()) {
            return Err(bad());
        }
        if count < 2 {
            return Err(CliError::Schema(format!("time grid needs at least 2 points, got {count}")));
        }
        if start < 0.0 || end < 0.0 {
            return Err(CliError::Validation(format!(
                "negative time in range {start}:{end}: semigroups only evolve forward"
            )));
        }
        if end <= start {
            return Err(CliError::Validation(format!("time range {start}:{end} is not increasing")));
        }
        Ok(Self { start, end, count })
    }

    pub fn times(&self) -> Vec<f64> {
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.end } else { self.start + i as f64 * step })
            .collect()
    }
}

/// Parses `re+imi` / `re-imi` (for example `0+1i`, `0.5-2e-1i`).
pub fn parse_complex(text: &str) -> Result<C64, CliError> {
    let bad = || CliError::Schema(format!("complex number '{text}' is not of the form re+imi"));
    let s = text.trim();
    let body = s.strip_suffix('i').ok_or_else(bad)?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| {
            (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E')
        })
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].trim_start_matches('+').parse().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

fn read_superop(path: &Path) -> Result<SuperOperator, CliError> {
    let m = read_matrix(path)?.to_matrix()?;
    SuperOperator::from_matrix(m).map_err(|e| CliError::Schema(e.to_string()))
}

pub fn build(input: &Path, output: &Path, flags: &ToleranceFlags) -> Result<String, CliError> {
    let file = read_form(input)?;
    let tol = flags.resolve(file_tolerances(&file)?)?;
    let sf = file.to_form()?;
    let gen = sf.build_generator(&tol)?;
    write_json(output, &MatrixJson::from_matrix(gen.matrix()))?;
    Ok(format!(
        "dim={} kraus_count={} form_equality_residual={:e}\n",
        sf.dim(),
        sf.kraus().len(),
        sf.verify_form_equality()
    ))
}

pub fn decompose(input: &Path, output: &Path, chi: usize, flags: &ToleranceFlags) -> Result<String, CliError> {
    let tol = flags.resolve(None)?;
    let gen = read_superop(input)?;
    let d = gen.dim();
    if chi >= d {
        return Err(CliError::Schema(format!(
            "--chi {chi} out of range for dimension {d}"
        )));
    }
    let mut e = vec![ZERO; d];
    e[chi] = C64::new(1.0, 0.0);
    let result = match decompose_detailed(&gen, &e, &tol) {
        Ok(r) => r,
        Err(err @ QdsError::NotTraceAnnihilating { .. }) => {
            // report the positivity witness too, when there is one
            let ccp = is_conditionally_cp(&gen, &tol);
            let mut msg = err.to_string();
            if let Some(w) = ccp.witness.filter(|_| !ccp.passes) {
                let _ = write!(
                    msg,
                    "\nnot conditionally completely positive either: min compressed Choi eigenvalue {:e}\nwitness: {}",
                    ccp.min_eigenvalue,
                    serde_json::to_string(&MatrixJson::from_matrix(&w)).unwrap_or_default()
                );
            }
            return Err(CliError::Validation(msg));
        }
        Err(err) => return Err(err.into()),
    };
    let form = result.form.with_chi_index(Some(chi));
    write_json(output, &StandardFormJson::from_form(&form, Some(tol)))?;
    Ok(format!(
        "round_trip_residual={:e}\nform_equality_residual={:e}\nkraus_count={}\n",
        result.round_trip_residual,
        result.form_equality_residual,
        form.kraus().len()
    ))
}

pub fn verify(input: &Path, seed: u64, samples: usize, flags: &ToleranceFlags) -> Result<String, CliError> {
    let tol = flags.resolve(None)?;
    let gen = read_superop(input)?;
    let mut report = String::new();
    let mut failed = Vec::new();

    let residual = trace_annihilation_residual(&gen);
    let trace_ok = check_trace_annihilation(&gen, &tol);
    writeln!(report, "trace_annihilation_residual={residual:e} {}", verdict(trace_ok)).ok();
    if !trace_ok {
        failed.push("trace annihilation");
    }

    let ccp = is_conditionally_cp(&gen, &tol);
    writeln!(report, "ccp_min_eigenvalue={:e} {}", ccp.min_eigenvalue, verdict(ccp.passes)).ok();
    if !ccp.passes {
        failed.push("conditional complete positivity");
    }

    let pointwise = check_pointwise_positivity(&gen, samples, seed, &tol);
    writeln!(
        report,
        "pointwise_samples={} seed={seed} diagonal_max={:e} off_diagonal_min={:e} violations={}+{} {}",
        pointwise.trials,
        pointwise.diagonal_max,
        pointwise.off_diagonal_min,
        pointwise.diagonal_violations,
        pointwise.off_diagonal_violations,
        verdict(pointwise.passes())
    )
    .ok();
    if !pointwise.passes() {
        failed.push("pointwise positivity");
    }

    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Validation(format!("{report}failed checks: {}", failed.join(", "))))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn write_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    write_trajectory_csv(&mut out, traj).map_err(io)
}

fn run_trajectory(
    prop: &mut impl Propagator,
    rho0: &CMatrix,
    grid: &TimeGrid,
    tol: &Tolerances,
    csv: &Path,
) -> Result<Vec<String>, CliError> {
    let traj = trajectory_with(prop, rho0, &grid.times(), tol)?;
    write_csv(csv, &traj)?;
    Ok(traj.warnings)
}

pub fn evolve(
    input: &Path,
    rho0: &Path,
    grid: &TimeGrid,
    output: &Path,
    flags: &ToleranceFlags,
) -> Result<String, CliError> {
    let generator = read_generator(input)?;
    let rho0 = read_matrix(rho0)?.to_matrix()?;
    let warnings = match generator {
        GeneratorFile::Super(m) => {
            let tol = flags.resolve(None)?;
            let gen = SuperOperator::from_matrix(m.to_matrix()?)
                .map_err(|e| CliError::Schema(e.to_string()))?;
            check_rho0(&rho0, gen.dim())?;
            run_trajectory(&mut SuperPropagator::new(gen), &rho0, grid, &tol, output)?
        }
        GeneratorFile::Form(f) => {
            let tol = flags.resolve(file_tolerances(&f)?)?;
            let sf = f.to_form()?;
            check_rho0(&rho0, sf.dim())?;
            run_trajectory(&mut FormPropagator::new(&sf), &rho0, grid, &tol, output)?
        }
    };
    Ok(warnings.into_iter().map(|w| format!("warning: {w}\n")).collect())
}

fn check_rho0(rho0: &CMatrix, d: usize) -> Result<(), CliError> {
    if rho0.rows() != d || rho0.cols() != d {
        return Err(CliError::Schema(format!(
            "initial state is {}x{}, generator acts on dimension {d}",
            rho0.rows(),
            rho0.cols()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    Dropout(DropoutVariant),
    Sticking(C64),
}

#[derive(Clone, Debug)]
pub struct ModelArgs {
    pub kind: ModelKind,
    pub sites: usize,
    pub h: f64,
    pub packet: Packet,
    /// Final time for the refinement table.
    pub t_final: f64,
    pub refine: Option<usize>,
    pub evolve: Option<TimeGrid>,
    pub csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub rho0_out: Option<PathBuf>,
}

fn model_parts(kind: ModelKind, sites: usize, h: f64) -> Result<ModelParts, CliError> {
    let parts = match kind {
        ModelKind::Dropout(variant) => dropout_parts(&DropoutModel { sites, h, variant })?,
        ModelKind::Sticking(w) => sticking_parts(&StickingModel { sites, h, w })?,
    };
    Ok(parts)
}

fn refinement_table(levels: &[RefinementLevel]) -> String {
    let mut out = String::from("level,h,N,sink_population,trace_deficit,deficit_ratio,sink_change\n");
    for (k, l) in levels.iter().enumerate() {
        let (ratio, change) = if k == 0 {
            (String::new(), String::new())
        } else {
            let prev = &levels[k - 1];
            (
                format!("{:.6}", prev.trace_deficit / l.trace_deficit),
                format!("{:e}", (l.sink_population - prev.sink_population).abs()),
            )
        };
        writeln!(
            out,
            "{k},{},{},{:.12e},{:.6e},{ratio},{change}",
            l.h, l.sites, l.sink_population, l.trace_deficit
        )
        .ok();
    }
    out
}

pub fn model(args: &ModelArgs, flags: &ToleranceFlags) -> Result<String, CliError> {
    let tol = flags.resolve(None)?;
    let parts = model_parts(args.kind, args.sites, args.h)?;
    let mut report = String::new();
    if let Some(out) = &args.out {
        let sf = parts.to_standard_form()?;
        writeln!(report, "form_equality_residual={:e}", sf.verify_form_equality()).ok();
        write_json(out, &StandardFormJson::from_form(&sf, None))?;
    }
    let rho0 = args.packet.density(args.sites, args.h);
    if let Some(path) = &args.rho0_out {
        write_json(path, &MatrixJson::from_matrix(&rho0))?;
    }
    if let Some(grid) = &args.evolve {
        let csv = args
            .csv
            .as_deref()
            .ok_or_else(|| CliError::Schema("--evolve needs --csv <path>".into()))?;
        let mut prop = parts.propagator()?;
        for w in run_trajectory(&mut prop, &rho0, grid, &tol, csv)? {
            writeln!(report, "warning: {w}").ok();
        }
    }
    if let Some(levels) = args.refine {
        if args.t_final < 0.0 {
            return Err(qds_core::QdsError::NegativeTime(args.t_final).into());
        }
        let table = match args.kind {
            ModelKind::Dropout(variant) => dropout_refinement(
                &DropoutModel { sites: args.sites, h: args.h, variant },
                &args.packet,
                args.t_final,
                levels,
            )?,
            ModelKind::Sticking(w) => sticking_refinement(
                &StickingModel { sites: args.sites, h: args.h, w },
                &args.packet,
                args.t_final,
                levels,
            )?,
        };
        report.push_str(&refinement_table(&table));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_parsing() {
        let g = TimeGrid::parse("0:3:31").unwrap();
        let t = g.times();
        assert_eq!(t.len(), 31);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[30], 3.0);
        assert!((t[10] - 1.0).abs() < 1e-15);
        assert_eq!(TimeGrid::parse("-1:3:31").unwrap_err().exit_code(), 2);
        assert_eq!(TimeGrid::parse("2:1:5").unwrap_err().exit_code(), 2);
        assert_eq!(TimeGrid::parse("0:1:1").unwrap_err().exit_code(), 1);
        assert_eq!(TimeGrid::parse("0:1").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0+1i").unwrap(), C64::new(0.0, 1.0));
        assert_eq!(parse_complex("0+0i").unwrap(), C64::new(0.0, 0.0));
        assert_eq!(parse_complex("-0.5-2i").unwrap(), C64::new(-0.5, -2.0));
        assert_eq!(parse_complex("1e-3+2.5e+1i").unwrap(), C64::new(1e-3, 25.0));
        assert!(parse_complex("1+2").is_err());
        assert!(parse_complex("i").is_err());
        assert!(parse_complex("abc+1i").is_err());
    }

    #[test]
    fn tolerance_precedence() {
        let file = Tolerances::new(1e-8, 1e-9, 1e-11).unwrap();
        let flags = ToleranceFlags {
            psd_tol: Some(1e-6),
            ..Default::default()
        };
        let t = flags.resolve(Some(file)).unwrap();
        assert_eq!((t.eq_tol, t.psd_tol, t.pivot_tol), (1e-8, 1e-6, 1e-11));
        assert_eq!(ToleranceFlags::default().resolve(None).unwrap(), Tolerances::default());
        let bad = ToleranceFlags {
            eq_tol: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.resolve(None).is_err());
    }
}
