//! File formats: matrices as row-major `[re, im]` pairs, standard forms as
//! `{dim, M, kraus, chi_index, tolerances}`, trajectories as CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use qds_core::evolve::Trajectory;
use qds_core::linalg::{CMatrix, Tolerances, C64};
use qds_core::stdform::StandardForm;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            entries: m.as_slice().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        let data = self.entries.iter().map(|&[re, im]| C64::new(re, im)).collect();
        CMatrix::new(self.rows, self.cols, data).map_err(|e| CliError::Schema(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesJson {
    pub eq_tol: f64,
    pub psd_tol: f64,
    pub pivot_tol: f64,
}

impl From<Tolerances> for TolerancesJson {
    fn from(t: Tolerances) -> Self {
        Self {
            eq_tol: t.eq_tol,
            psd_tol: t.psd_tol,
            pivot_tol: t.pivot_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardFormJson {
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: MatrixJson,
    pub kraus: Vec<MatrixJson>,
    #[serde(default)]
    pub chi_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesJson>,
}

impl StandardFormJson {
    pub fn from_form(sf: &StandardForm, tolerances: Option<Tolerances>) -> Self {
        Self {
            dim: sf.dim(),
            m: MatrixJson::from_matrix(sf.m()),
            kraus: sf.kraus().iter().map(MatrixJson::from_matrix).collect(),
            chi_index: sf.chi_index(),
            tolerances: tolerances.map(Into::into),
        }
    }

    pub fn to_form(&self) -> Result<StandardForm, CliError> {
        let check = |m: &CMatrix, what: &str| {
            if m.rows() != self.dim || m.cols() != self.dim {
                Err(CliError::Schema(format!(
                    "{what} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols(),
                    d = self.dim
                )))
            } else {
                Ok(())
            }
        };
        let m = self.m.to_matrix()?;
        check(&m, "M")?;
        let mut kraus = Vec::with_capacity(self.kraus.len());
        for (k, l) in self.kraus.iter().enumerate() {
            let l = l.to_matrix()?;
            check(&l, &format!("kraus[{k}]"))?;
            kraus.push(l);
        }
        let sf = StandardForm::new(m, kraus).map_err(|e| CliError::Schema(e.to_string()))?;
        Ok(sf.with_chi_index(self.chi_index))
    }
}

/// Either file kind accepted where a generator is expected.
pub enum GeneratorFile {
    Super(MatrixJson),
    Form(StandardFormJson),
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<MatrixJson, CliError> {
    parse(path, &read_text(path)?)
}

pub fn read_form(path: &Path) -> Result<StandardFormJson, CliError> {
    parse(path, &read_text(path)?)
}

pub fn read_generator(path: &Path) -> Result<GeneratorFile, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse(path, &text)?;
    if value.get("M").is_some() {
        Ok(GeneratorFile::Form(parse(path, &text)?))
    } else {
        Ok(GeneratorFile::Super(parse(path, &text)?))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Schema(e.to_string()))?;
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Column names for a `d × d` state: `rho_re_jk` (or `rho_re_j_k` once an
/// index needs two digits), all real parts first, row-major.
pub fn csv_header(d: usize) -> Vec<String> {
    let label = |j: usize, k: usize| {
        if d <= 10 {
            format!("{j}{k}")
        } else {
            format!("{j}_{k}")
        }
    };
    let mut cols: Vec<String> = ["time", "trace_re", "min_eig", "trace_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for part in ["re", "im"] {
        for j in 0..d {
            for k in 0..d {
                cols.push(format!("rho_{part}_{}", label(j, k)));
            }
        }
    }
    cols
}

/// Seventeen significant digits, enough to reproduce every `f64`.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv(out: &mut impl Write, traj: &Trajectory) -> std::io::Result<()> {
    let d = traj.states.first().map_or(0, CMatrix::rows);
    writeln!(out, "{}", csv_header(d).join(","))?;
    for ((t, rho), diag) in traj.times.iter().zip(&traj.states).zip(&traj.diagnostics) {
        let mut row = vec![fmt(*t), fmt(diag.trace.re), fmt(diag.min_eigenvalue), fmt(diag.trace_norm)];
        row.extend(rho.as_slice().iter().map(|z| fmt(z.re)));
        row.extend(rho.as_slice().iter().map(|z| fmt(z.im)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
