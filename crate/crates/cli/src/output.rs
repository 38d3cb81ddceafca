//! CSV tracks and TOML reports. Floats in CSV carry 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use floquet_anholonomy::SpectralFlow;
use serde::Serialize;

use crate::CliError;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Columns `lambda, E_0…E_{N-1}` (unwrapped), `w_n = ⟨ξ_n|V|ξ_n⟩` and
/// `s_n = |⟨ξ_n(λ₀)|ξ_n(λ)⟩|²`.
pub fn flow_csv(flow: &SpectralFlow) -> Result<Vec<u8>, CliError> {
    let n = flow.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda".to_string()];
    header.extend((0..n).map(|k| format!("E_{k}")));
    header.extend((0..n).map(|k| format!("w_{k}")));
    header.extend((0..n).map(|k| format!("s_{k}")));
    w.write_record(&header).map_err(csv_error)?;
    let survival: Vec<Vec<f64>> = (0..n).map(|k| flow.survival(k)).collect();
    for (j, &l) in flow.lambdas().iter().enumerate() {
        let mut row = vec![fmt_float(l)];
        row.extend((0..n).map(|k| fmt_float(flow.energies(k)[j])));
        row.extend((0..n).map(|k| fmt_float(flow.weights(k)[j])));
        row.extend((0..n).map(|k| fmt_float(survival[k][j])));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

pub fn toml_report<T: Serialize>(report: &T) -> Result<String, CliError> {
    toml::to_string(report).map_err(|e| CliError::Io(std::io::Error::other(e)))
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}
