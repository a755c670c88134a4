//! `bandflow flow`: integrate a matrix read from a file.

use std::fmt::Write as _;
use std::path::Path;

use bandflow::flow::{GeneratorKind, TraceMode};
use bandflow::{integrate_flow, BandMatrix, Config, Flow};

use crate::output::{fmt_f64, Table};
use crate::CliError;

/// Integrator settings shared by every subcommand; `None` keeps the library default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowSettings {
    pub generator: GeneratorKind,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub conv_tol: Option<f64>,
    pub ell_max: Option<f64>,
}

impl FlowSettings {
    pub fn config(&self) -> Config {
        let mut c = Config { generator: self.generator, ..Config::default() };
        if let Some(v) = self.rel_tol {
            c.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            c.abs_tol = v;
        }
        if let Some(v) = self.conv_tol {
            c.convergence_tol = v;
        }
        c.ell_max = self.ell_max;
        c
    }
}

pub fn read_matrix(path: &Path) -> Result<BandMatrix, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(BandMatrix::read_text(std::io::BufReader::new(file))?)
}

/// Trace CSV: `ell, trace, frob_sq, offdiag_sq, h00, h11, ...`.
pub fn trace_table(result: &Flow) -> Table {
    let dim = result.final_matrix.dim();
    let mut header: Vec<String> = ["ell", "trace", "frob_sq", "offdiag_sq"].map(String::from).to_vec();
    header.extend((0..dim).map(|i| format!("h{i}{i}")));
    let mut t = Table::new(header);
    for row in &result.trace_rows {
        let mut cells = vec![fmt_f64(row.ell), fmt_f64(row.trace), fmt_f64(row.frob_sq), fmt_f64(row.offdiag_sq)];
        cells.extend(row.diagonal.iter().map(|&v| fmt_f64(v)));
        t.push(cells);
    }
    t
}

pub struct FlowRun {
    pub result: Flow,
    pub trace: Table,
}

/// Runs the flow with trace rows recorded per accepted step, or at the
/// given snapshot values when `snapshots` is non-empty.
pub fn run_flow(h: &BandMatrix, settings: &FlowSettings, snapshots: Vec<f64>) -> Result<FlowRun, CliError> {
    let mode = if snapshots.is_empty() { TraceMode::Steps } else { TraceMode::Snapshots };
    let cfg = settings.config().with_snapshots(snapshots).with_trace(mode);
    let result = integrate_flow(h, &cfg)?;
    let trace = trace_table(&result);
    Ok(FlowRun { result, trace })
}

pub fn summary(result: &Flow) -> String {
    let mut s = String::new();
    let d = &result.diagnostics;
    let diag: Vec<String> = result.final_diagonal().iter().map(|&v| fmt_f64(v)).collect();
    writeln!(s, "converged: {}", result.converged).unwrap();
    writeln!(s, "ell_final: {}", fmt_f64(result.ell_final)).unwrap();
    writeln!(s, "steps: {} accepted, {} rejected", result.accepted_steps, result.rejected_steps).unwrap();
    writeln!(s, "offdiag_norm: {}", fmt_f64(result.final_matrix.offdiag_norm_sq().sqrt())).unwrap();
    writeln!(s, "trace_drift: {}", fmt_f64(d.trace_drift)).unwrap();
    writeln!(s, "frobenius_drift: {}", fmt_f64(d.frobenius_drift)).unwrap();
    writeln!(s, "partial_trace_violation: {}", fmt_f64(d.partial_trace_violation)).unwrap();
    writeln!(s, "final_diagonal: {}", diag.join(" ")).unwrap();
    s
}
