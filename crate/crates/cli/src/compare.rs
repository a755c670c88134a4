//! `bandflow compare-generators`: band-profile occupancy under the
//! band-preserving and the Wegner generator.

use bandflow::flow::{GeneratorKind, Snapshot};
use bandflow::oracle::eigenvalues_band;
use bandflow::{integrate_flow, BandMatrix};

use crate::flow_cmd::FlowSettings;
use crate::output::{fmt_f64, Table};
use crate::CliError;

pub const COMPARE_MAX_DIM: usize = 64;

/// Default snapshot grid in units of `1 / ||H||_F^2`.
pub const DEFAULT_SCALED_ELLS: [f64; 14] =
    [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

/// `tridiag(d = (1, 2, 3), e = (1, 1))`.
pub fn default_test_matrix() -> BandMatrix {
    BandMatrix::from_tridiagonal(&[1.0, 2.0, 3.0], &[1.0, 1.0]).expect("valid matrix")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyRow {
    pub generator: GeneratorKind,
    pub ell: f64,
    /// `ell * ||H||_F^2`.
    pub ell_scaled: f64,
    /// `max |h_nm|` over `|n - m| = k`, for `k = 0..N`.
    pub by_offset: Vec<f64>,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorRun {
    pub generator: GeneratorKind,
    pub converged: bool,
    pub final_diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareResult {
    pub rows: Vec<OccupancyRow>,
    pub runs: Vec<GeneratorRun>,
    pub oracle: Vec<f64>,
}

impl CompareResult {
    pub fn table(&self) -> Table {
        let dim = self.oracle.len();
        let mut header: Vec<String> = ["generator", "ell", "ell_scaled", "final"].map(String::from).to_vec();
        header.extend((0..dim).map(|k| format!("offset{k}")));
        let mut t = Table::new(header);
        for r in &self.rows {
            let mut cells = vec![
                r.generator.to_string(),
                fmt_f64(r.ell),
                fmt_f64(r.ell_scaled),
                u8::from(r.is_final).to_string(),
            ];
            cells.extend(r.by_offset.iter().map(|&v| fmt_f64(v)));
            t.push(cells);
        }
        t
    }

    pub fn rows_for(&self, generator: GeneratorKind) -> impl Iterator<Item = &OccupancyRow> {
        self.rows.iter().filter(move |r| r.generator == generator)
    }

    pub fn converged(&self) -> bool {
        self.runs.iter().all(|r| r.converged)
    }
}

/// `max |h_nm|` for each offset `|n - m|`.
pub fn band_profile(h: &BandMatrix) -> Vec<f64> {
    let dim = h.dim();
    (0..dim)
        .map(|k| (0..dim - k).map(|n| h.get(n, n + k).abs()).fold(0.0, f64::max))
        .collect()
}

pub fn compare_generators(
    h: &BandMatrix,
    scaled_ells: &[f64],
    settings: &FlowSettings,
) -> Result<CompareResult, CliError> {
    if h.dim() > COMPARE_MAX_DIM {
        return Err(CliError::Input(format!(
            "compare-generators takes N <= {COMPARE_MAX_DIM}, got N = {}",
            h.dim()
        )));
    }
    if h.occupied_bandwidth() > 1 {
        return Err(CliError::Input("compare-generators needs a tridiagonal matrix".into()));
    }
    if scaled_ells.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(CliError::Input("snapshot values must be finite and non-negative".into()));
    }
    let mut scaled = scaled_ells.to_vec();
    scaled.sort_by(f64::total_cmp);
    let off = if h.bandwidth() >= 1 { h.band(1).to_vec() } else { vec![0.0; h.dim() - 1] };
    let h = BandMatrix::from_tridiagonal(h.diagonal(), &off)?;
    let frob_sq = h.frobenius_norm_sq();
    let unit = if frob_sq > 0.0 { frob_sq } else { 1.0 };
    let ells: Vec<f64> = scaled.iter().map(|s| s / unit).collect();

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for generator in [GeneratorKind::Mielke, GeneratorKind::Wegner] {
        let cfg = FlowSettings { generator, ..settings.clone() }.config().with_snapshots(ells.clone());
        let r = integrate_flow(&h, &cfg)?;
        let mut push = |ell: f64, m: &BandMatrix, is_final: bool| {
            rows.push(OccupancyRow { generator, ell, ell_scaled: ell * unit, by_offset: band_profile(m), is_final });
        };
        for Snapshot { ell, matrix } in &r.snapshots {
            push(*ell, matrix, false);
        }
        push(r.ell_final, &r.final_matrix, true);
        runs.push(GeneratorRun { generator, converged: r.converged, final_diagonal: r.final_diagonal().to_vec() });
    }
    let oracle = eigenvalues_band(&h)?.eigenvalues;
    Ok(CompareResult { rows, runs, oracle })
}
