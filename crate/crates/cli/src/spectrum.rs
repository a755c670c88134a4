//! `bandflow spectrum`: flow, oracle and asymptotic eigenvalues side by side.

use bandflow::analytics::{
    lipkin_rpa_spectrum, spinboson_eps_asym, AsymptoticFormula, ValidityThresholds,
};
use bandflow::models::{build_lipkin_block, build_spinboson, default_truncation, LipkinBlock};
use bandflow::oracle::eigenvalues_band;
use bandflow::{integrate_flow, Lipkin, SpinBoson};

use crate::flow_cmd::FlowSettings;
use crate::output::{fmt_f64, fmt_opt, Table};
use crate::CliError;

/// Cutoff stability required by truncation certification, in units of omega.
pub const CERTIFY_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_DOUBLINGS: u32 = 4;

pub const REPORT_COLUMNS: [&str; 9] = [
    "n",
    "eps_flow",
    "eps_oracle",
    "eps_asym1",
    "eps_asym2",
    "rel_err_asym1",
    "rel_err_asym2",
    "cond_f",
    "cond_order",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub n: usize,
    pub eps_flow: f64,
    pub eps_oracle: f64,
    pub eps_asym1: Option<f64>,
    pub eps_asym2: Option<f64>,
    pub rel_err_asym1: Option<f64>,
    pub rel_err_asym2: Option<f64>,
    pub cond_f: Option<f64>,
    pub cond_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
    pub converged: bool,
    /// Certified cutoff, for truncated models.
    pub n_trunc: Option<usize>,
    /// Human-readable remarks for stderr.
    pub notes: Vec<String>,
}

impl SpectrumReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(REPORT_COLUMNS);
        for r in &self.rows {
            t.push(vec![
                r.n.to_string(),
                fmt_f64(r.eps_flow),
                fmt_f64(r.eps_oracle),
                fmt_opt(r.eps_asym1),
                fmt_opt(r.eps_asym2),
                fmt_opt(r.rel_err_asym1),
                fmt_opt(r.rel_err_asym2),
                fmt_opt(r.cond_f),
                fmt_opt(r.cond_order),
            ]);
        }
        t
    }
}

/// `|asym - flow| / |flow|`, with the denominator kept away from zero by `1e-12 scale`.
pub fn relative_error(asym: f64, flow: f64, scale: f64) -> f64 {
    (asym - flow).abs() / flow.abs().max(1e-12 * scale)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    pub n_trunc: usize,
    /// Largest change of the tracked levels between `n_trunc` and `2 n_trunc`.
    pub change: f64,
}

fn lowest_levels(params: &SpinBoson, count: usize) -> Result<Vec<f64>, CliError> {
    let mut e = eigenvalues_band(&build_spinboson(params)?)?.eigenvalues;
    e.truncate(count);
    Ok(e)
}

/// Doubles the cutoff, starting from `start`, until levels `0..=n_max`
/// move by less than `CERTIFY_TOL * omega` under a further doubling.
pub fn certify_truncation(
    params: &SpinBoson,
    n_max: usize,
    start: usize,
    max_doublings: u32,
) -> Result<Certification, CliError> {
    let mut n_trunc = start.max(n_max + 1).max(2);
    let tol = CERTIFY_TOL * params.omega;
    let mut lo = lowest_levels(&params.with_n_trunc(n_trunc), n_max + 1)?;
    for i in 0..=max_doublings {
        let hi = lowest_levels(&params.with_n_trunc(2 * n_trunc), n_max + 1)?;
        let change = lo.iter().zip(&hi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < tol {
            return Ok(Certification { n_trunc, change });
        }
        if i == max_doublings {
            return Err(CliError::Truncation { n_max, n_trunc, doubled: 2 * n_trunc, change });
        }
        n_trunc *= 2;
        lo = hi;
    }
    unreachable!()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonRequest {
    pub params: SpinBoson,
    pub levels: Vec<usize>,
    /// Starting cutoff; [`default_truncation`] when `None`.
    pub n_trunc: Option<usize>,
    pub max_doublings: u32,
    pub thresholds: ValidityThresholds<f64>,
}

impl SpinBosonRequest {
    pub fn new(params: SpinBoson, levels: Vec<usize>) -> Self {
        SpinBosonRequest {
            params,
            levels,
            n_trunc: None,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
            thresholds: ValidityThresholds::default(),
        }
    }
}

/// Sorted eigenvalues of one spin-boson branch at a certified cutoff, from
/// the flow and from the oracle. Returns `(flow, oracle, converged, cert)`.
pub fn spinboson_levels(
    params: &SpinBoson,
    n_max: usize,
    start: Option<usize>,
    max_doublings: u32,
    settings: &FlowSettings,
) -> Result<(Vec<f64>, Vec<f64>, bool, Certification), CliError> {
    let start = start.unwrap_or_else(|| default_truncation(n_max, params.lambda, params.omega));
    let cert = certify_truncation(params, n_max, start, max_doublings)?;
    let p = params.with_n_trunc(cert.n_trunc);
    let h = build_spinboson(&p)?;
    let flow = integrate_flow(&h, &settings.config())?;
    let oracle = eigenvalues_band(&h)?.eigenvalues;
    Ok((sorted(flow.final_diagonal().to_vec()), oracle, flow.converged, cert))
}

pub fn spinboson_spectrum(req: &SpinBosonRequest, settings: &FlowSettings) -> Result<SpectrumReport, CliError> {
    let p = &req.params;
    let n_max = *req.levels.iter().max().ok_or_else(|| CliError::Input("no levels requested".into()))?;
    let (flow, oracle, converged, cert) = spinboson_levels(p, n_max, req.n_trunc, req.max_doublings, settings)?;
    let mut notes = vec![format!(
        "n_trunc certified at {} (levels 0..={} stable to {:e})",
        cert.n_trunc, n_max, cert.change
    )];
    let mut rows = Vec::with_capacity(req.levels.len());
    let mut outside = Vec::new();
    for &n in &req.levels {
        let a1 = spinboson_eps_asym(n, p, AsymptoticFormula::Bessel).ok();
        let a2 = spinboson_eps_asym(n, p, AsymptoticFormula::Cosine).ok();
        if let Some(a) = &a1 {
            if !req.thresholds.accepts(a) {
                outside.push(n.to_string());
            }
        }
        let rel = |a: Option<f64>| a.map(|v| relative_error(v, flow[n], p.omega));
        rows.push(SpectrumRow {
            n,
            eps_flow: flow[n],
            eps_oracle: oracle[n],
            eps_asym1: a1.map(|a| a.value),
            eps_asym2: a2.map(|a| a.value),
            rel_err_asym1: rel(a1.map(|a| a.value)),
            rel_err_asym2: rel(a2.map(|a| a.value)),
            cond_f: a1.map(|a| a.cond_f),
            cond_order: a1.map(|a| a.cond_order),
        });
    }
    if !outside.is_empty() {
        notes.push(format!(
            "asymptotic formula outside validity thresholds (cond_f < {}, cond_order < {}) for n = {}",
            req.thresholds.cond_f,
            req.thresholds.cond_order,
            outside.join(",")
        ));
    }
    Ok(SpectrumReport { rows, converged, n_trunc: Some(cert.n_trunc), notes })
}

/// Both parity blocks, merged into one ascending spectrum. `levels = None`
/// reports all `2J + 1` levels.
pub fn lipkin_spectrum(
    params: &Lipkin,
    levels: Option<&[usize]>,
    settings: &FlowSettings,
) -> Result<SpectrumReport, CliError> {
    let mut flow = Vec::new();
    let mut oracle = Vec::new();
    let mut rpa = Some(Vec::new());
    let mut converged = true;
    let mut notes = Vec::new();
    for block in [LipkinBlock::A, LipkinBlock::B] {
        let h = build_lipkin_block(params, block)?;
        let r = integrate_flow(&h, &settings.config())?;
        converged &= r.converged;
        flow.extend_from_slice(r.final_diagonal());
        oracle.extend(eigenvalues_band(&h)?.eigenvalues);
        for n in 0..h.dim() {
            match (rpa.as_mut(), lipkin_rpa_spectrum(params, n, block)) {
                (Some(v), Ok(e)) => v.push(e),
                (Some(_), Err(e)) => {
                    notes.push(format!("no RPA column: {e}"));
                    rpa = None;
                }
                (None, _) => {}
            }
        }
    }
    let flow = sorted(flow);
    let oracle = sorted(oracle);
    let rpa = rpa.map(sorted);
    let total = flow.len();
    let all: Vec<usize> = (0..total).collect();
    let levels = levels.unwrap_or(&all);
    if let Some(&bad) = levels.iter().find(|&&n| n >= total) {
        return Err(CliError::Input(format!("level {bad} out of range (model has {total} levels)")));
    }
    let rows = levels
        .iter()
        .map(|&n| {
            let a1 = rpa.as_ref().map(|v| v[n]);
            SpectrumRow {
                n,
                eps_flow: flow[n],
                eps_oracle: oracle[n],
                eps_asym1: a1,
                eps_asym2: None,
                rel_err_asym1: a1.map(|v| relative_error(v, flow[n], params.xi0)),
                rel_err_asym2: None,
                cond_f: None,
                cond_order: None,
            }
        })
        .collect();
    Ok(SpectrumReport { rows, converged, n_trunc: None, notes })
}
