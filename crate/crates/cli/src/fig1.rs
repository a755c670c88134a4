//! `bandflow fig1`: relative error of the Bessel-form spin-boson levels
//! against the converged flow, swept over delta / omega.

use bandflow::analytics::{spinboson_eps_asym, AsymptoticFormula};
use bandflow::models::Branch;
use bandflow::SpinBoson;
use rayon::prelude::*;

use crate::flow_cmd::FlowSettings;
use crate::output::{fmt_f64, Table};
use crate::spectrum::{relative_error, spinboson_levels, DEFAULT_MAX_DOUBLINGS};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Options {
    pub lambda_over_omega: f64,
    pub omega: f64,
    pub n_list: Vec<usize>,
    /// Values of delta / omega.
    pub delta_grid: Vec<f64>,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub max_doublings: u32,
    pub settings: FlowSettings,
}

impl Default for Fig1Options {
    fn default() -> Self {
        Fig1Options {
            lambda_over_omega: 4.0,
            omega: 1.0,
            n_list: vec![10, 15, 20],
            delta_grid: uniform_grid(5.0, 26),
            threads: None,
            max_doublings: DEFAULT_MAX_DOUBLINGS,
            settings: FlowSettings::default(),
        }
    }
}

/// `points` equally spaced values on `[0, max]`.
pub fn uniform_grid(max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Row {
    pub delta_over_omega: f64,
    pub n: usize,
    /// Larger of the two branch errors.
    pub rel_err_asym1: f64,
    pub rel_err_plus: f64,
    pub rel_err_minus: f64,
    pub cond_f: f64,
    pub cond_order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Result {
    pub rows: Vec<Fig1Row>,
    pub converged: bool,
    pub n_trunc_max: usize,
}

impl Fig1Result {
    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "delta_over_omega",
            "n",
            "rel_err_asym1",
            "rel_err_plus",
            "rel_err_minus",
            "cond_f",
            "cond_order",
        ]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.delta_over_omega),
                r.n.to_string(),
                fmt_f64(r.rel_err_asym1),
                fmt_f64(r.rel_err_plus),
                fmt_f64(r.rel_err_minus),
                fmt_f64(r.cond_f),
                fmt_f64(r.cond_order),
            ]);
        }
        t
    }

    /// Rows for one level, in grid order.
    pub fn curve(&self, n: usize) -> Vec<&Fig1Row> {
        self.rows.iter().filter(|r| r.n == n).collect()
    }
}

/// Reads the thread cap from the environment.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(crate::THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

struct BranchLevels {
    flow: Vec<f64>,
    converged: bool,
    n_trunc: usize,
}

pub fn run_fig1(opts: &Fig1Options) -> Result<Fig1Result, CliError> {
    if opts.n_list.is_empty() || opts.delta_grid.is_empty() {
        return Err(CliError::Input("fig1 needs at least one level and one grid point".into()));
    }
    if opts.n_list.contains(&0) {
        return Err(CliError::Input("the asymptotic formula needs n >= 1".into()));
    }
    let omega = opts.omega;
    let n_max = *opts.n_list.iter().max().expect("non-empty");
    let params = |d: f64, branch: Branch| {
        SpinBoson::new(d * omega, opts.lambda_over_omega * omega, omega, branch, n_max + 1)
    };
    // every flow yields all requested levels of its branch at once
    let tasks: Vec<(f64, Branch)> = opts
        .delta_grid
        .iter()
        .flat_map(|&d| Branch::both().map(|b| (d, b)))
        .collect();
    let solve = |&(d, branch): &(f64, Branch)| -> Result<BranchLevels, CliError> {
        let p = params(d, branch)?;
        let (flow, _, converged, cert) = spinboson_levels(&p, n_max, None, opts.max_doublings, &opts.settings)?;
        Ok(BranchLevels { flow, converged, n_trunc: cert.n_trunc })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start thread pool: {e}")))?;
    let solved: Vec<BranchLevels> = pool.install(|| tasks.par_iter().map(solve).collect::<Result<_, _>>())?;

    let mut rows = Vec::with_capacity(opts.delta_grid.len() * opts.n_list.len());
    for (i, &d) in opts.delta_grid.iter().enumerate() {
        let (plus, minus) = (&solved[2 * i], &solved[2 * i + 1]);
        for &n in &opts.n_list {
            let err = |levels: &BranchLevels, branch: Branch| -> Result<(f64, f64, f64), CliError> {
                let a = spinboson_eps_asym(n, &params(d, branch)?, AsymptoticFormula::Bessel)?;
                Ok((relative_error(a.value, levels.flow[n], omega), a.cond_f, a.cond_order))
            };
            let (ep, cond_f, cond_order) = err(plus, Branch::Plus)?;
            let (em, _, _) = err(minus, Branch::Minus)?;
            rows.push(Fig1Row {
                delta_over_omega: d,
                n,
                rel_err_asym1: ep.max(em),
                rel_err_plus: ep,
                rel_err_minus: em,
                cond_f,
                cond_order,
            });
        }
    }
    Ok(Fig1Result {
        rows,
        converged: solved.iter().all(|s| s.converged),
        n_trunc_max: solved.iter().map(|s| s.n_trunc).max().unwrap_or(0),
    })
}
