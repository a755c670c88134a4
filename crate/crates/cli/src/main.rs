use std::path::PathBuf;

use bandflow::analytics::ValidityThresholds;
use bandflow::flow::GeneratorKind;
use bandflow::models::{build_lipkin_block, build_spinboson, parse_model_spec, LipkinBlock, ModelSpec};
use bandflow_cli::compare::{compare_generators, default_test_matrix, DEFAULT_SCALED_ELLS};
use bandflow_cli::fig1::{run_fig1, uniform_grid, Fig1Options};
use bandflow_cli::flow_cmd::{read_matrix, run_flow, summary, FlowSettings};
use bandflow_cli::output::{emit, fmt_f64};
use bandflow_cli::spectrum::{lipkin_spectrum, spinboson_spectrum, SpinBosonRequest, DEFAULT_MAX_DOUBLINGS};
use bandflow_cli::{parse_levels, parse_list, CliError, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
use clap::{Args, Parser, Subcommand};

/// Band-preserving flow equations for symmetric band matrices.
///
/// CSV goes to stdout (or --out); summaries and notes go to stderr.
/// Exit status: 0 converged, 2 not converged, 3 input error,
/// 4 truncation certification failure.
#[derive(Parser, Debug)]
#[command(name = "bandflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the flow for a matrix file and write its trace CSV.
    Flow(FlowCmd),
    /// Flow, oracle and asymptotic eigenvalues of a model.
    Spectrum(SpectrumCmd),
    /// Relative error of the Bessel-form spin-boson levels over delta/omega.
    Fig1(Fig1Cmd),
    /// Band-profile occupancy under the band-preserving and Wegner generators.
    CompareGenerators(CompareCmd),
    /// Write a model matrix in the `bandmat` text format.
    Build(BuildCmd),
}

#[derive(Args, Debug, Clone)]
struct FlowArgs {
    /// Generator: mielke (band-preserving) or wegner.
    #[arg(long, default_value = "mielke")]
    generator: GeneratorKind,
    /// Stop at this flow parameter [default: 50/g, g = 1e-3 ||H||_F / N].
    #[arg(long)]
    ell_max: Option<f64>,
    /// Relative integration tolerance.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Absolute integration tolerance.
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Converged when ||offdiag|| <= conv_tol * ||H||_F.
    #[arg(long, default_value_t = 1e-10)]
    conv_tol: f64,
}

impl FlowArgs {
    fn settings(&self) -> FlowSettings {
        FlowSettings {
            generator: self.generator,
            rel_tol: Some(self.rtol),
            abs_tol: Some(self.atol),
            conv_tol: Some(self.conv_tol),
            ell_max: self.ell_max,
        }
    }
}

#[derive(Args, Debug)]
struct FlowCmd {
    /// Matrix file in the `bandmat N M` text format.
    matrix: PathBuf,
    /// Trace CSV destination [default: stdout].
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Comma-separated ell values; trace rows at these points instead of every step.
    #[arg(long)]
    snapshots: Option<String>,
    #[command(flatten)]
    flow: FlowArgs,
}

/// Model selection; `key=value` positionals are accepted as well and
/// explicit flags win over them.
#[derive(Args, Debug)]
struct ModelArgs {
    /// `model=lipkin|spinboson` and parameter pairs such as `lambda=4`.
    pairs: Vec<String>,
    /// lipkin or spinboson.
    #[arg(long)]
    model: Option<String>,
    /// Lipkin single-particle splitting [default: 1].
    #[arg(long)]
    xi0: Option<f64>,
    /// Lipkin pair interaction [default: 0].
    #[arg(long)]
    v0: Option<f64>,
    /// Twice the Lipkin pseudo-spin J [default: 2].
    #[arg(long)]
    two_j: Option<u32>,
    /// Spin-boson tunnelling splitting [default: 0].
    #[arg(long)]
    delta: Option<f64>,
    /// Spin-boson coupling [default: 0].
    #[arg(long)]
    lambda: Option<f64>,
    /// Boson frequency [default: 1].
    #[arg(long)]
    omega: Option<f64>,
    /// Spin-boson parity branch, + or - [default: +].
    #[arg(long, allow_hyphen_values = true)]
    branch: Option<String>,
    /// Spin-boson Fock cutoff (starting point for certification).
    #[arg(long)]
    n_trunc: Option<usize>,
}

impl ModelArgs {
    /// The model plus an explicitly requested cutoff, if any.
    fn spec(&self) -> Result<(ModelSpec<f64>, Option<usize>), CliError> {
        let mut pairs = Vec::new();
        let mut n_trunc = self.n_trunc;
        for p in &self.pairs {
            match p.split_once('=') {
                Some(("n_trunc", v)) if n_trunc.is_none() => {
                    n_trunc = Some(v.trim().parse().map_err(|_| CliError::Input(format!("invalid n_trunc `{v}`")))?)
                }
                Some(("n_trunc", _)) => {}
                _ => pairs.push(p.clone()),
            }
        }
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push(format!("{k}={v}"));
            }
        };
        flag("model", self.model.clone());
        flag("xi0", self.xi0.map(fmt_f64));
        flag("v0", self.v0.map(fmt_f64));
        flag("two_j", self.two_j.map(|v| v.to_string()));
        flag("delta", self.delta.map(fmt_f64));
        flag("lambda", self.lambda.map(fmt_f64));
        flag("omega", self.omega.map(fmt_f64));
        flag("branch", self.branch.clone());
        let refs: Vec<&str> = pairs.iter().map(String::as_str).collect();
        let mut spec = parse_model_spec::<f64>(&refs)?;
        if let (ModelSpec::SpinBoson(p), Some(n)) = (&mut spec, n_trunc) {
            *p = p.with_n_trunc(n);
            p.validate()?;
        }
        Ok((spec, n_trunc))
    }
}

#[derive(Args, Debug)]
struct SpectrumCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Levels: `5`, `0,2,7`, `0..10` or `0..=9` [default: 0..10 for spinboson, all for lipkin].
    #[arg(long)]
    levels: Option<String>,
    /// Cutoff doublings allowed during truncation certification.
    #[arg(long, default_value_t = DEFAULT_MAX_DOUBLINGS)]
    max_doublings: u32,
    /// Validity threshold for lambda / (omega sqrt(n)).
    #[arg(long, default_value_t = 0.5)]
    max_cond_f: f64,
    /// Validity threshold for (delta/2 omega) sqrt(lambda/(pi omega)) n^(-3/4).
    #[arg(long, default_value_t = 0.1)]
    max_cond_order: f64,
    /// Report destination [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Args, Debug)]
struct Fig1Cmd {
    #[arg(long, default_value_t = 4.0)]
    lambda_over_omega: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Comma-separated levels.
    #[arg(long, default_value = "10,15,20")]
    n_list: String,
    /// Upper end of the uniform delta/omega grid starting at 0.
    #[arg(long, default_value_t = 5.0)]
    delta_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 26)]
    points: usize,
    /// Explicit comma-separated delta/omega values; replaces the uniform grid.
    #[arg(long)]
    delta_grid: Option<String>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "BANDFLOW_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_DOUBLINGS)]
    max_doublings: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Args, Debug)]
struct CompareCmd {
    /// Tridiagonal matrix file [default: tridiag(d=(1,2,3), e=(1,1))].
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Comma-separated snapshot points in units of 1/||H||_F^2
    /// [default: 0,0.01,0.02,0.05,0.1,0.2,0.5,1,2,5,10,20,50,100].
    #[arg(long)]
    ell_scaled: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Args, Debug)]
struct BuildCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Lipkin parity block, A or B.
    #[arg(long, default_value = "A")]
    block: String,
    /// Matrix destination [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn status(converged: bool) -> i32 {
    if converged {
        EXIT_OK
    } else {
        eprintln!("warning: flow did not converge before ell_max");
        EXIT_NOT_CONVERGED
    }
}

fn cmd_flow(c: FlowCmd) -> Result<i32, CliError> {
    let h = read_matrix(&c.matrix)?;
    let snapshots = match &c.snapshots {
        Some(s) => parse_list(s, "snapshot")?,
        None => Vec::new(),
    };
    let run = run_flow(&h, &c.flow.settings(), snapshots)?;
    emit(&run.trace, c.trace.as_deref())?;
    eprint!("{}", summary(&run.result));
    Ok(status(run.result.converged))
}

fn cmd_spectrum(c: SpectrumCmd) -> Result<i32, CliError> {
    let (spec, n_trunc) = c.model.spec()?;
    let settings = c.flow.settings();
    let report = match spec {
        ModelSpec::Lipkin(p) => {
            let levels = c.levels.as_deref().map(parse_levels).transpose()?;
            lipkin_spectrum(&p, levels.as_deref(), &settings)?
        }
        ModelSpec::SpinBoson(p) => {
            let levels = parse_levels(c.levels.as_deref().unwrap_or("0..10"))?;
            let req = SpinBosonRequest {
                n_trunc,
                max_doublings: c.max_doublings,
                thresholds: ValidityThresholds { cond_f: c.max_cond_f, cond_order: c.max_cond_order },
                ..SpinBosonRequest::new(p, levels)
            };
            spinboson_spectrum(&req, &settings)?
        }
    };
    emit(&report.table(), c.out.as_deref())?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(status(report.converged))
}

fn cmd_fig1(c: Fig1Cmd) -> Result<i32, CliError> {
    let delta_grid = match &c.delta_grid {
        Some(s) => parse_list(s, "grid value")?,
        None => uniform_grid(c.delta_max, c.points),
    };
    let opts = Fig1Options {
        lambda_over_omega: c.lambda_over_omega,
        omega: c.omega,
        n_list: parse_list(&c.n_list, "level")?,
        delta_grid,
        threads: c.threads.filter(|&t| t > 0),
        max_doublings: c.max_doublings,
        settings: c.flow.settings(),
    };
    let result = run_fig1(&opts)?;
    emit(&result.table(), c.out.as_deref())?;
    for &n in &opts.n_list {
        let peak = result.curve(n).iter().map(|r| r.rel_err_asym1).fold(0.0, f64::max);
        eprintln!("n = {n}: max rel_err_asym1 = {peak:.4e}");
    }
    Ok(status(result.converged))
}

fn cmd_compare(c: CompareCmd) -> Result<i32, CliError> {
    let h = match &c.matrix {
        Some(p) => read_matrix(p)?,
        None => default_test_matrix(),
    };
    let scaled = match &c.ell_scaled {
        Some(s) => parse_list(s, "snapshot")?,
        None => DEFAULT_SCALED_ELLS.to_vec(),
    };
    let result = compare_generators(&h, &scaled, &c.flow.settings())?;
    emit(&result.table(), c.out.as_deref())?;
    let join = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
    for run in &result.runs {
        eprintln!("{} final diagonal: {}", run.generator, join(&run.final_diagonal));
    }
    eprintln!("oracle spectrum: {}", join(&result.oracle));
    Ok(status(result.converged()))
}

fn cmd_build(c: BuildCmd) -> Result<i32, CliError> {
    let (spec, _) = c.model.spec()?;
    let h = match spec {
        ModelSpec::Lipkin(p) => {
            let block = match c.block.to_ascii_uppercase().as_str() {
                "A" => LipkinBlock::A,
                "B" => LipkinBlock::B,
                other => return Err(CliError::Input(format!("block must be A or B, got `{other}`"))),
            };
            build_lipkin_block(&p, block)?
        }
        ModelSpec::SpinBoson(p) => build_spinboson(&p)?,
    };
    match c.out.as_deref() {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, h.to_text())?,
        _ => print!("{}", h.to_text()),
    }
    Ok(EXIT_OK)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Flow(c) => cmd_flow(c),
        Command::Spectrum(c) => cmd_spectrum(c),
        Command::Fig1(c) => cmd_fig1(c),
        Command::CompareGenerators(c) => cmd_compare(c),
        Command::Build(c) => cmd_build(c),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    std::process::exit(code);
}
