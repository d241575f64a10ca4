mod figures;
mod grid;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use sqg_core::engine::{diagnostics, evolve, evolve_vacuum, EvolveOptions, GateReport, SpinMotionState};
use sqg_core::modes::{build_com_table, ModeTable};
use sqg_core::optimize::{
    gate_time_for_phase, general_search, optimal_split, polygon_compare, ProtocolParams, DEFAULT_RESTARTS,
};
use sqg_core::oracle::{cross_check, cross_check_state, suite_member, DeviationReport, RandomScheduleSpec, Tolerances};
use sqg_core::schedule::{build_square, Schedule};
use sqg_core::Complex64;

use figures::FigureParams;
use grid::{fmt, product, Grid};

const DEFAULT_SEED: u64 = 20190101;

#[derive(Parser, Debug)]
#[command(name = "sqg", version, about = "Stroboscopic squeezing-gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve a schedule and print its gate report.
    Run(RunArgs),
    /// Reproduce a figure dataset as CSV.
    Figure(FigureArgs),
    /// Optimal polygon split over a parameter grid.
    Sweep(SweepArgs),
    /// Run one of the optimizers.
    Optimize {
        #[command(subcommand)]
        what: OptimizeCommand,
    },
    /// Cross-check the engine against the Fock-space oracle.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Mode table JSON; defaults to a single COM mode at `--omega`.
    #[arg(long)]
    modes: Option<PathBuf>,
    /// COM frequency (rad/s) used when no mode table is given.
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI * 1e6)]
    omega: f64,
    /// Comma-separated per-mode frequency offsets (rad/s).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    offsets: Vec<f64>,
    /// Drop the counter-rotating SDF term.
    #[arg(long)]
    rwa: bool,
    /// Lamb-Dicke parameter.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Spin second moment ⟨S_z²⟩; defaults to N²/4.
    #[arg(long)]
    sz2: Option<f64>,
}

#[derive(Args, Debug)]
struct FigureArgs {
    /// enhancement, gate-time, spectator or mode-noise.
    name: String,
    #[arg(long)]
    grid: Option<String>,
    /// Monte Carlo trials per row (mode-noise).
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Constant of the stroboscopic error law (mode-noise).
    #[arg(long, default_value_t = sqg_core::noise::DEFAULT_C)]
    c: f64,
    /// Enhancement G held fixed when sweeping Δ/g (mode-noise).
    #[arg(long, default_value_t = 10.0)]
    enhancement: f64,
    /// Δ/g held fixed when sweeping G (mode-noise).
    #[arg(long, default_value_t = 1e-5)]
    delta_over_g: f64,
    /// SDF rate (rad/s) for the gate-time figure.
    #[arg(long, default_value_t = 1e4)]
    f: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Axes over n, f, g or T; repeat for a product grid.
    #[arg(long, required = true)]
    grid: Vec<String>,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    #[arg(long = "T", default_value_t = 20.0)]
    t: f64,
}

#[derive(Subcommand, Debug)]
enum OptimizeCommand {
    /// Optimal SDF/PA split of a regular polygon.
    Split {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        f: f64,
        #[arg(long)]
        g: f64,
        #[arg(long = "T")]
        t: f64,
    },
    /// Optimal split for several polygon orders.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "3,4,5,6")]
        n: Vec<usize>,
        #[arg(long)]
        f: f64,
        #[arg(long)]
        g: f64,
        #[arg(long = "T")]
        t: f64,
    },
    /// Square gate time reaching a target phase coefficient.
    GateTime {
        #[arg(long)]
        f: f64,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        phi: f64,
        #[arg(long, default_value_t = 1)]
        ions: usize,
    },
    /// Constrained search over general squeeze/displace words.
    General {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        f: f64,
        #[arg(long)]
        g: f64,
        /// SDF time budget.
        #[arg(long)]
        t1: f64,
        /// PA time budget.
        #[arg(long)]
        t2: f64,
        #[arg(long, default_value_t = 400)]
        iterations: usize,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Number of random schedules; 0 runs the fixed minimal suite.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Adds this amount to every engine amplitude before the comparison.
    #[arg(long, hide = true, allow_hyphen_values = true)]
    inject_perturbation: Option<f64>,
}

#[derive(Debug)]
struct VerifyFailed;

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "engine and oracle disagree beyond tolerance")
    }
}

impl std::error::Error for VerifyFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<VerifyFailed>().is_some() {
        return 3;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<sqg_core::Error>() {
            return match e {
                sqg_core::Error::NumericalFailure(_) | sqg_core::Error::TruncationFailure { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Converts a numeric CSV table into a JSON array of row objects.
fn csv_to_json(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<serde_json::Value> = lines
        .map(|l| {
            let obj = header
                .iter()
                .zip(l.split(','))
                .map(|(k, v)| {
                    let val = v
                        .parse::<f64>()
                        .ok()
                        .and_then(serde_json::Number::from_f64)
                        .map(serde_json::Value::Number)
                        .unwrap_or_else(|| serde_json::Value::String(v.to_string()));
                    (k.to_string(), val)
                })
                .collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
    s.push('\n');
    s
}

fn tabular(text: String, format: Option<Format>) -> String {
    match format {
        Some(Format::Json) => csv_to_json(&text),
        _ => text,
    }
}

fn report_csv(r: &GateReport) -> String {
    let g = r.g.map(fmt).unwrap_or_default();
    format!(
        "residual_worst,phase_coefficient,G,epsilon_mf,lamb_dicke_bound_ok,lamb_dicke_bound,r_max,excursion_max,final_squeeze,gate_time\n{},{},{},{},{},{},{},{},{},{}\n",
        fmt(r.residual_worst),
        fmt(r.phase_coefficient),
        g,
        fmt(r.epsilon_mf),
        r.lamb_dicke_bound_ok,
        fmt(r.lamb_dicke_bound),
        fmt(r.r_max),
        fmt(r.excursion_max),
        fmt(r.final_squeeze),
        fmt(r.gate_time)
    )
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<()> {
    let schedule = Schedule::from_json(&read(&a.schedule)?)?;
    let modes = match &a.modes {
        Some(p) => ModeTable::from_json(&read(p)?)?,
        None => build_com_table(schedule.n_ions, a.omega)?,
    };
    let offsets = if a.offsets.is_empty() {
        vec![0.0; modes.mode_count()]
    } else {
        a.offsets.clone()
    };
    let opts = EvolveOptions { rwa: a.rwa };
    let init = SpinMotionState::vacuum(modes.n_ions, modes.mode_count());
    let state = evolve(&init, &schedule, &modes, &offsets, &opts)?;
    let n = modes.n_ions as f64;
    let sz2 = a.sz2.unwrap_or(n * n / 4.0);
    let report = diagnostics(&state, &schedule, &modes, a.eta, sz2)?;
    if !report.lamb_dicke_bound_ok {
        eprintln!(
            "warning: Lamb-Dicke bound violated: e^r_max = {:.6e} is not below {:.6e} (eta = {}, <Sz^2> = {})",
            report.r_max.exp(),
            report.lamb_dicke_bound,
            a.eta,
            sz2
        );
    }
    let text = match cli.format {
        Some(Format::Csv) => report_csv(&report),
        _ => report.to_json() + "\n",
    };
    emit(&cli.out, &text)
}

fn cmd_figure(cli: &Cli, a: &FigureArgs) -> Result<()> {
    let p = FigureParams {
        grid: a.grid.as_deref().map(Grid::parse).transpose()?,
        seed: cli.seed,
        trials: a.trials,
        c: a.c,
        enhancement: a.enhancement,
        delta_over_g: a.delta_over_g,
        force: a.f,
    };
    emit(&cli.out, &tabular(figures::render(&a.name, &p)?, cli.format))
}

fn protocol_table(rows: &[ProtocolParams]) -> String {
    let mut s = format!("{}\n", ProtocolParams::csv_header());
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let grids = a.grid.iter().map(|g| Grid::parse(g)).collect::<Result<Vec<_>>>()?;
    for g in &grids {
        if !["n", "f", "g", "T"].contains(&g.key.as_str()) {
            bail!("sweep grid key `{}` must be one of n, f, g, T", g.key);
        }
    }
    let points = product(&grids);
    let rows = points
        .par_iter()
        .map(|pt| {
            let (mut n, mut f, mut g, mut t) = (a.n, a.f, a.g, a.t);
            for (k, v) in pt {
                match k.as_str() {
                    "n" => n = v.round() as usize,
                    "f" => f = *v,
                    "g" => g = *v,
                    _ => t = *v,
                }
            }
            Ok(optimal_split(f, g, t, n)?)
        })
        .collect::<Result<Vec<_>>>()?;
    emit(&cli.out, &tabular(protocol_table(&rows), cli.format))
}

fn cmd_optimize(cli: &Cli, what: &OptimizeCommand) -> Result<()> {
    let text = match *what {
        OptimizeCommand::Split { n, f, g, t } => {
            let p = optimal_split(f, g, t, n)?;
            match cli.format {
                Some(Format::Csv) => protocol_table(&[p]),
                _ => json(&p),
            }
        }
        OptimizeCommand::Compare { ref n, f, g, t } => {
            let rows = polygon_compare(n, f, g, t)?;
            match cli.format {
                Some(Format::Csv) => protocol_table(&rows),
                _ => json(&rows),
            }
        }
        OptimizeCommand::GateTime { f, g, phi, ions } => {
            let t = gate_time_for_phase(f, g, phi, ions)?;
            match cli.format {
                Some(Format::Csv) => format!("f,g,Phi,N,T\n{},{},{},{},{}\n", fmt(f), fmt(g), fmt(phi), ions, fmt(t)),
                _ => json(&serde_json::json!({"f": f, "g": g, "Phi": phi, "N": ions, "T": t})),
            }
        }
        OptimizeCommand::General { n, f, g, t1, t2, iterations, restarts } => {
            let p = general_search(n, f, g, t1, t2, iterations, restarts, cli.seed)?;
            match cli.format {
                Some(Format::Csv) => {
                    let mut s = String::from("k,alpha_re,alpha_im,side_re,side_im,gain\n");
                    for k in 0..p.alphas.len() {
                        s.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            k,
                            fmt(p.alphas[k].re),
                            fmt(p.alphas[k].im),
                            fmt(p.sides[k].re),
                            fmt(p.sides[k].im),
                            fmt(p.gains[k])
                        ));
                    }
                    s
                }
                _ => json(&p),
            }
        }
    };
    emit(&cli.out, &text)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

fn minimal_suite() -> Vec<(Schedule, ModeTable)> {
    let one = build_com_table(1, 1.0).expect("table");
    let two = build_com_table(2, 1.0).expect("table");
    vec![
        (build_square(0.4, 0.0, 1.0, 0.0, 0.0), one),
        (build_square(0.3, 1.0, 1.0, 0.4, 0.3).with_ions(2), two),
    ]
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<()> {
    let tol = Tolerances {
        phase: a.tolerance,
        fidelity: a.tolerance,
    };
    let spec = RandomScheduleSpec::default();
    let cases: Vec<(Schedule, ModeTable)> = if a.budget == 0 {
        minimal_suite()
    } else {
        (0..a.budget).map(|k| suite_member(cli.seed, k, &spec)).collect()
    };
    let reports = cases
        .par_iter()
        .map(|(s, m)| match a.inject_perturbation {
            None => cross_check(s, m, &tol),
            Some(eps) => {
                let mut st = evolve_vacuum(s, m, &EvolveOptions::rwa())?;
                for row in st.a.iter_mut() {
                    for x in row.iter_mut() {
                        *x += Complex64::new(eps, 0.0);
                    }
                }
                cross_check_state(s, m, &st, &tol)
            }
        })
        .collect::<Vec<_>>();
    let mut total = DeviationReport::empty();
    for r in reports {
        total.merge(&r?);
    }
    let text = match cli.format {
        Some(Format::Csv) => format!(
            "schedules,branches,max_phase_deviation,max_fidelity_deficit,frame_phase_deviation,max_cutoff,max_leaked_norm,pass\n{},{},{},{},{},{},{},{}\n",
            cases.len(),
            total.branches,
            fmt(total.max_phase_deviation),
            fmt(total.max_fidelity_deficit),
            fmt(total.frame_phase_deviation),
            total.max_cutoff,
            fmt(total.max_leaked_norm),
            total.pass
        ),
        _ => total.to_json() + "\n",
    };
    emit(&cli.out, &text)?;
    if total.pass {
        Ok(())
    } else {
        Err(VerifyFailed.into())
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SQG_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("SQG_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("SQG_THREADS must be a positive integer, got `{v}`");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Run(a) => cmd_run(cli, a),
        Command::Figure(a) => cmd_figure(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Optimize { what } => cmd_optimize(cli, what),
        Command::Verify(a) => cmd_verify(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
