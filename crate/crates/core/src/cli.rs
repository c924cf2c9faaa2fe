//! Command dispatch and output files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::config::{bundled, parse_config, ScenarioConfig, BUNDLED};
use crate::diagnostics::{mass_ledger, TheoremConstants};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, delta_sweep, lipschitz_envelope_check, stability_experiment, SweepSpec,
};
use crate::kernel::KERNEL_L1_CONVENTION;
use crate::output::{ensure_dir, fmt_f64, fmt_opt, join, write_csv, write_text};
use crate::solver::SCHEME_ID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Sweep,
    Stability,
    Convergence,
    Constants,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Sweep => "sweep",
            Self::Stability => "stability",
            Self::Convergence => "convergence",
            Self::Constants => "constants",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    /// Fill the `runtime_s` column of sweep output. Off by default so that
    /// repeated runs write identical files.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            timing: false,
        }
    }
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } | Error::Parse { .. } => "config",
            Error::Domain { .. } => "domain",
            Error::InvariantViolation { .. } => "invariant",
            Error::GridMismatch(_) => "grid",
            Error::Experiment { source, .. } => source.kind(),
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => "io",
        }
    }

    /// One-line JSON object describing the error.
    pub fn to_json_line(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string().replace('\n', " ") }).to_string()
    }
}

fn constants_json(c: &TheoremConstants) -> Value {
    serde_json::to_value(c).expect("constants serialize")
}

fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<(Value, Vec<String>)> {
    let sc = &cfg.scenario;
    let run = sc.run()?;
    let traj = &run.trajectory;
    let c = sc.constants()?;
    let ledger = mass_ledger(traj);

    let snapshots = traj.snapshots.iter().flat_map(|s| {
        let t = fmt_f64(s.time());
        s.grid()
            .centers()
            .zip(s.rho())
            .map(move |(x, r)| vec![t.clone(), fmt_f64(x), fmt_f64(*r)])
            .collect::<Vec<_>>()
    });
    write_csv(&join(out, "snapshots.csv"), &["t", "x_center", "rho"], snapshots)?;

    let diags = traj.steps.iter().map(|d| {
        vec![
            d.step.to_string(),
            fmt_f64(d.t),
            fmt_f64(d.dt),
            fmt_f64(d.tv),
            fmt_f64(d.mass),
            fmt_f64(d.fluxes.flux_in),
            fmt_f64(d.fluxes.flux_out),
            fmt_f64(d.fluxes.onramp_inflow),
            fmt_f64(d.fluxes.offramp_outflow),
        ]
    });
    write_csv(
        &join(out, "diagnostics.csv"),
        &["step", "t", "dt", "tv", "mass", "flux_in", "flux_out", "onramp_inflow", "offramp_outflow"],
        diags,
    )?;

    let tv_final = traj.final_state.total_variation();
    write_csv(
        &join(out, "report.csv"),
        &["run_id", "delta", "eta", "J", "Psi", "TV_final", "mass_residual_max", "H", "Q_T", "L_vel", "r_T"],
        [vec![
            cfg.name.clone(),
            fmt_f64(sc.delta),
            fmt_f64(sc.eta),
            fmt_f64(run.j),
            fmt_f64(run.psi),
            fmt_f64(tv_final),
            fmt_f64(ledger.max_abs_residual),
            fmt_f64(c.h),
            fmt_f64(c.q_t),
            fmt_f64(c.l_vel),
            fmt_f64(c.r_t),
        ]],
    )?;
    let lines = vec![format!(
        "steps={} J={} Psi={} TV_final={} mass_residual_max={}",
        traj.steps.len(),
        fmt_f64(run.j),
        fmt_f64(run.psi),
        fmt_f64(tv_final),
        fmt_f64(ledger.max_abs_residual)
    )];
    let summary = json!({
        "steps": traj.steps.len(),
        "J": run.j,
        "Psi": run.psi,
        "tv_final": tv_final,
        "mass_residual_max": ledger.max_abs_residual,
        "mass_cumulative_drift": ledger.cumulative_drift,
    });
    Ok((summary, lines))
}

fn sweep(cfg: &ScenarioConfig, out: &Path, opts: RunOptions) -> Result<(Value, Vec<String>)> {
    let deltas = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::config("sweep", "section is required by the sweep command"))?;
    let table = delta_sweep(
        &SweepSpec {
            base: cfg.scenario.clone(),
            deltas,
        },
        opts.workers,
    )?;
    let rows = table.rows.iter().map(|r| {
        vec![
            fmt_f64(r.delta),
            fmt_f64(r.j),
            fmt_f64(r.psi),
            fmt_f64(r.tv_final),
            if opts.timing { fmt_f64(r.runtime_s) } else { String::new() },
        ]
    });
    write_csv(&join(out, "sweep.csv"), &["delta", "J", "Psi", "tv_final", "runtime_s"], rows)?;
    let lines = vec![format!(
        "argmin_Psi={}{} argmin_J={}{}",
        fmt_f64(table.psi_argmin),
        if table.psi_tie { " (tie)" } else { "" },
        fmt_f64(table.j_argmin),
        if table.j_tie { " (tie)" } else { "" },
    )];
    let summary = json!({
        "argmin_psi": table.psi_argmin,
        "psi_tie": table.psi_tie,
        "argmin_j": table.j_argmin,
        "j_tie": table.j_tie,
    });
    Ok((summary, lines))
}

fn stability(cfg: &ScenarioConfig, out: &Path, opts: RunOptions) -> Result<(Value, Vec<String>)> {
    let st = cfg
        .stability
        .as_ref()
        .ok_or_else(|| Error::config("stability", "section is required by the stability command"))?;
    let report = stability_experiment(&cfg.scenario, &st.spec, opts.workers)?;
    let c = cfg.scenario.constants()?;
    let envelope = lipschitz_envelope_check(&report, &c, &cfg.scenario.ramps, st.c_surrogate);
    let channel = report.channel.name();
    write_csv(
        &join(out, "stability.csv"),
        &["channel", "epsilon", "input_distance", "output_distance", "ratio"],
        report.rows.iter().map(|r| {
            vec![
                channel.to_string(),
                fmt_f64(r.epsilon),
                fmt_f64(r.input_distance),
                fmt_f64(r.output_distance),
                fmt_f64(r.ratio),
            ]
        }),
    )?;
    write_csv(
        &join(out, "envelope.csv"),
        &["channel", "epsilon", "output_distance", "bound", "margin", "pass"],
        envelope.iter().map(|r| {
            vec![
                channel.to_string(),
                fmt_f64(r.epsilon),
                fmt_f64(r.output_distance),
                fmt_f64(r.bound),
                fmt_f64(r.margin),
                r.pass.to_string(),
            ]
        }),
    )?;
    let all_pass = envelope.iter().all(|r| r.pass);
    let lines = vec![format!(
        "channel={channel} slope={} r_squared={} envelope={}",
        fmt_f64(report.slope),
        fmt_f64(report.r_squared),
        if all_pass { "pass" } else { "fail" }
    )];
    let summary = json!({
        "channel": channel,
        "slope": report.slope,
        "r_squared": report.r_squared,
        "c_surrogate": st.c_surrogate,
        "envelope_pass": all_pass,
        "doubling_factors": report.doubling_factors(),
    });
    Ok((summary, lines))
}

fn convergence(cfg: &ScenarioConfig, out: &Path, opts: RunOptions) -> Result<(Value, Vec<String>)> {
    let n_cells = cfg
        .convergence
        .clone()
        .ok_or_else(|| Error::config("convergence", "section is required by the convergence command"))?;
    let rows = convergence_study(&cfg.scenario, &n_cells, opts.workers)?;
    write_csv(
        &join(out, "convergence.csv"),
        &["dx", "l1_error", "observed_order"],
        rows.iter()
            .map(|r| vec![fmt_f64(r.dx), fmt_f64(r.l1_error), fmt_opt(r.observed_order)]),
    )?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "dx={} l1_error={} order={}",
                fmt_f64(r.dx),
                fmt_f64(r.l1_error),
                r.observed_order.map_or("n/a".to_string(), fmt_f64)
            )
        })
        .collect();
    let summary = json!({ "reference_cells": 4 * n_cells[n_cells.len() - 1], "rows": rows });
    Ok((summary, lines))
}

fn constants(cfg: &ScenarioConfig, out: &Path) -> Result<(Value, Vec<String>)> {
    let c = cfg.scenario.constants()?;
    write_csv(
        &join(out, "constants.csv"),
        &["L_vel", "Q_T", "H", "rho0_l1", "r_T", "T"],
        [vec![
            fmt_f64(c.l_vel),
            fmt_f64(c.q_t),
            fmt_f64(c.h),
            fmt_f64(c.rho0_l1),
            fmt_f64(c.r_t),
            fmt_f64(c.t_final),
        ]],
    )?;
    let lines = vec![format!(
        "L_vel={} Q_T={} H={} r_T={}",
        fmt_f64(c.l_vel),
        fmt_f64(c.q_t),
        fmt_f64(c.h),
        fmt_f64(c.r_t)
    )];
    Ok((json!({}), lines))
}

/// Runs `command`, writing its CSVs plus `config.toml` (the normalized
/// configuration) and `run.json` (metadata) into `out`. Returns summary lines
/// for the terminal.
pub fn run_command(command: Command, cfg: &ScenarioConfig, out: &Path, opts: RunOptions) -> Result<Vec<String>> {
    ensure_dir(out)?;
    let start = Instant::now();
    log::info!("{} {} -> {}", command.name(), cfg.name, out.display());
    let (summary, lines) = match command {
        Command::Simulate => simulate(cfg, out)?,
        Command::Sweep => sweep(cfg, out, opts)?,
        Command::Stability => stability(cfg, out, opts)?,
        Command::Convergence => convergence(cfg, out, opts)?,
        Command::Constants => constants(cfg, out)?,
    };
    let echo = cfg.echo();
    write_text(&join(out, "config.toml"), &echo)?;
    let sc = &cfg.scenario;
    let meta = json!({
        "command": command.name(),
        "name": cfg.name,
        "version": env!("CARGO_PKG_VERSION"),
        "scheme": SCHEME_ID,
        "boundaries": {
            "left": sc.solver.left_boundary.describe(),
            "right": sc.solver.right_boundary.describe(),
        },
        "kernel_l1_convention": KERNEL_L1_CONVENTION,
        "workers": opts.workers,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "constants": constants_json(&sc.constants()?),
        "config": echo,
        "summary": summary,
    });
    write_text(&join(out, "run.json"), &format!("{}\n", serde_json::to_string_pretty(&meta)?))?;
    Ok(lines)
}

/// Nonlocal traffic flow simulator with on- and off-ramps.
#[derive(Debug, Parser)]
#[command(name = "rampflow", version)]
pub struct Args {
    pub command: Command,
    /// Name of a bundled scenario (e.g. `reference`).
    pub scenario: Option<String>,
    /// Scenario file (TOML); used instead of a bundled scenario.
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "rampflow-out")]
    pub out: PathBuf,
    /// Worker threads for sweeps, stability and convergence runs.
    #[arg(long, env = "RAMPFLOW_WORKERS", default_value_t = 1)]
    pub workers: usize,
    /// Record per-run wall time in sweep.csv (makes the file non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

pub fn load(args: &Args) -> Result<ScenarioConfig> {
    match (&args.config, &args.scenario) {
        (Some(path), _) => parse_config(path),
        (None, Some(name)) => bundled(name).unwrap_or_else(|| {
            let known: Vec<_> = BUNDLED.iter().map(|(n, _)| *n).collect();
            Err(Error::Parse {
                path: name.clone(),
                message: format!("no bundled scenario of that name (available: {})", known.join(", ")),
            })
        }),
        (None, None) => Err(Error::Parse {
            path: "<none>".into(),
            message: "give a bundled scenario name or --config <path>".into(),
        }),
    }
}

/// What the process should print and return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutcome {
    pub code: u8,
    pub stdout: Vec<String>,
    /// Single-line JSON error, if any.
    pub stderr: Option<String>,
}

/// Exit code 0 on success, 2 for configuration errors, 1 otherwise.
pub fn execute(args: &Args) -> CliOutcome {
    let opts = RunOptions {
        workers: args.workers,
        timing: args.timing,
    };
    match load(args).and_then(|cfg| run_command(args.command, &cfg, &args.out, opts)) {
        Ok(stdout) => CliOutcome {
            code: 0,
            stdout,
            stderr: None,
        },
        Err(e) => CliOutcome {
            code: if e.kind() == "config" { 2 } else { 1 },
            stdout: Vec::new(),
            stderr: Some(e.to_json_line()),
        },
    }
}
