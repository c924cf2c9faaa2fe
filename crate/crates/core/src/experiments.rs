//! Parameter sweeps over the reactive kernel offset, paired-run stability
//! studies and grid self-convergence.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{functional_j, l1_distance, theorem_constants, PsiAccumulator, TheoremConstants};
use crate::error::{Error, Result};
use crate::kernel::{discretize_reactive, kernel_l1_distance, ConvectiveKernel, ReactiveKernel};
use crate::mesh::{build_grid, Grid};
use crate::model::{Interval, RampConfig, RateFunction, VelocityLaw};
use crate::solver::{BoundaryMode, Scheme, SolverConfig, StateField, Trajectory};

/// Errors below this are treated as exact when computing convergence orders.
pub const EXACT_ERROR: f64 = 1e-13;

/// Initial density profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDatum {
    Constant(f64),
    /// `base + amplitude * exp(-((x - center) / width)^2)`.
    Gaussian {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl InitialDatum {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant(v) => v,
            Self::Gaussian {
                base,
                amplitude,
                center,
                width,
            } => base + amplitude * (-((x - center) / width).powi(2)).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant(v) => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::config("initial.value", format!("must lie in [0, 1], got {v}")));
                }
            }
            Self::Gaussian {
                base,
                amplitude,
                width,
                center,
            } => {
                if !(0.0..=1.0).contains(&base) || !(0.0..=1.0).contains(&(base + amplitude)) {
                    return Err(Error::config(
                        "initial.amplitude",
                        format!("base {base} and peak {} must lie in [0, 1]", base + amplitude),
                    ));
                }
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::config("initial.width", format!("must be > 0, got {width}")));
                }
                if !center.is_finite() {
                    return Err(Error::config("initial.center", "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Smooth bump of unit height supported on `(c - r, c + r)`, with `c` a
/// quarter of the way into the domain and `r` a tenth of its length.
pub fn perturbation_bump(grid: &Grid, x: f64) -> f64 {
    let c = grid.x_min() + 0.25 * grid.length();
    let r = 0.1 * grid.length();
    let s = (x - c) / r;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Everything needed for one simulation plus the functional window.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub law: VelocityLaw,
    pub ramps: RampConfig,
    pub eta: f64,
    pub delta: f64,
    pub initial: InitialDatum,
    /// Amplitude of [`perturbation_bump`] added to the initial datum (then
    /// clamped to `[0, 1]`).
    pub initial_bump: f64,
    pub solver: SolverConfig,
    pub window: (f64, f64),
}

/// Result of [`Scenario::run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub j: f64,
    pub psi: f64,
}

impl Scenario {
    /// The reference setup: `[-1, 4]` with 1000 cells, linear law, a 0.1-long
    /// on-ramp at `[1, 1.1]` with flow 1.2, `eta = 0.5`, `delta = 0.1`,
    /// `rho_0 = 0.3`, `T = 6`.
    pub fn reference() -> Self {
        Self {
            grid: build_grid(-1.0, 4.0, 1000).expect("static grid"),
            law: VelocityLaw::Linear,
            ramps: RampConfig::on_ramp(
                Interval::new(1.0, 1.1).expect("static interval"),
                RateFunction::constant(1.2).expect("static rate"),
            ),
            eta: 0.5,
            delta: 0.1,
            initial: InitialDatum::Constant(0.3),
            initial_bump: 0.0,
            solver: SolverConfig::new(6.0, BoundaryMode::Dirichlet(0.3)),
            window: (-1.0, 4.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        self.ramps.validate(&self.grid)?;
        self.solver.validate()?;
        ConvectiveKernel::new(self.eta)?;
        ReactiveKernel::new(self.eta, self.delta)?;
        let (a, b) = self.window;
        if !(a < b) {
            return Err(Error::config("functional.a", format!("window [{a}, {b}] must have a < b")));
        }
        Ok(())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    pub fn with_cells(&self, n_cells: usize) -> Result<Self> {
        Ok(Self {
            grid: build_grid(self.grid.x_min(), self.grid.x_max(), n_cells)?,
            ..self.clone()
        })
    }

    pub fn convective_kernel(&self) -> Result<ConvectiveKernel> {
        ConvectiveKernel::new(self.eta)
    }

    pub fn reactive_kernel(&self) -> Result<ReactiveKernel> {
        ReactiveKernel::new(self.eta, self.delta)
    }

    pub fn scheme(&self) -> Result<Scheme> {
        Scheme::new(
            self.grid.clone(),
            self.law,
            self.ramps.clone(),
            &self.convective_kernel()?,
            &self.reactive_kernel()?,
            self.solver.clone(),
        )
    }

    pub fn initial_state(&self) -> Result<StateField> {
        let grid = self.grid.clone();
        let datum = self.initial;
        let amp = self.initial_bump;
        StateField::from_fn(self.grid.clone(), move |x| {
            (datum.eval(x) + amp * perturbation_bump(&grid, x)).clamp(0.0, 1.0)
        })
    }

    pub fn constants(&self) -> Result<TheoremConstants> {
        Ok(theorem_constants(
            self.law,
            &self.ramps,
            &self.convective_kernel()?,
            &self.initial_state()?,
            self.solver.t_final,
        ))
    }

    /// Simulates to `t_final`, accumulating `J` and `Psi` over the window.
    pub fn run(&self) -> Result<RunOutcome> {
        self.validate()?;
        let scheme = self.scheme()?;
        let mut psi = PsiAccumulator::new(&self.grid, self.window.0, self.window.1)?;
        let trajectory = scheme.simulate_observed(&self.initial_state()?, &mut psi)?;
        let j = if trajectory.steps.is_empty() {
            0.0
        } else {
            functional_j(&trajectory)?
        };
        Ok(RunOutcome {
            trajectory,
            j,
            psi: psi.value(),
        })
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::config("workers", "must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// Runs `f` over `items` on a bounded pool. Results keep the input order and
/// the first failure in that order is returned.
fn run_all<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    let results: Vec<Result<R>> = pool(workers)?.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Evenly spaced offsets covering `[-eta, eta]`.
pub fn default_deltas(eta: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| eta * (2 * i as isize - (count as isize - 1)) as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: Scenario,
    pub deltas: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.deltas.len() < 2 {
            return Err(Error::config("sweep.deltas", "at least two values are required"));
        }
        for &d in &self.deltas {
            ReactiveKernel::new(self.base.eta, d).map_err(|_| {
                Error::config("sweep.deltas", format!("{d} must lie in [-eta, eta] with eta = {}", self.base.eta))
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub j: f64,
    pub psi: f64,
    pub tv_final: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    /// Sorted by `delta`.
    pub rows: Vec<SweepRow>,
    pub psi_argmin: f64,
    pub j_argmin: f64,
    /// Another offset attains the same minimum of `Psi`.
    pub psi_tie: bool,
    pub j_tie: bool,
}

/// Smallest offset attaining the minimum of `key`, and whether a different
/// offset attains it too.
fn argmin(rows: &[SweepRow], key: impl Fn(&SweepRow) -> f64) -> (f64, bool) {
    let min = rows.iter().map(&key).fold(f64::INFINITY, f64::min);
    let mut hits = rows.iter().filter(|r| key(r) == min).map(|r| r.delta);
    let first = hits.next().unwrap_or(f64::NAN);
    let tie = hits.any(|d| d != first);
    (first, tie)
}

/// One simulation per offset; results are keyed by offset, so the order of
/// `spec.deltas` does not matter.
pub fn delta_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepTable> {
    spec.validate()?;
    let mut rows = run_all(&spec.deltas, workers, |&delta| {
        let start = Instant::now();
        let out = spec
            .base
            .with_delta(delta)
            .run()
            .map_err(|e| e.in_experiment(format!("sweep delta = {delta}")))?;
        Ok(SweepRow {
            delta,
            j: out.j,
            psi: out.psi,
            tv_final: out.trajectory.final_state.total_variation(),
            runtime_s: start.elapsed().as_secs_f64(),
        })
    })?;
    rows.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let (psi_argmin, psi_tie) = argmin(&rows, |r| r.psi);
    let (j_argmin, j_tie) = argmin(&rows, |r| r.j);
    Ok(SweepTable {
        rows,
        psi_argmin,
        j_argmin,
        psi_tie,
        j_tie,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    InitialDatum,
    QOn,
    QOff,
    KernelDelta,
    KernelShape,
}

impl Channel {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "initial_datum" => Self::InitialDatum,
            "q_on" => Self::QOn,
            "q_off" => Self::QOff,
            "kernel_delta" => Self::KernelDelta,
            "kernel_shape" => Self::KernelShape,
            other => {
                return Err(Error::config(
                    "stability.channel",
                    format!(
                        "unknown channel {other:?} (expected initial_datum, q_on, q_off, kernel_delta or kernel_shape)"
                    ),
                ))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::InitialDatum => "initial_datum",
            Self::QOn => "q_on",
            Self::QOff => "q_off",
            Self::KernelDelta => "kernel_delta",
            Self::KernelShape => "kernel_shape",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub channel: Channel,
    /// Strictly increasing, all positive.
    pub epsilons: Vec<f64>,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::config("stability.epsilons", "at least one value is required"));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::config("stability.epsilons", "values must be finite and > 0"));
        }
        if self.epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("stability.epsilons", "values must be strictly increasing"));
        }
        Ok(())
    }
}

/// Distance between a base and a perturbed scenario in the metric matching
/// the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InputDistance {
    /// `|rho_0 - rho~_0|_L1`.
    pub initial: f64,
    /// `|q_on - q~_on|_L1([0, T])` in configured rate units.
    pub q_on: f64,
    pub q_off: f64,
    /// L1 distance of the discrete reactive kernels.
    pub kernel: f64,
}

impl InputDistance {
    pub fn for_channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::InitialDatum => self.initial,
            Channel::QOn => self.q_on,
            Channel::QOff => self.q_off,
            Channel::KernelDelta | Channel::KernelShape => self.kernel,
        }
    }
}

/// Builds the perturbed scenario for one channel. `eps = 0` returns an
/// identical copy.
pub fn perturb(base: &Scenario, channel: Channel, eps: f64) -> Result<Scenario> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::config("stability.epsilons", format!("{eps} must be finite and >= 0")));
    }
    let mut s = base.clone();
    match channel {
        Channel::InitialDatum => s.initial_bump += eps,
        Channel::QOn => {
            if base.ramps.on_interval.is_none() {
                return Err(Error::config("stability.channel", "q_on perturbation needs an on-ramp"));
            }
            s.ramps.q_on = base.ramps.q_on.shifted(eps)?;
        }
        Channel::QOff => {
            if base.ramps.off_interval.is_none() {
                return Err(Error::config("stability.channel", "q_off perturbation needs an off-ramp"));
            }
            s.ramps.q_off = base.ramps.q_off.shifted(eps)?;
        }
        Channel::KernelDelta => s.delta += eps,
        Channel::KernelShape => s.eta -= eps,
    }
    ReactiveKernel::new(s.eta, s.delta).map_err(|_| {
        Error::config(
            "stability.epsilons",
            format!("eps = {eps} moves the reactive kernel outside |delta| <= eta"),
        )
    })?;
    if channel == Channel::KernelShape {
        // only the reactive kernel changes shape; keep the convective one
        ConvectiveKernel::new(s.eta)?;
    }
    Ok(s)
}

pub fn input_distance(base: &Scenario, other: &Scenario) -> Result<InputDistance> {
    let t = base.solver.t_final;
    let dx = base.grid.dx();
    let kb = discretize_reactive(&base.reactive_kernel()?, dx)?;
    let ko = discretize_reactive(&other.reactive_kernel()?, dx)?;
    Ok(InputDistance {
        initial: l1_distance(&base.initial_state()?, &other.initial_state()?)?,
        q_on: base.ramps.q_on.l1_distance(&other.ramps.q_on, t),
        q_off: base.ramps.q_off.l1_distance(&other.ramps.q_off, t),
        kernel: kernel_l1_distance(&kb, &ko)?,
    })
}

/// Solves the perturbed problem. For the shape channel the convective
/// kernel keeps the base width.
fn run_perturbed(base: &Scenario, pert: &Scenario, channel: Channel) -> Result<StateField> {
    if channel != Channel::KernelShape {
        return Ok(pert.run()?.trajectory.final_state);
    }
    let dx = base.grid.dx();
    let scheme = Scheme::from_weights(
        pert.grid.clone(),
        pert.law,
        pert.ramps.clone(),
        crate::kernel::discretize_convective(&base.convective_kernel()?, dx)?,
        discretize_reactive(&pert.reactive_kernel()?, dx)?,
        pert.solver.clone(),
    )?;
    Ok(scheme.simulate(&pert.initial_state()?)?.final_state)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub input_distance: f64,
    pub output_distance: f64,
    pub ratio: f64,
    #[serde(skip)]
    pub inputs: InputDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub channel: Channel,
    pub t_final: f64,
    pub rows: Vec<StabilityRow>,
    /// Least-squares slope of output against input through the origin.
    pub slope: f64,
    /// Uncentred coefficient of determination of that fit,
    /// `1 - sum (y - s x)^2 / sum y^2`, the usual definition for a model
    /// without intercept.
    pub r_squared: f64,
}

impl StabilityReport {
    /// For each pair of rows whose `eps` differ by a factor of two:
    /// `(input growth, output growth, ratio change)`, the last as
    /// `max / min` of the two ratios.
    pub fn doubling_factors(&self) -> Vec<(f64, f64, f64)> {
        self.rows
            .windows(2)
            .filter(|w| (w[1].epsilon / w[0].epsilon - 2.0).abs() < 1e-9)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                (
                    b.input_distance / a.input_distance,
                    b.output_distance / a.output_distance,
                    a.ratio.max(b.ratio) / a.ratio.min(b.ratio),
                )
            })
            .collect()
    }
}

/// Through-origin least squares: `(slope, uncentred R^2)`.
pub fn fit_through_origin(points: &[(f64, f64)]) -> (f64, f64) {
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let syy: f64 = points.iter().map(|(_, y)| y * y).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, r2)
}

/// Paired base/perturbed simulations to the base `t_final`, one pair per
/// `eps`.
pub fn stability_experiment(base: &Scenario, spec: &PerturbationSpec, workers: usize) -> Result<StabilityReport> {
    base.validate()?;
    spec.validate()?;
    let perturbed = spec
        .epsilons
        .iter()
        .map(|&e| perturb(base, spec.channel, e))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs: Vec<Option<&Scenario>> = vec![None];
    jobs.extend(perturbed.iter().map(Some));
    let finals = run_all(&jobs, workers, |job| match job {
        None => Ok(base.run()?.trajectory.final_state),
        Some(p) => run_perturbed(base, p, spec.channel),
    })
    .map_err(|e| e.in_experiment(format!("stability channel {}", spec.channel.name())))?;
    let reference = &finals[0];
    let mut rows = Vec::with_capacity(perturbed.len());
    for ((&epsilon, pert), state) in spec.epsilons.iter().zip(&perturbed).zip(&finals[1..]) {
        let inputs = input_distance(base, pert)?;
        let input = inputs.for_channel(spec.channel);
        if input <= 0.0 {
            return Err(Error::config(
                "stability.epsilons",
                format!("eps = {epsilon} leaves the {} input unchanged", spec.channel.name()),
            ));
        }
        let output = l1_distance(reference, state)?;
        rows.push(StabilityRow {
            epsilon,
            input_distance: input,
            output_distance: output,
            ratio: output / input,
            inputs,
        });
    }
    let points: Vec<_> = rows.iter().map(|r| (r.input_distance, r.output_distance)).collect();
    let (slope, r_squared) = fit_through_origin(&points);
    Ok(StabilityReport {
        channel: spec.channel,
        t_final: base.solver.t_final,
        rows,
        slope,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub epsilon: f64,
    pub output_distance: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Checks every row against
/// `e^{C T} (|d rho_0| + L_on |d q_on| + L_off |d q_off| + r_T |d w|)`,
/// where `L` is the ramp interval length times the rate scale, so that the
/// product is the change of total ramp flow. A sanity envelope, not a proof
/// check: `C` is a user-supplied surrogate.
pub fn lipschitz_envelope_check(
    report: &StabilityReport,
    constants: &TheoremConstants,
    ramps: &RampConfig,
    c_surrogate: f64,
) -> Vec<EnvelopeRow> {
    let l_on = ramps.on_interval.map_or(0.0, |iv| iv.length()) * ramps.on_scale();
    let l_off = ramps.off_interval.map_or(0.0, |iv| iv.length()) * ramps.off_scale();
    let growth = (c_surrogate * report.t_final).exp();
    report
        .rows
        .iter()
        .map(|r| {
            let d = r.inputs;
            let bound = growth * (d.initial + l_on * d.q_on + l_off * d.q_off + constants.r_t * d.kernel);
            EnvelopeRow {
                epsilon: r.epsilon,
                output_distance: r.output_distance,
                bound,
                margin: bound - r.output_distance,
                pass: r.output_distance <= bound,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_cells: usize,
    pub dx: f64,
    pub l1_error: f64,
    /// `None` for the coarsest grid or when either error is at roundoff.
    pub observed_order: Option<f64>,
}

/// Self-convergence against a reference with four times the finest
/// resolution. `n_cells` must be strictly increasing and every grid must
/// nest in the reference.
pub fn convergence_study(base: &Scenario, n_cells: &[usize], workers: usize) -> Result<Vec<ConvergenceRow>> {
    base.validate()?;
    if n_cells.is_empty() {
        return Err(Error::config("convergence.n_cells", "at least one grid is required"));
    }
    if n_cells.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("convergence.n_cells", "cell counts must be strictly increasing"));
    }
    let n_ref = 4 * n_cells[n_cells.len() - 1];
    let scenarios: Vec<Scenario> = n_cells
        .iter()
        .chain(std::iter::once(&n_ref))
        .map(|&n| base.with_cells(n))
        .collect::<Result<_>>()?;
    let reference_grid = &scenarios[scenarios.len() - 1].grid;
    for s in &scenarios {
        if reference_grid.refines(&s.grid).is_none() {
            return Err(Error::GridMismatch(format!(
                "{} cells do not nest in the {n_ref}-cell reference",
                s.grid.n_cells()
            )));
        }
    }
    let finals = run_all(&scenarios, workers, |s| {
        s.run()
            .map(|o| o.trajectory.final_state)
            .map_err(|e| e.in_experiment(format!("convergence n_cells = {}", s.grid.n_cells())))
    })?;
    let reference = &finals[finals.len() - 1];
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(n_cells.len());
    for (s, state) in scenarios.iter().zip(&finals).take(n_cells.len()) {
        let l1_error = l1_distance(state, &reference.restrict_to(&s.grid)?)?;
        let observed_order = rows.last().and_then(|prev| {
            (prev.l1_error > EXACT_ERROR && l1_error > EXACT_ERROR)
                .then(|| (prev.l1_error / l1_error).ln() / (prev.dx / s.grid.dx()).ln())
        });
        rows.push(ConvergenceRow {
            n_cells: s.grid.n_cells(),
            dx: s.grid.dx(),
            l1_error,
            observed_order,
        });
    }
    Ok(rows)
}
