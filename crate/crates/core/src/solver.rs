//! Explicit upwind finite-volume scheme for the nonlocal balance law
//!
//! ```text
//! rho_t + (rho v(rho * w_eta))_x = S_on(rho, rho * w_{eta,delta}) - S_off(rho)
//! ```
//!
//! Interface `j + 1/2` carries the flux `rho_j V_{j+1/2}`, where the speed is
//! `v` evaluated on the convective window that starts at the interface and
//! looks downstream (cells `j + 1, j + 2, ...`). Sources are added explicitly
//! in the same step.

use crate::error::{Error, Result};
use crate::kernel::{
    discretize_convective, discretize_reactive, ConvectiveKernel, DiscreteKernelWeights,
    ReactiveKernel,
};
use crate::mesh::Grid;
use crate::model::{
    discretize_indicator, off_ramp_source, on_ramp_source, IndicatorField, RampConfig,
    VelocityLaw, DENSITY_ROUNDOFF,
};

/// Identifier written to run metadata.
pub const SCHEME_ID: &str = "upwind-nonlocal-v1: first-order upwind flux rho_j*v(conv_{j+1/2}), \
downstream convective window anchored at the interface, reactive window anchored at the cell's \
left edge, explicit Euler sources";

/// Guards the rate term of the step restriction against division by zero.
const RATE_FLOOR: f64 = 1e-300;

/// Treatment of the region outside the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMode {
    /// Fixed ghost density.
    Dirichlet(f64),
    /// Ghost cells copy the nearest interior cell.
    Extrapolate,
    /// Zero flux through the boundary; kernel windows copy the edge cell.
    Wall,
}

impl BoundaryMode {
    pub fn describe(&self) -> String {
        match self {
            Self::Dirichlet(v) => format!("dirichlet({v})"),
            Self::Extrapolate => "extrapolate".to_string(),
            Self::Wall => "wall".to_string(),
        }
    }

    fn ghost(&self, edge: f64) -> f64 {
        match self {
            Self::Dirichlet(v) => *v,
            Self::Extrapolate | Self::Wall => edge,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if let Self::Dirichlet(v) = self {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::config(field, format!("dirichlet value must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_final: f64,
    pub left_boundary: BoundaryMode,
    pub right_boundary: BoundaryMode,
    /// Record a snapshot every this many accepted steps.
    pub snapshot_stride: usize,
}

pub const DEFAULT_CFL: f64 = 0.9;

impl SolverConfig {
    pub fn new(t_final: f64, left_boundary: BoundaryMode) -> Self {
        Self {
            cfl: DEFAULT_CFL,
            t_final,
            left_boundary,
            right_boundary: BoundaryMode::Extrapolate,
            snapshot_stride: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("solver.cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::config("solver.t_final", format!("must be >= 0, got {}", self.t_final)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::config("solver.snapshot_stride", "must be >= 1"));
        }
        self.left_boundary.validate("solver.left_boundary")?;
        self.right_boundary.validate("solver.right_boundary")
    }
}

/// Cell averages at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    grid: Grid,
    rho: Vec<f64>,
    time: f64,
}

impl StateField {
    /// Validates that every density lies in `[0, 1]`.
    pub fn new(grid: Grid, rho: Vec<f64>, time: f64) -> Result<Self> {
        if rho.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                rho.len(),
                grid.n_cells()
            )));
        }
        if let Some((j, v)) = rho.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain {
                value: *v,
                context: format!("initial cell {j}"),
            });
        }
        Ok(Self { grid, rho, time })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        let n = grid.n_cells();
        Self::new(grid, vec![value; n], 0.0)
    }

    /// Cell averages of `f` by three-point Gauss-Legendre quadrature.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let half = 0.5 * grid.dx();
        let rho = grid
            .centers()
            .map(|c| {
                nodes
                    .iter()
                    .zip(weights)
                    .map(|(s, w)| w * f(c + s * half))
                    .sum()
            })
            .collect();
        Self::new(grid, rho, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `dx * sum rho`.
    pub fn mass(&self) -> f64 {
        self.grid.dx() * self.rho.iter().sum::<f64>()
    }

    /// Sum of jumps between neighbouring cells.
    pub fn total_variation(&self) -> f64 {
        self.rho.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Cell averages on `coarse`, which must be nested in this grid.
    pub fn restrict_to(&self, coarse: &Grid) -> Result<StateField> {
        let ratio = self.grid.refines(coarse).ok_or_else(|| {
            Error::GridMismatch(format!(
                "{} cells is not a refinement of {} cells on the same interval",
                self.grid.n_cells(),
                coarse.n_cells()
            ))
        })?;
        let rho = self
            .rho
            .chunks_exact(ratio)
            .map(|c| c.iter().sum::<f64>() / ratio as f64)
            .collect();
        Ok(StateField {
            grid: coarse.clone(),
            rho,
            time: self.time,
        })
    }
}

/// Amounts exchanged during one step, already multiplied by `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepFluxes {
    pub flux_in: f64,
    pub flux_out: f64,
    pub onramp_inflow: f64,
    pub offramp_outflow: f64,
}

/// Per-step record; `tv` and `mass` describe the state at the start of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub tv: f64,
    pub mass: f64,
    pub fluxes: StepFluxes,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<StateField>,
    pub steps: Vec<StepDiagnostics>,
    pub final_state: StateField,
    /// Stride used when recording snapshots.
    pub snapshot_stride: usize,
}

impl Trajectory {
    pub fn initial_state(&self) -> &StateField {
        &self.snapshots[0]
    }

    /// Whether a snapshot exists for the start of every step.
    pub fn has_every_step(&self) -> bool {
        self.snapshot_stride == 1
    }
}

/// Receives the state at the start of every step together with its `dt`.
pub trait StepObserver {
    fn observe(&mut self, state: &StateField, dt: f64);
}

impl StepObserver for () {
    fn observe(&mut self, _: &StateField, _: f64) {}
}

/// Density at cell index `i`, extended beyond the grid by the boundary modes.
fn extended(rho: &[f64], i: isize, left: BoundaryMode, right: BoundaryMode) -> f64 {
    if i < 0 {
        left.ghost(rho[0])
    } else if i as usize >= rho.len() {
        right.ghost(rho[rho.len() - 1])
    } else {
        rho[i as usize]
    }
}

/// `sum_k gamma_k rho_{j+k}` with ghost values outside the grid.
pub fn nonlocal_sample(
    state: &StateField,
    weights: &DiscreteKernelWeights,
    j: usize,
    left: BoundaryMode,
    right: BoundaryMode,
) -> Result<f64> {
    if j > state.rho.len() {
        return Err(Error::GridMismatch(format!(
            "anchor cell {j} outside 0..={}",
            state.rho.len()
        )));
    }
    let base = j as isize + weights.offset_lo();
    let s = weights
        .weights()
        .iter()
        .enumerate()
        .map(|(i, g)| g * extended(&state.rho, base + i as isize, left, right))
        .sum::<f64>();
    Ok(s.clamp(0.0, 1.0))
}

/// Dot product with four independent accumulators in a fixed order.
#[inline]
fn dot(w: &[f64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let wc = w.chunks_exact(4);
    let xc = x[..w.len()].chunks_exact(4);
    let (wr, xr) = (wc.remainder(), xc.remainder());
    for (a, b) in wc.zip(xc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let tail: f64 = wr.iter().zip(xr).map(|(a, b)| a * b).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Everything the time loop needs, discretized once.
#[derive(Debug, Clone)]
pub struct Scheme {
    grid: Grid,
    law: VelocityLaw,
    ramps: RampConfig,
    conv: DiscreteKernelWeights,
    react: DiscreteKernelWeights,
    on: IndicatorField,
    off: IndicatorField,
    config: SolverConfig,
    on_cells: Vec<usize>,
    off_cells: Vec<usize>,
}

impl Scheme {
    pub fn new(
        grid: Grid,
        law: VelocityLaw,
        ramps: RampConfig,
        conv_kernel: &ConvectiveKernel,
        react_kernel: &ReactiveKernel,
        config: SolverConfig,
    ) -> Result<Self> {
        let conv = discretize_convective(conv_kernel, grid.dx())?;
        let react = discretize_reactive(react_kernel, grid.dx())?;
        Self::from_weights(grid, law, ramps, conv, react, config)
    }

    pub fn from_weights(
        grid: Grid,
        law: VelocityLaw,
        ramps: RampConfig,
        conv: DiscreteKernelWeights,
        react: DiscreteKernelWeights,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        ramps.validate(&grid)?;
        if conv.dx() != grid.dx() || react.dx() != grid.dx() {
            return Err(Error::GridMismatch("kernel weights built for another dx".into()));
        }
        let indicator = |iv: Option<_>| match iv {
            Some(iv) => discretize_indicator(iv, &grid),
            None => Ok(IndicatorField::empty(grid.n_cells())),
        };
        let on = indicator(ramps.on_interval)?;
        let off = indicator(ramps.off_interval)?;
        let on_cells = on.support().collect();
        let off_cells = off.support().collect();
        Ok(Self {
            grid,
            law,
            ramps,
            conv,
            react,
            on,
            off,
            config,
            on_cells,
            off_cells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn law(&self) -> VelocityLaw {
        self.law
    }

    pub fn ramps(&self) -> &RampConfig {
        &self.ramps
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn convective_weights(&self) -> &DiscreteKernelWeights {
        &self.conv
    }

    pub fn reactive_weights(&self) -> &DiscreteKernelWeights {
        &self.react
    }

    pub fn on_indicator(&self) -> &IndicatorField {
        &self.on
    }

    /// `cfl * min(dx / V_max, 1 / (|q_on|_inf + |q_off|_inf))`, clipped to
    /// the remaining horizon.
    pub fn compute_dt(&self, state: &StateField) -> f64 {
        let remaining = self.config.t_final - state.time;
        let v_max = self.law.sup_norm();
        let q_sum = self.ramps.on_sup(self.config.t_final) + self.ramps.off_sup(self.config.t_final);
        if v_max == 0.0 && q_sum == 0.0 {
            return remaining;
        }
        let dt = self.config.cfl * (self.grid.dx() / v_max).min(1.0 / (q_sum + RATE_FLOOR));
        if dt >= remaining * (1.0 - 1e-12) {
            remaining
        } else {
            dt
        }
    }

    /// One forward-Euler step of size `dt`.
    pub fn step(&self, state: &StateField, dt: f64) -> Result<(StateField, StepFluxes)> {
        self.advance(state, dt, 0)
    }

    fn advance(&self, state: &StateField, dt: f64, step: usize) -> Result<(StateField, StepFluxes)> {
        if !state.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch("state grid differs from scheme grid".into()));
        }
        let n = self.grid.n_cells();
        let dx = self.grid.dx();
        let rho = &state.rho;
        let (left, right) = (self.config.left_boundary, self.config.right_boundary);

        // Padded copy so every kernel window is a contiguous slice.
        let pad_l = (-self.react.offset_lo()).max(0) as usize;
        let pad_r = (self.conv.offset_hi() + 1).max(self.react.offset_hi() + 1).max(0) as usize;
        let mut ext = Vec::with_capacity(pad_l + n + pad_r);
        ext.extend(std::iter::repeat_n(left.ghost(rho[0]), pad_l));
        ext.extend_from_slice(rho);
        ext.extend(std::iter::repeat_n(right.ghost(rho[n - 1]), pad_r));

        // flux[i] lives on the interface between cells i - 1 and i.
        let cw = self.conv.weights();
        let c0 = pad_l as isize + self.conv.offset_lo();
        let mut flux = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let start = (c0 + i as isize) as usize;
            let speed = self.law.eval(dot(cw, &ext[start..]).clamp(0.0, 1.0));
            let upstream = match i {
                0 => match left {
                    BoundaryMode::Wall => 0.0,
                    mode => mode.ghost(rho[0]),
                },
                i if i == n && right == BoundaryMode::Wall => 0.0,
                i => rho[i - 1],
            };
            flux.push(upstream * speed);
        }

        let lambda = dt / dx;
        let mut next: Vec<f64> = (0..n).map(|j| rho[j] - lambda * (flux[j + 1] - flux[j])).collect();

        let mut on_total = 0.0;
        let q_on = self.ramps.on_rate(state.time);
        if q_on > 0.0 {
            let rw = self.react.weights();
            let r0 = pad_l as isize + self.react.offset_lo();
            for &j in &self.on_cells {
                let start = (r0 + j as isize) as usize;
                let r_on = dot(rw, &ext[start..]).clamp(0.0, 1.0);
                let s = on_ramp_source(q_on, self.on.coverage()[j], rho[j], r_on);
                next[j] += dt * s;
                on_total += s;
            }
        }
        let mut off_total = 0.0;
        let q_off = self.ramps.off_rate(state.time);
        if q_off > 0.0 {
            for &j in &self.off_cells {
                let s = off_ramp_source(q_off, self.off.coverage()[j], rho[j]);
                next[j] -= dt * s;
                off_total += s;
            }
        }

        for (j, v) in next.iter_mut().enumerate() {
            if !(*v >= -DENSITY_ROUNDOFF && *v <= 1.0 + DENSITY_ROUNDOFF) {
                return Err(Error::InvariantViolation {
                    step,
                    time: state.time,
                    cell: j,
                    value: *v,
                });
            }
            *v = v.clamp(0.0, 1.0);
        }

        let fluxes = StepFluxes {
            flux_in: dt * flux[0],
            flux_out: dt * flux[n],
            onramp_inflow: dt * dx * on_total,
            offramp_outflow: dt * dx * off_total,
        };
        let next = StateField {
            grid: self.grid.clone(),
            rho: next,
            time: state.time + dt,
        };
        Ok((next, fluxes))
    }

    pub fn simulate(&self, initial: &StateField) -> Result<Trajectory> {
        self.simulate_observed(initial, &mut ())
    }

    /// Steps from `initial` to `t_final`, calling `observer` before each step.
    pub fn simulate_observed(
        &self,
        initial: &StateField,
        observer: &mut impl StepObserver,
    ) -> Result<Trajectory> {
        if !initial.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch("initial state grid differs from scheme grid".into()));
        }
        let t_final = self.config.t_final;
        let stride = self.config.snapshot_stride;
        let mut snapshots = vec![initial.clone()];
        let mut steps = Vec::new();
        let mut state = initial.clone();
        while state.time < t_final {
            let dt = self.compute_dt(&state);
            observer.observe(&state, dt);
            let n = steps.len();
            let (mut next, fluxes) = self.advance(&state, dt, n)?;
            if dt == t_final - state.time {
                next.time = t_final;
            }
            steps.push(StepDiagnostics {
                step: n,
                t: state.time,
                dt,
                tv: state.total_variation(),
                mass: state.mass(),
                fluxes,
            });
            if (n + 1) % stride == 0 {
                snapshots.push(next.clone());
            }
            state = next;
        }
        if snapshots.last().map(|s| s.time) != Some(state.time) {
            snapshots.push(state.clone());
        }
        Ok(Trajectory {
            snapshots,
            steps,
            final_state: state,
            snapshot_stride: stride,
        })
    }
}
