//! Norms, congestion functionals, the discrete mass ledger and the a-priori
//! constants of the well-posedness estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ConvectiveKernel;
use crate::mesh::Grid;
use crate::model::{admissible_density, discretize_indicator, Interval, RampConfig, VelocityLaw};
use crate::solver::{StateField, StepObserver, Trajectory};

/// Sum of neighbour jumps.
pub fn total_variation(state: &StateField) -> f64 {
    state.total_variation()
}

/// `dx * sum |a_j - b_j|`.
pub fn l1_distance(a: &StateField, b: &StateField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(format!(
            "l1 distance between {} and {} cells",
            a.grid().n_cells(),
            b.grid().n_cells()
        )));
    }
    Ok(a.grid().dx() * a.rho().iter().zip(b.rho()).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Time integral of the total variation, left-endpoint rule over steps.
pub fn functional_j(traj: &Trajectory) -> Result<f64> {
    if traj.steps.is_empty() {
        return Err(Error::config("trajectory", "no steps recorded"));
    }
    Ok(traj.steps.iter().map(|d| d.dt * d.tv).sum())
}

/// Congestion weight: 0 below 0.75, linear ramp up to 1 at 0.85.
pub fn phi(r: f64) -> Result<f64> {
    Ok(phi_unchecked(admissible_density(r, "phi argument")?))
}

#[inline]
fn phi_unchecked(r: f64) -> f64 {
    if r < 0.75 {
        0.0
    } else if r <= 0.85 {
        10.0 * r - 7.5
    } else {
        1.0
    }
}

/// Accumulates `sum_n dt_n dx sum_j chi_j phi(rho_j^n)` over a window while
/// a simulation runs.
#[derive(Debug, Clone)]
pub struct PsiAccumulator {
    coverage: Vec<(usize, f64)>,
    dx: f64,
    total: f64,
}

impl PsiAccumulator {
    pub fn new(grid: &Grid, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::config("functional.a", format!("window needs a < b, got [{a}, {b}]")));
        }
        let ind = discretize_indicator(Interval::new(a, b)?, grid)?;
        let coverage = ind.support().map(|j| (j, ind.coverage()[j])).collect();
        Ok(Self {
            coverage,
            dx: grid.dx(),
            total: 0.0,
        })
    }

    /// `dx sum_j chi_j phi(rho_j)` for one state.
    pub fn rate(&self, state: &StateField) -> f64 {
        let rho = state.rho();
        self.dx
            * self
                .coverage
                .iter()
                .map(|&(j, c)| c * phi_unchecked(rho[j]))
                .sum::<f64>()
    }

    pub fn value(&self) -> f64 {
        self.total
    }
}

impl StepObserver for PsiAccumulator {
    fn observe(&mut self, state: &StateField, dt: f64) {
        self.total += dt * self.rate(state);
    }
}

/// Congestion functional over `[a, b]` from a trajectory that kept a snapshot
/// at every step (stride 1). Use [`PsiAccumulator`] while simulating otherwise.
pub fn functional_psi(traj: &Trajectory, a: f64, b: f64) -> Result<f64> {
    let acc = PsiAccumulator::new(traj.final_state.grid(), a, b)?;
    if !traj.has_every_step() {
        return Err(Error::config(
            "solver.snapshot_stride",
            "functional_psi needs a snapshot at every step (stride 1)",
        ));
    }
    Ok(traj
        .steps
        .iter()
        .zip(&traj.snapshots)
        .map(|(d, s)| d.dt * acc.rate(s))
        .sum())
}

/// Constants of the a-priori bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremConstants {
    /// `|v|_inf + |v'|_inf` on `[0, 1]`.
    pub l_vel: f64,
    /// `2 (|q_on|_inf + |q_off|_inf)`.
    pub q_t: f64,
    /// `2 |q_on|_inf + |q_off|_inf + w_eta(0) l_vel`.
    pub h: f64,
    /// `|rho_0|_L1`.
    pub rho0_l1: f64,
    /// `int_0^T r1_upper(t) dt`.
    pub r_t: f64,
    pub t_final: f64,
    #[serde(skip)]
    ramps: RampConfig,
}

impl TheoremConstants {
    /// Upper envelope of the L1 bound: `|rho_0|_L1` plus the largest possible
    /// on-ramp inflow up to `t`. The subtracted minimum terms need the
    /// solution itself and are dropped.
    pub fn r1_upper(&self, t: f64) -> f64 {
        self.rho0_l1 + self.ramps.on_inflow_bound(t)
    }

    /// `e^{tH} (TV(rho_0) + t Q_T)`.
    pub fn tv_bound(&self, tv0: f64, t: f64) -> f64 {
        (t * self.h).exp() * (tv0 + t * self.q_t)
    }
}

pub fn theorem_constants(
    law: VelocityLaw,
    ramps: &RampConfig,
    conv_kernel: &ConvectiveKernel,
    rho0: &StateField,
    t_final: f64,
) -> TheoremConstants {
    let l_vel = law.sup_norm() + law.derivative_sup_norm();
    let on = ramps.on_sup(t_final);
    let off = ramps.off_sup(t_final);
    let rho0_l1 = rho0.mass();
    let r_t = t_final * rho0_l1 + ramps.on_inflow_bound_integral(t_final);
    TheoremConstants {
        l_vel,
        q_t: 2.0 * (on + off),
        h: 2.0 * on + off + conv_kernel.peak() * l_vel,
        rho0_l1,
        r_t,
        t_final,
        ramps: ramps.clone(),
    }
}

/// Residuals of `mass change - (boundary net inflow + on-ramp inflow - off-ramp outflow)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassLedger {
    pub per_step: Vec<f64>,
    pub max_abs_residual: f64,
    /// `final mass - initial mass - total net inflow`.
    pub cumulative_drift: f64,
}

pub fn mass_ledger(traj: &Trajectory) -> MassLedger {
    let n = traj.steps.len();
    let mass_after = |i: usize| {
        if i + 1 < n {
            traj.steps[i + 1].mass
        } else {
            traj.final_state.mass()
        }
    };
    let mut net_total = 0.0;
    let per_step: Vec<f64> = traj
        .steps
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let f = d.fluxes;
            let net = f.flux_in - f.flux_out + f.onramp_inflow - f.offramp_outflow;
            net_total += net;
            (mass_after(i) - d.mass) - net
        })
        .collect();
    let max_abs_residual = per_step.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    let cumulative_drift =
        traj.final_state.mass() - traj.initial_state().mass() - net_total;
    MassLedger {
        per_step,
        max_abs_residual,
        cumulative_drift,
    }
}

/// `(t, TV, bound)` for every recorded state (each step start plus the final
/// state) whose total variation exceeds the a-priori bound.
pub fn tv_bound_violations(traj: &Trajectory, c: &TheoremConstants) -> Vec<(f64, f64, f64)> {
    let tv0 = traj.initial_state().total_variation();
    traj.steps
        .iter()
        .map(|d| (d.t, d.tv))
        .chain(std::iter::once((
            traj.final_state.time(),
            traj.final_state.total_variation(),
        )))
        .filter_map(|(t, tv)| {
            let bound = c.tv_bound(tv0, t);
            (tv > bound * (1.0 + 1e-12) + 1e-12).then_some((t, tv, bound))
        })
        .collect()
}
