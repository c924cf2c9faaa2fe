//! Velocity law, ramp geometry and the on/off-ramp source terms.
//!
//! The maximal density is normalized to 1 everywhere.

use crate::error::{Error, Result};
use crate::mesh::Grid;

/// Slack allowed on densities before they count as out of range.
pub const DENSITY_ROUNDOFF: f64 = 1e-12;

/// Speed as a function of the (convolved) density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VelocityLaw {
    /// `v(rho) = 1 - rho`.
    #[default]
    Linear,
    /// `v(rho) = 1 - rho^2`.
    Quadratic,
}

/// Points used to estimate sup-norms of non-affine laws.
const SUP_SAMPLES: usize = 10_000;

impl VelocityLaw {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(Error::config(
                "law.name",
                format!("unknown velocity law {other:?} (expected \"linear\" or \"quadratic\")"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
        }
    }

    /// Unchecked evaluation.
    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            Self::Linear => 1.0 - rho,
            Self::Quadratic => 1.0 - rho * rho,
        }
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        match self {
            Self::Linear => -1.0,
            Self::Quadratic => -2.0 * rho,
        }
    }

    /// `sup |v|` on `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Linear => 1.0,
            _ => sample_sup(|r| self.eval(r).abs()),
        }
    }

    /// `sup |v'|` on `[0, 1]`.
    pub fn derivative_sup_norm(&self) -> f64 {
        match self {
            Self::Linear => 1.0,
            _ => sample_sup(|r| self.derivative(r).abs()),
        }
    }
}

fn sample_sup(f: impl Fn(f64) -> f64) -> f64 {
    (0..SUP_SAMPLES)
        .map(|i| f(i as f64 / (SUP_SAMPLES - 1) as f64))
        .fold(0.0, f64::max)
}

/// Checks that `rho` is a density, clamping roundoff excursions into `[0, 1]`.
pub fn admissible_density(rho: f64, context: &str) -> Result<f64> {
    if !(-DENSITY_ROUNDOFF..=1.0 + DENSITY_ROUNDOFF).contains(&rho) {
        return Err(Error::Domain {
            value: rho,
            context: context.to_string(),
        });
    }
    Ok(rho.clamp(0.0, 1.0))
}

/// `v(rho_bar)` with a domain check on the argument.
pub fn velocity(law: VelocityLaw, rho_bar: f64) -> Result<f64> {
    Ok(law.eval(admissible_density(rho_bar, "velocity argument")?))
}

/// Piecewise-constant, right-continuous rate `q(t)`: `values[i]` applies on
/// `[times[i], times[i + 1])`, the last value for all later times.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl RateFunction {
    pub fn constant(value: f64) -> Result<Self> {
        Self::piecewise(vec![0.0], vec![value])
    }

    pub fn zero() -> Self {
        Self {
            times: vec![0.0],
            values: vec![0.0],
        }
    }

    pub fn piecewise(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::config(
                "rate",
                "times and values must be non-empty and of equal length",
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::config("rate.times", "first breakpoint must be 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("rate.times", "breakpoints must be finite and increasing"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::config("rate.values", format!("rates must be finite and >= 0, got {v}")));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|s| *s <= t);
        self.values[i.saturating_sub(1)]
    }

    /// Pieces `(start, end, value)` clipped to `[0, t]`.
    fn pieces(&self, t: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.times.len()).filter_map(move |i| {
            let a = self.times[i];
            let b = self.times.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
            (b > a).then_some((a, b, self.values[i]))
        })
    }

    /// `sup_{[0, t]} q`.
    pub fn sup_norm(&self, t: f64) -> f64 {
        self.values[0].max(self.pieces(t).map(|(_, _, v)| v).fold(0.0, f64::max))
    }

    /// `int_0^t q(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        self.pieces(t).map(|(a, b, v)| (b - a) * v).sum()
    }

    /// `int_0^t int_0^s q(r) dr ds`.
    pub fn double_integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut running = 0.0;
        for (a, b, v) in self.pieces(t) {
            let h = b - a;
            acc += running * h + 0.5 * v * h * h;
            running += v * h;
        }
        acc
    }

    /// `int_0^t |q - other| ds`.
    pub fn l1_distance(&self, other: &RateFunction, t: f64) -> f64 {
        let mut cuts: Vec<f64> = self
            .times
            .iter()
            .chain(other.times.iter())
            .copied()
            .filter(|s| *s < t)
            .collect();
        cuts.push(t);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .map(|w| (w[1] - w[0]) * (self.eval(w[0]) - other.eval(w[0])).abs())
            .sum()
    }

    /// Same breakpoints, every value shifted by `eps`.
    pub fn shifted(&self, eps: f64) -> Result<Self> {
        Self::piecewise(
            self.times.clone(),
            self.values.iter().map(|v| v + eps).collect(),
        )
    }
}

/// Closed interval `[a, b]` on the road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::config("interval", format!("need a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// How a configured ramp rate maps onto the source coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateBasis {
    /// The rate is the ramp's total flow, spread evenly over the ramp
    /// interval: the source coefficient is `q / |interval|`.
    #[default]
    Ramp,
    /// The rate is already a coefficient per unit road length.
    Length,
}

impl RateBasis {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ramp" => Ok(Self::Ramp),
            "length" => Ok(Self::Length),
            other => Err(Error::config(
                "ramps.rate_basis",
                format!("unknown rate basis {other:?} (expected \"ramp\" or \"length\")"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ramp => "ramp",
            Self::Length => "length",
        }
    }
}

/// At most one on-ramp and one off-ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct RampConfig {
    pub on_interval: Option<Interval>,
    pub off_interval: Option<Interval>,
    pub q_on: RateFunction,
    pub q_off: RateFunction,
    pub basis: RateBasis,
}

impl RampConfig {
    pub fn none() -> Self {
        Self {
            on_interval: None,
            off_interval: None,
            q_on: RateFunction::zero(),
            q_off: RateFunction::zero(),
            basis: RateBasis::default(),
        }
    }

    pub fn on_ramp(interval: Interval, q_on: RateFunction) -> Self {
        Self {
            on_interval: Some(interval),
            q_on,
            ..Self::none()
        }
    }

    pub fn with_basis(mut self, basis: RateBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for (name, iv) in [("ramps.on_interval", self.on_interval), ("ramps.off_interval", self.off_interval)] {
            if let Some(iv) = iv {
                if iv.a < grid.x_min() || iv.b > grid.x_max() {
                    return Err(Error::config(
                        name,
                        format!(
                            "[{}, {}] must lie within the grid [{}, {}]",
                            iv.a,
                            iv.b,
                            grid.x_min(),
                            grid.x_max()
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Factor turning a configured rate into a source coefficient; zero when
    /// the ramp is absent.
    fn scale(&self, interval: Option<Interval>) -> f64 {
        match (interval, self.basis) {
            (None, _) => 0.0,
            (Some(_), RateBasis::Length) => 1.0,
            (Some(iv), RateBasis::Ramp) => 1.0 / iv.length(),
        }
    }

    pub fn on_scale(&self) -> f64 {
        self.scale(self.on_interval)
    }

    pub fn off_scale(&self) -> f64 {
        self.scale(self.off_interval)
    }

    /// On-ramp source coefficient at time `t`.
    pub fn on_rate(&self, t: f64) -> f64 {
        self.on_scale() * self.q_on.eval(t)
    }

    pub fn off_rate(&self, t: f64) -> f64 {
        self.off_scale() * self.q_off.eval(t)
    }

    /// `sup_{[0, t]}` of the on-ramp source coefficient.
    pub fn on_sup(&self, t: f64) -> f64 {
        self.on_scale() * self.q_on.sup_norm(t)
    }

    pub fn off_sup(&self, t: f64) -> f64 {
        self.off_scale() * self.q_off.sup_norm(t)
    }

    /// Largest possible on-ramp inflow (vehicles) over `[0, t]`: the
    /// coefficient integrated over time and over the ramp interval.
    pub fn on_inflow_bound(&self, t: f64) -> f64 {
        match self.on_interval {
            Some(iv) => self.on_scale() * iv.length() * self.q_on.integral(t),
            None => 0.0,
        }
    }

    /// `int_0^t` of [`Self::on_inflow_bound`].
    pub fn on_inflow_bound_integral(&self, t: f64) -> f64 {
        match self.on_interval {
            Some(iv) => self.on_scale() * iv.length() * self.q_on.double_integral(t),
            None => 0.0,
        }
    }
}

/// Fraction of each cell covered by an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    coverage: Vec<f64>,
}

impl IndicatorField {
    pub fn empty(n_cells: usize) -> Self {
        Self {
            coverage: vec![0.0; n_cells],
        }
    }

    pub fn coverage(&self) -> &[f64] {
        &self.coverage
    }

    /// Indices of cells with nonzero coverage.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coverage
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0.0)
            .map(|(j, _)| j)
    }
}

/// Exact per-cell overlap fractions of `interval` on `grid`.
pub fn discretize_indicator(interval: Interval, grid: &Grid) -> Result<IndicatorField> {
    if interval.a < grid.x_min() || interval.b > grid.x_max() {
        return Err(Error::config(
            "interval",
            format!(
                "[{}, {}] lies outside the grid [{}, {}]",
                interval.a,
                interval.b,
                grid.x_min(),
                grid.x_max()
            ),
        ));
    }
    let dx = grid.dx();
    let coverage = (0..grid.n_cells())
        .map(|j| {
            let lo = grid.left_edge(j).max(interval.a);
            let hi = grid.left_edge(j + 1).min(interval.b);
            let frac = ((hi - lo) / dx).clamp(0.0, 1.0);
            // Snap grid-aligned edges that only miss by rounding.
            if frac < 1e-9 {
                0.0
            } else if frac > 1.0 - 1e-9 {
                1.0
            } else {
                frac
            }
        })
        .collect();
    Ok(IndicatorField { coverage })
}

fn check_source_args(rate: f64, chi: f64) -> Result<()> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::config("ramps.rate", format!("rate must be >= 0, got {rate}")));
    }
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::config("coverage", format!("must lie in [0, 1], got {chi}")));
    }
    Ok(())
}

/// On-ramp inflow `chi q (1 - rho)(1 - R_on)`.
#[inline]
pub fn on_ramp_source(q: f64, chi: f64, rho: f64, r_on: f64) -> f64 {
    chi * q * (1.0 - rho) * (1.0 - r_on)
}

/// Off-ramp outflow `chi q rho`.
#[inline]
pub fn off_ramp_source(q: f64, chi: f64, rho: f64) -> f64 {
    chi * q * rho
}

/// Checked on-ramp source.
pub fn s_on(q_on: f64, chi: f64, rho: f64, r_on: f64) -> Result<f64> {
    check_source_args(q_on, chi)?;
    let rho = admissible_density(rho, "s_on density")?;
    let r_on = admissible_density(r_on, "s_on convolved density")?;
    Ok(on_ramp_source(q_on, chi, rho, r_on))
}

/// Checked off-ramp source.
pub fn s_off(q_off: f64, chi: f64, rho: f64) -> Result<f64> {
    check_source_args(q_off, chi)?;
    let rho = admissible_density(rho, "s_off density")?;
    Ok(off_ramp_source(q_off, chi, rho))
}
