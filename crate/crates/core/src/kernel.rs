//! Look-ahead kernels and their discrete convolution weights.
//!
//! Both kernels are integrated cell by cell in closed form, so each weight is
//! the exact kernel mass of one cell (up to rounding) before renormalization.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::output::fmt_f64;

/// Downstream kernel `2(eta - x)/eta^2` on `[0, eta]`, used in the velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvectiveKernel {
    eta: f64,
}

impl ConvectiveKernel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config("kernel.eta", format!("must be > 0, got {eta}")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn density(&self, x: f64) -> f64 {
        if (0.0..=self.eta).contains(&x) {
            2.0 * (self.eta - x) / (self.eta * self.eta)
        } else {
            0.0
        }
    }

    /// Value at the origin, `2 / eta`.
    pub fn peak(&self) -> f64 {
        2.0 / self.eta
    }

    /// Mass on `[0, x]`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.eta);
        (2.0 * self.eta * x - x * x) / (self.eta * self.eta)
    }
}

/// On-ramp kernel `(16 / (5 pi eta^6)) (eta^2 - (x - delta)^2)^{5/2}` on
/// `[delta - eta, delta + eta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactiveKernel {
    eta: f64,
    delta: f64,
}

const REACTIVE_NORM: f64 = 16.0 / (5.0 * PI);

impl ReactiveKernel {
    pub fn new(eta: f64, delta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config("kernel.eta", format!("must be > 0, got {eta}")));
        }
        if !(delta.is_finite() && (-eta..=eta).contains(&delta)) {
            return Err(Error::config(
                "kernel.delta",
                format!("must lie in [-eta, eta] = [{}, {eta}], got {delta}", -eta),
            ));
        }
        Ok(Self { eta, delta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn support(&self) -> (f64, f64) {
        (self.delta - self.eta, self.delta + self.eta)
    }

    pub fn density(&self, x: f64) -> f64 {
        let s = x - self.delta;
        let e2 = self.eta * self.eta;
        if s.abs() >= self.eta {
            return 0.0;
        }
        REACTIVE_NORM * (e2 - s * s).powf(2.5) / (e2 * e2 * e2)
    }

    /// Mass on `[delta - eta, x]` minus one half, i.e. an odd function of
    /// `x - delta`. With `s = eta sin(theta)` the integrand becomes
    /// `cos^6(theta)`, whose antiderivative is a short trigonometric sum.
    fn centered_cumulative(&self, x: f64) -> f64 {
        let s = ((x - self.delta) / self.eta).clamp(-1.0, 1.0);
        let th = s.asin();
        let g = 5.0 * th / 16.0
            + 15.0 * (2.0 * th).sin() / 64.0
            + 3.0 * (4.0 * th).sin() / 64.0
            + (6.0 * th).sin() / 192.0;
        REACTIVE_NORM * g
    }

    /// Kernel mass on `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.centered_cumulative(b) - self.centered_cumulative(a)
    }
}

/// Which kernel family a weight array came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelTag {
    Convective,
    Reactive,
}

/// Cell-integrated kernel weights. Weight `i` belongs to offset
/// `offset_lo + i`, i.e. to the relative interval `[k dx, (k + 1) dx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernelWeights {
    offset_lo: isize,
    weights: Vec<f64>,
    tag: KernelTag,
    dx: f64,
}

/// How [`kernel_l1_distance`] measures weights: the weights are cell masses,
/// so the plain sum of absolute differences already carries the `dx` factor.
pub const KERNEL_L1_CONVENTION: &str =
    "sum_k |gamma_k^a - gamma_k^b| over zero-padded aligned offsets; weights are cell masses";

impl DiscreteKernelWeights {
    fn normalized(offset_lo: isize, mut weights: Vec<f64>, tag: KernelTag, dx: f64) -> Self {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self {
            offset_lo,
            weights,
            tag,
            dx,
        }
    }

    /// Identity kernel: a single unit weight at offset 0.
    pub fn identity(tag: KernelTag, dx: f64) -> Self {
        Self {
            offset_lo: 0,
            weights: vec![1.0],
            tag,
            dx,
        }
    }

    pub fn offset_lo(&self) -> isize {
        self.offset_lo
    }

    pub fn offset_hi(&self) -> isize {
        self.offset_lo + self.weights.len() as isize - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tag(&self) -> KernelTag {
        self.tag
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Weight at offset `k`, zero outside the stored range.
    pub fn get(&self, k: isize) -> f64 {
        let i = k - self.offset_lo;
        if i < 0 {
            return 0.0;
        }
        self.weights.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Writes `k,x_left,x_right,gamma_k` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "x_left", "x_right", "gamma_k"])?;
        for (i, g) in self.weights.iter().enumerate() {
            let k = self.offset_lo + i as isize;
            w.write_record([
                k.to_string(),
                fmt_f64(k as f64 * self.dx),
                fmt_f64((k + 1) as f64 * self.dx),
                fmt_f64(*g),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// `x / dx` snapped to the nearest integer when it is within rounding of one.
fn cell_ratio(x: f64, dx: f64) -> f64 {
    let r = x / dx;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * n.abs().max(1.0) {
        n
    } else {
        r
    }
}

fn check_dx(dx: f64) -> Result<()> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::config("grid.dx", format!("must be > 0, got {dx}")));
    }
    Ok(())
}

/// Cell masses of the convective kernel for offsets `0..ceil(eta/dx)`.
pub fn discretize_convective(kernel: &ConvectiveKernel, dx: f64) -> Result<DiscreteKernelWeights> {
    check_dx(dx)?;
    let eta = kernel.eta();
    let cells = cell_ratio(eta, dx).ceil().max(1.0) as usize;
    if cells == 1 {
        log::warn!("convective kernel support eta = {eta} fits in one cell of width {dx}");
    }
    let weights = (0..cells)
        .map(|k| {
            let a = k as f64 * dx;
            let b = ((k + 1) as f64 * dx).min(eta);
            kernel.cumulative(b) - kernel.cumulative(a)
        })
        .collect();
    Ok(DiscreteKernelWeights::normalized(
        0,
        weights,
        KernelTag::Convective,
        dx,
    ))
}

/// Cell masses of the reactive kernel over every cell `[k dx, (k + 1) dx]`
/// meeting its support.
pub fn discretize_reactive(kernel: &ReactiveKernel, dx: f64) -> Result<DiscreteKernelWeights> {
    check_dx(dx)?;
    let (lo, hi) = kernel.support();
    let k_lo = cell_ratio(lo, dx).floor() as isize;
    let k_hi = (cell_ratio(hi, dx).ceil() as isize - 1).max(k_lo);
    let weights = (k_lo..=k_hi)
        .map(|k| {
            let a = (k as f64 * dx).max(lo);
            let b = ((k + 1) as f64 * dx).min(hi);
            if b > a {
                kernel.mass(a, b)
            } else {
                0.0
            }
        })
        .collect();
    Ok(DiscreteKernelWeights::normalized(
        k_lo,
        weights,
        KernelTag::Reactive,
        dx,
    ))
}

/// Discrete L1 distance between two weight arrays on the same cell width.
/// See [`KERNEL_L1_CONVENTION`].
pub fn kernel_l1_distance(a: &DiscreteKernelWeights, b: &DiscreteKernelWeights) -> Result<f64> {
    if a.dx != b.dx {
        return Err(Error::GridMismatch(format!(
            "kernel weights built on dx = {} and dx = {}",
            a.dx, b.dx
        )));
    }
    let lo = a.offset_lo().min(b.offset_lo());
    let hi = a.offset_hi().max(b.offset_hi());
    Ok((lo..=hi).map(|k| (a.get(k) - b.get(k)).abs()).sum())
}
