//! Geometry of the mediator space.
//!
//! One-dimensional distributions are represented by their quantile functions
//! sampled on a midpoint grid over (0, 1). In one dimension the 2-Wasserstein
//! distance is the L² distance between quantile functions and the Wasserstein
//! barycenter is the pointwise mean of quantile functions, so both reduce to
//! midpoint-rule arithmetic on the grid.
//!
//! The log-quantile-density (LQD) transform maps a quantile function `Q` to the
//! unrestricted function `log Q'(t)`, which is where the mediator regression
//! runs. Its inverse integrates `exp` of the transform back up from an anchor.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_input, Error, Result};

/// Midpoint grid `t_g = (g - 0.5) / G`, `g = 1..=G`, on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    size: usize,
}

impl Grid {
    pub const DEFAULT_SIZE: usize = 100;

    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(invalid_input("grid size must be positive"));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Uniform spacing `1 / G`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.size as f64
    }

    /// Zero-based grid point `t = (index + 0.5) / G`.
    pub fn point(&self, index: usize) -> f64 {
        (index as f64 + 0.5) / self.size as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|g| self.point(g)).collect()
    }

    /// Index of the grid point whose cell `[g/G, (g+1)/G)` contains `t`.
    pub fn cell_index(&self, t: f64) -> usize {
        let raw = libm::floor(t * self.size as f64);
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.size - 1)
        }
    }

    /// Midpoint-rule integral over (0, 1) of a function sampled on the grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.size);
        values.iter().sum::<f64>() * self.spacing()
    }

    /// Midpoint-rule inner product of two grid functions.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.size);
        debug_assert_eq!(b.len(), self.size);
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.spacing()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.size {
            return Err(Error::GridMismatch { expected: self.size, found: len });
        }
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        self.check_len(other.size)
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { size: Self::DEFAULT_SIZE }
    }
}

/// A quantile function sampled on a grid. Values are finite and non-decreasing.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct QuantileFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl QuantileFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_input(alloc::format!(
                "quantile value at grid index {i} is not finite"
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(invalid_input(alloc::format!(
                "quantile values decrease between grid indices {i} and {}",
                i + 1
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub(crate) fn from_monotone_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[1] >= w[0]));
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Location shift by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v + c).collect() }
    }

    /// Midpoint-rule mean of the distribution, `∫ Q(t) dt`.
    pub fn mean(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

/// A grid function in log-quantile-density space together with the location
/// anchor `Q(0)` that the transform would otherwise discard.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LqdFunction {
    grid: Grid,
    values: Vec<f64>,
    anchor: f64,
}

impl LqdFunction {
    pub fn new(grid: Grid, values: Vec<f64>, anchor: f64) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) || !anchor.is_finite() {
            return Err(invalid_input("LQD values and anchor must be finite"));
        }
        Ok(Self { grid, values, anchor })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }
}

/// Quantile function of an empirical sample: the value at `t` is the
/// `ceil(l t)`-th order statistic, clamped to `[1, l]`.
pub fn empirical_quantile(samples: &[f64], grid: Grid) -> Result<QuantileFunction> {
    if samples.is_empty() {
        return Err(invalid_input("empirical quantile of an empty sample"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(invalid_input("samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let l = sorted.len();
    let two_g = 2 * grid.size();
    let values = (0..grid.size())
        .map(|g| {
            // ceil(l * (2g + 1) / 2G) in exact integer arithmetic
            let k = (l * (2 * g + 1)).div_ceil(two_g);
            sorted[k.clamp(1, l) - 1]
        })
        .collect();
    Ok(QuantileFunction::from_monotone_unchecked(grid, values))
}

/// 2-Wasserstein distance between two distributions on the same grid.
pub fn wasserstein2(a: &QuantileFunction, b: &QuantileFunction) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    let ss: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(ss * a.grid.spacing()))
}

/// Wasserstein barycenter: pointwise weighted mean of quantile functions.
/// Weights default to uniform.
pub fn barycenter(qs: &[QuantileFunction], weights: Option<&[f64]>) -> Result<QuantileFunction> {
    let first = qs.first().ok_or_else(|| invalid_input("barycenter of an empty collection"))?;
    let grid = first.grid;
    for q in qs {
        grid.check_same(&q.grid)?;
    }
    let mut out = vec![0.0; grid.size()];
    match weights {
        None => {
            for q in qs {
                for (o, v) in out.iter_mut().zip(&q.values) {
                    *o += v;
                }
            }
            let n = qs.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
        Some(w) => {
            if w.len() != qs.len() {
                return Err(invalid_input(alloc::format!(
                    "{} weights for {} quantile functions",
                    w.len(),
                    qs.len()
                )));
            }
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(invalid_input("barycenter weights must be non-negative"));
            }
            let total: f64 = w.iter().sum();
            if libm::fabs(total - 1.0) > 1e-9 {
                return Err(invalid_input(alloc::format!(
                    "barycenter weights sum to {total}, not 1"
                )));
            }
            for (q, &wi) in qs.iter().zip(w) {
                for (o, v) in out.iter_mut().zip(&q.values) {
                    *o += wi * v;
                }
            }
        }
    }
    // A convex combination of non-decreasing sequences is non-decreasing up to
    // rounding; repair the rounding.
    for g in 1..out.len() {
        if out[g] < out[g - 1] {
            out[g] = out[g - 1];
        }
    }
    Ok(QuantileFunction::from_monotone_unchecked(grid, out))
}

/// Numerical settings for the LQD transform.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LqdConfig {
    /// Quantile-density slopes below this are clamped before taking logs.
    pub density_floor: f64,
    /// Half-width (in grid points) of a moving average applied to the
    /// quantile-density slopes; 0 disables smoothing.
    pub smoothing_window: usize,
}

impl Default for LqdConfig {
    fn default() -> Self {
        Self { density_floor: 1e-8, smoothing_window: 0 }
    }
}

impl LqdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.density_floor > 0.0) || !self.density_floor.is_finite() {
            return Err(crate::error::invalid_config("density_floor must be positive"));
        }
        Ok(())
    }
}

/// LQD transform with default settings.
pub fn lqd_transform(q: &QuantileFunction) -> LqdFunction {
    lqd_transform_with(q, &LqdConfig::default())
}

/// LQD transform: log of the finite-difference quantile density (central
/// differences inside, half-step slopes extrapolated at the two ends), with slopes clamped below
/// at `config.density_floor`. The anchor extrapolates `Q` to `t = 0`.
pub fn lqd_transform_with(q: &QuantileFunction, config: &LqdConfig) -> LqdFunction {
    let grid = q.grid;
    let n = grid.size();
    let dt = grid.spacing();
    let v = &q.values;
    let mut slopes = vec![0.0; n];
    if n >= 2 {
        for g in 1..n - 1 {
            slopes[g] = (v[g + 1] - v[g - 1]) / (2.0 * dt);
        }
        let first = (v[1] - v[0]) / dt;
        let last = (v[n - 1] - v[n - 2]) / dt;
        if n >= 3 {
            // end-point slopes consistent with the first step of the inverse
            let (a, b) = if n >= 4 {
                (
                    4.0 * (first - slopes[1]) + slopes[2],
                    4.0 * (last - slopes[n - 2]) + slopes[n - 3],
                )
            } else {
                (2.0 * first - slopes[1], 2.0 * last - slopes[1])
            };
            slopes[0] = if first > 0.0 && a > 0.0 { a } else { first };
            slopes[n - 1] = if last > 0.0 && b > 0.0 { b } else { last };
        } else {
            slopes[0] = first;
            slopes[1] = last;
        }
    }
    if config.smoothing_window > 0 && n > 1 {
        let w = config.smoothing_window;
        let raw = slopes.clone();
        for (g, s) in slopes.iter_mut().enumerate() {
            let lo = g.saturating_sub(w);
            let hi = (g + w).min(n - 1);
            *s = raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        }
    }
    let floor = config.density_floor;
    let values: Vec<f64> = slopes.iter().map(|&s| libm::log(s.max(floor))).collect();
    let anchor = v[0] - 0.5 * dt * libm::exp(values[0]);
    LqdFunction { grid, values, anchor }
}

/// Inverse LQD transform: `Q(t_g) = anchor + ∫_0^{t_g} exp(g(s)) ds`.
pub fn lqd_inverse(g: &LqdFunction) -> Result<QuantileFunction> {
    let mut out = vec![0.0; g.grid.size()];
    inverse_into(&g.values, g.anchor, g.grid, &mut out)?;
    Ok(QuantileFunction::from_monotone_unchecked(g.grid, out))
}

/// Writes the inverse transform of `values` into `out`.
pub(crate) fn inverse_into(values: &[f64], anchor: f64, grid: Grid, out: &mut [f64]) -> Result<()> {
    let dens: Vec<f64> = values.iter().map(|&v| libm::exp(v)).collect();
    integrate_density(&dens, anchor, grid, out)
}

/// Writes `anchor + ∫_0^{t_g} dens` into `out`.
///
/// The integral is accumulated with the midpoint rule of step `2Δ`, whose
/// interval `[t_{g-1}, t_{g+1}]` has midpoint `t_g`; this is the exact inverse
/// of central differencing, so transform round trips are exact up to
/// rounding. The two interleaved partial sums are put in phase at whichever
/// end has the smaller density; the transform's end-point slopes invert
/// this choice. For rough inputs they can still cross; the
/// output then falls back to the step-`Δ` cumulative midpoint rule over cells,
/// which is increasing by construction.
pub(crate) fn integrate_density(dens: &[f64], anchor: f64, grid: Grid, out: &mut [f64]) -> Result<()> {
    let n = grid.size();
    debug_assert_eq!(dens.len(), n);
    debug_assert_eq!(out.len(), n);
    let overflow = |i: usize| Error::Overflow { index: i, t: grid.point(i) };
    if let Some(i) = dens.iter().position(|v| !v.is_finite()) {
        return Err(overflow(i));
    }
    let dt = grid.spacing();
    out[0] = anchor + 0.5 * dt * dens[0];
    if n >= 2 {
        out[1] = out[0]
            + match n {
                2 | 3 => 0.5 * dt * (dens[0] + dens[1]),
                _ => 0.25 * dt * (dens[0] + 4.0 * dens[1] - dens[2]),
            };
        for g in 2..n {
            out[g] = out[g - 2] + 2.0 * dt * dens[g - 1];
        }
    }
    if n >= 4 && dens[n - 1] < dens[0] {
        // put the phase error at the end with the larger density, where it
        // is relatively small
        let target = 0.25 * dt * (dens[n - 1] + 4.0 * dens[n - 2] - dens[n - 3]);
        let delta = target - (out[n - 1] - out[n - 2]);
        let shift = if (n - 1) % 2 == 1 { delta } else { -delta };
        out.iter_mut().skip(1).step_by(2).for_each(|v| *v += shift);
    }
    let increasing = out.windows(2).all(|w| w[1] > w[0]);
    if !increasing {
        let mut acc = 0.0;
        for (o, e) in out.iter_mut().zip(dens) {
            *o = anchor + dt * (acc + 0.5 * e);
            acc += e;
        }
    }
    match out.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(overflow(i)),
        None => Ok(()),
    }
}
