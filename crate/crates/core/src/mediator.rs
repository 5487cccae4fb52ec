//! Additive functional regression of transformed mediators on covariates and
//! treatment, and the plug-in treatment-effect curve α̂(t).
//!
//! At every grid point `t` the LQD-transformed mediators are modelled as
//!
//! ```text
//! ψ(M_i)(t) = g0(t) + Σ_j g_j(t, x_ij) + g_z(t, z_i) + r_i(t)
//! ```
//!
//! with each component empirically centred. Components are fitted by classic
//! backfitting: Nadaraya–Watson smoothers with an Epanechnikov kernel for the
//! continuous covariates and per-arm means for the binary treatment. Grid
//! points are independent problems; they are computed side by side and each
//! one stops updating as soon as it meets the convergence criterion.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::distribution::{integrate_density, lqd_transform_with, Grid, LqdConfig, LqdFunction, QuantileFunction};
use crate::error::{invalid_config, invalid_input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SmootherConfig {
    /// Multiplies the rule-of-thumb bandwidth `1.06 sd(x) n^{-1/5}`.
    pub bandwidth_multiplier: f64,
    /// Relative sup-norm change at which backfitting stops.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Equispaced evaluation points spanning each covariate's range.
    pub eval_points: usize,
    /// Apply a three-point running mean over t to the fitted components.
    pub smooth_over_t: bool,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self { bandwidth_multiplier: 1.0, tolerance: 1e-4, max_iter: 50, eval_points: 51, smooth_over_t: false }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_multiplier > 0.0) || !self.bandwidth_multiplier.is_finite() {
            return Err(invalid_config("bandwidth_multiplier must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid_config("tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid_config("max_iter must be at least 1"));
        }
        if self.eval_points < 2 {
            return Err(invalid_config("eval_points must be at least 2"));
        }
        Ok(())
    }
}

/// Transformed mediators with covariates and treatment, one row per unit.
/// Matrices are row-major with one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MediatorDataset {
    grid: Grid,
    covariate_count: usize,
    quantiles: Vec<f64>,
    responses: Vec<f64>,
    anchors: Vec<f64>,
    covariates: Vec<f64>,
    treated: Vec<bool>,
}

impl MediatorDataset {
    /// Applies the LQD transform to each mediator. `covariates` is row-major
    /// `n × d`.
    pub fn new(
        mediators: &[QuantileFunction],
        covariates: &[f64],
        treated: &[bool],
        lqd: &LqdConfig,
    ) -> Result<Self> {
        let n = mediators.len();
        let grid = mediators.first().ok_or_else(|| invalid_input("no mediators"))?.grid();
        if treated.len() != n {
            return Err(invalid_input("treatment length differs from mediator count"));
        }
        if covariates.len() % n != 0 {
            return Err(invalid_input("covariate matrix is not n × d"));
        }
        if covariates.iter().any(|x| !x.is_finite()) {
            return Err(invalid_input("covariates must be finite"));
        }
        let g = grid.size();
        let mut quantiles = Vec::with_capacity(n * g);
        let mut responses = Vec::with_capacity(n * g);
        let mut anchors = Vec::with_capacity(n);
        for m in mediators {
            grid.check_same(&m.grid())?;
            let l = lqd_transform_with(m, lqd);
            quantiles.extend_from_slice(m.values());
            responses.extend_from_slice(l.values());
            anchors.push(l.anchor());
        }
        Ok(Self {
            grid,
            covariate_count: covariates.len() / n,
            quantiles,
            responses,
            anchors,
            covariates: covariates.to_vec(),
            treated: treated.to_vec(),
        })
    }

    /// Builds a dataset directly from transform-space curves; the observed
    /// quantile functions are their inverse transforms.
    pub fn from_transformed(mediators: &[LqdFunction], covariates: &[f64], treated: &[bool]) -> Result<Self> {
        let qs = mediators.iter().map(crate::distribution::lqd_inverse).collect::<Result<Vec<_>>>()?;
        let n = mediators.len();
        let mut out = Self::new(&qs, covariates, treated, &LqdConfig::default())?;
        out.responses.clear();
        out.anchors.clear();
        for m in mediators {
            out.grid.check_same(&m.grid())?;
            out.responses.extend_from_slice(m.values());
            out.anchors.push(m.anchor());
        }
        debug_assert_eq!(out.anchors.len(), n);
        Ok(out)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn covariate_count(&self) -> usize {
        self.covariate_count
    }

    pub fn response(&self, i: usize) -> &[f64] {
        let g = self.grid.size();
        &self.responses[i * g..(i + 1) * g]
    }

    pub fn quantile(&self, i: usize) -> &[f64] {
        let g = self.grid.size();
        &self.quantiles[i * g..(i + 1) * g]
    }

    pub fn anchor(&self, i: usize) -> f64 {
        self.anchors[i]
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        let d = self.covariate_count;
        &self.covariates[i * d..(i + 1) * d]
    }

    pub fn treated(&self, i: usize) -> bool {
        self.treated[i]
    }

    /// Dataset made of the rows in `rows` (repeats allowed).
    pub fn gather(&self, rows: &[usize]) -> Self {
        let g = self.grid.size();
        let d = self.covariate_count;
        let mut out = Self {
            grid: self.grid,
            covariate_count: d,
            quantiles: Vec::with_capacity(rows.len() * g),
            responses: Vec::with_capacity(rows.len() * g),
            anchors: Vec::with_capacity(rows.len()),
            covariates: Vec::with_capacity(rows.len() * d),
            treated: Vec::with_capacity(rows.len()),
        };
        for &i in rows {
            out.quantiles.extend_from_slice(self.quantile(i));
            out.responses.extend_from_slice(self.response(i));
            out.anchors.push(self.anchors[i]);
            out.covariates.extend_from_slice(self.covariates(i));
            out.treated.push(self.treated[i]);
        }
        out
    }

    /// Row-major `n × d` covariate matrix.
    pub fn covariate_matrix(&self) -> &[f64] {
        &self.covariates
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treated
    }

    pub fn arm_sizes(&self) -> [usize; 2] {
        let t = self.treated.iter().filter(|&&z| z).count();
        [self.len() - t, t]
    }
}

/// Fitted component `g_j(t, x)` of one continuous covariate, tabulated on
/// `eval_points × grid` (row-major by evaluation point) and linearly
/// interpolated in `x`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CovariateComponent {
    pub eval_points: Vec<f64>,
    pub surface: Vec<f64>,
    pub bandwidth: f64,
}

impl CovariateComponent {
    fn locate(&self, x: f64) -> (usize, f64) {
        locate(&self.eval_points, x)
    }

    /// Adds `g_j(·, x)` to `out`.
    fn add_to(&self, x: f64, out: &mut [f64]) {
        let g = out.len();
        let (k, a) = self.locate(x);
        let lo = &self.surface[k * g..(k + 1) * g];
        let hi = &self.surface[(k + 1) * g..(k + 2) * g];
        for ((o, l), h) in out.iter_mut().zip(lo).zip(hi) {
            *o += (1.0 - a) * l + a * h;
        }
    }

    pub fn curve_at(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.surface.len() / self.eval_points.len()];
        self.add_to(x, &mut out);
        out
    }
}

fn locate(points: &[f64], x: f64) -> (usize, f64) {
    let e = points.len();
    let (lo, hi) = (points[0], points[e - 1]);
    if !(hi > lo) {
        return (0, 0.0);
    }
    let pos = (x.clamp(lo, hi) - lo) / (hi - lo) * (e - 1) as f64;
    let k = (libm::floor(pos) as usize).min(e - 2);
    (k, (pos - k as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FitDiagnostics {
    /// Largest iteration count over grid points.
    pub iterations: usize,
    /// Largest relative change in the final iteration over grid points.
    pub final_change: f64,
    /// Every grid point met the tolerance within `max_iter`.
    pub converged: bool,
    pub unconverged_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AdditiveMediatorFit {
    pub grid: Grid,
    pub g0: Vec<f64>,
    pub covariates: Vec<CovariateComponent>,
    /// `g_z(t, 0)` and `g_z(t, 1)`.
    pub treatment: [Vec<f64>; 2],
    /// Per-arm mean anchors used by the inverse transform.
    pub anchors: [f64; 2],
    pub diagnostics: FitDiagnostics,
}

impl AdditiveMediatorFit {
    /// `g0 + Σ_j g_j(·, x_j)`, the treatment-free part of the transformed mean.
    fn base_curve(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.g0.clone();
        for (c, &xj) in self.covariates.iter().zip(x) {
            c.add_to(xj, &mut out);
        }
        out
    }

    /// Fitted transform-space mean `ĝ0 + Σ ĝ_j(·, x_j) + ĝ_z(·, z)`.
    pub fn transform_mean(&self, treated: bool, x: &[f64]) -> Vec<f64> {
        let mut out = self.base_curve(x);
        for (o, v) in out.iter_mut().zip(&self.treatment[treated as usize]) {
            *o += v;
        }
        out
    }

    fn check_covariates(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.covariates.len() {
            return Err(invalid_input(alloc::format!(
                "expected {} covariates, got {}",
                self.covariates.len(),
                x.len()
            )));
        }
        Ok(())
    }
}

/// Fits the additive model by backfitting, independently at every grid point.
pub fn fit_additive(data: &MediatorDataset, config: &SmootherConfig) -> Result<AdditiveMediatorFit> {
    config.validate()?;
    let n = data.len();
    let d = data.covariate_count;
    let grid = data.grid;
    let gs = grid.size();
    if n < d + 2 {
        return Err(invalid_input(alloc::format!("{n} units cannot support {d} covariates")));
    }
    let arms = data.arm_sizes();
    if arms[0] == 0 || arms[1] == 0 {
        return Err(Error::NoContrast(alloc::format!(
            "{} control and {} treated units",
            arms[0],
            arms[1]
        )));
    }

    // Work in a canonical row order so the fit does not depend on how the
    // caller ordered the units.
    let order = canonical_order(data);
    let mut y = Vec::with_capacity(n * gs);
    let mut treated = Vec::with_capacity(n);
    for &i in &order {
        y.extend_from_slice(data.response(i));
        treated.push(data.treated[i]);
    }
    let smoothers = (0..d)
        .map(|j| {
            let xs: Vec<f64> = order.iter().map(|&i| data.covariates(i)[j]).collect();
            KernelSmoother::new(&xs, config, j)
        })
        .collect::<Result<Vec<_>>>()?;

    let inv_n = 1.0 / n as f64;
    let mut g0 = vec![0.0; gs];
    for row in y.chunks_exact(gs) {
        for (a, v) in g0.iter_mut().zip(row) {
            *a += v;
        }
    }
    g0.iter_mut().for_each(|a| *a *= inv_n);
    let mut floor = vec![f64::MIN_POSITIVE; gs];
    for row in y.chunks_exact(gs) {
        for ((f, v), m) in floor.iter_mut().zip(row).zip(&g0) {
            *f = f.max(1e-8 * (v - m).abs());
        }
    }

    let e = config.eval_points;
    let mut surfaces = vec![vec![0.0; e * gs]; d];
    let mut fitted = vec![vec![0.0; n * gs]; d];
    let mut arm_effect = [vec![0.0; gs], vec![0.0; gs]];
    let mut fit_sum = vec![0.0; n * gs];

    let mut active = vec![true; gs];
    let mut iterations = vec![0usize; gs];
    let mut last_change = vec![f64::INFINITY; gs];
    let mut partial = vec![0.0; n * gs];
    let mut new_surface = vec![0.0; e * gs];
    let mut new_fitted = vec![0.0; n * gs];
    let mut change = vec![0.0f64; gs];

    for iter in 1..=config.max_iter {
        change.iter_mut().for_each(|c| *c = 0.0);

        for j in 0..d {
            let sm = &smoothers[j];
            for i in 0..n {
                let r = i * gs..(i + 1) * gs;
                for ((((p, yv), m), s), f) in partial[r.clone()]
                    .iter_mut()
                    .zip(&y[r.clone()])
                    .zip(&g0)
                    .zip(&fit_sum[r.clone()])
                    .zip(&fitted[j][r])
                {
                    *p = yv - m - s + f;
                }
            }
            sm.smooth(&partial, gs, &mut new_surface);
            sm.interpolate(&new_surface, gs, &mut new_fitted);
            // recentre to empirical mean zero
            let mut centre = vec![0.0; gs];
            for row in new_fitted.chunks_exact(gs) {
                for (c, v) in centre.iter_mut().zip(row) {
                    *c += v;
                }
            }
            centre.iter_mut().for_each(|c| *c *= inv_n);
            for row in new_surface.chunks_exact_mut(gs).chain(new_fitted.chunks_exact_mut(gs)) {
                for ((v, c), &a) in row.iter_mut().zip(&centre).zip(&active) {
                    if a {
                        *v -= c;
                    }
                }
            }
            // frozen grid points keep their previous values
            freeze(&mut new_surface, &surfaces[j], &active, gs);
            freeze(&mut new_fitted, &fitted[j], &active, gs);
            record_change(&new_surface, &surfaces[j], &floor, gs, &mut change);
            for ((s, nf), of) in fit_sum.iter_mut().zip(&new_fitted).zip(&fitted[j]) {
                *s += nf - of;
            }
            core::mem::swap(&mut surfaces[j], &mut new_surface);
            core::mem::swap(&mut fitted[j], &mut new_fitted);
        }

        // treatment component: per-arm means of partial residuals
        let mut sums = [vec![0.0; gs], vec![0.0; gs]];
        for i in 0..n {
            let arm = treated[i] as usize;
            let r = i * gs..(i + 1) * gs;
            for ((((acc, yv), m), s), t) in sums[arm]
                .iter_mut()
                .zip(&y[r.clone()])
                .zip(&g0)
                .zip(&fit_sum[r])
                .zip(&arm_effect[arm])
            {
                *acc += yv - m - s + t;
            }
        }
        let (n0, n1) = (arms[0] as f64, arms[1] as f64);
        let mut new_arm = [vec![0.0; gs], vec![0.0; gs]];
        for t in 0..gs {
            if !active[t] {
                new_arm[0][t] = arm_effect[0][t];
                new_arm[1][t] = arm_effect[1][t];
                continue;
            }
            let (m0, m1) = (sums[0][t] / n0, sums[1][t] / n1);
            let c = (n0 * m0 + n1 * m1) * inv_n;
            new_arm[0][t] = m0 - c;
            new_arm[1][t] = m1 - c;
            let diff = (new_arm[0][t] - arm_effect[0][t]).abs().max((new_arm[1][t] - arm_effect[1][t]).abs());
            let size = new_arm[0][t].abs().max(new_arm[1][t].abs()).max(floor[t]);
            change[t] = change[t].max(diff / size);
        }
        for i in 0..n {
            let arm = treated[i] as usize;
            let r = i * gs..(i + 1) * gs;
            for ((s, new), old) in fit_sum[r].iter_mut().zip(&new_arm[arm]).zip(&arm_effect[arm]) {
                *s += new - old;
            }
        }
        arm_effect = new_arm;

        let mut any_active = false;
        for t in 0..gs {
            if active[t] {
                iterations[t] = iter;
                last_change[t] = change[t];
                if change[t] <= config.tolerance {
                    active[t] = false;
                } else {
                    any_active = true;
                }
            }
        }
        if !any_active {
            break;
        }
    }

    let unconverged_points = active.iter().filter(|&&a| a).count();
    let diagnostics = FitDiagnostics {
        iterations: iterations.iter().copied().max().unwrap_or(0),
        final_change: last_change.iter().copied().fold(0.0, f64::max),
        converged: unconverged_points == 0,
        unconverged_points,
    };
    if !diagnostics.converged {
        log::warn!(
            "backfitting did not converge at {unconverged_points} of {gs} grid points within {} iterations",
            config.max_iter
        );
    }

    let mut anchor_sum = [0.0; 2];
    for &i in &order {
        anchor_sum[data.treated[i] as usize] += data.anchors[i];
    }
    let mut fit = AdditiveMediatorFit {
        grid,
        g0,
        covariates: smoothers
            .into_iter()
            .zip(surfaces)
            .map(|(sm, surface)| CovariateComponent {
                eval_points: sm.eval_points,
                surface,
                bandwidth: sm.bandwidth,
            })
            .collect(),
        treatment: arm_effect,
        anchors: [anchor_sum[0] / arms[0] as f64, anchor_sum[1] / arms[1] as f64],
        diagnostics,
    };
    if config.smooth_over_t {
        running_mean_over_t(&mut fit.g0, gs);
        for c in &mut fit.covariates {
            running_mean_over_t(&mut c.surface, gs);
        }
        for arm in &mut fit.treatment {
            running_mean_over_t(arm, gs);
        }
    }
    Ok(fit)
}

fn freeze(new: &mut [f64], old: &[f64], active: &[bool], gs: usize) {
    if active.iter().all(|&a| a) {
        return;
    }
    for (nr, or) in new.chunks_exact_mut(gs).zip(old.chunks_exact(gs)) {
        for ((n, o), &a) in nr.iter_mut().zip(or).zip(active) {
            if !a {
                *n = *o;
            }
        }
    }
}

fn record_change(new: &[f64], old: &[f64], floor: &[f64], gs: usize, change: &mut [f64]) {
    let mut diff = vec![0.0f64; gs];
    let mut size = floor.to_vec();
    for (nr, or) in new.chunks_exact(gs).zip(old.chunks_exact(gs)) {
        for t in 0..gs {
            diff[t] = diff[t].max((nr[t] - or[t]).abs());
            size[t] = size[t].max(nr[t].abs());
        }
    }
    for t in 0..gs {
        change[t] = change[t].max(diff[t] / size[t]);
    }
}

/// Three-point running mean along t for every row of a row-major matrix.
fn running_mean_over_t(values: &mut [f64], gs: usize) {
    if gs < 2 {
        return;
    }
    for row in values.chunks_exact_mut(gs) {
        let src = row.to_vec();
        for t in 0..gs {
            let lo = t.saturating_sub(1);
            let hi = (t + 1).min(gs - 1);
            row[t] = src[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        }
    }
}

fn canonical_order(data: &MediatorDataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lex = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
    };
    order.sort_by(|&a, &b| {
        data.treated[a]
            .cmp(&data.treated[b])
            .then_with(|| lex(data.covariates(a), data.covariates(b)))
            .then_with(|| data.anchors[a].total_cmp(&data.anchors[b]))
            .then_with(|| lex(data.response(a), data.response(b)))
    });
    order
}

/// Nadaraya–Watson smoother with an Epanechnikov kernel, evaluated on an
/// equispaced set of points and interpolated back to the data.
struct KernelSmoother {
    eval_points: Vec<f64>,
    bandwidth: f64,
    /// CSR rows of normalized kernel weights, one row per evaluation point.
    row_start: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    /// Interpolation cell and fraction for each data point.
    cells: Vec<(usize, f64)>,
}

impl KernelSmoother {
    fn new(xs: &[f64], config: &SmootherConfig, covariate: usize) -> Result<Self> {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let bandwidth = config.bandwidth_multiplier * 1.06 * libm::sqrt(var) * libm::pow(n as f64, -0.2);
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(invalid_config(alloc::format!(
                "bandwidth for covariate {covariate} is {bandwidth}; the covariate has no spread"
            )));
        }
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = config.eval_points;
        let eval_points: Vec<f64> = (0..e).map(|k| lo + (hi - lo) * k as f64 / (e - 1) as f64).collect();

        let mut row_start = Vec::with_capacity(e + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_start.push(0);
        for &p in &eval_points {
            let start = cols.len();
            let mut total = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let u = (x - p) / bandwidth;
                if u.abs() < 1.0 {
                    let w = 0.75 * (1.0 - u * u);
                    cols.push(i);
                    weights.push(w);
                    total += w;
                }
            }
            if total > 0.0 {
                weights[start..].iter_mut().for_each(|w| *w /= total);
            } else {
                // empty window: fall back to the nearest observation
                let nearest = xs
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - p).abs().total_cmp(&(b.1 - p).abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                cols.push(nearest);
                weights.push(1.0);
            }
            row_start.push(cols.len());
        }
        let cells = xs.iter().map(|&x| locate(&eval_points, x)).collect();
        Ok(Self { eval_points, bandwidth, row_start, cols, weights, cells })
    }

    fn smooth(&self, values: &[f64], gs: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, row) in out.chunks_exact_mut(gs).enumerate() {
            for idx in self.row_start[k]..self.row_start[k + 1] {
                let w = self.weights[idx];
                let src = &values[self.cols[idx] * gs..(self.cols[idx] + 1) * gs];
                for (o, v) in row.iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
    }

    fn interpolate(&self, surface: &[f64], gs: usize, out: &mut [f64]) {
        for (row, &(k, a)) in out.chunks_exact_mut(gs).zip(&self.cells) {
            let lo = &surface[k * gs..(k + 1) * gs];
            let hi = &surface[(k + 1) * gs..(k + 2) * gs];
            for ((o, l), h) in row.iter_mut().zip(lo).zip(hi) {
                *o = (1.0 - a) * l + a * h;
            }
        }
    }
}

/// `m̂⁻¹(t | z, x) = ψ⁻¹(ĝ0 + Σ ĝ_j(t, x_j) + ĝ_z(t, z))`, using the arm's mean
/// anchor. Covariates outside the fitted range are clamped to it.
pub fn predict_quantile(fit: &AdditiveMediatorFit, treated: bool, x: &[f64]) -> Result<QuantileFunction> {
    fit.check_covariates(x)?;
    let mean = fit.transform_mean(treated, x);
    crate::distribution::lqd_inverse(&LqdFunction::new(fit.grid, mean, fit.anchors[treated as usize])?)
}

/// Estimated treatment effect on the mediator's quantile function, E(α(t, X)).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AlphaCurve {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Average over units of `m̂⁻¹(t | 1, x_i) − m̂⁻¹(t | 0, x_i)`.
pub fn estimate_alpha(fit: &AdditiveMediatorFit, data: &MediatorDataset) -> Result<AlphaCurve> {
    fit.grid.check_same(&data.grid)?;
    if data.covariate_count != fit.covariates.len() {
        return Err(invalid_input("covariate count differs between fit and data"));
    }
    let gs = fit.grid.size();
    let scale = [
        fit.treatment[0].iter().map(|v| libm::exp(*v)).collect::<Vec<_>>(),
        fit.treatment[1].iter().map(|v| libm::exp(*v)).collect::<Vec<_>>(),
    ];
    let mut acc = vec![0.0; gs];
    let mut dens = vec![0.0; gs];
    let mut q1 = vec![0.0; gs];
    let mut q0 = vec![0.0; gs];
    for i in 0..data.len() {
        let base = fit.base_curve(data.covariates(i));
        let base_exp: Vec<f64> = base.iter().map(|v| libm::exp(*v)).collect();
        for arm in [0, 1] {
            for ((d, b), s) in dens.iter_mut().zip(&base_exp).zip(&scale[arm]) {
                *d = b * s;
            }
            let out = if arm == 1 { &mut q1 } else { &mut q0 };
            integrate_density(&dens, fit.anchors[arm], fit.grid, out)?;
        }
        for ((a, x1), x0) in acc.iter_mut().zip(&q1).zip(&q0) {
            *a += x1 - x0;
        }
    }
    let n = data.len() as f64;
    Ok(AlphaCurve { grid: fit.grid, values: acc.into_iter().map(|v| v / n).collect() })
}

/// Fitted mediator means `m̂⁻¹(t | z_i, x_i)` for every unit.
pub fn fitted_quantiles(fit: &AdditiveMediatorFit, data: &MediatorDataset) -> Result<Vec<Vec<f64>>> {
    fit.grid.check_same(&data.grid)?;
    (0..data.len())
        .map(|i| predict_quantile(fit, data.treated(i), data.covariates(i)).map(QuantileFunction::into_values))
        .collect()
}

/// Mediator residuals on the quantile scale, `M_i(t) − m̂⁻¹(t | z_i, x_i)`.
pub fn residuals(fit: &AdditiveMediatorFit, data: &MediatorDataset) -> Result<Vec<Vec<f64>>> {
    let fitted = fitted_quantiles(fit, data)?;
    Ok(fitted
        .into_iter()
        .enumerate()
        .map(|(i, f)| data.quantile(i).iter().zip(f).map(|(m, f)| m - f).collect())
        .collect())
}
