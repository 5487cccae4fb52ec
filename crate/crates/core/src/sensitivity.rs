//! Sensitivity of the indirect effect to correlation between the mediator
//! and outcome errors.
//!
//! With `ρ(t) = corr(ε(t), η)` the outcome coefficient solves
//!
//! ```text
//! ∫ β(u) Σ(u, t) du = cov(U, ε(t)) − σ₁ Σ(t, t)^{1/2} ρ(t)
//! ```
//!
//! where `U` is the outcome residual after removing the mediator mean part
//! and the direct and covariate effects. β, `U` and σ₁ depend on each other,
//! so the solution is found by fixed-point iteration started at the OLS fit.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::basis::BasisSet;
use crate::distribution::Grid;
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::linalg::{solve_spd, LeastSquares};
use crate::mediation::{PipelineFit, PreparedData};
use crate::mediator::fitted_quantiles;

/// Empirical covariance `Σ(u, v)` of residual curves, row-major `G × G`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CovSurface {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl CovSurface {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.grid.size() + v]
    }

    pub fn trace(&self) -> f64 {
        (0..self.grid.size()).map(|g| self.get(g, g)).sum()
    }

    /// Eigenvalues of the covariance operator `f ↦ ∫Σ(·, u)f(u)du`, in
    /// descending order.
    pub fn operator_eigenvalues(&self) -> Vec<f64> {
        let n = self.grid.size();
        let m = DMatrix::from_row_slice(n, n, &self.values) * self.grid.spacing();
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Number of operator eigenvalues above `1e-8` times the largest.
    pub fn effective_rank(&self) -> usize {
        let ev = self.operator_eigenvalues();
        let top = ev.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        ev.iter().filter(|&&e| e > 1e-8 * top).count()
    }
}

/// Centred sample covariance (divisor n − 1) of residual curves, symmetrized.
pub fn estimate_cov_surface(residuals: &[Vec<f64>], grid: Grid) -> Result<CovSurface> {
    let n = residuals.len();
    if n < 2 {
        return Err(invalid_input("covariance surface needs at least two residual curves"));
    }
    let gs = grid.size();
    for r in residuals {
        grid.check_len(r.len())?;
    }
    let mut mean = vec![0.0; gs];
    for r in residuals {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let mut values = vec![0.0; gs * gs];
    let mut centred = vec![0.0; gs];
    for r in residuals {
        for ((c, v), m) in centred.iter_mut().zip(r).zip(&mean) {
            *c = v - m;
        }
        for u in 0..gs {
            let cu = centred[u];
            let row = &mut values[u * gs..(u + 1) * gs];
            for (o, cv) in row[u..].iter_mut().zip(&centred[u..]) {
                *o += cu * cv;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for u in 0..gs {
        for v in u..gs {
            let x = values[u * gs + v] * scale;
            values[u * gs + v] = x;
            values[v * gs + u] = x;
        }
    }
    Ok(CovSurface { grid, values })
}

/// Sensitivity parameter `ρ(t)` on the grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RhoProfile {
    grid: Grid,
    values: Vec<f64>,
}

impl RhoProfile {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(invalid_input(format!("correlation {v} outside [-1, 1]")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, rho: f64) -> Result<Self> {
        Self::new(grid, vec![rho; grid.size()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SensitivityConfig {
    /// Relative L² change in β at which the iteration stops.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Weight of the previous β in each update; 0 means no damping.
    pub damping: f64,
    /// Ridge parameter as a multiple of `trace(Σ)/G`.
    pub ridge_scale: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iter: 100, damping: 0.0, ridge_scale: 1e-6 }
    }
}

impl SensitivityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(invalid_config("sensitivity tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid_config("sensitivity max_iter must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(invalid_config("damping must lie in [0, 1)"));
        }
        if !(self.ridge_scale >= 0.0) {
            return Err(invalid_config("ridge_scale must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SensitivityResult {
    pub rho: RhoProfile,
    pub b: Vec<f64>,
    pub beta_rho: Vec<f64>,
    pub indirect_total_rho: f64,
    pub sigma1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Effective rank of Σ; β is identified only on its range.
    pub effective_rank: usize,
}

/// Quantities shared by every ρ profile: residual curves, Σ, the Step-4
/// operator and the regression of the adjusted outcome on `(1, Z, X)`.
#[derive(Debug, Clone)]
pub struct SensitivityProblem {
    basis: BasisSet,
    cov: CovSurface,
    outcome: Vec<f64>,
    /// Fitted mediator means `m̂_i`, row-major `n × G`.
    fitted: Vec<f64>,
    /// Residual curves `ε_i`, row-major `n × G`.
    residuals: Vec<f64>,
    alpha: Vec<f64>,
    initial_beta: Vec<f64>,
    regression: LeastSquares,
    /// Regularized least-squares solution map, row-major `K × G`.
    solver: Vec<f64>,
    sd_diag: Vec<f64>,
    effective_rank: usize,
}

impl SensitivityProblem {
    /// `alpha` is the estimated `E(α(t, X))` used for the indirect effect.
    pub fn new(data: &PreparedData, fit: &PipelineFit, alpha: &[f64], config: &SensitivityConfig) -> Result<Self> {
        config.validate()?;
        let md = data.mediator();
        let grid = md.grid();
        let gs = grid.size();
        grid.check_len(alpha.len())?;
        let n = md.len();
        let fitted_rows = fitted_quantiles(&fit.mediator, md)?;
        let mut fitted = Vec::with_capacity(n * gs);
        let mut residuals = Vec::with_capacity(n * gs);
        let mut residual_rows = Vec::with_capacity(n);
        for (i, f) in fitted_rows.iter().enumerate() {
            let r: Vec<f64> = md.quantile(i).iter().zip(f).map(|(m, f)| m - f).collect();
            fitted.extend_from_slice(f);
            residuals.extend_from_slice(&r);
            residual_rows.push(r);
        }
        let cov = estimate_cov_surface(&residual_rows, grid)?;
        let trace = cov.trace();
        let scale: f64 = (0..n).map(|i| grid.inner(md.quantile(i), md.quantile(i))).sum::<f64>() / n as f64;
        if !(trace > 1e-20 * gs as f64 * (1.0 + scale)) {
            return Err(Error::Degenerate(String::from(
                "mediator residual covariance is zero; the sensitivity equation has no information",
            )));
        }

        let d = md.covariate_count();
        let mut design = Vec::with_capacity(n * (2 + d));
        for i in 0..n {
            design.push(1.0);
            design.push(if md.treated(i) { 1.0 } else { 0.0 });
            design.extend_from_slice(md.covariates(i));
        }
        let names = crate::outcome::design_names(d, 0);
        let regression = LeastSquares::new(&design, n, &names)?;

        let basis = data.basis().clone();
        let k = basis.size();
        let dt = grid.spacing();
        // A[g, k] = ∫Σ(t_g, u)φ_k(u)du
        let mut operator = vec![0.0; gs * k];
        for g in 0..gs {
            let row = &cov.values[g * gs..(g + 1) * gs];
            for j in 0..k {
                operator[g * k + j] = dt * row.iter().zip(basis.function(j)).map(|(s, p)| s * p).sum::<f64>();
            }
        }
        // b = P r with P the pseudo-inverse of [A; λΦᵀ] restricted to the
        // first G rows, precomputed so Step 4 is one matrix-vector product
        let lambda = config.ridge_scale * trace / gs as f64;
        let mut stacked = DMatrix::<f64>::zeros(2 * gs, k);
        for g in 0..gs {
            for j in 0..k {
                stacked[(g, j)] = operator[g * k + j];
                stacked[(gs + g, j)] = lambda * basis.function(j)[g];
            }
        }
        let svd = stacked.svd(true, true);
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        if !(top > 0.0) {
            return Err(Error::Degenerate(String::from("Step-4 operator is zero")));
        }
        let (u_mat, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
        let mut solver = vec![0.0; k * gs];
        for (r, &sv) in svd.singular_values.iter().enumerate() {
            if sv <= 1e-14 * top {
                continue;
            }
            for j in 0..k {
                let w = v_t[(r, j)] / sv;
                for g in 0..gs {
                    solver[j * gs + g] += w * u_mat[(g, r)];
                }
            }
        }
        let sd_diag = (0..gs).map(|g| libm::sqrt(cov.get(g, g).max(0.0))).collect();
        let effective_rank = cov.effective_rank();
        Ok(Self {
            basis,
            cov,
            outcome: data.outcome().to_vec(),
            fitted,
            residuals,
            alpha: alpha.to_vec(),
            initial_beta: fit.outcome.beta_curve.clone(),
            regression,
            solver,
            sd_diag,
            effective_rank,
        })
    }

    pub fn cov(&self) -> &CovSurface {
        &self.cov
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn initial_beta(&self) -> &[f64] {
        &self.initial_beta
    }

    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    fn grid(&self) -> Grid {
        self.cov.grid
    }

    /// Steps 2 and 3: outcome residuals `U` and `σ₁` for the current β.
    pub fn outcome_residuals(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let grid = self.grid();
        let gs = grid.size();
        let adjusted: Vec<f64> = self
            .outcome
            .iter()
            .enumerate()
            .map(|(i, y)| y - grid.inner(beta, &self.fitted[i * gs..(i + 1) * gs]))
            .collect();
        let u = self.regression.residuals(&adjusted);
        let eta: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, ui)| ui - grid.inner(beta, &self.residuals[i * gs..(i + 1) * gs]))
            .collect();
        let n = eta.len() as f64;
        let mean = eta.iter().sum::<f64>() / n;
        let sigma1 = libm::sqrt(eta.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0));
        (u, sigma1)
    }

    /// Step 4: basis coefficients solving the regularized integral equation
    /// for given `U`, `σ₁` and ρ. Affine in ρ.
    pub fn step4_coefficients(&self, u: &[f64], sigma1: f64, rho: &RhoProfile) -> Result<Vec<f64>> {
        let gs = self.grid().size();
        let k = self.basis.size();
        let n = u.len();
        let u_mean = u.iter().sum::<f64>() / n as f64;
        let mut rhs = vec![0.0; gs];
        for i in 0..n {
            let du = u[i] - u_mean;
            for (r, e) in rhs.iter_mut().zip(&self.residuals[i * gs..(i + 1) * gs]) {
                *r += du * e;
            }
        }
        // ε has mean zero by construction only approximately; centre it
        let mut e_mean = vec![0.0; gs];
        for row in self.residuals.chunks_exact(gs) {
            for (m, e) in e_mean.iter_mut().zip(row) {
                *m += e;
            }
        }
        let sum_du: f64 = u.iter().map(|x| x - u_mean).sum();
        for g in 0..gs {
            let c = (rhs[g] - sum_du * e_mean[g] / n as f64) / (n - 1) as f64;
            rhs[g] = c - sigma1 * self.sd_diag[g] * rho.values[g];
        }
        Ok(self.solver.chunks_exact(gs).take(k).map(|row| row.iter().zip(&rhs).map(|(p, r)| p * r).sum()).collect())
    }

    /// One pass of Steps 2 to 4 from `beta`, returning the new coefficients.
    pub fn iterate_once(&self, beta: &[f64], rho: &RhoProfile) -> Result<Vec<f64>> {
        let (u, sigma1) = self.outcome_residuals(beta);
        self.step4_coefficients(&u, sigma1, rho)
    }

    fn check_rho(&self, rho: &RhoProfile) -> Result<()> {
        self.grid().check_same(&rho.grid)
    }
}

fn l2(grid: Grid, v: &[f64]) -> f64 {
    libm::sqrt(grid.inner(v, v))
}

/// Iterates Steps 2 to 5 from the OLS β until the relative L² change is at
/// most the tolerance. Non-convergence is reported, not an error.
pub fn solve_beta_rho(problem: &SensitivityProblem, rho: &RhoProfile, config: &SensitivityConfig) -> Result<SensitivityResult> {
    config.validate()?;
    problem.check_rho(rho)?;
    let grid = problem.grid();
    let mut beta = problem.initial_beta.clone();
    let mut b = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=config.max_iter {
        iterations = iter;
        let new_b = problem.iterate_once(&beta, rho)?;
        let mut new_beta = problem.basis.expand(&new_b);
        if config.damping > 0.0 && iter > 1 {
            for (n, o) in new_beta.iter_mut().zip(&beta) {
                *n = (1.0 - config.damping) * *n + config.damping * o;
            }
        }
        let diff: Vec<f64> = new_beta.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let change = l2(grid, &diff) / l2(grid, &new_beta).max(f64::MIN_POSITIVE);
        b = new_b;
        beta = new_beta;
        if change <= config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("sensitivity iteration did not converge in {} iterations", config.max_iter);
    }
    if config.damping > 0.0 {
        // report coefficients that reproduce the damped curve
        b = project_onto_basis(&problem.basis, &beta).unwrap_or(b);
    }
    let (_, sigma1) = problem.outcome_residuals(&beta);
    let indirect: Vec<f64> = beta.iter().zip(&problem.alpha).map(|(x, a)| x * a).collect();
    Ok(SensitivityResult {
        rho: rho.clone(),
        b,
        indirect_total_rho: grid.integrate(&indirect),
        beta_rho: beta,
        sigma1,
        iterations,
        converged,
        effective_rank: problem.effective_rank,
    })
}

fn project_onto_basis(basis: &BasisSet, curve: &[f64]) -> Option<Vec<f64>> {
    let k = basis.size();
    let grid = basis.grid();
    let rhs: Vec<f64> = (0..k).map(|j| grid.inner(basis.function(j), curve)).collect();
    solve_spd(&basis.gram(), &rhs)
}

/// One solve per constant-in-t correlation in `rho_values`.
pub fn sensitivity_sweep(
    problem: &SensitivityProblem,
    rho_values: &[f64],
    config: &SensitivityConfig,
) -> Result<Vec<SensitivityResult>> {
    rho_values
        .iter()
        .map(|&r| solve_beta_rho(problem, &RhoProfile::constant(problem.grid(), r)?, config))
        .collect()
}
