//! Scalar-on-function outcome regression
//! `Y = δ₂ + γZ + ξᵀX + ∫β(t)M⁻¹(t)dt + η` with β expanded in a basis.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::basis::BasisSet;
use crate::distribution::QuantileFunction;
use crate::error::{invalid_input, Result};
use crate::linalg::LeastSquares;

/// `Λ_k = ∫ φ_k(t) q(t) dt` for every basis function.
pub fn compute_loadings(q: &QuantileFunction, basis: &BasisSet) -> Result<Vec<f64>> {
    basis.grid().check_same(&q.grid())?;
    Ok(loadings_of(q.values(), basis))
}

pub(crate) fn loadings_of(values: &[f64], basis: &BasisSet) -> Vec<f64> {
    (0..basis.size()).map(|k| basis.grid().inner(basis.function(k), values)).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OutcomeFit {
    pub delta2: f64,
    pub gamma: f64,
    pub xi: Vec<f64>,
    /// Basis coefficients of β.
    pub b: Vec<f64>,
    pub beta_curve: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Standard deviation of the residuals (divisor n − 1).
    pub sigma1: f64,
    /// Condition number of the equilibrated `GᵀG`.
    pub condition: f64,
}

pub(crate) fn design_names(d: usize, k: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(2 + d + k);
    names.push(String::from("intercept"));
    names.push(String::from("z"));
    names.extend((1..=d).map(|j| format!("x{j}")));
    names.extend((1..=k).map(|j| format!("phi{j}")));
    names
}

/// Ordinary least squares on the design `[1, Z, X, Λ]`.
///
/// `x` is row-major `n × d` and `loadings` row-major `n × K`.
pub fn fit_outcome(y: &[f64], z: &[bool], x: &[f64], loadings: &[f64], basis: &BasisSet) -> Result<OutcomeFit> {
    let n = y.len();
    let k = basis.size();
    if z.len() != n || loadings.len() != n * k {
        return Err(invalid_input("outcome, treatment and loadings disagree on the number of units"));
    }
    if n == 0 || x.len() % n != 0 {
        return Err(invalid_input("covariate matrix is not n × d"));
    }
    let d = x.len() / n;
    let p = 2 + d + k;
    if n <= p {
        return Err(invalid_input(format!("{n} units cannot support {p} outcome coefficients")));
    }
    if y.iter().chain(x).chain(loadings).any(|v| !v.is_finite()) {
        return Err(invalid_input("outcome regression inputs must be finite"));
    }
    let mut design = Vec::with_capacity(n * p);
    for i in 0..n {
        design.push(1.0);
        design.push(if z[i] { 1.0 } else { 0.0 });
        design.extend_from_slice(&x[i * d..(i + 1) * d]);
        design.extend_from_slice(&loadings[i * k..(i + 1) * k]);
    }
    let ls = LeastSquares::new(&design, n, &design_names(d, k))?;
    let coef = ls.coefficients(y);
    let residuals = ls.residuals(y);
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let ss = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
    let b = coef[2 + d..].to_vec();
    Ok(OutcomeFit {
        delta2: coef[0],
        gamma: coef[1],
        xi: coef[2..2 + d].to_vec(),
        beta_curve: basis.expand(&b),
        b,
        residuals,
        sigma1: libm::sqrt(ss / (n - 1) as f64),
        condition: ls.condition(),
    })
}

/// `β(t) = Σ_k b_k φ_k(t)` on the basis grid.
pub fn beta_on_grid(fit: &OutcomeFit, basis: &BasisSet) -> Result<Vec<f64>> {
    if fit.b.len() != basis.size() {
        return Err(invalid_input(format!(
            "fit has {} basis coefficients, basis has {}",
            fit.b.len(),
            basis.size()
        )));
    }
    Ok(basis.expand(&fit.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisConfig, BasisKind};
    use crate::distribution::{lqd_inverse, Grid, LqdFunction};
    use crate::error::Error;
    use alloc::vec;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid() -> Grid {
        Grid::new(100).unwrap()
    }

    #[test]
    fn loadings_examples() {
        let g = grid();
        let poly = BasisSet::new(&BasisConfig { kind: BasisKind::Polynomial, size: 2 }, g).unwrap();
        let zero = QuantileFunction::from_fn(g, |_| 0.0).unwrap();
        assert_eq!(compute_loadings(&zero, &poly).unwrap(), vec![0.0, 0.0]);
        let one = QuantileFunction::from_fn(g, |_| 1.0).unwrap();
        assert!((compute_loadings(&one, &poly).unwrap()[0] - 1.0).abs() <= 1e-12);
        // √3(2t − 1) and 1 give t = (φ₂/√3 + φ₁)/2
        let id = QuantileFunction::from_fn(g, |t| t).unwrap();
        let l = compute_loadings(&id, &poly).unwrap();
        let t_t = (l[1] / libm::sqrt(3.0) + l[0]) / 2.0;
        assert!((t_t - 1.0 / 3.0).abs() <= 1e-4);
        let other = QuantileFunction::from_fn(Grid::new(10).unwrap(), |t| t).unwrap();
        assert!(matches!(compute_loadings(&other, &poly), Err(Error::GridMismatch { .. })));
    }

    struct Synthetic {
        y: Vec<f64>,
        z: Vec<bool>,
        x: Vec<f64>,
        loadings: Vec<f64>,
        quantiles: Vec<QuantileFunction>,
    }

    /// Sim-4 style cohort; `noise` scales η.
    fn synthetic(n: usize, seed: u64, noise: f64, basis: &BasisSet) -> Synthetic {
        let g = basis.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Synthetic { y: vec![], z: vec![], x: vec![], loadings: vec![], quantiles: vec![] };
        for i in 0..n {
            let x1 = 10.0 + rng.sample::<f64, _>(StandardNormal);
            let x2 = 12.0 + rng.sample::<f64, _>(StandardNormal);
            let (e1, e2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let z = i % 2 == 0;
            let vals = g
                .points()
                .into_iter()
                .map(|t| {
                    -libm::cos(2.0 * core::f64::consts::PI * t) / 2.0 + x1 * t * t - x2 * t + 5.0
                        - if z { 2.0 * t } else { 0.0 }
                        + e1 * libm::sin(core::f64::consts::PI * t)
                        + e2 * libm::sin(2.0 * core::f64::consts::PI * t)
                })
                .collect();
            let q = lqd_inverse(&LqdFunction::new(g, vals, 0.0).unwrap()).unwrap();
            let eta: f64 = rng.sample(StandardNormal);
            let integral = g.integrate(&q.values().iter().zip(g.points()).map(|(v, t)| v * t).collect::<Vec<_>>());
            out.y.push(0.05 * x1 - 0.05 * x2 + if z { 1.0 } else { 0.0 } + integral + noise * eta);
            out.z.push(z);
            out.x.extend([x1, x2]);
            out.loadings.extend(compute_loadings(&q, basis).unwrap());
            out.quantiles.push(q);
        }
        out
    }

    #[test]
    fn zero_outcome_gives_zero_coefficients() {
        let basis = BasisSet::new(&BasisConfig::default(), grid()).unwrap();
        let s = synthetic(40, 1, 0.0, &basis);
        let fit = fit_outcome(&vec![0.0; 40], &s.z, &s.x, &s.loadings, &basis).unwrap();
        assert!(fit.b.iter().chain(&fit.xi).chain([&fit.delta2, &fit.gamma]).all(|&c| c == 0.0));
        assert!(beta_on_grid(&fit, &basis).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noiseless_recovery() {
        let poly = BasisSet::new(&BasisConfig { kind: BasisKind::Polynomial, size: 2 }, grid()).unwrap();
        let s = synthetic(60, 2, 0.0, &poly);
        // the response is built with ∫t M dt by quadrature, which the
        // two-function Legendre basis spans exactly: t = φ₁/2 + φ₂/(2√3)
        let y: Vec<f64> = (0..60)
            .map(|i| {
                1.0 + if s.z[i] { 1.0 } else { 0.0 } + 0.05 * s.x[2 * i] - 0.05 * s.x[2 * i + 1]
                    + 0.5 * s.loadings[2 * i]
                    + s.loadings[2 * i + 1] / (2.0 * libm::sqrt(3.0))
            })
            .collect();
        let fit = fit_outcome(&y, &s.z, &s.x, &s.loadings, &poly).unwrap();
        assert!((fit.delta2 - 1.0).abs() <= 1e-8, "{}", fit.delta2);
        assert!((fit.gamma - 1.0).abs() <= 1e-8);
        assert!((fit.xi[0] - 0.05).abs() <= 1e-8 && (fit.xi[1] + 0.05).abs() <= 1e-8);
        for (b, t) in fit.beta_curve.iter().zip(grid().points()) {
            assert!((b - t).abs() <= 1e-8);
        }
        assert!(fit.sigma1 <= 1e-8);
        let recomputed = beta_on_grid(&fit, &poly).unwrap();
        assert!(recomputed.iter().zip(&fit.beta_curve).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn normal_equations_and_scaling() {
        let basis = BasisSet::new(&BasisConfig::default(), grid()).unwrap();
        let s = synthetic(80, 3, 0.05, &basis);
        let fit = fit_outcome(&s.y, &s.z, &s.x, &s.loadings, &basis).unwrap();
        let mean = fit.residuals.iter().sum::<f64>() / 80.0;
        assert!(mean.abs() <= 1e-10);
        let p = 2 + 2 + basis.size();
        let mut rows = Vec::new();
        for i in 0..80 {
            rows.extend([1.0, if s.z[i] { 1.0 } else { 0.0 }]);
            rows.extend_from_slice(&s.x[2 * i..2 * i + 2]);
            rows.extend_from_slice(&s.loadings[i * basis.size()..(i + 1) * basis.size()]);
        }
        let gm = DMatrix::from_row_slice(80, p, &rows);
        let grad = gm.tr_mul(&nalgebra::DVector::from_column_slice(&fit.residuals));
        for (j, col) in gm.column_iter().enumerate() {
            let scale = col.norm() * libm::sqrt(s.y.iter().map(|v| v * v).sum::<f64>());
            assert!(grad[j].abs() <= 1e-8 * scale, "column {j}");
        }

        let scaled: Vec<f64> = s.y.iter().map(|v| -3.5 * v).collect();
        let fit2 = fit_outcome(&scaled, &s.z, &s.x, &s.loadings, &basis).unwrap();
        let pairs = [(fit.delta2, fit2.delta2), (fit.gamma, fit2.gamma)];
        for (a, b) in pairs.into_iter().chain(fit.xi.iter().copied().zip(fit2.xi.iter().copied())).chain(fit.b.iter().copied().zip(fit2.b.iter().copied())) {
            assert!((b + 3.5 * a).abs() <= 1e-10 * (1.0 + a.abs()), "{a} {b}");
        }
    }

    #[test]
    fn mediator_shift_moves_only_intercept() {
        let basis = BasisSet::new(&BasisConfig::default(), grid()).unwrap();
        let s = synthetic(80, 4, 0.05, &basis);
        let fit = fit_outcome(&s.y, &s.z, &s.x, &s.loadings, &basis).unwrap();
        let c = 2.5;
        let shifted: Vec<f64> = s
            .quantiles
            .iter()
            .flat_map(|q| compute_loadings(&q.shifted(c), &basis).unwrap())
            .collect();
        let fit2 = fit_outcome(&s.y, &s.z, &s.x, &shifted, &basis).unwrap();
        let beta_int = grid().integrate(&fit.beta_curve);
        assert!((fit2.delta2 - (fit.delta2 - c * beta_int)).abs() <= 1e-6);
        assert!((fit2.gamma - fit.gamma).abs() <= 1e-8);
        for (a, b) in fit.b.iter().zip(&fit2.b) {
            assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn rejects_bad_designs() {
        let basis = BasisSet::new(&BasisConfig::default(), grid()).unwrap();
        let s = synthetic(2 + 2 + basis.size(), 5, 0.05, &basis);
        assert!(matches!(fit_outcome(&s.y, &s.z, &s.x, &s.loadings, &basis), Err(Error::InvalidInput(_))));
        let s = synthetic(30, 5, 0.05, &basis);
        let dup: Vec<f64> = (0..30).flat_map(|i| [s.x[2 * i], s.x[2 * i]]).collect();
        match fit_outcome(&s.y, &s.z, &dup, &s.loadings, &basis) {
            Err(Error::SingularDesign { columns, .. }) => {
                assert!(columns.contains(&String::from("x1")) && columns.contains(&String::from("x2")))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simulation_four_recovery() {
        let basis = BasisSet::new(&BasisConfig::default(), grid()).unwrap();
        let runs = 500;
        let mut ok = 0;
        for seed in 0..runs {
            let s = synthetic(300, 100 + seed, 0.05, &basis);
            let fit = fit_outcome(&s.y, &s.z, &s.x, &s.loadings, &basis).unwrap();
            let sup = fit.beta_curve.iter().zip(grid().points()).map(|(b, t)| (b - t).abs()).fold(0.0, f64::max);
            if (fit.gamma - 1.0).abs() <= 0.05 && sup <= 0.15 {
                ok += 1;
            }
        }
        assert!(ok as f64 >= 0.95 * runs as f64, "{ok} of {runs}");
    }
}
