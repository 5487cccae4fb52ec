//! Effect decomposition and cluster bootstrap inference.
//!
//! The total effect of treatment on the outcome splits into the direct
//! effect γ and the indirect effect `∫β(t)E(α(t, X))dt`. Inference resamples
//! clusters (subjects) with replacement and refits the whole pipeline on
//! every replicate.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{BasisConfig, BasisSet};
use crate::distribution::{Grid, LqdConfig, QuantileFunction};
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::mediator::{estimate_alpha, fit_additive, AdditiveMediatorFit, FitDiagnostics, MediatorDataset, SmootherConfig};
use crate::outcome::{fit_outcome, loadings_of, OutcomeFit};

/// Smallest bootstrap size accepted by [`bootstrap_infer`].
pub const MIN_REPLICATES: usize = 100;
/// Largest fraction of bootstrap replicates that may be discarded.
pub const MAX_DISCARD_FRACTION: f64 = 0.1;

/// Observed units: a quantile-function mediator, covariates, a binary
/// treatment and a scalar outcome. Units belong to clusters (subjects); with
/// one unit per subject every cluster is a singleton.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AnalysisDataset {
    grid: Grid,
    mediators: Vec<QuantileFunction>,
    covariates: Vec<f64>,
    covariate_names: Vec<String>,
    treated: Vec<bool>,
    outcome: Vec<f64>,
    clusters: Vec<Vec<usize>>,
}

impl AnalysisDataset {
    /// `covariates` is row-major `n × covariate_names.len()`. `clusters`
    /// gives a cluster label per unit; `None` makes every unit its own
    /// cluster.
    pub fn new(
        mediators: Vec<QuantileFunction>,
        covariates: Vec<f64>,
        covariate_names: Vec<String>,
        treated: Vec<bool>,
        outcome: Vec<f64>,
        clusters: Option<&[usize]>,
    ) -> Result<Self> {
        let n = mediators.len();
        let grid = mediators.first().ok_or_else(|| invalid_input("dataset has no units"))?.grid();
        for m in &mediators {
            grid.check_same(&m.grid())?;
        }
        let d = covariate_names.len();
        if covariates.len() != n * d {
            return Err(invalid_input(format!(
                "covariate matrix has {} entries, expected {n} × {d}",
                covariates.len()
            )));
        }
        if treated.len() != n || outcome.len() != n {
            return Err(invalid_input("treatment, outcome and mediator counts differ"));
        }
        if let Some(i) = outcome.iter().position(|y| !y.is_finite()) {
            return Err(invalid_input(format!("outcome of unit {i} is not finite")));
        }
        if covariates.iter().any(|x| !x.is_finite()) {
            return Err(invalid_input("covariates must be finite"));
        }
        let clusters = match clusters {
            None => (0..n).map(|i| vec![i]).collect(),
            Some(labels) => {
                if labels.len() != n {
                    return Err(invalid_input("cluster labels do not match the number of units"));
                }
                let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
                for (i, &c) in labels.iter().enumerate() {
                    match groups.iter_mut().find(|(l, _)| *l == c) {
                        Some((_, g)) => g.push(i),
                        None => groups.push((c, vec![i])),
                    }
                }
                for (label, g) in &groups {
                    if g.iter().any(|&i| treated[i] != treated[g[0]]) {
                        return Err(invalid_input(format!("cluster {label} mixes treatment arms")));
                    }
                }
                groups.into_iter().map(|(_, g)| g).collect()
            }
        };
        Ok(Self { grid, mediators, covariates, covariate_names, treated, outcome, clusters })
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

    pub fn mediators(&self) -> &[QuantileFunction] {
        &self.mediators
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    /// Unit indices of each cluster.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    /// Copy with every treatment label flipped.
    pub fn with_flipped_treatment(&self) -> Self {
        let mut out = self.clone();
        out.treated.iter_mut().for_each(|z| *z = !*z);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    pub lqd: LqdConfig,
    pub smoother: SmootherConfig,
    pub basis: BasisConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.lqd.validate()?;
        self.smoother.validate()?;
        self.basis.validate()
    }
}

/// Per-unit quantities that do not change across bootstrap replicates: the
/// transformed mediators and the basis loadings.
#[derive(Debug, Clone)]
pub struct PreparedData {
    mediator: MediatorDataset,
    loadings: Vec<f64>,
    outcome: Vec<f64>,
    clusters: Vec<Vec<usize>>,
    basis: BasisSet,
}

impl PreparedData {
    pub fn new(data: &AnalysisDataset, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let basis = BasisSet::new(&config.basis, data.grid)?;
        let mediator = MediatorDataset::new(&data.mediators, &data.covariates, &data.treated, &config.lqd)?;
        let loadings = data.mediators.iter().flat_map(|m| loadings_of(m.values(), &basis)).collect();
        Ok(Self { mediator, loadings, outcome: data.outcome.clone(), clusters: data.clusters.clone(), basis })
    }

    pub fn mediator(&self) -> &MediatorDataset {
        &self.mediator
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn loadings(&self) -> &[f64] {
        &self.loadings
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Dataset made of the listed clusters (repeats allowed); each copy of a
    /// cluster becomes a new cluster.
    pub fn resample(&self, clusters: &[usize]) -> Self {
        let k = self.basis.size();
        let mut rows = Vec::new();
        let mut new_clusters = Vec::with_capacity(clusters.len());
        for &c in clusters {
            let start = rows.len();
            rows.extend_from_slice(&self.clusters[c]);
            new_clusters.push((start..rows.len()).collect());
        }
        let mut loadings = Vec::with_capacity(rows.len() * k);
        for &i in &rows {
            loadings.extend_from_slice(&self.loadings[i * k..(i + 1) * k]);
        }
        Self {
            mediator: self.mediator.gather(&rows),
            loadings,
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
            clusters: new_clusters,
            basis: self.basis.clone(),
        }
    }
}

/// Mediator and outcome fits on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFit {
    pub mediator: AdditiveMediatorFit,
    pub outcome: OutcomeFit,
}

pub fn fit_pipeline(data: &PreparedData, smoother: &SmootherConfig) -> Result<PipelineFit> {
    let mediator = fit_additive(&data.mediator, smoother)?;
    let outcome = fit_outcome(
        &data.outcome,
        data.mediator.treatment(),
        data.mediator.covariate_matrix(),
        &data.loadings,
        &data.basis,
    )?;
    Ok(PipelineFit { mediator, outcome })
}

/// Bootstrap results attached to a report.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Inference {
    pub p_global: f64,
    pub p_pointwise: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    /// Percentile interval for the total indirect effect.
    pub indirect_total_ci: [f64; 2],
    /// Replicates requested.
    pub replicates: usize,
    /// Replicates discarded (single-arm resamples or failed fits).
    pub discarded: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MediationReport {
    pub grid: Grid,
    pub gamma: f64,
    pub alpha_curve: Vec<f64>,
    pub beta_curve: Vec<f64>,
    pub indirect_curve: Vec<f64>,
    pub indirect_total: f64,
    pub total_effect: f64,
    pub mediator_diagnostics: FitDiagnostics,
    pub outcome_condition: f64,
    pub inference: Option<Inference>,
}

/// Point estimates of the effect decomposition, with α̂ averaged over the
/// covariates of `data`.
pub fn decompose(med_fit: &AdditiveMediatorFit, out_fit: &OutcomeFit, data: &MediatorDataset) -> Result<MediationReport> {
    let grid = med_fit.grid;
    grid.check_len(out_fit.beta_curve.len())?;
    let alpha = estimate_alpha(med_fit, data)?;
    let indirect_curve: Vec<f64> = alpha.values.iter().zip(&out_fit.beta_curve).map(|(a, b)| a * b).collect();
    let indirect_total = grid.integrate(&indirect_curve);
    Ok(MediationReport {
        grid,
        gamma: out_fit.gamma,
        alpha_curve: alpha.values,
        beta_curve: out_fit.beta_curve.clone(),
        indirect_curve,
        indirect_total,
        total_effect: out_fit.gamma + indirect_total,
        mediator_diagnostics: med_fit.diagnostics,
        outcome_condition: out_fit.condition,
        inference: None,
    })
}

/// Fits the pipeline and decomposes the effect.
pub fn estimate(data: &PreparedData, smoother: &SmootherConfig) -> Result<MediationReport> {
    let fit = fit_pipeline(data, smoother)?;
    decompose(&fit.mediator, &fit.outcome, &data.mediator)
}

/// Indirect-effect estimates from one bootstrap replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub indirect_curve: Vec<f64>,
    pub indirect_total: f64,
}

/// Random number stream of bootstrap replicate `index`.
pub fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Cluster indices drawn with replacement for replicate `index`.
pub fn resample_clusters(cluster_count: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut rng = replicate_rng(seed, index);
    (0..cluster_count).map(|_| rng.random_range(0..cluster_count)).collect()
}

/// Runs replicate `index`. `Ok(None)` marks a discarded replicate: a
/// resample with a single treatment arm or a failed refit.
pub fn run_replicate(data: &PreparedData, smoother: &SmootherConfig, seed: u64, index: usize) -> Result<Option<Replicate>> {
    let picks = resample_clusters(data.cluster_count(), seed, index);
    let sample = data.resample(&picks);
    let arms = sample.mediator.arm_sizes();
    if arms[0] == 0 || arms[1] == 0 {
        log::debug!("replicate {index}: single-arm resample discarded");
        return Ok(None);
    }
    match estimate(&sample, smoother) {
        Ok(r) => Ok(Some(Replicate { indirect_curve: r.indirect_curve, indirect_total: r.indirect_total })),
        Err(e) => {
            log::debug!("replicate {index} discarded: {e}");
            Ok(None)
        }
    }
}

/// Two-sided bootstrap p-value `2·#{ξ_b − ξ̂ ≥ ξ̂}/B` for `ξ̂ ≥ 0`, and the
/// mirrored count `#{ξ_b − ξ̂ ≤ ξ̂}` for `ξ̂ < 0`, clamped to [0, 1].
pub fn p_value(estimate: f64, replicates: &[f64]) -> f64 {
    if replicates.is_empty() {
        return 1.0;
    }
    let count = if estimate >= 0.0 {
        replicates.iter().filter(|&&x| x - estimate >= estimate).count()
    } else {
        replicates.iter().filter(|&&x| x - estimate <= estimate).count()
    };
    (2.0 * count as f64 / replicates.len() as f64).min(1.0)
}

/// Sample quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Combines replicate results with the point estimate. `results[b]` is the
/// outcome of replicate `b`.
pub fn summarize_bootstrap(mut report: MediationReport, results: &[Option<Replicate>], seed: u64) -> Result<MediationReport> {
    let total = results.len();
    let kept: Vec<&Replicate> = results.iter().flatten().collect();
    let discarded = total - kept.len();
    if discarded > 0 {
        log::info!("{discarded} of {total} bootstrap replicates discarded");
    }
    if kept.is_empty() || discarded as f64 > MAX_DISCARD_FRACTION * total as f64 {
        return Err(Error::ReplicateFailures { failed: discarded, total });
    }
    let gs = report.grid.size();
    let totals: Vec<f64> = kept.iter().map(|r| r.indirect_total).collect();
    let p_global = p_value(report.indirect_total, &totals);
    let mut sorted_totals = totals;
    sorted_totals.sort_by(f64::total_cmp);

    let mut p_pointwise = Vec::with_capacity(gs);
    let mut ci_lower = Vec::with_capacity(gs);
    let mut ci_upper = Vec::with_capacity(gs);
    let mut column = vec![0.0; kept.len()];
    for t in 0..gs {
        for (c, r) in column.iter_mut().zip(&kept) {
            *c = r.indirect_curve[t];
        }
        p_pointwise.push(p_value(report.indirect_curve[t], &column));
        column.sort_by(f64::total_cmp);
        ci_lower.push(percentile(&column, 0.025));
        ci_upper.push(percentile(&column, 0.975));
    }
    report.inference = Some(Inference {
        p_global,
        p_pointwise,
        ci_lower,
        ci_upper,
        indirect_total_ci: [percentile(&sorted_totals, 0.025), percentile(&sorted_totals, 0.975)],
        replicates: total,
        discarded,
        seed,
    });
    Ok(report)
}

/// Point estimates plus bootstrap inference with `replicates` cluster
/// resamples, run sequentially.
pub fn bootstrap_infer(data: &AnalysisDataset, config: &PipelineConfig, replicates: usize, seed: u64) -> Result<MediationReport> {
    check_replicates(replicates)?;
    let prepared = PreparedData::new(data, config)?;
    let report = estimate(&prepared, &config.smoother)?;
    let results = (0..replicates)
        .map(|b| run_replicate(&prepared, &config.smoother, seed, b))
        .collect::<Result<Vec<_>>>()?;
    summarize_bootstrap(report, &results, seed)
}

pub fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(invalid_config(format!("at least {MIN_REPLICATES} bootstrap replicates required, got {replicates}")));
    }
    Ok(())
}

/// Pointwise rejections `p(t) ≤ level`.
pub fn pointwise_null_test(report: &MediationReport, level: f64) -> Result<Vec<bool>> {
    let inference = report
        .inference
        .as_ref()
        .ok_or_else(|| invalid_input("report has no bootstrap inference"))?;
    Ok(inference.p_pointwise.iter().map(|&p| p <= level).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{lqd_inverse, LqdFunction};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn p_value_examples() {
        // ξ̂ = 1 with ten replicates at least 2
        let mut reps = vec![1.2; 490];
        reps.extend([2.0; 10]);
        assert_eq!(p_value(1.0, &reps), 2.0 * 10.0 / 500.0);
        assert_eq!(p_value(1.0, &reps), 0.04);
        let reps = vec![-0.6; 500];
        assert_eq!(p_value(-0.5, &reps), 0.0);
        // more than half the replicates beyond 2ξ̂ clamps to 1
        assert_eq!(p_value(0.0, &[0.0, 1.0, -1.0]), 1.0);
        let mut reps = vec![-1.1; 300];
        reps.extend([0.0; 200]);
        assert_eq!(p_value(-0.5, &reps), 1.0);
        assert_eq!(p_value(0.3, &[]), 1.0);
    }

    #[test]
    fn percentile_type_seven() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert!((percentile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((percentile(&v, 0.025) - 1.075).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn pointwise_thresholding() {
        let grid = Grid::new(10).unwrap();
        let mut report = MediationReport {
            grid,
            gamma: 0.0,
            alpha_curve: vec![0.0; 10],
            beta_curve: vec![0.0; 10],
            indirect_curve: vec![0.0; 10],
            indirect_total: 0.0,
            total_effect: 0.0,
            mediator_diagnostics: FitDiagnostics { iterations: 0, final_change: 0.0, converged: true, unconverged_points: 0 },
            outcome_condition: 1.0,
            inference: None,
        };
        assert!(pointwise_null_test(&report, 0.05).is_err());
        let p: Vec<f64> = grid.points().iter().map(|&t| if t > 0.2 && t < 0.4 { 0.01 } else { 1.0 }).collect();
        report.inference = Some(Inference {
            p_global: 1.0,
            p_pointwise: p,
            ci_lower: vec![0.0; 10],
            ci_upper: vec![0.0; 10],
            indirect_total_ci: [0.0, 0.0],
            replicates: 100,
            discarded: 0,
            seed: 0,
        });
        let rej = pointwise_null_test(&report, 0.05).unwrap();
        assert_eq!(rej, vec![false, false, true, true, false, false, false, false, false, false]);
        report.inference.as_mut().unwrap().p_pointwise = vec![1.0; 10];
        assert!(pointwise_null_test(&report, 0.05).unwrap().iter().all(|r| !r));
    }

    /// Small cohort shaped like the simulation designs, with the mediator
    /// affected by treatment and the outcome by the mediator.
    fn cohort(n: usize, seed: u64) -> AnalysisDataset {
        let grid = Grid::new(50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ms = Vec::new();
        let mut xs = Vec::new();
        let mut z = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let x1: f64 = rng.sample(StandardNormal);
            let (e1, e2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let treated = i % 2 == 0;
            let vals = grid
                .points()
                .into_iter()
                .map(|t| {
                    0.5 * x1 * t - if treated { t } else { 0.0 }
                        + 0.3 * e1 * libm::sin(core::f64::consts::PI * t)
                        + 0.3 * e2 * libm::sin(2.0 * core::f64::consts::PI * t)
                })
                .collect();
            let q = lqd_inverse(&LqdFunction::new(grid, vals, 0.0).unwrap()).unwrap();
            let eta: f64 = rng.sample(StandardNormal);
            let integral = grid.integrate(&q.values().iter().zip(grid.points()).map(|(v, t)| v * t).collect::<Vec<_>>());
            y.push(0.2 * x1 + if treated { 0.5 } else { 0.0 } + integral + 0.05 * eta);
            ms.push(q);
            xs.push(x1);
            z.push(treated);
        }
        AnalysisDataset::new(ms, xs, vec![String::from("x1")], z, y, None).unwrap()
    }

    #[test]
    fn decomposition_identities() {
        let data = cohort(60, 1);
        let cfg = PipelineConfig::default();
        let prepared = PreparedData::new(&data, &cfg).unwrap();
        let fit = fit_pipeline(&prepared, &cfg.smoother).unwrap();
        let r = decompose(&fit.mediator, &fit.outcome, prepared.mediator()).unwrap();
        assert_eq!(r.total_effect, r.gamma + r.indirect_total);
        assert!((r.indirect_total - r.grid.integrate(&r.indirect_curve)).abs() <= 1e-12);

        let mut zero_beta = fit.outcome.clone();
        zero_beta.beta_curve = vec![0.0; 50];
        let r0 = decompose(&fit.mediator, &zero_beta, prepared.mediator()).unwrap();
        assert!(r0.indirect_curve.iter().all(|&v| v == 0.0));
        assert_eq!(r0.total_effect, r0.gamma);

        let mut no_effect = fit.mediator.clone();
        no_effect.treatment = [vec![0.0; 50], vec![0.0; 50]];
        no_effect.anchors = [0.0, 0.0];
        let ra = decompose(&no_effect, &fit.outcome, prepared.mediator()).unwrap();
        assert_eq!(ra.indirect_total, 0.0);

        let mut short = fit.outcome.clone();
        short.beta_curve.pop();
        assert!(matches!(decompose(&fit.mediator, &short, prepared.mediator()), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn label_flip_negates_effects() {
        let data = cohort(60, 2);
        let cfg = PipelineConfig::default();
        let a = estimate(&PreparedData::new(&data, &cfg).unwrap(), &cfg.smoother).unwrap();
        let b = estimate(&PreparedData::new(&data.with_flipped_treatment(), &cfg).unwrap(), &cfg.smoother).unwrap();
        assert!((a.gamma + b.gamma).abs() <= 1e-8);
        assert!((a.indirect_total + b.indirect_total).abs() <= 1e-8);
        for (x, y) in a.alpha_curve.iter().zip(&b.alpha_curve) {
            assert!((x + y).abs() <= 1e-8);
        }
        for (x, y) in a.indirect_curve.iter().zip(&b.indirect_curve) {
            assert!((x + y).abs() <= 1e-8);
        }
        for (x, y) in a.beta_curve.iter().zip(&b.beta_curve) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn bootstrap_is_deterministic_and_valid() {
        let data = cohort(40, 3);
        let cfg = PipelineConfig::default();
        let r1 = bootstrap_infer(&data, &cfg, 100, 11).unwrap();
        let r2 = bootstrap_infer(&data, &cfg, 100, 11).unwrap();
        assert_eq!(r1, r2);
        let inf = r1.inference.as_ref().unwrap();
        assert!((0.0..=1.0).contains(&inf.p_global));
        assert!(inf.p_pointwise.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(inf.ci_lower.iter().zip(&inf.ci_upper).all(|(l, u)| l <= u));
        assert!(inf.indirect_total_ci[0] <= inf.indirect_total_ci[1]);
        let r3 = bootstrap_infer(&data, &cfg, 100, 12).unwrap();
        assert_ne!(r1.inference, r3.inference);
        assert!(matches!(bootstrap_infer(&data, &cfg, 99, 11), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn discarded_replicates() {
        let data = cohort(20, 4);
        let cfg = PipelineConfig::default();
        let prepared = PreparedData::new(&data, &cfg).unwrap();
        let point = estimate(&prepared, &cfg.smoother).unwrap();
        let rep = Replicate { indirect_curve: point.indirect_curve.clone(), indirect_total: point.indirect_total };
        let mut results = vec![Some(rep); 100];
        results[..10].iter_mut().for_each(|r| *r = None);
        let ok = summarize_bootstrap(point.clone(), &results, 0).unwrap();
        assert_eq!(ok.inference.unwrap().discarded, 10);
        results[10] = None;
        assert!(matches!(
            summarize_bootstrap(point, &results, 0),
            Err(Error::ReplicateFailures { failed: 11, total: 100 })
        ));
    }

    #[test]
    fn clusters_resample_together() {
        let grid = Grid::new(8).unwrap();
        let q = QuantileFunction::from_fn(grid, |t| t).unwrap();
        let labels = [5, 5, 7, 9, 9, 9];
        let z = vec![true, true, false, true, true, true];
        let data = AnalysisDataset::new(vec![q; 6], vec![], vec![], z.clone(), vec![0.0; 6], Some(&labels)).unwrap();
        assert_eq!(data.clusters(), &[vec![0, 1], vec![2], vec![3, 4, 5]]);
        let prepared = PreparedData::new(&data, &PipelineConfig::default()).unwrap();
        let sample = prepared.resample(&[2, 0, 2]);
        assert_eq!(sample.cluster_count(), 3);
        assert_eq!(sample.mediator().len(), 8);
        let mut bad = z;
        bad[1] = false;
        let q = QuantileFunction::from_fn(grid, |t| t).unwrap();
        assert!(AnalysisDataset::new(vec![q; 6], vec![], vec![], bad, vec![0.0; 6], Some(&labels)).is_err());
    }

    #[test]
    fn dataset_validation() {
        let grid = Grid::new(8).unwrap();
        let q = QuantileFunction::from_fn(grid, |t| t).unwrap();
        let names = vec![String::from("x")];
        assert!(AnalysisDataset::new(vec![], vec![], vec![], vec![], vec![], None).is_err());
        assert!(AnalysisDataset::new(vec![q.clone(); 2], vec![1.0], names.clone(), vec![true, false], vec![0.0; 2], None).is_err());
        assert!(AnalysisDataset::new(vec![q.clone(); 2], vec![1.0, 2.0], names, vec![true, false], vec![0.0, f64::NAN], None).is_err());
        let other = QuantileFunction::from_fn(Grid::new(9).unwrap(), |t| t).unwrap();
        assert!(matches!(
            AnalysisDataset::new(vec![q, other], vec![], vec![], vec![true, false], vec![0.0; 2], None),
            Err(Error::GridMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn p_values_in_unit_interval(est in -3.0f64..3.0, reps in proptest::collection::vec(-5.0f64..5.0, 1..50)) {
            let p = p_value(est, &reps);
            prop_assert!((0.0..=1.0).contains(&p));
            // mirror symmetry of the two branches
            let flipped: Vec<f64> = reps.iter().map(|x| -x).collect();
            if est != 0.0 {
                prop_assert_eq!(p, p_value(-est, &flipped));
            }
        }
    }
}
