//! End-to-end runs with the bootstrap and simulation loops spread over a
//! rayon pool. Results are collected in index order, so output does not
//! depend on the schedule.

use distmed_core::mediation::{
    check_replicates, decompose, fit_pipeline, run_replicate, summarize_bootstrap, AnalysisDataset, MediationReport,
    PipelineConfig, PreparedData, Replicate,
};
use distmed_core::mediator::SmootherConfig;
use distmed_core::sensitivity::{sensitivity_sweep, SensitivityProblem};
use distmed_core::simulation::{aggregate, check_study, run_once, SimDesign, StudyResult};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{AppError, Result, Stage};
use crate::report::SensitivityBlock;

pub struct PipelineOutput {
    pub report: MediationReport,
    pub sensitivity: Option<SensitivityBlock>,
}

pub fn bootstrap_replicates(
    prepared: &PreparedData,
    smoother: &SmootherConfig,
    replicates: usize,
    seed: u64,
) -> distmed_core::Result<Vec<Option<Replicate>>> {
    (0..replicates).into_par_iter().map(|b| run_replicate(prepared, smoother, seed, b)).collect()
}

/// Transform, mediator and outcome fits, decomposition, then the bootstrap
/// when `config.bootstrap.replicates > 0` and the sensitivity sweep when
/// `config.rho_grid` is non-empty.
pub fn run_pipeline(dataset: &AnalysisDataset, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let pc = &config.pipeline;
    let prepared = PreparedData::new(dataset, pc).stage("transform")?;
    let fit = fit_pipeline(&prepared, &pc.smoother).stage("model fit")?;
    let mut report = decompose(&fit.mediator, &fit.outcome, prepared.mediator()).stage("decomposition")?;
    let b = config.bootstrap.replicates;
    if b > 0 {
        let seed = config
            .bootstrap
            .seed
            .ok_or_else(|| AppError::usage("a seed is required when bootstrap replicates are requested"))?;
        check_replicates(b).stage("bootstrap")?;
        let results = bootstrap_replicates(&prepared, &pc.smoother, b, seed).stage("bootstrap")?;
        report = summarize_bootstrap(report, &results, seed).stage("bootstrap")?;
    }
    let sensitivity = if config.rho_grid.is_empty() {
        None
    } else {
        let problem =
            SensitivityProblem::new(&prepared, &fit, &report.alpha_curve, &config.sensitivity).stage("sensitivity")?;
        let results = sensitivity_sweep(&problem, &config.rho_grid, &config.sensitivity).stage("sensitivity")?;
        Some(SensitivityBlock { effective_rank: problem.effective_rank(), results })
    };
    Ok(PipelineOutput { report, sensitivity })
}

/// Simulation study with runs in parallel.
pub fn run_study_parallel(
    design: &SimDesign,
    config: &PipelineConfig,
    runs: usize,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<StudyResult> {
    check_study(design, runs, replicates, level).stage("simulation")?;
    config.validate().stage("simulation")?;
    let outcomes = (0..runs)
        .into_par_iter()
        .map(|r| run_once(design, config, r, replicates, level, seed))
        .collect();
    aggregate(design, replicates, level, outcomes).stage("simulation")
}
