//! Simulation designs with known mediation structure and the type-I-error
//! and power study built on them.
//!
//! Every subject has covariates `x₁ ~ N(10, 1)`, `x₂ ~ N(12, 1)` and a
//! transform-space mediator built from
//!
//! ```text
//! h(t) = −cos(2πt)/2 + x₁t² − x₂t + 5
//! ε(t) = ε₁ sin(πt) + ε₂ sin(2πt),   ε₁, ε₂ ~ N(0, 1)
//! ```
//!
//! | design | g(t)             | outcome                                    |
//! |--------|------------------|--------------------------------------------|
//! | 1      | ε                | 0.05x₁ − 0.05x₂ + Z + η                    |
//! | 2      | h − 2Zt + ε      | 0.05x₁ − 0.05x₂ + Z + η                    |
//! | 3      | h + ε            | 0.05x₁ − 0.05x₂ + Z + ∫t M⁻¹(t)dt + η      |
//! | 4      | h − 2Zt + ε      | 0.05x₁ − 0.05x₂ + Z + ∫t M⁻¹(t)dt + η      |
//!
//! with `M⁻¹ = ψ⁻¹(g)` anchored at 0 and `η ~ N(0, 0.05²)`. Only design 4
//! has a non-zero indirect effect.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::distribution::{lqd_inverse, Grid, LqdFunction};
use crate::error::{invalid_config, Error, Result};
use crate::mediation::{
    check_replicates, estimate, run_replicate, summarize_bootstrap, AnalysisDataset, MediationReport,
    PipelineConfig, PreparedData,
};

/// Standard deviation of the outcome error η.
pub const OUTCOME_NOISE_SD: f64 = 0.05;
/// Largest fraction of study runs allowed to fail.
pub const MAX_RUN_FAILURE_FRACTION: f64 = 0.02;
/// Study size below which rejection rates are too noisy to interpret.
pub const RECOMMENDED_MIN_RUNS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimDesign {
    /// Design number, 1 to 4.
    pub sim: u8,
    /// Number of subjects; half are treated.
    pub n: usize,
    pub grid: Grid,
    /// Include ε(t) in the mediator.
    pub mediator_noise: bool,
    /// Include η in the outcome.
    pub outcome_noise: bool,
    pub seed: u64,
}

impl SimDesign {
    pub fn new(sim: u8, seed: u64) -> Self {
        Self { sim, n: 300, grid: Grid::default(), mediator_noise: true, outcome_noise: true, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.sim) {
            return Err(invalid_config(format!("simulation design must be 1 to 4, got {}", self.sim)));
        }
        if self.n < 4 || self.n % 2 != 0 {
            return Err(invalid_config(format!("n must be even and at least 4, got {}", self.n)));
        }
        Ok(())
    }

    fn treatment_moves_mediator(&self) -> bool {
        matches!(self.sim, 2 | 4)
    }

    fn mediator_moves_outcome(&self) -> bool {
        matches!(self.sim, 3 | 4)
    }
}

/// `h(t)` for given covariates.
pub fn baseline_curve(t: f64, x1: f64, x2: f64) -> f64 {
    -libm::cos(2.0 * PI * t) / 2.0 + x1 * t * t - x2 * t + 5.0
}

/// Draws one dataset. Treatment is a random half/half split.
pub fn generate(design: &SimDesign) -> Result<AnalysisDataset> {
    design.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    let n = design.n;
    let mut treated: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    treated.shuffle(&mut rng);

    let grid = design.grid;
    let points = grid.points();
    let mut mediators = Vec::with_capacity(n);
    let mut covariates = Vec::with_capacity(2 * n);
    let mut outcome = Vec::with_capacity(n);
    for &z in &treated {
        let x1 = 10.0 + rng.sample::<f64, _>(StandardNormal);
        let x2 = 12.0 + rng.sample::<f64, _>(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        let (e1, e2) = if design.mediator_noise { (e1, e2) } else { (0.0, 0.0) };
        let eta = if design.outcome_noise { OUTCOME_NOISE_SD * eta } else { 0.0 };

        let g: Vec<f64> = points
            .iter()
            .map(|&t| {
                let noise = e1 * libm::sin(PI * t) + e2 * libm::sin(2.0 * PI * t);
                let mut v = noise;
                if design.sim != 1 {
                    v += baseline_curve(t, x1, x2);
                }
                if design.treatment_moves_mediator() && z {
                    v -= 2.0 * t;
                }
                v
            })
            .collect();
        let m = lqd_inverse(&LqdFunction::new(grid, g, 0.0)?)?;
        let mut y = 0.05 * x1 - 0.05 * x2 + if z { 1.0 } else { 0.0 } + eta;
        if design.mediator_moves_outcome() {
            y += points.iter().zip(m.values()).map(|(t, v)| t * v).sum::<f64>() * grid.spacing();
        }
        mediators.push(m);
        covariates.extend([x1, x2]);
        outcome.push(y);
    }
    AnalysisDataset::new(mediators, covariates, vec![String::from("x1"), String::from("x2")], treated, outcome, None)
}

/// Data and bootstrap seeds of study run `run`.
pub fn run_seeds(seed: u64, run: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Result of one study run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: MediationReport,
    pub reject_global: bool,
    pub reject_pointwise: Vec<bool>,
}

/// Generates, fits and tests run `run` of a study.
pub fn run_once(
    design: &SimDesign,
    config: &PipelineConfig,
    run: usize,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<RunOutcome> {
    let (data_seed, boot_seed) = run_seeds(seed, run);
    let data = generate(&SimDesign { seed: data_seed, ..*design })?;
    let prepared = PreparedData::new(&data, config)?;
    let point = estimate(&prepared, &config.smoother)?;
    let results = (0..replicates)
        .map(|b| run_replicate(&prepared, &config.smoother, boot_seed, b))
        .collect::<Result<Vec<_>>>()?;
    let report = summarize_bootstrap(point, &results, boot_seed)?;
    let inference = report.inference.as_ref().expect("bootstrap summary sets inference");
    Ok(RunOutcome {
        reject_global: inference.p_global <= level,
        reject_pointwise: inference.p_pointwise.iter().map(|&p| p <= level).collect(),
        report,
    })
}

/// Rejection rates and mean estimated curves over the runs of a study.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StudyResult {
    pub design: SimDesign,
    pub runs: usize,
    pub completed: usize,
    pub failed: usize,
    pub replicates: usize,
    pub level: f64,
    pub global_rate: f64,
    pub pointwise_rates: Vec<f64>,
    pub mean_alpha: Vec<f64>,
    pub mean_beta: Vec<f64>,
    pub mean_indirect: Vec<f64>,
    pub mean_gamma: f64,
    pub mean_indirect_total: f64,
}

impl StudyResult {
    /// Pointwise rejection rate at the grid cell containing `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.pointwise_rates[self.design.grid.cell_index(t)]
    }
}

pub fn check_study(design: &SimDesign, runs: usize, replicates: usize, level: f64) -> Result<()> {
    design.validate()?;
    check_replicates(replicates)?;
    if runs == 0 {
        return Err(invalid_config("a study needs at least one run"));
    }
    if runs < RECOMMENDED_MIN_RUNS {
        log::warn!("{runs} runs give coarse rejection rates; at least {RECOMMENDED_MIN_RUNS} are recommended");
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid_config(format!("level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Aggregates run outcomes in run order. Failed runs are logged and counted;
/// more than [`MAX_RUN_FAILURE_FRACTION`] of them is an error.
pub fn aggregate(
    design: &SimDesign,
    replicates: usize,
    level: f64,
    outcomes: Vec<Result<RunOutcome>>,
) -> Result<StudyResult> {
    let runs = outcomes.len();
    let gs = design.grid.size();
    let mut global = 0usize;
    let mut pointwise = vec![0usize; gs];
    let mut alpha = vec![0.0; gs];
    let mut beta = vec![0.0; gs];
    let mut indirect = vec![0.0; gs];
    let (mut gamma, mut indirect_total) = (0.0, 0.0);
    let mut failed = 0;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let o = match outcome {
            Ok(o) => o,
            Err(e) => {
                log::warn!("run {r} failed: {e}");
                failed += 1;
                continue;
            }
        };
        global += o.reject_global as usize;
        for (c, &rej) in pointwise.iter_mut().zip(&o.reject_pointwise) {
            *c += rej as usize;
        }
        let rep = &o.report;
        for t in 0..gs {
            alpha[t] += rep.alpha_curve[t];
            beta[t] += rep.beta_curve[t];
            indirect[t] += rep.indirect_curve[t];
        }
        gamma += rep.gamma;
        indirect_total += rep.indirect_total;
    }
    let completed = runs - failed;
    if completed == 0 || failed as f64 > MAX_RUN_FAILURE_FRACTION * runs as f64 {
        return Err(Error::RunFailures { failed, total: runs });
    }
    let c = completed as f64;
    let scale = |v: Vec<f64>| v.into_iter().map(|x| x / c).collect::<Vec<_>>();
    Ok(StudyResult {
        design: *design,
        runs,
        completed,
        failed,
        replicates,
        level,
        global_rate: global as f64 / c,
        pointwise_rates: pointwise.into_iter().map(|k| k as f64 / c).collect(),
        mean_alpha: scale(alpha),
        mean_beta: scale(beta),
        mean_indirect: scale(indirect),
        mean_gamma: gamma / c,
        mean_indirect_total: indirect_total / c,
    })
}

/// Runs a study sequentially.
pub fn run_study(
    design: &SimDesign,
    config: &PipelineConfig,
    runs: usize,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<StudyResult> {
    check_study(design, runs, replicates, level)?;
    let outcomes = (0..runs).map(|r| run_once(design, config, r, replicates, level, seed)).collect();
    aggregate(design, replicates, level, outcomes)
}
