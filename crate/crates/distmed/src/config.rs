//! Run configuration, read from and written to TOML.

use std::path::Path;

use distmed_core::mediation::PipelineConfig;
use distmed_core::sensitivity::SensitivityConfig;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result, Stage};

/// How activity days and outcome rows are turned into analysis units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One unit per subject: barycenter of the daily quantile functions and
    /// the mean outcome.
    #[default]
    PerSubject,
    /// One unit per (subject, day); the bootstrap resamples subjects.
    RepeatedMeasures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    /// 0 disables the bootstrap.
    pub replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self { replicates: 200, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid_size: usize,
    pub mode: Mode,
    /// Days with fewer valid epochs are dropped.
    pub min_epochs: usize,
    /// Outcome column; may be omitted when the subjects table has only one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    /// Covariate columns; by default every column whose name starts with `x`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
    /// Significance level for pointwise and global tests.
    pub level: f64,
    /// Constant-in-t correlations for the sensitivity sweep; empty skips it.
    pub rho_grid: Vec<f64>,
    pub bootstrap: BootstrapSettings,
    pub pipeline: PipelineConfig,
    pub sensitivity: SensitivityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_size: 100,
            mode: Mode::PerSubject,
            min_epochs: 60,
            outcome: None,
            covariates: None,
            level: 0.05,
            rho_grid: Vec::new(),
            bootstrap: BootstrapSettings::default(),
            pipeline: PipelineConfig::default(),
            sensitivity: SensitivityConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| AppError::usage(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| AppError::format(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 {
            return Err(AppError::usage("grid_size must be positive"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(AppError::usage(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(r.abs() <= 1.0)) {
            return Err(AppError::usage(format!("rho_grid entry {r} outside [-1, 1]")));
        }
        self.pipeline.validate().stage("config")?;
        self.sensitivity.validate().stage("config")
    }
}

/// Parses `lo:hi:step` into `lo, lo + step, ..., hi`.
pub fn parse_rho_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || AppError::usage(format!("--rho-grid expects lo:hi:step, got '{spec}'"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let values: Vec<f64> = (0..count)
        .map(|k| {
            let v = lo + k as f64 * step;
            // drop representation noise such as 0.30000000000000004
            (v * 1e12).round() / 1e12
        })
        .collect();
    if let Some(r) = values.iter().find(|r| r.abs() > 1.0) {
        return Err(AppError::usage(format!("--rho-grid value {r} outside [-1, 1]")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.outcome = Some("sleepmin".into());
        c.covariates = Some(vec!["age".into()]);
        c.rho_grid = vec![-0.1, 0.0, 0.1];
        c.bootstrap.seed = Some(42);
        c.mode = Mode::RepeatedMeasures;
        c.pipeline.basis.size = 6;
        let text = c.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::from_toml(&back.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_and_invalid_configs() {
        let c = RunConfig::from_toml("grid_size = 50\n[pipeline.smoother]\nmax_iter = 10\n").unwrap();
        assert_eq!(c.grid_size, 50);
        assert_eq!(c.pipeline.smoother.max_iter, 10);
        assert_eq!(c.pipeline.smoother.eval_points, 51);
        assert!(RunConfig::from_toml("grid_size = 0").is_err());
        assert!(RunConfig::from_toml("level = 1.5").is_err());
        assert!(RunConfig::from_toml("unknown = 1").is_err());
        assert!(RunConfig::from_toml("rho_grid = [2.0]").is_err());
        assert!(RunConfig::from_toml("mode = \"per-subject\"").is_ok());
        assert!(RunConfig::from_toml("mode = \"daily\"").is_err());
    }

    #[test]
    fn rho_grid_parsing() {
        let g = parse_rho_grid("-0.3:0.3:0.1").unwrap();
        assert_eq!(g, vec![-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3]);
        assert_eq!(parse_rho_grid("0:0:0.5").unwrap(), vec![0.0]);
        assert!(parse_rho_grid("0:1").is_err());
        assert!(parse_rho_grid("0:1:0").is_err());
        assert!(parse_rho_grid("1:0:0.1").is_err());
        assert!(parse_rho_grid("-2:0:1").is_err());
        assert!(parse_rho_grid("a:b:c").is_err());
    }
}
