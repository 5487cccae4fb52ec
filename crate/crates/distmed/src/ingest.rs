//! Activity and subject tables to analysis units.
//!
//! Valid epoch counts `c` of each (subject, day) become `log(1 + c)`, whose
//! empirical quantile function on the grid is that day's mediator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use distmed_core::mediation::AnalysisDataset;
use distmed_core::{barycenter, empirical_quantile, Grid, QuantileFunction};
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::{Mode, RunConfig};
use crate::error::{AppError, Result, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ActivityRecord {
    pub subject_id: String,
    pub day: i64,
    pub epoch_index: i64,
    pub count: u64,
    #[serde(deserialize_with = "flag")]
    pub valid: bool,
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Ok(true),
        "0" | "false" | "f" | "no" => Ok(false),
        other => Err(serde::de::Error::custom(format!("invalid flag '{other}'"))),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawActivityTable {
    pub rows: Vec<ActivityRecord>,
}

impl RawActivityTable {
    pub fn from_reader(reader: impl Read) -> std::result::Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| format!("row {}: {e}", i + 1)))
            .collect::<std::result::Result<Vec<ActivityRecord>, _>>()?;
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !seen.insert((&r.subject_id, r.day, r.epoch_index)) {
                return Err(format!(
                    "duplicate epoch: subject {} day {} epoch {}",
                    r.subject_id, r.day, r.epoch_index
                ));
            }
        }
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
        Self::from_reader(file).map_err(|e| AppError::format(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRow {
    pub subject_id: String,
    pub day: Option<i64>,
    pub z: bool,
    pub covariates: Vec<f64>,
    pub outcomes: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubjectTable {
    pub covariate_names: Vec<String>,
    pub outcome_names: Vec<String>,
    pub has_day: bool,
    pub rows: Vec<SubjectRow>,
}

impl SubjectTable {
    /// Columns `subject_id` and `z` are required and `day` is optional.
    /// Covariates are `covariates` if given, else the columns starting with
    /// `x`; the remaining columns are outcomes.
    pub fn from_reader(reader: impl Read, covariates: Option<&[String]>) -> std::result::Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let id_col = find("subject_id").ok_or("missing column 'subject_id'")?;
        let z_col = find("z").ok_or("missing column 'z'")?;
        let day_col = find("day");
        let covariate_cols: Vec<usize> = match covariates {
            Some(names) => names
                .iter()
                .map(|n| find(n).ok_or_else(|| format!("missing covariate column '{n}'")))
                .collect::<std::result::Result<_, _>>()?,
            None => (0..headers.len())
                .filter(|&i| headers[i].starts_with('x') && Some(i) != day_col)
                .collect(),
        };
        let outcome_cols: Vec<usize> = (0..headers.len())
            .filter(|&i| i != id_col && i != z_col && Some(i) != day_col && !covariate_cols.contains(&i))
            .collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let at = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> std::result::Result<f64, String> {
                let v: f64 = at(i)
                    .parse()
                    .map_err(|_| format!("row {}: column '{}' is not a number: '{}'", line + 1, headers[i], at(i)))?;
                if !v.is_finite() {
                    return Err(format!("row {}: column '{}' is not finite", line + 1, headers[i]));
                }
                Ok(v)
            };
            let z = match at(z_col) {
                "0" => false,
                "1" => true,
                other => return Err(format!("row {}: z must be 0 or 1, got '{other}'", line + 1)),
            };
            let day = match day_col {
                Some(c) => Some(
                    at(c).parse::<i64>().map_err(|_| format!("row {}: day is not an integer: '{}'", line + 1, at(c)))?,
                ),
                None => None,
            };
            rows.push(SubjectRow {
                subject_id: at(id_col).to_string(),
                day,
                z,
                covariates: covariate_cols.iter().map(|&i| num(i)).collect::<std::result::Result<_, _>>()?,
                outcomes: outcome_cols.iter().map(|&i| num(i)).collect::<std::result::Result<_, _>>()?,
            });
        }
        Ok(Self {
            covariate_names: covariate_cols.iter().map(|&i| headers[i].clone()).collect(),
            outcome_names: outcome_cols.iter().map(|&i| headers[i].clone()).collect(),
            has_day: day_col.is_some(),
            rows,
        })
    }

    pub fn read(path: &Path, covariates: Option<&[String]>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
        Self::from_reader(file, covariates).map_err(|e| AppError::format(path, e))
    }

    fn outcome_index(&self, name: Option<&str>) -> Result<usize> {
        match name {
            Some(n) => self
                .outcome_names
                .iter()
                .position(|o| o == n)
                .ok_or_else(|| AppError::usage(format!("outcome '{n}' not found; available: {:?}", self.outcome_names))),
            None if self.outcome_names.len() == 1 => Ok(0),
            None => Err(AppError::usage(format!(
                "choose an outcome with --outcome; available: {:?}",
                self.outcome_names
            ))),
        }
    }
}

/// Subject and, in repeated-measures mode, day of an analysis unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitKey {
    pub subject: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub day: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: AnalysisDataset,
    pub units: Vec<UnitKey>,
    pub outcome_name: String,
    pub mode: Mode,
    /// (subject, day) pairs dropped for too few valid epochs.
    pub dropped_days: Vec<UnitKey>,
}

/// `log(1 + c)` of the valid epochs of each (subject, day).
pub fn daily_log_counts(activity: &RawActivityTable) -> BTreeMap<(String, i64), Vec<f64>> {
    let mut days: BTreeMap<(String, i64), Vec<f64>> = BTreeMap::new();
    for r in &activity.rows {
        let entry = days.entry((r.subject_id.clone(), r.day)).or_default();
        if r.valid {
            entry.push((r.count as f64).ln_1p());
        }
    }
    days
}

fn reconcile(activity: &RawActivityTable, subjects: &SubjectTable) -> Result<()> {
    let a: BTreeSet<&str> = activity.rows.iter().map(|r| r.subject_id.as_str()).collect();
    let s: BTreeSet<&str> = subjects.rows.iter().map(|r| r.subject_id.as_str()).collect();
    let only_a: Vec<&str> = a.difference(&s).copied().collect();
    let only_s: Vec<&str> = s.difference(&a).copied().collect();
    if only_a.is_empty() && only_s.is_empty() {
        return Ok(());
    }
    Err(AppError::usage(format!(
        "subject tables disagree; only in activity: {only_a:?}; only in subjects: {only_s:?}"
    )))
}

pub fn ingest(activity: &RawActivityTable, subjects: &SubjectTable, config: &RunConfig) -> Result<Ingested> {
    config.validate()?;
    reconcile(activity, subjects)?;
    let outcome = subjects.outcome_index(config.outcome.as_deref())?;
    let grid = Grid::new(config.grid_size).stage("ingest")?;

    let mut quantiles: BTreeMap<(String, i64), QuantileFunction> = BTreeMap::new();
    let mut dropped = Vec::new();
    for ((subject, day), values) in daily_log_counts(activity) {
        if values.len() < config.min_epochs.max(1) {
            log::warn!(
                "subject {subject} day {day}: {} valid epochs, fewer than {}; day dropped",
                values.len(),
                config.min_epochs
            );
            dropped.push(UnitKey { subject, day: Some(day) });
            continue;
        }
        let q = empirical_quantile(&values, grid).stage("ingest")?;
        quantiles.insert((subject, day), q);
    }

    let mut order: Vec<&str> = Vec::new();
    let mut rows_of: HashMap<&str, Vec<&SubjectRow>> = HashMap::new();
    for r in &subjects.rows {
        let e = rows_of.entry(&r.subject_id).or_default();
        if e.is_empty() {
            order.push(&r.subject_id);
        }
        e.push(r);
    }
    for (id, rows) in &rows_of {
        if rows.iter().any(|r| r.z != rows[0].z) {
            return Err(AppError::usage(format!("subject {id}: treatment z differs between rows")));
        }
    }

    let mut mediators = Vec::new();
    let mut covariates = Vec::new();
    let mut treated = Vec::new();
    let mut outcomes = Vec::new();
    let mut units = Vec::new();
    let mut clusters = Vec::new();
    for (c, id) in order.iter().enumerate() {
        let rows = &rows_of[id];
        let days: Vec<&QuantileFunction> =
            quantiles.range((id.to_string(), i64::MIN)..=(id.to_string(), i64::MAX)).map(|(_, q)| q).collect();
        if days.is_empty() {
            return Err(AppError::usage(format!("subject {id} has no day with at least {} valid epochs", config.min_epochs)));
        }
        match config.mode {
            Mode::PerSubject => {
                if rows.iter().any(|r| r.covariates != rows[0].covariates) {
                    return Err(AppError::usage(format!(
                        "subject {id}: covariates must be constant across rows in per-subject mode"
                    )));
                }
                let owned: Vec<QuantileFunction> = days.into_iter().cloned().collect();
                mediators.push(barycenter(&owned, None).stage("ingest")?);
                covariates.extend_from_slice(&rows[0].covariates);
                treated.push(rows[0].z);
                outcomes.push(rows.iter().map(|r| r.outcomes[outcome]).sum::<f64>() / rows.len() as f64);
                units.push(UnitKey { subject: id.to_string(), day: None });
                clusters.push(c);
            }
            Mode::RepeatedMeasures => {
                if !subjects.has_day {
                    return Err(AppError::usage("repeated-measures mode needs a 'day' column in the subjects table"));
                }
                let before = units.len();
                for r in rows {
                    let day = r.day.expect("day column present");
                    match quantiles.get(&(id.to_string(), day)) {
                        Some(q) => {
                            mediators.push(q.clone());
                            covariates.extend_from_slice(&r.covariates);
                            treated.push(r.z);
                            outcomes.push(r.outcomes[outcome]);
                            units.push(UnitKey { subject: id.to_string(), day: Some(day) });
                            clusters.push(c);
                        }
                        None => log::warn!("subject {id} day {day}: no usable activity; outcome row dropped"),
                    }
                }
                if units.len() == before {
                    return Err(AppError::usage(format!("subject {id} lost all days")));
                }
            }
        }
    }
    let dataset = AnalysisDataset::new(
        mediators,
        covariates,
        subjects.covariate_names.clone(),
        treated,
        outcomes,
        Some(&clusters),
    )
    .stage("ingest")?;
    Ok(Ingested {
        dataset,
        units,
        outcome_name: subjects.outcome_names[outcome].clone(),
        mode: config.mode,
        dropped_days: dropped,
    })
}

/// On-disk form of an analysis dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDataset {
    pub schema_version: u32,
    pub grid_size: usize,
    pub mode: Mode,
    pub outcome_name: String,
    pub covariate_names: Vec<String>,
    pub units: Vec<StoredUnit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredUnit {
    #[serde(flatten)]
    pub key: UnitKey,
    pub z: bool,
    pub x: Vec<f64>,
    pub outcome: f64,
    pub quantile: Vec<f64>,
}

impl StoredDataset {
    pub fn from_ingested(ing: &Ingested) -> Self {
        let d = &ing.dataset;
        let k = d.covariate_names().len();
        Self {
            schema_version: crate::report::SCHEMA_VERSION,
            grid_size: d.grid().size(),
            mode: ing.mode,
            outcome_name: ing.outcome_name.clone(),
            covariate_names: d.covariate_names().to_vec(),
            units: ing
                .units
                .iter()
                .enumerate()
                .map(|(i, key)| StoredUnit {
                    key: key.clone(),
                    z: d.treated()[i],
                    x: d.covariates()[i * k..(i + 1) * k].to_vec(),
                    outcome: d.outcome()[i],
                    quantile: d.mediators()[i].values().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the dataset; units of the same subject form one cluster.
    pub fn to_ingested(&self) -> Result<Ingested> {
        if self.schema_version != crate::report::SCHEMA_VERSION {
            return Err(AppError::usage(format!("unsupported dataset schema_version {}", self.schema_version)));
        }
        let grid = Grid::new(self.grid_size).stage("dataset")?;
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let clusters: Vec<usize> = self
            .units
            .iter()
            .map(|u| {
                let next = ids.len();
                *ids.entry(u.key.subject.as_str()).or_insert(next)
            })
            .collect();
        let mediators = self
            .units
            .iter()
            .map(|u| QuantileFunction::new(grid, u.quantile.clone()))
            .collect::<distmed_core::Result<Vec<_>>>()
            .stage("dataset")?;
        let dataset = AnalysisDataset::new(
            mediators,
            self.units.iter().flat_map(|u| u.x.iter().copied()).collect(),
            self.covariate_names.clone(),
            self.units.iter().map(|u| u.z).collect(),
            self.units.iter().map(|u| u.outcome).collect(),
            Some(&clusters),
        )
        .stage("dataset")?;
        Ok(Ingested {
            dataset,
            units: self.units.iter().map(|u| u.key.clone()).collect(),
            outcome_name: self.outcome_name.clone(),
            mode: self.mode,
            dropped_days: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Ingested> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let stored: Self = serde_json::from_str(&text).map_err(|e| AppError::format(path, e))?;
        stored.to_ingested()
    }
}
