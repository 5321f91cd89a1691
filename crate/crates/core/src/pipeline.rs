//! Config-driven end-to-end experiment:
//! import → preprocess → align → split → train → disaggregate → evaluate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disaggregation::{disaggregate_co, disaggregate_fhmm, predictions_to_power, Predictions};
use crate::error::{Error, Result};
use crate::io::{export_model_json, import_redd_style, load_nilmtk_df, save_nilmtk_df};
use crate::metrics::{evaluate, reports_to_csv, reports_to_json, MetricReport, StateRule};
use crate::model::{Building, DataSet, Measurement};
use crate::preprocessing::{align_common_index, apply_steps, train_test_split, Step};
use crate::synth::{default_benchmark_spec, generate, SynthSpec};
use crate::training::{train_co, train_fhmm, ApplianceStateModel, Model, StateCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    NilmtkDf,
    Redd,
    Synth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub format: DatasetFormat,
    /// For `synth`; the default benchmark spec when absent.
    #[serde(default)]
    pub synth_spec: Option<SynthSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Co,
    Fhmm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Co => "co",
            Algorithm::Fhmm => "fhmm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_building")]
    pub building: u32,
    #[serde(default)]
    pub feature: Measurement,
    #[serde(default)]
    pub preprocessing: Vec<Step>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub states: StateCounts,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    /// Metric names kept in `report.csv`; all when empty.
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub state_rule: StateRule,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Overrides the synthetic spec's seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_building() -> u32 {
    1
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Co, Algorithm::Fhmm]
}

fn default_split() -> f64 {
    0.5
}

impl RunConfig {
    /// The benchmark protocol on the default synthetic household.
    pub fn default_synth() -> Self {
        RunConfig {
            dataset: DatasetConfig {
                path: None,
                format: DatasetFormat::Synth,
                synth_spec: None,
            },
            building: 1,
            feature: Measurement::POWER_ACTIVE,
            preprocessing: vec![Step::FilterContribution { fraction: 0.05 }],
            algorithms: default_algorithms(),
            states: StateCounts::default(),
            split_fraction: 0.5,
            metrics: Vec::new(),
            state_rule: StateRule::default(),
            output: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        match self.dataset.format {
            DatasetFormat::Synth => {}
            _ if self.dataset.path.is_none() => return cfg("dataset.path is required for this format"),
            _ => {}
        }
        if self.algorithms.is_empty() {
            return cfg("algorithms must name at least one of co, fhmm");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return cfg("split_fraction must be in (0, 1)");
        }
        if self.states.default < 2 {
            return cfg("states.default must be at least 2");
        }
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON with `output` cleared, in hex.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(&RunConfig {
            output: None,
            ..self.clone()
        })?;
        Ok(sha256_hex(json.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn load_dataset(cfg: &DatasetConfig, seed: Option<u64>) -> Result<DataSet> {
    let path = || {
        cfg.path
            .as_deref()
            .ok_or_else(|| Error::Config("dataset.path is required for this format".into()))
    };
    match cfg.format {
        DatasetFormat::NilmtkDf => load_nilmtk_df(path()?),
        DatasetFormat::Redd => import_redd_style(path()?).map(|(ds, report)| {
            if report.skipped + report.duplicates > 0 {
                log::warn!("import skipped {} malformed and {} duplicate rows", report.skipped, report.duplicates);
            }
            ds
        }),
        DatasetFormat::Synth => {
            let mut spec = cfg.synth_spec.clone().unwrap_or_else(default_benchmark_spec);
            if let Some(s) = seed {
                spec.seed = s;
            }
            Ok(generate(&spec)?.dataset)
        }
    }
}

/// Configured steps followed by alignment to the common index.
pub fn preprocess(b: &Building, steps: &[Step]) -> Result<Building> {
    Ok(align_common_index(&apply_steps(b, steps)?))
}

pub fn train(algorithm: Algorithm, b: &Building, feature: Measurement, states: &StateCounts) -> Result<Model> {
    Ok(match algorithm {
        Algorithm::Co => Model::Co(train_co(b, feature, states)?),
        Algorithm::Fhmm => Model::Fhmm(train_fhmm(b, feature, states)?),
    })
}

/// Disaggregates the building's mains aggregate.
pub fn disaggregate(model: &Model, b: &Building, feature: Measurement) -> Result<Predictions> {
    let aggregate = b.aggregate(feature)?;
    match model {
        Model::Co(m) => disaggregate_co(m, &aggregate, feature),
        Model::Fhmm(m) => disaggregate_fhmm(m, &aggregate, feature),
    }
}

pub fn model_states(model: &Model) -> Vec<ApplianceStateModel> {
    match model {
        Model::Co(m) => m.appliances.clone(),
        Model::Fhmm(m) => m.appliances.iter().map(|a| a.base.clone()).collect(),
    }
}

/// Predictions as a one-building dataset whose appliances are the estimates
/// and whose mains are the disaggregated aggregate.
pub fn predictions_dataset(p: &Predictions, source: &Building, algorithm: Algorithm) -> Result<DataSet> {
    let mut b = Building::new(source.id);
    b.metadata = source.metadata.clone();
    b.metadata.insert("algorithm".into(), algorithm.name().into());
    b.mains.push(source.aggregate(p.feature)?.with_id("mains_1"));
    for c in predictions_to_power(p) {
        b.appliances.insert(c.id().to_string(), c);
    }
    let mut ds = DataSet::new(format!("predictions_{}", algorithm.name()));
    ds.buildings.insert(b.id, b);
    Ok(ds)
}

/// Wall-clock seconds per stage, rounded to hundredths.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StageTimings(pub Vec<(String, f64)>);

impl StageTimings {
    fn record(&mut self, stage: impl Into<String>, started: Instant) -> f64 {
        let secs = round2(started.elapsed().as_secs_f64());
        self.0.push((stage.into(), secs));
        secs
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub building: u32,
    pub algorithms: Vec<Algorithm>,
    pub stages: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<MetricReport>,
    pub models: Vec<Model>,
    pub manifest: Manifest,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn filter_report_csv(csv: &str, metrics: &[String]) -> String {
    if metrics.is_empty() {
        return csv.to_string();
    }
    csv.lines()
        .enumerate()
        .filter(|(i, line)| *i == 0 || line.split(',').nth(1).is_some_and(|m| metrics.iter().any(|k| k == m)))
        .map(|(_, l)| format!("{l}\n"))
        .collect()
}

/// Runs every stage and writes `report.csv`, `report.json`,
/// `model_<algo>.json`, `predictions_<algo>/` and `manifest.json` into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut timings = StageTimings::default();

    let started = Instant::now();
    let building = load_dataset(&cfg.dataset, cfg.seed)
        .and_then(|ds| ds.building(cfg.building).cloned())
        .map_err(|e| e.in_stage("import"))?;
    timings.record("import", started);

    let started = Instant::now();
    let cleaned = apply_steps(&building, &cfg.preprocessing).map_err(|e| e.in_stage("preprocess"))?;
    timings.record("preprocess", started);

    let started = Instant::now();
    let aligned = align_common_index(&cleaned);
    timings.record("align", started);

    let started = Instant::now();
    let (train_b, test_b) = train_test_split(&aligned, cfg.split_fraction).map_err(|e| e.in_stage("split"))?;
    timings.record("split", started);

    let mut models = Vec::new();
    let mut reports = Vec::new();
    let mut predictions = Vec::new();
    for &algo in &cfg.algorithms {
        let started = Instant::now();
        let model = train(algo, &train_b, cfg.feature, &cfg.states).map_err(|e| e.in_stage(format!("train_{}", algo.name())))?;
        let train_secs = timings.record(format!("train_{}", algo.name()), started);
        write(&out.join(format!("model_{}.json", algo.name())), &export_model_json(&model)?)?;

        let started = Instant::now();
        let p = disaggregate(&model, &test_b, cfg.feature).map_err(|e| e.in_stage(format!("disaggregate_{}", algo.name())))?;
        let dis_secs = timings.record(format!("disaggregate_{}", algo.name()), started);

        let started = Instant::now();
        let states = model_states(&model);
        let mut report =
            evaluate(&p, &test_b, &cfg.state_rule, Some(&states)).map_err(|e| e.in_stage(format!("evaluate_{}", algo.name())))?;
        report.algorithm = algo.name().to_string();
        report.train_seconds = Some(train_secs);
        report.disaggregate_seconds = Some(dis_secs);
        timings.record(format!("evaluate_{}", algo.name()), started);
        reports.push(report);
        predictions.push((algo, p));
        models.push(model);
    }

    for (algo, p) in &predictions {
        save_nilmtk_df(&predictions_dataset(p, &test_b, *algo)?, &out.join(format!("predictions_{}", algo.name())))?;
    }
    write(&out.join("report.csv"), &filter_report_csv(&reports_to_csv(&reports), &cfg.metrics))?;
    write(&out.join("report.json"), &reports_to_json(&reports)?)?;

    let seed = cfg.seed.or(match cfg.dataset.format {
        DatasetFormat::Synth => Some(cfg.dataset.synth_spec.as_ref().map_or(default_benchmark_spec().seed, |s| s.seed)),
        _ => None,
    });
    let manifest = Manifest {
        config_sha256: cfg.hash()?,
        seed,
        building: cfg.building,
        algorithms: cfg.algorithms.clone(),
        stages: timings
            .0
            .into_iter()
            .map(|(stage, seconds)| StageTiming { stage, seconds })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write(&out.join("manifest.json"), &text)?;
    Ok(RunOutcome {
        reports,
        models,
        manifest,
    })
}

/// Saves a single building as a one-building dataset.
pub fn save_building(b: &Building, name: &str, dir: &Path) -> Result<()> {
    let mut ds = DataSet::new(name);
    ds.buildings.insert(b.id, b.clone());
    save_nilmtk_df(&ds, dir)
}
