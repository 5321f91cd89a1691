//! `nilm`: command-line front end for the disaggregation pipeline.
//!
//! Every subcommand reads and writes NILMTK-DF directories, so the staged
//! commands chain through the filesystem to the same result as `run`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use nilm_core::diagnostics::diagnose;
use nilm_core::io::{export_model_json, import_model_json, import_redd_style, load_nilmtk_df, save_nilmtk_df};
use nilm_core::metrics::{evaluate, predictions_from_building, reports_to_csv, reports_to_json};
use nilm_core::model::{Building, DataSet};
use nilm_core::pipeline::{self, filter_report_csv, model_states, predictions_dataset, save_building, RunConfig};
use nilm_core::preprocessing::train_test_split;
use nilm_core::stats;
use nilm_core::synth::{default_benchmark_spec, generate, SynthSpec};
use nilm_core::training::Model;

const EXIT_STAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const DATA_DIR_VAR: &str = "NILM_DATA_DIR";

#[derive(Parser)]
#[command(name = "nilm", version, about = "Energy disaggregation toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for synthetic data (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config override `dotted.key=value`; the value is parsed as JSON, else taken as a string.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Redd,
    NilmtkDf,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw dataset to NILMTK-DF.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "redd")]
        format: Format,
    },
    /// Gap, dropout and up-time diagnostics for one building.
    Diagnose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        building: u32,
        /// Gap threshold in seconds; three nominal periods by default.
        #[arg(long)]
        gap_threshold: Option<f64>,
    },
    /// Energy, top-k, histogram and usage statistics for one building.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        building: u32,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = stats::DEFAULT_ON_THRESHOLD)]
        on_threshold: f64,
    },
    /// Apply the configured preprocessing and split into `train/` and `test/`.
    Preprocess,
    /// Train the configured algorithms on a NILMTK-DF building.
    Train {
        #[arg(long)]
        input: PathBuf,
    },
    /// Disaggregate a building's mains with saved models.
    Disaggregate {
        #[arg(long)]
        input: PathBuf,
        /// Directory holding `model_<algo>.json`.
        #[arg(long)]
        models: PathBuf,
    },
    /// Score saved predictions against ground truth.
    Evaluate {
        /// Ground-truth NILMTK-DF directory.
        #[arg(long)]
        input: PathBuf,
        /// Directory holding `predictions_<algo>/`.
        #[arg(long)]
        predictions: PathBuf,
        /// Directory holding `model_<algo>.json`, needed for nearest-state scoring.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Generate a synthetic household.
    Synth {
        /// Synthetic spec JSON; the default benchmark spec when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Run the whole pipeline.
    Run,
}

#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<nilm_core::Error>() {
            Some(inner) if inner.is_config() => Failure::Config(e),
            _ => Failure::Stage(e),
        }
    }
}

impl From<nilm_core::Error> for Failure {
    fn from(e: nilm_core::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.into())
        } else {
            Failure::Stage(e.into())
        }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow!(msg.into()))
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Import { input, format } => cmd_import(g, input, *format),
        Command::Diagnose {
            input,
            building,
            gap_threshold,
        } => cmd_diagnose(g, input, *building, *gap_threshold),
        Command::Stats {
            input,
            building,
            top_k,
            bins,
            on_threshold,
        } => cmd_stats(g, input, *building, *top_k, *bins, *on_threshold),
        Command::Preprocess => cmd_preprocess(g),
        Command::Train { input } => cmd_train(g, input),
        Command::Disaggregate { input, models } => cmd_disaggregate(g, input, models),
        Command::Evaluate {
            input,
            predictions,
            models,
        } => cmd_evaluate(g, input, predictions, models.as_deref()),
        Command::Synth { spec } => cmd_synth(g, spec.as_deref()),
        Command::Run => cmd_run(g),
    }
}

/// Sets `value` at a dotted path, creating objects on the way.
fn set_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(config_error(format!("invalid --set key `{key}`")));
        }
        let obj = match cur {
            Value::Object(map) => map,
            other => {
                *other = Value::Object(Default::default());
                other.as_object_mut().expect("just replaced")
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn parse_override(kv: &str) -> CliResult<(String, Value)> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| config_error(format!("--set expects K=V, got `{kv}`")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Config from `--config` (or the default synthetic benchmark), with
/// `--set`, `--seed` and `--output` applied and dataset paths resolved
/// against `NILM_DATA_DIR`.
fn load_config(g: &Global) -> CliResult<RunConfig> {
    let mut value = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))?
        }
        None => serde_json::to_value(RunConfig::default_synth()).map_err(|e| config_error(e.to_string()))?,
    };
    for kv in &g.set {
        let (k, v) = parse_override(kv)?;
        set_path(&mut value, &k, v)?;
    }
    if let Some(seed) = g.seed {
        set_path(&mut value, "seed", seed.into())?;
    }
    if let Some(out) = &g.output {
        set_path(&mut value, "output", Value::String(out.display().to_string()))?;
    }
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| config_error(format!("invalid config: {e}")))?;
    if let Some(p) = &cfg.dataset.path {
        cfg.dataset.path = Some(resolve_data_path(p));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_data_path(p: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_VAR) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

fn output_dir(g: &Global, cfg: Option<&RunConfig>) -> CliResult<PathBuf> {
    g.output
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .ok_or_else(|| config_error("no output directory: pass --output or set `output` in the config"))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(Failure::Stage)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Stage)
}

fn stage<T>(name: &str, r: nilm_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure::from(e.in_stage(name)))
}

fn load_building(input: &Path, id: u32) -> CliResult<Building> {
    let ds = stage("import", load_nilmtk_df(&resolve_data_path(input)))?;
    stage("import", ds.building(id).cloned())
}

fn say(g: &Global, text: &str) {
    if !g.quiet {
        print!("{text}");
    }
}

fn cmd_import(g: &Global, input: &Path, format: Format) -> CliResult<()> {
    let out = output_dir(g, None)?;
    let input = resolve_data_path(input);
    let ds: DataSet = match format {
        Format::Redd => {
            let (ds, report) = stage("import", import_redd_style(&input))?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Stage(e.into()))?;
            say(g, &format!("{json}\n"));
            ds
        }
        Format::NilmtkDf => stage("import", load_nilmtk_df(&input))?,
    };
    stage("import", save_nilmtk_df(&ds, &out))?;
    log::info!("wrote {} building(s) to {}", ds.buildings.len(), out.display());
    Ok(())
}

fn cmd_diagnose(g: &Global, input: &Path, building: u32, gap_threshold: Option<f64>) -> CliResult<()> {
    let b = load_building(input, building)?;
    let report = diagnose(&b, gap_threshold);
    match &g.output {
        Some(out) => {
            create_dir(out)?;
            write_file(&out.join("channels.csv"), &report.channels_csv())?;
            write_file(&out.join("summary.csv"), &report.summary_csv())?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Stage(e.into()))?;
            write_file(&out.join("diagnostics.json"), &format!("{json}\n"))?;
        }
        None => say(g, &format!("{}\n{}", report.summary_csv(), report.channels_csv())),
    }
    Ok(())
}

fn cmd_stats(g: &Global, input: &Path, building: u32, top_k: usize, bins: usize, on_threshold: f64) -> CliResult<()> {
    let b = load_building(input, building)?;
    let mut energy = String::from("appliance,energy_kwh,fraction\n");
    for a in stage("stats", stats::appliance_energies(&b))? {
        energy.push_str(&format!("{},{},{}\n", a.name, a.energy / 3.6e6, a.fraction));
    }
    let mut top = String::from("rank,appliance,energy_kwh\n");
    for (i, a) in stage("stats", stats::top_k_appliances(&b, top_k))?.iter().enumerate() {
        top.push_str(&format!("{},{},{}\n", i + 1, a.name, a.energy / 3.6e6));
    }
    let mut summary = String::from("metric,value\n");
    match stats::proportion_energy_submetered(&b, None) {
        Ok(p) => summary.push_str(&format!("proportion_energy_submetered,{p}\n")),
        Err(e) => log::warn!("proportion sub-metered unavailable: {e}"),
    }
    let Some(out) = &g.output else {
        say(g, &format!("{summary}\n{energy}\n{top}"));
        return Ok(());
    };
    create_dir(out)?;
    write_file(&out.join("summary.csv"), &summary)?;
    write_file(&out.join("energy.csv"), &energy)?;
    write_file(&out.join("top_k.csv"), &top)?;
    let mut hours = String::from("appliance");
    for h in 0..24 {
        hours.push_str(&format!(",h{h:02}"));
    }
    hours.push('\n');
    for (name, c) in &b.appliances {
        if c.is_empty() {
            continue;
        }
        let hist = stage("stats", stats::power_histogram(c, bins))?;
        write_file(&out.join(format!("histogram_{name}.csv")), &hist.to_csv())?;
        let counts = stage("stats", stats::usage_histogram_hour_of_day(c, on_threshold))?;
        hours.push_str(name);
        for n in counts {
            hours.push_str(&format!(",{n}"));
        }
        hours.push('\n');
        let runs = stage("stats", stats::on_off_durations(c, on_threshold, None))?;
        let mut csv = String::from("state,duration_s\n");
        for d in &runs.on {
            csv.push_str(&format!("on,{d}\n"));
        }
        for d in &runs.off {
            csv.push_str(&format!("off,{d}\n"));
        }
        write_file(&out.join(format!("on_off_{name}.csv")), &csv)?;
    }
    write_file(&out.join("hour_of_day.csv"), &hours)?;
    for (rel, text) in &b.passthrough {
        let Some(series_name) = rel.strip_prefix("external/").and_then(|r| r.strip_suffix(".csv")) else {
            continue;
        };
        let series = parse_daily_series(text).map_err(Failure::Stage)?;
        for (name, c) in &b.appliances {
            if let Ok(r) = stats::correlate_daily(c, &series) {
                write_file(&out.join(format!("regression_{name}_{series_name}.csv")), &r.to_csv())?;
            }
        }
    }
    Ok(())
}

fn parse_daily_series(text: &str) -> anyhow::Result<std::collections::BTreeMap<i64, f64>> {
    let mut out = std::collections::BTreeMap::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let (d, v) = line.split_once(',').ok_or_else(|| anyhow!("bad external row `{line}`"))?;
        out.insert(d.trim().parse()?, v.trim().parse()?);
    }
    Ok(out)
}

fn cmd_preprocess(g: &Global) -> CliResult<()> {
    let cfg = load_config(g)?;
    let out = output_dir(g, Some(&cfg))?;
    let ds = stage("import", pipeline::load_dataset(&cfg.dataset, cfg.seed))?;
    let b = stage("import", ds.building(cfg.building).cloned())?;
    let clean = stage("preprocess", pipeline::preprocess(&b, &cfg.preprocessing))?;
    let (train, test) = stage("split", train_test_split(&clean, cfg.split_fraction))?;
    stage("preprocess", save_building(&train, "train", &out.join("train")))?;
    stage("preprocess", save_building(&test, "test", &out.join("test")))?;
    log::info!("wrote {} and {}", out.join("train").display(), out.join("test").display());
    Ok(())
}

fn cmd_train(g: &Global, input: &Path) -> CliResult<()> {
    let cfg = load_config(g)?;
    let out = output_dir(g, Some(&cfg))?;
    let b = load_building(input, cfg.building)?;
    create_dir(&out)?;
    for &algo in &cfg.algorithms {
        let model = stage(&format!("train_{}", algo.name()), pipeline::train(algo, &b, cfg.feature, &cfg.states))?;
        let json = stage("train", export_model_json(&model))?;
        write_file(&out.join(format!("model_{}.json", algo.name())), &json)?;
    }
    Ok(())
}

fn read_model(dir: &Path, algo: &str) -> CliResult<Model> {
    let path = dir.join(format!("model_{algo}.json"));
    let text = fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Stage)?;
    stage("import", import_model_json(&text))
}

fn cmd_disaggregate(g: &Global, input: &Path, models: &Path) -> CliResult<()> {
    let cfg = load_config(g)?;
    let out = output_dir(g, Some(&cfg))?;
    let b = load_building(input, cfg.building)?;
    for &algo in &cfg.algorithms {
        let model = read_model(models, algo.name())?;
        let name = format!("disaggregate_{}", algo.name());
        let p = stage(&name, pipeline::disaggregate(&model, &b, cfg.feature))?;
        let ds = stage(&name, predictions_dataset(&p, &b, algo))?;
        stage(&name, save_nilmtk_df(&ds, &out.join(format!("predictions_{}", algo.name()))))?;
    }
    Ok(())
}

fn cmd_evaluate(g: &Global, input: &Path, predictions: &Path, models: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(g)?;
    let out = output_dir(g, Some(&cfg))?;
    let truth = load_building(input, cfg.building)?;
    let mut reports = Vec::new();
    for &algo in &cfg.algorithms {
        let states = match models {
            Some(dir) => Some(model_states(&read_model(dir, algo.name())?)),
            None => None,
        };
        let pb = load_building(&predictions.join(format!("predictions_{}", algo.name())), cfg.building)?;
        let name = format!("evaluate_{}", algo.name());
        let p = stage(&name, predictions_from_building(&pb, cfg.feature, states.as_deref()))?;
        let mut r = stage(&name, evaluate(&p, &truth, &cfg.state_rule, states.as_deref()))?;
        r.algorithm = algo.name().to_string();
        reports.push(r);
    }
    create_dir(&out)?;
    write_file(&out.join("report.csv"), &filter_report_csv(&reports_to_csv(&reports), &cfg.metrics))?;
    write_file(&out.join("report.json"), &stage("evaluate", reports_to_json(&reports))?)?;
    Ok(())
}

fn cmd_synth(g: &Global, spec: Option<&Path>) -> CliResult<()> {
    let out = output_dir(g, None)?;
    let mut spec: SynthSpec = match spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read spec {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("invalid spec {}: {e}", path.display())))?
        }
        None => default_benchmark_spec(),
    };
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let generated = stage("synth", generate(&spec))?;
    stage("synth", save_nilmtk_df(&generated.dataset, &out))?;
    log::info!("wrote synthetic household (seed {}) to {}", spec.seed, out.display());
    Ok(())
}

fn cmd_run(g: &Global) -> CliResult<()> {
    let cfg = load_config(g)?;
    let out = output_dir(g, Some(&cfg))?;
    let outcome = pipeline::run(&cfg, &out)?;
    for r in &outcome.reports {
        log::info!("{}: NEP {:.3}, FTE {:.3}, F-score {:.3}", r.algorithm, r.nep, r.fte, r.f_score);
    }
    say(g, &format!("{}\n", out.join("report.csv").display()));
    Ok(())
}
