//! Command-line workflows and the run-directory contract.
//!
//! Every command writes into a run directory:
//!
//! ```text
//! <out>/manifest.json   written first: command, merged config, seed, input hashes
//! <out>/RUNNING         removed on success
//! <out>/FAILED          written on error, holds the message
//! <out>/...             command outputs with stable names
//! ```
//!
//! Each command accepts `--config file.json`; keys are the long flag names
//! with dashes replaced by underscores, and explicit flags win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{self, AlphaMode, FitConfig};
use crate::forecast::{self, EvalConfig, ForecastRequest, Predictor};
use crate::io::{self, LoadOptions};
use crate::likelihood::Dataset;
use crate::model::{EventType, ModelSpec};
use crate::simulate::{self, PresetName, PresetParams};
use crate::stability;
use crate::stats::{self, AcvOptions, Averaging};
use crate::catalog;

#[derive(Debug, Parser)]
#[command(name = "sdsh", version, about = "State-dependent Hawkes spread toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a multi-day synthetic dataset.
    GenData(GenDataArgs),
    /// Simulate one path and write it as CSV.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit on a dataset.
    Estimate(EstimateArgs),
    /// Evaluate the ergodicity conditions of a spec.
    CheckStability(StabilityArgs),
    /// Distributional and correlation diagnostics.
    Stats(StatsArgs),
    /// Monte-Carlo forecast from one day at one origin.
    Forecast(ForecastArgs),
    /// MSE table of Last, ACDP and SDSH predictors.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct RunArgs {
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file supplying defaults for the other flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct DataArgs {
    /// Dataset CSV (sidecar JSON next to it).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Intraday slot as `start,end` seconds.
    #[arg(long, value_parser = parse_slot)]
    pub slot: Option<(f64, f64)>,
    #[arg(long)]
    pub min_events: Option<usize>,
}

fn parse_slot(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected start,end")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(b > a && a >= 0.0) {
        return Err("slot must satisfy 0 ≤ start < end".into());
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct GenDataArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    /// Spec JSON file, or `catalog:<name>` (demo, recovery, slow-memory, fosset).
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub days: Option<usize>,
    /// Id of the first day; day `i` is the same path for a given seed
    /// whatever the range, so train and test files can be cut from one run.
    #[arg(long)]
    pub first_id: Option<u64>,
    /// Day length in seconds.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub s0: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub s0: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Decay grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub betas: Vec<f64>,
    /// Log grid `β_1 10^{l-1}` used when `--betas` is absent.
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub n_decays: Option<usize>,
    #[arg(long)]
    pub sbar: Option<u32>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Allow negative kernel weights.
    #[arg(long)]
    pub signed: Option<bool>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct StabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub spec: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Fitted spec for influence maps and kernel curves.
    #[arg(long)]
    pub spec: Option<String>,
    /// ACV increment widths in seconds.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// ACV / ACF lags in seconds.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub taus: Vec<f64>,
    /// Slot length for ACF and ACV in seconds.
    #[arg(long)]
    pub slot_length: Option<f64>,
    /// ACF sampling grid in seconds.
    #[arg(long)]
    pub grid: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct ForecastArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub day: Option<u64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub spec: Option<String>,
    /// Day ids used for fitting the spec; must not overlap the test days.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub train_ids: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub eval_start: Option<f64>,
    #[arg(long)]
    pub eval_end: Option<f64>,
    /// Skip the ACDP benchmark.
    #[arg(long)]
    pub no_acdp: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Overlays explicit flags on the optional JSON config file.
pub fn merge_config<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut base: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let over = serde_json::to_value(flags)?;
    let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) else {
        return Err(Error::Config(format!("{}: top level must be an object", path.display())));
    };
    for (k, v) in o {
        let empty = v.is_null() || v.as_array().is_some_and(|a| a.is_empty());
        if !empty || !b.contains_key(k) {
            b.insert(k.clone(), v.clone());
        }
    }
    let de = serde_json::Value::Object(b.clone());
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Config(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))
}

fn fosset_default() -> PresetParams {
    PresetParams {
        mu_plus: Some(0.2),
        mu_minus: Some(0.5),
        beta: Some(1.0),
        alpha: Some(0.4),
        ..Default::default()
    }
}

/// Resolves `catalog:<name>` or reads a spec JSON file.
pub fn load_spec(source: &str) -> Result<ModelSpec> {
    if let Some(name) = source.strip_prefix("catalog:") {
        return match name {
            "demo" => Ok(catalog::demo()),
            "recovery" => Ok(catalog::recovery()),
            "slow-memory" => Ok(catalog::slow_memory()),
            "fosset" => simulate::preset(PresetName::Fosset, &fosset_default()),
            other => Err(Error::Config(format!("unknown catalog spec '{other}'"))),
        };
    }
    let text = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    ModelSpec::from_json(&text)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory of one command invocation.
pub struct RunDir {
    pub root: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub crate_version: String,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
}

impl RunDir {
    /// Creates the directory and writes the manifest and the `RUNNING` marker.
    pub fn create(root: &Path, command: &str, config: serde_json::Value, inputs: &[&Path]) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let _ = std::fs::remove_file(root.join("FAILED"));
        let mut hashes = BTreeMap::new();
        for p in inputs {
            hashes.insert(p.display().to_string(), sha256_file(p)?);
            let side = io::sidecar_path(p);
            if p.extension().is_some_and(|e| e == "csv") && side.exists() {
                hashes.insert(side.display().to_string(), sha256_file(&side)?);
            }
        }
        let manifest = Manifest {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: hashes,
        };
        let run = RunDir { root: root.to_path_buf() };
        run.write("manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
        run.write("RUNNING", "")?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<()> {
        self.write(name, &(serde_json::to_string_pretty(v)? + "\n"))
    }

    fn finish(&self, outcome: &Result<()>) {
        let _ = std::fs::remove_file(self.path("RUNNING"));
        if let Err(e) = outcome {
            let _ = std::fs::write(self.path("FAILED"), format!("{e}\n"));
        }
    }
}

fn require<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Config(format!("missing required option `{name}`")))
}

fn out_dir(run: &RunArgs, command: &str) -> PathBuf {
    run.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(command))
}

fn load_data(d: &DataArgs) -> Result<(Dataset, io::DatasetSummary, PathBuf)> {
    let path = require(&d.data, "data")?;
    let (data, summary) = io::load_dataset(
        &path,
        &LoadOptions {
            slot: d.slot,
            min_events: d.min_events.unwrap_or(0),
            ..Default::default()
        },
    )?;
    eprintln!("{summary}");
    Ok((data, summary, path))
}

/// Runs `body` inside a fresh run directory, leaving `FAILED` on error.
fn with_run<F>(command: &str, out: PathBuf, config: serde_json::Value, inputs: &[PathBuf], body: F) -> Result<()>
where
    F: FnOnce(&RunDir) -> Result<()>,
{
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let run = RunDir::create(&out, command, config, &refs)?;
    let outcome = body(&run);
    run.finish(&outcome);
    outcome
}

fn spec_inputs(spec: &Option<String>) -> Vec<PathBuf> {
    spec.iter()
        .filter(|s| !s.starts_with("catalog:"))
        .map(PathBuf::from)
        .collect()
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let a: GenDataArgs = merge_config(args, args.run.config.as_deref())?;
    let spec_src = require(&a.spec, "spec")?;
    let inputs = spec_inputs(&a.spec);
    with_run("gen-data", out_dir(&a.run, "gen-data"), serde_json::to_value(&a)?, &inputs, |run| {
        let spec = load_spec(&spec_src)?;
        let first = a.first_id.unwrap_or(0);
        let data = io::generate_days(
            &spec,
            first..first + a.days.unwrap_or(50) as u64,
            a.horizon.unwrap_or(5000.0),
            a.s0.unwrap_or(1),
            a.seed.unwrap_or(0),
        )?;
        io::save_dataset(&data, &run.path("data.csv"))?;
        run.write("spec.json", &(spec.to_json()? + "\n"))?;
        let summary = io::DatasetSummary::of(&data, 0);
        println!("{summary}");
        run.write_json("summary.json", &summary)
    })
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let a: SimulateArgs = merge_config(args, args.run.config.as_deref())?;
    let spec_src = require(&a.spec, "spec")?;
    let inputs = spec_inputs(&a.spec);
    with_run("simulate", out_dir(&a.run, "simulate"), serde_json::to_value(&a)?, &inputs, |run| {
        let spec = load_spec(&spec_src)?;
        let path = simulate::simulate(&spec, require(&a.horizon, "horizon")?, a.s0.unwrap_or(1), a.seed.unwrap_or(0))?;
        let mut csv = String::from("time_s,jump,spread\n");
        let post = path.post_spreads();
        for (ev, s) in path.events().iter().zip(post) {
            csv.push_str(&format!("{},{},{}\n", io::format_time_ns(ev.time_ns), ev.etype.size(), s));
        }
        run.write("path.csv", &csv)?;
        println!("{} events, final spread {}", path.len(), path.final_spread());
        Ok(())
    })
}

/// Kernel, state-function and baseline tables of a spec.
fn spec_tables(spec: &ModelSpec, run: &RunDir, prefix: &str) -> Result<()> {
    let k = spec.k;
    let mut mu = String::from("type,mu\n");
    for e in EventType::all(k) {
        mu.push_str(&format!("{e},{}\n", spec.mus[e.index(k)]));
    }
    run.write(&format!("{prefix}mu.csv"), &mu)?;
    let mut f = String::from("type,spread,f\n");
    for e in EventType::all(k) {
        for s in 1..=spec.statefns.sbar {
            f.push_str(&format!("{e},{s},{}\n", spec.statefns.value(e.index(k), s)));
        }
    }
    run.write(&format!("{prefix}f.csv"), &f)?;
    let grid = stats::log_grid(1e-4, 10.0, 121);
    let mut kc = String::from("target,source,t_s,phi\n");
    for tgt in EventType::all(k) {
        for src in EventType::all(k) {
            for (t, v) in stats::kernel_curve(spec, tgt, src, &grid) {
                kc.push_str(&format!("{tgt},{src},{t:.9e},{v:.9e}\n"));
            }
        }
    }
    run.write(&format!("{prefix}kernels.csv"), &kc)
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let a: EstimateArgs = merge_config(args, args.run.config.as_deref())?;
    let inputs: Vec<PathBuf> = a.data.data.iter().cloned().collect();
    with_run("estimate", out_dir(&a.run, "estimate"), serde_json::to_value(&a)?, &inputs, |run| {
        let (data, _, _) = load_data(&a.data)?;
        let betas = if a.betas.is_empty() {
            FitConfig::log_grid(a.beta1.unwrap_or(0.1), a.n_decays.unwrap_or(6))
        } else {
            a.betas.clone()
        };
        let k = a.k.unwrap_or_else(|| data.max_jump().max(1));
        let mut cfg = FitConfig::new(k, betas, a.sbar.unwrap_or(k as u32 + 4));
        if let Some(m) = a.max_iter {
            cfg.max_iter = m;
        }
        if a.signed.unwrap_or(false) {
            cfg.alpha_mode = AlphaMode::Signed;
        }
        cfg.min_events = a.data.min_events.unwrap_or(0);
        let report = fit::fit(&data, &cfg, None)?;
        run.write_json("fit_report.json", &report)?;
        run.write("spec.json", &(report.spec.to_json()? + "\n"))?;
        spec_tables(&report.spec, run, "")?;
        println!(
            "loglik {:.6}  events {}  params {}  converged {}  iterations {}",
            report.loglik, report.n_events, report.n_free_params, report.converged, report.iterations
        );
        Ok(())
    })
}

pub fn check_stability(args: &StabilityArgs) -> Result<()> {
    let a: StabilityArgs = merge_config(args, args.run.config.as_deref())?;
    let spec_src = require(&a.spec, "spec")?;
    let inputs = spec_inputs(&a.spec);
    with_run("check-stability", out_dir(&a.run, "check-stability"), serde_json::to_value(&a)?, &inputs, |run| {
        let spec = load_spec(&spec_src)?;
        let report = if spec.k == 1 && spec.n_decays() == 1 {
            stability::check_k1(&spec)?
        } else {
            stability::check_general(&spec)?
        };
        print!("{}", report.to_table());
        run.write("stability.txt", &report.to_table())?;
        run.write_json("stability.json", &report)
    })
}

pub fn stats_cmd(args: &StatsArgs) -> Result<()> {
    let a: StatsArgs = merge_config(args, args.run.config.as_deref())?;
    let mut inputs: Vec<PathBuf> = a.data.data.iter().cloned().collect();
    inputs.extend(spec_inputs(&a.spec));
    with_run("stats", out_dir(&a.run, "stats"), serde_json::to_value(&a)?, &inputs, |run| {
        let (data, summary, _) = load_data(&a.data)?;
        let mut files: BTreeMap<&str, &str> = BTreeMap::new();
        run.write("calendar_pmf.csv", &stats::calendar_distribution(&data, Averaging::Daily)?.to_csv())?;
        files.insert("calendar_pmf.csv", "value,probability");
        run.write("event_pmf.csv", &stats::event_distribution(&data, Averaging::Daily)?.to_csv())?;
        files.insert("event_pmf.csv", "value,probability");
        let jumps = stats::jump_size_distribution(&data)?;
        run.write("jump_pmf.csv", &jumps.to_csv())?;
        files.insert("jump_pmf.csv", "value,probability");

        let mut iet = String::from("s1,s2,dt_s\n");
        for ((s1, s2), v) in stats::conditional_inter_event_times(&data) {
            for dt in v {
                iet.push_str(&format!("{s1},{s2},{dt:.9}\n"));
            }
        }
        run.write("inter_event_times.csv", &iet)?;
        files.insert("inter_event_times.csv", "s1,s2,dt_s (s1 = S(t_i+), s2 = S(t_{i+1}+))");

        let taus = if a.taus.is_empty() {
            vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
        } else {
            a.taus.clone()
        };
        let mut acf_lags = vec![0.0];
        acf_lags.extend(taus.iter().copied());
        let acf = stats::spread_autocorrelation(&data, &acf_lags, a.slot_length, a.grid.unwrap_or(0.1))?;
        if let Some(d) = &acf.diagnostic {
            log::warn!("{d}");
        }
        run.write("acf.csv", &acf.to_csv())?;
        files.insert("acf.csv", "lag_s,acf");

        let deltas = if a.deltas.is_empty() { vec![0.01, 0.1, 1.0] } else { a.deltas.clone() };
        let mut acv_csv = String::from("delta_s,tau_s,acv,pairs\n");
        for d in deltas {
            let usable: Vec<f64> = taus.iter().copied().filter(|t| *t >= 2.0 * d).collect();
            if usable.is_empty() {
                continue;
            }
            let c = stats::acv(&data, d, &usable, AcvOptions { min_ratio: 2.0, slot_length: a.slot_length })?;
            acv_csv.push_str(c.to_csv().split_once('\n').map(|x| x.1).unwrap_or(""));
        }
        run.write("acv.csv", &acv_csv)?;
        files.insert("acv.csv", "delta_s,tau_s,acv,pairs");

        if let Some(src) = &a.spec {
            let spec = load_spec(src)?;
            let rows = stats::kernel_influence(&spec, &data)?;
            run.write("influence.csv", &stats::influence_csv(&rows, spec.k))?;
            files.insert("influence.csv", "spread,type,n_events,src<type>...");
            spec_tables(&spec, run, "spec_")?;
            files.insert("spec_kernels.csv", "target,source,t_s,phi");
            files.insert("spec_f.csv", "type,spread,f");
            files.insert("spec_mu.csv", "type,mu");
        }
        run.write_json(
            "stats_manifest.json",
            &serde_json::json!({ "summary": summary, "recommended_k": stats::recommend_k(&jumps, 0.01), "files": files }),
        )
    })
}

pub fn forecast_cmd(args: &ForecastArgs) -> Result<()> {
    let a: ForecastArgs = merge_config(args, args.run.config.as_deref())?;
    let mut inputs: Vec<PathBuf> = a.data.data.iter().cloned().collect();
    inputs.extend(spec_inputs(&a.spec));
    with_run("forecast", out_dir(&a.run, "forecast"), serde_json::to_value(&a)?, &inputs, |run| {
        let spec = load_spec(&require(&a.spec, "spec")?)?;
        let (data, _, _) = load_data(&a.data)?;
        let day_id = a.day.unwrap_or_else(|| data.days.first().map(|d| d.id).unwrap_or(0));
        let day = data
            .days
            .iter()
            .find(|d| d.id == day_id)
            .ok_or_else(|| Error::Argument(format!("day {day_id} not in the dataset")))?;
        let mut req = ForecastRequest::new(require(&a.t0, "t0")?, require(&a.horizon, "horizon")?, a.seed.unwrap_or(0));
        if let Some(w) = a.window {
            req.window = w;
        }
        if let Some(n) = a.n_paths {
            req.n_paths = n;
        }
        let res = forecast::sdsh_forecast(&spec, &day.path, &req)?;
        println!(
            "S(t0) = {}  E[S(t0+{})] = {:.4}  ({} paths, {} window events)",
            res.spread_t0, req.horizon, res.mean, req.n_paths, res.window_events
        );
        run.write_json("forecast.json", &serde_json::json!({ "request": req, "result": res }))
    })
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let a: EvaluateArgs = merge_config(args, args.run.config.as_deref())?;
    let mut inputs: Vec<PathBuf> = a.data.data.iter().cloned().collect();
    inputs.extend(spec_inputs(&a.spec));
    with_run("evaluate", out_dir(&a.run, "evaluate"), serde_json::to_value(&a)?, &inputs, |run| {
        let spec = a.spec.as_deref().map(load_spec).transpose()?;
        let (data, _, _) = load_data(&a.data)?;
        let mut cfg = EvalConfig {
            seed: a.seed.unwrap_or(0),
            ..Default::default()
        };
        if !a.deltas.is_empty() {
            cfg.deltas = a.deltas.clone();
        }
        if let Some(n) = a.n_paths {
            cfg.n_paths = n;
        }
        if let Some(s) = a.eval_start {
            cfg.eval_start = s;
        }
        if let Some(e) = a.eval_end {
            cfg.eval_end = e;
        }
        cfg.predictors = vec![Predictor::Last];
        if !a.no_acdp.unwrap_or(false) {
            cfg.predictors.push(Predictor::Acdp);
        }
        if spec.is_some() {
            cfg.predictors.push(Predictor::Sdsh);
        }
        let table = forecast::evaluate(spec.as_ref(), &a.train_ids, &data, &cfg)?;
        print!("{}", table.to_table());
        run.write("mse.csv", &table.to_csv())?;
        run.write("mse.txt", &table.to_table())?;
        run.write_json("evaluation.json", &serde_json::json!({ "config": cfg, "table": table }))
    })
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Estimate(a) => estimate(a),
        Command::CheckStability(a) => check_stability(a),
        Command::Stats(a) => stats_cmd(a),
        Command::Forecast(a) => forecast_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_merge_prefers_flags_and_names_bad_fields() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"days": 3, "horizon": 10.0, "seed": 5}"#).unwrap();
        let flags = GenDataArgs {
            seed: Some(9),
            ..Default::default()
        };
        let m: GenDataArgs = merge_config(&flags, Some(&cfg)).unwrap();
        assert_eq!(m.days, Some(3));
        assert_eq!(m.seed, Some(9));

        std::fs::write(&cfg, r#"{"days": "many"}"#).unwrap();
        let err = merge_config(&flags, Some(&cfg)).unwrap_err().to_string();
        assert!(err.contains("days"), "{err}");
    }

    #[test]
    fn failure_leaves_marker() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let args = SimulateArgs {
            run: RunArgs {
                out: Some(out.clone()),
                config: None,
            },
            spec: Some("catalog:demo".into()),
            horizon: Some(-1.0),
            ..Default::default()
        };
        assert!(simulate_cmd(&args).is_err());
        assert!(out.join("manifest.json").exists());
        assert!(out.join("FAILED").exists());
        assert!(!out.join("RUNNING").exists());
    }

    #[test]
    fn pipeline_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let gen = dir.path().join("gen");
        gen_data(&GenDataArgs {
            run: RunArgs { out: Some(gen.clone()), config: None },
            spec: Some("catalog:demo".into()),
            days: Some(2),
            first_id: None,
            horizon: Some(300.0),
            s0: Some(2),
            seed: Some(1),
        })
        .unwrap();
        assert!(gen.join("data.csv").exists() && !gen.join("RUNNING").exists());
        let st = dir.path().join("stats");
        stats_cmd(&StatsArgs {
            run: RunArgs { out: Some(st.clone()), config: None },
            data: DataArgs { data: Some(gen.join("data.csv")), ..Default::default() },
            spec: Some("catalog:demo".into()),
            taus: vec![1.0, 5.0],
            deltas: vec![0.1],
            ..Default::default()
        })
        .unwrap();
        for f in ["calendar_pmf.csv", "acv.csv", "influence.csv", "stats_manifest.json"] {
            assert!(st.join(f).exists(), "{f}");
        }
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(st.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest.inputs.len(), 2);
    }
}
