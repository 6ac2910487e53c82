use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use ttm_core::experiments::{observe_labels, run_sweep, write_outputs, CellStatus, SweepConfig};
use ttm_core::hmm::{
    build_hmm, extract_state_sequence, forward, viterbi, Hmm, ObservationModel,
    ObservationSequence,
};
use ttm_core::model::{generate_model, ActivitySet, EnsembleParams, ProcessModel};
use ttm_core::predict::{predict_ttm, ForecastOptions, InProgressMode};
use ttm_core::rng::stream2;
use ttm_core::sim::{run_ensemble, SimOptions, SimulationTrace, DEFAULT_CONCENTRATION};

use crate::config::{resolve, take_path};
use crate::{Common, Failure};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("{}: not a valid {what}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<ProcessModel, Failure> {
    let model: ProcessModel = read_json(path, "process model")?;
    model.ensure_valid()?;
    Ok(model)
}

fn required(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf, Failure> {
    path.clone().ok_or_else(|| Failure::invalid(format!("--{flag} is required")))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

/// Writes `value` as JSON to `out`, or to stdout when no path is given.
/// The summary goes to stdout after a file write and to stderr otherwise,
/// so piped JSON stays clean.
fn emit<T: Serialize>(out: Option<&Path>, value: &T, summary: &str) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    match out {
        Some(path) => {
            write_text(path, &text)?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn parse_map<T: serde::de::DeserializeOwned>(map: Map<String, Value>, what: &str) -> Result<T, Failure> {
    serde_json::from_value(Value::Object(map))
        .map_err(|e| Failure::invalid(format!("{what} configuration: {e}")))
}

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Number of activities.
    #[arg(long)]
    n: Option<usize>,
    /// Number of resources.
    #[arg(long)]
    m: Option<usize>,
    /// Dependency edge probability.
    #[arg(long)]
    p: Option<f64>,
    /// Resource edge probability.
    #[arg(long)]
    q: Option<f64>,
    /// uncontended or max_requirement.
    #[arg(long)]
    availability_policy: Option<String>,
}

pub fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut map: Map<String, Value> = resolve(args.common.config.as_ref(), "generate", &args)?;
    let out = take_path(&mut map, "out")?;
    let params: EnsembleParams = parse_map(map, "generate")?;
    let model = generate_model(&params)?;
    let summary = format!(
        "model: n={} m={} dependency edges={} resource edges={}",
        model.n,
        model.m,
        model.dependency_edge_count(),
        model.resource_edge_count()
    );
    emit(out.as_deref(), &model, &summary)
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Process model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of runs; run i uses seed + i.
    #[arg(long)]
    runs: Option<usize>,
    /// Tick length in days.
    #[arg(long)]
    tick: Option<f64>,
    /// Beta concentration for durations.
    #[arg(long)]
    concentration: Option<f64>,
    /// Also write noisy observations of the first run (.json or .csv).
    #[arg(long)]
    obs_out: Option<PathBuf>,
    /// Probability that a required resource is observed in a tick.
    #[arg(long)]
    obs_prob: Option<f64>,
    /// Number of observed ticks; pads with empty observations past the end.
    #[arg(long)]
    obs_len: Option<usize>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateConfig {
    model: Option<PathBuf>,
    seed: u64,
    runs: usize,
    tick: f64,
    concentration: f64,
    out: Option<PathBuf>,
    obs_out: Option<PathBuf>,
    obs_prob: f64,
    obs_len: Option<usize>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            model: None,
            seed: 0,
            runs: 1,
            tick: 1.0,
            concentration: DEFAULT_CONCENTRATION,
            out: None,
            obs_out: None,
            obs_prob: 0.5,
            obs_len: None,
        }
    }
}

fn run_seeds(seed: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|i| seed.wrapping_add(i)).collect()
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg: SimulateConfig = resolve(args.common.config.as_ref(), "simulate", &args)?;
    let model = load_model(&required(&cfg.model, "model")?)?;
    if cfg.runs == 0 {
        return Err(Failure::invalid("--runs must be at least 1"));
    }
    let sim = SimOptions { tick: cfg.tick, concentration: cfg.concentration };
    let traces = run_ensemble(&model, &run_seeds(cfg.seed, cfg.runs), &sim)?;

    if let Some(path) = &cfg.obs_out {
        let obs_model = ObservationModel::Uniform(cfg.obs_prob);
        obs_model.validate(model.n)?;
        let mut labels = extract_state_sequence(&traces[0], cfg.tick);
        if let Some(len) = cfg.obs_len {
            labels.resize(len, ActivitySet::empty());
        }
        let mut rng = stream2(cfg.seed, u32::MAX, 0);
        let obs = observe_labels(&model, &labels, &obs_model, &mut rng);
        let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        write_text(path, &if csv { obs.to_csv() } else { obs.to_json() + "\n" })?;
    }

    let mean = traces.iter().map(|t| t.total_time).sum::<f64>() / traces.len() as f64;
    let summary = format!("simulated {} run(s), mean total time {mean:.1} days", traces.len());
    if traces.len() == 1 {
        emit(cfg.out.as_deref(), &traces[0], &summary)
    } else {
        emit(cfg.out.as_deref(), &traces, &summary)
    }
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Process model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Training runs to simulate; run i uses seed + i.
    #[arg(long)]
    runs: Option<usize>,
    /// Train on these traces (one trace or a list) instead of simulating.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    tick: Option<f64>,
    #[arg(long)]
    concentration: Option<f64>,
    /// Probability that a required resource is observed in a tick.
    #[arg(long)]
    obs_prob: Option<f64>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainConfig {
    model: Option<PathBuf>,
    seed: u64,
    runs: usize,
    traces: Option<PathBuf>,
    tick: f64,
    concentration: f64,
    obs_prob: f64,
    out: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: None,
            seed: 0,
            runs: 1000,
            traces: None,
            tick: 1.0,
            concentration: DEFAULT_CONCENTRATION,
            obs_prob: 0.5,
            out: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TraceFile {
    Many(Vec<SimulationTrace>),
    One(SimulationTrace),
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let cfg: TrainConfig = resolve(args.common.config.as_ref(), "train", &args)?;
    let model = load_model(&required(&cfg.model, "model")?)?;
    let traces = match &cfg.traces {
        Some(path) => match read_json::<TraceFile>(path, "trace file")? {
            TraceFile::Many(t) => t,
            TraceFile::One(t) => vec![t],
        },
        None => {
            if cfg.runs == 0 {
                return Err(Failure::invalid("--runs must be at least 1"));
            }
            let sim = SimOptions { tick: cfg.tick, concentration: cfg.concentration };
            run_ensemble(&model, &run_seeds(cfg.seed, cfg.runs), &sim)?
        }
    };
    let hmm = build_hmm(&traces, &model, &ObservationModel::Uniform(cfg.obs_prob), cfg.tick)?;
    let summary = format!(
        "hmm: {} states from {} traces, triangular={}",
        hmm.state_count(),
        traces.len(),
        hmm.is_triangular()
    );
    emit(cfg.out.as_deref(), &hmm, &summary)
}

#[derive(Args, Serialize)]
pub struct InferArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// HMM JSON.
    #[arg(long)]
    hmm: Option<PathBuf>,
    /// Observation sequence (.json list of resource-id lists, or .csv 0/1 rows).
    #[arg(long)]
    obs: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct InferConfig {
    hmm: Option<PathBuf>,
    obs: Option<PathBuf>,
    out: Option<PathBuf>,
    /// Accepted for uniformity; decoding uses no randomness.
    #[allow(dead_code)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct DecodeReport {
    path: Vec<ActivitySet>,
    state_indices: Vec<usize>,
    log_prob: f64,
    log_likelihood: f64,
    final_state: ActivitySet,
}

fn load_inputs(hmm: &Option<PathBuf>, obs: &Option<PathBuf>) -> Result<(Hmm, ObservationSequence), Failure> {
    let hmm: Hmm = read_json(&required(hmm, "hmm")?, "HMM")?;
    let obs = ObservationSequence::read(&required(obs, "obs")?, hmm.resource_count())?;
    Ok((hmm, obs))
}

pub fn infer(args: InferArgs) -> Result<(), Failure> {
    let cfg: InferConfig = resolve(args.common.config.as_ref(), "infer", &args)?;
    let (hmm, obs) = load_inputs(&cfg.hmm, &cfg.obs)?;
    let log_likelihood = forward(&hmm, &obs)?;
    let best = viterbi(&hmm, &obs)?;
    let path: Vec<ActivitySet> = best.states.iter().map(|&s| hmm.label(s).clone()).collect();
    let report = DecodeReport {
        final_state: path.last().cloned().unwrap_or_default(),
        path,
        state_indices: best.states,
        log_prob: best.log_prob,
        log_likelihood,
    };
    let summary = format!(
        "decoded {} observations: final state {}, log p(path) {:.3}, log p(obs) {:.3}",
        obs.len(),
        report.final_state,
        report.log_prob,
        report.log_likelihood
    );
    emit(cfg.out.as_deref(), &report, &summary)
}

#[derive(Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Process model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// HMM JSON trained on the model.
    #[arg(long)]
    hmm: Option<PathBuf>,
    /// Observation sequence (.json or .csv).
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Number of resumed simulations.
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    tick: Option<f64>,
    #[arg(long)]
    concentration: Option<f64>,
    /// restart (default) or credit_elapsed.
    #[arg(long)]
    in_progress: Option<String>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PredictConfig {
    model: Option<PathBuf>,
    hmm: Option<PathBuf>,
    obs: Option<PathBuf>,
    seed: u64,
    ensemble_size: usize,
    tick: f64,
    concentration: f64,
    in_progress: InProgressMode,
    out: Option<PathBuf>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        let f = ForecastOptions::default();
        PredictConfig {
            model: None,
            hmm: None,
            obs: None,
            seed: f.seed,
            ensemble_size: f.ensemble_size,
            tick: f.sim.tick,
            concentration: f.sim.concentration,
            in_progress: f.in_progress,
            out: None,
        }
    }
}

pub fn predict(args: PredictArgs) -> Result<(), Failure> {
    let cfg: PredictConfig = resolve(args.common.config.as_ref(), "predict", &args)?;
    let model = load_model(&required(&cfg.model, "model")?)?;
    let (hmm, obs) = load_inputs(&cfg.hmm, &cfg.obs)?;
    let opts = ForecastOptions {
        ensemble_size: cfg.ensemble_size,
        seed: cfg.seed,
        sim: SimOptions { tick: cfg.tick, concentration: cfg.concentration },
        in_progress: cfg.in_progress,
    };
    let forecast = predict_ttm(&model, &hmm, &obs, &opts)?;
    emit(cfg.out.as_deref(), &forecast, &forecast.summary())
}

#[derive(Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated resource counts.
    #[arg(long, value_delimiter = ',')]
    m_values: Option<Vec<usize>>,
    /// Comma-separated dependency densities.
    #[arg(long, value_delimiter = ',')]
    p_values: Option<Vec<f64>>,
    /// Comma-separated resource-map densities.
    #[arg(long, value_delimiter = ',')]
    q_values: Option<Vec<f64>>,
    /// Samples per cell.
    #[arg(long)]
    samples: Option<usize>,
    /// Training simulations per sample.
    #[arg(long)]
    sub_simulations: Option<usize>,
    /// Evaluation runs per sample.
    #[arg(long)]
    test_runs: Option<usize>,
    /// Longest observation length evaluated.
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    obs_prob: Option<f64>,
    #[arg(long)]
    tick: Option<f64>,
    /// Confidence band percent.
    #[arg(long)]
    confidence: Option<f64>,
    /// sqrt_s (default) or s.
    #[arg(long)]
    sem_divisor: Option<String>,
    /// Replacement budget as a multiple of samples.
    #[arg(long)]
    replacement_factor: Option<usize>,
    /// uncontended or max_requirement.
    #[arg(long)]
    availability_policy: Option<String>,
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut map: Map<String, Value> = resolve(args.common.config.as_ref(), "sweep", &args)?;
    let out = take_path(&mut map, "out")?.unwrap_or_else(|| PathBuf::from("sweep-out"));
    let config: SweepConfig = parse_map(map, "sweep")?;
    let report = run_sweep(&config)?;
    write_outputs(&report, &out)?;
    for r in &report.results {
        match (&r.status, &r.curve) {
            (CellStatus::Ok, Some(curve)) => println!(
                "cell {} m={} p={} q={}: max success {:.3}, success at l={} {:.3}, {} replacements",
                r.cell_id,
                r.cell.m,
                r.cell.p,
                r.cell.q,
                r.cutoffs.as_ref().map_or(f64::NAN, |c| c.max_rate),
                curve.lengths.len().min(20),
                curve.mean[curve.lengths.len().min(20) - 1],
                r.replacements
            ),
            (status, _) => eprintln!("cell {} m={} p={} q={}: {status:?}", r.cell_id, r.cell.m, r.cell.p, r.cell.q),
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}
