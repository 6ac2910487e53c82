//! Density sweeps: random models per (m, p, q) cell, HMMs trained on their
//! simulated ensembles, and matching-success curves from noisy replays.

mod evaluate;
mod output;
mod stats;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{build_hmm, Hmm, ObservationModel};
use crate::model::{generate_model, AvailabilityPolicy, EnsembleParams, ProcessModel};
use crate::rng::{stream2, SimRng};
use crate::sim::{run_ensemble, SimOptions, DEFAULT_CONCENTRATION};

pub use evaluate::{evaluate_sample, observe_labels, SampleEvaluation};
pub use output::{write_outputs, CUTOFF_HEADER, SUCCESS_HEADER};
pub use stats::{
    confidence_band, cutoff_statistics, z_score, Band, CutoffSummary, SemDivisor, SuccessCurve,
    CUTOFF_THRESHOLDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub m: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub m_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    /// Explicit cell list used instead of the m x p x q grid.
    pub cells: Option<Vec<Cell>>,
    pub samples: usize,
    pub sub_simulations: usize,
    pub test_runs: usize,
    pub max_len: usize,
    pub obs_prob: f64,
    pub tick: f64,
    pub concentration: f64,
    pub confidence: f64,
    pub sem_divisor: SemDivisor,
    /// Replacement samples allowed per cell, as a multiple of `samples`.
    pub replacement_factor: usize,
    pub availability_policy: AvailabilityPolicy,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n: 20,
            m_values: vec![5, 10, 15],
            p_values: vec![0.2, 0.4, 0.6, 0.8],
            q_values: vec![0.2, 0.4, 0.6, 0.8],
            cells: None,
            samples: 100,
            sub_simulations: 1000,
            test_runs: 100,
            max_len: 100,
            obs_prob: 0.5,
            tick: 1.0,
            concentration: DEFAULT_CONCENTRATION,
            confidence: 95.0,
            sem_divisor: SemDivisor::SqrtS,
            replacement_factor: 5,
            availability_policy: AvailabilityPolicy::default(),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn cell_list(&self) -> Vec<Cell> {
        if let Some(cells) = &self.cells {
            return cells.clone();
        }
        let mut cells = Vec::new();
        for &m in &self.m_values {
            for &p in &self.p_values {
                for &q in &self.q_values {
                    cells.push(Cell { m, p, q });
                }
            }
        }
        cells
    }

    pub fn lengths(&self) -> Vec<usize> {
        (1..=self.max_len).collect()
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions { tick: self.tick, concentration: self.concentration }
    }

    pub fn observation_model(&self) -> ObservationModel {
        ObservationModel::Uniform(self.obs_prob)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n", self.n),
            ("samples", self.samples),
            ("sub_simulations", self.sub_simulations),
            ("test_runs", self.test_runs),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be at least 1")));
        }
        if self.samples < 2 {
            return Err(Error::invalid("confidence bands need at least 2 samples per cell"));
        }
        let cells = self.cell_list();
        if cells.is_empty() {
            return Err(Error::invalid("sweep has no cells"));
        }
        for c in &cells {
            if c.m == 0 || !(0.0..=1.0).contains(&c.p) || !(0.0..=1.0).contains(&c.q) {
                return Err(Error::invalid(format!("bad cell {c:?}")));
            }
        }
        self.observation_model().validate(self.n)?;
        self.sim_options().validate()?;
        z_score(self.confidence)?;
        Ok(())
    }
}

/// A trained sample: its model, HMM and the rng left for evaluation.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub slot: usize,
    pub model: ProcessModel,
    pub hmm: Hmm,
    pub mean_completion_time: f64,
    rng: SimRng,
}

/// Draws the model for `slot` of cell `cell_index`, simulates its training
/// ensemble and builds the HMM. Everything derives from
/// (config.seed, cell_index, slot).
pub fn prepare_sample(config: &SweepConfig, cell_index: usize, slot: usize) -> Result<PreparedSample> {
    let cell = config
        .cell_list()
        .get(cell_index)
        .copied()
        .ok_or_else(|| Error::invalid(format!("no cell {cell_index}")))?;
    let mut rng = stream2(config.seed, cell_index as u32, slot as u32);
    let params = EnsembleParams {
        n: config.n,
        m: cell.m,
        p: cell.p,
        q: cell.q,
        seed: rng.random(),
        availability_policy: config.availability_policy,
        ..Default::default()
    };
    let model = generate_model(&params)?;
    let seeds: Vec<u64> = (0..config.sub_simulations).map(|_| rng.random()).collect();
    let sim = config.sim_options();
    let traces = run_ensemble(&model, &seeds, &sim)?;
    let mean_completion_time =
        traces.iter().map(|t| t.total_time).sum::<f64>() / traces.len() as f64;
    let hmm = build_hmm(&traces, &model, &config.observation_model(), config.tick)?;
    Ok(PreparedSample { slot, model, hmm, mean_completion_time, rng })
}

impl PreparedSample {
    pub fn evaluate(mut self, config: &SweepConfig) -> Result<SampleResult> {
        let eval = evaluate_sample(
            &self.model,
            &self.hmm,
            config.test_runs,
            &config.lengths(),
            &config.observation_model(),
            &config.sim_options(),
            &mut self.rng,
        )?;
        Ok(SampleResult {
            slot: self.slot,
            success: eval.success_rates(),
            path_accuracy: eval.path_accuracy_rates(),
            undecodable_runs: eval.undecodable_runs,
            mean_completion_time: self.mean_completion_time,
            state_count: self.hmm.state_count(),
            triangular: self.hmm.is_triangular(),
        })
    }
}

/// Per-sample aggregates kept after the sample's artifacts are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub slot: usize,
    pub success: Vec<f64>,
    pub path_accuracy: Vec<f64>,
    pub undecodable_runs: usize,
    pub mean_completion_time: f64,
    pub state_count: usize,
    pub triangular: bool,
}

pub fn run_sample(config: &SweepConfig, cell_index: usize, slot: usize) -> Result<SampleResult> {
    prepare_sample(config, cell_index, slot)?.evaluate(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub cell_id: usize,
    pub cell: Cell,
    pub noise: f64,
    pub status: CellStatus,
    pub replacements: usize,
    /// Curve under the configured SEM divisor.
    pub curve: Option<SuccessCurve>,
    /// Curve under the sd / sqrt(S) divisor, kept when another divisor is configured.
    pub standard_curve: Option<SuccessCurve>,
    pub cutoffs: Option<CutoffSummary>,
    pub path_accuracy: Vec<f64>,
    pub mean_completion_time: f64,
    pub mean_state_count: f64,
    pub max_state_count: usize,
    pub triangular_samples: usize,
    pub undecodable_runs: usize,
    pub samples: Vec<SampleResult>,
}

impl ExperimentResult {
    fn failed(cell_id: usize, cell: Cell, noise: f64, replacements: usize, reason: String) -> Self {
        ExperimentResult {
            cell_id,
            cell,
            noise,
            status: CellStatus::Failed { reason },
            replacements,
            curve: None,
            standard_curve: None,
            cutoffs: None,
            path_accuracy: Vec::new(),
            mean_completion_time: f64::NAN,
            mean_state_count: f64::NAN,
            max_state_count: 0,
            triangular_samples: 0,
            undecodable_runs: 0,
            samples: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// Wall-clock seconds per evaluated sample slot, in slot order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub cell_id: usize,
    pub sample_seconds: Vec<(usize, f64)>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub results: Vec<ExperimentResult>,
    pub timings: Vec<CellTiming>,
}

fn timed_sample(config: &SweepConfig, cell_index: usize, slot: usize) -> (Result<SampleResult>, f64) {
    let start = Instant::now();
    let result = run_sample(config, cell_index, slot);
    (result, start.elapsed().as_secs_f64())
}

/// Runs one cell. Samples that fail with an under-sampled HMM are replaced
/// from slots past `samples`, assigned to failures in slot order so the
/// outcome does not depend on scheduling.
pub fn run_cell(config: &SweepConfig, cell_index: usize) -> (ExperimentResult, CellTiming) {
    let started = Instant::now();
    let cell = config.cell_list()[cell_index];
    let budget = config.replacement_factor * config.samples;
    let mut timing = CellTiming { cell_id: cell_index, sample_seconds: Vec::new(), total_seconds: 0.0 };
    let mut done: Vec<SampleResult> = Vec::with_capacity(config.samples);
    let mut replacements = 0;
    let mut batch = 0..config.samples;
    loop {
        let next = batch.end;
        let outcomes: Vec<_> = batch
            .clone()
            .into_par_iter()
            .map(|slot| timed_sample(config, cell_index, slot))
            .collect();
        let mut last_error = None;
        for (slot, (outcome, secs)) in batch.zip(outcomes) {
            timing.sample_seconds.push((slot, secs));
            match outcome {
                Ok(r) => done.push(r),
                Err(e @ Error::UnderSampled { .. }) => {
                    replacements += 1;
                    last_error = Some(e);
                }
                Err(e) => {
                    timing.total_seconds = started.elapsed().as_secs_f64();
                    let reason = format!("sample {slot}: {e}");
                    let failed = ExperimentResult::failed(cell_index, cell, config.obs_prob, replacements, reason);
                    return (failed, timing);
                }
            }
        }
        if done.len() == config.samples {
            break;
        }
        let left = config.samples + budget - next;
        if left == 0 {
            timing.total_seconds = started.elapsed().as_secs_f64();
            let reason = format!(
                "replacement budget of {budget} exhausted with {} of {} samples; last error: {}",
                done.len(),
                config.samples,
                last_error.map_or_else(String::new, |e| e.to_string())
            );
            let failed = ExperimentResult::failed(cell_index, cell, config.obs_prob, replacements, reason);
            return (failed, timing);
        }
        batch = next..next + left.min(config.samples - done.len());
    }
    timing.total_seconds = started.elapsed().as_secs_f64();
    (aggregate(config, cell_index, cell, replacements, done), timing)
}

fn aggregate(
    config: &SweepConfig,
    cell_id: usize,
    cell: Cell,
    replacements: usize,
    samples: Vec<SampleResult>,
) -> ExperimentResult {
    let lengths = config.lengths();
    let rates: Vec<Vec<f64>> = samples.iter().map(|s| s.success.clone()).collect();
    let built = SuccessCurve::from_rates(&lengths, &rates, config.confidence, config.sem_divisor)
        .and_then(|curve| {
            let standard = match config.sem_divisor {
                SemDivisor::SqrtS => None,
                _ => Some(SuccessCurve::from_rates(
                    &lengths,
                    &rates,
                    config.confidence,
                    SemDivisor::SqrtS,
                )?),
            };
            let cutoffs = cutoff_statistics(&curve)?;
            Ok((curve, standard, cutoffs))
        });
    let (curve, standard_curve, cutoffs) = match built {
        Ok(parts) => parts,
        Err(e) => {
            return ExperimentResult::failed(cell_id, cell, config.obs_prob, replacements, e.to_string())
        }
    };
    let s = samples.len() as f64;
    let path_accuracy = (0..lengths.len())
        .map(|k| samples.iter().map(|r| r.path_accuracy[k]).sum::<f64>() / s)
        .collect();
    ExperimentResult {
        cell_id,
        cell,
        noise: config.obs_prob,
        status: CellStatus::Ok,
        replacements,
        curve: Some(curve),
        standard_curve,
        cutoffs: Some(cutoffs),
        path_accuracy,
        mean_completion_time: samples.iter().map(|r| r.mean_completion_time).sum::<f64>() / s,
        mean_state_count: samples.iter().map(|r| r.state_count as f64).sum::<f64>() / s,
        max_state_count: samples.iter().map(|r| r.state_count).max().unwrap_or(0),
        triangular_samples: samples.iter().filter(|r| r.triangular).count(),
        undecodable_runs: samples.iter().map(|r| r.undecodable_runs).sum(),
        samples,
    }
}

/// Runs every cell of the sweep. Failed cells are reported in place and do
/// not stop the others.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let cells = config.cell_list();
    let (results, timings) = (0..cells.len())
        .into_par_iter()
        .map(|k| run_cell(config, k))
        .unzip();
    Ok(SweepReport { config: config.clone(), results, timings })
}
