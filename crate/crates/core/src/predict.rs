//! Time-to-market forecasts from a decoded observation sequence.
//!
//! The last Viterbi state says which activities are running now. Everything
//! upstream of them is marked complete and the model is re-simulated from
//! there; the spread of remaining durations is the forecast.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{viterbi, Hmm, ObservationSequence};
use crate::model::{ancestor_closure, ActivitySet, ProcessModel};
use crate::rng::seeded;
use crate::sim::{resume_ensemble, SimOptions};

/// How activities that are running at the decoded state restart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InProgressMode {
    /// Re-run from zero progress.
    #[default]
    Restart,
    /// Credit the days each activity has been visible at the end of the decoded path.
    CreditElapsed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtmForecast {
    pub remaining_samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub quantiles: Quantiles,
    pub inferred_active: ActivitySet,
    pub inferred_completed: ActivitySet,
    pub decode_log_prob: f64,
}

impl TtmForecast {
    pub fn summary(&self) -> String {
        format!(
            "median {:.1} days remaining (90% interval {:.1} to {:.1}), active {}",
            self.quantiles.p50, self.quantiles.p05, self.quantiles.p95, self.inferred_active
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastOptions {
    pub ensemble_size: usize,
    pub seed: u64,
    pub sim: SimOptions,
    pub in_progress: InProgressMode,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions {
            ensemble_size: 1000,
            seed: 0,
            sim: SimOptions::default(),
            in_progress: InProgressMode::Restart,
        }
    }
}

/// Seeds for a forecast ensemble, drawn from one stream keyed by `seed`.
pub fn ensemble_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = seeded(seed);
    (0..count).map(|_| rng.random()).collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Forecast from an explicit inferred state: `active` is running now and
/// `completed` (ancestor-closed) is done.
pub fn forecast_from_state(
    model: &ProcessModel,
    active: &ActivitySet,
    completed: &ActivitySet,
    elapsed: &[(usize, f64)],
    decode_log_prob: f64,
    opts: &ForecastOptions,
) -> Result<TtmForecast> {
    if opts.ensemble_size == 0 {
        return Err(Error::invalid("ensemble size must be at least 1"));
    }
    let seeds = ensemble_seeds(opts.seed, opts.ensemble_size);
    let traces = resume_ensemble(model, completed, elapsed, &seeds, &opts.sim)?;
    let remaining_samples: Vec<f64> = traces.iter().map(|t| t.total_time).collect();
    let k = remaining_samples.len() as f64;
    let mean = remaining_samples.iter().sum::<f64>() / k;
    let std = if remaining_samples.len() > 1 {
        (remaining_samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = remaining_samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(TtmForecast {
        quantiles: Quantiles {
            p05: quantile(&sorted, 0.05),
            p50: quantile(&sorted, 0.50),
            p95: quantile(&sorted, 0.95),
        },
        remaining_samples,
        mean,
        std,
        inferred_active: active.clone(),
        inferred_completed: completed.clone(),
        decode_log_prob,
    })
}

/// Decodes `obs`, marks the ancestors of the final decoded activities as
/// complete and re-simulates the rest of the process.
pub fn predict_ttm(
    model: &ProcessModel,
    hmm: &Hmm,
    obs: &ObservationSequence,
    opts: &ForecastOptions,
) -> Result<TtmForecast> {
    if opts.ensemble_size == 0 {
        return Err(Error::invalid("ensemble size must be at least 1"));
    }
    let path = viterbi(hmm, obs).map_err(|e| match e {
        e @ Error::NoViablePath { .. } => Error::ForecastUnavailable(Box::new(e)),
        other => other,
    })?;
    let last = *path.states.last().expect("viterbi path matches a non-empty sequence");
    let active = hmm.label(last).clone();
    if active.is_empty() {
        // terminal: the whole process is behind us
        let everything: ActivitySet = (0..model.n).collect();
        return forecast_from_state(model, &active, &everything, &[], path.log_prob, opts);
    }
    let completed = ancestor_closure(model, &active)?;
    let elapsed: Vec<(usize, f64)> = match opts.in_progress {
        InProgressMode::Restart => Vec::new(),
        InProgressMode::CreditElapsed => active
            .iter()
            .map(|j| {
                let run = path
                    .states
                    .iter()
                    .rev()
                    .take_while(|&&s| hmm.label(s).contains(j))
                    .count();
                (j, run as f64 * opts.sim.tick)
            })
            .collect(),
    };
    forecast_from_state(model, &active, &completed, &elapsed, path.log_prob, opts)
}
