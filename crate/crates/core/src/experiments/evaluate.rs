use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{
    extract_state_sequence, observation_probabilities, Hmm, ObservationModel,
    ObservationSequence, ObservationSymbol, PrefixDecoder,
};
use crate::model::{ActivitySet, ProcessModel};
use crate::rng::stream2;
use crate::sim::{run_simulation, SimOptions};

/// Outcome of decoding one sample's test runs at every requested length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvaluation {
    pub lengths: Vec<usize>,
    /// success[run][k]: final decoded label equals the true label at tick lengths[k] - 1.
    pub success: Vec<Vec<bool>>,
    /// path_accuracy[run][k]: share of the first lengths[k] ticks decoded correctly.
    pub path_accuracy: Vec<Vec<f64>>,
    /// Runs whose observations became impossible under the HMM at some length.
    pub undecodable_runs: usize,
}

impl SampleEvaluation {
    fn column_mean(&self, value: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let runs = self.success.len().max(1) as f64;
        (0..self.lengths.len())
            .map(|k| (0..self.success.len()).map(|r| value(r, k)).sum::<f64>() / runs)
            .collect()
    }

    /// Final-state success rate per length.
    pub fn success_rates(&self) -> Vec<f64> {
        self.column_mean(|r, k| f64::from(u8::from(self.success[r][k])))
    }

    pub fn path_accuracy_rates(&self) -> Vec<f64> {
        self.column_mean(|r, k| self.path_accuracy[r][k])
    }
}

/// True label per tick for the first `len` ticks, padded with the terminal
/// label once the process has finished.
pub(crate) fn truth_labels(labels: Vec<ActivitySet>, len: usize) -> Vec<ActivitySet> {
    let mut labels = labels;
    labels.resize(len.max(labels.len()), ActivitySet::empty());
    labels.truncate(len);
    labels
}

/// Noisy observations of a label sequence, one symbol per tick.
pub fn observe_labels<R: Rng + ?Sized>(
    model: &ProcessModel,
    labels: &[ActivitySet],
    obs: &ObservationModel,
    rng: &mut R,
) -> ObservationSequence {
    let mut symbols = Vec::with_capacity(labels.len());
    let mut cached: Option<(&ActivitySet, Vec<f64>)> = None;
    for label in labels {
        if cached.as_ref().is_none_or(|(l, _)| *l != label) {
            cached = Some((label, observation_probabilities(model, label, obs)));
        }
        let probs = &cached.as_ref().expect("set above").1;
        symbols.push(ObservationSymbol::sample(probs, rng));
    }
    ObservationSequence { m: model.m, symbols }
}

struct RunOutcome {
    success: Vec<bool>,
    path_accuracy: Vec<f64>,
    undecodable: bool,
}

fn evaluate_run(
    model: &ProcessModel,
    hmm: &Hmm,
    lengths: &[usize],
    max_len: usize,
    obs: &ObservationModel,
    sim: &SimOptions,
    seed: u64,
) -> Result<RunOutcome> {
    let trace = run_simulation(model, seed, sim)?;
    let truth = truth_labels(extract_state_sequence(&trace, sim.tick), max_len);
    // durations use stream(seed, activity); observations sit far above those ids
    let mut obs_rng = stream2(seed, 1, 0);
    let sequence = observe_labels(model, &truth, obs, &mut obs_rng);
    let decoder = PrefixDecoder::new(hmm, &sequence)?;
    let truth_states: Vec<Option<usize>> = truth.iter().map(|l| hmm.state_of(l)).collect();

    let mut outcome = RunOutcome {
        success: Vec::with_capacity(lengths.len()),
        path_accuracy: Vec::with_capacity(lengths.len()),
        undecodable: decoder.first_impossible().is_some_and(|p| p < max_len),
    };
    for &len in lengths {
        let Some((last, _)) = decoder.final_state(len) else {
            outcome.success.push(false);
            outcome.path_accuracy.push(0.0);
            continue;
        };
        outcome.success.push(hmm.label(last) == &truth[len - 1]);
        let path = decoder.path(len)?;
        let hits = path
            .states
            .iter()
            .zip(&truth_states)
            .filter(|(&s, t)| **t == Some(s))
            .count();
        outcome.path_accuracy.push(hits as f64 / len as f64);
    }
    Ok(outcome)
}

/// Simulates `test_runs` fresh ground-truth traces, observes each through
/// the noise model and decodes every requested prefix length.
///
/// Run seeds are drawn from `rng` up front, so results do not depend on
/// the order in which runs execute.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_sample<R: Rng + ?Sized>(
    model: &ProcessModel,
    hmm: &Hmm,
    test_runs: usize,
    lengths: &[usize],
    obs: &ObservationModel,
    sim: &SimOptions,
    rng: &mut R,
) -> Result<SampleEvaluation> {
    if test_runs == 0 {
        return Err(Error::invalid("at least one test run is required"));
    }
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::invalid("observation lengths must be non-empty and positive"));
    }
    obs.validate(model.n)?;
    let max_len = *lengths.iter().max().expect("non-empty");
    let seeds: Vec<u64> = (0..test_runs).map(|_| rng.random()).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&seed| evaluate_run(model, hmm, lengths, max_len, obs, sim, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut eval = SampleEvaluation {
        lengths: lengths.to_vec(),
        success: Vec::with_capacity(test_runs),
        path_accuracy: Vec::with_capacity(test_runs),
        undecodable_runs: 0,
    };
    for o in outcomes {
        eval.undecodable_runs += usize::from(o.undecodable);
        eval.success.push(o.success);
        eval.path_accuracy.push(o.path_accuracy);
    }
    Ok(eval)
}
