//! Hidden Markov model over active-activity sets.
//!
//! Hidden states are the distinct sets of simultaneously running activities
//! seen in a simulated ensemble, plus the empty terminal state. Transitions
//! are tick-to-tick frequencies. Each state emits a subset of the resources
//! its activities require, every resource independently, so emissions are
//! stored as one Bernoulli probability per resource instead of a table over
//! all subsets.

mod decode;
mod observation;

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Reverse;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActivitySet, ProcessModel};
use crate::sim::SimulationTrace;

pub use decode::{forward, viterbi, PrefixDecoder, ViterbiPath};
pub use observation::{ObservationSequence, ObservationSymbol};

const STOCHASTIC_TOL: f64 = 1e-9;
const TICK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenState {
    pub index: usize,
    pub label: ActivitySet,
}

/// Probability that a resource required by an activity is actually observed
/// in one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservationModel {
    Uniform(f64),
    PerActivity(Vec<f64>),
}

impl Default for ObservationModel {
    fn default() -> Self {
        ObservationModel::Uniform(0.5)
    }
}

impl ObservationModel {
    pub fn prob(&self, activity: usize) -> f64 {
        match self {
            ObservationModel::Uniform(p) => *p,
            ObservationModel::PerActivity(ps) => ps[activity],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = |p: f64| p > 0.0 && p <= 1.0;
        match self {
            ObservationModel::Uniform(p) if ok(*p) => Ok(()),
            ObservationModel::PerActivity(ps) if ps.len() == n && ps.iter().all(|&p| ok(p)) => {
                Ok(())
            }
            other => Err(Error::invalid(format!(
                "observation probabilities must lie in (0, 1] for all {n} activities: {other:?}"
            ))),
        }
    }
}

/// Which resources the activities in `label` require at all.
pub fn required_indicator(model: &ProcessModel, label: &ActivitySet) -> Vec<bool> {
    (0..model.m)
        .map(|l| label.iter().any(|j| model.activities[j].requires(l)))
        .collect()
}

/// Per-resource observation probability of a state: the largest activity
/// probability among the activities that require that resource, else 0.
pub fn observation_probabilities(
    model: &ProcessModel,
    label: &ActivitySet,
    obs: &ObservationModel,
) -> Vec<f64> {
    (0..model.m)
        .map(|l| {
            label
                .iter()
                .filter(|&j| model.activities[j].requires(l))
                .map(|j| obs.prob(j))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// The non-zero entries of a probability vector, with their resource ids.
pub fn nonzero_probabilities(probs: &[f64]) -> Vec<(usize, f64)> {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0.0)
        .map(|(l, &e)| (l, e))
        .collect()
}

/// Emission scoring for one state, restricted to the resources it can emit.
#[derive(Debug, Clone, PartialEq)]
struct EmissionSupport {
    /// (resource, ln e, ln (1 - e)) for every e > 0.
    terms: Vec<(usize, f64, f64)>,
}

impl EmissionSupport {
    fn new(probs: &[f64]) -> Self {
        EmissionSupport {
            terms: nonzero_probabilities(probs)
                .into_iter()
                .map(|(l, e)| (l, e.ln(), (1.0 - e).ln()))
                .collect(),
        }
    }

    /// ln P(symbol); `present_total` is the number of resources in the symbol.
    fn log_prob(&self, present: &[bool], present_total: usize) -> f64 {
        let mut covered = 0;
        let mut acc = 0.0;
        for &(l, ln_e, ln_not) in &self.terms {
            if present[l] {
                covered += 1;
                acc += ln_e;
            } else {
                acc += ln_not;
            }
        }
        if covered < present_total {
            f64::NEG_INFINITY
        } else {
            acc
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmRepr", into = "HmmRepr")]
pub struct Hmm {
    states: Vec<HiddenState>,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
    m: usize,
    terminal: Option<usize>,
    state_order: Option<Vec<usize>>,
    index: HashMap<ActivitySet, usize>,
    /// Sparse rows: (to, p, ln p) for p > 0.
    outgoing: Vec<Vec<(usize, f64, f64)>>,
    support: Vec<EmissionSupport>,
}

#[derive(Serialize, Deserialize)]
struct HmmRepr {
    states: Vec<HiddenState>,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
}

impl TryFrom<HmmRepr> for Hmm {
    type Error = Error;

    fn try_from(repr: HmmRepr) -> Result<Self> {
        let m = repr.emission.first().map_or(0, Vec::len);
        Hmm::from_parts(repr.states, repr.initial, repr.transition, repr.emission, m)
    }
}

impl From<Hmm> for HmmRepr {
    fn from(hmm: Hmm) -> Self {
        HmmRepr {
            states: hmm.states,
            initial: hmm.initial,
            transition: hmm.transition,
            emission: hmm.emission,
        }
    }
}

fn row_sums_to_one(row: &[f64]) -> bool {
    (row.iter().sum::<f64>() - 1.0).abs() <= STOCHASTIC_TOL
}

impl Hmm {
    /// Assembles and checks an HMM: square row-stochastic transitions, a
    /// distribution for the initial state, one probability per resource per
    /// state, unique labels, and an absorbing silent terminal if an
    /// empty-label state is present.
    pub fn from_parts(
        states: Vec<HiddenState>,
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
        m: usize,
    ) -> Result<Self> {
        let s = states.len();
        if s == 0 {
            return Err(Error::invalid("HMM needs at least one state"));
        }
        if initial.len() != s || transition.len() != s || emission.len() != s {
            return Err(Error::invalid("HMM component sizes disagree with the state count"));
        }
        let mut index = HashMap::with_capacity(s);
        for (k, st) in states.iter().enumerate() {
            if st.index != k {
                return Err(Error::invalid(format!("state at position {k} has index {}", st.index)));
            }
            if index.insert(st.label.clone(), k).is_some() {
                return Err(Error::invalid(format!("duplicate state label {}", st.label)));
            }
        }
        let is_prob = |p: f64| (0.0..=1.0).contains(&p);
        if !initial.iter().all(|&p| is_prob(p)) || !row_sums_to_one(&initial) {
            return Err(Error::invalid("initial distribution must sum to 1"));
        }
        for (k, row) in transition.iter().enumerate() {
            if row.len() != s || !row.iter().all(|&p| is_prob(p)) || !row_sums_to_one(row) {
                return Err(Error::invalid(format!("transition row {k} is not stochastic")));
            }
        }
        for (k, row) in emission.iter().enumerate() {
            if row.len() != m || !row.iter().all(|&p| is_prob(p)) {
                return Err(Error::invalid(format!(
                    "emission row {k} must hold {m} probabilities"
                )));
            }
        }
        let terminal = index.get(&ActivitySet::empty()).copied();
        if let Some(t) = terminal {
            if (transition[t][t] - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::invalid("terminal state must be absorbing"));
            }
            if emission[t].iter().any(|&e| e != 0.0) {
                return Err(Error::invalid("terminal state must not emit resources"));
            }
        }
        let outgoing: Vec<Vec<(usize, f64, f64)>> = transition
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (j, p, p.ln()))
                    .collect()
            })
            .collect();
        let support = emission.iter().map(|e| EmissionSupport::new(e)).collect();
        let state_order = topological_order(&outgoing);
        Ok(Hmm {
            states,
            initial,
            transition,
            emission,
            m,
            terminal,
            state_order,
            index,
            outgoing,
            support,
        })
    }

    pub fn states(&self) -> &[HiddenState] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn resource_count(&self) -> usize {
        self.m
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// Per-resource emission probabilities of every state.
    pub fn emission(&self) -> &[Vec<f64>] {
        &self.emission
    }

    pub fn terminal(&self) -> Option<usize> {
        self.terminal
    }

    pub fn label(&self, state: usize) -> &ActivitySet {
        &self.states[state].label
    }

    pub fn state_of(&self, label: &ActivitySet) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// A state ordering in which every non-self transition moves forward, if
    /// the transition graph admits one.
    pub fn state_order(&self) -> Option<&[usize]> {
        self.state_order.as_deref()
    }

    pub fn is_triangular(&self) -> bool {
        self.state_order.is_some()
    }

    pub(crate) fn outgoing(&self, state: usize) -> &[(usize, f64, f64)] {
        &self.outgoing[state]
    }

    pub(crate) fn log_emission(&self, state: usize, present: &[bool], present_total: usize) -> f64 {
        self.support[state].log_prob(present, present_total)
    }

    pub(crate) fn check_symbol(&self, symbol: &ObservationSymbol) -> Result<()> {
        if symbol.width() == self.m {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "observation width {} does not match the HMM's {} resources",
                symbol.width(),
                self.m
            )))
        }
    }

    /// Product-form probability that `state` emits exactly `symbol`.
    pub fn emission_probability(&self, state: usize, symbol: &ObservationSymbol) -> Result<f64> {
        self.check_symbol(symbol)?;
        Ok(symbol.probability(&self.emission[state]))
    }

    /// Draws an observation from `state`: resource `l` shows up with probability `e_l`.
    pub fn sample_observation<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> ObservationSymbol {
        ObservationSymbol::sample(&self.emission[state], rng)
    }

    /// Lists transitions `i -> j` (i != j) that run backwards under `order`.
    pub fn backward_transitions(&self, order: &[usize]) -> Vec<(usize, usize)> {
        let mut rank = vec![0; self.states.len()];
        for (r, &s) in order.iter().enumerate() {
            rank[s] = r;
        }
        let mut out = Vec::new();
        for (i, row) in self.outgoing.iter().enumerate() {
            for &(j, _, _) in row {
                if i != j && rank[j] < rank[i] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Kahn's algorithm over non-self edges, smallest ready index first.
fn topological_order(outgoing: &[Vec<(usize, f64, f64)>]) -> Option<Vec<usize>> {
    let s = outgoing.len();
    let mut indegree = vec![0usize; s];
    for (i, row) in outgoing.iter().enumerate() {
        for &(j, _, _) in row {
            if i != j {
                indegree[j] += 1;
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..s).filter(|&k| indegree[k] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(s);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &(j, _, _) in &outgoing[i] {
            if i != j {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
    }
    (order.len() == s).then_some(order)
}

/// Runs of identical active sets in a trace, sampled at multiples of `tick`.
pub fn state_runs(trace: &SimulationTrace, tick: f64) -> Vec<(ActivitySet, u64)> {
    let to_tick = |t: f64| (t / tick - TICK_EPS).ceil().max(0.0) as u64;
    let mut bounds: Vec<f64> = trace
        .starts
        .iter()
        .zip(&trace.completions)
        .filter(|(s, c)| c > s)
        .flat_map(|(&s, &c)| [s, c])
        .collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    let mut runs: Vec<(ActivitySet, u64)> = Vec::new();
    for w in bounds.windows(2) {
        let count = to_tick(w[1]) - to_tick(w[0]);
        if count == 0 {
            continue;
        }
        let at = w[0];
        let label: ActivitySet = trace
            .starts
            .iter()
            .zip(&trace.completions)
            .enumerate()
            .filter(|(_, (&s, &c))| s <= at && at < c)
            .map(|(j, _)| j)
            .collect();
        match runs.last_mut() {
            Some((last, len)) if *last == label => *len += count,
            _ => runs.push((label, count)),
        }
    }
    runs
}

/// One active-set label per tick, closed by the empty terminal label.
pub fn extract_state_sequence(trace: &SimulationTrace, tick: f64) -> Vec<ActivitySet> {
    let mut out: Vec<ActivitySet> = state_runs(trace, tick)
        .into_iter()
        .flat_map(|(label, len)| std::iter::repeat_n(label, len as usize))
        .collect();
    out.push(ActivitySet::empty());
    out
}

/// Frequency counts gathered from traces; merging is associative and
/// commutative, so batches can be counted independently.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionCounts {
    labels: BTreeMap<ActivitySet, LabelStats>,
    initial: BTreeMap<ActivitySet, u64>,
    traces: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct LabelStats {
    first_tick: u64,
    next: BTreeMap<ActivitySet, u64>,
}

impl TransitionCounts {
    pub fn ingest(&mut self, trace: &SimulationTrace, tick: f64) {
        let runs = state_runs(trace, tick);
        let mut at = 0u64;
        let mut first = None;
        for (k, (label, len)) in runs.iter().enumerate() {
            first.get_or_insert(label);
            let next = runs.get(k + 1).map_or_else(ActivitySet::empty, |(l, _)| l.clone());
            let stats = self.entry(label, at);
            if *len > 1 {
                *stats.next.entry(label.clone()).or_default() += len - 1;
            }
            *stats.next.entry(next).or_default() += 1;
            at += len;
        }
        self.entry(&ActivitySet::empty(), at);
        let first = first.cloned().unwrap_or_else(ActivitySet::empty);
        *self.initial.entry(first).or_default() += 1;
        self.traces += 1;
    }

    fn entry(&mut self, label: &ActivitySet, tick: u64) -> &mut LabelStats {
        let stats = self.labels.entry(label.clone()).or_insert(LabelStats {
            first_tick: tick,
            next: BTreeMap::new(),
        });
        stats.first_tick = stats.first_tick.min(tick);
        stats
    }

    pub fn merge(&mut self, other: TransitionCounts) {
        for (label, theirs) in other.labels {
            let ours = self.entry(&label, theirs.first_tick);
            for (to, c) in theirs.next {
                *ours.next.entry(to).or_default() += c;
            }
        }
        for (label, c) in other.initial {
            *self.initial.entry(label).or_default() += c;
        }
        self.traces += other.traces;
    }

    pub fn trace_count(&self) -> u64 {
        self.traces
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Raw count of `from -> to` transitions.
    pub fn count(&self, from: &ActivitySet, to: &ActivitySet) -> u64 {
        self.labels
            .get(from)
            .and_then(|s| s.next.get(to))
            .copied()
            .unwrap_or(0)
    }

    /// Normalizes the counts into an HMM. States are indexed by earliest
    /// first occurrence, ties broken by label.
    pub fn into_hmm(self, model: &ProcessModel, obs: &ObservationModel) -> Result<Hmm> {
        obs.validate(model.n)?;
        if self.traces == 0 {
            return Err(Error::invalid("no traces to build an HMM from"));
        }
        let terminal = ActivitySet::empty();
        let mut order: Vec<(&ActivitySet, &LabelStats)> = self.labels.iter().collect();
        order.sort_by(|a, b| a.1.first_tick.cmp(&b.1.first_tick).then_with(|| a.0.cmp(b.0)));
        let position: HashMap<&ActivitySet, usize> =
            order.iter().enumerate().map(|(k, (l, _))| (*l, k)).collect();

        let under: Vec<ActivitySet> = order
            .iter()
            .filter(|(l, s)| **l != terminal && s.next.is_empty())
            .map(|(l, _)| (*l).clone())
            .collect();
        if !under.is_empty() {
            return Err(Error::UnderSampled { states: under });
        }

        let s = order.len();
        let mut transition = vec![vec![0.0; s]; s];
        for (k, (label, stats)) in order.iter().enumerate() {
            if **label == terminal {
                transition[k][k] = 1.0;
                continue;
            }
            let total: u64 = stats.next.values().sum();
            for (to, &c) in &stats.next {
                transition[k][position[to]] = c as f64 / total as f64;
            }
        }
        let mut initial = vec![0.0; s];
        for (label, &c) in &self.initial {
            initial[position[label]] = c as f64 / self.traces as f64;
        }
        let emission = order
            .iter()
            .map(|(label, _)| observation_probabilities(model, label, obs))
            .collect();
        let states = order
            .iter()
            .enumerate()
            .map(|(index, (label, _))| HiddenState { index, label: (*label).clone() })
            .collect();
        Hmm::from_parts(states, initial, transition, emission, model.m)
    }
}

/// Frequency-count HMM over the active sets in `traces`.
pub fn build_hmm(
    traces: &[SimulationTrace],
    model: &ProcessModel,
    obs: &ObservationModel,
    tick: f64,
) -> Result<Hmm> {
    if traces.is_empty() {
        return Err(Error::invalid("build_hmm needs at least one trace"));
    }
    if !(tick > 0.0) {
        return Err(Error::invalid("tick must be positive"));
    }
    let mut counts = TransitionCounts::default();
    for trace in traces {
        counts.ingest(trace, tick);
    }
    counts.into_hmm(model, obs)
}

#[cfg(test)]
mod tests;
