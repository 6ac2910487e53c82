#![allow(dead_code)]

use rand::Rng;
use ttm_core::hmm::{HiddenState, Hmm, ObservationSequence, ObservationSymbol};
use ttm_core::model::{ActivitySet, ProcessModel};
use ttm_core::sim::SimulationTrace;

/// |a - b| <= tol * max(1, |b|), with matching infinities counted equal.
pub fn log_close(a: f64, b: f64, tol: f64) -> bool {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return a == b;
    }
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Emission probability straight from the per-resource table.
pub fn symbol_probability(probs: &[f64], symbol: &ObservationSymbol) -> f64 {
    probs
        .iter()
        .zip(&symbol.present)
        .map(|(&e, &on)| if on { e } else { 1.0 - e })
        .product()
}

/// Every symbol over `m` resources, by bitmask.
pub fn all_symbols(m: usize) -> impl Iterator<Item = ObservationSymbol> {
    (0u32..1 << m).map(move |mask| ObservationSymbol {
        present: (0..m).map(|l| mask >> l & 1 == 1).collect(),
    })
}

fn for_each_path(states: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; len];
    loop {
        f(&path);
        let mut k = 0;
        while k < len {
            path[k] += 1;
            if path[k] < states {
                break;
            }
            path[k] = 0;
            k += 1;
        }
        if k == len {
            return;
        }
    }
}

/// Joint probability of a hidden path and the observations, linear domain.
pub fn path_probability(hmm: &Hmm, obs: &ObservationSequence, path: &[usize]) -> f64 {
    let mut p = hmm.initial()[path[0]] * symbol_probability(&hmm.emission()[path[0]], &obs.symbols[0]);
    for t in 1..path.len() {
        p *= hmm.transition()[path[t - 1]][path[t]]
            * symbol_probability(&hmm.emission()[path[t]], &obs.symbols[t]);
    }
    p
}

/// ln P(obs) by summing over every hidden path.
pub fn brute_forward(hmm: &Hmm, obs: &ObservationSequence) -> f64 {
    let mut total = 0.0;
    for_each_path(hmm.state_count(), obs.len(), |path| total += path_probability(hmm, obs, path));
    total.ln()
}

pub struct BrutePath {
    pub path: Vec<usize>,
    pub log_prob: f64,
    /// Best score among paths other than `path`; ties make the argmax ambiguous.
    pub runner_up: f64,
}

/// Most probable hidden path by enumeration; None if every path has zero
/// probability.
pub fn brute_viterbi(hmm: &Hmm, obs: &ObservationSequence) -> Option<BrutePath> {
    let mut best: Option<BrutePath> = None;
    for_each_path(hmm.state_count(), obs.len(), |path| {
        let p = path_probability(hmm, obs, path);
        if p <= 0.0 {
            return;
        }
        let lp = p.ln();
        match &mut best {
            None => best = Some(BrutePath { path: path.to_vec(), log_prob: lp, runner_up: f64::NEG_INFINITY }),
            Some(b) if lp > b.log_prob => {
                b.runner_up = b.log_prob;
                b.path = path.to_vec();
                b.log_prob = lp;
            }
            Some(b) => b.runner_up = b.runner_up.max(lp),
        }
    });
    best
}

fn random_distribution<R: Rng>(rng: &mut R, len: usize, sparsity: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..len)
            .map(|_| if rng.random::<f64>() < sparsity { 0.0 } else { rng.random::<f64>() })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum > 0.0 {
            return raw.into_iter().map(|x| x / sum).collect();
        }
    }
}

/// Random HMM with up to `max_states` states and `max_resources` resources.
/// Some transitions and emissions are exactly zero, and sometimes the last
/// state is an absorbing silent terminal.
pub fn random_hmm<R: Rng>(rng: &mut R, max_states: usize, max_resources: usize) -> Hmm {
    let s = rng.random_range(1..=max_states);
    let m = rng.random_range(1..=max_resources);
    let with_terminal = s > 1 && rng.random_bool(0.3);
    let states: Vec<HiddenState> = (0..s)
        .map(|k| HiddenState {
            index: k,
            label: if with_terminal && k == s - 1 {
                ActivitySet::empty()
            } else {
                ActivitySet::from(vec![k])
            },
        })
        .collect();
    let initial = random_distribution(rng, s, 0.3);
    let mut transition: Vec<Vec<f64>> = (0..s).map(|_| random_distribution(rng, s, 0.3)).collect();
    let mut emission: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            (0..m)
                .map(|_| match rng.random_range(0..5) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.random::<f64>(),
                })
                .collect()
        })
        .collect();
    if with_terminal {
        transition[s - 1] = (0..s).map(|j| if j == s - 1 { 1.0 } else { 0.0 }).collect();
        emission[s - 1] = vec![0.0; m];
    }
    Hmm::from_parts(states, initial, transition, emission, m).expect("valid random HMM")
}

pub fn random_observations<R: Rng>(rng: &mut R, m: usize, len: usize) -> ObservationSequence {
    let symbols = (0..len)
        .map(|_| ObservationSymbol { present: (0..m).map(|_| rng.random_bool(0.4)).collect() })
        .collect();
    ObservationSequence::new(m, symbols).unwrap()
}

/// erf by its Maclaurin series; accurate to rounding for |x| <= 3.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-18 * sum.abs() {
        n += 1.0;
        term *= -x * x / n;
        sum += term / (2.0 * n + 1.0);
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Inverse erf by bisection on the series.
pub fn erf_inv_bisect(y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf_series(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Problems found by replaying a trace against its model; empty when the
/// trace is valid.
pub fn replay_violations(model: &ProcessModel, trace: &SimulationTrace, tick: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let n = model.n;
    if trace.starts.len() != n || trace.completions.len() != n {
        bad.push("start/completion vectors have the wrong length".to_string());
        return bad;
    }
    for a in &model.activities {
        for &p in &a.parents {
            if trace.starts[a.id] < trace.completions[p] {
                bad.push(format!("a{} starts before parent a{p} completes", a.id));
            }
        }
        if trace.completions[a.id] < trace.starts[a.id] {
            bad.push(format!("a{} completes before it starts", a.id));
        }
    }
    for (t, state) in trace.ticks().enumerate() {
        let expected: ActivitySet = (0..n)
            .filter(|&j| {
                let now = t as f64 * tick;
                trace.starts[j] <= now + 1e-9 && now + 1e-9 < trace.completions[j]
            })
            .collect();
        if expected != state.active {
            bad.push(format!("tick {t}: active {} but intervals give {expected}", state.active));
        }
        for l in 0..model.m {
            let claimed: u32 = state.active.iter().map(|j| model.activities[j].required[l]).sum();
            if claimed > model.availability[l] {
                bad.push(format!("tick {t}: resource {l} over-claimed ({claimed})"));
            }
        }
    }
    let bound = (model.activities.iter().map(|a| a.t_max).sum::<f64>() / tick).ceil() as u64 + n as u64;
    if trace.tick_count() > bound {
        bad.push(format!("ran {} ticks, bound {bound}", trace.tick_count()));
    }
    bad
}

/// A generated model with random size and densities.
pub fn random_model<R: Rng>(rng: &mut R, policy: ttm_core::model::AvailabilityPolicy) -> ProcessModel {
    let params = ttm_core::model::EnsembleParams {
        n: rng.random_range(1..=20),
        m: rng.random_range(1..=10),
        p: rng.random(),
        q: rng.random(),
        seed: rng.random(),
        availability_policy: policy,
        ..Default::default()
    };
    ttm_core::model::generate_model(&params).unwrap()
}

/// A random ancestor-closed set: some activities plus all their ancestors.
pub fn random_closed_set<R: Rng>(rng: &mut R, model: &ProcessModel) -> ActivitySet {
    let keep = rng.random::<f64>();
    let picked: ActivitySet = (0..model.n).filter(|_| rng.random::<f64>() < keep * 0.5).collect();
    ttm_core::model::ancestor_closure(model, &picked).unwrap().union(&picked)
}
