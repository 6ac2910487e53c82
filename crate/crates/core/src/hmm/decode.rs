//! Forward scoring and Viterbi decoding in the log domain.
//!
//! Both recursions only expand states whose score is still finite, walking
//! the sparse transition rows, so cost tracks the reachable frontier rather
//! than the full state count.

use super::{Hmm, ObservationSequence};
use crate::error::{Error, Result};

fn check(hmm: &Hmm, obs: &ObservationSequence) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::invalid("observation sequence is empty"));
    }
    obs.symbols.iter().try_for_each(|s| hmm.check_symbol(s))
}

/// `ln P(obs | hmm)`; negative infinity when the sequence is impossible.
pub fn forward(hmm: &Hmm, obs: &ObservationSequence) -> Result<f64> {
    check(hmm, obs)?;
    let s = hmm.state_count();
    let mut alpha = vec![f64::NEG_INFINITY; s];
    let first = &obs.symbols[0];
    let count = first.count();
    for (k, &p) in hmm.initial().iter().enumerate() {
        if p > 0.0 {
            alpha[k] = p.ln() + hmm.log_emission(k, &first.present, count);
        }
    }
    let mut next = vec![0.0; s];
    for symbol in &obs.symbols[1..] {
        let shift = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &a) in alpha.iter().enumerate() {
            if a == f64::NEG_INFINITY {
                continue;
            }
            let w = (a - shift).exp();
            for &(j, p, _) in hmm.outgoing(i) {
                next[j] += w * p;
            }
        }
        let count = symbol.count();
        for (j, a) in alpha.iter_mut().enumerate() {
            *a = if next[j] > 0.0 {
                shift + next[j].ln() + hmm.log_emission(j, &symbol.present, count)
            } else {
                f64::NEG_INFINITY
            };
        }
    }
    Ok(log_sum_exp(&alpha))
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_prob: f64,
}

/// Viterbi lattice kept for every step, so the best path ending at any
/// prefix length can be read off without re-running the recursion.
#[derive(Debug, Clone)]
pub struct PrefixDecoder {
    /// back[t][j]: best predecessor of state j at step t (unused at t = 0).
    back: Vec<Vec<u32>>,
    /// Best final state and score per prefix length - 1.
    best: Vec<Option<(usize, f64)>>,
}

fn argmax(scores: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in scores.iter().enumerate() {
        if v > f64::NEG_INFINITY && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best
}

impl PrefixDecoder {
    pub fn new(hmm: &Hmm, obs: &ObservationSequence) -> Result<Self> {
        check(hmm, obs)?;
        let s = hmm.state_count();
        let mut delta = vec![f64::NEG_INFINITY; s];
        let first = &obs.symbols[0];
        let count = first.count();
        for (k, &p) in hmm.initial().iter().enumerate() {
            if p > 0.0 {
                delta[k] = p.ln() + hmm.log_emission(k, &first.present, count);
            }
        }
        let mut back = vec![vec![0u32; s]];
        let mut best = vec![argmax(&delta)];
        let mut cand = vec![f64::NEG_INFINITY; s];
        for symbol in &obs.symbols[1..] {
            let mut from = vec![0u32; s];
            cand.iter_mut().for_each(|x| *x = f64::NEG_INFINITY);
            // ascending i with strict improvement keeps the lowest index on ties
            for (i, &d) in delta.iter().enumerate() {
                if d == f64::NEG_INFINITY {
                    continue;
                }
                for &(j, _, ln_p) in hmm.outgoing(i) {
                    let v = d + ln_p;
                    if v > cand[j] {
                        cand[j] = v;
                        from[j] = i as u32;
                    }
                }
            }
            let count = symbol.count();
            for (j, d) in delta.iter_mut().enumerate() {
                *d = if cand[j] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    cand[j] + hmm.log_emission(j, &symbol.present, count)
                };
            }
            back.push(from);
            best.push(argmax(&delta));
        }
        Ok(PrefixDecoder { back, best })
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    /// Most likely final state after the first `len` observations.
    pub fn final_state(&self, len: usize) -> Option<(usize, f64)> {
        self.best[len - 1]
    }

    /// First position at which no hidden path survives.
    pub fn first_impossible(&self) -> Option<usize> {
        self.best.iter().position(Option::is_none)
    }

    /// Best path explaining the first `len` observations.
    pub fn path(&self, len: usize) -> Result<ViterbiPath> {
        if len == 0 || len > self.len() {
            return Err(Error::invalid(format!("prefix length {len} outside 1..={}", self.len())));
        }
        let Some((last, log_prob)) = self.best[len - 1] else {
            let position = self.first_impossible().unwrap_or(len - 1);
            return Err(Error::NoViablePath { position });
        };
        let mut states = vec![0; len];
        states[len - 1] = last;
        for t in (1..len).rev() {
            states[t - 1] = self.back[t][states[t]] as usize;
        }
        Ok(ViterbiPath { states, log_prob })
    }
}

/// Most likely hidden path for `obs`; ties go to the lower state index.
pub fn viterbi(hmm: &Hmm, obs: &ObservationSequence) -> Result<ViterbiPath> {
    PrefixDecoder::new(hmm, obs)?.path(obs.len())
}
