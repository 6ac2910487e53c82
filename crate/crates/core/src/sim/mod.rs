//! Tick-aligned discrete-event execution of a process model.
//!
//! At every tick boundary finished activities release their resources, then
//! each waiting activity whose parents are done tries an all-or-nothing claim
//! in ascending id order. Between boundaries nothing changes, so the engine
//! jumps straight from one completion boundary to the next and records the
//! trace as runs of identical ticks.

mod duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActivitySet, ProcessModel};
use crate::rng::stream;

pub use duration::{sample_duration, DurationParams, DEFAULT_CONCENTRATION};

const TICK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Length of one tick in days.
    pub tick: f64,
    /// Beta concentration for activity durations.
    pub concentration: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { tick: 1.0, concentration: DEFAULT_CONCENTRATION }
    }
}

impl SimOptions {
    pub fn with_tick(tick: f64) -> Self {
        SimOptions { tick, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(Error::invalid(format!("tick must be positive, got {}", self.tick)));
        }
        if !(self.concentration > 0.0) {
            return Err(Error::invalid("concentration must be positive"));
        }
        Ok(())
    }

    fn ticks_for(&self, duration: f64) -> u64 {
        ((duration / self.tick - TICK_EPS).ceil() as u64).max(1)
    }
}

/// What is running and which resources are claimed during one tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickState {
    pub active: ActivitySet,
    pub used: Vec<usize>,
}

/// A maximal run of identical ticks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub first_tick: u64,
    pub len: u64,
    pub state: TickState,
}

/// Result of one run: per-activity start and completion times (days), the
/// overall completion time and the per-tick active and used sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TraceRepr", from = "TraceRepr")]
pub struct SimulationTrace {
    pub total_time: f64,
    pub starts: Vec<f64>,
    pub completions: Vec<f64>,
    segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct TraceRepr {
    total_time: f64,
    starts: Vec<f64>,
    completions: Vec<f64>,
    ticks: Vec<TickState>,
}

impl From<SimulationTrace> for TraceRepr {
    fn from(trace: SimulationTrace) -> Self {
        TraceRepr {
            ticks: trace.ticks().collect(),
            total_time: trace.total_time,
            starts: trace.starts,
            completions: trace.completions,
        }
    }
}

impl From<TraceRepr> for SimulationTrace {
    fn from(repr: TraceRepr) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        for (t, state) in repr.ticks.into_iter().enumerate() {
            push_run(&mut segments, t as u64, 1, state);
        }
        SimulationTrace {
            total_time: repr.total_time,
            starts: repr.starts,
            completions: repr.completions,
            segments,
        }
    }
}

fn push_run(segments: &mut Vec<Segment>, first_tick: u64, len: u64, state: TickState) {
    if len == 0 {
        return;
    }
    if let Some(last) = segments.last_mut() {
        if last.state == state && last.first_tick + last.len == first_tick {
            last.len += len;
            return;
        }
    }
    segments.push(Segment { first_tick, len, state });
}

impl SimulationTrace {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn tick_count(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.first_tick + s.len)
    }

    /// Expands the run-length segments into one entry per tick.
    pub fn ticks(&self) -> impl Iterator<Item = TickState> + '_ {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.state.clone(), s.len as usize))
    }

    /// Active set at tick `t`; empty once the process has finished.
    pub fn active_at(&self, t: u64) -> &ActivitySet {
        static EMPTY: ActivitySet = ActivitySet::EMPTY;
        let idx = self.segments.partition_point(|s| s.first_tick + s.len <= t);
        self.segments.get(idx).map_or(&EMPTY, |s| &s.state.active)
    }
}

/// Where a run begins: activities already finished and, optionally, how long
/// in-progress activities have been running.
#[derive(Debug, Clone, Default)]
pub(crate) struct StartState {
    completed: Vec<bool>,
    elapsed: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Waiting,
    Running { end: u64 },
    Done,
}

/// Durations for every activity under `seed`; activity `j` draws from its
/// own stream so the value does not depend on which other activities run.
pub fn sample_durations(model: &ProcessModel, seed: u64, concentration: f64) -> Vec<f64> {
    model
        .activities
        .iter()
        .map(|a| {
            let mut rng = stream(seed, a.id as u64);
            sample_duration(&DurationParams::of(a, concentration), &mut rng)
        })
        .collect()
}

fn simulate(
    model: &ProcessModel,
    seed: u64,
    opts: &SimOptions,
    start: &StartState,
) -> Result<SimulationTrace> {
    let n = model.n;
    let durations = sample_durations(model, seed, opts.concentration);
    let mut status = vec![Status::Waiting; n];
    let mut starts = vec![0.0; n];
    let mut completions = vec![0.0; n];
    let mut free = model.availability.clone();
    let mut done = 0;
    for (j, &c) in start.completed.iter().enumerate() {
        if c {
            status[j] = Status::Done;
            done += 1;
        }
    }

    let mut claim = |j: usize, ticks: u64, k: u64, status: &mut [Status], free: &mut [u32]| {
        let req = &model.activities[j].required;
        if req.iter().zip(free.iter()).any(|(r, f)| r > f) {
            return false;
        }
        for (f, r) in free.iter_mut().zip(req) {
            *f -= r;
        }
        status[j] = Status::Running { end: k + ticks };
        starts[j] = k as f64 * opts.tick;
        true
    };

    // in-progress activities go first and only owe what is left of their draw
    for &(j, elapsed) in &start.elapsed {
        if status[j] != Status::Waiting {
            continue;
        }
        let ticks = opts.ticks_for((durations[j] - elapsed).max(0.0));
        if !claim(j, ticks, 0, &mut status, &mut free) {
            return Err(Error::invalid(format!(
                "in-progress activity {j} cannot hold its resources at restart"
            )));
        }
    }

    let mut segments = Vec::new();
    let mut k: u64 = 0;
    while done < n {
        for j in 0..n {
            if status[j] == Status::Waiting
                && model.activities[j]
                    .parents
                    .iter()
                    .all(|&p| status[p] == Status::Done)
            {
                claim(j, opts.ticks_for(durations[j]), k, &mut status, &mut free);
            }
        }
        let Some(next) = status
            .iter()
            .filter_map(|s| match s {
                Status::Running { end } => Some(*end),
                _ => None,
            })
            .min()
        else {
            let blocked = (0..n).filter(|&j| status[j] == Status::Waiting).collect();
            return Err(Error::Deadlock { blocked });
        };
        let active: ActivitySet = (0..n)
            .filter(|&j| matches!(status[j], Status::Running { .. }))
            .collect();
        let used = (0..model.m)
            .filter(|&l| active.iter().any(|j| model.activities[j].required[l] > 0))
            .collect();
        push_run(&mut segments, k, next - k, TickState { active, used });
        k = next;
        for j in 0..n {
            if status[j] == (Status::Running { end: k }) {
                status[j] = Status::Done;
                completions[j] = k as f64 * opts.tick;
                for (f, r) in free.iter_mut().zip(&model.activities[j].required) {
                    *f += r;
                }
                done += 1;
            }
        }
    }
    Ok(SimulationTrace {
        total_time: k as f64 * opts.tick,
        starts,
        completions,
        segments,
    })
}

/// One full run of `model` from time zero.
pub fn run_simulation(model: &ProcessModel, seed: u64, opts: &SimOptions) -> Result<SimulationTrace> {
    model.ensure_valid()?;
    opts.validate()?;
    simulate(model, seed, opts, &fresh_start(model))
}

fn fresh_start(model: &ProcessModel) -> StartState {
    StartState { completed: vec![false; model.n], elapsed: Vec::new() }
}

/// Runs one simulation per seed; element `i` belongs to `seeds[i]`.
pub fn run_ensemble(
    model: &ProcessModel,
    seeds: &[u64],
    opts: &SimOptions,
) -> Result<Vec<SimulationTrace>> {
    if seeds.is_empty() {
        return Err(Error::invalid("ensemble needs at least one seed"));
    }
    model.ensure_valid()?;
    opts.validate()?;
    let start = fresh_start(model);
    seeds
        .par_iter()
        .map(|&seed| {
            simulate(model, seed, opts, &start)
                .map_err(|e| Error::Seeded { seed, source: Box::new(e) })
        })
        .collect()
}

/// Restarts the process with `completed` already finished at time zero.
/// The returned `total_time` is the remaining duration.
pub fn resume_simulation(
    model: &ProcessModel,
    completed: &ActivitySet,
    seed: u64,
    opts: &SimOptions,
) -> Result<SimulationTrace> {
    resume_with_progress(model, completed, &[], seed, opts)
}

/// Like [`resume_simulation`], but the activities in `in_progress` restart
/// holding their resources with the given elapsed days credited.
pub fn resume_with_progress(
    model: &ProcessModel,
    completed: &ActivitySet,
    in_progress: &[(usize, f64)],
    seed: u64,
    opts: &SimOptions,
) -> Result<SimulationTrace> {
    model.ensure_valid()?;
    opts.validate()?;
    let start = resume_start(model, completed, in_progress)?;
    simulate(model, seed, opts, &start)
}

pub(crate) fn resume_start(
    model: &ProcessModel,
    completed: &ActivitySet,
    in_progress: &[(usize, f64)],
) -> Result<StartState> {
    if !model.is_ancestor_closed(completed) {
        return Err(Error::invalid(format!(
            "completed set {completed} is not ancestor-closed"
        )));
    }
    let mut flags = vec![false; model.n];
    for id in completed.iter() {
        flags[id] = true;
    }
    for &(j, elapsed) in in_progress {
        if j >= model.n || flags[j] || !model.activities[j].parents.iter().all(|&p| flags[p]) {
            return Err(Error::invalid(format!(
                "in-progress activity {j} must be unfinished with all parents completed"
            )));
        }
        if !(elapsed >= 0.0) {
            return Err(Error::invalid("elapsed time must be non-negative"));
        }
    }
    Ok(StartState { completed: flags, elapsed: in_progress.to_vec() })
}

pub(crate) fn resume_ensemble(
    model: &ProcessModel,
    completed: &ActivitySet,
    in_progress: &[(usize, f64)],
    seeds: &[u64],
    opts: &SimOptions,
) -> Result<Vec<SimulationTrace>> {
    model.ensure_valid()?;
    opts.validate()?;
    let start = resume_start(model, completed, in_progress)?;
    seeds
        .par_iter()
        .map(|&seed| {
            simulate(model, seed, opts, &start)
                .map_err(|e| Error::Seeded { seed, source: Box::new(e) })
        })
        .collect()
}
