//! Process models: activities with precedence constraints and resource
//! requirements, plus the random ensemble generators used by the sweep.

mod generate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{
    assemble_model, generate_model, AvailabilityPolicy, generate_random_bipartite, generate_random_dag,
    BipartiteMap, DagAdjacency, EnsembleParams,
};

/// A set of activity ids, kept sorted and deduplicated.
///
/// Doubles as the label of a hidden state: the activities running during a tick.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct ActivitySet(Vec<usize>);

impl ActivitySet {
    pub const EMPTY: ActivitySet = ActivitySet(Vec::new());

    pub fn empty() -> Self {
        ActivitySet(Vec::new())
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn union(&self, other: &ActivitySet) -> ActivitySet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn is_disjoint(&self, other: &ActivitySet) -> bool {
        self.iter().all(|id| !other.contains(id))
    }

    pub fn is_subset(&self, other: &ActivitySet) -> bool {
        self.iter().all(|id| other.contains(id))
    }
}

impl From<Vec<usize>> for ActivitySet {
    fn from(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        ActivitySet(ids)
    }
}

impl From<ActivitySet> for Vec<usize> {
    fn from(set: ActivitySet) -> Self {
        set.0
    }
}

impl FromIterator<usize> for ActivitySet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        ActivitySet::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl fmt::Display for ActivitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "a{id}")?;
        }
        f.write_str("}")
    }
}

/// One unit of work: its parents, per-resource unit requirements and the
/// min / expected / max duration in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: usize,
    pub parents: Vec<usize>,
    pub required: Vec<u32>,
    pub t_min: f64,
    pub t_exp: f64,
    pub t_max: f64,
}

impl Activity {
    pub fn requires(&self, resource: usize) -> bool {
        self.required.get(resource).is_some_and(|&units| units > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub n: usize,
    pub m: usize,
    /// Total units of each resource.
    pub availability: Vec<u32>,
    pub activities: Vec<Activity>,
}

impl ProcessModel {
    /// Builds a model and rejects it if any invariant is violated.
    pub fn new(availability: Vec<u32>, activities: Vec<Activity>) -> Result<Self> {
        let model = ProcessModel {
            n: activities.len(),
            m: availability.len(),
            availability,
            activities,
        };
        model.ensure_valid()?;
        Ok(model)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_model(self);
        if violations.is_empty() {
            Ok(())
        } else {
            let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::invalid(format!("invalid process model: {}", listed.join("; "))))
        }
    }

    pub fn activity(&self, id: usize) -> &Activity {
        &self.activities[id]
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.activities
            .iter()
            .filter(|a| a.parents.is_empty())
            .map(|a| a.id)
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.n];
        for a in &self.activities {
            for &p in &a.parents {
                children[p].push(a.id);
            }
        }
        children
    }

    pub fn dependency_edge_count(&self) -> usize {
        self.activities.iter().map(|a| a.parents.len()).sum()
    }

    pub fn resource_edge_count(&self) -> usize {
        self.activities
            .iter()
            .map(|a| a.required.iter().filter(|&&u| u > 0).count())
            .sum()
    }

    /// True when every parent of every member is also a member.
    pub fn is_ancestor_closed(&self, set: &ActivitySet) -> bool {
        set.iter().all(|id| {
            id < self.n && self.activities[id].parents.iter().all(|&p| set.contains(p))
        })
    }

    fn check_ids(&self, targets: &ActivitySet) -> Result<()> {
        match targets.iter().find(|&id| id >= self.n) {
            Some(id) => Err(Error::invalid(format!(
                "activity id {id} out of range for n = {}",
                self.n
            ))),
            None => Ok(()),
        }
    }
}

/// Transitive predecessors of `targets`: every activity reachable by
/// following parent links one or more times.
///
/// A target only appears in the result if it is itself an ancestor of
/// another target, so for the antichain labels produced by simulation the
/// targets are always excluded.
pub fn ancestor_closure(model: &ProcessModel, targets: &ActivitySet) -> Result<ActivitySet> {
    model.check_ids(targets)?;
    let mut seen = vec![false; model.n];
    let mut stack: Vec<usize> = targets
        .iter()
        .flat_map(|id| model.activities[id].parents.iter().copied())
        .collect();
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut seen[id], true) {
            continue;
        }
        stack.extend(model.activities[id].parents.iter().copied());
    }
    Ok(seen
        .iter()
        .enumerate()
        .filter_map(|(id, &s)| s.then_some(id))
        .collect())
}

/// Transitive successors of `targets` (children, grandchildren, ...).
pub fn descendant_closure(model: &ProcessModel, targets: &ActivitySet) -> Result<ActivitySet> {
    model.check_ids(targets)?;
    let children = model.children();
    let mut seen = vec![false; model.n];
    let mut stack: Vec<usize> = targets
        .iter()
        .flat_map(|id| children[id].iter().copied())
        .collect();
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut seen[id], true) {
            continue;
        }
        stack.extend(children[id].iter().copied());
    }
    Ok(seen
        .iter()
        .enumerate()
        .filter_map(|(id, &s)| s.then_some(id))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ActivityCount { declared: usize, actual: usize },
    ResourceCount { declared: usize, actual: usize },
    IdMismatch { index: usize, id: usize },
    RequirementLength { activity: usize, len: usize },
    ParentOrder { activity: usize, parent: usize },
    DuplicateParent { activity: usize, parent: usize },
    NonPositiveMinDuration { activity: usize },
    DurationOrder { activity: usize },
    ExceedsAvailability { activity: usize, resource: usize, required: u32, available: u32 },
    ZeroAvailability { resource: usize },
    NoRoot,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match *self {
            ActivityCount { declared, actual } => {
                write!(f, "activity-count: n = {declared} but {actual} activities listed")
            }
            ResourceCount { declared, actual } => {
                write!(f, "resource-count: m = {declared} but availability has {actual} entries")
            }
            IdMismatch { index, id } => write!(f, "id-order: activity at index {index} has id {id}"),
            RequirementLength { activity, len } => {
                write!(f, "requirement-length: activity {activity} lists {len} requirements")
            }
            ParentOrder { activity, parent } => {
                write!(f, "parent-order: activity {activity} has parent {parent} not below its id")
            }
            DuplicateParent { activity, parent } => {
                write!(f, "duplicate-parent: activity {activity} lists parent {parent} twice")
            }
            NonPositiveMinDuration { activity } => {
                write!(f, "duration-positive: activity {activity} has t_min <= 0")
            }
            DurationOrder { activity } => {
                write!(f, "duration-order: activity {activity} violates t_min <= t_exp <= t_max")
            }
            ExceedsAvailability { activity, resource, required, available } => write!(
                f,
                "availability: activity {activity} needs {required} of resource {resource}, only {available} exist"
            ),
            ZeroAvailability { resource } => {
                write!(f, "availability-positive: resource {resource} has zero units")
            }
            NoRoot => write!(f, "root: no activity without parents"),
        }
    }
}

/// Lists every broken model invariant; an empty list means the model is valid.
pub fn validate_model(model: &ProcessModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.activities.len() != model.n {
        out.push(Violation::ActivityCount {
            declared: model.n,
            actual: model.activities.len(),
        });
    }
    if model.availability.len() != model.m {
        out.push(Violation::ResourceCount {
            declared: model.m,
            actual: model.availability.len(),
        });
    }
    for (resource, &units) in model.availability.iter().enumerate() {
        if units == 0 {
            out.push(Violation::ZeroAvailability { resource });
        }
    }
    for (index, a) in model.activities.iter().enumerate() {
        if a.id != index {
            out.push(Violation::IdMismatch { index, id: a.id });
        }
        let mut seen = BTreeSet::new();
        for &parent in &a.parents {
            if parent >= index {
                out.push(Violation::ParentOrder { activity: index, parent });
            }
            if !seen.insert(parent) {
                out.push(Violation::DuplicateParent { activity: index, parent });
            }
        }
        if a.required.len() != model.m {
            out.push(Violation::RequirementLength {
                activity: index,
                len: a.required.len(),
            });
        }
        for (resource, (&required, &available)) in
            a.required.iter().zip(&model.availability).enumerate()
        {
            if required > available {
                out.push(Violation::ExceedsAvailability {
                    activity: index,
                    resource,
                    required,
                    available,
                });
            }
        }
        if !(a.t_min > 0.0) {
            out.push(Violation::NonPositiveMinDuration { activity: index });
        }
        if !(a.t_min <= a.t_exp && a.t_exp <= a.t_max) {
            out.push(Violation::DurationOrder { activity: index });
        }
    }
    if !model.activities.iter().any(|a| a.parents.is_empty()) {
        out.push(Violation::NoRoot);
    }
    out
}
