use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activity, ProcessModel};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Strictly lower-triangular dependency matrix: `lower[i][j] == 1` means
/// activity `j` is a parent of activity `i`. Row `i` holds `i` entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagAdjacency {
    pub n: usize,
    pub lower: Vec<Vec<u8>>,
}

impl DagAdjacency {
    pub fn has_edge(&self, child: usize, parent: usize) -> bool {
        parent < child && self.lower[child][parent] == 1
    }

    pub fn parents(&self, child: usize) -> Vec<usize> {
        self.lower[child]
            .iter()
            .enumerate()
            .filter_map(|(j, &e)| (e == 1).then_some(j))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.lower.iter().flatten().filter(|&&e| e == 1).count()
    }
}

/// Activity-to-resource incidence: `edges[j][l] == 1` when activity `j` uses resource `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteMap {
    pub n: usize,
    pub m: usize,
    pub edges: Vec<Vec<u8>>,
}

impl BipartiteMap {
    pub fn edge_count(&self) -> usize {
        self.edges.iter().flatten().filter(|&&e| e == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleParams {
    pub n: usize,
    pub m: usize,
    /// Dependency-DAG edge density.
    pub p: f64,
    /// Activity-resource map edge density.
    pub q: f64,
    /// Inclusive range for the units an activity claims of a mapped resource.
    pub requirement_range: [u32; 2],
    /// Inclusive range the expected duration is drawn from.
    pub duration_mean_range: [f64; 2],
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
    pub availability_policy: AvailabilityPolicy,
    /// Per-resource availability overriding the policy.
    pub availability_override: BTreeMap<usize, u32>,
}

/// How total units of each resource are set when a model is assembled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilityPolicy {
    /// Sum of all requirements: every activity can always claim at once.
    #[default]
    Uncontended,
    /// Largest single requirement: every activity fits alone, overlapping
    /// users contend and queue.
    MaxRequirement,
}

impl AvailabilityPolicy {
    fn units(self, requirements: impl Iterator<Item = u32>) -> u32 {
        let units = match self {
            AvailabilityPolicy::Uncontended => requirements.sum(),
            AvailabilityPolicy::MaxRequirement => requirements.max().unwrap_or(0),
        };
        units.max(1)
    }
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            n: 20,
            m: 10,
            p: 0.4,
            q: 0.4,
            requirement_range: [1, 20],
            duration_mean_range: [1.0, 200.0],
            t_min: 1.0,
            t_max: 200.0,
            seed: 0,
            availability_policy: AvailabilityPolicy::default(),
            availability_override: BTreeMap::new(),
        }
    }
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("n and m must be at least 1"));
        }
        check_density("p", self.p)?;
        check_density("q", self.q)?;
        let [rlo, rhi] = self.requirement_range;
        if rlo > rhi {
            return Err(Error::invalid(format!("empty requirement range [{rlo}, {rhi}]")));
        }
        let [dlo, dhi] = self.duration_mean_range;
        if !(dlo <= dhi) {
            return Err(Error::invalid(format!("empty duration range [{dlo}, {dhi}]")));
        }
        if !(self.t_min > 0.0 && self.t_min <= dlo && dhi <= self.t_max) {
            return Err(Error::invalid(format!(
                "need 0 < t_min <= {dlo} and {dhi} <= t_max, got t_min = {}, t_max = {}",
                self.t_min, self.t_max
            )));
        }
        if let Some((&l, _)) = self.availability_override.iter().find(|(&l, _)| l >= self.m) {
            return Err(Error::invalid(format!("availability override for missing resource {l}")));
        }
        Ok(())
    }
}

fn check_density(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {value} is not a density in [0, 1]")))
    }
}

/// Random dependency DAG with edge density `p`.
///
/// Each slot below the diagonal is drawn row by row. After a row is drawn a
/// candidate parent is always sampled from `[0, i)`; it is only wired in when
/// the row came out empty, so every node but the root has a parent.
pub fn generate_random_dag<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<DagAdjacency> {
    if n == 0 {
        return Err(Error::invalid("DAG needs at least one node"));
    }
    check_density("p", p)?;
    let mut lower = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0u8; i];
        for slot in row.iter_mut() {
            let v: f64 = rng.random();
            if v <= p {
                *slot = 1;
            }
        }
        if i > 0 {
            let degree: u32 = row.iter().map(|&e| e as u32).sum();
            let parent = rng.random_range(0..i);
            if degree == 0 {
                row[parent] = 1;
            }
        }
        lower.push(row);
    }
    Ok(DagAdjacency { n, lower })
}

/// Random activity-resource map with edge density `q`, drawn row-major.
pub fn generate_random_bipartite<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    q: f64,
    rng: &mut R,
) -> Result<BipartiteMap> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("bipartite map needs n >= 1 and m >= 1"));
    }
    check_density("q", q)?;
    let edges = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let v: f64 = rng.random();
                    u8::from(v <= q)
                })
                .collect()
        })
        .collect();
    Ok(BipartiteMap { n, m, edges })
}

/// Turns a DAG and a resource map into a full process model.
///
/// Per activity, the mapped requirements are drawn in resource order, then
/// the expected duration. Availability follows `params.availability_policy`
/// (1 for a resource nothing uses) unless overridden per resource.
pub fn assemble_model<R: Rng + ?Sized>(
    dag: &DagAdjacency,
    map: &BipartiteMap,
    params: &EnsembleParams,
    rng: &mut R,
) -> Result<ProcessModel> {
    params.validate()?;
    if dag.n != params.n || map.n != params.n || map.m != params.m {
        return Err(Error::invalid(format!(
            "dimension mismatch: dag n = {}, map {}x{}, params {}x{}",
            dag.n, map.n, map.m, params.n, params.m
        )));
    }
    let [rlo, rhi] = params.requirement_range;
    let [dlo, dhi] = params.duration_mean_range;
    let mut activities = Vec::with_capacity(params.n);
    for id in 0..params.n {
        let required: Vec<u32> = map.edges[id]
            .iter()
            .map(|&e| if e == 1 { rng.random_range(rlo..=rhi) } else { 0 })
            .collect();
        let t_exp = if dlo < dhi { rng.random_range(dlo..=dhi) } else { dlo };
        activities.push(Activity {
            id,
            parents: dag.parents(id),
            required,
            t_min: params.t_min,
            t_exp,
            t_max: params.t_max,
        });
    }
    let availability = (0..params.m)
        .map(|l| {
            params.availability_override.get(&l).copied().unwrap_or_else(|| {
                params.availability_policy.units(activities.iter().map(|a| a.required[l]))
            })
        })
        .collect();
    ProcessModel::new(availability, activities)
}

/// DAG, resource map and model drawn from one stream seeded by `params.seed`.
pub fn generate_model(params: &EnsembleParams) -> Result<ProcessModel> {
    params.validate()?;
    let mut rng = seeded(params.seed);
    let dag = generate_random_dag(params.n, params.p, &mut rng)?;
    let map = generate_random_bipartite(params.n, params.m, params.q, &mut rng)?;
    assemble_model(&dag, &map, params, &mut rng)
}
