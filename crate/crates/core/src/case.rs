//! Network data model, case-file IO and area partitioning.
//!
//! Bus ids are 1-based in files and in the public API; internally a bus id
//! `i` lives at index `i - 1`.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: usize,
    pub load_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: usize,
    pub p_min_pu: f64,
    pub p_max_pu: f64,
    pub cost_a: f64, // $/h
    pub cost_b: f64, // $/h per pu
    pub cost_c: f64, // $/h per pu^2
}

impl Generator {
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_a + self.cost_b * p + self.cost_c * p * p
    }

    pub fn marginal_cost(&self, p: f64) -> f64 {
        self.cost_b + 2.0 * self.cost_c * p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance_pu: f64,
    pub f_max_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCase {
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    pub slack_bus: usize,
    /// Optional bus id -> area id assignment carried by the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub areas: Option<BTreeMap<usize, usize>>,
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed case file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid case: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, CaseError> {
    Err(CaseError::Invalid(msg.into()))
}

impl NetworkCase {
    pub fn from_json_str(s: &str) -> Result<Self, CaseError> {
        let case: NetworkCase = serde_json::from_str(s)?;
        case.validate()?;
        Ok(case)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Bus loads ordered by bus id.
    pub fn loads(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.buses.len()];
        for b in &self.buses {
            out[b.id - 1] = b.load_pu;
        }
        out
    }

    pub fn total_load(&self) -> f64 {
        self.loads().iter().sum()
    }

    pub fn generators_at(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.generators
            .iter()
            .enumerate()
            .filter(move |(_, g)| g.bus == bus)
            .map(|(i, _)| i)
    }

    /// Total generation cost of a dispatch, constant terms included.
    pub fn cost(&self, p_g: &[f64]) -> f64 {
        self.generators.iter().zip(p_g).map(|(g, p)| g.cost(*p)).sum()
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        let n = self.buses.len();
        if n == 0 {
            return invalid("case has no buses");
        }
        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return invalid(format!("duplicate bus id {}", b.id));
            }
            if !(b.load_pu.is_finite() && b.load_pu >= 0.0) {
                return invalid(format!("bus {} load must be finite and >= 0", b.id));
            }
        }
        if seen.iter().next() != Some(&1) || seen.iter().last() != Some(&n) {
            return invalid("bus ids must be contiguous from 1");
        }
        let known = |id: usize| id >= 1 && id <= n;
        if !known(self.slack_bus) {
            return invalid(format!("slack bus {} does not exist", self.slack_bus));
        }
        for (k, g) in self.generators.iter().enumerate() {
            if !known(g.bus) {
                return invalid(format!("generator {} references unknown bus {}", k + 1, g.bus));
            }
            let vals = [g.p_min_pu, g.p_max_pu, g.cost_a, g.cost_b, g.cost_c];
            if vals.iter().any(|v| !v.is_finite()) {
                return invalid(format!("generator {} has a non-finite field", k + 1));
            }
            if g.p_min_pu > g.p_max_pu {
                return invalid(format!("generator {} has p_min_pu > p_max_pu", k + 1));
            }
            if g.cost_c < 0.0 {
                return invalid(format!("generator {} has negative cost_c", k + 1));
            }
        }
        for (k, l) in self.lines.iter().enumerate() {
            if !known(l.from) || !known(l.to) {
                return invalid(format!("line {} references an unknown bus", k + 1));
            }
            if l.from == l.to {
                return invalid(format!("line {} connects bus {} to itself", k + 1, l.from));
            }
            if !(l.susceptance_pu.is_finite() && l.susceptance_pu > 0.0) {
                return invalid(format!("line {} susceptance must be > 0", k + 1));
            }
            if !(l.f_max_pu.is_finite() && l.f_max_pu > 0.0) {
                return invalid(format!("line {} flow limit must be > 0", k + 1));
            }
        }
        let all: Vec<usize> = (1..=n).collect();
        if !connected(&all, self.lines.iter().map(|l| (l.from, l.to))) {
            return invalid("network is not connected");
        }
        let cap: f64 = self.generators.iter().map(|g| g.p_max_pu).sum();
        if cap < self.total_load() {
            return invalid("total generation capacity is below total load");
        }
        Ok(())
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase, CaseError> {
    NetworkCase::from_json_str(&std::fs::read_to_string(path)?)
}

pub fn save_case(case: &NetworkCase, path: impl AsRef<Path>) -> Result<(), CaseError> {
    std::fs::write(path, case.to_json_string())?;
    Ok(())
}

/// True when `buses` form one connected component using only `edges`
/// whose endpoints both lie in `buses`.
pub(crate) fn connected(buses: &[usize], edges: impl Iterator<Item = (usize, usize)>) -> bool {
    let Some(&first) = buses.first() else {
        return true;
    };
    let members: BTreeSet<usize> = buses.iter().copied().collect();
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (a, b) in edges {
        if members.contains(&a) && members.contains(&b) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
    }
    let mut seen = BTreeSet::from([first]);
    let mut queue = VecDeque::from([first]);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(v) {
                queue.push_back(v);
            }
        }
    }
    seen.len() == members.len()
}

/// How strictly boundary buses are checked when partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// Boundary buses must carry no load and no generator.
    #[default]
    ZeroInjection,
    /// Boundary buses may carry load or generation.
    AllowInjections,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub area_of: BTreeMap<usize, usize>,
    /// Distinct area ids, ascending.
    pub areas: Vec<usize>,
    /// Indices into `case.lines` of lines joining different areas.
    pub tie_lines: Vec<usize>,
    /// Buses incident to a tie-line, ascending.
    pub boundary_buses: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("bus {0} has no area")]
    Unassigned(usize),
    #[error("area map references unknown bus {0}")]
    UnknownBus(usize),
    #[error("boundary bus {0} carries load or generation")]
    BoundaryInjection(usize),
    #[error("area {0} is not internally connected")]
    DisconnectedArea(usize),
}

impl Partition {
    pub fn area_buses(&self, area: usize) -> Vec<usize> {
        self.area_of.iter().filter(|(_, a)| **a == area).map(|(b, _)| *b).collect()
    }

    pub fn is_boundary(&self, bus: usize) -> bool {
        self.boundary_buses.binary_search(&bus).is_ok()
    }

    pub fn is_tie(&self, line: usize) -> bool {
        self.tie_lines.contains(&line)
    }

    /// Indices of lines with both ends in `area`.
    pub fn internal_lines(&self, case: &NetworkCase, area: usize) -> Vec<usize> {
        case.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| self.area_of[&l.from] == area && self.area_of[&l.to] == area)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of generators located in `area`.
    pub fn area_generators(&self, case: &NetworkCase, area: usize) -> Vec<usize> {
        case.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| self.area_of[&g.bus] == area)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn make_partition(case: &NetworkCase, area_of: &BTreeMap<usize, usize>) -> Result<Partition, PartitionError> {
    make_partition_with(case, area_of, BoundaryRule::ZeroInjection)
}

pub fn make_partition_with(
    case: &NetworkCase,
    area_of: &BTreeMap<usize, usize>,
    rule: BoundaryRule,
) -> Result<Partition, PartitionError> {
    let n = case.n_buses();
    if let Some(&b) = area_of.keys().find(|&&b| b < 1 || b > n) {
        return Err(PartitionError::UnknownBus(b));
    }
    if let Some(b) = (1..=n).find(|b| !area_of.contains_key(b)) {
        return Err(PartitionError::Unassigned(b));
    }
    let areas: Vec<usize> = area_of.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let tie_lines: Vec<usize> = case
        .lines
        .iter()
        .enumerate()
        .filter(|(_, l)| area_of[&l.from] != area_of[&l.to])
        .map(|(i, _)| i)
        .collect();
    let boundary: BTreeSet<usize> = tie_lines
        .iter()
        .flat_map(|&i| [case.lines[i].from, case.lines[i].to])
        .collect();
    if rule == BoundaryRule::ZeroInjection {
        let loads = case.loads();
        for &b in &boundary {
            if loads[b - 1] != 0.0 || case.generators_at(b).next().is_some() {
                return Err(PartitionError::BoundaryInjection(b));
            }
        }
    }
    let part = Partition {
        area_of: area_of.clone(),
        areas,
        tie_lines,
        boundary_buses: boundary.into_iter().collect(),
    };
    for &a in &part.areas {
        let buses = part.area_buses(a);
        if !connected(&buses, case.lines.iter().map(|l| (l.from, l.to))) {
            return Err(PartitionError::DisconnectedArea(a));
        }
    }
    Ok(part)
}

/// Every bus in area 1.
pub fn single_area(case: &NetworkCase) -> BTreeMap<usize, usize> {
    (1..=case.n_buses()).map(|b| (b, 1)).collect()
}

const CANONICAL_JSON: &str = include_str!("../data/canonical.json");

/// The built-in two-area, six-bus case.
///
/// Bus 6 is both loaded and a tie-line endpoint, so the partition is built
/// with [`BoundaryRule::AllowInjections`].
pub fn canonical_case() -> (NetworkCase, Partition) {
    let case = NetworkCase::from_json_str(CANONICAL_JSON).expect("canonical case is valid");
    let areas = case.areas.clone().expect("canonical case carries areas");
    let part = make_partition_with(&case, &areas, BoundaryRule::AllowInjections).expect("canonical partition is valid");
    (case, part)
}

pub fn canonical_json() -> &'static str {
    CANONICAL_JSON
}
