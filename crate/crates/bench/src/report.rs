use sced_core::case::{NetworkCase, Partition};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Centralized,
    Lr,
    Alr,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::Lr => "lr",
            Method::Alr => "alr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "centralized" => Ok(Method::Centralized),
            "lr" => Ok(Method::Lr),
            "alr" => Ok(Method::Alr),
            _ => Err(format!("unknown method `{s}` (centralized, lr, alr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub method: Method,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// `|Σ gen − Σ load|` of the returned dispatch.
    pub final_error: f64,
    /// `100 · final_error / Σ load`
    pub final_error_pct: f64,
    pub objective_cost: f64,
    pub converged: bool,
    pub shared_values_per_iteration: usize,
    /// ALR only: first iteration flagged by the oscillation window.
    pub oscillating_at: Option<usize>,
}

impl RunReport {
    pub fn time_per_iteration(&self) -> f64 {
        self.wall_time_s / self.iterations.max(1) as f64
    }
}

/// Scalars the areas exchange per iteration.
///
/// LR: one angle and one λ per boundary bus, one μ per tie-line.
/// ALR: one angle and one λ per boundary bus, plus the flow of every line
/// incident to a boundary bus (tie-lines included, each line counted once).
/// Centralized: nothing is exchanged.
pub fn shared_values_per_iteration(method: Method, case: &NetworkCase, part: &Partition) -> usize {
    let nb = part.boundary_buses.len();
    match method {
        Method::Centralized => 0,
        Method::Lr => 2 * nb + part.tie_lines.len(),
        Method::Alr => {
            let incident: BTreeSet<usize> = case
                .lines
                .iter()
                .enumerate()
                .filter(|(_, l)| part.is_boundary(l.from) || part.is_boundary(l.to))
                .map(|(i, _)| i)
                .collect();
            2 * nb + incident.len()
        }
    }
}
