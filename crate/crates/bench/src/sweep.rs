use crate::report::{Method, RunReport};
use crate::run::{load_inputs, run_single, BenchError, ParamOverrides, RunParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    StepA,
    StepB,
    Alpha,
    Gamma,
    /// Swept value is used at every boundary bus.
    Lambda0,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::StepA => "step_a",
            SweepParameter::StepB => "step_b",
            SweepParameter::Alpha => "alpha",
            SweepParameter::Gamma => "gamma",
            SweepParameter::Lambda0 => "lambda0",
        }
    }

    fn fits(self, m: Method) -> bool {
        match self {
            SweepParameter::StepA | SweepParameter::StepB => m == Method::Lr,
            SweepParameter::Alpha | SweepParameter::Gamma => m == Method::Alr,
            SweepParameter::Lambda0 => m != Method::Centralized,
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One parameter varied over a list of values, everything else fixed.
///
/// `case` and `areas` are resolved relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub case: PathBuf,
    #[serde(default)]
    pub areas: Option<PathBuf>,
    #[serde(default)]
    pub strict_boundary: bool,
    pub method: Method,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default)]
    pub fixed: ParamOverrides,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.values.is_empty() {
            return Err(BenchError::Spec("value list is empty".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(BenchError::Spec(format!("non-finite value {v}")));
        }
        if !self.parameter.fits(self.method) {
            return Err(BenchError::Spec(format!("{} does not apply to method {}", self.parameter, self.method)));
        }
        Ok(())
    }

    fn params_for(&self, v: f64) -> RunParams {
        let mut p = RunParams::default();
        self.fixed.apply(&mut p);
        match self.parameter {
            SweepParameter::StepA => p.lr.step_a = v,
            SweepParameter::StepB => p.lr.step_b = v,
            SweepParameter::Alpha => p.alr.alpha = v,
            SweepParameter::Gamma => p.alr.gamma = v,
            SweepParameter::Lambda0 => {
                p.lr.lambda0 = Some(vec![v]);
                p.alr.lambda0 = Some(vec![v]);
            }
        }
        p
    }
}

/// Parse and validate a spec file, making its paths absolute.
pub fn load_sweep_spec(path: impl AsRef<Path>) -> Result<SweepSpec, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut spec: SweepSpec = serde_json::from_str(&text).map_err(|e| BenchError::Spec(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    spec.case = base.join(&spec.case);
    spec.areas = spec.areas.map(|a| base.join(a));
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    /// A failed run keeps its message; the sweep goes on.
    pub result: Result<RunReport, String>,
}

/// Run every value of the spec, in parallel, rows sorted by value.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, BenchError> {
    spec.validate()?;
    let (case, part) = load_inputs(&spec.case, spec.areas.as_deref(), spec.strict_boundary)?;
    let mut rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .map(|&value| SweepRow {
            value,
            result: run_single(&case, part.as_ref(), spec.method, &spec.params_for(value))
                .map(|o| o.report)
                .map_err(|e| e.to_string()),
        })
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(rows)
}
