use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sced_bench::table::Table;
use sced_bench::trace_csv::save_trace;
use sced_bench::{compare_methods, load_inputs, load_sweep_spec, run_single, Method, ParamOverrides, RunParams};
use sced_core::trace::StopRule;
use std::path::PathBuf;
use std::process::ExitCode;

/// Centralized, LR and ALR economic dispatch runs.
#[derive(Parser)]
#[command(name = "sced-bench", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one case with one method.
    Solve {
        #[command(flatten)]
        input: CaseArgs,
        #[arg(long)]
        method: Method,
        #[command(flatten)]
        params: ParamArgs,
        /// Write the per-iteration trace here (iterative methods).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Vary one parameter as described by a JSON spec file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run LR and ALR side by side.
    Compare {
        #[command(flatten)]
        input: CaseArgs,
        /// Stop when |Σ gen − Σ load| falls below this.
        #[arg(long, allow_hyphen_values = true)]
        criterion: f64,
        /// Run both methods for exactly N iterations instead.
        #[arg(long, value_name = "N")]
        fixed_iters: Option<usize>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long)]
    case: PathBuf,
    /// JSON object mapping bus id to area id; defaults to the case's own.
    #[arg(long)]
    areas: Option<PathBuf>,
    /// Reject boundary buses that carry load or generation.
    #[arg(long)]
    strict_boundary: bool,
}

#[derive(Args)]
struct ParamArgs {
    /// LR step size offset `a` in 1/(a + b·v).
    #[arg(long, allow_hyphen_values = true)]
    step_a: Option<f64>,
    /// LR step size slope `b` in 1/(a + b·v).
    #[arg(long, allow_hyphen_values = true)]
    step_b: Option<f64>,
    /// ALR multiplier step.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// ALR penalty weight.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Initial λ, one per boundary bus (comma separated) or one for all.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda0: Option<Vec<f64>>,
    /// Initial μ, one per tie-line or one for all (LR).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu0: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    stop_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// gen-load-error, mismatch-norm or fixed-iterations.
    #[arg(long)]
    stop_rule: Option<StopRule>,
}

impl ParamArgs {
    fn params(&self) -> RunParams {
        let o = ParamOverrides {
            step_a: self.step_a,
            step_b: self.step_b,
            alpha: self.alpha,
            gamma: self.gamma,
            lambda0: self.lambda0.clone(),
            mu0: self.mu0.clone(),
            stop_tol: self.stop_tol,
            max_iter: self.max_iter,
            stop_rule: self.stop_rule,
        };
        let mut p = RunParams::default();
        o.apply(&mut p);
        p
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Summary format on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also write the summary as CSV to this file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl OutputArgs {
    fn emit(&self, t: &Table) -> Result<()> {
        match self.format {
            Format::Text => print!("{}", t.to_text()),
            Format::Csv => print!("{}", t.to_csv()),
        }
        if let Some(p) = &self.summary {
            std::fs::write(p, t.to_csv()).with_context(|| format!("writing {}", p.display()))?;
        }
        Ok(())
    }
}

fn inputs(a: &CaseArgs) -> Result<(sced_core::case::NetworkCase, Option<sced_core::case::Partition>)> {
    load_inputs(&a.case, a.areas.as_deref(), a.strict_boundary).with_context(|| format!("loading {}", a.case.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Solve { input, method, params, trace, out } => {
            let (case, part) = inputs(&input)?;
            let o = run_single(&case, part.as_ref(), method, &params.params())?;
            if let (Some(path), Some(t)) = (&trace, &o.trace) {
                save_trace(t, path).with_context(|| format!("writing {}", path.display()))?;
            }
            out.emit(&Table::reports([&o.report]))?;
            if matches!(out.format, Format::Text) {
                println!();
                for (k, (g, p)) in case.generators.iter().zip(&o.dispatch.p_g).enumerate() {
                    println!("P_g{} (bus {}) = {:.6}", k + 1, g.bus, p);
                }
            }
        }
        Cmd::Sweep { spec, out } => {
            let s = load_sweep_spec(&spec).with_context(|| format!("loading {}", spec.display()))?;
            let rows = sced_bench::run_sweep(&s)?;
            out.emit(&Table::sweep(s.parameter, &rows))?;
        }
        Cmd::Compare { input, criterion, fixed_iters, params, out } => {
            anyhow::ensure!(criterion > 0.0, "--criterion must be > 0");
            let (case, part) = inputs(&input)?;
            let part = part.context("compare needs an area assignment (--areas or an `areas` block in the case)")?;
            let c = compare_methods(&case, &part, &params.params(), criterion, fixed_iters)?;
            out.emit(&Table::comparison(&c))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // sources are often repeated inside their parent's message
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    msg = if msg.is_empty() { cause } else { format!("{msg}: {cause}") };
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

