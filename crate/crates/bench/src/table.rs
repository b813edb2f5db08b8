//! Summary tables, rendered either as CSV or as aligned plain text.

use crate::compare::Comparison;
use crate::report::RunReport;
use crate::sweep::{SweepParameter, SweepRow};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

const REPORT_HEADERS: [&str; 10] = [
    "method",
    "iterations",
    "wall_time_s",
    "time_per_iter_s",
    "final_error",
    "final_error_pct",
    "objective_cost",
    "converged",
    "shared_values_per_iter",
    "oscillating_at",
];

fn report_cells(r: &RunReport) -> Vec<String> {
    vec![
        r.method.to_string(),
        r.iterations.to_string(),
        format!("{:.6}", r.wall_time_s),
        format!("{:.3e}", r.time_per_iteration()),
        format!("{:.6}", r.final_error),
        format!("{:.4}", r.final_error_pct),
        format!("{:.6}", r.objective_cost),
        r.converged.to_string(),
        r.shared_values_per_iteration.to_string(),
        r.oscillating_at.map_or_else(|| "-".to_string(), |k| k.to_string()),
    ]
}

impl Table {
    pub fn reports<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> Table {
        Table {
            headers: REPORT_HEADERS.iter().map(|s| s.to_string()).collect(),
            rows: reports.into_iter().map(report_cells).collect(),
        }
    }

    pub fn sweep(parameter: SweepParameter, rows: &[SweepRow]) -> Table {
        let mut headers = vec![parameter.to_string()];
        headers.extend(REPORT_HEADERS.iter().map(|s| s.to_string()));
        headers.push("error".into());
        let width = headers.len();
        let rows = rows
            .iter()
            .map(|row| {
                let mut cells = vec![row.value.to_string()];
                match &row.result {
                    Ok(r) => {
                        cells.extend(report_cells(r));
                        cells.push(String::new());
                    }
                    Err(e) => {
                        cells.resize(width - 1, "-".into());
                        cells.push(e.clone());
                    }
                }
                cells
            })
            .collect();
        Table { headers, rows }
    }

    pub fn comparison(c: &Comparison) -> Table {
        let mut t = Table::reports([&c.lr, &c.alr]);
        let mode = match c.fixed_iters {
            Some(n) => format!("fixed_{n}"),
            None => format!("criterion_{}", c.criterion),
        };
        t.headers.insert(0, "mode".into());
        for row in &mut t.rows {
            row.insert(0, mode.clone());
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("write to memory");
        for row in &self.rows {
            w.write_record(row).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 cells")
    }

    /// Columns padded to their widest cell; numbers right-aligned.
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for row in &self.rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| {
                    if c.parse::<f64>().is_ok() {
                        format!("{c:>w$}")
                    } else {
                        format!("{c:<w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Method;

    fn report() -> RunReport {
        RunReport {
            method: Method::Lr,
            iterations: 149,
            wall_time_s: 0.004,
            final_error: 0.00994,
            final_error_pct: 0.828,
            objective_cost: 6.25,
            converged: true,
            shared_values_per_iteration: 5,
            oscillating_at: None,
        }
    }

    #[test]
    fn csv_and_text_agree_on_cells() {
        let t = Table::reports([&report()]);
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("method,iterations,wall_time_s"));
        assert!(lines.next().unwrap().starts_with("lr,149,0.004000"));
        let text = t.to_text();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].find("iterations"), Some(8));
        // right-aligned numbers end where their header ends
        let end = rows[0].find("iterations").unwrap() + "iterations".len();
        assert_eq!(&rows[2][end - 3..end], "149");
    }

    #[test]
    fn failed_sweep_rows_keep_message() {
        let rows = vec![
            SweepRow { value: 0.5, result: Ok(report()) },
            SweepRow { value: 1.0, result: Err("boom".into()) },
        ];
        let t = Table::sweep(SweepParameter::StepA, &rows);
        assert_eq!(t.rows[1].len(), t.headers.len());
        assert_eq!(t.rows[1].last().unwrap(), "boom");
        assert_eq!(t.rows[1][1], "-");
    }
}
