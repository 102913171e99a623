//! Results and aggregate CSVs, median aggregation and markdown tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pinvar_core::{Basis, MetricReport};

use super::sweep::{CellError, CellKey, TrialRecord};
use crate::dataset_csv::format_float;
use crate::error::{Error, Result};

const RESULTS_COLUMNS: &str = "problem,basis,r,w_o,interval,valid_time,energy,steps_evaluated,diverged_at";
const AGGREGATE_COLUMNS: &str = "problem,basis,r,w_o,median_valid_time,median_energy";

pub(crate) fn results_header() -> String {
    format!("{RESULTS_COLUMNS}\n")
}

pub(crate) fn results_line(r: &TrialRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        r.problem,
        r.cell.basis,
        format_float(r.cell.r),
        format_float(r.cell.w_o),
        r.interval,
        r.report.valid_time,
        format_float(r.report.energy),
        r.report.steps_evaluated,
        r.report.diverged_at.map(|s| s.to_string()).unwrap_or_default(),
    )
}

pub fn write_results(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut out = results_header();
    for r in records {
        out.push_str(&results_line(r));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text, path)
}

pub(crate) fn parse_results(text: &str, path: &Path) -> Result<Vec<TrialRecord>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == RESULTS_COLUMNS => {}
        Some((i, h)) => return Err(err(i + 1, format!("expected header {RESULTS_COLUMNS:?}, found {h:?}"))),
        None => return Ok(Vec::new()),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(err(line_no, format!("expected 9 fields, found {}", f.len())));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|e| err(line_no, format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(line_no, format!("{s:?}: {e}")));
        out.push(TrialRecord {
            problem: f[0].to_string(),
            cell: CellKey {
                basis: Basis::from_name(f[1]).map_err(|e| err(line_no, e.to_string()))?,
                r: float(f[2])?,
                w_o: float(f[3])?,
            },
            interval: int(f[4])?,
            report: MetricReport {
                valid_time: int(f[5])?,
                energy: float(f[6])?,
                steps_evaluated: int(f[7])?,
                diverged_at: if f[8].is_empty() { None } else { Some(int(f[8])?) },
            },
        });
    }
    Ok(out)
}

/// The lower median: element `(n − 1) / 2` of the sorted values, so the
/// 3rd of 5. NaN sorts last.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub problem: String,
    pub cell: CellKey,
    pub median_valid_time: usize,
    pub median_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteCell {
    pub problem: String,
    pub cell: CellKey,
    pub found: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregation {
    pub rows: Vec<AggregateRow>,
    /// Cells without exactly `expected` distinct intervals; left out of
    /// `rows`.
    pub incomplete: Vec<IncompleteCell>,
}

/// Medians per `(problem, basis, r, w_o)` in order of first appearance.
pub fn aggregate_median(records: &[TrialRecord], expected: usize) -> Aggregation {
    let mut groups: Vec<((String, (Basis, u64, u64)), CellKey, Vec<&TrialRecord>)> = Vec::new();
    for rec in records {
        let key = (rec.problem.clone(), rec.cell.bits());
        match groups.iter_mut().find(|(k, _, _)| *k == key) {
            Some((_, _, g)) => g.push(rec),
            None => groups.push((key, rec.cell, vec![rec])),
        }
    }
    let mut out = Aggregation::default();
    for ((problem, _), cell, group) in groups {
        let intervals: BTreeSet<usize> = group.iter().map(|r| r.interval).collect();
        if intervals.len() != expected || group.len() != expected {
            out.incomplete.push(IncompleteCell {
                problem,
                cell,
                found: intervals.len(),
                expected,
            });
            continue;
        }
        let vt: Vec<f64> = group.iter().map(|r| r.report.valid_time as f64).collect();
        let energy: Vec<f64> = group.iter().map(|r| r.report.energy).collect();
        out.rows.push(AggregateRow {
            problem,
            cell,
            median_valid_time: lower_median(&vt).unwrap_or(0.0) as usize,
            median_energy: lower_median(&energy).unwrap_or(f64::NAN),
        });
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_COLUMNS}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.problem,
            r.cell.basis,
            format_float(r.cell.r),
            format_float(r.cell.w_o),
            r.median_valid_time,
            format_float(r.median_energy)
        )
        .unwrap();
    }
    out
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    fs::write(path, aggregate_csv(rows)).map_err(|e| Error::io(path, e))
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn write_errors(path: &Path, errors: &[CellError], incomplete: &[IncompleteCell]) -> Result<()> {
    let mut out = String::from("problem,basis,r,w_o,message\n");
    for e in errors {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.problem,
            e.cell.basis,
            format_float(e.cell.r),
            format_float(e.cell.w_o),
            csv_quote(&e.message)
        )
        .unwrap();
    }
    for c in incomplete {
        let msg = format!("incomplete: {} of {} intervals", c.found, c.expected);
        writeln!(
            out,
            "{},{},{},{},{}",
            c.problem,
            c.cell.basis,
            format_float(c.cell.r),
            format_float(c.cell.w_o),
            csv_quote(&msg)
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn grid_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() < 1e-2 || v.abs() >= 1e3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| a.to_bits() == b.to_bits());
    v
}

/// One valid-time and one energy table per problem and basis: rows `r`,
/// columns `w_o`, both ascending. Missing cells print as `n/a`.
pub fn markdown_tables(rows: &[AggregateRow]) -> String {
    let mut problems: Vec<&str> = Vec::new();
    for r in rows {
        if !problems.contains(&r.problem.as_str()) {
            problems.push(&r.problem);
        }
    }
    let mut out = String::new();
    for problem in problems {
        let rows: Vec<&AggregateRow> = rows.iter().filter(|r| r.problem == problem).collect();
        let ridge = sorted_unique(rows.iter().map(|r| r.cell.r));
        let ode = sorted_unique(rows.iter().map(|r| r.cell.w_o));
        let mut bases: Vec<Basis> = rows.iter().map(|r| r.cell.basis).collect();
        bases.sort();
        bases.dedup();

        let metrics: [(&str, &dyn Fn(&AggregateRow) -> String); 2] = [
            ("median valid time", &|r| r.median_valid_time.to_string()),
            ("median discrete energy", &|r| format!("{:.1e}", r.median_energy)),
        ];
        for (title, cell_text) in metrics {
            writeln!(out, "## {problem}: {title}\n").unwrap();
            for &basis in &bases {
                writeln!(out, "### {basis}\n").unwrap();
                out.push_str("| r \\ w_o |");
                for &w in &ode {
                    write!(out, " {} |", grid_label(w)).unwrap();
                }
                out.push_str("\n|---|");
                out.push_str(&"---|".repeat(ode.len()));
                out.push('\n');
                for &r in &ridge {
                    write!(out, "| {} |", grid_label(r)).unwrap();
                    for &w in &ode {
                        let found = rows.iter().find(|a| {
                            a.cell.basis == basis && a.cell.r.to_bits() == r.to_bits() && a.cell.w_o.to_bits() == w.to_bits()
                        });
                        let text = found.map(|a| cell_text(a)).unwrap_or_else(|| "n/a".into());
                        write!(out, " {text} |").unwrap();
                    }
                    out.push('\n');
                }
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(basis: Basis, r: f64, interval: usize, vt: usize, energy: f64) -> TrialRecord {
        TrialRecord {
            problem: "spring".into(),
            cell: CellKey { basis, r, w_o: 0.0 },
            interval,
            report: MetricReport {
                valid_time: vt,
                energy,
                steps_evaluated: vt,
                diverged_at: None,
            },
        }
    }

    #[test]
    fn median_is_third_of_five() {
        assert_eq!(lower_median(&[5.0, 1.0, 4.0, 2.0, 3.0]), Some(3.0));
        assert_eq!(lower_median(&[1e4, 1e4, 1e4, 1e4, 9e3]), Some(1e4));
        assert_eq!(lower_median(&[]), None);
    }

    #[test]
    fn incomplete_cells_are_flagged() {
        let mut records: Vec<_> = (1..=5).map(|i| rec(Basis::H1, 0.1, i, i * 10, i as f64)).collect();
        records.extend((1..=4).map(|i| rec(Basis::H2, 0.1, i, 1, 1.0)));
        let agg = aggregate_median(&records, 5);
        assert_eq!(agg.rows.len(), 1);
        assert_eq!(agg.rows[0].median_valid_time, 30);
        assert_eq!(agg.rows[0].median_energy, 3.0);
        assert_eq!(agg.incomplete.len(), 1);
        assert_eq!(agg.incomplete[0].found, 4);
    }

    #[test]
    fn results_round_trip() {
        let mut records = vec![rec(Basis::H3, 1e-12, 2, 17, 0.1 + 0.2)];
        records[0].report.diverged_at = Some(18);
        let mut text = results_header();
        text.push_str(&results_line(&records[0]));
        assert_eq!(parse_results(&text, Path::new("x")).unwrap(), records);
    }

    #[test]
    fn table_shape() {
        let mut records = Vec::new();
        for (i, r) in [1e-12, 1e-1].into_iter().enumerate() {
            for w in [0.0, 0.5, 1.0] {
                let mut x = rec(Basis::H2, r, 1, 10 + i, 1e-9);
                x.cell.w_o = w;
                records.push(x);
            }
        }
        let md = markdown_tables(&aggregate_median(&records, 1).rows);
        assert!(md.contains("| r \\ w_o | 0 | 0.5 | 1 |"));
        assert!(md.contains("| 1e-12 | 10 | 10 | 10 |"));
        assert!(md.contains("| 0.1 | 1.0e-9 | 1.0e-9 | 1.0e-9 |"));
    }
}
