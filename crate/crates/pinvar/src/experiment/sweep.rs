//! Grid sweeps with a resume journal.
//!
//! Each finished cell appends its interval rows to `results.partial.csv`
//! under the output directory. A rerun with the same resolved config skips
//! cells whose rows are all in the journal; a different config is refused.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use pinvar_core::{Basis, MetricReport};
use rayon::prelude::*;

use super::report::{self, parse_results, results_header, results_line};
use super::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub basis: Basis,
    pub r: f64,
    pub w_o: f64,
}

impl CellKey {
    pub(crate) fn bits(&self) -> (Basis, u64, u64) {
        (self.basis, self.r.to_bits(), self.w_o.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub problem: String,
    pub cell: CellKey,
    /// 1-based position in the config's test interval list.
    pub interval: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellError {
    pub problem: String,
    pub cell: CellKey,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    /// Canonical order: cells as in [`Experiment::cells`], then interval.
    pub records: Vec<TrialRecord>,
    pub errors: Vec<CellError>,
}

pub const JOURNAL: &str = "results.partial.csv";
pub const CONFIG: &str = "config.json";

struct Journal {
    file: Mutex<File>,
    path: PathBuf,
}

impl Journal {
    fn append(&self, records: &[TrialRecord]) -> Result<()> {
        let mut text = String::new();
        for r in records {
            text.push_str(&results_line(r));
        }
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(text.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Opens (or resumes) the journal in `dir` and returns the rows it already
/// holds.
fn open_journal(dir: &Path, config: &ExperimentConfig) -> Result<(Journal, Vec<TrialRecord>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join(CONFIG);
    let journal_path = dir.join(JOURNAL);
    let config_json = serde_json::to_string_pretty(config).map_err(|e| Error::json(&config_path, e))? + "\n";

    let mut done = Vec::new();
    if journal_path.exists() {
        let previous = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let previous: ExperimentConfig =
            serde_json::from_str(&previous).map_err(|e| Error::json(&config_path, e))?;
        if previous != *config {
            return Err(Error::Config(format!(
                "{} holds a journal for a different config; use a fresh output directory",
                dir.display()
            )));
        }
        let text = fs::read_to_string(&journal_path).map_err(|e| Error::io(&journal_path, e))?;
        // A crash can leave a torn last line; drop it rather than fail.
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        done = parse_results(complete, &journal_path)?;
    } else {
        fs::write(&config_path, config_json).map_err(|e| Error::io(&config_path, e))?;
    }

    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&journal_path)
        .map_err(|e| Error::io(&journal_path, e))?;
    if done.is_empty() {
        file.set_len(0).map_err(|e| Error::io(&journal_path, e))?;
        file.write_all(results_header().as_bytes())
            .map_err(|e| Error::io(&journal_path, e))?;
    }
    Ok((
        Journal {
            file: Mutex::new(file),
            path: journal_path,
        },
        done,
    ))
}

fn run_cell(exp: &Experiment, cell: CellKey) -> Result<Vec<TrialRecord>> {
    let trained = exp
        .train(cell.basis, cell.r, cell.w_o)
        .map_err(|e| Error::Other(format!("training failed: {e}")))?;
    (1..=exp.config.test_starts.len())
        .map(|interval| {
            let report = exp
                .evaluate(&trained.model, interval)
                .map_err(|e| Error::Other(format!("interval {interval}: {e}")))?;
            Ok(TrialRecord {
                problem: exp.config.problem.clone(),
                cell,
                interval,
                report,
            })
        })
        .collect()
}

/// Runs every grid cell on a pool of `jobs` threads. With an output
/// directory the sweep journals and resumes, and writes `results.csv`,
/// `aggregate.csv`, `tables.md` and `errors.csv` on completion.
pub fn run_sweep(exp: &Experiment, out_dir: Option<&Path>, jobs: usize) -> Result<SweepOutcome> {
    let cells = exp.cells();
    let n_intervals = exp.config.test_starts.len();

    let (journal, previous) = match out_dir {
        Some(dir) => {
            let (j, done) = open_journal(dir, &exp.config)?;
            (Some(j), done)
        }
        None => (None, Vec::new()),
    };
    let mut finished: HashMap<_, Vec<TrialRecord>> = HashMap::new();
    for rec in previous {
        let rows = finished.entry(rec.cell.bits()).or_default();
        rows.retain(|r| r.interval != rec.interval);
        rows.push(rec);
    }
    finished.retain(|_, rows| rows.len() == n_intervals);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Other(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                if let Some(rows) = finished.get(&cell.bits()) {
                    let mut rows = rows.clone();
                    rows.sort_by_key(|r| r.interval);
                    return Ok(rows);
                }
                let rows = run_cell(exp, cell)?;
                if let Some(j) = &journal {
                    j.append(&rows)?;
                }
                Ok(rows)
            })
            .collect()
    });

    let mut outcome = SweepOutcome::default();
    for (cell, res) in cells.iter().zip(results) {
        match res {
            Ok(rows) => outcome.records.extend(rows),
            Err(e @ Error::Io { .. }) => return Err(e),
            Err(e) => outcome.errors.push(CellError {
                problem: exp.config.problem.clone(),
                cell: *cell,
                message: e.to_string(),
            }),
        }
    }

    if let Some(dir) = out_dir {
        report::write_results(&dir.join("results.csv"), &outcome.records)?;
        let agg = report::aggregate_median(&outcome.records, n_intervals);
        report::write_aggregate(&dir.join("aggregate.csv"), &agg.rows)?;
        let tables = report::markdown_tables(&agg.rows);
        fs::write(dir.join("tables.md"), tables).map_err(|e| Error::io(dir.join("tables.md"), e))?;
        report::write_errors(&dir.join("errors.csv"), &outcome.errors, &agg.incomplete)?;
    }
    Ok(outcome)
}
