//! Trajectory CSV files.
//!
//! ```text
//! # {
//! #   "system": "lorenz",
//! #   "t0": 0.0,
//! #   "h": 0.001,
//! #   "n": 100000,
//! #   ...generator or prediction parameters...
//! # }
//! t,x1,x2,x3
//! 0.0,-3.0,-3.0,28.0
//! ```
//!
//! The `#` lines carry a JSON metadata object. Floats are written in their
//! shortest round-trip form, and times as `t0 + (k − 1) h` rather than by
//! accumulation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pinvar_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub t0: f64,
    pub h: f64,
    pub n: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// A trajectory read from or written to CSV. Unlike [`Dataset`] it may be
/// empty (a rollout that diverged on its first step).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub dim: usize,
    pub points: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        Ok(Dataset::new(self.meta.system, self.meta.t0, self.meta.h, self.dim, self.points)?)
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut meta = traj.meta.clone();
    meta.n = traj.len();
    let mut out = String::with_capacity(traj.points.len() * 24 + 512);
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(path, e))?;
    for line in json.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push('t');
    for i in 1..=traj.dim {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for (k, row) in traj.points.chunks_exact(traj.dim).enumerate() {
        out.push_str(&format_float(meta.t0 + k as f64 * meta.h));
        for v in row {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_dataset(path: &Path, dataset: &Dataset, extra: serde_json::Map<String, serde_json::Value>) -> Result<()> {
    write_trajectory(
        path,
        &Trajectory {
            meta: TrajectoryMeta {
                system: dataset.system_name.clone(),
                t0: dataset.t0,
                h: dataset.h,
                n: dataset.len(),
                extra,
            },
            dim: dataset.dim(),
            points: dataset.as_flat().to_vec(),
        },
    )
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let traj = read_trajectory(path)?;
    if traj.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            message: "dataset has no rows".into(),
        });
    }
    traj.into_dataset()
}

fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        line,
        message,
    };
    let mut meta_json = String::new();
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.starts_with('#') => {
                meta_json.push_str(l.trim_start_matches('#'));
                meta_json.push('\n');
            }
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i + 1, l),
            None => return Err(parse_err(0, "missing `t,x1,...` header".into())),
        }
    };
    let columns: Vec<&str> = header.1.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "t" {
        return Err(parse_err(header.0, format!("expected header `t,x1,...`, found `{}`", header.1)));
    }
    let dim = columns.len() - 1;

    let mut times = Vec::new();
    let mut points = Vec::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (c, field) in l.split(',').enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("`{field}` is not a number")))?;
            if c == 0 {
                times.push(v);
            } else {
                points.push(v);
            }
            count += 1;
        }
        if count != dim + 1 {
            return Err(parse_err(i + 1, format!("expected {} fields, found {count}", dim + 1)));
        }
    }

    let meta = if meta_json.trim().is_empty() {
        let h = match times.as_slice() {
            [a, b, ..] => b - a,
            _ => return Err(parse_err(0, "cannot infer the time step without metadata and two rows".into())),
        };
        TrajectoryMeta {
            system: String::new(),
            t0: times[0],
            h,
            n: times.len(),
            extra: Default::default(),
        }
    } else {
        serde_json::from_str(&meta_json).map_err(|e| Error::json(path, e))?
    };
    Ok(Trajectory { meta, dim, points })
}
