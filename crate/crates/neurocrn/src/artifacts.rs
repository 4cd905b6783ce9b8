//! CSV and JSON artifacts, written atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use neurocrn_core::integrator::Trajectory;
use neurocrn_core::training::IterationRecord;
use neurocrn_core::verify::EquivalenceReport;

use crate::{Error, Result};

/// Write `contents` to `dir/name` through a temporary file and a rename, so
/// readers never see a partial file. `name` must be a bare file name.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(Error::Config(format!("`{name}` is not a plain file name")));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

fn row(out: &mut String, t: f64, state: &[f64]) {
    num(out, t);
    for v in state {
        out.push(',');
        num(out, *v);
    }
    out.push('\n');
}

/// `t,x_<name>,...` with one row per accepted step. A detected steady state
/// is repeated on a final `# steady_state,...` line; a failed run ends with
/// a `# failure: ...` line.
pub fn trajectory_csv(traj: &Trajectory, names: &[String], config_hash: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = config_hash {
        let _ = writeln!(out, "# config_hash={h}");
    }
    out.push('t');
    for n in names {
        let _ = write!(out, ",x_{n}");
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        row(&mut out, *t, s);
    }
    if let Some(ss) = &traj.steady_state {
        out.push_str("# steady_state,");
        row(&mut out, traj.final_time(), ss);
    }
    if let Some(why) = &traj.failure {
        let _ = writeln!(out, "# failure: {why}");
    }
    out
}

pub fn metrics_csv(records: &[IterationRecord], config_hash: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = config_hash {
        let _ = writeln!(out, "# config_hash={h}");
    }
    out.push_str("iter,cost,accuracy\n");
    for r in records {
        let _ = write!(out, "{},", r.iteration);
        num(&mut out, r.cost);
        out.push(',');
        num(&mut out, r.accuracy);
        out.push('\n');
    }
    out
}

/// `node,ode_value,nn_value,abs_diff` where `node` is `layer:index`.
pub fn equivalence_csv(report: &EquivalenceReport, config_hash: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = config_hash {
        let _ = writeln!(out, "# config_hash={h}");
    }
    out.push_str("node,ode_value,nn_value,abs_diff\n");
    for c in &report.per_node {
        let _ = write!(out, "{}:{},", c.layer, c.node);
        num(&mut out, c.ode_value);
        out.push(',');
        num(&mut out, c.nn_value);
        out.push(',');
        num(&mut out, c.abs_diff);
        out.push('\n');
    }
    out
}

/// Species names, times and states of a trajectory CSV.
pub type TrajectoryColumns = (Vec<String>, Vec<f64>, Vec<Vec<f64>>);

/// Parse a trajectory CSV back into its columns, skipping comment lines.
pub fn read_trajectory_csv(text: &str) -> Result<TrajectoryColumns> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty CSV"))?;
    let names: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|h| h.strip_prefix("x_").unwrap_or(h).to_string())
        .collect();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (k, line) in lines {
        let vals = parse_numbers(k + 1, line)?;
        if vals.len() != names.len() + 1 {
            return Err(Error::parse(k + 1, format!("expected {} columns", names.len() + 1)));
        }
        times.push(vals[0]);
        states.push(vals[1..].to_vec());
    }
    Ok((names, times, states))
}

/// Numbers separated by commas and/or whitespace.
pub fn parse_numbers(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad number `{s}`")))
        })
        .collect()
}
