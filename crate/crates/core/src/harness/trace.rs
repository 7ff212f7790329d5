//! CSV files: closed-loop traces, plant trajectories and estimated inputs.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so reading a file reproduces the in-memory run exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::controller::TraceRow;
use crate::error::{Result, UtcError};
use crate::estimator::RecordedTrajectory;

pub const TRACE_HEADER: &str =
    "k,t,yr_ref,yr_real,u_cmdamp,u_kright,u_kleft,u_alpha,ypred,pu_trace,k_gain_norm";

/// Control columns of the trace; shorter control vectors fill them from the left.
pub const CONTROL_COLUMNS: usize = 4;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace_string(rows: &[TraceRow]) -> Result<String> {
    let mut out = String::with_capacity(rows.len() * 160);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        if r.u.len() > CONTROL_COLUMNS {
            return Err(UtcError::Contract(format!(
                "trace holds at most {CONTROL_COLUMNS} controls, got {}",
                r.u.len()
            )));
        }
        let _ = write!(out, "{},{},{},{}", r.k, r.t, r.yr_ref, r.yr_real);
        for j in 0..CONTROL_COLUMNS {
            out.push(',');
            if j < r.u.len() {
                let _ = write!(out, "{}", r.u[j]);
            }
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            opt(r.ypred),
            opt(r.pu_trace),
            opt(r.k_gain_norm)
        );
    }
    Ok(out)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let text = write_trace_string(rows)?;
    std::fs::write(path, text).map_err(|e| UtcError::io(path, e))
}

fn field(line: usize, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| UtcError::Parse {
        line,
        msg: format!("bad number `{s}`"),
    })
}

fn opt_field(line: usize, s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        field(line, s).map(Some)
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => {
            return Err(UtcError::Parse {
                line: 1,
                msg: format!("expected header `{TRACE_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(UtcError::Parse {
                line: n,
                msg: format!("expected 11 columns, got {}", cols.len()),
            });
        }
        let k = cols[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| UtcError::Parse {
                line: n,
                msg: format!("bad step index `{}`", cols[0]),
            })?;
        let mut u = Vec::with_capacity(CONTROL_COLUMNS);
        for c in &cols[4..8] {
            match opt_field(n, c)? {
                Some(v) => u.push(v),
                None => break,
            }
        }
        rows.push(TraceRow {
            k,
            t: field(n, cols[1])?,
            yr_ref: field(n, cols[2])?,
            yr_real: field(n, cols[3])?,
            u: DVector::from_vec(u),
            ypred: opt_field(n, cols[8])?,
            pu_trace: opt_field(n, cols[9])?,
            k_gain_norm: opt_field(n, cols[10])?,
        });
    }
    Ok(rows)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| UtcError::io(path, e))?;
    parse_trace(&text)
}

/// Header `k,t,y0..,x0..` for `l` outputs and `n` states.
fn trajectory_header(l: usize, n: usize) -> String {
    let mut cols = vec!["k".to_string(), "t".to_string()];
    cols.extend((0..l).map(|i| format!("y{i}")));
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.join(",")
}

pub fn write_trajectory_string(traj: &RecordedTrajectory) -> String {
    let l = traj.outputs.first().map_or(0, |y| y.len());
    let n = traj.states.first().map_or(0, |x| x.len());
    let mut out = trajectory_header(l, n);
    out.push('\n');
    for k in 0..traj.len() {
        let _ = write!(out, "{},{}", k, traj.times[k]);
        for v in traj.outputs[k].iter().chain(traj.states[k].iter()) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &RecordedTrajectory) -> Result<()> {
    std::fs::write(path, write_trajectory_string(traj)).map_err(|e| UtcError::io(path, e))
}

/// Parse a trajectory file; the sample period is taken from the first two times.
pub fn parse_trajectory(text: &str) -> Result<RecordedTrajectory> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(UtcError::Parse {
            line: 1,
            msg: "empty trajectory file".into(),
        });
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let l = cols.iter().filter(|c| c.starts_with('y')).count();
    let n = cols.iter().filter(|c| c.starts_with('x')).count();
    if cols.len() < 3 || cols[..2] != ["k", "t"] || header.trim() != trajectory_header(l, n) {
        return Err(UtcError::Parse {
            line: 1,
            msg: "expected header `k,t,y0,...,x0,...`".into(),
        });
    }
    let mut times = Vec::new();
    let mut outputs = Vec::new();
    let mut states = Vec::new();
    for (i, line) in lines {
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != 2 + l + n {
            return Err(UtcError::Parse {
                line: no,
                msg: format!("expected {} columns, got {}", 2 + l + n, vals.len()),
            });
        }
        let nums = vals[1..]
            .iter()
            .map(|s| field(no, s))
            .collect::<Result<Vec<_>>>()?;
        times.push(nums[0]);
        outputs.push(DVector::from_column_slice(&nums[1..1 + l]));
        states.push(DVector::from_column_slice(&nums[1 + l..]));
    }
    if times.len() < 2 {
        return Err(UtcError::Parse {
            line: 2,
            msg: "trajectory needs at least two samples".into(),
        });
    }
    let dt = times[1] - times[0];
    RecordedTrajectory::new(times, outputs, states, dt)
}

pub fn read_trajectory(path: &Path) -> Result<RecordedTrajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| UtcError::io(path, e))?;
    parse_trajectory(&text)
}

/// Estimated inputs, one row per sample: `k,t,u0,...`.
pub fn write_estimates_string(estimates: &[DVector<f64>], dt: f64) -> String {
    let m = estimates.first().map_or(0, |u| u.len());
    let mut cols = vec!["k".to_string(), "t".to_string()];
    cols.extend((0..m).map(|j| format!("u{j}")));
    let mut out = cols.join(",");
    out.push('\n');
    for (k, u) in estimates.iter().enumerate() {
        let _ = write!(out, "{},{}", k, k as f64 * dt);
        for v in u.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
