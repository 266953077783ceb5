//! CSV time series: trajectories, events, schedules and extremals.
//!
//! Floats are written as `{:.16e}`, which round-trips every `f64`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::adjoint::ExtremalRecord;
use crate::dynamics::{LocationEvent, State7, Trajectory};
use crate::lp::BasisId;
use crate::oxygen::OxygenRecord;
use crate::schedule::{ControlSchedule, ScheduleError};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

const TRAJECTORY_HEADER: [&str; 13] =
    ["time", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "u1", "u2", "mu", "ve", "basis_id"];

/// One row per sample; `u1, u2` hold the control on the interval starting
/// at that sample (the last row repeats the final interval).
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<(), CsvError> {
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for k in 0..traj.len() {
        let u = traj.controls.get(k).or(traj.controls.last()).copied().unwrap_or([0.0; 2]);
        let mut row: Vec<String> = vec![fmt(traj.times[k])];
        row.extend(traj.states[k].iter().map(|v| fmt(*v)));
        row.extend([fmt(u[0]), fmt(u[1]), fmt(traj.mu[k]), fmt(traj.v_e[k])]);
        row.push(traj.basis[k].as_ref().map_or(String::new(), |b| b.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn number(row: usize, field: &str, s: &str) -> Result<f64, CsvError> {
    s.trim().parse().map_err(|_| CsvError::Format { row, message: format!("{field} = {s:?} is not a number") })
}

/// Reads a trajectory. Without `u1, u2` columns the controls are inferred
/// from the increments of `x1`, `x2`. Basis changes between consecutive rows
/// are turned into location events at the later sample.
pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory, CsvError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["time", "x1", "x2", "x3", "x4", "x5", "x6", "x7"];
    let idx: Vec<usize> = required
        .iter()
        .map(|n| col(n).ok_or_else(|| CsvError::Format { row: 0, message: format!("missing column {n}") }))
        .collect::<Result<_, _>>()?;
    let (cu1, cu2, cmu, cve, cb) = (col("u1"), col("u2"), col("mu"), col("ve"), col("basis_id"));
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        mu: Vec::new(),
        v_e: Vec::new(),
        basis: Vec::new(),
        controls: Vec::new(),
        events: Vec::new(),
    };
    let mut given = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |c: usize, name: &str| number(row, name, rec.get(c).unwrap_or(""));
        traj.times.push(get(idx[0], "time")?);
        let mut x = State7::zeros();
        for j in 0..7 {
            x[j] = get(idx[j + 1], required[j + 1])?;
        }
        traj.states.push(x);
        traj.mu.push(cmu.map(|c| get(c, "mu")).transpose()?.unwrap_or(f64::NAN));
        traj.v_e.push(cve.map(|c| get(c, "ve")).transpose()?.unwrap_or(f64::NAN));
        let basis = match cb.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(
                s.parse::<BasisId>().map_err(|_| CsvError::Format { row, message: format!("bad basis_id {s:?}") })?,
            ),
            None => None,
        };
        traj.basis.push(basis);
        if let (Some(a), Some(b)) = (cu1, cu2) {
            given.push([get(a, "u1")?, get(b, "u2")?]);
        }
    }
    let n = traj.times.len();
    if n < 2 {
        return Err(CsvError::Format { row: n, message: "need at least two samples".into() });
    }
    if traj.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CsvError::Format { row: 0, message: "time column must be strictly increasing".into() });
    }
    traj.controls = if given.len() == n {
        given[..n - 1].to_vec()
    } else {
        (0..n - 1)
            .map(|k| {
                let dt = traj.times[k + 1] - traj.times[k];
                let d = traj.states[k + 1] - traj.states[k];
                [(d[0] / dt).clamp(0.0, 1.0), (d[1] / dt).clamp(0.0, 1.0)]
            })
            .collect()
    };
    for k in 0..n - 1 {
        if let (Some(a), Some(b)) = (&traj.basis[k], &traj.basis[k + 1]) {
            if a != b {
                traj.events.push(LocationEvent { time: traj.times[k + 1], from: a.clone(), to: b.clone() });
            }
        }
    }
    Ok(traj)
}

pub fn write_events<W: Write>(w: W, events: &[LocationEvent]) -> Result<(), CsvError> {
    let mut out = writer(w);
    out.write_record(["time", "from_basis", "to_basis"])?;
    for e in events {
        out.write_record([fmt(e.time), e.from.to_string(), e.to.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_schedule<W: Write>(w: W, s: &ControlSchedule) -> Result<(), CsvError> {
    let mut out = writer(w);
    let mut header = vec!["t_start", "t_end", "u1", "u2"];
    if s.u3().is_some() {
        header.push("u3");
    }
    out.write_record(&header)?;
    for k in 0..s.intervals() {
        let mut row = vec![fmt(s.knots()[k]), fmt(s.knots()[k + 1]), fmt(s.u1()[k]), fmt(s.u2()[k])];
        if let Some(u3) = s.u3() {
            row.push(fmt(u3[k]));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_schedule<R: Read>(r: R) -> Result<ControlSchedule, CsvError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let has_u3 = rd.headers()?.iter().any(|h| h == "u3");
    let (mut knots, mut u1, mut u2, mut u3) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |c: usize, name: &str| number(row, name, rec.get(c).unwrap_or(""));
        let (t0, t1) = (get(0, "t_start")?, get(1, "t_end")?);
        match knots.last() {
            None => knots.push(t0),
            Some(&prev) if prev != t0 => {
                return Err(CsvError::Format { row, message: format!("t_start = {t0} does not continue from {prev}") })
            }
            _ => {}
        }
        knots.push(t1);
        u1.push(get(2, "u1")?);
        u2.push(get(3, "u2")?);
        if has_u3 {
            u3.push(get(4, "u3")?);
        }
    }
    Ok(ControlSchedule::new(knots, u1, u2, has_u3.then_some(u3))?)
}

pub fn write_extremal<W: Write>(w: W, rec: &ExtremalRecord) -> Result<(), CsvError> {
    let mut out = writer(w);
    out.write_record(["time", "l1", "l2", "l3", "l4", "l5", "l6", "l7", "phi1", "phi2", "H"])?;
    for (k, t) in rec.trajectory.times.iter().enumerate() {
        let mut row = vec![fmt(*t)];
        row.extend(rec.covectors[k].iter().map(|v| fmt(*v)));
        row.extend([fmt(rec.phi1[k]), fmt(rec.phi2[k]), fmt(rec.hamiltonian[k])]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_oxygen<W: Write>(w: W, rec: &OxygenRecord) -> Result<(), CsvError> {
    let mut out = writer(w);
    out.write_record([
        "time", "x3", "x4", "x5", "x6", "x7", "u1", "u2", "u3", "l3", "l4", "l5", "l6", "l7", "dH_du3", "H",
    ])?;
    let tr = &rec.trajectory;
    for (k, t) in tr.times.iter().enumerate() {
        let u = tr.controls.get(k).or(tr.controls.last()).copied().unwrap_or([0.0; 3]);
        let mut row = vec![fmt(*t)];
        row.extend(tr.states[k].iter().map(|v| fmt(*v)));
        row.extend(u.iter().map(|v| fmt(*v)));
        row.extend(rec.covectors[k].iter().map(|v| fmt(*v)));
        row.extend([fmt(rec.dh_du3[k]), fmt(rec.hamiltonian[k])]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
