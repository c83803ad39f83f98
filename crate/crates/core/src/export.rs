//! CSV writers for schedules, trajectories and vertex dumps.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::linalg::Vector;
use crate::safety::SafetyResult;
use crate::simulator::{SimulationReport, Trajectory};

fn indexed(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

fn push_vec(row: &mut Vec<String>, v: &Vector) {
    row.extend(v.iter().map(|x| x.to_string()));
}

fn blank(row: &mut Vec<String>, count: usize) {
    row.extend(std::iter::repeat_n(String::new(), count));
}

/// Relaxation schedule and nominal plan, one row per `k = 0..=N`.
pub fn write_schedule<W: Write>(out: W, result: &SafetyResult) -> Result<()> {
    let s = &result.schedule;
    let n = result.nominal_z[0].len();
    let m = result.nominal_v.first().map_or(0, |v| v.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["k", "alpha", "beta", "relaxed_px", "relaxed_pu"]
        .map(String::from)
        .to_vec();
    header.extend(indexed("z", n));
    header.extend(indexed("v", m));
    w.write_record(&header)?;
    for k in 0..=s.horizon() {
        let mut row = vec![k.to_string()];
        if k < s.horizon() {
            row.push(s.alpha[k].to_string());
            row.push(s.beta.as_ref().map_or(String::new(), |b| b[k].to_string()));
        } else {
            blank(&mut row, 2);
        }
        row.push(s.relaxed_px_at(k).to_string());
        row.push(
            s.relaxed_pu
                .as_ref()
                .and_then(|p| p.get(k))
                .map_or(String::new(), |p| p.to_string()),
        );
        push_vec(&mut row, &result.nominal_z[k]);
        match result.nominal_v.get(k) {
            Some(v) => push_vec(&mut row, v),
            None => blank(&mut row, m),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Closed-loop log, one row per step; the last row carries `x(T)` only.
pub fn write_trajectory<W: Write>(out: W, t: &Trajectory) -> Result<()> {
    let n = t.states[0].len();
    let m = t.inputs.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["k", "xi", "objective"].map(String::from).to_vec();
    header.extend(indexed("x", n));
    header.extend(indexed("z", n));
    header.extend(indexed("u", m));
    header.push("feasible_xi0".into());
    header.push("feasible_xi1".into());
    w.write_record(&header)?;
    for k in 0..=t.steps() {
        let mut row = vec![k.to_string()];
        if k < t.steps() {
            row.push((t.xi_flags[k] as u8).to_string());
            row.push(t.objectives[k].to_string());
        } else {
            blank(&mut row, 2);
        }
        push_vec(&mut row, &t.states[k]);
        push_vec(&mut row, &t.nominal_states[k]);
        if k < t.steps() {
            push_vec(&mut row, &t.inputs[k]);
            let [f0, f1] = t.branch_feasible[k];
            row.push((f0 as u8).to_string());
            row.push((f1 as u8).to_string());
        } else {
            blank(&mut row, m + 2);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step empirical rates against the required bound.
pub fn write_report<W: Write>(out: W, r: &SimulationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "rate", "bound", "sigma", "flagged", "prs_rate"])?;
    for k in 0..=r.steps {
        w.write_record([
            k.to_string(),
            r.rates[k].to_string(),
            r.bounds[k].to_string(),
            r.sigma[k].to_string(),
            (r.flagged.contains(&k) as u8).to_string(),
            r.prs_rates.get(k).map_or(String::new(), |p| p.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Vertex lists keyed by `k`, e.g. tube cross-sections.
pub fn write_vertices<W: Write>(out: W, sets: &[(usize, Vec<Vector>)]) -> Result<()> {
    let n = sets
        .iter()
        .find_map(|(_, v)| v.first().map(|p| p.len()))
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["k", "vertex"].map(String::from).to_vec();
    header.extend(indexed("e", n));
    w.write_record(&header)?;
    for (k, verts) in sets {
        for (i, v) in verts.iter().enumerate() {
            let mut row = vec![k.to_string(), i.to_string()];
            push_vec(&mut row, v);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let file = std::fs::File::create(path)?;
    f(std::io::BufWriter::new(file))
}
