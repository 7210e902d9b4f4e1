//! Trajectory CSV input (`traj_id,t,x1..xn[,v1..vn]`) and output.

use std::collections::HashMap;

use certds::dynsim::Trajectory;
use certds::learner::{Demonstration, Sample, TrajectoryDataset};

type Rows = Vec<(f64, Vec<f64>, Option<Vec<f64>>)>;

/// Parses trajectory CSV text. Rows are grouped by `traj_id` in order of first
/// appearance and must have strictly increasing `t` within a trajectory.
/// Missing velocities are estimated by central differences (one-sided at the
/// ends). The attractor defaults to the mean of the final positions.
pub fn parse_trajectories(text: &str, attractor: Option<&[f64]>) -> Result<TrajectoryDataset, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| format!("unreadable header: {e}"))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "traj_id" || names[1] != "t" {
        return Err("header must start with traj_id,t,x1".into());
    }
    let n = names[2..].iter().take_while(|c| c.starts_with('x')).count();
    let has_v = match names.len() - 2 - n {
        0 => false,
        k if k == n => true,
        k => return Err(format!("expected 0 or {n} velocity columns, found {k}")),
    };
    if n == 0 {
        return Err("no position columns".into());
    }
    for k in 0..n {
        if names[2 + k] != format!("x{}", k + 1) {
            return Err(format!("column {} must be x{}", 3 + k, k + 1));
        }
        if has_v && names[2 + n + k] != format!("v{}", k + 1) {
            return Err(format!("column {} must be v{}", 3 + n + k, k + 1));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Rows> = HashMap::new();
    for (line, rec) in reader.records().enumerate() {
        let row = line + 2;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        if rec.len() != names.len() {
            return Err(format!(
                "row {row}: expected {} fields, found {}",
                names.len(),
                rec.len()
            ));
        }
        let num = |i: usize| -> Result<f64, String> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| format!("row {row}: `{}` is not a number", &rec[i]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("row {row}: non-finite value"))
            }
        };
        let t = num(1)?;
        let x = (0..n).map(|k| num(2 + k)).collect::<Result<Vec<_>, _>>()?;
        let v = if has_v {
            Some((0..n).map(|k| num(2 + n + k)).collect::<Result<Vec<_>, _>>()?)
        } else {
            None
        };
        let id = rec[0].to_string();
        let group = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        if let Some((prev, _, _)) = group.last() {
            if t <= *prev {
                return Err(format!("row {row}: time must increase within trajectory `{id}`"));
            }
        }
        group.push((t, x, v));
    }
    if order.is_empty() {
        return Err("no data rows".into());
    }

    let mut demos = Vec::with_capacity(order.len());
    for id in &order {
        let rows = &groups[id];
        if !has_v && rows.len() < 2 {
            return Err(format!("trajectory `{id}` needs two samples to estimate velocities"));
        }
        let samples = (0..rows.len())
            .map(|i| {
                let (t, x, v) = &rows[i];
                let v = match v {
                    Some(v) => v.clone(),
                    None => {
                        let (a, b) = (i.saturating_sub(1), (i + 1).min(rows.len() - 1));
                        let dt = rows[b].0 - rows[a].0;
                        (0..n).map(|k| (rows[b].1[k] - rows[a].1[k]) / dt).collect()
                    }
                };
                Sample { t: *t, x: x.clone(), v }
            })
            .collect();
        demos.push(Demonstration { samples });
    }
    let attractor = match attractor {
        Some(a) => a.to_vec(),
        None => {
            let mut mean = vec![0.0; n];
            for d in &demos {
                let last = &d.samples[d.samples.len() - 1].x;
                for (m, x) in mean.iter_mut().zip(last) {
                    *m += x / demos.len() as f64;
                }
            }
            mean
        }
    };
    TrajectoryDataset::new(n, demos, attractor).map_err(|e| e.to_string())
}

/// Writes a dataset in the input CSV format, velocities included.
pub fn write_dataset(ds: &TrajectoryDataset) -> String {
    let n = ds.dim();
    let mut out = String::from("traj_id,t");
    for k in 1..=n {
        out.push_str(&format!(",x{k}"));
    }
    for k in 1..=n {
        out.push_str(&format!(",v{k}"));
    }
    out.push('\n');
    for (i, d) in ds.demonstrations().iter().enumerate() {
        for s in &d.samples {
            out.push_str(&format!("{i},{}", s.t));
            for v in s.x.iter().chain(&s.v) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    out
}

/// `t,x1..xn` rows of a simulated trajectory.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 1..=n {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        out.push_str(&t.to_string());
        for v in x {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
