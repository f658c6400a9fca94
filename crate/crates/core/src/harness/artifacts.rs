//! CSV and JSON run artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! same run always produces the same bytes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{FaultRecord, Metrics, RunResult, SignalMetrics, SweepTable};
use crate::controllers::ControllerKind;

pub const RUN_COLUMNS: [&str; 7] = [
    "t",
    "omega_sm1",
    "v_sm1",
    "omega_sm2",
    "v_sm2",
    "u_sec",
    "t_sec",
];
pub const INTERNAL_COLUMNS: [&str; 8] = [
    "belbic_v1",
    "belbic_w1",
    "belbic_v2",
    "belbic_w2",
    "si_1",
    "si_2",
    "es_1",
    "es_2",
];

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// One row per tick. Internal columns are present when the run logged them
/// and are blank on rows that were not sampled.
pub fn write_run_csv<W: Write>(out: W, result: &RunResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = RUN_COLUMNS.to_vec();
    if result.internals.is_some() {
        header.extend(INTERNAL_COLUMNS);
    }
    w.write_record(&header)?;

    let tr = &result.trace;
    let mut next_internal = 0;
    for k in 0..tr.len() {
        let mut row = vec![
            fmt(tr.t[k]),
            fmt(tr.omega[0][k]),
            fmt(tr.v[0][k]),
            fmt(tr.omega[1][k]),
            fmt(tr.v[1][k]),
            fmt(tr.u_sec[k]),
            fmt(tr.t_sec[k]),
        ];
        if let Some(log) = &result.internals {
            if log.rows.get(next_internal) == Some(&k) {
                let s = &log.samples[next_internal];
                next_internal += 1;
                row.extend(
                    [
                        s.v[0], s.w[0], s.v[1], s.w[1], s.si[0], s.si[1], s.es[0], s.es[1],
                    ]
                    .map(fmt),
                );
            } else {
                row.extend(std::iter::repeat_n(String::new(), INTERNAL_COLUMNS.len()));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub kind: ControllerKind,
    pub config_hash: String,
    pub samples: usize,
    pub completed: bool,
    pub metrics: Option<Metrics>,
    pub faults: Vec<FaultRecord>,
}

impl RunSummary {
    pub fn new(name: &str, config_hash: &str, result: &RunResult) -> Self {
        Self {
            name: name.to_string(),
            kind: result.controller,
            config_hash: config_hash.to_string(),
            samples: result.trace.len(),
            completed: result.completed,
            metrics: result.metrics.clone(),
            faults: result.faults.clone(),
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")
}

const METRIC_COLUMNS: [&str; 10] = [
    "mse_omega_sm1",
    "mse_v_sm1",
    "mse_omega_sm2",
    "mse_v_sm2",
    "settling_omega_sm1",
    "settling_v_sm1",
    "overshoot_omega_sm1",
    "overshoot_v_sm1",
    "mean_abs_command",
    "fault",
];

fn metric_fields(metrics: Option<&Metrics>, fault: Option<&str>) -> Vec<String> {
    let Some(m) = metrics else {
        let mut blank = vec![String::new(); METRIC_COLUMNS.len() - 1];
        blank.push(fault.unwrap_or("no metrics").to_string());
        return blank;
    };
    let mse = |s: &SignalMetrics| fmt(s.mse);
    vec![
        mse(&m.omega_sm1),
        mse(&m.v_sm1),
        mse(&m.omega_sm2),
        mse(&m.v_sm2),
        opt(m.omega_sm1.settling_time),
        opt(m.v_sm1.settling_time),
        fmt(m.omega_sm1.peak_overshoot),
        fmt(m.v_sm1.peak_overshoot),
        fmt(m.mean_abs_command),
        fault.unwrap_or("").to_string(),
    ]
}

pub fn write_sweep_csv<W: Write>(out: W, table: &SweepTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "param",
        "target",
        "multiplier",
        "value",
        "controller",
        "kind",
    ];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header)?;
    let target = match table.target {
        super::SweepTarget::Sm1 => "sm1",
        super::SweepTarget::Both => "both",
    };
    for c in &table.cells {
        let mut row = vec![
            table.param.name().to_string(),
            target.to_string(),
            fmt(c.multiplier),
            fmt(c.value),
            c.controller.clone(),
            c.kind.to_string(),
        ];
        row.extend(metric_fields(c.metrics.as_ref(), c.fault.as_deref()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the controller comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub name: String,
    pub kind: ControllerKind,
    pub metrics: Option<Metrics>,
    pub fault: Option<String>,
    /// 1-based rank by SM1 frequency MSE (faulted rows rank last).
    pub rank_frequency: usize,
    pub rank_voltage: usize,
}

/// Builds the ranked comparison rows, keeping the input order.
pub fn rank_rows(
    rows: Vec<(String, ControllerKind, Option<Metrics>, Option<String>)>,
) -> Vec<CompareRow> {
    let key = |m: &Option<Metrics>, f: fn(&Metrics) -> f64| m.as_ref().map_or(f64::INFINITY, f);
    let ranks = |f: fn(&Metrics) -> f64| {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| {
            key(&rows[a].2, f)
                .total_cmp(&key(&rows[b].2, f))
                .then(a.cmp(&b))
        });
        let mut rank = vec![0; rows.len()];
        for (r, i) in order.into_iter().enumerate() {
            rank[i] = r + 1;
        }
        rank
    };
    let rf = ranks(|m| m.omega_sm1.mse);
    let rv = ranks(|m| m.v_sm1.mse);
    rows.into_iter()
        .enumerate()
        .map(|(i, (name, kind, metrics, fault))| CompareRow {
            name,
            kind,
            metrics,
            fault,
            rank_frequency: rf[i],
            rank_voltage: rv[i],
        })
        .collect()
}

pub fn write_compare_csv<W: Write>(out: W, rows: &[CompareRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["controller", "kind", "rank_frequency", "rank_voltage"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![
            r.name.clone(),
            r.kind.to_string(),
            r.rank_frequency.to_string(),
            r.rank_voltage.to_string(),
        ];
        row.extend(metric_fields(r.metrics.as_ref(), r.fault.as_deref()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
