use serde::{Deserialize, Serialize};

use super::{HarnessError, RunResult, Trace};
use crate::controllers::References;

/// Which samples the mean square error is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MseWindow {
    #[default]
    Full,
    /// Only samples at or after the last scheduled event.
    PostEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default)]
    pub mse_window: MseWindow,
    /// Settling band as a fraction of the reference.
    #[serde(default = "default_band")]
    pub settle_band: f64,
}

fn default_band() -> f64 {
    0.005
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            mse_window: MseWindow::Full,
            settle_band: default_band(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMetrics {
    pub mse: f64,
    /// `None` when the signal never stays inside the band until the horizon.
    pub settling_time: Option<f64>,
    /// Largest `|x - x_ref|` at or after the last event.
    pub peak_overshoot: f64,
    #[serde(skip)]
    pub abs_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub omega_sm1: SignalMetrics,
    pub v_sm1: SignalMetrics,
    pub omega_sm2: SignalMetrics,
    pub v_sm2: SignalMetrics,
    /// Mean of `|u_sec| + |t_sec|` over the horizon.
    pub mean_abs_command: f64,
}

pub fn abs_error(x: &[f64], reference: f64) -> Vec<f64> {
    x.iter().map(|v| (v - reference).abs()).collect()
}

pub fn mean_square_error(x: &[f64], reference: f64) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    Some(
        x.iter()
            .map(|v| (v - reference) * (v - reference))
            .sum::<f64>()
            / x.len() as f64,
    )
}

/// First time at or after `from` from which `|x - reference| <= band` holds
/// for every remaining sample.
pub fn settling_time(t: &[f64], x: &[f64], reference: f64, band: f64, from: f64) -> Option<f64> {
    match x.iter().rposition(|v| (v - reference).abs() > band) {
        None => Some(from),
        Some(i) if i + 1 < t.len() => Some(t[i + 1].max(from)),
        Some(_) => None,
    }
}

pub fn signal_metrics(
    t: &[f64],
    x: &[f64],
    reference: f64,
    config: &MetricsConfig,
    event_time: f64,
) -> Result<SignalMetrics, HarnessError> {
    if x.is_empty() {
        return Err(HarnessError::EmptySeries);
    }
    let start = match config.mse_window {
        MseWindow::Full => 0,
        MseWindow::PostEvent => t.partition_point(|&ti| ti < event_time),
    };
    let abs_error = abs_error(x, reference);
    let post = t.partition_point(|&ti| ti < event_time);
    Ok(SignalMetrics {
        mse: mean_square_error(&x[start..], reference).ok_or(HarnessError::EmptySeries)?,
        settling_time: settling_time(
            t,
            x,
            reference,
            config.settle_band * reference.abs(),
            event_time,
        ),
        peak_overshoot: abs_error[post..].iter().copied().fold(0.0, f64::max),
        abs_error,
    })
}

/// Metrics of a trace against the references; `event_time` is the time of
/// the last scheduled event (0 without events).
pub fn compute_trace_metrics(
    trace: &Trace,
    refs: &References,
    config: &MetricsConfig,
    event_time: f64,
) -> Result<Metrics, HarnessError> {
    let m = |x: &[f64], r: f64| signal_metrics(&trace.t, x, r, config, event_time);
    let n = trace.t.len() as f64;
    Ok(Metrics {
        omega_sm1: m(&trace.omega[0], refs.omega_ref)?,
        v_sm1: m(&trace.v[0], refs.v_ref)?,
        omega_sm2: m(&trace.omega[1], refs.omega_ref)?,
        v_sm2: m(&trace.v[1], refs.v_ref)?,
        mean_abs_command: trace
            .u_sec
            .iter()
            .zip(&trace.t_sec)
            .map(|(u, t)| u.abs() + t.abs())
            .sum::<f64>()
            / n,
    })
}

pub fn compute_metrics(
    result: &RunResult,
    refs: &References,
    config: &MetricsConfig,
) -> Result<Metrics, HarnessError> {
    compute_trace_metrics(&result.trace, refs, config, result.last_event_time)
}
