//! Heuristic gain search: seeded random sampling of a bounded box followed
//! by coordinate descent from the best point.
//!
//! Parameters live in a normalised unit cube; a bound with `lo > 0` is mapped
//! logarithmically, otherwise linearly. The first candidate is always the
//! starting configuration. The sequence of candidates does not depend on the
//! budget, so a larger budget only extends it and the best score never gets
//! worse.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run_scenario, ControllerSpec, HarnessError, Metrics, Scenario};
use crate::controllers::{BelbicChannelConfig, ControllerKind, PidGains};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("controller kind {0} has no tunable gains")]
    NotTunable(ControllerKind),
    #[error("unknown tuning parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid bound for {name}: [{lo}, {hi}]")]
    InvalidBound { name: String, lo: f64, hi: f64 },
    #[error("all {0} candidates faulted")]
    AllFaulted(usize),
    #[error("budget must be >= 1")]
    EmptyBudget,
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn is_log(&self) -> bool {
        self.lo > 0.0
    }

    fn to_value(self, z: f64) -> f64 {
        if self.is_log() {
            self.lo * (self.hi / self.lo).powf(z)
        } else {
            self.lo + z * (self.hi - self.lo)
        }
    }

    fn to_unit(self, x: f64) -> f64 {
        let x = x.clamp(self.lo, self.hi);
        let z = if self.is_log() {
            (x / self.lo).ln() / (self.hi / self.lo).ln()
        } else {
            (x - self.lo) / (self.hi - self.lo)
        };
        z.clamp(0.0, 1.0)
    }
}

/// Weights of the tuning objective
/// `frequency * MSE(omega_sm1) + voltage * MSE(v_sm1) + effort * mean(|u_sec| + |t_sec|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub frequency: f64,
    pub voltage: f64,
    pub effort: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        // equal MSE weights, scaled so a 1e-3 pu RMS error costs as much as
        // a unit mean command
        Self {
            frequency: 1e6,
            voltage: 1e6,
            effort: 0.01,
        }
    }
}

pub fn objective(metrics: &Metrics, weights: &ObjectiveWeights) -> f64 {
    weights.frequency * metrics.omega_sm1.mse
        + weights.voltage * metrics.v_sm1.mse
        + weights.effort * metrics.mean_abs_command
}

/// Runs the scenario and scores it. `Err` carries the fault description.
pub fn evaluate(scenario: &Scenario, weights: &ObjectiveWeights) -> Result<(f64, Metrics), String> {
    let r = run_scenario(scenario).map_err(|e| e.to_string())?;
    if let Some(f) = r.simulation_fault() {
        return Err(format!("t={}: {}", f.time, f.message));
    }
    let m = r.metrics.ok_or_else(|| "empty trace".to_string())?;
    let score = objective(&m, weights);
    if score.is_finite() {
        Ok((score, m))
    } else {
        Err("non-finite score".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSettings {
    /// Maximum number of scenario evaluations.
    pub budget: usize,
    /// Random candidates drawn after the starting point.
    pub random_samples: usize,
    pub seed: u64,
    /// Initial coordinate step in the unit cube.
    pub initial_step: f64,
    /// Descent stops once the step falls below this.
    pub min_step: f64,
    pub weights: ObjectiveWeights,
    /// Overrides of the default bounds, keyed like `frequency.k_v`.
    pub bounds: BTreeMap<String, Bound>,
}

impl Default for TuneSettings {
    fn default() -> Self {
        Self {
            budget: 200,
            random_samples: 40,
            seed: 0,
            initial_step: 0.1,
            min_step: 1.0 / 256.0,
            weights: ObjectiveWeights::default(),
            bounds: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub spec: ControllerSpec,
    pub params: BTreeMap<String, f64>,
    pub score: f64,
    pub metrics: Metrics,
    /// Best score after each evaluation.
    pub score_trace: Vec<f64>,
    pub evaluations: usize,
    pub faulted: usize,
    pub seed: u64,
}

const CHANNELS: [&str; 2] = ["voltage", "frequency"];

fn default_bound(kind: ControllerKind, param: &str) -> Bound {
    let name = param.rsplit('.').next().unwrap_or(param);
    match (kind, name) {
        // proportional, integral and derivative gains share one box across kinds
        (_, "kd" | "k3" | "k7") => Bound::new(1e-6, 10.0),
        (ControllerKind::Pid, _) => Bound::new(1e-3, 1e4),
        // k4 >= 1 latches the output at saturation through the |u_prev| feedback
        (_, "k4") => Bound::new(1e-5, 0.9),
        (_, "k_v") => Bound::new(1e-2, 1e6),
        // the orbitofrontal update oscillates once k_w * SI^2 > 2 per tick
        (_, "k_w") => Bound::new(1e-4, 1.0),
        _ => Bound::new(1e-3, 1e4),
    }
}

/// Names and current values of the tunable gains of a controller.
pub fn tunable_params(spec: &ControllerSpec) -> Result<Vec<(String, f64)>, TuneError> {
    let mut out = Vec::new();
    match spec {
        ControllerSpec::Pid(c) => {
            for (label, g) in CHANNELS.iter().zip([c.voltage, c.frequency]) {
                for (n, v) in PidGains::PARAM_NAMES.iter().zip(g.to_vec()) {
                    out.push((format!("{label}.{n}"), v));
                }
            }
        }
        ControllerSpec::Belbic(c) => {
            for (label, g) in CHANNELS.iter().zip([c.voltage, c.frequency]) {
                for (n, v) in BelbicChannelConfig::PARAM_NAMES.iter().zip(g.to_vec()) {
                    out.push((format!("{label}.{n}"), v));
                }
            }
        }
        ControllerSpec::None => {}
        ControllerSpec::Nn { .. } => return Err(TuneError::NotTunable(ControllerKind::Nn)),
    }
    Ok(out)
}

fn with_params(spec: &ControllerSpec, p: &[f64]) -> ControllerSpec {
    match spec {
        ControllerSpec::Pid(c) => {
            let mut c = *c;
            c.voltage = PidGains::from_slice(&p[0..3]);
            c.frequency = PidGains::from_slice(&p[3..6]);
            ControllerSpec::Pid(c)
        }
        ControllerSpec::Belbic(c) => {
            let mut c = *c;
            c.voltage = BelbicChannelConfig::from_slice(&p[0..9]);
            c.frequency = BelbicChannelConfig::from_slice(&p[9..18]);
            ControllerSpec::Belbic(c)
        }
        other => other.clone(),
    }
}

struct Search<'a> {
    scenario: &'a Scenario,
    spec: &'a ControllerSpec,
    bounds: Vec<Bound>,
    weights: ObjectiveWeights,
    budget: usize,
    trace: Vec<f64>,
    faulted: usize,
    best: Option<Best>,
}

/// A candidate as unit-cube coordinates plus the gains it stands for.
#[derive(Clone)]
struct Candidate {
    z: Vec<f64>,
    values: Vec<f64>,
}

struct Best {
    score: f64,
    at: Candidate,
    metrics: Metrics,
}

impl Search<'_> {
    fn remaining(&self) -> usize {
        self.budget - self.trace.len()
    }

    fn candidate(&self, z: Vec<f64>) -> Candidate {
        let values = z
            .iter()
            .zip(&self.bounds)
            .map(|(z, b)| b.to_value(*z))
            .collect();
        Candidate { z, values }
    }

    /// Evaluates a batch in parallel (truncated to the budget); returns
    /// whether the best point improved.
    fn run_batch(&mut self, mut batch: Vec<Candidate>) -> bool {
        batch.truncate(self.remaining());
        let results: Vec<_> = batch
            .par_iter()
            .map(|c| {
                let mut s = self.scenario.clone();
                s.controller = with_params(self.spec, &c.values);
                evaluate(&s, &self.weights)
            })
            .collect();
        let mut improved = false;
        for (at, r) in batch.into_iter().zip(results) {
            match r {
                Ok((score, metrics)) => {
                    if self.best.as_ref().is_none_or(|b| score < b.score) {
                        self.best = Some(Best { score, at, metrics });
                        improved = true;
                    }
                }
                Err(_) => self.faulted += 1,
            }
            let best = self.best.as_ref().map_or(f64::INFINITY, |b| b.score);
            self.trace.push(best);
        }
        improved
    }
}

/// Tunes the gains of `scenario.controller` on `scenario`.
pub fn tune_gains(scenario: &Scenario, settings: &TuneSettings) -> Result<TuneOutcome, TuneError> {
    if settings.budget == 0 {
        return Err(TuneError::EmptyBudget);
    }
    scenario.validate()?;
    let spec = &scenario.controller;
    let kind = spec.kind();
    let start = tunable_params(spec)?;
    let names: Vec<String> = start.iter().map(|(n, _)| n.clone()).collect();
    if let Some(unknown) = settings.bounds.keys().find(|k| !names.contains(k)) {
        return Err(TuneError::UnknownParam(unknown.clone()));
    }
    let bounds: Vec<Bound> = names
        .iter()
        .map(|n| {
            let b = settings
                .bounds
                .get(n)
                .copied()
                .unwrap_or_else(|| default_bound(kind, n));
            let ok = b.lo.is_finite() && b.hi.is_finite() && b.lo >= 0.0 && b.hi > b.lo;
            if ok {
                Ok(b)
            } else {
                Err(TuneError::InvalidBound {
                    name: n.clone(),
                    lo: b.lo,
                    hi: b.hi,
                })
            }
        })
        .collect::<Result<_, _>>()?;

    let mut search = Search {
        scenario,
        spec,
        bounds,
        weights: settings.weights,
        budget: settings.budget,
        trace: Vec::new(),
        faulted: 0,
        best: None,
    };
    let dim = names.len();
    let z0: Vec<f64> = start
        .iter()
        .zip(&search.bounds)
        .map(|((_, v), b)| b.to_unit(*v))
        .collect();

    // the start is evaluated as given, not through the unit-cube round trip
    let values = start.iter().map(|(_, v)| *v).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut batch = vec![Candidate { z: z0, values }];
    if dim > 0 {
        for _ in 0..settings.random_samples {
            batch.push(search.candidate((0..dim).map(|_| rng.gen::<f64>()).collect()));
        }
    }
    search.run_batch(batch);

    let mut step = settings.initial_step;
    while dim > 0 && search.remaining() > 0 && step >= settings.min_step && search.best.is_some() {
        let mut improved_any = false;
        for i in 0..dim {
            if search.remaining() == 0 {
                break;
            }
            let centre = search
                .best
                .as_ref()
                .map(|b| b.at.z.clone())
                .unwrap_or_default();
            let mut probes = Vec::with_capacity(2);
            for dir in [1.0, -1.0] {
                let mut z = centre.clone();
                z[i] = (z[i] + dir * step).clamp(0.0, 1.0);
                if z[i] != centre[i] {
                    probes.push(search.candidate(z));
                }
            }
            if !probes.is_empty() && search.run_batch(probes) {
                improved_any = true;
            }
        }
        if !improved_any {
            step *= 0.5;
        }
    }

    let evaluations = search.trace.len();
    let best = search
        .best
        .take()
        .ok_or(TuneError::AllFaulted(evaluations))?;
    let values = best.at.values;
    Ok(TuneOutcome {
        spec: with_params(spec, &values),
        params: names.into_iter().zip(values).collect(),
        score: best.score,
        metrics: best.metrics,
        score_trace: search.trace,
        evaluations,
        faulted: search.faulted,
        seed: settings.seed,
    })
}
