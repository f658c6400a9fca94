//! Scenario execution, metrics, parameter sweeps and gain tuning.

pub mod artifacts;
mod metrics;
mod sweep;
mod tune;

pub use metrics::{
    abs_error, compute_metrics, compute_trace_metrics, mean_square_error, settling_time,
    signal_metrics, Metrics, MetricsConfig, MseWindow, SignalMetrics,
};
pub use sweep::{sensitivity_sweep, SweepCell, SweepTable, SweepTarget, SWEEP_PARAMS};
pub use tune::{
    evaluate, objective, tunable_params, tune_gains, Bound, ObjectiveWeights, TuneError,
    TuneOutcome, TuneSettings,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{
    BelbicConfig, BelbicSecondaryController, Controller, ControllerError, ControllerInternals,
    ControllerKind, NnConfig, NnController, NullController, PidConfig, PidController, References,
    SecondaryControl,
};
use crate::plant::{Event, EventKind, Plant, PlantError, PlantParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("plant initialisation failed: {0}")]
    Plant(#[from] PlantError),
    #[error("controller configuration: {0}")]
    Controller(#[from] ControllerError),
    #[error("metrics need a non-empty series")]
    EmptySeries,
}

/// Fully resolved controller configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControllerSpec {
    None,
    Pid(PidConfig),
    Nn { config: NnConfig, seed: u64 },
    Belbic(BelbicConfig),
}

impl ControllerSpec {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Self::None => ControllerKind::None,
            Self::Pid(_) => ControllerKind::Pid,
            Self::Nn { .. } => ControllerKind::Nn,
            Self::Belbic(_) => ControllerKind::Belbic,
        }
    }

    pub fn build(&self, dt: f64) -> Result<Controller, ControllerError> {
        Ok(match self {
            Self::None => Controller::None(NullController::default()),
            Self::Pid(c) => Controller::Pid(PidController::new(*c, dt)?),
            Self::Nn { config, seed } => Controller::Nn(NnController::new(*config, dt, *seed)?),
            Self::Belbic(c) => Controller::Belbic(BelbicSecondaryController::new(*c, dt)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogConfig {
    /// Record controller internals (weights, SI, ES) when the controller has them.
    #[serde(default)]
    pub internals: bool,
    /// Record internals every n-th tick.
    #[serde(default = "one")]
    pub internals_every: usize,
}

fn one() -> usize {
    1
}

impl Default for LogConfig {
    fn default() -> Self {
        Self {
            internals: false,
            internals_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: f64,
    pub dt: f64,
    pub events: Vec<Event>,
    pub plant: PlantParams,
    pub references: References,
    pub controller: ControllerSpec,
    pub log: LogConfig,
    pub metrics: MetricsConfig,
}

pub const DEFAULT_HORIZON: f64 = 20.0;
pub const DEFAULT_DT: f64 = 0.001;
pub const DEFAULT_ISLANDING_TIME: f64 = 0.2;

impl Scenario {
    /// 20 s at 1 ms with islanding at 0.2 s on the nominal plant.
    pub fn islanding(controller: ControllerSpec) -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            events: vec![Event::islanding(DEFAULT_ISLANDING_TIME)],
            plant: PlantParams::default(),
            references: References::default(),
            controller,
            log: LogConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }

    /// Number of control ticks; also checks the horizon/step contract.
    pub fn steps(&self) -> Result<usize, HarnessError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(HarnessError::Config(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(HarnessError::Config(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(HarnessError::Config(format!(
                "dt {} does not divide horizon {}",
                self.dt, self.horizon
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.steps()?;
        self.plant.validate()?;
        if !(self.references.omega_ref > 0.0 && self.references.v_ref > 0.0) {
            return Err(HarnessError::Config("references must be > 0".into()));
        }
        if self.log.internals_every == 0 {
            return Err(HarnessError::Config(
                "log.internals_every must be >= 1".into(),
            ));
        }
        if !(self.metrics.settle_band.is_finite() && self.metrics.settle_band > 0.0) {
            return Err(HarnessError::Config(
                "metrics.settle_band must be > 0".into(),
            ));
        }
        let mut islandings = 0;
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.time.is_finite() && ev.time >= 0.0) {
                return Err(HarnessError::Config(format!(
                    "events[{i}].time must be >= 0"
                )));
            }
            match ev.kind {
                EventKind::Islanding => islandings += 1,
                EventKind::LoadStep { dp, dq } if !(dp.is_finite() && dq.is_finite()) => {
                    return Err(HarnessError::Config(format!(
                        "events[{i}] load step must be finite"
                    )))
                }
                EventKind::ParameterChange {
                    machine,
                    param,
                    value,
                } => {
                    if !(machine == 1 || machine == 2) {
                        return Err(HarnessError::Config(format!(
                            "events[{i}].machine must be 1 or 2, got {machine}"
                        )));
                    }
                    let mut probe = self.plant;
                    probe.set_param(machine - 1, param, value);
                    probe.validate()?;
                }
                _ => {}
            }
        }
        if islandings > 1 {
            return Err(HarnessError::Config("at most one islanding event".into()));
        }
        self.controller.build(self.dt)?;
        Ok(())
    }

    /// Time of the last scheduled event inside the horizon, 0 without events.
    pub fn last_event_time(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.time)
            .filter(|&t| t < self.horizon)
            .fold(0.0, f64::max)
    }
}

/// Sampled signals, one row per control tick at `t = k * dt`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub t: Vec<f64>,
    /// Frequency of SM1 and SM2 (pu).
    pub omega: [Vec<f64>; 2],
    /// Terminal voltage of SM1 and SM2 (pu).
    pub v: [Vec<f64>; 2],
    pub u_sec: Vec<f64>,
    pub t_sec: Vec<f64>,
}

impl Trace {
    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t: v(),
            omega: [v(), v()],
            v: [v(), v()],
            u_sec: v(),
            t_sec: v(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Controller internals sampled at the listed trace rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InternalTrace {
    pub rows: Vec<usize>,
    pub samples: Vec<ControllerInternals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Non-finite state or failed network solve; the run stops.
    Simulation,
    /// The controller saw non-finite measurements.
    Controller,
    VoltageCollapse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub time: f64,
    pub kind: FaultKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub controller: ControllerKind,
    pub trace: Trace,
    pub internals: Option<InternalTrace>,
    /// `None` for an empty trace.
    pub metrics: Option<Metrics>,
    pub faults: Vec<FaultRecord>,
    /// False when a simulation fault cut the run short.
    pub completed: bool,
    pub last_event_time: f64,
}

impl RunResult {
    pub fn simulation_fault(&self) -> Option<&FaultRecord> {
        self.faults.iter().find(|f| f.kind == FaultKind::Simulation)
    }
}

/// Ticks the plant and controller in lockstep over the horizon.
///
/// Configuration problems are errors; faults during the run produce a
/// partial trace with a fault record.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult, HarnessError> {
    scenario.validate()?;
    let steps = scenario.steps()?;
    let dt = scenario.dt;
    let mut plant = Plant::at_equilibrium(scenario.plant)?;
    let mut controller = scenario.controller.build(dt)?;

    let mut events = scenario.events.clone();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut pending = events.iter().peekable();

    let mut trace = Trace::with_capacity(steps);
    let mut internals =
        (scenario.log.internals && controller.internals().is_some()).then(InternalTrace::default);
    let mut faults = Vec::new();
    let mut completed = true;
    let mut collapsed = false;
    let mut controller_faulted = false;

    for k in 0..steps {
        let t = k as f64 * dt;
        while let Some(ev) = pending.next_if(|ev| ev.time < t + 0.5 * dt) {
            plant.apply_event(ev);
        }
        let reading = match plant.read() {
            Ok(r) => r,
            Err(e) => {
                faults.push(FaultRecord {
                    time: t,
                    kind: FaultKind::Simulation,
                    message: e.to_string(),
                });
                completed = false;
                break;
            }
        };
        if reading.collapsed() && !collapsed {
            collapsed = true;
            faults.push(FaultRecord {
                time: t,
                kind: FaultKind::VoltageCollapse,
                message: "terminal voltage below collapse threshold".into(),
            });
        }
        let command = controller.control_step(&reading.sm1(), &scenario.references);
        if controller.faulted() && !controller_faulted {
            controller_faulted = true;
            faults.push(FaultRecord {
                time: t,
                kind: FaultKind::Controller,
                message: "controller received non-finite input; holding last command".into(),
            });
        }

        trace.t.push(t);
        for i in 0..2 {
            trace.omega[i].push(reading.machines[i].omega);
            trace.v[i].push(reading.machines[i].v);
        }
        trace.u_sec.push(command.u_sec);
        trace.t_sec.push(command.t_sec);
        if let Some(log) = internals.as_mut() {
            if k % scenario.log.internals_every == 0 {
                if let Some(sample) = controller.internals() {
                    log.rows.push(k);
                    log.samples.push(sample);
                }
            }
        }

        if let Err(e) = plant.step(&command, dt) {
            faults.push(FaultRecord {
                time: t,
                kind: FaultKind::Simulation,
                message: e.to_string(),
            });
            completed = false;
            break;
        }
    }

    let last_event_time = scenario.last_event_time();
    let metrics = if trace.is_empty() {
        None
    } else {
        Some(compute_trace_metrics(
            &trace,
            &scenario.references,
            &scenario.metrics,
            last_event_time,
        )?)
    };
    Ok(RunResult {
        controller: controller.kind(),
        trace,
        internals,
        metrics,
        faults,
        completed,
        last_event_time,
    })
}
