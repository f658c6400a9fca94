use serde::{Deserialize, Serialize};

use super::{
    invalid, saturate, CommandLimits, ControlCommand, ControllerError, Measurements, References,
    SecondaryControl, TrackerConfig,
};
use crate::signals::ErrorTracker;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const PARAM_NAMES: [&'static str; 3] = ["kp", "ki", "kd"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.kp, self.ki, self.kd]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self {
            kp: p[0],
            ki: p[1],
            kd: p[2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidConfig {
    pub voltage: PidGains,
    pub frequency: PidGains,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub limits: CommandLimits,
}

impl PidConfig {
    pub fn new(voltage: PidGains, frequency: PidGains) -> Self {
        Self {
            voltage,
            frequency,
            tracker: TrackerConfig::default(),
            limits: CommandLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        for (label, g) in [("voltage", &self.voltage), ("frequency", &self.frequency)] {
            for (name, v) in PidGains::PARAM_NAMES.iter().zip(g.to_vec()) {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(
                        format!("{label}.{name}"),
                        format!("must be >= 0, got {v}"),
                    ));
                }
            }
        }
        self.limits.validate()
    }
}

/// Two independent PID loops on the shared error tracker discretisation.
#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    config: PidConfig,
    trackers: [ErrorTracker; 2],
    last: ControlCommand,
    faulted: bool,
}

impl PidController {
    pub fn new(config: PidConfig, dt: f64) -> Result<Self, ControllerError> {
        config.validate()?;
        let tracker = config.tracker.tracker(dt)?;
        Ok(Self {
            config,
            trackers: [tracker.clone(), tracker],
            last: ControlCommand::zero(),
            faulted: false,
        })
    }

    pub fn config(&self) -> &PidConfig {
        &self.config
    }
}

impl SecondaryControl for PidController {
    fn control_step(&mut self, meas: &Measurements, refs: &References) -> ControlCommand {
        if !meas.is_finite() {
            self.faulted = true;
            return self.last;
        }
        let errors = refs.errors(meas);
        let gains = [self.config.voltage, self.config.frequency];
        let limits = self.config.limits.per_channel();
        let mut u = [0.0; 2];
        for l in 0..2 {
            // errors are finite here, so the update cannot fail
            if let Ok(t) = self.trackers[l].update(errors[l]) {
                self.trackers[l] = t;
            }
            let t = &self.trackers[l];
            let g = gains[l];
            u[l] = saturate(
                g.kp * t.e + g.ki * t.integral + g.kd * t.derivative,
                limits[l],
            );
        }
        self.last = ControlCommand::from_channels(u);
        self.last
    }

    fn reset(&mut self) {
        for t in &mut self.trackers {
            t.reset();
        }
        self.last = ControlCommand::zero();
        self.faulted = false;
    }

    fn faulted(&self) -> bool {
        self.faulted
    }
}
