//! Secondary-control layer for machine 1.
//!
//! Channel 1 produces `u_sec`, added to the AVR reference; channel 2
//! produces `t_sec`, added to the governor reference. Both errors are
//! `reference - measurement`.

mod belbic;
mod nn;
mod pid;

pub use self::belbic::{BelbicChannelConfig, BelbicConfig, BelbicSecondaryController};
pub use self::nn::{NnChannelConfig, NnConfig, NnController};
pub use self::pid::{PidConfig, PidController, PidGains};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belbic::BelbicError;
use crate::signals::{ErrorTracker, SignalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Belbic(#[from] BelbicError),
    #[error("invalid controller setting {name}: {reason}")]
    Invalid { name: String, reason: String },
}

/// Measured frequency and terminal voltage of one machine (pu).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub omega: f64,
    pub v: f64,
}

impl Measurements {
    pub fn is_finite(&self) -> bool {
        self.omega.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct References {
    pub omega_ref: f64,
    pub v_ref: f64,
}

impl Default for References {
    fn default() -> Self {
        Self {
            omega_ref: 1.0,
            v_ref: 1.0,
        }
    }
}

impl References {
    /// `[voltage error, frequency error]`.
    pub fn errors(&self, meas: &Measurements) -> [f64; 2] {
        [self.v_ref - meas.v, self.omega_ref - meas.omega]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Voltage channel, added to the AVR reference.
    pub u_sec: f64,
    /// Frequency channel, added to the governor reference.
    pub t_sec: f64,
}

impl ControlCommand {
    pub fn zero() -> Self {
        Self::default()
    }

    fn from_channels(u: [f64; 2]) -> Self {
        Self {
            u_sec: u[0],
            t_sec: u[1],
        }
    }
}

/// Saturation of the emitted commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandLimits {
    pub u_max: f64,
    pub t_max: f64,
}

impl Default for CommandLimits {
    fn default() -> Self {
        Self {
            u_max: 0.5,
            t_max: 0.5,
        }
    }
}

impl CommandLimits {
    fn per_channel(&self) -> [f64; 2] {
        [self.u_max, self.t_max]
    }

    fn validate(&self) -> Result<(), ControllerError> {
        for (name, v) in [("u_max", self.u_max), ("t_max", self.t_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Error-tracker settings shared by the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Derivative filter time constant (s); 0 disables filtering.
    pub tau_d: f64,
    pub anti_windup: bool,
    pub integral_clamp: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_d: crate::signals::DEFAULT_TAU_D,
            anti_windup: true,
            integral_clamp: crate::signals::DEFAULT_INTEGRAL_CLAMP,
        }
    }
}

impl TrackerConfig {
    pub fn tracker(&self, dt: f64) -> Result<ErrorTracker, SignalError> {
        ErrorTracker::new(
            dt,
            self.tau_d,
            self.anti_windup.then_some(self.integral_clamp),
        )
    }
}

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> ControllerError {
    ControllerError::Invalid {
        name: name.into(),
        reason: reason.into(),
    }
}

fn saturate(u: f64, limit: f64) -> f64 {
    u.clamp(-limit, limit)
}

/// Learning-unit traces of one tick, `[voltage, frequency]` per field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerInternals {
    pub v: [f64; 2],
    pub w: [f64; 2],
    pub si: [f64; 2],
    pub es: [f64; 2],
}

pub trait SecondaryControl {
    /// One sample tick. Non-finite measurements repeat the last command and
    /// mark the controller as faulted.
    fn control_step(&mut self, meas: &Measurements, refs: &References) -> ControlCommand;

    /// Restores the freshly constructed configuration.
    fn reset(&mut self);

    fn faulted(&self) -> bool;

    fn internals(&self) -> Option<ControllerInternals> {
        None
    }
}

/// No secondary control: both commands are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NullController {
    faulted: bool,
}

impl SecondaryControl for NullController {
    fn control_step(&mut self, meas: &Measurements, _refs: &References) -> ControlCommand {
        if !meas.is_finite() {
            self.faulted = true;
        }
        ControlCommand::zero()
    }

    fn reset(&mut self) {
        self.faulted = false;
    }

    fn faulted(&self) -> bool {
        self.faulted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    None,
    Pid,
    Nn,
    Belbic,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Pid => "pid",
            Self::Nn => "nn",
            Self::Belbic => "belbic",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "pid" => Ok(Self::Pid),
            "nn" => Ok(Self::Nn),
            "belbic" => Ok(Self::Belbic),
            other => Err(format!("unknown controller kind `{other}`")),
        }
    }
}

/// Any of the four secondary controllers.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    None(NullController),
    Pid(PidController),
    Nn(NnController),
    Belbic(BelbicSecondaryController),
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Self::None(_) => ControllerKind::None,
            Self::Pid(_) => ControllerKind::Pid,
            Self::Nn(_) => ControllerKind::Nn,
            Self::Belbic(_) => ControllerKind::Belbic,
        }
    }

    fn inner(&self) -> &dyn SecondaryControl {
        match self {
            Self::None(c) => c,
            Self::Pid(c) => c,
            Self::Nn(c) => c,
            Self::Belbic(c) => c,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn SecondaryControl {
        match self {
            Self::None(c) => c,
            Self::Pid(c) => c,
            Self::Nn(c) => c,
            Self::Belbic(c) => c,
        }
    }
}

impl SecondaryControl for Controller {
    fn control_step(&mut self, meas: &Measurements, refs: &References) -> ControlCommand {
        self.inner_mut().control_step(meas, refs)
    }

    fn reset(&mut self) {
        self.inner_mut().reset()
    }

    fn faulted(&self) -> bool {
        self.inner().faulted()
    }

    fn internals(&self) -> Option<ControllerInternals> {
        self.inner().internals()
    }
}
