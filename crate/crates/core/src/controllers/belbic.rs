use serde::{Deserialize, Serialize};

use super::{
    invalid, saturate, CommandLimits, ControlCommand, ControllerError, ControllerInternals,
    Measurements, References, SecondaryControl, TrackerConfig,
};
use crate::belbic::{self as unit, BelbicState, LearningRates};
use crate::signals::{emotional_signal, sensory_input, ChannelGains, ErrorTracker};

/// Shaping gains and learning rates for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BelbicChannelConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
    pub k_v: f64,
    pub k_w: f64,
}

impl BelbicChannelConfig {
    pub fn gains(&self) -> ChannelGains {
        ChannelGains {
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
            k4: self.k4,
            k5: self.k5,
            k6: self.k6,
            k7: self.k7,
        }
    }

    /// `[k1..k7, k_v, k_w]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.gains().as_array().to_vec();
        v.extend([self.k_v, self.k_w]);
        v
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self {
            k1: p[0],
            k2: p[1],
            k3: p[2],
            k4: p[3],
            k5: p[4],
            k6: p[5],
            k7: p[6],
            k_v: p[7],
            k_w: p[8],
        }
    }

    pub const PARAM_NAMES: [&'static str; 9] =
        ["k1", "k2", "k3", "k4", "k5", "k6", "k7", "k_v", "k_w"];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BelbicConfig {
    pub voltage: BelbicChannelConfig,
    pub frequency: BelbicChannelConfig,
    /// Adds the thalamic `max(SI)` path to both units.
    #[serde(default)]
    pub thalamus: bool,
    #[serde(default = "default_true")]
    pub clamp_weights: bool,
    #[serde(default = "default_weight_clamp")]
    pub weight_clamp: f64,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub limits: CommandLimits,
}

fn default_true() -> bool {
    true
}

fn default_weight_clamp() -> f64 {
    1e3
}

impl BelbicConfig {
    pub fn new(voltage: BelbicChannelConfig, frequency: BelbicChannelConfig) -> Self {
        Self {
            voltage,
            frequency,
            thalamus: false,
            clamp_weights: true,
            weight_clamp: default_weight_clamp(),
            tracker: TrackerConfig::default(),
            limits: CommandLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        for (label, ch) in [("voltage", &self.voltage), ("frequency", &self.frequency)] {
            ch.gains()
                .validate()
                .map_err(|e| invalid(label, e.to_string()))?;
            LearningRates::new(ch.k_v, ch.k_w, self.thalamus)
                .map_err(|e| invalid(label, e.to_string()))?;
        }
        if self.clamp_weights && !(self.weight_clamp.is_finite() && self.weight_clamp > 0.0) {
            return Err(invalid("weight_clamp", "must be finite and > 0"));
        }
        self.limits.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Channel {
    gains: ChannelGains,
    rates: LearningRates,
    state: BelbicState,
    tracker: ErrorTracker,
    u_prev: f64,
    si: f64,
    es: f64,
}

impl Channel {
    fn new(
        cfg: &BelbicChannelConfig,
        thalamus: bool,
        tracker: ErrorTracker,
    ) -> Result<Self, ControllerError> {
        Ok(Self {
            gains: cfg.gains(),
            rates: LearningRates::new(cfg.k_v, cfg.k_w, thalamus)?,
            state: BelbicState::zeros(1)?,
            tracker,
            u_prev: 0.0,
            si: 0.0,
            es: 0.0,
        })
    }

    fn tick(&mut self, e: f64, limit: f64, clamp: Option<f64>) -> Result<f64, ControllerError> {
        let tracker = self.tracker.update(e)?;
        let si = sensory_input(&tracker, &self.gains);
        let es = emotional_signal(&tracker, self.u_prev, &self.gains);
        let (mo, mut next) = unit::step(&self.state, &[si], es, &self.rates)?;
        if let Some(bound) = clamp {
            next = next.clamped(bound);
        }
        let u = saturate(mo, limit);
        self.tracker = tracker;
        self.state = next;
        self.si = si;
        self.es = es;
        self.u_prev = u;
        Ok(u)
    }
}

/// Two independent emotional-learning channels; each emits
/// `u = (V - W) * SI` with the weights from before this tick's update.
#[derive(Debug, Clone, PartialEq)]
pub struct BelbicSecondaryController {
    config: BelbicConfig,
    channels: [Channel; 2],
    initial: [Channel; 2],
    faulted: bool,
}

impl BelbicSecondaryController {
    pub fn new(config: BelbicConfig, dt: f64) -> Result<Self, ControllerError> {
        config.validate()?;
        let tracker = config.tracker.tracker(dt)?;
        let channels = [
            Channel::new(&config.voltage, config.thalamus, tracker.clone())?,
            Channel::new(&config.frequency, config.thalamus, tracker)?,
        ];
        Ok(Self {
            config,
            initial: channels.clone(),
            channels,
            faulted: false,
        })
    }

    pub fn config(&self) -> &BelbicConfig {
        &self.config
    }

    /// Learning-unit state of channel 0 (voltage) or 1 (frequency).
    pub fn unit_state(&self, channel: usize) -> &BelbicState {
        &self.channels[channel].state
    }

    pub fn set_unit_state(&mut self, channel: usize, state: BelbicState) {
        self.channels[channel].state = state;
    }

    fn last_command(&self) -> ControlCommand {
        ControlCommand::from_channels([self.channels[0].u_prev, self.channels[1].u_prev])
    }
}

impl SecondaryControl for BelbicSecondaryController {
    fn control_step(&mut self, meas: &Measurements, refs: &References) -> ControlCommand {
        if !meas.is_finite() {
            self.faulted = true;
            return self.last_command();
        }
        let errors = refs.errors(meas);
        let limits = self.config.limits.per_channel();
        let clamp = self
            .config
            .clamp_weights
            .then_some(self.config.weight_clamp);
        let mut u = [0.0; 2];
        for l in 0..2 {
            let before = self.channels[l].clone();
            match self.channels[l].tick(errors[l], limits[l], clamp) {
                Ok(v) => u[l] = v,
                Err(_) => {
                    self.channels[l] = before;
                    self.faulted = true;
                    u[l] = self.channels[l].u_prev;
                }
            }
        }
        ControlCommand::from_channels(u)
    }

    fn reset(&mut self) {
        self.channels = self.initial.clone();
        self.faulted = false;
    }

    fn faulted(&self) -> bool {
        self.faulted
    }

    fn internals(&self) -> Option<ControllerInternals> {
        let [a, b] = &self.channels;
        Some(ControllerInternals {
            v: [a.state.v[0], b.state.v[0]],
            w: [a.state.w[0], b.state.w[0]],
            si: [a.si, b.si],
            es: [a.es, b.es],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(k: [f64; 9]) -> BelbicChannelConfig {
        BelbicChannelConfig::from_slice(&k)
    }

    fn frozen_proportional() -> BelbicConfig {
        let ch = channel([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut cfg = BelbicConfig::new(ch, ch);
        cfg.tracker.tau_d = 0.0;
        cfg
    }

    #[test]
    fn first_tick_from_zero_weights_is_zero() {
        let ch = channel([1.0, 2.0, 0.1, 0.5, 1.0, 1.0, 0.1, 10.0, 5.0]);
        let mut c = BelbicSecondaryController::new(BelbicConfig::new(ch, ch), 0.001).unwrap();
        let cmd = c.control_step(
            &Measurements {
                omega: 0.98,
                v: 0.95,
            },
            &References::default(),
        );
        assert_eq!(cmd, ControlCommand::zero());
    }

    #[test]
    fn frozen_weights_follow_control_law() {
        let mut c = BelbicSecondaryController::new(frozen_proportional(), 0.001).unwrap();
        for l in 0..2 {
            c.set_unit_state(l, BelbicState::new(vec![0.8], 0.0, vec![0.3]).unwrap());
        }
        // SI = e = 0.2 on both channels
        let cmd = c.control_step(&Measurements { omega: 0.8, v: 0.8 }, &References::default());
        assert!((cmd.u_sec - 0.1).abs() < 1e-12);
        assert!((cmd.t_sec - 0.1).abs() < 1e-12);
    }

    #[test]
    fn frozen_command_is_linear_in_error() {
        let run = |e: f64| {
            let mut c = BelbicSecondaryController::new(frozen_proportional(), 0.001).unwrap();
            c.set_unit_state(0, BelbicState::new(vec![0.7], 0.0, vec![0.2]).unwrap());
            c.control_step(
                &Measurements {
                    omega: 1.0,
                    v: 1.0 - e,
                },
                &References::default(),
            )
            .u_sec
        };
        assert_eq!(run(0.125) * 2.0, run(0.25));
    }

    #[test]
    fn commands_saturate() {
        let mut c = BelbicSecondaryController::new(frozen_proportional(), 0.001).unwrap();
        for l in 0..2 {
            c.set_unit_state(l, BelbicState::new(vec![100.0], 0.0, vec![0.0]).unwrap());
        }
        let cmd = c.control_step(&Measurements { omega: 0.5, v: 1.5 }, &References::default());
        assert_eq!(cmd.t_sec, 0.5);
        assert_eq!(cmd.u_sec, -0.5);
    }

    #[test]
    fn voltage_error_leaves_frequency_channel_alone() {
        let ch = channel([1.0, 1.0, 0.1, 0.2, 1.0, 1.0, 0.1, 50.0, 20.0]);
        let mut a = BelbicSecondaryController::new(BelbicConfig::new(ch, ch), 0.001).unwrap();
        let mut b = a.clone();
        let refs = References::default();
        a.control_step(
            &Measurements {
                omega: 0.99,
                v: 1.0,
            },
            &refs,
        );
        b.control_step(
            &Measurements {
                omega: 0.99,
                v: 0.9,
            },
            &refs,
        );
        assert_eq!(a.unit_state(1), b.unit_state(1));
        assert_ne!(a.unit_state(0), b.unit_state(0));
    }

    #[test]
    fn reset_restores_zero_weights() {
        let ch = channel([1.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 50.0, 20.0]);
        let mut c = BelbicSecondaryController::new(BelbicConfig::new(ch, ch), 0.001).unwrap();
        let fresh = c.clone();
        for _ in 0..50 {
            c.control_step(
                &Measurements {
                    omega: 0.99,
                    v: 0.97,
                },
                &References::default(),
            );
        }
        assert_ne!(c.unit_state(0).v[0], 0.0);
        c.reset();
        assert_eq!(c, fresh);
    }

    #[test]
    fn non_finite_measurement_holds_last_command() {
        let mut c = BelbicSecondaryController::new(frozen_proportional(), 0.001).unwrap();
        c.set_unit_state(1, BelbicState::new(vec![1.0], 0.0, vec![0.0]).unwrap());
        let refs = References::default();
        let cmd = c.control_step(&Measurements { omega: 0.9, v: 1.0 }, &refs);
        let held = c.control_step(
            &Measurements {
                omega: f64::NAN,
                v: 1.0,
            },
            &refs,
        );
        assert_eq!(cmd, held);
        assert!(c.faulted());
    }

    #[test]
    fn rejects_negative_gains() {
        let ch = channel([1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(BelbicSecondaryController::new(BelbicConfig::new(ch, ch), 0.001).is_err());
    }
}
