//! Online single-hidden-layer network baseline.
//!
//! Per channel: inputs `(e, int e, de/dt)` scaled by `input_scale`, `hidden`
//! tanh units and a linear output scaled by `output_scale`. The weights are
//! adapted every tick by gradient descent on `0.5 * e^2`, assuming the plant
//! responds to a larger command with a smaller error (`de/du = -1`), so the
//! step is `theta += lr * e_scaled * d(output)/d(theta)` for the output the
//! network emitted on the previous tick. Output biases start at zero so the
//! command is exactly zero at rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    invalid, saturate, CommandLimits, ControlCommand, ControllerError, Measurements, References,
    SecondaryControl, TrackerConfig,
};
use crate::signals::ErrorTracker;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnChannelConfig {
    /// Multipliers applied to `(e, int e, de/dt)` before the network.
    pub input_scale: [f64; 3],
    pub output_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnConfig {
    pub voltage: NnChannelConfig,
    pub frequency: NnChannelConfig,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Half-width of the uniform initial weight distribution.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub limits: CommandLimits,
}

fn default_hidden() -> usize {
    8
}

fn default_learning_rate() -> f64 {
    0.01
}

fn default_init_scale() -> f64 {
    0.1
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            voltage: NnChannelConfig {
                input_scale: [20.0, 10.0, 0.5],
                output_scale: 0.2,
            },
            frequency: NnChannelConfig {
                input_scale: [20.0, 10.0, 0.5],
                output_scale: 0.1,
            },
            hidden: default_hidden(),
            learning_rate: default_learning_rate(),
            init_scale: default_init_scale(),
            tracker: TrackerConfig::default(),
            limits: CommandLimits::default(),
        }
    }
}

impl NnConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.hidden == 0 {
            return Err(invalid("hidden", "must be >= 1"));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("init_scale", self.init_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (label, ch) in [("voltage", &self.voltage), ("frequency", &self.frequency)] {
            let all = ch
                .input_scale
                .iter()
                .chain(std::iter::once(&ch.output_scale));
            if all.clone().any(|v| !v.is_finite()) {
                return Err(invalid(label, "scales must be finite"));
            }
        }
        self.limits.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Network {
    w1: Vec<[f64; 3]>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Network {
    fn random(hidden: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut sample = || {
            if scale > 0.0 {
                rng.gen_range(-scale..scale)
            } else {
                0.0
            }
        };
        let w1 = (0..hidden)
            .map(|_| [sample(), sample(), sample()])
            .collect();
        let w2 = (0..hidden).map(|_| sample()).collect();
        Self {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: 0.0,
        }
    }

    fn hidden(&self, x: &[f64; 3]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(w, b)| (w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + b).tanh())
            .collect()
    }

    fn output(&self, h: &[f64]) -> f64 {
        self.w2.iter().zip(h).map(|(w, h)| w * h).sum::<f64>() + self.b2
    }

    /// `theta += rate * d(output)/d(theta)` evaluated at `(x, h)`.
    #[allow(clippy::needless_range_loop)]
    fn ascend(&mut self, x: &[f64; 3], h: &[f64], rate: f64) {
        for j in 0..self.w2.len() {
            let back = self.w2[j] * (1.0 - h[j] * h[j]);
            self.w2[j] += rate * h[j];
            self.b1[j] += rate * back;
            for k in 0..3 {
                self.w1[j][k] += rate * back * x[k];
            }
        }
        self.b2 += rate;
    }

    fn is_finite(&self) -> bool {
        self.b2.is_finite()
            && self.w2.iter().chain(&self.b1).all(|v| v.is_finite())
            && self.w1.iter().flatten().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Channel {
    scale: NnChannelConfig,
    net: Network,
    tracker: ErrorTracker,
    last_input: Option<([f64; 3], Vec<f64>)>,
    u_prev: f64,
}

impl Channel {
    fn tick(&mut self, e: f64, rate: f64, limit: f64) -> f64 {
        let Ok(tracker) = self.tracker.update(e) else {
            return self.u_prev;
        };
        let s = self.scale.input_scale;
        let x = [
            s[0] * tracker.e,
            s[1] * tracker.integral,
            s[2] * tracker.derivative,
        ];
        let mut net = self.net.clone();
        if let Some((x_prev, h_prev)) = &self.last_input {
            net.ascend(x_prev, h_prev, rate * x[0]);
        }
        let h = net.hidden(&x);
        let u = self.scale.output_scale * net.output(&h);
        if !(net.is_finite() && u.is_finite()) {
            return self.u_prev;
        }
        self.tracker = tracker;
        self.net = net;
        self.last_input = Some((x, h));
        self.u_prev = saturate(u, limit);
        self.u_prev
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnController {
    config: NnConfig,
    channels: [Channel; 2],
    initial: [Channel; 2],
    faulted: bool,
}

impl NnController {
    pub fn new(config: NnConfig, dt: f64, seed: u64) -> Result<Self, ControllerError> {
        config.validate()?;
        let tracker = config.tracker.tracker(dt)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut channel = |scale: NnChannelConfig| Channel {
            scale,
            net: Network::random(config.hidden, config.init_scale, &mut rng),
            tracker: tracker.clone(),
            last_input: None,
            u_prev: 0.0,
        };
        let channels = [channel(config.voltage), channel(config.frequency)];
        Ok(Self {
            config,
            initial: channels.clone(),
            channels,
            faulted: false,
        })
    }

    pub fn config(&self) -> &NnConfig {
        &self.config
    }
}

impl SecondaryControl for NnController {
    fn control_step(&mut self, meas: &Measurements, refs: &References) -> ControlCommand {
        if !meas.is_finite() {
            self.faulted = true;
            return ControlCommand::from_channels([
                self.channels[0].u_prev,
                self.channels[1].u_prev,
            ]);
        }
        let errors = refs.errors(meas);
        let limits = self.config.limits.per_channel();
        let mut u = [0.0; 2];
        for l in 0..2 {
            u[l] = self.channels[l].tick(errors[l], self.config.learning_rate, limits[l]);
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
}
