//! Per-channel error bookkeeping and the sensory-input / emotional-signal shaping.
//!
//! ```text
//! SI = k1*e + k2*int(e) + k3*de/dt
//! ES = k4*|u_prev| + k5*e + k6*int(e) + k7*de/dt
//! ```
//!
//! `u_prev` is the command emitted on the previous tick, which breaks the
//! algebraic loop between the emotional signal and the command it shapes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("sample time must be finite and > 0, got {0}")]
    InvalidDt(f64),
    #[error("derivative filter time constant must be finite and >= 0, got {0}")]
    InvalidTau(f64),
    #[error("integral clamp must be finite and > 0, got {0}")]
    InvalidClamp(f64),
    #[error("non-finite error sample {0}")]
    NonFinite(f64),
    #[error("gain {name} must be finite and >= 0, got {value}")]
    InvalidGain { name: &'static str, value: f64 },
}

pub const DEFAULT_TAU_D: f64 = 0.01;
pub const DEFAULT_INTEGRAL_CLAMP: f64 = 10.0;

/// Error, its running integral and a filtered derivative for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTracker {
    pub e: f64,
    pub integral: f64,
    /// Low-pass filtered backward difference; also the filter memory.
    pub derivative: f64,
    pub dt: f64,
    pub tau_d: f64,
    /// Anti-windup bound on `|integral|`; `None` disables it.
    pub integral_clamp: Option<f64>,
}

impl ErrorTracker {
    pub fn new(dt: f64, tau_d: f64, integral_clamp: Option<f64>) -> Result<Self, SignalError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SignalError::InvalidDt(dt));
        }
        if !(tau_d.is_finite() && tau_d >= 0.0) {
            return Err(SignalError::InvalidTau(tau_d));
        }
        if let Some(c) = integral_clamp {
            if !(c.is_finite() && c > 0.0) {
                return Err(SignalError::InvalidClamp(c));
            }
        }
        Ok(Self {
            e: 0.0,
            integral: 0.0,
            derivative: 0.0,
            dt,
            tau_d,
            integral_clamp,
        })
    }

    /// Default filtering and anti-windup for sample time `dt`.
    pub fn with_defaults(dt: f64) -> Result<Self, SignalError> {
        Self::new(dt, DEFAULT_TAU_D, Some(DEFAULT_INTEGRAL_CLAMP))
    }

    /// Clears the error history, keeping the configuration.
    pub fn reset(&mut self) {
        self.e = 0.0;
        self.integral = 0.0;
        self.derivative = 0.0;
    }

    /// Advances by one sample with the new error value.
    ///
    /// Trapezoidal integral, backward-difference derivative through a
    /// first-order low-pass with time constant `tau_d` (raw difference when 0).
    pub fn update(&self, e_new: f64) -> Result<Self, SignalError> {
        if !e_new.is_finite() {
            return Err(SignalError::NonFinite(e_new));
        }
        let mut integral = self.integral + 0.5 * (self.e + e_new) * self.dt;
        if let Some(limit) = self.integral_clamp {
            integral = integral.clamp(-limit, limit);
        }
        let raw = (e_new - self.e) / self.dt;
        let derivative = if self.tau_d == 0.0 {
            raw
        } else {
            (self.tau_d * self.derivative + self.dt * raw) / (self.tau_d + self.dt)
        };
        Ok(Self {
            e: e_new,
            integral,
            derivative,
            ..self.clone()
        })
    }
}

/// Shaping gains of one control channel: `k1..k3` form the sensory input,
/// `k4..k7` the emotional signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
}

impl ChannelGains {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.k1, self.k2, self.k3, self.k4, self.k5, self.k6, self.k7,
        ]
    }

    pub fn from_array(k: [f64; 7]) -> Self {
        Self {
            k1: k[0],
            k2: k[1],
            k3: k[2],
            k4: k[3],
            k5: k[4],
            k6: k[5],
            k7: k[6],
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        const NAMES: [&str; 7] = ["k1", "k2", "k3", "k4", "k5", "k6", "k7"];
        for (name, value) in NAMES.into_iter().zip(self.as_array()) {
            if !(value.is_finite() && value >= 0.0) {
                return Err(SignalError::InvalidGain { name, value });
            }
        }
        Ok(())
    }
}

pub fn sensory_input(tracker: &ErrorTracker, gains: &ChannelGains) -> f64 {
    gains.k1 * tracker.e + gains.k2 * tracker.integral + gains.k3 * tracker.derivative
}

pub fn emotional_signal(tracker: &ErrorTracker, u_prev: f64, gains: &ChannelGains) -> f64 {
    gains.k4 * u_prev.abs()
        + gains.k5 * tracker.e
        + gains.k6 * tracker.integral
        + gains.k7 * tracker.derivative
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(k: [f64; 7]) -> ChannelGains {
        ChannelGains::from_array(k)
    }

    fn tracker(e: f64, integral: f64, derivative: f64) -> ErrorTracker {
        ErrorTracker {
            e,
            integral,
            derivative,
            ..ErrorTracker::new(0.001, 0.0, None).unwrap()
        }
    }

    #[test]
    fn zero_error_stays_zero() {
        let mut t = ErrorTracker::with_defaults(0.001).unwrap();
        for _ in 0..1000 {
            t = t.update(0.0).unwrap();
        }
        assert_eq!((t.integral, t.derivative), (0.0, 0.0));
    }

    #[test]
    fn unit_step_trapezoid_and_difference() {
        let t = ErrorTracker::new(0.001, 0.0, None).unwrap();
        let t = t.update(1.0).unwrap();
        assert_eq!(t.derivative, 1000.0);
        assert_eq!(t.integral, 0.0005);
    }

    #[test]
    fn constant_error_integrates_linearly() {
        let (c, dt, seconds) = (0.37, 0.001, 5.0);
        let mut t = ErrorTracker::new(dt, 0.0, None).unwrap();
        // start already at c so the trapezoid has no ramp-in sample
        t.e = c;
        let steps = (seconds / dt) as usize;
        for _ in 0..steps {
            t = t.update(c).unwrap();
        }
        assert!((t.integral - c * seconds).abs() < 1e-9);
    }

    #[test]
    fn filtered_derivative_converges_to_slope() {
        let dt = 0.001;
        let mut t = ErrorTracker::new(dt, 0.01, None).unwrap();
        for k in 1..=2000 {
            t = t.update(2.0 * k as f64 * dt).unwrap();
        }
        assert!((t.derivative - 2.0).abs() < 1e-9);
    }

    #[test]
    fn anti_windup_clamps_integral() {
        let mut t = ErrorTracker::new(0.01, 0.0, Some(0.5)).unwrap();
        for _ in 0..1000 {
            t = t.update(1.0).unwrap();
        }
        assert_eq!(t.integral, 0.5);
        for _ in 0..1000 {
            t = t.update(-1.0).unwrap();
        }
        assert_eq!(t.integral, -0.5);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(ErrorTracker::new(0.0, 0.0, None).is_err());
        assert!(ErrorTracker::new(0.001, -1.0, None).is_err());
        assert!(ErrorTracker::new(0.001, 0.0, Some(0.0)).is_err());
        let t = ErrorTracker::with_defaults(0.001).unwrap();
        assert!(t.update(f64::NAN).is_err());
    }

    #[test]
    fn sensory_input_examples() {
        let g = gains([1.0, 0.2, 0.01, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(sensory_input(&tracker(0.0, 0.0, 0.0), &g), 0.0);
        let si = sensory_input(&tracker(0.1, 0.5, -2.0), &g);
        assert!((si - 0.18).abs() < 1e-15);
        let p = gains([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(sensory_input(&tracker(-0.3, 4.0, 9.0), &p), -0.3);
    }

    #[test]
    fn emotional_signal_examples() {
        let g = gains([0.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0]);
        assert_eq!(emotional_signal(&tracker(0.0, 0.0, 0.0), 0.0, &g), 0.0);
        let es = emotional_signal(&tracker(0.1, 0.0, 0.0), -2.0, &g);
        assert!((es - 1.1).abs() < 1e-15);
        let no_effort = gains([0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            emotional_signal(&tracker(0.0, 0.0, 0.0), 123.0, &no_effort),
            0.0
        );
    }

    #[test]
    fn gains_must_be_non_negative() {
        assert!(gains([1.0; 7]).validate().is_ok());
        let mut k = [1.0; 7];
        k[5] = -0.1;
        assert!(gains(k).validate().is_err());
    }
}
