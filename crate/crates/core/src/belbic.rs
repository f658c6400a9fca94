//! Emotional-learning unit: Amygdala, Thalamus and Orbitofrontal Cortex nodes.
//!
//! Every node multiplies one sensory input by a weight. The Amygdala learns
//! monotonically towards the emotional signal (its update is clamped at zero),
//! while the Orbitofrontal Cortex learns from the mismatch between the model
//! output and the emotional signal and inhibits the Amygdala:
//!
//! ```text
//! A_i   = V_i * SI_i                       OC_i = W_i * SI_i
//! A_th  = V_th * max_i SI_i
//! MO    = (sum A_i + A_th) - sum OC_i
//! dV_i  = k_v * SI_i * max(0, ES - (sum A_i + A_th))
//! dW_i  = k_w * SI_i * (MO - ES)
//! ```
//!
//! Updates are per sample. All functions here are pure: they take a state by
//! reference and return a new one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BelbicError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("empty sensory input")]
    EmptyInput,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("learning rate {name} must be finite and >= 0, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, BelbicError>;

/// Weights of one learning unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BelbicState {
    /// Amygdala weights, one per sensory input.
    pub v: Vec<f64>,
    /// Thalamic weight.
    pub v_th: f64,
    /// Orbitofrontal weights, same length as `v`.
    pub w: Vec<f64>,
}

impl BelbicState {
    /// All-zero weights for `inputs` sensory channels.
    pub fn zeros(inputs: usize) -> Result<Self> {
        if inputs == 0 {
            return Err(BelbicError::EmptyInput);
        }
        Ok(Self {
            v: vec![0.0; inputs],
            v_th: 0.0,
            w: vec![0.0; inputs],
        })
    }

    pub fn new(v: Vec<f64>, v_th: f64, w: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(BelbicError::EmptyInput);
        }
        if w.len() != v.len() {
            return Err(BelbicError::DimensionMismatch {
                what: "w",
                got: w.len(),
                expected: v.len(),
            });
        }
        let state = Self { v, v_th, w };
        state.check_finite()?;
        Ok(state)
    }

    pub fn inputs(&self) -> usize {
        self.v.len()
    }

    /// Copy with every weight limited to `[-bound, bound]`.
    pub fn clamped(&self, bound: f64) -> Self {
        let clamp = |x: f64| x.clamp(-bound, bound);
        Self {
            v: self.v.iter().copied().map(clamp).collect(),
            v_th: clamp(self.v_th),
            w: self.w.iter().copied().map(clamp).collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        if self.v.iter().chain(&self.w).all(|x| x.is_finite()) && self.v_th.is_finite() {
            Ok(())
        } else {
            Err(BelbicError::NonFinite("weights"))
        }
    }
}

/// Per-sample learning rates of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub k_v: f64,
    pub k_w: f64,
    /// Enables the thalamic `max(SI)` path into the Amygdala.
    pub thalamus_enabled: bool,
}

impl LearningRates {
    pub fn new(k_v: f64, k_w: f64, thalamus_enabled: bool) -> Result<Self> {
        let rates = Self {
            k_v,
            k_w,
            thalamus_enabled,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn frozen() -> Self {
        Self {
            k_v: 0.0,
            k_w: 0.0,
            thalamus_enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("k_v", self.k_v), ("k_w", self.k_w)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(BelbicError::InvalidRate { name, value });
            }
        }
        Ok(())
    }
}

fn check_inputs(si: &[f64], weights: &[f64], what: &'static str) -> Result<()> {
    if si.is_empty() {
        return Err(BelbicError::EmptyInput);
    }
    if si.len() != weights.len() {
        return Err(BelbicError::DimensionMismatch {
            what,
            got: si.len(),
            expected: weights.len(),
        });
    }
    if si.iter().any(|x| !x.is_finite()) {
        return Err(BelbicError::NonFinite("sensory input"));
    }
    Ok(())
}

fn check_scalar(x: f64, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(BelbicError::NonFinite(what))
    }
}

fn max_input(si: &[f64]) -> f64 {
    si.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Amygdala node outputs `A_i = V_i * SI_i`.
pub fn amygdala_outputs(si: &[f64], state: &BelbicState) -> Result<Vec<f64>> {
    check_inputs(si, &state.v, "sensory input")?;
    Ok(si.iter().zip(&state.v).map(|(s, v)| v * s).collect())
}

/// Thalamic output `A_th = V_th * max(SI)`, or 0 when the path is disabled.
pub fn thalamic_output(si: &[f64], state: &BelbicState, rates: &LearningRates) -> Result<f64> {
    if si.is_empty() {
        return Err(BelbicError::EmptyInput);
    }
    if si.iter().any(|x| !x.is_finite()) {
        return Err(BelbicError::NonFinite("sensory input"));
    }
    if !rates.thalamus_enabled {
        return Ok(0.0);
    }
    Ok(state.v_th * max_input(si))
}

/// Orbitofrontal node outputs `OC_i = W_i * SI_i`.
pub fn ofc_outputs(si: &[f64], state: &BelbicState) -> Result<Vec<f64>> {
    check_inputs(si, &state.w, "sensory input")?;
    Ok(si.iter().zip(&state.w).map(|(s, w)| w * s).collect())
}

/// `MO = (sum A_i + A_th) - sum OC_i`. The thalamic term is not inhibited.
pub fn model_output(a: &[f64], a_th: f64, oc: &[f64]) -> Result<f64> {
    if a.len() != oc.len() {
        return Err(BelbicError::DimensionMismatch {
            what: "orbitofrontal outputs",
            got: oc.len(),
            expected: a.len(),
        });
    }
    let amygdala: f64 = a.iter().sum::<f64>() + a_th;
    let ofc: f64 = oc.iter().sum();
    Ok(amygdala - ofc)
}

/// Amygdala learning step. `V_th` follows the same law with `max(SI)` as its input.
pub fn update_amygdala(
    state: &BelbicState,
    si: &[f64],
    es: f64,
    rates: &LearningRates,
) -> Result<BelbicState> {
    check_scalar(es, "emotional signal")?;
    let a = amygdala_outputs(si, state)?;
    let a_th = thalamic_output(si, state, rates)?;
    let activation = a.iter().sum::<f64>() + a_th;
    let drive = (es - activation).max(0.0);

    let v = state
        .v
        .iter()
        .zip(si)
        .map(|(v, s)| v + rates.k_v * s * drive)
        .collect();
    let v_th = if rates.thalamus_enabled {
        state.v_th + rates.k_v * max_input(si) * drive
    } else {
        state.v_th
    };
    Ok(BelbicState {
        v,
        v_th,
        w: state.w.clone(),
    })
}

/// Orbitofrontal learning step.
pub fn update_ofc(
    state: &BelbicState,
    si: &[f64],
    mo: f64,
    es: f64,
    rates: &LearningRates,
) -> Result<BelbicState> {
    check_scalar(mo, "model output")?;
    check_scalar(es, "emotional signal")?;
    check_inputs(si, &state.w, "sensory input")?;
    let mismatch = mo - es;
    let w = state
        .w
        .iter()
        .zip(si)
        .map(|(w, s)| w + rates.k_w * s * mismatch)
        .collect();
    Ok(BelbicState {
        v: state.v.clone(),
        v_th: state.v_th,
        w,
    })
}

/// One controller tick: the model output is evaluated with the current
/// weights, then the Amygdala and Orbitofrontal updates are applied in that order.
pub fn step(
    state: &BelbicState,
    si: &[f64],
    es: f64,
    rates: &LearningRates,
) -> Result<(f64, BelbicState)> {
    check_scalar(es, "emotional signal")?;
    let a = amygdala_outputs(si, state)?;
    let a_th = thalamic_output(si, state, rates)?;
    let oc = ofc_outputs(si, state)?;
    let mo = model_output(&a, a_th, &oc)?;

    let next = update_amygdala(state, si, es, rates)?;
    let next = update_ofc(&next, si, mo, es, rates)?;
    next.check_finite()?;
    Ok((mo, next))
}
