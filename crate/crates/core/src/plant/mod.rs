//! Reduced-order two-machine microgrid.
//!
//! Each synchronous machine has a swing equation, a first-order
//! governor/turbine and a first-order AVR whose excitation state drives the
//! internal EMF directly:
//!
//! ```text
//! d(delta)/dt  = wb * dw
//! M  d(dw)/dt  = Pm - Pe - D*dw
//! TG d(Pm)/dt  = -Pm + KG*(Pref + Tsec - dw/R)
//! Ta d(Efd)/dt = -Efd + Ka*(Vset + Usec - Vt)
//! ```
//!
//! The secondary commands only reach machine 1. Both machines feed a
//! constant-impedance load bus which is tied to an infinite bus until the
//! microgrid islands. The initial state is the grid-connected equilibrium at
//! the configured dispatch, found by Newton iteration; governor and AVR
//! setpoints are derived from it.

mod events;
pub mod integrator;
pub mod network;

pub use events::{Event, EventKind, MachineParam};
pub use network::{network_solve, NetworkSolution};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{ControlCommand, Measurements};

/// Terminal voltage below which a reading is flagged as voltage collapse.
pub const COLLAPSE_VOLTAGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("network admittance is singular or produced non-finite voltages")]
    SingularNetwork,
    #[error("network power balance violated by {0:e} pu")]
    PowerImbalance(f64),
    #[error("non-finite state component {0}")]
    NonFinite(String),
    #[error("equilibrium solve did not converge (residual {0:e})")]
    NoEquilibrium(f64),
    #[error("invalid plant parameter {name}: {value}")]
    InvalidParam { name: String, value: f64 },
    #[error("time step must be finite and > 0, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineParams {
    /// Inertia constant (s).
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "D")]
    pub d: f64,
    /// Droop; the governor responds with `1/R` per unit speed deviation.
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "K_G")]
    pub k_g: f64,
    #[serde(rename = "T_G")]
    pub t_g: f64,
    #[serde(rename = "K_a")]
    pub k_a: f64,
    #[serde(rename = "T_a")]
    pub t_a: f64,
    /// Machine reactance (pu).
    #[serde(rename = "X")]
    pub x: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            m: 6.0,
            d: 1.0,
            r: 0.05,
            k_g: 1.0,
            t_g: 0.5,
            k_a: 50.0,
            t_a: 0.1,
            x: 0.8,
        }
    }
}

impl MachineParams {
    pub fn get(&self, param: MachineParam) -> f64 {
        match param {
            MachineParam::Inertia => self.m,
            MachineParam::Damping => self.d,
            MachineParam::Droop => self.r,
            MachineParam::TurbineGain => self.k_g,
            MachineParam::TurbineTimeConstant => self.t_g,
            MachineParam::AvrGain => self.k_a,
            MachineParam::AvrTimeConstant => self.t_a,
            MachineParam::Reactance => self.x,
        }
    }

    pub fn set(&mut self, param: MachineParam, value: f64) {
        let slot = match param {
            MachineParam::Inertia => &mut self.m,
            MachineParam::Damping => &mut self.d,
            MachineParam::Droop => &mut self.r,
            MachineParam::TurbineGain => &mut self.k_g,
            MachineParam::TurbineTimeConstant => &mut self.t_g,
            MachineParam::AvrGain => &mut self.k_a,
            MachineParam::AvrTimeConstant => &mut self.t_a,
            MachineParam::Reactance => &mut self.x,
        };
        *slot = value;
    }

    pub fn validate(&self, machine: usize) -> Result<(), PlantError> {
        use MachineParam::*;
        for p in [
            Inertia,
            Damping,
            Droop,
            TurbineGain,
            TurbineTimeConstant,
            AvrGain,
            AvrTimeConstant,
            Reactance,
        ] {
            check_param(
                &format!("sm{machine}.{}", p.name()),
                self.get(p),
                p.allows_zero(),
            )?;
        }
        Ok(())
    }
}

fn check_param(name: &str, value: f64, allow_zero: bool) -> Result<(), PlantError> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        Err(PlantError::InvalidParam {
            name: name.to_string(),
            value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    /// Line reactance from each machine terminal to the load bus (pu).
    pub x_line: [f64; 2],
    /// Tie reactance to the main grid (pu).
    pub x_tie: f64,
    /// Main grid voltage magnitude (pu).
    pub v_grid: f64,
    /// Load demand at 1 pu voltage.
    pub p_load: f64,
    pub q_load: f64,
    pub base_freq_hz: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            x_line: [0.1, 0.15],
            x_tie: 0.25,
            v_grid: 1.0,
            p_load: 1.0,
            q_load: 0.35,
            base_freq_hz: 60.0,
        }
    }
}

/// Grid-connected operating point the initial state is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dispatch {
    /// Electrical power of each machine (pu).
    pub p: [f64; 2],
    /// Terminal voltage magnitude of each machine (pu).
    pub v: [f64; 2],
}

impl Default for Dispatch {
    fn default() -> Self {
        Self {
            p: [0.4, 0.4],
            v: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    pub sm1: MachineParams,
    pub sm2: MachineParams,
    pub network: NetworkParams,
    pub dispatch: Dispatch,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self::new(MachineParams::default(), MachineParams::default())
    }
}

impl PlantParams {
    pub fn new(sm1: MachineParams, sm2: MachineParams) -> Self {
        Self {
            sm1,
            sm2,
            network: NetworkParams::default(),
            dispatch: Dispatch::default(),
        }
    }

    /// Machine 0 is SM1, machine 1 is SM2.
    pub fn machine(&self, machine: usize) -> &MachineParams {
        match machine {
            0 => &self.sm1,
            _ => &self.sm2,
        }
    }

    pub fn machine_mut(&mut self, machine: usize) -> &mut MachineParams {
        match machine {
            0 => &mut self.sm1,
            _ => &mut self.sm2,
        }
    }

    pub fn set_param(&mut self, machine: usize, param: MachineParam, value: f64) {
        self.machine_mut(machine).set(param, value);
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        self.sm1.validate(1)?;
        self.sm2.validate(2)?;
        let n = &self.network;
        check_param("network.x_line[0]", n.x_line[0], true)?;
        check_param("network.x_line[1]", n.x_line[1], true)?;
        check_param("network.x_tie", n.x_tie, false)?;
        check_param("network.v_grid", n.v_grid, false)?;
        check_param("network.p_load", n.p_load, true)?;
        if !n.q_load.is_finite() {
            return Err(PlantError::InvalidParam {
                name: "network.q_load".into(),
                value: n.q_load,
            });
        }
        check_param("network.base_freq_hz", n.base_freq_hz, false)?;
        for i in 0..2 {
            if !self.dispatch.p[i].is_finite() {
                return Err(PlantError::InvalidParam {
                    name: format!("dispatch.p[{i}]"),
                    value: self.dispatch.p[i],
                });
            }
            check_param(&format!("dispatch.v[{i}]"), self.dispatch.v[i], false)?;
        }
        Ok(())
    }

    fn omega_base(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.network.base_freq_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MachineState {
    /// Rotor angle against the synchronous frame (rad).
    pub delta: f64,
    /// Speed deviation (pu).
    pub d_omega: f64,
    /// Mechanical power (pu).
    pub p_m: f64,
    /// Excitation, equal to the internal EMF magnitude (pu).
    pub e_fd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub machines: [MachineState; 2],
    pub grid_connected: bool,
    pub p_load: f64,
    pub q_load: f64,
}

pub const STATE_LEN: usize = 8;
const COMPONENTS: [&str; 4] = ["delta", "d_omega", "p_m", "e_fd"];

impl PlantState {
    pub fn to_vector(&self) -> [f64; STATE_LEN] {
        let mut x = [0.0; STATE_LEN];
        for (i, m) in self.machines.iter().enumerate() {
            x[4 * i..4 * i + 4].copy_from_slice(&[m.delta, m.d_omega, m.p_m, m.e_fd]);
        }
        x
    }

    pub fn with_vector(&self, x: &[f64; STATE_LEN]) -> Self {
        let mut out = *self;
        for (i, m) in out.machines.iter_mut().enumerate() {
            m.delta = x[4 * i];
            m.d_omega = x[4 * i + 1];
            m.p_m = x[4 * i + 2];
            m.e_fd = x[4 * i + 3];
        }
        out
    }

    pub fn component_name(index: usize) -> String {
        format!("sm{}.{}", index / 4 + 1, COMPONENTS[index % 4])
    }
}

/// Governor and AVR references holding the initial equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    pub p_ref: [f64; 2],
    pub v_set: [f64; 2],
}

/// Readings of both machines after one network solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantReading {
    pub machines: [Measurements; 2],
}

impl PlantReading {
    pub fn sm1(&self) -> Measurements {
        self.machines[0]
    }

    /// True when any terminal voltage has fallen below [`COLLAPSE_VOLTAGE`].
    pub fn collapsed(&self) -> bool {
        self.machines.iter().any(|m| m.v < COLLAPSE_VOLTAGE)
    }
}

pub fn measure(state: &PlantState, solution: &NetworkSolution) -> PlantReading {
    let reading = |i: usize| Measurements {
        omega: 1.0 + state.machines[i].d_omega,
        v: solution.terminal[i].norm(),
    };
    PlantReading {
        machines: [reading(0), reading(1)],
    }
}

/// Time derivative of the dynamic states in [`PlantState::to_vector`] order.
pub fn derivatives(
    state: &PlantState,
    commands: &ControlCommand,
    params: &PlantParams,
    setpoints: &Setpoints,
) -> Result<[f64; STATE_LEN], PlantError> {
    let solution = network_solve(state, params)?;
    let wb = params.omega_base();
    let mut dx = [0.0; STATE_LEN];
    for i in 0..2 {
        let mp = &params.machine(i);
        let ms = &state.machines[i];
        let (t_sec, u_sec) = if i == 0 {
            (commands.t_sec, commands.u_sec)
        } else {
            (0.0, 0.0)
        };
        let v_t = solution.terminal[i].norm();
        dx[4 * i] = wb * ms.d_omega;
        dx[4 * i + 1] = (ms.p_m - solution.p_e[i] - mp.d * ms.d_omega) / mp.m;
        dx[4 * i + 2] =
            (-ms.p_m + mp.k_g * (setpoints.p_ref[i] + t_sec - ms.d_omega / mp.r)) / mp.t_g;
        dx[4 * i + 3] = (-ms.e_fd + mp.k_a * (setpoints.v_set[i] + u_sec - v_t)) / mp.t_a;
    }
    Ok(dx)
}

/// One RK4 step with the commands held over the step.
pub fn integrate_step(
    state: &PlantState,
    commands: &ControlCommand,
    params: &PlantParams,
    setpoints: &Setpoints,
    dt: f64,
) -> Result<PlantState, PlantError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PlantError::InvalidStep(dt));
    }
    let check = |x: &[f64; STATE_LEN]| match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(PlantError::NonFinite(PlantState::component_name(i))),
        None => Ok(()),
    };
    let x = integrator::rk4_step(&state.to_vector(), dt, |x| {
        check(x)?;
        derivatives(&state.with_vector(x), commands, params, setpoints)
    })?;
    check(&x)?;
    Ok(state.with_vector(&x))
}

/// Machine states at which both machines deliver the dispatched power at the
/// dispatched terminal voltage while tied to the grid.
pub fn solve_equilibrium(params: &PlantParams) -> Result<PlantState, PlantError> {
    let mut state = PlantState {
        machines: [MachineState::default(); 2],
        grid_connected: true,
        p_load: params.network.p_load,
        q_load: params.network.q_load,
    };
    let apply = |state: &mut PlantState, x: &Vector4<f64>| {
        state.machines[0].delta = x[0];
        state.machines[1].delta = x[1];
        state.machines[0].e_fd = x[2];
        state.machines[1].e_fd = x[3];
    };
    let residual = |state: &PlantState| -> Result<Vector4<f64>, PlantError> {
        let s = network_solve(state, params)?;
        Ok(Vector4::new(
            s.p_e[0] - params.dispatch.p[0],
            s.p_e[1] - params.dispatch.p[1],
            s.terminal[0].norm() - params.dispatch.v[0],
            s.terminal[1].norm() - params.dispatch.v[1],
        ))
    };

    let mut x = Vector4::new(0.2, 0.2, 1.1, 1.1);
    let mut norm = f64::INFINITY;
    for _ in 0..50 {
        apply(&mut state, &x);
        let r = residual(&state)?;
        norm = r.amax();
        if norm < 1e-13 {
            break;
        }
        let mut jac = Matrix4::zeros();
        for k in 0..4 {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xp = x;
            xp[k] += h;
            let mut probe = state;
            apply(&mut probe, &xp);
            jac.set_column(k, &((residual(&probe)? - r) / h));
        }
        let dx = jac
            .lu()
            .solve(&(-r))
            .ok_or(PlantError::NoEquilibrium(norm))?;
        x += dx;
    }
    if norm.is_nan() || norm >= 1e-11 {
        return Err(PlantError::NoEquilibrium(norm));
    }
    apply(&mut state, &x);
    let s = network_solve(&state, params)?;
    for i in 0..2 {
        state.machines[i].p_m = s.p_e[i];
    }
    Ok(state)
}

/// Setpoints that make `state` a rest point of the governors and AVRs.
pub fn setpoints_for(state: &PlantState, params: &PlantParams) -> Result<Setpoints, PlantError> {
    let s = network_solve(state, params)?;
    let mut sp = Setpoints {
        p_ref: [0.0; 2],
        v_set: [0.0; 2],
    };
    for i in 0..2 {
        let mp = &params.machine(i);
        let ms = &state.machines[i];
        sp.p_ref[i] = ms.p_m / mp.k_g + ms.d_omega / mp.r;
        sp.v_set[i] = s.terminal[i].norm() + ms.e_fd / mp.k_a;
    }
    Ok(sp)
}

/// A running plant: parameters, setpoints and the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub params: PlantParams,
    pub setpoints: Setpoints,
    pub state: PlantState,
}

impl Plant {
    /// Plant at its grid-connected equilibrium.
    pub fn at_equilibrium(params: PlantParams) -> Result<Self, PlantError> {
        params.validate()?;
        let state = solve_equilibrium(&params)?;
        let setpoints = setpoints_for(&state, &params)?;
        Ok(Self {
            params,
            setpoints,
            state,
        })
    }

    pub fn network(&self) -> Result<NetworkSolution, PlantError> {
        network_solve(&self.state, &self.params)
    }

    pub fn derivatives(&self, commands: &ControlCommand) -> Result<[f64; STATE_LEN], PlantError> {
        derivatives(&self.state, commands, &self.params, &self.setpoints)
    }

    pub fn read(&self) -> Result<PlantReading, PlantError> {
        Ok(measure(&self.state, &self.network()?))
    }

    pub fn step(&mut self, commands: &ControlCommand, dt: f64) -> Result<(), PlantError> {
        self.state = integrate_step(&self.state, commands, &self.params, &self.setpoints, dt)?;
        Ok(())
    }

    /// Applies a topology, load or parameter change. Islanding an already
    /// islanded plant is a no-op.
    pub fn apply_event(&mut self, event: &Event) {
        match event.kind {
            EventKind::Islanding => self.state.grid_connected = false,
            EventKind::LoadStep { dp, dq } => {
                self.state.p_load += dp;
                self.state.q_load += dq;
            }
            EventKind::ParameterChange {
                machine,
                param,
                value,
            } => self.params.set_param(machine - 1, param, value),
        }
    }
}
