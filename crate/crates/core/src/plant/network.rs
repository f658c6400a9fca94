//! Algebraic network: two machine EMFs behind reactance feeding a common
//! constant-impedance load bus, optionally tied to an infinite bus.
//!
//! The network is linear, so the load-bus voltage is a direct nodal solve.

use num_complex::Complex64;

use super::{PlantError, PlantParams, PlantState};

/// Power balance tolerance enforced on every solve (pu).
pub const POWER_BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSolution {
    pub load_bus: Complex64,
    /// Terminal voltage phasor of each machine.
    pub terminal: [Complex64; 2],
    /// Electrical power delivered by each machine.
    pub p_e: [f64; 2],
    pub q_e: [f64; 2],
    /// Power injected by the infinite bus (0 when islanded).
    pub p_grid: f64,
    pub q_grid: f64,
    pub p_load: f64,
    pub q_load: f64,
}

impl NetworkSolution {
    /// `sum(P_e) + P_grid - P_load`. Branches are lossless reactances.
    pub fn power_mismatch(&self) -> f64 {
        self.p_e[0] + self.p_e[1] + self.p_grid - self.p_load
    }
}

pub fn internal_emf(state: &PlantState, machine: usize) -> Complex64 {
    let m = &state.machines[machine];
    Complex64::from_polar(m.e_fd, m.delta)
}

pub fn network_solve(
    state: &PlantState,
    params: &PlantParams,
) -> Result<NetworkSolution, PlantError> {
    let j = Complex64::i();
    let net = &params.network;
    let emf = [internal_emf(state, 0), internal_emf(state, 1)];
    let branch = [
        j * (params.sm1.x + net.x_line[0]),
        j * (params.sm2.x + net.x_line[1]),
    ];
    // constant impedance load specified at 1 pu voltage
    let y_load = Complex64::new(state.p_load, -state.q_load);
    let grid = Complex64::new(net.v_grid, 0.0);
    let tie = j * net.x_tie;

    let mut y_total = y_load + branch[0].inv() + branch[1].inv();
    let mut injection = emf[0] / branch[0] + emf[1] / branch[1];
    if state.grid_connected {
        y_total += tie.inv();
        injection += grid / tie;
    }
    if y_total.norm().is_nan() || y_total.norm() <= 1e-12 {
        return Err(PlantError::SingularNetwork);
    }
    let v_load = injection / y_total;

    let mut terminal = [Complex64::default(); 2];
    let mut p_e = [0.0; 2];
    let mut q_e = [0.0; 2];
    for i in 0..2 {
        let current = (emf[i] - v_load) / branch[i];
        let s = emf[i] * current.conj();
        terminal[i] = emf[i] - j * params.machine(i).x * current;
        p_e[i] = s.re;
        q_e[i] = s.im;
    }
    let (p_grid, q_grid) = if state.grid_connected {
        let s = grid * ((grid - v_load) / tie).conj();
        (s.re, s.im)
    } else {
        (0.0, 0.0)
    };
    let s_load = v_load * (y_load * v_load).conj();

    let solution = NetworkSolution {
        load_bus: v_load,
        terminal,
        p_e,
        q_e,
        p_grid,
        q_grid,
        p_load: s_load.re,
        q_load: s_load.im,
    };
    let finite = [
        v_load.re, v_load.im, p_e[0], p_e[1], q_e[0], q_e[1], p_grid, q_grid,
    ]
    .iter()
    .all(|x| x.is_finite());
    if !finite {
        return Err(PlantError::SingularNetwork);
    }
    let mismatch = solution.power_mismatch();
    if mismatch.abs() > POWER_BALANCE_TOL {
        return Err(PlantError::PowerImbalance(mismatch));
    }
    Ok(solution)
}
