//! Steps the two-machine plant by hand through an islanding event with no
//! secondary control and prints the frequency and voltage dip.

use belbic_grid::controllers::ControlCommand;
use belbic_grid::plant::{
    integrate_step, measure, network_solve, setpoints_for, solve_equilibrium, PlantParams,
};

fn main() {
    let params = PlantParams::default();
    let mut state = solve_equilibrium(&params).unwrap();
    let setpoints = setpoints_for(&state, &params).unwrap();
    let dt = 0.001;
    for k in 0..=5000 {
        if k == 200 {
            state.grid_connected = false;
        }
        if k % 250 == 0 {
            let reading = measure(&state, &network_solve(&state, &params).unwrap());
            let sm1 = reading.sm1();
            println!(
                "t {:5.2} s  omega {:.6}  v {:.5}",
                k as f64 * dt,
                sm1.omega,
                sm1.v
            );
        }
        state = integrate_step(&state, &ControlCommand::zero(), &params, &setpoints, dt).unwrap();
    }
}
