//! Runs the default islanding scenario with the tuned BELBIC controller and
//! prints the headline metrics for SM1.

use belbic_grid::config::Config;
use belbic_grid::harness::run_scenario;

fn main() {
    let cfg = Config::default();
    let scenario = cfg.scenario_for(cfg.controller("belbic").unwrap());
    let result = run_scenario(&scenario).unwrap();
    let m = result.metrics.unwrap();
    println!("{} samples over {} s", result.trace.len(), scenario.horizon);
    println!(
        "frequency MSE {:.4e}, settling {:?} s",
        m.omega_sm1.mse, m.omega_sm1.settling_time
    );
    println!(
        "voltage   MSE {:.4e}, settling {:?} s",
        m.v_sm1.mse, m.v_sm1.settling_time
    );
    println!("mean |command| {:.4e}", m.mean_abs_command);
}
