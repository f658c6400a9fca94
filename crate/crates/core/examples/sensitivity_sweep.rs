//! Sweeps the SM1 turbine gain over 0.5x, 1x and 2x for PID and BELBIC and
//! prints each controller's frequency MSE spread.

use belbic_grid::config::Config;
use belbic_grid::harness::{sensitivity_sweep, SweepTarget};
use belbic_grid::plant::MachineParam;

fn main() {
    let cfg = Config::default();
    let base = cfg.scenario_for(cfg.controller("none").unwrap());
    let controllers: Vec<_> = ["pid", "belbic"]
        .iter()
        .map(|n| {
            (
                n.to_string(),
                cfg.scenario_for(cfg.controller(n).unwrap()).controller,
            )
        })
        .collect();
    let table = sensitivity_sweep(
        &base,
        &controllers,
        MachineParam::TurbineGain,
        &[0.5, 1.0, 2.0],
        SweepTarget::Sm1,
    )
    .unwrap();
    for (name, _) in &controllers {
        let mse: Vec<f64> = table
            .cells
            .iter()
            .filter(|c| &c.controller == name)
            .map(|c| c.metrics.as_ref().unwrap().omega_sm1.mse)
            .collect();
        let spread = mse.iter().copied().fold(f64::MIN, f64::max)
            - mse.iter().copied().fold(f64::MAX, f64::min);
        let mse: Vec<String> = mse.iter().map(|x| format!("{x:.3e}")).collect();
        println!(
            "{name:7} frequency MSE {}  spread {spread:.3e}",
            mse.join(" / ")
        );
    }
}
