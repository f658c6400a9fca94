//! Tunes a detuned PID on a shortened islanding run with a small budget and
//! prints the improvement over the starting point.

use belbic_grid::config::{Config, ControllerEntry};
use belbic_grid::controllers::{PidConfig, PidGains};
use belbic_grid::harness::{tune_gains, Scenario, TuneSettings};

fn main() {
    let cfg = Config::default();
    let detuned = PidConfig::new(
        PidGains {
            kp: 1.0,
            ki: 10.0,
            kd: 0.001,
        },
        PidGains {
            kp: 20.0,
            ki: 50.0,
            kd: 0.01,
        },
    );
    let scenario = Scenario {
        horizon: 5.0,
        ..cfg.scenario_for(&ControllerEntry::pid("pid", detuned))
    };
    let settings = TuneSettings {
        budget: 60,
        random_samples: 20,
        seed: 11,
        ..TuneSettings::default()
    };
    let out = tune_gains(&scenario, &settings).unwrap();
    println!("start score {:.4e}", out.score_trace[0]);
    println!(
        "best score  {:.4e} after {} evaluations",
        out.score, out.evaluations
    );
    for (name, value) in &out.params {
        println!("  {name} = {value}");
    }
}
