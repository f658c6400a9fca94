//! Runs every controller in the default configuration in parallel and prints
//! the ranked comparison table as CSV.

use belbic_grid::config::Config;
use belbic_grid::harness::artifacts::{rank_rows, write_compare_csv};
use belbic_grid::harness::run_scenario;
use rayon::prelude::*;

fn main() {
    let cfg = Config::default();
    let rows = cfg
        .controllers
        .par_iter()
        .map(|entry| {
            let r = run_scenario(&cfg.scenario_for(entry)).unwrap();
            let fault = r.faults.first().map(|f| f.message.clone());
            (entry.name.clone(), entry.kind, r.metrics, fault)
        })
        .collect();
    write_compare_csv(std::io::stdout(), &rank_rows(rows)).unwrap();
}
