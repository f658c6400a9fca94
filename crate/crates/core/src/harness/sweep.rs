use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, ControllerSpec, HarnessError, Metrics, Scenario};
use crate::controllers::ControllerKind;
use crate::plant::MachineParam;

/// Which machines a swept parameter is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    #[default]
    Sm1,
    Both,
}

impl SweepTarget {
    fn machines(self) -> &'static [usize] {
        match self {
            Self::Sm1 => &[0],
            Self::Both => &[0, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// Multiplier on the nominal parameter value.
    pub multiplier: f64,
    /// Resulting parameter value on SM1.
    pub value: f64,
    pub controller: String,
    pub kind: ControllerKind,
    pub metrics: Option<Metrics>,
    /// Set when the run faulted or could not be configured.
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: MachineParam,
    pub target: SweepTarget,
    pub cells: Vec<SweepCell>,
}

/// Sweepable parameters.
pub const SWEEP_PARAMS: [MachineParam; 4] = [
    MachineParam::AvrGain,
    MachineParam::AvrTimeConstant,
    MachineParam::TurbineGain,
    MachineParam::TurbineTimeConstant,
];

/// Runs every `(multiplier, controller)` cell with the controllers' settings
/// untouched. Cells run in parallel on the current rayon pool; the table is
/// ordered by multiplier, then controller, regardless of scheduling.
pub fn sensitivity_sweep(
    base: &Scenario,
    controllers: &[(String, ControllerSpec)],
    param: MachineParam,
    multipliers: &[f64],
    target: SweepTarget,
) -> Result<SweepTable, HarnessError> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(HarnessError::Config(format!(
            "sweep parameter must be one of K_a, T_a, K_G, T_G, got {}",
            param.name()
        )));
    }
    if multipliers.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one value".into(),
        ));
    }
    if controllers.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one controller".into(),
        ));
    }
    if let Some(m) = multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(HarnessError::Config(format!(
            "sweep multiplier must be > 0, got {m}"
        )));
    }

    let jobs: Vec<(f64, &String, &ControllerSpec)> = multipliers
        .iter()
        .flat_map(|&m| controllers.iter().map(move |(name, spec)| (m, name, spec)))
        .collect();

    let cells = jobs
        .par_iter()
        .map(|&(multiplier, name, spec)| {
            let mut scenario = base.clone();
            scenario.controller = spec.clone();
            for &i in target.machines() {
                let nominal = base.plant.machine(i).get(param);
                scenario.plant.set_param(i, param, nominal * multiplier);
            }
            let value = scenario.plant.sm1.get(param);
            let (metrics, fault) = match run_scenario(&scenario) {
                Ok(r) => {
                    let fault = r
                        .simulation_fault()
                        .map(|f| format!("t={}: {}", f.time, f.message));
                    (if fault.is_none() { r.metrics } else { None }, fault)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            SweepCell {
                multiplier,
                value,
                controller: name.clone(),
                kind: spec.kind(),
                metrics,
                fault,
            }
        })
        .collect();

    Ok(SweepTable {
        param,
        target,
        cells,
    })
}
