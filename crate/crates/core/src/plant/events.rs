use serde::{Deserialize, Serialize};

/// Machine parameters that can be rewritten by an event or swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MachineParam {
    #[serde(rename = "M")]
    Inertia,
    #[serde(rename = "D")]
    Damping,
    #[serde(rename = "R")]
    Droop,
    #[serde(rename = "K_G")]
    TurbineGain,
    #[serde(rename = "T_G")]
    TurbineTimeConstant,
    #[serde(rename = "K_a")]
    AvrGain,
    #[serde(rename = "T_a")]
    AvrTimeConstant,
    #[serde(rename = "X")]
    Reactance,
}

impl MachineParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Inertia => "M",
            Self::Damping => "D",
            Self::Droop => "R",
            Self::TurbineGain => "K_G",
            Self::TurbineTimeConstant => "T_G",
            Self::AvrGain => "K_a",
            Self::AvrTimeConstant => "T_a",
            Self::Reactance => "X",
        }
    }

    /// Damping may be zero; every other parameter must stay strictly positive.
    pub fn allows_zero(self) -> bool {
        matches!(self, Self::Damping)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Opens the tie to the main grid.
    Islanding,
    /// Adds to the load demand (pu at 1 pu voltage).
    LoadStep { dp: f64, dq: f64 },
    /// Rewrites one machine parameter. `machine` is 1 or 2.
    ParameterChange {
        machine: usize,
        param: MachineParam,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEvent", into = "RawEvent")]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn islanding(time: f64) -> Self {
        Self {
            time,
            kind: EventKind::Islanding,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EventKind::Islanding => "islanding",
            EventKind::LoadStep { .. } => "load_step",
            EventKind::ParameterChange { .. } => "parameter_change",
        }
    }
}

/// Flat on-disk form of an event.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    time: f64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    machine: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<MachineParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
}

impl TryFrom<RawEvent> for Event {
    type Error = String;

    fn try_from(raw: RawEvent) -> Result<Self, String> {
        let extra = |names: &[&str]| -> Result<(), String> {
            let given = [
                ("dp", raw.dp.is_some()),
                ("dq", raw.dq.is_some()),
                ("machine", raw.machine.is_some()),
                ("param", raw.param.is_some()),
                ("value", raw.value.is_some()),
            ];
            match given.iter().find(|(n, set)| *set && !names.contains(n)) {
                Some((n, _)) => Err(format!(
                    "field `{n}` is not valid for a `{}` event",
                    raw.kind
                )),
                None => Ok(()),
            }
        };
        let kind = match raw.kind.as_str() {
            "islanding" => {
                extra(&[])?;
                EventKind::Islanding
            }
            "load_step" => {
                extra(&["dp", "dq"])?;
                EventKind::LoadStep {
                    dp: raw.dp.unwrap_or(0.0),
                    dq: raw.dq.unwrap_or(0.0),
                }
            }
            "parameter_change" => {
                extra(&["machine", "param", "value"])?;
                let missing = |n: &str| format!("`parameter_change` event needs `{n}`");
                EventKind::ParameterChange {
                    machine: raw.machine.ok_or_else(|| missing("machine"))?,
                    param: raw.param.ok_or_else(|| missing("param"))?,
                    value: raw.value.ok_or_else(|| missing("value"))?,
                }
            }
            other => return Err(format!(
                "unknown event kind `{other}`, expected islanding, load_step or parameter_change"
            )),
        };
        Ok(Event {
            time: raw.time,
            kind,
        })
    }
}

impl From<Event> for RawEvent {
    fn from(event: Event) -> Self {
        let mut raw = RawEvent {
            time: event.time,
            kind: event.kind_name().to_string(),
            dp: None,
            dq: None,
            machine: None,
            param: None,
            value: None,
        };
        match event.kind {
            EventKind::Islanding => {}
            EventKind::LoadStep { dp, dq } => {
                raw.dp = Some(dp);
                raw.dq = Some(dq);
            }
            EventKind::ParameterChange {
                machine,
                param,
                value,
            } => {
                raw.machine = Some(machine);
                raw.param = Some(param);
                raw.value = Some(value);
            }
        }
        raw
    }
}
