//! Supply-referred current model and the piecewise-constant energy trace.

use std::collections::BTreeMap;

use crate::configurator::ClockState;
use crate::dvfs::TaskId;
use crate::platform::{EnergyModelParams, VoltageRange};

/// Supply current in amperes at the given operating point. Active spans
/// draw the dynamic term αCV²f referred to the measurement supply; idle
/// spans draw the static current only (the core sleeps with the tree
/// stopped).
pub fn instantaneous_current(
    params: &EnergyModelParams,
    alpha: f64,
    core_hz: u64,
    range: &VoltageRange,
    active: bool,
) -> f64 {
    if active {
        let v = range.core_voltage;
        alpha * params.capacitance_eff * v * v * core_hz as f64 / params.supply_voltage
            + params.static_current_a
    } else {
        params.static_current_a
    }
}

/// Extra supply current drawn by enabled gateable clocks (oscillators,
/// PLLs). Charged over active spans only; sleep stops these branches.
pub fn enabled_gate_current(state: &ClockState) -> f64 {
    state
        .topology()
        .iter()
        .filter(|e| e.enabled && state.platform.clock(e.clock).caps.gateable)
        .map(|e| state.platform.enable_current_a[e.clock.index()])
        .sum()
}

/// One piecewise-constant segment: `current_a` flows from `time_ns` until
/// the next sample's timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub time_ns: f64,
    pub current_a: f64,
    pub core_hz: u64,
    /// Running task; `None` covers scheduler time and system idle.
    pub task: Option<TaskId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChargeTotal {
    pub charge_c: f64,
    pub time_ns: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub supply_voltage: f64,
    pub samples: Vec<TraceSample>,
    /// Charge per task (`None` = system), keyed deterministically.
    pub totals: BTreeMap<Option<TaskId>, ChargeTotal>,
}

impl EnergyTrace {
    pub fn new(supply_voltage: f64) -> Self {
        Self {
            supply_voltage,
            samples: Vec::new(),
            totals: BTreeMap::new(),
        }
    }

    pub fn add(
        &mut self,
        start_ns: f64,
        dur_ns: f64,
        current_a: f64,
        core_hz: u64,
        task: Option<TaskId>,
    ) {
        if dur_ns <= 0.0 {
            return;
        }
        self.samples.push(TraceSample {
            time_ns: start_ns,
            current_a,
            core_hz,
            task,
        });
        let t = self.totals.entry(task).or_default();
        t.charge_c += current_a * dur_ns * 1e-9;
        t.time_ns += dur_ns;
    }

    pub fn charge(&self, task: Option<TaskId>) -> f64 {
        self.totals.get(&task).map_or(0.0, |t| t.charge_c)
    }

    pub fn total_charge(&self) -> f64 {
        self.totals.values().map(|t| t.charge_c).sum()
    }

    pub fn energy(&self, task: Option<TaskId>) -> f64 {
        self.charge(task) * self.supply_voltage
    }

    pub fn total_energy(&self) -> f64 {
        self.total_charge() * self.supply_voltage
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("time_ns,current_a,core_hz,task\n");
        for s in &self.samples {
            let task = s.task.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.time_ns, s.current_a, s.core_hz, task
            ));
        }
        out
    }
}
