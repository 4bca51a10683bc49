//! Workload specifications and the synthetic benchmark generator.

use serde::Serialize;

use crate::dvfs::TaskId;
use crate::error::{Error, Result};
use crate::platform::AlphaMemory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryClass {
    Reg,
    Ram,
    Flash,
}

impl MemoryClass {
    pub fn modifier(self, m: &AlphaMemory) -> f64 {
        match self {
            MemoryClass::Reg => m.reg,
            MemoryClass::Ram => m.ram,
            MemoryClass::Flash => m.flash,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reg" => Ok(MemoryClass::Reg),
            "ram" => Ok(MemoryClass::Ram),
            "flash" => Ok(MemoryClass::Flash),
            _ => Err(Error::UnknownScenario(format!("memory class '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MemoryClass::Reg => "reg",
            MemoryClass::Ram => "ram",
            MemoryClass::Flash => "flash",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MicroOp {
    Add,
    Mul,
    Div,
}

impl MicroOp {
    /// Switching-activity factor per instruction mix.
    pub fn alpha(self) -> f64 {
        match self {
            MicroOp::Add => 1.0,
            MicroOp::Mul => 1.15,
            MicroOp::Div => 1.3,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(MicroOp::Add),
            "mul" => Ok(MicroOp::Mul),
            "div" => Ok(MicroOp::Div),
            _ => Err(Error::UnknownScenario(format!("micro op '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MicroOp::Add => "add",
            MicroOp::Mul => "mul",
            MicroOp::Div => "div",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkKind {
    /// W cycles of frequency-scalable work plus a fixed busy wait of T ns.
    TwoComponent {
        scalable_cycles: u64,
        timebound_ns: u64,
    },
    /// Frame preparation, busy-polled SPI transfer, then idle air time.
    RadioSend { payload_bytes: u32 },
    /// Idle until the frame is on air, then SPI readout and processing.
    RadioRecv { payload_bytes: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub id: TaskId,
    pub alpha: f64,
    pub memory_class: MemoryClass,
    pub kind: WorkKind,
    /// Activation period; 0 reactivates back-to-back.
    pub period_ns: u64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            WorkKind::TwoComponent {
                scalable_cycles: 0,
                timebound_ns: 0,
            } => Err(Error::InvalidModel(format!(
                "task {} has neither scalable nor time-bound work",
                self.id
            ))),
            WorkKind::RadioSend { payload_bytes } | WorkKind::RadioRecv { payload_bytes }
                if payload_bytes > super::radio::MAX_PAYLOAD_BYTES =>
            {
                Err(Error::PayloadTooLarge(payload_bytes))
            }
            _ => Ok(()),
        }
    }
}

/// Per-activation budgets of the synthetic suite: a fully scalable task
/// spends `SUITE_CYCLES` of compute, a fully time-bound one waits
/// `SUITE_WAIT_NS`; everything in between mixes the two linearly.
pub const SUITE_CYCLES: f64 = 80_000.0;
pub const SUITE_WAIT_NS: f64 = 2_000_000.0;

/// `n` tasks sweeping the scalable fraction uniformly from 0.0 (pure wait)
/// to 1.0 (pure compute). Periods scale with n so the suite stays
/// schedulable on one core.
pub fn synth_benchmark(n: u32) -> Result<Vec<WorkloadSpec>> {
    if n < 2 {
        return Err(Error::InvalidModel(
            "synthetic suite needs at least two tasks".into(),
        ));
    }
    Ok((0..n)
        .map(|i| {
            let frac = i as f64 / (n - 1) as f64;
            WorkloadSpec {
                id: i,
                alpha: 1.0,
                memory_class: MemoryClass::Reg,
                kind: WorkKind::TwoComponent {
                    scalable_cycles: (frac * SUITE_CYCLES).round() as u64,
                    timebound_ns: ((1.0 - frac) * SUITE_WAIT_NS).round() as u64,
                },
                period_ns: n as u64 * 10_000_000,
            }
        })
        .collect())
}

/// Fig. 7-style pair: a compute-heavy producer and a wait-dominated
/// consumer sharing one core, both activated every 10 ms.
pub fn producer_consumer() -> Vec<WorkloadSpec> {
    vec![
        WorkloadSpec {
            id: 0,
            alpha: 1.0,
            memory_class: MemoryClass::Reg,
            kind: WorkKind::TwoComponent {
                scalable_cycles: 300_000,
                timebound_ns: 0,
            },
            period_ns: 10_000_000,
        },
        WorkloadSpec {
            id: 1,
            alpha: 1.0,
            memory_class: MemoryClass::Reg,
            kind: WorkKind::TwoComponent {
                scalable_cycles: 20_000,
                timebound_ns: 1_350_000,
            },
            period_ns: 10_000_000,
        },
    ]
}

pub fn micro(op: MicroOp, mem: MemoryClass) -> Vec<WorkloadSpec> {
    vec![WorkloadSpec {
        id: 0,
        alpha: op.alpha(),
        memory_class: mem,
        kind: WorkKind::TwoComponent {
            scalable_cycles: 100_000,
            timebound_ns: 0,
        },
        period_ns: 5_000_000,
    }]
}

pub fn radio(send: bool, payload_bytes: u32) -> Vec<WorkloadSpec> {
    vec![WorkloadSpec {
        id: 0,
        alpha: 1.0,
        memory_class: MemoryClass::Reg,
        kind: if send {
            WorkKind::RadioSend { payload_bytes }
        } else {
            WorkKind::RadioRecv { payload_bytes }
        },
        period_ns: 0,
    }]
}
