//! Cooperative discrete-event engine. Tasks are activated periodically, run
//! to completion, and the DVFS controller (when attached) is consulted at
//! every dispatch boundary.

use crate::configurator::ClockState;
use crate::dvfs::{
    record_activation, record_slice, select_frequency, DvfsController, StatsTable, WindowSpec,
};
use crate::error::{Error, Result};
use crate::sim::energy::{enabled_gate_current, instantaneous_current, EnergyTrace};
use crate::sim::radio::radio_model;
use crate::sim::workload::{WorkKind, WorkloadSpec};
use crate::transitions::{current_core_config, transition_to, CoreConfig, Hooks};

#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// Run until every task completed this many activations (overload makes
    /// activations slip instead of dropping work).
    WorkDone { activations: u64 },
    /// Assessment window: every task sampled `max_activations` times, byte
    /// bounded by wall time.
    Window(WindowSpec),
}

struct Segment {
    dur_ns: f64,
    active: bool,
}

pub struct TaskRt {
    pub spec: WorkloadSpec,
    /// Next activation time; slips forward under overload.
    next_ns: f64,
    /// Nominal schedule anchor, advanced by the period.
    sched_ns: f64,
    pub completed: u64,
    pub last_completion_ns: f64,
    pub selected_hz: u64,
}

pub struct Engine {
    pub now_ns: f64,
    pub tasks: Vec<TaskRt>,
    /// Dispatch overhead in core cycles, charged to the system.
    pub ctx_switch_cycles: u64,
}

impl Engine {
    pub fn new(specs: &[WorkloadSpec], offsets_ns: &[f64]) -> Self {
        let tasks = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let off = offsets_ns.get(i).copied().unwrap_or(0.0);
                TaskRt {
                    spec: *spec,
                    next_ns: off,
                    sched_ns: off,
                    completed: 0,
                    last_completion_ns: 0.0,
                    selected_hz: 0,
                }
            })
            .collect();
        Self {
            now_ns: 0.0,
            tasks,
            ctx_switch_cycles: 200,
        }
    }

    fn segments(state: &ClockState, spec: &WorkloadSpec, core_hz: u64) -> Result<Vec<Segment>> {
        Ok(match spec.kind {
            WorkKind::TwoComponent {
                scalable_cycles,
                timebound_ns,
            } => vec![Segment {
                dur_ns: scalable_cycles as f64 / core_hz as f64 * 1e9 + timebound_ns as f64,
                active: true,
            }],
            WorkKind::RadioSend { payload_bytes } => {
                let ph = radio_model(payload_bytes, core_hz, spi_prescaler(state))?;
                vec![
                    Segment {
                        dur_ns: ph.send_compute_ns + ph.spi_ns,
                        active: true,
                    },
                    Segment {
                        dur_ns: ph.air_ns,
                        active: false,
                    },
                ]
            }
            WorkKind::RadioRecv { payload_bytes } => {
                let ph = radio_model(payload_bytes, core_hz, spi_prescaler(state))?;
                vec![
                    Segment {
                        dur_ns: ph.air_ns,
                        active: false,
                    },
                    Segment {
                        dur_ns: ph.spi_ns + ph.recv_compute_ns,
                        active: true,
                    },
                ]
            }
        })
    }

    pub fn run(
        &mut self,
        state: &mut ClockState,
        mut trace: Option<&mut EnergyTrace>,
        mut stats: Option<&mut StatsTable>,
        mut dvfs: Option<(&mut DvfsController, &mut Hooks)>,
        stop: StopRule,
    ) -> Result<()> {
        let start_ns = self.now_ns;
        let platform = state.platform.clone();
        loop {
            let target_done = match stop {
                StopRule::WorkDone { activations } => activations,
                StopRule::Window(w) => w.max_activations,
            };
            if let StopRule::Window(w) = stop {
                if self.now_ns - start_ns >= w.max_window_ns as f64 {
                    break;
                }
            }
            // Earliest pending activation among unfinished tasks; ties go to
            // the lower task id.
            let mut pick: Option<usize> = None;
            for (i, t) in self.tasks.iter().enumerate() {
                if t.completed >= target_done {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some(j) => {
                        (t.next_ns, t.spec.id) < (self.tasks[j].next_ns, self.tasks[j].spec.id)
                    }
                };
                if better {
                    pick = Some(i);
                }
            }
            let Some(i) = pick else { break };

            // System idle until the activation becomes due.
            let t_start = self.tasks[i].next_ns.max(self.now_ns);
            if t_start > self.now_ns {
                if let Some(tr) = trace.as_deref_mut() {
                    let hz = state.clock_frequency(platform.core)?;
                    let cur = instantaneous_current(
                        &platform.energy,
                        0.0,
                        hz,
                        &platform.voltage_ranges[state.voltage_range],
                        false,
                    );
                    tr.add(self.now_ns, t_start - self.now_ns, cur, hz, None);
                }
                self.now_ns = t_start;
            }

            let task_id = self.tasks[i].spec.id;

            // Dispatch-boundary frequency selection.
            if let Some((ctrl, hooks)) = dvfs.as_mut() {
                match select_frequency(ctrl, state, task_id) {
                    Ok(decision) => {
                        let here = current_core_config(state)?;
                        if key(&here) != key(&decision.target) {
                            let report = transition_to(state, &decision.target, hooks)?;
                            if let Some(tr) = trace.as_deref_mut() {
                                let hz = state.clock_frequency(platform.core)?;
                                let cur = instantaneous_current(
                                    &platform.energy,
                                    0.0,
                                    hz,
                                    &platform.voltage_ranges[state.voltage_range],
                                    false,
                                );
                                tr.add(self.now_ns, report.elapsed_ns as f64, cur, hz, None);
                            }
                            self.now_ns += report.elapsed_ns as f64;
                        }
                    }
                    // Tasks without usable measurements run where the core is.
                    Err(
                        Error::NotAssessed(_) | Error::NoData(_) | Error::InsufficientFrequencies,
                    ) => {}
                    Err(e) => return Err(e),
                }
            }

            let core_hz = state.clock_frequency(platform.core)?;
            let range = &platform.voltage_ranges[state.voltage_range];
            let spec = self.tasks[i].spec;
            let alpha_eff = spec.alpha * spec.memory_class.modifier(&platform.energy.alpha_memory);
            let gates = enabled_gate_current(state);
            self.tasks[i].selected_hz = core_hz;

            // Context switch: system work at the incoming frequency.
            let ctx_ns = self.ctx_switch_cycles as f64 / core_hz as f64 * 1e9;
            if let Some(tr) = trace.as_deref_mut() {
                let cur = instantaneous_current(&platform.energy, 1.0, core_hz, range, true) + gates;
                tr.add(self.now_ns, ctx_ns, cur, core_hz, None);
            }
            self.now_ns += ctx_ns;

            let mut busy_ns = 0.0;
            let mut wait_ns = 0.0;
            for seg in Self::segments(state, &spec, core_hz)? {
                if let Some(tr) = trace.as_deref_mut() {
                    let cur = instantaneous_current(
                        &platform.energy,
                        alpha_eff,
                        core_hz,
                        range,
                        seg.active,
                    ) + if seg.active { gates } else { 0.0 };
                    let owner = if seg.active { Some(task_id) } else { None };
                    tr.add(self.now_ns, seg.dur_ns, cur, core_hz, owner);
                }
                if seg.active {
                    busy_ns += seg.dur_ns;
                } else {
                    wait_ns += seg.dur_ns;
                }
                self.now_ns += seg.dur_ns;
            }

            if let Some(st) = stats.as_deref_mut() {
                let gap = (t_start - self.tasks[i].last_completion_ns).max(0.0);
                record_slice(st, task_id, core_hz, busy_ns, gap + wait_ns, 1)?;
                record_activation(st, task_id, core_hz);
            }

            let t = &mut self.tasks[i];
            t.last_completion_ns = self.now_ns;
            t.completed += 1;
            if t.spec.period_ns > 0 {
                t.sched_ns += t.spec.period_ns as f64;
                if t.sched_ns < self.now_ns {
                    t.sched_ns = self.now_ns;
                }
                t.next_ns = t.sched_ns;
            } else {
                t.next_ns = self.now_ns;
            }
        }
        Ok(())
    }
}

fn key(c: &CoreConfig) -> (u64, crate::transitions::SourceKind, crate::model::ClockId) {
    (c.frequency, c.source_kind, c.scaling_point)
}

fn spi_prescaler(state: &ClockState) -> u64 {
    state
        .platform
        .clock_by_name("spi_presc")
        .ok()
        .and_then(|id| state.entry(id).scale)
        .unwrap_or(1)
}
