//! Named scenarios and the report builder around the engine.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::configurator::ClockState;
use crate::dvfs::{run_assessment, DvfsController, StatsTable, TaskId, WindowSpec};
use crate::error::{Error, Result};
use crate::platform::PlatformModel;
use crate::sim::energy::EnergyTrace;
use crate::sim::engine::{Engine, StopRule};
use crate::sim::workload::{self, MemoryClass, MicroOp, WorkloadSpec};
use crate::transitions::{
    explore_core_configs, set_policy, transition_to, Hooks, Policy, SourceKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    ProducerConsumer,
    SyntheticSuite(u32),
    RadioSend(u32),
    RadioRecv(u32),
    Micro(MicroOp, MemoryClass),
}

impl Scenario {
    pub fn name(&self) -> String {
        match self {
            Scenario::ProducerConsumer => "producer_consumer".into(),
            Scenario::SyntheticSuite(n) => format!("synthetic_suite({n})"),
            Scenario::RadioSend(p) => format!("radio_send({p})"),
            Scenario::RadioRecv(p) => format!("radio_recv({p})"),
            Scenario::Micro(op, mem) => format!("micro({}x{})", op.name(), mem.name()),
        }
    }

    pub fn workloads(&self) -> Result<Vec<WorkloadSpec>> {
        let specs = match *self {
            Scenario::ProducerConsumer => workload::producer_consumer(),
            Scenario::SyntheticSuite(n) => workload::synth_benchmark(n)?,
            Scenario::RadioSend(p) => workload::radio(true, p),
            Scenario::RadioRecv(p) => workload::radio(false, p),
            Scenario::Micro(op, mem) => workload::micro(op, mem),
        };
        for s in &specs {
            s.validate()?;
        }
        Ok(specs)
    }

    /// Traced activations per task; sized so every scenario finishes well
    /// inside the test-suite time budget.
    fn activations(&self) -> u64 {
        match self {
            Scenario::ProducerConsumer => 50,
            Scenario::SyntheticSuite(_) => 3,
            Scenario::RadioSend(_) | Scenario::RadioRecv(_) => 25,
            Scenario::Micro(..) => 50,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimOptions {
    pub dvfs: bool,
    pub policy: Policy,
    pub seed: u64,
    /// Pin the core to an explored configuration before the run
    /// (frequency and/or source kind); used for A/B comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pin_frequency: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pin_source: Option<SourceKind>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dvfs: false,
            policy: Policy::default(),
            seed: 0,
            pin_frequency: None,
            pin_source: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub id: TaskId,
    pub energy_j: f64,
    pub charge_c: f64,
    pub busy_ns: f64,
    pub idle_ns: f64,
    pub selected_hz: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Totals {
    pub energy_j: f64,
    pub charge_c: f64,
    pub duration_ns: f64,
    pub avg_current_a: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskDelta {
    pub id: TaskId,
    /// Average-power change vs the dvfs=off baseline, in percent
    /// (positive = reduction).
    pub avg_power_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineDeltas {
    pub total_energy_pct: f64,
    pub per_task: Vec<TaskDelta>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub platform: String,
    pub options: SimOptions,
    pub per_task: Vec<TaskReport>,
    pub totals: Totals,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_deltas: Option<BaselineDeltas>,
}

/// Seeded activation offsets. The synthetic suite staggers its tasks across
/// the hyperperiod with a little jitter; small scenarios start at zero.
fn activation_offsets(scenario: &Scenario, specs: &[WorkloadSpec], seed: u64) -> Vec<f64> {
    match scenario {
        Scenario::SyntheticSuite(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let slot = specs[0].period_ns as f64 / *n as f64;
            (0..specs.len())
                .map(|i| i as f64 * slot + rng.gen_range(0.0..slot / 4.0))
                .collect()
        }
        _ => vec![0.0; specs.len()],
    }
}

/// Assessment frequency ladder: distinct explored frequencies no lower than
/// an eighth of the fastest, subsampled to at most four points including the
/// endpoints.
fn assessment_ladder(freqs: &[u64]) -> Vec<u64> {
    let fmax = *freqs.last().unwrap();
    let hi: Vec<u64> = freqs.iter().copied().filter(|f| f * 8 >= fmax).collect();
    if hi.len() <= 4 {
        return hi;
    }
    let last = hi.len() - 1;
    let mut picks: Vec<u64> = (0..4).map(|k| hi[k * last / 3]).collect();
    picks.dedup();
    picks
}

pub fn run_scenario(
    platform: Arc<PlatformModel>,
    scenario: Scenario,
    options: &SimOptions,
) -> Result<(Report, EnergyTrace)> {
    let specs = scenario.workloads()?;
    let mut state = ClockState::new(Arc::clone(&platform))?;
    set_policy(&mut state, options.policy);
    let mut hooks = Hooks::new();

    if options.pin_frequency.is_some() || options.pin_source.is_some() {
        let explored = explore_core_configs(&mut state);
        let target = explored
            .iter()
            .find(|c| {
                options.pin_frequency.is_none_or(|f| c.frequency == f)
                    && options.pin_source.is_none_or(|s| c.source_kind == s)
            })
            .cloned()
            .ok_or(Error::Unreachable)?;
        transition_to(&mut state, &target, &mut hooks)?;
    }

    let offsets = activation_offsets(&scenario, &specs, options.seed);

    // Assessment happens before the traced run; its energy is not part of
    // the report, mirroring a one-off calibration pass.
    let mut ctrl = None;
    if options.dvfs {
        let mut c = DvfsController::new();
        for spec in &specs {
            c.set_task_alpha(
                spec.id,
                spec.alpha * spec.memory_class.modifier(&platform.energy.alpha_memory),
            );
        }
        let explored = explore_core_configs(&mut state);
        let mut freqs: Vec<u64> = explored.iter().map(|c| c.frequency).collect();
        freqs.dedup();
        let fmax = *freqs.last().unwrap();
        if let Scenario::SyntheticSuite(_) = scenario {
            // Long periods need a wider window; two activations at the two
            // span endpoints are enough for an exact two-component fit.
            let period = specs[0].period_ns;
            c.window = WindowSpec {
                max_activations: 2,
                max_window_ns: 4 * period,
            };
            let lo = freqs
                .iter()
                .copied()
                .find(|f| f * 10 >= fmax)
                .unwrap_or(fmax);
            c.candidate_frequencies = Some(vec![lo, fmax]);
        } else {
            c.candidate_frequencies = Some(assessment_ladder(&freqs));
        }
        let task_ids: Vec<TaskId> = specs.iter().map(|s| s.id).collect();
        let wspecs = specs.clone();
        let woffs = offsets.clone();
        let mut driver = move |st: &mut ClockState, stats: &mut StatsTable, window: WindowSpec| {
            let mut eng = Engine::new(&wspecs, &woffs);
            // Fixed-config window; workloads are pre-validated so the run
            // cannot fail.
            let _ = eng.run(st, None, Some(stats), None, StopRule::Window(window));
        };
        run_assessment(&mut c, &mut state, &mut hooks, &mut driver, &task_ids)?;
        ctrl = Some(c);
    }

    let mut trace = EnergyTrace::new(platform.energy.supply_voltage);
    let mut stats = StatsTable::new();
    let mut engine = Engine::new(&specs, &offsets);
    engine.run(
        &mut state,
        Some(&mut trace),
        Some(&mut stats),
        ctrl.as_mut().map(|c| (c, &mut hooks)),
        StopRule::WorkDone {
            activations: scenario.activations(),
        },
    )?;
    let duration_ns = engine.now_ns;

    let mut per_task = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let charge_c = trace.charge(Some(spec.id));
        let (mut busy_ns, mut idle_ns) = (0.0, 0.0);
        if let Some(ts) = stats.stats(spec.id) {
            // Sorted keys keep float accumulation order stable run to run.
            let mut keys: Vec<u64> = ts.samples.keys().copied().collect();
            keys.sort_unstable();
            for k in keys {
                busy_ns += ts.samples[&k].busy_ns;
                idle_ns += ts.samples[&k].idle_ns;
            }
        }
        per_task.push(TaskReport {
            id: spec.id,
            energy_j: charge_c * platform.energy.supply_voltage,
            charge_c,
            busy_ns,
            idle_ns,
            selected_hz: engine.tasks[i].selected_hz,
        });
    }

    let charge_c = trace.total_charge();
    let totals = Totals {
        energy_j: charge_c * platform.energy.supply_voltage,
        charge_c,
        duration_ns,
        avg_current_a: if duration_ns > 0.0 {
            charge_c / (duration_ns * 1e-9)
        } else {
            0.0
        },
    };

    let baseline_deltas = if options.dvfs {
        let base_options = SimOptions {
            dvfs: false,
            ..*options
        };
        let (base, _) = run_scenario(Arc::clone(&platform), scenario, &base_options)?;
        let pct = |new: f64, old: f64| {
            if old > 0.0 {
                (1.0 - new / old) * 100.0
            } else {
                0.0
            }
        };
        let per_task_deltas = per_task
            .iter()
            .zip(&base.per_task)
            .map(|(now, was)| TaskDelta {
                id: now.id,
                avg_power_pct: pct(
                    now.energy_j / totals.duration_ns,
                    was.energy_j / base.totals.duration_ns,
                ),
            })
            .collect();
        Some(BaselineDeltas {
            total_energy_pct: pct(totals.energy_j, base.totals.energy_j),
            per_task: per_task_deltas,
        })
    } else {
        None
    };

    let report = Report {
        scenario: scenario.name(),
        platform: platform.name.clone(),
        options: *options,
        per_task,
        totals,
        baseline_deltas,
    };
    Ok((report, trace))
}
