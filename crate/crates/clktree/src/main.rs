//! Command-line front end: tree inspection, exploration, transitions,
//! assessment and scenario simulation with machine-readable outputs.

use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clktree::configurator::ClockState;
use clktree::dvfs::{run_assessment, DvfsController, StatsTable, TaskId, WindowSpec};
use clktree::error::{Error, Result};
use clktree::model::ClockId;
use clktree::platform::{get_platform, PlatformModel};
use clktree::sim::{
    run_scenario, Engine, MemoryClass, MicroOp, Scenario, SimOptions, StopRule, WorkloadSpec,
};
use clktree::transitions::{
    execute_plan, explore_core_configs, plan_transition, set_policy, Hooks, Policy, SourceKind,
};

#[derive(Parser)]
#[command(name = "clktree", version, about = "Clock-tree exploration, safe transitions and DVFS simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Lv,
    Ff,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Lv => Policy::Lv,
            PolicyArg::Ff => Policy::Ff,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Rc,
    Crystal,
    PllFromRc,
    PllFromCrystal,
}

impl From<SourceArg> for SourceKind {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Rc => SourceKind::Rc,
            SourceArg::Crystal => SourceKind::Crystal,
            SourceArg::PllFromRc => SourceKind::PllFromRc,
            SourceArg::PllFromCrystal => SourceKind::PllFromCrystal,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: String,
    /// Payload bytes for the radio scenarios.
    #[arg(long, default_value_t = 64)]
    payload: u32,
    /// Task count for the synthetic suite.
    #[arg(long, default_value_t = 100)]
    tasks: u32,
    /// Instruction mix for the micro scenario.
    #[arg(long, default_value = "add")]
    op: String,
    /// Memory class for the micro scenario.
    #[arg(long, default_value = "reg")]
    mem: String,
}

impl ScenarioArgs {
    fn parse(&self) -> Result<Scenario> {
        match self.scenario.as_str() {
            "producer_consumer" => Ok(Scenario::ProducerConsumer),
            "synthetic_suite" => Ok(Scenario::SyntheticSuite(self.tasks)),
            "radio_send" => Ok(Scenario::RadioSend(self.payload)),
            "radio_recv" => Ok(Scenario::RadioRecv(self.payload)),
            "micro" => Ok(Scenario::Micro(
                MicroOp::parse(&self.op)?,
                MemoryClass::parse(&self.mem)?,
            )),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the clock tree with the current topology.
    Tree {
        #[arg(long)]
        platform: String,
    },
    /// Print a clock's effective frequency and settings.
    Get {
        #[arg(long)]
        platform: String,
        #[arg(long)]
        clock: String,
    },
    /// Change a scaler value, mux parent or gate state.
    Set {
        #[arg(long)]
        platform: String,
        #[arg(long)]
        clock: String,
        /// Logical scaler value (frequency for sources, factor for scalers).
        #[arg(long, conflicts_with_all = ["parent", "enabled"])]
        value: Option<u64>,
        #[arg(long, conflicts_with = "enabled")]
        parent: Option<String>,
        #[arg(long)]
        enabled: Option<bool>,
    },
    /// List every reachable core configuration.
    Explore {
        #[arg(long)]
        platform: String,
        #[arg(long)]
        json: bool,
    },
    /// Plan and execute a transition to an explored configuration.
    Transition {
        #[arg(long)]
        platform: String,
        /// Index into the `explore` table.
        #[arg(long)]
        to: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Lv)]
        policy: PolicyArg,
    },
    /// Run one assessment pass and print the PU records.
    Assess {
        #[arg(long)]
        platform: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate a scenario and emit the energy report (and trace).
    Simulate {
        #[arg(long)]
        platform: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = Switch::Off)]
        dvfs: Switch,
        #[arg(long, value_enum, default_value_t = PolicyArg::Lv)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pin the core frequency before the run.
        #[arg(long)]
        pin_frequency: Option<u64>,
        /// Pin the core clock source kind before the run.
        #[arg(long, value_enum)]
        pin_source: Option<SourceArg>,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
        /// Write the trace CSV here.
        #[arg(long)]
        trace: Option<std::path::PathBuf>,
    },
    /// Sweep the micro benchmark over every op and memory class.
    Bench {
        #[arg(long)]
        platform: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), e);
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Tree { platform } => {
            let state = ClockState::new(get_platform(&platform)?)?;
            print!("{}", render_tree(&state));
            Ok(())
        }
        Command::Get { platform, clock } => {
            let state = ClockState::new(get_platform(&platform)?)?;
            let id = state.platform.clock_by_name(&clock)?;
            let entry = state.entry(id);
            let hz = state
                .clock_frequency(id)
                .map(|f| f.to_string())
                .unwrap_or_else(|e| format!("({})", e.code()));
            println!(
                "{} kind={:?} frequency={} enabled={}{}{}",
                clock,
                state.platform.clock(id).kind,
                hz,
                entry.enabled,
                entry
                    .scale
                    .map(|s| format!(" scale={s}"))
                    .unwrap_or_default(),
                entry
                    .parent
                    .map(|p| format!(" parent={}", state.platform.clock_name(p)))
                    .unwrap_or_default(),
            );
            Ok(())
        }
        Command::Set {
            platform,
            clock,
            value,
            parent,
            enabled,
        } => {
            let mut state = ClockState::new(get_platform(&platform)?)?;
            let id = state.platform.clock_by_name(&clock)?;
            if let Some(v) = value {
                state.set_scaler(id, v)?;
            } else if let Some(p) = parent {
                let pid = state.platform.clock_by_name(&p)?;
                state.set_parent(id, pid)?;
            } else if let Some(on) = enabled {
                state.set_gate(id, on)?;
            } else {
                // A usage problem, not a domain error: reject like clap does.
                eprintln!("error: one of --value, --parent or --enabled is required");
                std::process::exit(2);
            }
            let hz = state
                .clock_frequency(id)
                .map(|f| f.to_string())
                .unwrap_or_else(|_| "-".into());
            println!("{clock} updated, frequency={hz}");
            Ok(())
        }
        Command::Explore { platform, json } => {
            let mut state = ClockState::new(get_platform(&platform)?)?;
            let explored = explore_core_configs(&mut state);
            if json {
                println!("{}", serde_json::to_string_pretty(explored.as_ref())?);
            } else {
                println!("{:>3}  {:>12}  {:<16} {:>5}  {:>2}  scaling point", "id", "frequency", "source", "range", "ws");
                for (i, c) in explored.iter().enumerate() {
                    println!(
                        "{:>3}  {:>12}  {:<16} {:>5}  {:>2}  {}",
                        i,
                        c.frequency,
                        format!("{:?}", c.source_kind),
                        state.platform.voltage_ranges[c.min_range].id,
                        c.min_ws,
                        state.platform.clock_name(c.scaling_point),
                    );
                }
            }
            Ok(())
        }
        Command::Transition {
            platform,
            to,
            policy,
        } => {
            let mut state = ClockState::new(get_platform(&platform)?)?;
            set_policy(&mut state, policy.into());
            let explored = explore_core_configs(&mut state);
            let target = explored.get(to).cloned().ok_or(Error::Unreachable)?;
            let plan = plan_transition(&mut state, &target)?;
            for phase in &plan.phases {
                println!("{}", render_phase(&state.platform, phase));
            }
            let mut hooks = Hooks::new();
            let report = execute_plan(&mut state, &plan, &mut hooks)?;
            println!(
                "done: {} Hz in {} phases, {} ns",
                state.clock_frequency(state.platform.core)?,
                report.phases_run,
                report.elapsed_ns
            );
            Ok(())
        }
        Command::Assess {
            platform,
            scenario,
            seed,
        } => {
            let platform = get_platform(&platform)?;
            let scenario = scenario.parse()?;
            let records = assess(platform, scenario, seed)?;
            println!("{:>4}  {:>12}  {:>12}  {:>8}", "task", "f_low", "f_high", "pu");
            for r in &records {
                println!("{:>4}  {:>12}  {:>12}  {:>8.4}", r.task, r.f_low, r.f_high, r.pu);
            }
            println!("{}", serde_json::to_string_pretty(&records)?);
            Ok(())
        }
        Command::Simulate {
            platform,
            scenario,
            dvfs,
            policy,
            seed,
            pin_frequency,
            pin_source,
            out,
            trace,
        } => {
            let platform = get_platform(&platform)?;
            let scenario = scenario.parse()?;
            let options = SimOptions {
                dvfs: matches!(dvfs, Switch::On),
                policy: policy.into(),
                seed,
                pin_frequency,
                pin_source: pin_source.map(Into::into),
            };
            let (report, energy_trace) = run_scenario(platform, scenario, &options)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
            if let Some(path) = trace {
                std::fs::write(path, energy_trace.csv())?;
            }
            Ok(())
        }
        Command::Bench { platform, seed } => {
            let platform = get_platform(&platform)?;
            println!("{:<6} {:<6} {:>14} {:>14}", "op", "mem", "energy_j", "avg_current_a");
            for op in [MicroOp::Add, MicroOp::Mul, MicroOp::Div] {
                for mem in [MemoryClass::Reg, MemoryClass::Ram, MemoryClass::Flash] {
                    let options = SimOptions {
                        seed,
                        ..SimOptions::default()
                    };
                    let (report, _) =
                        run_scenario(Arc::clone(&platform), Scenario::Micro(op, mem), &options)?;
                    println!(
                        "{:<6} {:<6} {:>14.6e} {:>14.6e}",
                        op.name(),
                        mem.name(),
                        report.totals.energy_j,
                        report.totals.avg_current_a
                    );
                }
            }
            Ok(())
        }
    }
}

/// One assessment pass over the scenario's workload mix at the generic
/// frequency ladder, mirroring what `simulate --dvfs on` does internally.
fn assess(
    platform: Arc<PlatformModel>,
    scenario: Scenario,
    _seed: u64,
) -> Result<Vec<clktree::dvfs::PURecord>> {
    let specs = scenario.workloads()?;
    let mut state = ClockState::new(platform)?;
    let mut hooks = Hooks::new();
    let mut ctrl = DvfsController::new();
    if let Scenario::SyntheticSuite(_) = scenario {
        ctrl.window = WindowSpec {
            max_activations: 2,
            max_window_ns: 4 * specs[0].period_ns,
        };
    }
    // Same frequency ladder the simulator uses: distinct explored
    // frequencies within 8x of the fastest, at most four points.
    let mut freqs: Vec<u64> = explore_core_configs(&mut state)
        .iter()
        .map(|c| c.frequency)
        .collect();
    freqs.dedup();
    let fmax = *freqs.last().unwrap();
    freqs.retain(|f| f * 8 >= fmax);
    if freqs.len() > 4 {
        let last = freqs.len() - 1;
        freqs = (0..4).map(|k| freqs[k * last / 3]).collect();
        freqs.dedup();
    }
    ctrl.candidate_frequencies = Some(freqs);
    let task_ids: Vec<TaskId> = specs.iter().map(|s| s.id).collect();
    let wspecs: Vec<WorkloadSpec> = specs.clone();
    let mut driver = move |st: &mut ClockState, stats: &mut StatsTable, window: WindowSpec| {
        let mut eng = Engine::new(&wspecs, &vec![0.0; wspecs.len()]);
        let _ = eng.run(st, None, Some(stats), None, StopRule::Window(window));
    };
    run_assessment(&mut ctrl, &mut state, &mut hooks, &mut driver, &task_ids)
}

fn render_tree(state: &ClockState) -> String {
    let mut out = String::new();
    let platform = &state.platform;
    let roots: Vec<ClockId> = (0..platform.clocks.len())
        .map(|i| ClockId(i as u16))
        .filter(|id| {
            platform.clock(*id).fixed_parent().is_none()
                && platform.clock(*id).parent_options.is_empty()
        })
        .collect();
    fn visit(state: &ClockState, id: ClockId, depth: usize, out: &mut String) {
        let entry = state.entry(id);
        let hz = state
            .clock_frequency(id)
            .map(|f| format!("{f} Hz"))
            .unwrap_or_else(|e| format!("({})", e.code()));
        out.push_str(&format!(
            "{}{} [{:?}] {}{}{}\n",
            "  ".repeat(depth),
            state.platform.clock_name(id),
            state.platform.clock(id).kind,
            hz,
            entry
                .scale
                .map(|s| format!(" scale={s}"))
                .unwrap_or_default(),
            if entry.enabled { "" } else { " (gated)" },
        ));
        for child in state.platform.children(id) {
            // Muxes appear under their currently selected parent only.
            if state.entry(child).parent == Some(id) {
                visit(state, child, depth + 1, out);
            }
        }
    }
    for root in roots {
        visit(state, root, 0, &mut out);
    }
    out
}

fn render_phase(platform: &PlatformModel, phase: &clktree::transitions::Phase) -> String {
    use clktree::transitions::Phase;
    match phase {
        Phase::SaveState => "save_state".into(),
        Phase::RestoreState => "restore_state".into(),
        Phase::SetVoltageRange(r) => {
            format!("set_voltage_range {}", platform.voltage_ranges[*r].id)
        }
        Phase::SetWaitStates(ws) => format!("set_wait_states {ws}"),
        Phase::SwitchParent(c, p) => format!(
            "switch_parent {} -> {}",
            platform.clock_name(*c),
            platform.clock_name(*p)
        ),
        Phase::SetScaler(c, v) => format!("set_scaler {} = {}", platform.clock_name(*c), v),
        Phase::EnableClock(c) => format!("enable_clock {}", platform.clock_name(*c)),
        Phase::DisableClock(c) => format!("disable_clock {}", platform.clock_name(*c)),
    }
}
