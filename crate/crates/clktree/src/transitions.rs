//! Exploration of core-clock configurations and safe multi-phase
//! transitions with pre/post hooks.
//!
//! Plans are constructed as candidate phase sequences, simulated on a cloned
//! state to collect transient core frequencies, wrapped in a voltage/wait-
//! state envelope (raised before the clock operations, lowered after), and
//! validated phase-by-phase before being returned. Execution re-runs the
//! same checks and restores the pre-transition snapshot on veto, timeout or
//! any phase violation.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::backend::Backend;
use crate::configurator::{scale_frequency, ClockState};
use crate::error::{Error, Result};
use crate::model::{ClockId, ClockKind, ScaleUnit, TopologyEntry};
use crate::platform::PlatformModel;

/// Planning preference when fast flash access and low core voltage exclude
/// each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Ff,
    #[default]
    Lv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Rc,
    Crystal,
    PllFromRc,
    PllFromCrystal,
}

/// One reachable way of driving the core.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreConfig {
    /// Core path entries ordered core → source.
    pub topology: Vec<TopologyEntry>,
    pub frequency: u64,
    /// Lowest-voltage range admitting this frequency (LV choice).
    pub min_range: usize,
    /// Fewest wait states over all admissible ranges (FF choice).
    pub min_ws: u32,
    pub source_kind: SourceKind,
    /// First clock (from the source) whose setting keeps the frequency below
    /// its local maximum; distinguishes same-frequency configs.
    pub scaling_point: ClockId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    SaveState,
    RestoreState,
    SetVoltageRange(usize),
    SetWaitStates(u32),
    SwitchParent(ClockId, ClockId),
    SetScaler(ClockId, u64),
    /// Enable and wait for the ready bit (bounded by 10x its delay).
    EnableClock(ClockId),
    DisableClock(ClockId),
}

#[derive(Debug, Clone)]
pub struct TransitionPlan {
    pub target: CoreConfig,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionReport {
    pub elapsed_ns: u64,
    pub phases_run: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookVerdict {
    Allow,
    Veto,
}

pub type PreHook = Box<dyn FnMut(&CoreConfig) -> HookVerdict>;
pub type PostHook = Box<dyn FnMut(&CoreConfig)>;

pub struct HookRegistration {
    pub clock: ClockId,
    pub pre: Option<PreHook>,
    pub post: Option<PostHook>,
}

/// Hook table, kept outside ClockState so states stay cloneable.
#[derive(Default)]
pub struct Hooks {
    entries: Vec<(u64, HookRegistration)>,
    next_id: u64,
}

impl Hooks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        platform: &PlatformModel,
        registration: HookRegistration,
    ) -> Result<u64> {
        if registration.clock.index() >= platform.clocks.len() {
            return Err(Error::UnknownClock(format!(
                "id {}",
                registration.clock.0
            )));
        }
        let id = self.next_id;
        self.next_id += 1;
        self.entries.push((id, registration));
        Ok(id)
    }

    pub fn remove(&mut self, id: u64) -> bool {
        let before = self.entries.len();
        self.entries.retain(|(i, _)| *i != id);
        self.entries.len() != before
    }
}

pub fn register_hook(
    hooks: &mut Hooks,
    state: &ClockState,
    registration: HookRegistration,
) -> Result<u64> {
    hooks.register(&state.platform, registration)
}

pub fn set_policy(state: &mut ClockState, policy: Policy) {
    state.policy = policy;
}

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

fn source_kind(platform: &PlatformModel, path: &[ClockId]) -> SourceKind {
    let has_pll = path.iter().any(|c| platform.clock(*c).pll);
    let class = path
        .last()
        .and_then(|s| platform.clock(*s).source_class)
        .unwrap_or(crate::model::SourceClass::Rc);
    match (class, has_pll) {
        (crate::model::SourceClass::Rc, false) => SourceKind::Rc,
        (crate::model::SourceClass::Crystal, false) => SourceKind::Crystal,
        (crate::model::SourceClass::Rc, true) => SourceKind::PllFromRc,
        (crate::model::SourceClass::Crystal, true) => SourceKind::PllFromCrystal,
    }
}

fn scaling_point(
    platform: &PlatformModel,
    path: &[ClockId],
    scales: &HashMap<ClockId, u64>,
) -> ClockId {
    for clock in path.iter().rev() {
        let desc = platform.clock(*clock);
        if !desc.caps.scalable {
            continue;
        }
        let Some(v) = scales.get(clock) else { continue };
        let domain = desc.mapping.domain();
        let reduces = match desc.scale_unit {
            Some(ScaleUnit::Hertz) => Some(*v) < domain.last().copied(),
            Some(ScaleUnit::Divider) => Some(*v) > domain.first().copied(),
            Some(ScaleUnit::Multiplier) => Some(*v) < domain.last().copied(),
            None => false,
        };
        if reduces {
            return *clock;
        }
    }
    path[0]
}

/// All structural paths from `clock` up to a source, each ordered
/// clock → source.
fn collect_paths(platform: &PlatformModel, clock: ClockId) -> Vec<Vec<ClockId>> {
    let desc = platform.clock(clock);
    if desc.kind == ClockKind::Source {
        return vec![vec![clock]];
    }
    let parents: Vec<ClockId> = match desc.kind {
        ClockKind::Mux => desc.parent_options.clone(),
        _ => desc.fixed_parent().into_iter().collect(),
    };
    let mut out = Vec::new();
    for p in parents {
        for mut tail in collect_paths(platform, p) {
            let mut path = vec![clock];
            path.append(&mut tail);
            out.push(path);
        }
    }
    out
}

/// Annotations (min_range, min_ws) for a core frequency; None if no voltage
/// range admits it.
fn annotations(platform: &PlatformModel, hz: u64) -> Option<(usize, u32)> {
    let mut min_range = None;
    let mut min_ws = None;
    for r in 0..platform.voltage_ranges.len() {
        if let Some(ws) = platform.wait_states_for(r, hz) {
            min_range = Some(r); // ranges are ordered by descending voltage
            min_ws = Some(min_ws.map_or(ws, |m: u32| m.min(ws)));
        }
    }
    Some((min_range?, min_ws?))
}

/// Brute-force enumeration of every reachable core configuration from the
/// platform description alone.
pub fn enumerate_core_configs(platform: &PlatformModel) -> Vec<CoreConfig> {
    let mut best: HashMap<(u64, SourceKind, ClockId), ((usize, Vec<u64>), CoreConfig)> =
        HashMap::new();

    for path in collect_paths(platform, platform.core) {
        let kind = source_kind(platform, &path);
        let scalable: Vec<(ClockId, Vec<u64>)> = path
            .iter()
            .rev()
            .filter(|c| platform.clock(**c).caps.scalable)
            .map(|c| (*c, platform.clock(*c).mapping.domain()))
            .collect();

        let mut idx = vec![0usize; scalable.len()];
        loop {
            let scales: HashMap<ClockId, u64> = scalable
                .iter()
                .zip(&idx)
                .map(|((c, dom), i)| (*c, dom[*i]))
                .collect();

            if let Some(freq) = path_frequency(platform, &path, &scales) {
                if let Some((min_range, min_ws)) = annotations(platform, freq) {
                    let sp = scaling_point(platform, &path, &scales);
                    let topology = path_topology(platform, &path, &scales);
                    let rank = (
                        path.len(),
                        path.iter()
                            .rev()
                            .filter_map(|c| scales.get(c).copied())
                            .collect::<Vec<_>>(),
                    );
                    let cfg = CoreConfig {
                        topology,
                        frequency: freq,
                        min_range,
                        min_ws,
                        source_kind: kind,
                        scaling_point: sp,
                    };
                    best.entry((freq, kind, sp))
                        .and_modify(|(r, c)| {
                            if rank < *r {
                                *r = rank.clone();
                                *c = cfg.clone();
                            }
                        })
                        .or_insert((rank, cfg));
                }
            }

            // Odometer increment.
            let mut pos = 0;
            loop {
                if pos == scalable.len() {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < scalable[pos].1.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == scalable.len() {
                break;
            }
        }
    }

    let mut configs: Vec<CoreConfig> = best.into_values().map(|(_, c)| c).collect();
    configs.sort_by_key(|c| (c.frequency, c.source_kind, c.scaling_point));
    configs
}

/// Core frequency of `path` under `scales`; None when any step is inexact,
/// out of the platform's intermediate bound, or above every voltage range.
fn path_frequency(
    platform: &PlatformModel,
    path: &[ClockId],
    scales: &HashMap<ClockId, u64>,
) -> Option<u64> {
    let mut freq = 0u64;
    for clock in path.iter().rev() {
        let desc = platform.clock(*clock);
        freq = match desc.kind {
            ClockKind::Source => {
                if desc.caps.scalable {
                    *scales.get(clock)?
                } else {
                    desc.source_frequency?
                }
            }
            ClockKind::Scaler => {
                scale_frequency(freq, *scales.get(clock)?, desc.scale_unit).ok()?
            }
            _ => freq,
        };
        if freq == 0 || freq > platform.max_intermediate_hz {
            return None;
        }
    }
    if freq > platform.max_core_frequency() {
        return None;
    }
    Some(freq)
}

fn path_topology(
    platform: &PlatformModel,
    path: &[ClockId],
    scales: &HashMap<ClockId, u64>,
) -> Vec<TopologyEntry> {
    (0..path.len())
        .map(|i| TopologyEntry {
            clock: path[i],
            parent: path.get(i + 1).copied(),
            scale: if platform.clock(path[i]).caps.scalable {
                scales.get(&path[i]).copied()
            } else {
                None
            },
            enabled: true,
        })
        .collect()
}

/// Enumerate (or fetch from cache) every distinct core configuration.
pub fn explore_core_configs(state: &mut ClockState) -> Arc<Vec<CoreConfig>> {
    if let Some(cached) = &state.explored {
        return Arc::clone(cached);
    }
    let configs = Arc::new(enumerate_core_configs(&state.platform));
    state.explored = Some(Arc::clone(&configs));
    configs
}

/// The configuration the core currently runs, derived from live state.
pub fn current_core_config(state: &ClockState) -> Result<CoreConfig> {
    let path = state.active_path(state.platform.core)?;
    let scales: HashMap<ClockId, u64> = path
        .iter()
        .filter_map(|c| state.entry(*c).scale.map(|s| (*c, s)))
        .collect();
    let frequency = state.clock_frequency(state.platform.core)?;
    let (min_range, min_ws) =
        annotations(&state.platform, frequency).ok_or(Error::Unreachable)?;
    Ok(CoreConfig {
        topology: path_topology(&state.platform, &path, &scales),
        frequency,
        min_range,
        min_ws,
        source_kind: source_kind(&state.platform, &path),
        scaling_point: scaling_point(&state.platform, &path, &scales),
    })
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

/// Final (voltage range, wait states) for `hz` under `policy`.
pub fn policy_range_ws(platform: &PlatformModel, hz: u64, policy: Policy) -> Option<(usize, u32)> {
    let admissible: Vec<(usize, u32)> = (0..platform.voltage_ranges.len())
        .filter_map(|r| platform.wait_states_for(r, hz).map(|ws| (r, ws)))
        .collect();
    match policy {
        // Lowest admissible voltage; ranges are ordered by descending voltage.
        Policy::Lv => admissible.last().copied(),
        // Fewest wait states; ties resolved toward lower voltage.
        Policy::Ff => admissible
            .into_iter()
            .rev()
            .min_by_key(|(_, ws)| *ws),
    }
}

#[derive(Debug, Clone, Copy)]
struct PlanVariant {
    /// Apply the final branch switch before the on-path scaler ops.
    switch_first: bool,
    /// On-path scaler order: true = source→core, false = core→source.
    src_to_core: bool,
    /// Drop dividers to their domain minimum before other on-path ops.
    div_min_trick: bool,
}

const VARIANTS: [PlanVariant; 8] = [
    PlanVariant { switch_first: false, src_to_core: true, div_min_trick: false },
    PlanVariant { switch_first: false, src_to_core: false, div_min_trick: false },
    PlanVariant { switch_first: true, src_to_core: true, div_min_trick: false },
    PlanVariant { switch_first: true, src_to_core: false, div_min_trick: false },
    PlanVariant { switch_first: false, src_to_core: true, div_min_trick: true },
    PlanVariant { switch_first: false, src_to_core: false, div_min_trick: true },
    PlanVariant { switch_first: true, src_to_core: true, div_min_trick: true },
    PlanVariant { switch_first: true, src_to_core: false, div_min_trick: true },
];

/// Gateable clocks from which the core is statically reachable; cleanup only
/// ever touches these, never peripheral branches.
fn core_ancestors(platform: &PlatformModel) -> Vec<ClockId> {
    let mut reach = vec![false; platform.clocks.len()];
    fn mark(platform: &PlatformModel, c: ClockId, reach: &mut [bool]) {
        if reach[c.index()] {
            return;
        }
        reach[c.index()] = true;
        for p in &platform.clock(c).parent_options {
            mark(platform, *p, reach);
        }
    }
    mark(platform, platform.core, &mut reach);
    (0..platform.clocks.len())
        .map(|i| ClockId(i as u16))
        .filter(|c| reach[c.index()] && *c != platform.core)
        .collect()
}

/// Largest fallback-source value not above 8 MHz (or the domain minimum),
/// used as a safe intermediate while reconfiguring other branches.
fn fallback_safe_value(platform: &PlatformModel) -> Option<u64> {
    let fb = platform.clock(platform.fallback_source);
    if !fb.caps.scalable {
        return None;
    }
    let dom = fb.mapping.domain();
    dom.iter()
        .rev()
        .find(|v| **v <= 8_000_000)
        .or(dom.first())
        .copied()
}

/// First mux above the core on `path` (the branch-selection point).
fn branch_mux(platform: &PlatformModel, path: &[ClockId]) -> Option<(usize, ClockId)> {
    path.iter()
        .enumerate()
        .find(|(_, c)| platform.clock(**c).kind == ClockKind::Mux)
        .map(|(i, c)| (i, *c))
}

struct BodyBuilder {
    sim: ClockState,
    phases: Vec<Phase>,
}

impl BodyBuilder {
    fn push(&mut self, phase: Phase) -> Result<()> {
        apply_phase_raw(&mut self.sim, phase)?;
        self.phases.push(phase);
        Ok(())
    }
}

/// Build the clock-operation body (no voltage/wait-state phases) for one
/// variant; returns the phases plus every transient core frequency observed.
fn build_body(
    state: &ClockState,
    target: &CoreConfig,
    variant: PlanVariant,
) -> Result<(Vec<Phase>, Vec<u64>)> {
    let platform = Arc::clone(&state.platform);
    let mut b = BodyBuilder {
        sim: state.clone(),
        phases: Vec::new(),
    };
    b.sim.in_transition = true;
    let core = platform.core;
    let mut transients = Vec::new();
    macro_rules! step {
        ($ph:expr) => {{
            b.push($ph)?;
            transients.push(
                b.sim
                    .clock_frequency(core)
                    .map_err(|e| Error::PhaseViolation(vec![e.to_string()]))?,
            );
        }};
    }

    let target_clocks: Vec<ClockId> = target.topology.iter().map(|e| e.clock).collect();
    let current_path = b.sim.active_path(core)?;

    // Does any non-on-the-fly clock that currently feeds the core need a new
    // setting? Then the core must ride the fallback source meanwhile.
    let diff = |sim: &ClockState, e: &TopologyEntry| -> bool {
        let cur = sim.entry(e.clock);
        (e.scale.is_some() && cur.scale != e.scale)
            || (platform.clock(e.clock).kind == ClockKind::Mux && cur.parent != e.parent)
    };
    let need_fallback = target.topology.iter().any(|e| {
        current_path.contains(&e.clock)
            && !platform.clock(e.clock).caps.on_the_fly_adjustable
            && diff(&b.sim, e)
    });

    let (_, mux) = branch_mux(&platform, &target_clocks)
        .ok_or_else(|| Error::PhaseViolation(vec!["core path has no mux".into()]))?;

    // A: route the core to the fallback source.
    if need_fallback {
        if b.sim.entry(mux).parent != Some(platform.fallback_source) {
            step!(Phase::SwitchParent(mux, platform.fallback_source));
        }
        if !target_clocks.contains(&platform.fallback_source) {
            if let Some(safe) = fallback_safe_value(&platform) {
                if b.sim.entry(platform.fallback_source).scale != Some(safe) {
                    step!(Phase::SetScaler(platform.fallback_source, safe));
                }
            }
        }
    }

    // B: reconfigure target-path clocks that do not currently feed the core.
    let live_path = b.sim.active_path(core)?;
    let off_path: Vec<&TopologyEntry> = target
        .topology
        .iter()
        .rev() // source → core
        .filter(|e| !live_path.contains(&e.clock))
        .collect();
    // Disable (core→source order) every enabled gateable off-path clock whose
    // own or upstream settings change.
    let off_path_dirty: Vec<ClockId> = {
        let mut dirty = false;
        let mut v = Vec::new();
        for e in &off_path {
            if diff(&b.sim, e) {
                dirty = true;
            }
            if dirty {
                v.push(e.clock);
            }
        }
        v
    };
    for e in off_path.iter().rev() {
        if platform.clock(e.clock).caps.gateable
            && b.sim.entry(e.clock).enabled
            && off_path_dirty.contains(&e.clock)
        {
            step!(Phase::DisableClock(e.clock));
        }
    }
    for e in &off_path {
        let desc = platform.clock(e.clock);
        if desc.kind == ClockKind::Mux && e.clock != mux {
            if let Some(p) = e.parent {
                if b.sim.entry(e.clock).parent != Some(p) {
                    step!(Phase::SwitchParent(e.clock, p));
                }
            }
        }
        if let Some(s) = e.scale {
            if b.sim.entry(e.clock).scale != Some(s) {
                step!(Phase::SetScaler(e.clock, s));
            }
        }
    }
    for e in &off_path {
        if platform.clock(e.clock).caps.gateable && !b.sim.entry(e.clock).enabled {
            step!(Phase::EnableClock(e.clock));
        }
    }

    // C/D: on-path scaler adjustments and the final branch switch.
    let live_path = b.sim.active_path(core)?;
    let mut on_path: Vec<(ClockId, u64)> = target
        .topology
        .iter()
        .rev()
        .filter(|e| live_path.contains(&e.clock))
        .filter_map(|e| {
            e.scale
                .filter(|s| b.sim.entry(e.clock).scale != Some(*s))
                .map(|s| (e.clock, s))
        })
        .collect(); // source → core order
    if !variant.src_to_core {
        on_path.reverse();
    }
    let target_branch = target
        .topology
        .iter()
        .find(|e| e.clock == mux)
        .and_then(|e| e.parent);
    let needs_switch =
        target_branch.is_some() && b.sim.entry(mux).parent != target_branch;

    let do_switch = |b: &mut BodyBuilder, tr: &mut Vec<u64>| -> Result<()> {
        if needs_switch {
            b.push(Phase::SwitchParent(mux, target_branch.unwrap()))?;
            tr.push(
                b.sim
                    .clock_frequency(core)
                    .map_err(|e| Error::PhaseViolation(vec![e.to_string()]))?,
            );
        }
        Ok(())
    };

    if variant.switch_first {
        do_switch(&mut b, &mut transients)?;
    }
    if variant.div_min_trick {
        for (clock, _) in on_path.clone() {
            let desc = platform.clock(clock);
            if desc.scale_unit == Some(ScaleUnit::Divider) {
                if let Some(min) = desc.mapping.domain().first().copied() {
                    if b.sim.entry(clock).scale != Some(min) {
                        step!(Phase::SetScaler(clock, min));
                    }
                }
            }
        }
    }
    for (clock, scale) in &on_path {
        if b.sim.entry(*clock).scale != Some(*scale) {
            step!(Phase::SetScaler(*clock, *scale));
        }
    }
    if !variant.switch_first {
        do_switch(&mut b, &mut transients)?;
    }

    // E: cleanup — gate off core-feeding clocks left unused.
    let final_path = b.sim.active_path(core)?;
    for clock in core_ancestors(&platform).into_iter().rev() {
        let desc = platform.clock(clock);
        if desc.caps.gateable
            && b.sim.entry(clock).enabled
            && !final_path.contains(&clock)
            && !b.sim.downstream_active(clock)
        {
            step!(Phase::DisableClock(clock));
        }
    }

    Ok((b.phases, transients))
}

/// Produce a validated plan realizing `target` from the current state.
pub fn plan_transition(state: &mut ClockState, target: &CoreConfig) -> Result<TransitionPlan> {
    let explored = explore_core_configs(state);
    if !explored.iter().any(|c| c == target) {
        return Err(Error::Unreachable);
    }

    let current = current_core_config(state)?;
    // Identity via the dedup key: an equivalent configuration (same
    // frequency, source kind and scaling point) needs no work even when it
    // is not the canonical representative of its class.
    if (current.frequency, current.source_kind, current.scaling_point)
        == (target.frequency, target.source_kind, target.scaling_point)
    {
        return Ok(TransitionPlan {
            target: target.clone(),
            phases: Vec::new(),
        });
    }

    let platform = Arc::clone(&state.platform);
    let (final_range, final_ws) =
        policy_range_ws(&platform, target.frequency, state.policy).ok_or(Error::Unreachable)?;

    let mut last_err = Error::Unreachable;
    for variant in VARIANTS {
        let (body, transients) = match build_body(state, target, variant) {
            Ok(v) => v,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let max_transient = transients
            .iter()
            .copied()
            .chain([current.frequency, target.frequency])
            .max()
            .unwrap();

        // Envelope: a range/wait-state pair admitting every transient.
        let env_range = if platform.wait_states_for(final_range, max_transient).is_some() {
            final_range
        } else {
            match (0..platform.voltage_ranges.len())
                .filter(|r| platform.wait_states_for(*r, max_transient).is_some())
                .last()
            {
                Some(r) => r,
                None => {
                    last_err = Error::PhaseViolation(vec![format!(
                        "transient {max_transient} Hz inadmissible in every range"
                    )]);
                    continue;
                }
            }
        };
        let env_ws = state
            .wait_states
            .max(platform.wait_states_for(env_range, max_transient).unwrap());

        let mut phases = vec![Phase::SaveState];
        if env_ws > state.wait_states {
            phases.push(Phase::SetWaitStates(env_ws));
        }
        if env_range != state.voltage_range {
            phases.push(Phase::SetVoltageRange(env_range));
        }
        phases.extend(body);
        // Postlude: lower wait states, then voltage, then wait states again.
        let mid_ws = final_ws.max(platform.wait_states_for(env_range, target.frequency).unwrap());
        if mid_ws != env_ws {
            phases.push(Phase::SetWaitStates(mid_ws));
        }
        if final_range != env_range {
            phases.push(Phase::SetVoltageRange(final_range));
        }
        if final_ws != mid_ws {
            phases.push(Phase::SetWaitStates(final_ws));
        }

        // Full checked validation on a clone.
        let mut sim = state.clone();
        sim.in_transition = true;
        let mut ok = true;
        let mut snapshot = sim.snapshot();
        for phase in &phases {
            if let Err(e) = apply_phase_checked(&mut sim, *phase, &mut snapshot) {
                last_err = e;
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(TransitionPlan {
                target: target.clone(),
                phases,
            });
        }
    }
    Err(last_err)
}

// ---------------------------------------------------------------------------
// Phase application
// ---------------------------------------------------------------------------

/// Unchecked application used while constructing candidate bodies; the
/// voltage/wait-state envelope is not in place yet, so constraint checks are
/// deferred to validation.
fn apply_phase_raw(sim: &mut ClockState, phase: Phase) -> Result<()> {
    match phase {
        Phase::SaveState | Phase::RestoreState => Ok(()),
        Phase::SetVoltageRange(_) | Phase::SetWaitStates(_) => Ok(()),
        Phase::SwitchParent(c, p) => sim.raw_set_parent(c, p),
        Phase::SetScaler(c, v) => sim.raw_set_scaler(c, v),
        Phase::EnableClock(c) => {
            sim.raw_set_gate(c, true)?;
            wait_ready(sim, c)
        }
        Phase::DisableClock(c) => sim.raw_set_gate(c, false),
    }
}

/// Advance simulated time until `clock`'s ready bit sets, bounded by 10x its
/// configured delay.
fn wait_ready(state: &mut ClockState, clock: ClockId) -> Result<()> {
    let desc = state.platform.clock(clock).clone();
    let (Some(bit), Some(delay)) = (desc.field.ready_bit, state.platform.ready_delay_ns
        [clock.index()]) else {
        return Ok(());
    };
    let reg = desc.field.register_index;
    let limit = state.backend.now() + delay.saturating_mul(10);
    while !state.backend.peek_bit(reg, bit) {
        let now = state.backend.now();
        if now >= limit {
            return Err(Error::ReadyTimeout(delay * 10));
        }
        let step = match state.backend.next_ready_deadline() {
            Some(d) if d > now && d <= limit => d - now,
            _ => limit - now,
        };
        state.backend.advance_time(step);
    }
    Ok(())
}

/// Checked application with a full constraint/readiness audit at the phase
/// boundary.
fn apply_phase_checked(
    state: &mut ClockState,
    phase: Phase,
    snapshot: &mut Vec<u32>,
) -> Result<()> {
    match phase {
        Phase::SaveState => {
            *snapshot = state.snapshot();
        }
        Phase::RestoreState => {
            state.restore(snapshot);
        }
        Phase::SetVoltageRange(r) => {
            let from_mv = (state.platform.voltage_ranges[state.voltage_range].core_voltage
                * 1000.0)
                .round() as i64;
            let to_mv =
                (state.platform.voltage_ranges[r].core_voltage * 1000.0).round() as i64;
            state.set_voltage_range(r)?;
            let steps = (from_mv - to_mv).unsigned_abs().div_ceil(100);
            state
                .backend
                .advance_time(steps * state.platform.voltage_switch_ns_per_100mv);
        }
        Phase::SetWaitStates(w) => state.set_wait_states(w)?,
        Phase::SwitchParent(c, p) => state.set_parent(c, p)?,
        Phase::SetScaler(c, v) => state.set_scaler(c, v)?,
        Phase::EnableClock(c) => {
            state.set_gate(c, true)?;
            wait_ready(state, c)?;
        }
        Phase::DisableClock(c) => state.set_gate(c, false)?,
    }
    boundary_check(state)
}

fn boundary_check(state: &ClockState) -> Result<()> {
    let core = state.platform.core;
    let hz = state
        .clock_frequency(core)
        .map_err(|e| Error::PhaseViolation(vec![format!("core unclocked: {e}")]))?;
    if !state.is_path_ready(core) {
        return Err(Error::PhaseViolation(vec![
            "core driven by a non-ready clock".into(),
        ]));
    }
    let v = state.check_constraints(hz, state.voltage_range, state.wait_states);
    if !v.is_empty() {
        return Err(Error::PhaseViolation(v));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Clocks named by the plan's phases; used to select which hooks fire.
fn touched_clocks(plan: &TransitionPlan) -> Vec<ClockId> {
    let mut v = Vec::new();
    for p in &plan.phases {
        match p {
            Phase::SwitchParent(c, parent) => {
                v.push(*c);
                v.push(*parent);
            }
            Phase::SetScaler(c, _) | Phase::EnableClock(c) | Phase::DisableClock(c) => {
                v.push(*c)
            }
            _ => {}
        }
    }
    v.sort();
    v.dedup();
    v
}

/// Whether two clocks are related (equal, ancestor or descendant) in the
/// static parent-options graph.
fn related(platform: &PlatformModel, a: ClockId, b: ClockId) -> bool {
    fn reaches(platform: &PlatformModel, from: ClockId, to: ClockId) -> bool {
        if from == to {
            return true;
        }
        platform
            .clock(from)
            .parent_options
            .iter()
            .any(|p| reaches(platform, *p, to))
    }
    reaches(platform, a, b) || reaches(platform, b, a)
}

/// Execute a plan produced for the current state. Any veto, timeout or phase
/// violation restores the pre-transition register snapshot.
pub fn execute_plan(
    state: &mut ClockState,
    plan: &TransitionPlan,
    hooks: &mut Hooks,
) -> Result<TransitionReport> {
    if state.in_transition {
        return Err(Error::ReentrantTransition);
    }
    state.in_transition = true;
    let result = execute_inner(state, plan, hooks);
    state.in_transition = false;
    result
}

fn execute_inner(
    state: &mut ClockState,
    plan: &TransitionPlan,
    hooks: &mut Hooks,
) -> Result<TransitionReport> {
    let platform = Arc::clone(&state.platform);
    let touched = touched_clocks(plan);
    // An empty plan notifies every hook; otherwise only related ones fire.
    let fire: Vec<usize> = hooks
        .entries
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| {
            touched.is_empty() || touched.iter().any(|t| related(&platform, r.clock, *t))
        })
        .map(|(i, _)| i)
        .collect();

    // Pre-hooks run strictly before the first register write.
    for i in &fire {
        let (_, reg) = &mut hooks.entries[*i];
        if let Some(pre) = reg.pre.as_mut() {
            if pre(&plan.target) == HookVerdict::Veto {
                return Err(Error::Vetoed(
                    platform.clock_name(reg.clock).to_string(),
                ));
            }
        }
    }

    let t0 = state.backend.now();
    let mut snapshot = state.snapshot();
    let mut phases_run = 0usize;
    for phase in &plan.phases {
        match apply_phase_checked(state, *phase, &mut snapshot) {
            Ok(()) => phases_run += 1,
            Err(e) => {
                state.restore(&snapshot);
                return Err(e);
            }
        }
    }

    for i in &fire {
        let (_, reg) = &mut hooks.entries[*i];
        if let Some(post) = reg.post.as_mut() {
            post(&plan.target);
        }
    }

    Ok(TransitionReport {
        elapsed_ns: state.backend.now() - t0,
        phases_run,
    })
}

/// Plan and execute in one call.
pub fn transition_to(
    state: &mut ClockState,
    target: &CoreConfig,
    hooks: &mut Hooks,
) -> Result<TransitionReport> {
    let plan = plan_transition(state, target)?;
    execute_plan(state, &plan, hooks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::get_platform;

    fn vpa_default() -> ClockState {
        ClockState::new(get_platform("vpa").unwrap()).unwrap()
    }

    fn id(s: &ClockState, name: &str) -> ClockId {
        s.platform.clock_by_name(name).unwrap()
    }

    fn find_config(
        configs: &[CoreConfig],
        hz: u64,
        kind: SourceKind,
    ) -> Option<CoreConfig> {
        configs
            .iter()
            .find(|c| c.frequency == hz && c.source_kind == kind)
            .cloned()
    }

    #[test]
    fn vpa_exploration_includes_paper_frequencies() {
        let mut s = vpa_default();
        let configs = explore_core_configs(&mut s);
        for mhz in [8u64, 16, 24, 40, 48, 80] {
            assert!(
                configs.iter().any(|c| c.frequency == mhz * 1_000_000),
                "{mhz} MHz missing"
            );
        }
    }

    #[test]
    fn exploration_is_cached_without_register_access() {
        let mut s = vpa_default();
        let first = explore_core_configs(&mut s);
        s.backend.set_tracing(true);
        let second = explore_core_configs(&mut s);
        assert!(Arc::ptr_eq(&first, &second));
        assert!(s.backend.trace().is_empty());
        // External topology change invalidates.
        let hsi = id(&s, "hsi16");
        s.set_gate(hsi, true).unwrap();
        s.backend.advance_time(10_000);
        let third = explore_core_configs(&mut s);
        assert!(!Arc::ptr_eq(&second, &third));
        assert_eq!(*second, *third);
    }

    #[test]
    fn fixed_source_divider_enumeration() {
        let json = r#"{
            "name": "mini", "version": 1, "register_count": 2,
            "reset_registers": [0, 0],
            "clocks": [
                {"name": "osc", "kind": "source", "source_frequency": 16000000,
                 "source_class": "rc"},
                {"name": "osc2", "kind": "source", "source_frequency": 1000000,
                 "source_class": "rc"},
                {"name": "mux", "kind": "mux", "caps": {"muxable": true,
                 "on_the_fly_adjustable": true},
                 "field": {"register": 0, "shift": 0, "width": 1},
                 "mapping": {"lut": [[0, 0], [1, 1]]}, "parents": ["osc", "osc2"]},
                {"name": "div", "kind": "scaler",
                 "caps": {"scalable": true, "on_the_fly_adjustable": true},
                 "field": {"register": 0, "shift": 4, "width": 2},
                 "mapping": {"range": {"min": 1, "max": 4, "modifier": "zero_based"}},
                 "parents": ["mux"], "scale_unit": "divider"},
                {"name": "core", "kind": "consumer", "parents": ["div"]}
            ],
            "voltage_field": {"register": 1, "shift": 0, "width": 1},
            "wait_state_field": {"register": 1, "shift": 4, "width": 1},
            "voltage_ranges": [{"id": "R1", "core_voltage": 1.2,
                                "max_frequency": 16000000}],
            "flash_table": [[[16000000, 0]]],
            "fallback_source": "osc",
            "default_config": [],
            "voltage_switch_ns_per_100mv": 20000,
            "max_intermediate_hz": 32000000,
            "energy": {"capacitance_eff": 1e-10, "static_current_a": 1e-5,
                       "supply_voltage": 3.3,
                       "alpha_memory": {"reg": 1.0, "ram": 1.1, "flash": 1.35}}
        }"#;
        let model = crate::platform::parse_platform(json).unwrap();
        assert!(crate::platform::validate_model(&model).is_empty());
        let configs = enumerate_core_configs(&model);
        let from_osc: Vec<u64> = configs
            .iter()
            .filter(|c| {
                c.topology.last().map(|e| e.clock)
                    == model.clock_by_name("osc").ok().map(|i| i)
            })
            .map(|c| c.frequency)
            .collect();
        // 16/3 is inexact and must be skipped.
        assert_eq!(from_osc, vec![4_000_000, 8_000_000, 16_000_000]);
    }

    #[test]
    fn msi_downscale_plan_has_documented_shape() {
        // Core on MSI at 48 MHz (R1, ws 2); target MSI at 8 MHz under LV.
        let mut s = ClockState::at_reset(get_platform("vpa").unwrap());
        s.set_wait_states(2).unwrap();
        let msi = id(&s, "msi");
        s.set_scaler(msi, 48_000_000).unwrap();
        let configs = explore_core_configs(&mut s);
        let target = find_config(&configs, 8_000_000, SourceKind::Rc).unwrap();
        let plan = plan_transition(&mut s, &target).unwrap();
        assert_eq!(
            plan.phases,
            vec![
                Phase::SaveState,
                Phase::SetScaler(msi, 8_000_000),
                Phase::SetWaitStates(0),
                Phase::SetVoltageRange(1),
            ]
        );
    }

    #[test]
    fn pll_reconfiguration_routes_through_fallback() {
        let mut s = vpa_default(); // PLL at 80 MHz
        let configs = explore_core_configs(&mut s);
        let target = find_config(&configs, 40_000_000, SourceKind::PllFromRc).unwrap();
        let plan = plan_transition(&mut s, &target).unwrap();
        let mux = id(&s, "core_mux");
        let msi = id(&s, "msi");
        let pll_r = id(&s, "pll_r");
        let pos = |ph: &Phase| plan.phases.iter().position(|p| p == ph);
        let to_fallback = pos(&Phase::SwitchParent(mux, msi)).expect("fallback switch");
        let back = pos(&Phase::SwitchParent(mux, pll_r)).expect("switch back");
        let n_change = plan
            .phases
            .iter()
            .position(|p| matches!(p, Phase::SetScaler(c, _) if *c == id(&s, "pll_n")))
            .expect("pll_n reconfigured");
        let enable = pos(&Phase::EnableClock(pll_r)).expect("pll re-enable");
        assert!(to_fallback < n_change && n_change < enable && enable < back);

        let mut hooks = Hooks::new();
        let report = execute_plan(&mut s, &plan, &mut hooks).unwrap();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 40_000_000);
        assert!(report.elapsed_ns >= 200_000, "{}", report.elapsed_ns);
    }

    #[test]
    fn identity_transition_is_empty_and_notifies_all_hooks() {
        let mut s = vpa_default();
        let current = current_core_config(&s).unwrap();
        let configs = explore_core_configs(&mut s);
        let target = configs
            .iter()
            .find(|c| {
                (c.frequency, c.source_kind, c.scaling_point)
                    == (current.frequency, current.source_kind, current.scaling_point)
            })
            .unwrap()
            .clone();
        let plan = plan_transition(&mut s, &target).unwrap();
        assert!(plan.phases.is_empty());

        let fired = std::rc::Rc::new(std::cell::Cell::new(0));
        let mut hooks = Hooks::new();
        for name in ["timer", "core", "spi"] {
            let f = std::rc::Rc::clone(&fired);
            register_hook(
                &mut hooks,
                &s,
                HookRegistration {
                    clock: id(&s, name),
                    pre: None,
                    post: Some(Box::new(move |_| {
                        f.set(f.get() + 1);
                    })),
                },
            )
            .unwrap();
        }
        let report = execute_plan(&mut s, &plan, &mut hooks).unwrap();
        assert_eq!(report.phases_run, 0);
        assert_eq!(fired.get(), 3);
    }

    #[test]
    fn veto_aborts_before_any_write() {
        let mut s = vpa_default();
        let configs = explore_core_configs(&mut s);
        let target = find_config(&configs, 8_000_000, SourceKind::Rc).unwrap();
        let plan = plan_transition(&mut s, &target).unwrap();
        let before = s.snapshot();
        let mut hooks = Hooks::new();
        register_hook(
            &mut hooks,
            &s,
            HookRegistration {
                clock: s.platform.core,
                pre: Some(Box::new(|_| HookVerdict::Veto)),
                post: None,
            },
        )
        .unwrap();
        s.backend.set_tracing(true);
        let err = execute_plan(&mut s, &plan, &mut hooks).unwrap_err();
        assert!(matches!(err, Error::Vetoed(_)));
        assert!(s.backend.trace().iter().all(|r| !r.is_write()));
        assert_eq!(s.snapshot(), before);
    }

    #[test]
    fn ready_timeout_restores_snapshot() {
        let mut s = ClockState::at_reset(get_platform("vpa").unwrap());
        let configs = explore_core_configs(&mut s);
        let target = find_config(&configs, 80_000_000, SourceKind::PllFromRc).unwrap();
        let plan = plan_transition(&mut s, &target).unwrap();
        let before = s.snapshot();
        s.backend.set_suppress_ready(true);
        let mut hooks = Hooks::new();
        let err = execute_plan(&mut s, &plan, &mut hooks).unwrap_err();
        assert!(matches!(err, Error::ReadyTimeout(_)));
        assert_eq!(s.snapshot(), before);
        // And the run is recoverable once readiness works again.
        s.backend.set_suppress_ready(false);
        execute_plan(&mut s, &plan, &mut hooks).unwrap();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 80_000_000);
    }

    #[test]
    fn policies_pick_documented_ranges_at_24mhz() {
        let p = get_platform("vpa").unwrap();
        assert_eq!(policy_range_ws(&p, 24_000_000, Policy::Lv), Some((1, 2)));
        assert_eq!(policy_range_ws(&p, 24_000_000, Policy::Ff), Some((0, 1)));
    }

    #[test]
    fn unreachable_target_rejected() {
        let mut s = vpa_default();
        let configs = explore_core_configs(&mut s);
        let mut bogus = configs[0].clone();
        bogus.frequency += 1;
        assert!(matches!(
            plan_transition(&mut s, &bogus),
            Err(Error::Unreachable)
        ));
    }
}
