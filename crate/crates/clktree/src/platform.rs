//! Virtual platform descriptions: clock tree, register layout, voltage
//! ranges, flash wait-state tables and energy model parameters.
//!
//! Platforms are expressed as versioned JSON documents (one file per
//! platform, embedded at build time) and compiled into an immutable
//! [`PlatformModel`] that every other module consumes.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{ReadyBehavior, RegisterFile};
use crate::error::{Error, Result};
use crate::model::{
    CapabilitySet, ClockDescriptor, ClockId, ClockKind, RegisterFieldDescriptor, ScaleUnit,
    SourceClass, ValueMapping,
};

const VPA_JSON: &str = include_str!("../data/vpa.json");
const VPB_JSON: &str = include_str!("../data/vpb.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageRange {
    pub id: String,
    pub core_voltage: f64,
    pub max_frequency: u64,
}

/// Per-memory-class switching-activity modifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMemory {
    pub reg: f64,
    pub ram: f64,
    pub flash: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModelParams {
    /// Effective switched capacitance C in farads.
    pub capacitance_eff: f64,
    /// Static supply current in amperes, drawn regardless of activity.
    pub static_current_a: f64,
    /// Measurement supply voltage in volts (current is supply-referred).
    pub supply_voltage: f64,
    pub alpha_memory: AlphaMemory,
}

/// One step of a platform's default (startup) configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultStep {
    SetScaler { clock: String, value: u64 },
    SetParent { clock: String, parent: String },
    SetGate { clock: String, enabled: bool },
    SetWaitStates { ws: u32 },
    SetVoltageRange { range: usize },
}

#[derive(Debug)]
pub struct PlatformModel {
    pub name: String,
    pub register_count: usize,
    pub reset_registers: Vec<u32>,
    pub clocks: Vec<ClockDescriptor>,
    pub ready_behaviors: Vec<ReadyBehavior>,
    /// Ready delay per clock id (None where the clock has no ready bit).
    pub ready_delay_ns: Vec<Option<u64>>,
    /// Extra supply current per clock id while that clock is enabled.
    pub enable_current_a: Vec<f64>,
    pub voltage_field: RegisterFieldDescriptor,
    pub wait_state_field: RegisterFieldDescriptor,
    /// Ordered by descending core voltage.
    pub voltage_ranges: Vec<VoltageRange>,
    /// Per voltage range: (max frequency threshold, wait states), thresholds
    /// strictly increasing.
    pub flash_table: Vec<Vec<(u64, u32)>>,
    pub fallback_source: ClockId,
    pub core: ClockId,
    pub default_config: Vec<DefaultStep>,
    pub voltage_switch_ns_per_100mv: u64,
    /// Upper bound on any intermediate node frequency (a VCO-style limit);
    /// configurations exceeding it anywhere along the core path are invalid.
    pub max_intermediate_hz: u64,
    pub energy: EnergyModelParams,
    name_index: HashMap<String, ClockId>,
}

impl PlatformModel {
    pub fn clock(&self, id: ClockId) -> &ClockDescriptor {
        &self.clocks[id.index()]
    }

    pub fn clock_by_name(&self, name: &str) -> Result<ClockId> {
        self.name_index.get(name).copied().ok_or_else(|| Error::UnknownClock(name.to_string()))
    }

    pub fn clock_name(&self, id: ClockId) -> &str {
        &self.clocks[id.index()].name
    }

    /// Clocks that list `id` among their parent options.
    pub fn children(&self, id: ClockId) -> Vec<ClockId> {
        self.clocks
            .iter()
            .filter(|c| c.parent_options.contains(&id))
            .map(|c| c.id)
            .collect()
    }

    /// Wait states required for `hz` in `range`, if the pair is admissible.
    pub fn wait_states_for(&self, range: usize, hz: u64) -> Option<u32> {
        if range >= self.voltage_ranges.len() || hz > self.voltage_ranges[range].max_frequency {
            return None;
        }
        self.flash_table[range]
            .iter()
            .find(|(threshold, _)| hz <= *threshold)
            .map(|(_, ws)| *ws)
    }

    /// Fresh register file at reset values with this platform's ready timing.
    pub fn make_register_file(&self) -> RegisterFile {
        RegisterFile::new(
            self.register_count,
            &self.reset_registers,
            self.ready_behaviors.clone(),
        )
    }

    pub fn max_core_frequency(&self) -> u64 {
        self.voltage_ranges
            .iter()
            .map(|r| r.max_frequency)
            .max()
            .unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Raw JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    register: u8,
    shift: u8,
    #[serde(default)]
    width: u8,
    #[serde(default)]
    enable_bit: Option<u8>,
    #[serde(default)]
    ready_bit: Option<u8>,
}

impl RawField {
    fn build(&self) -> RegisterFieldDescriptor {
        RegisterFieldDescriptor {
            register_index: self.register,
            shift: self.shift,
            width: self.width,
            enable_bit: self.enable_bit,
            ready_bit: self.ready_bit,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClock {
    name: String,
    kind: ClockKind,
    #[serde(default)]
    caps: CapabilitySet,
    #[serde(default)]
    field: Option<RawField>,
    #[serde(default)]
    mapping: Option<ValueMapping>,
    #[serde(default)]
    parents: Vec<String>,
    #[serde(default)]
    source_frequency: Option<u64>,
    #[serde(default)]
    scale_unit: Option<ScaleUnit>,
    #[serde(default)]
    source_class: Option<SourceClass>,
    #[serde(default)]
    pll: bool,
    /// Simulated time from trigger to ready for clocks with a ready bit.
    #[serde(default)]
    ready_delay_ns: Option<u64>,
    /// Clocks whose register fields invalidate this clock's ready bit when
    /// written (defaults to the clock itself).
    #[serde(default)]
    ready_watch: Vec<String>,
    #[serde(default)]
    enable_current_a: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlatform {
    name: String,
    version: u32,
    register_count: usize,
    reset_registers: Vec<u32>,
    clocks: Vec<RawClock>,
    voltage_field: RawField,
    wait_state_field: RawField,
    voltage_ranges: Vec<VoltageRange>,
    flash_table: Vec<Vec<(u64, u32)>>,
    fallback_source: String,
    default_config: Vec<DefaultStep>,
    voltage_switch_ns_per_100mv: u64,
    max_intermediate_hz: u64,
    energy: EnergyModelParams,
}

pub fn parse_platform(json: &str) -> Result<PlatformModel> {
    let raw: RawPlatform = serde_json::from_str(json).map_err(|e| Error::InvalidModel(e.to_string()))?;
    if raw.version != 1 {
        return Err(Error::InvalidModel(format!("unsupported version {}", raw.version)));
    }

    let mut name_index = HashMap::new();
    for (i, c) in raw.clocks.iter().enumerate() {
        if name_index.insert(c.name.clone(), ClockId(i as u16)).is_some() {
            return Err(Error::InvalidModel(format!("duplicate clock name {}", c.name)));
        }
    }
    let lookup = |name: &str| -> Result<ClockId> {
        name_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidModel(format!("unknown clock reference {name}")))
    };

    let mut clocks = Vec::with_capacity(raw.clocks.len());
    let mut ready_behaviors = Vec::new();
    let mut ready_delay_ns = vec![None; raw.clocks.len()];
    let mut enable_current_a = vec![0.0; raw.clocks.len()];

    for (i, rc) in raw.clocks.iter().enumerate() {
        let id = ClockId(i as u16);
        let field = rc
            .field
            .as_ref()
            .map(|f| f.build())
            .unwrap_or(RegisterFieldDescriptor::plain(0, 0, 0));
        let mapping = match (&rc.mapping, rc.source_frequency) {
            (Some(m), _) => m.clone(),
            (None, Some(hz)) => ValueMapping::FixedFrequency(hz),
            // Gates and consumers carry no value.
            (None, None) => ValueMapping::Lut(Vec::new()),
        };
        let parent_options = rc
            .parents
            .iter()
            .map(|p| lookup(p))
            .collect::<Result<Vec<_>>>()?;

        if let (Some(ready_bit), Some(delay)) = (field.ready_bit, rc.ready_delay_ns) {
            // The watch mask covers the value fields that invalidate
            // readiness plus the enable bit, so enabling schedules the
            // ready deadline.
            let watched: Vec<&str> = if rc.ready_watch.is_empty() {
                vec![rc.name.as_str()]
            } else {
                rc.ready_watch.iter().map(|s| s.as_str()).collect()
            };
            let mut mask = 0u32;
            for w in watched {
                let wc = raw
                    .clocks
                    .iter()
                    .find(|c| c.name == w)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown ready_watch {w}")))?;
                let wf = wc
                    .field
                    .as_ref()
                    .map(|f| f.build())
                    .unwrap_or(RegisterFieldDescriptor::plain(0, 0, 0));
                if wf.register_index != field.register_index {
                    return Err(Error::InvalidModel(format!(
                        "{}: ready_watch {w} lives in a different register",
                        rc.name
                    )));
                }
                mask |= wf.mask();
            }
            if let Some(e) = field.enable_bit {
                mask |= 1 << e;
            }
            ready_behaviors.push(ReadyBehavior {
                watch_register: field.register_index,
                watch_mask: mask,
                ready_register: field.register_index,
                ready_bit,
                gate: field.enable_bit.map(|e| (field.register_index, e)),
                delay_ns: delay,
            });
            ready_delay_ns[i] = Some(delay);
        }
        enable_current_a[i] = rc.enable_current_a;

        clocks.push(ClockDescriptor {
            id,
            name: rc.name.clone(),
            kind: rc.kind,
            caps: rc.caps,
            field,
            mapping,
            parent_options,
            source_frequency: rc.source_frequency,
            scale_unit: rc.scale_unit,
            source_class: rc.source_class,
            pll: rc.pll,
        });
    }

    let fallback_source = lookup(&raw.fallback_source)?;
    let core = clocks
        .iter()
        .find(|c| c.kind == ClockKind::Consumer && c.name == "core")
        .map(|c| c.id)
        .ok_or_else(|| Error::InvalidModel("no consumer named core".into()))?;

    Ok(PlatformModel {
        name: raw.name,
        register_count: raw.register_count,
        reset_registers: raw.reset_registers,
        clocks,
        ready_behaviors,
        ready_delay_ns,
        enable_current_a,
        voltage_field: raw.voltage_field.build(),
        wait_state_field: raw.wait_state_field.build(),
        voltage_ranges: raw.voltage_ranges,
        flash_table: raw.flash_table,
        fallback_source,
        core,
        default_config: raw.default_config,
        voltage_switch_ns_per_100mv: raw.voltage_switch_ns_per_100mv,
        max_intermediate_hz: raw.max_intermediate_hz,
        energy: raw.energy,
        name_index,
    })
}

/// Load one of the built-in virtual platforms ("vpa" or "vpb").
pub fn get_platform(name: &str) -> Result<Arc<PlatformModel>> {
    let json = match name {
        "vpa" => VPA_JSON,
        "vpb" => VPB_JSON,
        _ => return Err(Error::UnknownPlatform(name.to_string())),
    };
    let model = parse_platform(json)?;
    debug_assert!(validate_model(&model).is_empty());
    Ok(Arc::new(model))
}

/// Structural validation; returns human-readable violations (empty = valid).
pub fn validate_model(model: &PlatformModel) -> Vec<String> {
    let mut v = Vec::new();
    let n = model.clocks.len();

    if model.reset_registers.len() != model.register_count {
        v.push("reset_registers length differs from register_count".into());
    }

    for c in &model.clocks {
        let name = &c.name;
        for p in &c.parent_options {
            if p.index() >= n {
                v.push(format!("{name}: parent option {} does not exist", p.0));
            }
        }
        match c.kind {
            ClockKind::Source => {
                if !c.parent_options.is_empty() {
                    v.push(format!("{name}: source with parent options"));
                }
                if c.source_frequency.is_none() && !c.caps.scalable {
                    v.push(format!("{name}: source without a frequency"));
                }
            }
            ClockKind::Mux => {
                if c.parent_options.len() < 2 {
                    v.push(format!("{name}: mux needs at least two parent options"));
                }
            }
            ClockKind::Gate | ClockKind::Scaler => {
                if c.parent_options.len() != 1 {
                    v.push(format!("{name}: needs exactly one parent option"));
                }
            }
            ClockKind::Consumer => {
                if c.parent_options.len() != 1 {
                    v.push(format!("{name}: consumer needs exactly one parent"));
                }
                if !model.children(c.id).is_empty() {
                    v.push(format!("{name}: consumer has children"));
                }
            }
        }
        if c.caps.muxable && c.kind != ClockKind::Mux {
            v.push(format!("{name}: muxable but not a mux"));
        }
        if c.caps.scalable && !matches!(c.kind, ClockKind::Scaler | ClockKind::Source) {
            v.push(format!("{name}: scalable but neither scaler nor source"));
        }
        if c.field.pack().is_err() {
            v.push(format!("{name}: register field exceeds bit budgets"));
        }
        if (c.field.register_index as usize) >= model.register_count && c.field.width > 0 {
            v.push(format!("{name}: register index out of range"));
        }
        // Mapping bijection over the declared domain.
        for logical in c.mapping.domain() {
            match c.mapping.encode(logical).and_then(|r| c.mapping.decode(r)) {
                Ok(back) if back == logical => {}
                _ => v.push(format!("{name}: mapping not bijective at {logical}")),
            }
        }
        if c.kind == ClockKind::Mux {
            let dom = c.mapping.domain();
            if dom.len() != c.parent_options.len()
                || dom != (0..c.parent_options.len() as u64).collect::<Vec<_>>()
            {
                v.push(format!("{name}: mux mapping must cover parent indices"));
            }
        }
    }

    // Acyclicity via DFS over parent options.
    {
        let mut mark = vec![0u8; n]; // 0 unvisited, 1 on stack, 2 done
        fn dfs(model: &PlatformModel, i: usize, mark: &mut [u8], v: &mut Vec<String>) {
            mark[i] = 1;
            for p in &model.clocks[i].parent_options {
                let j = p.index();
                if j >= mark.len() {
                    continue;
                }
                if mark[j] == 1 {
                    v.push(format!("cycle through {}", model.clocks[j].name));
                } else if mark[j] == 0 {
                    dfs(model, j, mark, v);
                }
            }
            mark[i] = 2;
        }
        for i in 0..n {
            if mark[i] == 0 {
                dfs(model, i, &mut mark, &mut v);
            }
        }
    }

    // Voltage ranges: descending voltage, strictly decreasing max frequency.
    for w in model.voltage_ranges.windows(2) {
        if w[1].core_voltage >= w[0].core_voltage {
            v.push("voltage ranges not in descending voltage order".into());
        }
        if w[1].max_frequency >= w[0].max_frequency {
            v.push("voltage range max frequencies not strictly decreasing".into());
        }
    }
    if model.flash_table.len() != model.voltage_ranges.len() {
        v.push("flash table must have one row list per voltage range".into());
    }
    for (i, rows) in model.flash_table.iter().enumerate() {
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 {
                v.push(format!("flash table {i}: thresholds not strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                v.push(format!("flash table {i}: wait states decrease with frequency"));
            }
        }
        if let Some(range) = model.voltage_ranges.get(i) {
            if rows.last().map(|(t, _)| *t < range.max_frequency).unwrap_or(true) {
                v.push(format!("flash table {i}: no wait state covers the range maximum"));
            }
        }
    }

    let fb = &model.clocks[model.fallback_source.index()];
    if fb.kind != ClockKind::Source || fb.pll {
        v.push("fallback source must be a plain source".into());
    }
    if fb.caps.gateable {
        v.push("fallback source must be always available (not gateable)".into());
    }

    let cores: Vec<_> = model
        .clocks
        .iter()
        .filter(|c| c.kind == ClockKind::Consumer && c.name == "core")
        .collect();
    if cores.len() != 1 {
        v.push("platform must have exactly one consumer named core".into());
    }

    let e = &model.energy;
    if e.capacitance_eff <= 0.0
        || e.static_current_a <= 0.0
        || e.supply_voltage <= 0.0
        || e.alpha_memory.reg <= 0.0
        || e.alpha_memory.ram <= 0.0
        || e.alpha_memory.flash <= 0.0
    {
        v.push("energy parameters must be strictly positive".into());
    }

    for r in &model.voltage_ranges {
        if r.core_voltage <= 0.0 {
            v.push(format!("range {}: non-positive core voltage", r.id));
        }
    }

    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_platforms_are_valid() {
        for name in ["vpa", "vpb"] {
            let p = get_platform(name).unwrap();
            let violations = validate_model(&p);
            assert!(violations.is_empty(), "{name}: {violations:?}");
        }
        assert!(matches!(get_platform("vpx"), Err(Error::UnknownPlatform(_))));
    }

    #[test]
    fn vpa_core_mux_offers_expected_sources() {
        let p = get_platform("vpa").unwrap();
        let mux = p.clock(p.clock_by_name("core_mux").unwrap());
        let names: Vec<_> = mux
            .parent_options
            .iter()
            .map(|id| p.clock_name(*id))
            .collect();
        assert_eq!(names, vec!["msi", "hsi16", "hse", "pll_r"]);
    }

    #[test]
    fn vpb_has_single_range_and_40mhz_top() {
        let p = get_platform("vpb").unwrap();
        assert_eq!(p.voltage_ranges.len(), 1);
        assert_eq!(p.max_core_frequency(), 40_000_000);
    }

    #[test]
    fn validate_flags_missing_parent() {
        let p = get_platform("vpa").unwrap();
        let mut broken = parse_platform(VPA_JSON).unwrap();
        broken.clocks[p.core.index()].parent_options = vec![ClockId(999)];
        let v = validate_model(&broken);
        assert!(v.iter().any(|m| m.contains("999")), "{v:?}");
    }

    #[test]
    fn validate_flags_decreasing_threshold() {
        let mut broken = parse_platform(VPA_JSON).unwrap();
        broken.flash_table[0] = vec![(32_000_000, 1), (16_000_000, 0), (80_000_000, 4)];
        let v = validate_model(&broken);
        assert!(v.iter().any(|m| m.contains("thresholds")), "{v:?}");
    }

    #[test]
    fn wait_state_lookup_matches_tables() {
        let p = get_platform("vpa").unwrap();
        assert_eq!(p.wait_states_for(0, 80_000_000), Some(4));
        assert_eq!(p.wait_states_for(0, 16_000_000), Some(0));
        assert_eq!(p.wait_states_for(1, 8_000_000), Some(0));
        assert_eq!(p.wait_states_for(1, 80_000_000), None);
    }
}
