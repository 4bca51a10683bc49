//! Query and mutate individual clock instances: derive effective
//! frequencies, change scalers/parents/gates, and check voltage and flash
//! wait-state constraints.
//!
//! A [`ClockState`] owns one simulated register file plus a decoded logical
//! topology that mirrors it. The topology is the source of truth for
//! frequency derivation between operations; coherence with the registers is
//! re-established by [`ClockState::resync`] and asserted by tests.

use std::sync::Arc;

use crate::backend::{Backend, RegisterFile};
use crate::error::{Error, Result};
use crate::model::{ClockId, ClockKind, RegisterFieldDescriptor, ScaleUnit, TopologyEntry};
use crate::platform::{DefaultStep, PlatformModel};
use crate::transitions::{CoreConfig, Policy};

#[derive(Debug, Clone)]
pub struct ClockState {
    pub platform: Arc<PlatformModel>,
    pub backend: RegisterFile,
    topology: Vec<TopologyEntry>,
    pub voltage_range: usize,
    pub wait_states: u32,
    /// Exploration cache; dropped on topology-affecting external changes.
    pub(crate) explored: Option<Arc<Vec<CoreConfig>>>,
    /// Set while execute_plan drives this state, so internal phase writes do
    /// not invalidate the exploration cache and reentrancy is detectable.
    pub(crate) in_transition: bool,
    /// Planning preference applied when choosing voltage range / wait states.
    pub policy: Policy,
}

impl ClockState {
    /// State at hardware reset (no default configuration applied).
    pub fn at_reset(platform: Arc<PlatformModel>) -> Self {
        let backend = platform.make_register_file();
        let mut s = Self {
            platform,
            backend,
            topology: Vec::new(),
            voltage_range: 0,
            wait_states: 0,
            explored: None,
            in_transition: false,
            policy: Policy::default(),
        };
        s.resync();
        s
    }

    /// State after applying the platform's default static configuration.
    pub fn new(platform: Arc<PlatformModel>) -> Result<Self> {
        let mut s = Self::at_reset(platform);
        s.apply_default_config()?;
        Ok(s)
    }

    pub fn apply_default_config(&mut self) -> Result<()> {
        for step in self.platform.default_config.clone() {
            match step {
                DefaultStep::SetWaitStates { ws } => self.set_wait_states(ws)?,
                DefaultStep::SetVoltageRange { range } => self.set_voltage_range(range)?,
                DefaultStep::SetScaler { clock, value } => {
                    let id = self.platform.clock_by_name(&clock)?;
                    self.set_scaler(id, value)?;
                }
                DefaultStep::SetGate { clock, enabled } => {
                    let id = self.platform.clock_by_name(&clock)?;
                    self.set_gate(id, enabled)?;
                    if enabled {
                        if let Some(delay) = self.platform.ready_delay_ns[id.index()] {
                            self.backend.advance_time(delay);
                        }
                    }
                }
                DefaultStep::SetParent { clock, parent } => {
                    let id = self.platform.clock_by_name(&clock)?;
                    let pid = self.platform.clock_by_name(&parent)?;
                    self.set_parent(id, pid)?;
                }
            }
        }
        self.explored = None;
        Ok(())
    }

    pub fn entry(&self, id: ClockId) -> &TopologyEntry {
        &self.topology[id.index()]
    }

    pub fn topology(&self) -> &[TopologyEntry] {
        &self.topology
    }

    // -- decoding ----------------------------------------------------------

    fn decode_entry(&mut self, id: ClockId) -> TopologyEntry {
        let desc = self.platform.clock(id).clone();
        let enabled = match desc.field.enable_bit {
            Some(bit) if desc.caps.gateable => {
                self.backend.peek_bit(desc.field.register_index, bit)
            }
            _ => true,
        };
        let raw = if desc.field.width > 0 {
            Some(self.peek_field(&desc.field))
        } else {
            None
        };
        let parent = match desc.kind {
            ClockKind::Mux => raw
                .and_then(|r| desc.mapping.decode(r).ok())
                .and_then(|idx| desc.parent_options.get(idx as usize).copied()),
            _ => desc.fixed_parent(),
        };
        let scale = if desc.caps.scalable {
            raw.and_then(|r| desc.mapping.decode(r).ok())
        } else {
            None
        };
        TopologyEntry {
            clock: id,
            parent,
            scale,
            enabled,
        }
    }

    fn peek_field(&self, field: &RegisterFieldDescriptor) -> u32 {
        (self.backend.word(field.register_index as usize) & field.mask()) >> field.shift
    }

    /// Rebuild the logical topology from raw register contents.
    pub fn resync(&mut self) {
        self.topology = (0..self.platform.clocks.len())
            .map(|i| self.decode_entry(ClockId(i as u16)))
            .collect();
        self.voltage_range = self.peek_field(&self.platform.voltage_field) as usize;
        self.wait_states = self.peek_field(&self.platform.wait_state_field);
    }

    // -- queries -----------------------------------------------------------

    /// Effective output frequency of `clock`, derived along its active path.
    pub fn clock_frequency(&self, clock: ClockId) -> Result<u64> {
        let desc = self.platform.clock(clock);
        let entry = self.entry(clock);
        if desc.caps.gateable && !entry.enabled {
            return Err(Error::ClockDisabled(desc.name.clone()));
        }
        if desc.kind == ClockKind::Source {
            return if desc.caps.scalable {
                entry
                    .scale
                    .ok_or_else(|| Error::Unconfigured(desc.name.clone()))
            } else {
                desc.source_frequency
                    .ok_or_else(|| Error::Unconfigured(desc.name.clone()))
            };
        }
        let parent = entry
            .parent
            .ok_or_else(|| Error::Unconfigured(desc.name.clone()))?;
        let base = self.clock_frequency(parent)?;
        if desc.kind != ClockKind::Scaler {
            return Ok(base);
        }
        let scale = entry
            .scale
            .ok_or_else(|| Error::Unconfigured(desc.name.clone()))?;
        scale_frequency(base, scale, desc.scale_unit)
    }

    /// Active parent of `clock` per decoded register state.
    pub fn current_parent(&self, clock: ClockId) -> Result<ClockId> {
        self.entry(clock)
            .parent
            .ok_or_else(|| Error::Unconfigured(self.platform.clock_name(clock).to_string()))
    }

    /// Active path from `clock` up to its source, inclusive.
    pub fn active_path(&self, clock: ClockId) -> Result<Vec<ClockId>> {
        let mut path = vec![clock];
        let mut cur = clock;
        while self.platform.clock(cur).kind != ClockKind::Source {
            cur = self.current_parent(cur)?;
            path.push(cur);
        }
        Ok(path)
    }

    /// Whether any enabled consumer currently receives its clock through
    /// `clock`.
    pub fn downstream_active(&self, clock: ClockId) -> bool {
        for child in self.platform.children(clock) {
            if self.entry(child).parent != Some(clock) {
                continue;
            }
            let desc = self.platform.clock(child);
            if desc.caps.gateable && !self.entry(child).enabled {
                continue;
            }
            if desc.kind == ClockKind::Consumer || self.downstream_active(child) {
                return true;
            }
        }
        false
    }

    /// Whether `clock` and every ancestor on its active path is enabled,
    /// configured and (where a ready bit exists) ready.
    pub fn is_path_ready(&self, clock: ClockId) -> bool {
        let mut cur = clock;
        loop {
            let desc = self.platform.clock(cur);
            let entry = self.entry(cur);
            if desc.caps.gateable && !entry.enabled {
                return false;
            }
            if let Some(bit) = desc.field.ready_bit {
                if !self.backend.peek_bit(desc.field.register_index, bit) {
                    return false;
                }
            }
            if desc.kind == ClockKind::Source {
                return true;
            }
            match entry.parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// Violations of the platform's voltage/flash limits for a proposed
    /// (core frequency, voltage range, wait states) triple; empty = ok.
    pub fn check_constraints(&self, core_hz: u64, range: usize, ws: u32) -> Vec<String> {
        let mut v = Vec::new();
        if core_hz == 0 {
            v.push("core must be clocked".to_string());
            return v;
        }
        let Some(r) = self.platform.voltage_ranges.get(range) else {
            v.push(format!("voltage range {range} does not exist"));
            return v;
        };
        if core_hz > r.max_frequency {
            v.push(format!(
                "{core_hz} Hz exceeds range {} max {} Hz",
                r.id, r.max_frequency
            ));
            return v;
        }
        match self.platform.wait_states_for(range, core_hz) {
            None => v.push(format!(
                "no admissible wait state for {core_hz} Hz in range {}",
                r.id
            )),
            Some(required) if ws < required => v.push(format!(
                "{ws} wait states insufficient for {core_hz} Hz (needs {required})"
            )),
            _ => {}
        }
        v
    }

    fn check_current(&self) -> Result<()> {
        match self.clock_frequency(self.platform.core) {
            Ok(hz) => {
                let v = self.check_constraints(hz, self.voltage_range, self.wait_states);
                if v.is_empty() {
                    Ok(())
                } else {
                    Err(Error::ConstraintViolation(v))
                }
            }
            Err(Error::DivisionInexact) => Err(Error::DivisionInexact),
            // A core that is transiently unclockable is caught by the
            // mutators' own gating checks, not here.
            Err(_) => Ok(()),
        }
    }

    // -- raw (unchecked) mutations ------------------------------------------

    pub(crate) fn raw_set_scaler(&mut self, clock: ClockId, logical: u64) -> Result<()> {
        let desc = self.platform.clock(clock).clone();
        let regval = desc.mapping.encode(logical)?;
        if desc.field.width > 0 {
            self.backend.write_field(&desc.field, regval)?;
        }
        self.topology[clock.index()].scale = Some(logical);
        Ok(())
    }

    pub(crate) fn raw_set_parent(&mut self, clock: ClockId, parent: ClockId) -> Result<()> {
        let desc = self.platform.clock(clock).clone();
        let index = desc
            .parent_options
            .iter()
            .position(|p| *p == parent)
            .ok_or_else(|| Error::NotACandidate {
                clock: desc.name.clone(),
                parent: self.platform.clock_name(parent).to_string(),
            })?;
        let regval = desc.mapping.encode(index as u64)?;
        self.backend.write_field(&desc.field, regval)?;
        self.topology[clock.index()].parent = Some(parent);
        Ok(())
    }

    pub(crate) fn raw_set_gate(&mut self, clock: ClockId, enabled: bool) -> Result<()> {
        let desc = self.platform.clock(clock).clone();
        let bit = desc.field.enable_bit.expect("gateable clock has enable bit");
        crate::backend::write_bit(&mut self.backend, desc.field.register_index, bit, enabled)?;
        self.topology[clock.index()].enabled = enabled;
        Ok(())
    }

    // -- checked mutations ---------------------------------------------------

    /// Set a scaler (or scalable source) to a new logical value.
    pub fn set_scaler(&mut self, clock: ClockId, logical: u64) -> Result<()> {
        let desc = self.platform.clock(clock);
        if !desc.caps.scalable {
            return Err(Error::NotScalable(desc.name.clone()));
        }
        desc.mapping.encode(logical)?;
        if !desc.caps.on_the_fly_adjustable && self.downstream_active(clock) {
            return Err(Error::NotOnTheFly(desc.name.clone()));
        }
        let mut scratch = self.clone();
        scratch.raw_set_scaler(clock, logical)?;
        scratch.check_current()?;
        self.raw_set_scaler(clock, logical)
    }

    /// Select a mux input.
    pub fn set_parent(&mut self, clock: ClockId, parent: ClockId) -> Result<()> {
        let desc = self.platform.clock(clock);
        if !desc.caps.muxable {
            return Err(Error::NotMuxable(desc.name.clone()));
        }
        if !desc.parent_options.contains(&parent) {
            return Err(Error::NotACandidate {
                clock: desc.name.clone(),
                parent: self.platform.clock_name(parent).to_string(),
            });
        }
        if self.downstream_active(clock) && !self.is_path_ready(parent) {
            return Err(Error::ParentNotReady(
                self.platform.clock_name(parent).to_string(),
            ));
        }
        let mut scratch = self.clone();
        scratch.raw_set_parent(clock, parent)?;
        scratch.check_current()?;
        self.raw_set_parent(clock, parent)?;
        self.invalidate_explored();
        Ok(())
    }

    /// Enable or disable a gateable clock. Disabling a clock that still
    /// feeds enabled consumers fails with GateInUse unless forced.
    pub fn set_gate(&mut self, clock: ClockId, enabled: bool) -> Result<()> {
        self.set_gate_with(clock, enabled, false)
    }

    pub fn set_gate_with(&mut self, clock: ClockId, enabled: bool, force: bool) -> Result<()> {
        let desc = self.platform.clock(clock);
        if !desc.caps.gateable || desc.field.enable_bit.is_none() {
            return Err(Error::NotGateable(desc.name.clone()));
        }
        if !enabled && !force && self.downstream_active(clock) {
            return Err(Error::GateInUse(desc.name.clone()));
        }
        self.raw_set_gate(clock, enabled)?;
        self.invalidate_explored();
        Ok(())
    }

    pub fn set_voltage_range(&mut self, range: usize) -> Result<()> {
        if range >= self.platform.voltage_ranges.len() {
            return Err(Error::ConstraintViolation(vec![format!(
                "voltage range {range} does not exist"
            )]));
        }
        if let Ok(hz) = self.clock_frequency(self.platform.core) {
            let v = self.check_constraints(hz, range, self.wait_states);
            if !v.is_empty() {
                return Err(Error::ConstraintViolation(v));
            }
        }
        let field = self.platform.voltage_field;
        self.backend.write_field(&field, range as u32)?;
        self.voltage_range = range;
        Ok(())
    }

    pub fn set_wait_states(&mut self, ws: u32) -> Result<()> {
        let field = self.platform.wait_state_field;
        if field.width < 32 && ws >= (1 << field.width) {
            return Err(Error::ValueTooWide {
                value: ws,
                width: field.width,
            });
        }
        if let Ok(hz) = self.clock_frequency(self.platform.core) {
            let v = self.check_constraints(hz, self.voltage_range, ws);
            if !v.is_empty() {
                return Err(Error::ConstraintViolation(v));
            }
        }
        self.backend.write_field(&field, ws)?;
        self.wait_states = ws;
        Ok(())
    }

    // -- snapshot / cache ----------------------------------------------------

    pub fn snapshot(&self) -> Vec<u32> {
        self.backend.words().to_vec()
    }

    pub fn restore(&mut self, snapshot: &[u32]) {
        self.backend.restore_words(snapshot);
        self.resync();
    }

    pub(crate) fn invalidate_explored(&mut self) {
        if !self.in_transition {
            self.explored = None;
        }
    }
}

/// Apply one scaler step: integer multiply or exact divide.
pub fn scale_frequency(base: u64, scale: u64, unit: Option<ScaleUnit>) -> Result<u64> {
    match unit {
        Some(ScaleUnit::Multiplier) => base.checked_mul(scale).ok_or(Error::DivisionInexact),
        Some(ScaleUnit::Divider) => {
            if scale == 0 || base % scale != 0 {
                Err(Error::DivisionInexact)
            } else {
                Ok(base / scale)
            }
        }
        _ => Ok(base),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::get_platform;

    fn vpa_reset() -> ClockState {
        ClockState::at_reset(get_platform("vpa").unwrap())
    }

    fn id(s: &ClockState, name: &str) -> ClockId {
        s.platform.clock_by_name(name).unwrap()
    }

    #[test]
    fn reset_state_runs_core_from_msi_at_4mhz() {
        let s = vpa_reset();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 4_000_000);
        assert_eq!(s.current_parent(id(&s, "core_mux")).unwrap(), id(&s, "msi"));
    }

    #[test]
    fn default_config_reaches_80mhz_on_msi_pll() {
        let s = ClockState::new(get_platform("vpa").unwrap()).unwrap();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 80_000_000);
        assert_eq!(
            s.current_parent(id(&s, "core_mux")).unwrap(),
            id(&s, "pll_r")
        );
        assert_eq!(s.current_parent(id(&s, "pll_src")).unwrap(), id(&s, "msi"));
    }

    #[test]
    fn pll_path_product_example() {
        // MSI at 48 MHz through M=1, N=10, R=6 yields 80 MHz.
        let mut s = vpa_reset();
        s.set_wait_states(2).unwrap();
        s.set_scaler(id(&s, "msi"), 48_000_000).unwrap();
        s.set_parent(id(&s, "pll_src"), id(&s, "msi")).unwrap();
        s.set_scaler(id(&s, "pll_m"), 1).unwrap();
        s.set_scaler(id(&s, "pll_n"), 10).unwrap();
        s.set_scaler(id(&s, "pll_r"), 6).unwrap();
        s.set_gate(id(&s, "pll_r"), true).unwrap();
        s.backend.advance_time(200_000);
        assert_eq!(s.clock_frequency(id(&s, "pll_r")).unwrap(), 80_000_000);
    }

    #[test]
    fn gates_pass_frequency_and_error_when_disabled() {
        let mut s = vpa_reset();
        let gate = id(&s, "tim_gate");
        assert!(matches!(
            s.clock_frequency(gate),
            Err(Error::ClockDisabled(_))
        ));
        s.set_gate(gate, true).unwrap();
        assert_eq!(s.clock_frequency(gate).unwrap(), 32_768);
    }

    #[test]
    fn scaler_divider_halves_live_core() {
        let mut s = ClockState::at_reset(get_platform("vpb").unwrap());
        let presc = id(&s, "hf_presc");
        s.set_scaler(presc, 2).unwrap();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 8_000_000);
        s.set_scaler(presc, 4).unwrap();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 4_000_000);
    }

    #[test]
    fn scaler_rejects_out_of_domain_and_range_violations() {
        let mut s = vpa_reset();
        assert!(matches!(
            s.set_scaler(id(&s, "pll_m"), 9),
            Err(Error::OutOfDomain(9))
        ));
        // Live MSI raise to 48 MHz needs 2 wait states first.
        assert!(matches!(
            s.set_scaler(id(&s, "msi"), 48_000_000),
            Err(Error::ConstraintViolation(_))
        ));
        // In range R2 (max 26 MHz) a raise past the range max must fail.
        s.set_voltage_range(1).unwrap();
        assert!(matches!(
            s.set_scaler(id(&s, "msi"), 48_000_000),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn set_parent_candidate_and_ready_rules() {
        let mut s = vpa_reset();
        assert!(matches!(
            s.set_parent(id(&s, "core_mux"), id(&s, "lsi")),
            Err(Error::NotACandidate { .. })
        ));
        // PLL output selected before its ready bit is set.
        s.set_parent(id(&s, "pll_src"), id(&s, "msi")).unwrap();
        s.set_gate(id(&s, "pll_r"), true).unwrap();
        assert!(matches!(
            s.set_parent(id(&s, "core_mux"), id(&s, "pll_r")),
            Err(Error::ParentNotReady(_))
        ));
        // HSI16 after its (simulated) startup delay is acceptable.
        s.set_gate(id(&s, "hsi16"), true).unwrap();
        s.backend.advance_time(10_000);
        s.set_parent(id(&s, "core_mux"), id(&s, "hsi16")).unwrap();
        assert_eq!(s.clock_frequency(s.platform.core).unwrap(), 16_000_000);
    }

    #[test]
    fn gate_in_use_is_overridable() {
        let mut s = ClockState::new(get_platform("vpa").unwrap()).unwrap();
        let pll = id(&s, "pll_r");
        assert!(matches!(s.set_gate(pll, false), Err(Error::GateInUse(_))));
        s.set_gate_with(pll, false, true).unwrap();
        assert!(matches!(
            s.clock_frequency(s.platform.core),
            Err(Error::ClockDisabled(_))
        ));
    }

    #[test]
    fn frequency_ops_never_touch_topology() {
        let mut s = ClockState::at_reset(get_platform("vpb").unwrap());
        let before: Vec<_> = s.topology().iter().map(|e| e.parent).collect();
        s.set_scaler(id(&s, "hfrco"), 8_000_000).unwrap();
        s.set_scaler(id(&s, "hf_presc"), 4).unwrap();
        s.set_scaler(id(&s, "hf_presc"), 1).unwrap();
        let after: Vec<_> = s.topology().iter().map(|e| e.parent).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn topology_stays_coherent_with_registers() {
        let mut s = ClockState::new(get_platform("vpa").unwrap()).unwrap();
        s.set_scaler(id(&s, "ahb_presc"), 2).unwrap();
        s.set_gate(id(&s, "tim_gate"), true).unwrap();
        let mut redecoded = s.clone();
        redecoded.resync();
        assert_eq!(redecoded.topology(), s.topology());
        assert_eq!(redecoded.voltage_range, s.voltage_range);
        assert_eq!(redecoded.wait_states, s.wait_states);
    }

    #[test]
    fn constraint_checks_match_tables() {
        let s = vpa_reset();
        assert!(s.check_constraints(80_000_000, 0, 4).is_empty());
        assert!(!s.check_constraints(80_000_000, 1, 4).is_empty());
        assert!(!s.check_constraints(0, 0, 0).is_empty());
        assert!(!s.check_constraints(80_000_000, 0, 3).is_empty());
    }
}
