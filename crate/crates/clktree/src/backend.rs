//! Simulated memory-mapped register file with timing behavior (ready flags
//! that set after a configurable delay), behind a small backend contract that
//! a real hardware port could also satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RegisterFieldDescriptor;

/// Contract the framework programs against. Operations must be externally
/// synchronized by the caller; the simulator owns one backend per state.
pub trait Backend {
    fn read_field(&mut self, field: &RegisterFieldDescriptor) -> Result<u32>;
    fn write_field(&mut self, field: &RegisterFieldDescriptor, regval: u32) -> Result<()>;
    fn advance_time(&mut self, dt_ns: u64);
    fn now(&self) -> u64;
}

/// Declarative ready-flag timing: when any watched bit changes, the ready bit
/// clears immediately and sets again once `delay_ns` of simulated time has
/// elapsed. An optional gate bit models oscillators and PLLs that only become
/// ready while enabled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadyBehavior {
    pub watch_register: u8,
    pub watch_mask: u32,
    pub ready_register: u8,
    pub ready_bit: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<(u8, u8)>,
    pub delay_ns: u64,
}

/// One register access, logged when tracing is enabled. Reads appear with
/// `old == new`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub time_ns: u64,
    pub register: u8,
    pub old: u32,
    pub new: u32,
}

impl TraceRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:#010x},{:#010x}",
            self.time_ns, self.register, self.old, self.new
        )
    }

    pub fn is_write(&self) -> bool {
        self.old != self.new
    }
}

/// In-memory register file with a nanosecond simulation clock.
#[derive(Debug, Clone)]
pub struct RegisterFile {
    words: Vec<u32>,
    behaviors: Vec<ReadyBehavior>,
    /// Pending ready deadline per behavior.
    pending: Vec<Option<u64>>,
    now_ns: u64,
    trace: Vec<TraceRecord>,
    tracing: bool,
    /// Test hook: when set, pending ready deadlines never fire, which lets
    /// callers exercise ready-timeout paths.
    suppress_ready: bool,
}

impl RegisterFile {
    pub fn new(register_count: usize, reset: &[u32], behaviors: Vec<ReadyBehavior>) -> Self {
        let mut words = vec![0u32; register_count];
        for (i, w) in reset.iter().enumerate().take(register_count) {
            words[i] = *w;
        }
        let pending = vec![None; behaviors.len()];
        Self {
            words,
            behaviors,
            pending,
            now_ns: 0,
            trace: Vec::new(),
            tracing: false,
            suppress_ready: false,
        }
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        std::mem::take(&mut self.trace)
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn set_suppress_ready(&mut self, on: bool) {
        self.suppress_ready = on;
    }

    pub fn register_count(&self) -> usize {
        self.words.len()
    }

    /// Raw register word; test and snapshot use.
    pub fn word(&self, index: usize) -> u32 {
        self.words[index]
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// Restore a full register snapshot without touching ready timing that
    /// may still be pending.
    pub fn restore_words(&mut self, snapshot: &[u32]) {
        for (i, w) in snapshot.iter().enumerate() {
            if self.words[i] != *w {
                let old = self.words[i];
                self.words[i] = *w;
                self.log(i as u8, old, *w);
            }
        }
        // A restored snapshot re-evaluates ready gating.
        for b in 0..self.behaviors.len() {
            if !self.gate_on(b) {
                self.pending[b] = None;
            }
        }
    }

    /// Probe one bit without producing a trace record.
    pub fn peek_bit(&self, register: u8, bit: u8) -> bool {
        self.words[register as usize] >> bit & 1 == 1
    }

    /// Earliest pending ready deadline, if any.
    pub fn next_ready_deadline(&self) -> Option<u64> {
        self.pending.iter().flatten().min().copied()
    }

    /// Delay configured for the behavior driving `(register, bit)`.
    pub fn ready_delay(&self, register: u8, bit: u8) -> Option<u64> {
        self.behaviors
            .iter()
            .find(|b| b.ready_register == register && b.ready_bit == bit)
            .map(|b| b.delay_ns)
    }

    fn log(&mut self, register: u8, old: u32, new: u32) {
        if self.tracing {
            self.trace.push(TraceRecord {
                time_ns: self.now_ns,
                register,
                old,
                new,
            });
        }
    }

    fn gate_on(&self, behavior: usize) -> bool {
        match self.behaviors[behavior].gate {
            Some((reg, bit)) => self.peek_bit(reg, bit),
            None => true,
        }
    }

    fn set_bit(&mut self, register: u8, bit: u8, value: bool) {
        let old = self.words[register as usize];
        let new = if value {
            old | (1 << bit)
        } else {
            old & !(1 << bit)
        };
        if new != old {
            self.words[register as usize] = new;
            self.log(register, old, new);
        }
    }

    /// Re-evaluate ready behaviors after `register` changed from `old` to
    /// `new`.
    fn update_behaviors(&mut self, register: u8, old: u32, new: u32) {
        for b in 0..self.behaviors.len() {
            let (watch_reg, watch_mask, ready_reg, ready_bit, delay) = {
                let bh = &self.behaviors[b];
                (
                    bh.watch_register,
                    bh.watch_mask,
                    bh.ready_register,
                    bh.ready_bit,
                    bh.delay_ns,
                )
            };
            let gate_touched = self.behaviors[b]
                .gate
                .map(|(r, _)| r == register)
                .unwrap_or(false);
            let watched_change = watch_reg == register && (old ^ new) & watch_mask != 0;
            if !watched_change && !gate_touched {
                continue;
            }
            if !self.gate_on(b) {
                self.set_bit(ready_reg, ready_bit, false);
                self.pending[b] = None;
            } else if watched_change {
                self.set_bit(ready_reg, ready_bit, false);
                self.pending[b] = Some(self.now_ns + delay);
            }
        }
    }
}

impl Backend for RegisterFile {
    fn read_field(&mut self, field: &RegisterFieldDescriptor) -> Result<u32> {
        let idx = field.register_index as usize;
        if idx >= self.words.len() {
            return Err(Error::BadRegisterIndex(field.register_index));
        }
        let word = self.words[idx];
        self.log(field.register_index, word, word);
        if field.width == 0 {
            return Ok(0);
        }
        Ok((word >> field.shift) & (field.mask() >> field.shift))
    }

    fn write_field(&mut self, field: &RegisterFieldDescriptor, regval: u32) -> Result<()> {
        let idx = field.register_index as usize;
        if idx >= self.words.len() {
            return Err(Error::BadRegisterIndex(field.register_index));
        }
        if field.width < 32 && regval >= (1u32 << field.width) {
            return Err(Error::ValueTooWide {
                value: regval,
                width: field.width,
            });
        }
        let old = self.words[idx];
        let new = (old & !field.mask()) | ((regval << field.shift) & field.mask());
        if new != old {
            self.words[idx] = new;
            self.log(field.register_index, old, new);
            self.update_behaviors(field.register_index, old, new);
        }
        Ok(())
    }

    fn advance_time(&mut self, dt_ns: u64) {
        self.now_ns += dt_ns;
        if self.suppress_ready {
            return;
        }
        for b in 0..self.pending.len() {
            if let Some(deadline) = self.pending[b] {
                if deadline <= self.now_ns && self.gate_on(b) {
                    let (reg, bit) = {
                        let bh = &self.behaviors[b];
                        (bh.ready_register, bh.ready_bit)
                    };
                    self.set_bit(reg, bit, true);
                    self.pending[b] = None;
                }
            }
        }
    }

    fn now(&self) -> u64 {
        self.now_ns
    }
}

/// Convenience wrappers for single-bit access through a field's enable/ready
/// slots.
pub fn write_bit(file: &mut RegisterFile, register: u8, bit: u8, value: bool) -> Result<()> {
    let field = RegisterFieldDescriptor::plain(register, bit, 1);
    file.write_field(&field, value as u32)
}

pub fn read_bit(file: &mut RegisterFile, register: u8, bit: u8) -> Result<bool> {
    let field = RegisterFieldDescriptor::plain(register, bit, 1);
    Ok(file.read_field(&field)? == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(reg: u8, shift: u8, width: u8) -> RegisterFieldDescriptor {
        RegisterFieldDescriptor::plain(reg, shift, width)
    }

    #[test]
    fn read_field_masks() {
        let mut f = RegisterFile::new(2, &[0x0000_0070, 0xFFFF_FFFF], vec![]);
        assert_eq!(f.read_field(&field(0, 4, 3)).unwrap(), 7);
        assert_eq!(f.read_field(&field(1, 31, 1)).unwrap(), 1);
        assert!(matches!(
            f.read_field(&field(2, 0, 1)),
            Err(Error::BadRegisterIndex(2))
        ));
    }

    #[test]
    fn write_field_touches_only_addressed_bits() {
        let mut f = RegisterFile::new(1, &[0], vec![]);
        f.write_field(&field(0, 4, 3), 5).unwrap();
        assert_eq!(f.word(0), 0x0000_0050);
        assert!(matches!(
            f.write_field(&field(0, 4, 3), 9),
            Err(Error::ValueTooWide { .. })
        ));
        assert_eq!(f.word(0), 0x0000_0050);
    }

    fn pll_file() -> RegisterFile {
        // Multiplier field at reg0[8..15], enable bit reg0[24], ready reg0[25].
        let behavior = ReadyBehavior {
            watch_register: 0,
            watch_mask: 0x0100_7F00,
            ready_register: 0,
            ready_bit: 25,
            gate: Some((0, 24)),
            delay_ns: 200_000,
        };
        let mut f = RegisterFile::new(1, &[0], vec![behavior]);
        write_bit(&mut f, 0, 24, true).unwrap();
        f.advance_time(200_000);
        assert!(f.peek_bit(0, 25));
        f
    }

    #[test]
    fn ready_clears_on_watched_write_and_sets_after_delay() {
        let mut f = pll_file();
        f.write_field(&field(0, 8, 7), 10).unwrap();
        assert!(!f.peek_bit(0, 25));
        f.advance_time(50_000);
        assert!(!f.peek_bit(0, 25));
        f.advance_time(149_999);
        assert!(!f.peek_bit(0, 25));
        f.advance_time(1);
        assert!(f.peek_bit(0, 25));
    }

    #[test]
    fn ready_stays_clear_while_gated_off() {
        let mut f = pll_file();
        write_bit(&mut f, 0, 24, false).unwrap();
        assert!(!f.peek_bit(0, 25));
        f.advance_time(1_000_000);
        assert!(!f.peek_bit(0, 25));
        write_bit(&mut f, 0, 24, true).unwrap();
        f.advance_time(200_000);
        assert!(f.peek_bit(0, 25));
    }

    #[test]
    fn advance_without_behaviors_only_moves_time() {
        let mut f = RegisterFile::new(1, &[0xAB], vec![]);
        f.advance_time(1_000_000_000);
        assert_eq!(f.now(), 1_000_000_000);
        assert_eq!(f.word(0), 0xAB);
    }

    #[test]
    fn ready_monotone_until_next_change() {
        let mut f = pll_file();
        f.advance_time(5_000_000);
        assert!(f.peek_bit(0, 25));
        f.write_field(&field(0, 8, 7), 11).unwrap();
        assert!(!f.peek_bit(0, 25));
    }
}
