//! Abstract clock node types, capability sets and the compact value/register
//! encodings shared by all other modules.
//!
//! A clock tree is built from a small set of base kinds: sources feed gates,
//! muxes and scalers until a consumer (CPU core, timer, bus) is reached.
//! Per-node configuration lives in packed register field descriptors plus a
//! value mapping that translates between logical values (divider, multiplier,
//! Hz) and raw register field contents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a clock node within one platform model. Stable per platform;
/// equals the node's index in [`crate::platform::PlatformModel::clocks`].
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct ClockId(pub u16);

impl ClockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    Source,
    Gate,
    Mux,
    Scaler,
    Consumer,
}

/// Whether a source is an internal RC oscillator or an external crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    Rc,
    Crystal,
}

/// Unit carried by a clock's logical scale value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleUnit {
    Divider,
    Multiplier,
    Hertz,
}

/// Functional capabilities of a clock node. Each capability maps to its own
/// interface surface on the configurator (gate control, parent selection,
/// scale control).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CapabilitySet {
    #[serde(default)]
    pub gateable: bool,
    #[serde(default)]
    pub muxable: bool,
    #[serde(default)]
    pub scalable: bool,
    /// Whether the setting may change while downstream consumers run.
    #[serde(default)]
    pub on_the_fly_adjustable: bool,
}

/// Implicit register value modifier for `Range` mappings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeModifier {
    /// Register value 0 encodes the range minimum.
    ZeroBased,
    /// Register value is `logical - k`.
    Offset(i64),
    /// Register value is log2 of the logical value; the domain is the set of
    /// powers of two within the range.
    Log2,
}

/// Translation between logical values and register field contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMapping {
    Range {
        min: u64,
        max: u64,
        modifier: RangeModifier,
    },
    /// Ordered `(logical, register)` pairs; logical values strictly
    /// increasing, register values unique.
    Lut(Vec<(u64, u32)>),
    /// A single fixed frequency with no register state behind it.
    FixedFrequency(u64),
}

impl ValueMapping {
    /// Map a logical value to its register encoding.
    pub fn encode(&self, logical: u64) -> Result<u32> {
        match self {
            ValueMapping::Range { min, max, modifier } => {
                if logical < *min || logical > *max {
                    return Err(Error::OutOfDomain(logical));
                }
                match modifier {
                    RangeModifier::ZeroBased => Ok((logical - min) as u32),
                    RangeModifier::Offset(k) => {
                        let raw = logical as i64 - k;
                        if raw < 0 || raw > u32::MAX as i64 {
                            return Err(Error::OutOfDomain(logical));
                        }
                        Ok(raw as u32)
                    }
                    RangeModifier::Log2 => {
                        if !logical.is_power_of_two() {
                            return Err(Error::OutOfDomain(logical));
                        }
                        Ok(logical.trailing_zeros())
                    }
                }
            }
            ValueMapping::Lut(entries) => entries
                .iter()
                .find(|(l, _)| *l == logical)
                .map(|(_, r)| *r)
                .ok_or(Error::OutOfDomain(logical)),
            ValueMapping::FixedFrequency(hz) => {
                if logical == *hz {
                    Ok(0)
                } else {
                    Err(Error::OutOfDomain(logical))
                }
            }
        }
    }

    /// Inverse of [`encode`](Self::encode) on the mapping's register image.
    pub fn decode(&self, regval: u32) -> Result<u64> {
        match self {
            ValueMapping::Range { min, max, modifier } => {
                let logical = match modifier {
                    RangeModifier::ZeroBased => min + regval as u64,
                    RangeModifier::Offset(k) => {
                        let v = k + regval as i64;
                        if v < 0 {
                            return Err(Error::UnknownRegisterValue(regval));
                        }
                        v as u64
                    }
                    RangeModifier::Log2 => {
                        if regval >= 64 {
                            return Err(Error::UnknownRegisterValue(regval));
                        }
                        1u64 << regval
                    }
                };
                if logical < *min || logical > *max {
                    return Err(Error::UnknownRegisterValue(regval));
                }
                Ok(logical)
            }
            ValueMapping::Lut(entries) => entries
                .iter()
                .find(|(_, r)| *r == regval)
                .map(|(l, _)| *l)
                .ok_or(Error::UnknownRegisterValue(regval)),
            ValueMapping::FixedFrequency(hz) => {
                if regval == 0 {
                    Ok(*hz)
                } else {
                    Err(Error::UnknownRegisterValue(regval))
                }
            }
        }
    }

    /// Every logical value the mapping accepts, in increasing order.
    pub fn domain(&self) -> Vec<u64> {
        match self {
            ValueMapping::Range { min, max, modifier } => match modifier {
                RangeModifier::Log2 => {
                    let mut v = Vec::new();
                    let mut p = 1u64;
                    while p <= *max {
                        if p >= *min {
                            v.push(p);
                        }
                        match p.checked_mul(2) {
                            Some(n) => p = n,
                            None => break,
                        }
                    }
                    v
                }
                _ => (*min..=*max).collect(),
            },
            ValueMapping::Lut(entries) => entries.iter().map(|(l, _)| *l).collect(),
            ValueMapping::FixedFrequency(hz) => vec![*hz],
        }
    }

    /// Pack a `Range` mapping into a single 32-bit word (min and max get 12
    /// bits each, the modifier tag 2 bits, an offset 6 signed bits). Together
    /// with the packed field descriptor this keeps a full scaler description
    /// within two 32-bit words.
    pub fn pack_range(&self) -> Result<u32> {
        let (min, max, modifier) = match self {
            ValueMapping::Range { min, max, modifier } => (*min, *max, *modifier),
            _ => return Err(Error::FieldOverflow),
        };
        if min > 0xFFF || max > 0xFFF {
            return Err(Error::FieldOverflow);
        }
        let (tag, k) = match modifier {
            RangeModifier::ZeroBased => (0u32, 0i64),
            RangeModifier::Offset(k) => (1, k),
            RangeModifier::Log2 => (2, 0),
        };
        if k < -32 || k > 31 {
            return Err(Error::FieldOverflow);
        }
        Ok((min as u32) | ((max as u32) << 12) | (tag << 24) | (((k as u32) & 0x3F) << 26))
    }

    pub fn unpack_range(word: u32) -> Result<ValueMapping> {
        let min = (word & 0xFFF) as u64;
        let max = ((word >> 12) & 0xFFF) as u64;
        let tag = (word >> 24) & 0x3;
        let raw_k = ((word >> 26) & 0x3F) as i64;
        let k = if raw_k >= 32 { raw_k - 64 } else { raw_k };
        let modifier = match tag {
            0 => RangeModifier::ZeroBased,
            1 => RangeModifier::Offset(k),
            2 => RangeModifier::Log2,
            _ => return Err(Error::FieldOverflow),
        };
        Ok(ValueMapping::Range { min, max, modifier })
    }
}

/// Condensed description of where a clock setting lives in the register file:
/// a register lookup-table index plus shift/width and optional enable and
/// ready bit positions. Packs into one 32-bit word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterFieldDescriptor {
    pub register_index: u8,
    pub shift: u8,
    pub width: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enable_bit: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ready_bit: Option<u8>,
}

impl RegisterFieldDescriptor {
    pub const fn plain(register_index: u8, shift: u8, width: u8) -> Self {
        Self {
            register_index,
            shift,
            width,
            enable_bit: None,
            ready_bit: None,
        }
    }

    /// Bit mask of the value field within its register.
    pub fn mask(&self) -> u32 {
        if self.width == 0 {
            0
        } else if self.width >= 32 {
            u32::MAX
        } else {
            ((1u32 << self.width) - 1) << self.shift
        }
    }

    /// Pack into one 32-bit word. Layout (LSB first): register_index 6 bits,
    /// shift 5, width 5, enable bit index 5 + presence flag, ready bit index
    /// 5 + presence flag; the top 4 bits stay clear.
    pub fn pack(&self) -> Result<u32> {
        if self.register_index >= 64 || self.shift >= 32 || self.width >= 32 {
            return Err(Error::FieldOverflow);
        }
        if self.shift as u32 + self.width as u32 > 32 {
            return Err(Error::FieldOverflow);
        }
        let mut w = self.register_index as u32;
        w |= (self.shift as u32) << 6;
        w |= (self.width as u32) << 11;
        if let Some(e) = self.enable_bit {
            if e >= 32 {
                return Err(Error::FieldOverflow);
            }
            w |= (e as u32) << 16;
            w |= 1 << 21;
        }
        if let Some(r) = self.ready_bit {
            if r >= 32 {
                return Err(Error::FieldOverflow);
            }
            w |= (r as u32) << 22;
            w |= 1 << 27;
        }
        Ok(w)
    }

    pub fn unpack(word: u32) -> Self {
        Self {
            register_index: (word & 0x3F) as u8,
            shift: ((word >> 6) & 0x1F) as u8,
            width: ((word >> 11) & 0x1F) as u8,
            enable_bit: if word & (1 << 21) != 0 {
                Some(((word >> 16) & 0x1F) as u8)
            } else {
                None
            },
            ready_bit: if word & (1 << 27) != 0 {
                Some(((word >> 22) & 0x1F) as u8)
            } else {
                None
            },
        }
    }
}

/// Static, immutable description of one clock node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClockDescriptor {
    pub id: ClockId,
    pub name: String,
    pub kind: ClockKind,
    pub caps: CapabilitySet,
    pub field: RegisterFieldDescriptor,
    pub mapping: ValueMapping,
    /// Candidate parents, ordered; the mux mapping encodes an index into
    /// this list.
    pub parent_options: Vec<ClockId>,
    /// Fixed output frequency; sources without a scalable mapping only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_frequency: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_unit: Option<ScaleUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_class: Option<SourceClass>,
    /// Marks scalers that are part of a PLL and need a lock period after
    /// reconfiguration.
    #[serde(default)]
    pub pll: bool,
}

impl ClockDescriptor {
    pub fn fixed_parent(&self) -> Option<ClockId> {
        match self.kind {
            ClockKind::Mux | ClockKind::Source => None,
            _ => self.parent_options.first().copied(),
        }
    }
}

/// Logical configuration state of one clock instance, mirroring the decoded
/// hardware registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyEntry {
    pub clock: ClockId,
    pub parent: Option<ClockId>,
    pub scale: Option<u64>,
    pub enabled: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(min: u64, max: u64, modifier: RangeModifier) -> ValueMapping {
        ValueMapping::Range { min, max, modifier }
    }

    fn lut_248() -> ValueMapping {
        ValueMapping::Lut(vec![(2, 0b01), (4, 0b10), (8, 0b11)])
    }

    #[test]
    fn encode_zero_based_range() {
        let m = range(1, 8, RangeModifier::ZeroBased);
        assert_eq!(m.encode(3).unwrap(), 2);
        assert_eq!(m.encode(1).unwrap(), 0);
        assert!(matches!(m.encode(9), Err(Error::OutOfDomain(9))));
    }

    #[test]
    fn encode_lut() {
        assert_eq!(lut_248().encode(4).unwrap(), 0b10);
        assert!(matches!(lut_248().encode(3), Err(Error::OutOfDomain(3))));
    }

    #[test]
    fn decode_range_bounds_and_log2() {
        assert_eq!(range(1, 8, RangeModifier::ZeroBased).decode(7).unwrap(), 8);
        assert_eq!(range(2, 16, RangeModifier::Log2).decode(3).unwrap(), 8);
        assert!(matches!(
            lut_248().decode(0b00),
            Err(Error::UnknownRegisterValue(0))
        ));
    }

    #[test]
    fn offset_modifier_round_trips() {
        let m = range(8, 86, RangeModifier::Offset(0));
        assert_eq!(m.encode(10).unwrap(), 10);
        assert_eq!(m.decode(86).unwrap(), 86);
        assert!(m.decode(87).is_err());
    }

    #[test]
    fn log2_domain_is_powers_of_two() {
        let m = range(2, 16, RangeModifier::Log2);
        assert_eq!(m.domain(), vec![2, 4, 8, 16]);
        assert!(m.encode(6).is_err());
    }

    #[test]
    fn field_pack_round_trip() {
        let d = RegisterFieldDescriptor::plain(5, 4, 3);
        assert_eq!(RegisterFieldDescriptor::unpack(d.pack().unwrap()), d);

        let maximal = RegisterFieldDescriptor {
            register_index: 63,
            shift: 31,
            width: 1,
            enable_bit: Some(31),
            ready_bit: Some(31),
        };
        let word = maximal.pack().unwrap();
        assert_eq!(RegisterFieldDescriptor::unpack(word), maximal);
        // Top 4 bits stay clear: the packing leaves room to spare.
        assert_eq!(word >> 28, 0);
    }

    #[test]
    fn field_pack_overflow() {
        let d = RegisterFieldDescriptor::plain(64, 0, 1);
        assert!(matches!(d.pack(), Err(Error::FieldOverflow)));
        let d = RegisterFieldDescriptor::plain(0, 30, 5);
        assert!(matches!(d.pack(), Err(Error::FieldOverflow)));
    }

    #[test]
    fn range_mapping_packs_to_one_word() {
        for m in [
            range(1, 8, RangeModifier::ZeroBased),
            range(8, 86, RangeModifier::Offset(0)),
            range(2, 16, RangeModifier::Log2),
            range(1, 4095, RangeModifier::Offset(-31)),
        ] {
            let w = m.pack_range().unwrap();
            assert_eq!(ValueMapping::unpack_range(w).unwrap(), m);
        }
        assert!(range(0, 5000, RangeModifier::ZeroBased)
            .pack_range()
            .is_err());
    }
}
