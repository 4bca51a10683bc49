//! Per-packet timing of the abstracted IEEE 802.15.4 radio: the radio is
//! reached over SPI (5 MHz target) and transmits at 250 kbit/s, so it is
//! the bottleneck for any reasonably fast core clock.

use crate::error::{Error, Result};

/// PHY/MAC framing overhead added to every payload.
pub const FRAME_OVERHEAD_BYTES: u32 = 47;
pub const MAX_PAYLOAD_BYTES: u32 = 256;
pub const AIR_BITRATE_HZ: f64 = 250e3;
pub const SPI_TARGET_HZ: f64 = 5e6;

/// Cycles the sender spends assembling a frame before the SPI transfer.
pub const SEND_COMPUTE_CYCLES: u64 = 400;
/// Cycles the receiver spends processing a frame after reading it out.
pub const RECV_COMPUTE_CYCLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioPhases {
    pub send_compute_ns: f64,
    pub recv_compute_ns: f64,
    /// Full-frame SPI transfer at min(5 MHz, core/prescaler).
    pub spi_ns: f64,
    /// On-air time of the full frame at 250 kbit/s.
    pub air_ns: f64,
}

pub fn radio_model(payload_bytes: u32, core_hz: u64, spi_prescaler: u64) -> Result<RadioPhases> {
    if payload_bytes > MAX_PAYLOAD_BYTES {
        return Err(Error::PayloadTooLarge(payload_bytes));
    }
    let frame_bits = ((payload_bytes + FRAME_OVERHEAD_BYTES) * 8) as f64;
    let spi_hz = SPI_TARGET_HZ.min(core_hz as f64 / spi_prescaler.max(1) as f64);
    Ok(RadioPhases {
        send_compute_ns: SEND_COMPUTE_CYCLES as f64 / core_hz as f64 * 1e9,
        recv_compute_ns: RECV_COMPUTE_CYCLES as f64 / core_hz as f64 * 1e9,
        spi_ns: frame_bits / spi_hz * 1e9,
        air_ns: frame_bits / AIR_BITRATE_HZ * 1e9,
    })
}
