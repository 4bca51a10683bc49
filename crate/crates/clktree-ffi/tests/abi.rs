//! Exercises the C ABI end to end from Rust and checks the committed header.

use std::ffi::{CStr, CString};
use std::ptr;

use clktree_ffi::*;

fn open(name: &str) -> *mut ClkPlatform {
    let name = CString::new(name).unwrap();
    let mut platform = ptr::null_mut();
    let status = unsafe { clk_platform_open(name.as_ptr(), &mut platform) };
    assert_eq!(status, ClkStatus::Ok);
    assert!(!platform.is_null());
    platform
}

#[test]
fn handle_lifecycle_and_frequency() {
    let platform = open("vpa");
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { clk_state_new(platform, &mut state) }, ClkStatus::Ok);
    // The state holds its own platform reference.
    unsafe { clk_platform_free(platform) };

    let core = CString::new("core").unwrap();
    let mut hz = 0u64;
    assert_eq!(
        unsafe { clk_clock_frequency(state, core.as_ptr(), &mut hz) },
        ClkStatus::Ok
    );
    assert_eq!(hz, 80_000_000);

    let mut count = 0usize;
    assert_eq!(unsafe { clk_explore_count(state, &mut count) }, ClkStatus::Ok);
    assert!(count > 100);

    // Transition across every tenth configuration and confirm the core
    // follows.
    for index in (0..count).step_by(count / 10) {
        assert_eq!(unsafe { clk_transition_to(state, index) }, ClkStatus::Ok);
        let mut expected = 0u64;
        assert_eq!(
            unsafe { clk_explored_frequency(state, index, &mut expected) },
            ClkStatus::Ok
        );
        assert_eq!(
            unsafe { clk_clock_frequency(state, core.as_ptr(), &mut hz) },
            ClkStatus::Ok
        );
        assert_eq!(hz, expected);
    }
    unsafe { clk_state_free(state) };
}

#[test]
fn errors_set_status_and_message() {
    let name = CString::new("atmega328p").unwrap();
    let mut platform = ptr::null_mut();
    let status = unsafe { clk_platform_open(name.as_ptr(), &mut platform) };
    assert_eq!(status, ClkStatus::UnknownPlatform);
    let message = unsafe { CStr::from_ptr(clk_last_error_message()) };
    assert!(message.to_str().unwrap().contains("UnknownPlatform"));

    // Null arguments are rejected, never dereferenced.
    assert_eq!(
        unsafe { clk_platform_open(ptr::null(), &mut platform) },
        ClkStatus::NullArgument
    );
    assert_eq!(
        unsafe { clk_state_new(ptr::null(), ptr::null_mut()) },
        ClkStatus::NullArgument
    );

    let platform = open("vpb");
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { clk_state_new(platform, &mut state) }, ClkStatus::Ok);
    assert_eq!(
        unsafe { clk_transition_to(state, usize::MAX) },
        ClkStatus::IndexOutOfRange
    );
    let bogus = CString::new("warp_core").unwrap();
    let mut hz = 0u64;
    assert_eq!(
        unsafe { clk_clock_frequency(state, bogus.as_ptr(), &mut hz) },
        ClkStatus::UnknownClock
    );
    unsafe { clk_state_free(state) };
    unsafe { clk_platform_free(platform) };
}

#[test]
fn simulate_writes_report() {
    let platform = open("vpb");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let scenario = CString::new("synthetic_suite").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let status = unsafe {
        clk_simulate(platform, scenario.as_ptr(), 10, true, 42, c_path.as_ptr())
    };
    assert_eq!(status, ClkStatus::Ok);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["per_task"].as_array().unwrap().len(), 10);
    unsafe { clk_platform_free(platform) };

    assert_eq!(clk_abi_version(), 1);
}

#[test]
fn committed_header_is_current_and_compiles() {
    let header_path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/clktree.h");
    let header = std::fs::read_to_string(header_path).unwrap();
    for symbol in [
        "clk_platform_open",
        "clk_platform_free",
        "clk_state_new",
        "clk_state_free",
        "clk_clock_frequency",
        "clk_explore_count",
        "clk_explored_frequency",
        "clk_transition_to",
        "clk_set_scaler",
        "clk_simulate",
        "clk_last_error_message",
        "clk_abi_version",
    ] {
        assert!(header.contains(symbol), "header missing {symbol}");
    }
    // The header must stand alone as C99.
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-fsyntax-only", "-x", "c", header_path])
        .status()
        .unwrap();
    assert!(status.success(), "header fails C99 syntax check");
}
