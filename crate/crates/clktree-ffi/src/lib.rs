//! C ABI surface over the clktree core. All functions return a `ClkStatus`
//! (0 = ok); handles are opaque and must be released with the matching
//! `*_free`. The last error message is kept per thread and stays valid until
//! the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::sync::Arc;

use clktree::configurator::ClockState;
use clktree::error::Error;
use clktree::platform::{get_platform, PlatformModel};
use clktree::sim::{run_scenario, MemoryClass, MicroOp, Scenario, SimOptions};
use clktree::transitions::{explore_core_configs, transition_to, CoreConfig, Hooks};

/// Status codes mirrored from the core error enum. Values are part of the
/// ABI; append only.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ClkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    UnknownPlatform = 3,
    UnknownClock = 4,
    OutOfDomain = 5,
    IndexOutOfRange = 6,
    ClockDisabled = 7,
    ConstraintViolation = 8,
    Vetoed = 9,
    ReadyTimeout = 10,
    InvalidArgument = 11,
    Io = 12,
    Other = 13,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: ClkStatus, message: &str) -> ClkStatus {
    let rendered = CString::new(message.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = rendered);
    status
}

fn fail_err(err: Error) -> ClkStatus {
    let status = match &err {
        Error::UnknownPlatform(_) => ClkStatus::UnknownPlatform,
        Error::UnknownClock(_) => ClkStatus::UnknownClock,
        Error::OutOfDomain(_) | Error::UnknownRegisterValue(_) | Error::NotACandidate { .. } => {
            ClkStatus::OutOfDomain
        }
        Error::ClockDisabled(_) | Error::Unconfigured(_) => ClkStatus::ClockDisabled,
        Error::ConstraintViolation(_) => ClkStatus::ConstraintViolation,
        Error::Vetoed(_) => ClkStatus::Vetoed,
        Error::ReadyTimeout(_) => ClkStatus::ReadyTimeout,
        Error::Io(_) => ClkStatus::Io,
        _ => ClkStatus::Other,
    };
    fail(status, &format!("{}: {err}", err.code()))
}

/// Opaque platform model handle.
pub struct ClkPlatform {
    inner: Arc<PlatformModel>,
}

/// Opaque mutable clock-tree state handle. Not thread-safe; confine each
/// handle to one thread.
pub struct ClkState {
    state: ClockState,
    hooks: Hooks,
    explored: Arc<Vec<CoreConfig>>,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, ClkStatus> {
    if ptr.is_null() {
        return Err(fail(ClkStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(ClkStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Returns the message recorded by the last failing call on this thread.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn clk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opens a built-in platform ("vpa" or "vpb") and stores the handle in `out`.
#[no_mangle]
pub unsafe extern "C" fn clk_platform_open(
    name: *const c_char,
    out: *mut *mut ClkPlatform,
) -> ClkStatus {
    if out.is_null() {
        return fail(ClkStatus::NullArgument, "out handle is null");
    }
    let name = match cstr(name) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match get_platform(name) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(ClkPlatform { inner }));
            ClkStatus::Ok
        }
        Err(e) => fail_err(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn clk_platform_free(platform: *mut ClkPlatform) {
    if !platform.is_null() {
        drop(Box::from_raw(platform));
    }
}

/// Creates a clock-tree state in the platform's default configuration. The
/// platform handle may be freed afterwards; the state keeps its own reference.
#[no_mangle]
pub unsafe extern "C" fn clk_state_new(
    platform: *const ClkPlatform,
    out: *mut *mut ClkState,
) -> ClkStatus {
    if platform.is_null() || out.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    let model = Arc::clone(&(*platform).inner);
    match ClockState::new(model) {
        Ok(mut state) => {
            let explored = explore_core_configs(&mut state);
            *out = Box::into_raw(Box::new(ClkState {
                state,
                hooks: Hooks::new(),
                explored,
            }));
            ClkStatus::Ok
        }
        Err(e) => fail_err(e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn clk_state_free(state: *mut ClkState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Reads the effective frequency of a clock by name.
#[no_mangle]
pub unsafe extern "C" fn clk_clock_frequency(
    state: *const ClkState,
    clock: *const c_char,
    out_hz: *mut u64,
) -> ClkStatus {
    if state.is_null() || out_hz.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    let clock = match cstr(clock) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let st = &(*state).state;
    let result = st
        .platform
        .clock_by_name(clock)
        .and_then(|id| st.clock_frequency(id));
    match result {
        Ok(hz) => {
            *out_hz = hz;
            ClkStatus::Ok
        }
        Err(e) => fail_err(e),
    }
}

/// Number of reachable core configurations.
#[no_mangle]
pub unsafe extern "C" fn clk_explore_count(state: *const ClkState, out: *mut usize) -> ClkStatus {
    if state.is_null() || out.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    *out = (*state).explored.len();
    ClkStatus::Ok
}

/// Core frequency of the explored configuration at `index` (sorted ascending).
#[no_mangle]
pub unsafe extern "C" fn clk_explored_frequency(
    state: *const ClkState,
    index: usize,
    out_hz: *mut u64,
) -> ClkStatus {
    if state.is_null() || out_hz.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    match (&(*state).explored).get(index) {
        Some(cfg) => {
            *out_hz = cfg.frequency;
            ClkStatus::Ok
        }
        None => fail(ClkStatus::IndexOutOfRange, "explored index out of range"),
    }
}

/// Plans and executes a transition to the explored configuration at `index`.
/// On failure the register state is unchanged.
#[no_mangle]
pub unsafe extern "C" fn clk_transition_to(state: *mut ClkState, index: usize) -> ClkStatus {
    if state.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    let handle = &mut *state;
    let target = match handle.explored.get(index) {
        Some(cfg) => cfg.clone(),
        None => return fail(ClkStatus::IndexOutOfRange, "explored index out of range"),
    };
    match transition_to(&mut handle.state, &target, &mut handle.hooks) {
        Ok(_) => ClkStatus::Ok,
        Err(e) => fail_err(e),
    }
}

/// Sets a scaler (or scalable source) to a logical value.
#[no_mangle]
pub unsafe extern "C" fn clk_set_scaler(
    state: *mut ClkState,
    clock: *const c_char,
    value: u64,
) -> ClkStatus {
    if state.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    let clock = match cstr(clock) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let handle = &mut *state;
    let result = handle
        .state
        .platform
        .clock_by_name(clock)
        .and_then(|id| handle.state.set_scaler(id, value));
    match result {
        Ok(()) => ClkStatus::Ok,
        Err(e) => fail_err(e),
    }
}

/// Runs a simulation scenario and writes the JSON report to `report_path`.
/// `scenario` is one of "producer_consumer", "synthetic_suite", "radio_send",
/// "radio_recv"; `param` is the task count or payload size where applicable.
#[no_mangle]
pub unsafe extern "C" fn clk_simulate(
    platform: *const ClkPlatform,
    scenario: *const c_char,
    param: u32,
    dvfs: bool,
    seed: u64,
    report_path: *const c_char,
) -> ClkStatus {
    if platform.is_null() {
        return fail(ClkStatus::NullArgument, "null handle");
    }
    let scenario = match cstr(scenario) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let path = match cstr(report_path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let scenario = match scenario {
        "producer_consumer" => Scenario::ProducerConsumer,
        "synthetic_suite" => Scenario::SyntheticSuite(param),
        "radio_send" => Scenario::RadioSend(param),
        "radio_recv" => Scenario::RadioRecv(param),
        "micro" => Scenario::Micro(MicroOp::Add, MemoryClass::Reg),
        other => return fail(ClkStatus::InvalidArgument, &format!("unknown scenario {other}")),
    };
    let options = SimOptions {
        dvfs,
        seed,
        ..SimOptions::default()
    };
    let result = run_scenario(Arc::clone(&(*platform).inner), scenario, &options)
        .map_err(|e| fail_err(e))
        .and_then(|(report, _)| {
            serde_json::to_vec_pretty(&report).map_err(|e| fail_err(Error::Json(e)))
        })
        .and_then(|bytes| {
            std::fs::write(path, bytes).map_err(|e| fail_err(Error::Io(e)))
        });
    match result {
        Ok(()) => ClkStatus::Ok,
        Err(status) => status,
    }
}

/// ABI version of this library; bump on any breaking header change.
#[no_mangle]
pub extern "C" fn clk_abi_version() -> u32 {
    1
}
