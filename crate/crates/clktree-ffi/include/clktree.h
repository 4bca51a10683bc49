#ifndef CLKTREE_H
#define CLKTREE_H

/* Generated by cbindgen from clktree-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes mirrored from the core error enum. Values are part of the
// ABI; append only.
typedef enum ClkStatus {
  CLK_STATUS_OK = 0,
  CLK_STATUS_NULL_ARGUMENT = 1,
  CLK_STATUS_INVALID_UTF8 = 2,
  CLK_STATUS_UNKNOWN_PLATFORM = 3,
  CLK_STATUS_UNKNOWN_CLOCK = 4,
  CLK_STATUS_OUT_OF_DOMAIN = 5,
  CLK_STATUS_INDEX_OUT_OF_RANGE = 6,
  CLK_STATUS_CLOCK_DISABLED = 7,
  CLK_STATUS_CONSTRAINT_VIOLATION = 8,
  CLK_STATUS_VETOED = 9,
  CLK_STATUS_READY_TIMEOUT = 10,
  CLK_STATUS_INVALID_ARGUMENT = 11,
  CLK_STATUS_IO = 12,
  CLK_STATUS_OTHER = 13,
} ClkStatus;

// Opaque platform model handle.
typedef struct ClkPlatform ClkPlatform;

// Opaque mutable clock-tree state handle. Not thread-safe; confine each
// handle to one thread.
typedef struct ClkState ClkState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the message recorded by the last failing call on this thread.
// The pointer stays valid until the next failing call on the same thread.
const char *clk_last_error_message(void);

// Opens a built-in platform ("vpa" or "vpb") and stores the handle in `out`.
enum ClkStatus clk_platform_open(const char *name, struct ClkPlatform **out);

void clk_platform_free(struct ClkPlatform *platform);

// Creates a clock-tree state in the platform's default configuration. The
// platform handle may be freed afterwards; the state keeps its own reference.
enum ClkStatus clk_state_new(const struct ClkPlatform *platform, struct ClkState **out);

void clk_state_free(struct ClkState *state);

// Reads the effective frequency of a clock by name.
enum ClkStatus clk_clock_frequency(const struct ClkState *state,
                                   const char *clock,
                                   uint64_t *out_hz);

// Number of reachable core configurations.
enum ClkStatus clk_explore_count(const struct ClkState *state, size_t *out);

// Core frequency of the explored configuration at `index` (sorted ascending).
enum ClkStatus clk_explored_frequency(const struct ClkState *state, size_t index, uint64_t *out_hz);

// Plans and executes a transition to the explored configuration at `index`.
// On failure the register state is unchanged.
enum ClkStatus clk_transition_to(struct ClkState *state, size_t index);

// Sets a scaler (or scalable source) to a logical value.
enum ClkStatus clk_set_scaler(struct ClkState *state, const char *clock, uint64_t value);

// Runs a simulation scenario and writes the JSON report to `report_path`.
// `scenario` is one of "producer_consumer", "synthetic_suite", "radio_send",
// "radio_recv"; `param` is the task count or payload size where applicable.
enum ClkStatus clk_simulate(const struct ClkPlatform *platform,
                            const char *scenario,
                            uint32_t param,
                            bool dvfs,
                            uint64_t seed,
                            const char *report_path);

// ABI version of this library; bump on any breaking header change.
uint32_t clk_abi_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLKTREE_H */
