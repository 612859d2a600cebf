#ifndef CADSIM_H
#define CADSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CadsimStatus {
  CADSIM_STATUS_OK = 0,
  CADSIM_STATUS_NULL_POINTER = 1,
  CADSIM_STATUS_INVALID_UTF8 = 2,
  CADSIM_STATUS_UNKNOWN_TOKEN = 3,
  CADSIM_STATUS_MISSING_VERSION = 4,
  CADSIM_STATUS_EMPTY_USID = 5,
  CADSIM_STATUS_INVALID_USID = 6,
  CADSIM_STATUS_NOT_REGISTERED = 7,
  CADSIM_STATUS_ACTION_OUT_OF_RANGE = 8,
  CADSIM_STATUS_MISSING_ACTION = 9,
  CADSIM_STATUS_UNKNOWN_AGENT_ID = 10,
  CADSIM_STATUS_EPISODE_OVER = 11,
  CADSIM_STATUS_NOT_RESET = 12,
  CADSIM_STATUS_BUFFER_TOO_SMALL = 13,
  CADSIM_STATUS_BAD_SPEC = 14,
  CADSIM_STATUS_PANIC = 98,
  CADSIM_STATUS_INTERNAL = 99,
} CadsimStatus;

/**
 * Opaque environment handle.
 */
typedef struct CadsimEnv CadsimEnv;

/**
 * Continuous control produced by a discrete action.
 */
typedef struct CadsimControl {
  double steer;
  double throttle;
  double brake;
} CadsimControl;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cadsim_version(void);

/**
 * Copies the calling thread's last error message into `buf` and returns its
 * full length in bytes (excluding the NUL).
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t cadsim_last_error(char *buf, size_t cap);

/**
 * Parses an environment id and writes its canonical form.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` null or valid for `cap`
 * bytes; `out_len` null or writable.
 */
enum CadsimStatus cadsim_parse_env_id(const char *name, char *out, size_t cap, size_t *out_len);

/**
 * Looks up the continuous control of a discrete action.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum CadsimStatus cadsim_decode_action(uint32_t action, struct CadsimControl *out);

/**
 * Creates a registered environment. Free it with [`cadsim_env_free`].
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable.
 */
enum CadsimStatus cadsim_env_new(const char *name, struct CadsimEnv **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `env` must be null or a handle from [`cadsim_env_new`] not yet freed.
 */
void cadsim_env_free(struct CadsimEnv *env);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t cadsim_env_num_agents(const struct CadsimEnv *env);

/**
 * Length of one agent's observation, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t cadsim_env_observation_dim(const struct CadsimEnv *env);

/**
 * Size of the discrete action set, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t cadsim_env_num_actions(const struct CadsimEnv *env);

/**
 * Writes the id of agent `index` (agents are in slot order).
 *
 * # Safety
 * `env` must be a live handle; `out` null or valid for `cap` bytes;
 * `out_len` null or writable.
 */
enum CadsimStatus cadsim_env_agent_id(const struct CadsimEnv *env,
                                      size_t index,
                                      char *out,
                                      size_t cap,
                                      size_t *out_len);

/**
 * Starts an episode and writes `num_agents * observation_dim` values,
 * agent-major.
 *
 * # Safety
 * `env` must be a live handle and `obs` valid for `obs_cap` doubles.
 */
enum CadsimStatus cadsim_env_reset(struct CadsimEnv *env,
                                   uint64_t seed,
                                   double *obs,
                                   size_t obs_cap);

/**
 * Advances one tick. `actions` holds one entry per agent in slot order;
 * entries of agents that are already done are ignored. `rewards` and
 * `dones` receive one entry per agent; `all_done` may be null.
 *
 * # Safety
 * `env` must be a live handle; `actions` valid for `n_actions` values;
 * `obs` valid for `obs_cap` doubles; `rewards` and `dones` valid for
 * `num_agents` entries.
 */
enum CadsimStatus cadsim_env_step(struct CadsimEnv *env,
                                  const uint32_t *actions,
                                  size_t n_actions,
                                  double *obs,
                                  size_t obs_cap,
                                  double *rewards,
                                  uint8_t *dones,
                                  uint8_t *all_done);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CADSIM_H */
