//! C ABI over the simulator: environment-id parsing, the discrete action
//! table and an opaque multi-agent environment handle.
//!
//! Every fallible function returns a [`CadsimStatus`]; on failure the message
//! is available from [`cadsim_last_error`] on the same thread. Output strings
//! are NUL-terminated and truncated to the caller's capacity; functions that
//! write strings report the full length through `out_len` when it is non-null.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cadsim::env_id::{parse_env_id, EnvIdError};
use cadsim::pomg::{default_registry, make_env, AgentId, EnvError, MultiAgentEnv};
use cadsim::world::decode_action;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CadsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    UnknownToken = 3,
    MissingVersion = 4,
    EmptyUsid = 5,
    InvalidUsid = 6,
    NotRegistered = 7,
    ActionOutOfRange = 8,
    MissingAction = 9,
    UnknownAgentId = 10,
    EpisodeOver = 11,
    NotReset = 12,
    BufferTooSmall = 13,
    BadSpec = 14,
    Panic = 98,
    Internal = 99,
}

/// Continuous control produced by a discrete action.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CadsimControl {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

/// Opaque environment handle.
pub struct CadsimEnv {
    env: Box<dyn MultiAgentEnv>,
    agents: Vec<AgentId>,
    done: Vec<bool>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: CadsimStatus, message: impl Into<String>) -> CadsimStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn id_status(e: &EnvIdError) -> CadsimStatus {
    match e {
        EnvIdError::UnknownToken { .. } => CadsimStatus::UnknownToken,
        EnvIdError::MissingVersion => CadsimStatus::MissingVersion,
        EnvIdError::EmptyUsid => CadsimStatus::EmptyUsid,
        EnvIdError::InvalidUsid(_) => CadsimStatus::InvalidUsid,
        EnvIdError::NotRegistered(_) | EnvIdError::DuplicateId(_) => CadsimStatus::NotRegistered,
    }
}

fn env_status(e: &EnvError) -> CadsimStatus {
    match e {
        EnvError::EnvId(inner) => id_status(inner),
        EnvError::ActionOutOfRange { .. } => CadsimStatus::ActionOutOfRange,
        EnvError::MissingAction(_) => CadsimStatus::MissingAction,
        EnvError::UnknownAgentId(_) => CadsimStatus::UnknownAgentId,
        EnvError::EpisodeOver => CadsimStatus::EpisodeOver,
        EnvError::NotReset => CadsimStatus::NotReset,
        EnvError::BadSpec(_) | EnvError::NoPath(_) => CadsimStatus::BadSpec,
        _ => CadsimStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> CadsimStatus) -> CadsimStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(CadsimStatus::Panic, "panic inside cadsim"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, CadsimStatus> {
    if s.is_null() {
        return Err(fail(CadsimStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(CadsimStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Copies `s` into `buf` (NUL-terminated, truncated to `cap`).
unsafe fn write_str(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> CadsimStatus {
    if !out_len.is_null() {
        *out_len = s.len();
    }
    if buf.is_null() || cap == 0 {
        return if out_len.is_null() {
            fail(CadsimStatus::NullPointer, "null output buffer")
        } else {
            CadsimStatus::Ok
        };
    }
    let n = s.len().min(cap - 1);
    ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, n);
    *buf.add(n) = 0;
    if n < s.len() {
        return fail(CadsimStatus::BufferTooSmall, format!("need {} bytes, got {cap}", s.len() + 1));
    }
    CadsimStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cadsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` and returns its
/// full length in bytes (excluding the NUL).
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn cadsim_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses an environment id and writes its canonical form.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` null or valid for `cap`
/// bytes; `out_len` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cadsim_parse_env_id(
    name: *const c_char,
    out: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> CadsimStatus {
    guard(|| {
        let name = match read_str(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match parse_env_id(name) {
            Ok(id) => write_str(&id.canonical(), out, cap, out_len),
            Err(e) => fail(id_status(&e), e.to_string()),
        }
    })
}

/// Looks up the continuous control of a discrete action.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cadsim_decode_action(action: u32, out: *mut CadsimControl) -> CadsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(CadsimStatus::NullPointer, "null output");
        }
        match decode_action(action as usize) {
            Ok(c) => {
                *out = CadsimControl { steer: c.steer, throttle: c.throttle, brake: c.brake };
                CadsimStatus::Ok
            }
            Err(e) => fail(CadsimStatus::ActionOutOfRange, e.to_string()),
        }
    })
}

/// Creates a registered environment. Free it with [`cadsim_env_free`].
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_new(name: *const c_char, out: *mut *mut CadsimEnv) -> CadsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(CadsimStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let name = match read_str(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match make_env(&default_registry(), name) {
            Ok(env) => {
                let agents = env.agent_ids();
                let done = vec![false; agents.len()];
                *out = Box::into_raw(Box::new(CadsimEnv { env, agents, done }));
                CadsimStatus::Ok
            }
            Err(e) => fail(env_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `env` must be null or a handle from [`cadsim_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_free(env: *mut CadsimEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of agents, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_num_agents(env: *const CadsimEnv) -> usize {
    env.as_ref().map_or(0, |e| e.agents.len())
}

/// Length of one agent's observation, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_observation_dim(env: *const CadsimEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.observation_dim())
}

/// Size of the discrete action set, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_num_actions(env: *const CadsimEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.num_actions())
}

/// Writes the id of agent `index` (agents are in slot order).
///
/// # Safety
/// `env` must be a live handle; `out` null or valid for `cap` bytes;
/// `out_len` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_agent_id(
    env: *const CadsimEnv,
    index: usize,
    out: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> CadsimStatus {
    guard(|| {
        let Some(e) = env.as_ref() else { return fail(CadsimStatus::NullPointer, "null handle") };
        match e.agents.get(index) {
            Some(id) => write_str(id.as_str(), out, cap, out_len),
            None => fail(CadsimStatus::UnknownAgentId, format!("agent index {index} out of range")),
        }
    })
}

unsafe fn write_observations(
    e: &CadsimEnv,
    obs: &BTreeMap<AgentId, Vec<f64>>,
    out: *mut f64,
    cap: usize,
) -> CadsimStatus {
    let dim = e.env.observation_dim();
    let need = dim * e.agents.len();
    if out.is_null() {
        return fail(CadsimStatus::NullPointer, "null observation buffer");
    }
    if cap < need {
        return fail(CadsimStatus::BufferTooSmall, format!("need {need} observation values, got {cap}"));
    }
    for (i, id) in e.agents.iter().enumerate() {
        let dst = std::slice::from_raw_parts_mut(out.add(i * dim), dim);
        match obs.get(id) {
            Some(o) => dst.copy_from_slice(&o[..dim]),
            None => dst.fill(0.0),
        }
    }
    CadsimStatus::Ok
}

/// Starts an episode and writes `num_agents * observation_dim` values,
/// agent-major.
///
/// # Safety
/// `env` must be a live handle and `obs` valid for `obs_cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_reset(
    env: *mut CadsimEnv,
    seed: u64,
    obs: *mut f64,
    obs_cap: usize,
) -> CadsimStatus {
    guard(|| {
        let Some(e) = env.as_mut() else { return fail(CadsimStatus::NullPointer, "null handle") };
        match e.env.reset(seed) {
            Ok(o) => {
                e.done.fill(false);
                write_observations(e, &o, obs, obs_cap)
            }
            Err(err) => fail(env_status(&err), err.to_string()),
        }
    })
}

/// Advances one tick. `actions` holds one entry per agent in slot order;
/// entries of agents that are already done are ignored. `rewards` and
/// `dones` receive one entry per agent; `all_done` may be null.
///
/// # Safety
/// `env` must be a live handle; `actions` valid for `n_actions` values;
/// `obs` valid for `obs_cap` doubles; `rewards` and `dones` valid for
/// `num_agents` entries.
#[no_mangle]
pub unsafe extern "C" fn cadsim_env_step(
    env: *mut CadsimEnv,
    actions: *const u32,
    n_actions: usize,
    obs: *mut f64,
    obs_cap: usize,
    rewards: *mut f64,
    dones: *mut u8,
    all_done: *mut u8,
) -> CadsimStatus {
    guard(|| {
        let Some(e) = env.as_mut() else { return fail(CadsimStatus::NullPointer, "null handle") };
        if actions.is_null() || rewards.is_null() || dones.is_null() {
            return fail(CadsimStatus::NullPointer, "null action, reward or done buffer");
        }
        let n = e.agents.len();
        if n_actions != n {
            return fail(CadsimStatus::MissingAction, format!("expected {n} actions, got {n_actions}"));
        }
        let acts = std::slice::from_raw_parts(actions, n);
        let joint: BTreeMap<AgentId, usize> = e
            .agents
            .iter()
            .zip(acts)
            .enumerate()
            .filter(|(i, _)| !e.done[*i])
            .map(|(_, (id, &a))| (id.clone(), a as usize))
            .collect();
        let res = match e.env.step(&joint) {
            Ok(r) => r,
            Err(err) => return fail(env_status(&err), err.to_string()),
        };
        let status = write_observations(e, &res.observations, obs, obs_cap);
        if status != CadsimStatus::Ok {
            return status;
        }
        for (i, id) in e.agents.iter().enumerate() {
            *rewards.add(i) = res.rewards.get(id).copied().unwrap_or(0.0);
            let d = res.dones.get(id).copied().unwrap_or(e.done[i]);
            e.done[i] = d;
            *dones.add(i) = u8::from(d);
        }
        if !all_done.is_null() {
            *all_done = u8::from(res.all_done);
        }
        CadsimStatus::Ok
    })
}
