use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cadsim::pomg::{default_registry, make_env};
use cadsim::world::ACTION_TABLE;
use cadsim_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { cadsim_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn parse_round_trips_and_reports_errors() {
    let name = CString::new("HeteCommCoopPOUrbanMAEnv-v0").unwrap();
    let mut buf = [0 as std::ffi::c_char; 64];
    let mut len = 0usize;
    let st = unsafe { cadsim_parse_env_id(name.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, CadsimStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "HeteCommCoopPOUrbanMAEnv-v0");
    assert_eq!(len, 27);

    let bad = CString::new("HomoNcomIndePOIntrxMASS3CTwn3").unwrap();
    let st = unsafe { cadsim_parse_env_id(bad.as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, CadsimStatus::MissingVersion);
    assert!(last_error().contains("version"));

    let st = unsafe { cadsim_parse_env_id(ptr::null(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, CadsimStatus::NullPointer);
}

#[test]
fn short_buffer_truncates() {
    let name = CString::new("HeteCommCoopPOUrbanMAEnv-v0").unwrap();
    let mut buf = [0 as std::ffi::c_char; 5];
    let mut len = 0usize;
    let st = unsafe { cadsim_parse_env_id(name.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, CadsimStatus::BufferTooSmall);
    assert_eq!(len, 27);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "Hete");
}

#[test]
fn action_table_matches_core() {
    for (a, row) in ACTION_TABLE.iter().enumerate() {
        let mut c = CadsimControl { steer: 9.0, throttle: 9.0, brake: 9.0 };
        assert_eq!(unsafe { cadsim_decode_action(a as u32, &mut c) }, CadsimStatus::Ok);
        assert_eq!([c.steer, c.throttle, c.brake], *row);
    }
    let mut c = CadsimControl { steer: 0.0, throttle: 0.0, brake: 0.0 };
    assert_eq!(unsafe { cadsim_decode_action(9, &mut c) }, CadsimStatus::ActionOutOfRange);
}

#[test]
fn handle_matches_native_env() {
    let name = "HomoNcomIndePOIntrxMASS3CTwn3-v0";
    let cname = CString::new(name).unwrap();
    let mut h: *mut CadsimEnv = ptr::null_mut();
    assert_eq!(unsafe { cadsim_env_new(cname.as_ptr(), &mut h) }, CadsimStatus::Ok);
    let n = unsafe { cadsim_env_num_agents(h) };
    let dim = unsafe { cadsim_env_observation_dim(h) };
    assert_eq!(n, 3);
    assert_eq!(unsafe { cadsim_env_num_actions(h) }, 9);

    let mut native = make_env(&default_registry(), name).unwrap();
    let agents = native.agent_ids();
    for (i, a) in agents.iter().enumerate() {
        let mut buf = [0 as std::ffi::c_char; 16];
        assert_eq!(unsafe { cadsim_env_agent_id(h, i, buf.as_mut_ptr(), 16, ptr::null_mut()) }, CadsimStatus::Ok);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), a.as_str());
    }

    let mut obs = vec![0.0; n * dim];
    assert_eq!(unsafe { cadsim_env_reset(h, 11, obs.as_mut_ptr(), obs.len()) }, CadsimStatus::Ok);
    let first = native.reset(11).unwrap();
    for (i, a) in agents.iter().enumerate() {
        assert_eq!(&obs[i * dim..(i + 1) * dim], first[a].as_slice());
    }

    let (mut rewards, mut dones, mut all) = (vec![0.0; n], vec![0u8; n], 0u8);
    let script = [0u32, 0, 8];
    for _ in 0..30 {
        let st = unsafe {
            cadsim_env_step(
                h,
                script.as_ptr(),
                n,
                obs.as_mut_ptr(),
                obs.len(),
                rewards.as_mut_ptr(),
                dones.as_mut_ptr(),
                &mut all,
            )
        };
        assert_eq!(st, CadsimStatus::Ok);
        let joint = agents.iter().cloned().zip(script.iter().map(|&a| a as usize)).collect();
        let res = native.step(&joint).unwrap();
        for (i, a) in agents.iter().enumerate() {
            assert_eq!(&obs[i * dim..(i + 1) * dim], res.observations[a].as_slice());
            assert_eq!(rewards[i], res.rewards[a]);
        }
    }
    // bad action surfaces the core error
    let bad = [0u32, 42, 0];
    let st = unsafe {
        cadsim_env_step(
            h,
            bad.as_ptr(),
            n,
            obs.as_mut_ptr(),
            obs.len(),
            rewards.as_mut_ptr(),
            dones.as_mut_ptr(),
            &mut all,
        )
    };
    assert_eq!(st, CadsimStatus::ActionOutOfRange);
    let short = unsafe { cadsim_env_reset(h, 0, obs.as_mut_ptr(), 3) };
    assert_eq!(short, CadsimStatus::BufferTooSmall);
    unsafe { cadsim_env_free(h) };
}

#[test]
fn unknown_env_is_reported() {
    let name = CString::new("HomoNcomIndePOIntrxMANopeZ-v0").unwrap();
    let mut h: *mut CadsimEnv = ptr::null_mut();
    assert_eq!(unsafe { cadsim_env_new(name.as_ptr(), &mut h) }, CadsimStatus::NotRegistered);
    assert!(h.is_null());
    unsafe { cadsim_env_free(ptr::null_mut()) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/cadsim.h")).unwrap();
    for f in [
        "cadsim_version",
        "cadsim_last_error",
        "cadsim_parse_env_id",
        "cadsim_decode_action",
        "cadsim_env_new",
        "cadsim_env_free",
        "cadsim_env_reset",
        "cadsim_env_step",
        "cadsim_env_agent_id",
        "typedef struct CadsimEnv CadsimEnv",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}

/// Compiles and runs a C program against the static library when a C
/// compiler is available.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libcadsim_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "C smoke test failed: {:?}", run);
}
