use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use tepower_ffi::*;

fn defaults(k: u32, c: u32, q: u32) -> TpInstanceParams {
    let mut p = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { tp_instance_params_default(k, c, q, p.as_mut_ptr()) }, TpStatus::Ok);
    unsafe { p.assume_init() }
}

fn simplified(k: u32, c: u32, q: u32) -> *mut TpInstance {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { tp_instance_new_simplified(&defaults(k, c, q), &mut inst) }, TpStatus::Ok);
    assert!(!inst.is_null());
    inst
}

fn last_error() -> String {
    let p = tp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn defaults_match_experiment_settings() {
    let p = defaults(3, 4, 6);
    assert_eq!((p.max_power, p.noise_power, p.sinr_threshold, p.beta), (10.0, 1.0, 3.0, 4.0));
}

#[test]
fn sinr_and_utility_round_trip() {
    let inst = simplified(2, 2, 6);
    // Both on channel 0 at full power: 10 / (1 + 5).
    let actions = [TpAction { channel: 0, power_index: 5 }, TpAction { channel: 0, power_index: 5 }];
    let mut sinr = 0.0;
    assert_eq!(unsafe { tp_instance_sinr(inst, actions.as_ptr(), 2, 0, &mut sinr) }, TpStatus::Ok);
    assert!((sinr - 10.0 / 6.0).abs() < 1e-12);
    let mut u = -1.0;
    assert_eq!(unsafe { tp_instance_utility(inst, actions.as_ptr(), 2, 1, &mut u) }, TpStatus::Ok);
    assert_eq!(u, 0.0);
    assert_eq!(unsafe { tp_instance_gain(inst, 0, 1, 1) }, 0.5);
    assert!(unsafe { tp_instance_gain(inst, 0, 7, 1) }.is_nan());
    unsafe { tp_instance_free(inst) };
}

#[test]
fn errors_set_status_and_message() {
    let inst = simplified(2, 2, 6);
    let bad = [TpAction { channel: 9, power_index: 0 }, TpAction { channel: 0, power_index: 0 }];
    let mut out = 0.0;
    assert_eq!(unsafe { tp_instance_sinr(inst, bad.as_ptr(), 2, 0, &mut out) }, TpStatus::InvalidParameter);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { tp_instance_sinr(ptr::null(), bad.as_ptr(), 2, 0, &mut out) }, TpStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { tp_instance_sinr(inst, bad.as_ptr(), 2, 0, ptr::null_mut()) }, TpStatus::InvalidParameter);
    unsafe { tp_instance_free(inst) };

    let mut p = defaults(2, 2, 6);
    p.num_power_levels = 1;
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { tp_instance_new_simplified(&p, &mut h) }, TpStatus::InvalidParameter);
    assert!(h.is_null());
    unsafe { tp_instance_free(ptr::null_mut()) };
    unsafe { tp_dtmc_free(ptr::null_mut()) };
}

#[test]
fn oracles_through_the_abi() {
    let inst = simplified(2, 2, 3);
    let mut g = TpGlobalSummary::default();
    assert_eq!(unsafe { tp_solve_global(inst, &mut g) }, TpStatus::Ok);
    assert_eq!(g.max_satisfiable, 2);
    // Levels are 0, 5, 10: each player alone on a channel at 5.
    assert_eq!(g.min_total_power, 10.0);
    assert_eq!(g.num_solutions, 2);
    let mut n = 0;
    assert_eq!(unsafe { tp_count_nash(inst, &mut n) }, TpStatus::Ok);
    assert!(n >= 2);
    unsafe { tp_instance_free(inst) };
}

#[test]
fn rayleigh_is_seeded() {
    let p = defaults(3, 3, 4);
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(tp_instance_new_rayleigh(&p, 11, &mut a), TpStatus::Ok);
        assert_eq!(tp_instance_new_rayleigh(&p, 11, &mut b), TpStatus::Ok);
        assert_eq!(tp_instance_gain(a, 1, 2, 0), tp_instance_gain(b, 1, 2, 0));
        let (mut ra, mut rb) = (TpTrialSummary::default(), TpTrialSummary::default());
        assert_eq!(tp_run_trial(a, 2000, 0.02, 5, &mut ra), TpStatus::Ok);
        assert_eq!(tp_run_trial(b, 2000, 0.02, 5, &mut rb), TpStatus::Ok);
        assert_eq!(ra, rb);
        assert_eq!(ra.iterations, 2000);
        assert!(ra.ne_iterations <= ra.iterations);
        assert_eq!(tp_run_trial(a, 0, 0.02, 5, &mut ra), TpStatus::InvalidParameter);
        tp_instance_free(a);
        tp_instance_free(b);
    }
}

#[test]
fn chain_handle_matches_closed_forms() {
    let params = TpDtmcParams {
        num_players: 3,
        num_channels: 4,
        num_power_levels: 6,
        satisfying_levels: 4,
        epsilon: 0.02,
        delta_u: 0.0,
    };
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(tp_dtmc_new(&params, TpTarget::Nash, &mut d), TpStatus::Ok);
        let n = tp_dtmc_num_states(d);
        assert_eq!(n, 5);
        let mut m = vec![0.0; n * n];
        assert_eq!(tp_dtmc_transition_matrix(d, m.as_mut_ptr(), m.len()), TpStatus::Ok);
        for row in m.chunks(n) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(tp_dtmc_transition_matrix(d, m.as_mut_ptr(), 3), TpStatus::InvalidParameter);

        let (mut t, mut lo, mut hi) = (0.0, 0.0, 0.0);
        assert_eq!(tp_dtmc_first_passage(d, &mut t), TpStatus::Ok);
        assert_eq!(tp_dtmc_bounds(&params, TpTarget::Nash, &mut lo, &mut hi), TpStatus::Ok);
        assert!(lo <= t && t <= hi, "{lo} {t} {hi}");
        let mut occ = 0.0;
        assert_eq!(tp_dtmc_occupancy(&params, TpTarget::Satisfaction, &mut occ), TpStatus::Ok);
        assert!(occ > 0.0 && occ < 1.0);
        tp_dtmc_free(d);

        let mut bad = params;
        bad.num_channels = 3;
        assert_eq!(tp_dtmc_new(&bad, TpTarget::Nash, &mut d), TpStatus::InvalidParameter);
    }
}

#[test]
fn header_is_generated_and_parses_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/tepower.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["tp_instance_new_simplified", "tp_dtmc_occupancy", "typedef struct TpInstance TpInstance", "TP_STATUS_OK"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler available, skipping syntax check");
        return;
    };
    assert!(status.success());
}
