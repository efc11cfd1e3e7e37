//! C ABI over `tepower`.
//!
//! Instances and chains are opaque heap handles created by `tp_*_new*` and
//! released by the matching `tp_*_free`. Every fallible call returns a
//! [`TpStatus`]; on failure a message is kept per thread and can be read back
//! with [`tp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tepower::dtmc::DtmcModel;
use tepower::{Action, DtmcParams, Error, InstanceParams, NetworkInstance, Oracle, Target, TrialOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InstanceTooLarge = 3,
    ModelMismatch = 4,
    Unreachable = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpTarget {
    Nash = 0,
    Satisfaction = 1,
}

impl From<TpTarget> for Target {
    fn from(t: TpTarget) -> Self {
        match t {
            TpTarget::Nash => Target::Nash,
            TpTarget::Satisfaction => Target::Satisfaction,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpInstanceParams {
    pub num_players: u32,
    pub num_channels: u32,
    pub num_power_levels: u32,
    pub max_power: f64,
    pub noise_power: f64,
    pub sinr_threshold: f64,
    pub beta: f64,
}

impl From<&TpInstanceParams> for InstanceParams {
    fn from(p: &TpInstanceParams) -> Self {
        InstanceParams {
            num_players: p.num_players as usize,
            num_channels: p.num_channels as usize,
            num_power_levels: p.num_power_levels as usize,
            max_power: p.max_power,
            noise_power: p.noise_power,
            sinr_threshold: p.sinr_threshold,
            beta: p.beta,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TpAction {
    pub channel: u32,
    pub power_index: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpDtmcParams {
    pub num_players: u32,
    pub num_channels: u32,
    pub num_power_levels: u32,
    pub satisfying_levels: u32,
    pub epsilon: f64,
    pub delta_u: f64,
}

impl From<&TpDtmcParams> for DtmcParams {
    fn from(p: &TpDtmcParams) -> Self {
        DtmcParams::new(
            p.num_players as usize,
            p.num_channels as usize,
            p.num_power_levels as usize,
            p.satisfying_levels as usize,
            p.epsilon,
        )
        .with_delta_u(p.delta_u)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpGlobalSummary {
    pub max_satisfiable: u32,
    pub num_solutions: u64,
    pub min_total_power: f64,
}

/// First-visit iterations are -1 when the trial never got there.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TpTrialSummary {
    pub iterations: u64,
    pub first_ne_iteration: i64,
    pub first_se_iteration: i64,
    pub ne_iterations: u64,
    pub se_iterations: u64,
}

/// Opaque network instance.
pub struct TpInstance(NetworkInstance);

/// Opaque reduced Markov chain.
pub struct TpDtmc(DtmcModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TpStatus {
    match err {
        Error::InvalidParameter(_) | Error::Domain { .. } | Error::Config(_) => TpStatus::InvalidParameter,
        Error::InstanceTooLarge { .. } => TpStatus::InstanceTooLarge,
        Error::ModelMismatch(_) => TpStatus::ModelMismatch,
        Error::Unreachable(_) => TpStatus::Unreachable,
        Error::Io(_) | Error::Csv(_) => TpStatus::Internal,
    }
}

fn fail(status: TpStatus, msg: impl Into<String>) -> TpStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to a status code.
fn guard(f: impl FnOnce() -> Result<(), TpStatus>) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TpStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(TpStatus::Internal, "panic inside tepower"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TpStatus>;
}

impl<T> OrStatus<T> for tepower::Result<T> {
    fn or_status(self) -> Result<T, TpStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, TpStatus> {
    // SAFETY: caller promises `p` is null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| fail(TpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), TpStatus> {
    if p.is_null() {
        return Err(fail(TpStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and, per the caller, valid for writes.
    unsafe { p.write(value) };
    Ok(())
}

unsafe fn read_profile(inst: &NetworkInstance, actions: *const TpAction, len: usize) -> Result<Vec<Action>, TpStatus> {
    if actions.is_null() {
        return Err(fail(TpStatus::NullPointer, "actions is null"));
    }
    // SAFETY: caller promises `len` readable elements.
    let raw = unsafe { std::slice::from_raw_parts(actions, len) };
    let profile: Vec<Action> = raw.iter().map(|a| Action::new(a.channel as usize, a.power_index as usize)).collect();
    inst.check_profile(&profile).or_status()?;
    Ok(profile)
}

/// Last error message on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn tp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fills `out` with the experiment defaults: P_MAX = 10, noise 1, threshold 3, beta = K + 1.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_instance_params_default(
    num_players: u32,
    num_channels: u32,
    num_power_levels: u32,
    out: *mut TpInstanceParams,
) -> TpStatus {
    guard(|| {
        let p = InstanceParams::with_defaults(num_players as usize, num_channels as usize, num_power_levels as usize);
        let value = TpInstanceParams {
            num_players,
            num_channels,
            num_power_levels,
            max_power: p.max_power,
            noise_power: p.noise_power,
            sinr_threshold: p.sinr_threshold,
            beta: p.beta,
        };
        unsafe { write_out(out, value, "out") }
    })
}

unsafe fn new_instance(
    params: *const TpInstanceParams,
    out: *mut *mut TpInstance,
    build: impl FnOnce(InstanceParams) -> tepower::Result<NetworkInstance>,
) -> TpStatus {
    guard(|| {
        let params = unsafe { deref(params, "params") }?;
        if out.is_null() {
            return Err(fail(TpStatus::NullPointer, "out is null"));
        }
        let inst = build(params.into()).or_status()?;
        unsafe { out.write(Box::into_raw(Box::new(TpInstance(inst)))) };
        Ok(())
    })
}

/// Unit direct gains, 1/2 cross gains on every channel.
///
/// # Safety
/// `params` must be null or point to a valid struct; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_instance_new_simplified(
    params: *const TpInstanceParams,
    out: *mut *mut TpInstance,
) -> TpStatus {
    unsafe { new_instance(params, out, NetworkInstance::simplified) }
}

/// Independent Rayleigh block-fading gains drawn from `seed`.
///
/// # Safety
/// Same as [`tp_instance_new_simplified`].
#[no_mangle]
pub unsafe extern "C" fn tp_instance_new_rayleigh(
    params: *const TpInstanceParams,
    seed: u64,
    out: *mut *mut TpInstance,
) -> TpStatus {
    unsafe { new_instance(params, out, |p| NetworkInstance::rayleigh(p, seed)) }
}

/// # Safety
/// `inst` must be null or a handle from `tp_instance_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_instance_free(inst: *mut TpInstance) {
    if !inst.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Gain from transmitter `tx` to receiver `rx` on `channel`; NaN when out of range.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_instance_gain(inst: *const TpInstance, rx: u32, tx: u32, channel: u32) -> f64 {
    let Some(inst) = (unsafe { inst.as_ref() }) else { return f64::NAN };
    let (rx, tx, b) = (rx as usize, tx as usize, channel as usize);
    if rx >= inst.0.num_players() || tx >= inst.0.num_players() || b >= inst.0.num_channels() {
        return f64::NAN;
    }
    inst.0.gain(rx, tx, b)
}

unsafe fn per_player(
    inst: *const TpInstance,
    actions: *const TpAction,
    len: usize,
    player: u32,
    out: *mut f64,
    eval: fn(&NetworkInstance, &[Action], usize) -> f64,
) -> TpStatus {
    guard(|| {
        let inst = &unsafe { deref(inst, "instance") }?.0;
        let profile = unsafe { read_profile(inst, actions, len) }?;
        let k = player as usize;
        if k >= inst.num_players() {
            return Err(fail(TpStatus::InvalidParameter, format!("player {k} out of range")));
        }
        unsafe { write_out(out, eval(inst, &profile, k), "out") }
    })
}

/// SINR of `player` under the joint profile `actions[0..len]`.
///
/// # Safety
/// `inst` a live handle, `actions` valid for `len` reads, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_instance_sinr(
    inst: *const TpInstance,
    actions: *const TpAction,
    len: usize,
    player: u32,
    out: *mut f64,
) -> TpStatus {
    unsafe { per_player(inst, actions, len, player, out, |i, p, k| i.sinr(p, k)) }
}

/// Utility of `player` under the joint profile, in [0, 1].
///
/// # Safety
/// As for [`tp_instance_sinr`].
#[no_mangle]
pub unsafe extern "C" fn tp_instance_utility(
    inst: *const TpInstance,
    actions: *const TpAction,
    len: usize,
    player: u32,
    out: *mut f64,
) -> TpStatus {
    unsafe { per_player(inst, actions, len, player, out, tepower::utility) }
}

/// Exhaustive global optimum: most satisfiable players, then least total power.
///
/// # Safety
/// `inst` a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_solve_global(inst: *const TpInstance, out: *mut TpGlobalSummary) -> TpStatus {
    guard(|| {
        let inst = &unsafe { deref(inst, "instance") }?.0;
        let g = Oracle::new(inst).solve_global().or_status()?;
        let value = TpGlobalSummary {
            max_satisfiable: g.max_satisfiable as u32,
            num_solutions: g.solutions.len() as u64,
            min_total_power: g.min_total_power,
        };
        unsafe { write_out(out, value, "out") }
    })
}

/// Number of pure Nash equilibria.
///
/// # Safety
/// `inst` a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_count_nash(inst: *const TpInstance, out: *mut u64) -> TpStatus {
    guard(|| {
        let inst = &unsafe { deref(inst, "instance") }?.0;
        let n = Oracle::new(inst).nash().or_status()?.len() as u64;
        unsafe { write_out(out, n, "out") }
    })
}

/// One trial of trial-and-error learning from the all-discontent start.
///
/// # Safety
/// `inst` a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_run_trial(
    inst: *const TpInstance,
    iterations: u64,
    epsilon: f64,
    seed: u64,
    out: *mut TpTrialSummary,
) -> TpStatus {
    guard(|| {
        let inst = &unsafe { deref(inst, "instance") }?.0;
        let options = TrialOptions::new(iterations as usize, epsilon);
        let r = tepower::run_trial(inst, &options, seed).or_status()?;
        let first = |v: Option<usize>| v.map_or(-1, |n| n as i64);
        let value = TpTrialSummary {
            iterations: r.iterations as u64,
            first_ne_iteration: first(r.first_ne_iteration),
            first_se_iteration: first(r.first_se_iteration),
            ne_iterations: r.ne_iterations as u64,
            se_iterations: r.se_iterations as u64,
        };
        unsafe { write_out(out, value, "out") }
    })
}

/// # Safety
/// `params` valid for reads, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_new(params: *const TpDtmcParams, target: TpTarget, out: *mut *mut TpDtmc) -> TpStatus {
    guard(|| {
        let params = unsafe { deref(params, "params") }?;
        if out.is_null() {
            return Err(fail(TpStatus::NullPointer, "out is null"));
        }
        let model = tepower::transition_probs(&params.into(), target.into()).or_status()?;
        unsafe { out.write(Box::into_raw(Box::new(TpDtmc(model)))) };
        Ok(())
    })
}

/// # Safety
/// `dtmc` must be null or a handle from [`tp_dtmc_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_free(dtmc: *mut TpDtmc) {
    if !dtmc.is_null() {
        // SAFETY: handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(dtmc) });
    }
}

/// Number of chain states, `K + 2`; 0 for a null handle.
///
/// # Safety
/// `dtmc` null or live.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_num_states(dtmc: *const TpDtmc) -> usize {
    unsafe { dtmc.as_ref() }.map_or(0, |d| d.0.states.len())
}

/// Row-major copy of the transition matrix into `out[0..n*n]`, `n` from
/// [`tp_dtmc_num_states`]. Order: equilibrium, `C_1..C_K`, discontent.
///
/// # Safety
/// `dtmc` live, `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_transition_matrix(dtmc: *const TpDtmc, out: *mut f64, len: usize) -> TpStatus {
    guard(|| {
        let m = &unsafe { deref(dtmc, "dtmc") }?.0.transition;
        let n = m.nrows();
        if len < n * n {
            return Err(fail(TpStatus::InvalidParameter, format!("buffer holds {len}, need {}", n * n)));
        }
        if out.is_null() {
            return Err(fail(TpStatus::NullPointer, "out is null"));
        }
        // SAFETY: checked length, caller promises validity.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, n * n) };
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Expected iterations to reach the equilibrium from the all-wrong stage.
///
/// # Safety
/// `dtmc` live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_first_passage(dtmc: *const TpDtmc, out: *mut f64) -> TpStatus {
    guard(|| {
        let t = unsafe { deref(dtmc, "dtmc") }?.0.first_passage_time().or_status()?;
        unsafe { write_out(out, t, "out") }
    })
}

/// Closed-form lower and upper bounds on the first-passage time.
///
/// # Safety
/// `params` valid for reads, `lower`/`upper` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_bounds(
    params: *const TpDtmcParams,
    target: TpTarget,
    lower: *mut f64,
    upper: *mut f64,
) -> TpStatus {
    guard(|| {
        let params = unsafe { deref(params, "params") }?;
        let (lo, hi) = tepower::bounds_t(&params.into(), target.into()).or_status()?;
        unsafe { write_out(lower, lo, "lower") }?;
        unsafe { write_out(upper, hi, "upper") }
    })
}

/// Long-run fraction of time at the equilibrium.
///
/// # Safety
/// `params` valid for reads, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tp_dtmc_occupancy(params: *const TpDtmcParams, target: TpTarget, out: *mut f64) -> TpStatus {
    guard(|| {
        let params = unsafe { deref(params, "params") }?;
        let v = tepower::occupancy(&params.into(), target.into()).or_status()?;
        unsafe { write_out(out, v, "out") }
    })
}
