//! C ABI for the planning toolkit: opaque handles, integer status codes and
//! a thread-local last-error message.

// C-style names are the interface contract here
#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::time::Duration;

use htnplan::ground::{ground, GroundOptions};
use htnplan::parser::{parse_domain, parse_problem};
use htnplan::planner::{solve_ishop, Limits, Outcome};
use htnplan::state::GroundProblem;
use htnplan::validate::validate_plan;
use htnplan::Problem;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Copy, Clone, PartialEq, Eq)]
pub enum htn_status {
    HTN_OK = 0,
    HTN_ERR_ARGUMENT = 1,
    HTN_ERR_PARSE = 2,
    HTN_ERR_GROUND = 3,
    HTN_UNSOLVABLE = 4,
    HTN_TIMEOUT = 5,
    HTN_INVALID_PLAN = 6,
}

use htn_status::*;

/// Parsed problem handle (opaque).
pub struct htn_problem {
    inner: Problem,
}

/// Instantiated problem handle (opaque).
pub struct htn_ground_problem {
    inner: GroundProblem,
}

/// Solved plan handle (opaque).
pub struct htn_plan {
    steps: Vec<usize>,
    rendered: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<Vec<u8>>) {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

/// Returns the message of the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn htn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn text<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Parses a domain and a problem. On success stores a new handle in `out`;
/// the caller owns it and must release it with `htn_problem_free`.
///
/// # Safety
/// `domain_text` and `problem_text` must be NUL-terminated UTF-8; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn htn_problem_parse(
    domain_text: *const c_char,
    problem_text: *const c_char,
    out: *mut *mut htn_problem,
) -> htn_status {
    let (Some(domain_text), Some(problem_text)) = (text(domain_text), text(problem_text)) else {
        set_error("null or non-UTF-8 input text");
        return HTN_ERR_ARGUMENT;
    };
    if out.is_null() {
        set_error("null output handle");
        return HTN_ERR_ARGUMENT;
    }
    let domain = match parse_domain(domain_text) {
        Ok(d) => d,
        Err(e) => {
            set_error(e.to_string());
            return HTN_ERR_PARSE;
        }
    };
    match parse_problem(problem_text, &domain) {
        Ok(problem) => {
            *out = Box::into_raw(Box::new(htn_problem { inner: problem }));
            HTN_OK
        }
        Err(e) => {
            set_error(e.to_string());
            HTN_ERR_PARSE
        }
    }
}

/// # Safety
/// `problem` must come from `htn_problem_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn htn_problem_free(problem: *mut htn_problem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Instantiates and simplifies the problem. Pass `simplify` and
/// `method_fixpoint` as 0/1.
///
/// # Safety
/// `problem` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn htn_ground(
    problem: *const htn_problem,
    simplify: i32,
    method_fixpoint: i32,
    out: *mut *mut htn_ground_problem,
) -> htn_status {
    if problem.is_null() || out.is_null() {
        set_error("null handle");
        return HTN_ERR_ARGUMENT;
    }
    let opts = GroundOptions {
        simplify: simplify != 0,
        method_fixpoint: method_fixpoint != 0,
        ..GroundOptions::default()
    };
    match ground(&(*problem).inner, &opts) {
        Ok((gp, _)) => {
            *out = Box::into_raw(Box::new(htn_ground_problem { inner: gp }));
            HTN_OK
        }
        Err(e) => {
            set_error(e.to_string());
            HTN_ERR_GROUND
        }
    }
}

/// # Safety
/// `gp` must come from `htn_ground` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn htn_ground_free(gp: *mut htn_ground_problem) {
    if !gp.is_null() {
        drop(Box::from_raw(gp));
    }
}

/// Number of surviving ground actions.
///
/// # Safety
/// `gp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn htn_ground_action_count(gp: *const htn_ground_problem) -> usize {
    if gp.is_null() {
        return 0;
    }
    let gp: &htn_ground_problem = &*gp;
    gp.inner.actions.len()
}

/// Number of surviving ground methods.
///
/// # Safety
/// `gp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn htn_ground_method_count(gp: *const htn_ground_problem) -> usize {
    if gp.is_null() {
        return 0;
    }
    let gp: &htn_ground_problem = &*gp;
    gp.inner.methods.len()
}

/// Runs the instantiated planner with a timeout in seconds (0 = immediate
/// timeout). On HTN_OK the caller owns the plan handle.
///
/// # Safety
/// `gp` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn htn_solve(
    gp: *const htn_ground_problem,
    timeout_secs: u64,
    out: *mut *mut htn_plan,
) -> htn_status {
    if gp.is_null() || out.is_null() {
        set_error("null handle");
        return HTN_ERR_ARGUMENT;
    }
    let gp = &(*gp).inner;
    let limits = Limits {
        timeout: Some(Duration::from_secs(timeout_secs)),
        ..Limits::default()
    };
    match solve_ishop(gp, &limits).outcome {
        Outcome::Solved { plan, .. } => {
            let rendered = plan
                .steps
                .iter()
                .map(|&i| CString::new(gp.actions[i].to_string()).unwrap_or_default())
                .collect();
            *out = Box::into_raw(Box::new(htn_plan { steps: plan.steps, rendered }));
            HTN_OK
        }
        Outcome::Timeout => {
            set_error("search timed out");
            HTN_TIMEOUT
        }
        Outcome::Unsolvable | Outcome::DepthExceeded => {
            set_error("no plan exists");
            HTN_UNSOLVABLE
        }
    }
}

/// # Safety
/// `plan` must come from `htn_solve` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn htn_plan_free(plan: *mut htn_plan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn htn_plan_length(plan: *const htn_plan) -> usize {
    if plan.is_null() {
        return 0;
    }
    let plan: &htn_plan = &*plan;
    plan.steps.len()
}

/// Textual form `(name arg1 … argk)` of one plan step, or NULL when the
/// index is out of range. The pointer stays valid until the plan is freed.
///
/// # Safety
/// `plan` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn htn_plan_step(plan: *const htn_plan, index: usize) -> *const c_char {
    if plan.is_null() {
        return std::ptr::null();
    }
    let plan: &htn_plan = &*plan;
    match plan.rendered.get(index) {
        Some(s) => s.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Re-checks a plan against the ground problem it was solved from.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn htn_validate(
    gp: *const htn_ground_problem,
    plan: *const htn_plan,
) -> htn_status {
    if gp.is_null() || plan.is_null() {
        set_error("null handle");
        return HTN_ERR_ARGUMENT;
    }
    let gp: &htn_ground_problem = &*gp;
    let plan: &htn_plan = &*plan;
    let steps = htnplan::state::Plan { steps: plan.steps.clone() };
    match validate_plan(&gp.inner, &steps) {
        Ok(()) => HTN_OK,
        Err(v) => {
            set_error(v.to_string());
            HTN_INVALID_PLAN
        }
    }
}
