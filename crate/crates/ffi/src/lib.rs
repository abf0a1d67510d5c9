//! C ABI for the ksforge contextuality toolkit.
//!
//! The surface is deliberately small: opaque scenario handles, JSON strings
//! for structured data, integer status codes for errors. Strings returned
//! by this library are owned by the caller and must be released with
//! [`ksf_string_free`]; scenario handles with [`ksf_scenario_free`].
//!
//! The checked-in header `include/ksforge.h` mirrors these declarations.
//!
//! TODO: generate the header with cbindgen once it is available in the
//! build environment, instead of maintaining it by hand.

use ksforge::catalog;
use ksforge::ontmodel::{simulate_probability, EpistemicState, SimConfig};
use ksforge::rays::{is_product_ray, ProductRay, Ray};
use ksforge::scenario::{
    find_ks_colouring, scenario_from_json, scenario_to_json, RayAssignment, Scenario,
};
use libc::c_char;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInput = 4,
    Uncolourable = 5,
    VerificationFailed = 6,
    InternalError = 7,
}

/// Opaque scenario handle: a hypergraph plus its optional ray assignment.
pub struct KsfScenario {
    scenario: Scenario,
    assignment: Option<RayAssignment>,
}

/// Result of a Monte Carlo run of the hidden-variable model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KsfSimResult {
    pub estimate: f64,
    pub std_error: f64,
    pub born_value: f64,
    pub z_score: f64,
}

fn to_cstring(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

unsafe fn read_cstr<'a>(p: *const c_char) -> Result<&'a str, KsfStatus> {
    if p.is_null() {
        return Err(KsfStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| KsfStatus::InvalidUtf8)
}

fn guard(f: impl FnOnce() -> KsfStatus) -> KsfStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(KsfStatus::InternalError)
}

/// The library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ksf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from a ksforge function and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn ksf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a scenario JSON document into a handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_from_json(
    json: *const c_char,
    out: *mut *mut KsfScenario,
) -> KsfStatus {
    if out.is_null() {
        return KsfStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let text = match read_cstr(json) {
        Ok(t) => t,
        Err(st) => return st,
    };
    guard(|| {
        let value: serde_json::Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(_) => return KsfStatus::ParseError,
        };
        match scenario_from_json(&value) {
            Ok((scenario, assignment)) => {
                unsafe {
                    *out = Box::into_raw(Box::new(KsfScenario { scenario, assignment }));
                }
                KsfStatus::Ok
            }
            Err(_) => KsfStatus::InvalidInput,
        }
    })
}

/// Frees a scenario handle. NULL is ignored.
///
/// # Safety
/// `s` must come from `ksf_scenario_from_json` or `ksf_catalog_build` and
/// not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_free(s: *mut KsfScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_vertex_count(
    s: *const KsfScenario,
    out: *mut usize,
) -> KsfStatus {
    if s.is_null() || out.is_null() {
        return KsfStatus::NullPointer;
    }
    *out = (*s).scenario.vertex_count();
    KsfStatus::Ok
}

/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_hyperedge_count(
    s: *const KsfScenario,
    out: *mut usize,
) -> KsfStatus {
    if s.is_null() || out.is_null() {
        return KsfStatus::NullPointer;
    }
    *out = (*s).scenario.hyperedge_count();
    KsfStatus::Ok
}

/// Serialises the scenario (with rays when present) back to JSON.
///
/// # Safety
/// `s` and `out_json` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_to_json(
    s: *const KsfScenario,
    out_json: *mut *mut c_char,
) -> KsfStatus {
    if s.is_null() || out_json.is_null() {
        return KsfStatus::NullPointer;
    }
    let handle = &*s;
    guard(|| {
        let value = scenario_to_json(&handle.scenario, handle.assignment.as_ref());
        unsafe {
            *out_json = to_cstring(value.to_string());
        }
        KsfStatus::Ok
    })
}

/// Runs the complete KS-colouring search. On success writes the colouring
/// JSON `{"values": {id: 0|1}}`; returns `Uncolourable` (with NULL output)
/// when no colouring exists.
///
/// # Safety
/// `s` and `out_json` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ksf_scenario_find_colouring(
    s: *const KsfScenario,
    out_json: *mut *mut c_char,
) -> KsfStatus {
    if s.is_null() || out_json.is_null() {
        return KsfStatus::NullPointer;
    }
    *out_json = ptr::null_mut();
    let handle = &*s;
    guard(|| match find_ks_colouring(&handle.scenario) {
        Some(c) => {
            unsafe {
                *out_json = to_cstring(c.to_json(&handle.scenario).to_string());
            }
            KsfStatus::Ok
        }
        None => KsfStatus::Uncolourable,
    })
}

/// JSON array of the catalog entry names.
///
/// # Safety
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ksf_catalog_names(out_json: *mut *mut c_char) -> KsfStatus {
    if out_json.is_null() {
        return KsfStatus::NullPointer;
    }
    *out_json = to_cstring(serde_json::json!(catalog::NAMES).to_string());
    KsfStatus::Ok
}

/// Builds a catalog entry into a scenario handle.
///
/// # Safety
/// `name` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ksf_catalog_build(
    name: *const c_char,
    out: *mut *mut KsfScenario,
) -> KsfStatus {
    if out.is_null() {
        return KsfStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let name = match read_cstr(name) {
        Ok(t) => t,
        Err(st) => return st,
    };
    guard(|| match catalog::build(name) {
        Ok(entry) => {
            unsafe {
                *out = Box::into_raw(Box::new(KsfScenario {
                    scenario: entry.scenario,
                    assignment: Some(entry.assignment),
                }));
            }
            KsfStatus::Ok
        }
        Err(_) => KsfStatus::InvalidInput,
    })
}

/// Re-derives every expected property of a catalog entry. Writes the full
/// verification report JSON and returns `VerificationFailed` if any check
/// fails.
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out_json` may be NULL if
/// the report is not wanted.
#[no_mangle]
pub unsafe extern "C" fn ksf_catalog_verify(
    name: *const c_char,
    out_json: *mut *mut c_char,
) -> KsfStatus {
    let name = match read_cstr(name) {
        Ok(t) => t,
        Err(st) => return st,
    };
    guard(|| match catalog::verify(name) {
        Ok(report) => {
            if !out_json.is_null() {
                unsafe {
                    *out_json = to_cstring(
                        serde_json::to_value(&report).expect("serialises").to_string(),
                    );
                }
            }
            if report.pass {
                KsfStatus::Ok
            } else {
                KsfStatus::VerificationFailed
            }
        }
        Err(_) => KsfStatus::InvalidInput,
    })
}

fn parse_product(text: &str) -> Result<ProductRay, KsfStatus> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|_| KsfStatus::ParseError)?;
    if let Ok(p) = serde_json::from_value::<ProductRay>(value.clone()) {
        return Ok(p);
    }
    let ray: Ray = serde_json::from_value(value).map_err(|_| KsfStatus::ParseError)?;
    let n = ray.dim().trailing_zeros() as usize;
    if ray.dim() != 1 << n {
        return Err(KsfStatus::InvalidInput);
    }
    match is_product_ray(&ray, &vec![2; n], 1e-9) {
        Ok(Some(p)) => Ok(p),
        _ => Err(KsfStatus::InvalidInput),
    }
}

/// Monte Carlo estimate of the probability that the hidden-variable model
/// yields outcome `psi` on a system prepared in `chi` (both product-ray
/// JSON), with the exact Born value and the z-score of the deviation.
///
/// # Safety
/// `psi_json` and `chi_json` must be valid NUL-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ksf_simulate_product(
    psi_json: *const c_char,
    chi_json: *const c_char,
    samples: u64,
    seed: u64,
    out: *mut KsfSimResult,
) -> KsfStatus {
    if out.is_null() {
        return KsfStatus::NullPointer;
    }
    let psi_text = match read_cstr(psi_json) {
        Ok(t) => t,
        Err(st) => return st,
    };
    let chi_text = match read_cstr(chi_json) {
        Ok(t) => t,
        Err(st) => return st,
    };
    if samples == 0 {
        return KsfStatus::InvalidInput;
    }
    guard(|| {
        let psi = match parse_product(psi_text) {
            Ok(p) => p,
            Err(st) => return st,
        };
        let chi = match parse_product(chi_text) {
            Ok(p) => p,
            Err(st) => return st,
        };
        let state = EpistemicState::pure(chi);
        let born = match state.born_probability(&psi) {
            Ok(b) => b,
            Err(_) => return KsfStatus::InvalidInput,
        };
        match simulate_probability(&psi, &state, &SimConfig::new(samples, seed)) {
            Ok((estimate, std_error)) => {
                let diff = estimate - born;
                let z = if diff == 0.0 { 0.0 } else { diff / std_error.max(1e-300) };
                unsafe {
                    *out = KsfSimResult { estimate, std_error, born_value: born, z_score: z };
                }
                KsfStatus::Ok
            }
            Err(_) => KsfStatus::InvalidInput,
        }
    })
}
