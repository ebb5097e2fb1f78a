//! C ABI over the embedding library: opaque handles, integer status
//! codes, and a thread-local last-error message. The generated header
//! lands in include/expand_embed.h at build time.
//!
//! Conventions: constructors return NULL on failure; functions returning
//! `int32_t` use 0 for success, 1 for "checked but violations found", and
//! negative values for errors. After any failure,
//! `ee_last_error_message` retrieves a description.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use expand_embed::constructor::{build_sard_witness, schedule_from_f64, BoxFamily};
use expand_embed::index_tree::DistanceModel;
use expand_embed::modulus::{ModulusSpec, Verdict};
use expand_embed::verifier::{verify_embedding, verify_modulus, Mode};

pub const EE_OK: i32 = 0;
pub const EE_VIOLATIONS: i32 = 1;
pub const EE_ERR_NULL: i32 = -1;
pub const EE_ERR_INVALID: i32 = -2;
pub const EE_ERR_DOMAIN: i32 = -3;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into()).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length in bytes, or 0 if no error is
/// pending.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL with `len` 0.
#[no_mangle]
pub unsafe extern "C" fn ee_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let guard = e.borrow();
        let Some(msg) = guard.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // always terminate
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Opaque modulus handle.
pub struct EeModulus {
    spec: ModulusSpec,
}

/// Opaque handle for a constructed box family and its distance model.
pub struct EeFamily {
    family: BoxFamily,
    model: DistanceModel,
    spec: Option<ModulusSpec>,
    depth: usize,
}

/// omega(r) = r^p in dimension d.
#[no_mangle]
pub extern "C" fn ee_modulus_power(p: f64, d: u32) -> *mut EeModulus {
    clear_error();
    let spec = ModulusSpec::power(p, d);
    match spec.validate() {
        Ok(()) => Box::into_raw(Box::new(EeModulus { spec })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// omega(r) = r^p (log e/r)^a in dimension d.
#[no_mangle]
pub extern "C" fn ee_modulus_power_log(p: f64, a: f64, d: u32) -> *mut EeModulus {
    clear_error();
    let spec = ModulusSpec::power_log(p, a, d);
    match spec.validate() {
        Ok(()) => Box::into_raw(Box::new(EeModulus { spec })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Modulus from CSV text with an `r,omega` header.
///
/// # Safety
/// `csv` must be a valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ee_modulus_table(csv: *const c_char, d: u32) -> *mut EeModulus {
    clear_error();
    if csv.is_null() {
        set_error("csv is NULL");
        return ptr::null_mut();
    }
    let text = match CStr::from_ptr(csv).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("csv is not UTF-8");
            return ptr::null_mut();
        }
    };
    match ModulusSpec::table_from_csv(text, d) {
        Ok(spec) => Box::into_raw(Box::new(EeModulus { spec })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `m` must come from an ee_modulus_* constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ee_modulus_free(m: *mut EeModulus) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Series verdict: writes 0 (convergent), 1 (divergent), or 2
/// (undecided) to `out_verdict`.
///
/// # Safety
/// `m` must be a live modulus handle; `out_verdict` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ee_classify(
    m: *const EeModulus,
    n_terms: usize,
    out_verdict: *mut i32,
) -> i32 {
    clear_error();
    if m.is_null() || out_verdict.is_null() {
        set_error("NULL argument");
        return EE_ERR_NULL;
    }
    match (*m).spec.classify(n_terms) {
        Ok(cls) => {
            *out_verdict = match cls.verdict {
                Verdict::Convergent => 0,
                Verdict::Divergent => 1,
                Verdict::Unknown => 2,
            };
            EE_OK
        }
        Err(e) => {
            set_error(e.to_string());
            EE_ERR_DOMAIN
        }
    }
}

/// Critical scales: fills `out_r` and `out_r_star` (each `depth` doubles)
/// with the solutions of omega(r_n) = 2^-(n+1) and omega(r*_n) =
/// 2^-(n-1), n = 1..depth.
///
/// # Safety
/// Output arrays must hold at least `depth` doubles each.
#[no_mangle]
pub unsafe extern "C" fn ee_critical_sequence(
    m: *const EeModulus,
    depth: usize,
    out_r: *mut f64,
    out_r_star: *mut f64,
) -> i32 {
    clear_error();
    if m.is_null() || out_r.is_null() || out_r_star.is_null() {
        set_error("NULL argument");
        return EE_ERR_NULL;
    }
    match (*m).spec.critical_sequence(depth) {
        Ok(cs) => {
            ptr::copy_nonoverlapping(cs.r.as_ptr(), out_r, depth);
            ptr::copy_nonoverlapping(cs.r_star.as_ptr(), out_r_star, depth);
            EE_OK
        }
        Err(e) => {
            set_error(e.to_string());
            EE_ERR_DOMAIN
        }
    }
}

/// Builds the depth-`depth` box family from the modulus's upper critical
/// scales in dimension `d`.
///
/// # Safety
/// `m` must be a live modulus handle.
#[no_mangle]
pub unsafe extern "C" fn ee_family_build(
    m: *const EeModulus,
    d: usize,
    depth: usize,
) -> *mut EeFamily {
    clear_error();
    if m.is_null() {
        set_error("NULL modulus");
        return ptr::null_mut();
    }
    let spec = (*m).spec.clone();
    let result = (|| {
        let cs = spec.critical_sequence(depth)?;
        let schedule = schedule_from_f64(&cs.r_star, d, depth)?;
        let family = BoxFamily::build(schedule, depth)?;
        let model = DistanceModel::sard(spec.clone(), depth)?;
        Ok::<_, expand_embed::Error>(EeFamily { family, model, spec: Some(spec), depth })
    })();
    match result {
        Ok(f) => Box::into_raw(Box::new(f)),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Builds a family from an explicit positive nonincreasing gap sequence
/// of length `depth`, to be verified against the required
/// first-difference separation scales in `targets` (also `depth`
/// doubles; pass the same array as `gaps` for a self-consistency check).
///
/// # Safety
/// `gaps` and `targets` must each point to `depth` doubles.
#[no_mangle]
pub unsafe extern "C" fn ee_family_build_gaps(
    gaps: *const f64,
    targets: *const f64,
    d: usize,
    depth: usize,
) -> *mut EeFamily {
    clear_error();
    if gaps.is_null() || targets.is_null() {
        set_error("NULL gaps or targets");
        return ptr::null_mut();
    }
    let v = std::slice::from_raw_parts(gaps, depth).to_vec();
    let r = std::slice::from_raw_parts(targets, depth).to_vec();
    let result = (|| {
        let schedule = schedule_from_f64(&v, d, depth)?;
        let family = BoxFamily::build(schedule, depth)?;
        let model = DistanceModel::cantor(r)?;
        Ok::<_, expand_embed::Error>(EeFamily { family, model, spec: None, depth })
    })();
    match result {
        Ok(f) => Box::into_raw(Box::new(f)),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `f` must come from an ee_family_build* constructor and not be freed
/// twice.
#[no_mangle]
pub unsafe extern "C" fn ee_family_free(f: *mut EeFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

fn mode_from(mode: i32) -> Option<Mode> {
    match mode {
        0 => Some(Mode::Exhaustive),
        1 => Some(Mode::Structural),
        _ => None,
    }
}

/// Verifies the non-contraction inequality. `mode` is 0 for exhaustive,
/// 1 for structural. Writes the number of violations and returns EE_OK or
/// EE_VIOLATIONS.
///
/// # Safety
/// `f` must be a live family handle; `out_violations` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn ee_verify_embedding(
    f: *const EeFamily,
    mode: i32,
    out_violations: *mut u64,
) -> i32 {
    clear_error();
    if f.is_null() {
        set_error("NULL family");
        return EE_ERR_NULL;
    }
    let Some(mode) = mode_from(mode) else {
        set_error("mode must be 0 (exhaustive) or 1 (structural)");
        return EE_ERR_INVALID;
    };
    let fam = &*f;
    match verify_embedding(&fam.family, &fam.model, fam.depth, mode) {
        Ok(rep) => {
            if !out_violations.is_null() {
                *out_violations = rep.violations.len() as u64;
            }
            if rep.passed() {
                EE_OK
            } else {
                EE_VIOLATIONS
            }
        }
        Err(e) => {
            set_error(e.to_string());
            EE_ERR_DOMAIN
        }
    }
}

/// Verifies the pointwise witness against its modulus (families built by
/// ee_family_build only).
///
/// # Safety
/// Same contract as `ee_verify_embedding`.
#[no_mangle]
pub unsafe extern "C" fn ee_verify_witness(
    f: *const EeFamily,
    mode: i32,
    out_violations: *mut u64,
) -> i32 {
    clear_error();
    if f.is_null() {
        set_error("NULL family");
        return EE_ERR_NULL;
    }
    let Some(mode) = mode_from(mode) else {
        set_error("mode must be 0 (exhaustive) or 1 (structural)");
        return EE_ERR_INVALID;
    };
    let fam = &*f;
    let Some(spec) = fam.spec.as_ref() else {
        set_error("family has no modulus; build it with ee_family_build");
        return EE_ERR_INVALID;
    };
    let result = build_sard_witness(&fam.family.schedule, fam.depth)
        .and_then(|w| verify_modulus(&w, spec, mode));
    match result {
        Ok(rep) => {
            if !out_violations.is_null() {
                *out_violations = rep.violations.len() as u64;
            }
            if rep.passed() {
                EE_OK
            } else {
                EE_VIOLATIONS
            }
        }
        Err(e) => {
            set_error(e.to_string());
            EE_ERR_DOMAIN
        }
    }
}

/// Full verification report as a JSON string; free with ee_string_free.
///
/// # Safety
/// `f` must be a live family handle.
#[no_mangle]
pub unsafe extern "C" fn ee_verify_report_json(f: *const EeFamily, mode: i32) -> *mut c_char {
    clear_error();
    if f.is_null() {
        set_error("NULL family");
        return ptr::null_mut();
    }
    let Some(mode) = mode_from(mode) else {
        set_error("mode must be 0 (exhaustive) or 1 (structural)");
        return ptr::null_mut();
    };
    let fam = &*f;
    match verify_embedding(&fam.family, &fam.model, fam.depth, mode)
        .map_err(|e| e.to_string())
        .and_then(|rep| serde_json::to_string(&rep).map_err(|e| e.to_string()))
    {
        Ok(json) => match CString::new(json) {
            Ok(c) => c.into_raw(),
            Err(_) => {
                set_error("report contains NUL");
                ptr::null_mut()
            }
        },
        Err(e) => {
            set_error(e);
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ee_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_pipeline_round_trip() {
        let m = ee_modulus_power(1.5, 2);
        assert!(!m.is_null());
        unsafe {
            let mut verdict = -1;
            assert_eq!(ee_classify(m, 12, &mut verdict), EE_OK);
            assert_eq!(verdict, 0, "power 1.5 in d=2 converges");

            let mut r = vec![0.0; 6];
            let mut rs = vec![0.0; 6];
            assert_eq!(ee_critical_sequence(m, 6, r.as_mut_ptr(), rs.as_mut_ptr()), EE_OK);
            assert!((r[0] - 0.25f64.powf(1.0 / 1.5)).abs() < 1e-12);

            let f = ee_family_build(m, 2, 6);
            assert!(!f.is_null());
            let mut v = u64::MAX;
            assert_eq!(ee_verify_embedding(f, 0, &mut v), EE_OK);
            assert_eq!(v, 0);
            assert_eq!(ee_verify_witness(f, 0, &mut v), EE_OK);
            assert_eq!(v, 0);

            let s = ee_verify_report_json(f, 1);
            assert!(!s.is_null());
            let text = CStr::from_ptr(s).to_str().unwrap().to_string();
            assert!(text.contains("\"violations\":[]"), "{text}");
            ee_string_free(s);

            ee_family_free(f);
            ee_modulus_free(m);
        }
    }

    #[test]
    fn gap_family_detects_bad_gaps() {
        unsafe {
            // healthy geometric gaps pass
            let gaps = [0.25, 0.0625, 0.015625, 0.00390625];
            let f = ee_family_build_gaps(gaps.as_ptr(), gaps.as_ptr(), 2, 4);
            assert!(!f.is_null());
            let mut v = 0u64;
            assert_eq!(ee_verify_embedding(f, 0, &mut v), EE_OK);
            ee_family_free(f);

            // halving one gap produces violations against the same targets
            let bad = [0.25, 0.03125, 0.015625, 0.00390625];
            let f = ee_family_build_gaps(bad.as_ptr(), gaps.as_ptr(), 2, 4);
            assert!(!f.is_null());
            assert_eq!(ee_verify_embedding(f, 0, &mut v), EE_VIOLATIONS);
            assert!(v > 0);
            ee_family_free(f);
        }
    }

    #[test]
    fn errors_are_reported() {
        let m = ee_modulus_power(-1.0, 2);
        assert!(m.is_null());
        let mut buf = vec![0i8; 256];
        let n = unsafe { ee_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len()) };
        assert!(n > 0);
        unsafe {
            assert_eq!(ee_classify(ptr::null(), 12, ptr::null_mut()), EE_ERR_NULL);
        }
    }
}
