use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use ivauctions_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(iva_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    iva_string_free(s);
    out
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(iva_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn load_eval_and_free() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            iva_scenario_load(fixture("wallet.json").as_ptr(), &mut h),
            IvaStatus::Ok
        );
        let (mut n, mut m) = (0, 0);
        assert_eq!(iva_scenario_shape(h, &mut n, &mut m), IvaStatus::Ok);
        assert_eq!((n, m), (3, 1));
        let s = [0.25, 0.5, 1.0];
        let mut v = 0.0;
        assert_eq!(
            iva_eval(h, 1, 0, s.as_ptr(), s.len(), &mut v),
            IvaStatus::Ok
        );
        assert_eq!(v, 1.75);
        assert_eq!(
            iva_eval(h, 5, 0, s.as_ptr(), s.len(), &mut v),
            IvaStatus::InvalidArgument
        );
        let wide = [0.25, 0.5, 2.0];
        assert_eq!(
            iva_eval(h, 0, 0, wide.as_ptr(), 3, &mut v),
            IvaStatus::Domain
        );
        assert!(!last_error().is_empty());
        assert_eq!(iva_eval(h, 0, 0, s.as_ptr(), 2, &mut v), IvaStatus::Domain);
        iva_scenario_free(h);
        iva_scenario_free(ptr::null_mut());
    }
}

#[test]
fn schema_errors_carry_pointers() {
    let json = CString::new(
        r#"{"schema_version": 1, "model": {"family": "wallet_game", "n": 3}, "bids": [1, 2]}"#,
    )
    .unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { iva_scenario_from_json(json.as_ptr(), &mut h) };
    assert_eq!(st, IvaStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("/bids"), "{}", last_error());
}

#[test]
fn canonical_json_and_hash() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            iva_scenario_load(fixture("lower_bound_case2.json").as_ptr(), &mut h),
            IvaStatus::Ok
        );
        let mut s = ptr::null_mut();
        assert_eq!(iva_scenario_canonical_json(h, &mut s), IvaStatus::Ok);
        let canon = take(s);
        let file =
            std::fs::read_to_string(fixture("lower_bound_case2.json").to_str().unwrap()).unwrap();
        assert_eq!(canon, file);
        assert_eq!(iva_scenario_hash(h, &mut s), IvaStatus::Ok);
        assert_eq!(take(s).len(), 64);
        iva_scenario_free(h);
    }
}

#[test]
fn welfare_report_through_handle() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            iva_scenario_load(fixture("lower_bound_case2.json").as_ptr(), &mut h),
            IvaStatus::Ok
        );
        let cmd = CString::new("welfare").unwrap();
        let mut out = ptr::null_mut();
        let mut pass = -1;
        assert_eq!(
            iva_run(h, cmd.as_ptr(), ptr::null(), &mut out, &mut pass),
            IvaStatus::Ok
        );
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(pass, 1);
        let r = v["result"]["ratio"].as_f64().unwrap();
        assert!((r - 2.9997).abs() < 1e-3, "{r}");
        let bad = CString::new("dance").unwrap();
        assert_eq!(
            iva_run(h, bad.as_ptr(), ptr::null(), &mut out, &mut pass),
            IvaStatus::Config
        );
        iva_scenario_free(h);
    }
}

#[test]
fn no_pne_verdict_is_a_failed_report_not_an_error() {
    unsafe {
        let json =
            CString::new(std::fs::read_to_string(fixture("sine.json").to_str().unwrap()).unwrap())
                .unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(iva_scenario_from_json(json.as_ptr(), &mut h), IvaStatus::Ok);
        let cmd = CString::new("equilibrium").unwrap();
        let mode = CString::new("pne").unwrap();
        let mut out = ptr::null_mut();
        let mut pass = -1;
        assert_eq!(
            iva_run(h, cmd.as_ptr(), mode.as_ptr(), &mut out, &mut pass),
            IvaStatus::Ok
        );
        assert_eq!(pass, 0);
        assert!(take(out).contains("no eps-PNE on grid"));
        iva_scenario_free(h);
    }
}

#[test]
fn reproduce_by_name() {
    unsafe {
        let name = CString::new("single_lb_case1").unwrap();
        let params = CString::new(r#"{"beta": 10000, "sweep": false}"#).unwrap();
        let mut out = ptr::null_mut();
        let mut pass = -1;
        assert_eq!(
            iva_reproduce(name.as_ptr(), params.as_ptr(), &mut out, &mut pass),
            IvaStatus::Ok
        );
        assert_eq!(pass, 1);
        assert!(take(out).contains("\"single_lb_case1\""));
        let unknown = CString::new("nope").unwrap();
        assert_eq!(
            iva_reproduce(unknown.as_ptr(), ptr::null(), &mut out, &mut pass),
            IvaStatus::UnknownExperiment
        );
        let junk = CString::new("[1]").unwrap();
        assert_eq!(
            iva_reproduce(name.as_ptr(), junk.as_ptr(), &mut out, &mut pass),
            IvaStatus::Config
        );
        assert_eq!(
            iva_reproduce(ptr::null(), ptr::null(), &mut out, &mut pass),
            IvaStatus::InvalidArgument
        );
    }
}

#[test]
fn header_declares_every_export() {
    let h =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ivauctions.h"))
            .unwrap();
    for f in [
        "iva_version",
        "iva_last_error",
        "iva_string_free",
        "iva_scenario_from_json",
        "iva_scenario_load",
        "iva_scenario_free",
        "iva_scenario_shape",
        "iva_scenario_canonical_json",
        "iva_scenario_hash",
        "iva_eval",
        "iva_run",
        "iva_reproduce",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct IvaScenario IvaScenario;"));
}
