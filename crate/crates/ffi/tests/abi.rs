use fracops_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

unsafe fn last_error() -> String {
    CStr::from_ptr(fracops_last_error())
        .to_string_lossy()
        .into_owned()
}

unsafe fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let s = CStr::from_ptr(ptr).to_string_lossy().into_owned();
    fracops_string_free(ptr);
    s
}

const ZERO_SUITE: &str = r#"{
  "version": "1.0.0",
  "seeds": [1],
  "scenarios": [
    {
      "name": "zero-demo",
      "check": "coifman",
      "operator": { "preset": "fractional-pair", "alpha": 0.25 },
      "grid": { "dim": 1, "box_half": 2.0, "n": 32 },
      "weight": "unit",
      "symbol": "log-abs",
      "order": 0,
      "family": "zero",
      "p": 2.0,
      "phi": { "kind": "linear" }
    }
  ]
}"#;

#[test]
fn version_is_a_valid_string() {
    let v = unsafe { CStr::from_ptr(fracops_version()) };
    assert!(v.to_str().unwrap().starts_with(char::is_numeric));
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut out: *mut FracopsConfig = ptr::null_mut();
        assert_eq!(
            fracops_config_parse(ptr::null(), &mut out),
            FracopsStatus::NullPointer
        );
        let text = CString::new(ZERO_SUITE).unwrap();
        assert_eq!(
            fracops_config_parse(text.as_ptr(), ptr::null_mut()),
            FracopsStatus::NullPointer
        );
        assert_eq!(last_error(), "null pointer argument");
        fracops_config_free(ptr::null_mut());
        fracops_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_inputs_report_parse_diagnostics() {
    unsafe {
        let mut out: *mut FracopsConfig = ptr::null_mut();
        let bad_utf8 = [0x7b_u8, 0xff, 0x00];
        assert_eq!(
            fracops_config_parse(bad_utf8.as_ptr() as *const c_char, &mut out),
            FracopsStatus::InvalidUtf8
        );
        let truncated = CString::new("{ \"version\": \"1.").unwrap();
        assert_eq!(
            fracops_config_parse(truncated.as_ptr(), &mut out),
            FracopsStatus::Config
        );
        assert!(last_error().contains("line"));
        assert!(out.is_null());
    }
}

#[test]
fn default_suite_loads_and_names_scenarios() {
    unsafe {
        let mut cfg: *mut FracopsConfig = ptr::null_mut();
        assert_eq!(fracops_config_default(&mut cfg), FracopsStatus::Ok);
        let mut count = 0usize;
        assert_eq!(
            fracops_config_scenario_count(cfg, &mut count),
            FracopsStatus::Ok
        );
        assert_eq!(count, 6);

        let mut name: *mut c_char = ptr::null_mut();
        assert_eq!(
            fracops_config_scenario_name(cfg, 0, &mut name),
            FracopsStatus::Ok
        );
        assert_eq!(take_string(name), "coifman-fractional");

        let mut oob: *mut c_char = ptr::null_mut();
        assert_eq!(
            fracops_config_scenario_name(cfg, count, &mut oob),
            FracopsStatus::Index
        );
        assert!(last_error().contains("out of range"));
        fracops_config_free(cfg);
    }
}

#[test]
fn scenarios_run_and_return_report_json() {
    unsafe {
        let text = CString::new(ZERO_SUITE).unwrap();
        let mut cfg: *mut FracopsConfig = ptr::null_mut();
        assert_eq!(fracops_config_parse(text.as_ptr(), &mut cfg), FracopsStatus::Ok);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(fracops_run_scenario(cfg, 0, &mut json), FracopsStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(report["scenario"], "zero-demo");
        assert_eq!(report["pass"], serde_json::Value::Bool(true));
        assert_eq!(report["sup_ratio"], 0.0);

        let mut all: *mut c_char = ptr::null_mut();
        assert_eq!(fracops_run_all(cfg, &mut all), FracopsStatus::Ok);
        let reports: serde_json::Value = serde_json::from_str(&take_string(all)).unwrap();
        assert_eq!(reports.as_array().unwrap().len(), 1);

        let mut oob: *mut c_char = ptr::null_mut();
        assert_eq!(fracops_run_scenario(cfg, 5, &mut oob), FracopsStatus::Index);
        fracops_config_free(cfg);
    }
}

#[test]
fn kernel_check_flags_singular_differences() {
    unsafe {
        let mut cfg: *mut FracopsConfig = ptr::null_mut();
        assert_eq!(fracops_config_default(&mut cfg), FracopsStatus::Ok);
        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(fracops_check_kernels(cfg, &mut json), FracopsStatus::Ok);
        let rows: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert!(rows.as_array().unwrap().iter().all(|r| r["pass"] == true));
        fracops_config_free(cfg);

        let violating = ZERO_SUITE.replace(
            r#""operator": { "preset": "fractional-pair", "alpha": 0.25 }"#,
            r#""operator": { "preset": "power-pair", "orders": [0.6, 0.65], "matrix_scalars": [1.0, 1.0] }"#,
        );
        let text = CString::new(violating).unwrap();
        let mut cfg: *mut FracopsConfig = ptr::null_mut();
        assert_eq!(fracops_config_parse(text.as_ptr(), &mut cfg), FracopsStatus::Ok);
        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(
            fracops_check_kernels(cfg, &mut json),
            FracopsStatus::HypothesisViolated
        );
        let rows: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(rows[0]["pass"], serde_json::Value::Bool(false));
        assert_eq!(rows[0]["min_det"], 0.0);
        assert!(last_error().contains("hypothesis (H)"));
        fracops_config_free(cfg);
    }
}
