//! Golden-file tests for every subcommand. Set `UPDATE_GOLDEN=1` to rewrite the files.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn data(name: &str) -> String {
    root().join("data").join(name).display().to_string()
}

fn gpi(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gpi"))
        .args(args)
        .env_remove("GPI_SEED")
        .env_remove("GPI_WORKERS")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn json(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"));
    if let Some(o) = v.as_object_mut() {
        o.remove("runtime_ms");
    }
    v
}

/// Data paths differ between checkouts; golden files store them relative to tests/.
fn normalize(text: &str) -> String {
    text.replace(&format!("{}/", root().display()), "")
}

fn golden(name: &str, args: &[&str], expected_code: i32) -> Value {
    let (code, stdout) = gpi(args);
    assert_eq!(code, expected_code, "{name}: {stdout}");
    let actual = json(&normalize(&stdout));
    let path = root().join("golden").join(format!("{name}.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&actual).unwrap() + "\n").unwrap();
    }
    let expected = json(&std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display())));
    assert_eq!(actual, expected, "{name} drifted from {}", path.display());
    actual
}

#[test]
fn moment_gamma_on_identity() {
    let v = golden("moment_gamma_eye3", &["moment", "gamma", "--alpha", "1/2", "--sigma", &data("eye3.json"), "--n", "1,1,1"], 0);
    assert_eq!(v["moment"], "1/8");
}

#[test]
fn moment_gaussian_with_matchings() {
    let v = golden(
        "moment_gaussian",
        &["moment", "gaussian", "--sigma", &data("cex.json"), "--n", "2,2,2", "--matchings"],
        0,
    );
    assert_eq!(v["matchings_agree"], true);
    assert_eq!(v["pairing_count"], "15");
}

#[test]
fn moment_gaussian_float_backend() {
    golden("moment_gaussian_float", &["moment", "gaussian", "--sigma", "[[2,1],[1,2]]", "--n", "4,2", "--backend", "float"], 0);
}

#[test]
fn moment_gamma_sum() {
    let eye = data("eye3.json");
    let v = golden(
        "moment_gamma_sum",
        &["moment", "gamma-sum", "--alpha", "1/2", "--sigma", &eye, "--alpha", "1", "--sigma", &eye, "--n", "1,1,1"],
        0,
    );
    // Shapes add on a common Σ: Gamma(3/2, I), mean 3/2 per coordinate.
    assert_eq!(v["moment"], "27/8");
}

#[test]
fn gap_reproduces_counterexample() {
    let v = golden(
        "gap_counterexample",
        &["gap", "--dist", "gaussian", "--sigma", &data("cex.json"), "--n", "2,2,2", "--partition", "1,2"],
        0,
    );
    assert_eq!(v["gap"], "-16/125");
    assert_eq!(v["certified_nonnegative"], false);
}

#[test]
fn gap_weak_forms() {
    golden("gap_weak_gaussian", &["gap", "--dist", "gaussian", "--sigma", &data("cex.json"), "--n", "2,2,2", "--weak"], 0);
    golden(
        "gap_weak_gamma",
        &["gap", "--dist", "gamma", "--alpha", "3/2", "--sigma", &data("cex.json"), "--n", "1,2,1", "--weak"],
        0,
    );
}

#[test]
fn certify_passes_and_fails() {
    let v = golden(
        "certify_gamma_balanced",
        &["gap", "--dist", "gamma", "--alpha", "1", "--sigma", "[[1,\"-1/2\"],[\"-1/2\",1]]", "--certify", "--max-total", "5"],
        0,
    );
    assert_eq!(v["certified"], true);
    assert_eq!(v["hypothesis"]["sign_matrix"], serde_json::json!([1, -1]));
    let v = golden(
        "certify_gaussian_counterexample",
        &["gap", "--dist", "gaussian", "--sigma", &data("cex.json"), "--certify", "--max-total", "6"],
        3,
    );
    assert_eq!(v["hypothesis"]["sign_balanced"], false);
    assert!(!v["negative"].as_array().unwrap().is_empty());
}

#[test]
fn check_structure_modes() {
    let v = golden("check_sign_eye3", &["check", "structure", "--mode", "sign", "--sigma", &data("eye3.json")], 0);
    assert_eq!(v["feasible"], true);
    assert_eq!(v["sign_matrix"], serde_json::json!([1, 1, 1]));
    let v = golden("check_mtp2_cex", &["check", "structure", "--mode", "mtp2", "--sigma", &data("cex.json")], 0);
    assert_eq!(v["feasible"], false);
    golden("check_mtp2_require", &["check", "structure", "--mode", "mtp2", "--sigma", &data("cex.json"), "--require"], 3);
    let v = golden(
        "check_ell",
        &["check", "structure", "--mode", "ell", "--input", "[[1,\"3/10\",\"-2/5\"],[\"3/10\",1,\"-12/25\"],[\"-2/5\",\"-12/25\",1]]"],
        0,
    );
    assert_eq!(v["a_exact"], serde_json::json!(["1/2", "3/5", "-4/5"]));
}

#[test]
fn check_psd_reports_witness() {
    let v = golden("check_psd_indefinite", &["check", "psd", "--sigma", "[[1,2],[2,1]]"], 0);
    assert_eq!(v["psd"], false);
    golden("check_psd_cex", &["check", "psd", "--sigma", &data("cex.json")], 0);
    let near = "[[1,1],[1,0.9999999]]";
    let v = golden("check_psd_float_tol", &["check", "psd", "--sigma", near, "--backend", "float", "--tol", "1e-6"], 0);
    assert_eq!(v["psd"], true);
    let (_, strict) = gpi(&["check", "psd", "--sigma", near, "--backend", "float"]);
    assert_eq!(json(&strict)["psd"], false);
}

#[test]
fn mc_subcommands() {
    let s = "[[1,0.5],[0.5,1]]";
    golden("mc_orthant", &["mc", "orthant", "--sigma", s, "--t", "1,1", "--N", "20000", "--seed", "3"], 0);
    golden(
        "mc_orthant_gamma",
        &["mc", "orthant", "--sigma", s, "--t", "0.5,0.5", "--sampler", "gamma", "--alpha", "3/2", "--N", "20000", "--seed", "3"],
        0,
    );
    golden("mc_survival", &["mc", "survival", "--sigma", s, "--n", "1,1", "--N", "20000", "--seed", "4"], 0);
    golden(
        "mc_neg_gpi",
        &["mc", "neg-gpi", "--sigma", s, "--n", "0.5,0.5", "--partition", "1", "--N", "20000", "--seed", "5"],
        0,
    );
    golden("mc_puod", &["mc", "puod", "--sigma", &data("eye3.json"), "--grid", "2", "--N", "20000", "--seed", "6"], 0);
    golden("mc_spuod", &["mc", "spuod", "--sigma", s, "--grid", "0.25,0.75", "--N", "20000", "--seed", "7", "--antithetic"], 0);
    golden(
        "mc_corr_ineq",
        &["mc", "corr-ineq", "--sigma", &data("eye3.json"), "--grid", "2", "--partition", "1", "--N", "20000", "--seed", "8"],
        0,
    );
}

#[test]
fn scan_outputs() {
    let v = golden(
        "scan_counterexample",
        &["scan", "--family", "counterexample", "--rho", "3/10:2/5:2", "--sigma12", "-3/4:-3/5:2", "--n", "2,2,2", "--partition", "1,2"],
        0,
    );
    assert_eq!(v["formula_mismatches"], 0);
    assert_eq!(v["skipped_infeasible"], 1);
    let (code, csv) = gpi(&["scan", "--family", "counterexample", "--rho", "2/5", "--sigma12", "-3/5", "--n", "2,2,2", "--partition", "1,2", "--format", "csv"]);
    assert_eq!(code, 0);
    let expected = std::fs::read_to_string(root().join("golden/scan_counterexample.csv")).unwrap();
    assert_eq!(csv, expected);
}

#[test]
fn scan_regression_signed_nonneg_gamma() {
    for alpha in ["1/2", "1"] {
        let (code, out) = gpi(&[
            "scan", "--family", "random-signed-nonneg", "--count", "500", "--dist", "gamma", "--alpha", alpha,
            "--max-total", "6", "--seed", "17",
        ]);
        assert_eq!(code, 0);
        let v = json(&out);
        assert_eq!(v["evaluated"], 500, "{alpha}");
        assert_eq!(v["violations"].as_array().unwrap().len(), 0, "{alpha}");
    }
}

#[test]
fn usage_errors_exit_2_with_location() {
    let v = golden("error_unknown_flag", &["moment", "gaussian", "--sigma", "[[1]]", "--n", "2", "--colour", "red"], 2);
    assert_eq!(v["error"]["location"], "--colour");
    let v = golden("error_malformed_json", &["check", "psd", "--sigma", "[[1,2],[2"], 2);
    assert_eq!(v["error"]["location"], "--sigma");
    let v = golden("error_dimension_mismatch", &["gap", "--dist", "gaussian", "--sigma", &data("eye3.json"), "--n", "2,2", "--weak"], 2);
    assert_eq!(v["error"]["location"], "--n");
    assert_eq!(v["error"]["kind"], "structural");
    let v = golden("error_not_psd", &["moment", "gaussian", "--sigma", "[[1,2],[2,1]]", "--n", "2,2"], 2);
    assert_eq!(v["error"]["kind"], "not_psd");
    let v = golden("error_non_integer_exponent", &["moment", "gamma", "--alpha", "1", "--sigma", "[[1]]", "--n", "0.5"], 2);
    assert_eq!(v["error"]["kind"], "unsupported");
}

#[test]
fn config_file_and_environment() {
    let conf = data("small.conf");
    let v = golden("mc_orthant_config", &["--config", &conf, "mc", "orthant", "--sigma", "[[1]]", "--t", "1"], 0);
    assert_eq!(v["estimate"]["n_samples"], 20000);
    assert_eq!(v["estimate"]["seed"], 5);
    assert_eq!(v["estimate"]["ci_level"], 0.9);

    let out = Command::new(env!("CARGO_BIN_EXE_gpi"))
        .args(["--config", &conf, "mc", "orthant", "--sigma", "[[1]]", "--t", "1"])
        .env("GPI_SEED", "11")
        .env("GPI_WORKERS", "1")
        .output()
        .unwrap();
    let env_v = json(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(env_v["estimate"]["seed"], 11);

    let (_, flag_out) = gpi(&["--config", &conf, "mc", "orthant", "--sigma", "[[1]]", "--t", "1", "--seed", "11", "--workers", "3"]);
    // Worker count never changes the estimate.
    assert_eq!(json(&flag_out), env_v);

    let v = golden("error_bad_config", &["--config", &data("bad.conf"), "mc", "orthant", "--sigma", "[[1]]", "--t", "1"], 2);
    assert!(v["error"]["location"].as_str().unwrap().ends_with("bad.conf:2"));
}
