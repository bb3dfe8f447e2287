use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn selfrepel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfrepel"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .env_remove("SELFREPEL_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a stamped CSV as header → column vectors.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# selfrepel "), "missing stamp in {}", path.display());
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn tensors_single_pair_reports_printed_entries() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(dir.path(), &["--set", "model.L=2", "tensors"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&dir.path().join("chi_summary.json"));
    let unit = 1.0 / (4.0 * PI * 2.0);
    let p = &s["printed_entries"];
    assert!((p["cos4"].as_f64().unwrap() - 3.0 * unit).abs() < 1e-12);
    assert!((p["cos2_sin2"].as_f64().unwrap() - unit).abs() < 1e-12);
    assert_eq!(s["aggregate"]["supported_count"], 6);
    assert!(s["config_hash"].as_str().unwrap().len() == 64);
    let (header, rows) = csv_rows(&dir.path().join("chi_entries.csv"));
    assert_eq!(header[0], "i");
    assert_eq!(rows.len(), 8);
    // 17 significant digits in scientific notation
    let v = &rows[0][col(&header, "chi")];
    assert!(v.contains('e') && v.split('e').next().unwrap().len() == 18, "{v}");
}

#[test]
fn empty_coefficients_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(dir.path(), &["--set", "model.coefficients=[]", "tensors"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.coefficients"));
}

#[test]
fn four_frequencies_audit_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(
        dir.path(),
        &["--set", "model.frequencies=[1,2,3,4]", "--set", "model.coefficients=[1,1,1,1]", "tensors"],
    );
    assert!(out.status.success());
    let a = &json(&dir.path().join("chi_summary.json"))["selection_rule"];
    let (rule, quad, cancel) = (
        a["rule_nonzero"].as_u64().unwrap(),
        a["quadrature_nonzero"].as_u64().unwrap(),
        a["cancellations"].as_u64().unwrap(),
    );
    assert_eq!(a["rule_violations"], 0);
    assert_eq!(rule, quad + cancel);
    // the rule over-counts at n = 4: some admitted products average to zero
    assert!(cancel > 0);
}

#[test]
fn bounds_single_pair() {
    let dir = tempfile::tempdir().unwrap();
    assert!(selfrepel(dir.path(), &["bounds"]).status.success());
    let b = json(&dir.path().join("bounds.json"));
    let r = &b["report"];
    assert!((r["t_rel_lower"].as_f64().unwrap() - (PI / 2.0).sqrt()).abs() < 1e-14);
    assert!((r["c2_sq"].as_f64().unwrap() - 8.0 * PI).abs() < 1e-12);
    assert!(r["per_frequency"]["sigma_star"].as_f64().unwrap() > 0.0);
    // shape / proxy settles slowly: successive steps approach 1 from below at large L
    let trend = b["proxy_trend"].as_array().unwrap();
    let ratios: Vec<f64> = trend.iter().map(|p| p["ratio"].as_f64().unwrap()).collect();
    let steps: Vec<f64> = ratios.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &steps[steps.len() - 3..];
    assert!(tail.windows(2).all(|w| w[1] > w[0]) && tail[2] < 1.0, "{ratios:?}");
    assert_eq!(b["sigma_sweep"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_is_reproducible_and_stationary() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--set",
        "sigma_grid=[1]",
        "--set",
        "integrator.n_trajectories=12000",
        "--set",
        "integrator.n_steps=200",
        "simulate",
    ];
    let out = selfrepel(a.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(selfrepel(b.path(), &args).status.success());
    let sa = std::fs::read(a.path().join("stats.csv")).unwrap();
    assert_eq!(sa, std::fs::read(b.path().join("stats.csv")).unwrap());
    let (header, rows) = csv_rows(&a.path().join("stats.csv"));
    let (q, c, v) = (col(&header, "quantity"), col(&header, "component"), col(&header, "value"));
    let ks: f64 = rows.iter().find(|r| r[q] == "ks_u" && r[c] == "0").unwrap()[v].parse().unwrap();
    assert!(ks < 0.02, "{ks}");
    let judged: f64 = rows.iter().find(|r| r[q] == "distance_judged").unwrap()[v].parse().unwrap();
    assert_eq!(judged, 1.0);
}

#[test]
fn simulate_warns_without_noise_and_flags_small_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(
        dir.path(),
        &["--set", "sigma_grid=[0]", "--set", "integrator.n_trajectories=500", "--set", "integrator.n_steps=50", "simulate"],
    );
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("possibly not unique"), "{err}");
    assert!(err.contains("effective samples"), "{err}");
    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert!(log.contains("possibly not unique"));
}

#[test]
fn galerkin_rows_respect_the_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(
        dir.path(),
        &["--set", "sigma_grid=[1,2]", "--set", "l_grid=[1,2,4]", "galerkin"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("trel_sweep.csv"));
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let t: f64 = r[col(&header, "t_rel")].parse().unwrap();
        let lb: f64 = r[col(&header, "lower_bound")].parse().unwrap();
        assert!(t >= lb);
        assert_eq!(r[col(&header, "converged")], "1");
    }
    let v = json(&dir.path().join("verification.json"));
    assert_eq!(v["all_pass"], true);
    let slope = v["scaling_slope_at_sigma_star"].as_f64().unwrap();
    assert!((1.2..=1.8).contains(&slope), "{slope}");
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(
        dir.path(),
        &[
            "--set",
            "truncation={\"D\":2,\"J\":2,\"refine_limit\":6}",
            "--set",
            "sigma_grid=[0.05]",
            "--set",
            "include_sigma_star=false",
            "galerkin",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    // the sweep is still written, with the row flagged
    let (header, rows) = csv_rows(&dir.path().join("trel_sweep.csv"));
    assert_eq!(rows[0][col(&header, "converged")], "0");
}

#[test]
fn compare_merges_bounds_and_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let out = selfrepel(dir.path(), &["--set", "sigma_grid=[1]", "compare"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&dir.path().join("compare.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let lo: f64 = r[col(&header, "t_rel_lower")].parse().unwrap();
        let t: f64 = r[col(&header, "t_rel_measured")].parse().unwrap();
        let up: f64 = r[col(&header, "upper_bound_trel")].parse().unwrap();
        assert!(lo <= t && t <= up);
    }
}

#[test]
fn output_directory_precedence_and_config_file() {
    let root = tempfile::tempdir().unwrap();
    let from_env = root.path().join("env");
    let from_flag = root.path().join("flag");
    let from_cfg = root.path().join("cfg");
    let cfg = root.path().join("exp.json");
    std::fs::write(
        &cfg,
        format!(
            "{{\"model\": {{\"L\": 1.5}}, \"output\": {{\"directory\": {:?}}}}}",
            from_cfg.to_str().unwrap()
        ),
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_selfrepel");
    let run = |extra: &[&str], env: Option<&Path>| {
        let mut c = Command::new(bin);
        c.arg("--config").arg(&cfg).args(extra).arg("bounds").env_remove("SELFREPEL_OUTPUT_DIR");
        if let Some(e) = env {
            c.env("SELFREPEL_OUTPUT_DIR", e);
        }
        assert!(c.status().unwrap().success());
    };
    run(&[], None);
    assert!(from_cfg.join("bounds.json").exists());
    run(&[], Some(&from_env));
    assert!(from_env.join("bounds.json").exists());
    run(&["--output-dir", from_flag.to_str().unwrap()], Some(&from_env));
    assert!(from_flag.join("bounds.json").exists());
    let b = json(&from_flag.join("bounds.json"));
    assert_eq!(b["report"]["circumference_param"], 1.5);
    // relocating does not change identity or content
    assert_eq!(
        std::fs::read(from_env.join("bounds.json")).unwrap(),
        std::fs::read(from_flag.join("bounds.json")).unwrap()
    );
    assert!(!from_flag.join(".bounds.json.tmp").exists());
}
