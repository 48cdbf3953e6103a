use std::path::Path;
use std::process::{Command, Output};

fn ionkick(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionkick"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["design", "--species", "Yb171", "--d", "-1"])), 2);
    assert_eq!(code(&ionkick(tmp.path(), &["design", "--species", "Xe131"])), 2);
    assert_eq!(code(&ionkick(tmp.path(), &["fidelity", "--pair", "0,7"])), 2);
    assert_eq!(code(&ionkick(tmp.path(), &["sweep", "--start", "2e-4", "--stop", "1e-4"])), 2);
    assert_eq!(code(&ionkick(tmp.path(), &["frobnicate"])), 2);

    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"lattice": {"rows": 2}}"#).unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["design", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn numerical_failures_exit_with_one() {
    // a 1 kHz trap cannot hold a 3×3 crystal at 50 μm
    let tmp = tempfile::tempdir().unwrap();
    let o = ionkick(tmp.path(), &["modes", "--rows", "3", "--cols", "3", "--trap-frequency", "1000"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn overwrite_requires_force() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["design"])), 0);
    let o = ionkick(tmp.path(), &["design"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    assert_eq!(code(&ionkick(tmp.path(), &["design", "--force"])), 0);
}

#[test]
fn design_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ionkick(tmp.path(), &["design", "--species", "Yb171", "--d", "50e-6"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("147") && stdout.contains("0.5443"), "{stdout}");
    let doc = json(&tmp.path().join("design/design.json"));
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config"]["species"], "Yb171");
    assert_eq!(doc["result"]["design"]["kicks_per_arm"], 147);

    let o = ionkick(tmp.path(), &["design", "--species", "Ca40", "--d", "50e-6", "--force"]);
    let doc = json(&tmp.path().join("design/design.json"));
    assert_eq!(code(&o), 0);
    assert_eq!(doc["result"]["design"]["kicks_per_arm"], 86);
    assert!((doc["result"]["gate_time_us"].as_f64().unwrap() - 2.15).abs() < 1e-9);
}

#[test]
fn config_file_with_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"species": "Be9", "lattice": {"rows": 1, "cols": 2, "spacing": 2.5e-4}}"#).unwrap();
    let o = ionkick(tmp.path(), &["design", "--config", cfg.to_str().unwrap(), "--d", "5e-5"]);
    assert_eq!(code(&o), 0);
    let doc = json(&tmp.path().join("design/design.json"));
    assert_eq!(doc["config"]["species"], "Be9");
    assert_eq!(doc["config"]["lattice"]["spacing"], 5e-5);
    assert_eq!(doc["result"]["design"]["kicks_per_arm"], 43);
}

#[test]
fn two_ion_modes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["modes"])), 0);
    let doc = json(&tmp.path().join("modes/modes.json"));
    let eps = doc["result"]["epsilon"].as_f64().unwrap();
    let f: Vec<f64> = doc["result"]["frequencies_hz"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(f.len(), 2);
    assert!((f[0] / f[1] - (1.0 - 2.0 * eps).sqrt()).abs() < 1e-12);
    let manifest = json(&tmp.path().join("modes/manifest.json"));
    assert_eq!(manifest["files"][0], "frequencies.csv");
}

#[test]
fn zero_temperature_lowers_infidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |t: &str| {
        let o = ionkick(tmp.path(), &["fidelity", "--rows", "3", "--cols", "3", "--temperature", t, "--force"]);
        assert_eq!(code(&o), 0);
        json(&tmp.path().join("fidelity/fidelity.json"))["result"]["report"]["worst_case_infidelity"].as_f64().unwrap()
    };
    let (hot, cold) = (run("doppler"), run("zero"));
    assert!(cold < hot, "{cold} vs {hot}");
    assert_eq!(csv_rows(&tmp.path().join("fidelity/per_mode.csv")).len(), 9);
}

#[test]
fn single_point_sweep_matches_design() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["design", "--d", "7e-5"])), 0);
    let o = ionkick(tmp.path(), &["sweep", "--start", "7e-5", "--stop", "7e-5", "--points", "1"]);
    assert_eq!(code(&o), 0);
    let design = json(&tmp.path().join("design/design.json"))["result"]["design"].clone();
    let rows = csv_rows(&tmp.path().join("sweep/sweep_d.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 7e-5);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), design["omega_z"].as_f64().unwrap() / (2.0 * std::f64::consts::PI));
    assert_eq!(rows[0][2], design["kicks_per_arm"].to_string());
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), design["epsilon"].as_f64().unwrap());
}

#[test]
fn spacing_sweep_rows_are_sorted_and_small_numbers_use_exponents() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ionkick(tmp.path(), &["sweep", "--rows", "4", "--cols", "4", "--start", "3e-5", "--stop", "2.5e-4", "--points", "20"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&tmp.path().join("sweep/sweep_d.csv"));
    assert_eq!(rows.len(), 20);
    let d: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] < w[1]));
    assert!((d[0] - 3e-5).abs() < 1e-18 && d[19] == 2.5e-4);
    for r in &rows {
        for cell in r {
            let x: f64 = cell.parse().unwrap();
            if x != 0.0 && x.abs() < 1e-3 {
                assert!(cell.contains('e'), "{cell}");
            }
        }
    }
}

#[test]
fn block_sweep_crosses_budget_at_five() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ionkick(tmp.path(), &["sweep", "--variable", "n", "--start", "1", "--stop", "8", "--analytic-only"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("n = 5"));
    let rows = csv_rows(&tmp.path().join("sweep/sweep_n.csv"));
    assert_eq!(rows.len(), 8);
    let analytic: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(analytic[3] >= 1e-3 && analytic[4] < 1e-3);
    assert!(rows.iter().all(|r| r[2].is_empty()));
}

#[test]
fn velocity_default_grid() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["velocity"])), 0);
    let s = json(&tmp.path().join("velocity/summary.json"));
    let v = s["result"]["normalized_max"].as_f64().unwrap();
    assert!((v - 3.5).abs() < 0.1, "{v}");
    assert_eq!(s["result"]["grid"], 201);
    assert_eq!(csv_rows(&tmp.path().join("velocity/velocity.csv")).len(), 201 * 201);
}

#[test]
fn crosstalk_and_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["crosstalk", "--rows", "13", "--cols", "13", "--block", "4"])), 0);
    let s = json(&tmp.path().join("crosstalk/summary.json"));
    let slope = s["result"]["slope_fit"]["exponent"].as_f64().unwrap();
    assert!((slope + 3.0).abs() < 0.2, "{slope}");
    assert_eq!(s["result"]["parallel"]["block_size"], 4);
    assert_eq!(csv_rows(&tmp.path().join("crosstalk/crosstalk.csv")).len(), 168);

    assert_eq!(code(&ionkick(tmp.path(), &["schedule", "--rows", "12", "--cols", "12", "--block", "3"])), 0);
    let s = json(&tmp.path().join("schedule/schedule.json"));
    assert_eq!(s["result"]["groups"].as_array().unwrap().len(), 18);
}

#[test]
fn propagate_and_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ionkick(tmp.path(), &["propagate", "--rows", "11", "--cols", "11", "--steps", "32"])), 0);
    let s = json(&tmp.path().join("propagate/summary.json"));
    assert!(s["result"]["energy_drift"].as_f64().unwrap() < 1e-9);
    assert_eq!(s["result"]["source"], 60);
    assert_eq!(csv_rows(&tmp.path().join("propagate/envelopes.csv")).len(), 121);

    assert_eq!(code(&ionkick(tmp.path(), &["trajectory", "--samples-per-interval", "2"])), 0);
    let rows = csv_rows(&tmp.path().join("trajectory/trajectory.csv"));
    // two samples per kick interval over 294 kicks plus one trailing period
    assert_eq!(rows.len(), 2 * 294 + 1);
    assert_eq!(rows[0][1], "0");
}
