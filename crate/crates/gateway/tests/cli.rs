use std::process::Command;

use meter_core::card::{RfidCard, Uid};
use meter_core::store::CardStore;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prepaid-meter"))
}

#[test]
fn run_builtin_writes_csv_and_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.csv");
    let status = bin().args(["run", "--scenario", "table1-bulb1", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("t,state,power_w,credit_rm,relay,buzzer"));
    let row35 = csv.lines().find(|l| l.starts_with("35,")).unwrap();
    let cols: Vec<&str> = row35.split(',').collect();
    assert_eq!(cols[2], "0");
    assert_eq!(cols[4], "open");
    let events = std::fs::read_to_string(dir.path().join("t1.jsonl")).unwrap();
    assert!(events.lines().count() > 60);
}

#[test]
fn missing_scenario_is_a_validation_error() {
    let out = bin().args(["run", "--scenario", "missing.scn", "--out", "x.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));
}

#[test]
fn invalid_scenario_exits_1_and_overload_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\ninitial_credit_sen = 500\nduration_seconds = 0\n").unwrap();
    let out = bin().args(["run", "--scenario"]).arg(&bad).args(["--out", "x.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let heavy = dir.path().join("heavy.toml");
    std::fs::write(
        &heavy,
        r#"name = "heavy"
initial_credit_sen = 500
duration_seconds = 10

[[loads]]
name = "heater"
rated_watts = 40.0
measured_watts = 40.0

[[loads]]
name = "fan"
rated_watts = 40.0
measured_watts = 40.0

[[schedule]]
t = 0.0
load = "fan"
on = true

[[schedule]]
t = 3.0
load = "heater"
on = true
"#,
    )
    .unwrap();
    let out =
        bin().args(["run", "--scenario"]).arg(&heavy).arg("--out").arg(dir.path().join("h.csv")).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heater"));
}

#[test]
fn fit_table1_prints_four_significant_figures() {
    let out = bin().arg("fit-table1").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("base_rm_per_second = 9.007e-2"), "{text}");
    assert!(text.contains("rate_rm_per_watt_second = 1.122e-3"), "{text}");
}

#[test]
fn offline_topup_sets_balance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cards.jsonl");
    let uid = Uid([0xAB, 1, 2, 3, 4, 5, 6, 7]);
    let mut store = CardStore::new();
    store.insert_new(RfidCard::blank(uid)).unwrap();
    store.save(&path).unwrap();

    let status = bin()
        .args(["topup", "--store"])
        .arg(&path)
        .args(["--card", &uid.to_string(), "--amount", "12.50"])
        .status()
        .unwrap();
    assert!(status.success());
    let card = CardStore::load(&path).unwrap().get(&uid).cloned().unwrap();
    assert_eq!(card.credit().sen(), 1250);
    assert_eq!(card.write_count(), 1);

    let out = bin()
        .args(["topup", "--store"])
        .arg(&path)
        .args(["--card", &uid.to_string(), "--amount", "1.234"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
