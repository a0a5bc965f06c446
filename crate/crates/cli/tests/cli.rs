use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hems");
const BATTERY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/battery_only.toml");
const FULL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/full_house.toml");

fn hems(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("run hems")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str, houses: &str, k: &str) -> PathBuf {
    let out = dir.join(format!("profiles_{seed}_{houses}_{k}"));
    let o = hems(&["synth", "--seed", seed, "--houses", houses, "--k", k, "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "42", "3", "24");
    let b = dir.path().join("again");
    hems(&["synth", "--seed", "42", "--houses", "3", "--k", "24", "--out", p(&b)]);
    for name in ["house_000.csv", "house_001.csv", "house_002.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn batch_report_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = synth(dir.path(), "5", "8", "24");
    let r1 = dir.path().join("r1.csv");
    let r2 = dir.path().join("r2.csv");
    for r in [&r1, &r2] {
        let o = hems(&["batch", "--profiles-dir", p(&profiles), "--scenario", FULL, "--out", p(r)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    assert!(dir.path().join("r1.timing.csv").exists());
    assert_eq!(fs::read_dir(dir.path().join("r1_schedules")).unwrap().count(), 8);
}

#[test]
fn empty_profile_dir_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = dir.path().join("r.csv");
    let o = hems(&["batch", "--profiles-dir", p(&empty), "--scenario", BATTERY, "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn malformed_profile_exits_3_and_keeps_other_rows() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = synth(dir.path(), "1", "2", "24");
    let broken = profiles.join("house_001.csv");
    let text = fs::read_to_string(&broken).unwrap().replacen("0.08", "abc", 1);
    fs::write(&broken, text).unwrap();
    let out = dir.path().join("r.csv");
    let o = hems(&["batch", "--profiles-dir", p(&profiles), "--scenario", BATTERY, "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let report = fs::read_to_string(&out).unwrap();
    assert!(report.contains("house_000,Optimal"));
    assert!(report.contains("house_001,InputError"));
}

#[test]
fn missing_column_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("h.csv");
    fs::write(&f, "k,d_kw,r_kw,p_buy,theta_ex_c\n0,1,0,0.2,25\n").unwrap();
    let o = hems(&["solve", "--scenario", BATTERY, "--profiles", p(&f), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_sell"));
}

#[test]
fn usage_and_io_errors_exit_3() {
    assert_eq!(hems(&["bogus"]).status.code(), Some(3));
    assert_eq!(hems(&["solve", "--scenario", BATTERY]).status.code(), Some(3));
    let o = hems(&["batch", "--profiles-dir", "/nonexistent", "--scenario", BATTERY, "--out", "/tmp/x.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(hems(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_then_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = synth(dir.path(), "9", "1", "24");
    let house = profiles.join("house_000.csv");
    let out = dir.path().join("solved");
    let o = hems(&["solve", "--scenario", FULL, "--profiles", p(&house), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let schedule = out.join("house_000_schedule.csv");
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("house_000_certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["certified"], true);

    let o = hems(&["certify", "--scenario", FULL, "--profiles", p(&house), "--solution", p(&schedule)]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);

    // charge and discharge the same extra amount at one step
    let text = fs::read_to_string(&schedule).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[5].split(',').map(str::to_string).collect();
    for i in [1, 2] {
        cells[i] = (cells[i].parse::<f64>().unwrap() + 0.2).to_string();
    }
    lines[5] = cells.join(",");
    fs::write(&schedule, lines.join("\n") + "\n").unwrap();
    let o = hems(&["certify", "--scenario", FULL, "--profiles", p(&house), "--solution", p(&schedule)]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn oracle_reports_tight_gap() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = synth(dir.path(), "4", "1", "6");
    let o = hems(&["oracle", "--scenario", BATTERY, "--profiles", p(&profiles.join("house_000.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["patterns"], 64);
    assert_eq!(v["gap"]["tight"], true);

    let long = synth(dir.path(), "4", "1", "12");
    let o = hems(&[
        "oracle", "--scenario", BATTERY, "--profiles", p(&long.join("house_000.csv")), "--k-limit", "10",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_with_zero_tolerance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = hems(&["sweep", "--scenario", BATTERY, "--eta-grid", "0.9:0.9", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let o = hems(&["--eps-c", "0", "sweep", "--scenario", BATTERY, "--eta-grid", "0.9:0.9", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = hems(&["--eps-c=-1", "sweep", "--scenario", BATTERY, "--eta-grid", "0.9:0.9", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn convert_ausgrid_writes_daily_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("Solar home half-hour data\nCustomer,Generator Capacity,Postcode,Consumption Category,date");
    for i in 1..=48 {
        text.push_str(&format!(",{}:{:02}", (i / 2) % 24, (i % 2) * 30));
    }
    text.push('\n');
    for (cat, v) in [("GC", "0.4"), ("GG", "0.1")] {
        text.push_str(&format!("7,1.5,2000,{cat},2/07/2012"));
        for _ in 0..48 {
            text.push(',');
            text.push_str(v);
        }
        text.push('\n');
    }
    let input = dir.path().join("ausgrid.csv");
    fs::write(&input, text).unwrap();
    let out = dir.path().join("converted");
    let o = hems(&["convert-ausgrid", "--in", p(&input), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let house = out.join("cust007_2012-07-02.csv");
    let body = fs::read_to_string(&house).unwrap();
    assert_eq!(body.lines().count(), 25);
    assert!(body.lines().nth(1).unwrap().starts_with("0,0.8,0.2,"));

    let solved = dir.path().join("solved");
    let o = hems(&["solve", "--scenario", BATTERY, "--profiles", p(&house), "--out", p(&solved)]);
    assert_eq!(o.status.code(), Some(0));
}
