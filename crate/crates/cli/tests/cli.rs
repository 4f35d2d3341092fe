use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metro_twin::scenario::import_submodel;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metro-twin"));
    c.env_remove("METRO_TWIN_OUT");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Relative path -> contents of every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn run_to(name: &str, out: &Path, extra: &[&str]) {
    let path = scenario(name);
    let mut args = vec!["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_bundled_scenarios() {
    for name in ["manufacturing_line", "process_swarm"] {
        let o = run(&["validate", scenario(name).to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["validate", scenario("manufacturing_line").to_str().unwrap()]);
    assert!(stdout(&o).contains("4 sensors"), "{}", stdout(&o));
}

#[test]
fn validate_reports_every_issue_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("manufacturing_line"))
        .unwrap()
        .replace("certificate = \"T2-lab-2024\"", "certificate = \"missing-cert\"")
        .replace("start_s = 900", "start_s = 99999");
    fs::create_dir_all(dir.path().join("certs")).unwrap();
    for i in 1..=4 {
        let src = scenario("manufacturing_line").parent().unwrap().join(format!("certs/T{i}.json"));
        fs::copy(src, dir.path().join(format!("certs/T{i}.json"))).unwrap();
    }
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing-cert"), "{err}");
    assert!(err.contains("faults[0].start_s"), "{err}");
}

#[test]
fn unparsable_scenario_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.toml");
    fs::write(&path, "[scenario\nname=").unwrap();
    assert_eq!(code(&run(&["validate", path.to_str().unwrap()])), 1);
}

#[test]
fn missing_file_is_a_runtime_error() {
    assert_eq!(code(&run(&["validate", "/nonexistent/scenario.toml"])), 2);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&[])), 64);
    assert_eq!(code(&run(&["run"])), 64);
    assert_eq!(code(&run(&["run", "x.toml", "--threads", "0"])), 64);
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("export-aas"));
}

#[test]
fn same_seed_gives_identical_output_directories() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    run_to("manufacturing_line", &a, &[]);
    run_to("manufacturing_line", &b, &["--threads", "4"]);
    let sa = snapshot(&a);
    assert!(sa.contains_key(Path::new("digests.json")));
    assert!(sa.contains_key(Path::new("events.jsonl")));
    assert_eq!(sa, snapshot(&b));
    run_to("manufacturing_line", &c, &["--seed", "99"]);
    assert_ne!(sa[Path::new("digests.json")], snapshot(&c)[Path::new("digests.json")]);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = bin()
        .args(["run", scenario("manufacturing_line").to_str().unwrap()])
        .env("METRO_TWIN_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("streams.json").is_file());
}

#[test]
fn empty_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    fs::write(&path, "[scenario]\nname = \"empty\"\nduration_s = 60\nseed = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("events.jsonl")).unwrap(), "");
    assert_eq!(fs::read_to_string(out.join("streams.json")).unwrap().trim(), "[]");
}

#[test]
fn report_flags_the_faulty_sensor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_to("process_swarm", &out, &[]);
    let o = run(&["report", "--csv", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut flagged = Vec::new();
    for r in rows.records() {
        let r = r.unwrap();
        if r[col("windows_flagged")].parse::<usize>().unwrap() > 0 {
            flagged.push(r[col("stream_id")].to_string());
            assert!(r[col("swaps")].parse::<usize>().unwrap() >= 1);
        }
    }
    assert_eq!(flagged, ["P5"]);
    let table = stdout(&run(&["report", out.to_str().unwrap()]));
    assert!(table.lines().any(|l| l.starts_with("P5 ")), "{table}");
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), text);
}

#[test]
fn export_aas_matches_written_submodel_and_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_to("manufacturing_line", &out, &[]);
    for id in ["T3", "T_line", "T_line_hot"] {
        let o = run(&["export-aas", out.to_str().unwrap(), id]);
        assert_eq!(code(&o), 0, "{id}: {}", String::from_utf8_lossy(&o.stderr));
        let printed = import_submodel(&stdout(&o)).unwrap();
        let written = import_submodel(&fs::read_to_string(out.join(format!("submodels/{id}.json"))).unwrap()).unwrap();
        assert_eq!(printed, written, "{id}");
    }
    let o = run(&[
        "export-aas",
        out.to_str().unwrap(),
        "T1",
        "--from",
        "2025-01-01T00:00:00Z",
        "--to",
        "2025-01-01T00:00:09Z",
    ]);
    assert_eq!(code(&o), 0);
    let sm = import_submodel(&stdout(&o)).unwrap();
    assert!(sm.element("RangeFrom").is_some());
    match &sm.element("SampleCount").unwrap().value {
        metro_twin::scenario::ElementValue::Property { value } => assert_eq!(value, "10"),
        other => panic!("{other:?}"),
    }
    assert_eq!(code(&run(&["export-aas", out.to_str().unwrap(), "nope"])), 2);
    assert_eq!(code(&run(&["export-aas", out.to_str().unwrap(), "T1", "--from", "garbage", "--to", "x"])), 64);
}
