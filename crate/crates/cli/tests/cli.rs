use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use skelmax::geometry::AxisBox;
use skelmax::grid::BoxUnionIndicator;
use skelmax::io::{read_field, write_box_union};
use skelmax::scaling::skeleton_extremizer;

fn skelmax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelmax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_union(path: &Path, e: &BoxUnionIndicator, n: usize) {
    write_box_union(fs::File::create(path).unwrap(), e, n).unwrap();
}

#[test]
fn faces_lists_every_face() {
    let out = skelmax(&["faces", "--n", "2", "--k", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r["config_hash"].as_str().unwrap().len() == 64));
    assert_eq!(records[0]["free_axes"], serde_json::json!([0]));

    let out = skelmax(&["faces", "--n", "3", "--k", "0"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 8);
}

#[test]
fn invalid_dimensions_are_usage_errors() {
    assert_eq!(code(&skelmax(&["faces", "--n", "2", "--k", "2"])), 2);
    assert_eq!(code(&skelmax(&["scan", "--n", "1", "--k", "1"])), 2);
    assert_eq!(code(&skelmax(&["faces", "--n", "two"])), 2);
    assert_eq!(code(&skelmax(&["nonsense"])), 2);
}

#[test]
fn config_file_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n": 2, "k": 1, "colour": "red"}"#).unwrap();
    let out = skelmax(&["faces", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"n": 3, "k": 1}"#).unwrap();
    let out = skelmax(&["faces", "--config", good.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 12);
    // flags override the file
    let out = skelmax(&["faces", "--config", good.to_str().unwrap(), "--k", "2"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}

#[test]
fn eval_constant_extremizer_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let constant = BoxUnionIndicator::new(vec![AxisBox::cube(-3.0, 7.0, 2)]).unwrap();
    write_union(&d.join("one.json"), &constant, 2);
    let out = skelmax(&[
        "eval", "--n", "2", "--k", "1", "--delta", "0.125",
        "--input", d.join("one.json").to_str().unwrap(),
        "--out", d.join("one").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let field = read_field(fs::File::open(d.join("one/field.csv")).unwrap()).unwrap();
    assert_eq!(field.values().len(), 64);
    assert!(field.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    let head = fs::read_to_string(d.join("one/field.csv")).unwrap();
    assert!(head.lines().next().unwrap().contains("config_hash"));

    let delta = 2f64.powi(-5);
    let e = skeleton_extremizer(2, 1, delta, &[0.5, 0.5]).unwrap();
    write_union(&d.join("ext.json"), &e, 2);
    let out = skelmax(&[
        "eval", "--n", "2", "--k", "1", "--delta", "0.03125", "--encoding", "f64le",
        "--input", d.join("ext.json").to_str().unwrap(),
        "--out", d.join("ext").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let field = read_field(fs::File::open(d.join("ext/field.bin")).unwrap()).unwrap();
    let center = field.grid().locate(&[0.5, 0.5]).unwrap();
    assert!(field.values()[center] >= 1.0);

    write_union(&d.join("empty.json"), &BoxUnionIndicator::empty(), 2);
    let out = skelmax(&[
        "eval", "--n", "2", "--k", "0", "--delta", "0.25",
        "--input", d.join("empty.json").to_str().unwrap(),
        "--out", d.join("empty").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let field = read_field(fs::File::open(d.join("empty/field.csv")).unwrap()).unwrap();
    assert!(field.values().iter().all(|v| *v == 0.0));
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e3.json");
    let e = BoxUnionIndicator::new(vec![AxisBox::unit_cube(3)]).unwrap();
    write_union(&input, &e, 3);
    let out = skelmax(&[
        "eval", "--n", "2", "--k", "1", "--delta", "0.25",
        "--input", input.to_str().unwrap(),
        "--out", dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn scan_regimes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let deltas = "0.0625,0.03125,0.015625";
    for out in [&a, &b] {
        let o = skelmax(&[
            "scan", "--n", "2", "--k", "1", "--p", "2", "--q", "8", "--delta", deltas,
            "--candidates", "skeleton-extremizer,random-boxes", "--seed", "11",
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let s = summary(&a);
    assert_eq!(s["summary"]["regime"], "skeleton-dominated");
    assert_eq!(s["summary"]["predicted_exponent"], -0.25);
    assert_eq!(s["summary"]["pass"], true);
    for f in ["scan.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let csv = fs::read_to_string(a.join("scan.csv")).unwrap();
    assert!(csv.starts_with("# tool: skelmax "));
    assert!(csv.contains(&format!("# config_hash: {}", s["config_hash"].as_str().unwrap())));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);

    let c = dir.path().join("c");
    let o = skelmax(&["scan", "--p", "2", "--q", "2", "--delta", deltas, "--out", c.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = summary(&c);
    assert_eq!(s["summary"]["regime"], "diagonal-dominated");
    assert_eq!(s["summary"]["predicted_exponent"], -0.125);
}

#[test]
fn scan_outside_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"n": 2, "k": 1, "p": 2, "q": 8, "delta_list": [0.0625, 0.03125, 0.015625], "tolerance": 0.0}"#,
    )
    .unwrap();
    let o = skelmax(&["scan", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(summary(&dir.path().join("o"))["summary"]["pass"], false);
}

#[test]
fn scan_rejects_bad_exponents_and_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&skelmax(&["scan", "--p", "4", "--q", "2", "--out", out])), 2);
    assert_eq!(code(&skelmax(&["scan", "--delta", "0.3,0.1,0.05", "--out", out])), 2);
    assert_eq!(code(&skelmax(&["scan", "--delta", "0.0625,0.03125", "--out", out])), 2);
    assert_eq!(code(&skelmax(&["scan", "--candidates", "spiral", "--out", out])), 2);
}

#[test]
fn select_writes_rows_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = skelmax(&[
        "select", "--n", "2", "--k", "1", "--m", "16,32,64,128", "--trials", "3", "--seed", "5",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("select.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 12);
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("select_summary.json")).unwrap()).unwrap();
    assert_eq!(s["predicted_exponent"], 0.625);
    assert_eq!(s["means"].as_array().unwrap().len(), 4);
    assert!(s["fit"]["slope"].is_number());
    assert_eq!(s["pass"], true);
}

#[test]
fn weaktype_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = skelmax(&[
        "weaktype", "--q", "2.6666666666666665", "--delta", "0.0625,0.03125", "--lambda", "0.25,0.5",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("weaktype.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "candidate,delta,lambda,q,exponent,level_set_measure,implied_constant");
    assert_eq!(body.len(), 1 + 4);
    assert!(body[1].starts_with("skeleton-extremizer,0.0625,0.25,"));

    assert_eq!(code(&skelmax(&["weaktype", "--lambda", "1.5", "--out", dir.path().to_str().unwrap()])), 2);
}
