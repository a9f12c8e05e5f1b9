use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

/// A scratch directory holding the inputs every test uses.
fn setup() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(p, "simplex.json", &json!({"ambient_dim": 2, "vertices": {"v0": ["0", "0"], "v1": ["1", "0"], "v2": ["0", "1"]}, "simplices": [["v0", "v1", "v2"]]}));
    write(
        p,
        "square_l.json",
        &json!({"ambient_dim": 2, "vertices": {"w0": ["0", "0"], "w1": ["2", "0"], "w2": ["2", "2"], "w3": ["0", "2"]}, "simplices": [["w0", "w1", "w2"], ["w0", "w2", "w3"]]}),
    );
    write(p, "identity.json", &json!({"kind": "identity", "complex": "simplex.json"}));
    write(p, "patch.json", &json!({"kind": "fixture", "name": "patch_homeomorphism"}));
    write(
        p,
        "bump.json",
        &json!({"kind": "pl", "domain": "simplex.json", "target_dim": 2, "images": {"v0": ["1/30000", "1/30000"], "v1": ["-2/30000", "1/30000"], "v2": ["1/30000", "-2/30000"]}}),
    );
    d
}

fn plsurj(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plsurj")).current_dir(dir).args(args).output().unwrap()
}

fn json_out(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn validate_reports_every_problem() {
    let d = setup();
    write(d.path(), "bad.json", &json!({"ambient_dim": 2, "vertices": {"a": ["0", "0"], "b": ["1", "0"], "c": ["2", "0"]}, "simplices": [["a", "b", "c"], ["a", "z"]]}));
    let o = plsurj(d.path(), &["validate", "--complex", "bad.json"]);
    assert_eq!(o.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], json!(false));
    assert_eq!(v["errors"].as_array().unwrap().len(), 2);

    let v = json_out(&plsurj(d.path(), &["validate", "--complex", "square_l.json"]));
    // 4 vertices, 5 edges, 2 triangles.
    assert_eq!(v["simplices"], json!(11));
    assert_eq!(plsurj(d.path(), &["validate", "--complex", "square_l.json", "--strict"]).status.code(), Some(3));
}

#[test]
fn sd_writes_the_subdivision() {
    let d = setup();
    let o = plsurj(d.path(), &["sd", "--complex", "simplex.json", "-k", "2", "--out", "sd2.json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("sd2.json")).unwrap()).unwrap();
    assert_eq!(v["simplices"].as_array().unwrap().len(), 36);
    // 7 vertices of sd, then a midpoint for each of its 12 edges and a centre for each of its 6 triangles.
    assert_eq!(v["vertices"].as_object().unwrap().len(), 25);
    let again = plsurj(d.path(), &["sd", "--complex", "simplex.json", "-k", "2"]);
    assert_eq!(again.stdout, std::fs::read(d.path().join("sd2.json")).unwrap());
}

#[test]
fn stars_lists_cells() {
    let d = setup();
    let v = json_out(&plsurj(d.path(), &["stars", "--complex", "square_l.json", "--vertex", "w1"]));
    // w1 lies only in the lower triangle: itself, two edges, one triangle.
    assert_eq!(v["cells"], json!(["[w0,w1]", "[w0,w1,w2]", "[w1]", "[w1,w2]"]));
}

#[test]
fn budget_table_is_exact() {
    let d = setup();
    let v = json_out(&plsurj(d.path(), &["budget", "--complex", "simplex.json"]));
    let t = &v["per_tau"][0];
    assert_eq!(t["squared_delta"]["exact"], json!("1/18"));
    assert_eq!(t["squared_eps_star"]["exact"], json!("1/2592"));
    assert_eq!(json_out(&plsurj(d.path(), &["budget", "--complex", "square_l.json"]))["squared_eps1"]["exact"], json!("2"));
}

#[test]
fn squeeze_fixes_the_diagonal() {
    let d = setup();
    write(d.path(), "pts.json", &json!({"points": [["1", "1"], ["0", "2"], ["2", "1"]]}));
    let v = json_out(&plsurj(d.path(), &["squeeze", "--complex", "square_l.json", "--ratio", "1/2", "--points", "pts.json"]));
    assert_eq!(v["images"], json!([["1", "1"], ["0", "2"], ["2", "1"]]));
    assert_eq!(v["taus"].as_array().unwrap().len(), 2);
}

#[test]
fn supnorm_of_a_bump() {
    let d = setup();
    write(d.path(), "perturbed.json", &json!({"kind": "perturbed", "base": "identity.json", "bump": "bump.json"}));
    let v = json_out(&plsurj(d.path(), &["supnorm", "--map", "identity.json", "--map", "perturbed.json"]));
    // Largest displacement is at v1: (2² + 1²)/30000².
    assert_eq!(v["hi2"]["exact"], json!("1/180000000"));
    assert_eq!(v["lo2"], v["hi2"]);
}

#[test]
fn approx_and_surjectivize_verify() {
    let d = setup();
    for (cmd, file) in [("approx", "a.json"), ("surjectivize", "s.json")] {
        let o = plsurj(d.path(), &[cmd, "--map", "patch.json", "--out", file]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v = json_out(&plsurj(d.path(), &["verify", "--result", file]));
        assert_eq!(v["passed"], json!(true), "{v}");
    }
    let s: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["surjective"], json!(true));
    assert_eq!(s["separated"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_catches_a_tampered_table() {
    let d = setup();
    assert!(plsurj(d.path(), &["surjectivize", "--map", "patch.json", "--out", "s.json"]).status.success());
    let mut s: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("s.json")).unwrap()).unwrap();
    let table = s["vertex_map"].as_object_mut().unwrap();
    for (_, w) in table.iter_mut() {
        *w = json!("w0");
    }
    write(d.path(), "bad.json", &s);
    let o = plsurj(d.path(), &["verify", "--result", "bad.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn pipeline_is_deterministic_and_verifies() {
    let d = setup();
    let args = ["pipeline", "--map", "identity.json", "--eps2", "2", "--bump", "bump.json", "--depth", "2"];
    let a = plsurj(d.path(), &[&args[..], &["--out", "r1.json", "--svg", "r1.svg"]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = plsurj(d.path(), &[&args[..], &["--out", "r2.json", "--svg", "r2.svg"]].concat());
    assert!(b.status.success());
    let read = |f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read("r1.json"), read("r2.json"));
    assert_eq!(read("r1.svg"), read("r2.svg"));
    let v = json_out(&plsurj(d.path(), &["verify", "--result", "r1.json", "--depth", "2"]));
    assert_eq!(v["passed"], json!(true), "{v}");
}

#[test]
fn exit_codes() {
    let d = setup();
    let o = plsurj(d.path(), &["pipeline", "--map", "identity.json", "--eps", "1/10", "--budget-simplices", "500"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage 1"));
    let o = plsurj(d.path(), &["sd", "--complex", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = plsurj(d.path(), &["render-svg", "--complex", "square_l.json", "--no-labels"]);
    let svg = String::from_utf8(o.stdout).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 2);
    assert!(!svg.contains("<text"));
}
