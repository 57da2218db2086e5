use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use varpoly_cli::problem::ProblemFile;

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn varpoly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varpoly")).args(args).output().expect("spawn varpoly")
}

fn file(name: &str) -> String {
    problems().join(name).to_str().unwrap().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn catalog_files_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(problems()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "vp") {
            let p = ProblemFile::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let text = p.serialize();
            let back = ProblemFile::parse(&text).unwrap();
            assert_eq!(back, p, "{}", path.display());
            assert_eq!(back.serialize(), text);
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn analyze_abs() {
    let out = varpoly(&["analyze", &file("abs.vp")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["command"], "analyze");
    assert_eq!(r["result"]["verdicts"]["nondegenerate"], true);
    assert_eq!(r["result"]["verdicts"]["soqc"], true);
    assert_eq!(r["provenance"]["seed"], 42);
}

#[test]
fn prox_soft_threshold_kink() {
    let out = varpoly(&["prox", &file("soft-threshold.vp")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let c1 = &r["result"]["results"][0]["c1"];
    assert_eq!(c1["verdict"], "notC1");
    assert!((num(&c1["jump_location"][0]) - 0.5).abs() <= 1e-3);
    assert!((num(&c1["max_jump"]) - 1.0).abs() <= 0.05);
    // soft thresholding at the `at` points
    let evals = r["result"]["results"][0]["evaluations"].as_array().unwrap();
    assert!((num(&evals[0]["prox"][0]) - 0.0).abs() < 1e-12);
    assert!((num(&evals[1]["prox"][0]) - 0.4).abs() < 1e-12);
}

#[test]
fn geneq_circle() {
    let out = varpoly(&["geneq", &file("circle.vp")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &report(&out)["result"];
    assert_eq!(r["smr"], true);
    let s = &r["sigma_jacobian"];
    let expected = [[0.0, 0.0], [0.0, 0.5]];
    for (i, row) in expected.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            assert!((num(&s[i][j]) - e).abs() < 1e-14, "{s}");
        }
    }
    assert_eq!(r["mr_estimate"]["violations"], 0);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let o = varpoly(&[
            "subderiv",
            &file("abs-quadratic.vp"),
            "--out",
            out.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out).unwrap(), std::fs::read(csv).unwrap())
    };
    let (a, ca) = run("a");
    let (b, cb) = run("b");
    assert_eq!(a, b);
    assert_eq!(ca, cb);
    let csv = String::from_utf8(ca).unwrap();
    assert!(csv.starts_with("t,base,w,w_prime,quotient\n"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn number_format_and_sorted_keys() {
    let out = varpoly(&["analyze", &file("nlp.vp")]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"value\": 0.000000000000e+00"), "{text}");
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") && !l.starts_with("   "))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(report(&Output { stdout: text.into_bytes(), ..out })["result"]["lambda_is_multiplier"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let abs = std::fs::read_to_string(problems().join("abs.vp")).unwrap();

    // 2: unknown key, malformed number, bad --tol, --csv on a command without tables
    let bad = write("bad.vp", &abs.replace("x = 0", "xx = 0"));
    assert_eq!(varpoly(&["analyze", &bad]).status.code(), Some(2));
    let bad = write("bad2.vp", &abs.replace("v = 0", "v = zero"));
    assert_eq!(varpoly(&["analyze", &bad]).status.code(), Some(2));
    assert_eq!(varpoly(&["analyze", &file("abs.vp"), "--tol", "bogus=1"]).status.code(), Some(2));
    assert_eq!(varpoly(&["analyze", &file("abs.vp"), "--csv", "x.csv"]).status.code(), Some(2));

    // 3: v outside ∂φ(x); the report names the precondition
    let not_sub = write("notsub.vp", &abs.replace("v = 0", "v = 2"));
    let out = varpoly(&["subderiv", &not_sub]);
    assert_eq!(out.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["status"], "precondition-failed");
    assert!(r["precondition"].is_string());

    // 4: a kink the formula predicts but the probe cannot see at this jump tolerance
    let out = varpoly(&["prox", &file("soft-threshold.vp"), "--tol", "jump=2"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(report(&out)["status"], "inconsistency");

    // missing file
    assert_eq!(varpoly(&["analyze", "/nonexistent/file.vp"]).status.code(), Some(1));
}

#[test]
fn epi_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("epi.csv");
    let out = varpoly(&["epi", &file("neg-square.vp"), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["result"]["status"], "consistent-convergent");
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + report(&out)["result"]["records"].as_u64().unwrap() as usize);
}

#[test]
fn tol_override_is_echoed() {
    let out = varpoly(&["analyze", &file("abs.vp"), "--tol", "act=1e-8"]);
    assert_eq!(report(&out)["provenance"]["tolerances"]["act"].as_f64(), Some(1e-8));
}
