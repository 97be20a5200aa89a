use std::process::Command;

fn ordcbpv(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ordcbpv"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn check_modes() {
    let (code, out, _) = ordcbpv(&["check", "corpus/two_resources.ord"]);
    assert_eq!(code, 0);
    assert!(out.contains("ordered"));
    let (code, _, err) = ordcbpv(&["check", "corpus/counterexample_p.ord"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, _) = ordcbpv(&["check", "corpus/counterexample_p.ord", "--mode", "linear"]);
    assert_eq!(code, 0);
}

#[test]
fn run_prints_final_freelist() {
    let (code, out, _) = ordcbpv(&["run", "corpus/counterexample_p.ord", "--mode", "linear", "--freelist", "0,1"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "final: () freelist: [1,0]");
    let (code, out, _) = ordcbpv(&[
        "run", "corpus/three_alloc.afn", "--freelist", "0,1", "--verify", "typing,resources",
    ]);
    assert_eq!(code, 0);
    assert!(out.starts_with("final: inr () freelist: [0,1]"), "{out}");
    assert!(out.contains("typing: ok resources: ok"));
}

#[test]
fn trace_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    let p = path.to_str().unwrap();
    let (code, _, _) = ordcbpv(&["run", "corpus/two_resources.ord", "--freelist", "0,1", "--trace", p]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let steps = v.as_array().unwrap();
    assert!(steps.iter().any(|s| s["expr"] == "inl #1" && s["freelist"].as_array().unwrap().is_empty()));
}

#[test]
fn elaborate_output_checks_as_core() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.ord");
    let (code, _, _) = ordcbpv(&["elaborate", "corpus/try_unless.afn", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, _, err) = ordcbpv(&["check", out.to_str().unwrap(), "--mode", "ordered"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, _) = ordcbpv(&["run", "corpus/two_resources.ord", "--freelist", "a"]);
    assert_eq!(code, 2);
    let (code, _, _) = ordcbpv(&["check", "corpus/two_resources.ord", "--mode", "withmove"]);
    assert_eq!(code, 2);
}

#[test]
fn verify_small_sweep() {
    let (code, out, _) = ordcbpv(&["verify", "--seeds", "3", "--max-freelist", "3"]);
    assert_eq!(code, 0);
    assert!(out.contains("result: PASS"), "{out}");
}
