use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn posd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posd")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--n", "40", "--seed", "42", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    posd(&args)
}

#[test]
fn prob_prints_the_exact_tail() {
    let o = posd(&["prob", "--domains", "4", "--atleast", "3", "--p", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0.05078125");
    assert_eq!(stdout(&posd(&["prob", "--domains", "4", "--atleast", "5", "--p", "0.25"])).trim(), "0");
    assert_eq!(posd(&["prob", "--domains", "4", "--atleast", "3", "--p", "1.5"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(posd(&["generate", "--n", "40"]).status.code(), Some(2));
    assert_eq!(posd(&["generate", "--paradigm", "passive", "--seed", "1", "--out", "x"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(posd(&["generate", "--n", "42", "--seed", "1", "--out", out]).status.code(), Some(2));
    let o = posd(&["generate", "--paradigm", "npi", "--n", "40", "--seed", "1", "--out", out, "--augment-controls"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(posd(&["verify", "--in", dir.path().join("missing").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(posd(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn generate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = generate(dir.path(), &["--paradigm", "saux_inv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names.len(), 4, "{names:?}");
    for split in ["train", "dev", "test"] {
        assert!(dir.path().join(format!("saux_inv.{split}.jsonl")).exists());
    }
    let v = posd(&["verify", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).trim_end().ends_with("PASS"));
}

#[test]
fn generation_is_idempotent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(generate(a.path(), &["--paradigm", "tense"]).status.success());
    assert!(generate(b.path(), &["--paradigm", "tense", "--threads", "1"]).status.success());
    for split in ["train", "dev", "test"] {
        let name = format!("tense.{split}.jsonl");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn tampering_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert!(generate(dir.path(), &["--paradigm", "reflexive"]).status.success());
    let path = dir.path().join("reflexive.test.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("\"label\":false", "\"label\":true", 1)).unwrap();
    let v = posd(&["verify", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("FAIL"));

    fs::write(&path, "{\"kind\":\"schema\"}\nnot json\n").unwrap();
    assert_eq!(posd(&["verify", "--in", dir.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn train_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(generate(dir.path(), &["--paradigm", "npi"]).status.success());
    let results = dir.path().join("structural.json");
    let model = dir.path().join("model.json");
    let o = posd(&[
        "train", "--in", d, "--featurizer", "structural", "--restarts", "2", "--out", results.to_str().unwrap(),
        "--model-out", model.to_str().unwrap(), "--min-train-pairs", "1.0", "--min-test-pairs", "1.0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("diagnosis"));

    let e = posd(&["eval", "--in", d, "--model", model.to_str().unwrap()]);
    assert_eq!(e.status.code(), Some(0));
    let lin = dir.path().join("linear.json");
    let e = posd(&["eval", "--in", d, "--featurizer", "oracle-linear", "--out", lin.to_str().unwrap(), "--min-test-pairs", "0.5"]);
    assert_eq!(e.status.code(), Some(1), "threshold miss must fail");
    assert_eq!(posd(&["eval", "--in", d, "--featurizer", "surface"]).status.code(), Some(2));

    let r = posd(&["report", "--in", results.to_str().unwrap(), lin.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let table = stdout(&r);
    assert!(table.contains("structural") && table.contains("oracle-linear"), "{table}");

    let parsed: Vec<posd::EvalResult> = serde_json::from_str(&fs::read_to_string(&results).unwrap()).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[0].seed, 0);
    assert_eq!(parsed[1].seed, 1);
}
