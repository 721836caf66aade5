use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn wrapfix(args: &[&str]) -> Output {
    wrapfix_env(args, &[])
}

fn wrapfix_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wrapfix"));
    cmd.args(args).env_remove("WRAPFIX_THRESHOLD");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FIG1_A: &str = "/html[1]/body[1]/table[1]/tr[1]/td[1]";

fn sign_fig1(dir: &Path) -> PathBuf {
    let sig = dir.join("sig.json");
    let o = wrapfix(&["sign", "--page", s(&fixture("fig1.html")), "--xpath", FIG1_A, "--out", s(&sig)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    sig
}

#[test]
fn sign_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sig = sign_fig1(dir.path());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sig).unwrap()).unwrap();
    assert_eq!(doc["version"], 1);
    assert_eq!(doc["original_xpath"], FIG1_A);

    let out = dir.path().join("x.json");
    let o = wrapfix(&["sign", "--page", s(&fixture("fig1.html")), "--xpath", "//td", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unsupported XPath"), "{}", stderr(&o));

    let o = wrapfix(&[
        "sign",
        "--page",
        s(&fixture("fig1.html")),
        "--xpath",
        "/html[1]/body[1]/table[1]/tr[7]/td[1]",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = wrapfix(&["sign", "--page", s(&dir.path().join("missing.html")), "--xpath", FIG1_A, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn threshold_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sig.json");
    let read = |p: &Path| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    let page = fixture("fig1.html");
    let base = ["sign", "--page", s(&page), "--xpath", FIG1_A, "--out", s(&out)];

    assert_eq!(wrapfix(&base).status.code(), Some(0));
    assert_eq!(read(&out)["options"]["threshold"], "0.85");

    let o = wrapfix_env(&base, &[("WRAPFIX_THRESHOLD", "0.7")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&out)["options"]["threshold"], "0.7");

    let mut with_flag = base.to_vec();
    with_flag.extend(["--threshold", "3/8"]);
    let o = wrapfix_env(&with_flag, &[("WRAPFIX_THRESHOLD", "0.7")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(&out)["options"]["threshold"], "0.375");

    let mut bad = base.to_vec();
    bad.extend(["--threshold", "1.5"]);
    assert_eq!(wrapfix(&bad).status.code(), Some(1));
}

#[test]
fn sign_options_are_stored() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sig.json");
    let o = wrapfix(&[
        "sign",
        "--page",
        s(&fixture("fig1.html")),
        "--xpath",
        "/html[1]/body[1]/table[1]/tr[2]/td",
        "--out",
        s(&out),
        "--attrs",
        "id,class",
        "--comparable-tags",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["mode"], "multi");
    assert_eq!(doc["snapshots"].as_array().unwrap().len(), 3);
    assert_eq!(doc["options"]["attr_keys"], serde_json::json!(["id", "class"]));
    assert_eq!(doc["options"]["tag_classes"].as_array().unwrap().len(), 3);
}

#[test]
fn adapt_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let sig = sign_fig1(dir.path());
    let report = dir.path().join("report.json");
    let read = || -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap() };

    let o = wrapfix(&["adapt", "--page", s(&fixture("fig1.html")), "--signature", s(&sig), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read()["status"], "xpath_still_valid");
    assert_eq!(read()["candidates_scored"], 0);

    let o = wrapfix(&[
        "adapt",
        "--page",
        s(&fixture("fig1_moved.html")),
        "--signature",
        s(&sig),
        "--out",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read()["status"], "adapted");
    assert!(stdout(&o).contains("/html[1]/body[1]/table[1]/tr[2]/td[1]"), "{}", stdout(&o));

    let o = wrapfix(&[
        "adapt",
        "--page",
        s(&fixture("fig2_a.html")),
        "--signature",
        s(&sig),
        "--out",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read()["status"], "no_match");

    let o = wrapfix(&[
        "adapt",
        "--page",
        s(&fixture("fig1_moved.html")),
        "--signature",
        s(&sig),
        "--out",
        s(&report),
        "--algorithm",
        "simple",
    ]);
    // the moved cell gained two children: 1/3 under normalized simple matching
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read()["algorithm"], "simple");

    let o = wrapfix(&["adapt", "--page", s(&fixture("fig1.html")), "--signature", s(&dir.path().join("nope.json")), "--out", s(&report)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn adapt_explain_dumps_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("sig.json");
    let o = wrapfix(&[
        "sign",
        "--page",
        s(&fixture("fig2_a.html")),
        "--xpath",
        "/html[1]/body[1]/a[1]",
        "--out",
        s(&sig),
        "--threshold",
        "0.3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    // move the tree one level down so the stored XPath breaks
    let page = dir.path().join("b.html");
    let b = std::fs::read_to_string(fixture("fig2_b.html")).unwrap().replace("<body>", "<body><div>");
    std::fs::write(&page, b).unwrap();
    let report = dir.path().join("r.json");
    let o = wrapfix(&["adapt", "--page", s(&page), "--signature", s(&sig), "--out", s(&report), "--explain"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("3/8"), "{text}");
    assert!(text.contains("1/24"), "{text}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["results"][0]["score_fraction"], "3/8");
    assert!(!doc["explain"].as_array().unwrap().is_empty());
}

#[test]
fn match_prints_scores() {
    let (a, b) = (fixture("fig2_a.html"), fixture("fig2_b.html"));
    let x = "/html[1]/body[1]/a[1]";
    let run = |pa: &Path, pb: &Path, alg: &str| {
        let o = wrapfix(&["match", "--page-a", s(pa), "--xpath-a", x, "--page-b", s(pb), "--xpath-b", x, "--algorithm", alg]);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o).trim().to_string()
    };
    assert_eq!(run(&a, &b, "clustered"), "3/8 (0.375)");
    assert_eq!(run(&a, &b, "simple"), "7");
    assert_eq!(run(&a, &a, "clustered"), "1");
}

#[test]
fn mutate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let page = dir.path().join("page.html");
    // normalize first so an empty spec must reproduce the bytes exactly
    let spec_empty = dir.path().join("empty.json");
    std::fs::write(&spec_empty, "{}").unwrap();
    let o = wrapfix(&["mutate", "--page", s(&fixture("fig1.html")), "--spec", s(&spec_empty), "--seed", "1", "--out", s(&page)]);
    assert_eq!(o.status.code(), Some(0));
    let again = dir.path().join("again.html");
    let o = wrapfix(&["mutate", "--page", s(&page), "--spec", s(&spec_empty), "--seed", "1", "--out", s(&again)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&page).unwrap(), std::fs::read(&again).unwrap());

    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"operations": [{"kind": "insert_sibling", "locus": "/html[1]/body[1]/table[1]/tr", "outline": "tr(td)"}]}"#,
    )
    .unwrap();
    let outs: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("m{k}.html"));
            let o = wrapfix(&["mutate", "--page", s(&page), "--spec", s(&spec), "--seed", "42", "--out", s(&out)]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_ne!(outs[0], std::fs::read(&page).unwrap());

    std::fs::write(&spec, r#"{"operations": [{"kind": "delete_leaf", "locus": "/html[1]/body[1]/ul[1]"}]}"#).unwrap();
    let o = wrapfix(&["mutate", "--page", s(&page), "--spec", s(&spec), "--out", s(&dir.path().join("z.html"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_bundled_and_empty() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/drift");
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("eval.json");
    let o = wrapfix(&["eval", "--corpus", s(&corpus), "--algorithm", "both", "--out", s(&json)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.starts_with("Algorithm\tSubset\tCases\tTP\tFP\tFN\tPrecision\tRecall\tF-Measure"));
    assert!(table.contains("Simple Tree Matching\tall\t55\t"));
    assert!(table.contains("Clustered Tree Matching\tminor\t45\t"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["cases"].as_array().unwrap().len(), 55);

    let empty = tempfile::tempdir().unwrap();
    let o = wrapfix(&["eval", "--corpus", s(empty.path()), "--algorithm", "both"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no cases found"));
}

#[test]
fn gen_corpus_matches_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = wrapfix(&["gen-corpus", "--out", s(dir.path()), "--seed", "2010"]);
    assert_eq!(o.status.code(), Some(0));
    let bundle = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/drift/32-shop-convert/mutated.html");
    let fresh = dir.path().join("32-shop-convert/mutated.html");
    assert_eq!(std::fs::read(bundle).unwrap(), std::fs::read(fresh).unwrap());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(wrapfix(&[]).status.code(), Some(1));
    assert_eq!(wrapfix(&["sign", "--page", "x.html"]).status.code(), Some(1));
    assert_eq!(wrapfix(&["match", "--bogus"]).status.code(), Some(1));
    assert_eq!(wrapfix(&["eval", "--corpus", ".", "--algorithm", "fastest"]).status.code(), Some(1));
    assert_eq!(wrapfix(&["--help"]).status.code(), Some(0));
}
