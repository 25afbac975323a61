use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn docmend(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docmend"))
        .args(args)
        .current_dir(dir)
        .env_remove("DOCMEND_SCORER_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = docmend(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// Copy the fixture corpus into a fresh directory so runs use relative paths.
fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures();
    for name in ["bitext.tsv", "mono_en.tsv", "lid_en.tsv", "phenomena.tsv", "sents.tsv"] {
        fs::copy(src.join(name), dir.path().join(name)).unwrap();
    }
    for sub in ["mono_de", "charsets"] {
        fs::create_dir(dir.path().join(sub)).unwrap();
        for e in fs::read_dir(src.join(sub)).unwrap() {
            let e = e.unwrap();
            fs::copy(e.path(), dir.path().join(sub).join(e.file_name())).unwrap();
        }
    }
    dir
}

fn pipeline(dir: &Path, workers: &str) {
    ok(dir, &["--workers", workers, "reconstruct", "--bitext", "bitext.tsv", "--src-mono", "mono_de",
        "--tgt-mono", "mono_en.tsv", "--lid-table", "lid_en.tsv", "-o", "rec.tsv"]);
    ok(dir, &["--workers", workers, "break", "-i", "rec.tsv", "-o", "brk.tsv"]);
    ok(dir, &["--workers", workers, "score", "-i", "brk.tsv", "-o", "scored.tsv", "--fraction", "0.25",
        "--scorer", "mock", "--summary", "summary.tsv"]);
    ok(dir, &["filter-docs", "-i", "scored.tsv", "-o", "medium.tsv", "--level", "medium"]);
    ok(dir, &["--workers", workers, "contextgen", "-i", "medium.tsv", "-o", "train.tsv"]);
    ok(dir, &["contextgen", "-i", "medium.tsv", "-o", "eval.tsv", "--mode", "eval", "--separator", "<sep>"]);
    ok(dir, &["stats", "--scored", "scored.tsv", "--annotated", "rec.tsv", "-o", "stats.tsv"]);
    ok(dir, &["analyze", "--scored", "scored.tsv", "--phenomena", "phenomena.tsv", "-o", "quartiles.tsv"]);
}

#[test]
fn fixture_corpus_matches_independent_oracle() {
    let dir = workdir();
    let d = dir.path();
    pipeline(d, "2");
    assert_eq!(read(d.join("brk.tsv")), read(fixtures().join("expected_break.tsv")));
    assert_eq!(read(d.join("scored.tsv.kept")), read(fixtures().join("golden_kept_25.txt")));
}

#[test]
fn stage_outputs_line_up() {
    let dir = workdir();
    let d = dir.path();
    pipeline(d, "0");
    let scored = read(d.join("scored.tsv"));
    assert!(scored.lines().all(|l| l.split('\t').count() == 20));
    let medium = read(d.join("medium.tsv"));
    assert!(medium.lines().all(|l| l.split('\t').count() == 19));
    assert_eq!(
        medium.lines().count(),
        scored.lines().filter(|l| l.ends_with("medium50") || l.contains("medium50,")).count()
    );
    // every medium segment appears in exactly one training sample
    let train = read(d.join("train.tsv"));
    let seps: usize = train.lines().map(|l| l.split('\t').next().unwrap().matches(" <eos> ").count()).sum();
    assert_eq!(seps + train.lines().count(), medium.lines().count());
    let ranges = read(d.join("train.tsv.ranges"));
    assert_eq!(ranges.lines().count(), train.lines().count());
    let eval = read(d.join("eval.tsv"));
    assert_eq!(eval.lines().count(), medium.lines().count());
    assert!(eval.contains(" <sep> "));
    let stats = read(d.join("stats.tsv"));
    assert!(stats.lines().count() >= 6, "{stats}");
    let manifest: serde_json::Value = serde_json::from_str(&read(d.join("scored.tsv.manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "score");
    assert_eq!(manifest["counts"]["kept"], 26);
    assert_eq!(manifest["inputs"][0]["path"], "brk.tsv");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (workdir(), workdir());
    pipeline(a.path(), "1");
    pipeline(b.path(), "4");
    let mut compared = 0;
    for e in fs::read_dir(a.path()).unwrap() {
        let name = e.unwrap().file_name();
        let (x, y) = (a.path().join(&name), b.path().join(&name));
        if x.is_file() && !name.to_string_lossy().ends_with("manifest.json") {
            assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{name:?} differs");
            compared += 1;
        }
    }
    assert!(compared > 15);
    // manifests record the worker count, otherwise they match too
    let strip = |p: PathBuf| {
        let mut v: serde_json::Value = serde_json::from_str(&read(p)).unwrap();
        v["config"]["workers"] = serde_json::Value::Null;
        v["args"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(a.path().join("brk.tsv.manifest.json")), strip(b.path().join("brk.tsv.manifest.json")));
}

#[test]
fn break_on_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.tsv"), "").unwrap();
    ok(dir.path(), &["break", "-i", "empty.tsv", "-o", "out.tsv"]);
    assert_eq!(read(dir.path().join("out.tsv")), "");
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("out.tsv.manifest.json"))).unwrap();
    assert_eq!(m["outputs"][0]["records"], 0);
    assert_eq!(m["counts"]["subdocs"], 0);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = docmend(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(docmend(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(docmend(dir.path(), &["break", "-i", "x.tsv"]).status.code(), Some(1));
    assert_eq!(docmend(dir.path(), &["break", "-i", "x", "-o", "y", "--min-len", "1"]).status.code(), Some(1));
    fs::write(dir.path().join("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(docmend(dir.path(), &["--config", "bad.toml", "break", "-i", "x", "-o", "y"]).status.code(), Some(1));
    let help = docmend(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("reconstruct"));
}

#[test]
fn input_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(docmend(d, &["break", "-i", "missing.tsv", "-o", "out.tsv"]).status.code(), Some(2));
    let good = read(fixtures().join("expected_break.tsv"));
    let mut lines: Vec<&str> = good.lines().take(3).collect();
    lines.push("other\tdoc\t0\tonly five\tcolumns");
    fs::write(d.join("bad.tsv"), lines.join("\n") + "\n").unwrap();
    let out = docmend(d, &["break", "-i", "bad.tsv", "-o", "out.tsv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(!d.join("out.tsv").exists());
}

fn dead_endpoint() -> String {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    format!("http://127.0.0.1:{port}")
}

#[test]
fn unreachable_scorer_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixtures().join("expected_break.tsv"), dir.path().join("brk.tsv")).unwrap();
    let endpoint = dead_endpoint();
    let out = docmend(dir.path(), &["score", "-i", "brk.tsv", "-o", "s.tsv", "--scorer", &endpoint]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("s.tsv").exists());

    let via_env = Command::new(env!("CARGO_BIN_EXE_docmend"))
        .args(["score", "-i", "brk.tsv", "-o", "s.tsv"])
        .current_dir(dir.path())
        .env("DOCMEND_SCORER_ENDPOINT", &endpoint)
        .output()
        .unwrap();
    assert_eq!(via_env.status.code(), Some(3));
}

#[test]
fn config_file_values_and_flag_precedence() {
    let dir = workdir();
    let d = dir.path();
    ok(d, &["reconstruct", "--bitext", "bitext.tsv", "--src-mono", "mono_de", "--tgt-mono", "mono_en.tsv",
        "--lid-table", "lid_en.tsv", "-o", "rec.tsv"]);
    fs::write(d.join("cfg.toml"), "[break]\nmin_subdoc_len = 4\n").unwrap();
    ok(d, &["--config", "cfg.toml", "break", "-i", "rec.tsv", "-o", "a.tsv"]);
    ok(d, &["--config", "cfg.toml", "break", "-i", "rec.tsv", "-o", "b.tsv", "--min-len", "2"]);
    let count = |f: &str| {
        let mut sizes = std::collections::HashMap::new();
        for l in read(d.join(f)).lines() {
            *sizes.entry(l.split('\t').nth(17).unwrap().to_string()).or_insert(0usize) += 1;
        }
        sizes
    };
    assert!(count("a.tsv").values().all(|n| *n >= 4));
    assert!(count("b.tsv").values().any(|n| *n < 4));
    assert_eq!(read(d.join("b.tsv")), read(fixtures().join("expected_break.tsv")));
}

#[test]
fn sentence_filter_reports_reasons() {
    let dir = workdir();
    let d = dir.path();
    ok(d, &["filter-sents", "-i", "sents.tsv", "-o", "kept.tsv", "--charsets", "charsets"]);
    assert_eq!(read(d.join("kept.tsv")), "Das Haus ist groß.\tThe house is big.\nDer Garten ist grün.\tThe garden is green.\n");
    let reasons: Vec<String> = read(d.join("kept.tsv.rejects"))
        .lines()
        .map(|l| l.rsplit('\t').next().unwrap().to_string())
        .collect();
    assert_eq!(reasons, ["empty", "punct", "ratio", "duplicate", "charset"]);
    let m: serde_json::Value = serde_json::from_str(&read(d.join("kept.tsv.manifest.json"))).unwrap();
    assert_eq!(m["counts"]["input"], 7);
    assert_eq!(m["counts"]["kept"], 2);
    // without charsets the filter cannot run
    assert_eq!(docmend(d, &["filter-sents", "-i", "sents.tsv", "-o", "x.tsv"]).status.code(), Some(1));
}

#[test]
fn contextgen_mixing() {
    let dir = workdir();
    let d = dir.path();
    fs::copy(fixtures().join("expected_break.tsv"), d.join("brk.tsv")).unwrap();
    ok(d, &["--seed", "5", "contextgen", "-i", "brk.tsv", "-o", "mix.tsv", "--mix-with", "sents.tsv", "--ratio", "2:1"]);
    ok(d, &["contextgen", "-i", "brk.tsv", "-o", "plain.tsv"]);
    let mix = read(d.join("mix.tsv"));
    let plain = read(d.join("plain.tsv"));
    assert_eq!(mix.lines().count(), plain.lines().count() + 7);
    let first: Vec<&str> = mix.lines().take(3).collect();
    let p: Vec<&str> = plain.lines().take(2).collect();
    assert_eq!(&first[..2], &p[..]);
    assert_eq!(first[2], "Das Haus ist groß.\tThe house is big.");
    let ranges = read(d.join("mix.tsv.ranges"));
    assert!(ranges.lines().nth(2).unwrap().starts_with("-\t"));
}
