use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sono(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sono")).args(args).output().expect("binary runs")
}

fn small_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("colour,shape,size\n");
    for i in 0..60 {
        let colour = ["red", "blue"][i % 2];
        let shape = ["round", "square", "flat"][i % 3];
        text.push_str(&format!("{colour},{shape},big\n"));
    }
    text.push_str("blue,flat,small\nred,round,small\n");
    let path = dir.join("small.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn lymphography() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/lymphography.csv")
}

fn read_scores(path: &Path) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect()
}

#[test]
fn score_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let out = dir.path().join("out");
    let o = sono(&["score", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv,json,svg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_scores(&out.join("scores.csv")).len(), 62);
    let contrib = std::fs::read_to_string(out.join("contributions.csv")).unwrap();
    assert!(contrib.starts_with("row,colour,shape,size\n"));
    assert_eq!(contrib.lines().count(), 63);
    let svg = std::fs::read_to_string(out.join("score_vs_depth.svg")).unwrap();
    assert_eq!(svg.matches("<svg").count(), 1);
    assert!(svg.contains(">Depth<") && svg.contains(">Score<"));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["n"], 62);
    assert!(run["counters"]["subsets_visited"].as_u64().unwrap() > 0);
    assert!(run["maxlen"].as_u64().unwrap() >= 1);
}

#[test]
fn run_json_reproduces_scores_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = sono(&["score", "--input", input.to_str().unwrap(), "--out", a.to_str().unwrap(), "--r", "1.5", "--alpha", "0.1"]);
    assert!(o.status.success());
    let run = a.join("run.json");
    let o = sono(&["score", "--config", run.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(a.join("scores.csv")).unwrap(), std::fs::read(b.join("scores.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("contributions.csv")).unwrap(),
        std::fs::read(b.join("contributions.csv")).unwrap()
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"alpha": 0.1, "mode": "frequent", "r": 1.0}"#).unwrap();
    let out = dir.path().join("out");
    let o = sono(&[
        "score", "--config", cfg.to_str().unwrap(), "--input", input.to_str().unwrap(),
        "--alpha", "0.2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["alpha"], 0.2);
    assert_eq!(run["config"]["mode"], "frequent");
    assert_eq!(run["config"]["r"], 1.0);
}

#[test]
fn exit_codes_name_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let input = input.to_str().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let missing = sono(&["score", "--input", "/nonexistent/x.csv", "--out", out]);
    assert_eq!(missing.status.code(), Some(3));

    let bad = sono(&["score", "--input", input, "--alpha", "0.9", "--out", out]);
    assert_eq!(bad.status.code(), Some(2));

    let cfg = dir.path().join("cap.json");
    std::fs::write(&cfg, r#"{"cell_cap": 2}"#).unwrap();
    let capped = sono(&["score", "--config", cfg.to_str().unwrap(), "--input", input, "--out", out]);
    assert_eq!(capped.status.code(), Some(4), "{}", String::from_utf8_lossy(&capped.stderr));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let unwritable = sono(&["score", "--input", input, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(unwritable.status.code(), Some(5));
}

#[test]
fn probability_file_overrides_and_empty_file_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_csv(dir.path());
    let probs = dir.path().join("p.json");
    let base = dir.path().join("base");
    let empty_out = dir.path().join("empty");
    let given = dir.path().join("given");
    let i = input.to_str().unwrap();
    assert!(sono(&["score", "--input", i, "--out", base.to_str().unwrap()]).status.success());

    std::fs::write(&probs, "").unwrap();
    let o = sono(&["score", "--input", i, "--probs", probs.to_str().unwrap(), "--out", empty_out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("empirical"));
    assert_eq!(read_scores(&base.join("scores.csv")), read_scores(&empty_out.join("scores.csv")));

    std::fs::write(&probs, r#"{"size": [{"big": 0.5}, {"small": 0.5}]}"#).unwrap();
    let o = sono(&["score", "--input", i, "--probs", probs.to_str().unwrap(), "--out", given.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(given.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["model"], "user-supplied");
}

#[test]
fn verify_passes_and_catches_injected_errors() {
    let ok = sono(&["verify", "--suite", "walker,coverage", "--datasets", "10"]);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(ok.status.success(), "{text}");
    assert!(text.contains("PASS walker"));

    let bad = sono(&["verify", "--suite", "walker", "--datasets", "4", "--inject-score-offset", "1e-6"]);
    assert_eq!(bad.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL walker"));

    let props = sono(&["verify", "--suite", "propositions", "--p-max", "9"]);
    assert!(props.status.success());
}

#[test]
fn prepare_applies_the_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("lymphography.data");
    let mut text = String::new();
    for i in 0..5 {
        let fields: Vec<String> = (0..19).map(|j| ((i + j) % 3 + 1).to_string()).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    std::fs::write(&raw, text).unwrap();
    let out = dir.path().join("lymph.csv");
    let o = sono(&["prepare", "lymphography", "--raw", raw.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let clean = std::fs::read_to_string(&out).unwrap();
    assert!(clean.starts_with("lymphatics,"));
    assert_eq!(clean.lines().count(), 6);
    // The shape differs from the published one: warned, not fatal.
    assert!(String::from_utf8_lossy(&o.stderr).contains("148"));

    let unknown = sono(&["prepare", "iris", "--raw", raw.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn lymphography_has_twelve_zero_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = sono(&["score", "--input", lymphography().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scores = read_scores(&out.join("scores.csv"));
    assert_eq!(scores.len(), 148);
    assert_eq!(scores.iter().filter(|&&s| s == 0.0).count(), 12);
}
