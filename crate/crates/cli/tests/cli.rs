use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdrm-lab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn asset(rel: &str) -> String {
    assets().join(rel).display().to_string()
}

#[test]
fn validate_accepts_shipped_machines() {
    for m in ["machines/maze.pdrm", "machines/paintworld.pdrm", "machines/letterenv.cra"] {
        let o = lab(&["validate", &asset(m)]);
        assert!(o.status.success(), "{m}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).starts_with("ok"));
    }
}

#[test]
fn validate_rejects_nondeterminism() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.pdrm");
    std::fs::write(
        &p,
        "pdrm bad\nprops: a\nstates: u\ninitial: u\nfinal:\nstack: Z\nbottom: Z\n\
         T u | a | eps | eps | 0 | u\nT u | a | Z | Z | 1 | u\n",
    )
    .unwrap();
    let o = lab(&["validate", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn translated_letterenv_machine_is_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.pdrm");
    let cra = asset("machines/letterenv.cra");
    let o = lab(&["translate-cra", &cra, "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let o = lab(&["check-equiv", &cra, out.to_str().unwrap(), "--words", "300"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("300 of 300 words equal"));
}

#[test]
fn check_topk_exit_code_follows_verdict() {
    let cfg = asset("experiments/paintworld.exp");
    let o = lab(&["check-topk", &cfg, "--k", "5", "--horizon", "5"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("k = 5: sufficient"));
    let o = lab(&["check-topk", &cfg, "--k", "2", "--horizon", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("insufficient"));
}

#[test]
fn count_prints_closed_forms() {
    let o = lab(&["count", "--symbols", "1", "--k", "7"]);
    assert!(stdout(&o).contains(": 8"));
    let o = lab(&["count", "--symbols", "3", "--k", "2"]);
    assert!(stdout(&o).contains(": 13"));
}

#[test]
fn train_eval_and_plot_data_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::copy(assets().join("machines/paintworld.pdrm"), d.join("paint.pdrm")).unwrap();
    std::fs::write(
        d.join("p.exp"),
        "name = \"p\"\noutput = \"out\"\nseeds = [0, 1]\n[env]\nkind = \"paintworld\"\n\
         [machines]\npdrm = \"paint.pdrm\"\n[hyperparams]\nepisodes = 60\neval_every = 20\n\
         [[agent]]\nname = \"k1\"\nalgorithm = \"q_learning\"\nabstraction = \"top-1\"\n\
         [[agent]]\nname = \"k5\"\nalgorithm = \"q_learning\"\nabstraction = \"top-5\"\n",
    )
    .unwrap();
    let cfg = d.join("p.exp");
    let cfg = cfg.to_str().unwrap();
    let first = Command::new(env!("CARGO_BIN_EXE_pdrm-lab"))
        .args(["train", cfg])
        .env("PDRM_LAB_WORKERS", "2")
        .output()
        .unwrap();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stdout(&first).lines().count(), 4);
    let again = lab(&["train", cfg]);
    assert!(stdout(&again).lines().all(|l| l.ends_with("(resumed)")));

    let o = lab(&["plot-data", d.join("out").to_str().unwrap()]);
    assert!(o.status.success());
    let tsv = std::fs::read_to_string(d.join("out/plot/p.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 2 * 4);
    assert!(d.join("out/plot/p.json").exists());

    let o = lab(&["eval", cfg, "--agent", "k5", "--seed", "0", "--episodes", "20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("greedy over 20 episodes"));
    let o = lab(&["eval", cfg, "--agent", "nobody", "--seed", "0"]);
    assert!(!o.status.success());
}

#[test]
fn bad_worker_count_is_reported() {
    let o = Command::new(env!("CARGO_BIN_EXE_pdrm-lab"))
        .args(["train", &asset("experiments/paintworld.exp")])
        .env("PDRM_LAB_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("PDRM_LAB_WORKERS"));
}

#[test]
fn plot_data_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["plot-data", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
}
