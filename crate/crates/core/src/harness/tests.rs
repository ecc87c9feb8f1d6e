use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;
use crate::learn::{CurvePoint, EvalStats, Hyperparams, LearningCurve, TrainStats};

fn experiments_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/experiments")
}

fn shipped(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_file(&experiments_dir().join(name)).unwrap()
}

const CHAIN_MACHINE: &str = "pdrm pay
props: goal
states: u
initial: u
final: end
stack: Z
bottom: Z
T u | goal | eps | eps | 1 | end
";

/// Writes a small chain experiment into `dir` and parses it.
fn chain_experiment(dir: &Path, agents: &[&str], seeds: &[u64]) -> ExperimentConfig {
    std::fs::write(dir.join("pay.pdrm"), CHAIN_MACHINE).unwrap();
    let mut text = format!(
        "name = \"chain\"\noutput = \"out\"\nseeds = {seeds:?}\n\n[env]\nkind = \"chain\"\nlength = 3\nhorizon = 10\n\n\
         [machines]\npdrm = \"pay.pdrm\"\n\n[hyperparams]\nepisodes = 40\neval_every = 10\neval_episodes = 3\n"
    );
    for a in agents {
        text.push_str(&format!("\n[[agent]]\nname = \"{a}\"\nalgorithm = \"q_learning\"\nabstraction = \"top-1\"\n"));
    }
    let path = dir.join("chain.exp");
    std::fs::write(&path, &text).unwrap();
    ExperimentConfig::from_file(&path).unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn all_shipped_configs_parse() {
    let mut n = 0;
    for e in std::fs::read_dir(experiments_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "exp") {
            let cfg = ExperimentConfig::from_file(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert!(!cfg.seeds.is_empty());
            assert_eq!(cfg.hash.len(), 64);
            n += 1;
        }
    }
    assert_eq!(n, 10);
}

#[test]
fn letterenv_has_four_agents() {
    let cfg = shipped("letterenv.exp");
    let monitors: Vec<MonitorKind> = cfg.agents.iter().map(|a| a.monitor).collect();
    assert_eq!(
        monitors,
        [MonitorKind::Pdrm, MonitorKind::Pdrm, MonitorKind::Cra, MonitorKind::TranslatedCra]
    );
    assert!(cfg.translated.is_some());
    assert_eq!(cfg.agents[0].hyperparams.episodes, 5000);
    assert_eq!(cfg.agents[0].hyperparams.alpha, 0.1);
}

#[test]
fn agent_overrides_merge_onto_defaults() {
    let cfg = shipped("maze10.exp");
    let hp = &cfg.agents[1].hyperparams;
    assert_eq!(hp.epsilon_start, 0.1);
    assert_eq!(hp.episodes, 30000);
    assert_eq!(hp.gamma, Hyperparams::default().gamma);
}

#[test]
fn hash_ignores_output_but_tracks_assets() {
    let a = tempfile::tempdir().unwrap();
    let cfg = chain_experiment(a.path(), &["x"], &[0]);
    let text = std::fs::read_to_string(a.path().join("chain.exp")).unwrap();
    let moved = ExperimentConfig::from_text(&text.replace("\"out\"", "\"elsewhere\""), &a.path().join("chain.exp")).unwrap();
    assert_eq!(cfg.hash, moved.hash);
    std::fs::write(a.path().join("pay.pdrm"), CHAIN_MACHINE.replace("| 1 |", "| 2 |")).unwrap();
    let changed = ExperimentConfig::from_file(&a.path().join("chain.exp")).unwrap();
    assert_ne!(cfg.hash, changed.hash);
}

#[test]
fn nondeterministic_machine_is_an_asset_error() {
    let dir = tempfile::tempdir().unwrap();
    chain_experiment(dir.path(), &["x"], &[0]);
    let bad = format!("{CHAIN_MACHINE}T u | goal | eps | eps | 0 | u\n");
    std::fs::write(dir.path().join("pay.pdrm"), bad).unwrap();
    match ExperimentConfig::from_file(&dir.path().join("chain.exp")) {
        Err(HarnessError::Asset { asset, message }) => {
            assert!(asset.ends_with("pay.pdrm"));
            assert!(message.to_lowercase().contains("nondetermin"), "{message}");
        }
        other => panic!("expected asset error, got {other:?}"),
    }
}

#[test]
fn duplicate_agent_names_are_a_parse_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    chain_experiment(dir.path(), &["x"], &[0]);
    let path = dir.path().join("chain.exp");
    let text = std::fs::read_to_string(&path).unwrap();
    let dup = format!("{text}\n[[agent]]\nname = \"x\"\nalgorithm = \"q_learning\"\n");
    let second_line = dup.lines().count() - 1;
    match ExperimentConfig::from_text(&dup, &path) {
        Err(HarnessError::Parse { line, column, message, .. }) => {
            assert!(message.contains("duplicate"));
            assert_eq!(line, second_line);
            assert_eq!(column, 8);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn syntax_and_schema_errors_carry_positions() {
    let path = Path::new("x.exp");
    let Err(HarnessError::Parse { line, .. }) = ExperimentConfig::from_text("name = \"a\"\nseeds = [0,\n", path) else {
        panic!()
    };
    assert!(line >= 2);
    let text = "name = \"a\"\noutput = \"o\"\nseeds = []\n[env]\nkind = \"paintworld\"\n[[agent]]\nname = \"a\"\nalgorithm = \"q_learning\"\n";
    let Err(HarnessError::Parse { line, message, .. }) = ExperimentConfig::from_text(text, path) else {
        panic!()
    };
    assert_eq!(line, 3);
    assert!(message.contains("seeds"));
    let bad_abs = text.replace("[]", "[0]").replace("q_learning\"", "q_learning\"\nabstraction = \"top\"");
    assert!(matches!(
        ExperimentConfig::from_text(&bad_abs, path),
        Err(HarnessError::Parse { line: 9, .. })
    ));
    let missing_machine = text.replace("[]", "[0]");
    assert!(matches!(
        ExperimentConfig::from_text(&missing_machine, path),
        Err(HarnessError::Parse { .. })
    ));
}

#[test]
fn missing_map_is_an_asset_error() {
    let text = "name = \"a\"\noutput = \"o\"\nseeds = [0]\n[env]\nkind = \"maze\"\nmap = \"nope.map\"\nhorizon = 5\n\
                [machines]\npdrm = \"../machines/maze.pdrm\"\n[[agent]]\nname = \"a\"\nalgorithm = \"q_learning\"\n";
    let r = ExperimentConfig::from_text(text, &experiments_dir().join("x.exp"));
    assert!(matches!(r, Err(HarnessError::Asset { ref asset, .. }) if asset.ends_with("nope.map")), "{r:?}");
}

#[test]
fn run_writes_artifacts_and_resume_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_experiment(dir.path(), &["a", "b"], &[0, 1]);
    let opts = RunOptions {
        workers: Some(2),
        ..RunOptions::default()
    };
    let first = run_experiment(&cfg, &opts).unwrap();
    assert_eq!(first.runs.len(), 4);
    assert_eq!(first.failures().count(), 0);
    assert_eq!(first.aggregated, ["a", "b"]);
    let out = dir.path().join("out");
    assert!(out.join("runs/a/seed-1.csv").exists());
    assert!(out.join("aggregate/b.csv").exists());
    let before = tree(&out);

    let calls = AtomicUsize::new(0);
    let again = run_experiment_with(&cfg, &opts, &|c: &ExperimentConfig, a: &AgentSpec, hp: &Hyperparams| {
        calls.fetch_add(1, Ordering::SeqCst);
        train_agent(c, a, hp)
    })
    .unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 0);
    assert!(again.runs.iter().all(|r| r.resumed));
    assert_eq!(tree(&out), before);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = chain_experiment(d.path(), &["x"], &[3, 4]);
        run_experiment(&cfg, &RunOptions::default()).unwrap();
        emit_plot_data(&d.path().join("out")).unwrap();
    }
    let strip = |t: Vec<(PathBuf, Vec<u8>)>| -> Vec<(PathBuf, Vec<u8>)> {
        t.into_iter().filter(|(p, _)| p.extension().is_some_and(|x| x == "csv" || x == "tsv")).collect()
    };
    let ta = strip(tree(&a.path().join("out")));
    assert!(ta.len() >= 6);
    assert_eq!(ta, strip(tree(&b.path().join("out"))));
}

#[test]
fn hash_mismatch_aborts_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_experiment(dir.path(), &["x"], &[0]);
    run_experiment(&cfg, &RunOptions::default()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("chain.exp")).unwrap();
    std::fs::write(dir.path().join("chain.exp"), text.replace("episodes = 40", "episodes = 50")).unwrap();
    let changed = ExperimentConfig::from_file(&dir.path().join("chain.exp")).unwrap();
    assert!(matches!(
        run_experiment(&changed, &RunOptions::default()),
        Err(HarnessError::HashMismatch { .. })
    ));
}

#[test]
fn injected_fault_fails_only_that_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_experiment(dir.path(), &["a", "b"], &[0, 1, 2]);
    let faulty = |c: &ExperimentConfig, a: &AgentSpec, hp: &Hyperparams| {
        if a.name == "a" && hp.seed == 1 {
            panic!("injected fault");
        }
        train_agent(c, a, hp)
    };
    let summary = run_experiment_with(&cfg, &RunOptions::default(), &faulty).unwrap();
    let failed: Vec<_> = summary.failures().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!((failed[0].agent.as_str(), failed[0].seed), ("a", 1));
    assert!(failed[0].error.as_deref().unwrap().contains("injected fault"));
    assert_eq!(summary.aggregated, ["b"]);
    let out = dir.path().join("out");
    assert!(!out.join("aggregate/a.csv").exists());
    assert!(out.join("runs/a/seed-2.csv").exists());
    let meta = std::fs::read_to_string(out.join("metadata.json")).unwrap();
    assert!(meta.contains("injected fault"));

    // a clean rerun retries only the failed seed
    let calls = AtomicUsize::new(0);
    let fixed = run_experiment_with(&cfg, &RunOptions::default(), &|c: &ExperimentConfig, a: &AgentSpec, hp: &Hyperparams| {
        calls.fetch_add(1, Ordering::SeqCst);
        train_agent(c, a, hp)
    })
    .unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 1);
    assert_eq!(fixed.aggregated, ["a", "b"]);
}

#[test]
fn single_seed_plot_has_identical_percentile_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_experiment(dir.path(), &["solo"], &[0]);
    let one_return = |_: &ExperimentConfig, _: &AgentSpec, hp: &Hyperparams| {
        let points = hp
            .eval_points()
            .into_iter()
            .map(|episode| CurvePoint {
                episode,
                stats: EvalStats::from_returns(vec![episode as f64 / 40.0]),
            })
            .collect();
        Ok(RunOutput {
            curve: LearningCurve { points },
            stats: TrainStats::default(),
        })
    };
    run_experiment_with(&cfg, &RunOptions::default(), &one_return).unwrap();
    let tsv_path = emit_plot_data(&dir.path().join("out")).unwrap();
    let tsv = std::fs::read_to_string(&tsv_path).unwrap();
    let mut rows = tsv.lines();
    assert_eq!(rows.next(), Some("agent\tepisode\tmedian\tp25\tp75"));
    let rows: Vec<Vec<&str>> = rows.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r[0], "solo");
        assert_eq!(r[2], r[3]);
        assert_eq!(r[3], r[4]);
    }
    let manifest: PlotManifest =
        serde_json::from_str(&std::fs::read_to_string(tsv_path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(manifest.series.len(), 1);
    assert_eq!(manifest.series[0].n_seeds, 1);
    assert_eq!(manifest.data, "chain.tsv");
}

#[test]
fn plot_without_aggregates_is_missing_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_experiment(dir.path(), &["x"], &[0]);
    let always_fails = |_: &ExperimentConfig, _: &AgentSpec, _: &Hyperparams| Err("boom".to_string());
    let summary = run_experiment_with(&cfg, &RunOptions::default(), &always_fails).unwrap();
    assert!(summary.aggregated.is_empty());
    assert!(matches!(
        emit_plot_data(&dir.path().join("out")),
        Err(HarnessError::MissingAggregate(_))
    ));
}
