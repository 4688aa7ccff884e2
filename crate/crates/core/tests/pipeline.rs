mod common;

use std::path::Path;
use std::process::{Command, Output};

use collusion::features::{extract_pairs, PairContext};
use collusion::ingest::{filter_active_players, load_dir};
use collusion::simulate::{generate, write_dataset, SimConfig};
use common::{brute_force_pairs, diff_features, random_fixture};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extraction_matches_brute_force(seed in any::<u64>(), min_player in 1usize..4, min_shared in 1usize..4) {
        let d = random_fixture(seed, 20, 25);
        let active = filter_active_players(&d, min_player);
        for ctx in [PairContext::Opponent, PairContext::Teammate] {
            let got = extract_pairs(&active, min_shared, ctx);
            let want = brute_force_pairs(&d, min_player, min_shared, ctx);
            prop_assert!(diff_features(&got, &want).is_none(), "{:?}", diff_features(&got, &want));
        }
    }
}

#[test]
fn simulated_dataset_survives_disk_round_trip() {
    let (d, gt) = generate(&SimConfig {
        num_players: 500,
        num_matches: 150,
        colluder_pairs: 4,
        seed: 9,
        ..SimConfig::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&d, &gt, dir.path()).unwrap();
    let loaded = load_dir(dir.path()).unwrap();
    assert_eq!(loaded.report.matches_rejected, 0);
    assert_eq!(loaded.dataset, d);
    let truth =
        collusion::simulate::read_ground_truth(&dir.path().join("ground_truth.csv")).unwrap();
    assert_eq!(truth, gt);
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn detect_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["detect", "--data", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty dataset"));

    let out = cli(&["--json", "detect", "--data", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "empty_dataset");
}

#[test]
fn unknown_flag_exits_nonzero() {
    assert_ne!(
        cli(&["stats", "--data", ".", "--nope"]).status.code(),
        Some(0)
    );
}

fn run_pipeline(dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let data = dir.join("data");
    let report = dir.join("report.csv");
    let ok = |o: Output| {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(cli(&[
        "simulate",
        "--players",
        "600",
        "--matches",
        "300",
        "--colluders",
        "4",
        "--strength",
        "1",
        "--seed",
        "7",
        "--out",
        path(&data),
    ]));
    ok(cli(&[
        "detect",
        "--data",
        path(&data),
        "--mode",
        "top_k",
        "--k",
        "20",
        "--seed",
        "3",
        "--out",
        path(&report),
    ]));
    let eval = ok(cli(&[
        "--json",
        "evaluate",
        "--report",
        path(&report),
        "--truth",
        path(&data.join("ground_truth.csv")),
        "--k",
        "20",
    ]));
    (std::fs::read(&report).unwrap(), eval.stdout)
}

#[test]
fn cli_pipeline_is_deterministic_and_finds_strong_pairs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(a.path());
    assert_eq!(first, run_pipeline(b.path()));
    let eval: serde_json::Value = serde_json::from_slice(&first.1).unwrap();
    assert!(eval["recall_at_k"].as_f64().unwrap() >= 0.9, "{eval}");
}

#[test]
fn other_subcommands_produce_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert!(cli(&[
        "simulate",
        "--players",
        "300",
        "--matches",
        "120",
        "--colluders",
        "2",
        "--out",
        path(&data)
    ])
    .status
    .success());

    let stats = cli(&["--json", "stats", "--data", path(&data)]);
    let s: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(s["matches"], 120);
    assert!(s["teammates"]["avg_distance"].as_f64() < s["opponents"]["avg_distance"].as_f64());

    let ingest = cli(&["--json", "ingest", "--data", path(&data)]);
    let r: serde_json::Value = serde_json::from_slice(&ingest.stdout).unwrap();
    assert_eq!(r["matches_accepted"], 120);

    let features = cli(&["features", "--data", path(&data), "--min-shared", "2"]);
    let text = String::from_utf8(features.stdout).unwrap();
    assert!(
        text.starts_with("pair_a,pair_b,n_opp,n_team,streak,avg_dist,avg_rank_diff,acquaintance\n")
    );

    let g = dir.path().join("g.json");
    assert!(cli(&["graph", "--data", path(&data), "--out", path(&g)])
        .status
        .success());
    let graph = collusion::graph::import_json(&std::fs::read(&g).unwrap()).unwrap();
    assert_eq!(graph.nodes().len(), 300);
    let dot = cli(&["graph", "--data", path(&data), "--format", "dot"]);
    assert!(String::from_utf8(dot.stdout)
        .unwrap()
        .starts_with("graph social {"));

    let model = dir.path().join("model.json");
    let out = cli(&[
        "detect",
        "--data",
        path(&data),
        "--min-shared",
        "2",
        "--mode",
        "contamination",
        "--contamination",
        "0.05",
        "--model",
        path(&model),
        "--format",
        "jsonl",
    ]);
    assert!(out.status.success());
    assert!(collusion::iforest::ForestModel::deserialize(&std::fs::read(&model).unwrap()).is_ok());
    let first: serde_json::Value = serde_json::from_str(
        String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(first["rank"], 1);
}

#[test]
fn report_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    assert!(cli(&[
        "simulate",
        "--players",
        "600",
        "--matches",
        "300",
        "--out",
        path(&data)
    ])
    .status
    .success());
    let detect = |threads: &str| {
        let out = cli(&[
            "--threads",
            threads,
            "detect",
            "--data",
            path(&data),
            "--min-shared",
            "3",
        ]);
        assert!(out.status.success());
        out.stdout
    };
    let one = detect("1");
    assert!(!one.is_empty());
    assert_eq!(one, detect("4"));
}
