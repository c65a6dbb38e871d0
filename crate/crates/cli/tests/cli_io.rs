//! End-to-end checks of the command-line pipeline: artifact round trips,
//! exit codes per failure class, plot structure, and reproducibility.

mod common;

use std::fs;
use std::path::{Path, PathBuf};

use common::{demo_csv, demo_model, exit_code, run, run_ok};
use geoseg_core::graph::{write_edge_list, SpatialGraph};
use geoseg_core::io::{
    read_aggregation_json, read_dataset_csv, read_dataset_json, read_partition_json,
    read_predictions_csv, write_dataset_json, write_partition_json, write_predictions_csv,
    PartitionArtifact,
};
use geoseg_core::io::eta_of;
use geoseg_core::gp::PointPrediction;
use geoseg_core::miqp::{encode_solution, read_lp, to_lp_string};
use geoseg_core::solver::{partition_from_labels, solve_exact, SolverConfig};
use geoseg_core::graph::SpatialDataset;
use geoseg_core::PredictionVector;

/// Runs the small demo pipeline (predictions at the training points) into
/// `dir` and returns the artifact paths keyed by name.
fn demo_pipeline(dir: &Path) -> Vec<(String, PathBuf)> {
    let p = |name: &str| dir.join(name);
    run_ok(dir, &["ingest", "--input", demo_csv(), "--output", "dataset.json"]);
    run_ok(
        dir,
        &[
            "predict",
            "--data",
            "dataset.json",
            "--model",
            demo_model(),
            "--output",
            "preds.csv",
        ],
    );
    run_ok(
        dir,
        &[
            "graph",
            "--data",
            "dataset.json",
            "--knn",
            "4",
            "--mst",
            "--augment-knn",
            "2",
            "--output",
            "graph.txt",
        ],
    );
    run_ok(
        dir,
        &[
            "aggregate",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--l",
            "12",
            "--output",
            "agg.json",
        ],
    );
    run_ok(
        dir,
        &[
            "segment",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--aggregation",
            "agg.json",
            "--m",
            "3",
            "--output",
            "part.json",
        ],
    );
    run_ok(
        dir,
        &[
            "export-miqp",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--aggregation",
            "agg.json",
            "--m",
            "3",
            "--output",
            "model.lp",
        ],
    );
    run_ok(
        dir,
        &["plot", "--data", "dataset.json", "--partition", "part.json", "--output", "part.svg"],
    );
    run_ok(
        dir,
        &["plot", "--data", "dataset.json", "--predictions", "preds.csv", "--output", "eta.svg"],
    );
    [
        "dataset.json",
        "preds.csv",
        "graph.txt",
        "agg.json",
        "part.json",
        "model.lp",
        "part.svg",
        "eta.svg",
    ]
    .iter()
    .map(|name| (name.to_string(), p(name)))
    .collect()
}

#[test]
fn demo_pipeline_round_trips_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    demo_pipeline(dir.path());
    let read = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap();

    let data = read_dataset_json(&read("dataset.json")).unwrap();
    assert_eq!(data, read_dataset_csv(&fs::read_to_string(demo_csv()).unwrap()).unwrap());
    assert_eq!(write_dataset_json(&data), read("dataset.json"));

    let preds = read_predictions_csv(&read("preds.csv")).unwrap();
    assert_eq!(preds.len(), data.n());
    assert_eq!(write_predictions_csv(&preds), read("preds.csv"));
    let eta = eta_of(&preds).unwrap();

    let graph_text = read("graph.txt");
    let g = geoseg_core::graph::read_edge_list(&mut graph_text.as_bytes()).unwrap();
    assert_eq!(g.n(), data.n());
    assert!(g.is_connected());
    let mut rewritten = Vec::new();
    write_edge_list(&g, &mut rewritten).unwrap();
    assert_eq!(String::from_utf8(rewritten).unwrap(), graph_text);

    let agg = read_aggregation_json(&read("agg.json"), &g, &eta).unwrap();
    assert_eq!(agg.group_count(), 12);

    let artifact = read_partition_json(&read("part.json")).unwrap();
    assert_eq!(artifact.partition.m(), 3);
    assert_eq!(artifact.partition.labels().len(), data.n());
    assert!(artifact.telemetry.is_some());
    let bounds = artifact.bounds.expect("aggregated solve reports bounds");
    assert!(bounds.c1 <= bounds.c2 + 1e-9);
    assert!(bounds.error_ratio > 0.0);
    assert_eq!(write_partition_json(&read_partition_json(&read("part.json")).unwrap()), read("part.json"));

    let lp = read("model.lp");
    let model = read_lp(&lp).unwrap();
    assert_eq!(to_lp_string(&model).unwrap(), lp);
    assert!(model.has_flow());
    assert_eq!(model.meta().n, 12);

    let svg = read("part.svg");
    assert_eq!(svg.matches("<circle ").count(), data.n());
    assert_eq!(svg.matches("class=\"legend\"").count(), 3);
    let eta_svg = read("eta.svg");
    assert_eq!(eta_svg.matches("<circle ").count(), data.n());
    assert_eq!(eta_svg.matches("class=\"ramp\"").count(), 1);

    let summary = run_ok(dir.path(), &["report", "--partition", "part.json"]);
    assert!(summary.contains("partition: 3 clusters over 121 vertices"));
    assert!(summary.contains("bounds (tilde variant):"));
    assert!(summary.contains("nodes expanded"));
}

#[test]
fn rerunning_stages_reproduces_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    demo_pipeline(dir.path());
    let before = fs::read(dir.path().join("part.json")).unwrap();
    run_ok(
        dir.path(),
        &[
            "segment",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--aggregation",
            "agg.json",
            "--m",
            "3",
            "--output",
            "part.json",
        ],
    );
    assert_eq!(fs::read(dir.path().join("part.json")).unwrap(), before);

    let agg_before = fs::read(dir.path().join("agg.json")).unwrap();
    run_ok(
        dir.path(),
        &[
            "aggregate",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--l",
            "12",
            "--output",
            "agg.json",
        ],
    );
    assert_eq!(fs::read(dir.path().join("agg.json")).unwrap(), agg_before);
}

#[test]
fn golden_demo_svg_stays_fixed() {
    let dir = tempfile::tempdir().unwrap();
    demo_pipeline(dir.path());
    let produced = fs::read_to_string(dir.path().join("part.svg")).unwrap();
    let golden_path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/demo_partition.svg");
    if std::env::var_os("GOLDEN_REGEN").is_some() {
        fs::create_dir_all(Path::new(golden_path).parent().unwrap()).unwrap();
        fs::write(golden_path, &produced).unwrap();
    }
    let golden = fs::read_to_string(golden_path).expect("golden file present");
    assert_eq!(produced, golden, "partition SVG drifted from the audited output");
}

#[test]
fn plot_counts_points_and_legend_entries() {
    let dir = tempfile::tempdir().unwrap();
    let data =
        SpatialDataset::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0], None).unwrap();
    fs::write(dir.path().join("four.json"), write_dataset_json(&data)).unwrap();
    let partition =
        partition_from_labels(&[0, 0, 1, 1], &[1.0, 1.5, 6.0, 7.0], 2).unwrap();
    let artifact = PartitionArtifact {
        partition,
        telemetry: None,
        bounds: None,
        mahalanobis: None,
    };
    fs::write(dir.path().join("two.json"), write_partition_json(&artifact)).unwrap();
    run_ok(
        dir.path(),
        &["plot", "--data", "four.json", "--partition", "two.json", "--output", "out.svg"],
    );
    let svg = fs::read_to_string(dir.path().join("out.svg")).unwrap();
    assert_eq!(svg.matches("<circle ").count(), 4);
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);
}

#[test]
fn usage_errors_exit_one_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    demo_pipeline(dir.path());

    // More clusters than aggregation groups.
    let out = run(
        dir.path(),
        &[
            "segment",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--aggregation",
            "agg.json",
            "--m",
            "13",
            "--output",
            "never.json",
        ],
    );
    assert_eq!(exit_code(&out), 1);
    assert!(!dir.path().join("never.json").exists());

    // Greedy aggregation without a group count.
    let out = run(
        dir.path(),
        &["aggregate", "--graph", "graph.txt", "--predictions", "preds.csv", "--output", "x.json"],
    );
    assert_eq!(exit_code(&out), 1);

    // Mixing scheme-specific flags.
    let out = run(
        dir.path(),
        &[
            "aggregate",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--scheme",
            "hyperrect",
            "--l",
            "5",
            "--data",
            "dataset.json",
            "--cell-sides",
            "2,2",
            "--output",
            "x.json",
        ],
    );
    assert_eq!(exit_code(&out), 1);

    // Missing model source entirely (argument-group violation).
    let out = run(dir.path(), &["predict", "--data", "dataset.json", "--output", "p.csv"]);
    assert_eq!(exit_code(&out), 1);

    // Both coloring sources at once.
    let out = run(
        dir.path(),
        &[
            "plot",
            "--data",
            "dataset.json",
            "--partition",
            "part.json",
            "--predictions",
            "preds.csv",
            "--output",
            "x.svg",
        ],
    );
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "nope,x1\n1,2\n").unwrap();
    let out = run(dir.path(), &["ingest", "--input", "bad.csv", "--output", "d.json"]);
    assert_eq!(exit_code(&out), 2);

    let out = run(dir.path(), &["report", "--partition", "missing.json"]);
    assert_eq!(exit_code(&out), 2);

    demo_pipeline(dir.path());
    let tampered = fs::read_to_string(dir.path().join("part.json"))
        .unwrap()
        .replace("\"canonical\": true", "\"canonical\": false");
    fs::write(dir.path().join("part.json"), tampered).unwrap();
    let out = run(dir.path(), &["report", "--partition", "part.json"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("canonical"));
}

#[test]
fn budget_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    demo_pipeline(dir.path());
    let out = run(
        dir.path(),
        &[
            "segment",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--aggregation",
            "agg.json",
            "--m",
            "3",
            "--node-budget",
            "1",
            "--output",
            "never.json",
        ],
    );
    assert_eq!(exit_code(&out), 4);
}

/// Path graph on 6 vertices with hand-picked predictions, written with the
/// library's own writers so the files match what the pipeline would emit.
fn write_tiny_instance(dir: &Path) -> (SpatialGraph, PredictionVector) {
    let g = SpatialGraph::new(
        6,
        (0..5).map(|i| (i, i + 1, 1.0)).collect(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_edge_list(&g, &mut buf).unwrap();
    fs::write(dir.join("tiny_graph.txt"), buf).unwrap();
    let values = [0.0, 0.5, 4.0, 4.5, 9.0, 9.5];
    let preds: Vec<PointPrediction> = values
        .iter()
        .map(|&eta| PointPrediction { mu: eta, sigma2: 0.25, eta })
        .collect();
    fs::write(dir.join("tiny_preds.csv"), write_predictions_csv(&preds)).unwrap();
    (g, PredictionVector::new(values.to_vec()).unwrap())
}

#[test]
fn check_solution_accepts_the_optimum_and_rejects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let (g, eta) = write_tiny_instance(dir.path());
    run_ok(
        dir.path(),
        &[
            "export-miqp",
            "--graph",
            "tiny_graph.txt",
            "--predictions",
            "tiny_preds.csv",
            "--m",
            "3",
            "--output",
            "tiny.lp",
        ],
    );
    let model = read_lp(&fs::read_to_string(dir.path().join("tiny.lp")).unwrap()).unwrap();
    let (best, _) = solve_exact(&g, &eta, &SolverConfig::new(3)).unwrap();
    let solution = encode_solution(&model, &best).unwrap();
    fs::write(dir.path().join("sol.txt"), &solution).unwrap();

    let stdout = run_ok(
        dir.path(),
        &["check-solution", "--model", "tiny.lp", "--solution", "sol.txt"],
    );
    assert!(stdout.contains("solution accepted"));
    assert!(stdout.contains("decoded labels: [1, 1, 2, 2, 3, 3]"));

    // Flip one assignment bit: the checker must call out the violation.
    let corrupted =
        solution.replace("w0_0 1.0000000000000000e0", "w0_0 0.0000000000000000e0");
    assert_ne!(corrupted, solution);
    fs::write(dir.path().join("bad.txt"), corrupted).unwrap();
    let out = run(
        dir.path(),
        &["check-solution", "--model", "tiny.lp", "--solution", "bad.txt"],
    );
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("issue:"));
}

#[test]
fn use_hat_switches_only_the_reported_bounds() {
    let dir = tempfile::tempdir().unwrap();
    demo_pipeline(dir.path());
    run_ok(
        dir.path(),
        &[
            "segment",
            "--graph",
            "graph.txt",
            "--predictions",
            "preds.csv",
            "--aggregation",
            "agg.json",
            "--m",
            "3",
            "--use-hat",
            "--output",
            "part_hat.json",
        ],
    );
    let tilde = read_partition_json(
        &fs::read_to_string(dir.path().join("part.json")).unwrap(),
    )
    .unwrap();
    let hat = read_partition_json(
        &fs::read_to_string(dir.path().join("part_hat.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(tilde.partition.labels(), hat.partition.labels());
    assert_eq!(tilde.partition.objective(), hat.partition.objective());
    let (tb, hb) = (tilde.bounds.unwrap(), hat.bounds.unwrap());
    assert_eq!(tb.which_eta.as_str(), "tilde");
    assert_eq!(hb.which_eta.as_str(), "hat");
    assert!(hb.c2 <= tb.c2 + 1e-12);
}

#[test]
fn graph_doubles_k_until_connected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("pairs.csv"),
        "id,x1,x2\n1,0.0,0.0\n2,0.1,0.0\n3,100.0,0.0\n4,100.1,0.0\n",
    )
    .unwrap();
    run_ok(dir.path(), &["ingest", "--input", "pairs.csv", "--output", "pairs.json"]);
    let out = run(
        dir.path(),
        &["graph", "--data", "pairs.json", "--knn", "1", "--output", "pairs_graph.txt"],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("retrying with k=2"));
    let text = fs::read_to_string(dir.path().join("pairs_graph.txt")).unwrap();
    let g = geoseg_core::graph::read_edge_list(&mut text.as_bytes()).unwrap();
    assert!(g.is_connected());
}

#[test]
fn query_generation_depends_only_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["ingest", "--input", demo_csv(), "--output", "dataset.json"]);
    let gen = |queries: &str, preds: &str, seed: &str| {
        run_ok(
            dir.path(),
            &[
                "predict",
                "--data",
                "dataset.json",
                "--model",
                demo_model(),
                "--n-query",
                "50",
                "--radius",
                "0.4",
                "--seed",
                seed,
                "--output-queries",
                queries,
                "--output",
                preds,
            ],
        );
    };
    gen("q1.json", "p1.csv", "9");
    gen("q2.json", "p2.csv", "9");
    gen("q3.json", "p3.csv", "10");
    let q1 = fs::read(dir.path().join("q1.json")).unwrap();
    assert_eq!(q1, fs::read(dir.path().join("q2.json")).unwrap());
    assert_ne!(q1, fs::read(dir.path().join("q3.json")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("p1.csv")).unwrap(),
        fs::read(dir.path().join("p2.csv")).unwrap()
    );
}
