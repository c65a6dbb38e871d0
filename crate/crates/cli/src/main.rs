//! `geoseg` — batch pipeline for turning spatial predictions into
//! contiguous, interpretable segments.
//!
//! The stages mirror how the artifacts flow: `ingest` a points CSV,
//! `predict` with a sparse model (optionally fitting one on responses
//! first), build a neighborhood `graph`, `aggregate` vertices into a small
//! number of connected groups, `segment` into m contiguous clusters with
//! error bounds, and `report`/`plot` the results. `export-miqp` and
//! `check-solution` bridge to external quadratic-programming solvers.
//!
//! Every stage reads and writes plain files, so pipelines are resumable
//! and, with fixed seeds, reproducible byte for byte.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use geoseg_core::aggregate::{
    c2_of, greedy_aggregate, hyperrect_aggregate, optimal_side_lengths, verify_assumptions,
    Aggregation, HyperrectScheme,
};
use geoseg_core::bounds::compute_bounds;
use geoseg_core::gp::{
    fit_exact_gp_grid, generate_query_points, GpModel, KernelFamily, KernelSpec,
};
use geoseg_core::graph::{
    build_knn_graph, build_mst, read_edge_list, union_graphs, write_edge_list, SpatialDataset,
    SpatialGraph,
};
use geoseg_core::io::{
    eta_of, read_aggregation_json, read_dataset_csv, read_dataset_json, read_gp_model_json,
    read_partition_json, read_predictions_csv, write_aggregation_json, write_dataset_json,
    write_gp_model_json, write_partition_json, write_predictions_csv, PartitionArtifact,
};
use geoseg_core::miqp::{add_flow_constraints, build_miqp, check_external_solution, read_lp, write_lp};
use geoseg_core::solver::{
    expand_partition, mahalanobis_score, solve_exact, solve_exact_weighted, solve_greedy,
    solve_greedy_weighted, Partition, SolveStats, SolverConfig,
};
use geoseg_core::{Error, PredictionVector, Result};

#[derive(Parser)]
#[command(
    name = "geoseg",
    version,
    about = "Segment spatial predictions into contiguous regions",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a points CSV (header id,x1,...,xd[,y]) into a dataset file.
    Ingest(IngestArgs),
    /// Predict with a sparse model, optionally at freshly generated query points.
    Predict(PredictArgs),
    /// Build the spatial neighborhood graph for a dataset.
    Graph(GraphArgs),
    /// Group vertices into connected sublabel groups with averaged predictions.
    Aggregate(AggregateArgs),
    /// Partition the graph into m contiguous clusters.
    Segment(SegmentArgs),
    /// Write the partitioning problem as a quadratic program in LP format.
    ExportMiqp(ExportMiqpArgs),
    /// Verify an external solver's solution against an exported model.
    CheckSolution(CheckSolutionArgs),
    /// Summarize a partition file in human-readable form.
    Report(ReportArgs),
    /// Render a two-dimensional dataset as a colored SVG scatter.
    Plot(PlotArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Points CSV to read.
    #[arg(long)]
    input: PathBuf,
    /// Dataset file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "fit_grid"])))]
struct PredictArgs {
    /// Dataset to predict at (and to fit on, with --fit-grid).
    #[arg(long)]
    data: PathBuf,
    /// Sparse model file to predict with.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Fit an exact model on the dataset's responses over a small built-in
    /// hyperparameter grid instead of loading one.
    #[arg(long)]
    fit_grid: bool,
    /// Also save the model that produced the predictions.
    #[arg(long)]
    output_model: Option<PathBuf>,
    /// Generate this many query points near the data instead of predicting
    /// at the dataset itself.
    #[arg(long, requires = "output_queries")]
    n_query: Option<usize>,
    /// Perturbation radius for generated query points (0 resamples the
    /// original locations unchanged).
    #[arg(long, default_value_t = 0.0, requires = "n_query")]
    radius: f64,
    /// Seed for query-point generation.
    #[arg(long, default_value_t = 0, requires = "n_query")]
    seed: u64,
    /// Where to save the generated query points as a dataset file.
    #[arg(long, requires = "n_query")]
    output_queries: Option<PathBuf>,
    /// Predictions CSV to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Dataset whose points become the vertices.
    #[arg(long)]
    data: PathBuf,
    /// Connect each point to its k nearest neighbors (symmetrized). If the
    /// result is disconnected, k is doubled until it connects.
    #[arg(long)]
    knn: usize,
    /// Reduce the neighbor graph to its minimum spanning tree.
    #[arg(long)]
    mst: bool,
    /// Union the result with this smaller nearest-neighbor graph.
    #[arg(long)]
    augment_knn: Option<usize>,
    /// Edge-list file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    /// Merge adjacent groups to minimize the smoothing error.
    Greedy,
    /// Cut the input space into axis-aligned cells.
    Hyperrect,
}

#[derive(Args)]
struct AggregateArgs {
    /// Dataset file; required by the hyperrectangle scheme for coordinates.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Edge-list file for the graph being aggregated.
    #[arg(long)]
    graph: PathBuf,
    /// Predictions CSV aligned with the graph's vertices.
    #[arg(long)]
    predictions: PathBuf,
    /// Number of groups to keep (greedy scheme).
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Greedy)]
    scheme: SchemeArg,
    /// Cell origin, comma-separated; defaults to the bounding-box minimum
    /// (hyperrectangle scheme).
    #[arg(long, value_delimiter = ',')]
    cell_origin: Option<Vec<f64>>,
    /// Cell side lengths, comma-separated (hyperrectangle scheme).
    #[arg(long, value_delimiter = ',')]
    cell_sides: Option<Vec<f64>>,
    /// Per-axis bounds on the field's partial derivatives, comma-separated;
    /// cell sides are then chosen to minimize the error bound at the
    /// --cell-mean size (hyperrectangle scheme).
    #[arg(long, value_delimiter = ',')]
    sup_grad: Option<Vec<f64>>,
    /// Geometric-mean cell size used with --sup-grad.
    #[arg(long)]
    cell_mean: Option<f64>,
    /// Aggregation file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Branch-and-bound search with an optimality guarantee.
    Exact,
    /// Agglomerative merging; fast, no guarantee.
    Greedy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    /// Squared distance to per-cluster means.
    Wcss,
    /// Also attach the covariance-weighted score of the solution
    /// (needs --model and --data).
    Mahalanobis,
}

#[derive(Args)]
struct SegmentArgs {
    /// Edge-list file for the graph being partitioned.
    #[arg(long)]
    graph: PathBuf,
    /// Predictions CSV aligned with the graph's vertices.
    #[arg(long)]
    predictions: PathBuf,
    /// Aggregation file; the solve then runs on its quotient problem and
    /// the output carries approximation bounds.
    #[arg(long)]
    aggregation: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    /// Report the bound variant that reverts low-degree fringe groups to
    /// their raw predictions (the solve itself is unchanged: group means
    /// are identical either way).
    #[arg(long, requires = "aggregation")]
    use_hat: bool,
    /// Objective tolerance of the exact search.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Abort the exact search after this many nodes.
    #[arg(long)]
    node_budget: Option<u64>,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Wcss)]
    objective: ObjectiveArg,
    /// Sparse model file (covariance-weighted scoring).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset the predictions were made at (covariance-weighted scoring).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Partition file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExportMiqpArgs {
    /// Edge-list file for the graph being partitioned.
    #[arg(long)]
    graph: PathBuf,
    /// Predictions CSV aligned with the graph's vertices.
    #[arg(long)]
    predictions: PathBuf,
    /// Aggregation file; the model is then built on the quotient problem.
    #[arg(long)]
    aggregation: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    m: usize,
    /// Leave out the flow-based contiguity constraints.
    #[arg(long)]
    no_flow: bool,
    /// LP file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CheckSolutionArgs {
    /// Exported LP file.
    #[arg(long)]
    model: PathBuf,
    /// Solver output: one `name value` pair per line, # comments ignored.
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Partition file to summarize.
    #[arg(long)]
    partition: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("coloring").required(true).args(["partition", "predictions"])))]
struct PlotArgs {
    /// Two-dimensional dataset to draw.
    #[arg(long)]
    data: PathBuf,
    /// Color points by this partition's cluster labels.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Color points by these predicted values.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// SVG file to write.
    #[arg(long)]
    output: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(i32::from(err.failure_class()));
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Graph(args) => cmd_graph(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Segment(args) => cmd_segment(args),
        Command::ExportMiqp(args) => cmd_export_miqp(args),
        Command::CheckSolution(args) => cmd_check_solution(args),
        Command::Report(args) => cmd_report(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

// ---------------------------------------------------------------------------
// File plumbing with path context
// ---------------------------------------------------------------------------

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_at(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_at(path, e))
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<SpatialDataset> {
    read_dataset_json(&read_text(path)?)
}

fn load_graph(path: &Path) -> Result<SpatialGraph> {
    let text = read_text(path)?;
    read_edge_list(&mut text.as_bytes())
}

fn load_eta(path: &Path) -> Result<PredictionVector> {
    eta_of(&read_predictions_csv(&read_text(path)?)?)
}

fn load_aggregation(path: &Path, g: &SpatialGraph, eta: &PredictionVector) -> Result<Aggregation> {
    let agg = read_aggregation_json(&read_text(path)?, g, eta)?;
    let report = verify_assumptions(&agg, g)?;
    if !report.pass {
        return Err(Error::InvalidPartition(
            "aggregation groups are not connected on this graph".into(),
        ));
    }
    Ok(agg)
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let data = read_dataset_csv(&read_text(&args.input)?)?;
    write_text(&args.output, &write_dataset_json(&data))?;
    println!(
        "wrote {} ({} points, {} axes{})",
        args.output.display(),
        data.n(),
        data.dim(),
        if data.responses().is_some() { ", with responses" } else { "" }
    );
    Ok(())
}

/// Hyperparameter grid for --fit-grid: inverse length scales spanning a
/// few octaves around the bounding box, noise spanning three decades.
fn default_grid(data: &SpatialDataset) -> Vec<KernelSpec> {
    let (lo, hi) = data.bounding_box();
    let base: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| if b > a { 2.0 / (b - a) } else { 2.0 })
        .collect();
    let signal = data
        .responses()
        .map(|y| y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64)
        .filter(|&s| s > 0.0)
        .unwrap_or(1.0);
    let mut grid = Vec::new();
    for scale in [0.5, 1.0, 2.0, 4.0, 8.0] {
        for noise_frac in [1e-4, 1e-2, 1e-1] {
            grid.push(KernelSpec {
                family: KernelFamily::Rbf,
                length_scales: base.iter().map(|t| t * scale).collect(),
                signal_variance: signal,
                white_noise: signal * noise_frac,
            });
        }
    }
    grid
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let model: GpModel = match &args.model {
        Some(path) => read_gp_model_json(&read_text(path)?)?,
        None => fit_exact_gp_grid(&data, &default_grid(&data))?,
    };
    if let Some(path) = &args.output_model {
        write_text(path, &write_gp_model_json(&model))?;
        println!("wrote {} ({} inducing points)", path.display(), model.rho());
    }
    let target = match args.n_query {
        Some(n_query) => {
            let weights = vec![1.0; data.n()];
            let queries = generate_query_points(&data, &weights, n_query, args.radius, args.seed)?;
            let path = args.output_queries.as_ref().expect("clap ties the flags");
            write_text(path, &write_dataset_json(&queries))?;
            println!("wrote {} ({} query points)", path.display(), queries.n());
            queries
        }
        None => data,
    };
    let preds = model.predict_many(&target)?;
    write_text(&args.output, &write_predictions_csv(&preds))?;
    println!("wrote {} ({} predictions)", args.output.display(), preds.len());
    Ok(())
}

fn cmd_graph(args: GraphArgs) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let n = data.n();
    let mut k = args.knn;
    let mut g = build_knn_graph(&data, k)?;
    while !g.is_connected() && k < n.saturating_sub(1) {
        let wider = (k * 2).min(n - 1);
        eprintln!("note: the {k}-nearest-neighbor graph is disconnected; retrying with k={wider}");
        k = wider;
        g = build_knn_graph(&data, k)?;
    }
    g.require_connected()?;
    if args.mst {
        g = build_mst(&g)?;
    }
    if let Some(a) = args.augment_knn {
        g = union_graphs(&g, &build_knn_graph(&data, a)?)?;
    }
    let mut buf = Vec::new();
    write_edge_list(&g, &mut buf)?;
    fs::write(&args.output, buf).map_err(|e| io_at(&args.output, e))?;
    println!(
        "wrote {} ({} vertices, {} edges)",
        args.output.display(),
        g.n(),
        g.edges().len()
    );
    Ok(())
}

fn cmd_aggregate(args: AggregateArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let eta = load_eta(&args.predictions)?;
    let agg = match args.scheme {
        SchemeArg::Greedy => {
            for (flag, given) in [
                ("--cell-origin", args.cell_origin.is_some()),
                ("--cell-sides", args.cell_sides.is_some()),
                ("--sup-grad", args.sup_grad.is_some()),
                ("--cell-mean", args.cell_mean.is_some()),
            ] {
                if given {
                    return Err(Error::InvalidParameter(format!(
                        "{flag} only applies to --scheme hyperrect"
                    )));
                }
            }
            let l = args.l.ok_or_else(|| {
                Error::InvalidParameter("the greedy scheme needs --l".into())
            })?;
            greedy_aggregate(&g, &eta, l)?
        }
        SchemeArg::Hyperrect => {
            if args.l.is_some() {
                return Err(Error::InvalidParameter(
                    "--l only applies to --scheme greedy; cell sizes set the group count".into(),
                ));
            }
            let data = load_dataset(args.data.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "the hyperrectangle scheme needs --data for coordinates".into(),
                )
            })?)?;
            let sides = match (&args.cell_sides, &args.sup_grad) {
                (Some(sides), None) => sides.clone(),
                (None, Some(grads)) => {
                    let delta = args.cell_mean.ok_or_else(|| {
                        Error::InvalidParameter("--sup-grad needs --cell-mean".into())
                    })?;
                    let chosen = optimal_side_lengths(grads, delta)?;
                    println!(
                        "chose cell sides [{}] (error bound {:.6})",
                        join_floats(&chosen.sides),
                        chosen.bound(data.n())
                    );
                    chosen.sides
                }
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidParameter(
                        "give either --cell-sides or --sup-grad, not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(Error::InvalidParameter(
                        "the hyperrectangle scheme needs --cell-sides, or --sup-grad with \
                         --cell-mean"
                            .into(),
                    ))
                }
            };
            let origin = args
                .cell_origin
                .clone()
                .unwrap_or_else(|| data.bounding_box().0);
            let scheme = HyperrectScheme::new(origin, sides)?;
            hyperrect_aggregate(&g, &data, &eta, &scheme)?
        }
    };
    write_text(&args.output, &write_aggregation_json(&agg))?;
    println!(
        "wrote {} ({} groups, smoothing bound c2 = {:.6})",
        args.output.display(),
        agg.group_count(),
        c2_of(&agg, &eta)
    );
    Ok(())
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let eta = load_eta(&args.predictions)?;
    let agg = match &args.aggregation {
        Some(path) => {
            let agg = load_aggregation(path, &g, &eta)?;
            if args.m > agg.group_count() {
                return Err(Error::InvalidParameter(format!(
                    "m = {} clusters cannot come out of {} aggregation groups",
                    args.m,
                    agg.group_count()
                )));
            }
            Some(agg)
        }
        None => None,
    };

    let mut cfg = SolverConfig::new(args.m).with_tolerance(args.tolerance);
    if let Some(budget) = args.node_budget {
        cfg = cfg.with_node_budget(budget);
    }
    cfg.threads = std::env::var("GEOSEG_THREADS").ok().and_then(|s| s.parse().ok());

    let (partition, telemetry): (Partition, Option<SolveStats>) = match (&agg, args.method) {
        (Some(agg), MethodArg::Exact) => {
            let sizes: Vec<f64> = agg.group_sizes().iter().map(|&s| s as f64).collect();
            let (quotient, stats) =
                solve_exact_weighted(agg.quotient(), agg.representative(), &sizes, &cfg)?;
            (expand_partition(agg, &quotient)?, Some(stats))
        }
        (Some(agg), MethodArg::Greedy) => {
            let sizes: Vec<f64> = agg.group_sizes().iter().map(|&s| s as f64).collect();
            let quotient =
                solve_greedy_weighted(agg.quotient(), agg.representative(), &sizes, args.m)?;
            (expand_partition(agg, &quotient)?, None)
        }
        (None, MethodArg::Exact) => {
            let (p, stats) = solve_exact(&g, &eta, &cfg)?;
            (p, Some(stats))
        }
        (None, MethodArg::Greedy) => (solve_greedy(&g, &eta, args.m)?, None),
    };

    // The gap fields certify optimality only when the partition is the
    // exact optimum of the aggregated problem; for the greedy method they
    // are the same arithmetic applied to a heuristic solution. Without an
    // aggregation, the exact method still gets a (trivial) report through
    // the identity aggregation; a bare greedy solve has nothing to certify.
    let bounds = match (&agg, args.method) {
        (Some(agg), _) => Some(compute_bounds(&eta, agg, &partition, args.use_hat)?),
        (None, MethodArg::Exact) => {
            let identity =
                Aggregation::from_sublabels(&g, &eta, (0..g.n()).collect(), g.n())?;
            Some(compute_bounds(&eta, &identity, &partition, false)?)
        }
        (None, MethodArg::Greedy) => None,
    };

    let mahalanobis = match args.objective {
        ObjectiveArg::Wcss => None,
        ObjectiveArg::Mahalanobis => {
            let model_path = args.model.as_ref().ok_or_else(|| {
                Error::InvalidParameter("the covariance-weighted score needs --model".into())
            })?;
            let data_path = args.data.as_ref().ok_or_else(|| {
                Error::InvalidParameter("the covariance-weighted score needs --data".into())
            })?;
            let model = read_gp_model_json(&read_text(model_path)?)?;
            let data = load_dataset(data_path)?;
            if data.n() != g.n() {
                return Err(Error::InvalidParameter(format!(
                    "dataset has {} points but the graph has {} vertices",
                    data.n(),
                    g.n()
                )));
            }
            let preds = read_predictions_csv(&read_text(&args.predictions)?)?;
            let mu: Vec<f64> = preds.iter().map(|p| p.mu).collect();
            let sigma = model.compute_sigma_matrix(&data)?;
            Some(mahalanobis_score(partition.labels(), args.m, &mu, &sigma)?)
        }
    };

    let line = match &bounds {
        Some(b) => format!(
            "objective {:.6}, error ratio {:.4}, gap bounds c1 = {:.6}, c2 = {:.6}",
            partition.objective(),
            b.error_ratio,
            b.c1,
            b.c2
        ),
        None => format!("objective {:.6}", partition.objective()),
    };
    let artifact = PartitionArtifact { partition, telemetry, bounds, mahalanobis };
    write_text(&args.output, &write_partition_json(&artifact))?;
    println!("wrote {} ({line})", args.output.display());
    Ok(())
}

fn cmd_export_miqp(args: ExportMiqpArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let eta = load_eta(&args.predictions)?;
    let model = match &args.aggregation {
        Some(path) => {
            let agg = load_aggregation(path, &g, &eta)?;
            if args.m > agg.group_count() {
                return Err(Error::InvalidParameter(format!(
                    "m = {} clusters cannot come out of {} aggregation groups",
                    args.m,
                    agg.group_count()
                )));
            }
            let base = build_miqp(agg.quotient(), &eta, args.m, Some(&agg))?;
            if args.no_flow {
                base
            } else {
                add_flow_constraints(base, agg.quotient())?
            }
        }
        None => {
            let base = build_miqp(&g, &eta, args.m, None)?;
            if args.no_flow {
                base
            } else {
                add_flow_constraints(base, &g)?
            }
        }
    };
    write_lp(&model, &args.output)?;
    println!(
        "wrote {} ({} variables, {} constraints)",
        args.output.display(),
        model.variables().len(),
        model.constraints().len()
    );
    Ok(())
}

fn cmd_check_solution(args: CheckSolutionArgs) -> Result<()> {
    let model = read_lp(&read_text(&args.model)?)?;
    let report = check_external_solution(&model, &read_text(&args.solution)?)?;
    println!("objective from file: {:.9}", report.objective);
    if let (Some(labels), Some(obj)) = (&report.decoded_labels, report.decoded_objective) {
        let shown: Vec<String> = labels.iter().map(|&l| (l + 1).to_string()).collect();
        println!("decoded labels: [{}]", shown.join(", "));
        println!("decoded objective: {obj:.9}");
    }
    for issue in &report.issues {
        println!("issue: {issue}");
    }
    if report.pass {
        println!("solution accepted");
        Ok(())
    } else {
        Err(Error::InvalidPartition(format!(
            "solution rejected ({} issue{} listed above)",
            report.issues.len(),
            if report.issues.len() == 1 { "" } else { "s" }
        )))
    }
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let artifact = read_partition_json(&read_text(&args.partition)?)?;
    let p = &artifact.partition;
    println!("partition: {} clusters over {} vertices", p.m(), p.labels().len());
    println!(
        "objective: {:.6} (labels {})",
        p.objective(),
        if p.is_canonical() { "canonical" } else { "not canonical" }
    );
    let sizes: Vec<String> = p.clusters().iter().map(|c| c.len().to_string()).collect();
    println!("cluster sizes: {}", sizes.join(", "));
    println!(
        "representatives: [{}]",
        join_floats(p.representatives())
    );
    if let Some(t) = &artifact.telemetry {
        println!(
            "search: {} nodes expanded, bound at the root {:.6}",
            t.nodes_expanded, t.root_bound
        );
    }
    if let Some(b) = &artifact.bounds {
        if b.degenerate {
            println!("bounds: predictions are constant; ratios reported as 0");
        }
        println!(
            "bounds ({} variant): error {:.2}%, gap at most {:.2}%, c1 = {:.6}, c2 = {:.6}, \
             total sum of squares {:.6}",
            b.which_eta.as_str(),
            100.0 * b.error_ratio,
            100.0 * b.gap_ratio,
            b.c1,
            b.c2,
            b.tss
        );
    }
    if let Some(s) = &artifact.mahalanobis {
        println!(
            "covariance-weighted score: quadratic {:.6}, marginal correction {:.6}",
            s.quadratic, s.marginal_correction
        );
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let svg = match (&args.partition, &args.predictions) {
        (Some(path), None) => {
            let artifact = read_partition_json(&read_text(path)?)?;
            plot::labels_svg(&data, artifact.partition.labels(), artifact.partition.m())?
        }
        (None, Some(path)) => {
            let eta = load_eta(path)?;
            plot::eta_svg(&data, eta.values())?
        }
        _ => unreachable!("clap enforces exactly one coloring source"),
    };
    write_text(&args.output, &svg)?;
    println!("wrote {}", args.output.display());
    Ok(())
}
