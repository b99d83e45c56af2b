//! Command-line front end: dataset generation, embedding, evaluation,
//! time-grid inspection, and benchmark runs.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 numerical
//! failure. stdout carries only reports; logs go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use heatgeo::datasets::{self, GroundTruthBundle};
use heatgeo::distance::{
    diffusion_map_distance, phate_potential, transition_matrix, DistanceMatrix, DmWeighting,
    Provenance,
};
use heatgeo::embedding::{heatgeo_embed, smacof, HeatGeoConfig, MdsConfig, TimeSpec};
use heatgeo::graph::{build_knn_graph, knn_edge_lengths, laplacian};
use heatgeo::heat::{log_time_grid, select_time_knee};
use heatgeo::io;
use heatgeo::metrics::{
    clustering_scores, interpolation_emd, norm_diffs, row_correlations, shortest_path_baseline,
    EvalReport,
};
use heatgeo::{Bandwidth, HeatGeoError, LaplacianKind, PointCloud, Result};

#[derive(Parser)]
#[command(name = "heatgeo", version, about = "Heat-geodesic manifold embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground-truth geodesics.
    Generate(GenerateArgs),
    /// Embed a point cloud and export the distance matrix and coordinates.
    Embed(EmbedArgs),
    /// Evaluate distance matrices and embeddings.
    Eval(EvalArgs),
    /// Inspect the entropy curve over a diffusion-time grid.
    Knee(KneeArgs),
    /// Run a benchmark table from a JSON specification.
    Benchmark(BenchmarkArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Knee(a) => cmd_knee(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HeatGeoError) -> u8 {
    match e {
        HeatGeoError::Parameter(_)
        | HeatGeoError::Parse { .. }
        | HeatGeoError::Io(_)
        | HeatGeoError::Csv(_) => 2,
        HeatGeoError::IsolatedVertex(_)
        | HeatGeoError::Disconnected { .. }
        | HeatGeoError::Numerical { .. } => 3,
    }
}

fn json_error(e: serde_json::Error) -> HeatGeoError {
    HeatGeoError::Numerical {
        stage: "json",
        message: e.to_string(),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Load an optional JSON config file for a subcommand; unknown keys are
/// rejected. Command-line flags win over file values.
fn load_config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| HeatGeoError::Parameter(format!("config {}: {e}", p.display())))
        }
    }
}

fn parse_laplacian(s: &str) -> Result<LaplacianKind> {
    match s {
        "symmetric" | "sym" | "symmetric-normalized" => Ok(LaplacianKind::SymmetricNormalized),
        "combinatorial" => Ok(LaplacianKind::Combinatorial),
        "random-walk" | "rw" => Ok(LaplacianKind::RandomWalk),
        other => Err(HeatGeoError::Parameter(format!(
            "unknown laplacian kind '{other}'"
        ))),
    }
}

fn parse_time(s: &str) -> Result<TimeSpec> {
    if s == "auto" {
        return Ok(TimeSpec::Auto);
    }
    s.parse::<f64>()
        .map_err(|_| HeatGeoError::Parameter(format!("invalid time '{s}'")))
        .and_then(|t| {
            if t > 0.0 {
                Ok(TimeSpec::Fixed(t))
            } else {
                Err(HeatGeoError::Parameter("time must be positive".to_string()))
            }
        })
}

// ---------------------------------------------------------------------------
// generate

#[derive(Args)]
struct GenerateArgs {
    /// Generator: swiss-roll | tree | drift.
    generator: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Points (swiss-roll).
    #[arg(long)]
    n: Option<usize>,
    /// Ambient noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Ambient dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Sample the swiss roll from the two-component Gaussian mixture.
    #[arg(long)]
    clustered: bool,
    /// Points per branch (tree).
    #[arg(long)]
    branch_len: Option<usize>,
    /// Number of branches (tree).
    #[arg(long)]
    branches: Option<usize>,
    /// Points per timepoint (drift).
    #[arg(long)]
    n_per_time: Option<usize>,
    /// Number of timepoints (drift).
    #[arg(long)]
    times: Option<usize>,
    /// Mean shift per timepoint (drift).
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GenerateFileCfg {
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    n: Option<usize>,
    noise: Option<f64>,
    dim: Option<usize>,
    clustered: Option<bool>,
    branch_len: Option<usize>,
    branches: Option<usize>,
    n_per_time: Option<usize>,
    times: Option<usize>,
    step: Option<f64>,
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let file: GenerateFileCfg = load_config(&args.config)?;
    let out = args
        .output_dir
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let bundle: Option<GroundTruthBundle> = match args.generator.as_str() {
        "swiss-roll" => Some(datasets::swiss_roll(
            args.n.or(file.n).unwrap_or(500),
            args.noise.or(file.noise).unwrap_or(0.1),
            args.dim.or(file.dim).unwrap_or(3),
            args.clustered || file.clustered.unwrap_or(false),
            seed,
        )?),
        "tree" => Some(datasets::tree(
            args.branch_len.or(file.branch_len).unwrap_or(500),
            args.branches.or(file.branches).unwrap_or(5),
            args.dim.or(file.dim).unwrap_or(5),
            args.noise.or(file.noise).unwrap_or(0.0),
            seed,
        )?),
        "drift" => {
            let n_per_time = args.n_per_time.or(file.n_per_time).unwrap_or(200);
            let n_times = args.times.or(file.times).unwrap_or(3);
            let dim = args.dim.or(file.dim).unwrap_or(5);
            let step = args.step.or(file.step).unwrap_or(2.0);
            let cloud = datasets::timepoint_drift(n_per_time, n_times, dim, step, seed)?;
            io::write_cloud_csv(out.join("cloud.csv"), &cloud)?;
            io::write_json(
                out.join("params.json"),
                &json!({
                    "generator": "timepoint_drift",
                    "n_per_time": n_per_time,
                    "n_times": n_times,
                    "dim": dim,
                    "drift_step": step,
                    "seed": seed,
                }),
            )?;
            eprintln!("wrote {}", out.join("cloud.csv").display());
            None
        }
        other => {
            return Err(HeatGeoError::Parameter(format!(
                "unknown generator '{other}' (swiss-roll | tree | drift)"
            )))
        }
    };

    if let Some(b) = bundle {
        io::write_cloud_csv(out.join("cloud.csv"), &b.cloud)?;
        io::write_dense_csv(out.join("geodesics.csv"), b.geodesics.matrix())?;
        io::write_json(out.join("params.json"), &b.params)?;
        eprintln!(
            "wrote {} points to {}",
            b.cloud.n_points(),
            out.join("cloud.csv").display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// embed

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Distance construction: heatgeo | phate-potential | diffusion-map.
    #[arg(long)]
    method: Option<String>,
    /// Diffusion time: "auto" or a positive number.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Chebyshev approximation order.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    /// Output dimension.
    #[arg(long, short = 'k')]
    dim: Option<usize>,
    /// Weight the MDS loss by the heat kernel.
    #[arg(long)]
    weighted: bool,
    /// Laplacian: symmetric | combinatorial | random-walk.
    #[arg(long)]
    laplacian: Option<String>,
    /// Gaussian bandwidth: "adaptive" or a positive number.
    #[arg(long)]
    bandwidth: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EmbedFileCfg {
    input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    method: Option<String>,
    t: Option<String>,
    sigma: Option<f64>,
    rho: Option<f64>,
    order: Option<usize>,
    k_neighbors: Option<usize>,
    dim: Option<usize>,
    weighted: Option<bool>,
    laplacian: Option<String>,
    bandwidth: Option<String>,
}

fn cmd_embed(args: EmbedArgs) -> Result<()> {
    let file: EmbedFileCfg = load_config(&args.config)?;
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| HeatGeoError::Parameter("--input is required".to_string()))?;
    let out = args
        .output_dir
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;

    let method = args
        .method
        .or(file.method)
        .unwrap_or_else(|| "heatgeo".to_string());
    let time = parse_time(&args.t.or(file.t).unwrap_or_else(|| "50".to_string()))?;
    let bandwidth = match args.bandwidth.or(file.bandwidth).as_deref() {
        None | Some("adaptive") => Bandwidth::Adaptive,
        Some(s) => {
            let eps: f64 = s
                .parse()
                .map_err(|_| HeatGeoError::Parameter(format!("invalid bandwidth '{s}'")))?;
            Bandwidth::Fixed(eps)
        }
    };
    let cfg = HeatGeoConfig {
        k_neighbors: args.k_neighbors.or(file.k_neighbors).unwrap_or(10),
        bandwidth,
        laplacian: parse_laplacian(
            &args
                .laplacian
                .or(file.laplacian)
                .unwrap_or_else(|| "symmetric".to_string()),
        )?,
        time,
        sigma: args.sigma.or(file.sigma).unwrap_or(1.0),
        rho: args.rho.or(file.rho).unwrap_or(0.0),
        order: args.order.or(file.order).unwrap_or(30),
        out_dim: args.dim.or(file.dim).unwrap_or(2),
        weighted: args.weighted || file.weighted.unwrap_or(false),
        seed: args.seed.or(file.seed).unwrap_or(0),
        ..Default::default()
    };

    let cloud = datasets::load_csv(&input)?;
    eprintln!(
        "embedding {} points from {} with method {method}",
        cloud.n_points(),
        input.display()
    );

    let (distance, coords, meta_json) = match method.as_str() {
        "heatgeo" => {
            let outp = heatgeo_embed(&cloud, &cfg)?;
            let meta = serde_json::to_value(&outp.meta).map_err(json_error)?;
            (outp.distance, outp.embedding.coords, meta)
        }
        "phate-potential" => {
            // Potential distance of the heat kernel at the requested time;
            // with rho = 1 and sigma = 0 the heatgeo method produces this
            // same matrix up to the 4t scale.
            let t = match time {
                TimeSpec::Fixed(t) => t,
                TimeSpec::Auto => {
                    return Err(HeatGeoError::Parameter(
                        "--method phate-potential needs a fixed --t".to_string(),
                    ))
                }
            };
            let g = build_knn_graph(&cloud, cfg.k_neighbors, cfg.bandwidth)?;
            let lap = laplacian(&g.adjacency, cfg.laplacian)?;
            let kernel = heatgeo::heat::chebyshev_heat(&lap, &[t], cfg.order)?.remove(0);
            let d = phate_potential(&kernel.matrix, t, 1e-12)?;
            let emb = smacof(
                &d,
                &MdsConfig {
                    dim: cfg.out_dim,
                    seed: cfg.seed,
                    ..Default::default()
                },
                None,
            )?;
            let meta = json!({
                "method": "phate-potential",
                "chosen_time": t,
                "final_stress": emb.stress,
                "num_components": g.num_components,
            });
            (d, emb.coords, meta)
        }
        "diffusion-map" => {
            let steps = match time {
                TimeSpec::Fixed(t) => {
                    let r = t.round();
                    if (t - r).abs() > 1e-9 || r < 1.0 {
                        return Err(HeatGeoError::Parameter(
                            "diffusion-map needs a positive integer --t".to_string(),
                        ));
                    }
                    r as u32
                }
                TimeSpec::Auto => 1,
            };
            let g = build_knn_graph(&cloud, cfg.k_neighbors, cfg.bandwidth)?;
            let d = diffusion_map_distance(&g.adjacency, steps, DmWeighting::Standard)?;
            let emb = smacof(
                &d,
                &MdsConfig {
                    dim: cfg.out_dim,
                    seed: cfg.seed,
                    ..Default::default()
                },
                None,
            )?;
            let meta = json!({
                "method": "diffusion-map",
                "chosen_time": steps,
                "final_stress": emb.stress,
                "num_components": g.num_components,
            });
            (d, emb.coords, meta)
        }
        other => {
            return Err(HeatGeoError::Parameter(format!(
                "unknown method '{other}' (heatgeo | phate-potential | diffusion-map)"
            )))
        }
    };

    io::write_embedding_csv(
        out.join("embedding.csv"),
        &coords,
        cloud.labels(),
        cloud.timepoints(),
    )?;
    io::write_dense_csv(out.join("distance.csv"), distance.matrix())?;
    io::write_json(out.join("metadata.json"), &meta_json)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&meta_json).map_err(json_error)?
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Inferred distance matrix (headerless dense CSV).
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Reference distance matrix (headerless dense CSV).
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Embedding CSV for clustering / interpolation metrics.
    #[arg(long)]
    embedding: Option<PathBuf>,
    /// Cloud CSV providing label / timepoint columns.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// k-means cluster count.
    #[arg(long)]
    clusters: Option<usize>,
    /// Held-out timepoint for the interpolation EMD.
    #[arg(long)]
    held_out: Option<i64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvalFileCfg {
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    dist: Option<PathBuf>,
    #[serde(rename = "ref")]
    reference: Option<PathBuf>,
    embedding: Option<PathBuf>,
    cloud: Option<PathBuf>,
    clusters: Option<usize>,
    held_out: Option<i64>,
}

fn read_embedding_coords(path: &Path) -> Result<Array2<f64>> {
    // The index column is dropped by name; remaining numeric columns are
    // the coordinates.
    let cloud = datasets::load_csv(path)?;
    Ok(cloud.data().clone())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let file: EvalFileCfg = load_config(&args.config)?;
    let out = args
        .output_dir
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let mut report = EvalReport::default();
    let mut config_echo = serde_json::Map::new();
    config_echo.insert("seed".to_string(), json!(seed));

    let dist = args.dist.or(file.dist);
    let reference = args.reference.or(file.reference);
    if let (Some(dpath), Some(rpath)) = (&dist, &reference) {
        let dhat = io::read_distance_csv(dpath, Provenance::GroundTruth)?;
        let dref = io::read_distance_csv(rpath, Provenance::GroundTruth)?;
        let corr = row_correlations(&dref, &dhat)?;
        if corr.degenerate_rows > 0 {
            eprintln!(
                "warning: {} constant rows contributed zero correlation",
                corr.degenerate_rows
            );
        }
        let norms = norm_diffs(&dref, &dhat)?;
        report.pearson = Some(corr.pearson);
        report.spearman = Some(corr.spearman);
        report.frob_norm = norms.normalized_frobenius;
        report.max_norm = norms.normalized_max;
        report.frob_norm_raw = Some(norms.raw_frobenius);
        report.max_norm_raw = Some(norms.raw_max);
        config_echo.insert("dist".to_string(), json!(dpath.display().to_string()));
        config_echo.insert("ref".to_string(), json!(rpath.display().to_string()));
    }

    let embedding = args.embedding.or(file.embedding);
    let cloud_path = args.cloud.or(file.cloud);
    if let Some(epath) = &embedding {
        let coords = read_embedding_coords(epath)?;
        let cloud = cloud_path
            .as_ref()
            .ok_or_else(|| {
                HeatGeoError::Parameter("--cloud is required with --embedding".to_string())
            })
            .and_then(datasets::load_csv)?;
        if cloud.n_points() != coords.nrows() {
            return Err(HeatGeoError::Parameter(format!(
                "embedding has {} rows but cloud has {}",
                coords.nrows(),
                cloud.n_points()
            )));
        }
        if let Some(k) = args.clusters.or(file.clusters) {
            let labels = cloud.labels().ok_or_else(|| {
                HeatGeoError::Parameter("cloud file has no label column".to_string())
            })?;
            let scores = clustering_scores(&coords, labels, k, seed)?;
            report.homogeneity = Some(scores.homogeneity);
            report.ami = Some(scores.ami);
            report.ari = Some(scores.ari);
            config_echo.insert("clusters".to_string(), json!(k));
        }
        if let Some(h) = args.held_out.or(file.held_out) {
            let times = cloud.timepoints().ok_or_else(|| {
                HeatGeoError::Parameter("cloud file has no timepoint column".to_string())
            })?;
            report.emd = Some(interpolation_emd(&coords, times, h, seed)?);
            config_echo.insert("held_out".to_string(), json!(h));
        }
        config_echo.insert("embedding".to_string(), json!(epath.display().to_string()));
    }

    if report.pearson.is_none() && report.homogeneity.is_none() && report.emd.is_none() {
        return Err(HeatGeoError::Parameter(
            "nothing to evaluate: pass --dist/--ref and/or --embedding".to_string(),
        ));
    }

    report.config = serde_json::Value::Object(config_echo);
    let text = serde_json::to_string_pretty(&report).map_err(json_error)?;
    std::fs::write(out.join("eval.json"), format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// knee

#[derive(Args)]
struct KneeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long)]
    laplacian: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct KneeFileCfg {
    input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    k_neighbors: Option<usize>,
    laplacian: Option<String>,
    order: Option<usize>,
    grid_min: Option<f64>,
    grid_max: Option<f64>,
    grid_points: Option<usize>,
}

fn cmd_knee(args: KneeArgs) -> Result<()> {
    let file: KneeFileCfg = load_config(&args.config)?;
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| HeatGeoError::Parameter("--input is required".to_string()))?;
    let out = args
        .output_dir
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;

    let cloud = datasets::load_csv(&input)?;
    let g = build_knn_graph(
        &cloud,
        args.k_neighbors.or(file.k_neighbors).unwrap_or(10),
        Bandwidth::Adaptive,
    )?;
    let lap = laplacian(
        &g.adjacency,
        parse_laplacian(
            &args
                .laplacian
                .or(file.laplacian)
                .unwrap_or_else(|| "symmetric".to_string()),
        )?,
    )?;
    let grid = log_time_grid(
        args.grid_min.or(file.grid_min).unwrap_or(0.05),
        args.grid_max.or(file.grid_max).unwrap_or(200.0),
        args.grid_points.or(file.grid_points).unwrap_or(20),
    );
    let sel = select_time_knee(&lap, &grid, args.order.or(file.order).unwrap_or(30))?;
    io::write_time_entropy_csv(out.join("entropy.csv"), &sel.grid, &sel.entropies)?;
    let report = json!({
        "chosen_t": sel.chosen,
        "knee_found": sel.knee_found,
        "grid_size": sel.grid.len(),
        "entropy_csv": out.join("entropy.csv").display().to_string(),
    });
    io::write_json(out.join("knee.json"), &report)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(json_error)?
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct BenchDataset {
    name: String,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    noise: Option<f64>,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    branch_len: Option<usize>,
    #[serde(default)]
    branches: Option<usize>,
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct SweepCfg {
    min: f64,
    max: f64,
    points: usize,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BenchmarkFileCfg {
    datasets: Vec<BenchDataset>,
    methods: Vec<String>,
    #[serde(default)]
    repetitions: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    sweep: Option<SweepCfg>,
    #[serde(default)]
    heatgeo_k: Option<Vec<usize>>,
    #[serde(default)]
    dm_t: Option<Vec<u32>>,
    #[serde(default)]
    phate_t: Option<Vec<u32>>,
    #[serde(default)]
    shortest_path_k: Option<Vec<usize>>,
}

struct CellStats {
    dataset: String,
    noise: f64,
    method: String,
    pearson: (f64, f64),
    spearman: (f64, f64),
    frob: (f64, f64),
    max: (f64, f64),
    status: String,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn generate_bundle(ds: &BenchDataset, seed: u64) -> Result<GroundTruthBundle> {
    match ds.name.as_str() {
        "swiss-roll" => datasets::swiss_roll(
            ds.n.unwrap_or(500),
            ds.noise.unwrap_or(0.1),
            ds.dim.unwrap_or(10),
            false,
            seed,
        ),
        "tree" => datasets::tree(
            ds.branch_len.unwrap_or(100),
            ds.branches.unwrap_or(5),
            ds.dim.unwrap_or(5),
            ds.noise.unwrap_or(5.0),
            seed,
        ),
        other => Err(HeatGeoError::Parameter(format!(
            "unknown benchmark dataset '{other}'"
        ))),
    }
}

fn select_submatrix(d: &DistanceMatrix, idx: &[usize]) -> DistanceMatrix {
    let m = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| {
        d.matrix()[[idx[a], idx[b]]]
    });
    DistanceMatrix::new(m, d.provenance()).expect("submatrix of a distance matrix is valid")
}

/// Distance matrix for one method/hyperparameter choice on a sub-cloud.
fn method_distance(
    method: &str,
    hyper: usize,
    cloud: &PointCloud,
    order: usize,
) -> Result<DistanceMatrix> {
    match method {
        "heatgeo" => {
            let cfg = HeatGeoConfig {
                k_neighbors: hyper,
                order,
                max_iters: 0,
                ..Default::default()
            };
            Ok(heatgeo_embed(cloud, &cfg)?.distance)
        }
        "diffusion-map" => {
            let g = build_knn_graph(cloud, 10, Bandwidth::Adaptive)?;
            diffusion_map_distance(&g.adjacency, hyper as u32, DmWeighting::Standard)
        }
        "phate" => {
            // Potential distance of the t-step random walk, the baseline
            // construction.
            let g = build_knn_graph(cloud, 10, Bandwidth::Adaptive)?;
            let p = transition_matrix(&g.adjacency)?;
            let mut pt = p.clone();
            for _ in 1..hyper {
                pt = pt.dot(&p);
            }
            phate_potential(&pt, hyper as f64, 1e-12)
        }
        "shortest-path" => {
            let lengths = knn_edge_lengths(cloud, hyper)?;
            shortest_path_baseline(&lengths)
        }
        other => Err(HeatGeoError::Parameter(format!(
            "unknown benchmark method '{other}'"
        ))),
    }
}

fn method_hypers(method: &str, cfg: &BenchmarkFileCfg) -> Vec<usize> {
    match method {
        "heatgeo" => cfg.heatgeo_k.clone().unwrap_or_else(|| vec![5, 15]),
        "diffusion-map" => cfg
            .dm_t
            .clone()
            .unwrap_or_else(|| vec![1, 5, 10])
            .into_iter()
            .map(|t| t as usize)
            .collect(),
        "phate" => cfg
            .phate_t
            .clone()
            .unwrap_or_else(|| vec![1, 5, 10])
            .into_iter()
            .map(|t| t as usize)
            .collect(),
        "shortest-path" => cfg
            .shortest_path_k
            .clone()
            .unwrap_or_else(|| vec![5, 10, 15]),
        _ => vec![0],
    }
}

fn run_cell(
    ds: &BenchDataset,
    method: &str,
    reps: usize,
    base_seed: u64,
    cfg: &BenchmarkFileCfg,
) -> Result<CellStats> {
    use rand::prelude::*;
    let hypers = method_hypers(method, cfg);
    let mut pearls = Vec::new();
    let mut spears = Vec::new();
    let mut frobs = Vec::new();
    let mut maxes = Vec::new();
    for rep in 0..reps {
        let seed = base_seed.wrapping_add(rep as u64);
        let bundle = generate_bundle(ds, seed)?;
        let n = bundle.cloud.n_points();

        // 50/50 validation-test split; hyperparameters are chosen on the
        // validation half by Pearson correlation.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let (val_half, test_half) = perm.split_at(n / 2);
        let mut val_idx = val_half.to_vec();
        let mut test_idx = test_half.to_vec();
        val_idx.sort_unstable();
        test_idx.sort_unstable();

        let val_cloud = bundle.cloud.select(&val_idx)?;
        let val_ref = select_submatrix(&bundle.geodesics, &val_idx);
        let mut best_hyper = hypers[0];
        if hypers.len() > 1 {
            let mut best_score = f64::NEG_INFINITY;
            for &h in &hypers {
                match method_distance(method, h, &val_cloud, 30) {
                    Ok(d) => {
                        let corr = row_correlations(&val_ref, &d)?;
                        if corr.pearson > best_score {
                            best_score = corr.pearson;
                            best_hyper = h;
                        }
                    }
                    Err(e) => eprintln!("  validation {method} hyper {h} failed: {e}"),
                }
            }
        }

        let test_cloud = bundle.cloud.select(&test_idx)?;
        let test_ref = select_submatrix(&bundle.geodesics, &test_idx);
        let d = method_distance(method, best_hyper, &test_cloud, 30)?;
        let corr = row_correlations(&test_ref, &d)?;
        let norms = norm_diffs(&test_ref, &d)?;
        pearls.push(corr.pearson);
        spears.push(corr.spearman);
        frobs.push(norms.normalized_frobenius.unwrap_or(f64::NAN));
        maxes.push(norms.normalized_max.unwrap_or(f64::NAN));
    }
    Ok(CellStats {
        dataset: ds.name.clone(),
        noise: ds.noise.unwrap_or(0.0),
        method: method.to_string(),
        pearson: mean_sd(&pearls),
        spearman: mean_sd(&spears),
        frob: mean_sd(&frobs),
        max: mean_sd(&maxes),
        status: "ok".to_string(),
    })
}

fn run_sweep(ds: &BenchDataset, sweep: &SweepCfg, seed: u64, out: &Path) -> Result<()> {
    use heatgeo::distance::{heat_geodesic, HarnackParams};
    use heatgeo::heat::{chebyshev_heat, heat_entropy};
    use std::io::Write;

    let bundle = generate_bundle(ds, seed)?;
    let g = build_knn_graph(&bundle.cloud, 10, Bandwidth::Adaptive)?;
    let lap = laplacian(&g.adjacency, LaplacianKind::SymmetricNormalized)?;
    let grid = log_time_grid(sweep.min, sweep.max, sweep.points);
    let order = (sweep.max + 12.0 * sweep.max.sqrt() + 20.0).ceil() as usize;
    let kernels = chebyshev_heat(&lap, &grid, order.max(30))?;

    let mut out_file = std::io::BufWriter::new(std::fs::File::create(out.join("sweep.csv"))?);
    writeln!(out_file, "t,pearson,frobenius,entropy")?;
    for kernel in kernels {
        let entropy = heat_entropy(&kernel);
        let geo = heat_geodesic(&kernel, &HarnackParams::default())?;
        let corr = row_correlations(&bundle.geodesics, &geo.distance)?;
        let norms = norm_diffs(&bundle.geodesics, &geo.distance)?;
        writeln!(
            out_file,
            "{},{},{},{}",
            kernel.time,
            corr.pearson,
            norms.normalized_frobenius.unwrap_or(f64::NAN),
            entropy
        )?;
    }
    eprintln!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let cfg_path = args
        .config
        .ok_or_else(|| HeatGeoError::Parameter("--config is required".to_string()))?;
    let text = std::fs::read_to_string(&cfg_path)?;
    let cfg: BenchmarkFileCfg = serde_json::from_str(&text)
        .map_err(|e| HeatGeoError::Parameter(format!("config {}: {e}", cfg_path.display())))?;
    if cfg.datasets.is_empty() {
        return Err(HeatGeoError::Parameter(
            "benchmark needs at least one dataset".to_string(),
        ));
    }
    if cfg.methods.is_empty() {
        return Err(HeatGeoError::Parameter(
            "benchmark needs at least one method".to_string(),
        ));
    }
    let out = args
        .output_dir
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let reps = cfg.repetitions.unwrap_or(5);

    if let Some(sweep) = &cfg.sweep {
        for ds in &cfg.datasets {
            run_sweep(ds, sweep, seed, &out)?;
        }
        return Ok(());
    }

    let cells: Vec<(BenchDataset, String)> = cfg
        .datasets
        .iter()
        .flat_map(|d| cfg.methods.iter().map(move |m| (d.clone(), m.clone())))
        .collect();

    // Worker pool over cells; output order follows the config order. A
    // failed cell is recorded and the run continues.
    let results: Vec<CellStats> = cells
        .par_iter()
        .map(|(ds, method)| {
            eprintln!("benchmark cell: {} / {method}", ds.name);
            match run_cell(ds, method, reps, seed, &cfg) {
                Ok(stats) => stats,
                Err(e) => CellStats {
                    dataset: ds.name.clone(),
                    noise: ds.noise.unwrap_or(0.0),
                    method: method.clone(),
                    pearson: (f64::NAN, f64::NAN),
                    spearman: (f64::NAN, f64::NAN),
                    frob: (f64::NAN, f64::NAN),
                    max: (f64::NAN, f64::NAN),
                    status: e.to_string(),
                },
            }
        })
        .collect();

    use std::io::Write;
    let mut table = std::io::BufWriter::new(std::fs::File::create(out.join("table.csv"))?);
    writeln!(
        table,
        "data,noise,method,pearson_mean,pearson_sd,spearman_mean,spearman_sd,frob_mean,frob_sd,max_mean,max_sd,status"
    )?;
    let mut rows = Vec::new();
    for c in &results {
        writeln!(
            table,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            c.dataset,
            c.noise,
            c.method,
            c.pearson.0,
            c.pearson.1,
            c.spearman.0,
            c.spearman.1,
            c.frob.0,
            c.frob.1,
            c.max.0,
            c.max.1,
            c.status
        )?;
        rows.push(json!({
            "data": c.dataset,
            "noise": c.noise,
            "method": c.method,
            "pearson_mean": c.pearson.0,
            "pearson_sd": c.pearson.1,
            "spearman_mean": c.spearman.0,
            "spearman_sd": c.spearman.1,
            "frob_mean": c.frob.0,
            "frob_sd": c.frob.1,
            "max_mean": c.max.0,
            "max_sd": c.max.1,
            "status": c.status,
        }));
    }
    drop(table);
    io::write_json(out.join("table.json"), &rows)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&rows).map_err(json_error)?
    );
    Ok(())
}
