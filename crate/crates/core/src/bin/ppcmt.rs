//! Command-line front end.
//!
//! Every command prints its results to stdout as `key=value` lines and
//! diagnostics to stderr. Exit codes: 0 success, 1 usage error, 2 unreadable
//! or malformed input, 3 invalid values or failed checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ppcmt::config::{ModelConfig, Scale};
use ppcmt::io::{self, CloudFormat};
use ppcmt::metrics::{self, MetricKind, MetricReport, DEFAULT_ALPHA, DEFAULT_TAU};
use ppcmt::nn::ssm::{max_relative_diff, ssm_scan, ScanMode, SsmParams};
use ppcmt::nn::{Tensor, WeightStore};
use ppcmt::pca::{decompose, Strategy};
use ppcmt::pipeline::{self, Shape};
use ppcmt::{Error, PointCloud};

const OUTPUT_NOTE: &str = "Results are printed to stdout as one `key=value` pair per line; \
diagnostics go to stderr. Exit codes: 0 ok, 1 usage, 2 unreadable/malformed input, \
3 invalid values or failed checks. PPCMT_THREADS caps worker threads (0 = all cores).";

#[derive(Parser)]
#[command(name = "ppcmt", version, about = "Point-cloud decomposition, completion and metrics", after_help = OUTPUT_NOTE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a cloud into U balanced subsets (PCA sort + interleave, or random).
    Decompose(DecomposeArgs),
    /// Compare a prediction with a ground-truth cloud.
    Metrics(MetricsArgs),
    /// Run the completion network on one cloud.
    Complete(CompleteArgs),
    /// Sample a synthetic shape, optionally cropped from a viewpoint.
    Synth(SynthArgs),
    /// Uniformity of a cloud at one or more neighbourhood sizes.
    Uniformity(UniformityArgs),
    /// Consistency over the clouds of a directory, in file-name order.
    SequenceMetrics(SequenceArgs),
    /// Minimal matching distance of an output against reference clouds.
    Mmd(MmdArgs),
    /// Timing and agreement checks.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Write freshly initialised weights for a config.
    InitWeights(InitWeightsArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    subsets: usize,
    /// `pca` or `random`.
    #[arg(long, default_value = "pca")]
    strategy: String,
    /// Seed for the random strategy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Files are written as `<prefix>_1.<ext>` .. `<prefix>_U.<ext>`.
    #[arg(long)]
    out_prefix: String,
    /// `xyz` or `pcf`.
    #[arg(long, default_value = "xyz")]
    format: String,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Comma-separated subset of cd,dcd,emd,fscore.
    #[arg(long, default_value = "cd,dcd,emd,fscore")]
    which: String,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// `none`, or `unit-sphere` to centre both clouds on the ground truth
    /// and scale its farthest point to radius 1.
    #[arg(long, default_value = "none")]
    normalize: String,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    input: PathBuf,
    /// TOML config file, or the built-in `desk` / `paper`.
    #[arg(long)]
    config: String,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write seeds, candidates, parts and stage features here.
    #[arg(long)]
    dump_stages: Option<PathBuf>,
    /// Resample the input to the configured size instead of failing.
    #[arg(long)]
    fit: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// sphere, cuboid, cylinder or torus.
    #[arg(long)]
    shape: String,
    #[arg(long)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Remove this fraction of points nearest to a viewpoint.
    #[arg(long)]
    crop_fraction: Option<f64>,
    /// Viewpoint `x,y,z`; drawn on the unit sphere from the seed if absent.
    #[arg(long, requires = "crop_fraction")]
    viewpoint: Option<String>,
    /// Where to write the removed points.
    #[arg(long, requires = "crop_fraction")]
    missing_out: Option<PathBuf>,
}

#[derive(Args)]
struct UniformityArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated neighbourhood fractions.
    #[arg(long, default_value = "0.004,0.006,0.008,0.01,0.012")]
    p: String,
    /// Number of FPS seeds.
    #[arg(long, default_value_t = 1000)]
    seeds: usize,
}

#[derive(Args)]
struct SequenceArgs {
    #[arg(long)]
    dir: PathBuf,
}

#[derive(Args)]
struct MmdArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    reference_dir: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Sequential recurrence vs parallel scan on random parameters.
    Scan {
        #[arg(long, default_value_t = 4096)]
        length: usize,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long, default_value_t = 16)]
        states: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct InitWeightsArgs {
    /// TOML config file, or the built-in `desk` / `paper`.
    #[arg(long)]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = ppcmt::parallel::pool_from_env();
    match pool.install(|| run(cli.command)) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

type Lines = Vec<String>;

fn kv(key: &str, value: impl std::fmt::Display) -> String {
    format!("{key}={value}")
}

fn load_config(arg: &str) -> ppcmt::Result<ModelConfig> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(scale) = arg.parse::<Scale>() {
            return Ok(ModelConfig::new(scale));
        }
    }
    io::read_config(path)
}

fn parse_list(s: &str) -> ppcmt::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{t}` is not a number")))
        })
        .collect()
}

fn cloud_files(dir: &Path) -> ppcmt::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("xyz") | Some("pcf")
                )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn run(cmd: Command) -> ppcmt::Result<Lines> {
    match cmd {
        Command::Decompose(a) => run_decompose(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Complete(a) => run_complete(a),
        Command::Synth(a) => run_synth(a),
        Command::Uniformity(a) => {
            let cloud = io::read_cloud(&a.input)?;
            let mut out = vec![kv("points", cloud.len()), kv("seeds", a.seeds)];
            for p in parse_list(&a.p)? {
                out.push(kv(
                    &format!("uniformity_p{p}"),
                    metrics::uniformity(&cloud, p, a.seeds)?,
                ));
            }
            Ok(out)
        }
        Command::SequenceMetrics(a) => {
            let files = cloud_files(&a.dir)?;
            let frames = files
                .iter()
                .map(io::read_cloud)
                .collect::<ppcmt::Result<Vec<_>>>()?;
            Ok(vec![
                kv("frames", frames.len()),
                kv("consistency", metrics::consistency(&frames)?),
            ])
        }
        Command::Mmd(a) => {
            let output = io::read_cloud(&a.output)?;
            let files = cloud_files(&a.reference_dir)?;
            let refs = files
                .iter()
                .map(io::read_cloud)
                .collect::<ppcmt::Result<Vec<_>>>()?;
            let m = metrics::mmd(&output, &refs)?;
            Ok(vec![
                kv("references", refs.len()),
                kv("mmd", m.value),
                kv("best_index", m.best_index),
                kv("best_file", files[m.best_index].display()),
            ])
        }
        Command::Bench { which } => match which {
            BenchCommand::Scan {
                length,
                channels,
                states,
                runs,
                seed,
            } => run_bench_scan(length, channels, states, runs, seed),
        },
        Command::InitWeights(a) => {
            let mut cfg = load_config(&a.config)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let w = WeightStore::init(&cfg, cfg.seed)?;
            io::write_weights(&a.out, &w)?;
            Ok(vec![
                kv("tensors", w.len()),
                kv("values", w.iter().map(|(_, t)| t.len()).sum::<usize>()),
                kv("seed", cfg.seed),
                kv("out", a.out.display()),
            ])
        }
    }
}

fn run_decompose(a: DecomposeArgs) -> ppcmt::Result<Lines> {
    let cloud = io::read_cloud(&a.input)?;
    let strategy: Strategy = a.strategy.parse()?;
    let (format, ext) = match a.format.as_str() {
        "xyz" => (CloudFormat::Xyz, "xyz"),
        "pcf" => (CloudFormat::Pcf, "pcf"),
        other => return Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
    };
    let d = decompose(&cloud, a.subsets, strategy, a.seed)?;
    let mut out = vec![
        kv("points", cloud.len()),
        kv("subsets", a.subsets),
        kv("strategy", &a.strategy),
    ];
    for (i, subset) in d.subsets.iter().enumerate() {
        let path = format!("{}_{}.{ext}", a.out_prefix, i + 1);
        io::write_cloud(&path, subset, format)?;
        out.push(kv(&format!("size_{}", i + 1), subset.len()));
        out.push(kv(&format!("file_{}", i + 1), path));
    }
    Ok(out)
}

fn run_metrics(a: MetricsArgs) -> ppcmt::Result<Lines> {
    let mut pred = io::read_cloud(&a.pred)?;
    let mut gt = io::read_cloud(&a.gt)?;
    let which = a
        .which
        .split(',')
        .map(str::parse::<MetricKind>)
        .collect::<ppcmt::Result<Vec<_>>>()?;
    match a.normalize.as_str() {
        "none" => {}
        "unit-sphere" => (pred, gt) = metrics::normalize_unit_sphere(&pred, &gt)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown normalisation `{other}`"
            )))
        }
    }
    let report = MetricReport::evaluate(&pred, &gt, &which, a.tau, a.alpha)?;
    let mut out = report.to_kv_lines();
    out.push(kv("normalize", &a.normalize));
    Ok(out)
}

fn run_complete(a: CompleteArgs) -> ppcmt::Result<Lines> {
    let cfg = load_config(&a.config)?;
    cfg.validate()?;
    let weights = io::load_weights(&a.weights, &cfg)?;
    let mut cloud = io::read_cloud(&a.input)?;
    if a.fit && cloud.len() != cfg.input_points {
        cloud = pipeline::fit_to_size(&cloud, cfg.input_points)?;
    }
    let result = if a.dump_stages.is_some() {
        pipeline::complete_traced(&cloud, &cfg, &weights)?
    } else {
        pipeline::complete(&cloud, &cfg, &weights)?
    };
    io::write_cloud(&a.out, &result.output, CloudFormat::from_path(&a.out))?;
    let mut out = vec![
        kv("input_points", cloud.len()),
        kv("output_points", result.output.len()),
        kv("seeds", result.seeds.len()),
        kv("parts", result.parts.len()),
        kv("out", a.out.display()),
    ];
    if let Some(dir) = a.dump_stages {
        fs::create_dir_all(&dir)?;
        io::write_cloud(dir.join("seeds.xyz"), &result.seeds, CloudFormat::Xyz)?;
        io::write_cloud(
            dir.join("candidates.xyz"),
            &result.candidates,
            CloudFormat::Xyz,
        )?;
        for (i, p) in result.parts.iter().enumerate() {
            io::write_cloud(dir.join(format!("part_{}.xyz", i + 1)), p, CloudFormat::Xyz)?;
        }
        if let Some(st) = result.stages {
            let centers = PointCloud::new(st.proxies.centers.clone())?;
            io::write_cloud(dir.join("centers.xyz"), &centers, CloudFormat::Xyz)?;
            let mut store = WeightStore::new();
            store.insert("pointnet", st.proxies.features);
            store.insert("encoder", st.encoded.features);
            store.insert("seed_features", st.seed_features);
            store.insert("decoder", st.decoded);
            io::write_weights(dir.join("features.pwt"), &store)?;
        }
        out.push(kv("stages", dir.display()));
    }
    Ok(out)
}

fn run_synth(a: SynthArgs) -> ppcmt::Result<Lines> {
    let shape: Shape = a.shape.parse()?;
    let cloud = pipeline::synth_shape(shape, a.points, a.seed)?;
    let fmt = CloudFormat::from_path(&a.out);
    let mut out = vec![kv("shape", &a.shape), kv("points", cloud.len())];
    match a.crop_fraction {
        None => io::write_cloud(&a.out, &cloud, fmt)?,
        Some(f) => {
            let (partial, missing) = match &a.viewpoint {
                Some(v) => {
                    let c = parse_list(v)?;
                    if c.len() != 3 {
                        return Err(Error::InvalidArgument("viewpoint needs x,y,z".into()));
                    }
                    pipeline::crop_from(&cloud, f, [c[0], c[1], c[2]])?
                }
                None => pipeline::crop_viewpoint(&cloud, f, a.seed)?,
            };
            io::write_cloud(&a.out, &partial, fmt)?;
            if let Some(m) = &a.missing_out {
                io::write_cloud(m, &missing, CloudFormat::from_path(m))?;
            }
            out.push(kv("partial", partial.len()));
            out.push(kv("missing", missing.len()));
        }
    }
    out.push(kv("out", a.out.display()));
    Ok(out)
}

fn run_bench_scan(
    length: usize,
    channels: usize,
    states: usize,
    runs: usize,
    seed: u64,
) -> ppcmt::Result<Lines> {
    if length == 0 || channels == 0 || states == 0 || runs == 0 {
        return Err(Error::InvalidArgument(
            "length, channels, states and runs must be positive".into(),
        ));
    }
    let (params, x) = SsmParams::random(length, channels, states, seed);
    let time = |mode| -> ppcmt::Result<(f64, Tensor)> {
        let mut best = f64::INFINITY;
        let mut y = None;
        for _ in 0..runs {
            let t = Instant::now();
            let out = ssm_scan(&params, &x, mode)?;
            best = best.min(t.elapsed().as_secs_f64() * 1e3);
            y = Some(out);
        }
        Ok((best, y.unwrap()))
    };
    let (seq_ms, seq) = time(ScanMode::Sequential)?;
    let (par_ms, par) = time(ScanMode::Parallel)?;
    let diff = max_relative_diff(&seq, &par);
    let lines = vec![
        kv("length", length),
        kv("channels", channels),
        kv("states", states),
        kv("runs", runs),
        kv("threads", rayon::current_num_threads()),
        kv("sequential_ms", format!("{seq_ms:.3}")),
        kv("parallel_ms", format!("{par_ms:.3}")),
        kv("max_rel_diff", format!("{diff:e}")),
        kv("within_tolerance", diff <= 1e-5),
    ];
    if diff > 1e-5 {
        for l in &lines {
            println!("{l}");
        }
        return Err(Error::InvalidArgument(format!(
            "parallel scan differs by {diff}"
        )));
    }
    Ok(lines)
}
