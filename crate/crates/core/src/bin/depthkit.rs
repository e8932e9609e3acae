use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use depthkit::affine::{apply_affine, fit_global, fit_segmentwise, AffineModel};
use depthkit::bench::{rows_to_csv, run_bench, summary_table, BenchSpec};
use depthkit::depth::{sample_sparse, DepthMap, SegmentMap, SparseDepth};
use depthkit::io::{self, DepthFormat};
use depthkit::losses::{loss_breakdown, LossConfig, SsimConfig};
use depthkit::metrics::{evaluate_many, fmt_value, Aggregation, EvalItem, TableFormat, PRED_FLOOR};
use depthkit::scene::{generate_scene, RegionKind, SceneSpec};
use depthkit::segmentation::{segment_from_depth, segment_from_gray, Connectivity, SegmenterConfig};
use depthkit::synth::{generate_pair, AlphaMode, BetaMode, NoiseLevel, PairConfig, DEFAULT_CLAMP_FLOOR};

/// Depth-completion numerics toolkit.
#[derive(Parser)]
#[command(name = "depthkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (gt.pfm, labels.pgm, rel.pfm)
    Scenegen(ScenegenArgs),
    /// Segment a relative depth map or grayscale image
    Segment(SegmentArgs),
    /// Randomly sample sparse points from a dense map
    Sample(SampleArgs),
    /// Generate a synthetic training pair
    GenPair(GenPairArgs),
    /// Complete a relative map with a global or per-segment affine fit
    FitAffine(FitAffineArgs),
    /// Print evaluation metrics
    Evaluate(EvaluateArgs),
    /// Print MSE, SSIM and total loss
    Loss(LossArgs),
    /// Run the seeded sparsity sweep
    Bench(BenchArgs),
}

#[derive(Args)]
struct ScenegenArgs {
    /// TOML scene spec; flags below override it
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    regions: Option<usize>,
    #[arg(long)]
    kind: Option<KindArg>,
    #[arg(long)]
    rel_noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Constant,
    Planar,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegmentMode {
    Depth,
    Gray,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "depth")]
    mode: SegmentMode,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, default_value_t = 16)]
    min_pixels: usize,
    /// 4 or 8
    #[arg(long, default_value_t = 4)]
    connectivity: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaArg {
    Formula,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaArg {
    Uniform,
    Zero,
}

#[derive(Args)]
struct GenPairArgs {
    #[arg(long)]
    rel: PathBuf,
    #[arg(long)]
    seg: PathBuf,
    #[arg(long)]
    sparse: PathBuf,
    #[arg(long, value_enum, default_value = "formula")]
    alpha: AlphaArg,
    #[arg(long, value_enum, default_value = "uniform")]
    beta: BetaArg,
    /// Noise std in meters (default: 1% of the mean sparse depth)
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = depthkit::synth::DEFAULT_MAX_PASSES)]
    max_passes: usize,
    #[arg(long, default_value_t = DEFAULT_CLAMP_FLOOR)]
    clamp_floor: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMode {
    Global,
    Segment,
}

#[derive(Args)]
struct FitAffineArgs {
    #[arg(long, value_enum)]
    mode: FitMode,
    #[arg(long)]
    rel: PathBuf,
    #[arg(long)]
    sparse: PathBuf,
    #[arg(long)]
    seg: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Md,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Prediction file; repeat together with --gt for several images
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    #[arg(long)]
    seg: Vec<PathBuf>,
    /// Multiply SILog columns by 100
    #[arg(long)]
    scale100: bool,
    /// Pool pixels across images instead of averaging per image
    #[arg(long)]
    pool: bool,
    #[arg(long, value_delimiter = ',', default_value = "1.25,1.5625,1.953125")]
    taus: Vec<f64>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    #[arg(long, default_value_t = 11)]
    window: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    sparsity: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
}

fn read_depth(path: &Path, dims: Option<(usize, usize)>) -> Result<DepthMap> {
    let format = DepthFormat::from_path(path)?;
    io::read_depth(path, format, dims).with_context(|| format!("reading {}", path.display()))
}

fn write_depth(map: &DepthMap, path: &Path) -> Result<()> {
    let format = DepthFormat::from_path(path)?;
    io::write_depth(map, path, format).with_context(|| format!("writing {}", path.display()))
}

fn read_segments(path: &Path) -> Result<SegmentMap> {
    io::read_segments(path).with_context(|| format!("reading {}", path.display()))
}

fn scenegen(args: ScenegenArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SceneSpec::default(),
    };
    if let Some(v) = args.width {
        spec.width = v;
    }
    if let Some(v) = args.height {
        spec.height = v;
    }
    if let Some(v) = args.regions {
        spec.regions = v;
    }
    if let Some(k) = args.kind {
        spec.region_kind = match k {
            KindArg::Constant => RegionKind::Constant,
            KindArg::Planar => RegionKind::Planar,
        };
    }
    if let Some(v) = args.rel_noise {
        spec.rel_noise = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    let scene = generate_scene(&spec)?;
    fs::create_dir_all(&args.out_dir)?;
    write_depth(&scene.gt, &args.out_dir.join("gt.pfm"))?;
    write_depth(&scene.rel, &args.out_dir.join("rel.pfm"))?;
    io::write_segments(&scene.labels, &args.out_dir.join("labels.pgm"))?;
    let mut listing = String::from("region,row,col,rows,cols,a,b\n");
    for (k, (r, d)) in scene.rects.iter().zip(&scene.distortions).enumerate() {
        listing.push_str(&format!("{},{},{},{},{},{},{}\n", k + 1, r.row, r.col, r.rows, r.cols, d.a, d.b));
    }
    fs::write(args.out_dir.join("regions.csv"), listing)?;
    Ok(())
}

fn segment(args: SegmentArgs) -> Result<()> {
    let cfg = SegmenterConfig {
        join_threshold: args.threshold,
        min_segment_pixels: args.min_pixels,
        connectivity: match args.connectivity {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            c => bail!("connectivity must be 4 or 8, got {c}"),
        },
    };
    let seg = match args.mode {
        SegmentMode::Depth => segment_from_depth(&read_depth(&args.input, None)?, &cfg)?,
        SegmentMode::Gray => segment_from_gray(&io::read_gray(&args.input)?, &cfg)?,
    };
    log::info!("{} segments, {} gap pixels", seg.segment_count(), seg.gap_count());
    io::write_segments(&seg, &args.out)?;
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let gt = read_depth(&args.gt, None)?;
    let sparse = sample_sparse(&gt, args.n, args.seed);
    write_depth(sparse.as_depth(), &args.out)
}

fn gen_pair(args: GenPairArgs) -> Result<()> {
    let rel = read_depth(&args.rel, None)?;
    let seg = read_segments(&args.seg)?;
    let sparse = SparseDepth::new(read_depth(&args.sparse, Some(rel.dims()))?);
    let cfg = PairConfig {
        alpha_mode: match args.alpha {
            AlphaArg::Formula => AlphaMode::Formula,
            AlphaArg::Random => AlphaMode::Random,
        },
        beta_mode: match args.beta {
            BetaArg::Uniform => BetaMode::Uniform,
            BetaArg::Zero => BetaMode::Zero,
        },
        noise: args.sigma.map_or(NoiseLevel::default(), NoiseLevel::Absolute),
        seed: args.seed,
        clamp_floor: args.clamp_floor,
        max_passes: args.max_passes,
    };
    let pair = generate_pair(&rel, &seg, &sparse, &cfg)?;
    if pair.remaining_gaps > 0 {
        log::warn!("{} gap pixels remain after {} passes", pair.remaining_gaps, pair.fill_passes);
    }
    io::write_pair(&pair, &args.out_dir)?;
    Ok(())
}

fn fit_affine(args: FitAffineArgs) -> Result<()> {
    let rel = read_depth(&args.rel, None)?;
    let sparse = SparseDepth::new(read_depth(&args.sparse, Some(rel.dims()))?);
    let mut report = String::new();
    let pred = match args.mode {
        FitMode::Global => {
            let fit = fit_global(&rel, &sparse)?;
            report.push_str("mode = global\n\nlabel,a,b,status,points\n");
            report.push_str(&format!("all,{},{},{},{}\n", fit.params.a, fit.params.b, fit.status, fit.points));
            apply_affine(&rel, AffineModel::Global(fit.params), PRED_FLOOR)?
        }
        FitMode::Segment => {
            let Some(seg_path) = &args.seg else {
                bail!("--mode segment requires --seg");
            };
            let seg = read_segments(seg_path)?;
            let fits = fit_segmentwise(&rel, &seg, &sparse)?;
            report.push_str("mode = segment\n\nlabel,a,b,status,points\n");
            let f = fits.fallback;
            report.push_str(&format!("gap,{},{},{},{}\n", f.params.a, f.params.b, f.status, f.points));
            for s in &fits.segments {
                let p = s.fit.params;
                report.push_str(&format!("{},{},{},{},{}\n", s.label, p.a, p.b, s.fit.status, s.fit.points));
            }
            apply_affine(&rel, AffineModel::Segmentwise { fits: &fits, seg: &seg }, PRED_FLOOR)?
        }
    };
    write_depth(&pred, &args.out)?;
    match &args.report {
        Some(p) => fs::write(p, report)?,
        None => print!("{report}"),
    }
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    if args.pred.len() != args.gt.len() {
        bail!("got {} --pred but {} --gt", args.pred.len(), args.gt.len());
    }
    if !args.seg.is_empty() && args.seg.len() != args.gt.len() {
        bail!("--seg must be given once per --gt or not at all");
    }
    let mut maps = Vec::new();
    for (i, (p, g)) in args.pred.iter().zip(&args.gt).enumerate() {
        let gt = read_depth(g, None)?;
        let pred = read_depth(p, Some(gt.dims()))?;
        let seg = args.seg.get(i).map(|s| read_segments(s)).transpose()?;
        maps.push((pred, gt, seg));
    }
    let items: Vec<EvalItem> = maps.iter().map(|(p, g, s)| (p, g, s.as_ref())).collect();
    let mode = if args.pool { Aggregation::Pooled } else { Aggregation::PerImage };
    let report = evaluate_many(&items, &args.taus, mode)?;
    let format = match args.format {
        FormatArg::Table => TableFormat::Table,
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Md => TableFormat::Markdown,
    };
    print!("{}", report.render(format, args.scale100));
    Ok(())
}

fn loss(args: LossArgs) -> Result<()> {
    let target = read_depth(&args.target, None)?;
    let pred = read_depth(&args.pred, Some(target.dims()))?;
    let ssim = SsimConfig {
        window: args.window,
        ..SsimConfig::default()
    };
    let parts = loss_breakdown(&pred, &target, &LossConfig { lambda: args.lambda }, &ssim)?;
    println!("mse    {}", fmt_value(parts.mse));
    println!("ssim   {}", fmt_value(parts.ssim));
    println!("total  {}", fmt_value(parts.total));
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut spec: BenchSpec = match &args.spec {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => BenchSpec::default(),
    };
    if let Some(s) = args.seeds {
        spec.seeds = s;
    }
    if let Some(s) = args.sparsity {
        spec.sparsity = s;
    }
    if let Some(s) = args.seed {
        spec.scene.seed = s;
    }
    let rows = run_bench(&spec)?;
    fs::write(&args.out, rows_to_csv(&rows)).with_context(|| format!("writing {}", args.out.display()))?;
    print!("{}", summary_table(&rows));
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEPTHKIT_LOG", "warn")).init();
    match Cli::parse().command {
        Command::Scenegen(a) => scenegen(a),
        Command::Segment(a) => segment(a),
        Command::Sample(a) => sample(a),
        Command::GenPair(a) => gen_pair(a),
        Command::FitAffine(a) => fit_affine(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Loss(a) => loss(a),
        Command::Bench(a) => bench(a),
    }
}
