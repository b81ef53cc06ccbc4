use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use serde_json::json;

use freqaug::blending::{continuous_mask, grid_mask, MaskKind, MaskParams};
use freqaug::error::{Error, Result};
use freqaug::filters::{sample_filter_spec, ButterworthParams, ChannelFilter, FilterSpec, SpectralSource};
use freqaug::losses::{self, PredictionBatch, TargetBatch};
use freqaug::pipeline::{self, ImageSize, RunConfig};
use freqaug::rng::Substream;
use freqaug::saliency::{image_saliency, GaussianKernel};
use freqaug::{bench, io, npy, synthetic, Field};

#[derive(Parser, Debug)]
#[command(name = "freqaug", version, about = "Seeded frequency-domain augmentation for segmentation datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augment a dataset: K blended views per image, saliency targets, labels, manifest.
    Augment(AugmentArgs),
    /// Filter one image with explicit or sampled channel-wise parameters.
    Filter(FilterArgs),
    /// Blend two freshly filtered variants of one image.
    Blend(BlendArgs),
    /// Compute the structure saliency target of one image.
    Saliency(SaliencyArgs),
    /// Render a montage of manifest records.
    Preview(PreviewArgs),
    /// Measure augmentation throughput on synthetic images.
    Bench(BenchArgs),
    /// Evaluate loss values on tensor files.
    Losses(LossesArgs),
    /// Recompute one manifest record and compare hashes.
    Replay(ReplayArgs),
    /// Write a synthetic image/label dataset.
    Fixture(FixtureArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Structured config file (TOML); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Augmented views per image per epoch.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    epochs: Option<u32>,
    /// Lower cutoff bound as a fraction of the spectrum radius.
    #[arg(long)]
    d0_min: Option<f64>,
    /// Upper cutoff bound as a fraction of the spectrum radius.
    #[arg(long)]
    d0_max: Option<f64>,
    /// Allowed filter orders, comma separated subset of 1,2,3.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u32>>,
    #[arg(long, value_parser = parse_mask)]
    mask: Option<MaskKind>,
    /// Grid mask cell size in pixels.
    #[arg(long)]
    cell: Option<usize>,
    /// Target size WxH.
    #[arg(long, value_parser = parse_size)]
    size: Option<ImageSize>,
    /// Keep images at their decoded size instead of resizing.
    #[arg(long)]
    native_size: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_mask(s: &str) -> std::result::Result<MaskKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_size(s: &str) -> std::result::Result<ImageSize, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        let a = &mut cfg.augment;
        if let Some(v) = self.seed {
            a.seed = v;
        }
        if let Some(v) = self.k {
            a.k = v;
        }
        if let Some(v) = self.epochs {
            a.epochs = v;
        }
        if let Some(v) = self.d0_min {
            a.filter.d0_min = v;
        }
        if let Some(v) = self.d0_max {
            a.filter.d0_max = v;
        }
        if let Some(v) = &self.orders {
            a.filter.orders = v.clone();
        }
        if let Some(v) = self.mask {
            a.mask = v;
        }
        if let Some(v) = self.cell {
            a.grid_cell = Some(v);
        }
        if let Some(v) = self.size {
            a.size = v;
        }
        if self.native_size {
            a.resize = pipeline::ResizePolicy::Native;
        }
        if let Some(v) = self.alpha {
            a.alpha = v;
        }
        if let Some(v) = self.workers {
            if v == 0 {
                return Err(Error::Config("workers must be at least 1".into()));
            }
            cfg.workers = v;
        }
        cfg.augment.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Directory of source images.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory of label maps, paired with images by file stem.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cutoff fractions, one shared value or one per channel.
    #[arg(long, value_delimiter = ',')]
    d0: Option<Vec<f64>>,
    /// Butterworth orders, one shared value or one per channel.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<u32>>,
    /// Use the ideal (hard cutoff) filter instead of Butterworth.
    #[arg(long)]
    ideal: bool,
    /// Also write the field before renormalization as NPY.
    #[arg(long)]
    residual: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct BlendArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Continuous-mask center as X,Y (column, row).
    #[arg(long, value_delimiter = ',')]
    center: Option<Vec<usize>>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SaliencyArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output NPY file with a (C, H, W) float32 array.
    #[arg(long)]
    out: PathBuf,
    /// Affinely mapped PNG preview.
    #[arg(long)]
    preview: Option<PathBuf>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct PreviewArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    images: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct LossesArgs {
    /// Saliency target, (C, H, W).
    #[arg(long)]
    sal_target: PathBuf,
    /// Saliency predictions, (K, C, H, W) or (C, H, W).
    #[arg(long)]
    sal_pred: PathBuf,
    /// Segmentation probabilities, (K, classes, H, W) or (classes, H, W).
    #[arg(long)]
    seg_pred: Option<PathBuf>,
    /// Labels: one-hot (classes, H, W) or class indices (H, W).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = losses::DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Zero-based manifest line.
    #[arg(long, conflicts_with_all = ["parent", "view"])]
    line: Option<usize>,
    #[arg(long, requires = "view")]
    parent: Option<String>,
    #[arg(long, requires = "parent")]
    view: Option<u32>,
    #[arg(long, default_value_t = 0)]
    epoch: u32,
    /// Write the recomputed view here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    size: ImageSize,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Augment(a) => augment(a),
        Command::Filter(a) => filter(a),
        Command::Blend(a) => blend(a),
        Command::Saliency(a) => saliency(a),
        Command::Preview(a) => preview(a),
        Command::Bench(a) => run_bench(a),
        Command::Losses(a) => run_losses(a),
        Command::Replay(a) => replay(a),
        Command::Fixture(a) => fixture(a),
    }
}

fn print_json(value: &impl serde::Serialize) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("serializable");
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn augment(args: AugmentArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    cfg.input_dir = args.input.or(cfg.input_dir);
    cfg.label_dir = args.labels.or(cfg.label_dir);
    cfg.out_dir = args.out.or(cfg.out_dir);
    let input = cfg
        .input_dir
        .as_deref()
        .ok_or_else(|| Error::Config("--input is required".into()))?;
    let out = cfg
        .out_dir
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required".into()))?;
    let ingested = pipeline::ingest(input, cfg.label_dir.as_deref())?;
    let records = pipeline::augment_epoch(&ingested.pairs, &cfg.augment, out, cfg.workers)?;
    print_json(&json!({
        "images": ingested.pairs.len(),
        "records": records.len(),
        "warnings": ingested.warnings,
        "manifest": out.join(pipeline::MANIFEST_FILE),
    }));
    Ok(())
}

fn load_prepared(path: &Path, common: &CommonArgs) -> Result<freqaug::Image> {
    let img = io::load_image(path)?;
    // Single-image commands keep native size unless --size is given.
    match common.size {
        Some(size) => io::resize_image(&img, size.height, size.width),
        None => Ok(img),
    }
}

fn broadcast<T: Copy>(values: &[T], n: usize, what: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(Error::Config(format!(
            "{what} has {len} values; expected 1 or {n}"
        ))),
    }
}

fn filter(args: FilterArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let img = load_prepared(&args.input, &args.common)?;
    let channels = img.channels();
    let spec = match (&args.d0, args.ideal) {
        (Some(d0), true) => FilterSpec::new(
            d0.iter()
                .map(|&d| ChannelFilter::ideal(d))
                .collect::<Result<Vec<_>>>()?,
        )?,
        (Some(d0), false) => {
            let n = d0.len().max(args.order.as_ref().map_or(1, Vec::len));
            let d0 = broadcast(d0, n, "--d0")?;
            let orders = broadcast(args.order.as_deref().unwrap_or(&[2]), n, "--order")?;
            FilterSpec::new(
                d0.into_iter()
                    .zip(orders)
                    .map(|(d, o)| ButterworthParams::new(d, o).map(ChannelFilter::butterworth))
                    .collect::<Result<Vec<_>>>()?,
            )?
        }
        (None, true) => return Err(Error::Config("--ideal needs --d0".into())),
        (None, false) => {
            let substream = Substream {
                seed: cfg.augment.seed,
                epoch: 0,
                image_index: 0,
                view_index: 0,
            };
            sample_filter_spec(&mut substream.rng(), channels, &cfg.augment.filter)?
        }
    };
    if spec.per_channel().len() != 1 && spec.per_channel().len() != channels {
        return Err(Error::Config(format!(
            "{} filters given for a {channels}-channel image",
            spec.per_channel().len()
        )));
    }
    let source = SpectralSource::new(&img, stem(&args.input))?;
    if let Some(path) = &args.residual {
        npy::write_field(path, &source.residual(&spec)?.0)?;
    }
    let sample = source.filter(&spec)?;
    io::save_png(&args.out, &sample.image)?;
    if sample.report.any_degenerate() {
        warn!("one or more channels were flat after filtering and map to zeros");
    }
    print_json(&json!({ "spec": sample.spec, "report": sample.report }));
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image")
        .to_owned()
}

fn blend(args: BlendArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let img = load_prepared(&args.input, &args.common)?;
    let (h, w, c) = img.shape();
    let substream = Substream {
        seed: cfg.augment.seed,
        epoch: 0,
        image_index: 0,
        view_index: 0,
    };
    let mut plan = pipeline::plan_view(&substream, c, h, w, &cfg.augment)?;
    if let Some(center) = &args.center {
        if cfg.augment.mask != MaskKind::Continuous {
            return Err(Error::Config("--center applies to the continuous mask".into()));
        }
        let [x, y] = center[..] else {
            return Err(Error::Config("--center takes X,Y".into()));
        };
        plan.mask = *continuous_mask(h, w, (x, y))?.params();
    }
    if let MaskParams::Grid { cell } = plan.mask {
        plan.mask = *grid_mask(h, w, cell)?.params();
    }
    let source = SpectralSource::new(&img, stem(&args.input))?;
    let view = pipeline::render_view(&source, &plan)?;
    io::save_png(&args.out, &view.blended)?;
    print_json(&json!({ "plan": plan, "image_sha256": io::image_hash(&view.blended) }));
    Ok(())
}

fn saliency(args: SaliencyArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let img = load_prepared(&args.input, &args.common)?;
    let kernel = match (args.radius, args.sigma) {
        (None, None) => cfg.augment.kernel.kernel_for(img.height(), img.width())?,
        (Some(r), sigma) => GaussianKernel::new(r, sigma.unwrap_or(r as f64 / 3.0))?,
        (None, Some(_)) => return Err(Error::Config("--sigma needs --radius".into())),
    };
    let sal = image_saliency(&img, &kernel)?;
    npy::write_field(&args.out, &sal)?;
    if let Some(p) = &args.preview {
        io::save_png(p, &sal.to_unit_range())?;
    }
    print_json(&json!({
        "shape": [sal.channels(), sal.height(), sal.width()],
        "radius": kernel.radius(),
        "sigma": kernel.sigma(),
        "sha256": io::field_hash(&sal),
    }));
    Ok(())
}

fn preview(args: PreviewArgs) -> Result<()> {
    let records = pipeline::read_manifest(&args.manifest)?;
    let montage = pipeline::preview(&records, args.n)?;
    io::save_png(&args.out, &montage)?;
    print_json(&json!({
        "rows": montage.height() / records[0].size.height,
        "width": montage.width(),
        "height": montage.height(),
        "tiles": ["original", "filtered_m", "filtered_n", "mask", "blended", "saliency"],
    }));
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let config = bench::BenchConfig {
        n_images: args.images,
        repetitions: args.reps,
        workers: args
            .common
            .workers
            .unwrap_or_else(|| bench::BenchConfig::default().workers),
        channels: args.channels,
        augment: cfg.augment,
    };
    let report = bench::bench(&config)?;
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&report).expect("serializable");
        std::fs::write(path, text + "\n").map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    print_json(&report);
    Ok(())
}

fn class_map_to_one_hot(indices: &Field, classes: usize) -> Result<Field> {
    let mut out = Field::zeros(indices.height(), indices.width(), classes);
    for (i, &v) in indices.plane(0).iter().enumerate() {
        if v < 0.0 || v.fract() != 0.0 || v as usize >= classes {
            return Err(Error::InvalidInput(format!(
                "label value {v} at pixel {i} is not a class index below {classes}"
            )));
        }
        out.plane_mut(v as usize)[i] = 1.0;
    }
    Ok(out)
}

fn run_losses(args: LossesArgs) -> Result<()> {
    let saliency = npy::read(&args.sal_target)?.into_field()?;
    let sal_views = npy::read(&args.sal_pred)?.into_views()?;
    let segmentation = match &args.seg_pred {
        Some(p) => npy::read(p)?.into_views()?,
        None => Vec::new(),
    };
    let labels = match &args.labels {
        Some(p) => {
            let t = npy::read(p)?;
            Some(if t.shape.len() == 2 {
                let classes = segmentation
                    .first()
                    .map(Field::channels)
                    .ok_or_else(|| Error::Config("class-index labels need --seg-pred".into()))?;
                class_map_to_one_hot(&t.into_field()?, classes)?
            } else {
                t.into_field()?
            })
        }
        None => None,
    };
    if segmentation.is_empty() != labels.is_none() {
        return Err(Error::Config(
            "--seg-pred and --labels must be given together".into(),
        ));
    }
    let preds = PredictionBatch {
        saliency: sal_views,
        segmentation,
    };
    let target = TargetBatch { saliency, labels };
    print_json(&losses::evaluate(&preds, &target, args.alpha)?);
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let records = pipeline::read_manifest(&args.manifest)?;
    let record = match (args.line, &args.parent, args.view) {
        (Some(line), _, _) => records.get(line).ok_or_else(|| {
            Error::Config(format!(
                "line {line} is past the end of a {}-record manifest",
                records.len()
            ))
        })?,
        (None, Some(parent), Some(view)) => records
            .iter()
            .find(|r| &r.parent_id == parent && r.view_index == view && r.epoch == args.epoch)
            .ok_or_else(|| {
                Error::Config(format!(
                    "no record for parent `{parent}`, epoch {}, view {view}",
                    args.epoch
                ))
            })?,
        _ => return Err(Error::Config("give --line or --parent with --view".into())),
    };
    let result = pipeline::replay(record)?;
    if let Some(out) = &args.out {
        io::save_png(out, &result.view.blended)?;
    }
    let matches = result.matches(record);
    print_json(&json!({
        "parent_id": record.parent_id,
        "epoch": record.epoch,
        "view_index": record.view_index,
        "image_sha256": result.image_sha256,
        "saliency_sha256": result.saliency_sha256,
        "matches": matches,
    }));
    if matches {
        Ok(())
    } else {
        Err(Error::Data {
            path: args.manifest,
            message: format!(
                "replay of {} view {} does not reproduce the recorded hash",
                record.parent_id, record.view_index
            ),
        })
    }
}

fn fixture(args: FixtureArgs) -> Result<()> {
    let images = args.out.join("images");
    let labels = args.out.join("labels");
    for dir in [&images, &labels] {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
    }
    for i in 0..args.n {
        let fx = synthetic::fixture(
            args.seed.wrapping_add(i as u64),
            args.size.height,
            args.size.width,
            args.channels,
        );
        let name = format!("fixture{i:03}.png");
        io::save_png(&images.join(&name), &fx.image)?;
        io::save_labels(&labels.join(&name), &fx.labels)?;
    }
    print_json(&json!({ "images": args.n, "dir": args.out }));
    Ok(())
}
