//! Dataset ingestion and seeded end-to-end augmentation.
//!
//! For every source image the pipeline writes K blended views per epoch, one
//! saliency target computed from the resized *original* image, and a copy of
//! its label map. One manifest line per view records everything needed to
//! replay that view bit for bit.
//!
//! Augmented views are training inputs only. Inference runs on original,
//! un-augmented images.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::blending::{
    blend, default_grid_cell, grid_mask, patch_mask, random_continuous_mask, BlendMask, MaskKind,
    MaskParams, DEFAULT_PATCH_AREA,
};
use crate::error::{Error, Result};
use crate::filters::{sample_filter_spec, FilterSpec, FilteredSample, ParamRanges, SpectralSource};
use crate::image::{Field, Image};
use crate::io::{self, LabelMap};
use crate::losses::{check_alpha, DEFAULT_ALPHA};
use crate::rng::Substream;
use crate::saliency::{image_saliency, GaussianKernel, KernelRule};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

impl Default for ImageSize {
    fn default() -> Self {
        ImageSize {
            width: 512,
            height: 512,
        }
    }
}

impl std::str::FromStr for ImageSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::config(format!("size `{s}` is not of the form WxH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::config(format!("size `{s}` is not of the form WxH")))
        };
        Ok(ImageSize {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

impl TryFrom<String> for ImageSize {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ImageSize> for String {
    fn from(s: ImageSize) -> String {
        s.to_string()
    }
}

impl std::fmt::Display for ImageSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResizePolicy {
    /// Images bilinear, labels nearest-neighbor, to the configured size.
    #[default]
    Bilinear,
    /// Keep each image at its decoded size.
    Native,
}

/// Everything that determines the augmentation output, independent of where
/// files live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub seed: u64,
    pub k: u32,
    pub epochs: u32,
    pub filter: ParamRanges,
    pub mask: MaskKind,
    pub patch_area: (f64, f64),
    /// Grid cell in pixels; `ceil(min(H, W) / 8)` when unset.
    pub grid_cell: Option<usize>,
    pub size: ImageSize,
    pub resize: ResizePolicy,
    pub kernel: KernelRule,
    pub alpha: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            seed: 0,
            k: 10,
            epochs: 1,
            filter: ParamRanges::default(),
            mask: MaskKind::Continuous,
            patch_area: DEFAULT_PATCH_AREA,
            grid_cell: None,
            size: ImageSize::default(),
            resize: ResizePolicy::Bilinear,
            kernel: KernelRule::default(),
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        self.filter.validate()?;
        self.kernel.validate()?;
        check_alpha(self.alpha)?;
        if self.size.width < 8 || self.size.height < 8 {
            return Err(Error::config(format!(
                "target size {} is below 8x8",
                self.size
            )));
        }
        let (lo, hi) = self.patch_area;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::config(format!(
                "patch area range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
            )));
        }
        if self.grid_cell == Some(0) {
            return Err(Error::config("grid cell must be at least 1"));
        }
        Ok(())
    }
}

/// Full run configuration: augmentation settings plus locations and workers.
///
/// In a config file the location keys (`input_dir`, `label_dir`, `out_dir`,
/// `workers`) sit at top level next to the augmentation keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_dir: Option<PathBuf>,
    pub label_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
    pub augment: AugmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_dir: None,
            label_dir: None,
            out_dir: None,
            workers: 1,
            augment: AugmentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let mut path = |key: &str| -> Result<Option<PathBuf>> {
            match table.remove(key) {
                None => Ok(None),
                Some(toml::Value::String(s)) => Ok(Some(PathBuf::from(s))),
                Some(other) => Err(Error::config(format!(
                    "`{key}` must be a string, got {other}"
                ))),
            }
        };
        let input_dir = path("input_dir")?;
        let label_dir = path("label_dir")?;
        let out_dir = path("out_dir")?;
        let workers = match table.remove("workers") {
            None => 1,
            Some(toml::Value::Integer(n)) if n >= 1 => n as usize,
            Some(other) => {
                return Err(Error::config(format!(
                    "`workers` must be a positive integer, got {other}"
                )))
            }
        };
        let augment = AugmentConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(RunConfig {
            input_dir,
            label_dir,
            out_dir,
            workers,
            augment,
        })
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

/// One decoded source image with its optional label map.
#[derive(Debug, Clone)]
pub struct SourcePair {
    pub id: String,
    pub image_path: PathBuf,
    pub image: Image,
    pub label_path: Option<PathBuf>,
    pub labels: Option<LabelMap>,
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub pairs: Vec<SourcePair>,
    pub warnings: Vec<String>,
}

fn list_supported(dir: &Path) -> Result<BTreeMap<String, Vec<PathBuf>>> {
    let mut by_stem: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !io::is_supported(&path) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            by_stem.entry(stem.to_owned()).or_default().push(path);
        }
    }
    for paths in by_stem.values_mut() {
        paths.sort();
    }
    Ok(by_stem)
}

/// Decodes every supported image in `image_dir`, pairing labels from
/// `label_dir` by file stem, in lexicographic stem order.
///
/// Unreadable images are skipped with a warning. A label whose size differs
/// from its image is an error.
pub fn ingest(image_dir: &Path, label_dir: Option<&Path>) -> Result<Ingested> {
    let images = list_supported(image_dir)?;
    let labels = match label_dir {
        Some(dir) => list_supported(dir)?,
        None => BTreeMap::new(),
    };
    let mut out = Ingested::default();
    for (stem, paths) in images {
        let mut note = |msg: String| {
            warn!("{msg}");
            out.warnings.push(msg);
        };
        if paths.len() > 1 {
            note(format!(
                "several images share stem `{stem}`; using {}",
                paths[0].display()
            ));
        }
        let image_path = canonical(&paths[0]);
        let image = match io::load_image(&image_path) {
            Ok(img) => img,
            Err(e) => {
                note(format!("skipping {}: {e}", image_path.display()));
                continue;
            }
        };
        let (label_path, label_map) = match labels.get(&stem) {
            Some(lp) => {
                let lp = canonical(&lp[0]);
                let map = io::load_labels(&lp)?;
                if map.height != image.height() || map.width != image.width() {
                    return Err(Error::data(
                        &lp,
                        format!(
                            "label is {}x{} but image {} is {}x{}",
                            map.width,
                            map.height,
                            image_path.display(),
                            image.width(),
                            image.height()
                        ),
                    ));
                }
                (Some(lp), Some(map))
            }
            None => {
                if label_dir.is_some() {
                    note(format!("no label found for `{stem}`"));
                }
                (None, None)
            }
        };
        out.pairs.push(SourcePair {
            id: stem,
            image_path,
            image,
            label_path,
            labels: label_map,
        });
    }
    if out.pairs.is_empty() {
        let msg = format!("no usable images in {}", image_dir.display());
        warn!("{msg}");
        out.warnings.push(msg);
    }
    Ok(out)
}

fn canonical(path: &Path) -> PathBuf {
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

/// Applies the resize policy to an image.
pub fn prepare_image(img: &Image, config: &AugmentConfig) -> Result<Image> {
    match config.resize {
        ResizePolicy::Bilinear => io::resize_image(img, config.size.height, config.size.width),
        ResizePolicy::Native => Ok(img.clone()),
    }
}

pub fn prepare_labels(labels: &LabelMap, config: &AugmentConfig) -> LabelMap {
    match config.resize {
        ResizePolicy::Bilinear => io::resize_labels(labels, config.size.height, config.size.width),
        ResizePolicy::Native => labels.clone(),
    }
}

/// Randomly drawn parameters of one augmented view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPlan {
    pub filter_m: FilterSpec,
    pub filter_n: FilterSpec,
    pub mask: MaskParams,
}

/// Draws a view's parameters from its substream: filter m, filter n, then mask.
pub fn plan_view(
    substream: &Substream,
    channels: usize,
    height: usize,
    width: usize,
    config: &AugmentConfig,
) -> Result<ViewPlan> {
    let mut rng = substream.rng();
    let filter_m = sample_filter_spec(&mut rng, channels, &config.filter)?;
    let filter_n = sample_filter_spec(&mut rng, channels, &config.filter)?;
    let mask = match config.mask {
        MaskKind::Continuous => random_continuous_mask(&mut rng, height, width)?,
        MaskKind::Patch => patch_mask(&mut rng, height, width, config.patch_area)?,
        MaskKind::Grid => grid_mask(
            height,
            width,
            config
                .grid_cell
                .unwrap_or_else(|| default_grid_cell(height, width)),
        )?,
    };
    Ok(ViewPlan {
        filter_m,
        filter_n,
        mask: *mask.params(),
    })
}

/// Intermediate and final products of one view.
#[derive(Debug, Clone)]
pub struct ViewOutput {
    pub x_m: FilteredSample,
    pub x_n: FilteredSample,
    pub mask: BlendMask,
    pub blended: Image,
}

pub fn render_view(source: &SpectralSource, plan: &ViewPlan) -> Result<ViewOutput> {
    let x_m = source.filter(&plan.filter_m)?;
    let x_n = source.filter(&plan.filter_n)?;
    let (h, w) = source.geometry().dims();
    let mask = plan.mask.build(h, w)?;
    let blended = blend(&x_m, &x_n, &mask)?.image;
    Ok(ViewOutput {
        x_m,
        x_n,
        mask,
        blended,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub radius: usize,
    pub sigma: f64,
}

impl From<&GaussianKernel> for KernelInfo {
    fn from(k: &GaussianKernel) -> Self {
        KernelInfo {
            radius: k.radius(),
            sigma: k.sigma(),
        }
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub parent_id: String,
    pub image_index: u64,
    pub epoch: u32,
    pub view_index: u32,
    pub seed: u64,
    pub substream: u64,
    pub source: PathBuf,
    pub size: ImageSize,
    pub resize: ResizePolicy,
    pub filter_m: FilterSpec,
    pub filter_n: FilterSpec,
    pub mask: MaskParams,
    pub kernel: KernelInfo,
    pub image: PathBuf,
    pub saliency: PathBuf,
    pub label: Option<PathBuf>,
    pub image_sha256: String,
    pub saliency_sha256: String,
}

impl AugmentationRecord {
    pub fn plan(&self) -> ViewPlan {
        ViewPlan {
            filter_m: self.filter_m.clone(),
            filter_n: self.filter_n.clone(),
            mask: self.mask,
        }
    }

    pub fn substream(&self) -> Substream {
        Substream {
            seed: self.seed,
            epoch: self.epoch,
            image_index: self.image_index,
            view_index: self.view_index,
        }
    }
}

fn image_file(id: &str, epoch: u32, k: u32) -> PathBuf {
    PathBuf::from("images").join(format!("{id}_e{epoch:03}_k{k:03}.png"))
}

fn saliency_file(id: &str) -> PathBuf {
    PathBuf::from("saliency").join(format!("{id}.npy"))
}

fn label_file(id: &str) -> PathBuf {
    PathBuf::from("labels").join(format!("{id}.png"))
}

/// Where augmented artifacts go, if anywhere.
#[derive(Debug, Clone, Copy)]
pub enum Sink<'a> {
    Directory(&'a Path),
    /// Compute everything, write nothing (benchmarks, tests).
    Discard,
}

/// Augments one source image for every configured epoch.
pub fn augment_source(
    pair: &SourcePair,
    image_index: u64,
    config: &AugmentConfig,
    sink: Sink<'_>,
) -> Result<Vec<AugmentationRecord>> {
    let image = prepare_image(&pair.image, config)?;
    let (h, w, c) = image.shape();
    let kernel = config.kernel.kernel_for(h, w)?;
    let saliency = image_saliency(&image, &kernel)?;
    let saliency_sha256 = io::field_hash(&saliency);
    let label = pair.labels.as_ref().map(|_| label_file(&pair.id));

    if let Sink::Directory(out) = sink {
        crate::npy::write_field(&out.join(saliency_file(&pair.id)), &saliency)?;
        if let (Some(labels), Some(rel)) = (&pair.labels, &label) {
            io::save_labels(&out.join(rel), &prepare_labels(labels, config))?;
        }
    }

    let source = SpectralSource::new(&image, pair.id.clone())?;
    let mut records = Vec::with_capacity((config.k * config.epochs) as usize);
    for epoch in 0..config.epochs {
        for view_index in 0..config.k {
            let substream = Substream {
                seed: config.seed,
                epoch,
                image_index,
                view_index,
            };
            let plan = plan_view(&substream, c, h, w, config)?;
            let view = render_view(&source, &plan)?;
            let rel = image_file(&pair.id, epoch, view_index);
            if let Sink::Directory(out) = sink {
                io::save_png(&out.join(&rel), &view.blended)?;
            }
            records.push(AugmentationRecord {
                parent_id: pair.id.clone(),
                image_index,
                epoch,
                view_index,
                seed: config.seed,
                substream: substream.key(),
                source: pair.image_path.clone(),
                size: ImageSize {
                    width: w,
                    height: h,
                },
                resize: config.resize,
                filter_m: plan.filter_m,
                filter_n: plan.filter_n,
                mask: plan.mask,
                kernel: KernelInfo::from(&kernel),
                image: rel,
                saliency: saliency_file(&pair.id),
                label: label.clone(),
                image_sha256: io::image_hash(&view.blended),
                saliency_sha256: saliency_sha256.clone(),
            });
        }
    }
    Ok(records)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Augments all pairs on `workers` threads. Records come back ordered by
/// (epoch, image index, view index) regardless of scheduling.
pub fn augment_pairs(
    pairs: &[SourcePair],
    config: &AugmentConfig,
    workers: usize,
    sink: Sink<'_>,
) -> (Vec<AugmentationRecord>, Option<Error>) {
    use rayon::prelude::*;

    let pool = match build_pool(workers) {
        Ok(p) => p,
        Err(e) => return (Vec::new(), Some(e)),
    };
    let results: Vec<Result<Vec<AugmentationRecord>>> = pool.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, pair)| augment_source(pair, i as u64, config, sink))
            .collect()
    });
    let mut records = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(rs) => records.extend(rs),
            Err(e) => {
                first_error = Some(e);
                break;
            }
        }
    }
    records.sort_by_key(|r| (r.epoch, r.image_index, r.view_index));
    (records, first_error)
}

/// Runs one full augmentation into `out_dir` and writes the manifest.
///
/// On failure the records completed before the failing image are still
/// written, and the returned error says so.
pub fn augment_epoch(
    pairs: &[SourcePair],
    config: &AugmentConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<Vec<AugmentationRecord>> {
    config.validate()?;
    for sub in ["images", "saliency", "labels"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let cfg_path = out_dir.join(CONFIG_FILE);
    let cfg_text = serde_json::to_string_pretty(config).expect("config serializes");
    fs::write(&cfg_path, cfg_text + "\n").map_err(|e| Error::io(&cfg_path, e))?;

    let (records, error) = augment_pairs(pairs, config, workers, Sink::Directory(out_dir));
    write_manifest(&out_dir.join(MANIFEST_FILE), &records)?;
    match error {
        None => Ok(records),
        Some(e) => {
            warn!(
                "augmentation aborted; partial manifest with {} records written",
                records.len()
            );
            Err(e)
        }
    }
}

pub fn write_manifest(path: &Path, records: &[AugmentationRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<AugmentationRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|(i, line)| {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line)
                .map_err(|e| Error::data(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn read_run_config(out_dir: &Path) -> Result<AugmentConfig> {
    let path = out_dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(&path, e.to_string()))
}

/// Everything recomputed when replaying a record.
#[derive(Debug, Clone)]
pub struct Replay {
    pub original: Image,
    pub view: ViewOutput,
    pub saliency: Field,
    pub image_sha256: String,
    pub saliency_sha256: String,
}

impl Replay {
    pub fn matches(&self, record: &AugmentationRecord) -> bool {
        self.image_sha256 == record.image_sha256 && self.saliency_sha256 == record.saliency_sha256
    }
}

/// Recomputes a record's view from its source image and stored parameters.
pub fn replay(record: &AugmentationRecord) -> Result<Replay> {
    let decoded = io::load_image(&record.source)?;
    let image = match record.resize {
        ResizePolicy::Bilinear => {
            io::resize_image(&decoded, record.size.height, record.size.width)?
        }
        ResizePolicy::Native => decoded,
    };
    if image.height() != record.size.height || image.width() != record.size.width {
        return Err(Error::data(
            &record.source,
            format!(
                "source decodes to {}x{}, record expects {}",
                image.width(),
                image.height(),
                record.size
            ),
        ));
    }
    let kernel = GaussianKernel::new(record.kernel.radius, record.kernel.sigma)?;
    let saliency = image_saliency(&image, &kernel)?;
    let source = SpectralSource::new(&image, record.parent_id.clone())?;
    let view = render_view(&source, &record.plan())?;
    Ok(Replay {
        image_sha256: io::image_hash(&view.blended),
        saliency_sha256: io::field_hash(&saliency),
        original: image,
        view,
        saliency,
    })
}

pub const PREVIEW_TILES: usize = 6;

/// Montage with one row per record and tiles in the order original, x_m,
/// x_n, mask, blended, saliency (affinely mapped to `[0, 1]`).
pub fn preview(records: &[AugmentationRecord], n: usize) -> Result<Image> {
    if records.is_empty() {
        return Err(Error::invalid("manifest is empty"));
    }
    let n = if n > records.len() {
        warn!(
            "preview asked for {n} rows but manifest has {}; clamping",
            records.len()
        );
        records.len()
    } else {
        n.max(1)
    };
    let (th, tw) = (records[0].size.height, records[0].size.width);
    let mut rows = Vec::with_capacity(n);
    let mut channels = 1;
    for record in &records[..n] {
        if record.size != records[0].size {
            return Err(Error::invalid("preview records differ in size"));
        }
        let r = replay(record)?;
        channels = channels.max(r.original.channels());
        let tiles = vec![
            r.original.into_field(),
            r.view.x_m.image.into_field(),
            r.view.x_n.image.into_field(),
            r.view.mask.as_field().clone(),
            r.view.blended.into_field(),
            r.saliency.to_unit_range().into_field(),
        ];
        rows.push(tiles);
    }
    let mut out = Field::zeros(th * n, tw * PREVIEW_TILES, channels);
    for (i, tiles) in rows.iter().enumerate() {
        for (j, tile) in tiles.iter().enumerate() {
            for c in 0..channels {
                let src_c = c.min(tile.channels() - 1);
                for row in 0..th {
                    for col in 0..tw {
                        out.set(c, i * th + row, j * tw + col, tile.get(src_c, row, col));
                    }
                }
            }
        }
    }
    Image::try_from(out)
}
