//! The `cpd` command-line tool.
//!
//! Every subcommand writes line-delimited JSON records (`summary`, `warning`,
//! `error`, `metrics`, `aggregate`) to standard output; logs go to standard
//! error and are controlled by `CPD_LOG`. Runs are pure functions of the
//! inputs on disk, the flags and `--seed`: per-item seeds are derived from
//! the master seed and the item index, never from the worker schedule.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use crate::cpd::{copy_step, cp_dilatation, cpd_gate, derived_id, paste_step, pick_source, CpdConfig};
use crate::dataset::io::{load_entry, load_mask, load_pair, save_image, save_pair, scan_slides, PatientIdRule, DEFAULT_PATIENT_PATTERN};
use crate::dataset::{
    is_background, patchify, resize_pair, split_by_patient, DatasetManifest, PatchGrid, Provenance, Split,
    DEFAULT_BACKGROUND_THRESHOLD, DEFAULT_PATCH_SIZE, DEFAULT_RESIZE, DEFAULT_SPLIT_FRACTIONS,
};
use crate::metrics::{aggregate, evaluate, MetricReport};
use crate::morphology::{make_element, KernelShape};
use crate::naive_aug::{apply_naive, apply_naive_single, NaiveAugConfig};
use crate::raster::{BinaryMask, RasterImage};
use crate::rng::seeded;
use crate::{Image, Pair};

/// Kernel configuration used when neither flags nor config name one.
pub const DEFAULT_CPD: &str = "DILATE-10-0.4";

#[derive(Debug, Parser)]
#[command(name = "cpd", version, about = "Dilated copy-paste augmentation for segmentation datasets")]
pub struct Cli {
    /// Master seed; per-item seeds are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat TOML config with RunConfig keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut slides into patches, drop near-white patches, resize, write the dataset layout.
    Patchify(PatchifyArgs),
    /// Assign train/val/test splits at patient level.
    Split(SplitArgs),
    /// Synthesize augmented pairs from the train split.
    Augment(AugmentArgs),
    /// Render a source / overlay / composite / mask panel for one couple.
    Preview(PreviewArgs),
    /// Score predicted masks against ground truth.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct PatchifyArgs {
    /// Slide tree with `images/*.png` and `masks/*.png`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,
    /// Distance between patch origins (default: patch size).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Output side length; 0 keeps the patch size.
    #[arg(long, default_value_t = DEFAULT_RESIZE)]
    pub resize: usize,
    #[arg(long, default_value_t = DEFAULT_BACKGROUND_THRESHOLD)]
    pub background_threshold: f64,
    /// Regex whose first capture group is the patient id.
    #[arg(long, default_value = DEFAULT_PATIENT_PATTERN)]
    pub patient_pattern: String,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub fractions: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
pub struct KernelArgs {
    /// `KERNEL-SIZE-SIGMA` shorthand, e.g. `RECT-30-0.7`.
    #[arg(long)]
    pub cpd: Option<String>,
    #[arg(long)]
    pub kernel: Option<KernelShapeArg>,
    #[arg(long)]
    pub kernel_size: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub p_cpd: Option<f64>,
    #[arg(long)]
    pub p_aug: Option<f64>,
    /// Wipe the target with the blurred alpha instead of the hard mask.
    #[arg(long)]
    pub exact_alpha: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelShapeArg(pub KernelShape);

impl std::str::FromStr for KernelShapeArg {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        s.parse().map(KernelShapeArg)
    }
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Prepared dataset with a split manifest.
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Passes over the target split.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    /// Panel image path.
    #[arg(long)]
    pub output: PathBuf,
    /// Apply the seeded naive augmentations before copying.
    #[arg(long)]
    pub naive: bool,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Directory of predicted masks named `{id}.png`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
}

/// Flat config file. Every key is optional; flags win over the file.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub input_root: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    pub p_aug: Option<f64>,
    pub resize_pad_range: Option<(f64, f64)>,
    pub contrast_range: Option<(f64, f64)>,
    pub brightness_range: Option<(f64, f64)>,
    pub cpd: Option<String>,
    pub kernel: Option<String>,
    pub kernel_size: Option<usize>,
    pub sigma: Option<f64>,
    pub p_cpd: Option<f64>,
    pub exact_alpha: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoConfig {
    pub input_root: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub naive: NaiveAugConfig,
    pub cpd: CpdConfig,
    pub io: IoConfig,
    pub workers: usize,
}

impl RunConfig {
    /// Defaults, overlaid by the config file, overlaid by flags.
    pub fn resolve(cli: &Cli, file: &FileConfig, kernel: Option<&KernelArgs>) -> anyhow::Result<Self> {
        let mut naive = NaiveAugConfig::default();
        if let Some(p) = file.p_aug {
            naive.p_aug = p;
        }
        if let Some(r) = file.resize_pad_range {
            naive.resize_pad_range = r;
        }
        if let Some(r) = file.contrast_range {
            naive.contrast_range = r;
        }
        if let Some(r) = file.brightness_range {
            naive.brightness_range = r;
        }

        let mut cpd: CpdConfig = file.cpd.as_deref().unwrap_or(DEFAULT_CPD).parse()?;
        if let Some(k) = &file.kernel {
            cpd.kernel.shape = k.parse()?;
        }
        if let Some(k) = file.kernel_size {
            cpd.kernel.size = k;
        }
        if let Some(s) = file.sigma {
            cpd.sigma = s;
        }
        if let Some(p) = file.p_cpd {
            cpd.p_cpd = p;
        }
        cpd.exact_alpha = file.exact_alpha.unwrap_or(false);

        if let Some(k) = kernel {
            if let Some(triple) = &k.cpd {
                let parsed: CpdConfig = triple.parse()?;
                cpd.kernel = parsed.kernel;
                cpd.sigma = parsed.sigma;
            }
            if let Some(shape) = k.kernel {
                cpd.kernel.shape = shape.0;
            }
            if let Some(size) = k.kernel_size {
                cpd.kernel.size = size;
            }
            if let Some(s) = k.sigma {
                cpd.sigma = s;
            }
            if let Some(p) = k.p_cpd {
                cpd.p_cpd = p;
            }
            if let Some(p) = k.p_aug {
                naive.p_aug = p;
            }
            cpd.exact_alpha |= k.exact_alpha;
        }
        naive.validate()?;
        cpd.validate()?;

        let workers = cli
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if workers == 0 {
            bail!("--workers must be at least 1");
        }
        Ok(Self {
            seed: cli.seed.or(file.seed).unwrap_or(0),
            naive,
            cpd,
            io: IoConfig {
                input_root: file.input_root.clone(),
                output_root: file.output_root.clone(),
            },
            workers,
        })
    }

    fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| anyhow!("cannot start worker pool: {e}"))
    }
}

/// Line-delimited JSON sink for records.
struct Records<'a> {
    out: &'a mut dyn Write,
}

impl Records<'_> {
    fn emit(&mut self, value: serde_json::Value) -> anyhow::Result<()> {
        writeln!(self.out, "{value}")?;
        Ok(())
    }

    fn warning(&mut self, command: &str, message: impl Into<String>) -> anyhow::Result<()> {
        let message = message.into();
        log::warn!("{message}");
        self.emit(json!({"record": "warning", "command": command, "message": message}))
    }

    fn error(&mut self, command: &str, id: &str, message: impl Into<String>) -> anyhow::Result<()> {
        let message = message.into();
        log::error!("{id}: {message}");
        self.emit(json!({"record": "error", "command": command, "id": id, "message": message}))
    }
}

fn required(flag: Option<PathBuf>, fallback: Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    flag.or(fallback).ok_or_else(|| anyhow!("missing --{name} (or the matching config key)"))
}

/// Parses `args` (program name first) and runs the command. Records go to
/// `out`. Returns the process exit status.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli, out) {
        Ok(status) => status,
        Err(e) => {
            log::error!("{e:#}");
            let _ = writeln!(out, "{}", json!({"record": "error", "message": format!("{e:#}")}));
            1
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut records = Records { out };
    match &cli.command {
        Command::Patchify(a) => cmd_patchify(&RunConfig::resolve(cli, &file, None)?, a, &mut records),
        Command::Split(a) => cmd_split(&RunConfig::resolve(cli, &file, None)?, a, &mut records),
        Command::Augment(a) => cmd_augment(&RunConfig::resolve(cli, &file, Some(&a.kernel))?, a, &mut records),
        Command::Preview(a) => cmd_preview(&RunConfig::resolve(cli, &file, Some(&a.kernel))?, a, &mut records),
        Command::Metrics(a) => cmd_metrics(&RunConfig::resolve(cli, &file, None)?, a, &mut records),
    }
}

struct SlideOutcome {
    id: String,
    patches: usize,
    kept: Vec<crate::dataset::ManifestEntry>,
    error: Option<String>,
}

fn cmd_patchify(cfg: &RunConfig, args: &PatchifyArgs, records: &mut Records) -> anyhow::Result<i32> {
    const CMD: &str = "patchify";
    let input = required(args.input.clone(), cfg.io.input_root.clone(), "input")?;
    let output = required(args.output.clone(), cfg.io.output_root.clone(), "output")?;
    if !input.is_dir() {
        bail!("input directory {} does not exist", input.display());
    }
    let rule = PatientIdRule::new(&args.patient_pattern)?;
    let grid = PatchGrid {
        size: args.patch_size,
        stride: args.stride.unwrap_or(args.patch_size),
    };
    let slides = scan_slides(&input)?;
    if slides.is_empty() {
        records.warning(CMD, format!("no slides found under {}", input.join("images").display()))?;
    }
    fs::create_dir_all(&output)?;

    let process = |(id, image_path, mask_path): &(String, PathBuf, PathBuf)| -> SlideOutcome {
        let result = (|| -> crate::Result<(usize, Vec<_>)> {
            let slide: Pair = load_pair(image_path, mask_path, id.clone(), rule.patient_of(id))?;
            let patches = patchify(&slide, grid)?;
            let total = patches.len();
            let mut kept = Vec::new();
            for patch in patches {
                if is_background(&patch.image, args.background_threshold) {
                    continue;
                }
                let patch = if args.resize > 0 { resize_pair(&patch, args.resize)? } else { patch };
                kept.push(save_pair(&patch, &output)?);
            }
            Ok((total, kept))
        })();
        match result {
            Ok((patches, kept)) => SlideOutcome {
                id: id.clone(),
                patches,
                kept,
                error: None,
            },
            Err(e) => SlideOutcome {
                id: id.clone(),
                patches: 0,
                kept: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    };
    let outcomes: Vec<SlideOutcome> = cfg.pool()?.install(|| slides.par_iter().map(process).collect());

    let mut entries = Vec::new();
    let (mut patches, mut errors) = (0, 0);
    for o in outcomes {
        patches += o.patches;
        if let Some(e) = o.error {
            errors += 1;
            records.error(CMD, &o.id, e)?;
        }
        entries.extend(o.kept);
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let kept = entries.len();
    DatasetManifest::new(entries).write(&output)?;
    records.emit(json!({
        "record": "summary",
        "command": CMD,
        "slides": slides.len(),
        "patches": patches,
        "kept": kept,
        "discarded": patches - kept,
        "errors": errors,
    }))?;
    Ok(if errors == 0 { 0 } else { 1 })
}

fn cmd_split(cfg: &RunConfig, args: &SplitArgs, records: &mut Records) -> anyhow::Result<i32> {
    let root = required(args.root.clone(), cfg.io.input_root.clone(), "root")?;
    let fractions = match &args.fractions {
        Some(f) => [f[0], f[1], f[2]],
        None => DEFAULT_SPLIT_FRACTIONS,
    };
    let manifest = DatasetManifest::read(&root)?;
    let split = split_by_patient(&manifest.entries, fractions, cfg.seed)?;
    split.write(&root)?;
    let count = |s: Split| split.split(s).count();
    let patients = |s: Split| {
        split
            .split(s)
            .map(|e| e.patient_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    };
    records.emit(json!({
        "record": "summary",
        "command": "split",
        "seed": cfg.seed,
        "entries": {"train": count(Split::Train), "val": count(Split::Val), "test": count(Split::Test)},
        "patients": {"train": patients(Split::Train), "val": patients(Split::Val), "test": patients(Split::Test)},
    }))?;
    Ok(0)
}

/// One planned augmentation: target and source indices into the split, and
/// the item seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentItem {
    pub index: usize,
    pub target: usize,
    pub source: usize,
    pub seed: u64,
    pub synthesize: bool,
}

/// Deterministic item plan for `repeats` passes over `n` targets.
pub fn plan_augment(n: usize, repeats: usize, master_seed: u64, p_cpd: f64) -> crate::Result<Vec<AugmentItem>> {
    (0..n * repeats)
        .map(|index| {
            let target = index % n;
            let seed = crate::rng::derive_seed(master_seed, index as u64);
            Ok(AugmentItem {
                index,
                target,
                source: pick_source(n, target, seed)?,
                seed,
                synthesize: cpd_gate(p_cpd, seed),
            })
        })
        .collect()
}

/// Id of a target that went through the naive augmentations only.
pub fn naive_id(tar_id: &str, seed: u64) -> String {
    format!("{tar_id}__naive__{seed}")
}

/// Library-level result of one augment item, as the CLI writes it.
pub fn augment_item(
    target: &Pair,
    source: &Pair,
    item: &AugmentItem,
    naive: &NaiveAugConfig,
    cpd: &CpdConfig,
) -> crate::Result<Pair> {
    if item.synthesize {
        cp_dilatation(source, target, naive, cpd, item.seed)
    } else {
        let mut out = apply_naive_single(target, naive, &mut seeded(item.seed))?;
        out.id = naive_id(&target.id, item.seed);
        Ok(out)
    }
}

fn cmd_augment(cfg: &RunConfig, args: &AugmentArgs, records: &mut Records) -> anyhow::Result<i32> {
    const CMD: &str = "augment";
    let root = required(args.root.clone(), cfg.io.input_root.clone(), "root")?;
    let output = required(args.output.clone(), cfg.io.output_root.clone(), "output")?;
    let manifest = DatasetManifest::read(&root)?;
    let targets: Vec<_> = manifest.split(args.split).cloned().collect();
    if targets.is_empty() {
        bail!("manifest under {} has no `{}` entries; run `split` first", root.display(), args.split);
    }
    if targets.len() < 2 {
        bail!("`{}` split needs at least two samples to pair sources with targets", args.split);
    }
    let items = plan_augment(targets.len(), args.repeats, cfg.seed, cfg.cpd.p_cpd)?;
    fs::create_dir_all(&output)?;
    let triple = cfg.cpd.triple();

    let process = |item: &AugmentItem| -> Result<crate::dataset::ManifestEntry, (String, String)> {
        let tar_entry = &targets[item.target];
        let src_entry = &targets[item.source];
        let run = || -> crate::Result<crate::dataset::ManifestEntry> {
            let target: Pair = load_entry(&root, tar_entry)?;
            let source: Pair = load_entry(&root, src_entry)?;
            let pair = augment_item(&target, &source, item, &cfg.naive, &cfg.cpd)?;
            let mut entry = save_pair(&pair, &output)?;
            entry.split = Some(args.split);
            entry.provenance = Some(Provenance {
                method: if item.synthesize { "cpd" } else { "naive" }.into(),
                target_id: tar_entry.id.clone(),
                source_id: item.synthesize.then(|| src_entry.id.clone()),
                seed: item.seed,
                config: triple.clone(),
            });
            Ok(entry)
        };
        run().map_err(|e| (tar_entry.id.clone(), e.to_string()))
    };
    let results: Vec<_> = cfg.pool()?.install(|| items.par_iter().map(process).collect());

    let mut entries = Vec::with_capacity(results.len());
    let mut errors = 0;
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err((id, msg)) => {
                errors += 1;
                records.error(CMD, &id, msg)?;
            }
        }
    }
    let synthesized = entries
        .iter()
        .filter(|e| e.provenance.as_ref().is_some_and(|p| p.method == "cpd"))
        .count();
    let written = entries.len();
    DatasetManifest {
        seed: Some(cfg.seed),
        split_fractions: None,
        entries,
    }
    .write(&output)?;
    records.emit(json!({
        "record": "summary",
        "command": CMD,
        "config": triple,
        "seed": cfg.seed,
        "targets": targets.len(),
        "written": written,
        "synthesized": synthesized,
        "naive_only": written - synthesized,
        "errors": errors,
    }))?;
    Ok(if errors == 0 { 0 } else { 1 })
}

/// Pixels of `mask` with a 4-neighbour outside it (image borders count as
/// outside).
pub fn mask_boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && (x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1))
    })
}

/// Horizontal strip: source, source with the dilated boundary dashed in red,
/// composite, synthesized mask.
pub fn render_panel(source: &Image, dilated: &BinaryMask, composite: &Image, mask: &BinaryMask) -> Image {
    let (w, h) = source.dims();
    let boundary = mask_boundary(dilated);
    Image::from_fn(4 * w, h, |x, y| {
        let (panel, px) = (x / w, x % w);
        match panel {
            0 => source.pixel(px, y),
            1 if boundary.get(px, y) && ((px + y) / 3) % 2 == 0 => [1.0, 0.0, 0.0],
            1 => source.pixel(px, y),
            2 => composite.pixel(px, y),
            _ => [if mask.get(px, y) { 1.0 } else { 0.0 }; 3],
        }
    })
}

fn cmd_preview(cfg: &RunConfig, args: &PreviewArgs, records: &mut Records) -> anyhow::Result<i32> {
    let root = required(args.root.clone(), cfg.io.input_root.clone(), "root")?;
    let manifest = DatasetManifest::read(&root)?;
    let find = |id: &str| manifest.get(id).ok_or_else(|| anyhow!("unknown sample id `{id}`"));
    let (src_entry, tar_entry) = (find(&args.source)?, find(&args.target)?);
    let mut source: Pair = load_entry(&root, src_entry)?;
    let mut target: Pair = load_entry(&root, tar_entry)?;
    if source.dims() != target.dims() {
        bail!("source {:?} and target {:?} differ in size", source.dims(), target.dims());
    }
    if args.naive {
        (source, target) = apply_naive(&source, &target, &cfg.naive, &mut seeded(cfg.seed))?;
    }
    let element = make_element(cfg.cpd.kernel);
    let copy = copy_step(&source.image, &source.mask, &element)?;
    let (composite, mask) = paste_step(
        &target.image,
        &target.mask,
        &source.mask,
        &copy,
        cfg.cpd.sigma as f32,
        cfg.cpd.exact_alpha,
    )?;
    let panel: RasterImage<f32> = render_panel(&source.image, &copy.dilated_mask, &composite, &mask);
    save_image(&panel, &args.output)?;
    records.emit(json!({
        "record": "summary",
        "command": "preview",
        "config": cfg.cpd.triple(),
        "id": derived_id(&target.id, &source.id, cfg.seed),
        "output": args.output.display().to_string(),
        "width": panel.width(),
        "height": panel.height(),
    }))?;
    Ok(0)
}

fn cmd_metrics(cfg: &RunConfig, args: &MetricsArgs, records: &mut Records) -> anyhow::Result<i32> {
    const CMD: &str = "metrics";
    let root = required(args.root.clone(), cfg.io.input_root.clone(), "root")?;
    let manifest = DatasetManifest::read(&root)?;
    let entries: Vec<_> = manifest.split(args.split).collect();
    if entries.is_empty() {
        records.warning(CMD, format!("no `{}` entries in manifest", args.split))?;
    }
    let score = |e: &&crate::dataset::ManifestEntry| -> Result<MetricReport, String> {
        let pred_path = args.pred.join(format!("{}.png", e.id));
        if !pred_path.is_file() {
            return Err(format!("missing prediction {}", pred_path.display()));
        }
        let pred = load_mask(&pred_path).map_err(|e| e.to_string())?;
        let truth = load_mask(&root.join(&e.mask_path)).map_err(|e| e.to_string())?;
        evaluate(&pred, &truth).map_err(|e| e.to_string())
    };
    let results: Vec<_> = cfg.pool()?.install(|| entries.par_iter().map(score).collect());

    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(r) => {
                records.emit(json!({
                    "record": "metrics",
                    "id": e.id,
                    "dice": r.dice,
                    "iou": r.iou,
                    "pixel_accuracy": r.pixel_accuracy,
                    "tp": r.tp,
                    "fp": r.fp,
                    "fn": r.fn_,
                    "tn": r.tn,
                }))?;
                reports.push(r);
            }
            Err(msg) => {
                records.error(CMD, &e.id, msg)?;
                failed.push(e.id.clone());
            }
        }
    }
    let summary = aggregate(&reports);
    records.emit(json!({
        "record": "aggregate",
        "split": args.split.to_string(),
        "count": summary.count,
        "dice": summary.dice,
        "iou": summary.iou,
        "pixel_accuracy": summary.pixel_accuracy,
        "failed": failed,
    }))?;
    Ok(if failed.is_empty() { 0 } else { 1 })
}
