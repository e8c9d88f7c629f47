//! Run configuration and the commands behind the `mpain` binary.
//!
//! Every command reads and writes under one work directory:
//!
//! ```text
//! <workdir>/synth/                      generated videos + manifest.csv
//! <workdir>/preprocess/<id>.bg.pgm      median background
//! <workdir>/preprocess/<id>.fg.mpvr     foreground video
//! <workdir>/preprocess/hashes.json      input hash per video (skip log)
//! <workdir>/preprocess/log.csv          computed / skipped / error per video
//! <workdir>/features/<masked|unmasked>/ <id>.mpfg, meta.json, masks.csv
//! <workdir>/train/                      model.mpck, train_log.csv
//! <workdir>/crossval/<classes>-<mask>/  metrics, predictions, confusion, QWK
//! <workdir>/cohort/cohort.csv           per-cohort percentage table
//! ```
//!
//! CSV artifacts start with a `#` line carrying the config hash, seed,
//! pipeline version, mask flag and class mode; JSON artifacts embed the
//! same fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::background::{compute_background_histogram, extract_foreground};
use crate::error::{Error, Result};
use crate::eval::{
    cohort_csv, cohort_report, confusion_svg, manifest_folds, qwk_by_phase, run_crossval,
    ConfusionMatrix, CrossvalResult, DatasetManifest, MouseSeries, PainLabel, Phase, PhaseTable,
    PooledMetrics, SeriesPoint, ThreeClass, N_CLASSES,
};
use crate::features::{
    extract_motion_energy, load_feature_sequence, save_feature_sequence, segment_clips, ClipSpec,
    FeatureGrid, DEFAULT_T_BINS, MOTION_CHANNELS,
};
use crate::mask::{mask_pipeline, MaskWindow};
use crate::ssm::{
    pool_clip, pooled_dim, predict_windows, train, ModelConfig, PipelineTag, Sample, Sequence,
    SsmCheckpoint, TemporalPooling, TrainConfig,
};
use crate::synth::{
    default_specs, fifteen_class_specs, generate_dataset, DistractorSpec, SynthClassSpec,
    SynthLabeling, SynthParams,
};
use crate::video::{load_video_with_fps, save_video, Fps, RawVideo};
use crate::PIPELINE_VERSION;

/// Which label space the classifier is trained and scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassMode {
    /// Fifteen (condition, timepoint) classes; 3-class numbers are also
    /// reported by collapsing the predictions.
    #[serde(rename = "15")]
    Fifteen,
    /// Retrain with three outputs.
    #[serde(rename = "3")]
    Three,
    /// Train on fifteen classes, headline numbers from the collapsed predictions.
    #[serde(rename = "collapse")]
    Collapse,
}

impl ClassMode {
    pub fn name(self) -> &'static str {
        match self {
            ClassMode::Fifteen => "15",
            ClassMode::Three => "3",
            ClassMode::Collapse => "collapse",
        }
    }

    /// Width of the classifier's output layer.
    pub fn n_outputs(self) -> usize {
        match self {
            ClassMode::Three => 3,
            _ => N_CLASSES,
        }
    }

    /// Training target for `label`.
    pub fn target(self, label: PainLabel) -> usize {
        match self {
            ClassMode::Three => label.collapse().id(),
            _ => label.id(),
        }
    }
}

impl FromStr for ClassMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "15" => Ok(ClassMode::Fifteen),
            "3" => Ok(ClassMode::Three),
            "collapse" => Ok(ClassMode::Collapse),
            other => Err(Error::Config(format!(
                "class mode must be 15, 3 or collapse, got {other:?}"
            ))),
        }
    }
}

/// Settings for `mpain synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub videos_per_class: usize,
    pub duration_s: f64,
    pub fps_num: u32,
    pub fps_den: u32,
    pub width: usize,
    pub height: usize,
    /// Add the top-band distractor to every class.
    pub distractor: bool,
    /// JSON array of class specs replacing the built-in ones.
    pub specs: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = SynthParams::default();
        SynthConfig {
            videos_per_class: 24,
            duration_s: p.duration_s,
            fps_num: p.fps.num,
            fps_den: p.fps.den,
            width: p.width,
            height: p.height,
            distractor: false,
            specs: None,
        }
    }
}

/// Everything a run depends on. Loaded from JSON; command-line flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub workdir: PathBuf,
    pub mask: bool,
    pub classes: ClassMode,
    pub seed: u64,

    pub clip_seconds: f64,
    pub t_bins: usize,
    pub fg_threshold: u8,

    pub hidden_dim: usize,
    pub n_blocks: usize,
    pub dropout_rate: f64,
    pub focal_gamma: f64,
    pub pooling: TemporalPooling,

    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub lr_factor: f64,

    pub folds: usize,
    pub group_by_mouse: bool,
    /// Cohort windows, in clips.
    pub window: usize,
    pub stride: usize,

    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::desk(MOTION_CHANNELS, N_CLASSES);
        let tr = TrainConfig::default();
        RunConfig {
            manifest: None,
            workdir: PathBuf::from("work"),
            mask: true,
            classes: ClassMode::Fifteen,
            seed: 0,
            clip_seconds: ClipSpec::default().clip_seconds,
            t_bins: DEFAULT_T_BINS,
            fg_threshold: 0,
            hidden_dim: model.hidden_dim,
            n_blocks: model.n_blocks,
            dropout_rate: model.dropout_rate,
            focal_gamma: model.focal_gamma,
            pooling: model.pooling,
            lr: tr.lr,
            weight_decay: tr.weight_decay,
            batch_size: tr.batch_size,
            max_epochs: tr.max_epochs,
            plateau_patience: tr.plateau_patience,
            lr_factor: tr.lr_factor,
            folds: 8,
            group_by_mouse: true,
            window: 20,
            stride: 10,
            synth: SynthConfig::default(),
        }
    }
}

/// Fields stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub mask: bool,
    pub classes: String,
}

impl Provenance {
    fn csv_comment(&self) -> String {
        format!(
            "# config_hash={} seed={} version={} mask={} classes={}\n",
            self.config_hash, self.seed, self.version, self.mask, self.classes
        )
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        ClipSpec::new(self.clip_seconds)?;
        self.model_config(1).validate()?;
        self.train_config().validate()?;
        if self.t_bins == 0 {
            return Err(Error::Config("t_bins must be at least 1".into()));
        }
        if self.folds < 3 {
            return Err(Error::Config(format!(
                "need at least 3 folds for train/val/test, got {}",
                self.folds
            )));
        }
        if self.window == 0 || self.stride == 0 {
            return Err(Error::Config("window and stride must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.config_hash(),
            seed: self.seed,
            version: PIPELINE_VERSION.to_string(),
            mask: self.mask,
            classes: self.classes.name().to_string(),
        }
    }

    pub fn clip_spec(&self) -> ClipSpec {
        ClipSpec {
            clip_seconds: self.clip_seconds,
        }
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            clip: self.clip_spec(),
            t_bins: self.t_bins,
            fg_threshold: self.fg_threshold,
            mask: self.mask,
        }
    }

    pub fn input_dim(&self) -> usize {
        pooled_dim(MOTION_CHANNELS, self.t_bins, self.pooling)
    }

    pub fn model_config(&self, n_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim: self.input_dim(),
            hidden_dim: self.hidden_dim,
            n_blocks: self.n_blocks,
            n_classes,
            dropout_rate: self.dropout_rate,
            focal_gamma: self.focal_gamma,
            pooling: self.pooling,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            plateau_patience: self.plateau_patience,
            lr_factor: self.lr_factor,
            seed: self.seed,
        }
    }

    pub fn pipeline_tag(&self) -> PipelineTag {
        PipelineTag {
            mask: self.mask,
            classes: self.classes.name().to_string(),
            t_bins: self.t_bins,
            channels: MOTION_CHANNELS,
            config_hash: self.config_hash(),
            version: PIPELINE_VERSION.to_string(),
        }
    }

    pub fn preprocess_dir(&self) -> PathBuf {
        self.workdir.join("preprocess")
    }

    pub fn feature_dir(&self) -> PathBuf {
        self.workdir
            .join("features")
            .join(if self.mask { "masked" } else { "unmasked" })
    }

    pub fn crossval_dir(&self) -> PathBuf {
        self.workdir.join("crossval").join(format!(
            "{}-{}",
            self.classes.name(),
            if self.mask { "masked" } else { "unmasked" }
        ))
    }

    fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given (--manifest or config)".into()))
    }
}

/// Feature extraction settings shared by featurize and in-memory runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions {
    pub clip: ClipSpec,
    pub t_bins: usize,
    pub fg_threshold: u8,
    pub mask: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            clip: ClipSpec::default(),
            t_bins: DEFAULT_T_BINS,
            fg_threshold: 0,
            mask: true,
        }
    }
}

/// Clip grids of an already-extracted foreground video, masked when asked.
pub fn featurize_foreground(fg: &RawVideo, opts: &FeatureOptions) -> Result<Vec<FeatureGrid>> {
    segment_clips(fg, &opts.clip)?
        .iter()
        .map(|clip| {
            let grid = extract_motion_energy(clip, opts.t_bins)?;
            Ok(if opts.mask {
                mask_pipeline(&grid).0
            } else {
                grid
            })
        })
        .collect()
}

/// Background removal followed by [`featurize_foreground`].
pub fn featurize_video(video: &RawVideo, opts: &FeatureOptions) -> Result<Vec<FeatureGrid>> {
    let bg = compute_background_histogram(video);
    let fg = extract_foreground(video, &bg, opts.fg_threshold)?;
    featurize_foreground(&fg, opts)
}

/// One classifier input row per clip.
pub fn clip_sequence(grids: &[FeatureGrid], pooling: TemporalPooling) -> Result<Sequence> {
    let rows: Vec<Vec<f64>> = grids.iter().map(|g| pool_clip(g, pooling)).collect();
    Sequence::from_rows(&rows)
}

/// A video to process, from either a dataset manifest or a cohort list.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEntry {
    pub path: PathBuf,
    pub id: String,
    pub fps: Option<Fps>,
    pub cohort: Option<String>,
}

#[derive(Debug, Deserialize)]
struct CohortCsvRow {
    video_path: String,
    cohort: String,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    fps_num: Option<u32>,
    #[serde(default, deserialize_with = "csv::invalid_option")]
    fps_den: Option<u32>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

/// Reads a dataset manifest, or a cohort list (`video_path,cohort` with
/// optional `fps_num,fps_den`) when the header has a `cohort` column.
pub fn load_video_list(path: impl AsRef<Path>) -> Result<Vec<VideoEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let is_cohort = reader.headers()?.iter().any(|h| h == "cohort");
    if !is_cohort {
        let m = DatasetManifest::load(path)?;
        return Ok(m
            .rows
            .iter()
            .map(|r| VideoEntry {
                path: r.video_path.clone(),
                id: r.video_id(),
                fps: Some(r.fps),
                cohort: None,
            })
            .collect());
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<CohortCsvRow>() {
        let row = row?;
        let p = PathBuf::from(&row.video_path);
        let p = if p.is_relative() { base.join(p) } else { p };
        let fps = match (row.fps_num, row.fps_den) {
            (Some(n), Some(d)) => Some(Fps::new(n, d)?),
            _ => None,
        };
        out.push(VideoEntry {
            id: stem(&p),
            path: p,
            fps,
            cohort: Some(row.cohort),
        });
    }
    let mut ids: Vec<&str> = out.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Dataset(format!("duplicate video id {:?}", w[0])));
    }
    if out.is_empty() {
        return Err(Error::Dataset(format!(
            "{} lists no videos",
            path.display()
        )));
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

fn hash_input(path: &Path, extra: &str) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            h.update(f.file_name().unwrap().to_string_lossy().as_bytes());
            h.update(std::fs::read(&f).map_err(|e| Error::io(&f, e))?);
        }
    } else {
        h.update(std::fs::read(path).map_err(|e| Error::io(path, e))?);
    }
    h.update(extra.as_bytes());
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreprocessStatus {
    Computed,
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessReport {
    pub entries: Vec<(String, PreprocessStatus)>,
}

impl PreprocessReport {
    pub fn count(&self, pred: impl Fn(&PreprocessStatus) -> bool) -> usize {
        self.entries.iter().filter(|(_, s)| pred(s)).count()
    }

    pub fn failures(&self) -> usize {
        self.count(|s| matches!(s, PreprocessStatus::Failed(_)))
    }
}

fn preprocess_one(
    entry: &VideoEntry,
    dir: &Path,
    threshold: u8,
    known: Option<&String>,
) -> Result<(String, PreprocessStatus)> {
    let bg_path = dir.join(format!("{}.bg.pgm", entry.id));
    let fg_path = dir.join(format!("{}.fg.mpvr", entry.id));
    let hash = hash_input(
        &entry.path,
        &format!("threshold={threshold};{PIPELINE_VERSION}"),
    )?;
    if known == Some(&hash) && bg_path.exists() && fg_path.exists() {
        return Ok((hash, PreprocessStatus::Skipped));
    }
    let video = load_video_with_fps(&entry.path, entry.fps)?;
    let bg = compute_background_histogram(&video);
    let fg = extract_foreground(&video, &bg, threshold)?;
    bg.write_pgm(&bg_path)?;
    save_video(&fg, &fg_path)?;
    Ok((hash, PreprocessStatus::Computed))
}

/// Background and foreground for every listed video. Inputs whose content
/// hash matches the previous run are skipped; a failing video is logged
/// and the rest still processed.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PreprocessReport> {
    cfg.validate()?;
    let entries = load_video_list(cfg.manifest_path()?)?;
    let dir = cfg.preprocess_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let log_path = dir.join("hashes.json");
    let known: BTreeMap<String, String> = match std::fs::read_to_string(&log_path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    let results: Vec<Result<(String, PreprocessStatus)>> = entries
        .par_iter()
        .map(|e| preprocess_one(e, &dir, cfg.fg_threshold, known.get(&e.id)))
        .collect();

    let mut hashes = known.clone();
    let mut report = PreprocessReport {
        entries: Vec::new(),
    };
    for (entry, res) in entries.iter().zip(results) {
        match res {
            Ok((hash, status)) => {
                hashes.insert(entry.id.clone(), hash);
                report.entries.push((entry.id.clone(), status));
            }
            Err(e) => {
                hashes.remove(&entry.id);
                report
                    .entries
                    .push((entry.id.clone(), PreprocessStatus::Failed(e.to_string())));
            }
        }
    }
    write_file(&log_path, serde_json::to_string_pretty(&hashes)?)?;
    let rows = report.entries.iter().map(|(id, s)| {
        let (status, detail) = match s {
            PreprocessStatus::Computed => ("computed", String::new()),
            PreprocessStatus::Skipped => ("skipped", String::new()),
            PreprocessStatus::Failed(msg) => ("error", msg.clone()),
        };
        vec![id.clone(), status.to_string(), detail]
    });
    let text = cfg.provenance().csv_comment() + &csv_text(&["video_id", "status", "detail"], rows)?;
    write_file(&dir.join("log.csv"), text)?;
    Ok(report)
}

/// Contents of a feature directory's `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub provenance: Provenance,
    pub clip_seconds: f64,
    pub t_bins: usize,
    pub channels: usize,
    pub fg_threshold: u8,
    /// Clip count per video id.
    pub videos: BTreeMap<String, usize>,
}

/// One `MPFG` sequence per video, plus `masks.csv` when masking is on.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<FeatureMeta> {
    cfg.validate()?;
    let entries = load_video_list(cfg.manifest_path()?)?;
    let pre = cfg.preprocess_dir();
    let out = cfg.feature_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let opts = cfg.feature_options();
    let grids: Vec<Vec<FeatureGrid>> = entries
        .par_iter()
        .map(|e| {
            let fg_path = pre.join(format!("{}.fg.mpvr", e.id));
            if !fg_path.exists() {
                return Err(Error::Dataset(format!(
                    "missing foreground for {} (run preprocess first)",
                    e.id
                )));
            }
            let fg = load_video_with_fps(&fg_path, None)?;
            let grids = featurize_foreground(&fg, &opts)?;
            save_feature_sequence(&grids, out.join(format!("{}.mpfg", e.id)))?;
            Ok(grids)
        })
        .collect::<Result<_>>()?;

    let masks_path = out.join("masks.csv");
    if cfg.mask {
        let mut rows = Vec::new();
        for (e, gs) in entries.iter().zip(&grids) {
            for (i, g) in gs.iter().enumerate() {
                let w = g.mask().expect("masked grid");
                rows.push(vec![
                    e.id.clone(),
                    i.to_string(),
                    w.row().to_string(),
                    w.col().to_string(),
                ]);
            }
        }
        let text = cfg.provenance().csv_comment()
            + &csv_text(&["video_id", "clip_index", "row", "col"], rows)?;
        write_file(&masks_path, text)?;
    } else if masks_path.exists() {
        std::fs::remove_file(&masks_path).map_err(|e| Error::io(&masks_path, e))?;
    }

    let meta_path = out.join("meta.json");
    let mut videos: BTreeMap<String, usize> = match std::fs::read_to_string(&meta_path) {
        Ok(text) => serde_json::from_str::<FeatureMeta>(&text)
            .map(|m| m.videos)
            .unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    for (e, gs) in entries.iter().zip(&grids) {
        videos.insert(e.id.clone(), gs.len());
    }
    let meta = FeatureMeta {
        provenance: cfg.provenance(),
        clip_seconds: cfg.clip_seconds,
        t_bins: cfg.t_bins,
        channels: MOTION_CHANNELS,
        fg_threshold: cfg.fg_threshold,
        videos,
    };
    write_file(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}

fn read_meta(dir: &Path) -> Result<FeatureMeta> {
    let path = dir.join("meta.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_masks(dir: &Path) -> Result<BTreeMap<(String, usize), MaskWindow>> {
    #[derive(Deserialize)]
    struct Row {
        video_id: String,
        clip_index: usize,
        row: usize,
        col: usize,
    }
    let path = dir.join("masks.csv");
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for r in reader.deserialize::<Row>() {
        let r = r?;
        out.insert((r.video_id, r.clip_index), MaskWindow::new(r.row, r.col)?);
    }
    Ok(out)
}

/// Feature sequences of `ids` from the directory for `cfg.mask`, with mask
/// windows restored. Fails when the directory was built with the other
/// mask setting or another grid shape.
pub fn load_features(cfg: &RunConfig, ids: &[String]) -> Result<Vec<Vec<FeatureGrid>>> {
    let dir = cfg.feature_dir();
    let meta = read_meta(&dir)?;
    if meta.provenance.mask != cfg.mask {
        return Err(Error::PipelineMismatch(format!(
            "features in {} were built with mask={}, run expects mask={}",
            dir.display(),
            meta.provenance.mask,
            cfg.mask
        )));
    }
    if meta.t_bins != cfg.t_bins {
        return Err(Error::PipelineMismatch(format!(
            "features have {} time bins, run expects {}",
            meta.t_bins, cfg.t_bins
        )));
    }
    let masks = if cfg.mask {
        Some(read_masks(&dir)?)
    } else {
        None
    };
    ids.iter()
        .map(|id| {
            let mut grids = load_feature_sequence(dir.join(format!("{id}.mpfg")))?;
            if let Some(masks) = &masks {
                for (i, g) in grids.iter_mut().enumerate() {
                    let w = masks.get(&(id.clone(), i)).ok_or_else(|| {
                        Error::Dataset(format!("no mask window logged for {id} clip {i}"))
                    })?;
                    g.set_mask(Some(*w));
                }
            }
            Ok(grids)
        })
        .collect()
}

fn dataset_samples(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<Vec<Sample>> {
    let ids: Vec<String> = manifest.rows.iter().map(|r| r.video_id()).collect();
    let grids = load_features(cfg, &ids)?;
    manifest
        .rows
        .iter()
        .zip(grids)
        .map(|(row, gs)| {
            Ok(Sample {
                seq: clip_sequence(&gs, cfg.pooling)?,
                label: cfg.classes.target(row.label),
            })
        })
        .collect()
}

/// Trains one model: fold 0 of the manifest's split validates, the rest train.
pub fn cmd_train(cfg: &RunConfig) -> Result<SsmCheckpoint> {
    cfg.validate()?;
    let manifest = DatasetManifest::load(cfg.manifest_path()?)?;
    let samples = dataset_samples(cfg, &manifest)?;
    let folds = manifest_folds(&manifest, cfg.folds, cfg.seed, cfg.group_by_mouse)?;
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (s, &f) in samples.into_iter().zip(&folds.fold_of) {
        if f == 0 {
            va.push(s)
        } else {
            tr.push(s)
        }
    }
    let outcome = train(
        &cfg.model_config(cfg.classes.n_outputs()),
        &tr,
        &va,
        &cfg.train_config(),
    )?;
    let mut ckpt = outcome.checkpoint;
    ckpt.meta.pipeline = Some(cfg.pipeline_tag());
    let dir = cfg.workdir.join("train");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    ckpt.save(dir.join("model.mpck"))?;
    let rows = outcome.log.iter().map(|l| {
        vec![
            l.epoch.to_string(),
            format!("{:.6}", l.train_loss),
            format!("{:.6}", l.val_loss),
            format!("{:e}", l.lr),
        ]
    });
    let text = cfg.provenance().csv_comment()
        + &csv_text(&["epoch", "train_loss", "val_loss", "lr"], rows)?;
    write_file(&dir.join("train_log.csv"), text)?;
    Ok(ckpt)
}

/// Pooled numbers written to `summary.json` of a crossval bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalSummary {
    pub provenance: Provenance,
    pub videos: usize,
    pub folds: usize,
    pub accuracy_15: Option<f64>,
    pub macro_f1_15: Option<f64>,
    pub accuracy_3: f64,
    pub macro_f1_3: f64,
}

fn to_three(mode: ClassMode, pred: usize) -> usize {
    match mode {
        ClassMode::Three => pred,
        _ => PainLabel::from_id(pred)
            .expect("valid class")
            .collapse()
            .id(),
    }
}

fn phase_table_csv(table: &PhaseTable) -> Result<String> {
    let mut header = vec!["condition"];
    header.extend(Phase::ALL.iter().map(|p| p.name()));
    let rows = table.rows.iter().map(|(name, cells)| {
        let mut r = vec![name.clone()];
        r.extend(
            cells
                .iter()
                .map(|c| c.map(|v| format!("{v:.4}")).unwrap_or_default()),
        );
        r
    });
    csv_text(&header, rows)
}

/// Per-mouse ordinal series from pooled 15-class predictions. Rows
/// without a condition (a `D0` baseline of unknown group) are left out.
pub fn mouse_series(manifest: &DatasetManifest, preds: &[usize]) -> Vec<MouseSeries> {
    let mut by_mouse: BTreeMap<String, MouseSeries> = BTreeMap::new();
    for (row, &pred) in manifest.rows.iter().zip(preds) {
        let Some(cond) = row.condition else { continue };
        let Some(true_ordinal) = cond.ordinal(row.timepoint) else {
            continue;
        };
        let mouse = row.mouse_id.clone().unwrap_or_else(|| row.video_id());
        let pred_tp = PainLabel::from_id(pred).expect("valid class").timepoint();
        let entry = by_mouse
            .entry(format!("{}/{mouse}", cond.name()))
            .or_insert_with(|| MouseSeries {
                mouse_id: mouse,
                condition: cond,
                points: Vec::new(),
            });
        entry.points.push(SeriesPoint {
            timepoint: row.timepoint,
            true_ordinal,
            pred_ordinal: cond.ordinal_floor(pred_tp),
        });
    }
    let mut out: Vec<MouseSeries> = by_mouse.into_values().collect();
    for s in &mut out {
        s.points.sort_by_key(|p| p.timepoint);
    }
    out
}

fn fifteen_names() -> Vec<String> {
    PainLabel::all().map(|l| l.short_name()).collect()
}

fn three_names() -> Vec<String> {
    ThreeClass::ALL
        .iter()
        .map(|c| c.name().to_string())
        .collect()
}

fn confusion_csv(cm: &ConfusionMatrix, names: &[String]) -> Result<String> {
    let mut header = vec!["truth\\pred".to_string()];
    header.extend(names.iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = cm
        .normalized()
        .iter()
        .zip(names)
        .map(|(row, n)| {
            let mut r = vec![n.clone()];
            r.extend(row.iter().map(|v| format!("{v:.4}")));
            r
        })
        .collect::<Vec<_>>();
    csv_text(&header, rows)
}

/// Writes a crossval bundle for an already computed result.
pub fn write_crossval_bundle(
    cfg: &RunConfig,
    manifest: &DatasetManifest,
    result: &CrossvalResult,
    dir: &Path,
) -> Result<CrossvalSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let prov = cfg.provenance();
    let comment = prov.csv_comment();
    let k_out = cfg.classes.n_outputs();
    let preds3: Vec<usize> = result
        .preds
        .iter()
        .map(|&p| to_three(cfg.classes, p))
        .collect();
    let truths3: Vec<usize> = manifest
        .rows
        .iter()
        .map(|r| r.label.collapse().id())
        .collect();

    let mut fold_of = vec![0; manifest.len()];
    for f in &result.folds {
        for &i in &f.test {
            fold_of[i] = f.fold;
        }
        f.checkpoint_with_tag(cfg)
            .save(dir.join(format!("fold_{}.mpck", f.fold)))?;
    }

    // per-fold and pooled metrics
    let mut metric_rows = Vec::new();
    let mut push = |scope: String, classes: &str, m: PooledMetrics| {
        metric_rows.push(vec![
            scope,
            classes.to_string(),
            format!("{:.6}", m.accuracy),
            format!("{:.6}", m.macro_f1),
        ]);
    };
    let fifteen = cfg.classes != ClassMode::Three;
    for f in &result.folds {
        let truths: Vec<usize> = f.test.iter().map(|&i| result.truths[i]).collect();
        if fifteen {
            push(
                format!("fold{}", f.fold),
                "15",
                crate::eval::pooled_metrics(&f.preds, &truths, k_out)?,
            );
        }
        let p3: Vec<usize> = f.preds.iter().map(|&p| to_three(cfg.classes, p)).collect();
        let t3: Vec<usize> = f.test.iter().map(|&i| truths3[i]).collect();
        push(
            format!("fold{}", f.fold),
            "3",
            crate::eval::pooled_metrics(&p3, &t3, 3)?,
        );
    }
    let pooled15 = if fifteen {
        Some(result.metrics(k_out)?)
    } else {
        None
    };
    if let Some(m) = pooled15 {
        push("pooled".into(), "15", m);
    }
    let pooled3 = crate::eval::pooled_metrics(&preds3, &truths3, 3)?;
    push("pooled".into(), "3", pooled3);
    write_file(
        &dir.join("metrics.csv"),
        comment.clone() + &csv_text(&["scope", "classes", "accuracy", "macro_f1"], metric_rows)?,
    )?;

    let pred_rows = manifest.rows.iter().enumerate().map(|(i, r)| {
        vec![
            r.video_id(),
            fold_of[i].to_string(),
            result.truths[i].to_string(),
            result.preds[i].to_string(),
            truths3[i].to_string(),
            preds3[i].to_string(),
        ]
    });
    write_file(
        &dir.join("predictions.csv"),
        comment.clone()
            + &csv_text(
                &["video_id", "fold", "truth", "pred", "truth_3", "pred_3"],
                pred_rows,
            )?,
    )?;

    let cm3 = ConfusionMatrix::new(&preds3, &truths3, 3)?;
    write_file(
        &dir.join("confusion_3.csv"),
        comment.clone() + &confusion_csv(&cm3, &three_names())?,
    )?;
    write_file(
        &dir.join("confusion_3.svg"),
        confusion_svg(
            &cm3.normalized(),
            &three_names(),
            &format!("3-class, {}", prov_title(&prov)),
        ),
    )?;
    let table = if fifteen {
        let cm = result.confusion(k_out)?;
        write_file(
            &dir.join("confusion_15.csv"),
            comment.clone() + &confusion_csv(&cm, &fifteen_names())?,
        )?;
        write_file(
            &dir.join("confusion_15.svg"),
            confusion_svg(
                &cm.normalized(),
                &fifteen_names(),
                &format!("15-class, {}", prov_title(&prov)),
            ),
        )?;
        qwk_by_phase(&mouse_series(manifest, &result.preds))?
    } else {
        // timepoints are not predicted in 3-class mode: every cell absent
        qwk_by_phase(&[])?
    };
    write_file(&dir.join("qwk.csv"), comment + &phase_table_csv(&table)?)?;

    let summary = CrossvalSummary {
        provenance: prov,
        videos: manifest.len(),
        folds: result.folds.len(),
        accuracy_15: pooled15.map(|m| m.accuracy),
        macro_f1_15: pooled15.map(|m| m.macro_f1),
        accuracy_3: pooled3.accuracy,
        macro_f1_3: pooled3.macro_f1,
    };
    write_file(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}

fn prov_title(p: &Provenance) -> String {
    format!(
        "mask={} seed={} config {}",
        p.mask,
        p.seed,
        &p.config_hash[..12]
    )
}

trait TaggedCheckpoint {
    fn checkpoint_with_tag(&self, cfg: &RunConfig) -> SsmCheckpoint;
}

impl TaggedCheckpoint for crate::eval::FoldOutcome {
    fn checkpoint_with_tag(&self, cfg: &RunConfig) -> SsmCheckpoint {
        let mut c = self.checkpoint.clone();
        c.meta.pipeline = Some(cfg.pipeline_tag());
        c
    }
}

/// Full k-fold protocol over the manifest; writes the report bundle to
/// [`RunConfig::crossval_dir`].
pub fn cmd_crossval(cfg: &RunConfig) -> Result<CrossvalSummary> {
    cfg.validate()?;
    let manifest = DatasetManifest::load(cfg.manifest_path()?)?;
    let samples = dataset_samples(cfg, &manifest)?;
    let folds = manifest_folds(&manifest, cfg.folds, cfg.seed, cfg.group_by_mouse)?;
    let model = cfg.model_config(cfg.classes.n_outputs());
    let result = run_crossval(&samples, &folds, &model, &cfg.train_config())?;
    write_crossval_bundle(cfg, &manifest, &result, &cfg.crossval_dir())
}

/// Windowed 3-class predictions per cohort, written to `<workdir>/cohort/cohort.csv`.
pub fn cmd_cohort(cfg: &RunConfig, checkpoint: &Path, cohort_list: &Path) -> Result<String> {
    cfg.validate()?;
    let ckpt = SsmCheckpoint::load(checkpoint)?;
    let tag = ckpt
        .meta
        .pipeline
        .clone()
        .ok_or_else(|| Error::PipelineMismatch("checkpoint carries no pipeline tag".into()))?;
    if tag.mask != cfg.mask {
        return Err(Error::PipelineMismatch(format!(
            "checkpoint trained with mask={}, run uses mask={}",
            tag.mask, cfg.mask
        )));
    }
    if tag.t_bins != cfg.t_bins || ckpt.config().input_dim != cfg.input_dim() {
        return Err(Error::PipelineMismatch(format!(
            "checkpoint expects {} inputs over {} time bins, run produces {} over {}",
            ckpt.config().input_dim,
            tag.t_bins,
            cfg.input_dim(),
            cfg.t_bins
        )));
    }
    let n_out = ckpt.config().n_classes;
    if n_out != 3 && n_out != N_CLASSES {
        return Err(Error::PipelineMismatch(format!(
            "checkpoint has {n_out} outputs"
        )));
    }
    let entries = load_video_list(cohort_list)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let run = RunConfig {
        pooling: ckpt.config().pooling,
        ..cfg.clone()
    };
    let grids = load_features(&run, &ids)?;
    let mut cohorts: Vec<(String, Vec<ThreeClass>)> = Vec::new();
    for (e, gs) in entries.iter().zip(&grids) {
        let seq = clip_sequence(gs, ckpt.config().pooling)?;
        let preds = predict_windows(&ckpt.params, &seq, cfg.window, cfg.stride)?;
        let name = e.cohort.clone().unwrap_or_else(|| "all".into());
        let slot = match cohorts.iter().position(|(n, _)| *n == name) {
            Some(i) => i,
            None => {
                cohorts.push((name, Vec::new()));
                cohorts.len() - 1
            }
        };
        for p in preds {
            let three = if n_out == 3 {
                ThreeClass::from_id(p)?
            } else {
                PainLabel::from_id(p)?.collapse()
            };
            cohorts[slot].1.push(three);
        }
    }
    let rows = cohort_report(&cohorts)?;
    let text = cfg.provenance().csv_comment() + &cohort_csv(&rows)?;
    write_file(&cfg.workdir.join("cohort").join("cohort.csv"), &text)?;
    Ok(text)
}

/// Specs used by `mpain synth` under `cfg`.
pub fn synth_specs(cfg: &RunConfig) -> Result<(Vec<SynthClassSpec>, SynthLabeling)> {
    let labeling = match cfg.classes {
        ClassMode::Three => SynthLabeling::Three,
        _ => SynthLabeling::Fifteen,
    };
    let mut specs = match &cfg.synth.specs {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<Vec<SynthClassSpec>>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => match labeling {
            SynthLabeling::Three => default_specs(),
            SynthLabeling::Fifteen => fifteen_class_specs(),
        },
    };
    if cfg.synth.distractor {
        let d = DistractorSpec::top_band(cfg.synth.width, cfg.synth.height);
        for s in &mut specs {
            s.distractor = Some(d.clone());
        }
    }
    Ok((specs, labeling))
}

/// Generates a synthetic dataset under `<workdir>/synth`; returns the manifest path.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let (specs, labeling) = synth_specs(cfg)?;
    let params = SynthParams {
        duration_s: cfg.synth.duration_s,
        fps: Fps::new(cfg.synth.fps_num, cfg.synth.fps_den)?,
        width: cfg.synth.width,
        height: cfg.synth.height,
    };
    let out = cfg.workdir.join("synth");
    generate_dataset(
        &specs,
        labeling,
        cfg.synth.videos_per_class,
        &params,
        cfg.seed,
        &out,
    )?;
    let info = serde_json::json!({
        "provenance": cfg.provenance(),
        "labeling": labeling,
        "params": params,
        "specs": specs,
    });
    write_file(
        &out.join("synth.json"),
        serde_json::to_string_pretty(&info)? + "\n",
    )?;
    Ok(out.join("manifest.csv"))
}

/// Text table of every crossval bundle under the work directory.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let root = cfg.workdir.join("crossval");
    let mut dirs: Vec<PathBuf> = match std::fs::read_dir(&root) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect(),
        Err(e) => return Err(Error::io(&root, e)),
    };
    dirs.sort();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:>6} {:>8} {:>8} {:>8} {:>8}",
        "run", "videos", "acc15", "f1_15", "acc3", "f1_3"
    );
    let fmt = |v: Option<f64>| {
        v.map(|v| format!("{:.2}", 100.0 * v))
            .unwrap_or_else(|| "-".into())
    };
    for d in dirs {
        let path = d.join("summary.json");
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        let s: CrossvalSummary = serde_json::from_str(&text)?;
        let _ = writeln!(
            out,
            "{:<22} {:>6} {:>8} {:>8} {:>8} {:>8}",
            d.file_name().unwrap().to_string_lossy(),
            s.videos,
            fmt(s.accuracy_15),
            fmt(s.macro_f1_15),
            fmt(Some(s.accuracy_3)),
            fmt(Some(s.macro_f1_3)),
        );
        if let Ok(q) = std::fs::read_to_string(d.join("qwk.csv")) {
            for line in q.lines().filter(|l| !l.starts_with('#')) {
                let _ = writeln!(out, "    {line}");
            }
        }
    }
    Ok(out)
}
