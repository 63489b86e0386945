//! Sequence manifests and the batch commands behind the `uwdepth` binary.
//!
//! Every command is a plain function over an in-memory [`Sequence`], so the
//! same code drives the CLI, the examples and the tests. Frame-level work
//! runs on a rayon pool and is reduced in frame order, which keeps every CSV
//! byte-identical across runs and `--jobs` settings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{relative_pose, CameraIntrinsics, IntrinsicsFile, RigidPose};
use crate::homaug::{draw_cutoff, homomorphic_filter, HomomorphicParams, DEFAULT_ORDER};
use crate::image::{load_depth, load_image, save_depth, save_image, DepthMap, ImageBuffer};
use crate::metrics::{
    background_mean, depth_metrics_with, median_scale_with, BackgroundMask, EvalOptions,
    MetricReport,
};
use crate::photoloss::{
    local_variation, normalize_lvw, pearson, source_loss_map, total_loss, ulap, LossBreakdown,
    LossConfig, SourceView,
};
use crate::uwsim::{RenderedFrame, SceneConfig};

/// CSV schema version written in every header comment.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Upper bound on the number of points in a ULAP scatter dump.
pub const SCATTER_SAMPLES: usize = 5000;

fn default_version() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub pose: PathBuf,
    pub timestamp: f64,
}

/// Ordered frame list. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    #[serde(default = "default_version")]
    pub version: u32,
    pub intrinsics: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_preset: Option<String>,
    pub frames: Vec<FrameRecord>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl SequenceManifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidArgument("manifest lists no frames".into()));
        }
        for pair in self.frames.windows(2) {
            if !(pair[1].timestamp > pair[0].timestamp) {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must increase strictly ({} then {})",
                    pair[0].timestamp, pair[1].timestamp
                )));
            }
        }
        let mut paths = vec![self.resolve(&self.intrinsics)];
        for f in &self.frames {
            paths.extend([&f.image, &f.depth, &f.pose].map(|p| self.resolve(p)));
        }
        if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
            return Err(Error::io(
                missing,
                std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file not found"),
            ));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Self = serde_json::from_str(&text)?;
        manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// File stem of frame `i`'s image, used to pair predictions and masks.
    pub fn frame_stem(&self, i: usize) -> String {
        self.frames[i]
            .image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("{i:04}"))
    }
}

/// One frame: image, ground-truth (or provided) depth and camera-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFrame {
    pub image: ImageBuffer,
    pub depth: DepthMap,
    pub pose: RigidPose,
}

impl From<RenderedFrame> for SequenceFrame {
    fn from(f: RenderedFrame) -> Self {
        Self {
            image: f.image,
            depth: f.depth,
            pose: f.pose,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<SequenceFrame>,
}

impl Sequence {
    pub fn new(intrinsics: CameraIntrinsics, frames: Vec<SequenceFrame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            for f in &frames {
                first.image.ensure_same_dims(f.image.dims())?;
                first.image.ensure_same_dims(f.depth.dims())?;
            }
        }
        Ok(Self { intrinsics, frames })
    }

    pub fn from_rendered(intrinsics: CameraIntrinsics, frames: Vec<RenderedFrame>) -> Result<Self> {
        Self::new(intrinsics, frames.into_iter().map(Into::into).collect())
    }

    pub fn render(config: &SceneConfig) -> Result<Self> {
        let scene = config.scene()?;
        Self::from_rendered(scene.intrinsics, config.render()?)
    }

    pub fn load(manifest: &SequenceManifest) -> Result<Self> {
        let intr = IntrinsicsFile::load(manifest.resolve(&manifest.intrinsics))?;
        let frames = manifest
            .frames
            .par_iter()
            .map(|rec| {
                let image = load_image(manifest.resolve(&rec.image))?;
                if image.dims() != (intr.height, intr.width) {
                    return Err(Error::dims((intr.height, intr.width), image.dims()));
                }
                Ok(SequenceFrame {
                    image,
                    depth: load_depth(manifest.resolve(&rec.depth))?,
                    pose: RigidPose::load(manifest.resolve(&rec.pose))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(intr.camera()?, frames)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Transform from frame `target`'s camera to frame `source`'s camera.
    pub fn relative(&self, target: usize, source: usize) -> RigidPose {
        relative_pose(&self.frames[target].pose, &self.frames[source].pose)
    }

    fn source(&self, target: usize, source: usize) -> SourceView<'_> {
        SourceView {
            image: &self.frames[source].image,
            target_to_source: self.relative(target, source),
        }
    }
}

fn in_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(work());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

/// Writes frames, depths, poses, intrinsics and a manifest into `out_dir`.
pub fn synth(config: &SceneConfig, out_dir: impl AsRef<Path>) -> Result<SequenceManifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let scene = config.scene()?;
    let frames = config.render()?;

    let intr = IntrinsicsFile {
        fx: scene.intrinsics.fx,
        fy: scene.intrinsics.fy,
        cx: scene.intrinsics.cx,
        cy: scene.intrinsics.cy,
        width: scene.width,
        height: scene.height,
    };
    intr.save(out_dir.join("intrinsics.json"))?;

    let mut records = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let rec = FrameRecord {
            image: format!("frame_{i:04}.png").into(),
            depth: format!("depth_{i:04}.pfm").into(),
            pose: format!("pose_{i:04}.json").into(),
            timestamp: scene.timestamp(i),
        };
        save_image(&f.image, out_dir.join(&rec.image))?;
        save_depth(&f.depth, out_dir.join(&rec.depth))?;
        f.pose.save(out_dir.join(&rec.pose))?;
        records.push(rec);
    }
    let manifest = SequenceManifest {
        version: 1,
        intrinsics: "intrinsics.json".into(),
        water_preset: match &config.water {
            crate::uwsim::WaterSpec::Preset(name) => Some(name.clone()),
            crate::uwsim::WaterSpec::Explicit { .. } => None,
        },
        frames: records,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Training loss of frame `index` against its immediate neighbours.
pub fn frame_loss(seq: &Sequence, index: usize, cfg: &LossConfig) -> Result<LossBreakdown> {
    if index >= seq.len() {
        return Err(Error::InvalidArgument(format!(
            "frame {index} out of range (sequence has {})",
            seq.len()
        )));
    }
    let neighbours: Vec<usize> = [index.checked_sub(1), Some(index + 1)]
        .into_iter()
        .flatten()
        .filter(|j| *j < seq.len())
        .collect();
    if neighbours.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "frame {index} has no neighbour with a pose"
        )));
    }
    let sources: Vec<SourceView<'_>> = neighbours.iter().map(|j| seq.source(index, *j)).collect();
    let target = &seq.frames[index];
    total_loss(&target.image, &sources, &target.depth, &seq.intrinsics, cfg)
}

/// One-row CSV for [`frame_loss`]; the correlation cell is empty when the
/// term is disabled.
pub fn loss_csv(frame: usize, r: &LossBreakdown, cfg: &LossConfig) -> Result<String> {
    let mut out = csv_preamble("loss", &config_json(cfg, &[("frame", frame.into())])?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frame", "total", "photometric", "correlation", "n"])?;
    w.write_record([
        frame.to_string(),
        r.total.to_string(),
        r.photometric.to_string(),
        r.correlation.map(|c| c.to_string()).unwrap_or_default(),
        r.composite.valid_count().to_string(),
    ])?;
    out.push_str(&csv_body(w)?);
    Ok(out)
}

/// Writes `loss.csv`, and with `maps` also `loss_<frame>.png` (scaled to its
/// peak) and `lvw_<frame>.png`.
pub fn write_loss(
    out_dir: impl AsRef<Path>,
    frame: usize,
    r: &LossBreakdown,
    cfg: &LossConfig,
    maps: bool,
) -> Result<()> {
    let dir = out_dir.as_ref();
    write_text(&dir.join("loss.csv"), &loss_csv(frame, r, cfg)?)?;
    if maps {
        let peak = r.composite.valid_values().fold(0.0, f64::max);
        let scale = if peak > 0.0 { peak } else { 1.0 };
        save_image(&r.composite.to_image(scale), dir.join(format!("loss_{frame:04}.png")))?;
        if let Some(lvw) = &r.lvw_mask {
            save_image(&lvw.to_image(1.0), dir.join(format!("lvw_{frame:04}.png")))?;
        }
    }
    Ok(())
}

/// Mean photometric loss of `target` reconstructed from `source` alone,
/// LVW-weighted when enabled. The correlation term is not included.
pub fn pair_loss(seq: &Sequence, target: usize, source: usize, cfg: &LossConfig) -> Result<(f64, usize)> {
    let t = &seq.frames[target];
    let weights = if cfg.use_lvw {
        Some(normalize_lvw(&local_variation(&t.image, cfg.lvw_window)?)?)
    } else {
        None
    };
    let map = source_loss_map(
        &t.image,
        &seq.source(target, source),
        &t.depth,
        &seq.intrinsics,
        cfg,
        weights.as_ref(),
    )?;
    let n = map.valid_count();
    let mean = map.mean_valid().ok_or_else(|| {
        Error::Degenerate(format!("frames {target} and {source} do not overlap"))
    })?;
    Ok((mean, n))
}

/// One curve: an independent variable against a mean value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub variable: String,
    pub metric: String,
    pub values: Vec<f64>,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
    pub config: serde_json::Value,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = csv_preamble(&self.experiment, &self.config)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([&self.variable, &self.metric, "n"])?;
        for ((v, m), n) in self.values.iter().zip(&self.means).zip(&self.counts) {
            w.write_record([v.to_string(), m.to_string(), n.to_string()])?;
        }
        out.push_str(&csv_body(w)?);
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv()?)
    }

    /// Minimal SVG line chart of `means` against `values`.
    pub fn to_svg(&self) -> String {
        line_chart_svg(
            &format!("{} vs {}", self.metric, self.variable),
            &self.variable,
            &self.metric,
            &self.values,
            &self.means,
        )
    }

    pub fn write_svg(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_svg())
    }
}

fn csv_preamble(name: &str, config: &serde_json::Value) -> Result<String> {
    Ok(format!(
        "# uwdepth {name} v{CSV_SCHEMA_VERSION}\n# config: {}\n",
        serde_json::to_string(config)?
    ))
}

fn csv_body(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv flush: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn config_json(cfg: &LossConfig, extra: &[(&str, serde_json::Value)]) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let serde_json::Value::Object(map) = &mut v {
        for (k, x) in extra {
            map.insert((*k).to_string(), x.clone());
        }
    }
    Ok(v)
}

/// Mean pair loss for every frame gap `1..=max_gap`, pairing each frame
/// `t >= g` with the earlier frame `t - g`, using the sequence's poses and
/// depths.
pub fn frame_gap(seq: &Sequence, max_gap: usize, cfg: &LossConfig, jobs: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    if max_gap == 0 {
        return Err(Error::InvalidArgument("max gap must be >= 1".into()));
    }
    if seq.len() <= max_gap {
        return Err(Error::InvalidArgument(format!(
            "a gap of {max_gap} needs more than {max_gap} frames, sequence has {}",
            seq.len()
        )));
    }
    let pairs: Vec<(usize, usize, usize)> = (1..=max_gap)
        .flat_map(|g| (g..seq.len()).map(move |t| (g, t, t - g)))
        .collect();
    let losses = in_pool(jobs, || {
        pairs
            .par_iter()
            .map(|(_, t, s)| pair_loss(seq, *t, *s, cfg).map(|(l, _)| l))
            .collect::<Result<Vec<f64>>>()
    })??;

    let mut means = Vec::with_capacity(max_gap);
    let mut counts = Vec::with_capacity(max_gap);
    for g in 1..=max_gap {
        let gap_losses: Vec<f64> = pairs
            .iter()
            .zip(&losses)
            .filter(|((pg, _, _), _)| *pg == g)
            .map(|(_, l)| *l)
            .collect();
        means.push(gap_losses.iter().sum::<f64>() / gap_losses.len() as f64);
        counts.push(gap_losses.len());
    }
    Ok(ExperimentResult {
        experiment: "frame-gap".into(),
        variable: "gap".into(),
        metric: "mean_loss".into(),
        values: (1..=max_gap).map(|g| g as f64).collect(),
        means,
        counts,
        config: config_json(cfg, &[("max_gap", max_gap.into())])?,
    })
}

/// Mean consecutive-pair loss for each `alpha`.
pub fn alpha_sweep(seq: &Sequence, alphas: &[f64], cfg: &LossConfig, jobs: usize) -> Result<ExperimentResult> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha list is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidArgument(format!("alpha {a} outside [0, 1]")));
    }
    if seq.len() < 2 {
        return Err(Error::InvalidArgument("alpha sweep needs at least 2 frames".into()));
    }
    let mut means = Vec::with_capacity(alphas.len());
    let mut counts = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let c = cfg.with_alpha(alpha);
        let losses = in_pool(jobs, || {
            (1..seq.len())
                .into_par_iter()
                .map(|t| pair_loss(seq, t, t - 1, &c).map(|(l, _)| l))
                .collect::<Result<Vec<f64>>>()
        })??;
        means.push(losses.iter().sum::<f64>() / losses.len() as f64);
        counts.push(losses.len());
    }
    Ok(ExperimentResult {
        experiment: "alpha-sweep".into(),
        variable: "alpha".into(),
        metric: "mean_loss".into(),
        values: alphas.to_vec(),
        means,
        counts,
        config: config_json(cfg, &[("alphas", alphas.into())])?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UlapCorrResult {
    /// Pearson coefficient over all valid pixels of all frames.
    pub pooled: f64,
    pub pooled_count: usize,
    /// Per-frame coefficients; frames with constant depth or prior are skipped.
    pub per_frame: ExperimentResult,
    /// Evenly strided `(depth, ulap)` sample for scatter plots.
    pub samples: Vec<(f64, f64)>,
}

impl UlapCorrResult {
    pub fn summary_csv(&self) -> Result<String> {
        let mut out = csv_preamble("ulap-corr-summary", &self.per_frame.config)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pooled_pearson", "n"])?;
        w.write_record([self.pooled.to_string(), self.pooled_count.to_string()])?;
        out.push_str(&csv_body(w)?);
        Ok(out)
    }

    pub fn scatter_csv(&self) -> Result<String> {
        let mut out = csv_preamble("ulap-scatter", &self.per_frame.config)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["depth", "ulap"])?;
        for (d, u) in &self.samples {
            w.write_record([d.to_string(), u.to_string()])?;
        }
        out.push_str(&csv_body(w)?);
        Ok(out)
    }

    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let dir = out_dir.as_ref();
        self.per_frame.write_csv(dir.join("ulap_corr.csv"))?;
        write_text(&dir.join("ulap_corr_summary.csv"), &self.summary_csv()?)?;
        write_text(&dir.join("ulap_scatter.csv"), &self.scatter_csv()?)
    }
}

/// Correlation between the ULAP prior and depth, pooled and per frame.
pub fn ulap_corr(seq: &Sequence) -> Result<UlapCorrResult> {
    let mut all_d = Vec::new();
    let mut all_u = Vec::new();
    let (mut values, mut means, mut counts) = (Vec::new(), Vec::new(), Vec::new());
    for (i, f) in seq.frames.iter().enumerate() {
        let u = ulap(&f.image)?;
        let (d, p): (Vec<f64>, Vec<f64>) = f
            .depth
            .data()
            .iter()
            .zip(f.depth.valid())
            .zip(u.values())
            .filter_map(|((d, ok), u)| ok.then_some((*d, *u)))
            .unzip();
        if let Ok(r) = pearson(&d, &p) {
            values.push(i as f64);
            means.push(r);
            counts.push(d.len());
        }
        all_d.extend(d);
        all_u.extend(p);
    }
    let pooled = pearson(&all_d, &all_u)?;
    let stride = all_d.len().div_ceil(SCATTER_SAMPLES).max(1);
    let samples = all_d
        .iter()
        .zip(&all_u)
        .step_by(stride)
        .map(|(d, u)| (*d, *u))
        .collect();
    Ok(UlapCorrResult {
        pooled,
        pooled_count: all_d.len(),
        per_frame: ExperimentResult {
            experiment: "ulap-corr".into(),
            variable: "frame".into(),
            metric: "pearson".into(),
            values,
            means,
            counts,
            config: serde_json::json!({ "frames": seq.len() }),
        },
        samples,
    })
}

/// How `augment` chooses the cutoff frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffChoice {
    Fixed(f64),
    Random,
}

impl std::str::FromStr for CutoffChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "random" {
            return Ok(CutoffChoice::Random);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("cutoff must be a number or 'random', got {s:?}")))?;
        HomomorphicParams::new(v, DEFAULT_ORDER)?;
        Ok(CutoffChoice::Fixed(v))
    }
}

impl CutoffChoice {
    pub fn resolve(&self, seed: u64) -> f64 {
        match self {
            CutoffChoice::Fixed(v) => *v,
            CutoffChoice::Random => draw_cutoff(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentOptions {
    pub cutoff: CutoffChoice,
    pub seed: u64,
    pub preserve_mean: bool,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            cutoff: CutoffChoice::Random,
            seed: 0,
            preserve_mean: false,
        }
    }
}

impl AugmentOptions {
    fn params(&self, seed: u64) -> Result<HomomorphicParams> {
        let mut p = HomomorphicParams::new(self.cutoff.resolve(seed), DEFAULT_ORDER)?;
        p.preserve_mean = self.preserve_mean;
        Ok(p)
    }
}

/// Filters one image; returns it with the cutoff used.
pub fn augment_image(img: &ImageBuffer, opts: &AugmentOptions) -> Result<(ImageBuffer, f64)> {
    let params = opts.params(opts.seed)?;
    Ok((homomorphic_filter(img, &params)?, params.cutoff))
}

/// Augments one PNG into `out_dir` under the same file name.
pub fn augment_file(
    input: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    opts: &AugmentOptions,
) -> Result<(PathBuf, f64)> {
    let input = input.as_ref();
    let name = input
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", input.display())))?;
    let (out, f0) = augment_image(&load_image(input)?, opts)?;
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    save_image(&out, &path)?;
    Ok((path, f0))
}

/// Augments every image of a manifest into `out_dir` (same file names) and
/// writes `augment.csv` with the cutoff used per frame. Frame `i` draws with
/// seed `opts.seed + i`.
pub fn augment_manifest(
    manifest: &SequenceManifest,
    out_dir: impl AsRef<Path>,
    opts: &AugmentOptions,
    jobs: usize,
) -> Result<Vec<f64>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cutoffs = in_pool(jobs, || {
        manifest
            .frames
            .par_iter()
            .enumerate()
            .map(|(i, rec)| {
                let img = load_image(manifest.resolve(&rec.image))?;
                let frame_opts = AugmentOptions {
                    seed: opts.seed.wrapping_add(i as u64),
                    ..*opts
                };
                let (out, f0) = augment_image(&img, &frame_opts)?;
                let name = rec
                    .image
                    .file_name()
                    .ok_or_else(|| Error::InvalidArgument("frame image has no file name".into()))?;
                save_image(&out, out_dir.join(name))?;
                Ok(f0)
            })
            .collect::<Result<Vec<f64>>>()
    })??;

    let mut text = csv_preamble(
        "augment",
        &serde_json::json!({ "seed": opts.seed, "preserve_mean": opts.preserve_mean }),
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frame", "image", "f0"])?;
    for (i, (rec, f0)) in manifest.frames.iter().zip(&cutoffs).enumerate() {
        w.write_record([i.to_string(), rec.image.display().to_string(), f0.to_string()])?;
    }
    text.push_str(&csv_body(w)?);
    write_text(&out_dir.join("augment.csv"), &text)?;
    Ok(cutoffs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsResult {
    pub per_frame: Vec<(String, MetricReport)>,
    pub aggregate: MetricReport,
}

impl MetricsResult {
    pub fn to_csv(&self) -> Result<String> {
        let mut out = csv_preamble("metrics", &serde_json::json!({ "frames": self.per_frame.len() }))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["frame"];
        header.extend(MetricReport::CSV_HEADER);
        w.write_record(&header)?;
        for (name, r) in &self.per_frame {
            let mut row = vec![name.clone()];
            row.extend(r.csv_fields());
            w.write_record(&row)?;
        }
        let mut row = vec!["mean".to_string()];
        row.extend(self.aggregate.csv_fields());
        w.write_record(&row)?;
        out.push_str(&csv_body(w)?);
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv()?)
    }

    /// Fixed-width table for terminals.
    pub fn pretty_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "frame", "AbsRel", "SqRel", "RMSE", "RMSElog", "d<1.25", "d<1.25^2", "d<1.25^3", "BGerror"
        );
        let rows = self
            .per_frame
            .iter()
            .map(|(n, r)| (n.as_str(), r))
            .chain(std::iter::once(("mean", &self.aggregate)));
        for (name, r) in rows {
            let bg = r.bg_error.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<14} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8}",
                name, r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.delta1, r.delta2, r.delta3, bg
            );
        }
        s
    }
}

/// Evaluates predicted depths against ground truth. Each frame is scaled by
/// its own median ratio; background error uses the disparity of the scaled
/// prediction.
pub fn evaluate(
    preds: &[DepthMap],
    gts: &[DepthMap],
    masks: Option<&[BackgroundMask]>,
    names: &[String],
    opts: &EvalOptions,
) -> Result<MetricsResult> {
    if preds.len() != gts.len() || names.len() != gts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    if let Some(m) = masks {
        if m.len() != gts.len() {
            return Err(Error::InvalidArgument(format!(
                "{} masks for {} frames",
                m.len(),
                gts.len()
            )));
        }
    }
    let per_frame = preds
        .par_iter()
        .zip(gts)
        .enumerate()
        .map(|(i, (p, g))| {
            let mut report = depth_metrics_with(p, g, opts)?;
            if let Some(masks) = masks {
                let (scaled, _) = median_scale_with(p, g, opts)?;
                report.bg_error = Some(background_mean(&scaled.to_disparity(), &masks[i])?);
            }
            Ok((names[i].clone(), report))
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricReport> = per_frame.iter().map(|(_, r)| *r).collect();
    Ok(MetricsResult {
        aggregate: MetricReport::mean(&reports)?,
        per_frame,
    })
}

/// Loads a background mask PNG; any non-zero sample marks background.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BackgroundMask> {
    let img = load_image(path)?;
    let mask = img.pixels().map(|p| p.iter().any(|v| *v > 0.0)).collect();
    BackgroundMask::new(img.height(), img.width(), mask)
}

pub fn save_mask(mask: &BackgroundMask, path: impl AsRef<Path>) -> Result<()> {
    let data = mask.mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect();
    save_image(&ImageBuffer::new(mask.height, mask.width, 1, data)?, path)
}

/// Reads `<pred_dir>/<stem>.pfm` (and `<mask_dir>/<stem>.png`) for every
/// manifest frame and evaluates against the manifest's depths.
pub fn evaluate_dir(
    pred_dir: impl AsRef<Path>,
    manifest: &SequenceManifest,
    mask_dir: Option<&Path>,
    opts: &EvalOptions,
) -> Result<MetricsResult> {
    let pred_dir = pred_dir.as_ref();
    let names: Vec<String> = (0..manifest.frames.len()).map(|i| manifest.frame_stem(i)).collect();
    let mut preds = Vec::with_capacity(names.len());
    let mut gts = Vec::with_capacity(names.len());
    let mut masks = mask_dir.map(|_| Vec::with_capacity(names.len()));
    for (name, rec) in names.iter().zip(&manifest.frames) {
        let pred_path = pred_dir.join(format!("{name}.pfm"));
        if !pred_path.is_file() {
            return Err(Error::InvalidArgument(format!(
                "missing prediction {} for frame {name}",
                pred_path.display()
            )));
        }
        let pred = load_depth(&pred_path)?;
        let gt = load_depth(manifest.resolve(&rec.depth))?;
        if pred.dims() != gt.dims() {
            return Err(Error::dims(gt.dims(), pred.dims()));
        }
        if let (Some(dir), Some(masks)) = (mask_dir, masks.as_mut()) {
            let m = load_mask(dir.join(format!("{name}.png")))?;
            if (m.height, m.width) != gt.dims() {
                return Err(Error::dims(gt.dims(), (m.height, m.width)));
            }
            masks.push(m);
        }
        preds.push(pred);
        gts.push(gt);
    }
    evaluate(&preds, &gts, masks.as_deref(), &names, opts)
}

/// Standalone SVG polyline chart with axis labels and tick values.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    let (w, h, m) = (480.0, 320.0, 50.0);
    let finite = |v: &[f64]| {
        v.iter()
            .copied()
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (x0, x1) = finite(xs);
    let (y0, y1) = finite(ys);
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let px = |x: f64| m + (x - x0) / span(x0, x1) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0.min(y1)) / span(y0, y1) * (h - 2.0 * m);
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#, h / 2.0, h / 2.0);
    if x0.is_finite() && y0.is_finite() {
        let _ = writeln!(s, r#"<text x="{m}" y="{}" text-anchor="middle">{x0}</text>"#, h - m + 15.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x1}</text>"#, w - m, h - m + 15.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, m - 4.0, h - m);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, m - 4.0, m + 4.0);
    }
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, points.join(" "));
    s.push_str("</svg>\n");
    s
}
