//! Photometric self-supervision: the L1 + SSIM reprojection loss, local
//! variation weighting, the underwater light attenuation prior (ULAP) and the
//! Pearson correlation loss that ties depth to it.

mod lvw;
mod ssim;
mod ulap;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lvw::{local_variation, lvw_weighted_loss, normalize_lvw};
pub use ssim::{l1_map, ssim_dissimilarity_map, ssim_dissimilarity_map_masked, SSIM_C1, SSIM_C2};
pub use ulap::{correlation_loss, pearson, ulap};

use crate::error::{Error, Result};
use crate::geometry::{backproject_masked, reproject, warp, CameraIntrinsics, RigidPose};
use crate::image::{DepthMap, ImageBuffer};

/// Dense per-pixel scalar field with a validity mask.
///
/// Loss maps are non-negative; the ULAP prior is the one signed map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

pub type LossMap = ScalarMap;

impl ScalarMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        let n = height * width;
        Self::with_mask(height, width, values, vec![true; n])
    }

    pub fn with_mask(
        height: usize,
        width: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width || valid.len() != values.len()
        {
            return Err(Error::InvalidArgument(format!(
                "map of {height}x{width} needs {} values and mask entries",
                height * width
            )));
        }
        Ok(Self {
            height,
            width,
            values,
            valid,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter_map(|(v, ok)| ok.then_some(*v))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Mean over valid pixels, `None` when nothing is valid.
    pub fn mean_valid(&self) -> Option<f64> {
        let (sum, n) = self
            .valid_values()
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Same map with validity ANDed against `mask`.
    pub fn restricted(mut self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.valid.len() {
            return Err(Error::InvalidArgument("mask length mismatch".into()));
        }
        self.valid.iter_mut().zip(mask).for_each(|(v, m)| *v &= *m);
        Ok(self)
    }

    /// Gray image of the values (invalid pixels are 0), divided by `scale`.
    pub fn to_image(&self, scale: f64) -> ImageBuffer {
        let data = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| if *ok { v / scale } else { 0.0 })
            .collect();
        ImageBuffer::new(self.height, self.width, 1, data).expect("dims checked at construction")
    }

    fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::dims(self.dims(), other));
        }
        Ok(())
    }
}

fn default_alpha() -> f64 {
    0.1
}
fn default_window() -> usize {
    25
}
fn default_corr_weight() -> f64 {
    1e-5
}
fn default_true() -> bool {
    true
}

/// Loss hyper-parameters. Defaults: `alpha = 0.1`, 25-pixel LVW window,
/// correlation weight `1e-5`, minimum composite over sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the L1 term; SSIM dissimilarity gets `1 - alpha`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_window")]
    pub lvw_window: usize,
    #[serde(default = "default_corr_weight")]
    pub corr_weight: f64,
    #[serde(default = "default_true")]
    pub use_min_composite: bool,
    /// Multiply the reprojection map by the normalized local variation mask.
    #[serde(default = "default_true")]
    pub use_lvw: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            lvw_window: default_window(),
            corr_weight: default_corr_weight(),
            use_min_composite: true,
            use_lvw: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.lvw_window < 3 || self.lvw_window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "lvw_window must be odd and >= 3, got {}",
                self.lvw_window
            )));
        }
        if !(self.corr_weight >= 0.0 && self.corr_weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "corr_weight must be >= 0, got {}",
                self.corr_weight
            )));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Parses JSON, or TOML when the text does not start with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Per-pixel `alpha * L1 + (1 - alpha) * (1 - SSIM) / 2`.
pub fn reprojection_loss_map(
    target: &ImageBuffer,
    warped: &ImageBuffer,
    cfg: &LossConfig,
) -> Result<LossMap> {
    cfg.validate()?;
    let l1 = l1_map(target, warped)?;
    let dssim = ssim_dissimilarity_map(target, warped)?;
    let alpha = cfg.alpha;
    let values = l1
        .values()
        .iter()
        .zip(dssim.values())
        .map(|(l, s)| alpha * l + (1.0 - alpha) * s)
        .collect();
    LossMap::new(target.height(), target.width(), values)
}

/// [`reprojection_loss_map`] restricted to `mask`, with SSIM statistics
/// taken over masked pixels only.
pub fn reprojection_loss_map_masked(
    target: &ImageBuffer,
    warped: &ImageBuffer,
    mask: &[bool],
    cfg: &LossConfig,
) -> Result<LossMap> {
    cfg.validate()?;
    let l1 = l1_map(target, warped)?;
    let dssim = ssim_dissimilarity_map_masked(target, warped, mask)?;
    let alpha = cfg.alpha;
    let values = l1
        .values()
        .iter()
        .zip(dssim.values())
        .map(|(l, s)| alpha * l + (1.0 - alpha) * s)
        .collect();
    LossMap::with_mask(target.height(), target.width(), values, mask.to_vec())
}

/// Per-pixel minimum over the valid entries of each map.
pub fn min_composite(maps: &[LossMap]) -> Result<LossMap> {
    reduce_maps(maps, |vals| vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Per-pixel mean over the valid entries of each map.
pub fn mean_composite(maps: &[LossMap]) -> Result<LossMap> {
    reduce_maps(maps, |vals| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn reduce_maps(maps: &[LossMap], reduce: impl Fn(&[f64]) -> f64) -> Result<LossMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidArgument("no loss maps to combine".into()))?;
    for m in &maps[1..] {
        first.ensure_same_dims(m.dims())?;
    }
    let n = first.values.len();
    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut scratch = Vec::with_capacity(maps.len());
    for i in 0..n {
        scratch.clear();
        scratch.extend(maps.iter().filter(|m| m.valid[i]).map(|m| m.values[i]));
        if !scratch.is_empty() {
            values[i] = reduce(&scratch);
            valid[i] = true;
        }
    }
    LossMap::with_mask(first.height, first.width, values, valid)
}

/// A neighbouring frame and the transform from target camera coordinates to
/// its camera coordinates.
#[derive(Debug, Clone, Copy)]
pub struct SourceView<'a> {
    pub image: &'a ImageBuffer,
    pub target_to_source: RigidPose,
}

#[derive(Debug, Clone)]
pub struct LossBreakdown {
    /// `photometric + corr_weight * correlation`.
    pub total: f64,
    /// Mean of the composite map over its valid pixels.
    pub photometric: f64,
    /// Unweighted correlation loss, when `corr_weight > 0`.
    pub correlation: Option<f64>,
    pub composite: LossMap,
    /// Normalized LVW mask of the target, when enabled.
    pub lvw_mask: Option<LossMap>,
}

/// Reprojection map of one source warped into the target view, LVW-weighted
/// when `weights` is given.
pub fn source_loss_map(
    target: &ImageBuffer,
    source: &SourceView<'_>,
    depth: &DepthMap,
    k: &CameraIntrinsics,
    cfg: &LossConfig,
    weights: Option<&LossMap>,
) -> Result<LossMap> {
    target.ensure_same_dims(depth.dims())?;
    target.ensure_same_dims(source.image.dims())?;
    let points = backproject_masked(depth, k);
    let grid = reproject(&points, &source.target_to_source, k);
    let warped = warp(source.image, &grid)?;
    let map = reprojection_loss_map_masked(target, &warped.image, &warped.mask, cfg)?;
    match weights {
        Some(w) => lvw_weighted_loss(&map, w),
        None => Ok(map),
    }
}

/// Full training objective for one target frame: LVW-weighted reprojection
/// maps of all sources, combined per pixel, averaged over valid pixels, plus
/// the weighted depth/ULAP correlation loss.
pub fn total_loss(
    target: &ImageBuffer,
    sources: &[SourceView<'_>],
    depth: &DepthMap,
    k: &CameraIntrinsics,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one source frame is required".into(),
        ));
    }
    let lvw_mask = if cfg.use_lvw {
        Some(normalize_lvw(&local_variation(target, cfg.lvw_window)?)?)
    } else {
        None
    };
    let maps = sources
        .iter()
        .map(|s| source_loss_map(target, s, depth, k, cfg, lvw_mask.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let composite = if cfg.use_min_composite {
        min_composite(&maps)?
    } else {
        mean_composite(&maps)?
    };
    let photometric = composite.mean_valid().ok_or_else(|| {
        Error::Degenerate("no pixel of the target is covered by any source".into())
    })?;
    let correlation = if cfg.corr_weight > 0.0 {
        Some(correlation_loss(depth, &ulap(target)?)?)
    } else {
        None
    };
    Ok(LossBreakdown {
        total: photometric + cfg.corr_weight * correlation.unwrap_or(0.0),
        photometric,
        correlation,
        composite,
        lvw_mask,
    })
}

/// Separable box mean with edge replication; `k` odd.
pub(crate) fn box_mean(plane: &[f64], height: usize, width: usize, k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let s: f64 = (-r..=r).map(|d| row[clamp(x as isize + d, width)]).sum();
            rows[y * width + x] = s;
        }
    }
    let norm = (k * k) as f64;
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let s: f64 = (-r..=r)
                .map(|d| rows[clamp(y as isize + d, height) * width + x])
                .sum();
            out[y * width + x] = s / norm;
        }
    }
    out
}
