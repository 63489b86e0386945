//! Depth evaluation: median scale alignment, the standard error/accuracy
//! suite and the background disparity error.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::DepthMap;

/// Accuracy thresholds `1.25^i`, i = 1..3.
pub const DELTA_BASE: f64 = 1.25;

/// One evaluation row. Field order follows the usual results-table layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Mean background disparity (1/m); only set when masks are supplied.
    pub bg_error: Option<f64>,
    pub pixel_count: usize,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 9] = [
        "abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3", "bg_error",
        "pixel_count",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.abs_rel.to_string(),
            self.sq_rel.to_string(),
            self.rmse.to_string(),
            self.rmse_log.to_string(),
            self.delta1.to_string(),
            self.delta2.to_string(),
            self.delta3.to_string(),
            self.bg_error.map(|b| b.to_string()).unwrap_or_default(),
            self.pixel_count.to_string(),
        ]
    }

    /// Mean of every field over `reports`; pixel counts are summed.
    pub fn mean(reports: &[MetricReport]) -> Result<MetricReport> {
        if reports.is_empty() {
            return Err(Error::InvalidArgument("no reports to aggregate".into()));
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let bg: Option<Vec<f64>> = reports.iter().map(|r| r.bg_error).collect();
        Ok(MetricReport {
            abs_rel: avg(|r| r.abs_rel),
            sq_rel: avg(|r| r.sq_rel),
            rmse: avg(|r| r.rmse),
            rmse_log: avg(|r| r.rmse_log),
            delta1: avg(|r| r.delta1),
            delta2: avg(|r| r.delta2),
            delta3: avg(|r| r.delta3),
            bg_error: bg.map(|b| b.iter().sum::<f64>() / n),
            pixel_count: reports.iter().map(|r| r.pixel_count).sum(),
        })
    }
}

/// Open-water pixels of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMask {
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
}

impl BackgroundMask {
    pub fn new(height: usize, width: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "mask length {} does not match {height}x{width}",
                mask.len()
            )));
        }
        Ok(Self {
            height,
            width,
            mask,
        })
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// Ignore ground truth beyond this range.
    pub max_depth: Option<f64>,
}

fn check_dims(a: &DepthMap, b: &DepthMap) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dims(b.dims(), a.dims()));
    }
    Ok(())
}

fn joint_pairs(pred: &DepthMap, gt: &DepthMap, opts: &EvalOptions) -> Vec<(f64, f64)> {
    pred.data()
        .iter()
        .zip(pred.valid())
        .zip(gt.data().iter().zip(gt.valid()))
        .filter(|((_, pv), (g, gv))| **pv && **gv && opts.max_depth.is_none_or(|m| **g <= m))
        .map(|((p, _), (g, _))| (*p, *g))
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Scales `pred` by `median(gt) / median(pred)` over jointly valid pixels.
pub fn median_scale(pred: &DepthMap, gt: &DepthMap) -> Result<(DepthMap, f64)> {
    median_scale_with(pred, gt, &EvalOptions::default())
}

pub fn median_scale_with(
    pred: &DepthMap,
    gt: &DepthMap,
    opts: &EvalOptions,
) -> Result<(DepthMap, f64)> {
    check_dims(pred, gt)?;
    let (mut p, mut g): (Vec<f64>, Vec<f64>) = joint_pairs(pred, gt, opts).into_iter().unzip();
    if p.is_empty() {
        return Err(Error::Degenerate(
            "prediction and ground truth share no valid pixel".into(),
        ));
    }
    let mp = median(&mut p);
    if !(mp > 0.0) {
        return Err(Error::Degenerate("prediction median is zero".into()));
    }
    let scale = median(&mut g) / mp;
    Ok((pred.scaled(scale), scale))
}

/// Error and accuracy metrics on already-aligned maps.
pub fn raw_metrics(pred: &DepthMap, gt: &DepthMap, opts: &EvalOptions) -> Result<MetricReport> {
    check_dims(pred, gt)?;
    let pairs = joint_pairs(pred, gt, opts);
    if pairs.is_empty() {
        return Err(Error::Degenerate(
            "prediction and ground truth share no valid pixel".into(),
        ));
    }
    let n = pairs.len() as f64;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log) = (0.0, 0.0, 0.0, 0.0);
    let mut hits = [0usize; 3];
    for (p, g) in &pairs {
        let diff = p - g;
        abs_rel += diff.abs() / g;
        sq_rel += diff * diff / g;
        sq += diff * diff;
        sq_log += (p.ln() - g.ln()).powi(2);
        let ratio = (p / g).max(g / p);
        for (i, hit) in hits.iter_mut().enumerate() {
            if ratio < DELTA_BASE.powi(i as i32 + 1) {
                *hit += 1;
            }
        }
    }
    Ok(MetricReport {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        delta1: hits[0] as f64 / n,
        delta2: hits[1] as f64 / n,
        delta3: hits[2] as f64 / n,
        bg_error: None,
        pixel_count: pairs.len(),
    })
}

/// Median-scales `pred` to `gt`, then evaluates over jointly valid pixels.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap) -> Result<MetricReport> {
    depth_metrics_with(pred, gt, &EvalOptions::default())
}

pub fn depth_metrics_with(
    pred: &DepthMap,
    gt: &DepthMap,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let (scaled, _) = median_scale_with(pred, gt, opts)?;
    raw_metrics(&scaled, gt, opts)
}

/// Mean disparity over the background pixels of one image. Invalid
/// disparity pixels count as zero.
pub fn background_mean(disparity: &DepthMap, mask: &BackgroundMask) -> Result<f64> {
    if disparity.dims() != (mask.height, mask.width) {
        return Err(Error::dims((mask.height, mask.width), disparity.dims()));
    }
    let count = mask.count();
    if count == 0 {
        return Err(Error::InvalidArgument("background mask is empty".into()));
    }
    let sum: f64 = disparity
        .data()
        .iter()
        .zip(disparity.valid())
        .zip(&mask.mask)
        .filter(|(_, m)| **m)
        .map(|((s, ok), _)| if *ok { *s } else { 0.0 })
        .sum();
    Ok(sum / count as f64)
}

/// Background error: per-image mean background disparity, averaged over
/// images.
pub fn bg_error(disparities: &[DepthMap], masks: &[BackgroundMask]) -> Result<f64> {
    if disparities.len() != masks.len() {
        return Err(Error::InvalidArgument(format!(
            "{} disparity maps but {} masks",
            disparities.len(),
            masks.len()
        )));
    }
    if disparities.is_empty() {
        return Err(Error::InvalidArgument("no images".into()));
    }
    let total = disparities
        .iter()
        .zip(masks)
        .map(|(d, m)| background_mean(d, m))
        .sum::<Result<f64>>()?;
    Ok(total / disparities.len() as f64)
}
