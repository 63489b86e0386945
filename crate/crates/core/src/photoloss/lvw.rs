//! Local variation weighting: a normalized local-variance mask that keeps
//! the loss on textured regions and mutes object-less water.

use super::{box_mean, LossMap};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Local variance `E[x²] - E[x]²` over a `k×k` window of the luma image,
/// with edge replication at the borders.
pub fn local_variation(img: &ImageBuffer, k: usize) -> Result<LossMap> {
    let (h, w) = img.dims();
    if k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "window size must be odd, got {k}"
        )));
    }
    if k > h.min(w) {
        return Err(Error::InvalidArgument(format!(
            "window size {k} exceeds image size {h}x{w}"
        )));
    }
    let luma = img.luma();
    let x = luma.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mean = box_mean(x, h, w, k);
    let mean_sq = box_mean(&xx, h, w, k);
    let values = mean
        .iter()
        .zip(&mean_sq)
        .map(|(m, m2)| (m2 - m * m).max(0.0))
        .collect();
    LossMap::new(h, w, values)
}

/// Min-max normalization over the valid pixels of the whole map. A constant
/// map normalizes to all zeros.
pub fn normalize_lvw(sigma: &LossMap) -> Result<LossMap> {
    let (lo, hi) = sigma
        .valid_values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        return Err(Error::InvalidArgument(
            "cannot normalize a map with no valid pixels".into(),
        ));
    }
    let range = hi - lo;
    let values = sigma
        .values()
        .iter()
        .zip(sigma.valid())
        .map(|(v, ok)| {
            if *ok && range > 0.0 {
                (v - lo) / range
            } else {
                0.0
            }
        })
        .collect();
    LossMap::with_mask(sigma.height(), sigma.width(), values, sigma.valid().to_vec())
}

/// Elementwise product of a loss map with weights in `[0, 1]`.
pub fn lvw_weighted_loss(loss: &LossMap, weights: &LossMap) -> Result<LossMap> {
    loss.ensure_same_dims(weights.dims())?;
    if let Some(bad) = weights.valid_values().find(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::InvalidArgument(format!(
            "weight {bad} outside [0, 1]"
        )));
    }
    let values = loss
        .values()
        .iter()
        .zip(weights.values())
        .map(|(l, w)| l * w)
        .collect();
    let valid = loss
        .valid()
        .iter()
        .zip(weights.valid())
        .map(|(a, b)| *a && *b)
        .collect();
    LossMap::with_mask(loss.height(), loss.width(), values, valid)
}
