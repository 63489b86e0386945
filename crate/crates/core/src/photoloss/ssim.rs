use super::{box_mean, LossMap};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Stabilizers for a unit dynamic range.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn check_pair(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    a.ensure_same_dims(b.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::InvalidArgument(format!(
            "channel count mismatch: {} vs {}",
            a.channels(),
            b.channels()
        )));
    }
    Ok(())
}

/// Mean absolute difference over channels.
pub fn l1_map(a: &ImageBuffer, b: &ImageBuffer) -> Result<LossMap> {
    check_pair(a, b)?;
    let ch = a.channels() as f64;
    let values = a
        .pixels()
        .zip(b.pixels())
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>() / ch)
        .collect();
    LossMap::new(a.height(), a.width(), values)
}

/// `(1 - SSIM) / 2` from 3×3 uniform local statistics, averaged over channels.
pub fn ssim_dissimilarity_map(a: &ImageBuffer, b: &ImageBuffer) -> Result<LossMap> {
    check_pair(a, b)?;
    ssim_inner(a, b, None)
}

/// As [`ssim_dissimilarity_map`], but window statistics use only pixels with
/// `mask` set, so unsampled neighbours of a warp do not leak into the result.
/// Pixels outside the mask are 0 and invalid.
pub fn ssim_dissimilarity_map_masked(a: &ImageBuffer, b: &ImageBuffer, mask: &[bool]) -> Result<LossMap> {
    check_pair(a, b)?;
    if mask.len() != a.height() * a.width() {
        return Err(Error::InvalidArgument(format!(
            "mask has {} entries for a {}x{} image",
            mask.len(),
            a.height(),
            a.width()
        )));
    }
    let map = ssim_inner(a, b, Some(mask))?;
    LossMap::with_mask(a.height(), a.width(), map.values().to_vec(), mask.to_vec())
}

fn ssim_inner(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&[bool]>) -> Result<LossMap> {
    let (h, w, ch) = (a.height(), a.width(), a.channels());
    let n = h * w;
    let weight: Vec<f64> = match mask {
        Some(m) => m.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; n],
    };
    let coverage = mask.map(|_| box_mean(&weight, h, w, 3));
    let local = |plane: &[f64]| {
        let mut m = box_mean(plane, h, w, 3);
        if let Some(cov) = &coverage {
            for (v, c) in m.iter_mut().zip(cov) {
                *v = if *c > 0.0 { *v / c } else { 0.0 };
            }
        }
        m
    };

    let mut acc = vec![0.0; n];
    for c in 0..ch {
        let x: Vec<f64> = a.data().iter().skip(c).step_by(ch).zip(&weight).map(|(v, k)| v * k).collect();
        let y: Vec<f64> = b.data().iter().skip(c).step_by(ch).zip(&weight).map(|(v, k)| v * k).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

        let mu_x = local(&x);
        let mu_y = local(&y);
        let e_xx = local(&xx);
        let e_yy = local(&yy);
        let e_xy = local(&xy);

        for i in 0..n {
            if weight[i] == 0.0 {
                continue;
            }
            let (mx, my) = (mu_x[i], mu_y[i]);
            let sx = e_xx[i] - mx * mx;
            let sy = e_yy[i] - my * my;
            let sxy = e_xy[i] - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * sxy + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (sx + sy + SSIM_C2);
            acc[i] += ((1.0 - num / den) / 2.0).clamp(0.0, 1.0);
        }
    }
    acc.iter_mut().for_each(|v| *v /= ch as f64);
    LossMap::new(h, w, acc)
}
