use super::ScalarMap;
use crate::error::{Error, Result};
use crate::image::{DepthMap, ImageBuffer};

/// Underwater light attenuation prior `max(B, G) - R`, in `[-1, 1]` for
/// in-range images.
pub fn ulap(img: &ImageBuffer) -> Result<ScalarMap> {
    if img.channels() != 3 {
        return Err(Error::InvalidArgument(
            "ULAP needs an RGB image".into(),
        ));
    }
    let values = img.pixels().map(|p| p[2].max(p[1]) - p[0]).collect();
    ScalarMap::new(img.height(), img.width(), values)
}

/// Pearson correlation coefficient of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "sample lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Degenerate(format!(
            "correlation needs at least 2 samples, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if is_constant(a) || is_constant(b) || saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate(
            "correlation of a constant sample is undefined".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// `1 - pearson(depth, prior)` over jointly valid pixels, in `[0, 2]`.
pub fn correlation_loss(depth: &DepthMap, prior: &ScalarMap) -> Result<f64> {
    if depth.dims() != prior.dims() {
        return Err(Error::dims(depth.dims(), prior.dims()));
    }
    let (d, u): (Vec<f64>, Vec<f64>) = depth
        .data()
        .iter()
        .zip(depth.valid())
        .zip(prior.values().iter().zip(prior.valid()))
        .filter_map(|((d, dv), (u, uv))| (*dv && *uv).then_some((*d, *u)))
        .unzip();
    Ok(1.0 - pearson(&d, &u)?)
}
