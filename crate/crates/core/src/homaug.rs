//! Homomorphic Butterworth filtering of the luma channel, used as a
//! randomized illumination augmentation.
//!
//! The filter runs on `log(y + ε)` in a DC-centered frequency layout, so the
//! cutoff is a radius measured from the center of the spectrum in frequency
//! bins. Chroma is carried through untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::image::{rgb_to_yuv, yuv_to_rgb, ImageBuffer, YuvImage};

/// Guard added to luma before the logarithm.
pub const LOG_EPSILON: f64 = 1e-6;

/// Upper end of the random cutoff draw; the lower end is 0.
pub const MAX_RANDOM_CUTOFF: f64 = 250.0;

/// Butterworth order used by [`augment`].
pub const DEFAULT_ORDER: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomomorphicParams {
    pub cutoff: f64,
    pub order: u32,
    /// Add the input's mean log-luma back after filtering. Off by default,
    /// in which case a removed DC term exponentiates to a geometric mean of 1.
    pub preserve_mean: bool,
}

impl HomomorphicParams {
    pub fn new(cutoff: f64, order: u32) -> Result<Self> {
        if !(cutoff >= 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cutoff must be >= 0, got {cutoff}"
            )));
        }
        if order == 0 {
            return Err(Error::InvalidArgument("filter order must be >= 1".into()));
        }
        Ok(Self {
            cutoff,
            order,
            preserve_mean: false,
        })
    }

    pub fn preserving_mean(mut self) -> Self {
        self.preserve_mean = true;
        self
    }

    /// Cutoff drawn uniformly from `[0, 250]` with the given seed.
    pub fn random(seed: u64) -> Self {
        Self {
            cutoff: draw_cutoff(seed),
            order: DEFAULT_ORDER,
            preserve_mean: false,
        }
    }
}

pub fn draw_cutoff(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(0.0..=MAX_RANDOM_CUTOFF)
}

/// Butterworth high-pass gain for a frequency radius.
///
/// A zero cutoff passes everything, including DC.
#[inline]
pub fn butterworth_gain(radius: f64, cutoff: f64, order: u32) -> f64 {
    if cutoff == 0.0 {
        return 1.0;
    }
    if radius == 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + (cutoff / radius).powi(2 * order as i32))
}

/// Gain grid in centered layout: entry `(r, c)` sits at distance
/// `hypot(r - height/2, c - width/2)` from the spectrum center.
pub fn butterworth_highpass(height: usize, width: usize, cutoff: f64, order: u32) -> Vec<f64> {
    let (cr, cc) = ((height / 2) as f64, (width / 2) as f64);
    let mut grid = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let radius = (r as f64 - cr).hypot(c as f64 - cc);
            grid.push(butterworth_gain(radius, cutoff, order));
        }
    }
    grid
}

fn fft_2d(buf: &mut [Complex<f64>], height: usize, width: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(width, direction);
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(height, direction);
    let mut column = vec![Complex::default(); height];
    for c in 0..width {
        for r in 0..height {
            column[r] = buf[r * width + c];
        }
        col_fft.process(&mut column);
        for r in 0..height {
            buf[r * width + c] = column[r];
        }
    }
}

/// Output of [`filter_log_luma`].
#[derive(Debug, Clone)]
pub struct FilteredLuma {
    /// Filtered log-luma, before exponentiation.
    pub log_luma: Vec<f64>,
    /// Largest imaginary magnitude discarded after the inverse transform.
    pub imaginary_residue: f64,
}

/// High-passes `log(y + ε)` in the Fourier domain.
pub fn filter_log_luma(
    luma: &[f64],
    height: usize,
    width: usize,
    params: &HomomorphicParams,
) -> Result<FilteredLuma> {
    if luma.len() != height * width || luma.is_empty() {
        return Err(Error::InvalidArgument("luma plane size mismatch".into()));
    }
    let mut buf: Vec<Complex<f64>> = luma
        .iter()
        .map(|y| Complex::new((y.max(0.0) + LOG_EPSILON).ln(), 0.0))
        .collect();
    let norm = 1.0 / (height * width) as f64;
    let mean_in = buf.iter().map(|z| z.re).sum::<f64>() * norm;
    fft_2d(&mut buf, height, width, FftDirection::Forward);

    let gain = butterworth_highpass(height, width, params.cutoff, params.order);
    // unshifted bin k sits at centered index (k + n/2) mod n
    for r in 0..height {
        let rs = (r + height / 2) % height;
        for c in 0..width {
            let cs = (c + width / 2) % width;
            buf[r * width + c] *= gain[rs * width + cs];
        }
    }

    fft_2d(&mut buf, height, width, FftDirection::Inverse);
    let mut imaginary_residue: f64 = 0.0;
    let mut log_luma: Vec<f64> = buf
        .iter()
        .map(|z| {
            imaginary_residue = imaginary_residue.max((z.im * norm).abs());
            z.re * norm
        })
        .collect();
    if params.preserve_mean {
        let shift = mean_in - log_luma.iter().sum::<f64>() * norm;
        log_luma.iter_mut().for_each(|l| *l += shift);
    }
    Ok(FilteredLuma {
        log_luma,
        imaginary_residue,
    })
}

/// Filters the luma plane of a YUV image; chroma planes are copied as-is.
pub fn homomorphic_filter_yuv(yuv: &YuvImage, params: &HomomorphicParams) -> Result<YuvImage> {
    let filtered = filter_log_luma(&yuv.y, yuv.height, yuv.width, params)?;
    let y = filtered
        .log_luma
        .iter()
        .map(|l| (l.exp() - LOG_EPSILON).clamp(0.0, 1.0))
        .collect();
    Ok(YuvImage {
        height: yuv.height,
        width: yuv.width,
        y,
        u: yuv.u.clone(),
        v: yuv.v.clone(),
    })
}

/// RGB → YUV, homomorphic high-pass on luma, back to RGB clamped to `[0, 1]`.
pub fn homomorphic_filter(img: &ImageBuffer, params: &HomomorphicParams) -> Result<ImageBuffer> {
    let yuv = homomorphic_filter_yuv(&rgb_to_yuv(img)?, params)?;
    Ok(yuv_to_rgb(&yuv)?.clamped())
}

/// Filters with a cutoff drawn from `U[0, 250]`; returns the cutoff used.
pub fn augment(img: &ImageBuffer, seed: u64) -> Result<(ImageBuffer, f64)> {
    let params = HomomorphicParams::random(seed);
    Ok((homomorphic_filter(img, &params)?, params.cutoff))
}
