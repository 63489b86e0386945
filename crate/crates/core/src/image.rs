//! Image and depth buffers, file I/O and the fixed YUV convention.
//!
//! Images are row-major `f64` with interleaved channels and a nominal range
//! of `[0, 1]`. Depth maps carry a per-pixel validity flag: a pixel is valid
//! only when its value is finite and strictly positive.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// BT.601 luma weights.
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Channel samples of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.channels)
    }

    pub fn clamped(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }

    /// Single-channel luma. A 1-channel image is returned unchanged.
    pub fn luma(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .pixels()
            .map(|p| KR * p[0] + KG * p[1] + KB * p[2])
            .collect();
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn ensure_same_dims(&self, other_dims: (usize, usize)) -> Result<()> {
        if self.dims() != other_dims {
            return Err(Error::dims(self.dims(), other_dims));
        }
        Ok(())
    }
}

/// Per-pixel range map in meters with an explicit validity mask.
///
/// The same type stores disparity (1/m), in which case invalid pixels read
/// as zero disparity.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Wraps raw values; non-finite and non-positive entries become invalid.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::InvalidArgument(format!(
                "depth data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        let valid = data.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            height,
            width,
            data,
            valid,
        })
    }

    /// Wraps values with an explicit mask. Pixels flagged valid must still be
    /// finite and positive; offending ones are demoted to invalid.
    pub fn with_mask(height: usize, width: usize, data: Vec<f64>, mask: &[bool]) -> Result<Self> {
        let mut depth = Self::new(height, width, data)?;
        if mask.len() != depth.valid.len() {
            return Err(Error::InvalidArgument("mask length mismatch".into()));
        }
        depth
            .valid
            .iter_mut()
            .zip(mask)
            .for_each(|(v, m)| *v = *v && *m);
        Ok(depth)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(height, width, data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    /// Value at `(x, y)` if valid.
    #[inline]
    pub fn value(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.data[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Multiplies every value by `factor` (> 0), keeping the mask.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|d| d * factor).collect(),
            valid: self.valid.clone(),
        }
    }

    /// Inverse of the valid values; invalid pixels stay invalid (zero disparity).
    pub fn to_disparity(&self) -> Self {
        let data = self
            .data
            .iter()
            .zip(&self.valid)
            .map(|(d, v)| if *v { 1.0 / d } else { 0.0 })
            .collect();
        Self {
            height: self.height,
            width: self.width,
            data,
            valid: self.valid.clone(),
        }
    }
}

/// Planar BT.601 full-range YUV. Chroma is centered on zero.
#[derive(Debug, Clone, PartialEq)]
pub struct YuvImage {
    pub height: usize,
    pub width: usize,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn rgb_to_yuv(img: &ImageBuffer) -> Result<YuvImage> {
    if img.channels() != 3 {
        return Err(Error::InvalidArgument(
            "YUV conversion needs a 3-channel image".into(),
        ));
    }
    let n = img.height() * img.width();
    let (mut y, mut u, mut v) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for p in img.pixels() {
        let luma = KR * p[0] + KG * p[1] + KB * p[2];
        y.push(luma);
        u.push(0.5 * (p[2] - luma) / (1.0 - KB));
        v.push(0.5 * (p[0] - luma) / (1.0 - KR));
    }
    Ok(YuvImage {
        height: img.height(),
        width: img.width(),
        y,
        u,
        v,
    })
}

pub fn yuv_to_rgb(yuv: &YuvImage) -> Result<ImageBuffer> {
    let n = yuv.height * yuv.width;
    if yuv.y.len() != n || yuv.u.len() != n || yuv.v.len() != n {
        return Err(Error::InvalidArgument("YUV plane sizes disagree".into()));
    }
    let mut data = Vec::with_capacity(n * 3);
    for ((y, u), v) in yuv.y.iter().zip(&yuv.u).zip(&yuv.v) {
        let r = y + 2.0 * (1.0 - KR) * v;
        let b = y + 2.0 * (1.0 - KB) * u;
        let g = (y - KR * r - KB * b) / KG;
        data.extend_from_slice(&[r, g, b]);
    }
    ImageBuffer::new(yuv.height, yuv.width, 3, data)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Loads an 8- or 16-bit grayscale or RGB PNG (alpha is dropped).
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let decoder = png::Decoder::new(BufReader::new(open(path)?));
    let mut reader = decoder.read_info()?;
    let (color, depth) = reader.output_color_type();
    let (stored, channels) = match color {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("indexed-color PNG".into()))
        }
    };
    let bytes_per_sample = match depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG bit depth {other:?}"
            )))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let (width, height) = (info.width as usize, info.height as usize);
    let line = info.line_size;

    let mut data = Vec::with_capacity(width * height * channels);
    for row in buf.chunks(line).take(height) {
        for x in 0..width {
            for c in 0..channels {
                let idx = (x * stored + c) * bytes_per_sample;
                let value = if bytes_per_sample == 1 {
                    f64::from(row[idx]) / 255.0
                } else {
                    f64::from(u16::from_be_bytes([row[idx], row[idx + 1]])) / 65535.0
                };
                data.push(value);
            }
        }
    }
    ImageBuffer::new(height, width, channels, data)
}

/// Writes an 8-bit PNG after clamping to `[0, 1]`.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    write_png(img, path.as_ref(), png::BitDepth::Eight, &bytes)
}

/// Writes a 16-bit PNG after clamping to `[0, 1]`.
pub fn save_image_16(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .flat_map(|v| (((v.clamp(0.0, 1.0)) * 65535.0).round() as u16).to_be_bytes())
        .collect();
    write_png(img, path.as_ref(), png::BitDepth::Sixteen, &bytes)
}

fn write_png(img: &ImageBuffer, path: &Path, depth: png::BitDepth, bytes: &[u8]) -> Result<()> {
    let file = BufWriter::new(create(path)?);
    let mut encoder = png::Encoder::new(file, img.width() as u32, img.height() as u32);
    encoder.set_color(if img.channels() == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(depth);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(bytes)?;
    writer.finish()?;
    Ok(())
}

/// Loads a single-channel PFM (`Pf`). Rows are stored bottom-up; the sign of
/// the scale line selects the byte order (negative = little-endian).
pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes)
}

fn parse_pfm(bytes: &[u8]) -> Result<DepthMap> {
    // Header: three whitespace-separated tokens, a single whitespace byte, then raster.
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedDepth("truncated header".into()));
        }
        tokens.push(
            std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| Error::MalformedDepth("non-ascii header".into()))?,
        );
    }
    if pos >= bytes.len() {
        return Err(Error::MalformedDepth("missing raster".into()));
    }
    pos += 1;

    match tokens[0] {
        "Pf" => {}
        "PF" => {
            return Err(Error::MalformedDepth(
                "three-channel PFM is not a depth map".into(),
            ))
        }
        other => return Err(Error::MalformedDepth(format!("bad magic {other:?}"))),
    }
    let parse_dim = |t: &str| {
        t.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| Error::MalformedDepth(format!("bad dimension {t:?}")))
    };
    let width = parse_dim(tokens[1])?;
    let height = parse_dim(tokens[2])?;
    let scale: f64 = tokens[3]
        .parse()
        .ok()
        .filter(|s: &f64| *s != 0.0 && s.is_finite())
        .ok_or_else(|| Error::MalformedDepth(format!("bad scale {:?}", tokens[3])))?;
    let little_endian = scale < 0.0;

    let raster = &bytes[pos..];
    if raster.len() != width * height * 4 {
        return Err(Error::MalformedDepth(format!(
            "raster has {} bytes, header declares {width}x{height}",
            raster.len()
        )));
    }
    let mut data = vec![0.0; width * height];
    for (row_from_bottom, row) in raster.chunks_exact(width * 4).enumerate() {
        let y = height - 1 - row_from_bottom;
        for (x, sample) in row.chunks_exact(4).enumerate() {
            let raw = [sample[0], sample[1], sample[2], sample[3]];
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            data[y * width + x] = f64::from(v);
        }
    }
    DepthMap::new(height, width, data)
}

/// Writes a little-endian `Pf` file. Invalid pixels are stored as 0.
pub fn save_depth(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(depth.data().len() * 4 + 32);
    write!(out, "Pf\n{} {}\n-1.0\n", depth.width(), depth.height()).expect("vec write");
    for y in (0..depth.height()).rev() {
        for x in 0..depth.width() {
            let v = depth.value(x, y).unwrap_or(0.0) as f32;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = create(path)?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}
