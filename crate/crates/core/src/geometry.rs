//! Pinhole camera, rigid transforms and the reprojection warp.
//!
//! Pixel `(u, v)` is the point `(u, v)` itself: there is no half-pixel
//! offset anywhere in the crate.

use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DepthMap, ImageBuffer};

/// Points closer than this to the camera plane after transformation are
/// treated as behind the camera.
pub const NEAR_PLANE: f64 = 1e-6;

/// Projected coordinates this close to an integer are snapped onto it, so
/// that the identity transform reproduces the pixel lattice exactly.
pub const LATTICE_SNAP: f64 = 1e-9;

const POSE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal: f64, height: usize, width: usize) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
        )
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Ray through pixel `(u, v)` scaled to unit depth: `K⁻¹ [u v 1]ᵀ`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Perspective projection; `None` when the point is behind the near plane.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= NEAR_PLANE {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }
}

/// On-disk intrinsics record: `{fx, fy, cx, cy, width, height}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl IntrinsicsFile {
    pub fn camera(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: Self = serde_json::from_str(&text)?;
        parsed.camera()?;
        Ok(parsed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Proper rigid transform `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > POSE_TOLERANCE {
            return Err(Error::InvalidArgument(
                "rotation is not orthonormal".into(),
            ));
        }
        if (rotation.determinant() - 1.0).abs() > POSE_TOLERANCE {
            return Err(Error::InvalidArgument(
                "rotation determinant is not +1".into(),
            ));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation of `angle` radians about the unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let last = m.row(3);
        if (last[0].abs() + last[1].abs() + last[2].abs() + (last[3] - 1.0).abs()) > POSE_TOLERANCE
        {
            return Err(Error::InvalidArgument(
                "pose matrix bottom row must be [0 0 0 1]".into(),
            ));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Row-major 4×4 rows.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_matrix();
        std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        Self::from_matrix(&Matrix4::from_fn(|r, c| rows[r][c]))
    }

    /// Reads a camera-to-world pose stored as a JSON 4×4 row-major matrix
    /// (nested rows or a flat list of 16 numbers).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum PoseJson {
            Rows([[f64; 4]; 4]),
            Flat(Vec<f64>),
        }
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match serde_json::from_str::<PoseJson>(&text)? {
            PoseJson::Rows(rows) => Self::from_rows(&rows),
            PoseJson::Flat(v) if v.len() == 16 => {
                Self::from_matrix(&Matrix4::from_row_slice(&v))
            }
            PoseJson::Flat(v) => Err(Error::InvalidArgument(format!(
                "pose needs 16 entries, got {}",
                v.len()
            ))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_rows())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// `a ∘ b`: apply `b` first, then `a`.
pub fn compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    RigidPose {
        rotation: a.rotation * b.rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

pub fn invert(a: &RigidPose) -> RigidPose {
    let rt = a.rotation.transpose();
    RigidPose {
        rotation: rt,
        translation: -(rt * a.translation),
    }
}

/// Transform taking points from the target camera frame into the source
/// camera frame, given both camera-to-world poses.
pub fn relative_pose(target_to_world: &RigidPose, source_to_world: &RigidPose) -> RigidPose {
    compose(&invert(source_to_world), target_to_world)
}

/// Per-pixel 3D points in the camera frame, with a validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    pub height: usize,
    pub width: usize,
    pub points: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

/// Per-pixel continuous target coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    pub height: usize,
    pub width: usize,
    pub coords: Vec<[f64; 2]>,
    pub in_bounds: Vec<bool>,
}

impl PixelGrid {
    /// The source lattice: pixel `(u, v)` maps to `(u, v)`.
    pub fn identity(height: usize, width: usize) -> Self {
        let coords = (0..height)
            .flat_map(|v| (0..width).map(move |u| [u as f64, v as f64]))
            .collect();
        Self {
            height,
            width,
            coords,
            in_bounds: vec![true; height * width],
        }
    }

    /// Lattice shifted by a constant offset, with bounds recomputed.
    pub fn shifted(height: usize, width: usize, dx: f64, dy: f64) -> Self {
        let mut grid = Self::identity(height, width);
        for (c, ok) in grid.coords.iter_mut().zip(grid.in_bounds.iter_mut()) {
            c[0] += dx;
            c[1] += dy;
            *ok = within(c[0], width) && within(c[1], height);
        }
        grid
    }
}

#[inline]
fn within(coord: f64, extent: usize) -> bool {
    coord >= 0.0 && coord <= (extent - 1) as f64
}

#[inline]
fn snap(coord: f64) -> f64 {
    let r = coord.round();
    if (coord - r).abs() < LATTICE_SNAP {
        r
    } else {
        coord
    }
}

/// Back-projects every pixel; fails on the first invalid depth.
pub fn backproject(depth: &DepthMap, k: &CameraIntrinsics) -> Result<PointGrid> {
    let grid = backproject_masked(depth, k);
    if let Some(i) = grid.valid.iter().position(|v| !v) {
        return Err(Error::InvalidDepth {
            x: i % depth.width(),
            y: i / depth.width(),
        });
    }
    Ok(grid)
}

/// Back-projects valid pixels; invalid ones are carried as invalid points.
pub fn backproject_masked(depth: &DepthMap, k: &CameraIntrinsics) -> PointGrid {
    let (h, w) = depth.dims();
    let mut points = Vec::with_capacity(h * w);
    for v in 0..h {
        for u in 0..w {
            let d = depth.value(u, v).unwrap_or(0.0);
            points.push(k.unproject(u as f64, v as f64) * d);
        }
    }
    PointGrid {
        height: h,
        width: w,
        points,
        valid: depth.valid().to_vec(),
    }
}

pub fn backproject_pixel(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    u: usize,
    v: usize,
) -> Result<Vector3<f64>> {
    depth
        .value(u, v)
        .map(|d| k.unproject(u as f64, v as f64) * d)
        .ok_or(Error::InvalidDepth { x: u, y: v })
}

/// Applies `pose` to every point and projects through `k`.
pub fn reproject(points: &PointGrid, pose: &RigidPose, k: &CameraIntrinsics) -> PixelGrid {
    let n = points.points.len();
    let mut coords = Vec::with_capacity(n);
    let mut in_bounds = Vec::with_capacity(n);
    for (p, valid) in points.points.iter().zip(&points.valid) {
        let projected = if *valid {
            k.project(&pose.transform(p))
        } else {
            None
        };
        match projected {
            Some((x, y)) => {
                let (x, y) = (snap(x), snap(y));
                coords.push([x, y]);
                in_bounds.push(within(x, points.width) && within(y, points.height));
            }
            None => {
                coords.push([f64::NAN, f64::NAN]);
                in_bounds.push(false);
            }
        }
    }
    PixelGrid {
        height: points.height,
        width: points.width,
        coords,
        in_bounds,
    }
}

/// Result of sampling a source image through a [`PixelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: ImageBuffer,
    pub mask: Vec<bool>,
}

/// Bilinear inverse warp. Out-of-bounds pixels are zero with `mask = false`.
pub fn warp(source: &ImageBuffer, grid: &PixelGrid) -> Result<Warped> {
    source.ensure_same_dims((grid.height, grid.width))?;
    let (h, w, ch) = (source.height(), source.width(), source.channels());
    let mut data = vec![0.0; h * w * ch];
    for (i, (c, ok)) in grid.coords.iter().zip(&grid.in_bounds).enumerate() {
        if *ok {
            sample_bilinear(source, c[0], c[1], &mut data[i * ch..(i + 1) * ch]);
        }
    }
    Ok(Warped {
        image: ImageBuffer::new(h, w, ch, data)?,
        mask: grid.in_bounds.clone(),
    })
}

/// Bilinear sample at an in-bounds point. Integer coordinates read the
/// stored sample directly.
fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64, out: &mut [f64]) {
    let (w, h) = (img.width(), img.height());
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let a = x - x0 as f64;
    let b = y - y0 as f64;
    for (c, o) in out.iter_mut().enumerate() {
        *o = if a == 0.0 && b == 0.0 {
            img.get(x0, y0, c)
        } else {
            (1.0 - a) * (1.0 - b) * img.get(x0, y0, c)
                + a * (1.0 - b) * img.get(x1, y0, c)
                + (1.0 - a) * b * img.get(x0, y1, c)
                + a * b * img.get(x1, y1, c)
        };
    }
}
