//! Underwater image formation and a synthetic textured-plane renderer.
//!
//! Every rendered frame comes with its clear (pre-medium) radiance, exact
//! depth and exact camera-to-world pose, so reprojection and prior code can
//! be checked against ground truth.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{invert, CameraIntrinsics, RigidPose};
use crate::image::{DepthMap, ImageBuffer};

/// Minimum camera-to-geometry distance accepted by the renderer, meters.
const MIN_CLEARANCE: f64 = 0.05;

/// Medium parameters per R, G, B channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterProperties {
    /// Attenuation coefficient, 1/m.
    pub chi: [f64; 3],
    /// Global (veiling) light.
    pub ambient: [f64; 3],
}

impl WaterProperties {
    pub fn new(chi: [f64; 3], ambient: [f64; 3]) -> Result<Self> {
        if chi.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "attenuation must be non-negative, got {chi:?}"
            )));
        }
        if ambient.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument(format!(
                "global light must lie in [0, 1], got {ambient:?}"
            )));
        }
        Ok(Self { chi, ambient })
    }

    /// Red attenuates fastest, blue-green veiling light.
    pub fn coastal() -> Self {
        Self {
            chi: [0.40, 0.10, 0.07],
            ambient: [0.15, 0.35, 0.45],
        }
    }

    /// No medium at all.
    pub fn air() -> Self {
        Self {
            chi: [0.0; 3],
            ambient: [0.0; 3],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" | "coastal" => Ok(Self::coastal()),
            "air" | "none" => Ok(Self::air()),
            other => Err(Error::InvalidArgument(format!(
                "unknown water preset {other:?} (known: default, coastal, air)"
            ))),
        }
    }
}

impl Default for WaterProperties {
    fn default() -> Self {
        Self::coastal()
    }
}

/// Scalar form of the formation model for one channel.
#[inline]
pub fn medium_radiance(clear: f64, ambient: f64, chi: f64, depth: f64) -> f64 {
    let t = (-chi * depth).exp();
    clear * t + ambient * (1.0 - t)
}

/// Per-channel transmission `exp(-chi * d)` as a 3-channel image.
pub fn transmission(depth: &DepthMap, chi: [f64; 3]) -> Result<ImageBuffer> {
    let (h, w) = depth.dims();
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let d = depth.value(x, y).ok_or(Error::InvalidDepth { x, y })?;
            data.extend(chi.iter().map(|c| (-c * d).exp()));
        }
    }
    ImageBuffer::new(h, w, 3, data)
}

/// `I = J t + A (1 - t)` per channel. Pixels without valid depth are at
/// infinite range and see only the global light.
pub fn apply_medium(
    clear: &ImageBuffer,
    depth: &DepthMap,
    water: &WaterProperties,
) -> Result<ImageBuffer> {
    clear.ensure_same_dims(depth.dims())?;
    if clear.channels() != 3 {
        return Err(Error::InvalidArgument(
            "medium model needs an RGB image".into(),
        ));
    }
    let mut out = clear.clone();
    for (i, px) in out.data_mut().chunks_exact_mut(3).enumerate() {
        let d = depth.valid()[i].then(|| depth.data()[i]);
        for (c, v) in px.iter_mut().enumerate() {
            *v = match d {
                Some(d) => medium_radiance(*v, water.ambient[c], water.chi[c], d),
                None => water.ambient[c],
            };
        }
    }
    Ok(out)
}

/// Pixels with no geometry or with range beyond `horizon` meters.
pub fn background_region(depth: &DepthMap, horizon: f64) -> Vec<bool> {
    depth
        .data()
        .iter()
        .zip(depth.valid())
        .map(|(d, ok)| !*ok || *d > horizon)
        .collect()
}

fn default_base() -> f64 {
    0.30
}
fn default_contrast() -> f64 {
    0.15
}
fn default_cell() -> f64 {
    0.25
}
fn default_tint() -> [f64; 3] {
    [1.0; 3]
}

/// Textured plane. Untilted, it faces the world origin at `z = distance`
/// with its center at `(center[0], center[1], distance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plane {
    pub distance: f64,
    #[serde(default)]
    pub center: [f64; 2],
    /// Rotation about the world x then y axis, degrees.
    #[serde(default)]
    pub tilt_deg: [f64; 2],
    /// Half width and half height in meters; unbounded when absent.
    #[serde(default)]
    pub half_extent: Option<[f64; 2]>,
    pub texture_seed: u64,
    /// Texture lattice spacing in meters.
    #[serde(default = "default_cell")]
    pub texture_cell: f64,
    /// Mean gray level of the texture.
    #[serde(default = "default_base")]
    pub base: f64,
    /// Peak deviation of the texture around `base`.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    /// Per-channel multiplier; `[1, 1, 1]` keeps the texture gray.
    #[serde(default = "default_tint")]
    pub tint: [f64; 3],
}

impl Plane {
    pub fn fronto_parallel(distance: f64, texture_seed: u64) -> Self {
        Self {
            distance,
            center: [0.0; 2],
            tilt_deg: [0.0; 2],
            half_extent: None,
            texture_seed,
            texture_cell: default_cell(),
            base: default_base(),
            contrast: default_contrast(),
            tint: default_tint(),
        }
    }

    fn frame(&self) -> PlaneFrame {
        let [ax, ay] = self.tilt_deg.map(f64::to_radians);
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), ay)
            * nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), ax);
        PlaneFrame {
            origin: Vector3::new(self.center[0], self.center[1], self.distance),
            normal: rot * Vector3::new(0.0, 0.0, -1.0),
            e1: rot * Vector3::x(),
            e2: rot * Vector3::y(),
        }
    }

    fn radiance(&self, a: f64, b: f64) -> [f64; 3] {
        let n = value_noise(self.texture_seed, a / self.texture_cell, b / self.texture_cell);
        let gray = self.base + self.contrast * n;
        self.tint.map(|t| (t * gray).clamp(0.0, 1.0))
    }
}

struct PlaneFrame {
    origin: Vector3<f64>,
    normal: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix64(seed ^ splitmix64((ix as u64).wrapping_mul(0x1F1F_1F1F) ^ splitmix64(iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn smooth_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (s(x - fx), s(y - fy));
    let v00 = lattice(seed, ix, iy);
    let v10 = lattice(seed, ix + 1, iy);
    let v01 = lattice(seed, ix, iy + 1);
    let v11 = lattice(seed, ix + 1, iy + 1);
    let top = v00 + (v10 - v00) * tx;
    let bottom = v01 + (v11 - v01) * tx;
    top + (bottom - top) * ty
}

/// Seeded two-octave value noise in `[-1, 1]`.
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    (2.0 * smooth_noise(seed, x, y) + smooth_noise(splitmix64(seed), 2.0 * x, 2.0 * y)) / 3.0
}

/// Slowly varying multiplicative lighting, re-phased every frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminationField {
    pub amplitude: f64,
    pub seed: u64,
    /// Phase drift per frame, radians.
    #[serde(default)]
    pub drift: f64,
}

impl IlluminationField {
    fn gain(&self, x: f64, y: f64, width: usize, height: usize, frame: usize) -> f64 {
        let r = |k: u64| (splitmix64(self.seed.wrapping_add(k)) >> 11) as f64 / (1u64 << 53) as f64;
        let tau = std::f64::consts::TAU;
        let (f1, f2) = (0.5 + r(1), 0.5 + r(2));
        let (p1, p2) = (tau * r(3), tau * r(4));
        let phase = self.drift * frame as f64;
        let g = 0.6 * (tau * f1 * x / width as f64 + p1 + phase).cos()
            + 0.4 * (tau * f2 * y / height as f64 + p2 - phase).cos();
        (1.0 + self.amplitude * g).max(0.0)
    }
}

/// Scene geometry, camera and trajectory.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub height: usize,
    pub width: usize,
    pub intrinsics: CameraIntrinsics,
    pub planes: Vec<Plane>,
    /// Camera-to-world pose per frame.
    pub trajectory: Vec<RigidPose>,
    pub fps: f64,
    /// Seed of the per-frame pixel noise.
    pub seed: u64,
    pub illumination: Option<IlluminationField>,
}

impl SyntheticScene {
    /// Checks that every camera sits in front of every plane and that
    /// bounded planes lie entirely in front of every camera.
    pub fn validate(&self) -> Result<()> {
        if self.trajectory.is_empty() {
            return Err(Error::InvalidArgument("trajectory is empty".into()));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("image size must be positive".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::InvalidArgument("fps must be positive".into()));
        }
        for (pi, plane) in self.planes.iter().enumerate() {
            if !(plane.texture_cell > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "plane {pi}: texture_cell must be positive"
                )));
            }
            let f = plane.frame();
            for (fi, pose) in self.trajectory.iter().enumerate() {
                let center = pose.translation();
                if f.normal.dot(&(center - f.origin)) <= MIN_CLEARANCE {
                    return Err(Error::InvalidArgument(format!(
                        "frame {fi}: camera is not in front of plane {pi}"
                    )));
                }
                if let Some([hx, hy]) = plane.half_extent {
                    let to_cam = invert(pose);
                    for (sx, sy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                        let corner = f.origin + f.e1 * (sx * hx) + f.e2 * (sy * hy);
                        if to_cam.transform(&corner).z <= MIN_CLEARANCE {
                            return Err(Error::InvalidArgument(format!(
                                "frame {fi}: plane {pi} extends behind the camera"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn timestamp(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub image: ImageBuffer,
    pub clear_image: ImageBuffer,
    pub depth: DepthMap,
    /// Camera-to-world.
    pub pose: RigidPose,
}

/// Ray-casts the planes: clear radiance and z-depth (invalid where no plane
/// is hit).
pub fn rasterize(scene: &SyntheticScene, pose: &RigidPose, frame: usize) -> Result<(ImageBuffer, DepthMap)> {
    let (h, w) = (scene.height, scene.width);
    let frames: Vec<(PlaneFrame, &Plane)> = scene.planes.iter().map(|p| (p.frame(), p)).collect();
    let rot: &Matrix3<f64> = pose.rotation();
    let origin = pose.translation();
    let mut clear = vec![0.0; h * w * 3];
    let mut depth = vec![0.0; h * w];
    for v in 0..h {
        for u in 0..w {
            let dir = rot * scene.intrinsics.unproject(u as f64, v as f64);
            let mut best: Option<(f64, [f64; 3])> = None;
            for (f, plane) in &frames {
                let denom = f.normal.dot(&dir);
                if denom.abs() < 1e-12 {
                    continue;
                }
                // camera z of the hit equals the ray parameter: dir has unit camera z
                let s = f.normal.dot(&(f.origin - origin)) / denom;
                if s <= MIN_CLEARANCE || best.is_some_and(|(b, _)| s >= b) {
                    continue;
                }
                let rel = origin + dir * s - f.origin;
                let (a, b) = (rel.dot(&f.e1), rel.dot(&f.e2));
                if let Some([hx, hy]) = plane.half_extent {
                    if a.abs() > hx || b.abs() > hy {
                        continue;
                    }
                }
                let mut rgb = plane.radiance(a, b);
                if let Some(light) = &scene.illumination {
                    let g = light.gain(u as f64, v as f64, w, h, frame);
                    rgb = rgb.map(|c| (c * g).clamp(0.0, 1.0));
                }
                best = Some((s, rgb));
            }
            if let Some((s, rgb)) = best {
                let i = v * w + u;
                depth[i] = s;
                clear[i * 3..i * 3 + 3].copy_from_slice(&rgb);
            }
        }
    }
    Ok((ImageBuffer::new(h, w, 3, clear)?, DepthMap::new(h, w, depth)?))
}

/// Renders every frame of the trajectory: rasterize, apply the medium, add
/// zero-mean Gaussian noise of `noise_std`, clamp to `[0, 1]`.
pub fn render_sequence(
    scene: &SyntheticScene,
    water: &WaterProperties,
    noise_std: f64,
) -> Result<Vec<RenderedFrame>> {
    scene.validate()?;
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise_std must be >= 0, got {noise_std}"
        )));
    }
    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    scene
        .trajectory
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let (clear_image, depth) = rasterize(scene, pose, i)?;
            let mut image = apply_medium(&clear_image, &depth, water)?;
            if let Some(dist) = &noise {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(scene.seed ^ splitmix64(i as u64)));
                image.data_mut().iter_mut().for_each(|v| *v += dist.sample(&mut rng));
            }
            image.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            Ok(RenderedFrame {
                image,
                clear_image,
                depth,
                pose: *pose,
            })
        })
        .collect()
}

/// Camera path of a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// Explicit camera-to-world 4×4 row-major matrices.
    Poses { camera_to_world: Vec<[[f64; 4]; 4]> },
    /// Start position, per-frame translation and per-frame yaw (about +y).
    ConstantVelocity {
        frames: usize,
        #[serde(default)]
        start: [f64; 3],
        velocity: [f64; 3],
        #[serde(default)]
        yaw_rate_deg: f64,
    },
}

impl TrajectorySpec {
    pub fn poses(&self) -> Result<Vec<RigidPose>> {
        match self {
            TrajectorySpec::Poses { camera_to_world } => {
                camera_to_world.iter().map(RigidPose::from_rows).collect()
            }
            TrajectorySpec::ConstantVelocity {
                frames,
                start,
                velocity,
                yaw_rate_deg,
            } => Ok((0..*frames)
                .map(|i| {
                    let k = i as f64;
                    RigidPose::from_axis_angle(
                        Vector3::y(),
                        (yaw_rate_deg * k).to_radians(),
                        Vector3::from(*start) + Vector3::from(*velocity) * k,
                    )
                })
                .collect()),
        }
    }
}

/// Water given by preset name or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WaterSpec {
    Preset(String),
    Explicit { chi: [f64; 3], ambient: [f64; 3] },
}

impl WaterSpec {
    pub fn resolve(&self) -> Result<WaterProperties> {
        match self {
            WaterSpec::Preset(name) => WaterProperties::preset(name),
            WaterSpec::Explicit { chi, ambient } => WaterProperties::new(*chi, *ambient),
        }
    }
}

impl Default for WaterSpec {
    fn default() -> Self {
        WaterSpec::Preset("default".into())
    }
}

/// Camera block of a scene file; the principal point defaults to the
/// image center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    #[serde(default)]
    pub fy: Option<f64>,
    #[serde(default)]
    pub cx: Option<f64>,
    #[serde(default)]
    pub cy: Option<f64>,
}

fn default_fps() -> f64 {
    10.0
}

/// JSON scene description consumed by `uwdepth synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub camera: CameraSpec,
    pub planes: Vec<Plane>,
    pub trajectory: TrajectorySpec,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default)]
    pub water: WaterSpec,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub illumination: Option<IlluminationField>,
}

impl SceneConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn scene(&self) -> Result<SyntheticScene> {
        let c = &self.camera;
        let intrinsics = CameraIntrinsics::new(
            c.fx,
            c.fy.unwrap_or(c.fx),
            c.cx.unwrap_or((c.width as f64 - 1.0) / 2.0),
            c.cy.unwrap_or((c.height as f64 - 1.0) / 2.0),
        )?;
        let scene = SyntheticScene {
            height: c.height,
            width: c.width,
            intrinsics,
            planes: self.planes.clone(),
            trajectory: self.trajectory.poses()?,
            fps: self.fps,
            seed: self.seed,
            illumination: self.illumination,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn water(&self) -> Result<WaterProperties> {
        self.water.resolve()
    }

    pub fn render(&self) -> Result<Vec<RenderedFrame>> {
        render_sequence(&self.scene()?, &self.water()?, self.noise_std)
    }

    /// Camera gliding forward over a flat seafloor toward two rocks, with
    /// open water above the horizon. `step` is the per-frame advance in meters.
    pub fn reef(width: usize, height: usize, frames: usize, step: f64) -> Self {
        let floor = Plane {
            center: [0.0, 1.2],
            tilt_deg: [-90.0, 0.0],
            texture_cell: 0.2,
            ..Plane::fronto_parallel(0.0, 11)
        };
        let near_rock = Plane {
            center: [0.9, 0.4],
            tilt_deg: [0.0, 25.0],
            half_extent: Some([0.7, 0.8]),
            texture_cell: 0.12,
            base: 0.25,
            ..Plane::fronto_parallel(5.0, 23)
        };
        let far_rock = Plane {
            center: [-1.6, 0.0],
            tilt_deg: [10.0, -20.0],
            half_extent: Some([1.2, 1.2]),
            texture_cell: 0.3,
            ..Plane::fronto_parallel(9.0, 31)
        };
        Self {
            planes: vec![floor, near_rock, far_rock],
            trajectory: TrajectorySpec::ConstantVelocity {
                frames,
                start: [0.0; 3],
                velocity: [0.0, 0.0, step],
                yaw_rate_deg: 0.0,
            },
            ..Self::approaching_plane(width, height, frames, 1.0, step)
        }
    }

    /// Dark, low-contrast seabed sloping away from the camera over roughly
    /// 2 to 14 m, so range dominates appearance.
    pub fn sloped_seabed(width: usize, height: usize, frames: usize) -> Self {
        let seabed = Plane {
            tilt_deg: [-60.0, 0.0],
            base: 0.15,
            contrast: 0.08,
            ..Plane::fronto_parallel(4.0, 3)
        };
        Self {
            planes: vec![seabed],
            ..Self::approaching_plane(width, height, frames, 4.0, 0.2)
        }
    }

    /// Camera translating along its optical axis toward a single unbounded
    /// fronto-parallel plane.
    pub fn approaching_plane(
        width: usize,
        height: usize,
        frames: usize,
        distance: f64,
        step: f64,
    ) -> Self {
        Self {
            camera: CameraSpec {
                width,
                height,
                fx: 0.9 * width as f64,
                fy: None,
                cx: None,
                cy: None,
            },
            planes: vec![Plane::fronto_parallel(distance, 7)],
            trajectory: TrajectorySpec::ConstantVelocity {
                frames,
                start: [0.0; 3],
                velocity: [0.0, 0.0, step],
                yaw_rate_deg: 0.0,
            },
            fps: default_fps(),
            water: WaterSpec::default(),
            noise_std: 0.0,
            seed: 0,
            illumination: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{backproject_masked, relative_pose, reproject, warp};

    #[test]
    fn transmission_examples() {
        let d = DepthMap::new(1, 2, vec![std::f64::consts::LN_2, 3.0]).unwrap();
        let t = transmission(&d, [0.0, 1.0, 0.5]).unwrap();
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert!((t.get(0, 0, 1) - 0.5).abs() < 1e-15);
        assert!((t.get(1, 0, 2) - (-1.5f64).exp()).abs() < 1e-15);

        let bad = DepthMap::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            transmission(&bad, [0.1; 3]),
            Err(Error::InvalidDepth { x: 1, y: 0 })
        ));
    }

    #[test]
    fn transmission_decreases_with_depth() {
        let d = DepthMap::from_fn(1, 50, |x, _| 0.1 + x as f64 * 0.5).unwrap();
        let t = transmission(&d, [0.4, 0.1, 0.07]).unwrap();
        for c in 0..3 {
            for x in 1..50 {
                assert!(t.get(x, 0, c) < t.get(x - 1, 0, c));
                assert!(t.get(x, 0, c) > 0.0 && t.get(x, 0, c) <= 1.0);
            }
        }
    }

    #[test]
    fn medium_scalar_and_limits() {
        let water = WaterProperties::new([1.0; 3], [0.0; 3]).unwrap();
        let j = ImageBuffer::filled(1, 1, 3, 1.0).unwrap();
        let d = DepthMap::filled(1, 1, 1.0).unwrap();
        let i = apply_medium(&j, &d, &water).unwrap();
        assert!((i.get(0, 0, 0) - 0.36787944117144233).abs() < 1e-12);

        let water = WaterProperties::coastal();
        let j = ImageBuffer::new(1, 1, 3, vec![0.9, 0.2, 0.6]).unwrap();
        let near = apply_medium(&j, &DepthMap::filled(1, 1, 1e-9).unwrap(), &water).unwrap();
        let far = apply_medium(&j, &DepthMap::filled(1, 1, 1e4).unwrap(), &water).unwrap();
        for c in 0..3 {
            assert!((near.get(0, 0, c) - j.get(0, 0, c)).abs() < 1e-6);
            assert!((far.get(0, 0, c) - water.ambient[c]).abs() < 1e-6);
        }
    }

    #[test]
    fn medium_errors() {
        let water = WaterProperties::coastal();
        let j = ImageBuffer::filled(2, 2, 3, 0.5).unwrap();
        assert!(apply_medium(&j, &DepthMap::filled(2, 3, 1.0).unwrap(), &water).is_err());
        let g = ImageBuffer::filled(2, 2, 1, 0.5).unwrap();
        assert!(apply_medium(&g, &DepthMap::filled(2, 2, 1.0).unwrap(), &water).is_err());
        assert!(WaterProperties::new([-0.1, 0.0, 0.0], [0.0; 3]).is_err());
        assert!(WaterProperties::new([0.1; 3], [1.1, 0.0, 0.0]).is_err());
        assert!(WaterProperties::preset("murky").is_err());
    }

    #[test]
    fn ulap_increases_with_depth_for_dark_gray_texture() {
        let water = WaterProperties::coastal();
        for j in [0.1, 0.2, 0.3, 0.45] {
            let mut prev = f64::NEG_INFINITY;
            for step in 0..400 {
                let d = 0.1 + step as f64 * 0.1;
                let rgb: Vec<f64> = (0..3)
                    .map(|c| medium_radiance(j, water.ambient[c], water.chi[c], d))
                    .collect();
                let u = rgb[2].max(rgb[1]) - rgb[0];
                assert!(u > prev, "j={j} d={d}");
                prev = u;
            }
        }
    }

    #[test]
    fn background_examples() {
        let full = DepthMap::filled(2, 4, 3.0).unwrap();
        assert!(background_region(&full, 20.0).iter().all(|b| !b));

        let half = DepthMap::from_fn(2, 4, |x, _| if x < 2 { 3.0 } else { 0.0 }).unwrap();
        let m = background_region(&half, 20.0);
        assert_eq!(m, vec![false, false, true, true, false, false, true, true]);

        let far = DepthMap::filled(2, 2, 25.0).unwrap();
        assert!(background_region(&far, 20.0).iter().all(|b| *b));
    }

    #[test]
    fn plane_trajectory_depths_are_analytic() {
        let cfg = SceneConfig::approaching_plane(40, 30, 5, 3.0, 0.1);
        let frames = cfg.render().unwrap();
        for (i, f) in frames.iter().enumerate() {
            let expected = 3.0 - 0.1 * i as f64;
            assert!(f.depth.valid().iter().all(|v| *v));
            for d in f.depth.data() {
                assert!((d - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rendered_image_is_medium_of_clear_image() {
        let mut cfg = SceneConfig::approaching_plane(32, 24, 3, 4.0, 0.2);
        cfg.planes[0].half_extent = Some([1.0, 5.0]);
        let water = cfg.water().unwrap();
        for f in cfg.render().unwrap() {
            let expected = apply_medium(&f.clear_image, &f.depth, &water).unwrap();
            for (a, b) in f.image.data().iter().zip(expected.data()) {
                assert!((a - b).abs() < 1e-6);
            }
            for (i, px) in f.image.pixels().enumerate() {
                let j = &f.clear_image.data()[i * 3..i * 3 + 3];
                for c in 0..3 {
                    let (lo, hi) = if j[c] < water.ambient[c] {
                        (j[c], water.ambient[c])
                    } else {
                        (water.ambient[c], j[c])
                    };
                    assert!(px[c] >= lo - 1e-12 && px[c] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn static_noiseless_frames_are_identical() {
        let cfg = SceneConfig::approaching_plane(20, 16, 4, 3.0, 0.0);
        let frames = cfg.render().unwrap();
        for f in &frames[1..] {
            assert_eq!(f.image, frames[0].image);
        }
    }

    #[test]
    fn noise_is_seeded() {
        let mut cfg = SceneConfig::approaching_plane(20, 16, 2, 3.0, 0.1);
        cfg.noise_std = 0.02;
        let a = cfg.render().unwrap();
        let b = cfg.render().unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].image, a[0].clear_image);
        cfg.seed = 1;
        assert_ne!(cfg.render().unwrap()[0].image, a[0].image);
    }

    #[test]
    fn left_half_plane_leaves_right_half_background() {
        let mut cfg = SceneConfig::approaching_plane(40, 20, 1, 5.0, 0.0);
        // plane covers x <= 0 in world, i.e. the left half of the frame
        cfg.planes[0].center = [-50.0, 0.0];
        cfg.planes[0].half_extent = Some([50.0, 50.0]);
        let f = &cfg.render().unwrap()[0];
        let bg = background_region(&f.depth, 100.0);
        for y in 0..20 {
            for x in 0..40 {
                assert_eq!(bg[y * 40 + x], x >= 20, "pixel {x},{y}");
            }
        }
        let water = cfg.water().unwrap();
        assert_eq!(f.image.pixel(39, 0), &water.ambient);
    }

    #[test]
    fn reprojection_reproduces_clear_image() {
        let mut cfg = SceneConfig::approaching_plane(160, 120, 2, 5.0, 0.15);
        cfg.trajectory = TrajectorySpec::ConstantVelocity {
            frames: 2,
            start: [0.0; 3],
            velocity: [0.05, -0.02, 0.15],
            yaw_rate_deg: 0.5,
        };
        cfg.planes.push(Plane {
            half_extent: Some([0.6, 0.4]),
            center: [0.3, 0.2],
            tilt_deg: [10.0, -20.0],
            ..Plane::fronto_parallel(3.0, 99)
        });
        let scene = cfg.scene().unwrap();
        let frames = cfg.render().unwrap();
        let (t, s) = (&frames[0], &frames[1]);
        let rel = relative_pose(&t.pose, &s.pose);
        let grid = reproject(&backproject_masked(&t.depth, &scene.intrinsics), &rel, &scene.intrinsics);
        let warped = warp(&s.clear_image, &grid).unwrap();
        let (mut err, mut n) = (0.0, 0usize);
        for (i, ok) in warped.mask.iter().enumerate() {
            if *ok {
                for c in 0..3 {
                    err += (warped.image.data()[i * 3 + c] - t.clear_image.data()[i * 3 + c]).abs();
                }
                n += 3;
            }
        }
        assert!(n > 10_000);
        let mae = err / n as f64;
        assert!(mae < 2.0 / 255.0, "mae {mae}");
    }

    #[test]
    fn scene_validation() {
        let mut cfg = SceneConfig::approaching_plane(20, 16, 40, 3.0, 0.1);
        assert!(cfg.scene().is_err());
        cfg.trajectory = TrajectorySpec::ConstantVelocity {
            frames: 0,
            start: [0.0; 3],
            velocity: [0.0; 3],
            yaw_rate_deg: 0.0,
        };
        assert!(cfg.scene().is_err());

        let mut cfg = SceneConfig::approaching_plane(20, 16, 1, 3.0, 0.1);
        cfg.planes[0].tilt_deg = [0.0, 80.0];
        cfg.planes[0].half_extent = Some([40.0, 1.0]);
        assert!(cfg.scene().is_err());
    }

    #[test]
    fn scene_config_json() {
        let text = r#"{
            "camera": {"width": 32, "height": 24, "fx": 30},
            "planes": [{"distance": 4, "texture_seed": 3, "tint": [0.9, 1.0, 1.0]}],
            "trajectory": {"kind": "poses", "camera_to_world": [
                [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]],
                [[1,0,0,0.1],[0,1,0,0],[0,0,1,0.2],[0,0,0,1]]
            ]},
            "water": {"chi": [0.5, 0.2, 0.1], "ambient": [0.1, 0.3, 0.4]},
            "noise_std": 0.0
        }"#;
        let cfg = SceneConfig::parse(text).unwrap();
        assert_eq!(cfg.water().unwrap().chi, [0.5, 0.2, 0.1]);
        let scene = cfg.scene().unwrap();
        assert_eq!(scene.trajectory.len(), 2);
        assert_eq!(scene.intrinsics.cx, 15.5);
        let frames = cfg.render().unwrap();
        assert!((frames[1].depth.get(16, 12) - 3.8).abs() < 1e-12);

        let preset = SceneConfig::parse(
            r#"{"camera": {"width": 8, "height": 8, "fx": 8}, "planes": [],
                "trajectory": {"kind": "constant_velocity", "frames": 2, "velocity": [0,0,0]},
                "water": "air"}"#,
        )
        .unwrap();
        assert_eq!(preset.water().unwrap(), WaterProperties::air());
        assert!(SceneConfig::parse(r#"{"camera": {}}"#).is_err());
    }

    #[test]
    fn presets_render() {
        let reef = SceneConfig::reef(40, 30, 2, 0.1).render().unwrap();
        let depth = &reef[0].depth;
        assert!(depth.valid_count() > 0 && depth.valid_count() < 40 * 30);
        assert!(!depth.is_valid(20, 0), "top row should be open water");
        let seabed = SceneConfig::sloped_seabed(40, 30, 2).render().unwrap();
        assert_eq!(seabed[0].depth.valid_count(), 40 * 30);
        assert!(seabed[0].depth.get(20, 0) > seabed[0].depth.get(20, 29));
    }
}
