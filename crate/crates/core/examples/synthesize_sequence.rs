//! Render a synthetic underwater sequence and write it as a manifest
//! directory (PNG frames, PFM depths, JSON poses and intrinsics).
//!
//! cargo run --release --example synthesize_sequence -- [out_dir]

use std::path::PathBuf;

use uwdepth::experiments::synth;
use uwdepth::uwsim::SceneConfig;

fn main() -> uwdepth::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("uwdepth-reef"));

    let mut scene = SceneConfig::reef(320, 240, 12, 0.1);
    scene.noise_std = 0.005;
    scene.seed = 42;

    let manifest = synth(&scene, &out)?;
    println!("{} frames in {}", manifest.frames.len(), out.display());
    println!("scene description:\n{}", serde_json::to_string_pretty(&scene)?);
    Ok(())
}
