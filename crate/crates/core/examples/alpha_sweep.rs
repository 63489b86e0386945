//! Sweep the L1/SSIM balance on a noisy sequence. The loss is affine in
//! alpha, so the curve is a straight line between the pure-SSIM and pure-L1
//! endpoints.

use uwdepth::experiments::{alpha_sweep, Sequence};
use uwdepth::uwsim::SceneConfig;
use uwdepth::LossConfig;

fn main() -> uwdepth::Result<()> {
    let mut scene = SceneConfig::reef(320, 240, 6, 0.1);
    scene.noise_std = 0.01;
    let seq = Sequence::render(&scene)?;

    let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let result = alpha_sweep(&seq, &alphas, &LossConfig::default(), 0)?;
    for (a, loss) in result.values.iter().zip(&result.means) {
        println!("alpha {a:.1}: {loss:.6}");
    }
    let out = std::env::temp_dir().join("uwdepth-alpha-sweep");
    result.write_csv(out.join("alpha_sweep.csv"))?;
    result.write_svg(out.join("alpha_sweep.svg"))?;
    println!("csv and svg in {}", out.display());
    Ok(())
}
