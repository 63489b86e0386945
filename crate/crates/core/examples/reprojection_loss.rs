//! Full training loss of one frame against its two neighbours, with the
//! local-variation weighting and the ULAP correlation term switched on and off.

use uwdepth::experiments::{frame_loss, write_loss, Sequence};
use uwdepth::uwsim::SceneConfig;
use uwdepth::LossConfig;

fn main() -> uwdepth::Result<()> {
    let mut scene = SceneConfig::reef(320, 240, 5, 0.1);
    scene.noise_std = 0.01;
    let seq = Sequence::render(&scene)?;

    let variants = [
        ("default", LossConfig::default()),
        ("no LVW", LossConfig { use_lvw: false, ..LossConfig::default() }),
        ("mean composite", LossConfig { use_min_composite: false, ..LossConfig::default() }),
        ("no correlation", LossConfig { corr_weight: 0.0, ..LossConfig::default() }),
    ];
    println!("{:<16} {:>12} {:>12} {:>12}", "config", "total", "photometric", "corr");
    for (name, cfg) in &variants {
        let r = frame_loss(&seq, 2, cfg)?;
        println!(
            "{name:<16} {:>12.6} {:>12.6} {:>12}",
            r.total,
            r.photometric,
            r.correlation.map(|c| format!("{c:.4}")).unwrap_or_else(|| "-".into())
        );
    }

    let out = std::env::temp_dir().join("uwdepth-loss");
    let r = frame_loss(&seq, 2, &LossConfig::default())?;
    write_loss(&out, 2, &r, &LossConfig::default(), true)?;
    println!("\nloss map and LVW mask written to {}", out.display());
    Ok(())
}
