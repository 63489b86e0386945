//! How well the light attenuation prior `max(B, G) - R` tracks range.
//!
//! The dark sloped seabed keeps range as the main driver of color and shows a
//! strong correlation; the reef scene, whose floor runs out to the horizon,
//! saturates the prior at long range and correlates far less.

use uwdepth::experiments::{ulap_corr, Sequence};
use uwdepth::photoloss::{correlation_loss, ulap};
use uwdepth::uwsim::SceneConfig;

fn main() -> uwdepth::Result<()> {
    for (name, scene) in [
        ("sloped seabed", SceneConfig::sloped_seabed(320, 240, 4)),
        ("reef", SceneConfig::reef(320, 240, 4, 0.1)),
    ] {
        let seq = Sequence::render(&scene)?;
        let r = ulap_corr(&seq)?;
        let f = &seq.frames[0];
        let l_corr = correlation_loss(&f.depth, &ulap(&f.image)?)?;
        println!(
            "{name:<14} pooled r = {:.4} over {} px, frame 0 L_corr = {:.4}",
            r.pooled, r.pooled_count, l_corr
        );
        for (frame, value) in r.per_frame.values.iter().zip(&r.per_frame.means) {
            println!("    frame {frame}: r = {value:.4}");
        }
    }
    Ok(())
}
