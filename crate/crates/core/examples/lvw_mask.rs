//! Local variation weighting: flat open water gets weight near 0, textured
//! rock and seabed near 1.

use uwdepth::image::save_image;
use uwdepth::photoloss::{local_variation, normalize_lvw};
use uwdepth::uwsim::SceneConfig;

fn main() -> uwdepth::Result<()> {
    let frames = SceneConfig::reef(320, 240, 1, 0.0).render()?;
    let (image, depth) = (&frames[0].image, &frames[0].depth);

    let out = std::env::temp_dir().join("uwdepth-lvw");
    std::fs::create_dir_all(&out).ok();
    save_image(image, out.join("frame.png"))?;

    for window in [5, 25, 61] {
        let mask = normalize_lvw(&local_variation(image, window)?)?;
        let (mut water, mut nw, mut scene, mut ns) = (0.0, 0, 0.0, 0);
        for (w, hit) in mask.values().iter().zip(depth.valid()) {
            if *hit {
                scene += w;
                ns += 1;
            } else {
                water += w;
                nw += 1;
            }
        }
        println!(
            "window {window:2}: mean weight open water {:.4}, scene {:.4}",
            water / nw as f64,
            scene / ns as f64
        );
        save_image(&mask.to_image(1.0), out.join(format!("lvw_{window}.png")))?;
    }
    println!("masks written to {}", out.display());
    Ok(())
}
