//! Homomorphic Butterworth filtering of a rendered frame with uneven
//! illumination, at a few fixed cutoffs and one random draw.

use uwdepth::homaug::{augment, homomorphic_filter, HomomorphicParams};
use uwdepth::image::save_image;
use uwdepth::uwsim::{IlluminationField, SceneConfig};

fn main() -> uwdepth::Result<()> {
    let mut scene = SceneConfig::reef(320, 240, 1, 0.0);
    scene.illumination = Some(IlluminationField { amplitude: 0.5, seed: 9, drift: 0.0 });
    let image = scene.render()?.remove(0).image;

    let out = std::env::temp_dir().join("uwdepth-homaug");
    std::fs::create_dir_all(&out).ok();
    save_image(&image, out.join("input.png"))?;

    let mean = |img: &uwdepth::ImageBuffer| img.luma().data().iter().sum::<f64>() / (320.0 * 240.0);
    println!("input mean luma {:.4}", mean(&image));
    for cutoff in [0.0, 2.0, 10.0, 60.0] {
        let direct = HomomorphicParams::new(cutoff, 2)?;
        let filtered = homomorphic_filter(&image, &direct)?;
        let kept = homomorphic_filter(&image, &direct.preserving_mean())?;
        println!(
            "F0 = {cutoff:5.1}: mean luma {:.4} direct, {:.4} with mean restored",
            mean(&filtered),
            mean(&kept)
        );
        save_image(&filtered, out.join(format!("f0_{cutoff}.png")))?;
        save_image(&kept, out.join(format!("f0_{cutoff}_mean.png")))?;
    }
    let (random, f0) = augment(&image, 7)?;
    println!("random draw (seed 7): F0 = {f0:.2}, mean luma {:.4}", mean(&random));
    save_image(&random, out.join("random.png"))?;
    println!("images written to {}", out.display());
    Ok(())
}
