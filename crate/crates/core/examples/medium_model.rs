//! The underwater formation model on its own: a clear textured image pushed
//! through water of increasing range.

use uwdepth::uwsim::{apply_medium, medium_radiance, transmission, WaterProperties};
use uwdepth::{DepthMap, ImageBuffer};

fn main() -> uwdepth::Result<()> {
    let water = WaterProperties::coastal();
    println!("chi = {:?}  A = {:?}", water.chi, water.ambient);

    println!("\n  range   R      G      B     (gray 0.6 surface)");
    for d in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let rgb: Vec<f64> = (0..3)
            .map(|c| medium_radiance(0.6, water.ambient[c], water.chi[c], d))
            .collect();
        println!("  {d:5.1}  {:.3}  {:.3}  {:.3}", rgb[0], rgb[1], rgb[2]);
    }

    let (h, w) = (4, 8);
    let clear = ImageBuffer::from_fn(h, w, 3, |x, y, _| 0.2 + 0.08 * ((x + y) % 5) as f64)?;
    let depth = DepthMap::from_fn(h, w, |x, _| 1.0 + 2.0 * x as f64)?;
    let t = transmission(&depth, water.chi)?;
    let observed = apply_medium(&clear, &depth, &water)?;
    println!("\ncolumn  depth  t_R    t_B    observed RGB");
    for x in 0..w {
        println!(
            "{x:6}  {:5.1}  {:.3}  {:.3}  {:.3?}",
            depth.get(x, 0),
            t.get(x, 0, 0),
            t.get(x, 0, 2),
            observed.pixel(x, 0)
        );
    }
    Ok(())
}
