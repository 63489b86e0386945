//! Back-project a frame with its depth, move it into a neighbour's camera and
//! sample the neighbour there. With exact depth and pose the warped image
//! matches the target up to interpolation and range-dependent color change.

use uwdepth::experiments::Sequence;
use uwdepth::geometry::{backproject_masked, reproject, warp, PixelGrid};
use uwdepth::photoloss::l1_map;
use uwdepth::uwsim::SceneConfig;

fn main() -> uwdepth::Result<()> {
    let seq = Sequence::render(&SceneConfig::reef(160, 120, 3, 0.15))?;
    let k = seq.intrinsics;
    let target = &seq.frames[1];

    let identity = warp(&target.image, &PixelGrid::identity(120, 160))?;
    println!("identity warp exact: {}", identity.image == target.image);

    let points = backproject_masked(&target.depth, &k);
    for source in [0, 2] {
        let grid = reproject(&points, &seq.relative(1, source), &k);
        let warped = warp(&seq.frames[source].image, &grid)?;
        let l1 = l1_map(&target.image, &warped.image)?.restricted(&warped.mask)?;
        println!(
            "source {source}: {} of {} pixels with depth land inside, mean L1 {:.5}",
            l1.valid_count(),
            target.depth.valid_count(),
            l1.mean_valid().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
