//! Mean reprojection loss against the temporal gap between target and
//! source frame, written as CSV and SVG.

use uwdepth::experiments::{frame_gap, Sequence};
use uwdepth::uwsim::SceneConfig;
use uwdepth::LossConfig;

fn main() -> uwdepth::Result<()> {
    let seq = Sequence::render(&SceneConfig::reef(320, 240, 12, 0.1))?;
    let result = frame_gap(&seq, 10, &LossConfig::default(), 0)?;
    for ((gap, loss), n) in result.values.iter().zip(&result.means).zip(&result.counts) {
        println!("gap {gap:2}: {loss:.6}  ({n} pairs)");
    }
    let out = std::env::temp_dir().join("uwdepth-frame-gap");
    result.write_csv(out.join("frame_gap.csv"))?;
    result.write_svg(out.join("frame_gap.svg"))?;
    println!("csv and svg in {}", out.display());
    Ok(())
}
