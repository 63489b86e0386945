//! Depth metrics and background error for two imitation predictors: one that
//! predicts finite depth in open water and one that pushes it far away.

use uwdepth::experiments::{evaluate, Sequence};
use uwdepth::metrics::{BackgroundMask, EvalOptions};
use uwdepth::uwsim::SceneConfig;
use uwdepth::DepthMap;

fn main() -> uwdepth::Result<()> {
    let seq = Sequence::render(&SceneConfig::reef(160, 120, 3, 0.1))?;
    let gts: Vec<DepthMap> = seq.frames.iter().map(|f| f.depth.clone()).collect();
    let masks: Vec<BackgroundMask> = gts
        .iter()
        .map(|d| BackgroundMask::new(120, 160, d.valid().iter().map(|v| !v).collect()))
        .collect::<uwdepth::Result<_>>()?;
    let names: Vec<String> = (0..gts.len()).map(|i| format!("frame_{i:04}")).collect();

    // Wrong global scale, a mild per-pixel ripple and a guess for open water.
    let predict = |gt: &DepthMap, water_depth: f64| {
        DepthMap::from_fn(120, 160, |x, y| match gt.value(x, y) {
            Some(d) => 0.4 * d * (1.0 + 0.05 * ((x * 7 + y * 3) as f64).sin()),
            None => water_depth,
        })
    };
    for (label, water_depth) in [("near background", 3.0), ("far background", 400.0)] {
        let preds = gts
            .iter()
            .map(|g| predict(g, water_depth))
            .collect::<uwdepth::Result<Vec<_>>>()?;
        let r = evaluate(&preds, &gts, Some(&masks), &names, &EvalOptions::default())?;
        println!("== {label}");
        print!("{}", r.pretty_table());
    }
    Ok(())
}
