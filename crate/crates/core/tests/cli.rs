use std::path::Path;
use std::process::{Command, Output};

use uwdepth::experiments::SequenceManifest;
use uwdepth::image::{load_image, save_depth, save_image};
use uwdepth::uwsim::SceneConfig;
use uwdepth::{DepthMap, ImageBuffer};

fn uwdepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwdepth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = uwdepth(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_into(dir: &Path, scene: &SceneConfig) -> std::path::PathBuf {
    let scene_path = dir.join("scene.json");
    std::fs::write(&scene_path, serde_json::to_string(scene).unwrap()).unwrap();
    let out = dir.join("seq");
    ok(&["--out", s(&out), "synth", s(&scene_path)]);
    out.join("manifest.json")
}

#[test]
fn synth_writes_one_file_set_per_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(tmp.path(), &SceneConfig::reef(48, 36, 10, 0.1));
    let dir = manifest.parent().unwrap();
    let count = |ext: &str| {
        std::fs::read_dir(dir)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
            .count()
    };
    assert_eq!(count("png"), 10);
    assert_eq!(count("pfm"), 10);
    // 10 poses, the intrinsics and the manifest
    assert_eq!(count("json"), 12);
    let m = SequenceManifest::load(&manifest).unwrap();
    assert_eq!(m.frames.len(), 10);
    assert!(m.frames.windows(2).all(|w| w[1].timestamp > w[0].timestamp));
}

#[test]
fn loss_frame_gap_alpha_and_ulap_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(tmp.path(), &SceneConfig::sloped_seabed(64, 48, 6));
    let m = s(&manifest);
    let out = tmp.path().join("out");
    let o = s(&out);

    let printed = ok(&["--out", o, "loss", m, "--frame", "1", "--save-maps"]);
    let total: f64 = printed.trim().parse().unwrap();
    assert!(total > 0.0 && total < 0.05);
    assert!(out.join("loss_0001.png").is_file() && out.join("lvw_0001.png").is_file());
    let csv = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    assert!(csv.starts_with("# uwdepth loss v1\n"));

    ok(&["--out", o, "frame-gap", m, "--max-gap", "4", "--svg"]);
    let csv = std::fs::read_to_string(out.join("frame_gap.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# uwdepth frame-gap v1"));
    assert_eq!(lines[2], "gap,mean_loss,n");
    assert_eq!(lines.len(), 3 + 4);
    assert!(lines[3].starts_with("1,") && lines[3].ends_with(",5"));
    assert!(out.join("frame_gap.svg").is_file());

    ok(&["--out", o, "alpha-sweep", m, "--alphas", "0,0.1,0.15"]);
    let csv = std::fs::read_to_string(out.join("alpha_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3 + 3);

    let printed = ok(&["--out", o, "ulap-corr", m]);
    assert!(printed.starts_with("pooled pearson 0.9"), "{printed}");
    for f in ["ulap_corr.csv", "ulap_corr_summary.csv", "ulap_scatter.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn loss_config_file_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(tmp.path(), &SceneConfig::reef(48, 36, 3, 0.1));
    let cfg = tmp.path().join("loss.toml");
    std::fs::write(&cfg, "alpha = 1.0\nuse_lvw = false\ncorr_weight = 0.0\n").unwrap();
    let a = ok(&["--out", s(tmp.path()), "loss", s(&manifest), "--frame", "1"]);
    let b = ok(&["--config", s(&cfg), "--out", s(tmp.path()), "loss", s(&manifest), "--frame", "1"]);
    assert_ne!(a, b);

    std::fs::write(&cfg, "alpha = 3.0\n").unwrap();
    let bad = uwdepth(&["--config", s(&cfg), "loss", s(&manifest), "--frame", "1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn augment_single_and_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(tmp.path(), &SceneConfig::reef(40, 30, 3, 0.1));
    let frame = manifest.parent().unwrap().join("frame_0000.png");
    let out = tmp.path().join("aug");

    ok(&["--out", s(&out), "augment", s(&frame), "--f0", "0"]);
    assert_eq!(load_image(out.join("frame_0000.png")).unwrap(), load_image(&frame).unwrap());

    let printed = ok(&["--seed", "3", "--out", s(&out), "augment", s(&frame), "--f0", "random"]);
    assert!(printed.starts_with("f0 "));

    let batch = tmp.path().join("batch");
    ok(&["--seed", "11", "--out", s(&batch), "augment", s(&manifest), "--f0", "random", "--preserve-mean"]);
    let log = std::fs::read_to_string(batch.join("augment.csv")).unwrap();
    assert_eq!(log.lines().count(), 3 + 3);
    for i in 0..3 {
        assert!(batch.join(format!("frame_{i:04}.png")).is_file());
    }

    let again = tmp.path().join("again");
    ok(&["--seed", "11", "--out", s(&again), "augment", s(&manifest), "--f0", "random", "--preserve-mean"]);
    assert_eq!(
        std::fs::read(batch.join("frame_0002.png")).unwrap(),
        std::fs::read(again.join("frame_0002.png")).unwrap()
    );

    let bad = uwdepth(&["augment", s(&frame), "--f0", "-4"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn metrics_command_with_and_without_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth_into(tmp.path(), &SceneConfig::reef(48, 36, 3, 0.1));
    let m = SequenceManifest::load(&manifest).unwrap();
    let preds = tmp.path().join("preds");
    let masks = tmp.path().join("masks");
    std::fs::create_dir_all(&preds).unwrap();
    std::fs::create_dir_all(&masks).unwrap();
    for (i, rec) in m.frames.iter().enumerate() {
        let gt = uwdepth::image::load_depth(m.resolve(&rec.depth)).unwrap();
        let pred = DepthMap::from_fn(36, 48, |x, y| gt.value(x, y).map_or(50.0, |d| 2.0 * d)).unwrap();
        save_depth(&pred, preds.join(format!("{}.pfm", m.frame_stem(i)))).unwrap();
        let mask: Vec<f64> = gt.valid().iter().map(|v| if *v { 0.0 } else { 1.0 }).collect();
        save_image(&ImageBuffer::new(36, 48, 1, mask).unwrap(), masks.join(format!("{}.png", m.frame_stem(i)))).unwrap();
    }

    let out = tmp.path().join("out");
    let table = ok(&["--out", s(&out), "metrics", s(&preds), s(&manifest)]);
    assert!(table.contains("AbsRel") && table.contains("mean"));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 1 + 3 + 1);
    assert!(rows[0].starts_with("frame,abs_rel,"));
    // No masks, no background error column value.
    let mean_row: Vec<&str> = rows[4].split(',').collect();
    assert_eq!(mean_row[0], "mean");
    assert_eq!(mean_row[8], "");
    assert!(mean_row[1].parse::<f64>().unwrap().abs() < 1e-6);

    ok(&["--out", s(&out), "metrics", s(&preds), s(&manifest), "--bg-masks", s(&masks)]);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mean_row: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    // Background predicted at 50 m, then halved by median scaling: disparity 1/25.
    let bg: f64 = mean_row[8].parse().unwrap();
    assert!((bg - 0.04).abs() < 1e-6, "{bg}");

    std::fs::remove_file(masks.join("frame_0001.png")).unwrap();
    save_image(&ImageBuffer::filled(10, 10, 1, 1.0).unwrap(), masks.join("frame_0001.png")).unwrap();
    let bad = uwdepth(&["--out", s(&out), "metrics", s(&preds), s(&manifest), "--bg-masks", s(&masks)]);
    assert_eq!(bad.status.code(), Some(2));

    std::fs::remove_file(preds.join("frame_0002.pfm")).unwrap();
    let bad = uwdepth(&["--out", s(&out), "metrics", s(&preds), s(&manifest)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = uwdepth(&["loss", s(&tmp.path().join("nope.json")), "--frame", "0"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));

    let no_args = uwdepth(&[]);
    assert_eq!(no_args.status.code(), Some(2));

    // Static fronto-parallel plane: every depth equals 4 m, so the pooled
    // correlation is undefined.
    let manifest = synth_into(tmp.path(), &SceneConfig::approaching_plane(32, 24, 2, 4.0, 0.0));
    let degenerate = uwdepth(&["--out", s(tmp.path()), "ulap-corr", s(&manifest)]);
    assert_eq!(degenerate.status.code(), Some(3));

    let short = uwdepth(&["--out", s(tmp.path()), "frame-gap", s(&manifest), "--max-gap", "2"]);
    assert_eq!(short.status.code(), Some(2));

    let bad_alpha = uwdepth(&["--out", s(tmp.path()), "alpha-sweep", s(&manifest), "--alphas", "0.5,1.5"]);
    assert_eq!(bad_alpha.status.code(), Some(2));

    let mut m = SequenceManifest::load(&manifest).unwrap();
    m.frames[1].timestamp = m.frames[0].timestamp;
    let unordered = manifest.with_file_name("unordered.json");
    std::fs::write(&unordered, serde_json::to_string(&m).unwrap()).unwrap();
    let bad = uwdepth(&["loss", s(&unordered), "--frame", "0"]);
    assert_eq!(bad.status.code(), Some(2));
}
