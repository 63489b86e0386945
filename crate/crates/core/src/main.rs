use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uwdepth::experiments::{self, AugmentOptions, CutoffChoice, Sequence, SequenceManifest};
use uwdepth::metrics::EvalOptions;
use uwdepth::uwsim::SceneConfig;
use uwdepth::{LossConfig, Result};

#[derive(Parser)]
#[command(name = "uwdepth", version, about = "Underwater self-supervised depth toolkit")]
struct Cli {
    /// Loss configuration (JSON or TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for random draws; overrides the scene seed in `synth`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic sequence from a scene description.
    Synth { scene: PathBuf },
    /// Training loss of one frame against its neighbours.
    Loss {
        manifest: PathBuf,
        #[arg(long)]
        frame: usize,
        /// Also write the per-pixel loss map and LVW mask as PNG.
        #[arg(long)]
        save_maps: bool,
    },
    /// Mean pair loss against frame gap.
    FrameGap {
        manifest: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_gap: usize,
        #[arg(long)]
        svg: bool,
    },
    /// Mean pair loss against the SSIM/L1 balance.
    AlphaSweep {
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2,0.25,0.5,0.85,1")]
        alphas: Vec<f64>,
        #[arg(long)]
        svg: bool,
    },
    /// Correlation between the ULAP prior and depth.
    UlapCorr { manifest: PathBuf },
    /// Homomorphic augmentation of a PNG or of every frame in a manifest.
    Augment {
        input: PathBuf,
        /// Cutoff frequency, or `random` for a draw from [0, 250].
        #[arg(long, default_value = "random")]
        f0: CutoffChoice,
        /// Restore the input's mean log-luma after filtering.
        #[arg(long)]
        preserve_mean: bool,
    },
    /// Depth metrics of `<stem>.pfm` predictions against manifest depths.
    Metrics {
        pred_dir: PathBuf,
        manifest: PathBuf,
        /// Directory of `<stem>.png` background masks.
        #[arg(long)]
        bg_masks: Option<PathBuf>,
        #[arg(long)]
        max_depth: Option<f64>,
    },
}

fn loss_config(path: Option<&Path>) -> Result<LossConfig> {
    let cfg = match path {
        Some(p) => LossConfig::load(p)?,
        None => LossConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    match cli.command {
        Command::Synth { scene } => {
            let mut cfg = SceneConfig::load(scene)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let m = experiments::synth(&cfg, out)?;
            println!("wrote {} frames to {}", m.frames.len(), out.display());
        }
        Command::Loss { manifest, frame, save_maps } => {
            let cfg = loss_config(cli.config.as_deref())?;
            let seq = Sequence::load(&SequenceManifest::load(manifest)?)?;
            let r = experiments::frame_loss(&seq, frame, &cfg)?;
            println!("{}", r.total);
            experiments::write_loss(out, frame, &r, &cfg, save_maps)?;
        }
        Command::FrameGap { manifest, max_gap, svg } => {
            let cfg = loss_config(cli.config.as_deref())?;
            let seq = Sequence::load(&SequenceManifest::load(manifest)?)?;
            let r = experiments::frame_gap(&seq, max_gap, &cfg, cli.jobs)?;
            r.write_csv(out.join("frame_gap.csv"))?;
            if svg {
                r.write_svg(out.join("frame_gap.svg"))?;
            }
        }
        Command::AlphaSweep { manifest, alphas, svg } => {
            let cfg = loss_config(cli.config.as_deref())?;
            let seq = Sequence::load(&SequenceManifest::load(manifest)?)?;
            let r = experiments::alpha_sweep(&seq, &alphas, &cfg, cli.jobs)?;
            r.write_csv(out.join("alpha_sweep.csv"))?;
            if svg {
                r.write_svg(out.join("alpha_sweep.svg"))?;
            }
        }
        Command::UlapCorr { manifest } => {
            let seq = Sequence::load(&SequenceManifest::load(manifest)?)?;
            let r = experiments::ulap_corr(&seq)?;
            r.write(out)?;
            println!("pooled pearson {} over {} pixels", r.pooled, r.pooled_count);
        }
        Command::Augment { input, f0, preserve_mean } => {
            let opts = AugmentOptions {
                cutoff: f0,
                seed: cli.seed.unwrap_or(0),
                preserve_mean,
            };
            if input.extension().is_some_and(|e| e == "json") {
                let m = SequenceManifest::load(&input)?;
                experiments::augment_manifest(&m, out, &opts, cli.jobs)?;
            } else {
                let (path, f0) = experiments::augment_file(&input, out, &opts)?;
                println!("f0 {f0} -> {}", path.display());
            }
        }
        Command::Metrics { pred_dir, manifest, bg_masks, max_depth } => {
            let m = SequenceManifest::load(manifest)?;
            let r = experiments::evaluate_dir(pred_dir, &m, bg_masks.as_deref(), &EvalOptions { max_depth })?;
            r.write_csv(out.join("metrics.csv"))?;
            print!("{}", r.pretty_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
