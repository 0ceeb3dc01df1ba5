//! Acoustic fitting and source separation subcommands.

use std::path::PathBuf;

use ambiscape::acoustics::{fit_one_shot, image_source_paths, param, BoxRoom, FitOptions, FitProblem, ReflectionPath, RirParams, MAX_IMAGE_ORDER, NUM_BANDS, NUM_PARAMS};
use ambiscape::encoder::AttenuationModel;
use ambiscape::io::{read_ambisonic, read_mono, write_ambisonic, write_mono};
use ambiscape::scene::SceneManifest;
use ambiscape::separation::{separate as run_separation, SeparationProblem, SeparationSource};
use ambiscape::{ListenerPose, Order, SAMPLE_RATE};
use anyhow::{bail, Context};
use clap::{ArgGroup, Args, ValueEnum};
use serde::Serialize;

use crate::args::{parse_pose, read_json, write_csv, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParamGroup {
    Alpha,
    Reflection,
    Eq,
    Rt60Base,
    Rt60Slope,
    LateGain,
}

impl ParamGroup {
    fn indices(self) -> std::ops::Range<usize> {
        match self {
            ParamGroup::Alpha => param::ALPHA..param::ALPHA + 1,
            ParamGroup::Reflection => param::REFLECTION..param::REFLECTION + NUM_BANDS,
            ParamGroup::Eq => param::EQ..param::EQ + 1,
            ParamGroup::Rt60Base => param::RT60_BASE..param::RT60_BASE + 1,
            ParamGroup::Rt60Slope => param::RT60_SLOPE..param::RT60_SLOPE + 1,
            ParamGroup::LateGain => param::LATE_GAIN..param::LATE_GAIN + 1,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("geometry").required(true).args(["paths", "room"])))]
pub struct FitArgs {
    /// Dry source WAV (mono).
    #[arg(long)]
    source: PathBuf,
    /// Recorded first-order ambisonic WAV.
    #[arg(long)]
    target: PathBuf,
    /// Reflection paths JSON: [{"delay", "direction": [x,y,z], "bounces"}].
    #[arg(long)]
    paths: Option<PathBuf>,
    /// Shoebox room JSON: {"dimensions", "source", "listener"}.
    #[arg(long)]
    room: Option<PathBuf>,
    /// Starting parameters JSON; defaults when absent.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    /// RIR length in samples.
    #[arg(long, default_value_t = 24_000)]
    rir_len: usize,
    /// Parameter groups held at their initial values.
    #[arg(long, value_enum, value_delimiter = ',')]
    freeze: Vec<ParamGroup>,
    /// Fitted parameters JSON.
    #[arg(long)]
    params_out: PathBuf,
    /// FOA render of the source through the fitted RIR.
    #[arg(long)]
    render_out: Option<PathBuf>,
    /// Per-iteration loss CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LossRow {
    iteration: usize,
    loss: f64,
    best: f64,
}

pub fn fit(a: FitArgs, seed: u64) -> anyhow::Result<()> {
    let src = read_mono(&a.source)?;
    let target = read_ambisonic(&a.target)?;
    if target.order() != Order::FIRST {
        bail!("{} must be first-order (4 channels), found {}", a.target.display(), target.num_channels());
    }
    let paths: Vec<ReflectionPath> = match (&a.paths, &a.room) {
        (Some(p), _) => read_json(p)?,
        (None, Some(r)) => image_source_paths(&read_json::<BoxRoom>(r)?, MAX_IMAGE_ORDER)?,
        (None, None) => unreachable!("clap requires one of --paths or --room"),
    };
    let init = match &a.init {
        Some(p) => read_json::<RirParams>(p)?,
        None => RirParams::default(),
    };
    let mut active = [true; NUM_PARAMS];
    for g in &a.freeze {
        g.indices().for_each(|i| active[i] = false);
    }
    let opts = FitOptions { iters: a.iters, lr: a.lr, active, rir_len: a.rir_len, seed };
    let result = fit_one_shot(&paths, &src, &target, init, &opts)?;
    log::info!("best loss {:.6} at iteration {}", result.best_loss, result.best_iteration);
    write_json(&a.params_out, &result.params)?;
    if let Some(path) = &a.render_out {
        let problem = FitProblem::new(&paths, &src, &target, a.rir_len, seed)?;
        write_ambisonic(path, &problem.predict(&result.params))?;
    }
    if let Some(path) = &a.trace_out {
        let rows: Vec<LossRow> = result
            .losses
            .iter()
            .zip(&result.trace)
            .enumerate()
            .map(|(iteration, (&loss, &best))| LossRow { iteration, loss, best })
            .collect();
        write_csv(path, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Ambisonic mixture WAV.
    #[arg(long)]
    mixture: PathBuf,
    /// Scene JSON supplying each source's type and anchors; audio is not read.
    #[arg(long)]
    scene: PathBuf,
    /// Listener pose: x,y,z[,identity|,yaw=DEG|,w,x,y,z].
    #[arg(long, value_parser = parse_pose, default_value = "0,0,0", allow_hyphen_values = true)]
    pose: ListenerPose,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Step size of the preconditioned update.
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    /// Directory for one `<id>.wav` per source.
    #[arg(long)]
    out_dir: PathBuf,
    /// Per-iteration objective CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

pub fn separate(a: SeparateArgs) -> anyhow::Result<()> {
    let mixture = read_ambisonic(&a.mixture)?;
    let manifest = SceneManifest::load(&a.scene)?;
    let base = a.scene.parent().map(PathBuf::from).unwrap_or_default();
    let layouts = manifest.layouts(&base)?;
    let sources = layouts.iter().map(|l| SeparationSource { source_type: l.source_type, anchors: l.anchors.clone() }).collect();
    let model = AttenuationModel::new(manifest.alpha, ambiscape::encoder::D_MIN)?;
    let problem = SeparationProblem::new(mixture, sources, a.pose, &model)?;
    let sep = run_separation(&problem, a.iters, a.lr)?;
    log::info!("magnitude loss {:.6} -> {:.6}", sep.initial_l_mag, sep.final_l_mag);
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (layout, wave) in layouts.iter().zip(&sep.sources) {
        debug_assert_eq!(wave.sample_rate, SAMPLE_RATE);
        write_mono(&a.out_dir.join(format!("{}.wav", layout.id)), wave)?;
    }
    if let Some(path) = &a.trace_out {
        let rows: Vec<LossRow> = sep
            .losses
            .iter()
            .zip(&sep.trace)
            .enumerate()
            .map(|(iteration, (&loss, &best))| LossRow { iteration, loss, best })
            .collect();
        write_csv(path, &rows)?;
    }
    Ok(())
}
