//! Rendering, streaming and spatial metrics subcommands.

use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use ambiscape::encoder::encode_scene;
use ambiscape::io::{read_ambisonic, write_ambisonic, write_mono, write_wav};
use ambiscape::metrics::{compare, directional_renders, energy_map as compute_energy_map};
use ambiscape::pano::Raster;
use ambiscape::protocol::{serve_client, ServeOptions};
use ambiscape::scene::load_scene;
use ambiscape::stream::{render_trajectory, RenderConfig, Trajectory};
use ambiscape::{ListenerPose, Rotation, Vec3, SAMPLE_RATE};
use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::args::{hrir, is_json, is_pfm, order, parse_grid, parse_pose, read_json, write_csv, write_json};

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Scene JSON.
    #[arg(long)]
    scene: PathBuf,
    /// Listener pose: x,y,z[,identity|,yaw=DEG|,w,x,y,z].
    #[arg(long, value_parser = parse_pose, default_value = "0,0,0", allow_hyphen_values = true)]
    pose: ListenerPose,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=7))]
    order: u8,
    /// Ambisonic WAV output (ACN/SN3D).
    #[arg(long)]
    out: PathBuf,
    /// Length in seconds; defaults to the longest source.
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Loop sources shorter than the render.
    #[arg(long = "loop")]
    looped: bool,
    /// Also decode to binaural stereo.
    #[arg(long)]
    binaural_out: Option<PathBuf>,
    /// HRIR manifest JSON; the built-in panner when absent.
    #[arg(long)]
    hrir: Option<PathBuf>,
}

fn samples_for(duration: Option<f64>, default: usize) -> anyhow::Result<usize> {
    match duration {
        None => Ok(default),
        Some(s) if s > 0.0 && s.is_finite() => Ok((s * SAMPLE_RATE as f64).round() as usize),
        Some(s) => bail!("duration must be positive, got {s}"),
    }
}

pub fn render(a: RenderArgs) -> anyhow::Result<()> {
    let scene = load_scene(&a.scene)?;
    let order = order(a.order);
    let len = samples_for(a.duration, scene.max_len())?;
    if len == 0 {
        bail!("scene has no audio to render");
    }
    let ambi = encode_scene(&scene, &a.pose, order, 0..len, a.looped);
    write_ambisonic(&a.out, &ambi)?;
    if let Some(path) = &a.binaural_out {
        let h = hrir(a.hrir.as_deref(), order)?;
        let (l, r) = ambiscape::binaural::decode_binaural(&ambi, &h)?;
        write_wav(path, SAMPLE_RATE, &[&l.samples, &r.samples])?;
    }
    log::info!("rendered {len} samples at order {}", order.get());
    Ok(())
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Trajectory JSON: {"keyframes": [{"t", "pos": [x,y,z], "quat"?: [w,x,y,z]}]}.
    #[arg(long)]
    trajectory: PathBuf,
    /// Stereo WAV output.
    #[arg(long)]
    out: PathBuf,
    /// Per-block pose CSV for aligning with external video.
    #[arg(long)]
    poses_out: Option<PathBuf>,
    /// Also write the ambisonic signal before decoding.
    #[arg(long)]
    ambi_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=7))]
    order: u8,
    #[arg(long, default_value_t = 256)]
    block_size: usize,
    #[arg(long, default_value_t = 10.0)]
    crossfade_ms: f64,
    #[arg(long)]
    hrir: Option<PathBuf>,
    /// Seconds; defaults to the keyframe span.
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    #[arg(long = "loop")]
    looped: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    keyframes: Vec<Keyframe>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Keyframe {
    t: f64,
    pos: [f64; 3],
    #[serde(default = "identity_quat")]
    quat: [f64; 4],
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn load_trajectory(path: &Path) -> anyhow::Result<Trajectory> {
    let file: TrajectoryFile = read_json(path)?;
    let keys = file
        .keyframes
        .iter()
        .map(|k| {
            let [w, x, y, z] = k.quat;
            let pose = ListenerPose::new(Vec3::from(k.pos), Rotation::from_quaternion(w, x, y, z)?);
            Ok((k.t, pose))
        })
        .collect::<ambiscape::Result<Vec<_>>>()
        .with_context(|| format!("in {}", path.display()))?;
    Ok(Trajectory::new(keys)?)
}

#[derive(Serialize)]
struct PoseRow {
    block: usize,
    start_sample: usize,
    time_s: f64,
    x: f64,
    y: f64,
    z: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

pub fn walk(a: WalkArgs) -> anyhow::Result<()> {
    let scene = load_scene(&a.scene)?;
    let traj = load_trajectory(&a.trajectory)?;
    let cfg = RenderConfig {
        order: order(a.order),
        block_size: a.block_size,
        sample_rate: SAMPLE_RATE,
        loop_sources: a.looped,
        crossfade_ms: a.crossfade_ms,
    };
    cfg.validate()?;
    let h = hrir(a.hrir.as_deref(), cfg.order)?;
    let out = render_trajectory(&scene, &traj, cfg, &h, a.duration, a.ambi_out.is_some())?;
    write_wav(&a.out, SAMPLE_RATE, &[&out.left.samples, &out.right.samples])?;
    if let (Some(path), Some(ambi)) = (&a.ambi_out, &out.ambisonic) {
        write_ambisonic(path, ambi)?;
    }
    if let Some(path) = &a.poses_out {
        let rows: Vec<PoseRow> = out
            .block_poses
            .iter()
            .enumerate()
            .map(|(block, (start, p))| {
                let [qw, qx, qy, qz] = p.rotation.quaternion();
                PoseRow {
                    block,
                    start_sample: *start,
                    time_s: *start as f64 / SAMPLE_RATE as f64,
                    x: p.position.x,
                    y: p.position.y,
                    z: p.position.z,
                    qw,
                    qx,
                    qy,
                    qz,
                }
            })
            .collect();
        write_csv(path, &rows)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    scene: PathBuf,
    /// TCP port; 0 picks a free one.
    #[arg(long)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=7))]
    order: u8,
    #[arg(long, default_value_t = 256)]
    block_size: usize,
    #[arg(long)]
    hrir: Option<PathBuf>,
    /// Stop each client after this many audio frames.
    #[arg(long)]
    max_blocks: Option<u64>,
    /// Exit after the first client disconnects.
    #[arg(long)]
    once: bool,
    /// Send as fast as the socket allows instead of at the audio rate.
    #[arg(long)]
    unpaced: bool,
}

pub fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let scene = load_scene(&a.scene)?;
    let cfg = RenderConfig { order: order(a.order), block_size: a.block_size, ..RenderConfig::default() };
    cfg.validate()?;
    let h = hrir(a.hrir.as_deref(), cfg.order)?;
    let listener = TcpListener::bind((a.host.as_str(), a.port)).with_context(|| format!("binding {}:{}", a.host, a.port))?;
    let addr = listener.local_addr()?;
    println!("listening on {addr}");
    std::io::stdout().flush()?;
    let opts = ServeOptions { max_blocks: a.max_blocks, realtime: !a.unpaced };
    for stream in listener.incoming() {
        let stream = stream?;
        let peer = stream.peer_addr().map(|p| p.to_string()).unwrap_or_default();
        match serve_client(stream, &scene, cfg, &h, opts) {
            Ok(n) => log::info!("{peer}: sent {n} frames"),
            Err(e) => log::warn!("{peer}: {e}"),
        }
        if a.once {
            break;
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted ambisonic WAV.
    #[arg(long)]
    pred: PathBuf,
    /// Reference ambisonic WAV.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Annotation JSON: [{"direction": "left|right|front|back", "label"}].
    #[arg(long)]
    ann: Option<PathBuf>,
    /// Report path; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_grid, default_value = "64x32")]
    grid: (usize, usize),
    /// Directory for the prediction's left/right/front/back renders.
    #[arg(long)]
    renders_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Side {
    Left,
    Right,
    Front,
    Back,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Front => "front",
            Side::Back => "back",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Annotation {
    direction: Side,
    label: String,
}

#[derive(Debug, Serialize)]
struct MetricsRow {
    label: String,
    direction: String,
    doa_ref_azimuth: f64,
    doa_ref_elevation: f64,
    doa_pred_azimuth: f64,
    doa_pred_elevation: f64,
    err_azimuth: f64,
    err_elevation: f64,
    err_angular: f64,
    err_haversine_swapped: f64,
    err_haversine_standard: f64,
    cc: f64,
    auc: Option<f64>,
    /// RMS of the prediction's virtual microphone toward the annotated side.
    pred_rms: Option<f64>,
    ref_rms: Option<f64>,
}

pub fn metrics(a: MetricsArgs) -> anyhow::Result<()> {
    let pred = read_ambisonic(&a.pred)?;
    let reference = read_ambisonic(&a.reference)?;
    let report = compare(&pred, &reference, a.grid)?;
    let anns: Vec<Annotation> = match &a.ann {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let (dp, dr) = (directional_renders(&pred), directional_renders(&reference));
    let row = |ann: Option<&Annotation>| {
        let e = report.errors;
        let side = ann.map(|x| x.direction.name());
        MetricsRow {
            label: ann.map(|x| x.label.clone()).unwrap_or_default(),
            direction: side.unwrap_or_default().into(),
            doa_ref_azimuth: report.doa_ref_azimuth,
            doa_ref_elevation: report.doa_ref_elevation,
            doa_pred_azimuth: report.doa_pred_azimuth,
            doa_pred_elevation: report.doa_pred_elevation,
            err_azimuth: e.azimuth,
            err_elevation: e.elevation,
            err_angular: e.angular,
            err_haversine_swapped: e.haversine_swapped,
            err_haversine_standard: e.haversine_standard,
            cc: report.cc,
            auc: report.auc,
            pred_rms: side.and_then(|s| dp.get(s)).map(|m| m.rms()),
            ref_rms: side.and_then(|s| dr.get(s)).map(|m| m.rms()),
        }
    };
    let rows: Vec<MetricsRow> = if anns.is_empty() { vec![row(None)] } else { anns.iter().map(|x| row(Some(x))).collect() };
    if is_json(&a.out) {
        write_json(&a.out, &rows)?;
    } else {
        write_csv(&a.out, &rows)?;
    }
    if let Some(dir) = &a.renders_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, buf) in dp.named() {
            write_mono(&dir.join(format!("{name}.wav")), buf)?;
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EnergyMapArgs {
    /// Ambisonic WAV.
    #[arg(long)]
    input: PathBuf,
    /// `.pfm` writes a float image (row 0 at the top), anything else CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_grid, default_value = "64x32")]
    grid: (usize, usize),
    /// Min-max normalize to [0, 1].
    #[arg(long)]
    normalize: bool,
}

#[derive(Serialize)]
struct EnergyRow {
    col: usize,
    row: usize,
    azimuth: f64,
    elevation: f64,
    energy: f64,
}

pub fn energy_map(a: EnergyMapArgs) -> anyhow::Result<()> {
    let ambi = read_ambisonic(&a.input)?;
    let (n_az, n_el) = a.grid;
    let mut map = compute_energy_map(&ambi, n_az, n_el)?;
    if a.normalize {
        map = map.normalized();
    }
    if is_pfm(&a.out) {
        let data = map.values.iter().map(|&v| v as f32).collect();
        Raster::new(n_az, n_el, 1, data)?.write(&a.out, true)?;
        return Ok(());
    }
    let mut rows = Vec::with_capacity(n_az * n_el);
    for row in 0..n_el {
        for col in 0..n_az {
            let d = map.direction(col, row);
            rows.push(EnergyRow { col, row, azimuth: d.azimuth(), elevation: d.elevation(), energy: map.get(col, row) });
        }
    }
    write_csv(&a.out, &rows)?;
    Ok(())
}
