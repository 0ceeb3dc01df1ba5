//! The `ambiscape` command line. [`run`] parses arguments, merges a
//! `--config` file, dispatches one subcommand and maps the outcome to an
//! exit code: 0 success, 1 domain error, 2 usage error.

mod acoustics;
mod args;
mod audio;
mod pano;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ambiscape", version, about = "Ambisonic scene rendering and analysis")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a scene at one pose to an ambisonic WAV.
    Render(audio::RenderArgs),
    /// Render a listener trajectory to binaural stereo.
    Walk(audio::WalkArgs),
    /// Stream binaural audio over TCP using the SWAB protocol.
    Serve(audio::ServeArgs),
    /// Compare a predicted ambisonic WAV with a reference.
    Metrics(audio::MetricsArgs),
    /// Warp a perspective image into an equirectangular panorama.
    WarpPano(pano::WarpArgs),
    /// Score mask proposals against open-vocabulary masks.
    VoteMasks(pano::VoteArgs),
    /// Lift a panorama mask to 3D anchors using a depth map.
    Ground(pano::GroundArgs),
    /// Fit room acoustics parameters to a recording.
    FitAcoustics(acoustics::FitArgs),
    /// Split an ambisonic mixture into per-source waveforms.
    Separate(acoustics::SeparateArgs),
    /// Directional energy of an ambisonic WAV on an equiangular grid.
    EnergyMap(audio::EnergyMapArgs),
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    run_with_stderr(args, &mut std::io::stderr())
}

/// [`run`] with diagnostics sent to `err` instead of standard error.
pub fn run_with_stderr<I, T>(args: I, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{}", e.render());
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = e.print();
            return EXIT_OK;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Render(a) => audio::render(a),
        Command::Walk(a) => audio::walk(a),
        Command::Serve(a) => audio::serve(a),
        Command::Metrics(a) => audio::metrics(a),
        Command::WarpPano(a) => pano::warp(a),
        Command::VoteMasks(a) => pano::vote(a),
        Command::Ground(a) => pano::ground(a, seed),
        Command::FitAcoustics(a) => acoustics::fit(a, seed),
        Command::Separate(a) => acoustics::separate(a),
        Command::EnergyMap(a) => audio::energy_map(a),
    }
}

/// Removes `--config FILE` and appends every flag it supplies that the
/// command line does not already set.
fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it.next().ok_or("--config needs a file")?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            out.push(a);
        }
    }
    let Some(path) = config else { return Ok(out) };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let Value::Object(map) = doc else {
        return Err(format!("{}: config must be a JSON object", path.display()));
    };
    let given: Vec<String> = out
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    for (key, value) in map {
        let name = key.replace('_', "-");
        if given.contains(&name) {
            continue;
        }
        let flag = format!("--{name}");
        let values = match value {
            Value::Array(items) => items,
            other => vec![other],
        };
        for v in values {
            match v {
                Value::Null | Value::Bool(false) => {}
                Value::Bool(true) => out.push(flag.clone().into()),
                Value::String(s) => out.extend([flag.clone().into(), s.into()]),
                Value::Number(n) => out.extend([flag.clone().into(), n.to_string().into()]),
                _ => return Err(format!("config key {key:?} must be a scalar or a list of scalars")),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: Vec<OsString>) -> Vec<String> {
        v.into_iter().map(|s| s.into_string().unwrap()).collect()
    }

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"order": 3, "out": "x.wav", "loop": true, "seed": 7, "skip": null}"#).unwrap();
        let args = ["ambiscape", "render", "--out", "y.wav", "--config", cfg.to_str().unwrap()];
        let merged = strings(merge_config(args.iter().map(OsString::from).collect()).unwrap());
        assert_eq!(&merged[..4], &["ambiscape", "render", "--out", "y.wav"]);
        let tail = merged[4..].join(" ");
        assert!(tail.contains("--order 3") && tail.contains("--loop") && tail.contains("--seed 7"));
        assert!(!tail.contains("x.wav") && !tail.contains("skip"));
    }

    #[test]
    fn config_lists_repeat_the_flag() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"proposal": ["a.pgm", "b.pgm"]}"#).unwrap();
        let arg = format!("--config={}", cfg.display());
        let merged = strings(merge_config(vec!["p".into(), "vote-masks".into(), arg.into()]).unwrap());
        assert_eq!(merged, ["p", "vote-masks", "--proposal", "a.pgm", "--proposal", "b.pgm"]);
    }

    #[test]
    fn bad_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, "[1, 2]").unwrap();
        let code = |args: &[&str]| run_with_stderr(args, &mut Vec::new());
        assert_eq!(code(&["p", "render", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
        std::fs::write(&cfg, r#"{"pose": {"x": 1}}"#).unwrap();
        assert_eq!(code(&["p", "render", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
        assert_eq!(code(&["p", "render", "--config"]), EXIT_USAGE);
        assert_eq!(code(&["p", "render", "--config", "/nonexistent/c.json"]), EXIT_USAGE);
    }

    #[test]
    fn missing_subcommand_is_a_usage_error() {
        let mut err = Vec::new();
        assert_eq!(run_with_stderr(["p"], &mut err), EXIT_USAGE);
        assert!(String::from_utf8(err).unwrap().contains("Usage"));
    }
}
