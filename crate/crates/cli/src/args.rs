//! Flag value parsers and output helpers shared by the subcommands.

use std::io::Write;
use std::path::Path;

use ambiscape::binaural::{load_hrir_manifest, project_hrirs, AmbiHrir, HrirGrid};
use ambiscape::io::atomic_write;
use ambiscape::{Error, ListenerPose, Order, Rotation, Vec3};
use anyhow::Context;
use serde::Serialize;

/// `x,y,z` optionally followed by `identity`, `yaw=DEG` or a quaternion
/// `w,qx,qy,qz`.
pub fn parse_pose(s: &str) -> Result<ListenerPose, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{t:?} is not a finite number"))
    };
    if parts.len() < 3 {
        return Err("pose needs x,y,z".into());
    }
    let position = Vec3::new(num(parts[0])?, num(parts[1])?, num(parts[2])?);
    let rotation = match &parts[3..] {
        [] | ["identity"] => Rotation::identity(),
        [one] => match one.strip_prefix("yaw=") {
            Some(deg) => Rotation::yaw(num(deg)?.to_radians()),
            None => return Err(format!("unknown rotation {one:?}; use identity, yaw=DEG or w,x,y,z")),
        },
        [w, x, y, z] => Rotation::from_quaternion(num(w)?, num(x)?, num(y)?, num(z)?).map_err(|e| e.to_string())?,
        _ => return Err("pose is x,y,z[,identity|,yaw=DEG|,w,x,y,z]".into()),
    };
    Ok(ListenerPose::new(position, rotation))
}

/// `WIDTHxHEIGHT`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or("grid is WIDTHxHEIGHT, e.g. 64x32")?;
    let n = |t: &str| t.parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((n(a)?, n(b)?))
}

pub fn order(o: u8) -> Order {
    Order::new(o as usize).expect("order range is checked by the parser")
}

/// HRIR set projected to `order`; the built-in panner when no manifest is given.
pub fn hrir(manifest: Option<&Path>, order: Order) -> anyhow::Result<AmbiHrir> {
    let grid = match manifest {
        Some(p) => load_hrir_manifest(p)?,
        None => HrirGrid::default_panner(),
    };
    Ok(project_hrirs(&grid, order)?)
}

pub fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
        w.write_all(b"\n").map_err(Error::from)
    })?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut csv = csv::Writer::from_writer(Vec::new());
    for r in rows {
        csv.serialize(r)?;
    }
    let bytes = csv.into_inner()?;
    atomic_write(path, |w| w.write_all(&bytes).map_err(Error::from))?;
    Ok(())
}
