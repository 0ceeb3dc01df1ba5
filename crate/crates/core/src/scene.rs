//! Audio scene model and its JSON document format.
//!
//! ```json
//! {
//!   "alpha": 0.003,
//!   "sources": [
//!     {"id": "river", "label": "river", "prompt": "water flowing",
//!      "peak_db": -12, "source_type": "area",
//!      "anchors_file": "river.swpc", "audio": "river.wav"},
//!     {"id": "bed", "label": "global", "prompt": "soft air hum",
//!      "peak_db": -30, "source_type": "background", "audio": "bed.wav"}
//!   ]
//! }
//! ```
//!
//! `source_type` uses the grounding vocabulary: `point`, `area` (a cluster of
//! anchors) and `background` (the global bed). Relative paths resolve against
//! the scene file's directory.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::buffer::{MonoBuffer, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::io;
use crate::sh::{Rotation, Vec3};

/// Air absorption used when the scene file does not specify one.
pub const DEFAULT_ALPHA: f64 = 0.003;

/// Anchor sets larger than this are written to a `SWPC0001` sidecar.
const INLINE_ANCHOR_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceType {
    #[serde(rename = "point")]
    Point,
    #[serde(rename = "area", alias = "cluster")]
    Cluster,
    #[serde(rename = "background", alias = "global")]
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundSource {
    pub id: String,
    pub label: String,
    pub prompt: String,
    pub peak_db: f64,
    pub source_type: SourceType,
    pub anchors: Vec<Vec3>,
    pub audio: MonoBuffer,
}

impl SoundSource {
    pub fn centroid(&self) -> Option<Vec3> {
        centroid(&self.anchors)
    }
}

pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    Some(points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64)
}

/// Listener (camera/microphone) pose in scene coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ListenerPose {
    pub position: Vec3,
    pub rotation: Rotation,
}

impl ListenerPose {
    pub fn new(position: Vec3, rotation: Rotation) -> Self {
        ListenerPose { position, rotation }
    }

    pub fn at(position: Vec3) -> Self {
        ListenerPose::new(position, Rotation::identity())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub sources: Vec<SoundSource>,
    pub alpha: f64,
    pub meta: BTreeMap<String, String>,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            sources: Vec::new(),
            alpha: DEFAULT_ALPHA,
            meta: BTreeMap::new(),
        }
    }
}

impl Scene {
    pub fn new(sources: Vec<SoundSource>, alpha: f64) -> Result<Self> {
        let scene = Scene {
            sources,
            alpha,
            meta: BTreeMap::new(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::schema(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        let mut ids = HashSet::new();
        let mut globals = 0;
        for s in &self.sources {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::schema(format!("duplicate source id {:?}", s.id)));
            }
            validate_source(s)?;
            globals += usize::from(s.source_type == SourceType::Global);
        }
        if globals > 1 {
            return Err(Error::schema("at most one background source is allowed"));
        }
        Ok(())
    }

    /// Longest source length in samples.
    pub fn max_len(&self) -> usize {
        self.sources.iter().map(|s| s.audio.len()).max().unwrap_or(0)
    }
}

fn validate_source(s: &SoundSource) -> Result<()> {
    if !(s.peak_db <= 0.0) {
        return Err(Error::schema(format!(
            "source {:?}: peak_db must be <= 0, got {}",
            s.id, s.peak_db
        )));
    }
    match (s.source_type, s.anchors.is_empty()) {
        (SourceType::Global, false) => {
            return Err(Error::schema(format!(
                "background source {:?} must not have anchors",
                s.id
            )))
        }
        (SourceType::Point | SourceType::Cluster, true) => {
            return Err(Error::schema(format!(
                "source {:?} needs at least one anchor point",
                s.id
            )))
        }
        _ => {}
    }
    if s.anchors.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite(format!("anchors of source {:?}", s.id)));
    }
    if s.audio.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRateMismatch {
            path: PathBuf::from(&s.id),
            expected: SAMPLE_RATE,
            found: s.audio.sample_rate,
        });
    }
    if !s.audio.is_finite() {
        return Err(Error::NonFinite(format!("audio of source {:?}", s.id)));
    }
    Ok(())
}

/// `10^(peak_db/20)`.
pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Scales a buffer to its target peak level.
pub fn equalize(buf: &MonoBuffer, peak_db: f64) -> MonoBuffer {
    let g = db_to_gain(peak_db);
    MonoBuffer::new(buf.samples.iter().map(|s| g * s).collect(), buf.sample_rate)
}

/// On-disk shape of one source entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub prompt: String,
    pub peak_db: f64,
    pub source_type: SourceType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
}

/// On-disk shape of a scene document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub sources: Vec<SourceEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// A source's geometry without its audio.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceLayout {
    pub id: String,
    pub source_type: SourceType,
    pub anchors: Vec<Vec3>,
}

impl SceneManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Resolves every source's anchors (inline or sidecar).
    pub fn layouts(&self, base: &Path) -> Result<Vec<SourceLayout>> {
        self.sources
            .iter()
            .map(|e| {
                Ok(SourceLayout {
                    id: e.id.clone(),
                    source_type: e.source_type,
                    anchors: entry_anchors(e, base)?,
                })
            })
            .collect()
    }
}

fn entry_anchors(e: &SourceEntry, base: &Path) -> Result<Vec<Vec3>> {
    match (&e.anchors, &e.anchors_file) {
        (Some(_), Some(_)) => Err(Error::schema(format!(
            "source {:?}: give either anchors or anchors_file, not both",
            e.id
        ))),
        (Some(pts), None) => Ok(pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect()),
        (None, Some(file)) => io::read_anchor_blob(&base.join(file)),
        (None, None) => Ok(Vec::new()),
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Parses a scene document, loads every referenced WAV and validates the result.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let manifest = SceneManifest::load(path)?;
    let base = base_dir(path);
    let mut sources = Vec::with_capacity(manifest.sources.len());
    for e in &manifest.sources {
        let audio_rel = e
            .audio
            .as_ref()
            .ok_or_else(|| Error::schema(format!("source {:?} has no audio", e.id)))?;
        let audio = io::read_mono(&base.join(audio_rel))?;
        sources.push(SoundSource {
            id: e.id.clone(),
            label: e.label.clone(),
            prompt: e.prompt.clone(),
            peak_db: e.peak_db,
            source_type: e.source_type,
            anchors: entry_anchors(e, &base)?,
            audio,
        });
    }
    let scene = Scene {
        sources,
        alpha: manifest.alpha,
        meta: manifest.meta,
    };
    scene.validate()?;
    Ok(scene)
}

/// Writes the scene document plus one float32 WAV per source (and a sidecar
/// blob for large anchor sets) next to it.
pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    scene.validate()?;
    let base = base_dir(path);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    let mut entries = Vec::with_capacity(scene.sources.len());
    for s in &scene.sources {
        let audio_name = format!("{stem}.{}.wav", s.id);
        io::write_mono(&base.join(&audio_name), &s.audio)?;
        let (anchors, anchors_file) = if s.anchors.len() > INLINE_ANCHOR_LIMIT {
            let name = format!("{stem}.{}.swpc", s.id);
            io::write_anchor_blob(&base.join(&name), &s.anchors)?;
            (None, Some(name))
        } else if s.anchors.is_empty() {
            (None, None)
        } else {
            (Some(s.anchors.iter().map(|p| [p.x, p.y, p.z]).collect()), None)
        };
        entries.push(SourceEntry {
            id: s.id.clone(),
            label: s.label.clone(),
            prompt: s.prompt.clone(),
            peak_db: s.peak_db,
            source_type: s.source_type,
            anchors,
            anchors_file,
            audio: Some(audio_name),
        });
    }
    let manifest = SceneManifest {
        alpha: scene.alpha,
        sources: entries,
        meta: scene.meta.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    io::atomic_write(path, |w| {
        use std::io::Write;
        w.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn source(id: &str, kind: SourceType, anchors: Vec<Vec3>, peak_db: f64) -> SoundSource {
        let samples = (0..480).map(|i| ((i as f32) * 0.05).sin() as f64 * 0.5).collect();
        SoundSource {
            id: id.into(),
            label: id.into(),
            prompt: format!("{id} sound"),
            peak_db,
            source_type: kind,
            anchors,
            audio: MonoBuffer::new(samples, SAMPLE_RATE),
        }
    }

    fn write_json(dir: &Path, name: &str, json: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, json).unwrap();
        p
    }

    #[test]
    fn equalize_examples() {
        let buf = MonoBuffer::new(vec![1.0, -0.5, 0.25], SAMPLE_RATE);
        assert_eq!(equalize(&buf, 0.0), buf);
        let e = equalize(&buf, -20.0);
        assert_abs_diff_eq!(e.samples[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(e.samples[1], -0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(equalize(&buf, -6.0).samples[0], 0.501187, epsilon = 1e-6);
        assert_eq!(equalize(&buf, -6.0).len(), 3);
    }

    #[test]
    fn minimal_global_scene_loads() {
        let dir = tempfile::tempdir().unwrap();
        io::write_wav(&dir.path().join("bed.wav"), SAMPLE_RATE, &[&[0.0, 0.1, 0.2]]).unwrap();
        let p = write_json(
            dir.path(),
            "s.json",
            r#"{"sources":[{"id":"bed","label":"global","peak_db":-30,
                 "source_type":"background","audio":"bed.wav"}]}"#,
        );
        let scene = load_scene(&p).unwrap();
        assert_eq!(scene.sources.len(), 1);
        assert!(scene.sources[0].anchors.is_empty());
        assert_eq!(scene.sources[0].source_type, SourceType::Global);
        assert_eq!(scene.alpha, DEFAULT_ALPHA);
    }

    #[test]
    fn area_maps_to_cluster() {
        let dir = tempfile::tempdir().unwrap();
        io::write_wav(&dir.path().join("r.wav"), SAMPLE_RATE, &[&[0.0; 4]]).unwrap();
        let p = write_json(
            dir.path(),
            "s.json",
            r#"{"sources":[{"id":"r","peak_db":-12,"source_type":"area",
                 "anchors":[[1,0,0],[2,0,0]],"audio":"r.wav"}]}"#,
        );
        assert_eq!(load_scene(&p).unwrap().sources[0].source_type, SourceType::Cluster);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        io::write_wav(&d.join("slow.wav"), 44_100, &[&[0.0; 4]]).unwrap();
        io::write_wav(&d.join("ok.wav"), SAMPLE_RATE, &[&[0.0; 4]]).unwrap();

        assert!(matches!(load_scene(&d.join("missing.json")), Err(Error::Io { .. })));

        let p = write_json(d, "a.json", r#"{"sources":[{"id":"x","peak_db":-12,"source_type":"point","anchors":[[1,0,0]],"audio":"slow.wav"}]}"#);
        assert!(matches!(load_scene(&p), Err(Error::SampleRateMismatch { .. })));

        let p = write_json(d, "b.json", r#"{"sources":[{"id":"x","peak_db":-12,"source_type":"point","audio":"ok.wav"}]}"#);
        assert!(matches!(load_scene(&p), Err(Error::Schema(_))));

        let p = write_json(d, "c.json", r#"{"sources":[{"id":"x","peak_db":3,"source_type":"point","anchors":[[1,0,0]],"audio":"ok.wav"}]}"#);
        assert!(matches!(load_scene(&p), Err(Error::Schema(_))));

        let p = write_json(d, "d.json", r#"{"sources":[{"id":"x","peak_db":-3,"source_type":"speaker","audio":"ok.wav"}]}"#);
        assert!(matches!(load_scene(&p), Err(Error::Json { .. })));

        let p = write_json(d, "e.json", r#"{"sources":[
            {"id":"a","peak_db":-30,"source_type":"background","audio":"ok.wav"},
            {"id":"b","peak_db":-30,"source_type":"background","audio":"ok.wav"}]}"#);
        assert!(matches!(load_scene(&p), Err(Error::Schema(_))));

        let p = write_json(d, "f.json", r#"{"sources":[
            {"id":"a","peak_db":-3,"source_type":"point","anchors":[[1,0,0]],"audio":"ok.wav"},
            {"id":"a","peak_db":-3,"source_type":"point","anchors":[[1,0,0]],"audio":"ok.wav"}]}"#);
        assert!(matches!(load_scene(&p), Err(Error::Schema(_))));
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let many: Vec<Vec3> = (0..300)
            .map(|i| Vec3::new(i as f64 * 0.25, -1.5, 2.0 + (i % 7) as f64 * 0.125))
            .collect();
        let mut scene = Scene::new(
            vec![
                source("bird", SourceType::Point, vec![Vec3::new(3.0, 1.0, 0.5)], -12.0),
                source("river", SourceType::Cluster, many, -18.0),
                source("bed", SourceType::Global, vec![], -30.0),
            ],
            0.01,
        )
        .unwrap();
        scene.meta.insert("image".into(), "pano.png".into());
        let path = dir.path().join("scene.json");
        save_scene(&scene, &path).unwrap();
        assert!(dir.path().join("scene.river.swpc").exists());
        assert_eq!(load_scene(&path).unwrap(), scene);
    }

    proptest! {
        #[test]
        fn equalize_is_linear(xs in prop::collection::vec(-1.0f64..1.0, 1..64), v in -60.0f64..0.0) {
            let ys: Vec<f64> = xs.iter().map(|x| 0.5 - x).collect();
            let a = MonoBuffer::new(xs.clone(), SAMPLE_RATE);
            let b = MonoBuffer::new(ys.clone(), SAMPLE_RATE);
            let sum = MonoBuffer::new(xs.iter().zip(&ys).map(|(x, y)| x + y).collect(), SAMPLE_RATE);
            let lhs = equalize(&sum, v);
            let (ea, eb) = (equalize(&a, v), equalize(&b, v));
            for i in 0..xs.len() {
                prop_assert!((lhs.samples[i] - ea.samples[i] - eb.samples[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn equalize_composes(xs in prop::collection::vec(-1.0f64..1.0, 1..64), a in -60.0f64..0.0, b in -60.0f64..0.0) {
            let buf = MonoBuffer::new(xs, SAMPLE_RATE);
            let twice = equalize(&equalize(&buf, a), b);
            let once = equalize(&buf, a + b);
            for (x, y) in twice.samples.iter().zip(&once.samples) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
