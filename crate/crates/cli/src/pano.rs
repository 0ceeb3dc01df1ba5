//! Panorama warping, mask voting and 3D grounding subcommands.

use std::path::{Path, PathBuf};

use ambiscape::io::write_anchor_blob;
use ambiscape::pano::{downsample_points, mask_vote, refined_union, unproject_mask, warp_to_pano, Mask, MaskProposal, Raster, VoteParams};
use ambiscape::scene::SourceEntry;
use ambiscape::SourceType;
use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::{is_pfm, read_json, write_json};

#[derive(Debug, Args)]
pub struct WarpArgs {
    /// Perspective image (PGM, PPM or PFM).
    #[arg(long)]
    image: PathBuf,
    /// Camera elevation in degrees, positive up.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    elevation: f64,
    /// Focal length as a fraction of the image width.
    #[arg(long)]
    focal: f64,
    /// Panorama width; the height is half of it.
    #[arg(long)]
    width: usize,
    /// Warped panorama; `.pfm` keeps float precision.
    #[arg(long)]
    out: PathBuf,
    /// Mask of panorama pixels the image covers.
    #[arg(long)]
    valid_out: Option<PathBuf>,
}

pub fn warp(a: WarpArgs) -> anyhow::Result<()> {
    let img = Raster::read(&a.image)?;
    let w = warp_to_pano(&img, a.elevation.to_radians(), a.focal, a.width, a.width / 2)?;
    w.pano.write(&a.out, is_pfm(&a.out))?;
    if let Some(p) = &a.valid_out {
        w.valid.write(p)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Class-agnostic proposal mask (PGM); repeat for each proposal.
    #[arg(long, required = true)]
    proposal: Vec<PathBuf>,
    /// Open-vocabulary masks: [{"mask", "confidence"?, "label"}], paths relative to the file.
    #[arg(long)]
    ovs: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau_iou: f64,
    #[arg(long, default_value_t = 0.5)]
    tau_vote: f64,
    /// Union of the retained, refined proposals.
    #[arg(long)]
    out: PathBuf,
    /// Per-proposal scores and voters as JSON.
    #[arg(long)]
    votes_out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OvsEntry {
    mask: PathBuf,
    #[serde(default)]
    confidence: Option<PathBuf>,
    label: String,
}

#[derive(Debug, Serialize)]
struct VoteRecord {
    proposal: String,
    score: f64,
    voters: Vec<String>,
    retained: bool,
}

pub fn vote(a: VoteArgs) -> anyhow::Result<()> {
    for (name, t) in [("tau-iou", a.tau_iou), ("tau-vote", a.tau_vote)] {
        if !(0.0..=1.0).contains(&t) {
            bail!("{name} must lie in [0, 1], got {t}");
        }
    }
    let proposals = a.proposal.iter().map(|p| Mask::read(p)).collect::<ambiscape::Result<Vec<_>>>()?;
    let entries: Vec<OvsEntry> = read_json(&a.ovs)?;
    let base = a.ovs.parent().unwrap_or(Path::new("."));
    let ovs = entries
        .iter()
        .map(|e| {
            let conf = e.confidence.as_ref().map(|c| Raster::read(&base.join(c))).transpose()?;
            MaskProposal::new(Mask::read(&base.join(&e.mask))?, conf, e.label.clone())
        })
        .collect::<ambiscape::Result<Vec<_>>>()?;
    let votes = mask_vote(&proposals, &ovs, VoteParams { tau_iou: a.tau_iou, tau_vote: a.tau_vote })?;
    let (w, h) = proposals[0].dims();
    refined_union(&votes, w, h)?.write(&a.out)?;
    if let Some(path) = &a.votes_out {
        let records: Vec<VoteRecord> = votes
            .iter()
            .zip(&a.proposal)
            .map(|(v, p)| VoteRecord {
                proposal: p.display().to_string(),
                score: v.score,
                voters: v.voters.iter().map(|&i| entries[i].label.clone()).collect(),
                retained: v.refined.is_some(),
            })
            .collect();
        write_json(path, &records)?;
    }
    log::info!("{} of {} proposals retained", votes.iter().filter(|v| v.refined.is_some()).count(), votes.len());
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroundedType {
    Point,
    Area,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    /// Panorama mask (PGM).
    #[arg(long)]
    mask: PathBuf,
    /// Panorama depth in metres (PFM).
    #[arg(long)]
    depth: PathBuf,
    /// Maximum number of anchors kept.
    #[arg(long, default_value_t = 2048)]
    n_max: usize,
    /// Anchor blob output (SWPC0001).
    #[arg(long)]
    out: PathBuf,
    /// Scene source entry referencing the blob.
    #[arg(long)]
    fragment_out: Option<PathBuf>,
    /// Source id in the fragment; defaults to the mask file stem.
    #[arg(long)]
    id: Option<String>,
    #[arg(long, default_value = "")]
    label: String,
    #[arg(long, value_enum, default_value = "point")]
    source_type: GroundedType,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    peak_db: f64,
    /// Audio WAV path recorded in the fragment.
    #[arg(long)]
    audio: Option<String>,
}

pub fn ground(a: GroundArgs, seed: u64) -> anyhow::Result<()> {
    let mask = Mask::read(&a.mask)?;
    let depth = Raster::read(&a.depth)?;
    let raw = unproject_mask(&mask, &depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = downsample_points(&raw, a.n_max, &mut rng)?;
    if points.is_empty() {
        bail!("mask {} selects no pixel with valid depth", a.mask.display());
    }
    write_anchor_blob(&a.out, &points)?;
    if let Some(frag) = &a.fragment_out {
        let id = match &a.id {
            Some(id) => id.clone(),
            None => a.mask.file_stem().map(|s| s.to_string_lossy().into_owned()).context("mask path has no file name")?,
        };
        let entry = SourceEntry {
            id,
            label: a.label.clone(),
            prompt: String::new(),
            peak_db: a.peak_db,
            source_type: match a.source_type {
                GroundedType::Point => SourceType::Point,
                GroundedType::Area => SourceType::Cluster,
            },
            anchors: None,
            anchors_file: Some(relative_to(&a.out, frag)),
            audio: a.audio.clone(),
        };
        write_json(frag, &entry)?;
    }
    log::info!("{} anchors from {} masked pixels", points.len(), raw.len());
    Ok(())
}

/// `target` as the fragment's scene loader will resolve it: bare file name
/// when both share a directory, otherwise an absolute path.
fn relative_to(target: &Path, fragment: &Path) -> String {
    let dir = |p: &Path| p.parent().map(Path::to_path_buf).unwrap_or_default();
    match target.file_name() {
        Some(name) if dir(target) == dir(fragment) => name.to_string_lossy().into_owned(),
        _ => std::path::absolute(target).unwrap_or_else(|_| target.to_path_buf()).display().to_string(),
    }
}
