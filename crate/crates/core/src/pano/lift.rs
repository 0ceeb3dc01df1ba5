//! Mask unprojection through panoramic depth and importance-weighted
//! downsampling of the resulting points.

use rand::{Rng, RngExt};

use super::raster::{Mask, Raster};
use super::{pixel_direction, pixel_to_angles};
use crate::error::{Error, Result};
use crate::sh::Vec3;

pub const WEIGHT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorPointRaw {
    pub position: Vec3,
    pub elevation: f64,
    pub depth: f64,
    pub normal: Vec3,
    /// Unit vector from the point back toward the listener.
    pub view: Vec3,
}

fn depth_at(depth: &Raster, u: usize, v: usize) -> Option<f64> {
    let d = depth.get(u, v, 0) as f64;
    (d.is_finite() && d > 0.0).then_some(d)
}

fn surface(depth: &Raster, u: usize, v: usize) -> Option<Vec3> {
    let (w, h) = (depth.width(), depth.height());
    depth_at(depth, u, v).map(|d| pixel_direction(u as f64, v as f64, w, h) * d)
}

/// Central difference, or one-sided when a neighbour is missing.
fn tangent(prev: Option<Vec3>, here: Vec3, next: Option<Vec3>) -> Option<Vec3> {
    match (prev, next) {
        (Some(a), Some(b)) => Some(b - a),
        (None, Some(b)) => Some(b - here),
        (Some(a), None) => Some(here - a),
        (None, None) => None,
    }
}

fn normal_at(depth: &Raster, u: usize, v: usize, here: Vec3, view: Vec3) -> Vec3 {
    let (w, h) = (depth.width(), depth.height());
    // Columns wrap around the panorama seam; rows stop at the poles.
    let tu = tangent(surface(depth, (u + w - 1) % w, v), here, surface(depth, (u + 1) % w, v));
    let tv = tangent(
        v.checked_sub(1).and_then(|p| surface(depth, u, p)),
        here,
        (v + 1 < h).then(|| surface(depth, u, v + 1)).flatten(),
    );
    let n = match (tu, tv) {
        (Some(a), Some(b)) => a.cross(&b),
        _ => return view,
    };
    let len = n.norm();
    if !(len > 1e-12) {
        return view;
    }
    let n = n / len;
    if n.dot(&view) < 0.0 {
        -n
    } else {
        n
    }
}

/// Lifts every masked pixel with valid depth to a listener-relative point.
pub fn unproject_mask(mask: &Mask, depth: &Raster) -> Result<Vec<AnchorPointRaw>> {
    if mask.dims() != (depth.width(), depth.height()) {
        return Err(Error::Raster("mask and depth dimensions differ".into()));
    }
    let (w, h) = mask.dims();
    let mut out = Vec::new();
    for v in 0..h {
        for u in 0..w {
            if !mask.get(u, v) {
                continue;
            }
            let Some(d) = depth_at(depth, u, v) else { continue };
            let dir = pixel_direction(u as f64, v as f64, w, h);
            let position = dir * d;
            let view = -dir;
            out.push(AnchorPointRaw {
                position,
                elevation: pixel_to_angles(u as f64, v as f64, w, h).1,
                depth: d,
                normal: normal_at(depth, u, v, position, view),
                view,
            });
        }
    }
    if out.is_empty() && mask.count() > 0 {
        log::warn!("mask covers no pixel with valid depth");
    }
    Ok(out)
}

/// `d² cos e / max(|nᵀv|, ε)`.
pub fn importance_weight(p: &AnchorPointRaw) -> f64 {
    p.depth * p.depth * p.elevation.cos() / p.normal.dot(&p.view).abs().max(WEIGHT_EPS)
}

/// Draws `min(n_max, N)` distinct points with probability proportional to
/// their importance (Efraimidis-Spirakis keys). Output keeps input order.
pub fn downsample_points<R: Rng + ?Sized>(points: &[AnchorPointRaw], n_max: usize, rng: &mut R) -> Result<Vec<Vec3>> {
    if points.is_empty() {
        return Err(Error::invalid("cannot downsample an empty point set"));
    }
    if points.len() <= n_max {
        return Ok(points.iter().map(|p| p.position).collect());
    }
    // Larger key wins; log keys avoid underflow of u^(1/w).
    let mut keyed: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let w = importance_weight(p);
            let u: f64 = rng.random();
            let key = if w > 0.0 && w.is_finite() { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = keyed[..n_max].iter().map(|(_, i)| *i).collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| points[i].position).collect())
}
