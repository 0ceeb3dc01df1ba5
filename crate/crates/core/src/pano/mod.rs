//! Panorama geometry: perspective-to-equirectangular warping, mask voting,
//! unprojection through depth and importance-weighted point downsampling.
//!
//! Pixel `(u, v)` of a `W×H` equirectangular image samples azimuth
//! `π(W−2u)/W` and elevation `π(H−2v)/(2H)`: column 0 looks backward
//! (azimuth π), column `W/2` looks forward, row 0 is the zenith and row
//! `H/2` the horizon.

mod lift;
mod raster;
mod vote;
mod warp;

pub use lift::{downsample_points, importance_weight, unproject_mask, AnchorPointRaw, WEIGHT_EPS};
pub use raster::{Mask, Raster};
pub use vote::{mask_vote, refined_union, MaskProposal, Vote, VoteParams};
pub use warp::{pyramid, pyramid_level, warp_to_pano, Camera, Warp, PYRAMID_LEVELS};

use std::f64::consts::PI;

use crate::sh::{Direction, Vec3};

/// Spherical angles of a (possibly fractional) pixel position.
pub fn pixel_to_angles(u: f64, v: f64, width: usize, height: usize) -> (f64, f64) {
    let (w, h) = (width as f64, height as f64);
    (PI * (w - 2.0 * u) / w, PI * (h - 2.0 * v) / (2.0 * h))
}

pub fn angles_to_pixel(azimuth: f64, elevation: f64, width: usize, height: usize) -> (f64, f64) {
    let (w, h) = (width as f64, height as f64);
    let u = (w - azimuth * w / PI) / 2.0;
    let v = (h - 2.0 * elevation * h / PI) / 2.0;
    (u.rem_euclid(w), v)
}

pub fn pixel_direction(u: f64, v: f64, width: usize, height: usize) -> Vec3 {
    let (az, el) = pixel_to_angles(u, v, width, height);
    Direction::from_angles(az, el).unit()
}

/// Pano pixel position of a listener-relative point.
pub fn project(point: &Vec3, width: usize, height: usize) -> Option<(f64, f64)> {
    let d = Direction::from_vector(*point).ok()?;
    Some(angles_to_pixel(d.azimuth(), d.elevation(), width, height))
}
