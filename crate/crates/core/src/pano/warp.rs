//! Calibrated perspective image to equirectangular panorama, sampled from a
//! binomial pyramid at the level matching the local magnification.

use super::raster::{Mask, Raster};
use super::pixel_direction;
use crate::error::{Error, Result};
use crate::sh::Vec3;

pub const PYRAMID_LEVELS: usize = 6;

/// Pinhole camera pitched up by `elevation`, looking along +X at zero pitch.
/// `focal` is in units of image width; the principal point is the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub elevation: f64,
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(elevation: f64, focal: f64, width: usize, height: usize) -> Result<Self> {
        if !elevation.is_finite() || !focal.is_finite() {
            return Err(Error::NonFinite("camera calibration".into()));
        }
        if elevation.abs() >= std::f64::consts::FRAC_PI_2 || focal <= 0.0 {
            return Err(Error::invalid("calibration needs |elevation| < π/2 and focal > 0"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera image must be non-empty"));
        }
        Ok(Camera { elevation, focal, width, height })
    }

    /// Offset from the image centre in pixels, or `None` behind the camera.
    pub fn project_offset(&self, d: &Vec3) -> Option<(f64, f64)> {
        let (s, c) = self.elevation.sin_cos();
        let forward = d.x * c + d.z * s;
        if forward <= 0.0 {
            return None;
        }
        let right = -d.y;
        let down = d.x * s - d.z * c;
        let f = self.focal * self.width as f64;
        Some((f * right / forward, f * down / forward))
    }

    /// Image pixel coordinates (pixel centres at integers).
    pub fn project(&self, d: &Vec3) -> Option<(f64, f64)> {
        let (x, y) = self.project_offset(d)?;
        Some((x + (self.width as f64 - 1.0) / 2.0, y + (self.height as f64 - 1.0) / 2.0))
    }

    pub fn in_frustum(&self, d: &Vec3) -> bool {
        self.project_offset(d)
            .is_some_and(|(x, y)| x.abs() <= self.width as f64 / 2.0 && y.abs() <= self.height as f64 / 2.0)
    }
}

fn blur_decimate(img: &Raster) -> Raster {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    // Horizontal pass at the kept columns only, then vertical at kept rows.
    let mut tmp = vec![0f32; nw * h * ch];
    for y in 0..h {
        for x in 0..nw {
            for c in 0..ch {
                let mut s = 0.0;
                for (k, wk) in K.iter().enumerate() {
                    s += wk * img.get(clamp(2 * x as isize + k as isize - 2, w), y, c);
                }
                tmp[(y * nw + x) * ch + c] = s;
            }
        }
    }
    let mut out = vec![0f32; nw * nh * ch];
    for y in 0..nh {
        for x in 0..nw {
            for c in 0..ch {
                let mut s = 0.0;
                for (k, wk) in K.iter().enumerate() {
                    s += wk * tmp[(clamp(2 * y as isize + k as isize - 2, h) * nw + x) * ch + c];
                }
                out[(y * nw + x) * ch + c] = s;
            }
        }
    }
    Raster::new(nw, nh, ch, out).expect("pyramid level dimensions")
}

pub fn pyramid(img: &Raster) -> Vec<Raster> {
    let mut levels = vec![img.clone()];
    for _ in 1..PYRAMID_LEVELS {
        let next = blur_decimate(levels.last().unwrap());
        levels.push(next);
    }
    levels
}

/// `clip(round(log2 ρ), 0, S−1)`; non-finite or non-positive ρ selects level 0.
pub fn pyramid_level(rho: f64) -> usize {
    if !(rho > 0.0) || rho.is_nan() {
        return 0;
    }
    rho.log2().round().clamp(0.0, (PYRAMID_LEVELS - 1) as f64) as usize
}

fn bilinear(img: &Raster, x: f64, y: f64, c: usize) -> f32 {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (fx, fy) = ((x - x0 as f64) as f32, (y - y0 as f64) as f32);
    let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
    let bot = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
    top * (1.0 - fy) + bot * fy
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    pub pano: Raster,
    pub valid: Mask,
    /// Pyramid level chosen per valid pixel (0 elsewhere).
    pub levels: Vec<u8>,
}

pub fn warp_to_pano(img: &Raster, elevation: f64, focal: f64, pano_width: usize, pano_height: usize) -> Result<Warp> {
    if pano_width != 2 * pano_height || pano_height == 0 {
        return Err(Error::invalid(format!("panorama must be 2:1, got {pano_width}x{pano_height}")));
    }
    let cam = Camera::new(elevation, focal, img.width(), img.height())?;
    let levels = pyramid(img);
    let ch = img.channels();
    let mut pano = Raster::filled(pano_width, pano_height, ch, 0.0)?;
    let mut valid = Mask::empty(pano_width, pano_height)?;
    let mut chosen = vec![0u8; pano_width * pano_height];
    for v in 0..pano_height {
        for u in 0..pano_width {
            let d = pixel_direction(u as f64, v as f64, pano_width, pano_height);
            if !cam.in_frustum(&d) {
                continue;
            }
            let p0 = cam.project(&d).expect("in frustum");
            let rho = [(1.0, 0.0), (0.0, 1.0)]
                .iter()
                .filter_map(|(du, dv)| {
                    let q = cam.project(&pixel_direction(u as f64 + du, v as f64 + dv, pano_width, pano_height))?;
                    Some(((q.0 - p0.0).powi(2) + (q.1 - p0.1).powi(2)).sqrt())
                })
                .fold(0.0, f64::max);
            let s = pyramid_level(rho);
            let scale = (1u32 << s) as f64;
            for c in 0..ch {
                pano.set(u, v, c, bilinear(&levels[s], p0.0 / scale, p0.1 / scale, c));
            }
            valid.set(u, v, true);
            chosen[v * pano_width + u] = s as u8;
        }
    }
    Ok(Warp { pano, valid, levels: chosen })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::pano::pixel_to_angles;
    use crate::sh::Direction;

    fn checker(w: usize, h: usize) -> Raster {
        let data = (0..w * h).map(|i| ((i % w + i / w) % 2) as f32).collect();
        Raster::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn principal_ray_hits_the_image_centre() {
        let cam = Camera::new(0.0, 0.7, 101, 61).unwrap();
        let (x, y) = cam.project(&Direction::FRONT.unit()).unwrap();
        assert_eq!((x, y), (50.0, 30.0));
        let tilted = Camera::new(0.3, 0.7, 101, 61).unwrap();
        let (x, y) = tilted.project(&Direction::from_angles(0.0, 0.3).unit()).unwrap();
        assert_abs_diff_eq!(x, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 30.0, epsilon = 1e-12);
        assert!(cam.project(&Direction::from_angles(3.0, 0.0).unit()).is_none());
        // Left of centre in the world is left in the image; up is up.
        let (x, _) = cam.project(&Direction::from_angles(0.2, 0.0).unit()).unwrap();
        let (_, y) = cam.project(&Direction::from_angles(0.0, 0.2).unit()).unwrap();
        assert!(x < 50.0 && y < 30.0);
    }

    #[test]
    fn centre_pixel_samples_the_image_centre() {
        let mut img = Raster::filled(9, 9, 1, 0.0).unwrap();
        img.set(4, 4, 0, 1.0);
        let w = warp_to_pano(&img, 0.0, 0.5, 720, 360).unwrap();
        assert_eq!(w.pano.get(360, 180, 0), 1.0);
        assert_eq!(w.levels[180 * 720 + 360], 0);
        assert!(w.pano.get(361, 180, 0) < 1.0);
    }

    #[test]
    fn ninety_degree_fov_spans_ninety_degrees() {
        let img = Raster::filled(64, 64, 1, 0.5).unwrap();
        let (pw, ph) = (720, 360);
        let w = warp_to_pano(&img, 0.0, 0.5, pw, ph).unwrap();
        let row = ph / 2;
        let cols: Vec<usize> = (0..pw).filter(|u| w.valid.get(*u, row)).collect();
        let span = cols.len() as f64 * 360.0 / pw as f64;
        assert!((span - 90.0).abs() <= 360.0 / pw as f64, "span {span}");
        // Azimuth of the outermost valid column is within a pixel of 45°.
        let (az, _) = pixel_to_angles(cols[0] as f64, row as f64, pw, ph);
        assert!((az.to_degrees() - 45.0).abs() <= 0.5 + 1e-9);
    }

    #[test]
    fn validity_is_symmetric_about_the_equator() {
        let img = checker(40, 30);
        for f in [0.3, 0.5, 1.2] {
            let w = warp_to_pano(&img, 0.0, f, 256, 128).unwrap();
            for v in 1..64 {
                for u in 0..256 {
                    assert_eq!(w.valid.get(u, v), w.valid.get(u, 128 - v));
                }
            }
        }
    }

    #[test]
    fn equator_maps_to_the_central_row_monotonically() {
        let img = Raster::filled(80, 41, 1, 0.0).unwrap();
        let cam = Camera::new(0.0, 0.4, 80, 41).unwrap();
        let (pw, ph) = (512, 256);
        let mut last = f64::NEG_INFINITY;
        for u in 0..pw {
            let d = pixel_direction(u as f64, (ph / 2) as f64, pw, ph);
            if let Some((x, y)) = cam.project(&d).filter(|_| cam.in_frustum(&d)) {
                assert_abs_diff_eq!(y, 20.0, epsilon = 1e-9);
                assert!(x > last);
                last = x;
            }
        }
        assert!(last.is_finite());
        assert!(warp_to_pano(&img, 0.0, 0.4, pw, ph).is_ok());
    }

    #[test]
    fn wide_fields_select_coarser_levels() {
        let img = checker(256, 256);
        let w = warp_to_pano(&img, 0.0, 2.0, 128, 64).unwrap();
        let used: Vec<u8> = (0..w.levels.len()).filter(|i| w.valid.bits()[*i]).map(|i| w.levels[i]).collect();
        assert!(!used.is_empty() && used.iter().all(|s| *s >= 3));
        // The pyramid removes the checkerboard, so the samples are near grey.
        let vals: Vec<f32> = (0..w.levels.len()).filter(|i| w.valid.bits()[*i]).map(|i| w.pano.data()[i]).collect();
        assert!(vals.iter().all(|v| (v - 0.5).abs() < 0.1));
    }

    #[test]
    fn bad_calibration_is_rejected() {
        let img = checker(4, 4);
        assert!(matches!(warp_to_pano(&img, f64::NAN, 0.5, 8, 4), Err(Error::NonFinite(_))));
        assert!(warp_to_pano(&img, 0.0, -1.0, 8, 4).is_err());
        assert!(warp_to_pano(&img, 1.6, 0.5, 8, 4).is_err());
        assert!(warp_to_pano(&img, 0.0, 0.5, 8, 8).is_err());
    }

    #[test]
    fn pyramid_shapes_and_constant_preservation() {
        let p = pyramid(&Raster::filled(37, 20, 3, 0.25).unwrap());
        assert_eq!(p.len(), PYRAMID_LEVELS);
        assert_eq!((p[1].width(), p[1].height()), (19, 10));
        assert_eq!((p[5].width(), p[5].height()), (2, 1));
        assert!(p[5].data().iter().all(|v| (*v - 0.25).abs() < 1e-6));
    }

    proptest! {
        #[test]
        fn pyramid_level_is_always_in_range(rho in prop::num::f64::ANY) {
            prop_assert!(pyramid_level(rho) < PYRAMID_LEVELS);
        }

        #[test]
        fn pyramid_level_rounds_log2(e in -3.0f64..8.0) {
            let s = pyramid_level(2f64.powf(e));
            prop_assert_eq!(s as f64, e.round().clamp(0.0, 5.0));
        }
    }
}
