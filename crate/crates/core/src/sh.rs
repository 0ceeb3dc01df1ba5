//! Real spherical harmonics in the ambiX convention (ACN ordering, SN3D
//! normalization, no Condon-Shortley phase) plus the direction and rotation
//! types shared by every other module.
//!
//! Coordinates are right-handed with +X front, +Y left and +Z up. Azimuth is
//! measured from +X towards +Y, elevation from the horizontal plane towards +Z.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Highest ambisonic order the crate supports (64 channels).
pub const MAX_ORDER: usize = 7;

/// Horizontal magnitude below which the azimuth is pinned to zero.
const POLE_EPS: f64 = 1e-12;

/// Ambisonic order `L`, validated to `0..=MAX_ORDER`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Order(usize);

impl Order {
    pub const ZERO: Order = Order(0);
    pub const FIRST: Order = Order(1);

    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        Ok(Order(order))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Number of ACN channels, `(L+1)²`.
    pub fn channels(self) -> usize {
        (self.0 + 1) * (self.0 + 1)
    }

    /// Order whose channel count is `channels`, if it is a perfect square.
    pub fn from_channels(channels: usize) -> Result<Self> {
        let l = (channels as f64).sqrt().round() as usize;
        if l == 0 || l * l != channels {
            return Err(Error::schema(format!(
                "{channels} channels is not an ambisonic layout"
            )));
        }
        Order::new(l - 1)
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// ACN channel index of degree `l`, index `m` (`-l <= m <= l`).
pub fn acn(l: usize, m: isize) -> usize {
    ((l * l + l) as isize + m) as usize
}

/// Inverse of [`acn`].
pub fn acn_to_degree(channel: usize) -> (usize, isize) {
    let l = (channel as f64).sqrt().floor() as usize;
    let m = channel as isize - (l * l + l) as isize;
    (l, m)
}

/// A unit direction on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    unit: Vec3,
}

impl Direction {
    pub const FRONT: Direction = Direction {
        unit: Vec3::new(1.0, 0.0, 0.0),
    };

    pub fn from_angles(azimuth: f64, elevation: f64) -> Self {
        let (sa, ca) = azimuth.sin_cos();
        let (se, ce) = elevation.sin_cos();
        Direction {
            unit: Vec3::new(ce * ca, ce * sa, se),
        }
    }

    /// Normalizes `v`; fails on a zero (or non-finite) vector.
    pub fn from_vector(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateDirection);
        }
        Ok(Direction { unit: v / n })
    }

    pub fn unit(&self) -> Vec3 {
        self.unit
    }

    pub fn azimuth(&self) -> f64 {
        let u = &self.unit;
        if u.x.hypot(u.y) < POLE_EPS {
            0.0
        } else {
            u.y.atan2(u.x)
        }
    }

    pub fn elevation(&self) -> f64 {
        let u = &self.unit;
        u.z.atan2(u.x.hypot(u.y))
    }

    /// Direction mirrored across the median (X-Z) plane.
    pub fn mirrored_left_right(&self) -> Self {
        Direction {
            unit: Vec3::new(self.unit.x, -self.unit.y, self.unit.z),
        }
    }
}

/// θ = atan2(u_y, u_x), φ = atan2(u_z, √(u_x²+u_y²)).
pub fn angles_from_vector(u: Vec3) -> Result<Direction> {
    Direction::from_vector(u)
}

/// Listener head orientation: maps listener-frame vectors into the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Rotation3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Rotation3::identity())
    }

    /// Counter-clockwise turn about +Z (towards the left).
    pub fn yaw(angle: f64) -> Self {
        Rotation(Rotation3::from_axis_angle(&Vec3::z_axis(), angle))
    }

    /// Positive pitch tilts the listener's front (+X) up towards +Z.
    pub fn pitch(angle: f64) -> Self {
        Rotation(Rotation3::from_axis_angle(&Vec3::y_axis(), -angle))
    }

    /// From a `(w, x, y, z)` quaternion; normalized internally.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("zero quaternion"));
        }
        Ok(Rotation(UnitQuaternion::from_quaternion(q).to_rotation_matrix()))
    }

    /// Accepts a matrix that is orthonormal with determinant +1 within 1e-9.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let err = (m * m.transpose() - Matrix3::identity()).abs().max();
        if err > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("matrix is not a proper rotation"));
        }
        Ok(Rotation(Rotation3::from_matrix_unchecked(m)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        self.0.matrix()
    }

    /// `(w, x, y, z)`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&self.0);
        [q.w, q.i, q.j, q.k]
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    /// Spherical-linear interpolation between two orientations.
    pub fn slerp(&self, other: &Rotation, t: f64) -> Rotation {
        let a = UnitQuaternion::from_rotation_matrix(&self.0);
        let b = UnitQuaternion::from_rotation_matrix(&other.0);
        let q = a.try_slerp(&b, t, 1e-12).unwrap_or(if t < 0.5 { a } else { b });
        Rotation(q.to_rotation_matrix())
    }

    /// Rᵀ·v: a world vector expressed in the listener frame.
    pub fn to_listener(&self, v: &Vec3) -> Vec3 {
        self.0.inverse_transform_vector(v)
    }

    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

/// Direction of `Rᵀ d / ‖d‖`: a world offset seen from the listener.
pub fn rotate_into_listener(rotation: &Rotation, offset: &Vec3) -> Result<Direction> {
    Direction::from_vector(rotation.to_listener(offset))
}

/// Real SH values of one direction in ACN order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShVector {
    order: Order,
    coeffs: Vec<f64>,
}

impl ShVector {
    pub fn order(&self) -> Order {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }
}

impl std::ops::Index<usize> for ShVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coeffs[i]
    }
}

/// SN3D normalization √((2-δ_m0)(l-m)!/(l+m)!), indexed `[l][m]` with m ≥ 0.
fn sn3d_table() -> &'static [[f64; MAX_ORDER + 1]; MAX_ORDER + 1] {
    static TABLE: OnceLock<[[f64; MAX_ORDER + 1]; MAX_ORDER + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; MAX_ORDER + 1]; MAX_ORDER + 1];
        for (l, row) in t.iter_mut().enumerate() {
            for (m, v) in row.iter_mut().enumerate().take(l + 1) {
                // (l-m)!/(l+m)! = 1 / ((l-m+1)(l-m+2)...(l+m))
                let mut ratio = 1.0;
                for k in (l - m + 1)..=(l + m) {
                    ratio /= k as f64;
                }
                let delta = if m == 0 { 1.0 } else { 2.0 };
                *v = (delta * ratio).sqrt();
            }
        }
        t
    })
}

pub fn eval_sh(dir: &Direction, order: Order) -> ShVector {
    let mut coeffs = vec![0.0; order.channels()];
    eval_sh_into(dir, order, &mut coeffs);
    ShVector { order, coeffs }
}

/// Non-allocating [`eval_sh`]; writes `(L+1)²` values into the front of `out`.
///
/// Works on the Cartesian components directly: with `x + iy = cosφ·e^{iθ}`,
/// `cos^m φ · cos(mθ)` and `cos^m φ · sin(mθ)` are the real and imaginary
/// parts of `(x + iy)^m`, and the remaining Legendre factor is a polynomial
/// in `z = sin φ`. The poles need no special casing.
pub fn eval_sh_into(dir: &Direction, order: Order, out: &mut [f64]) {
    let l_max = order.get();
    assert!(out.len() >= order.channels(), "output slice too short");
    let norm = sn3d_table();
    let (x, y, z) = (dir.unit.x, dir.unit.y, dir.unit.z);

    // (x + iy)^m
    let mut cos_m = [0.0; MAX_ORDER + 1];
    let mut sin_m = [0.0; MAX_ORDER + 1];
    cos_m[0] = 1.0;
    for m in 1..=l_max {
        cos_m[m] = cos_m[m - 1] * x - sin_m[m - 1] * y;
        sin_m[m] = sin_m[m - 1] * x + cos_m[m - 1] * y;
    }

    // Associated Legendre functions with the (1-z²)^{m/2} factor removed.
    let mut p = [[0.0; MAX_ORDER + 1]; MAX_ORDER + 1];
    let mut diag = 1.0;
    for m in 0..=l_max {
        if m > 0 {
            diag *= (2 * m - 1) as f64;
        }
        p[m][m] = diag;
        if m < l_max {
            p[m + 1][m] = z * (2 * m + 1) as f64 * diag;
        }
        for l in (m + 2)..=l_max {
            p[l][m] = ((2 * l - 1) as f64 * z * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m])
                / (l - m) as f64;
        }
    }

    for l in 0..=l_max {
        let centre = l * l + l;
        out[centre] = norm[l][0] * p[l][0];
        for m in 1..=l {
            let base = norm[l][m] * p[l][m];
            out[centre + m] = base * cos_m[m];
            out[centre - m] = base * sin_m[m];
        }
    }
}

/// Cell-centred equiangular grid with spherical area weights summing to one.
pub fn equiangular_grid(n_az: usize, n_el: usize) -> Vec<(Direction, f64)> {
    let mut grid = Vec::with_capacity(n_az * n_el);
    let mut total = 0.0;
    for j in 0..n_el {
        let el = -std::f64::consts::FRAC_PI_2 + (j as f64 + 0.5) * std::f64::consts::PI / n_el as f64;
        for i in 0..n_az {
            let az = -std::f64::consts::PI + (i as f64 + 0.5) * std::f64::consts::TAU / n_az as f64;
            let w = el.cos();
            total += w;
            grid.push((Direction::from_angles(az, el), w));
        }
    }
    for cell in &mut grid {
        cell.1 /= total;
    }
    grid
}
