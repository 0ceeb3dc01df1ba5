//! Spatial evaluation metrics: intensity-vector DoA, angular errors,
//! spherical energy maps with CC/AUC, and directional mono renders.

use serde::Serialize;

use crate::buffer::{AmbisonicBuffer, MonoBuffer};
use crate::dsp::Stft;
use crate::encoder::virtual_mic;
use crate::error::{Error, Result};
use crate::sh::{eval_sh, Direction, Order, Vec3};

pub const DOA_FFT: usize = 1024;
pub const DOA_HOP: usize = 512;
pub const DEFAULT_GRID: (usize, usize) = (64, 32);
pub const MIN_GRID: (usize, usize) = (8, 4);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaEstimate {
    pub azimuth: f64,
    pub elevation: f64,
    pub intensity: Vec3,
}

impl DoaEstimate {
    pub fn from_angles(azimuth: f64, elevation: f64) -> Self {
        DoaEstimate {
            azimuth,
            elevation,
            intensity: Direction::from_angles(azimuth, elevation).unit(),
        }
    }

    pub fn unit(&self) -> Vec3 {
        Direction::from_angles(self.azimuth, self.elevation).unit()
    }
}

/// Intensity vector `Σ Re(W·X̄)` etc. summed over STFT frames and bins.
/// Orders above one use their first-order channels.
pub fn intensity_doa(ambi: &AmbisonicBuffer) -> Result<DoaEstimate> {
    if ambi.order() < Order::FIRST {
        return Err(Error::OrderMismatch {
            expected: 1,
            found: ambi.order().get(),
        });
    }
    let stft = Stft::new(DOA_FFT, DOA_HOP);
    let spec: Vec<_> = (0..4).map(|c| stft.forward(ambi.channel(c))).collect();
    let cross = |c: usize| -> f64 {
        spec[0]
            .iter()
            .zip(&spec[c])
            .map(|(w, x)| (w * x.conj()).re)
            .sum()
    };
    // ACN: W=0, Y=1, Z=2, X=3
    let intensity = Vec3::new(cross(3), cross(1), cross(2));
    let dir = Direction::from_vector(intensity).map_err(|_| Error::NoEnergy)?;
    Ok(DoaEstimate {
        azimuth: dir.azimuth(),
        elevation: dir.elevation(),
        intensity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularErrors {
    pub azimuth: f64,
    pub elevation: f64,
    /// `arccos(clip(u_gt·u_pred))`, the primary geodesic error.
    pub angular: f64,
    /// Haversine with swapped term roles: Δθ in the plain term, Δφ in
    /// the cosine-weighted term.
    pub haversine_swapped: f64,
    /// Standard haversine on (azimuth, elevation).
    pub haversine_standard: f64,
}

fn haversine(plain: f64, weighted: f64, cos_prod: f64) -> f64 {
    let a = (plain / 2.0).sin().powi(2) + cos_prod * (weighted / 2.0).sin().powi(2);
    let a = a.clamp(0.0, 1.0);
    2.0 * a.sqrt().atan2((1.0 - a).sqrt())
}

pub fn angular_errors(gt: &DoaEstimate, pred: &DoaEstimate) -> AngularErrors {
    let d = (gt.azimuth - pred.azimuth).abs() % std::f64::consts::TAU;
    let azimuth = d.min(std::f64::consts::TAU - d);
    let elevation = (gt.elevation - pred.elevation).abs();
    let (u, v) = (gt.unit(), pred.unit());
    // Rounding can leave u·u a hair below one.
    let angular = if u == v { 0.0 } else { u.dot(&v).clamp(-1.0, 1.0).acos() };
    let cos_prod = gt.elevation.cos() * pred.elevation.cos();
    AngularErrors {
        azimuth,
        elevation,
        angular,
        haversine_swapped: haversine(azimuth, elevation, cos_prod),
        haversine_standard: haversine(elevation, azimuth, cos_prod),
    }
}

/// Per-direction energy on an equiangular grid laid out like an
/// equirectangular image: row 0 is the top, column 0 is azimuth near +π.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyMap {
    pub n_az: usize,
    pub n_el: usize,
    pub values: Vec<f64>,
}

impl EnergyMap {
    pub fn new(n_az: usize, n_el: usize, values: Vec<f64>) -> Result<Self> {
        if n_az < MIN_GRID.0 || n_el < MIN_GRID.1 {
            return Err(Error::invalid(format!(
                "energy grid must be at least {}x{}, got {n_az}x{n_el}",
                MIN_GRID.0, MIN_GRID.1
            )));
        }
        if values.len() != n_az * n_el {
            return Err(Error::invalid("energy map size does not match its grid"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("energy values must be finite and non-negative"));
        }
        Ok(EnergyMap { n_az, n_el, values })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_az, self.n_el)
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.n_az + col]
    }

    /// Centre direction of cell `(col, row)`.
    pub fn direction(&self, col: usize, row: usize) -> Direction {
        grid_direction(self.n_az, self.n_el, col, row)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let i = (0..self.values.len())
            .max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap_or(0);
        (i % self.n_az, i / self.n_az)
    }

    /// Min-max normalized to `[0, 1]`; a constant map becomes all zeros.
    pub fn normalized(&self) -> EnergyMap {
        EnergyMap {
            n_az: self.n_az,
            n_el: self.n_el,
            values: min_max(&self.values),
        }
    }
}

/// Cell-centre direction shared with the panorama pixel mapping.
pub fn grid_direction(n_az: usize, n_el: usize, col: usize, row: usize) -> Direction {
    let (w, h) = (n_az as f64, n_el as f64);
    let az = std::f64::consts::PI * (w - 1.0 - 2.0 * col as f64) / w;
    let el = std::f64::consts::PI * (h - 1.0 - 2.0 * row as f64) / (2.0 * h);
    Direction::from_angles(az, el)
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / span).collect()
}

/// `E(d) = Σ_t (y(d)ᵀ a(t))²`, evaluated as `y(d)ᵀ C y(d)` with the channel
/// covariance `C = Σ_t a(t) a(t)ᵀ`.
pub fn energy_map(ambi: &AmbisonicBuffer, n_az: usize, n_el: usize) -> Result<EnergyMap> {
    let n = ambi.num_channels();
    let mut cov = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v: f64 = ambi.channel(a).iter().zip(ambi.channel(b)).map(|(x, y)| x * y).sum();
            cov[a * n + b] = v;
            cov[b * n + a] = v;
        }
    }
    let mut values = Vec::with_capacity(n_az * n_el);
    for row in 0..n_el {
        for col in 0..n_az {
            let y = eval_sh(&grid_direction(n_az, n_el, col, row), ambi.order());
            let mut e = 0.0;
            for a in 0..n {
                let mut s = 0.0;
                for b in 0..n {
                    s += cov[a * n + b] * y[b];
                }
                e += y[a] * s;
            }
            values.push(e.max(0.0));
        }
    }
    EnergyMap::new(n_az, n_el, values)
}

fn check_grids(a: &EnergyMap, b: &EnergyMap) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::GridMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

/// Pearson correlation of the min-max normalized maps; 0 if either is constant.
pub fn cc(pred: &EnergyMap, gt: &EnergyMap) -> Result<f64> {
    check_grids(pred, gt)?;
    let p = min_max(&pred.values);
    let g = min_max(&gt.values);
    let n = p.len() as f64;
    let (mp, mg) = (p.iter().sum::<f64>() / n, g.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in p.iter().zip(&g) {
        let (dx, dy) = (x - mp, y - mg);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// ROC area of `pred` scores against `gt` cells strictly above its median,
/// via the Mann-Whitney rank statistic with averaged tie ranks.
pub fn auc(pred: &EnergyMap, gt: &EnergyMap) -> Result<f64> {
    check_grids(pred, gt)?;
    let g = min_max(&gt.values);
    let m = median(&g);
    let labels: Vec<bool> = g.iter().map(|v| *v > m).collect();
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let scores = &pred.values;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let rank_pos: f64 = ranks.iter().zip(&labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_pos - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalRenders {
    pub left: MonoBuffer,
    pub right: MonoBuffer,
    pub front: MonoBuffer,
    pub back: MonoBuffer,
}

impl DirectionalRenders {
    pub fn named(&self) -> [(&'static str, &MonoBuffer); 4] {
        [
            ("left", &self.left),
            ("right", &self.right),
            ("front", &self.front),
            ("back", &self.back),
        ]
    }

    pub fn get(&self, name: &str) -> Option<&MonoBuffer> {
        self.named().into_iter().find(|(n, _)| *n == name).map(|(_, b)| b)
    }
}

/// Virtual microphones toward θ = π/2, −π/2, 0 and π on the horizon.
pub fn directional_renders(ambi: &AmbisonicBuffer) -> DirectionalRenders {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mic = |az: f64| virtual_mic(ambi, &Direction::from_angles(az, 0.0));
    DirectionalRenders {
        left: mic(FRAC_PI_2),
        right: mic(-FRAC_PI_2),
        front: mic(0.0),
        back: mic(PI),
    }
}

/// Every spatial column of a prediction compared with its reference.
#[derive(Debug, Clone, Serialize)]
pub struct SpatialReport {
    pub doa_ref_azimuth: f64,
    pub doa_ref_elevation: f64,
    pub doa_pred_azimuth: f64,
    pub doa_pred_elevation: f64,
    pub errors: AngularErrors,
    pub cc: f64,
    /// `None` when the reference map has degenerate labels.
    pub auc: Option<f64>,
}

pub fn compare(pred: &AmbisonicBuffer, reference: &AmbisonicBuffer, grid: (usize, usize)) -> Result<SpatialReport> {
    let gt = intensity_doa(reference)?;
    let p = intensity_doa(pred)?;
    let e_ref = energy_map(reference, grid.0, grid.1)?;
    let e_pred = energy_map(pred, grid.0, grid.1)?;
    let auc = match auc(&e_pred, &e_ref) {
        Ok(v) => Some(v),
        Err(Error::DegenerateLabels) => None,
        Err(e) => return Err(e),
    };
    Ok(SpatialReport {
        doa_ref_azimuth: gt.azimuth,
        doa_ref_elevation: gt.elevation,
        doa_pred_azimuth: p.azimuth,
        doa_pred_elevation: p.elevation,
        errors: angular_errors(&gt, &p),
        cc: cc(&e_pred, &e_ref)?,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::buffer::SAMPLE_RATE;
    use crate::encoder::{encode_point, AttenuationModel};
    use crate::scene::{ListenerPose, SoundSource, SourceType};

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn foa(w: Vec<f64>, y: Vec<f64>, z: Vec<f64>, x: Vec<f64>) -> AmbisonicBuffer {
        AmbisonicBuffer::from_channels(Order::FIRST, SAMPLE_RATE, vec![w, y, z, x]).unwrap()
    }

    fn point_at(dir: Vec3, order: Order, rng: &mut ChaCha8Rng, len: usize) -> AmbisonicBuffer {
        let s = SoundSource {
            id: "p".into(),
            label: String::new(),
            prompt: String::new(),
            peak_db: 0.0,
            source_type: SourceType::Point,
            anchors: vec![dir * 3.0],
            audio: MonoBuffer::new(noise(rng, len), SAMPLE_RATE),
        };
        encode_point(&s, &ListenerPose::default(), order, &AttenuationModel::default()).unwrap()
    }

    #[test]
    fn doa_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = noise(&mut rng, 4800);
        let z = vec![0.0; 4800];
        let d = intensity_doa(&foa(n.clone(), z.clone(), z.clone(), n.clone())).unwrap();
        assert_abs_diff_eq!(d.azimuth, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.elevation, 0.0, epsilon = 1e-12);
        let d = intensity_doa(&foa(n.clone(), n.clone(), z.clone(), z.clone())).unwrap();
        assert_abs_diff_eq!(d.azimuth, FRAC_PI_2, epsilon = 1e-12);
        assert!(matches!(
            intensity_doa(&AmbisonicBuffer::zeros(Order::FIRST, 4800, SAMPLE_RATE)),
            Err(Error::NoEnergy)
        ));
        assert!(intensity_doa(&AmbisonicBuffer::zeros(Order::ZERO, 10, SAMPLE_RATE)).is_err());
    }

    #[test]
    fn doa_recovers_encoded_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let truth = DoaEstimate::from_angles(rng.random_range(-PI..PI), rng.random_range(-1.4..1.4));
            let a = point_at(truth.unit(), Order::FIRST, &mut rng, 48_000);
            let est = intensity_doa(&a).unwrap();
            assert!(angular_errors(&truth, &est).angular < 0.02);
        }
    }

    #[test]
    fn angular_error_examples() {
        let f = DoaEstimate::from_angles(0.0, 0.0);
        let e = angular_errors(&f, &f);
        assert_eq!((e.azimuth, e.elevation, e.angular), (0.0, 0.0, 0.0));
        let e = angular_errors(&f, &DoaEstimate::from_angles(PI, 0.0));
        assert_abs_diff_eq!(e.azimuth, PI);
        assert_abs_diff_eq!(e.angular, PI, epsilon = 1e-7);
        let e = angular_errors(&f, &DoaEstimate::from_angles(FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(e.angular, 0f64.acos(), epsilon = 1e-12);
        // Wrapped azimuth difference across ±π.
        let e = angular_errors(&DoaEstimate::from_angles(3.0, 0.0), &DoaEstimate::from_angles(-3.0, 0.0));
        assert_abs_diff_eq!(e.azimuth, 2.0 * PI - 6.0, epsilon = 1e-12);
    }

    #[test]
    fn swapped_haversine_differs_off_the_horizon() {
        let a = DoaEstimate::from_angles(0.0, 1.0);
        let b = DoaEstimate::from_angles(1.0, 1.0);
        let e = angular_errors(&a, &b);
        assert_abs_diff_eq!(e.haversine_standard, e.angular, epsilon = 1e-9);
        assert!((e.haversine_swapped - e.angular).abs() > 0.1);
    }

    #[test]
    fn omni_field_has_a_flat_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = vec![0.0; 256];
        let m = energy_map(&foa(noise(&mut rng, 256), z.clone(), z.clone(), z), 16, 8).unwrap();
        assert!(m.values.iter().all(|v| (*v - m.values[0]).abs() < 1e-9 * m.values[0]));
        assert!(energy_map(&AmbisonicBuffer::zeros(Order::FIRST, 4, SAMPLE_RATE), 4, 4).is_err());
    }

    #[test]
    fn point_source_map_peaks_at_its_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n_az, n_el) = DEFAULT_GRID;
        for _ in 0..5 {
            // Aim at a cell centre so the argmax is unambiguous.
            let (col, row) = (rng.random_range(0..n_az), rng.random_range(1..n_el - 1));
            let dir = grid_direction(n_az, n_el, col, row);
            let a = point_at(dir.unit(), Order::new(2).unwrap(), &mut rng, 2048);
            assert_eq!(energy_map(&a, n_az, n_el).unwrap().argmax(), (col, row));
        }
    }

    #[test]
    fn map_matches_virtual_mic_energy_for_a_two_source_mix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let order = Order::new(2).unwrap();
        let mut a = point_at(Vec3::new(1.0, 0.2, 0.1).normalize(), order, &mut rng, 1000);
        a.add_assign(&point_at(Vec3::new(-0.3, -1.0, 0.4).normalize(), order, &mut rng, 1000)).unwrap();
        let m = energy_map(&a, 16, 8).unwrap();
        for row in 0..8 {
            for col in 0..16 {
                let v = virtual_mic(&a, &m.direction(col, row));
                let e: f64 = v.samples.iter().map(|x| x * x).sum();
                assert!((m.get(col, row) - e).abs() <= 1e-9 * e);
            }
        }
    }

    fn map(values: Vec<f64>) -> EnergyMap {
        EnergyMap::new(8, 4, values).unwrap()
    }

    fn ramp() -> Vec<f64> {
        (0..32).map(|i| ((i * 7) % 32) as f64 / 31.0).collect()
    }

    #[test]
    fn cc_examples() {
        let x = map(ramp());
        assert_abs_diff_eq!(cc(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        let inv = map(ramp().iter().map(|v| 1.0 - v).collect());
        assert_abs_diff_eq!(cc(&x, &inv).unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(cc(&map(vec![0.3; 32]), &x).unwrap(), 0.0);
        let other = EnergyMap::new(16, 4, vec![0.0; 64]).unwrap();
        assert!(matches!(cc(&x, &other), Err(Error::GridMismatch(..))));
    }

    #[test]
    fn auc_examples() {
        let x = map(ramp());
        assert_eq!(auc(&x, &x).unwrap(), 1.0);
        let inv = map(ramp().iter().map(|v| 1.0 - v).collect());
        assert_eq!(auc(&inv, &x).unwrap(), 0.0);
        assert!(matches!(auc(&x, &map(vec![1.0; 32])), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn auc_of_random_scores_is_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt = EnergyMap::new(64, 32, (0..2048).map(|_| rng.random::<f64>()).collect()).unwrap();
        let trials: Vec<f64> = (0..100)
            .map(|_| {
                let p = EnergyMap::new(64, 32, (0..2048).map(|_| rng.random::<f64>()).collect()).unwrap();
                auc(&p, &gt).unwrap()
            })
            .collect();
        let mean = trials.iter().sum::<f64>() / 100.0;
        assert!((mean - 0.5).abs() < 0.05);
        assert!(trials.iter().all(|a| (a - 0.5).abs() < 0.05));
    }

    /// AUC as the fraction of (positive, negative) pairs ranked correctly,
    /// ties counting one half.
    fn auc_pairs(pred: &[f64], gt: &[f64]) -> f64 {
        let g = min_max(gt);
        let m = median(&g);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..g.len() {
            for j in 0..g.len() {
                if g[i] > m && g[j] <= m {
                    den += 1.0;
                    num += if pred[i] > pred[j] { 1.0 } else if pred[i] == pred[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn directional_render_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = point_at(Vec3::y(), Order::FIRST, &mut rng, 2000);
        let r = directional_renders(&a);
        let left = r.left.rms();
        assert!(r.named().iter().filter(|(n, _)| *n != "left").all(|(_, b)| b.rms() < left));

        let n = noise(&mut rng, 100);
        let z = vec![0.0; 100];
        let omni = directional_renders(&foa(n.clone(), z.clone(), z.clone(), z.clone()));
        assert!(omni.named().iter().all(|(_, b)| b.samples == n));
        let silent = directional_renders(&AmbisonicBuffer::zeros(Order::FIRST, 10, SAMPLE_RATE));
        assert!(silent.named().iter().all(|(_, b)| b.samples.iter().all(|v| *v == 0.0)));
    }

    proptest! {
        #[test]
        fn angular_error_is_symmetric_and_bounded(a1 in -PI..PI, e1 in -1.5f64..1.5, a2 in -PI..PI, e2 in -1.5f64..1.5) {
            let (p, q) = (DoaEstimate::from_angles(a1, e1), DoaEstimate::from_angles(a2, e2));
            let pq = angular_errors(&p, &q);
            prop_assert_eq!(pq.angular, angular_errors(&q, &p).angular);
            prop_assert!(pq.angular <= PI);
            prop_assert_eq!(angular_errors(&p, &p).angular, 0.0);
            // Matched roles: the standard haversine is the same geodesic.
            if pq.angular > 1e-3 && pq.angular < PI - 1e-3 {
                prop_assert!((pq.haversine_standard - pq.angular).abs() < 1e-9);
            }
        }

        #[test]
        fn cc_is_affine_invariant(v in prop::collection::vec(0.0f64..1.0, 32), w in prop::collection::vec(0.0f64..1.0, 32), s in 0.01f64..100.0, o in 0.0f64..10.0) {
            let (a, b) = (map(v.clone()), map(w));
            let scaled = map(v.iter().map(|x| s * x + o).collect());
            let c = cc(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((c - cc(&scaled, &b).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn auc_is_rank_based(v in prop::collection::vec(0.0f64..1.0, 32), w in prop::collection::vec(0.0f64..1.0, 32)) {
            let (p, g) = (map(v.clone()), map(w.clone()));
            let Ok(a) = auc(&p, &g) else { return Ok(()) };
            prop_assert!((a - auc_pairs(&v, &w)).abs() < 1e-12);
            let monotone = map(v.iter().map(|x| (3.0 * x).exp() + 2.0).collect());
            prop_assert!((a - auc(&monotone, &g).unwrap()).abs() < 1e-12);
        }
    }
}
