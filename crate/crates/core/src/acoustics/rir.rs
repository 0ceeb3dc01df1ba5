//! Early/late RIR synthesis and its reverse-mode parameter gradient.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::paths::ReflectionPath;
use super::{band_weights, param, sigmoid, RirParams, NUM_BANDS, NUM_PARAMS, REFERENCE_BAND, SPEED_OF_SOUND};
use crate::buffer::{AmbisonicBuffer, MonoBuffer, SAMPLE_RATE};
use crate::dsp::convolve;
use crate::error::{Error, Result};
use crate::sh::{eval_sh, Order};

pub const MINPHASE_FFT: usize = 2048;
pub const MINPHASE_TAPS: usize = 512;
/// Early window extends this far past the last path.
pub const EARLY_MARGIN: f64 = 0.010;
pub const CROSSFADE: f64 = 0.005;
/// Span before the cutoff whose per-channel peak sets the late level.
pub const PEAK_WINDOW: f64 = 0.020;
const R_FLOOR: f64 = 1e-12;
const FS: f64 = SAMPLE_RATE as f64;

/// `e_b(t) = 1000^(−t/T60)`: exactly −60 dB at `t = T60`.
pub fn late_envelope(t: f64, rt60: f64) -> f64 {
    1000f64.powf(-t / rt60)
}

pub fn early_cutoff(paths: &[ReflectionPath]) -> f64 {
    paths.iter().map(|p| p.delay).fold(0.0, f64::max) + EARLY_MARGIN
}

fn cutoff_sample(t_e: f64) -> usize {
    (t_e * FS).round() as usize
}

/// Early weight per sample; the late weight is `1 − w`. The raised-cosine
/// ramp is centred on the cutoff sample.
pub fn crossfade_weights(len: usize, t_e: f64) -> Vec<f64> {
    let centre = cutoff_sample(t_e) as f64;
    let width = CROSSFADE * FS;
    (0..len)
        .map(|n| {
            let x = (n as f64 - centre + width / 2.0) / width;
            if x <= 0.0 {
                1.0
            } else if x >= 1.0 {
                0.0
            } else {
                0.5 * (1.0 + (std::f64::consts::PI * x).cos())
            }
        })
        .collect()
}

fn bin_frequency(k: usize, n: usize) -> f64 {
    k.min(n - k) as f64 * FS / n as f64
}

fn band_masked(spec: &[Complex64], band: usize, inv: &dyn Fft<f64>) -> Vec<f64> {
    let n = spec.len();
    let mut buf: Vec<Complex64> = spec
        .iter()
        .enumerate()
        .map(|(k, x)| x * band_weights(bin_frequency(k, n))[band])
        .collect();
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Octave-band component of `x` using the same log-frequency hat weights as
/// the model, so the bands of a signal sum back to it.
pub fn band_filter(x: &[f64], band: usize) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut spec: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    planner.plan_fft_forward(x.len()).process(&mut spec);
    band_masked(&spec, band, planner.plan_fft_inverse(x.len()).as_ref())
}

/// RT60 from the Schroeder decay curve, fitted between −5 and −25 dB.
pub fn schroeder_rt60(x: &[f64], sample_rate: u32) -> Option<f64> {
    let mut edc = vec![0.0; x.len()];
    let mut acc = 0.0;
    for i in (0..x.len()).rev() {
        acc += x[i] * x[i];
        edc[i] = acc;
    }
    let total = *edc.first()?;
    if total <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / total).log10()).collect();
    let start = db.iter().position(|d| *d <= -5.0)?;
    let end = db.iter().position(|d| *d <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    let n = (end - start) as f64;
    let ts: Vec<f64> = (start..end).map(|i| i as f64 / sample_rate as f64).collect();
    let (mt, md) = (ts.iter().sum::<f64>() / n, db[start..end].iter().sum::<f64>() / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, d) in ts.iter().zip(&db[start..end]) {
        sxy += (t - mt) * (d - md);
        sxx += (t - mt) * (t - mt);
    }
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Real-cepstrum minimum-phase synthesis. The log-magnitude of a path with
/// `m` bounces is `m Σ_b ln R_b φ_b(f)`, so the folded cepstrum of each band
/// template is precomputed once and the filter is `exp` of a weighted sum.
struct MinPhase {
    inv: Arc<dyn Fft<f64>>,
    band_log: Vec<Vec<Complex64>>,
}

impl MinPhase {
    fn new() -> Self {
        let n = MINPHASE_FFT;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let band_log = (0..NUM_BANDS)
            .map(|b| {
                let mut c: Vec<Complex64> =
                    (0..n).map(|k| Complex64::new(band_weights(bin_frequency(k, n))[b], 0.0)).collect();
                inv.process(&mut c);
                let mut folded = vec![Complex64::new(0.0, 0.0); n];
                folded[0] = Complex64::new(c[0].re / n as f64, 0.0);
                for k in 1..n / 2 {
                    folded[k] = Complex64::new(2.0 * c[k].re / n as f64, 0.0);
                }
                folded[n / 2] = Complex64::new(c[n / 2].re / n as f64, 0.0);
                fwd.process(&mut folded);
                folded
            })
            .collect();
        MinPhase { inv, band_log }
    }

    fn spectrum(&self, ln_r: &[f64; NUM_BANDS], bounces: u32) -> Vec<Complex64> {
        let m = bounces as f64;
        (0..MINPHASE_FFT)
            .map(|k| {
                let mut s = Complex64::new(0.0, 0.0);
                for b in 0..NUM_BANDS {
                    s += self.band_log[b][k] * ln_r[b];
                }
                (s * m).exp()
            })
            .collect()
    }

    fn taps(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut spec);
        spec[..MINPHASE_TAPS].iter().map(|c| c.re / MINPHASE_FFT as f64).collect()
    }

    fn filter(&self, ln_r: &[f64; NUM_BANDS], bounces: u32) -> Vec<f64> {
        if bounces == 0 {
            let mut d = vec![0.0; MINPHASE_TAPS];
            d[0] = 1.0;
            return d;
        }
        self.taps(self.spectrum(ln_r, bounces))
    }

    /// `∂h/∂ln R_b` for each band.
    fn filter_tangents(&self, ln_r: &[f64; NUM_BANDS], bounces: u32) -> Vec<Vec<f64>> {
        if bounces == 0 {
            return vec![vec![0.0; MINPHASE_TAPS]; NUM_BANDS];
        }
        let h = self.spectrum(ln_r, bounces);
        let m = bounces as f64;
        (0..NUM_BANDS)
            .map(|b| self.taps(h.iter().zip(&self.band_log[b]).map(|(x, p)| x * p * m).collect()))
            .collect()
    }
}

fn ln_reflection(p: &RirParams) -> [f64; NUM_BANDS] {
    p.reflection.map(|r| r.max(R_FLOOR).ln())
}

/// Minimum-phase response of `R[f]^bounces`, [`MINPHASE_TAPS`] long.
pub fn minphase_filter(reflection: &[f64; NUM_BANDS], bounces: u32) -> Vec<f64> {
    MinPhase::new().filter(&reflection.map(|r| r.max(R_FLOOR).ln()), bounces)
}

fn path_gain(p: &RirParams, delay: f64) -> f64 {
    p.eq * (-p.alpha * delay).exp() / (SPEED_OF_SOUND * delay)
}

fn band_noise(len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec: Vec<Complex64> = (0..len).map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut spec);
    let inv = planner.plan_fft_inverse(len);
    (0..NUM_BANDS).map(|b| band_masked(&spec, b, inv.as_ref())).collect()
}

fn peak(x: &[f64], range: std::ops::Range<usize>) -> (usize, f64) {
    range
        .map(|i| (i, x[i].abs()))
        .fold((usize::MAX, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// Fixed geometry, length and noise seed of an RIR; renders and
/// differentiates for any parameter set.
pub struct RirModel {
    order: Order,
    len: usize,
    paths: Vec<(ReflectionPath, usize, Vec<f64>)>,
    t_e: f64,
    weights: Vec<f64>,
    peak_window: std::ops::Range<usize>,
    minphase: MinPhase,
    noise: Vec<Vec<f64>>,
}

struct Forward {
    early: Vec<Vec<f64>>,
    /// Per channel: (argmax index, early peak level).
    peaks: Vec<(usize, f64)>,
    raw_late: Vec<f64>,
    late_peak: (usize, f64),
    /// Normalized late tail with the sigmoid gain applied.
    late: Vec<f64>,
}

impl RirModel {
    pub fn new(paths: &[ReflectionPath], order: Order, len: usize, seed: u64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("at least one reflection path is required"));
        }
        let t_e = early_cutoff(paths);
        let cut = cutoff_sample(t_e);
        if cut >= len {
            return Err(Error::invalid(format!(
                "early cutoff {t_e:.4} s lies beyond the {len}-sample RIR"
            )));
        }
        let kept = paths
            .iter()
            .filter_map(|p| {
                let offset = (p.delay * FS).round() as usize;
                (offset < len).then(|| (*p, offset, eval_sh(&p.direction, order).into_coeffs()))
            })
            .collect();
        Ok(RirModel {
            order,
            len,
            paths: kept,
            t_e,
            weights: crossfade_weights(len, t_e),
            peak_window: cut.saturating_sub((PEAK_WINDOW * FS).round() as usize)..cut,
            minphase: MinPhase::new(),
            noise: band_noise(len, seed),
        })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn early_cutoff(&self) -> f64 {
        self.t_e
    }

    fn filters(&self, p: &RirParams) -> BTreeMap<u32, Vec<f64>> {
        let ln_r = ln_reflection(p);
        let mut out = BTreeMap::new();
        for (path, _, _) in &self.paths {
            out.entry(path.bounces).or_insert_with(|| self.minphase.filter(&ln_r, path.bounces));
        }
        out
    }

    pub fn render_early(&self, p: &RirParams) -> Vec<Vec<f64>> {
        let filters = self.filters(p);
        let mut out = vec![vec![0.0; self.len]; self.order.channels()];
        for (path, offset, y) in &self.paths {
            let a = path_gain(p, path.delay);
            let h = &filters[&path.bounces];
            let n = h.len().min(self.len - offset);
            for (c, ch) in out.iter_mut().enumerate() {
                let g = a * y[c];
                for (o, hk) in ch[*offset..offset + n].iter_mut().zip(&h[..n]) {
                    *o += g * hk;
                }
            }
        }
        out
    }

    fn raw_late(&self, p: &RirParams) -> Vec<f64> {
        let t60: Vec<f64> = (0..NUM_BANDS).map(|b| p.rt60(b)).collect();
        (0..self.len)
            .map(|n| {
                let t = n as f64 / FS;
                (0..NUM_BANDS).map(|b| late_envelope(t, t60[b]) * self.noise[b][n]).sum()
            })
            .collect()
    }

    /// Peak-normalized late tail scaled by `sigmoid(late_gain)`.
    pub fn render_late(&self, p: &RirParams) -> Vec<f64> {
        self.forward(p).late
    }

    fn forward(&self, p: &RirParams) -> Forward {
        let early = self.render_early(p);
        let peaks = early.iter().map(|e| peak(e, self.peak_window.clone())).collect();
        let raw_late = self.raw_late(p);
        let late_peak = peak(&raw_late, 0..self.len);
        let scale = if late_peak.1 > 0.0 { sigmoid(p.late_gain) / late_peak.1 } else { 0.0 };
        let late = raw_late.iter().map(|r| r * scale).collect();
        Forward { early, peaks, raw_late, late_peak, late }
    }

    pub fn render(&self, p: &RirParams) -> AmbisonicBuffer {
        let f = self.forward(p);
        let channels = blend_channels(&f.early, &f.late, &self.weights, self.peak_window.clone());
        AmbisonicBuffer::from_channels(self.order, SAMPLE_RATE, channels).expect("model channel layout")
    }

    /// Gradient in raw coordinates of a loss whose derivative with respect
    /// to the rendered RIR is `grad`. Inactive entries are left at zero.
    pub fn gradient(&self, p: &RirParams, grad: &[Vec<f64>], active: &[bool; NUM_PARAMS]) -> [f64; NUM_PARAMS] {
        let f = self.forward(p);
        let mut g = [0.0; NUM_PARAMS];
        let w = &self.weights;

        // Early channels: direct weight plus the route through the peak level.
        let sig = sigmoid(p.late_gain);
        let late_unit: Vec<f64> = if f.late_peak.1 > 0.0 {
            f.raw_late.iter().map(|r| r / f.late_peak.1).collect()
        } else {
            vec![0.0; self.len]
        };
        let mut d_early: Vec<Vec<f64>> = Vec::with_capacity(grad.len());
        let mut d_late = vec![0.0; self.len];
        for (c, gc) in grad.iter().enumerate() {
            let (idx, level) = f.peaks[c];
            let mut de: Vec<f64> = gc.iter().zip(w).map(|(x, wt)| x * wt).collect();
            let mut d_level = 0.0;
            for t in 0..self.len {
                let lw = gc[t] * (1.0 - w[t]);
                d_level += lw * f.late[t];
                d_late[t] += lw * level;
            }
            if idx != usize::MAX {
                de[idx] += d_level * f.early[c][idx].signum();
            }
            d_early.push(de);
        }

        let needs_early = active[param::ALPHA] || active[param::EQ] || active[param::REFLECTION..param::EQ].iter().any(|a| *a);
        if needs_early {
            let ln_r = ln_reflection(p);
            let filters = self.filters(p);
            let want_r = active[param::REFLECTION..param::EQ].iter().any(|a| *a);
            let mut tangents: BTreeMap<u32, Vec<Vec<f64>>> = BTreeMap::new();
            for (path, offset, y) in &self.paths {
                let h = &filters[&path.bounces];
                let n = h.len().min(self.len - offset);
                let q: Vec<f64> = (0..n)
                    .map(|k| y.iter().zip(&d_early).map(|(yc, dc)| yc * dc[offset + k]).sum())
                    .collect();
                let a = path_gain(p, path.delay);
                let u: f64 = q.iter().zip(h).map(|(x, y)| x * y).sum();
                g[param::ALPHA] += u * -path.delay * a;
                g[param::EQ] += u * a / p.eq;
                if want_r && path.bounces > 0 {
                    let t = tangents
                        .entry(path.bounces)
                        .or_insert_with(|| self.minphase.filter_tangents(&ln_r, path.bounces));
                    for b in 0..NUM_BANDS {
                        g[param::REFLECTION + b] += a * q.iter().zip(&t[b]).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
        }

        // Late tail: `late = σ(g) r / max|r|`.
        let d_unit: f64 = d_late.iter().zip(&late_unit).map(|(a, b)| a * b).sum();
        g[param::LATE_GAIN] = sig * (1.0 - sig) * d_unit;
        if (active[param::RT60_BASE] || active[param::RT60_SLOPE]) && f.late_peak.1 > 0.0 {
            let m = f.late_peak.1;
            let mut d_raw: Vec<f64> = d_late.iter().map(|x| sig * x / m).collect();
            d_raw[f.late_peak.0] -= f.raw_late[f.late_peak.0].signum() * sig * d_unit / m;
            let ln1000 = 1000f64.ln();
            for b in 0..NUM_BANDS {
                let t60 = p.rt60(b);
                let d_t60: f64 = (0..self.len)
                    .map(|n| {
                        let t = n as f64 / FS;
                        d_raw[n] * self.noise[b][n] * late_envelope(t, t60) * ln1000 * t / (t60 * t60)
                    })
                    .sum();
                g[param::RT60_BASE] += d_t60 * t60 / p.rt60_base;
                g[param::RT60_SLOPE] += d_t60 * (b as f64 - REFERENCE_BAND as f64) * t60 / p.rt60_slope;
            }
        }

        let jac = RirParams::raw_jacobian(&p.to_raw());
        for i in 0..NUM_PARAMS {
            g[i] = if active[i] { g[i] * jac[i] } else { 0.0 };
        }
        g
    }
}

fn blend_channels(early: &[Vec<f64>], late: &[f64], w: &[f64], window: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    early
        .iter()
        .map(|e| {
            let level = peak(e, window.clone()).1;
            e.iter()
                .zip(late)
                .zip(w)
                .map(|((x, l), wt)| wt * x + (1.0 - wt) * level * l)
                .collect()
        })
        .collect()
}

pub fn render_early_rir(paths: &[ReflectionPath], params: &RirParams, order: Order, len: usize) -> Result<AmbisonicBuffer> {
    params.validate()?;
    if paths.is_empty() {
        return Err(Error::invalid("at least one reflection path is required"));
    }
    let filters = MinPhase::new();
    let ln_r = ln_reflection(params);
    let mut out = vec![vec![0.0; len]; order.channels()];
    for path in paths {
        let offset = (path.delay * FS).round() as usize;
        if offset >= len {
            log::warn!("dropping path with delay {:.4} s beyond the {len}-sample buffer", path.delay);
            continue;
        }
        let h = filters.filter(&ln_r, path.bounces);
        let y = eval_sh(&path.direction, order);
        let a = path_gain(params, path.delay);
        let n = h.len().min(len - offset);
        for (c, ch) in out.iter_mut().enumerate() {
            for k in 0..n {
                ch[offset + k] += a * y[c] * h[k];
            }
        }
    }
    AmbisonicBuffer::from_channels(order, SAMPLE_RATE, out)
}

/// Seeded band noise under per-band RT60 envelopes, peak-normalized and
/// scaled by `sigmoid(late_gain)`.
pub fn render_late_rir(params: &RirParams, len: usize, seed: u64) -> Result<MonoBuffer> {
    params.validate()?;
    if len == 0 {
        return Ok(MonoBuffer::new(Vec::new(), SAMPLE_RATE));
    }
    let noise = band_noise(len, seed);
    let raw: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / FS;
            (0..NUM_BANDS).map(|b| late_envelope(t, params.rt60(b)) * noise[b][n]).sum()
        })
        .collect();
    let m = peak(&raw, 0..len).1;
    let scale = if m > 0.0 { sigmoid(params.late_gain) / m } else { 0.0 };
    Ok(MonoBuffer::new(raw.iter().map(|r| r * scale).collect(), SAMPLE_RATE))
}

/// Cosine crossfade at `t_e`; the late tail is broadcast to every channel at
/// that channel's early peak level over the [`PEAK_WINDOW`] before `t_e`.
pub fn blend_rir(early: &AmbisonicBuffer, late: &MonoBuffer, t_e: f64) -> Result<AmbisonicBuffer> {
    if early.len() != late.len() {
        return Err(Error::invalid("early and late parts differ in length"));
    }
    let cut = cutoff_sample(t_e);
    if !(t_e >= 0.0) || cut >= early.len() {
        return Err(Error::invalid(format!("early cutoff {t_e} s lies beyond the buffer")));
    }
    let w = crossfade_weights(early.len(), t_e);
    let window = cut.saturating_sub((PEAK_WINDOW * FS).round() as usize)..cut;
    let channels: Vec<Vec<f64>> = early.channels().iter().map(|c| c.to_vec()).collect();
    AmbisonicBuffer::from_channels(early.order(), early.sample_rate(), blend_channels(&channels, &late.samples, &w, window))
}

pub fn render_rir(paths: &[ReflectionPath], params: &RirParams, order: Order, len: usize, seed: u64) -> Result<AmbisonicBuffer> {
    params.validate()?;
    Ok(RirModel::new(paths, order, len, seed)?.render(params))
}

/// Per-channel full linear convolution of the RIR with a dry source.
pub fn render_foa(rir: &AmbisonicBuffer, src: &MonoBuffer) -> Result<AmbisonicBuffer> {
    if rir.sample_rate() != src.sample_rate {
        return Err(Error::invalid(format!(
            "sample rates differ: RIR {} Hz, source {} Hz",
            rir.sample_rate(),
            src.sample_rate
        )));
    }
    let channels = rir.channels().iter().map(|c| convolve(c, &src.samples)).collect();
    AmbisonicBuffer::from_channels(rir.order(), rir.sample_rate(), channels)
}
