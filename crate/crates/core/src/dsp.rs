//! FFT convolution, STFT (with its adjoint) and the Hilbert envelope.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub use rustfft::num_complex::Complex64 as Complex;

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Full linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        return direct_convolve(a, b);
    }
    let n = next_pow2(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = to_complex(a, n);
    let mut fb = to_complex(b, n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

fn direct_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `out[k] = Σ_n a[n + k] · b[n]` for `k in 0..out_len`, the adjoint of
/// convolving with `b`.
pub fn correlate(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    if a.is_empty() || b.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let rev: Vec<f64> = b.iter().rev().copied().collect();
    let full = convolve(a, &rev);
    // full[k + b.len() - 1] = Σ_n a[k + n] b[n]
    (0..out_len)
        .map(|k| full.get(k + b.len() - 1).copied().unwrap_or(0.0))
        .collect()
}

pub(crate) fn to_complex(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (c, &r) in v.iter_mut().zip(x) {
        c.re = r;
    }
    v
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
        .collect()
}

/// Short-time Fourier transform over non-centred, zero-padded frames.
///
/// Frame `j` covers samples `j·hop .. j·hop + n_fft`; enough frames are taken
/// to cover the whole signal. Only the `n_fft/2 + 1` non-negative bins are kept.
pub struct Stft {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("n_fft", &self.n_fft)
            .field("hop", &self.hop)
            .finish()
    }
}

impl Stft {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        assert!(n_fft >= 2 && hop >= 1, "bad STFT geometry");
        let mut planner = FftPlanner::new();
        Stft {
            n_fft,
            hop,
            window: hann(n_fft),
            fwd: planner.plan_fft_forward(n_fft),
            inv: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn frames(&self, len: usize) -> usize {
        if len <= self.n_fft {
            1
        } else {
            1 + (len - self.n_fft).div_ceil(self.hop)
        }
    }

    /// Frames × bins, flattened frame-major.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let bins = self.bins();
        let frames = self.frames(x.len());
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        for j in 0..frames {
            let start = j * self.hop;
            for (n, c) in buf.iter_mut().enumerate() {
                let v = x.get(start + n).copied().unwrap_or(0.0);
                *c = Complex64::new(v * self.window[n], 0.0);
            }
            self.fwd.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        out
    }

    /// Pulls a gradient with respect to the (real, imaginary) parts of every
    /// kept bin back onto the time signal of length `len`.
    ///
    /// With `G = ∂L/∂Re + i·∂L/∂Im`, sample `n` of frame `j` receives
    /// `w[n]·Re(Σ_k G_k e^{+2πikn/N})`.
    pub fn adjoint(&self, grad: &[Complex64], len: usize) -> Vec<f64> {
        let bins = self.bins();
        let frames = self.frames(len);
        assert_eq!(grad.len(), frames * bins, "gradient shape mismatch");
        let mut out = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        for j in 0..frames {
            buf[..bins].copy_from_slice(&grad[j * bins..(j + 1) * bins]);
            buf[bins..].iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            self.inv.process(&mut buf);
            let start = j * self.hop;
            for n in 0..self.n_fft {
                if let Some(o) = out.get_mut(start + n) {
                    *o += self.window[n] * buf[n].re;
                }
            }
        }
        out
    }

    /// Least-squares inverse of [`Stft::forward`]: windowed overlap-add
    /// divided by the summed squared window. Samples no frame covers with
    /// non-negligible weight come back as zero.
    pub fn inverse(&self, spec: &[Complex64], len: usize) -> Vec<f64> {
        let bins = self.bins();
        let half = self.n_fft / 2;
        let g: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = i % bins;
                if k == 0 || (k == half && self.n_fft % 2 == 0) {
                    *c
                } else {
                    2.0 * c
                }
            })
            .collect();
        let mut out = self.adjoint(&g, len);
        let mut norm = vec![0.0; len];
        for j in 0..self.frames(len) {
            for (n, w) in self.window.iter().enumerate() {
                if let Some(v) = norm.get_mut(j * self.hop + n) {
                    *v += w * w;
                }
            }
        }
        for (o, w) in out.iter_mut().zip(&norm) {
            *o = if *w > 1e-8 { *o / (self.n_fft as f64 * w) } else { 0.0 };
        }
        out
    }
}

/// Magnitude of the analytic signal.
pub fn hilbert_envelope(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf = to_complex(x, n);
    planner.plan_fft_forward(n).process(&mut buf);
    // Keep DC (and Nyquist for even n), double positive, zero negative bins.
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        if k < half || (k == half && n % 2 == 1) {
            *c *= 2.0;
        } else if k > half {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}
