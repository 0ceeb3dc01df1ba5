//! Differentiable room impulse response: geometric early paths with
//! minimum-phase reflection filters, an RT60-driven late tail, cosine
//! blending, and a one-shot Adam fit of the parameters to a recording.

mod fit;
mod loss;
mod paths;
mod rir;

pub use fit::{fit_one_shot, Adam, FitOptions, FitProblem, FitResult};
pub use loss::{losses, LossReport, MagLoss, LOG_FLOOR, MAG_FFT, MAG_HOP};
pub use paths::{image_source_paths, BoxRoom, ReflectionPath, MAX_IMAGE_ORDER};
pub use rir::{
    band_filter, blend_rir, crossfade_weights, early_cutoff, late_envelope, minphase_filter, render_early_rir,
    render_foa, render_late_rir, render_rir, schroeder_rt60, RirModel, CROSSFADE, EARLY_MARGIN, MINPHASE_FFT,
    MINPHASE_TAPS, PEAK_WINDOW,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const NUM_BANDS: usize = 9;
/// Band whose RT60 equals `rt60_base` (1 kHz).
pub const REFERENCE_BAND: usize = 4;
pub const NUM_PARAMS: usize = 14;

/// Indices into the raw parameter vector.
pub mod param {
    pub const ALPHA: usize = 0;
    pub const REFLECTION: usize = 1;
    pub const EQ: usize = 10;
    pub const RT60_BASE: usize = 11;
    pub const RT60_SLOPE: usize = 12;
    pub const LATE_GAIN: usize = 13;
}

/// Scale applied to the softplus of the raw α.
const ALPHA_SCALE: f64 = 10.0;

pub fn band_centre(band: usize) -> f64 {
    62.5 * (1u32 << band) as f64
}

/// Hat weights on a log2-frequency axis; they sum to one at every `f`.
pub fn band_weights(f: f64) -> [f64; NUM_BANDS] {
    let mut w = [0.0; NUM_BANDS];
    let x = if f > 0.0 { (f / band_centre(0)).log2() } else { f64::NEG_INFINITY };
    if x <= 0.0 {
        w[0] = 1.0;
    } else if x >= (NUM_BANDS - 1) as f64 {
        w[NUM_BANDS - 1] = 1.0;
    } else {
        let i = x.floor() as usize;
        let frac = x - i as f64;
        w[i] = 1.0 - frac;
        w[i + 1] = frac;
    }
    w
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softplus_inv(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RirParams {
    /// Temporal absorption in `e^(−ατ)`, 1/s.
    pub alpha: f64,
    /// Per-band reflection gain in `[0, 1]`.
    pub reflection: [f64; NUM_BANDS],
    /// Early-path equalization gain.
    pub eq: f64,
    /// RT60 of the reference band, seconds.
    pub rt60_base: f64,
    /// Per-octave RT60 factor.
    pub rt60_slope: f64,
    /// Late level before the sigmoid.
    pub late_gain: f64,
}

impl Default for RirParams {
    fn default() -> Self {
        RirParams {
            alpha: 5.0,
            reflection: [0.7; NUM_BANDS],
            eq: 1.0,
            rt60_base: 0.5,
            rt60_slope: 1.0,
            late_gain: 0.0,
        }
    }
}

impl RirParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.eq, self.rt60_base, self.rt60_slope, self.late_gain];
        if all.iter().chain(&self.reflection).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("RIR parameters".into()));
        }
        if self.alpha < 0.0 || self.eq <= 0.0 || self.rt60_base <= 0.0 || self.rt60_slope <= 0.0 {
            return Err(Error::invalid("RIR parameters need alpha ≥ 0 and eq, rt60_base, rt60_slope > 0"));
        }
        if self.reflection.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid("reflection gains must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn rt60(&self, band: usize) -> f64 {
        self.rt60_base * self.rt60_slope.powi(band as i32 - REFERENCE_BAND as i32)
    }

    /// Unconstrained coordinates used by the optimizer. Boundary values
    /// (α = 0, R ∈ {0, 1}) are nudged inside the open domain.
    pub fn to_raw(&self) -> [f64; NUM_PARAMS] {
        let mut raw = [0.0; NUM_PARAMS];
        raw[param::ALPHA] = softplus_inv((self.alpha / ALPHA_SCALE).max(1e-9));
        for b in 0..NUM_BANDS {
            raw[param::REFLECTION + b] = logit(self.reflection[b].clamp(1e-9, 1.0 - 1e-9));
        }
        raw[param::EQ] = softplus_inv(self.eq);
        raw[param::RT60_BASE] = softplus_inv(self.rt60_base);
        raw[param::RT60_SLOPE] = self.rt60_slope.ln();
        raw[param::LATE_GAIN] = self.late_gain;
        raw
    }

    pub fn from_raw(raw: &[f64; NUM_PARAMS]) -> Self {
        let mut reflection = [0.0; NUM_BANDS];
        for (b, r) in reflection.iter_mut().enumerate() {
            *r = sigmoid(raw[param::REFLECTION + b]);
        }
        RirParams {
            alpha: ALPHA_SCALE * softplus(raw[param::ALPHA]),
            reflection,
            eq: softplus(raw[param::EQ]),
            rt60_base: softplus(raw[param::RT60_BASE]),
            rt60_slope: raw[param::RT60_SLOPE].exp(),
            late_gain: raw[param::LATE_GAIN],
        }
    }

    /// Derivative of each model coordinate with respect to its raw value.
    /// Reflection entries are for `ln R`, the coordinate the filters use.
    pub(crate) fn raw_jacobian(raw: &[f64; NUM_PARAMS]) -> [f64; NUM_PARAMS] {
        let mut j = [1.0; NUM_PARAMS];
        j[param::ALPHA] = ALPHA_SCALE * sigmoid(raw[param::ALPHA]);
        for b in 0..NUM_BANDS {
            j[param::REFLECTION + b] = 1.0 - sigmoid(raw[param::REFLECTION + b]);
        }
        j[param::EQ] = sigmoid(raw[param::EQ]);
        j[param::RT60_BASE] = sigmoid(raw[param::RT60_BASE]);
        j[param::RT60_SLOPE] = raw[param::RT60_SLOPE].exp();
        j
    }
}
