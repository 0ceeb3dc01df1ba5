//! Spectral, envelope and directional losses between ambisonic signals.

use serde::Serialize;

use crate::buffer::AmbisonicBuffer;
use crate::dsp::{hilbert_envelope, Complex, Stft};
use crate::error::{Error, Result};
use crate::metrics::{angular_errors, intensity_doa};

pub const MAG_FFT: usize = 1024;
pub const MAG_HOP: usize = 256;
pub const LOG_FLOOR: f64 = 1e-7;

/// Mean absolute log-magnitude STFT difference against a fixed target.
pub struct MagLoss {
    stft: Stft,
    len: usize,
    target: Vec<Vec<f64>>,
}

impl MagLoss {
    pub fn new<C: AsRef<[f64]>>(target: &[C]) -> Result<Self> {
        let len = target.first().map_or(0, |c| c.as_ref().len());
        if target.is_empty() || target.iter().any(|c| c.as_ref().len() != len) {
            return Err(Error::invalid("target channels must be non-empty and equally long"));
        }
        let stft = Stft::new(MAG_FFT, MAG_HOP);
        let target = target
            .iter()
            .map(|c| stft.forward(c.as_ref()).iter().map(|x| x.norm().max(LOG_FLOOR).ln()).collect())
            .collect();
        Ok(MagLoss { stft, len, target })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channels(&self) -> usize {
        self.target.len()
    }

    /// Floored log magnitudes of target channel `c`, frame-major.
    pub(crate) fn target_log(&self, c: usize) -> &[f64] {
        &self.target[c]
    }

    fn check<C: AsRef<[f64]>>(&self, pred: &[C]) -> Result<()> {
        if pred.len() != self.target.len() || pred.iter().any(|c| c.as_ref().len() != self.len) {
            return Err(Error::invalid(format!(
                "prediction must have {} channels of {} samples",
                self.target.len(),
                self.len
            )));
        }
        Ok(())
    }

    pub fn value<C: AsRef<[f64]>>(&self, pred: &[C]) -> Result<f64> {
        self.check(pred)?;
        let mut total = 0.0;
        let mut count = 0usize;
        for (p, t) in pred.iter().zip(&self.target) {
            for (x, lt) in self.stft.forward(p.as_ref()).iter().zip(t) {
                total += (x.norm().max(LOG_FLOOR).ln() - lt).abs();
                count += 1;
            }
        }
        Ok(total / count as f64)
    }

    /// Loss and its derivative with respect to every prediction sample.
    /// Bins at the floor or exactly on target contribute no gradient.
    pub fn value_and_grad<C: AsRef<[f64]>>(&self, pred: &[C]) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check(pred)?;
        let count = (self.target.len() * self.target[0].len()) as f64;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(pred.len());
        for (p, t) in pred.iter().zip(&self.target) {
            let spec = self.stft.forward(p.as_ref());
            let g: Vec<Complex> = spec
                .iter()
                .zip(t)
                .map(|(x, lt)| {
                    let mag = x.norm();
                    let diff = mag.max(LOG_FLOOR).ln() - lt;
                    total += diff.abs();
                    if mag <= LOG_FLOOR || diff == 0.0 {
                        Complex::new(0.0, 0.0)
                    } else {
                        x * (diff.signum() / (count * mag * mag))
                    }
                })
                .collect();
            grads.push(self.stft.adjoint(&g, self.len));
        }
        Ok((total / count, grads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub l_mag: f64,
    pub l_env: f64,
    /// Geodesic DoA error; `None` when either signal has no directional energy.
    pub angular: Option<f64>,
}

pub fn losses(pred: &AmbisonicBuffer, target: &AmbisonicBuffer) -> Result<LossReport> {
    if pred.order() != target.order() || pred.len() != target.len() {
        return Err(Error::invalid("prediction and target shapes differ"));
    }
    let l_mag = MagLoss::new(target.channels())?.value(pred.channels())?;
    let mut env = 0.0;
    for (p, t) in pred.channels().iter().zip(target.channels()) {
        let (ep, et) = (hilbert_envelope(p), hilbert_envelope(t));
        env += ep.iter().zip(&et).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let l_env = env / (pred.num_channels() * pred.len()) as f64;
    let angular = match (intensity_doa(pred), intensity_doa(target)) {
        (Ok(p), Ok(t)) => Some(angular_errors(&t, &p).angular),
        (Err(Error::NoEnergy), _) | (_, Err(Error::NoEnergy)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(LossReport { l_mag, l_env, angular })
}
