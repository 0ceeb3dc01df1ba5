//! Mono and ambisonic sample buffers.

use crate::error::{Error, Result};
use crate::sh::Order;

/// Canonical engine sample rate.
pub const SAMPLE_RATE: u32 = 48_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MonoBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl MonoBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        MonoBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        MonoBuffer::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// `(L+1)²` equal-length channels in ACN order.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbisonicBuffer {
    order: Order,
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl AmbisonicBuffer {
    pub fn zeros(order: Order, len: usize, sample_rate: u32) -> Self {
        AmbisonicBuffer {
            order,
            sample_rate,
            channels: vec![vec![0.0; len]; order.channels()],
        }
    }

    pub fn from_channels(order: Order, sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if channels.len() != order.channels() {
            return Err(Error::schema(format!(
                "order {order} needs {} channels, got {}",
                order.channels(),
                channels.len()
            )));
        }
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::schema("ambisonic channels differ in length"));
        }
        Ok(AmbisonicBuffer {
            order,
            sample_rate,
            channels,
        })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// The first `(L'+1)²` channels, i.e. the order-`L'` part of the field.
    pub fn truncated(&self, order: Order) -> Result<AmbisonicBuffer> {
        if order > self.order {
            return Err(Error::OrderMismatch {
                expected: order.get(),
                found: self.order.get(),
            });
        }
        Ok(AmbisonicBuffer {
            order,
            sample_rate: self.sample_rate,
            channels: self.channels[..order.channels()].to_vec(),
        })
    }

    /// Sample-wise sum; shapes must agree.
    pub fn add_assign(&mut self, other: &AmbisonicBuffer) -> Result<()> {
        if other.order != self.order {
            return Err(Error::OrderMismatch {
                expected: self.order.get(),
                found: other.order.get(),
            });
        }
        if other.len() != self.len() {
            return Err(Error::invalid("ambisonic buffers differ in length"));
        }
        for (dst, src) in self.channels.iter_mut().zip(&other.channels) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        Ok(())
    }

    pub fn scaled(&self, gain: f64) -> AmbisonicBuffer {
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.iter_mut().for_each(|v| *v *= gain);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &AmbisonicBuffer) -> f64 {
        self.channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}
