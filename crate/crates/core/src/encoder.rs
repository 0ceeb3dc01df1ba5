//! Scene-to-ambisonics encoding and the virtual-microphone probe.
//!
//! A source contributes `eq(a)(t) · g`, where `g` is a per-source gain vector
//! over the ACN channels:
//! * point: `σ(‖o − t‖) · y(Rᵀ(o − t))` at the anchor centroid `o`,
//! * cluster: the mean of that expression over every anchor,
//! * global: `[1, 0, …, 0]`.
//!
//! `σ(d) = e^{−αd}/d`, with `d` clamped below at `d_min`. There is no
//! propagation delay.

use std::ops::Range;

use crate::buffer::{AmbisonicBuffer, MonoBuffer};
use crate::error::{Error, Result};
use crate::scene::{centroid, db_to_gain, ListenerPose, Scene, SoundSource, SourceType};
use crate::sh::{eval_sh, eval_sh_into, Direction, Order, Vec3, MAX_ORDER};

/// Distance clamp used by [`AttenuationModel::default`].
pub const D_MIN: f64 = 0.1;

const MAX_CHANNELS: usize = (MAX_ORDER + 1) * (MAX_ORDER + 1);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttenuationModel {
    pub alpha: f64,
    pub d_min: f64,
}

impl Default for AttenuationModel {
    fn default() -> Self {
        AttenuationModel {
            alpha: crate::scene::DEFAULT_ALPHA,
            d_min: D_MIN,
        }
    }
}

impl AttenuationModel {
    pub fn new(alpha: f64, d_min: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(d_min > 0.0 && d_min.is_finite()) {
            return Err(Error::invalid(format!("d_min must be > 0, got {d_min}")));
        }
        Ok(AttenuationModel { alpha, d_min })
    }

    /// Model with the scene's air absorption and the default clamp.
    pub fn for_scene(scene: &Scene) -> Self {
        AttenuationModel {
            alpha: scene.alpha,
            d_min: D_MIN,
        }
    }

    pub fn gain(&self, d: f64) -> f64 {
        let d = d.max(self.d_min);
        (-self.alpha * d).exp() / d
    }
}

pub fn attenuation(model: &AttenuationModel, d: f64) -> f64 {
    model.gain(d)
}

/// Adds `weight · σ(‖offset‖) · y(Rᵀ offset)` into `acc`.
///
/// A listener exactly on the anchor has no direction; it is heard at the
/// clamped distance on the omni channel only.
fn accumulate_anchor(
    acc: &mut [f64],
    offset: &Vec3,
    pose: &ListenerPose,
    model: &AttenuationModel,
    order: Order,
    weight: f64,
) {
    let d = offset.norm();
    let g = weight * model.gain(d);
    match Direction::from_vector(pose.rotation.to_listener(offset)) {
        Ok(dir) if d > 1e-12 => {
            let mut y = [0.0; MAX_CHANNELS];
            eval_sh_into(&dir, order, &mut y);
            for (a, v) in acc.iter_mut().zip(&y[..order.channels()]) {
                *a += g * v;
            }
        }
        _ => acc[0] += g,
    }
}

/// Per-channel gain vector of one source for `pose`, written into
/// `out[..order.channels()]`. Excludes the peak-dB equalization.
pub fn spatial_gains(
    kind: SourceType,
    anchors: &[Vec3],
    pose: &ListenerPose,
    model: &AttenuationModel,
    order: Order,
    out: &mut [f64],
) {
    let out = &mut out[..order.channels()];
    out.iter_mut().for_each(|v| *v = 0.0);
    match kind {
        SourceType::Global => out[0] = 1.0,
        SourceType::Point => {
            if let Some(c) = centroid(anchors) {
                accumulate_anchor(out, &(c - pose.position), pose, model, order, 1.0);
            }
        }
        SourceType::Cluster => {
            if anchors.is_empty() {
                return;
            }
            let w = 1.0 / anchors.len() as f64;
            for p in anchors {
                accumulate_anchor(out, &(p - pose.position), pose, model, order, w);
            }
        }
    }
}

/// Sample `i` of a source under the loop policy.
#[inline]
pub fn source_sample(samples: &[f64], i: usize, looped: bool) -> f64 {
    if samples.is_empty() {
        0.0
    } else if looped {
        samples[i % samples.len()]
    } else {
        samples.get(i).copied().unwrap_or(0.0)
    }
}

fn encode_with_gains(
    src: &SoundSource,
    gains: &[f64],
    order: Order,
    window: Range<usize>,
    looped: bool,
) -> AmbisonicBuffer {
    let eq = db_to_gain(src.peak_db);
    let len = window.len();
    let mut out = AmbisonicBuffer::zeros(order, len, src.audio.sample_rate);
    for (c, &g) in gains.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let ch = out.channel_mut(c);
        for (k, o) in ch.iter_mut().enumerate() {
            *o = eq * source_sample(&src.audio.samples, window.start + k, looped) * g;
        }
    }
    out
}

fn expect_type(src: &SoundSource, kind: SourceType) -> Result<()> {
    if src.source_type != kind {
        return Err(Error::invalid(format!(
            "source {:?} is {:?}, expected {:?}",
            src.id, src.source_type, kind
        )));
    }
    Ok(())
}

/// Encodes a source of any type over `window`.
pub fn encode_source(
    src: &SoundSource,
    pose: &ListenerPose,
    order: Order,
    model: &AttenuationModel,
    window: Range<usize>,
    looped: bool,
) -> AmbisonicBuffer {
    let mut g = [0.0; MAX_CHANNELS];
    spatial_gains(src.source_type, &src.anchors, pose, model, order, &mut g);
    encode_with_gains(src, &g[..order.channels()], order, window, looped)
}

pub fn encode_point(
    src: &SoundSource,
    pose: &ListenerPose,
    order: Order,
    model: &AttenuationModel,
) -> Result<AmbisonicBuffer> {
    expect_type(src, SourceType::Point)?;
    if src.anchors.is_empty() {
        return Err(Error::schema(format!("point source {:?} has no anchors", src.id)));
    }
    Ok(encode_source(src, pose, order, model, 0..src.audio.len(), false))
}

pub fn encode_cluster(
    src: &SoundSource,
    pose: &ListenerPose,
    order: Order,
    model: &AttenuationModel,
) -> Result<AmbisonicBuffer> {
    expect_type(src, SourceType::Cluster)?;
    if src.anchors.is_empty() {
        return Err(Error::schema(format!("cluster source {:?} has no anchors", src.id)));
    }
    Ok(encode_source(src, pose, order, model, 0..src.audio.len(), false))
}

pub fn encode_global(src: &SoundSource, order: Order) -> Result<AmbisonicBuffer> {
    expect_type(src, SourceType::Global)?;
    Ok(encode_source(
        src,
        &ListenerPose::default(),
        order,
        &AttenuationModel::default(),
        0..src.audio.len(),
        false,
    ))
}

/// Sum of every source's encoding over `window` (sample indices into the
/// source timelines). Sources shorter than the window wrap when `looped`,
/// and are silent past their end otherwise.
pub fn encode_scene(
    scene: &Scene,
    pose: &ListenerPose,
    order: Order,
    window: Range<usize>,
    looped: bool,
) -> AmbisonicBuffer {
    let model = AttenuationModel::for_scene(scene);
    let mut out = AmbisonicBuffer::zeros(order, window.len(), crate::buffer::SAMPLE_RATE);
    for src in &scene.sources {
        let part = encode_source(src, pose, order, &model, window.clone(), looped);
        for c in 0..order.channels() {
            for (o, v) in out.channel_mut(c).iter_mut().zip(part.channel(c)) {
                *o += v;
            }
        }
    }
    out
}

/// `y(dir)ᵀ a(t)` for every sample.
pub fn virtual_mic(ambi: &AmbisonicBuffer, dir: &Direction) -> MonoBuffer {
    let y = eval_sh(dir, ambi.order());
    let mut out = vec![0.0; ambi.len()];
    for (c, ch) in ambi.channels().iter().enumerate() {
        let g = y[c];
        if g == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(ch) {
            *o += g * v;
        }
    }
    MonoBuffer::new(out, ambi.sample_rate())
}
