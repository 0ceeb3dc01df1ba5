//! Real-time block renderer and offline trajectory renders.
//!
//! A [`Session`] is driven by one audio thread calling [`Session::next_block`]
//! while a control thread publishes poses through a [`PoseWriter`]. The pose
//! exchange is a triple buffer, so neither side blocks the other. Everything
//! `next_block` touches is allocated in [`start_session`].

use crate::binaural::{AmbiHrir, StreamingDecoder};
use crate::buffer::{AmbisonicBuffer, MonoBuffer, SAMPLE_RATE};
use crate::encoder::{source_sample, spatial_gains, AttenuationModel};
use crate::error::{Error, Result};
use crate::scene::{db_to_gain, ListenerPose, Scene, SourceType};
use crate::sh::{Order, Vec3};
use crate::triple::{triple_buffer, Reader, Writer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub order: Order,
    pub block_size: usize,
    pub sample_rate: u32,
    pub loop_sources: bool,
    pub crossfade_ms: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            order: Order::FIRST,
            block_size: 256,
            sample_rate: SAMPLE_RATE,
            loop_sources: true,
            crossfade_ms: 10.0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let b = self.block_size;
        if !b.is_power_of_two() || !(64..=4096).contains(&b) {
            return Err(Error::invalid(format!(
                "block size must be a power of two in [64, 4096], got {b}"
            )));
        }
        if !(self.crossfade_ms >= 0.0 && self.crossfade_ms.is_finite()) {
            return Err(Error::invalid(format!(
                "crossfade_ms must be >= 0, got {}",
                self.crossfade_ms
            )));
        }
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::invalid(format!(
                "sample rate must be {SAMPLE_RATE}, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }

    fn crossfade_samples(&self) -> usize {
        (self.crossfade_ms * self.sample_rate as f64 / 1000.0).round() as usize
    }
}

/// Control-side handle for publishing poses to a running session.
pub struct PoseWriter(Writer<ListenerPose>);

impl PoseWriter {
    /// Replaces the pose the next block will use. Never blocks.
    pub fn update_pose(&mut self, pose: ListenerPose) -> Result<()> {
        if self.0.is_closed() {
            return Err(Error::SessionClosed);
        }
        self.0.publish(pose);
        Ok(())
    }
}

struct SourceState {
    kind: SourceType,
    anchors: Vec<Vec3>,
    samples: Vec<f64>,
}

pub struct Session {
    cfg: RenderConfig,
    channels: usize,
    model: AttenuationModel,
    sources: Vec<SourceState>,
    reader: Reader<ListenerPose>,
    writer: Option<PoseWriter>,
    target_pose: ListenerPose,
    /// Ramp start and end gains, `channels` per source.
    from: Vec<f64>,
    to: Vec<f64>,
    ramp_len: usize,
    ramp_pos: usize,
    playhead: usize,
    ambi: Vec<Vec<f64>>,
    decoder: StreamingDecoder,
    left: Vec<f64>,
    right: Vec<f64>,
    closed: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("cfg", &self.cfg)
            .field("sources", &self.sources.len())
            .field("playhead", &self.playhead)
            .finish()
    }
}

pub fn start_session(scene: &Scene, cfg: RenderConfig, hrir: &AmbiHrir) -> Result<Session> {
    cfg.validate()?;
    scene.validate()?;
    let decoder = StreamingDecoder::new(hrir, cfg.order, cfg.block_size)?;
    let channels = cfg.order.channels();
    let sources: Vec<SourceState> = scene
        .sources
        .iter()
        .map(|s| {
            let eq = db_to_gain(s.peak_db);
            SourceState {
                kind: s.source_type,
                anchors: s.anchors.clone(),
                samples: s.audio.samples.iter().map(|v| eq * v).collect(),
            }
        })
        .collect();
    let (writer, reader) = triple_buffer(ListenerPose::default());
    let mut session = Session {
        cfg,
        channels,
        model: AttenuationModel::for_scene(scene),
        from: vec![0.0; sources.len() * channels],
        to: vec![0.0; sources.len() * channels],
        sources,
        reader,
        writer: Some(PoseWriter(writer)),
        target_pose: ListenerPose::default(),
        ramp_len: cfg.crossfade_samples(),
        ramp_pos: 0,
        playhead: 0,
        ambi: vec![vec![0.0; cfg.block_size]; channels],
        decoder,
        left: vec![0.0; cfg.block_size],
        right: vec![0.0; cfg.block_size],
        closed: false,
    };
    session.compute_targets();
    session.from.copy_from_slice(&session.to);
    session.ramp_pos = session.ramp_len;
    Ok(session)
}

impl Session {
    pub fn config(&self) -> &RenderConfig {
        &self.cfg
    }

    /// Sample index of the next block's first sample.
    pub fn playhead(&self) -> usize {
        self.playhead
    }

    /// Hands the pose writer to a control thread. Available once.
    pub fn take_pose_writer(&mut self) -> Option<PoseWriter> {
        self.writer.take()
    }

    /// Convenience for single-threaded use; fails once the writer was taken.
    pub fn update_pose(&mut self, pose: ListenerPose) -> Result<()> {
        if self.closed {
            return Err(Error::SessionClosed);
        }
        match &mut self.writer {
            Some(w) => w.update_pose(pose),
            None => Err(Error::invalid("pose writer was handed to another thread")),
        }
    }

    pub fn close(&mut self) {
        self.closed = true;
        self.reader.close();
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// The ambisonic mix of the most recent block, one slice per channel.
    pub fn last_ambisonic_block(&self) -> &[Vec<f64>] {
        &self.ambi
    }

    fn compute_targets(&mut self) {
        let c = self.channels;
        for (i, s) in self.sources.iter().enumerate() {
            spatial_gains(
                s.kind,
                &s.anchors,
                &self.target_pose,
                &self.model,
                self.cfg.order,
                &mut self.to[i * c..(i + 1) * c],
            );
        }
    }

    /// Picks up a new pose, restarting the crossfade from the gains in
    /// effect right now. A repeated pose leaves the ramp alone.
    fn apply_pose_update(&mut self) {
        if !self.reader.has_update() {
            return;
        }
        let pose = self.reader.read();
        if pose == self.target_pose {
            return;
        }
        let frac = self.ramp_fraction(0);
        for (f, t) in self.from.iter_mut().zip(&self.to) {
            *f += (t - *f) * frac;
        }
        self.target_pose = pose;
        self.compute_targets();
        self.ramp_pos = 0;
    }

    #[inline]
    fn ramp_fraction(&self, offset: usize) -> f64 {
        if self.ramp_pos + offset >= self.ramp_len {
            1.0
        } else {
            (self.ramp_pos + offset) as f64 / self.ramp_len as f64
        }
    }

    /// Renders one stereo block at the latest pose. Does not allocate.
    pub fn next_block(&mut self) -> (&[f64], &[f64]) {
        let b = self.cfg.block_size;
        let c = self.channels;
        if self.closed {
            self.left.iter_mut().for_each(|v| *v = 0.0);
            self.right.iter_mut().for_each(|v| *v = 0.0);
            return (&self.left, &self.right);
        }
        self.apply_pose_update();
        for ch in &mut self.ambi {
            ch.iter_mut().for_each(|v| *v = 0.0);
        }
        let ramping = self.ramp_pos < self.ramp_len;
        let looped = self.cfg.loop_sources;
        for (i, s) in self.sources.iter().enumerate() {
            let to = &self.to[i * c..(i + 1) * c];
            if !looped && self.playhead >= s.samples.len() {
                continue;
            }
            if ramping {
                let from = &self.from[i * c..(i + 1) * c];
                for n in 0..b {
                    let x = source_sample(&s.samples, self.playhead + n, looped);
                    let frac = self.ramp_fraction(n + 1);
                    for k in 0..c {
                        let g = from[k] + (to[k] - from[k]) * frac;
                        self.ambi[k][n] += x * g;
                    }
                }
            } else {
                for (k, &g) in to.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let ch = &mut self.ambi[k];
                    for (n, o) in ch.iter_mut().enumerate() {
                        *o += source_sample(&s.samples, self.playhead + n, looped) * g;
                    }
                }
            }
        }
        if ramping {
            self.ramp_pos = (self.ramp_pos + b).min(self.ramp_len);
            if self.ramp_pos == self.ramp_len {
                self.from.copy_from_slice(&self.to);
            }
        }
        self.decoder.process(&self.ambi, &mut self.left, &mut self.right);
        self.playhead += b;
        (&self.left, &self.right)
    }
}

/// Keyframed listener path: linear position, spherical-linear rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    keyframes: Vec<(f64, ListenerPose)>,
}

impl Trajectory {
    pub fn new(keyframes: Vec<(f64, ListenerPose)>) -> Result<Self> {
        if keyframes.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if keyframes.iter().any(|(t, _)| !t.is_finite()) {
            return Err(Error::invalid("keyframe times must be finite"));
        }
        if keyframes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("keyframe times must be strictly increasing"));
        }
        Ok(Trajectory { keyframes })
    }

    pub fn keyframes(&self) -> &[(f64, ListenerPose)] {
        &self.keyframes
    }

    pub fn start(&self) -> f64 {
        self.keyframes[0].0
    }

    pub fn duration(&self) -> f64 {
        self.keyframes[self.keyframes.len() - 1].0 - self.start()
    }

    /// Pose at absolute time `t`, held constant outside the keyframe span.
    pub fn pose_at(&self, t: f64) -> ListenerPose {
        let k = &self.keyframes;
        if t <= k[0].0 {
            return k[0].1;
        }
        if t >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|(kt, _)| *kt <= t) - 1;
        let (t0, p0) = k[i];
        let (t1, p1) = k[i + 1];
        let u = (t - t0) / (t1 - t0);
        ListenerPose::new(
            p0.position + (p1.position - p0.position) * u,
            p0.rotation.slerp(&p1.rotation, u),
        )
    }

    /// The same path traversed backwards over the same time span.
    pub fn reversed(&self) -> Trajectory {
        let (t0, t1) = (self.start(), self.start() + self.duration());
        let keyframes = self
            .keyframes
            .iter()
            .rev()
            .map(|(t, p)| (t0 + t1 - t, *p))
            .collect();
        Trajectory { keyframes }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRender {
    pub left: MonoBuffer,
    pub right: MonoBuffer,
    pub ambisonic: Option<AmbisonicBuffer>,
    /// Pose used for each block, with the block's first sample index.
    pub block_poses: Vec<(usize, ListenerPose)>,
}

/// Offline render along `traj`, sampling the pose at each block start.
///
/// `duration` (seconds) defaults to the keyframe span; a single-keyframe
/// trajectory needs it explicitly.
pub fn render_trajectory(
    scene: &Scene,
    traj: &Trajectory,
    cfg: RenderConfig,
    hrir: &AmbiHrir,
    duration: Option<f64>,
    keep_ambisonic: bool,
) -> Result<TrajectoryRender> {
    let secs = duration.unwrap_or_else(|| traj.duration());
    if !(secs > 0.0 && secs.is_finite()) {
        return Err(Error::invalid(format!(
            "render duration must be positive, got {secs} s"
        )));
    }
    let total = (secs * cfg.sample_rate as f64).round() as usize;
    let mut session = start_session(scene, cfg, hrir)?;
    let b = cfg.block_size;
    let blocks = total.div_ceil(b);
    let channels = cfg.order.channels();
    let mut left = Vec::with_capacity(blocks * b);
    let mut right = Vec::with_capacity(blocks * b);
    let mut ambi = keep_ambisonic.then(|| vec![Vec::with_capacity(blocks * b); channels]);
    let mut block_poses = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let start = j * b;
        let pose = traj.pose_at(traj.start() + start as f64 / cfg.sample_rate as f64);
        session.update_pose(pose)?;
        block_poses.push((start, pose));
        let (l, r) = session.next_block();
        left.extend_from_slice(l);
        right.extend_from_slice(r);
        if let Some(a) = &mut ambi {
            for (dst, src) in a.iter_mut().zip(session.last_ambisonic_block()) {
                dst.extend_from_slice(src);
            }
        }
    }
    left.truncate(total);
    right.truncate(total);
    let ambisonic = match ambi {
        Some(mut a) => {
            a.iter_mut().for_each(|ch| ch.truncate(total));
            Some(AmbisonicBuffer::from_channels(cfg.order, cfg.sample_rate, a)?)
        }
        None => None,
    };
    Ok(TrajectoryRender {
        left: MonoBuffer::new(left, cfg.sample_rate),
        right: MonoBuffer::new(right, cfg.sample_rate),
        ambisonic,
        block_poses,
    })
}
