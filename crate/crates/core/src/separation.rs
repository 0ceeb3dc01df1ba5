//! Spatially grounded source separation by inverse rendering: per-source
//! mono waveforms whose encoded sum matches an observed ambisonic mixture.

use nalgebra::DMatrix;

use crate::acoustics::{MagLoss, LOG_FLOOR, MAG_FFT, MAG_HOP};
use crate::buffer::{AmbisonicBuffer, MonoBuffer};
use crate::dsp::{Complex, Stft};
use crate::encoder::{spatial_gains, virtual_mic, AttenuationModel};
use crate::error::{Error, Result};
use crate::scene::{centroid, ListenerPose, SourceType};
use crate::sh::{Direction, Vec3};

/// Weight of the waveform L2 term added to `L_mag`.
pub const WAVEFORM_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSource {
    pub source_type: SourceType,
    pub anchors: Vec<Vec3>,
}

impl SeparationSource {
    pub fn point(position: Vec3) -> Self {
        SeparationSource { source_type: SourceType::Point, anchors: vec![position] }
    }
}

pub struct SeparationProblem {
    mixture: AmbisonicBuffer,
    sources: Vec<SeparationSource>,
    pose: ListenerPose,
    directions: Vec<Direction>,
    /// Encoder gain vector of each source.
    gains: Vec<Vec<f64>>,
    /// Pseudo-inverse of the channels × sources gain matrix, row per source.
    pinv: Vec<Vec<f64>>,
    loss: MagLoss,
    stft: Stft,
    pub waveform_weight: f64,
}

impl std::fmt::Debug for SeparationProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparationProblem")
            .field("order", &self.mixture.order())
            .field("len", &self.mixture.len())
            .field("sources", &self.sources.len())
            .finish()
    }
}

impl SeparationProblem {
    pub fn new(
        mixture: AmbisonicBuffer,
        sources: Vec<SeparationSource>,
        pose: ListenerPose,
        model: &AttenuationModel,
    ) -> Result<Self> {
        if sources.len() < 2 {
            return Err(Error::invalid(format!("separation needs at least 2 sources, got {}", sources.len())));
        }
        let order = mixture.order();
        if order.get() < 1 {
            return Err(Error::invalid("separation needs a mixture of order 1 or higher"));
        }
        if mixture.is_empty() {
            return Err(Error::invalid("mixture is empty"));
        }
        let mut directions = Vec::with_capacity(sources.len());
        let mut gains = Vec::with_capacity(sources.len());
        for (i, s) in sources.iter().enumerate() {
            if s.source_type == SourceType::Global {
                return Err(Error::invalid(format!("source {i}: only point and cluster sources can be separated")));
            }
            let c = centroid(&s.anchors).ok_or_else(|| Error::invalid(format!("source {i} has no anchors")))?;
            directions.push(Direction::from_vector(pose.rotation.to_listener(&(c - pose.position)))?);
            let mut g = vec![0.0; order.channels()];
            spatial_gains(s.source_type, &s.anchors, &pose, model, order, &mut g);
            gains.push(g);
        }
        for i in 0..directions.len() {
            for j in 0..i {
                if (directions[i].unit() - directions[j].unit()).norm() < 1e-9 {
                    log::warn!("sources {j} and {i} share a direction and cannot be told apart");
                }
            }
        }
        let g = DMatrix::from_fn(order.channels(), sources.len(), |c, k| gains[k][c]);
        let p = g.pseudo_inverse(1e-12).map_err(Error::invalid)?;
        let pinv = (0..sources.len()).map(|k| p.row(k).iter().copied().collect()).collect();
        let loss = MagLoss::new(mixture.channels())?;
        Ok(SeparationProblem {
            mixture,
            sources,
            pose,
            directions,
            gains,
            pinv,
            loss,
            stft: Stft::new(MAG_FFT, MAG_HOP),
            waveform_weight: WAVEFORM_WEIGHT,
        })
    }

    pub fn mixture(&self) -> &AmbisonicBuffer {
        &self.mixture
    }

    pub fn sources(&self) -> &[SeparationSource] {
        &self.sources
    }

    pub fn pose(&self) -> &ListenerPose {
        &self.pose
    }

    /// Listener-frame direction of source `i`'s centroid.
    pub fn direction(&self, i: usize) -> Direction {
        self.directions[i]
    }

    pub fn gains(&self, i: usize) -> &[f64] {
        &self.gains[i]
    }

    fn check<C: AsRef<[f64]>>(&self, waves: &[C]) -> Result<()> {
        if waves.len() != self.sources.len() || waves.iter().any(|w| w.as_ref().len() != self.mixture.len()) {
            return Err(Error::invalid(format!(
                "expected {} waveforms of {} samples",
                self.sources.len(),
                self.mixture.len()
            )));
        }
        Ok(())
    }

    /// `Σ_i g_i s_i(t)`.
    pub fn render<C: AsRef<[f64]>>(&self, waves: &[C]) -> Result<AmbisonicBuffer> {
        self.check(waves)?;
        let mut ch = vec![vec![0.0; self.mixture.len()]; self.mixture.num_channels()];
        for (w, g) in waves.iter().zip(&self.gains) {
            for (out, &gc) in ch.iter_mut().zip(g) {
                if gc == 0.0 {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(w.as_ref()) {
                    *o += gc * x;
                }
            }
        }
        AmbisonicBuffer::from_channels(self.mixture.order(), self.mixture.sample_rate(), ch)
    }

    /// Adjoint of [`Self::render`]: `s_i(t) = g_iᵀ a(t)`.
    pub fn adjoint<C: AsRef<[f64]>>(&self, channels: &[C]) -> Vec<Vec<f64>> {
        self.mix_down(channels, &self.gains)
    }

    fn mix_down<C: AsRef<[f64]>>(&self, channels: &[C], weights: &[Vec<f64>]) -> Vec<Vec<f64>> {
        weights
            .iter()
            .map(|g| {
                let mut s = vec![0.0; self.mixture.len()];
                for (ch, &gc) in channels.iter().zip(g) {
                    for (o, x) in s.iter_mut().zip(ch.as_ref()) {
                        *o += gc * x;
                    }
                }
                s
            })
            .collect()
    }

    fn waveform_term(&self, pred: &AmbisonicBuffer) -> f64 {
        let n = (pred.num_channels() * pred.len()) as f64;
        let sq: f64 = pred
            .channels()
            .iter()
            .zip(self.mixture.channels())
            .flat_map(|(p, m)| p.iter().zip(m).map(|(a, b)| (a - b) * (a - b)))
            .sum();
        self.waveform_weight * sq / n
    }

    /// `L_mag` of the rendered sum against the mixture.
    pub fn l_mag<C: AsRef<[f64]>>(&self, waves: &[C]) -> Result<f64> {
        self.loss.value(self.render(waves)?.channels())
    }

    /// `L_mag` plus the weighted mean squared waveform residual.
    pub fn objective<C: AsRef<[f64]>>(&self, waves: &[C]) -> Result<f64> {
        let pred = self.render(waves)?;
        Ok(self.loss.value(pred.channels())? + self.waveform_term(&pred))
    }

    /// Objective and its gradient with respect to every source sample.
    pub fn objective_and_grad<C: AsRef<[f64]>>(&self, waves: &[C]) -> Result<(f64, Vec<Vec<f64>>)> {
        let pred = self.render(waves)?;
        let (l_mag, mut g) = self.loss.value_and_grad(pred.channels())?;
        let scale = 2.0 * self.waveform_weight / (pred.num_channels() * pred.len()) as f64;
        for ((gc, p), m) in g.iter_mut().zip(pred.channels()).zip(self.mixture.channels()) {
            for ((o, a), b) in gc.iter_mut().zip(p).zip(m) {
                *o += scale * (a - b);
            }
        }
        Ok((l_mag + self.waveform_term(&pred), self.adjoint(&g)))
    }

    /// Gauss-Newton-style step: each STFT bin of each channel is pulled
    /// toward the target log magnitude in proportion to its own size, the
    /// waveform residual is added, and the channel update is mapped onto the
    /// sources through the gain pseudo-inverse.
    fn step_direction(&self, pred: &AmbisonicBuffer) -> Vec<Vec<f64>> {
        let delta: Vec<Vec<f64>> = pred
            .channels()
            .iter()
            .zip(self.mixture.channels())
            .enumerate()
            .map(|(c, (p, m))| {
                let spec: Vec<Complex> = self
                    .stft
                    .forward(p)
                    .iter()
                    .zip(self.loss.target_log(c))
                    .map(|(x, lt)| {
                        let mag = x.norm();
                        if mag <= LOG_FLOOR {
                            Complex::new(0.0, 0.0)
                        } else {
                            -x * (mag.ln() - lt)
                        }
                    })
                    .collect();
                let mut d = self.stft.inverse(&spec, p.len());
                for ((o, a), b) in d.iter_mut().zip(p).zip(m) {
                    *o -= self.waveform_weight * (a - b);
                }
                d
            })
            .collect();
        self.mix_down(&delta, &self.pinv)
    }
}

/// Virtual-microphone render of the mixture toward each source's direction.
pub fn init_sources(problem: &SeparationProblem) -> Vec<MonoBuffer> {
    (0..problem.sources.len()).map(|i| virtual_mic(&problem.mixture, &problem.direction(i))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    /// Waveforms at the best objective, in source order.
    pub sources: Vec<MonoBuffer>,
    pub best_iteration: usize,
    /// Objective at every evaluated iterate.
    pub losses: Vec<f64>,
    /// Best objective so far, non-increasing.
    pub trace: Vec<f64>,
    pub initial_l_mag: f64,
    pub final_l_mag: f64,
}

pub fn separate(problem: &SeparationProblem, iters: usize, lr: f64) -> Result<Separation> {
    let init: Vec<Vec<f64>> = init_sources(problem).into_iter().map(|m| m.samples).collect();
    separate_from(problem, init, iters, lr)
}

/// [`separate`] from caller-supplied starting waveforms. Iterate 0 is the
/// starting point itself.
pub fn separate_from(problem: &SeparationProblem, init: Vec<Vec<f64>>, iters: usize, lr: f64) -> Result<Separation> {
    if iters == 0 {
        return Err(Error::invalid("separation needs at least one iteration"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
    }
    problem.check(&init)?;
    let mut waves = init;
    let mut best = (f64::INFINITY, waves.clone(), 0);
    let (mut losses, mut trace) = (Vec::with_capacity(iters), Vec::with_capacity(iters));
    let mut initial_l_mag = 0.0;
    for it in 0..iters {
        let pred = problem.render(&waves)?;
        let l_mag = problem.loss.value(pred.channels())?;
        let loss = l_mag + problem.waveform_term(&pred);
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: it, trace: losses });
        }
        if it == 0 {
            initial_l_mag = l_mag;
        }
        losses.push(loss);
        if loss < best.0 {
            best = (loss, waves.clone(), it);
        }
        trace.push(best.0);
        log::debug!("separation iteration {it}: loss {loss:.6}");
        if it + 1 < iters {
            for (w, d) in waves.iter_mut().zip(problem.step_direction(&pred)) {
                for (x, dx) in w.iter_mut().zip(d) {
                    *x += lr * dx;
                }
            }
        }
    }
    let final_l_mag = problem.l_mag(&best.1)?;
    let sr = problem.mixture.sample_rate();
    Ok(Separation {
        sources: best.1.into_iter().map(|s| MonoBuffer::new(s, sr)).collect(),
        best_iteration: best.2,
        losses,
        trace,
        initial_l_mag,
        final_l_mag,
    })
}

/// Scale-invariant signal-to-distortion ratio in dB.
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::invalid("SI-SDR inputs differ in length"));
    }
    let rr: f64 = reference.iter().map(|x| x * x).sum();
    if rr == 0.0 {
        return Err(Error::NoEnergy);
    }
    let a = estimate.iter().zip(reference).map(|(e, r)| e * r).sum::<f64>() / rr;
    let (mut sig, mut noise) = (0.0, 0.0);
    for (e, r) in estimate.iter().zip(reference) {
        let t = a * r;
        sig += t * t;
        noise += (e - t) * (e - t);
    }
    Ok(10.0 * (sig / noise).log10())
}
