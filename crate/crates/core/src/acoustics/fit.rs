//! One-shot fitting of RIR parameters to a single ambisonic recording.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::loss::MagLoss;
use super::paths::ReflectionPath;
use super::rir::RirModel;
use super::{RirParams, NUM_PARAMS};
use crate::buffer::{AmbisonicBuffer, MonoBuffer, SAMPLE_RATE};
use crate::dsp::next_pow2;
use crate::error::{Error, Result};

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            x[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub iters: usize,
    pub lr: f64,
    /// Parameters the optimizer may move; the rest stay at their initial values.
    pub active: [bool; NUM_PARAMS],
    /// RIR length in samples.
    pub rir_len: usize,
    /// Late-tail noise seed.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { iters: 500, lr: 1e-2, active: [true; NUM_PARAMS], rir_len: SAMPLE_RATE as usize / 2, seed: 0 }
    }
}

/// Renderer, dry source and target spectrum bundled for repeated evaluation.
pub struct FitProblem {
    model: RirModel,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    src_spec: Vec<Complex64>,
    loss: MagLoss,
}

impl FitProblem {
    pub fn new(paths: &[ReflectionPath], src: &MonoBuffer, target: &AmbisonicBuffer, rir_len: usize, seed: u64) -> Result<Self> {
        for (what, sr) in [("source", src.sample_rate), ("target", target.sample_rate())] {
            if sr != SAMPLE_RATE {
                return Err(Error::invalid(format!("{what} must be {SAMPLE_RATE} Hz, got {sr}")));
            }
        }
        if src.is_empty() || target.is_empty() {
            return Err(Error::invalid("source and target must be non-empty"));
        }
        let model = RirModel::new(paths, target.order(), rir_len, seed)?;
        let n = next_pow2((rir_len + src.len() - 1).max(target.len()));
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut src_spec = vec![Complex64::new(0.0, 0.0); n];
        for (s, x) in src_spec.iter_mut().zip(&src.samples) {
            s.re = *x;
        }
        fwd.process(&mut src_spec);
        Ok(FitProblem { model, fwd, inv, src_spec, loss: MagLoss::new(target.channels())? })
    }

    pub fn model(&self) -> &RirModel {
        &self.model
    }

    fn convolve(&self, rir: &[f64]) -> Vec<f64> {
        let n = self.src_spec.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (b, x) in buf.iter_mut().zip(rir) {
            b.re = *x;
        }
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.src_spec) {
            *b *= s;
        }
        self.inv.process(&mut buf);
        buf[..self.loss.len()].iter().map(|c| c.re / n as f64).collect()
    }

    /// `out[k] = Σ_t g[t] src[t − k]`, the adjoint of [`Self::convolve`].
    fn correlate(&self, g: &[f64]) -> Vec<f64> {
        let n = self.src_spec.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (b, x) in buf.iter_mut().zip(g) {
            b.re = *x;
        }
        self.fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.src_spec) {
            *b *= s.conj();
        }
        self.inv.process(&mut buf);
        buf[..self.model.len()].iter().map(|c| c.re / n as f64).collect()
    }

    /// Rendered recording, truncated or zero-padded to the target length.
    pub fn predict(&self, p: &RirParams) -> AmbisonicBuffer {
        let rir = self.model.render(p);
        let ch = rir.channels().iter().map(|c| self.convolve(c)).collect();
        AmbisonicBuffer::from_channels(rir.order(), SAMPLE_RATE, ch).expect("prediction layout")
    }

    pub fn loss(&self, p: &RirParams) -> f64 {
        self.loss.value(self.predict(p).channels()).expect("prediction matches target")
    }

    /// `L_mag` and its gradient in raw parameter coordinates.
    pub fn loss_and_grad(&self, p: &RirParams, active: &[bool; NUM_PARAMS]) -> (f64, [f64; NUM_PARAMS]) {
        let pred = self.predict(p);
        let (value, g_pred) = self.loss.value_and_grad(pred.channels()).expect("prediction matches target");
        let g_rir: Vec<Vec<f64>> = g_pred.iter().map(|g| self.correlate(g)).collect();
        (value, self.model.gradient(p, &g_rir, active))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: RirParams,
    pub best_loss: f64,
    pub best_iteration: usize,
    /// Loss at every evaluated iterate.
    pub losses: Vec<f64>,
    /// Best loss so far, non-increasing.
    pub trace: Vec<f64>,
}

pub fn fit_one_shot(
    paths: &[ReflectionPath],
    src: &MonoBuffer,
    target: &AmbisonicBuffer,
    init: RirParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    if opts.iters == 0 {
        return Err(Error::invalid("fit needs at least one iteration"));
    }
    init.validate()?;
    let problem = FitProblem::new(paths, src, target, opts.rir_len, opts.seed)?;
    let mut adam = Adam::new(NUM_PARAMS, opts.lr);
    let mut raw = init.to_raw();
    let mut params = init;
    let mut best = (f64::INFINITY, init, 0);
    let (mut losses, mut trace) = (Vec::with_capacity(opts.iters), Vec::with_capacity(opts.iters));
    for it in 0..opts.iters {
        let (loss, grad) = problem.loss_and_grad(&params, &opts.active);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration: it, trace: losses });
        }
        losses.push(loss);
        if loss < best.0 {
            best = (loss, params, it);
        }
        trace.push(best.0);
        log::debug!("fit iteration {it}: loss {loss:.6}");
        adam.step(&mut raw, &grad);
        params = RirParams::from_raw(&raw);
    }
    Ok(FitResult { params: best.1, best_loss: best.0, best_iteration: best.2, losses, trace })
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::acoustics::{image_source_paths, param, BoxRoom};
    use crate::sh::Vec3;

    fn setup(truth: &RirParams, rir_len: usize) -> (Vec<ReflectionPath>, MonoBuffer, AmbisonicBuffer) {
        let room = BoxRoom::new(Vec3::new(4.0, 3.0, 2.5), Vec3::new(1.0, 1.2, 1.5), Vec3::new(2.6, 2.0, 1.1)).unwrap();
        let paths = image_source_paths(&room, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = MonoBuffer::new((0..2400).map(|_| rng.random_range(-1.0..1.0)).collect(), SAMPLE_RATE);
        let len = src.len() + rir_len - 1;
        let target = {
            let rir = RirModel::new(&paths, crate::sh::Order::FIRST, rir_len, 0).unwrap().render(truth);
            let ch = rir
                .channels()
                .iter()
                .map(|c| crate::dsp::convolve(c, &src.samples)[..len].to_vec())
                .collect();
            AmbisonicBuffer::from_channels(rir.order(), SAMPLE_RATE, ch).unwrap()
        };
        (paths, src, target)
    }

    fn truth() -> RirParams {
        RirParams { alpha: 20.0, rt60_base: 0.08, late_gain: -0.5, ..Default::default() }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut adam = Adam::new(2, 0.1);
        let mut x = [3.0, -2.0];
        for _ in 0..500 {
            let g = [2.0 * x[0], 8.0 * x[1]];
            adam.step(&mut x, &g);
        }
        assert!(x[0].abs() < 1e-2 && x[1].abs() < 1e-2);
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let p = truth();
        let (paths, src, target) = setup(&p, 6000);
        let prob = FitProblem::new(&paths, &src, &target, 6000, 0).unwrap();
        assert!(prob.predict(&p).max_abs_diff(&target) < 1e-12);
        assert!(prob.loss(&p) < 1e-12);
    }

    #[test]
    fn starting_at_the_truth_is_a_fixed_point() {
        let p = truth();
        let (paths, src, target) = setup(&p, 6000);
        let opts = FitOptions { iters: 5, rir_len: 6000, ..Default::default() };
        let fit = fit_one_shot(&paths, &src, &target, p, &opts).unwrap();
        assert!(fit.losses[0] < 1e-9);
        assert_eq!(fit.params, p);
        assert_eq!(fit.best_iteration, 0);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let p = truth();
        let (paths, src, target) = setup(&p, 6000);
        let prob = FitProblem::new(&paths, &src, &target, 6000, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut raw = p.to_raw();
        for r in raw.iter_mut() {
            *r += rng.random_range(-0.3..0.3);
        }
        let q = RirParams::from_raw(&raw);
        let (_, g) = prob.loss_and_grad(&q, &[true; NUM_PARAMS]);
        for i in 0..NUM_PARAMS {
            let h = 1e-4;
            let (mut up, mut dn) = (raw, raw);
            up[i] += h;
            dn[i] -= h;
            let fd = (prob.loss(&RirParams::from_raw(&up)) - prob.loss(&RirParams::from_raw(&dn))) / (2.0 * h);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8);
            assert!(err < 1e-3, "param {i}: fd {fd} analytic {}", g[i]);
        }
    }

    #[test]
    fn alpha_only_fit_recovers_the_truth() {
        let p = truth();
        let (paths, src, target) = setup(&p, 6000);
        let mut active = [false; NUM_PARAMS];
        active[param::ALPHA] = true;
        let init = RirParams { alpha: 40.0, ..p };
        let opts = FitOptions { iters: 200, lr: 5e-2, active, rir_len: 6000, seed: 0 };
        let fit = fit_one_shot(&paths, &src, &target, init, &opts).unwrap();
        assert!((fit.params.alpha - 20.0).abs() < 2.0, "{}", fit.params.alpha);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.best_loss < 0.1 * fit.losses[0]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let p = truth();
        let (paths, src, target) = setup(&p, 6000);
        let zero = FitOptions { iters: 0, ..Default::default() };
        assert!(fit_one_shot(&paths, &src, &target, p, &zero).is_err());
        let bad = MonoBuffer::new(src.samples.clone(), 44100);
        assert!(FitProblem::new(&paths, &bad, &target, 6000, 0).is_err());
    }
}
