//! Binaural decoding through ambisonics-domain HRIRs.
//!
//! A measured set of directional HRIRs is projected once onto the SH basis,
//! `h_c = Σ_d w_d · h(d) · Y_c(d)`, after which each ear is the sum of the
//! ambisonic channels convolved with their projected filters.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Deserialize;

use crate::buffer::{AmbisonicBuffer, MonoBuffer, SAMPLE_RATE};
use crate::dsp::{next_pow2, to_complex};
use crate::error::{Error, Result};
use crate::io;
use crate::sh::{eval_sh, equiangular_grid, Direction, Order};

/// Minimum number of directions in an HRIR manifest.
pub const MIN_MANIFEST_ENTRIES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct HrirEntry {
    pub direction: Direction,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Quadrature weight; `None` means uniform `1/N`.
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrirGrid {
    entries: Vec<HrirEntry>,
    sample_rate: u32,
}

impl HrirGrid {
    pub fn new(entries: Vec<HrirEntry>, sample_rate: u32) -> Result<Self> {
        let first = entries.first().ok_or(Error::EmptyGrid)?;
        let len = first.left.len();
        if len == 0 {
            return Err(Error::schema("HRIRs must not be empty"));
        }
        for e in &entries {
            if e.left.len() != len || e.right.len() != len {
                return Err(Error::schema("HRIRs differ in length"));
            }
            if !e.left.iter().chain(&e.right).all(|v| v.is_finite()) {
                return Err(Error::NonFinite("HRIR".into()));
            }
        }
        let weighted = entries.iter().filter(|e| e.weight.is_some()).count();
        if weighted != 0 && weighted != entries.len() {
            return Err(Error::schema("either every HRIR entry has a weight or none does"));
        }
        if sample_rate != SAMPLE_RATE {
            return Err(Error::SampleRateMismatch {
                path: "hrir grid".into(),
                expected: SAMPLE_RATE,
                found: sample_rate,
            });
        }
        Ok(HrirGrid {
            entries,
            sample_rate,
        })
    }

    pub fn entries(&self) -> &[HrirEntry] {
        &self.entries
    }

    pub fn ir_len(&self) -> usize {
        self.entries[0].left.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Delta HRIRs with cardioid ear gains `½(1 ± sinθ·cosφ)` on an
    /// `n_az × n_el` equiangular grid (area weights). The layout is
    /// mirror-symmetric about the median plane.
    pub fn synthetic_panner(n_az: usize, n_el: usize, ir_len: usize) -> Self {
        let ir_len = ir_len.max(1);
        let entries = equiangular_grid(n_az, n_el)
            .into_iter()
            .map(|(direction, w)| {
                let lateral = direction.unit().y;
                let mut left = vec![0.0; ir_len];
                let mut right = vec![0.0; ir_len];
                left[0] = 0.5 * (1.0 + lateral);
                right[0] = 0.5 * (1.0 - lateral);
                HrirEntry {
                    direction,
                    left,
                    right,
                    weight: Some(w),
                }
            })
            .collect();
        HrirGrid::new(entries, SAMPLE_RATE).expect("synthetic grid is valid")
    }

    /// The panner used when no HRIR set is supplied.
    pub fn default_panner() -> Self {
        HrirGrid::synthetic_panner(16, 8, 64)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    azimuth_deg: f64,
    elevation_deg: f64,
    left_wav: String,
    right_wav: String,
    #[serde(default)]
    weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    entries: Vec<ManifestEntry>,
}

/// Loads `{"entries":[{azimuth_deg, elevation_deg, left_wav, right_wav, weight?}]}`;
/// WAV paths resolve against the manifest's directory.
pub fn load_hrir_manifest(path: &Path) -> Result<HrirGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if manifest.entries.len() < MIN_MANIFEST_ENTRIES {
        return Err(Error::schema(format!(
            "HRIR manifest needs at least {MIN_MANIFEST_ENTRIES} directions, found {}",
            manifest.entries.len()
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let entries = manifest
        .entries
        .iter()
        .map(|e| {
            Ok(HrirEntry {
                direction: Direction::from_angles(e.azimuth_deg.to_radians(), e.elevation_deg.to_radians()),
                left: io::read_mono(&base.join(&e.left_wav))?.samples,
                right: io::read_mono(&base.join(&e.right_wav))?.samples,
                weight: e.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HrirGrid::new(entries, SAMPLE_RATE)
}

/// Per-ACN-channel left/right filters.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiHrir {
    order: Order,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AmbiHrir {
    pub fn new(order: Order, left: Vec<Vec<f64>>, right: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        let n = order.channels();
        if left.len() != n || right.len() != n {
            return Err(Error::schema(format!("order {order} needs {n} filter pairs")));
        }
        let len = left[0].len();
        if left.iter().chain(&right).any(|h| h.len() != len) {
            return Err(Error::schema("ambisonic HRIRs differ in length"));
        }
        Ok(AmbiHrir {
            order,
            left,
            right,
            sample_rate,
        })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn ir_len(&self) -> usize {
        self.left[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn left(&self, c: usize) -> &[f64] {
        &self.left[c]
    }

    pub fn right(&self, c: usize) -> &[f64] {
        &self.right[c]
    }
}

pub fn project_hrirs(grid: &HrirGrid, order: Order) -> Result<AmbiHrir> {
    let entries = grid.entries();
    if entries.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = order.channels();
    let len = grid.ir_len();
    let uniform = 1.0 / entries.len() as f64;
    let mut left = vec![vec![0.0; len]; n];
    let mut right = vec![vec![0.0; len]; n];
    for e in entries {
        let w = e.weight.unwrap_or(uniform);
        let y = eval_sh(&e.direction, order);
        for c in 0..n {
            let g = w * y[c];
            for t in 0..len {
                left[c][t] += g * e.left[t];
                right[c][t] += g * e.right[t];
            }
        }
    }
    AmbiHrir::new(order, left, right, grid.sample_rate())
}

fn check_orders(ambi: Order, hrir: Order) -> Result<()> {
    if hrir < ambi {
        return Err(Error::OrderMismatch {
            expected: ambi.get(),
            found: hrir.get(),
        });
    }
    Ok(())
}

/// Whole-signal decode; each ear has `len + ir_len − 1` samples.
pub fn decode_binaural(ambi: &AmbisonicBuffer, hrir: &AmbiHrir) -> Result<(MonoBuffer, MonoBuffer)> {
    check_orders(ambi.order(), hrir.order())?;
    if ambi.sample_rate() != hrir.sample_rate() {
        return Err(Error::SampleRateMismatch {
            path: "ambisonic input".into(),
            expected: hrir.sample_rate(),
            found: ambi.sample_rate(),
        });
    }
    let sr = ambi.sample_rate();
    if ambi.is_empty() {
        return Ok((MonoBuffer::zeros(0, sr), MonoBuffer::zeros(0, sr)));
    }
    let out_len = ambi.len() + hrir.ir_len() - 1;
    let n = next_pow2(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc_l = vec![zero; n];
    let mut acc_r = vec![zero; n];
    for c in 0..ambi.num_channels() {
        let mut x = to_complex(ambi.channel(c), n);
        let mut hl = to_complex(hrir.left(c), n);
        let mut hr = to_complex(hrir.right(c), n);
        fwd.process(&mut x);
        fwd.process(&mut hl);
        fwd.process(&mut hr);
        for k in 0..n {
            acc_l[k] += x[k] * hl[k];
            acc_r[k] += x[k] * hr[k];
        }
    }
    inv.process(&mut acc_l);
    inv.process(&mut acc_r);
    let s = 1.0 / n as f64;
    let take = |v: &[Complex64]| v[..out_len].iter().map(|c| c.re * s).collect();
    Ok((MonoBuffer::new(take(&acc_l), sr), MonoBuffer::new(take(&acc_r), sr)))
}

/// Block-wise overlap-add decoder carrying convolution tails between calls.
///
/// All buffers are allocated in [`StreamingDecoder::new`]; `process` does not
/// allocate. One instance serves one stream.
pub struct StreamingDecoder {
    block: usize,
    n_fft: usize,
    channels: usize,
    spec_l: Vec<Vec<Complex64>>,
    spec_r: Vec<Vec<Complex64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    x: Vec<Complex64>,
    acc_l: Vec<Complex64>,
    acc_r: Vec<Complex64>,
    scratch: Vec<Complex64>,
    tail_l: Vec<f64>,
    tail_r: Vec<f64>,
}

impl std::fmt::Debug for StreamingDecoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamingDecoder")
            .field("block", &self.block)
            .field("n_fft", &self.n_fft)
            .field("channels", &self.channels)
            .finish()
    }
}

impl StreamingDecoder {
    /// Decodes the first `order.channels()` channels with `hrir`.
    pub fn new(hrir: &AmbiHrir, order: Order, block: usize) -> Result<Self> {
        check_orders(order, hrir.order())?;
        if block == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        let n_fft = next_pow2(block + hrir.ir_len() - 1);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_fft);
        let inv = planner.plan_fft_inverse(n_fft);
        let channels = order.channels();
        let spectrum = |h: &[f64]| {
            let mut v = to_complex(h, n_fft);
            fwd.process(&mut v);
            v
        };
        let spec_l = (0..channels).map(|c| spectrum(hrir.left(c))).collect();
        let spec_r = (0..channels).map(|c| spectrum(hrir.right(c))).collect();
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Ok(StreamingDecoder {
            block,
            n_fft,
            channels,
            spec_l,
            spec_r,
            x: vec![zero; n_fft],
            acc_l: vec![zero; n_fft],
            acc_r: vec![zero; n_fft],
            scratch: vec![zero; scratch_len],
            tail_l: vec![0.0; n_fft - block],
            tail_r: vec![0.0; n_fft - block],
            fwd,
            inv,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn reset(&mut self) {
        self.tail_l.iter_mut().for_each(|v| *v = 0.0);
        self.tail_r.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Consumes one block (each channel `block_size` samples long) and writes
    /// `block_size` samples per ear.
    pub fn process<C: AsRef<[f64]>>(&mut self, input: &[C], left: &mut [f64], right: &mut [f64]) {
        let b = self.block;
        assert!(input.len() >= self.channels, "too few input channels");
        assert!(left.len() == b && right.len() == b, "output length must equal the block size");
        let zero = Complex64::new(0.0, 0.0);
        self.acc_l.iter_mut().for_each(|c| *c = zero);
        self.acc_r.iter_mut().for_each(|c| *c = zero);
        for c in 0..self.channels {
            let ch = input[c].as_ref();
            assert_eq!(ch.len(), b, "input length must equal the block size");
            if ch.iter().all(|v| *v == 0.0) {
                continue;
            }
            for (dst, &v) in self.x.iter_mut().zip(ch) {
                *dst = Complex64::new(v, 0.0);
            }
            self.x[b..].iter_mut().for_each(|c| *c = zero);
            self.fwd.process_with_scratch(&mut self.x, &mut self.scratch);
            let (hl, hr) = (&self.spec_l[c], &self.spec_r[c]);
            for k in 0..self.n_fft {
                let x = self.x[k];
                self.acc_l[k] += x * hl[k];
                self.acc_r[k] += x * hr[k];
            }
        }
        self.inv.process_with_scratch(&mut self.acc_l, &mut self.scratch);
        self.inv.process_with_scratch(&mut self.acc_r, &mut self.scratch);
        let s = 1.0 / self.n_fft as f64;
        overlap_add(&self.acc_l, s, &mut self.tail_l, left);
        overlap_add(&self.acc_r, s, &mut self.tail_r, right);
    }
}

fn overlap_add(acc: &[Complex64], scale: f64, tail: &mut [f64], out: &mut [f64]) {
    let b = out.len();
    for (n, o) in out.iter_mut().enumerate() {
        *o = acc[n].re * scale + tail.get(n).copied().unwrap_or(0.0);
    }
    let tl = tail.len();
    // Reads at `b + n` run ahead of the write at `n`.
    for n in 0..tl {
        let carried = if b + n < tl { tail[b + n] } else { 0.0 };
        tail[n] = acc[b + n].re * scale + carried;
    }
}
