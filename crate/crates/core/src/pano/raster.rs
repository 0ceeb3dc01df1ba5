//! Rasters, binary masks and their on-disk formats (PGM/PPM 8-bit, PFM float).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::atomic_write;

/// Row-major float image, channels interleaved, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Raster("dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Raster(format!("{channels} channels (expected 1 or 3)")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Raster("data length does not match dimensions".into()));
        }
        Ok(Raster { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn is_equirectangular(&self) -> bool {
        self.width == 2 * self.height
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let wrap = |e: Error| match e {
            Error::Raster(m) => Error::Raster(format!("{}: {m}", path.display())),
            other => other,
        };
        read_raster(&mut r).map_err(wrap)
    }

    /// Writes PFM when `float` is set, otherwise 8-bit PGM/PPM (values in [0,1]).
    pub fn write(&self, path: &Path, float: bool) -> Result<()> {
        atomic_write(path, |w| {
            if float {
                write_pfm(self, w)
            } else {
                write_pnm(self, w)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::Raster("mask dimensions do not match its data".into()));
        }
        Ok(Mask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    /// Pixels with value ≥ 0.5 in channel 0.
    pub fn from_raster(r: &Raster) -> Self {
        let bits = (0..r.width * r.height).map(|i| r.data[i * r.channels] >= 0.5).collect();
        Mask { width: r.width, height: r.height, bits }
    }

    pub fn to_raster(&self) -> Raster {
        let data = self.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
        Raster { width: self.width, height: self.height, channels: 1, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(Mask::from_raster(&Raster::read(path)?))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_raster().write(path, false)
    }
}

fn token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut line = Vec::new();
            r.read_until(b'\n', &mut line)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c as char);
    }
    if tok.is_empty() {
        return Err(Error::Raster("truncated header".into()));
    }
    Ok(tok)
}

fn number<R: BufRead, T: std::str::FromStr>(r: &mut R) -> Result<T> {
    let t = token(r)?;
    t.parse().map_err(|_| Error::Raster(format!("bad header field {t:?}")))
}

fn read_raster<R: BufRead>(r: &mut R) -> Result<Raster> {
    let magic = token(r)?;
    let channels = match magic.as_str() {
        "P5" | "Pf" => 1,
        "P6" | "PF" => 3,
        m => return Err(Error::Raster(format!("unsupported magic {m:?}"))),
    };
    let width: usize = number(r)?;
    let height: usize = number(r)?;
    if width == 0 || height == 0 {
        return Err(Error::Raster("dimensions must be positive".into()));
    }
    let n = width * height * channels;
    if magic.starts_with('P') && magic.as_bytes()[1].is_ascii_digit() {
        let maxval: u32 = number(r)?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Raster(format!("maxval {maxval} (only 8-bit supported)")));
        }
        let mut bytes = vec![0u8; n];
        r.read_exact(&mut bytes).map_err(|_| Error::Raster("truncated pixel data".into()))?;
        let data = bytes.iter().map(|b| *b as f32 / maxval as f32).collect();
        return Raster::new(width, height, channels, data);
    }
    let scale: f32 = number(r)?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Raster("bad PFM scale".into()));
    }
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes).map_err(|_| Error::Raster("truncated pixel data".into()))?;
    let vals: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if scale < 0.0 {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    // PFM stores rows bottom to top.
    let row = width * channels;
    let data = vals.chunks_exact(row).rev().flatten().copied().collect();
    Raster::new(width, height, channels, data)
}

fn write_pnm<W: Write>(r: &Raster, w: &mut W) -> Result<()> {
    let magic = if r.channels == 1 { "P5" } else { "P6" };
    write!(w, "{magic}\n{} {}\n255\n", r.width, r.height)?;
    let bytes: Vec<u8> = r.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

fn write_pfm<W: Write>(r: &Raster, w: &mut W) -> Result<()> {
    let magic = if r.channels == 1 { "Pf" } else { "PF" };
    write!(w, "{magic}\n{} {}\n-1.0\n", r.width, r.height)?;
    for row in r.data.chunks_exact(r.width * r.channels).rev() {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}
