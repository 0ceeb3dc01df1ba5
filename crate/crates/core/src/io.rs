//! File I/O: WAV audio, the `SWPC0001` anchor blob, and atomic writes.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavSpec};

use crate::buffer::{AmbisonicBuffer, MonoBuffer, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::sh::{Order, Vec3};

pub const ANCHOR_MAGIC: &[u8; 8] = b"SWPC0001";

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never observes a partial file.
pub fn atomic_write<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Decoded WAV contents, channels de-interleaved.
#[derive(Debug, Clone)]
pub struct WavData {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

/// Reads PCM16, PCM24, PCM32 or float32 WAV. Non-finite samples are an error.
pub fn read_wav(path: &Path) -> Result<WavData> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
        (fmt, bits) => {
            return Err(Error::schema(format!(
                "{}: unsupported WAV sample format {fmt:?}/{bits}",
                path.display()
            )))
        }
    };
    if interleaved.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(path.display().to_string()));
    }
    let frames = interleaved.len() / n_ch.max(1);
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(WavData {
        sample_rate: spec.sample_rate,
        channels,
    })
}

fn expect_rate(path: &Path, found: u32) -> Result<()> {
    if found != SAMPLE_RATE {
        return Err(Error::SampleRateMismatch {
            path: path.to_path_buf(),
            expected: SAMPLE_RATE,
            found,
        });
    }
    Ok(())
}

/// Reads a single-channel 48 kHz WAV.
pub fn read_mono(path: &Path) -> Result<MonoBuffer> {
    let data = read_wav(path)?;
    expect_rate(path, data.sample_rate)?;
    let mut channels = data.channels;
    if channels.len() != 1 {
        return Err(Error::schema(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            channels.len()
        )));
    }
    Ok(MonoBuffer::new(channels.remove(0), data.sample_rate))
}

/// Reads an n-channel ACN/SN3D WAV at 48 kHz.
pub fn read_ambisonic(path: &Path) -> Result<AmbisonicBuffer> {
    let data = read_wav(path)?;
    expect_rate(path, data.sample_rate)?;
    let order = Order::from_channels(data.channels.len())?;
    AmbisonicBuffer::from_channels(order, data.sample_rate, data.channels)
}

/// Writes float32 WAV with the given channels (all equal length).
pub fn write_wav(path: &Path, sample_rate: u32, channels: &[&[f64]]) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::invalid("cannot write a WAV without channels"));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("WAV channels differ in length"));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    atomic_write(path, |w| {
        let wav_err = |source| Error::Wav {
            path: path.to_path_buf(),
            source,
        };
        let mut writer = hound::WavWriter::new(w, spec).map_err(wav_err)?;
        for i in 0..len {
            for ch in channels {
                writer.write_sample(ch[i] as f32).map_err(wav_err)?;
            }
        }
        writer.finalize().map_err(wav_err)
    })
}

pub fn write_mono(path: &Path, buf: &MonoBuffer) -> Result<()> {
    write_wav(path, buf.sample_rate, &[&buf.samples])
}

pub fn write_ambisonic(path: &Path, buf: &AmbisonicBuffer) -> Result<()> {
    let chans: Vec<&[f64]> = buf.channels().iter().map(Vec::as_slice).collect();
    write_wav(path, buf.sample_rate(), &chans)
}

/// Little-endian float32 xyz triplets after the 8-byte magic.
pub fn write_anchor_blob(path: &Path, points: &[Vec3]) -> Result<()> {
    atomic_write(path, |w| {
        let mut bytes = Vec::with_capacity(8 + points.len() * 12);
        bytes.extend_from_slice(ANCHOR_MAGIC);
        for p in points {
            for v in [p.x, p.y, p.z] {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        w.write_all(&bytes).map_err(|e| Error::io(path, e))
    })
}

pub fn read_anchor_blob(path: &Path) -> Result<Vec<Vec3>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..8] != ANCHOR_MAGIC {
        return Err(Error::schema(format!(
            "{}: missing SWPC0001 header",
            path.display()
        )));
    }
    let body = &bytes[8..];
    if body.len() % 12 != 0 {
        return Err(Error::schema(format!(
            "{}: anchor payload is not a whole number of float32 triplets",
            path.display()
        )));
    }
    let points: Vec<Vec3> = body
        .chunks_exact(12)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]) as f64;
            Vec3::new(f(0), f(4), f(8))
        })
        .collect();
    if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite(path.display().to_string()));
    }
    Ok(points)
}
