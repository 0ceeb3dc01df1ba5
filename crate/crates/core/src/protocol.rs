//! SWAB streaming protocol.
//!
//! Every frame is a little-endian `u32` byte length followed by the payload.
//! Payloads are either a JSON control object (`{"type": "pose", ...}`) or a
//! binary audio frame:
//!
//! ```text
//! "SWAB" | u32 seq | u32 frames | f32 L0 R0 L1 R1 ...
//! ```
//!
//! all little-endian, where `frames` counts stereo sample pairs. On connect
//! the server sends a `hello` control frame carrying the protocol version,
//! sample rate and block size.

use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::binaural::AmbiHrir;
use crate::error::{Error, Result};
use crate::scene::{ListenerPose, Scene};
use crate::sh::{Rotation, Vec3};
use crate::stream::{start_session, RenderConfig};

pub const MAGIC: &[u8; 4] = b"SWAB";
pub const PROTOCOL_VERSION: u32 = 1;
/// Frames larger than this are rejected as malformed.
pub const MAX_FRAME_LEN: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Control {
    Hello {
        version: u32,
        sample_rate: u32,
        block_size: usize,
    },
    Pose {
        pos: [f64; 3],
        quat: [f64; 4],
    },
    Bye,
}

impl Control {
    pub fn pose(pose: &ListenerPose) -> Control {
        let p = pose.position;
        Control::Pose {
            pos: [p.x, p.y, p.z],
            quat: pose.rotation.quaternion(),
        }
    }

    pub fn to_pose(&self) -> Option<Result<ListenerPose>> {
        match self {
            Control::Pose { pos, quat } => Some(
                Rotation::from_quaternion(quat[0], quat[1], quat[2], quat[3]).and_then(|r| {
                    let p = Vec3::new(pos[0], pos[1], pos[2]);
                    if !p.iter().all(|v| v.is_finite()) {
                        return Err(Error::Protocol("non-finite position".into()));
                    }
                    Ok(ListenerPose::new(p, r))
                }),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame {
    pub seq: u32,
    /// Interleaved L/R.
    pub samples: Vec<f32>,
}

impl AudioFrame {
    pub fn frames(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn left(&self) -> impl Iterator<Item = f32> + '_ {
        self.samples.iter().step_by(2).copied()
    }

    pub fn right(&self) -> impl Iterator<Item = f32> + '_ {
        self.samples.iter().skip(1).step_by(2).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Control(Control),
    Audio(AudioFrame),
}

/// Serializes an audio payload into `out`, reusing its capacity.
pub fn encode_audio(seq: u32, left: &[f64], right: &[f64], out: &mut Vec<u8>) {
    assert_eq!(left.len(), right.len(), "ear lengths differ");
    out.clear();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&seq.to_le_bytes());
    out.extend_from_slice(&(left.len() as u32).to_le_bytes());
    for (l, r) in left.iter().zip(right) {
        out.extend_from_slice(&(*l as f32).to_le_bytes());
        out.extend_from_slice(&(*r as f32).to_le_bytes());
    }
}

pub fn encode_control(msg: &Control) -> Vec<u8> {
    serde_json::to_vec(msg).expect("control messages always serialize")
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn parse_payload(payload: &[u8]) -> Result<Frame> {
    if payload.starts_with(MAGIC) {
        if payload.len() < 12 {
            return Err(Error::Protocol("truncated audio header".into()));
        }
        let seq = u32_at(payload, 4);
        let frames = u32_at(payload, 8) as usize;
        let body = &payload[12..];
        if body.len() != frames * 8 {
            return Err(Error::Protocol(format!(
                "audio frame declares {frames} sample pairs but carries {} bytes",
                body.len()
            )));
        }
        let samples = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        return Ok(Frame::Audio(AudioFrame { seq, samples }));
    }
    serde_json::from_slice(payload)
        .map(Frame::Control)
        .map_err(|e| Error::Protocol(format!("bad control frame: {e}")))
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    if payload.len() > MAX_FRAME_LEN {
        return Err(Error::Protocol("frame too large".into()));
    }
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

/// Next frame payload, or `None` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u32::from_le_bytes(len) as usize;
    if n > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame length {n} exceeds limit")));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Frame>> {
    read_frame(r)?.map(|p| parse_payload(&p)).transpose()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServeOptions {
    /// Stop after this many audio frames.
    pub max_blocks: Option<u64>,
    /// Pace output at the audio rate instead of as fast as the socket allows.
    pub realtime: bool,
}

/// Streams a session to one connected client until it disconnects, says
/// `bye`, or `max_blocks` is reached. Returns the number of audio frames sent.
pub fn serve_client(
    stream: TcpStream,
    scene: &Scene,
    cfg: RenderConfig,
    hrir: &AmbiHrir,
    opts: ServeOptions,
) -> Result<u64> {
    let mut session = start_session(scene, cfg, hrir)?;
    let mut writer = session.take_pose_writer().expect("fresh session");
    stream.set_nodelay(true)?;
    let mut out = stream.try_clone()?;
    let mut input = stream.try_clone()?;
    let stop = Arc::new(AtomicBool::new(false));

    write_frame(
        &mut out,
        &encode_control(&Control::Hello {
            version: PROTOCOL_VERSION,
            sample_rate: cfg.sample_rate,
            block_size: cfg.block_size,
        }),
    )?;

    let stop_rx = stop.clone();
    let control = std::thread::spawn(move || {
        loop {
            match read_message(&mut input) {
                Ok(Some(Frame::Control(Control::Bye))) | Ok(None) | Err(_) => break,
                Ok(Some(Frame::Control(msg))) => match msg.to_pose() {
                    Some(Ok(pose)) => {
                        if writer.update_pose(pose).is_err() {
                            break;
                        }
                    }
                    Some(Err(e)) => log::warn!("ignoring pose: {e}"),
                    None => log::debug!("ignoring control frame {msg:?}"),
                },
                Ok(Some(Frame::Audio(_))) => log::warn!("client sent an audio frame"),
            }
        }
        stop_rx.store(true, Ordering::Release);
    });

    let block_time = Duration::from_secs_f64(cfg.block_size as f64 / cfg.sample_rate as f64);
    let t0 = Instant::now();
    let mut payload = Vec::with_capacity(12 + cfg.block_size * 8);
    let mut sent = 0u64;
    while !stop.load(Ordering::Acquire) && opts.max_blocks.is_none_or(|m| sent < m) {
        let (l, r) = session.next_block();
        encode_audio(sent as u32, l, r, &mut payload);
        if write_frame(&mut out, &payload).is_err() {
            break;
        }
        sent += 1;
        if opts.realtime {
            let due = t0 + block_time * sent as u32;
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    out.flush()?;
    session.close();
    let _ = stream.shutdown(Shutdown::Both);
    let _ = control.join();
    Ok(sent)
}
