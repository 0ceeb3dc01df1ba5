//! Reflection paths and a shoebox image-source generator.

use serde::{Deserialize, Serialize};

use super::SPEED_OF_SOUND;
use crate::error::{Error, Result};
use crate::sh::{Direction, Vec3};

pub const MAX_IMAGE_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRecord", into = "PathRecord")]
pub struct ReflectionPath {
    /// Seconds from emission to arrival.
    pub delay: f64,
    /// Arrival direction, pointing from the listener toward the (image) source.
    pub direction: Direction,
    pub bounces: u32,
}

impl ReflectionPath {
    pub fn new(delay: f64, direction: Direction, bounces: u32) -> Result<Self> {
        if !(delay > 0.0) || !delay.is_finite() {
            return Err(Error::invalid(format!("path delay must be positive, got {delay}")));
        }
        Ok(ReflectionPath { delay, direction, bounces })
    }

    pub fn is_direct(&self) -> bool {
        self.bounces == 0
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathRecord {
    delay: f64,
    direction: [f64; 3],
    bounces: u32,
}

impl TryFrom<PathRecord> for ReflectionPath {
    type Error = Error;

    fn try_from(r: PathRecord) -> Result<Self> {
        let d = Direction::from_vector(Vec3::from(r.direction))?;
        ReflectionPath::new(r.delay, d, r.bounces)
    }
}

impl From<ReflectionPath> for PathRecord {
    fn from(p: ReflectionPath) -> Self {
        let u = p.direction.unit();
        PathRecord { delay: p.delay, direction: [u.x, u.y, u.z], bounces: p.bounces }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RoomRecord", into = "RoomRecord")]
pub struct BoxRoom {
    pub dimensions: Vec3,
    pub source: Vec3,
    pub listener: Vec3,
}

impl BoxRoom {
    pub fn new(dimensions: Vec3, source: Vec3, listener: Vec3) -> Result<Self> {
        let room = BoxRoom { dimensions, source, listener };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |p: &Vec3| (0..3).all(|i| p[i] > 0.0 && p[i] < self.dimensions[i]);
        if !inside(&self.source) || !inside(&self.listener) {
            return Err(Error::invalid("source and listener must lie strictly inside the room"));
        }
        if (self.source - self.listener).norm() < 1e-9 {
            return Err(Error::invalid("source and listener coincide"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomRecord {
    dimensions: [f64; 3],
    source: [f64; 3],
    listener: [f64; 3],
}

impl TryFrom<RoomRecord> for BoxRoom {
    type Error = Error;

    fn try_from(r: RoomRecord) -> Result<Self> {
        BoxRoom::new(r.dimensions.into(), r.source.into(), r.listener.into())
    }
}

impl From<BoxRoom> for RoomRecord {
    fn from(r: BoxRoom) -> Self {
        RoomRecord { dimensions: r.dimensions.into(), source: r.source.into(), listener: r.listener.into() }
    }
}

fn image_coord(i: i32, len: f64, src: f64) -> f64 {
    i as f64 * len + if i % 2 == 0 { src } else { len - src }
}

/// Image sources with at most `max_order` total wall reflections.
pub fn image_source_paths(room: &BoxRoom, max_order: usize) -> Result<Vec<ReflectionPath>> {
    if max_order > MAX_IMAGE_ORDER {
        return Err(Error::invalid(format!("image order {max_order} exceeds {MAX_IMAGE_ORDER}")));
    }
    room.validate()?;
    let n = max_order as i32;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                let bounces = (i.abs() + j.abs() + k.abs()) as u32;
                if bounces > max_order as u32 {
                    continue;
                }
                let image = Vec3::new(
                    image_coord(i, room.dimensions.x, room.source.x),
                    image_coord(j, room.dimensions.y, room.source.y),
                    image_coord(k, room.dimensions.z, room.source.z),
                );
                let offset = image - room.listener;
                let direction = Direction::from_vector(offset)?;
                out.push(ReflectionPath::new(offset.norm() / SPEED_OF_SOUND, direction, bounces)?);
            }
        }
    }
    out.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(out)
}
