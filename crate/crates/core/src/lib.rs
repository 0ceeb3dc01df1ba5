pub mod acoustics;
pub mod binaural;
pub mod buffer;
pub mod dsp;
pub mod encoder;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pano;
pub mod protocol;
pub mod scene;
pub mod separation;
pub mod sh;
pub mod stream;
mod triple;

pub use buffer::{AmbisonicBuffer, MonoBuffer, SAMPLE_RATE};
pub use error::{Error, Result};
pub use scene::{ListenerPose, Scene, SoundSource, SourceType};
pub use sh::{Direction, Order, Rotation, ShVector, Vec3};
