//! Fixtures shared by the benchmarks.

use ambiscape::{MonoBuffer, Scene, SoundSource, SourceType, Vec3, SAMPLE_RATE};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` point sources of white noise on a 3 m ring, `secs` long.
pub fn ring_scene(n: usize, secs: f64, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = (secs * SAMPLE_RATE as f64) as usize;
    let sources = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            SoundSource {
                id: format!("s{i}"),
                label: String::new(),
                prompt: String::new(),
                peak_db: -6.0,
                source_type: SourceType::Point,
                anchors: vec![Vec3::new(3.0 * a.cos(), 3.0 * a.sin(), 0.0)],
                audio: MonoBuffer::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), SAMPLE_RATE),
            }
        })
        .collect();
    Scene::new(sources, ambiscape::scene::DEFAULT_ALPHA).expect("valid scene")
}
