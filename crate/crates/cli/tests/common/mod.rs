#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ambiscape::encoder::encode_scene;
use ambiscape::io::write_ambisonic;
use ambiscape::pano::{Mask, Raster};
use ambiscape::scene::save_scene;
use ambiscape::{ListenerPose, MonoBuffer, Order, Scene, SoundSource, SourceType, Vec3, SAMPLE_RATE};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ambiscape"));
    c.env("RUST_LOG", "error");
    c
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ambiscape")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn noise(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-0.5..0.5)).collect()
}

fn point(id: &str, at: Vec3, seed: u64, len: usize) -> SoundSource {
    SoundSource {
        id: id.into(),
        label: id.into(),
        prompt: String::new(),
        peak_db: 0.0,
        source_type: SourceType::Point,
        anchors: vec![at],
        audio: MonoBuffer::new(noise(seed, len), SAMPLE_RATE),
    }
}

/// Two point sources at ±1 m on the y axis, 0.25 s of noise each.
pub fn two_source_scene() -> Scene {
    let len = SAMPLE_RATE as usize / 4;
    Scene::new(
        vec![point("left", Vec3::new(0.0, 1.0, 0.0), 1, len), point("right", Vec3::new(0.0, -1.0, 0.0), 2, len)],
        0.0,
    )
    .unwrap()
}

/// Scene JSON plus WAVs in `dir`; returns the JSON path.
pub fn write_scene(dir: &Path) -> PathBuf {
    let path = dir.join("scene.json");
    save_scene(&two_source_scene(), &path).unwrap();
    path
}

/// First-order mixture of [`two_source_scene`] at the origin.
pub fn write_mixture(dir: &Path) -> PathBuf {
    let scene = two_source_scene();
    let ambi = encode_scene(&scene, &ListenerPose::default(), Order::FIRST, 0..scene.max_len(), false);
    let path = dir.join("mix.wav");
    write_ambisonic(&path, &ambi).unwrap();
    path
}

/// 64x32 panorama mask over a 10x6 block and a 2 m depth map.
pub fn write_mask_and_depth(dir: &Path) -> (PathBuf, PathBuf) {
    let (w, h) = (64, 32);
    let bits = (0..w * h).map(|i| (20..30).contains(&(i % w)) && (12..18).contains(&(i / w))).collect();
    let mask = dir.join("mask.pgm");
    Mask::new(w, h, bits).unwrap().write(&mask).unwrap();
    let depth = dir.join("depth.pfm");
    Raster::filled(w, h, 1, 2.0).unwrap().write(&depth, true).unwrap();
    (mask, depth)
}
