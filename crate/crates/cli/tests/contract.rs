mod common;

use std::ffi::OsString;

use ambiscape_cli::{run_with_stderr, EXIT_DOMAIN, EXIT_OK, EXIT_USAGE};
use common::{run_bin, s, write_scene};
use proptest::prelude::*;

/// Exit code with diagnostics captured rather than printed.
fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    run_with_stderr(args, &mut Vec::new())
}

const SUBCOMMANDS: [&str; 10] = [
    "render",
    "walk",
    "serve",
    "metrics",
    "warp-pano",
    "vote-masks",
    "ground",
    "fit-acoustics",
    "separate",
    "energy-map",
];

#[test]
fn process_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let out = dir.path().join("o.wav");
    assert_eq!(run_bin(&["render", "--scene", s(&scene), "--out", s(&out)]).status.code(), Some(EXIT_OK));
    let unknown = run_bin(&["render", "--scene", s(&scene), "--out", s(&out), "--bogus"]);
    assert_eq!(unknown.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&unknown.stderr).to_lowercase().contains("usage"));
    let missing = run_bin(&["render", "--scene", "/nonexistent/scene.json", "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(EXIT_DOMAIN));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
}

#[test]
fn every_subcommand_has_help() {
    for cmd in SUBCOMMANDS {
        let out = run_bin(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(EXIT_OK), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--"), "{cmd}");
    }
    assert_eq!(run_bin(&["--version"]).status.code(), Some(EXIT_OK));
}

#[test]
fn malformed_flag_values_are_usage_errors() {
    let cases: &[&[&str]] = &[
        &["render", "--scene", "s.json", "--out", "o.wav", "--order", "9"],
        &["render", "--scene", "s.json", "--out", "o.wav", "--pose", "1,2"],
        &["render", "--scene", "s.json", "--out", "o.wav", "--pose", "0,0,0,spin"],
        &["render", "--scene", "s.json"],
        &["metrics", "--pred", "a.wav", "--ref", "b.wav", "--out", "r.csv", "--grid", "64"],
        &["fit-acoustics", "--source", "a.wav", "--target", "b.wav", "--params-out", "p.json"],
        &["fit-acoustics", "--source", "a", "--target", "b", "--paths", "p", "--room", "r", "--params-out", "p.json"],
        &["fit-acoustics", "--source", "a", "--target", "b", "--paths", "p", "--params-out", "o", "--freeze", "gamma"],
        &["ground", "--mask", "m.pgm", "--depth", "d.pfm", "--out", "a.swpc", "--source-type", "background"],
        &["serve", "--scene", "s.json", "--port", "70000"],
        &["render", "--seed", "-1", "--scene", "s.json", "--out", "o.wav"],
        &["teleport"],
    ];
    for args in cases {
        let argv = std::iter::once("ambiscape").chain(args.iter().copied());
        assert_eq!(run(argv), EXIT_USAGE, "{args:?}");
    }
}

#[test]
fn domain_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    std::fs::write(p("bad.json"), "{ not json").unwrap();
    std::fs::write(p("empty.json"), r#"{"sources": []}"#).unwrap();
    std::fs::write(p("bad.wav"), b"RIFF....WAVE").unwrap();
    let scene = write_scene(dir.path());
    let cases: Vec<Vec<String>> = vec![
        vec!["render".into(), "--scene".into(), s(&p("bad.json")).into(), "--out".into(), s(&p("o.wav")).into()],
        vec!["render".into(), "--scene".into(), s(&p("empty.json")).into(), "--out".into(), s(&p("o.wav")).into()],
        vec!["render".into(), "--scene".into(), s(&scene).into(), "--out".into(), s(&p("o.wav")).into(), "--duration".into(), "-1".into()],
        vec!["energy-map".into(), "--input".into(), s(&p("bad.wav")).into(), "--out".into(), s(&p("e.csv")).into()],
        vec!["walk".into(), "--scene".into(), s(&scene).into(), "--trajectory".into(), s(&p("bad.json")).into(), "--out".into(), s(&p("w.wav")).into()],
        vec!["render".into(), "--scene".into(), s(&scene).into(), "--out".into(), s(&p("missing/dir/o.wav")).into()],
    ];
    for args in cases {
        let argv = std::iter::once("ambiscape".to_string()).chain(args.iter().cloned());
        assert_eq!(run(argv), EXIT_DOMAIN, "{args:?}");
    }
    assert!(!p("o.wav").exists());
}

#[test]
fn failed_write_leaves_no_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let out = dir.path().join("o.wav");
    std::fs::create_dir(&out).unwrap();
    assert_eq!(run(["ambiscape", "render", "--scene", s(&scene), "--out", s(&out)]), EXIT_DOMAIN);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unknown_flags_exit_two(cmd in 0usize..SUBCOMMANDS.len(), flag in "[a-z]{3,12}") {
        prop_assume!(!["help", "version", "seed", "config"].contains(&flag.as_str()));
        let bogus = format!("--zz{flag}");
        prop_assert_eq!(run(["ambiscape", SUBCOMMANDS[cmd], bogus.as_str()]), EXIT_USAGE);
    }

    #[test]
    fn garbage_scene_files_exit_one(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("scene.json");
        std::fs::write(&scene, &bytes).unwrap();
        let out = dir.path().join("o.wav");
        prop_assert_eq!(run(["ambiscape", "render", "--scene", s(&scene), "--out", s(&out)]), EXIT_DOMAIN);
        prop_assert!(!out.exists());
    }

    #[test]
    fn garbage_poses_exit_two(pose in "[0-9a-z,.=-]{0,20}") {
        prop_assume!(pose_is_invalid(&pose));
        prop_assert_eq!(run(["ambiscape", "render", "--scene", "s.json", "--out", "o.wav", "--pose", pose.as_str()]), EXIT_USAGE);
    }
}

/// Rough pre-filter so the property only feeds strings the parser must reject.
fn pose_is_invalid(pose: &str) -> bool {
    let parts: Vec<&str> = pose.split(',').collect();
    parts.len() < 3 || parts[..3].iter().any(|p| p.trim().parse::<f64>().map_or(true, |v| !v.is_finite()))
}
