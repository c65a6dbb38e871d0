//! Helpers shared by the integration tests: locating the binary and the
//! bundled demo inputs, and running subcommands with captured output.

// Each test target compiles this module separately and uses its own subset.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_geoseg")
}

pub fn demo_csv() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../demo/points.csv")
}

pub fn demo_model() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../demo/gp_model.json")
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn geoseg")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "geoseg {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}
