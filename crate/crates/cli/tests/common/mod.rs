#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hoaseg::labels::{write_landmarks, LandmarkSet};
use hoaseg::phantom::{generate_phantom, Phantom, PhantomSpec};
use hoaseg::volume::write_volume;

pub fn hoaseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoaseg"))
        .args(args)
        .env_remove("HOA_REFINE_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn phantom(seed: u64) -> Phantom {
    generate_phantom(&PhantomSpec {
        seed,
        ..PhantomSpec::default()
    })
    .expect("phantom generates")
}

/// Writes `<name>.nii.gz` and `<name>.json`, returning both paths.
pub fn write_phantom(dir: &Path, name: &str, p: &Phantom) -> (PathBuf, PathBuf) {
    let vol = dir.join(format!("{name}.nii.gz"));
    let lm = dir.join(format!("{name}.json"));
    write_volume(&p.labels, &vol).unwrap();
    write_landmarks(&p.landmarks, &lm).unwrap();
    (vol, lm)
}

pub fn write_lm(dir: &Path, name: &str, lm: &LandmarkSet) -> PathBuf {
    let path = dir.join(name);
    write_landmarks(lm, &path).unwrap();
    path
}
