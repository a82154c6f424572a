#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use cp_dilatation::dataset::io::save_pair;
use cp_dilatation::dataset::synthetic::toy_corpus;
use serde_json::Value;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub const TOY_SEED: u64 = 2024;
pub const TOY_PATIENTS: usize = 8;
pub const TOY_SLIDE: (usize, usize) = (256, 128);
pub const TOY_PATCH: &str = "128";
pub const TOY_RESIZE: &str = "64";
pub const TOY_SPLIT_SEED: &str = "42";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Runs the CLI in-process and returns its exit status and JSON records.
pub fn cpd(args: &[&str]) -> (i32, Vec<Value>) {
    let mut out = Vec::new();
    let argv = std::iter::once("cpd").chain(args.iter().copied());
    let status = cp_dilatation::cli::run(argv, &mut out);
    let records = String::from_utf8(out)
        .expect("utf-8 output")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad record {l:?}: {e}")))
        .collect();
    (status, records)
}

pub fn record<'a>(records: &'a [Value], kind: &str) -> &'a Value {
    records
        .iter()
        .find(|r| r["record"] == kind)
        .unwrap_or_else(|| panic!("no `{kind}` record in {records:?}"))
}

/// Hash over relative paths and bytes of every file below `root`.
pub fn tree_hash(root: &Path) -> String {
    let mut h = Sha256::new();
    for e in WalkDir::new(root).sort_by_file_name() {
        let e = e.unwrap();
        if e.file_type().is_file() {
            let rel = e.path().strip_prefix(root).unwrap();
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fs::read(e.path()).unwrap());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_toy_slides(dir: &Path) {
    let (w, h) = TOY_SLIDE;
    for slide in toy_corpus(TOY_PATIENTS, 1, w, h, TOY_SEED) {
        save_pair(&slide, dir).unwrap();
    }
}

/// patchify + split of a slide tree into the 16-pair toy dataset layout.
pub fn prepare_toy_dataset(slides: &Path, out: &Path, workers: &str) {
    let (status, recs) = cpd(&[
        "--workers", workers, "patchify", "--input", path(slides), "--output", path(out),
        "--patch-size", TOY_PATCH, "--resize", TOY_RESIZE,
    ]);
    assert_eq!(status, 0, "{recs:?}");
    let (status, recs) = cpd(&["--seed", TOY_SPLIT_SEED, "--workers", workers, "split", "--root", path(out)]);
    assert_eq!(status, 0, "{recs:?}");
}
