#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bubbletrack::corpus::Category;
use bubbletrack::fixtures::{self, disk, Instance};
use bubbletrack::{Calibration, Dataset};

pub fn cal() -> Calibration {
    Calibration::new(100.0, 3000.0).unwrap()
}

pub fn write_dataset(path: &Path, ds: &Dataset) {
    std::fs::write(path, serde_json::to_string(&ds.to_document()).unwrap()).unwrap();
}

pub fn bubbletrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bubbletrack")).args(args).output().unwrap()
}

/// Runs a subcommand on `input` into `out`, with extra flags.
pub fn run(cmd: &str, input: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--input", input.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bubbletrack(&args)
}

/// Every file under `dir` (relative path to bytes), optionally skipping
/// the run manifest.
pub fn snapshot(dir: &Path, skip_manifest: bool) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !(skip_manifest && p.file_name().unwrap() == "manifest.json") {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// A bubble that grows while attached, then detaches at frame `detach_at`
/// and rises; plus a second bubble that stays attached.
pub fn growth_departure(detach_at: usize, n: usize) -> Dataset {
    let frames = (0..n)
        .map(|f| {
            let r = 6.0 + 0.5 * f.min(detach_at) as f64;
            let cy = if f < detach_at { 70.0 - r } else { 70.0 - r - 1.5 * (f - detach_at) as f64 };
            let class = if f < detach_at { Category::Attached } else { Category::Detached };
            vec![
                Instance { score: 0.95, ..Instance::new(disk(120, 80, 35.0, cy, r), class) },
                Instance { score: 0.9, ..Instance::new(disk(120, 80, 90.0, 62.0, 8.0), Category::Attached) },
            ]
        })
        .collect();
    fixtures::dataset(cal(), 120, 80, frames)
}

/// Disk of radius `r0 + rate * f` centred in a 160 x 160 frame.
pub fn dilating(r0: f64, rate: f64, n: u64) -> Dataset {
    let frames = (0..n)
        .map(|f| vec![Instance::new(disk(160, 160, 80.0, 80.0, r0 + rate * f as f64), Category::Attached)])
        .collect();
    fixtures::dataset(cal(), 160, 160, frames)
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}
