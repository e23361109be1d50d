//! Directory-level evaluation: pair feature files with masks, segment each
//! image in parallel, and aggregate per-image scores.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SegConfig;
use crate::error::{Error, Result};
use crate::metrics::IoUBreakdown;
use crate::pipeline::{file_stem, run_image, write_outputs, SegJob};

#[derive(Clone, Debug, Serialize)]
pub struct ImageReport {
    pub stem: String,
    pub features: PathBuf,
    pub gt: PathBuf,
    pub iou: IoUBreakdown,
    pub oracle_flip_miou: f64,
    pub hard_modularity: f64,
    pub trivial_partition: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub stem: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WallClock {
    pub total_seconds: f64,
    pub mean_image_seconds: f64,
    pub max_image_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DatasetReport {
    /// Sorted by stem.
    pub images: Vec<ImageReport>,
    /// Arithmetic mean of per-image mIoU.
    pub mean_miou: f64,
    pub mean_foreground_iou: f64,
    /// Mean of the per-image best-of-both-labelings mIoU; diagnostic only.
    pub oracle_flip_mean_miou: f64,
    pub config_fingerprint: String,
    pub config: SegConfig,
    pub wall_clock: WallClock,
    /// Files without a partner, skipped.
    pub unmatched: Vec<PathBuf>,
    pub warnings: usize,
    pub failures: Vec<Failure>,
}

const GT_EXTENSIONS: [&str; 2] = ["pgm", "png"];

fn list(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Pairs `*.ufv` files with `*.pgm`/`*.png` masks by stem. Returns the pairs
/// and every file left without a partner.
pub fn pair_jobs(features_dir: &Path, gt_dir: &Path) -> Result<(Vec<(String, PathBuf, PathBuf)>, Vec<PathBuf>)> {
    let mut gts: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut unmatched = Vec::new();
    for path in list(gt_dir)?.into_iter().filter(|p| has_ext(p, &GT_EXTENSIONS)) {
        let stem = file_stem(&path);
        if gts.contains_key(&stem) {
            unmatched.push(path);
        } else {
            gts.insert(stem, path);
        }
    }
    let mut pairs = Vec::new();
    for path in list(features_dir)?.into_iter().filter(|p| has_ext(p, &["ufv"])) {
        let stem = file_stem(&path);
        match gts.remove(&stem) {
            Some(gt) => pairs.push((stem, path, gt)),
            None => unmatched.push(path),
        }
    }
    unmatched.extend(gts.into_values());
    unmatched.sort();
    Ok((pairs, unmatched))
}

/// Segments every paired image and aggregates. With `out_dir` set, masks,
/// sidecars, `report.json` and `report.csv` are written there.
pub fn evaluate_dataset(features_dir: &Path, gt_dir: &Path, cfg: &SegConfig, out_dir: Option<&Path>) -> Result<DatasetReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (pairs, unmatched) = pair_jobs(features_dir, gt_dir)?;
    if pairs.is_empty() {
        return Err(Error::NoJobs(features_dir.to_path_buf()));
    }
    for path in &unmatched {
        log::warn!("no partner for {}, skipped", path.display());
    }

    let results: Vec<(String, Result<ImageReport>)> = pairs
        .par_iter()
        .map(|(stem, features, gt)| {
            let job = SegJob {
                features: features.clone(),
                image_size: None,
                gt: Some(gt.clone()),
                config: cfg.clone(),
            };
            let run = || -> Result<ImageReport> {
                let outcome = run_image(&job)?;
                if let Some(dir) = out_dir {
                    write_outputs(&outcome, features, cfg, &dir.join("masks"))?;
                }
                Ok(ImageReport {
                    stem: stem.clone(),
                    features: features.clone(),
                    gt: gt.clone(),
                    iou: outcome.iou.expect("scored against gt"),
                    oracle_flip_miou: outcome.oracle_flip_iou.expect("scored against gt").miou,
                    hard_modularity: outcome.hard_modularity,
                    trivial_partition: outcome.mask.meta.trivial_partition,
                    seconds: outcome.timing.total_seconds,
                })
            };
            (stem.clone(), run())
        })
        .collect();

    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (stem, r) in results {
        match r {
            Ok(img) => images.push(img),
            Err(e) => {
                log::warn!("{stem}: {e}");
                failures.push(Failure {
                    stem,
                    error: e.to_string(),
                });
            }
        }
    }
    images.sort_by(|a, b| a.stem.cmp(&b.stem));
    let mean = |f: &dyn Fn(&ImageReport) -> f64| {
        if images.is_empty() {
            f64::NAN
        } else {
            images.iter().map(f).sum::<f64>() / images.len() as f64
        }
    };
    let report = DatasetReport {
        mean_miou: mean(&|i| i.iou.miou),
        mean_foreground_iou: mean(&|i| i.iou.foreground()),
        oracle_flip_mean_miou: mean(&|i| i.oracle_flip_miou),
        wall_clock: WallClock {
            total_seconds: start.elapsed().as_secs_f64(),
            mean_image_seconds: mean(&|i| i.seconds),
            max_image_seconds: images.iter().map(|i| i.seconds).fold(0.0, f64::max),
        },
        config_fingerprint: cfg.fingerprint(),
        config: cfg.clone(),
        warnings: unmatched.len() + failures.len(),
        unmatched,
        failures,
        images,
    };
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

/// One row per image: `stem,miou,iou_bg,iou_fg,oracle_flip_miou,hard_modularity,trivial,seconds`.
pub fn report_csv(report: &DatasetReport) -> String {
    let mut out = String::from("stem,miou,iou_bg,iou_fg,oracle_flip_miou,hard_modularity,trivial,seconds\n");
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for i in &report.images {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i.stem,
            i.iou.miou,
            cell(i.iou.per_class.first().copied().flatten()),
            cell(i.iou.per_class.get(1).copied().flatten()),
            i.oracle_flip_miou,
            i.hard_modularity,
            i.trivial_partition,
            i.seconds
        ));
    }
    out
}

pub fn write_report(report: &DatasetReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = dir.join("report.csv");
    fs::write(&csv_path, report_csv(report)).map_err(|e| Error::io(&csv_path, e))
}
