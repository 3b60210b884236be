//! Quantitative evaluation against binary ground truth: mean-threshold
//! binarization, precision / recall / F-measure, ROC and AUC, and dataset
//! level aggregation with CSV and JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imagekit::{load_image, load_mask};
use crate::methods::{run_method, MethodId, SaliencyConfig};
use crate::{BinaryMap, Error, Plane, Result, RgbImage, Scalar};

/// F-measure weight of precision over recall.
pub const DEFAULT_ALPHA: f64 = 0.3;

/// Number of equal steps in the ROC threshold grid.
pub const ROC_STEPS: usize = 256;

/// Ones where the value strictly exceeds the plane mean.
pub fn binarize_mean<T: Scalar>(s: &Plane<T>) -> BinaryMap {
    // float summation can push the mean of a flat plane past its value
    let mean = s.mean().max(s.min()).min(s.max());
    let w = s.width();
    BinaryMap::from_fn(s.height(), w, |y, x| s[(y, x)] > mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// `P = sum(g s) / sum(s)`, `R = sum(g s) / sum(g)`,
/// `F = (1 + alpha) P R / (alpha P + R)`.
///
/// An empty detection gives `P = R = F = 0`; `F = 0` whenever `alpha P + R = 0`.
pub fn prf(s: &BinaryMap, g: &BinaryMap, alpha: f64) -> Result<Prf> {
    if s.dims() != g.dims() {
        return Err(Error::ShapeMismatch {
            expected: g.dims(),
            found: s.dims(),
        });
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    let (mut hits, mut detected, mut truth) = (0usize, 0usize, 0usize);
    for (&sb, &gb) in s.bits().iter().zip(g.bits()) {
        hits += (sb && gb) as usize;
        detected += sb as usize;
        truth += gb as usize;
    }
    if truth == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    if detected == 0 {
        return Ok(Prf {
            precision: 0.0,
            recall: 0.0,
            f_measure: 0.0,
        });
    }
    let precision = hits as f64 / detected as f64;
    let recall = hits as f64 / truth as f64;
    let denom = alpha * precision + recall;
    let f_measure = if denom == 0.0 {
        0.0
    } else {
        (1.0 + alpha) * precision * recall / denom
    };
    Ok(Prf {
        precision,
        recall,
        f_measure,
    })
}

/// ROC samples ordered by descending threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
}

/// ROC over the fixed grid `257/256, 256/256, ..., 0/256` (a pixel counts as
/// detected when `s >= t`) and its trapezoidal area.
///
/// The leading threshold above 1 pins the curve start at `(0, 0)`; `t = 0`
/// pins the end at `(1, 1)`. The area is accumulated in integers, so it is
/// the exact trapezoid sum rounded once.
pub fn roc_auc<T: Scalar>(s: &Plane<T>, g: &BinaryMap) -> Result<(RocCurve, f64)> {
    if s.dims() != g.dims() {
        return Err(Error::ShapeMismatch {
            expected: g.dims(),
            found: s.dims(),
        });
    }
    let positives = g.count_ones();
    let negatives = g.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateGroundTruth);
    }
    // bin k collects values with k/256 <= s < (k+1)/256
    let mut pos_hist = [0u64; ROC_STEPS + 1];
    let mut neg_hist = [0u64; ROC_STEPS + 1];
    let steps = ROC_STEPS as f64;
    for (&v, &truth) in s.as_slice().iter().zip(g.bits()) {
        let scaled = (v.as_f64() * steps).floor();
        if scaled < 0.0 {
            continue; // below every threshold
        }
        let bin = (scaled as usize).min(ROC_STEPS);
        if truth {
            pos_hist[bin] += 1;
        } else {
            neg_hist[bin] += 1;
        }
    }
    let cap = ROC_STEPS + 2;
    let mut thresholds = Vec::with_capacity(cap);
    let mut tpr = Vec::with_capacity(cap);
    let mut fpr = Vec::with_capacity(cap);
    thresholds.push((ROC_STEPS + 1) as f64 / steps);
    tpr.push(0.0);
    fpr.push(0.0);
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    for k in (0..=ROC_STEPS).rev() {
        let (prev_tp, prev_fp) = (tp, fp);
        tp += pos_hist[k];
        fp += neg_hist[k];
        twice_area += (fp - prev_fp) as u128 * (tp + prev_tp) as u128;
        thresholds.push(k as f64 / steps);
        tpr.push(tp as f64 / positives as f64);
        fpr.push(fp as f64 / negatives as f64);
    }
    // scores below zero never pass; close the curve at (1, 1)
    if tp < positives as u64 || fp < negatives as u64 {
        let (prev_tp, prev_fp) = (tp, fp);
        tp = positives as u64;
        fp = negatives as u64;
        twice_area += (fp - prev_fp) as u128 * (tp + prev_tp) as u128;
        thresholds.push(f64::NEG_INFINITY);
        tpr.push(1.0);
        fpr.push(1.0);
    }
    let auc = twice_area as f64 / (2 * positives as u128 * negatives as u128) as f64;
    Ok((
        RocCurve {
            thresholds,
            tpr,
            fpr,
        },
        auc,
    ))
}

/// One image / ground-truth pair of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPair {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "bmp", "ppm", "pgm", "pnm"];

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Pairs every image in `images_dir` with the equally named file (same
/// stem, any supported extension) in `masks_dir`, sorted by image path.
/// Images without a mask are still listed, pointing at the expected mask
/// path, so evaluation records them as skipped.
pub fn discover_pairs(
    images_dir: impl AsRef<Path>,
    masks_dir: impl AsRef<Path>,
) -> Result<Vec<DatasetPair>> {
    let images_dir = images_dir.as_ref();
    let masks_dir = masks_dir.as_ref();
    for dir in [images_dir, masks_dir] {
        if !dir.is_dir() {
            return Err(Error::MissingFile(dir.to_path_buf()));
        }
    }
    let list = |dir: &Path| -> Result<Vec<PathBuf>> {
        let mut out: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::IoFailure {
                path: dir.to_path_buf(),
                reason: e.to_string(),
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && has_image_extension(p))
            .collect();
        out.sort();
        Ok(out)
    };
    let masks = list(masks_dir)?;
    let pairs = list(images_dir)?
        .into_iter()
        .map(|image| {
            let stem = image
                .file_stem()
                .map(|s| s.to_os_string())
                .unwrap_or_default();
            let same_name = masks_dir.join(image.file_name().expect("listed files have names"));
            let mask = if same_name.exists() {
                same_name
            } else {
                masks
                    .iter()
                    .find(|m| m.file_stem() == Some(stem.as_os_str()))
                    .cloned()
                    .unwrap_or(same_name)
            };
            DatasetPair {
                id: stem.to_string_lossy().into_owned(),
                image,
                mask,
            }
        })
        .collect();
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub alpha: f64,
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkippedPair>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f_measure: f64,
    pub mean_auc: f64,
    /// Snapshot of the parameters that produced the maps.
    pub params: serde_json::Value,
}

impl EvalReport {
    pub fn warnings(&self) -> usize {
        self.skipped.len()
    }

    /// One row per image plus a `MEAN` summary row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let fail = |e: csv::Error| Error::Report(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(fail)?;
        w.write_record(["image", "precision", "recall", "f_measure", "auc"])
            .map_err(fail)?;
        let row = |id: &str, p: f64, r: f64, f: f64, a: f64| {
            [
                id.to_string(),
                fmt_metric(p),
                fmt_metric(r),
                fmt_metric(f),
                fmt_metric(a),
            ]
        };
        for rec in &self.records {
            w.write_record(row(
                &rec.id,
                rec.precision,
                rec.recall,
                rec.f_measure,
                rec.auc,
            ))
            .map_err(fail)?;
        }
        w.write_record(row(
            "MEAN",
            self.mean_precision,
            self.mean_recall,
            self.mean_f_measure,
            self.mean_auc,
        ))
        .map_err(fail)?;
        w.flush()
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::IoFailure {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

// shortest representation that parses back to the same f64
fn fmt_metric(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub alpha: f64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            threads: 0,
        }
    }
}

/// Metrics of one saliency map against its ground truth.
pub fn evaluate_map<T: Scalar>(
    id: &str,
    saliency: &Plane<T>,
    truth: &BinaryMap,
    alpha: f64,
) -> Result<EvalRecord> {
    if saliency.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            image: saliency.dims(),
            mask: truth.dims(),
        });
    }
    let detection = binarize_mean(saliency);
    let m = prf(&detection, truth, alpha)?;
    let (_, auc) = roc_auc(saliency, truth)?;
    Ok(EvalRecord {
        id: id.to_string(),
        precision: m.precision,
        recall: m.recall,
        f_measure: m.f_measure,
        auc,
    })
}

fn evaluate_pair<T, F>(pair: &DatasetPair, method: &F, alpha: f64) -> Result<EvalRecord>
where
    T: Scalar,
    F: Fn(&RgbImage<T>) -> Result<Plane<T>> + Sync,
{
    let img: RgbImage<T> = load_image(&pair.image)?;
    let truth = load_mask(&pair.mask)?;
    if img.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            image: img.dims(),
            mask: truth.dims(),
        });
    }
    let saliency = method(&img)?;
    evaluate_map(&pair.id, &saliency, &truth, alpha)
}

/// Evaluates an arbitrary saliency function over a dataset.
///
/// Pairs are processed in path order (in parallel when `threads != 1`).
/// Failing pairs are recorded in `skipped` with a warning; the run fails
/// only when no pair could be evaluated.
pub fn evaluate_with<T, F>(
    pairs: &[DatasetPair],
    method_name: &str,
    method: F,
    params: serde_json::Value,
    opts: &EvalOptions,
) -> Result<EvalReport>
where
    T: Scalar,
    F: Fn(&RgbImage<T>) -> Result<Plane<T>> + Sync,
{
    if pairs.is_empty() {
        return Err(Error::NoValidPairs);
    }
    let mut ordered = pairs.to_vec();
    ordered.sort_by(|a, b| a.image.cmp(&b.image));
    let run = || -> Vec<Result<EvalRecord>> {
        ordered
            .par_iter()
            .map(|pair| evaluate_pair(pair, &method, opts.alpha))
            .collect()
    };
    let outcomes = if opts.threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
            .install(run)
    };
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (pair, outcome) in ordered.iter().zip(outcomes) {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => {
                warn!("skipping {}: {e}", pair.id);
                skipped.push(SkippedPair {
                    id: pair.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::NoValidPairs);
    }
    let n = records.len() as f64;
    let mean = |f: fn(&EvalRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Ok(EvalReport {
        method: method_name.to_string(),
        alpha: opts.alpha,
        mean_precision: mean(|r| r.precision),
        mean_recall: mean(|r| r.recall),
        mean_f_measure: mean(|r| r.f_measure),
        mean_auc: mean(|r| r.auc),
        records,
        skipped,
        params,
    })
}

/// Evaluates one of the built-in methods over a dataset.
pub fn evaluate_dataset<T: Scalar + Serialize>(
    pairs: &[DatasetPair],
    method: MethodId,
    cfg: &SaliencyConfig<T>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    cfg.validate()?;
    let params = serde_json::to_value(cfg).map_err(|e| Error::Report(e.to_string()))?;
    evaluate_with(
        pairs,
        method.name(),
        |img| run_method(method, img, cfg),
        params,
        opts,
    )
}
