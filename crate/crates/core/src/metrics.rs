//! Segmentation and clustering scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::SegMask;

/// Per-class confusion counts and intersection-over-union.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoUBreakdown {
    /// `TP/(TP+FP+FN)` per class; `None` when the class is absent from both
    /// prediction and ground truth.
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes that are present.
    pub miou: f64,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl IoUBreakdown {
    /// IoU of class 1 (foreground for binary masks), 0 when absent.
    pub fn foreground(&self) -> f64 {
        self.per_class.get(1).copied().flatten().unwrap_or(0.0)
    }
}

/// Pixel-exact confusion counts over label maps with values `< n_classes`.
pub fn iou_labels(pred: &[u8], gt: &[u8], n_classes: usize) -> Result<IoUBreakdown> {
    if pred.len() != gt.len() {
        return Err(Error::Shape {
            op: "iou",
            left: (pred.len(), 1),
            right: (gt.len(), 1),
        });
    }
    let mut tp = vec![0u64; n_classes];
    let mut fp = vec![0u64; n_classes];
    let mut fn_ = vec![0u64; n_classes];
    for (&p, &g) in pred.iter().zip(gt) {
        let (p, g) = (p as usize, g as usize);
        if p >= n_classes || g >= n_classes {
            return Err(Error::Contract(format!("label outside 0..{n_classes}")));
        }
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let denom = tp[c] + fp[c] + fn_[c];
            (denom > 0).then(|| tp[c] as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Contract("iou of empty label maps".into()));
    }
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    Ok(IoUBreakdown {
        per_class,
        miou,
        tp,
        fp,
        fn_,
    })
}

/// IoU between two masks of identical size. Binary masks use
/// `n_classes = 2` (0 background, 1 foreground).
pub fn iou(pred: &SegMask, gt: &SegMask, n_classes: usize) -> Result<IoUBreakdown> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::Shape {
            op: "iou",
            left: (pred.height(), pred.width()),
            right: (gt.height(), gt.width()),
        });
    }
    iou_labels(pred.bits(), gt.bits(), n_classes)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "adjusted_rand_index",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |v: u64| (v * v.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&v| pairs(v)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max_index = 0.5 * (rows + cols);
    if max_index == expected {
        // both labelings are a single cluster, or both are all singletons
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}
