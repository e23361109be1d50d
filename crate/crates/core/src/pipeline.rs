//! Per-image segmentation: features → graph → trained clustering → mask.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::arma::{ArmaModel, ClusterAssignment};
use crate::config::SegConfig;
use crate::error::{Error, Result};
use crate::graph::{build_adjacency, modularity_matrix, FeatureMatrix};
use crate::io::{pgm, ufv};
use crate::mask::{ForegroundRule, SegMask};
use crate::metrics::{iou, IoUBreakdown};
use crate::objective::{hard_modularity, LossReport};
use crate::optim::train;

/// One image to segment.
#[derive(Clone, Debug)]
pub struct SegJob {
    pub features: PathBuf,
    /// Original image size as `(height, width)`. When absent it is taken
    /// from the ground-truth mask, or else from `grid × patch`.
    pub image_size: Option<(usize, usize)>,
    pub gt: Option<PathBuf>,
    pub config: SegConfig,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub graph_seconds: f64,
    pub train_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SegOutcome {
    pub mask: SegMask,
    pub history: Vec<LossReport>,
    /// Node-level argmax labels before foreground selection.
    pub labels: Vec<usize>,
    pub assignment: ClusterAssignment,
    pub hard_modularity: f64,
    pub edge_count: f64,
    pub timing: Timing,
    pub iou: Option<IoUBreakdown>,
    /// Best of the two foreground assignments; diagnostic only.
    pub oracle_flip_iou: Option<IoUBreakdown>,
}

/// Paints node labels (0/1) onto an `(height, width)` image.
///
/// When the image is an exact multiple of the patch size each label fills
/// its `p × p` block; otherwise every pixel takes the label of the nearest
/// patch center of the grid stretched over the image.
pub fn assemble_mask(labels: &[u8], grid: (usize, usize), size: (usize, usize), patch: usize) -> Result<SegMask> {
    let (g_h, g_w) = grid;
    let (height, width) = size;
    if labels.len() != g_h * g_w {
        return Err(Error::Shape {
            op: "assemble_mask",
            left: grid,
            right: (labels.len(), 1),
        });
    }
    if g_h == 0 || g_w == 0 || patch == 0 {
        return Err(Error::Contract("empty patch grid".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Contract("mask labels must be 0 or 1".into()));
    }
    let exact = height == g_h * patch && width == g_w * patch;
    let row_of = |y: usize| {
        if exact {
            y / patch
        } else {
            (((2 * y + 1) * g_h) / (2 * height)).min(g_h - 1)
        }
    };
    let col_of = |x: usize| {
        if exact {
            x / patch
        } else {
            (((2 * x + 1) * g_w) / (2 * width)).min(g_w - 1)
        }
    };
    let cols: Vec<usize> = (0..width).map(col_of).collect();
    let mut bits = Vec::with_capacity(height * width);
    for y in 0..height {
        let r = row_of(y);
        bits.extend(cols.iter().map(|&c| labels[r * g_w + c]));
    }
    SegMask::new(width, height, bits)
}

/// Chooses which of two clusters is the object.
///
/// The cluster holding fewer border patches wins; on a tie the cluster with
/// fewer nodes; on a second tie cluster 1.
pub fn select_foreground(labels: &[usize], grid: (usize, usize)) -> Result<(usize, ForegroundRule)> {
    let (g_h, g_w) = grid;
    if labels.len() != g_h * g_w {
        return Err(Error::Shape {
            op: "select_foreground",
            left: grid,
            right: (labels.len(), 1),
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Contract("foreground selection needs k = 2".into()));
    }
    let mut border = [0usize; 2];
    let mut size = [0usize; 2];
    for r in 0..g_h {
        for c in 0..g_w {
            let l = labels[r * g_w + c];
            size[l] += 1;
            if r == 0 || c == 0 || r + 1 == g_h || c + 1 == g_w {
                border[l] += 1;
            }
        }
    }
    Ok(if border[0] != border[1] {
        (usize::from(border[1] < border[0]), ForegroundRule::Border)
    } else if size[0] != size[1] {
        (usize::from(size[1] < size[0]), ForegroundRule::Size)
    } else {
        (1, ForegroundRule::Default)
    })
}

/// One pass of a 3×3 majority filter. Windows are clipped at the image
/// border; a pixel whose window is exactly split keeps its value.
pub fn refine_mask(mask: &SegMask) -> SegMask {
    let (w, h) = (mask.width(), mask.height());
    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (mut on, mut total) = (0usize, 0usize);
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    total += 1;
                    on += usize::from(mask.get(yy, xx));
                }
            }
            let bit = match (2 * on).cmp(&total) {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => 0,
                std::cmp::Ordering::Equal => u8::from(mask.get(y, x)),
            };
            bits.push(bit);
        }
    }
    let mut out = SegMask::new(w, h, bits).expect("same dimensions");
    out.meta = mask.meta.clone();
    out.meta.refined = true;
    out
}

/// Bilinear upsampling of per-patch foreground probability, thresholded at 0.5.
fn soft_mask(prob: &[f64], grid: (usize, usize), size: (usize, usize)) -> SegMask {
    let (g_h, g_w) = grid;
    let (height, width) = size;
    let coord = |p: usize, len: usize, cells: usize| {
        let u = ((p as f64 + 0.5) * cells as f64 / len as f64 - 0.5).clamp(0.0, (cells - 1) as f64);
        let lo = u.floor() as usize;
        let hi = (lo + 1).min(cells - 1);
        (lo, hi, u - lo as f64)
    };
    let mut bits = Vec::with_capacity(height * width);
    for y in 0..height {
        let (r0, r1, fy) = coord(y, height, g_h);
        for x in 0..width {
            let (c0, c1, fx) = coord(x, width, g_w);
            let at = |r: usize, c: usize| prob[r * g_w + c];
            let top = at(r0, c0) * (1.0 - fx) + at(r0, c1) * fx;
            let bottom = at(r1, c0) * (1.0 - fx) + at(r1, c1) * fx;
            bits.push(u8::from(top * (1.0 - fy) + bottom * fy > 0.5));
        }
    }
    SegMask::new(width, height, bits).expect("sized by construction")
}

/// Segments in-memory features for an image of `(height, width)` pixels.
pub fn segment_features(features: &FeatureMatrix, size: (usize, usize), cfg: &SegConfig) -> Result<SegOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let normalized = features.row_normalize()?;
    let graph = build_adjacency(&normalized, cfg.tau, cfg.allow_self_loops)?;
    let b = modularity_matrix(&graph)?;
    let graph_seconds = start.elapsed().as_secs_f64();

    let t_train = Instant::now();
    let model = ArmaModel::init(&cfg.arma, features.c_in(), cfg.k, cfg.optim.seed)?;
    let x = normalized.values();
    let trained = train(model, &graph, &b, x, &cfg.optim)?;
    let train_seconds = t_train.elapsed().as_secs_f64();

    let labels = trained.assignment.hard_labels();
    let q = hard_modularity(&graph, &labels)?;
    let trivial = labels.iter().all(|&l| l == labels[0]);
    let (fg, rule) = select_foreground(&labels, features.grid())?;

    let mut mask = if cfg.soft_upsample {
        let prob: Vec<f64> = (0..labels.len())
            .map(|i| trained.assignment.matrix().get(i, fg))
            .collect();
        soft_mask(&prob, features.grid(), size)
    } else {
        let binary: Vec<u8> = labels.iter().map(|&l| u8::from(l == fg)).collect();
        assemble_mask(&binary, features.grid(), size, cfg.patch)?
    };
    mask.meta.tau = Some(cfg.tau);
    mask.meta.seed = Some(cfg.optim.seed);
    mask.meta.epochs = Some(cfg.optim.epochs);
    mask.meta.activation = Some(cfg.arma.activation.to_string());
    mask.meta.foreground_rule = Some(rule);
    mask.meta.foreground_label = Some(fg);
    mask.meta.trivial_partition = trivial;
    if cfg.refine {
        mask = refine_mask(&mask);
    }

    Ok(SegOutcome {
        mask,
        history: trained.history,
        labels,
        assignment: trained.assignment,
        hard_modularity: q,
        edge_count: graph.edge_count(),
        timing: Timing {
            graph_seconds,
            train_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
        iou: None,
        oracle_flip_iou: None,
    })
}

/// Scores `outcome` against a ground-truth mask, filling both IoU fields.
pub fn score(outcome: &mut SegOutcome, gt: &SegMask) -> Result<()> {
    let direct = iou(&outcome.mask, gt, 2)?;
    let flipped = iou(&outcome.mask.complement(), gt, 2)?;
    outcome.oracle_flip_iou = Some(if flipped.miou > direct.miou { flipped } else { direct.clone() });
    outcome.iou = Some(direct);
    Ok(())
}

/// Runs the whole flow for one feature file.
pub fn run_image(job: &SegJob) -> Result<SegOutcome> {
    let start = Instant::now();
    let features = ufv::read(&job.features)?;
    let gt = job.gt.as_deref().map(pgm::read_mask).transpose()?;
    let (g_h, g_w) = features.grid();
    let p = job.config.patch;
    let size = job
        .image_size
        .or_else(|| gt.as_ref().map(|m| (m.height(), m.width())))
        .unwrap_or((g_h * p, g_w * p));
    if size.0 % p == 0 && size.1 % p == 0 && (size.0 / p, size.1 / p) != (g_h, g_w) {
        return Err(Error::format(
            &job.features,
            format!(
                "patch grid {g_h}x{g_w} does not match image {}x{} at patch size {p}",
                size.0, size.1
            ),
        ));
    }
    let mut outcome = segment_features(&features, size, &job.config).map_err(|e| match e {
        Error::DegenerateGraph { .. } | Error::DegenerateInput(_) => {
            Error::format(&job.features, e.to_string())
        }
        other => other,
    })?;
    if let Some(gt) = &gt {
        score(&mut outcome, gt)?;
    }
    outcome.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// `epoch,total,modularity_term,regularizer` rows.
pub fn loss_csv(history: &[LossReport]) -> String {
    let mut out = String::from("epoch,total,modularity_term,regularizer\n");
    for r in history {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.total, r.modularity_term, r.regularizer));
    }
    out
}

#[derive(Serialize)]
struct LossSummary {
    epochs: usize,
    first: Option<LossReport>,
    last: Option<LossReport>,
    min_total: Option<f64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    features: String,
    config: &'a SegConfig,
    width: usize,
    height: usize,
    meta: &'a crate::mask::MaskMeta,
    hard_modularity: f64,
    edge_count: f64,
    loss: LossSummary,
    iou: Option<&'a IoUBreakdown>,
    oracle_flip_iou_diagnostic: Option<&'a IoUBreakdown>,
    timing: &'a Timing,
}

/// Writes `<stem>.mask.pgm`, `<stem>.json`, and with `losscurve` set
/// `<stem>.loss.csv` into `out_dir`. Returns the mask path.
pub fn write_outputs(outcome: &SegOutcome, features: &Path, cfg: &SegConfig, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let stem = file_stem(features);
    let mask_path = out_dir.join(format!("{stem}.mask.pgm"));
    pgm::write_mask(&mask_path, &outcome.mask)?;
    if cfg.losscurve {
        let csv_path = out_dir.join(format!("{stem}.loss.csv"));
        fs::write(&csv_path, loss_csv(&outcome.history)).map_err(|e| Error::io(&csv_path, e))?;
    }
    let sidecar = Sidecar {
        features: features.display().to_string(),
        config: cfg,
        width: outcome.mask.width(),
        height: outcome.mask.height(),
        meta: &outcome.mask.meta,
        hard_modularity: outcome.hard_modularity,
        edge_count: outcome.edge_count,
        loss: LossSummary {
            epochs: outcome.history.len(),
            first: outcome.history.first().copied(),
            last: outcome.history.last().copied(),
            min_total: outcome.history.iter().map(|r| r.total).reduce(f64::min),
        },
        iou: outcome.iou.as_ref(),
        oracle_flip_iou_diagnostic: outcome.oracle_flip_iou.as_ref(),
        timing: &outcome.timing,
    };
    let json_path = out_dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    Ok(mask_path)
}

/// File name up to the first `.`.
pub fn file_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}
