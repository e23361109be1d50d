//! Synthetic benchmarks with known answers.
//!
//! `blob` draws a patch-feature grid with a centered square object;
//! `sbm` draws a planted-partition graph with noisy block-indicator features.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, PatchGraph};
use crate::io::{pgm, ufv};
use crate::mask::SegMask;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct BlobParams {
    pub grid: (usize, usize),
    pub patch: usize,
    pub c_in: usize,
    /// Angle between the two prototype directions, in degrees.
    pub theta_deg: f64,
    /// Per-coordinate noise standard deviation.
    pub sigma: f64,
    /// Object side as a fraction of each grid side. The default covers half
    /// the image so the true split is balanced.
    pub object_fraction: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            grid: (28, 28),
            patch: 8,
            c_in: 32,
            theta_deg: 60.0,
            sigma: 0.15,
            object_fraction: std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

impl BlobParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid.0 < 3 || self.grid.1 < 3 {
            return Err(Error::Config("blob grid needs at least 3x3 patches".into()));
        }
        if self.patch == 0 {
            return Err(Error::Config("patch must be at least 1".into()));
        }
        if self.c_in < 2 {
            return Err(Error::Config("blob features need c_in >= 2".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.theta_deg > 0.0 && self.theta_deg <= 180.0) {
            return Err(Error::Config(format!("theta must lie in (0, 180], got {}", self.theta_deg)));
        }
        if !(self.object_fraction > 0.0 && self.object_fraction < 1.0) {
            return Err(Error::Config("object fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Half-open patch ranges `(rows, cols)` covered by the object.
    pub fn object_extent(&self) -> ((usize, usize), (usize, usize)) {
        let span = |len: usize| {
            let side = ((len as f64 * self.object_fraction).round() as usize).clamp(1, len - 2);
            let start = (len - side) / 2;
            (start, start + side)
        };
        (span(self.grid.0), span(self.grid.1))
    }
}

#[derive(Clone, Debug)]
pub struct Blob {
    pub features: FeatureMatrix,
    /// Per-patch truth, 1 on the object.
    pub patch_labels: Vec<u8>,
    /// Pixel-resolution truth at `grid × patch`.
    pub mask: SegMask,
}

pub fn generate_blob(params: &BlobParams, seed: u64) -> Result<Blob> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let (g_h, g_w) = params.grid;
    let ((r0, r1), (c0, c1)) = params.object_extent();
    let theta = params.theta_deg.to_radians();
    let (cos, sin) = (theta.cos(), theta.sin());

    let mut labels = Vec::with_capacity(g_h * g_w);
    let mut values = Tensor::zeros(g_h * g_w, params.c_in);
    for r in 0..g_h {
        for c in 0..g_w {
            let inside = (r0..r1).contains(&r) && (c0..c1).contains(&c);
            let i = r * g_w + c;
            labels.push(u8::from(inside));
            let row = values.row_mut(i);
            if inside {
                row[0] = cos;
                row[1] = sin;
            } else {
                row[0] = 1.0;
            }
            for v in row.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }
    let features = FeatureMatrix::new(values, params.grid)?;
    let p = params.patch;
    let mut bits = Vec::with_capacity(g_h * p * g_w * p);
    for y in 0..g_h * p {
        bits.extend((0..g_w * p).map(|x| labels[(y / p) * g_w + x / p]));
    }
    let mask = SegMask::new(g_w * p, g_h * p, bits)?;
    Ok(Blob {
        features,
        patch_labels: labels,
        mask,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SbmParams {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    /// Noise added to the one-hot block indicators.
    pub feature_noise: f64,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            blocks: vec![20, 20],
            p_in: 0.9,
            p_out: 0.05,
            feature_noise: 0.1,
        }
    }
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.len() < 2 || self.blocks.iter().any(|&b| b < 2) {
            return Err(Error::Config("sbm needs at least two blocks of size >= 2".into()));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be >= 0, got {}",
                self.feature_noise
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Sbm {
    pub graph: PatchGraph,
    /// `n × blocks` noisy indicator rows.
    pub features: Tensor,
    pub labels: Vec<usize>,
}

pub fn generate_sbm(params: &SbmParams, seed: u64) -> Result<Sbm> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = params
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = labels.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { params.p_in } else { params.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = PatchGraph::from_edges(n, &edges)?;
    let noise = Normal::new(0.0, params.feature_noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut features = Tensor::zeros(n, params.blocks.len());
    for (i, &l) in labels.iter().enumerate() {
        let row = features.row_mut(i);
        row[l] = 1.0;
        for v in row.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(Sbm {
        graph,
        features,
        labels,
    })
}

/// Writes `<stem>.ufv` under `out/features/` and the truth mask as
/// `<stem>.pgm` under `out/gt/`. Returns both paths.
pub fn write_blob(blob: &Blob, out: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let fdir = out.join("features");
    let gdir = out.join("gt");
    for d in [&fdir, &gdir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let fpath = fdir.join(format!("{stem}.ufv"));
    let gpath = gdir.join(format!("{stem}.pgm"));
    ufv::write(&fpath, &blob.features)?;
    pgm::write_mask(&gpath, &blob.mask)?;
    Ok((fpath, gpath))
}

/// Writes `<stem>.ufv` (indicator features, 1×n grid), `<stem>.edges`
/// (`i j` per line, `i < j`) and `<stem>.labels` (one block id per line).
pub fn write_sbm(sbm: &Sbm, out: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let n = sbm.graph.n();
    let features = FeatureMatrix::new(sbm.features.clone(), (1, n))?;
    let fpath = out.join(format!("{stem}.ufv"));
    ufv::write(&fpath, &features)?;
    let epath = out.join(format!("{stem}.edges"));
    let edges: String = sbm.graph.edges().iter().map(|(i, j)| format!("{i} {j}\n")).collect();
    fs::write(&epath, edges).map_err(|e| Error::io(&epath, e))?;
    let lpath = out.join(format!("{stem}.labels"));
    let labels: String = sbm.labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(&lpath, labels).map_err(|e| Error::io(&lpath, e))?;
    Ok(vec![fpath, epath, lpath])
}
