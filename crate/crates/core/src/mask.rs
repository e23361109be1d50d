//! Full-resolution binary segmentation masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the foreground cluster was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForegroundRule {
    /// Fewer border patches.
    Border,
    /// Border tie; fewer nodes.
    Size,
    /// Both tied; cluster 1.
    Default,
}

/// Provenance attached to a predicted mask.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskMeta {
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub activation: Option<String>,
    pub foreground_rule: Option<ForegroundRule>,
    pub foreground_label: Option<usize>,
    /// Every node landed in the same cluster.
    pub trivial_partition: bool,
    pub refined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
    pub meta: MaskMeta,
}

impl SegMask {
    /// `bits` is row-major, one byte per pixel, each 0 or 1.
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape {
                op: "mask",
                left: (height, width),
                right: (bits.len(), 1),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Contract("mask bits must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            bits,
            meta: MaskMeta::default(),
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![u8::from(value); width * height],
            meta: MaskMeta::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn complement(&self) -> SegMask {
        SegMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| 1 - b).collect(),
            meta: self.meta.clone(),
        }
    }
}
