//! Segmentation settings and the plain-text `key = value` config format.
//!
//! Keys mirror the command-line flags (`no-refine`, `weight-decay`, ...);
//! underscores and dashes are interchangeable. Blank lines and lines
//! starting with `#` are ignored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arma::ArmaConfig;
use crate::error::{Error, Result};
use crate::optim::OptimConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegConfig {
    pub tau: f64,
    pub allow_self_loops: bool,
    /// Number of clusters; mask assembly needs 2.
    pub k: usize,
    /// Patch edge length in pixels.
    pub patch: usize,
    pub refine: bool,
    pub soft_upsample: bool,
    /// Emit per-epoch loss CSVs alongside masks.
    pub losscurve: bool,
    pub arma: ArmaConfig,
    pub optim: OptimConfig,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            allow_self_loops: false,
            k: 2,
            patch: 8,
            refine: true,
            soft_upsample: false,
            losscurve: false,
            arma: ArmaConfig::default(),
            optim: OptimConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.k != 2 {
            return Err(Error::Config(format!("mask assembly needs k = 2, got {}", self.k)));
        }
        if self.patch == 0 {
            return Err(Error::Config("patch must be at least 1".into()));
        }
        self.arma.validate()?;
        self.optim.validate()
    }

    /// Sets one option by its flag name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-").to_ascii_lowercase();
        match key.as_str() {
            "tau" => self.tau = parse(&key, value)?,
            "allow-self-loops" => self.allow_self_loops = parse_bool(&key, value)?,
            "k" => self.k = parse(&key, value)?,
            "patch" => self.patch = parse(&key, value)?,
            "refine" => self.refine = parse_bool(&key, value)?,
            "no-refine" => self.refine = !parse_bool(&key, value)?,
            "soft-upsample" => self.soft_upsample = parse_bool(&key, value)?,
            "losscurve" => self.losscurve = parse_bool(&key, value)?,
            "activation" => self.arma.activation = value.parse()?,
            "arch" => self.arma.arch = value.parse()?,
            "stacks" => self.arma.stacks = parse(&key, value)?,
            "layers" => self.arma.layers = parse(&key, value)?,
            "hidden" => self.arma.hidden = Some(parse(&key, value)?),
            "head-hidden" => self.arma.head_hidden = parse(&key, value)?,
            "shared-weights" => self.arma.shared_weights = parse_bool(&key, value)?,
            "lr" => self.optim.lr = parse(&key, value)?,
            "weight-decay" => self.optim.weight_decay = parse(&key, value)?,
            "lr-decay" => self.optim.lr_decay = Some(parse(&key, value)?),
            "epochs" => self.optim.epochs = parse(&key, value)?,
            "seed" => self.optim.seed = parse(&key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_kv(&text)?;
        Ok(cfg)
    }

    /// Renders every option as `key = value` lines accepted by [`apply_kv`](Self::apply_kv).
    pub fn to_kv(&self) -> String {
        let mut lines = vec![
            format!("tau = {}", self.tau),
            format!("allow-self-loops = {}", self.allow_self_loops),
            format!("k = {}", self.k),
            format!("patch = {}", self.patch),
            format!("refine = {}", self.refine),
            format!("soft-upsample = {}", self.soft_upsample),
            format!("losscurve = {}", self.losscurve),
            format!("activation = {}", self.arma.activation),
            format!("arch = {}", if self.arma.arch == crate::arma::Architecture::Gcn { "gcn" } else { "arma" }),
            format!("stacks = {}", self.arma.stacks),
            format!("layers = {}", self.arma.layers),
        ];
        if let Some(h) = self.arma.hidden {
            lines.push(format!("hidden = {h}"));
        }
        lines.extend([
            format!("head-hidden = {}", self.arma.head_hidden),
            format!("shared-weights = {}", self.arma.shared_weights),
            format!("lr = {}", self.optim.lr),
            format!("weight-decay = {}", self.optim.weight_decay),
            format!("epochs = {}", self.optim.epochs),
            format!("seed = {}", self.optim.seed),
        ]);
        if let Some(d) = self.optim.lr_decay {
            lines.push(format!("lr-decay = {d}"));
        }
        lines.join("\n") + "\n"
    }

    /// Stable 64-bit FNV-1a hash of the serialized settings.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
