//! Plain-text run configuration and run manifests.
//!
//! A config file holds `key = value` lines; `#` starts a comment. Unknown or
//! repeated keys are errors. A manifest echoes every config value under a
//! `config.` prefix next to seeds and file checksums, and is itself accepted
//! wherever a config file is.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{GaussianParams, GuidedFilterParams};
use crate::nets::{SynMode, TrainConfig, SIGMA_LEVELS};
use crate::nn::adam::TrainHyper;

pub const MANIFEST_HEADER: &str = "# apa run manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sigma_255: f64,
    pub seed: u64,
    pub patch_size: usize,
    pub stride: usize,
    pub guided: GuidedFilterParams,
    /// Gaussian pre-filter scale for the 10, 20 and 50 noise levels.
    pub gaussian_sigma: [f64; 3],
    pub syn_hidden: [usize; 3],
    pub syn_mode: SynMode,
    pub view_hidden: [usize; 3],
    pub view_per_sai: bool,
    pub view_patches_per_sai: Option<usize>,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_steps: Option<usize>,
    pub deterministic: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::for_sigma(20.0);
        RunConfig {
            sigma_255: 20.0,
            seed: 0,
            patch_size: t.patch_size,
            stride: t.stride,
            guided: t.guided,
            gaussian_sigma: [1.0, 1.5, 2.5],
            syn_hidden: t.syn_net.hidden,
            syn_mode: t.syn_net.mode,
            view_hidden: t.view_net.hidden,
            view_per_sai: t.view_net.per_sai,
            view_patches_per_sai: None,
            alpha: t.hyper.alpha,
            beta1: t.hyper.beta1,
            beta2: t.hyper.beta2,
            eps_adam: t.hyper.eps_adam,
            batch_size: t.hyper.batch_size,
            epochs: t.hyper.epochs,
            max_steps: None,
            deterministic: false,
            threads: None,
        }
    }
}

fn parse_val<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_widths(key: &str, value: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| parse_val(key, p.trim()))
        .collect::<Result<_>>()?;
    parts.try_into().map_err(|_| {
        Error::Config(format!(
            "{key} needs three comma-separated widths, got {value:?}"
        ))
    })
}

fn parse_opt(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "none" {
        Ok(None)
    } else {
        parse_val(key, value).map(Some)
    }
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".into(), |n| n.to_string())
}

fn fmt_widths(w: [usize; 3]) -> String {
    format!("{},{},{}", w[0], w[1], w[2])
}

impl RunConfig {
    /// Every recognized key, in canonical order.
    pub const KEYS: [&'static str; 23] = [
        "sigma_255",
        "seed",
        "patch_size",
        "stride",
        "guided.radius",
        "guided.epsilon",
        "gaussian.sigma.10",
        "gaussian.sigma.20",
        "gaussian.sigma.50",
        "syn.hidden",
        "syn.mode",
        "view.hidden",
        "view.per_sai",
        "view.patches_per_sai",
        "alpha",
        "beta1",
        "beta2",
        "eps_adam",
        "batch_size",
        "epochs",
        "max_steps",
        "deterministic",
        "threads",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "sigma_255" => self.sigma_255 = parse_val(key, v)?,
            "seed" => self.seed = parse_val(key, v)?,
            "patch_size" => self.patch_size = parse_val(key, v)?,
            "stride" => self.stride = parse_val(key, v)?,
            "guided.radius" => self.guided.radius = parse_val(key, v)?,
            "guided.epsilon" => self.guided.epsilon = parse_val(key, v)?,
            "gaussian.sigma.10" => self.gaussian_sigma[0] = parse_val(key, v)?,
            "gaussian.sigma.20" => self.gaussian_sigma[1] = parse_val(key, v)?,
            "gaussian.sigma.50" => self.gaussian_sigma[2] = parse_val(key, v)?,
            "syn.hidden" => self.syn_hidden = parse_widths(key, v)?,
            "syn.mode" => self.syn_mode = v.parse()?,
            "view.hidden" => self.view_hidden = parse_widths(key, v)?,
            "view.per_sai" => self.view_per_sai = parse_val(key, v)?,
            "view.patches_per_sai" => self.view_patches_per_sai = parse_opt(key, v)?,
            "alpha" => self.alpha = parse_val(key, v)?,
            "beta1" => self.beta1 = parse_val(key, v)?,
            "beta2" => self.beta2 = parse_val(key, v)?,
            "eps_adam" => self.eps_adam = parse_val(key, v)?,
            "batch_size" => self.batch_size = parse_val(key, v)?,
            "epochs" => self.epochs = parse_val(key, v)?,
            "max_steps" => self.max_steps = parse_opt(key, v)?,
            "deterministic" => self.deterministic = parse_val(key, v)?,
            "threads" => self.threads = parse_opt(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "sigma_255" => self.sigma_255.to_string(),
            "seed" => self.seed.to_string(),
            "patch_size" => self.patch_size.to_string(),
            "stride" => self.stride.to_string(),
            "guided.radius" => self.guided.radius.to_string(),
            "guided.epsilon" => self.guided.epsilon.to_string(),
            "gaussian.sigma.10" => self.gaussian_sigma[0].to_string(),
            "gaussian.sigma.20" => self.gaussian_sigma[1].to_string(),
            "gaussian.sigma.50" => self.gaussian_sigma[2].to_string(),
            "syn.hidden" => fmt_widths(self.syn_hidden),
            "syn.mode" => self.syn_mode.to_string(),
            "view.hidden" => fmt_widths(self.view_hidden),
            "view.per_sai" => self.view_per_sai.to_string(),
            "view.patches_per_sai" => fmt_opt(self.view_patches_per_sai),
            "alpha" => self.alpha.to_string(),
            "beta1" => self.beta1.to_string(),
            "beta2" => self.beta2.to_string(),
            "eps_adam" => self.eps_adam.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "max_steps" => fmt_opt(self.max_steps),
            "deterministic" => self.deterministic.to_string(),
            "threads" => fmt_opt(self.threads),
            _ => return None,
        })
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        Self::KEYS
            .iter()
            .map(|&k| (k, self.get(k).expect("every listed key is gettable")))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Parses a config file, or the `config.` lines of a manifest.
    pub fn parse(text: &str) -> Result<Self> {
        let manifest = text.starts_with(MANIFEST_HEADER);
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let key = if manifest {
                match key.strip_prefix("config.") {
                    Some(k) => k,
                    None => continue,
                }
            } else {
                key
            };
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn gaussian_for(&self, sigma_255: f64) -> GaussianParams {
        let idx = SIGMA_LEVELS
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - sigma_255).abs().total_cmp(&(b.1 - sigma_255).abs()))
            .map(|(i, _)| i)
            .unwrap();
        GaussianParams::new(self.gaussian_sigma[idx])
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut t = TrainConfig::for_sigma(self.sigma_255);
        t.hyper = TrainHyper {
            alpha: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_adam: self.eps_adam,
            batch_size: self.batch_size,
            epochs: self.epochs,
            max_steps: self.max_steps,
            seed: self.seed,
        };
        t.patch_size = self.patch_size;
        t.stride = self.stride;
        t.guided = self.guided;
        t.gaussian = self.gaussian_for(self.sigma_255);
        t.syn_net.hidden = self.syn_hidden;
        t.syn_net.mode = self.syn_mode;
        t.view_net.hidden = self.view_hidden;
        t.view_net.per_sai = self.view_per_sai;
        t.view_patches_per_sai = self.view_patches_per_sai;
        t.validate()?;
        Ok(t)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.push("tool", format!("apa {}", env!("CARGO_PKG_VERSION")));
        m.push("command", command);
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.lines.push((key.into(), value.into()));
    }

    pub fn config(&mut self, cfg: &RunConfig) {
        for (k, v) in cfg.entries() {
            self.push(format!("config.{k}"), v);
        }
    }

    pub fn file(&mut self, role: &str, path: &Path) -> Result<()> {
        let sum = sha256_file(path)?;
        self.push(format!("{role}.path"), path.display().to_string());
        self.push(format!("{role}.sha256"), sum);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
