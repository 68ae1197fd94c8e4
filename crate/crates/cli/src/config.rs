use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use quditvar::models::ModelDescriptor;
use quditvar::vqe::VqeConfig;
use quditvar::vte::{ParamInit, VteConfig};
use quditvar::EncodingKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Summary record only.
    None,
    /// Per-iteration traces as CSV files next to the record.
    #[default]
    Csv,
    /// CSV files, and the traces embedded in the JSON record as well.
    Full,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment document. Each subcommand reads its own section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub trace: TraceLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encode: Option<EncodeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vqe: Option<VqeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vte: Option<VteConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeConfig {
    pub model: ModelDescriptor,
    pub encoding: EncodingKind,
}

/// Evenly spaced `points` values from `from` to `to`, both included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self.points {
            0 => bail!("grid needs at least one point"),
            1 => Ok(vec![self.from]),
            n => Ok((0..n).map(|k| self.from + (self.to - self.from) * k as f64 / (n - 1) as f64).collect()),
        }
    }
}

fn default_encodings() -> Vec<EncodingKind> {
    vec![EncodingKind::Symmetry]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub model: ModelDescriptor,
    #[serde(default = "default_encodings")]
    pub encodings: Vec<EncodingKind>,
    /// θ grid for the ground-state fidelity map (spin chains only).
    #[serde(default)]
    pub theta_grid: Option<Grid>,
    /// Locate the encoded qudit ground state in the qubit spectrum of the
    /// first encoding.
    #[serde(default)]
    pub rank: bool,
    /// Write the full qubit spectrum of the first encoding.
    #[serde(default)]
    pub spectrum: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Theta,
    Layers,
    Beta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: VqeConfig,
}

impl SweepConfig {
    /// The base configuration with the axis set to `value`.
    pub fn point(&self, value: f64) -> Result<VqeConfig> {
        let mut c = self.base.clone();
        match self.axis {
            SweepAxis::Theta => match &mut c.model {
                ModelDescriptor::Bbh(p) => p.theta = value,
                _ => bail!("a θ sweep needs a bbh model"),
            },
            SweepAxis::Layers => {
                if value < 0.0 || value.fract() != 0.0 {
                    bail!("layer counts must be non-negative integers, got {value}");
                }
                c.layers = value as usize;
            }
            SweepAxis::Beta => {
                c.beta = value;
                c.penalty = value > 0.0;
            }
        }
        Ok(c)
    }
}

/// Command-line settings layered over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub out: Option<PathBuf>,
    /// `(dotted.key, raw value)` pairs from `--key value`.
    pub keys: Vec<(String, String)>,
}

const TOP_LEVEL_KEYS: [&str; 3] = ["schema_version", "output_dir", "trace"];

/// Parses trailing `--key value` pairs.
pub fn parse_key_values(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            bail!("expected --key, found {flag:?}");
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().with_context(|| format!("--{key} needs a value"))?;
                (key.to_string(), v.clone())
            }
        };
        if key.is_empty() {
            bail!("empty override key");
        }
        out.push((key, value));
    }
    Ok(out)
}

/// Values are read as JSON when they parse, otherwise as plain strings.
fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, path: &[&str], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().context("empty key")?;
    let mut node = root;
    for p in parents {
        let obj = node.as_object_mut().with_context(|| format!("cannot descend into non-object at {p:?}"))?;
        node = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().with_context(|| format!("cannot set {last:?} on a non-object"))?;
    obj.insert(last.to_string(), value);
    Ok(())
}

/// Reads and validates the document, applying overrides for `section`.
pub fn load(path: &Path, section: &str, ov: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if !doc.is_object() {
        bail!("{} is not a JSON object", path.display());
    }
    if doc.get(section).is_none() {
        bail!("{} has no {section:?} section", path.display());
    }
    for (key, raw) in &ov.keys {
        let parts: Vec<&str> = key.split('.').collect();
        if TOP_LEVEL_KEYS.contains(&parts[0]) {
            set_path(&mut doc, &parts, override_value(raw))?;
        } else {
            let mut full = vec![section];
            full.extend(parts);
            set_path(&mut doc, &full, override_value(raw))?;
        }
    }
    if let Some(out) = &ov.out {
        doc["output_dir"] = Value::String(out.to_string_lossy().into_owned());
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(doc).with_context(|| format!("invalid configuration in {}", path.display()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version);
    }
    apply_seed_restarts(&mut cfg, ov)?;
    Ok(cfg)
}

fn apply_seed_restarts(cfg: &mut ExperimentConfig, ov: &Overrides) -> Result<()> {
    let vqe = cfg.vqe.as_mut().or(cfg.sweep.as_mut().map(|s| &mut s.base));
    if let Some(v) = vqe {
        if let Some(seed) = ov.seed {
            v.seed = seed;
        }
        if let Some(r) = ov.restarts {
            v.restarts = r;
        }
        v.validate()?;
    }
    if let Some(v) = cfg.vte.as_mut() {
        if let (Some(seed), ParamInit::Mirrored { seed: s, .. }) = (ov.seed, &mut v.initial_params) {
            *s = seed;
        }
        v.validate()?;
    }
    Ok(())
}
