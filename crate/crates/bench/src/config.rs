use std::path::{Path, PathBuf};

use cdqaoa_core::portfolio::{random_instance, PortfolioInstance, DEFAULT_RISK_AVERSION};
use cdqaoa_core::qaoa::{AnsatzConfig, CdMode, InitStrategy, Method, DEFAULT_RESTARTS};
use cdqaoa_core::statevector::Topology;
use serde::{Deserialize, Serialize};

use crate::{BenchError, Result};

/// A sweep over instances × methods × topologies × depths × CVaR levels.
///
/// Instances come from `instance_files` when that list is nonempty, and
/// are otherwise generated with seeds `base_seed .. base_seed + count`.
/// `topologies` only fans out the XY methods; grover and penalty run once
/// per cell with topology `none`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub instance_files: Vec<PathBuf>,
    pub count: usize,
    pub n_assets: usize,
    pub budget: usize,
    pub risk_aversion: f64,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub depths: Vec<usize>,
    pub cvar_alphas: Vec<f64>,
    pub topologies: Vec<Topology>,
    /// Evaluations per optimizer start; unset means 200 per parameter.
    pub max_evals: Option<usize>,
    pub restarts: usize,
    pub init_strategy: InitStrategy,
    pub cd_mode: CdMode,
    /// Mixed into every run's optimizer seed.
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for SweepSpec {
    /// The default benchmark.
    fn default() -> Self {
        Self {
            instance_files: Vec::new(),
            count: 10,
            n_assets: 12,
            budget: 4,
            risk_aversion: DEFAULT_RISK_AVERSION,
            base_seed: 100,
            methods: Method::ALL.to_vec(),
            depths: vec![1, 2, 3],
            cvar_alphas: vec![0.1, 0.25, 1.0],
            topologies: vec![Topology::Ring],
            max_evals: None,
            restarts: DEFAULT_RESTARTS,
            init_strategy: InitStrategy::LinearRamp,
            cd_mode: CdMode::SingleEtaPerLayer,
            seed: 0,
            out: None,
        }
    }
}

const LIST_KEYS: [&str; 5] = ["instance_files", "methods", "depths", "cvar_alphas", "topologies"];

fn scalar(text: &str) -> serde_json::Value {
    let t = text.trim().trim_matches('"');
    if t.eq_ignore_ascii_case("none") || t == "null" {
        return serde_json::Value::Null;
    }
    if let Ok(v) = t.parse::<u64>() {
        return v.into();
    }
    if let Ok(v) = t.parse::<f64>() {
        return v.into();
    }
    t.into()
}

impl SweepSpec {
    /// JSON object, or `key = value` lines with comma-separated lists and
    /// `#` comments.
    pub fn from_text(text: &str) -> Result<Self> {
        let spec: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            let mut map = serde_json::Map::new();
            for (no, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| BenchError::Config(format!("line {}: expected key = value", no + 1)))?;
                let key = key.trim();
                let value = value.trim();
                let json = if LIST_KEYS.contains(&key) {
                    let inner = value.trim_start_matches('[').trim_end_matches(']');
                    serde_json::Value::Array(
                        inner
                            .split(',')
                            .filter(|s| !s.trim().is_empty())
                            .map(|s| match key {
                                "instance_files" | "methods" | "topologies" => {
                                    s.trim().trim_matches('"').into()
                                }
                                _ => scalar(s),
                            })
                            .collect(),
                    )
                } else if matches!(key, "init_strategy" | "cd_mode" | "out") {
                    value.trim_matches('"').into()
                } else {
                    scalar(value)
                };
                if map.insert(key.to_string(), json).is_some() {
                    return Err(BenchError::Config(format!("duplicate key '{key}'")));
                }
            }
            serde_json::from_value(serde_json::Value::Object(map))
                .map_err(|e| BenchError::Config(e.to_string()))?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(BenchError::Config(format!("{what} list is empty")));
        if self.methods.is_empty() {
            return empty("methods");
        }
        if self.depths.is_empty() {
            return empty("depths");
        }
        if self.cvar_alphas.is_empty() {
            return empty("cvar_alphas");
        }
        if self.topologies.is_empty() {
            return empty("topologies");
        }
        if self.instance_files.is_empty() && self.count == 0 {
            return Err(BenchError::Config("no instances: count is 0 and no files given".into()));
        }
        for key in self.run_keys(1) {
            self.ansatz_config(&key).validate()?;
        }
        Ok(())
    }

    /// `(instance_id, instance)` pairs in sweep order.
    pub fn instances(&self) -> Result<Vec<(String, PortfolioInstance)>> {
        if !self.instance_files.is_empty() {
            return self
                .instance_files
                .iter()
                .map(|p| {
                    let inst = crate::load_instance(p)?;
                    let id = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    Ok((id, inst))
                })
                .collect();
        }
        (0..self.count as u64)
            .map(|k| {
                let seed = self.base_seed + k;
                let inst = random_instance(seed, self.n_assets, self.budget, self.risk_aversion)?;
                Ok((format!("inst_{seed}"), inst))
            })
            .collect()
    }

    /// Every run of the sweep in its canonical order.
    pub fn run_keys(&self, n_instances: usize) -> Vec<RunKey> {
        let mut keys = Vec::new();
        for instance in 0..n_instances {
            for &method in &self.methods {
                let topologies: Vec<Option<Topology>> = if matches!(method, Method::Xy | Method::XyCd) {
                    self.topologies.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for topology in topologies {
                    for &p in &self.depths {
                        for &cvar_alpha in &self.cvar_alphas {
                            keys.push(RunKey {
                                instance,
                                method,
                                topology,
                                p,
                                cvar_alpha,
                            });
                        }
                    }
                }
            }
        }
        keys
    }

    /// Optimizer seed of a run. Methods, topologies and CVaR levels on the
    /// same instance and depth share it.
    pub fn run_seed(&self, key: &RunKey) -> u64 {
        splitmix64(
            self.seed
                ^ splitmix64(key.instance as u64)
                ^ splitmix64(0x5eed_0000 + key.p as u64),
        )
    }

    pub fn ansatz_config(&self, key: &RunKey) -> AnsatzConfig {
        let mut cfg = AnsatzConfig::new(key.method, key.p);
        cfg.topology = key.topology;
        cfg.cvar_alpha = key.cvar_alpha;
        if key.method == Method::XyCd {
            cfg.cd_mode = Some(self.cd_mode);
        }
        cfg.init_strategy = self.init_strategy;
        cfg.max_evals = self.max_evals;
        cfg.restarts = self.restarts;
        cfg.seed = self.run_seed(key);
        cfg
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RunKey {
    pub instance: usize,
    pub method: Method,
    pub topology: Option<Topology>,
    pub p: usize,
    pub cvar_alpha: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
