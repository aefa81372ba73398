//! Campaign configuration files.

use std::path::{Path, PathBuf};

use poisearch::eda::{AttackSettings, UmdaConfig};
use poisearch::poi::ScoreMethod;
use poisearch::sim::SimConfig;
use poisearch::template::TemplateOptions;
use poisearch::trace::{LabelTarget, LeakageModel, SchemeTag};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSource,
    #[serde(default)]
    pub leakage_model: LeakageModel,
    #[serde(default)]
    pub poi: PoiSettings,
    #[serde(default)]
    pub template: TemplateOptions,
    /// Required by `eda-search` and by `evaluate` methods of kind `eda`.
    #[serde(default)]
    pub umda: Option<UmdaConfig>,
    #[serde(default)]
    pub evaluation: Evaluation,
    /// Methods compared by `evaluate`.
    #[serde(default)]
    pub methods: Vec<Method>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Traces recorded elsewhere, in SCAT files.
    Files(TraceFiles),
    Sim(SimSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFiles {
    pub profiling: PathBuf,
    #[serde(default)]
    pub validation: Option<PathBuf>,
    #[serde(default)]
    pub attack: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSource {
    pub scheme: SchemeTag,
    /// `config.n_traces` is the profiling count; `config.seed` is replaced
    /// by one derived from the campaign seed.
    pub config: SimConfig,
    #[serde(default)]
    pub validation_traces: usize,
    #[serde(default)]
    pub attack_traces: usize,
    #[serde(default)]
    pub attack_key: u8,
    /// `evaluate` repeats every method on each of these schemes with the
    /// same geometry; mask leak positions are dropped for non-MS1 schemes.
    #[serde(default)]
    pub compare_schemes: Vec<SchemeTag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoiSettings {
    #[serde(default)]
    pub method: ScoreMethod,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "one")]
    pub min_spacing: usize,
    /// Labels scored against each sample; the per-sample maximum is kept.
    /// Defaults to the intermediate for unprotected traces and to both
    /// shares for masked ones.
    #[serde(default)]
    pub targets: Option<Vec<LabelTarget>>,
}

impl Default for PoiSettings {
    fn default() -> Self {
        Self { method: ScoreMethod::default(), k: default_k(), min_spacing: 1, targets: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    pub traces: usize,
    pub repetitions: usize,
}

impl Default for Evaluation {
    fn default() -> Self {
        Self { traces: 100, repetitions: 10 }
    }
}

// No `deny_unknown_fields` here: serde does not support it alongside
// `flatten`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    #[serde(flatten)]
    pub kind: MethodKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodKind {
    /// Greedy top-k on the configured POI scores; `k` overrides `poi.k`.
    TopK {
        #[serde(default)]
        k: Option<usize>,
    },
    /// Best candidate of a UMDA search.
    Eda,
    /// Hand-picked sample indices.
    Fixed { indices: Vec<usize> },
}

fn default_k() -> usize {
    5
}

fn one() -> usize {
    1
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::config(m));
        match &self.data {
            DataSource::Sim(s) => {
                s.config.validate(s.scheme).map_err(CliError::config)?;
                for &scheme in &s.compare_schemes {
                    self.sim_config_for(s, scheme).validate(scheme).map_err(CliError::config)?;
                }
            }
            DataSource::Files(f) => {
                let all = std::iter::once(&f.profiling).chain(&f.validation).chain(&f.attack);
                for p in all {
                    if !p.is_file() {
                        return bad(format!("trace file {} does not exist", p.display()));
                    }
                }
            }
        }
        if self.poi.k == 0 {
            return bad("poi.k must be at least 1".into());
        }
        if self.poi.min_spacing == 0 {
            return bad("poi.min_spacing must be at least 1".into());
        }
        if self.evaluation.traces == 0 || self.evaluation.repetitions == 0 {
            return bad("evaluation.traces and evaluation.repetitions must be at least 1".into());
        }
        if !(self.template.epsilon >= 0.0 && self.template.epsilon.is_finite()) {
            return bad(format!("template.epsilon must be finite and >= 0, got {}", self.template.epsilon));
        }
        if let Some(u) = &self.umda {
            u.validate().map_err(CliError::config)?;
        }
        for m in &self.methods {
            match &m.kind {
                MethodKind::Eda if self.umda.is_none() => {
                    return bad(format!("method {:?} needs a umda section", m.name));
                }
                MethodKind::TopK { k: Some(0) } => return bad(format!("method {:?}: k must be >= 1", m.name)),
                MethodKind::Fixed { indices } if indices.is_empty() => {
                    return bad(format!("method {:?}: no indices", m.name));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub(crate) fn sim_config_for(&self, s: &SimSource, scheme: SchemeTag) -> SimConfig {
        let mut c = s.config.clone();
        if scheme != SchemeTag::Ms1 {
            c.mask_leak_positions.clear();
        }
        c
    }

    pub fn attack_settings(&self) -> AttackSettings {
        AttackSettings { leakage_model: self.leakage_model, template: self.template }
    }
}
