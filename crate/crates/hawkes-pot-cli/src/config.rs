//! Run configuration: a TOML file with sections for data, threshold, split,
//! model, priors, chains, prediction, study and simulate. Unknown keys are
//! rejected to prevent silent misconfiguration.

use serde::{Deserialize, Serialize};

use hawkes_pot::mcmc::{ChainConfig, KernelModel, MarkModel, ModelVariant, PriorConfig};
use hawkes_pot::{ScalePolicy, ThresholdSpec};

use crate::errors::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every RNG stream is derived from it.
    pub seed: u64,
    /// Directory all artifacts are written to.
    pub output_dir: String,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub split: Option<SplitSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub chains: ChainSection,
    #[serde(default)]
    pub priors: PriorSection,
    #[serde(default)]
    pub prediction: PredictionSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config parse failure: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn data(&self) -> Result<&DataSection> {
        self.data.as_ref().ok_or_else(|| CliError::usage("this command requires a [data] section"))
    }

    pub fn split(&self) -> Result<&SplitSection> {
        self.split.as_ref().ok_or_else(|| CliError::usage("this command requires a [split] section"))
    }
}

/// What the raw values are transformed into before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    #[default]
    Identity,
    NegativeLogReturn,
    DailyAggregateSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub input: String,
    #[serde(default = "default_time_column")]
    pub time_column: String,
    #[serde(default = "default_value_column")]
    pub value_column: String,
    #[serde(default)]
    pub transform: TransformKind,
}

fn default_time_column() -> String {
    "time".to_string()
}

fn default_value_column() -> String {
    "value".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    /// "upper_percentile" | "lower_percentile" | "absolute".
    pub kind: String,
    pub value: f64,
    /// "median_excess" | "mean_excess" | "explicit".
    #[serde(default = "default_scale")]
    pub scale: String,
    #[serde(default)]
    pub scale_value: Option<f64>,
}

fn default_scale() -> String {
    "median_excess".to_string()
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection {
            kind: "upper_percentile".to_string(),
            value: 95.0,
            scale: default_scale(),
            scale_value: None,
        }
    }
}

impl ThresholdSection {
    pub fn spec(&self) -> Result<ThresholdSpec> {
        match self.kind.as_str() {
            "upper_percentile" => Ok(ThresholdSpec::UpperPercentile(self.value)),
            "lower_percentile" => Ok(ThresholdSpec::LowerPercentile(self.value)),
            "absolute" => Ok(ThresholdSpec::Absolute(self.value)),
            other => Err(CliError::usage(format!("unknown threshold kind {other:?}"))),
        }
    }

    pub fn scale_policy(&self) -> Result<ScalePolicy> {
        match self.scale.as_str() {
            "median_excess" => Ok(ScalePolicy::MedianExcess),
            "mean_excess" => Ok(ScalePolicy::MeanExcess),
            "explicit" => {
                let c = self.scale_value.ok_or_else(|| {
                    CliError::usage("scale = \"explicit\" requires scale_value")
                })?;
                Ok(ScalePolicy::Explicit(c))
            }
            other => Err(CliError::usage(format!("unknown scale policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// "fraction" | "at_time" | "at_date" | "trailing_duration".
    pub kind: String,
    #[serde(default)]
    pub fraction: Option<f64>,
    #[serde(default)]
    pub time: Option<f64>,
    /// ISO-8601 date; requires date-typed input times.
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub duration_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "exponential" | "dp_mixture".
    pub kernel: String,
    /// "iid" | "hierarchical".
    pub marks: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { kernel: "exponential".to_string(), marks: "iid".to_string() }
    }
}

impl ModelSection {
    pub fn variant(&self) -> Result<ModelVariant> {
        let kernel = match self.kernel.as_str() {
            "exponential" => KernelModel::Exponential,
            "dp_mixture" => KernelModel::DpMixture,
            other => return Err(CliError::usage(format!("unknown kernel {other:?}"))),
        };
        let marks = match self.marks.as_str() {
            "iid" => MarkModel::Iid,
            "hierarchical" => MarkModel::Hierarchical,
            other => return Err(CliError::usage(format!("unknown mark model {other:?}"))),
        };
        Ok(ModelVariant { kernel, marks })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// "desk" (default) | "paper"; individual fields override the preset.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub chains: Option<usize>,
    #[serde(default)]
    pub representative_draws: Option<usize>,
    #[serde(default)]
    pub mark_iterations: Option<usize>,
    #[serde(default)]
    pub mark_warmup: Option<usize>,
    #[serde(default)]
    pub mark_draws_kept: Option<usize>,
    #[serde(default)]
    pub score_draws: Option<usize>,
    #[serde(default)]
    pub crp_sweeps: Option<usize>,
    #[serde(default)]
    pub new_cluster_z_draws: Option<usize>,
}

impl ChainSection {
    pub fn chain_config(&self) -> Result<ChainConfig> {
        let mut cfg = match self.preset.as_deref() {
            None | Some("desk") => ChainConfig::desk(),
            Some("paper") => ChainConfig::paper(),
            Some(other) => {
                return Err(CliError::usage(format!("unknown chain preset {other:?}")))
            }
        };
        macro_rules! over {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        over!(iterations);
        over!(burn_in);
        over!(chains);
        over!(representative_draws);
        over!(mark_iterations);
        over!(mark_warmup);
        over!(mark_draws_kept);
        over!(score_draws);
        over!(crp_sweeps);
        over!(new_cluster_z_draws);
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    #[serde(default)]
    pub mu_shape: Option<f64>,
    #[serde(default)]
    pub mu_rate: Option<f64>,
    #[serde(default)]
    pub kappa_shape: Option<f64>,
    #[serde(default)]
    pub kappa_rate: Option<f64>,
    #[serde(default)]
    pub beta_max: Option<f64>,
    #[serde(default)]
    pub dp_alpha_shape: Option<f64>,
    #[serde(default)]
    pub dp_alpha_rate: Option<f64>,
    #[serde(default)]
    pub log_sigma0_sd: Option<f64>,
    #[serde(default)]
    pub tau_sigma_sd: Option<f64>,
    #[serde(default)]
    pub xi_sd: Option<f64>,
    #[serde(default)]
    pub xi_lower: Option<f64>,
}

impl PriorSection {
    pub fn prior_config(&self) -> Result<PriorConfig> {
        let mut p = PriorConfig::default();
        macro_rules! over {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    p.$field = v;
                }
            };
        }
        over!(mu_shape);
        over!(mu_rate);
        over!(kappa_shape);
        over!(kappa_rate);
        over!(beta_max);
        over!(log_sigma0_sd);
        over!(tau_sigma_sd);
        over!(xi_sd);
        over!(xi_lower);
        if let Some(v) = self.dp_alpha_shape {
            p.dp.alpha_shape = v;
        }
        if let Some(v) = self.dp_alpha_rate {
            p.dp.alpha_rate = v;
        }
        p.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSection {
    /// Forecast horizon H past the training window.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Quantile probabilities of the maximum excess.
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    /// Excess levels z for Pr(max excess > z).
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
}

fn default_horizon() -> f64 {
    50.0
}

fn default_paths() -> usize {
    1000
}

fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}

fn default_levels() -> Vec<f64> {
    vec![1.0, 2.0, 5.0]
}

impl Default for PredictionSection {
    fn default() -> Self {
        PredictionSection {
            horizon: default_horizon(),
            paths: default_paths(),
            quantiles: default_quantiles(),
            levels: default_levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// "desk" (default) | "paper".
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// One of the study-grid truths: "exp_iid" | "exp_hier" | "mix_iid" |
    /// "mix_hier" (default "exp_iid").
    #[serde(default)]
    pub scenario: Option<String>,
}
