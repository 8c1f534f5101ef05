//! Pipeline configuration (TOML).
//!
//! Relative paths resolve against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use alignet_core::aggregate::{Aggregate, NeighbourMode};
use alignet_core::null_models::{Band, LabelResampling};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub corpus: Option<PathBuf>,
    pub followers: Option<PathBuf>,
    /// Tab-separated lexicon; the bundled test lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// CSV `user,label` with labels yes/no/unaligned.
    pub annotations: Option<PathBuf>,
    /// CSV `user,group` of planted groups.
    pub truth: Option<PathBuf>,
}

/// Half-open `[start, end)` in unix seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateNetwork {
    #[default]
    Reciprocal,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregateSettings {
    pub network: AggregateNetwork,
    pub neighbours: NeighbourMode,
    /// Aggregate behind the p/n/u user labels.
    pub label_field: Aggregate,
}

impl Default for AggregateSettings {
    fn default() -> Self {
        AggregateSettings { network: AggregateNetwork::default(), neighbours: NeighbourMode::default(), label_field: Aggregate::Out }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullTestSettings {
    pub iterations: usize,
    pub band: [f64; 2],
    pub label_resampling: LabelResampling,
    /// Also write every null sample to CSV.
    pub dump_samples: bool,
}

impl Default for NullTestSettings {
    fn default() -> Self {
        NullTestSettings { iterations: 1000, band: [0.025, 0.975], label_resampling: LabelResampling::default(), dump_samples: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommunitySettings {
    pub times: Vec<f64>,
    pub restarts: usize,
    pub min_cell_size: usize,
}

impl Default for CommunitySettings {
    fn default() -> Self {
        CommunitySettings { times: vec![0.5, 0.75, 1.0, 1.5, 2.0, 3.0], restarts: 10, min_cell_size: 21 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub standardize: bool,
    /// Weight cells by member count.
    pub weighted: bool,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings { k_min: 1, k_max: 8, restarts: 10, standardize: false, weighted: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSettings {
    /// Count follower coverage only when the author follows the target.
    pub directed_coverage: bool,
    /// First day boundary; the UTC midnight before the first message when absent.
    pub day_start: Option<i64>,
    pub days: Option<usize>,
    /// Share of each cluster to draw for manual annotation.
    pub annotation_sample: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSettings {
    /// JSON generator config.
    pub config: PathBuf,
    /// Replaces the generator's own seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_seed() -> u64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub window: Option<Window>,
    /// Keep only messages with one of these hashtags; all messages when empty.
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub aggregate: AggregateSettings,
    #[serde(default)]
    pub nulltest: NullTestSettings,
    #[serde(default)]
    pub communities: CommunitySettings,
    #[serde(default)]
    pub clustering: ClusterSettings,
    #[serde(default)]
    pub report: ReportSettings,
    #[serde(default)]
    pub synth: Option<SynthSettings>,
}

impl PipelineConfig {
    pub fn parse(content: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(content).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let content = fs::read_to_string(path).map_err(|_| CliError::Missing(path.to_path_buf()))?;
        Self::parse(&content)
    }

    pub fn band(&self) -> Result<Band, CliError> {
        Band::new(self.nulltest.band[0], self.nulltest.band[1]).map_err(CliError::from)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if let Some(w) = self.window {
            if w.start > w.end {
                return bad(format!("window start {} after end {}", w.start, w.end));
            }
        }
        self.band()?;
        if self.nulltest.iterations == 0 {
            return bad("nulltest.iterations must be positive".into());
        }
        let c = &self.communities;
        if c.times.is_empty() || c.times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("communities.times must be a non-empty list of positive numbers".into());
        }
        if c.restarts == 0 || c.min_cell_size == 0 {
            return bad("communities.restarts and min_cell_size must be positive".into());
        }
        let k = &self.clustering;
        if k.k_min == 0 || k.k_min + 2 > k.k_max || k.restarts == 0 {
            return bad("clustering needs 1 <= k_min, k_max >= k_min + 2 and restarts >= 1".into());
        }
        if let Some(f) = self.report.annotation_sample {
            if !(0.0..=1.0).contains(&f) {
                return bad("report.annotation_sample must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::parse("seed = 4\n[inputs]\ncorpus = \"c.jsonl\"\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.communities.min_cell_size, 21);
        assert_eq!(c.nulltest.iterations, 1000);
        assert_eq!(c.clustering.k_max, 8);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[nulltest]\nband = [0.9, 0.1]\n",
            "[communities]\ntimes = []\n",
            "[clustering]\nk_min = 2\nk_max = 3\n",
            "[window]\nstart = 5\nend = 1\n",
            "unknown = 1\n",
        ] {
            assert!(matches!(PipelineConfig::parse(text), Err(CliError::Validation(_))), "{text}");
        }
    }
}
