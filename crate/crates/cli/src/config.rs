//! Pipeline configuration: one JSON file drives every subcommand; a few
//! flags can override individual keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use slant_core::classifier::PenaltyForm;
use slant_core::features::Chi2Mode;
use slant_core::econ::{IdCheckSpec, RegressionSpec};
use slant_core::synth::SynthConfig;
use slant_core::topics::TopicsConfig;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Chi2ModeConfig {
    #[default]
    Counts,
    Presence,
}

impl From<Chi2ModeConfig> for Chi2Mode {
    fn from(mode: Chi2ModeConfig) -> Chi2Mode {
        match mode {
            Chi2ModeConfig::Counts => Chi2Mode::Counts,
            Chi2ModeConfig::Presence => Chi2Mode::Presence,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CorpusPaths {
    pub fnc: Option<PathBuf>,
    pub cnn: Option<PathBuf>,
    pub articles: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PanelPaths {
    pub counties: Option<PathBuf>,
    pub circulation: Option<PathBuf>,
    pub outlets: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicsSection {
    #[serde(flatten)]
    pub config: TopicsConfig,
    /// Which prepared corpus the model trains on.
    pub source: TopicsSource,
    /// Hand-authored labels file ("topic_index,label,is_local,is_no_label").
    pub labels: Option<PathBuf>,
}

impl Default for TopicsSection {
    fn default() -> Self {
        TopicsSection { config: TopicsConfig::default(), source: TopicsSource::Articles, labels: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TopicsSource {
    Articles,
    Transcripts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BinscatterSection {
    pub y: String,
    pub x: String,
    pub controls: Vec<String>,
    pub fe: Option<String>,
    pub weight: Option<String>,
    pub bins: usize,
}

impl Default for BinscatterSection {
    fn default() -> Self {
        BinscatterSection {
            y: "slant".into(),
            x: "position_rel".into(),
            controls: Vec::new(),
            fe: Some("state".into()),
            weight: Some("circulation".into()),
            bins: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub corpora: CorpusPaths,
    pub panel: PanelPaths,
    /// Override the built-in stopword list.
    pub stopwords: Option<PathBuf>,
    pub segmentation_window: u32,
    pub vocab_threshold: u64,
    pub k_features: usize,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub train_fraction: f64,
    pub penalty: PenaltyForm,
    pub fit_intercept: bool,
    /// χ² on raw counts (default) or per-snippet presence.
    pub chi2_mode: Chi2ModeConfig,
    pub topics: TopicsSection,
    pub regressions: Vec<RegressionSpec>,
    pub id_check: Option<IdCheckSpec>,
    pub simulate: SynthConfig,
    pub binscatters: Vec<BinscatterSection>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            corpora: CorpusPaths::default(),
            panel: PanelPaths::default(),
            stopwords: None,
            segmentation_window: 80,
            vocab_threshold: 20,
            k_features: 2000,
            lambda_grid: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            folds: 5,
            train_fraction: 0.8,
            penalty: PenaltyForm::SquaredNorm,
            fit_intercept: true,
            chi2_mode: Chi2ModeConfig::Counts,
            topics: TopicsSection::default(),
            regressions: Vec::new(),
            id_check: None,
            simulate: SynthConfig::default(),
            binscatters: vec![BinscatterSection::default()],
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: PipelineConfig = serde_json::from_slice(&bytes)
            .with_context(|| format!("bad config {}", path.display()))?;
        if !(0.0..1.0).contains(&(1.0 - config.train_fraction)) {
            bail!("train_fraction must lie in (0, 1)");
        }
        if config.segmentation_window < 1 {
            bail!("segmentation_window must be at least 1");
        }
        if config.k_features < 1 {
            bail!("k_features must be at least 1");
        }
        if config.folds < 2 {
            bail!("folds must be at least 2");
        }
        if config.lambda_grid.is_empty() || config.lambda_grid.iter().any(|&l| l < 0.0) {
            bail!("lambda_grid must be nonempty and nonnegative");
        }
        if config.topics.config.k < 1 {
            bail!("topics.k must be at least 1");
        }
        Ok((config, bytes))
    }

    pub fn stopword_set(&self) -> Result<std::collections::HashSet<String>> {
        match &self.stopwords {
            None => Ok(slant_core::textprep::default_stopwords()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read stopwords {}", path.display()))?;
                Ok(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
            }
        }
    }

    pub fn prepared_dir(&self) -> PathBuf {
        self.out_dir.join("prepared")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out_dir.join("model")
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.out_dir.join("scores")
    }

    pub fn topics_dir(&self) -> PathBuf {
        self.out_dir.join("topics")
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.out_dir.join("tables")
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.out_dir.join("synth")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out_dir.join("report")
    }
}

/// Error for a missing upstream artifact, naming the command to run first.
pub fn require_artifact(path: &Path, produced_by: &str) -> Result<()> {
    if !path.exists() {
        return Err(crate::errors::invalid(format!(
            "missing {}: run `slant {produced_by}` first",
            path.display()
        )));
    }
    Ok(())
}
