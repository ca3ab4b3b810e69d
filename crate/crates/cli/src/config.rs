//! Run configuration: one TOML file drives every subcommand, so a run is
//! reproducible from the config plus the input files it names.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default)]
    pub textprep: TextPrepSettings,
    #[serde(default)]
    pub lda: LdaSettings,
    #[serde(default)]
    pub graph: GraphSettings,
    #[serde(default)]
    pub louvain: LouvainSettings,
    #[serde(default)]
    pub tsne: TsneSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Vec<PathBuf>,
    #[serde(default)]
    pub gazetteers: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextPrepSettings {
    pub min_df: usize,
    pub max_df_ratio: f64,
    pub strip_suffixes: bool,
}

impl Default for TextPrepSettings {
    fn default() -> Self {
        Self {
            min_df: 2,
            max_df_ratio: 0.9,
            strip_suffixes: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdaSettings {
    pub k: usize,
    /// None keeps the 50/K heuristic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Both bounds set → `lda-sweep` scans this inclusive K range.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_to: Option<usize>,
    pub coherence_top_n: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            seed: 0,
            sweep_from: None,
            sweep_to: None,
            coherence_top_n: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DanglingSetting {
    Drop,
    Stub,
}

impl fmt::Display for DanglingSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DanglingSetting::Drop => write!(f, "drop"),
            DanglingSetting::Stub => write!(f, "stub"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSettings {
    pub dangling: DanglingSetting,
    pub accumulate_multiplicity: bool,
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self {
            dangling: DanglingSetting::Drop,
            accumulate_multiplicity: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LouvainSettings {
    pub gammas: Vec<f64>,
    pub seed: u64,
}

impl Default for LouvainSettings {
    fn default() -> Self {
        Self {
            gammas: vec![1.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneSettings {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneSettings {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSettings {
    /// Label column value to cross-tabulate; requires `paths.annotations`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub dominant_topic_threshold: f64,
    pub key_cases: Vec<String>,
    /// Retrieval target topic. None derives it as the modal primary topic
    /// among labelled documents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_topic: Option<usize>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            label: None,
            dominant_topic_threshold: 0.5,
            key_cases: Vec::new(),
            target_topic: None,
        }
    }
}

/// Config validation failure carrying every violation found, not just the
/// first. Rendered one per line so a bad config is fixable in one pass.
#[derive(Debug)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "configuration is invalid:")?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

impl RunConfig {
    /// Parses the TOML file and resolves every relative path against the
    /// config file's directory, so a run is location independent.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| ValidationErrors(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.paths.corpus);
        if let Some(p) = self.paths.annotations.as_mut() {
            resolve(p);
        }
        for p in &mut self.paths.stopwords {
            resolve(p);
        }
        for p in &mut self.paths.gazetteers {
            resolve(p);
        }
        if let Some(p) = self.paths.lemmas.as_mut() {
            resolve(p);
        }
        resolve(&mut self.paths.out_dir);
    }

    /// Checks path existence and numeric domains, collecting all violations.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut violations = Vec::new();
        let mut need_file = |path: &Path, what: &str| {
            if !path.is_file() {
                violations.push(format!("{what} file not found: {}", path.display()));
            }
        };
        need_file(&self.paths.corpus, "corpus");
        if let Some(p) = &self.paths.annotations {
            need_file(p, "annotations");
        }
        for p in &self.paths.stopwords {
            need_file(p, "stopwords");
        }
        for p in &self.paths.gazetteers {
            need_file(p, "gazetteer");
        }
        if let Some(p) = &self.paths.lemmas {
            need_file(p, "lemma dictionary");
        }

        let t = &self.textprep;
        if t.min_df < 1 {
            violations.push(format!("textprep.min_df must be at least 1, got {}", t.min_df));
        }
        if !(t.max_df_ratio > 0.0 && t.max_df_ratio <= 1.0) {
            violations.push(format!(
                "textprep.max_df_ratio must be in (0, 1], got {}",
                t.max_df_ratio
            ));
        }

        let l = &self.lda;
        if l.k < 1 {
            violations.push(format!("lda.k must be at least 1, got {}", l.k));
        }
        if let Some(alpha) = l.alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                violations.push(format!("lda.alpha must be positive, got {alpha}"));
            }
        }
        if !(l.beta > 0.0 && l.beta.is_finite()) {
            violations.push(format!("lda.beta must be positive, got {}", l.beta));
        }
        if l.iterations <= l.burn_in {
            violations.push(format!(
                "lda.iterations ({}) must exceed lda.burn_in ({})",
                l.iterations, l.burn_in
            ));
        }
        match (l.sweep_from, l.sweep_to) {
            (Some(from), Some(to)) => {
                if from < 1 {
                    violations.push(format!("lda.sweep_from must be at least 1, got {from}"));
                }
                if from > to {
                    violations.push(format!(
                        "lda.sweep_from ({from}) must not exceed lda.sweep_to ({to})"
                    ));
                }
            }
            (None, None) => {}
            _ => violations
                .push("lda.sweep_from and lda.sweep_to must be set together".to_string()),
        }
        if l.coherence_top_n < 2 {
            violations.push(format!(
                "lda.coherence_top_n must be at least 2, got {}",
                l.coherence_top_n
            ));
        }

        if self.louvain.gammas.is_empty() {
            violations.push("louvain.gammas must name at least one resolution".to_string());
        }
        for &gamma in &self.louvain.gammas {
            if !(gamma > 0.0 && gamma.is_finite()) {
                violations.push(format!("louvain.gammas entries must be positive, got {gamma}"));
            }
        }

        let ts = &self.tsne;
        if !(ts.perplexity > 0.0 && ts.perplexity.is_finite()) {
            violations.push(format!("tsne.perplexity must be positive, got {}", ts.perplexity));
        }
        if ts.iterations < 1 {
            violations.push("tsne.iterations must be at least 1".to_string());
        }
        if !(ts.learning_rate > 0.0 && ts.learning_rate.is_finite()) {
            violations.push(format!(
                "tsne.learning_rate must be positive, got {}",
                ts.learning_rate
            ));
        }

        let e = &self.evaluation;
        if !(0.0..=1.0).contains(&e.dominant_topic_threshold) {
            violations.push(format!(
                "evaluation.dominant_topic_threshold must be in [0, 1], got {}",
                e.dominant_topic_threshold
            ));
        }
        if e.label.is_some() && self.paths.annotations.is_none() {
            violations.push(
                "evaluation.label is set but paths.annotations names no file".to_string(),
            );
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(violations))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn minimal_config_loads_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
        let path = write_config(
            dir.path(),
            "[paths]\ncorpus = \"corpus.jsonl\"\nout_dir = \"out\"\n",
        );
        let config = RunConfig::load(&path).unwrap();
        config.validate().unwrap();
        assert_eq!(config.lda.k, 10);
        assert_eq!(config.textprep.min_df, 2);
        assert_eq!(config.louvain.gammas, vec![1.0]);
        assert!(config.paths.corpus.is_absolute() || config.paths.corpus.starts_with(dir.path()));
    }

    #[test]
    fn every_violation_is_reported_at_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            concat!(
                "[paths]\ncorpus = \"missing.jsonl\"\nout_dir = \"out\"\n",
                "[textprep]\nmin_df = 0\nmax_df_ratio = 1.5\n",
                "[lda]\nk = 0\niterations = 10\nburn_in = 10\n",
                "[louvain]\ngammas = []\n",
                "[tsne]\nperplexity = -2.0\n",
                "[evaluation]\nlabel = \"eviction\"\n",
            ),
        );
        let config = RunConfig::load(&path).unwrap();
        let err = config.validate().unwrap_err();
        let text = err.to_string();
        for needle in [
            "corpus file not found",
            "min_df",
            "max_df_ratio",
            "lda.k",
            "iterations",
            "gammas",
            "perplexity",
            "annotations",
        ] {
            assert!(text.contains(needle), "missing violation {needle} in:\n{text}");
        }
        assert!(err.0.len() >= 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            "[paths]\ncorpus = \"c.jsonl\"\nout_dir = \"out\"\ntypo_key = 1\n",
        );
        let err = RunConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("typo_key"));
    }

    #[test]
    fn sweep_bounds_must_come_paired() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
        let path = write_config(
            dir.path(),
            concat!(
                "[paths]\ncorpus = \"corpus.jsonl\"\nout_dir = \"out\"\n",
                "[lda]\nsweep_from = 2\n",
            ),
        );
        let config = RunConfig::load(&path).unwrap();
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("set together"));
    }
}
