use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::ProfileConfig;
use crate::error::{Error, Result};
use crate::report::DEFAULT_DELTA_RULE;
use crate::timedtext::FilterConfig;
use crate::timeline::{DriftModel, DEFAULT_WINDOW_HALF_MS};

/// Input and output locations. Relative paths resolve against the directory
/// holding the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub srt_source: PathBuf,
    /// Target-language SRT per language code.
    pub srt_reference: BTreeMap<String, PathBuf>,
    /// JSON Lines frame descriptions, or a directory of `frame_<secs>.jpg`.
    pub frames: PathBuf,
    pub workdir: PathBuf,
    /// Directory of `<variant>.<lang>.jsonl` segment score files; defaults to `<workdir>/scores`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    /// Needed only when `paths.frames` is an image directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub describe: Option<ProfileConfig>,
    pub summarize: ProfileConfig,
    pub translate: ProfileConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectiveConfig {
    #[serde(default = "default_k_list")]
    pub k_list: Vec<f64>,
}

impl Default for SelectiveConfig {
    fn default() -> Self {
        Self { k_list: default_k_list() }
    }
}

fn default_k_list() -> Vec<f64> {
    vec![20.0, 30.0]
}

fn default_window() -> u64 {
    DEFAULT_WINDOW_HALF_MS
}

fn default_fps() -> f64 {
    1.0
}

fn default_delta_rule() -> String {
    DEFAULT_DELTA_RULE.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub movie_id: String,
    pub duration_ms: u64,
    pub languages: Vec<String>,
    pub paths: PathsConfig,
    #[serde(default = "default_window")]
    pub window_half_ms: u64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default)]
    pub filter: FilterConfig,
    pub backends: BackendsConfig,
    #[serde(default)]
    pub selective: SelectiveConfig,
    /// Opt-in timeline perturbation applied by `prepare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftModel>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta_rule")]
    pub delta_rule: String,
}

/// Command-line values that replace configuration keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub window_half_ms: Option<u64>,
    pub k_list: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(w) = overrides.window_half_ms {
            self.window_half_ms = w;
        }
        if let Some(k) = &overrides.k_list {
            self.selective.k_list = k.clone();
        }
        if let Some(s) = overrides.seed {
            self.seed = s;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.movie_id.is_empty() {
            return Err(Error::Config("movie_id is empty".into()));
        }
        if self.languages.is_empty() {
            return Err(Error::Config("languages is empty".into()));
        }
        for lang in &self.languages {
            if !self.paths.srt_reference.contains_key(lang) {
                return Err(Error::Config(format!("paths.srt_reference has no entry for {lang:?}")));
            }
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.selective.k_list.is_empty() {
            return Err(Error::Config("selective.k_list is empty".into()));
        }
        for &k in &self.selective.k_list {
            if !(k > 0.0 && k <= 100.0) {
                return Err(Error::Config(format!("selective.k_list value {k} is outside (0, 100]")));
            }
        }
        crate::timedtext::filter(&[], self.filter)?;
        Ok(())
    }

    /// Makes every relative path absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.srt_source);
        self.paths.srt_reference.values_mut().for_each(fix);
        fix(&mut self.paths.frames);
        fix(&mut self.paths.workdir);
        if let Some(p) = self.paths.scores_dir.as_mut() {
            fix(p);
        }
    }
}
