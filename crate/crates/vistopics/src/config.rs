//! Pipeline configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vistopics_core::text::CorpusOptions;

use crate::error::{Error, Result};

pub const DEFAULT_PROMPT: &str = "Directly describe with brevity and as brief as possible the scene or characters without any introductory phrase like 'This image shows', 'In the scene', 'This image depicts' or similar phrases. If there is a text in the image mention there is a text but do not caption the text, just start describing the scene please. If you recognize historical figures and current celebrities and politicians in the picture give their full name, but don't give the whole background about who they are.";

pub const DECODER_ENV: &str = "VISTOPICS_DECODER";
pub const API_KEY_ENV: &str = "VISTOPICS_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Directory scanned for videos, relative to the config file.
    pub input_dir: PathBuf,
    pub run_dir: PathBuf,
    pub seed: u64,
    /// Worker pool width; 0 means one per logical CPU.
    pub jobs: usize,
    pub extraction: ExtractionConfig,
    pub dedup: DedupSection,
    pub captioner: CaptionerConfig,
    pub preprocess: PreprocessConfig,
    pub lda: LdaConfig,
    pub report: ReportConfig,
    pub validation: ValidationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            input_dir: "videos".into(),
            run_dir: "run".into(),
            seed: 42,
            jobs: 0,
            extraction: ExtractionConfig::default(),
            dedup: DedupSection::default(),
            captioner: CaptionerConfig::default(),
            preprocess: PreprocessConfig::default(),
            lda: LdaConfig::default(),
            report: ReportConfig::default(),
            validation: ValidationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub target_fps: f64,
    pub jpeg_quality: u8,
    /// Decoder executable; `VISTOPICS_DECODER` takes precedence.
    pub decoder: String,
    /// Arguments that make the decoder print stream metadata and a final
    /// decoded-frame counter to stderr.
    /// `{input}` is replaced by the video path.
    pub probe_args: Vec<String>,
    /// Arguments that make the decoder write every `{stride}`-th frame of
    /// `{input}` to stdout as packed RGB24.
    pub extract_args: Vec<String>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        let args = |s: &[&str]| s.iter().map(|a| a.to_string()).collect();
        Self {
            target_fps: 1.0,
            jpeg_quality: 90,
            decoder: "ffmpeg".into(),
            probe_args: args(&[
                "-hide_banner", "-nostdin", "-stats", "-i", "{input}", "-map", "0:v:0", "-f",
                "null", "-",
            ]),
            extract_args: args(&[
                "-hide_banner", "-loglevel", "error", "-nostdin", "-i", "{input}", "-map",
                "0:v:0", "-vf", "select=not(mod(n\\,{stride}))", "-fps_mode", "passthrough",
                "-f", "rawvideo", "-pix_fmt", "rgb24", "-",
            ]),
        }
    }
}

impl ExtractionConfig {
    pub fn decoder_path(&self) -> String {
        std::env::var(DECODER_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| self.decoder.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSection {
    pub threshold: f64,
}

impl Default for DedupSection {
    fn default() -> Self {
        Self { threshold: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionerKind {
    Remote,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionerConfig {
    pub kind: CaptionerKind,
    pub prompt: String,
    pub endpoint_url: String,
    pub model_name: String,
    /// Uniform random pause between remote requests, `[min, max]` seconds.
    pub delay_range_sec: [f64; 2],
    pub max_retries: u32,
    /// First retry waits this long; each later retry doubles it.
    pub backoff_base_sec: f64,
    pub timeout_sec: f64,
}

impl Default for CaptionerConfig {
    fn default() -> Self {
        Self {
            kind: CaptionerKind::Stub,
            prompt: DEFAULT_PROMPT.into(),
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            delay_range_sec: [1.0, 5.0],
            max_retries: 3,
            backoff_base_sec: 2.0,
            timeout_sec: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub min_caption_chars: usize,
    pub min_token_chars: usize,
    pub min_df: usize,
    pub max_df_ratio: f64,
    /// Plain-text stopword files, one token per line, `#` comments.
    pub stopword_files: Vec<PathBuf>,
    /// Extra domain stopwords given inline.
    pub stopwords: Vec<String>,
    pub english_filter: bool,
    pub english_threshold: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_caption_chars: 10,
            min_token_chars: 3,
            min_df: 10,
            max_df_ratio: 0.5,
            stopword_files: Vec::new(),
            stopwords: Vec::new(),
            english_filter: false,
            english_threshold: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub k_grid: Vec<usize>,
    pub alpha_multipliers: Vec<f64>,
    pub folds: usize,
    pub eta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub fold_in_iters: usize,
    pub fold_in_burn_in: usize,
    /// Used by `fit` when no sweep selection exists.
    pub k: Option<usize>,
    pub alpha: Option<f64>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k_grid: (1..=20).map(|i| i * 5).collect(),
            alpha_multipliers: vec![25.0, 10.0, 5.0, 2.0, 1.0],
            folds: 5,
            eta: 0.01,
            iters: 1000,
            burn_in: 500,
            thin: 10,
            fold_in_iters: 50,
            fold_in_burn_in: 25,
            k: None,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub n_terms: usize,
    pub n_reps: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { n_terms: 10, n_reps: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub n_items: usize,
    pub depth: usize,
    pub bind: String,
    /// Directory holding the coder UI bundle (`index.html` and assets).
    pub ui_dir: Option<PathBuf>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            n_items: 105,
            depth: 10,
            bind: "127.0.0.1:8080".into(),
            ui_dir: None,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file and resolve relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config: "))))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.input_dir = base.join(&cfg.input_dir);
        cfg.run_dir = base.join(&cfg.run_dir);
        for f in &mut cfg.preprocess.stopword_files {
            *f = base.join(&*f);
        }
        if let Some(ui) = &mut cfg.validation.ui_dir {
            *ui = base.join(&*ui);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("`{key}` {why}")));
        let x = &self.extraction;
        if !(x.target_fps > 0.0 && x.target_fps.is_finite()) {
            return bad("extraction.target_fps", "must be > 0");
        }
        if !(1..=100).contains(&x.jpeg_quality) {
            return bad("extraction.jpeg_quality", "must be in 1..=100");
        }
        if !(0.0..=1.0).contains(&self.dedup.threshold) {
            return bad("dedup.threshold", "must be in [0, 1]");
        }
        let c = &self.captioner;
        let [lo, hi] = c.delay_range_sec;
        if !(0.0 <= lo && lo <= hi) {
            return bad("captioner.delay_range_sec", "must satisfy 0 <= min <= max");
        }
        if c.timeout_sec <= 0.0 {
            return bad("captioner.timeout_sec", "must be > 0");
        }
        if c.backoff_base_sec < 0.0 {
            return bad("captioner.backoff_base_sec", "must be >= 0");
        }
        let p = &self.preprocess;
        if !(p.max_df_ratio > 0.0 && p.max_df_ratio <= 1.0) {
            return bad("preprocess.max_df_ratio", "must be in (0, 1]");
        }
        let l = &self.lda;
        if l.k_grid.is_empty() || l.k_grid.iter().any(|&k| k < 2) {
            return bad("lda.k_grid", "must be non-empty with every K >= 2");
        }
        if l.alpha_multipliers.is_empty() || l.alpha_multipliers.iter().any(|&m| m <= 0.0) {
            return bad("lda.alpha_multipliers", "must be non-empty and positive");
        }
        if l.folds < 2 {
            return bad("lda.folds", "must be >= 2");
        }
        if l.eta <= 0.0 {
            return bad("lda.eta", "must be > 0");
        }
        if l.iters <= l.burn_in {
            return bad("lda.iters", "must exceed lda.burn_in");
        }
        if l.thin == 0 {
            return bad("lda.thin", "must be >= 1");
        }
        if l.fold_in_iters <= l.fold_in_burn_in {
            return bad("lda.fold_in_iters", "must exceed lda.fold_in_burn_in");
        }
        if l.k.is_some_and(|k| k < 2) {
            return bad("lda.k", "must be >= 2");
        }
        if l.alpha.is_some_and(|a| a <= 0.0) {
            return bad("lda.alpha", "must be > 0");
        }
        if self.validation.depth < 5 {
            return bad("validation.depth", "must be >= 5");
        }
        Ok(())
    }

    /// Built-in options plus inline and file-supplied stopwords.
    pub fn corpus_options(&self) -> Result<CorpusOptions> {
        let p = &self.preprocess;
        let mut stopwords = p.stopwords.clone();
        for file in &p.stopword_files {
            let text = std::fs::read_to_string(file)
                .map_err(|e| Error::Config(format!("preprocess.stopword_files: {}: {e}", file.display())))?;
            stopwords.extend(parse_stopwords(&text));
        }
        Ok(CorpusOptions {
            min_df: p.min_df,
            max_df_ratio: p.max_df_ratio,
            min_token_chars: p.min_token_chars,
            stopwords,
        })
    }
}

/// One token per line; `#` starts a comment; blank lines ignored.
pub fn parse_stopwords(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}
