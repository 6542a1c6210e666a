//! Validation item generation, response storage, and scoring.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vistopics_core::lda::LdaModel;
use vistopics_core::validation::{generate_items, score, ItemSpec, Response, ScoreReport, TaskKind, ValidationItem};

use crate::config::ValidationConfig;
use crate::error::{Error, Result};
use crate::preprocess::CorpusArtifact;
use crate::store::{self, SCHEMA_VERSION};

/// `validation_items.json`. Holds the answer keys; never sent to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemsFile {
    pub schema_version: u32,
    pub seed: u64,
    pub items: Vec<ValidationItem>,
}

impl ItemsFile {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::StageNotRun {
                stage: "validate gen",
                command: "validate gen",
            });
        }
        let f: Self = store::read_json(path)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(path, format!("schema_version {}", f.schema_version)));
        }
        Ok(f)
    }

    pub fn of_kind(&self, kind: TaskKind) -> impl Iterator<Item = &ValidationItem> {
        self.items.iter().filter(move |i| i.kind == kind)
    }
}

/// Both task sets. Item ids are unique across kinds: intrusion items come
/// first, matching items continue the numbering.
pub fn generate(
    model: &LdaModel,
    corpus: &CorpusArtifact,
    cfg: &ValidationConfig,
    kinds: &[TaskKind],
    seed: u64,
) -> Result<ItemsFile> {
    let frames: Vec<String> = corpus.docs.iter().map(|d| d.frame_path.clone()).collect();
    let mut items = Vec::new();
    for &kind in kinds {
        let spec = ItemSpec {
            kind,
            n_items: cfg.n_items,
            depth: cfg.depth,
            seed,
            first_id: items.len() as u32 + 1,
        };
        items.extend(generate_items(model, &frames, &spec)?);
    }
    Ok(ItemsFile {
        schema_version: SCHEMA_VERSION,
        seed,
        items,
    })
}

/// One line of `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseLine {
    pub coder: String,
    pub item_id: u32,
    pub kind: TaskKind,
    pub choice: usize,
    /// Seconds since the Unix epoch.
    pub received_at: f64,
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseLine>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::schema(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Append-only response log, synced to disk after every line.
pub struct ResponseLog {
    file: File,
    path: PathBuf,
}

impl ResponseLog {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(format!("create {}", dir.display()), e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, line: &ResponseLine) -> Result<()> {
        let mut bytes = serde_json::to_vec(line).map_err(|e| Error::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        let ctx = || format!("append {}", self.path.display());
        self.file.write_all(&bytes).map_err(|e| Error::io(ctx(), e))?;
        self.file.sync_data().map_err(|e| Error::io(ctx(), e))
    }
}

pub fn score_responses(items: &ItemsFile, responses: &[ResponseLine]) -> Result<ScoreReport> {
    let plain: Vec<Response> = responses
        .iter()
        .map(|r| Response {
            coder: r.coder.clone(),
            item_id: r.item_id,
            choice: r.choice,
        })
        .collect();
    Ok(score(&items.items, &plain)?)
}
