//! On-disk run layout, manifests, and atomic persistence.
//!
//! ```text
//! <run>/run.json
//! <run>/frames/<video_id>/frame_<seq>.jpg
//! <run>/manifests/{videos,frames,duplicates,captions,sweep}.csv
//! <run>/corpus.json  <run>/model.json
//! <run>/report/{topics.json,topics.html,metrics.txt,metrics.json}
//! <run>/validation/{validation_items.json,responses.jsonl,scores.json}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vistopics_core::Hash64;

use crate::error::{Error, Result};

/// Bumped whenever an artifact's layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Extract,
    Dedup,
    Caption,
    Preprocess,
    Sweep,
    Fit,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Dedup => "dedup",
            Stage::Caption => "caption",
            Stage::Preprocess => "preprocess",
            Stage::Sweep => "sweep",
            Stage::Fit => "fit",
            Stage::Report => "report",
        }
    }

    /// The subcommand that produces this stage's artifacts.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Ingest => "extract",
            other => other.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoStatus {
    Ok,
    Partial,
    ProbeFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub path: PathBuf,
    pub native_fps: f64,
    pub total_frames: u64,
    pub duration_sec: f64,
    pub width: u32,
    pub height: u32,
    pub bytes: u64,
    pub status: VideoStatus,
    pub n_frames: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub video_id: String,
    pub seq: u32,
    pub source_frame_index: u64,
    pub timestamp_sec: f64,
    /// Relative to the run directory.
    pub path: String,
    #[serde(rename = "hash_hex", with = "opt_hash")]
    pub hash: Option<Hash64>,
    pub duplicate_of: Option<u32>,
}

mod opt_hash {
    use serde::{Deserialize, Deserializer, Serializer};
    use vistopics_core::Hash64;

    pub fn serialize<S: Serializer>(h: &Option<Hash64>, s: S) -> Result<S::Ok, S::Error> {
        match h {
            Some(h) => s.collect_str(h),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Hash64>, D::Error> {
        let s = String::deserialize(d)?;
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateEntry {
    pub video_id: String,
    pub duplicate_seq: u32,
    pub original_seq: u32,
    #[serde(with = "four_decimals")]
    pub similarity: f64,
}

mod four_decimals {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{x:.4}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub frame_path: String,
    pub caption: String,
    pub status: CaptionStatus,
    pub attempts: u32,
    pub elapsed_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub fold: usize,
    pub perplexity: Option<f64>,
}

pub const VIDEOS_HEADER: &[&str] = &[
    "video_id", "path", "native_fps", "total_frames", "duration_sec", "width", "height", "bytes",
    "status", "n_frames", "message",
];
pub const FRAMES_HEADER: &[&str] = &[
    "video_id", "seq", "source_frame_index", "timestamp_sec", "path", "hash_hex", "duplicate_of",
];
pub const DUPLICATES_HEADER: &[&str] = &["video_id", "duplicate_seq", "original_seq", "similarity"];
pub const CAPTIONS_HEADER: &[&str] = &["frame_path", "caption", "status", "attempts", "elapsed_sec"];
pub const SWEEP_HEADER: &[&str] = &["K", "alpha", "fold", "perplexity"];

/// Wall time and sizes recorded for one completed stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_sec: f64,
    pub n_videos: u64,
    pub n_frames: u64,
    pub bytes: Option<u64>,
    pub schema_version: u32,
    pub finished_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub config: serde_json::Value,
    pub stages: BTreeMap<Stage, StageRecord>,
    /// `(K*, alpha*)` chosen by the most recent sweep.
    pub selection: Option<Selection>,
}

/// Handle on one run directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn frames_dir(&self, video_id: &str) -> PathBuf {
        self.root.join("frames").join(video_id)
    }

    pub fn frame_rel_path(video_id: &str, seq: u32) -> String {
        format!("frames/{video_id}/frame_{seq}.jpg")
    }

    pub fn manifest(&self, name: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{name}.csv"))
    }

    pub fn run_json(&self) -> PathBuf {
        self.root.join("run.json")
    }

    pub fn corpus_json(&self) -> PathBuf {
        self.root.join("corpus.json")
    }

    pub fn model_json(&self) -> PathBuf {
        self.root.join("model.json")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn validation_dir(&self) -> PathBuf {
        self.root.join("validation")
    }

    pub fn load_run(&self) -> Result<RunManifest> {
        let path = self.run_json();
        if !path.exists() {
            return Ok(RunManifest {
                schema_version: SCHEMA_VERSION,
                ..RunManifest::default()
            });
        }
        let run: RunManifest = read_json(&path)?;
        if run.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                &path,
                format!("schema_version {} (expected {SCHEMA_VERSION})", run.schema_version),
            ));
        }
        Ok(run)
    }

    /// Existing run manifest, or an error when nothing has run yet.
    pub fn require_run(&self) -> Result<RunManifest> {
        if !self.run_json().exists() {
            return Err(Error::Config(format!(
                "no run manifest at {}",
                self.run_json().display()
            )));
        }
        self.load_run()
    }

    pub fn save_run(&self, run: &RunManifest) -> Result<()> {
        write_json(&self.run_json(), run)
    }

    /// Fail with a prerequisite error unless `stage` completed in this run.
    pub fn require_stage(&self, stage: Stage) -> Result<RunManifest> {
        let run = self.load_run()?;
        match run.stages.get(&stage) {
            Some(rec) if rec.schema_version == SCHEMA_VERSION => Ok(run),
            Some(rec) => Err(Error::schema(
                self.run_json(),
                format!(
                    "{} artifacts have schema_version {} (expected {SCHEMA_VERSION})",
                    stage.name(),
                    rec.schema_version
                ),
            )),
            None => Err(Error::StageNotRun {
                stage: stage.name(),
                command: stage.command(),
            }),
        }
    }

    /// Record a completed stage. Later stages were computed from the
    /// replaced outputs, so their records (and any sweep selection made from
    /// them) are dropped.
    pub fn record_stage(&self, stage: Stage, record: StageRecord) -> Result<()> {
        let mut run = self.load_run()?;
        run.stages.retain(|s, _| *s < stage);
        if stage < Stage::Sweep {
            run.selection = None;
        }
        run.stages.insert(stage, record);
        self.save_run(&run)
    }

    pub fn write_videos(&self, rows: &[VideoEntry]) -> Result<PathBuf> {
        self.write_csv("videos", VIDEOS_HEADER, rows)
    }

    pub fn write_frames(&self, rows: &[FrameRecord]) -> Result<PathBuf> {
        self.write_csv("frames", FRAMES_HEADER, rows)
    }

    pub fn write_duplicates(&self, rows: &[DuplicateEntry]) -> Result<PathBuf> {
        self.write_csv("duplicates", DUPLICATES_HEADER, rows)
    }

    pub fn write_captions(&self, rows: &[CaptionRecord]) -> Result<PathBuf> {
        self.write_csv("captions", CAPTIONS_HEADER, rows)
    }

    pub fn write_sweep(&self, rows: &[SweepCsvRow]) -> Result<PathBuf> {
        self.write_csv("sweep", SWEEP_HEADER, rows)
    }

    pub fn videos(&self) -> Result<Vec<VideoEntry>> {
        self.require_stage(Stage::Extract)?;
        read_csv(&self.manifest("videos"), VIDEOS_HEADER)
    }

    pub fn frames(&self) -> Result<Vec<FrameRecord>> {
        self.require_stage(Stage::Extract)?;
        read_csv(&self.manifest("frames"), FRAMES_HEADER)
    }

    /// Frames after dedup: hashes and `duplicate_of` filled in.
    pub fn hashed_frames(&self) -> Result<Vec<FrameRecord>> {
        self.require_stage(Stage::Dedup)?;
        read_csv(&self.manifest("frames"), FRAMES_HEADER)
    }

    pub fn duplicates(&self) -> Result<Vec<DuplicateEntry>> {
        self.require_stage(Stage::Dedup)?;
        read_csv(&self.manifest("duplicates"), DUPLICATES_HEADER)
    }

    pub fn captions(&self) -> Result<Vec<CaptionRecord>> {
        self.require_stage(Stage::Caption)?;
        read_csv(&self.manifest("captions"), CAPTIONS_HEADER)
    }

    pub fn sweep_rows(&self) -> Result<Vec<SweepCsvRow>> {
        self.require_stage(Stage::Sweep)?;
        read_csv(&self.manifest("sweep"), SWEEP_HEADER)
    }

    fn write_csv<T: Serialize>(&self, name: &str, header: &[&str], rows: &[T]) -> Result<PathBuf> {
        let path = self.manifest(name);
        write_atomic(&path, &csv_bytes(header, rows)?)?;
        Ok(path)
    }
}

/// Serialize rows under an explicit header, so an empty table still has one.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Runtime(format!("csv encode: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| Error::Runtime(format!("csv encode: {e}")))
}

/// Parse a CSV manifest whose header must equal `header` exactly.
pub fn read_csv<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::schema(path, format!("cannot open: {e}")),
        _ => Error::schema(path, e.to_string()),
    })?;
    let found = r.headers().map_err(|e| Error::schema(path, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::schema(
            path,
            format!("header {:?} does not match expected {:?}", found.iter().collect::<Vec<_>>(), header),
        ));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::schema(path, format!("row {}: {e}", i + 1))))
        .collect()
}

/// Write via a sibling temp file and rename, so readers never see a
/// truncated file under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("create {}", dir.display()), e))?;
    let ctx = || format!("write {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(ctx(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(ctx(), e))?;
    tmp.persist(path).map_err(|e| Error::io(ctx(), e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Runtime(format!("encode {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::schema(path, e.to_string()))
}

/// Total size of regular files under `dir` (0 when it does not exist).
pub fn dir_bytes(dir: &Path) -> u64 {
    let Ok(entries) = fs::read_dir(dir) else {
        return 0;
    };
    entries
        .flatten()
        .map(|e| match e.file_type() {
            Ok(t) if t.is_dir() => dir_bytes(&e.path()),
            Ok(_) => e.metadata().map(|m| m.len()).unwrap_or(0),
            Err(_) => 0,
        })
        .sum()
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
