//! Frame captioning: a remote chat-completions client, an offline stub, and
//! the sequential, resumable batch driver.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::path::Path;
use std::time::{Duration, Instant};

use base64::Engine;
use rand::Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{CaptionerConfig, API_KEY_ENV};
use crate::error::{Error, Result};
use crate::store::{self, CaptionRecord, CaptionStatus, CAPTIONS_HEADER};

/// Standard padded base64 of the exact file bytes.
pub fn encode_image(bytes: &[u8]) -> Result<String> {
    if bytes.is_empty() {
        return Err(Error::Runtime("cannot encode an empty image".into()));
    }
    Ok(base64::engine::general_purpose::STANDARD.encode(bytes))
}

/// Outcome of one captioning request.
#[derive(Debug, Clone, PartialEq)]
pub enum Attempt {
    Caption(String),
    /// Worth retrying after a backoff (rate limits, server errors,
    /// timeouts, malformed bodies).
    Retry(String),
    /// Retrying cannot help (client errors other than 429).
    Fail(String),
}

pub trait Captioner {
    fn request(&mut self, image: &[u8]) -> Attempt;

    /// Remote captioners get a random pause between requests.
    fn is_remote(&self) -> bool;
}

/// Chat-completions client: one user message carrying the prompt and the
/// frame as a base64 data URL.
pub struct RemoteCaptioner {
    agent: ureq::Agent,
    url: String,
    model: String,
    prompt: String,
    api_key: Option<String>,
}

impl RemoteCaptioner {
    pub fn new(cfg: &CaptionerConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_sec)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{API_KEY_ENV} is not set; sending requests without authorization");
        }
        Self {
            agent,
            url: cfg.endpoint_url.clone(),
            model: cfg.model_name.clone(),
            prompt: cfg.prompt.clone(),
            api_key,
        }
    }

    /// Replace the key read from the environment.
    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn request_body(&self, image: &[u8]) -> Result<Value> {
        let data_url = format!("data:image/jpeg;base64,{}", encode_image(image)?);
        Ok(json!({
            "model": self.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": self.prompt},
                    {"type": "image_url", "image_url": {"url": data_url}},
                ],
            }],
        }))
    }
}

impl Captioner for RemoteCaptioner {
    fn request(&mut self, image: &[u8]) -> Attempt {
        let body = match self.request_body(image) {
            Ok(b) => b,
            Err(e) => return Attempt::Fail(e.to_string()),
        };
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fail(format!("HTTP {status}"));
        }
        let parsed: Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Attempt::Retry(format!("malformed response: {e}")),
        };
        match parsed.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(text) => Attempt::Caption(text.to_string()),
            None => Attempt::Retry("response has no choices[0].message.content".into()),
        }
    }

    fn is_remote(&self) -> bool {
        true
    }
}

/// Offline captioner for tests and dry runs. The caption starts with
/// `synthetic scene <first 8 hex digits of the SHA-256 of the bytes>` and
/// continues with a few words derived from the image (overall brightness,
/// dominant channel) and from the hash, so that visually similar frames
/// share vocabulary and a topic model has something to find.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubCaptioner;

const BRIGHTNESS: [&str; 4] = ["night", "evening", "daylight", "studio"];
const CHANNEL_THEMES: [[&str; 3]; 3] = [
    ["fire", "rally", "podium"],
    ["forest", "field", "garden"],
    ["ocean", "river", "harbor"],
];
const SUBJECTS: [&str; 8] = [
    "reporter", "anchor", "vehicle", "building", "street", "screen", "crowd", "chart",
];

impl StubCaptioner {
    pub fn caption_for(bytes: &[u8]) -> String {
        let digest = Sha256::digest(bytes);
        let hex: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
        let mut caption = format!("synthetic scene {hex}");
        if let Some((luma, channel)) = image_summary(bytes) {
            let bright = BRIGHTNESS[(luma as usize * BRIGHTNESS.len() / 256).min(3)];
            let themes = CHANNEL_THEMES[channel];
            caption.push_str(&format!(
                " {bright} {} {}",
                themes[0],
                themes[1 + usize::from(digest[4]) % 2]
            ));
        }
        caption.push(' ');
        caption.push_str(SUBJECTS[usize::from(digest[5]) % SUBJECTS.len()]);
        caption
    }
}

/// Mean BT.601 luma and the index of the channel with the largest mean.
fn image_summary(bytes: &[u8]) -> Option<(u8, usize)> {
    let img = image::load_from_memory(bytes).ok()?.to_rgb8();
    let n = u64::from(img.width()) * u64::from(img.height());
    if n == 0 {
        return None;
    }
    let mut sums = [0u64; 3];
    for p in img.pixels() {
        for c in 0..3 {
            sums[c] += u64::from(p[c]);
        }
    }
    let luma = (299 * sums[0] + 587 * sums[1] + 114 * sums[2]) / (1000 * n);
    let channel = (0..3).max_by_key(|&c| (sums[c], std::cmp::Reverse(c))).unwrap_or(0);
    Some((luma.min(255) as u8, channel))
}

impl Captioner for StubCaptioner {
    fn request(&mut self, image: &[u8]) -> Attempt {
        Attempt::Caption(Self::caption_for(image))
    }

    fn is_remote(&self) -> bool {
        false
    }
}

/// Retry and pacing knobs taken from the captioner config.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub delay_range: (Duration, Duration),
}

impl From<&CaptionerConfig> for Policy {
    fn from(c: &CaptionerConfig) -> Self {
        Self {
            max_retries: c.max_retries,
            backoff_base: Duration::from_secs_f64(c.backoff_base_sec),
            delay_range: (
                Duration::from_secs_f64(c.delay_range_sec[0]),
                Duration::from_secs_f64(c.delay_range_sec[1]),
            ),
        }
    }
}

/// Caption one frame, retrying transient failures with exponential backoff.
pub fn caption_one(captioner: &mut dyn Captioner, root: &Path, frame_path: &str, policy: &Policy) -> CaptionRecord {
    let start = Instant::now();
    let mut record = CaptionRecord {
        frame_path: frame_path.to_string(),
        caption: String::new(),
        status: CaptionStatus::Failed,
        attempts: 0,
        elapsed_sec: 0.0,
    };
    let bytes = match fs::read(root.join(frame_path)) {
        Ok(b) if !b.is_empty() => b,
        Ok(_) => {
            log::warn!("{frame_path}: empty file");
            return record;
        }
        Err(e) => {
            log::warn!("{frame_path}: {e}");
            return record;
        }
    };
    loop {
        record.attempts += 1;
        let why = match captioner.request(&bytes) {
            Attempt::Caption(text) => {
                let text = text.trim();
                if !text.is_empty() {
                    record.caption = text.to_string();
                    record.status = CaptionStatus::Ok;
                    break;
                }
                "empty caption".to_string()
            }
            Attempt::Retry(why) => why,
            Attempt::Fail(why) => {
                log::warn!("{frame_path}: {why}; not retrying");
                break;
            }
        };
        if record.attempts > policy.max_retries {
            log::warn!("{frame_path}: giving up after {} attempts: {why}", record.attempts);
            break;
        }
        let wait = policy.backoff_base * 2u32.pow(record.attempts - 1);
        log::info!("{frame_path}: {why}; retrying in {:.1}s", wait.as_secs_f64());
        std::thread::sleep(wait);
    }
    record.elapsed_sec = start.elapsed().as_secs_f64();
    record
}

/// Caption `frames` (run-relative paths, manifest order) one at a time,
/// appending each record to `csv_path` as soon as it completes.
///
/// With `resume`, frames already `ok` in an existing CSV are not requested
/// again. When the batch finishes the CSV is rewritten in manifest order
/// with one row per frame.
pub fn caption_corpus(
    captioner: &mut dyn Captioner,
    root: &Path,
    frames: &[String],
    csv_path: &Path,
    policy: &Policy,
    resume: bool,
) -> Result<Vec<CaptionRecord>> {
    let mut previous: HashMap<String, CaptionRecord> = HashMap::new();
    if resume && csv_path.exists() {
        for r in store::read_csv::<CaptionRecord>(csv_path, CAPTIONS_HEADER)? {
            previous.insert(r.frame_path.clone(), r);
        }
    }
    let done: HashSet<&str> = previous
        .values()
        .filter(|r| r.status == CaptionStatus::Ok)
        .map(|r| r.frame_path.as_str())
        .collect();
    let todo: Vec<&String> = frames.iter().filter(|f| !done.contains(f.as_str())).collect();
    log::info!("captioning {} frames ({} already done)", todo.len(), frames.len() - todo.len());

    let mut log = RealtimeLog::open(csv_path, resume && csv_path.exists())?;
    let mut fresh: HashMap<String, CaptionRecord> = HashMap::new();
    let mut rng = rand::rng();
    for (i, frame) in todo.iter().enumerate() {
        if captioner.is_remote() && i > 0 {
            let (lo, hi) = policy.delay_range;
            let pause = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            std::thread::sleep(pause);
        }
        let record = caption_one(captioner, root, frame, policy);
        log.append(&record)?;
        fresh.insert(frame.to_string(), record);
    }
    drop(log);

    let records: Vec<CaptionRecord> = frames
        .iter()
        .filter_map(|f| fresh.remove(f).or_else(|| previous.remove(f)))
        .collect();
    store::write_atomic(csv_path, &store::csv_bytes(CAPTIONS_HEADER, &records)?)?;
    Ok(records)
}

/// Append-only CSV that is flushed and synced after every row.
struct RealtimeLog {
    writer: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl RealtimeLog {
    fn open(path: &Path, append: bool) -> Result<Self> {
        let ctx = || format!("open {}", path.display());
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(ctx(), e))?;
        }
        let file = if append {
            OpenOptions::new().append(true).open(path)
        } else {
            File::create(path)
        }
        .map_err(|e| Error::io(ctx(), e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if !append {
            writer
                .write_record(CAPTIONS_HEADER)
                .map_err(|e| Error::Runtime(format!("{}: {e}", ctx())))?;
        }
        let mut log = Self {
            writer,
            path: path.to_path_buf(),
        };
        log.sync()?;
        Ok(log)
    }

    fn append(&mut self, record: &CaptionRecord) -> Result<()> {
        self.writer
            .serialize(record)
            .map_err(|e| Error::Runtime(format!("append {}: {e}", self.path.display())))?;
        self.sync()
    }

    fn sync(&mut self) -> Result<()> {
        let ctx = || format!("sync {}", self.path.display());
        self.writer.flush().map_err(|e| Error::io(ctx(), e))?;
        self.writer.get_ref().sync_data().map_err(|e| Error::io(ctx(), e))?;
        Ok(())
    }
}

impl Drop for RealtimeLog {
    fn drop(&mut self) {
        let _ = self.writer.flush();
    }
}

pub fn make_captioner(cfg: &CaptionerConfig) -> Box<dyn Captioner> {
    match cfg.kind {
        crate::config::CaptionerKind::Stub => Box::new(StubCaptioner),
        crate::config::CaptionerKind::Remote => Box::new(RemoteCaptioner::new(cfg)),
    }
}
