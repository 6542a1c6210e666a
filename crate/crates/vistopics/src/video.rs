//! Video discovery, probing, and fixed-rate frame extraction through an
//! external decoder process.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;
use regex::Regex;

use crate::config::ExtractionConfig;
use crate::error::{Error, Result};
use crate::store::{FrameRecord, Store, VideoEntry, VideoStatus};

pub const VIDEO_EXTENSIONS: &[&str] = &["mp4", "mkv", "webm", "mov"];

/// A video file found on disk, before probing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoFile {
    pub video_id: String,
    pub path: PathBuf,
}

/// Video files in `dir` with a recognized extension, in lexicographic
/// file-name order, with slug ids made unique by numeric suffixes.
pub fn scan_videos(dir: &Path) -> Result<Vec<VideoFile>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(format!("read {}", dir.display()), e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("read {}", dir.display()), e))?;
        let path = entry.path();
        let recognized = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| VIDEO_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if recognized && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut seen: HashMap<String, usize> = HashMap::new();
    Ok(paths
        .into_iter()
        .map(|path| {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("video");
            let base = slug(stem);
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            let video_id = if *n == 1 { base } else { format!("{base}_{n}") };
            VideoFile { video_id, path }
        })
        .collect())
}

/// Lowercase ASCII letters, digits, `-` and `_`; anything else becomes `_`.
pub fn slug(stem: &str) -> String {
    let mut out = String::with_capacity(stem.len());
    for c in stem.chars() {
        let c = c.to_ascii_lowercase();
        if c.is_ascii_alphanumeric() || c == '-' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    let out = out.trim_matches('_').to_string();
    if out.is_empty() {
        "video".into()
    } else {
        out
    }
}

/// Stream metadata read from the decoder's diagnostic output.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub native_fps: f64,
    pub total_frames: u64,
    pub width: u32,
    pub height: u32,
    /// The stream's base (`tbr`) rate when printed. It differs from the
    /// average rate for variable-frame-rate streams.
    pub base_fps: Option<f64>,
}

impl Probe {
    pub fn duration_sec(&self) -> f64 {
        self.total_frames as f64 / self.native_fps
    }

    /// Whether the base and average rates differ by more than 10%.
    pub fn variable_rate(&self) -> bool {
        self.base_fps
            .is_some_and(|b| (b - self.native_fps).abs() > 0.1 * b.min(self.native_fps))
    }
}

fn expand(args: &[String], input: &Path, stride: u64) -> Vec<String> {
    let input = input.to_string_lossy();
    args.iter()
        .map(|a| a.replace("{input}", &input).replace("{stride}", &stride.to_string()))
        .collect()
}

pub fn probe_video(path: &Path, cfg: &ExtractionConfig) -> Result<Probe> {
    let decoder = cfg.decoder_path();
    let out = Command::new(&decoder)
        .args(expand(&cfg.probe_args, path, 1))
        .stdin(Stdio::null())
        .output()
        .map_err(|e| Error::io(format!("spawn decoder `{decoder}`"), e))?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    if !out.status.success() {
        let last = stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        return Err(Error::Runtime(format!(
            "probe {} failed ({}): {last}",
            path.display(),
            out.status
        )));
    }
    let probe = parse_probe(&stderr).ok_or_else(|| {
        Error::Runtime(format!("probe {}: no video stream metadata found", path.display()))
    })?;
    if probe.variable_rate() {
        log::warn!(
            "{}: variable frame rate (average {} fps, base {} fps); sampling uses the average",
            path.display(),
            probe.native_fps,
            probe.base_fps.unwrap_or_default()
        );
    }
    Ok(probe)
}

/// Parse the first `Video:` stream line (size and rate) and the last
/// `frame=` progress counter.
pub fn parse_probe(stderr: &str) -> Option<Probe> {
    static STREAM: OnceLock<Regex> = OnceLock::new();
    static FRAMES: OnceLock<Regex> = OnceLock::new();
    static TBR: OnceLock<Regex> = OnceLock::new();
    let stream = STREAM.get_or_init(|| {
        Regex::new(r"Video:.*?[ ,](\d{1,5})x(\d{1,5})[ ,\[].*?([0-9]+(?:\.[0-9]+)?)(k?) (?:fps|tbr)")
            .expect("valid regex")
    });
    let frames = FRAMES.get_or_init(|| Regex::new(r"frame=\s*(\d+)").expect("valid regex"));
    let tbr = TBR.get_or_init(|| Regex::new(r"([0-9]+(?:\.[0-9]+)?)(k?) tbr").expect("valid regex"));
    let rate = |value: &str, kilo: &str| {
        value.parse::<f64>().ok().map(|v| if kilo == "k" { v * 1000.0 } else { v })
    };

    let line = stderr.lines().find(|l| l.contains("Video:"))?;
    let caps = stream.captures(line)?;
    let width = caps[1].parse().ok()?;
    let height = caps[2].parse().ok()?;
    let native_fps = rate(&caps[3], &caps[4])?;
    let base_fps = tbr.captures(line).and_then(|c| rate(&c[1], &c[2]));
    let total_frames = frames
        .captures_iter(stderr)
        .last()
        .and_then(|c| c[1].parse().ok())?;
    (native_fps > 0.0 && width > 0 && height > 0).then_some(Probe {
        native_fps,
        total_frames,
        width,
        height,
        base_fps,
    })
}

/// Native frames between samples: `round(native / target)`, at least 1.
pub fn stride(native_fps: f64, target_fps: f64) -> u64 {
    ((native_fps / target_fps).round() as u64).max(1)
}

/// Frames a complete extraction yields.
pub fn expected_frames(total_frames: u64, stride: u64) -> u64 {
    if total_frames == 0 {
        0
    } else {
        (total_frames - 1) / stride + 1
    }
}

/// Extract one probed video and describe the outcome. Never fails as a
/// whole: a probe error yields a `ProbeFailed` entry, a decode error a
/// `Partial` one that keeps the frames written before it.
pub fn process_video(
    file: &VideoFile,
    probe: Result<Probe>,
    store: &Store,
    cfg: &ExtractionConfig,
) -> (VideoEntry, Vec<FrameRecord>) {
    let bytes = fs::metadata(&file.path).map(|m| m.len()).unwrap_or(0);
    let mut entry = VideoEntry {
        video_id: file.video_id.clone(),
        path: file.path.clone(),
        native_fps: 0.0,
        total_frames: 0,
        duration_sec: 0.0,
        width: 0,
        height: 0,
        bytes,
        status: VideoStatus::ProbeFailed,
        n_frames: 0,
        message: String::new(),
    };
    let probe = match probe {
        Ok(p) => p,
        Err(e) => {
            log::warn!("skipping {}: {e}", file.path.display());
            entry.message = e.to_string();
            return (entry, Vec::new());
        }
    };
    entry.native_fps = probe.native_fps;
    entry.total_frames = probe.total_frames;
    entry.duration_sec = probe.duration_sec();
    entry.width = probe.width;
    entry.height = probe.height;

    let (frames, error) = extract_frames(file, &probe, store, cfg);
    entry.n_frames = frames.len() as u32;
    let stride = stride(probe.native_fps, cfg.target_fps.min(probe.native_fps));
    let expected = expected_frames(probe.total_frames, stride);
    match error {
        Some(e) => {
            log::warn!("{}: partial extraction ({} frames): {e}", file.video_id, frames.len());
            entry.status = VideoStatus::Partial;
            entry.message = e;
        }
        None if (frames.len() as u64) < expected => {
            entry.status = VideoStatus::Partial;
            entry.message = format!("decoder produced {} of {expected} frames", frames.len());
        }
        None => entry.status = VideoStatus::Ok,
    }
    (entry, frames)
}

/// Decode every `stride`-th frame and write `frame_<seq>.jpg` files. On a
/// mid-stream failure the frames written so far are kept and the error is
/// returned alongside them.
pub fn extract_frames(
    file: &VideoFile,
    probe: &Probe,
    store: &Store,
    cfg: &ExtractionConfig,
) -> (Vec<FrameRecord>, Option<String>) {
    let mut target_fps = cfg.target_fps;
    if target_fps > probe.native_fps {
        log::info!(
            "{}: target {target_fps} fps exceeds native {} fps; clamping",
            file.video_id,
            probe.native_fps
        );
        target_fps = probe.native_fps;
    }
    let stride = stride(probe.native_fps, target_fps);
    let dir = store.frames_dir(&file.video_id);
    if dir.exists() {
        if let Err(e) = fs::remove_dir_all(&dir) {
            return (Vec::new(), Some(format!("clear {}: {e}", dir.display())));
        }
    }
    if let Err(e) = fs::create_dir_all(&dir) {
        return (Vec::new(), Some(format!("create {}: {e}", dir.display())));
    }

    let decoder = cfg.decoder_path();
    let mut child = match Command::new(&decoder)
        .args(expand(&cfg.extract_args, &file.path, stride))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return (Vec::new(), Some(format!("spawn decoder `{decoder}`: {e}"))),
    };
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let stderr_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let frame_len = probe.width as usize * probe.height as usize * 3;
    let mut buf = vec![0u8; frame_len];
    let mut records = Vec::new();
    let mut error = None;
    loop {
        match read_full(&mut stdout, &mut buf) {
            Ok(0) => break,
            Ok(n) if n < frame_len => {
                error = Some(format!("truncated frame after {} frames", records.len()));
                break;
            }
            Ok(_) => {}
            Err(e) => {
                error = Some(format!("read decoder output: {e}"));
                break;
            }
        }
        let seq = records.len() as u32 + 1;
        let index = u64::from(seq - 1) * stride;
        let rel = Store::frame_rel_path(&file.video_id, seq);
        if let Err(e) = write_jpeg(&store.path(&rel), &buf, probe.width, probe.height, cfg.jpeg_quality) {
            error = Some(e.to_string());
            break;
        }
        records.push(FrameRecord {
            video_id: file.video_id.clone(),
            seq,
            source_frame_index: index,
            timestamp_sec: index as f64 / probe.native_fps,
            path: rel,
            hash: None,
            duplicate_of: None,
        });
    }
    drop(stdout);
    let status = child.wait();
    let diagnostics = stderr_reader.join().unwrap_or_default();
    match status {
        Ok(s) if !s.success() && error.is_none() => {
            let last = diagnostics.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
            error = Some(format!("decoder exited with {s}: {last}"));
        }
        Err(e) if error.is_none() => error = Some(format!("wait for decoder: {e}")),
        _ => {}
    }
    (records, error)
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

pub fn write_jpeg(path: &Path, rgb: &[u8], width: u32, height: u32, quality: u8) -> Result<()> {
    let ctx = || format!("write {}", path.display());
    let file = fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    JpegEncoder::new_with_quality(&mut w, quality)
        .encode(rgb, width, height, ExtendedColorType::Rgb8)
        .map_err(|e| Error::Runtime(format!("{}: {e}", ctx())))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(ctx(), e))
}
