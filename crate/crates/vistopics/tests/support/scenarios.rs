//! Captioner protocol scenarios against the mock endpoint. Each returns
//! `Err` with a description of the first mismatch.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use vistopics::caption::{caption_corpus, Policy, RemoteCaptioner};
use vistopics::config::CaptionerConfig;
use vistopics::store::{read_csv, CaptionRecord, CaptionStatus, CAPTIONS_HEADER};

use super::images::{jpeg_bytes, texture};
use super::mock::{completion, MockServer, Recorded};

pub const KEY: &str = "test-key-123";

/// Five distinct frames on disk; returns their run-relative paths and bytes.
pub fn frames(root: &Path) -> (Vec<String>, Vec<Vec<u8>>) {
    let dir = root.join("frames/clip");
    std::fs::create_dir_all(&dir).unwrap();
    let mut paths = Vec::new();
    let mut bytes = Vec::new();
    for i in 1..=5u64 {
        let b = jpeg_bytes(&texture(i, 32, 32), 90);
        std::fs::write(dir.join(format!("frame_{i}.jpg")), &b).unwrap();
        paths.push(format!("frames/clip/frame_{i}.jpg"));
        bytes.push(b);
    }
    (paths, bytes)
}

fn policy() -> Policy {
    Policy {
        max_retries: 3,
        backoff_base: Duration::from_millis(1),
        delay_range: (Duration::ZERO, Duration::ZERO),
    }
}

fn captioner(server: &MockServer) -> RemoteCaptioner {
    let cfg = CaptionerConfig {
        kind: vistopics::config::CaptionerKind::Remote,
        endpoint_url: server.url.clone(),
        model_name: "mock-vision".into(),
        timeout_sec: 10.0,
        ..CaptionerConfig::default()
    };
    RemoteCaptioner::new(&cfg).with_api_key(Some(KEY.into()))
}

/// Which of `frames` (1-based) a request carries.
fn frame_no(req: &Recorded, bytes: &[Vec<u8>]) -> usize {
    let img = req.image();
    bytes.iter().position(|b| *b == img).map(|i| i + 1).unwrap_or(0)
}

fn caption_text(n: usize) -> String {
    format!("frame {n}, a \"quoted\" caption, with commas")
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn read(path: &Path) -> Result<Vec<CaptionRecord>, String> {
    read_csv(path, CAPTIONS_HEADER).map_err(|e| e.to_string())
}

/// Every frame captioned once; the CSV round-trips quotes and commas and
/// keeps manifest order; the request carries the bearer key, model, prompt
/// and a JPEG data URL.
pub fn csv_content(root: &Path) -> Result<(), String> {
    let (paths, bytes) = frames(root);
    let b = bytes.clone();
    let server = MockServer::start(move |r| (200, completion(&caption_text(frame_no(r, &b)))));
    let csv = root.join("manifests/captions.csv");
    let mut c = captioner(&server);
    let out = caption_corpus(&mut c, root, &paths, &csv, &policy(), false).map_err(|e| e.to_string())?;
    let on_disk = read(&csv)?;
    check(out == on_disk, || "returned records differ from CSV".into())?;
    check(on_disk.len() == 5, || format!("{} rows", on_disk.len()))?;
    for (i, r) in on_disk.iter().enumerate() {
        check(r.frame_path == paths[i], || format!("row {i} is {}", r.frame_path))?;
        check(r.caption == caption_text(i + 1), || format!("row {i} caption {:?}", r.caption))?;
        check(r.status == CaptionStatus::Ok && r.attempts == 1, || format!("row {i}: {r:?}"))?;
    }
    let raw = std::fs::read_to_string(&csv).unwrap();
    check(
        raw.contains("\"frame 1, a \"\"quoted\"\" caption, with commas\""),
        || "caption field not quoted per RFC 4180".into(),
    )?;
    let reqs = server.requests();
    check(reqs.len() == 5, || format!("{} requests", reqs.len()))?;
    let first = &reqs[0];
    check(first.method == "POST", || first.method.clone())?;
    check(
        first.header("authorization") == Some(&format!("Bearer {KEY}")),
        || format!("authorization {:?}", first.header("authorization")),
    )?;
    check(first.body["model"] == "mock-vision", || "model".into())?;
    let content = &first.body["messages"][0]["content"];
    check(
        content[0]["text"] == vistopics::config::DEFAULT_PROMPT,
        || "prompt text".into(),
    )?;
    let url = content[1]["image_url"]["url"].as_str().unwrap_or_default();
    check(url.starts_with("data:image/jpeg;base64,"), || url.chars().take(40).collect())?;
    check(first.image() == bytes[0], || "image bytes differ".into())?;
    Ok(())
}

/// After an interrupted batch, a resumed run requests only the missing
/// frames, and a second resume requests nothing.
pub fn resume(root: &Path) -> Result<(), String> {
    let (paths, bytes) = frames(root);
    let csv = root.join("manifests/captions.csv");
    // An earlier run got through two frames before stopping.
    let b = bytes.clone();
    let server = MockServer::start(move |r| (200, completion(&caption_text(frame_no(r, &b)))));
    let mut c = captioner(&server);
    caption_corpus(&mut c, root, &paths[..2], &csv, &policy(), false).map_err(|e| e.to_string())?;
    check(server.count() == 2, || format!("{} initial requests", server.count()))?;

    caption_corpus(&mut c, root, &paths, &csv, &policy(), true).map_err(|e| e.to_string())?;
    let resumed: Vec<usize> = server.requests()[2..].iter().map(|r| frame_no(r, &bytes)).collect();
    check(resumed == [3, 4, 5], || format!("resume requested frames {resumed:?}"))?;

    let before = std::fs::read(&csv).unwrap();
    caption_corpus(&mut c, root, &paths, &csv, &policy(), true).map_err(|e| e.to_string())?;
    check(server.count() == 5, || format!("second resume sent {} requests", server.count() - 5))?;
    check(std::fs::read(&csv).unwrap() == before, || "second resume changed the CSV".into())?;
    let rows = read(&csv)?;
    check(
        rows.iter().map(|r| r.frame_path.clone()).collect::<Vec<_>>() == paths,
        || "resumed CSV not in manifest order".into(),
    )?;
    check(rows.iter().all(|r| r.status == CaptionStatus::Ok), || "non-ok row".into())?;
    Ok(())
}

/// A frame the endpoint always rejects with a server error is retried,
/// then recorded as failed, and the batch carries on.
pub fn isolated_failure(root: &Path) -> Result<(), String> {
    let (paths, bytes) = frames(root);
    let b = bytes.clone();
    let server = MockServer::start(move |r| match frame_no(r, &b) {
        3 => (500, "{\"error\":\"boom\"}".into()),
        n => (200, completion(&caption_text(n))),
    });
    let csv = root.join("manifests/captions.csv");
    let mut c = captioner(&server);
    let rows = caption_corpus(&mut c, root, &paths, &csv, &policy(), false).map_err(|e| e.to_string())?;
    let ok = rows.iter().filter(|r| r.status == CaptionStatus::Ok).count();
    check(ok == 4, || format!("{ok} ok rows"))?;
    let bad = &rows[2];
    check(
        bad.status == CaptionStatus::Failed && bad.attempts == 4 && bad.caption.is_empty(),
        || format!("frame 3 row {bad:?}"),
    )?;
    let hits: usize = server.requests().iter().filter(|r| frame_no(r, &bytes) == 3).count();
    check(hits == 4, || format!("frame 3 requested {hits} times"))?;
    check(read(&csv)? == rows, || "CSV differs from returned rows".into())?;
    Ok(())
}

/// 429 and 503 are retried with backoff until the endpoint recovers.
pub fn transient_errors(root: &Path) -> Result<(), String> {
    let (paths, bytes) = frames(root);
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&calls);
    let b = bytes.clone();
    let server = MockServer::start(move |r| match seen.fetch_add(1, Ordering::SeqCst) {
        0 => (429, "{}".into()),
        1 => (503, "{}".into()),
        _ => (200, completion(&caption_text(frame_no(r, &b)))),
    });
    let csv = root.join("manifests/captions.csv");
    let mut c = captioner(&server);
    let rows = caption_corpus(&mut c, root, &paths, &csv, &policy(), false).map_err(|e| e.to_string())?;
    check(rows[0].status == CaptionStatus::Ok && rows[0].attempts == 3, || format!("{:?}", rows[0]))?;
    check(rows[1..].iter().all(|r| r.attempts == 1), || "later frames retried".into())?;
    check(server.count() == 7, || format!("{} requests", server.count()))?;
    Ok(())
}

/// Client errors other than 429 are not retried.
pub fn client_error(root: &Path) -> Result<(), String> {
    let (paths, bytes) = frames(root);
    let b = bytes.clone();
    let server = MockServer::start(move |r| match frame_no(r, &b) {
        2 => (400, "{\"error\":\"bad image\"}".into()),
        n => (200, completion(&caption_text(n))),
    });
    let csv = root.join("manifests/captions.csv");
    let mut c = captioner(&server);
    let rows = caption_corpus(&mut c, root, &paths, &csv, &policy(), false).map_err(|e| e.to_string())?;
    let by_path: HashMap<&str, &CaptionRecord> = rows.iter().map(|r| (r.frame_path.as_str(), r)).collect();
    let bad = by_path[paths[1].as_str()];
    check(bad.status == CaptionStatus::Failed && bad.attempts == 1, || format!("{bad:?}"))?;
    check(server.count() == 5, || format!("{} requests", server.count()))?;
    Ok(())
}

pub type Scenario = fn(&Path) -> Result<(), String>;

pub const ALL: [(&str, Scenario); 5] = [
    ("csv content", csv_content),
    ("resume", resume),
    ("isolated failure", isolated_failure),
    ("transient errors", transient_errors),
    ("client error", client_error),
];
