//! Synthetic clips rendered by the decoder's own test sources.

use std::path::Path;
use std::process::Command;

pub fn decoder() -> String {
    std::env::var("VISTOPICS_DECODER").unwrap_or_else(|_| "ffmpeg".into())
}

/// Render `secs` seconds of a lavfi `source` at `fps`, so the clip holds
/// exactly `secs * fps` frames.
pub fn render(path: &Path, source: &str, secs: u32, fps: u32) {
    let status = Command::new(decoder())
        .args(["-hide_banner", "-loglevel", "error", "-y", "-f", "lavfi", "-i"])
        .arg(format!("{source}=size=96x72:rate={fps}"))
        .arg("-frames:v")
        .arg((secs * fps).to_string())
        .args(["-pix_fmt", "yuv420p", "-c:v", "libx264", "-preset", "ultrafast"])
        .arg(path)
        .status()
        .expect("decoder runs");
    assert!(status.success(), "rendering {}", path.display());
}

pub const SOURCES: [&str; 5] = ["testsrc", "smptebars", "mandelbrot", "life", "cellauto"];

/// Render one clip per `(seconds, fps)` pair, run extraction at 1 fps, and
/// compare each clip's frame count with `floor((n - 1) / stride) + 1`
/// where `n = seconds * fps` and `stride = fps` (the rates are integers).
pub fn frame_count_law(root: &Path, clips: &[(u32, u32)]) -> Result<String, String> {
    use vistopics::store::VideoStatus;
    let input = root.join("videos");
    let run = root.join("run");
    std::fs::create_dir_all(&input).unwrap();
    for (i, &(secs, fps)) in clips.iter().enumerate() {
        render(&input.join(format!("clip{i:02}.mp4")), SOURCES[i % SOURCES.len()], secs, fps);
    }
    let cfg = vistopics::Config::from_toml(&format!(
        "input_dir = {:?}\nrun_dir = {:?}\n",
        input.display().to_string(),
        run.display().to_string()
    ))
    .map_err(|e| e.to_string())?;
    let p = vistopics::Pipeline::new(cfg, 0).map_err(|e| e.to_string())?;
    p.extract().map_err(|e| e.to_string())?;
    let store = vistopics::Store::new(&run);
    let videos = store.videos().map_err(|e| e.to_string())?;
    let frames = store.frames().map_err(|e| e.to_string())?;
    if videos.len() != clips.len() {
        return Err(format!("{} videos recorded", videos.len()));
    }
    for (i, &(secs, fps)) in clips.iter().enumerate() {
        let v = &videos[i];
        let total = u64::from(secs * fps);
        let expected = (total - 1) / u64::from(fps) + 1;
        let n_records = frames.iter().filter(|f| f.video_id == v.video_id).count() as u64;
        let n_files = std::fs::read_dir(run.join("frames").join(&v.video_id))
            .map(|d| d.count() as u64)
            .unwrap_or(0);
        if v.status != VideoStatus::Ok
            || v.total_frames != total
            || u64::from(v.n_frames) != expected
            || n_records != expected
            || n_files != expected
        {
            return Err(format!(
                "{}s at {fps} fps: status {:?}, probed {} frames (expected {total}), \
                 extracted {} / {n_records} records / {n_files} files (expected {expected})",
                secs, v.status, v.total_frames, v.n_frames
            ));
        }
    }
    Ok(format!("{} clips, {} frames", clips.len(), frames.len()))
}
