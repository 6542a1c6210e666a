//! Perceptual hashing of extracted frames and per-video near-duplicate
//! removal.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use vistopics_core::{dedup_sequence, dhash_rgb8, DedupConfig, Hash64};

use crate::error::{Error, Result};
use crate::store::{DuplicateEntry, FrameRecord};

/// dHash of an encoded image file.
pub fn hash_image_bytes(bytes: &[u8]) -> Result<Hash64> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| Error::Runtime(format!("decode image: {e}")))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(dhash_rgb8(img.as_raw(), w as usize, h as usize)?)
}

pub fn hash_image_file(path: &Path) -> Result<Hash64> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    hash_image_bytes(&bytes).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))
}

/// Hash every frame in parallel; frames that fail to decode keep no hash
/// and are left out of deduplication and every later stage.
pub fn hash_frames(frames: &mut [FrameRecord], root: &Path) {
    let hashes: Vec<Option<Hash64>> = frames
        .par_iter()
        .map(|f| match hash_image_file(&root.join(&f.path)) {
            Ok(h) => Some(h),
            Err(e) => {
                log::warn!("excluding frame: {e}");
                None
            }
        })
        .collect();
    for (f, h) in frames.iter_mut().zip(hashes) {
        f.hash = h;
        f.duplicate_of = None;
    }
}

/// Greedy per-video dedup over hashed frames (seq order within each
/// video). Sets `duplicate_of` in place and returns the duplicate table in
/// manifest order.
pub fn dedup_frames(frames: &mut [FrameRecord], cfg: &DedupConfig) -> Vec<DuplicateEntry> {
    let mut by_video: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, f) in frames.iter().enumerate() {
        if f.hash.is_some() {
            by_video.entry(f.video_id.as_str()).or_default().push(i);
        }
    }
    let mut order: Vec<(String, Vec<usize>)> = by_video
        .into_iter()
        .map(|(v, mut idx)| {
            idx.sort_by_key(|&i| frames[i].seq);
            (v.to_string(), idx)
        })
        .collect();
    // Preserve the manifest's video order rather than id order.
    order.sort_by_key(|(_, idx)| idx[0]);

    let outcomes: Vec<_> = order
        .par_iter()
        .map(|(video, idx)| {
            let seqs: Vec<(u32, Hash64)> = idx
                .iter()
                .map(|&i| (frames[i].seq, frames[i].hash.expect("hashed")))
                .collect();
            (video.clone(), idx.clone(), dedup_sequence(&seqs, cfg))
        })
        .collect();

    let mut table = Vec::new();
    for (video, idx, outcome) in outcomes {
        let by_seq: BTreeMap<u32, usize> = idx.iter().map(|&i| (frames[i].seq, i)).collect();
        for row in outcome.duplicates {
            frames[by_seq[&row.duplicate_seq]].duplicate_of = Some(row.original_seq);
            table.push(DuplicateEntry {
                video_id: video.clone(),
                duplicate_seq: row.duplicate_seq,
                original_seq: row.original_seq,
                similarity: row.similarity,
            });
        }
    }
    table
}

/// Frames that go on to captioning: hashed and not a duplicate.
pub fn retained(frames: &[FrameRecord]) -> impl Iterator<Item = &FrameRecord> {
    frames.iter().filter(|f| f.hash.is_some() && f.duplicate_of.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(video: &str, seq: u32, hash: u64) -> FrameRecord {
        FrameRecord {
            video_id: video.into(),
            seq,
            source_frame_index: 0,
            timestamp_sec: 0.0,
            path: String::new(),
            hash: Some(Hash64(hash)),
            duplicate_of: None,
        }
    }

    #[test]
    fn dedup_never_crosses_videos() {
        let mut frames = vec![rec("a", 1, 7), rec("a", 2, 7), rec("b", 1, 7), rec("b", 2, !7)];
        let table = dedup_frames(&mut frames, &DedupConfig::default());
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].video_id, "a");
        assert_eq!(frames[1].duplicate_of, Some(1));
        assert_eq!(frames[2].duplicate_of, None);
        assert_eq!(retained(&frames).count(), 3);
    }

    #[test]
    fn undecodable_bytes_are_an_error() {
        assert!(hash_image_bytes(b"not an image").is_err());
    }
}
