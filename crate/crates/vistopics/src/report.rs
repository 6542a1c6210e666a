//! Topic tables, the HTML gallery, and the resource-metrics table.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use vistopics_core::lda::{top_terms, LdaModel};
use vistopics_core::topics::{ranked_dominant_docs, reintroduce_duplicates, Reintroduced};

use crate::error::{Error, Result};
use crate::preprocess::CorpusArtifact;
use crate::store::{RunManifest, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub doc_id: u32,
    pub frame_path: String,
    pub caption: String,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: usize,
    /// θ_k over modeled documents plus reintroduced duplicates.
    pub prevalence: f64,
    /// θ_k over modeled documents only.
    pub prevalence_modeled: f64,
    pub top_terms: Vec<TermWeight>,
    pub representatives: Vec<Representative>,
}

/// Give each duplicate caption its original's γ row and recompute θ.
pub fn reintroduce(model: &LdaModel, corpus: &CorpusArtifact) -> Result<Reintroduced> {
    let rows = corpus.row_of();
    let lengths: Vec<usize> = corpus.docs.iter().map(|d| d.tokens.len()).collect();
    let mut targets = Vec::new();
    for dup in &corpus.duplicates {
        match rows.get(&dup.doc_id) {
            Some(&row) => targets.push(row),
            None if corpus.dropped.iter().any(|d| d.doc_id == dup.doc_id) => {}
            None => {
                return Err(Error::Runtime(format!(
                    "duplicate {} points at unknown doc {}",
                    dup.frame_path, dup.doc_id
                )))
            }
        }
    }
    Ok(reintroduce_duplicates(model, &lengths, &targets)?)
}

/// Per-topic terms and representatives. `captions` maps frame paths to the
/// original caption text; cleaned text is shown when a caption is missing.
pub fn topic_table(
    model: &LdaModel,
    corpus: &CorpusArtifact,
    captions: &HashMap<String, String>,
    n_terms: usize,
    n_reps: usize,
) -> Result<Vec<TopicSummary>> {
    let extended = reintroduce(model, corpus)?;
    let pools = ranked_dominant_docs(model, n_reps);
    let mut out = Vec::with_capacity(model.k);
    for (t, pool) in pools.iter().enumerate() {
        if pool.is_empty() {
            log::warn!("topic {t} is not the dominant topic of any document");
        }
        let top_terms = top_terms(model, t, n_terms)?
            .into_iter()
            .map(|(id, p)| TermWeight {
                term: corpus.vocabulary[id as usize].clone(),
                probability: p,
            })
            .collect();
        let representatives = pool
            .iter()
            .map(|&d| {
                let doc = &corpus.docs[d];
                Representative {
                    doc_id: doc.doc_id,
                    frame_path: doc.frame_path.clone(),
                    caption: captions.get(&doc.frame_path).cloned().unwrap_or_else(|| doc.text.clone()),
                    gamma: model.gamma[d * model.k + t],
                }
            })
            .collect();
        out.push(TopicSummary {
            topic: t,
            prevalence: extended.theta[t],
            prevalence_modeled: model.theta[t],
            top_terms,
            representatives,
        });
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Static gallery; frame paths are written relative to `<run>/report/`.
pub fn topics_html(topics: &[TopicSummary]) -> String {
    let mut h = String::from(
        "<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Visual topics</title>\n<style>\n\
body{font-family:system-ui,sans-serif;margin:2rem;background:#f4f4f4;color:#222}\n\
section{background:#fff;border:1px solid #ddd;padding:1rem;margin-bottom:1.5rem}\n\
.terms{color:#555}\n.gallery{display:flex;flex-wrap:wrap;gap:.75rem}\n\
figure{margin:0;width:200px}\nfigure img{width:200px;height:150px;object-fit:cover;background:#ccc}\n\
figcaption{font-size:.8rem}\n</style>\n</head>\n<body>\n<h1>Visual topics</h1>\n",
    );
    let mut order: Vec<&TopicSummary> = topics.iter().collect();
    order.sort_by(|a, b| b.prevalence.total_cmp(&a.prevalence).then(a.topic.cmp(&b.topic)));
    for t in order {
        let terms: Vec<&str> = t.top_terms.iter().map(|w| w.term.as_str()).collect();
        let _ = writeln!(
            h,
            "<section id=\"topic-{0}\">\n<h2>Topic {0} <small>({1:.1}% of frames)</small></h2>\n<p class=\"terms\">{2}</p>",
            t.topic,
            t.prevalence * 100.0,
            escape(&terms.join(", "))
        );
        if t.representatives.is_empty() {
            h.push_str("<p>No frame has this as its dominant topic.</p>\n");
        } else {
            h.push_str("<div class=\"gallery\">\n");
            for r in &t.representatives {
                let _ = writeln!(
                    h,
                    "<figure><img src=\"../{}\" alt=\"\" loading=\"lazy\"><figcaption>{} <small>(&gamma; {:.2})</small></figcaption></figure>",
                    escape(&r.frame_path),
                    escape(&r.caption),
                    r.gamma
                );
            }
            h.push_str("</div>\n");
        }
        h.push_str("</section>\n");
    }
    h.push_str("</body>\n</html>\n");
    h
}

/// One row of the resource-metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub stage: String,
    pub total_time_sec: Option<f64>,
    pub n_items: Option<u64>,
    /// "Videos" or "Frames".
    pub unit: String,
    pub avg_time_per_video_sec: Option<f64>,
    pub avg_time_per_frame_sec: Option<f64>,
    pub total_bytes: Option<u64>,
}

impl MetricsRow {
    pub fn completed(&self) -> bool {
        self.total_time_sec.is_some()
    }
}

/// Row label, contributing stages, unit, and whether a per-video average
/// is reported.
const METRIC_STAGES: [(&str, &[Stage], &str, bool); 5] = [
    ("Video Ingest", &[Stage::Ingest], "Videos", true),
    ("Frame Extraction", &[Stage::Extract], "Frames", true),
    ("Frame Reduction (Deduplication)", &[Stage::Dedup], "Frames", true),
    ("Image Captioning", &[Stage::Caption], "Frames", false),
    ("LDA Analysis", &[Stage::Preprocess, Stage::Sweep, Stage::Fit], "Frames", false),
];

pub fn metrics_rows(run: &RunManifest) -> Vec<MetricsRow> {
    METRIC_STAGES
        .iter()
        .map(|&(label, stages, unit, per_video)| {
            let recs: Vec<_> = stages.iter().filter_map(|s| run.stages.get(s)).collect();
            if recs.is_empty() {
                return MetricsRow {
                    stage: label.into(),
                    total_time_sec: None,
                    n_items: None,
                    unit: unit.into(),
                    avg_time_per_video_sec: None,
                    avg_time_per_frame_sec: None,
                    total_bytes: None,
                };
            }
            let time: f64 = recs.iter().map(|r| r.wall_sec).sum();
            // Counts come from the stage that defines the row's output.
            let last = recs[recs.len() - 1];
            let first = recs[0];
            let n_videos = first.n_videos.max(last.n_videos);
            let n_frames = if unit == "Videos" { 0 } else { first.n_frames.max(last.n_frames) };
            let per = |n: u64| if n == 0 { 0.0 } else { time / n as f64 };
            MetricsRow {
                stage: label.into(),
                total_time_sec: Some(time),
                n_items: Some(if unit == "Videos" { n_videos } else { n_frames }),
                unit: unit.into(),
                avg_time_per_video_sec: per_video.then(|| per(n_videos)),
                avg_time_per_frame_sec: (unit == "Frames").then(|| per(n_frames)),
                total_bytes: recs.iter().filter_map(|r| r.bytes).reduce(|a, b| a.max(b)),
            }
        })
        .collect()
}

pub fn hms(secs: f64) -> String {
    let s = secs.max(0.0).round() as u64;
    format!("{:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Decimal units, one decimal place from GB up, whole numbers below.
pub fn human_bytes(b: u64) -> String {
    const UNITS: [&str; 4] = ["B", "KB", "MB", "GB"];
    let mut v = b as f64;
    let mut u = 0;
    while v >= 1000.0 && u < UNITS.len() - 1 {
        v /= 1000.0;
        u += 1;
    }
    if u >= 3 {
        format!("{v:.1} {}", UNITS[u])
    } else {
        format!("{} {}", v.round() as u64, UNITS[u])
    }
}

/// Plain-text table; `completed_only` drops stages that have not run.
pub fn metrics_table(rows: &[MetricsRow], completed_only: bool) -> String {
    let header = [
        "Stage",
        "Total Time",
        "N (Videos or Frames)",
        "Avg Time/Video (s)",
        "Avg Time/Frame (s)",
        "Total Size",
    ];
    let dash = || "--".to_string();
    let cells: Vec<[String; 6]> = rows
        .iter()
        .filter(|r| !completed_only || r.completed())
        .map(|r| {
            [
                r.stage.clone(),
                r.total_time_sec.map(hms).unwrap_or_else(dash),
                r.n_items.map(|n| format!("{} {}", thousands(n), r.unit)).unwrap_or_else(dash),
                r.avg_time_per_video_sec.map(|x| format!("{x:.2}")).unwrap_or_else(dash),
                r.avg_time_per_frame_sec.map(|x| format!("{x:.3}")).unwrap_or_else(dash),
                r.total_bytes.map(human_bytes).unwrap_or_else(dash),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(&header.map(String::from));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
