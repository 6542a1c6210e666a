//! Caption cleaning, duplicate-caption removal, and corpus construction.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vistopics_core::lda::Corpus;
use vistopics_core::text::{build_corpus, clean_caption, dedup_captions, english_likelihood, CleanDoc, CorpusOptions};

use crate::config::PreprocessConfig;
use crate::error::{Error, Result};
use crate::store::{self, CaptionRecord, CaptionStatus, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_id: u32,
    pub frame_path: String,
    pub text: String,
    pub tokens: Vec<u32>,
}

/// A caption removed because its cleaned text repeats an earlier one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionDuplicate {
    pub frame_path: String,
    /// `doc_id` of the retained first occurrence.
    pub doc_id: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub captions: usize,
    pub failed: usize,
    pub too_short: usize,
    pub non_english: usize,
    pub duplicates: usize,
    pub emptied: usize,
    pub modeled: usize,
}

/// `corpus.json`: vocabulary, modeled documents, and the duplicate map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusArtifact {
    pub schema_version: u32,
    pub vocabulary: Vec<String>,
    pub document_frequencies: Vec<u32>,
    pub docs: Vec<CorpusDoc>,
    pub duplicates: Vec<CaptionDuplicate>,
    /// Documents left without tokens after vocabulary filtering.
    pub dropped: Vec<CorpusDoc>,
    pub stats: PreprocessStats,
}

impl CorpusArtifact {
    pub fn lda_corpus(&self) -> Result<Corpus> {
        let docs = self.docs.iter().map(|d| d.tokens.clone()).collect();
        Ok(Corpus::new(docs, self.vocabulary.len())?)
    }

    /// Model row of every retained `doc_id`.
    pub fn row_of(&self) -> HashMap<u32, usize> {
        self.docs.iter().enumerate().map(|(i, d)| (d.doc_id, i)).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let a: Self = store::read_json(path)?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(path, format!("schema_version {}", a.schema_version)));
        }
        Ok(a)
    }
}

pub fn preprocess(captions: &[CaptionRecord], cfg: &PreprocessConfig, opts: &CorpusOptions) -> Result<CorpusArtifact> {
    let mut stats = PreprocessStats {
        captions: captions.len(),
        ..Default::default()
    };
    let mut cleaned = Vec::new();
    for rec in captions {
        if rec.status != CaptionStatus::Ok {
            stats.failed += 1;
            continue;
        }
        let Some(text) = clean_caption(&rec.caption, cfg.min_caption_chars) else {
            stats.too_short += 1;
            continue;
        };
        if cfg.english_filter && english_likelihood(&text) < cfg.english_threshold {
            stats.non_english += 1;
            continue;
        }
        cleaned.push(CleanDoc {
            doc_id: cleaned.len() as u32,
            frame_path: rec.frame_path.clone(),
            text,
            tokens: Vec::new(),
        });
    }
    let (unique, dupes) = dedup_captions(cleaned);
    stats.duplicates = dupes.len();
    let built = build_corpus(unique.clone(), opts)?;
    let to_doc = |d: &CleanDoc| CorpusDoc {
        doc_id: d.doc_id,
        frame_path: d.frame_path.clone(),
        text: d.text.clone(),
        tokens: d.tokens.clone(),
    };
    let dropped: Vec<CorpusDoc> = unique
        .iter()
        .filter(|d| built.dropped.contains(&d.doc_id))
        .map(to_doc)
        .collect();
    for d in &dropped {
        log::info!("doc {} ({}) has no tokens after filtering; not modeled", d.doc_id, d.frame_path);
    }
    stats.emptied = dropped.len();
    stats.modeled = built.docs.len();
    Ok(CorpusArtifact {
        schema_version: SCHEMA_VERSION,
        vocabulary: built.vocabulary.tokens().to_vec(),
        document_frequencies: built.vocabulary.document_frequencies().to_vec(),
        docs: built.docs.iter().map(to_doc).collect(),
        duplicates: dupes
            .into_iter()
            .map(|d| CaptionDuplicate {
                frame_path: d.frame_path,
                doc_id: d.doc_id,
            })
            .collect(),
        dropped,
        stats,
    })
}
