//! Stage orchestration: each stage reads its inputs through the store,
//! writes its outputs, and records wall time and sizes in `run.json`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use vistopics_core::validation::TaskKind;
use vistopics_core::DedupConfig;

use crate::caption::{caption_corpus, make_captioner, Policy};
use crate::config::Config;
use crate::dedup::{dedup_frames, hash_frames, retained};
use crate::error::{Error, Result};
use crate::lda::{fit_params, parallel_sweep, sweep_csv_rows, sweep_params, ModelArtifact};
use crate::preprocess::{preprocess, CorpusArtifact};
use crate::report::{metrics_rows, metrics_table, topic_table, topics_html};
use crate::server::{self, AppState};
use crate::store::{self, CaptionStatus, Selection, Stage, StageRecord, Store, VideoStatus, SCHEMA_VERSION};
use crate::validate::{generate, read_responses, score_responses, ItemsFile};
use crate::video::{self, probe_video, scan_videos};

pub struct Pipeline {
    pub cfg: Config,
    pub store: Store,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    /// `jobs == 0` sizes the worker pool to the logical CPU count.
    pub fn new(cfg: Config, jobs: usize) -> Result<Self> {
        cfg.validate()?;
        let jobs = if jobs == 0 { cfg.jobs } else { jobs };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Runtime(format!("worker pool: {e}")))?;
        let store = Store::new(&cfg.run_dir);
        Ok(Self { cfg, store, pool })
    }

    fn finish(&self, stage: Stage, started: Instant, n_videos: u64, n_frames: u64, bytes: Option<u64>) -> Result<()> {
        let mut run = self.store.load_run()?;
        run.schema_version = SCHEMA_VERSION;
        run.seed = self.cfg.seed;
        run.config = serde_json::to_value(&self.cfg).map_err(|e| Error::Runtime(e.to_string()))?;
        self.store.save_run(&run)?;
        let record = StageRecord {
            wall_sec: started.elapsed().as_secs_f64(),
            n_videos,
            n_frames,
            bytes,
            schema_version: SCHEMA_VERSION,
            finished_at: store::now_unix(),
        };
        log::info!(
            "{} finished in {:.2}s ({n_videos} videos, {n_frames} frames)",
            stage.name(),
            record.wall_sec
        );
        self.store.record_stage(stage, record)
    }

    /// Ingest (scan and probe) followed by frame extraction.
    pub fn extract(&self) -> Result<()> {
        let x = &self.cfg.extraction;
        let started = Instant::now();
        let files = scan_videos(&self.cfg.input_dir)?;
        log::info!("found {} videos in {}", files.len(), self.cfg.input_dir.display());
        let probes: Vec<_> = self
            .pool
            .install(|| files.par_iter().map(|f| probe_video(&f.path, x)).collect());
        let ok = probes.iter().filter(|p| p.is_ok()).count() as u64;
        let input_bytes: u64 = files
            .iter()
            .zip(&probes)
            .filter(|(_, p)| p.is_ok())
            .map(|(f, _)| std::fs::metadata(&f.path).map(|m| m.len()).unwrap_or(0))
            .sum();
        self.finish(Stage::Ingest, started, ok, 0, Some(input_bytes))?;

        let started = Instant::now();
        let frames_root = self.store.path("frames");
        if frames_root.exists() {
            std::fs::remove_dir_all(&frames_root)
                .map_err(|e| Error::io(format!("clear {}", frames_root.display()), e))?;
        }
        let results: Vec<_> = self.pool.install(|| {
            files
                .par_iter()
                .zip(probes.into_par_iter())
                .map(|(f, p)| video::process_video(f, p, &self.store, x))
                .collect()
        });
        let mut entries = Vec::with_capacity(results.len());
        let mut frames = Vec::new();
        for (entry, recs) in results {
            entries.push(entry);
            frames.extend(recs);
        }
        self.store.write_videos(&entries)?;
        self.store.write_frames(&frames)?;
        let processed = entries.iter().filter(|e| e.status != VideoStatus::ProbeFailed).count() as u64;
        self.finish(
            Stage::Extract,
            started,
            processed,
            frames.len() as u64,
            Some(store::dir_bytes(&frames_root)),
        )
    }

    pub fn dedup(&self) -> Result<()> {
        let started = Instant::now();
        let mut frames = self.store.frames()?;
        let cfg = DedupConfig {
            threshold: self.cfg.dedup.threshold,
        };
        let table = self.pool.install(|| {
            hash_frames(&mut frames, self.store.root());
            dedup_frames(&mut frames, &cfg)
        });
        self.store.write_frames(&frames)?;
        self.store.write_duplicates(&table)?;
        let kept: Vec<_> = retained(&frames).collect();
        let videos: BTreeSet<&str> = kept.iter().map(|f| f.video_id.as_str()).collect();
        let bytes = kept
            .iter()
            .map(|f| std::fs::metadata(self.store.path(&f.path)).map(|m| m.len()).unwrap_or(0))
            .sum();
        log::info!("kept {} of {} frames ({} duplicates)", kept.len(), frames.len(), table.len());
        self.finish(Stage::Dedup, started, videos.len() as u64, kept.len() as u64, Some(bytes))
    }

    pub fn caption(&self, resume: bool) -> Result<()> {
        let started = Instant::now();
        let frames = self.store.hashed_frames()?;
        let paths: Vec<String> = retained(&frames).map(|f| f.path.clone()).collect();
        let mut captioner = make_captioner(&self.cfg.captioner);
        let records = caption_corpus(
            captioner.as_mut(),
            self.store.root(),
            &paths,
            &self.store.manifest("captions"),
            &Policy::from(&self.cfg.captioner),
            resume,
        )?;
        let ok = records.iter().filter(|r| r.status == CaptionStatus::Ok).count();
        let failed = records.len() - ok;
        if failed > 0 {
            log::warn!("{failed} frames could not be captioned and are left out of modeling");
        }
        let video_of: HashMap<&str, &str> = frames.iter().map(|f| (f.path.as_str(), f.video_id.as_str())).collect();
        let videos: BTreeSet<&str> = records.iter().filter_map(|r| video_of.get(r.frame_path.as_str()).copied()).collect();
        self.finish(Stage::Caption, started, videos.len() as u64, ok as u64, None)
    }

    pub fn preprocess(&self) -> Result<()> {
        let started = Instant::now();
        let captions = self.store.captions()?;
        let opts = self.cfg.corpus_options()?;
        let artifact = preprocess(&captions, &self.cfg.preprocess, &opts)?;
        log::info!(
            "corpus: {} documents, {} terms ({:?})",
            artifact.docs.len(),
            artifact.vocabulary.len(),
            artifact.stats
        );
        store::write_json(&self.store.corpus_json(), &artifact)?;
        self.finish(Stage::Preprocess, started, 0, artifact.docs.len() as u64, None)
    }

    fn corpus(&self) -> Result<CorpusArtifact> {
        self.store.require_stage(Stage::Preprocess)?;
        CorpusArtifact::load(&self.store.corpus_json())
    }

    pub fn sweep(&self) -> Result<()> {
        let started = Instant::now();
        let artifact = self.corpus()?;
        let corpus = artifact.lda_corpus()?;
        let params = sweep_params(&self.cfg.lda, self.cfg.seed);
        let result = self.pool.install(|| parallel_sweep(&corpus, &params))?;
        self.store.write_sweep(&sweep_csv_rows(&result))?;
        store::write_json(&self.store.path("sweep.json"), &result.cells)?;
        log::info!("selected K={} alpha={:.4}", result.selected_k, result.selected_alpha);
        self.finish(Stage::Sweep, started, 0, corpus.len() as u64, None)?;
        let mut run = self.store.load_run()?;
        run.selection = Some(Selection {
            k: result.selected_k,
            alpha: result.selected_alpha,
        });
        self.store.save_run(&run)
    }

    /// Fit on all documents with `(K, alpha)` from, in order: explicit
    /// arguments, the sweep selection, or `lda.k` / `lda.alpha`.
    pub fn fit(&self, k: Option<usize>, alpha: Option<f64>) -> Result<()> {
        let started = Instant::now();
        let artifact = self.corpus()?;
        let run = self.store.load_run()?;
        let sel = run.selection;
        let k = k.or(sel.map(|s| s.k)).or(self.cfg.lda.k).ok_or_else(|| {
            Error::Config("no K chosen: run `vistopics sweep` or set `lda.k`".into())
        })?;
        let alpha = alpha
            .or(sel.filter(|s| s.k == k).map(|s| s.alpha))
            .or(self.cfg.lda.alpha)
            .ok_or_else(|| Error::Config("no alpha chosen: run `vistopics sweep` or set `lda.alpha`".into()))?;
        let corpus = artifact.lda_corpus()?;
        let params = fit_params(&self.cfg.lda, k, alpha, self.cfg.seed);
        let model = vistopics_core::fit_lda(&corpus, &params)?;
        model.check_simplex(1e-9)?;
        ModelArtifact::new(&model, &params).save(&self.store.model_json())?;
        self.finish(Stage::Fit, started, 0, corpus.len() as u64, None)
    }

    pub fn report(&self) -> Result<()> {
        let started = Instant::now();
        self.store.require_stage(Stage::Fit)?;
        let corpus = self.corpus()?;
        let model = ModelArtifact::load(&self.store.model_json())?.model();
        let captions: HashMap<String, String> = self
            .store
            .captions()?
            .into_iter()
            .map(|r| (r.frame_path, r.caption))
            .collect();
        let r = &self.cfg.report;
        let topics = topic_table(&model, &corpus, &captions, r.n_terms, r.n_reps)?;
        let dir = self.store.report_dir();
        store::write_json(&dir.join("topics.json"), &topics)?;
        store::write_atomic(&dir.join("topics.html"), topics_html(&topics).as_bytes())?;
        self.finish(Stage::Report, started, 0, corpus.docs.len() as u64, None)?;
        self.write_metrics()
    }

    pub fn write_metrics(&self) -> Result<()> {
        let rows = metrics_rows(&self.store.load_run()?);
        let dir = self.store.report_dir();
        store::write_atomic(&dir.join("metrics.txt"), metrics_table(&rows, false).as_bytes())?;
        store::write_json(&dir.join("metrics.json"), &rows)
    }

    /// Stage rows for completed stages, as printed by `vistopics metrics`.
    pub fn metrics_text(&self) -> Result<String> {
        let run = self.store.require_run()?;
        let rows = metrics_rows(&run);
        if !rows.iter().any(|r| r.completed()) {
            return Err(Error::Config("no stage has completed in this run".into()));
        }
        Ok(metrics_table(&rows, true))
    }

    pub fn run_all(&self) -> Result<()> {
        self.extract()?;
        self.dedup()?;
        self.caption(false)?;
        self.preprocess()?;
        self.sweep()?;
        self.fit(None, None)?;
        self.report()
    }

    pub fn items_path(&self) -> std::path::PathBuf {
        self.store.validation_dir().join("validation_items.json")
    }

    pub fn responses_path(&self) -> std::path::PathBuf {
        self.store.validation_dir().join("responses.jsonl")
    }

    pub fn validate_gen(&self, kinds: &[TaskKind], n_items: Option<usize>) -> Result<ItemsFile> {
        self.store.require_stage(Stage::Fit)?;
        let corpus = self.corpus()?;
        let model = ModelArtifact::load(&self.store.model_json())?.model();
        let mut cfg = self.cfg.validation.clone();
        if let Some(n) = n_items {
            cfg.n_items = n;
        }
        let items = generate(&model, &corpus, &cfg, kinds, self.cfg.seed)?;
        store::write_json(&self.items_path(), &items)?;
        log::info!("wrote {} items to {}", items.items.len(), self.items_path().display());
        Ok(items)
    }

    pub fn validate_score(&self) -> Result<()> {
        let items = ItemsFile::load(&self.items_path())?;
        let responses = read_responses(&self.responses_path())?;
        let report = score_responses(&items, &responses)?;
        store::write_json(&self.store.validation_dir().join("scores.json"), &report)
    }

    pub fn serve_state(&self) -> Result<Arc<AppState>> {
        let items = ItemsFile::load(&self.items_path())?;
        Ok(Arc::new(AppState::new(
            &items,
            self.store.root().to_path_buf(),
            &self.responses_path(),
            self.cfg.validation.ui_dir.clone(),
        )?))
    }

    pub fn validate_serve(&self, bind: Option<&str>) -> Result<()> {
        let state = self.serve_state()?;
        let bind = bind.unwrap_or(&self.cfg.validation.bind).to_string();
        let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("start async runtime", e))?;
        rt.block_on(server::serve(state, &bind))
            .map_err(|e| Error::io(format!("serve on {bind}"), e))
    }
}
