//! Sweep and fit stages, and the portable model file.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vistopics_core::lda::{
    run_cell_fold, summarize_sweep, sweep_plan, Corpus, FitParams, LdaModel, SweepParams,
    SweepResult,
};
use vistopics_core::rng::streams;

use crate::config::LdaConfig;
use crate::error::{Error, Result};
use crate::store::{self, SweepCsvRow, SCHEMA_VERSION};

pub fn sweep_params(cfg: &LdaConfig, seed: u64) -> SweepParams {
    SweepParams {
        k_grid: cfg.k_grid.clone(),
        alpha_multipliers: cfg.alpha_multipliers.clone(),
        folds: cfg.folds,
        eta: cfg.eta,
        iters: cfg.iters,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        fold_in_iters: cfg.fold_in_iters,
        fold_in_burn_in: cfg.fold_in_burn_in,
        seed,
    }
}

/// Cross-validated grid search with every (cell, fold) unit run on the
/// rayon pool. Each unit has its own random streams, so the result does not
/// depend on scheduling.
pub fn parallel_sweep(corpus: &Corpus, params: &SweepParams) -> Result<SweepResult> {
    let plan = sweep_plan(corpus, params)?;
    let units: Vec<(usize, usize)> = (0..plan.cells.len())
        .flat_map(|c| (0..plan.folds.len()).map(move |f| (c, f)))
        .collect();
    let results: Vec<_> = units
        .par_iter()
        .map(|&(c, f)| {
            let r = run_cell_fold(corpus, &plan, &plan.cells[c], f, params);
            if let Err(e) = &r {
                log::warn!("K={} alpha={:.4} fold {f}: {e}", plan.cells[c].k, plan.cells[c].alpha);
            }
            (c, f, r)
        })
        .collect();
    Ok(summarize_sweep(&plan, &results)?)
}

pub fn sweep_csv_rows(result: &SweepResult) -> Vec<SweepCsvRow> {
    result
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            k: r.k,
            alpha: r.alpha,
            fold: r.fold,
            perplexity: r.perplexity,
        })
        .collect()
}

pub fn fit_params(cfg: &LdaConfig, k: usize, alpha: f64, seed: u64) -> FitParams {
    FitParams {
        k,
        alpha,
        eta: cfg.eta,
        iters: cfg.iters,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        seed,
        stream: streams::FIT,
    }
}

/// `model.json` contents: header scalars plus row-major β (K×V), γ (D×K),
/// and θ (K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub vocab_size: usize,
    pub n_docs: usize,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ModelArtifact {
    pub fn new(model: &LdaModel, params: &FitParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            k: model.k,
            alpha: model.alpha,
            eta: model.eta,
            seed: model.seed,
            iters: model.iters,
            burn_in: params.burn_in,
            thin: params.thin,
            vocab_size: model.vocab_size,
            n_docs: model.n_docs,
            beta: model.beta.clone(),
            gamma: model.gamma.clone(),
            theta: model.theta.clone(),
        }
    }

    pub fn model(&self) -> LdaModel {
        LdaModel {
            k: self.k,
            alpha: self.alpha,
            eta: self.eta,
            seed: self.seed,
            iters: self.iters,
            vocab_size: self.vocab_size,
            n_docs: self.n_docs,
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            theta: self.theta.clone(),
        }
    }

    /// JSON with every real written to 17 significant digits, which
    /// round-trips any `f64` exactly.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"schema_version\": {},", self.schema_version);
        let _ = writeln!(out, "  \"k\": {},", self.k);
        let _ = writeln!(out, "  \"alpha\": {},", real(self.alpha));
        let _ = writeln!(out, "  \"eta\": {},", real(self.eta));
        let _ = writeln!(out, "  \"seed\": {},", self.seed);
        let _ = writeln!(out, "  \"iters\": {},", self.iters);
        let _ = writeln!(out, "  \"burn_in\": {},", self.burn_in);
        let _ = writeln!(out, "  \"thin\": {},", self.thin);
        let _ = writeln!(out, "  \"vocab_size\": {},", self.vocab_size);
        let _ = writeln!(out, "  \"n_docs\": {},", self.n_docs);
        for (name, values, last) in [
            ("beta", &self.beta, false),
            ("gamma", &self.gamma, false),
            ("theta", &self.theta, true),
        ] {
            let _ = write!(out, "  \"{name}\": [");
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&real(*v));
            }
            out.push(']');
            out.push_str(if last { "\n" } else { ",\n" });
        }
        out.push_str("}\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        store::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let a: Self = store::read_json(path)?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(path, format!("schema_version {}", a.schema_version)));
        }
        let (k, v, d) = (a.k, a.vocab_size, a.n_docs);
        if a.beta.len() != k * v || a.gamma.len() != d * k || a.theta.len() != k {
            return Err(Error::schema(path, "matrix sizes disagree with the header"));
        }
        Ok(a)
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_round_trips_bit_for_bit() {
        let a = ModelArtifact {
            schema_version: SCHEMA_VERSION,
            k: 2,
            alpha: 2.0 / 35.0,
            eta: 0.01,
            seed: 7,
            iters: 10,
            burn_in: 5,
            thin: 1,
            vocab_size: 2,
            n_docs: 1,
            beta: vec![0.1 + 0.2, 1.0 - (0.1 + 0.2), 1e-300, 1.0 - 1e-300],
            gamma: vec![1.0 / 3.0, 2.0 / 3.0],
            theta: vec![1.0 / 3.0, 2.0 / 3.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        a.save(&path).unwrap();
        let b = ModelArtifact::load(&path).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(std::fs::read_to_string(&path).unwrap().contains("5.7142857142857141e-2"));
    }
}
