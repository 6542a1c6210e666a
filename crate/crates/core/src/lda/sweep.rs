use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::perplexity::{perplexity, FoldInParams};
use super::{fit_lda, Corpus, FitParams, LdaError};
use crate::rng::{self, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub k_grid: Vec<usize>,
    /// Each cell uses `alpha = multiplier / K`.
    pub alpha_multipliers: Vec<f64>,
    pub folds: usize,
    pub eta: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub fold_in_iters: usize,
    pub fold_in_burn_in: usize,
    pub seed: u64,
}

impl SweepParams {
    pub fn new(seed: u64) -> Self {
        Self {
            k_grid: (1..=20).map(|i| i * 5).collect(),
            alpha_multipliers: alloc::vec![25.0, 10.0, 5.0, 2.0, 1.0],
            folds: 5,
            eta: 0.01,
            iters: 1000,
            burn_in: 500,
            thin: 10,
            fold_in_iters: 50,
            fold_in_burn_in: 25,
            seed,
        }
    }
}

/// One `(K, alpha)` grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub k: usize,
    pub multiplier: f64,
    pub alpha: f64,
}

/// Cells in grid order plus the shuffled fold assignment of documents.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub cells: Vec<SweepCell>,
    /// Document indices held out by each fold.
    pub folds: Vec<Vec<usize>>,
}

impl SweepPlan {
    /// Indices of every document outside `fold`, in corpus order.
    pub fn training_docs(&self, fold: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, docs)| docs.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub alpha: f64,
    pub fold: usize,
    /// `None` when the fold failed to fit or score.
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub k: usize,
    pub multiplier: f64,
    pub alpha: f64,
    pub mean: Option<f64>,
    /// Sample standard deviation across folds.
    pub std: Option<f64>,
    pub error: Option<String>,
}

impl CellSummary {
    pub fn is_valid(&self) -> bool {
        self.mean.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
    pub selected_k: usize,
    pub selected_alpha: f64,
}

/// Validate the grid and split documents into folds after a seeded shuffle.
/// Fold sizes differ by at most one.
pub fn sweep_plan(corpus: &Corpus, params: &SweepParams) -> Result<SweepPlan, LdaError> {
    if params.folds < 2 {
        return Err(LdaError::InvalidParams("folds must be >= 2".into()));
    }
    if corpus.len() < params.folds {
        return Err(LdaError::TooFewDocuments {
            docs: corpus.len(),
            folds: params.folds,
        });
    }
    if params.k_grid.is_empty() || params.alpha_multipliers.is_empty() {
        return Err(LdaError::InvalidParams("empty k grid or alpha multipliers".into()));
    }
    if let Some(m) = params.alpha_multipliers.iter().find(|m| m.is_nan() || **m <= 0.0) {
        return Err(LdaError::InvalidParams(alloc::format!(
            "alpha multiplier must be > 0, got {m}"
        )));
    }

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng::stream(params.seed, streams::SHUFFLE));
    let (base, extra) = (order.len() / params.folds, order.len() % params.folds);
    let mut folds = Vec::with_capacity(params.folds);
    let mut start = 0;
    for f in 0..params.folds {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }

    let mut cells = Vec::new();
    for &k in &params.k_grid {
        for &multiplier in &params.alpha_multipliers {
            cells.push(SweepCell {
                index: cells.len(),
                k,
                multiplier,
                alpha: multiplier / k as f64,
            });
        }
    }
    Ok(SweepPlan { cells, folds })
}

/// Train on every fold but `fold` and return the held-out perplexity.
/// Each (cell, fold) pair draws from its own random streams.
pub fn run_cell_fold(
    corpus: &Corpus,
    plan: &SweepPlan,
    cell: &SweepCell,
    fold: usize,
    params: &SweepParams,
) -> Result<f64, LdaError> {
    let unit = (cell.index * plan.folds.len() + fold) as u64;
    let train = corpus.subset(&plan.training_docs(fold));
    let fit = FitParams {
        k: cell.k,
        alpha: cell.alpha,
        eta: params.eta,
        iters: params.iters,
        burn_in: params.burn_in,
        thin: params.thin,
        seed: params.seed,
        stream: streams::CELL_BASE + 2 * unit,
    };
    let model = fit_lda(&train, &fit)?;
    let held: Vec<Vec<u32>> = plan.folds[fold]
        .iter()
        .map(|&d| corpus.docs()[d].clone())
        .collect();
    let fold_in = FoldInParams {
        iters: params.fold_in_iters,
        burn_in: params.fold_in_burn_in,
        seed: params.seed,
        stream: streams::CELL_BASE + 2 * unit + 1,
    };
    Ok(perplexity(&model, &held, &fold_in)?.perplexity)
}

/// Aggregate per-fold results (any order) into cell summaries and select the
/// cell with the lowest mean perplexity; ties go to smaller K, then larger
/// alpha. A cell with any failed fold is invalid.
pub fn summarize_sweep(
    plan: &SweepPlan,
    results: &[(usize, usize, Result<f64, LdaError>)],
) -> Result<SweepResult, LdaError> {
    let n_folds = plan.folds.len();
    let mut grid: Vec<Vec<Option<Result<f64, String>>>> =
        alloc::vec![alloc::vec![None; n_folds]; plan.cells.len()];
    for (cell, fold, r) in results {
        grid[*cell][*fold] = Some(r.clone().map_err(|e| e.to_string()));
    }

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (cell, folds) in plan.cells.iter().zip(&grid) {
        let mut values = Vec::with_capacity(n_folds);
        let mut error = None;
        for (fold, r) in folds.iter().enumerate() {
            let value = match r {
                Some(Ok(p)) if p.is_finite() => Some(*p),
                Some(Ok(p)) => {
                    error.get_or_insert_with(|| alloc::format!("fold {fold}: perplexity {p}"));
                    None
                }
                Some(Err(e)) => {
                    error.get_or_insert_with(|| alloc::format!("fold {fold}: {e}"));
                    None
                }
                None => {
                    error.get_or_insert_with(|| alloc::format!("fold {fold}: not run"));
                    None
                }
            };
            values.extend(value);
            rows.push(SweepRow {
                k: cell.k,
                alpha: cell.alpha,
                fold,
                perplexity: value,
            });
        }
        let (mean, std) = if error.is_none() {
            let (m, s) = mean_std(&values);
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        cells.push(CellSummary {
            k: cell.k,
            multiplier: cell.multiplier,
            alpha: cell.alpha,
            mean,
            std,
            error,
        });
    }

    let best = cells
        .iter()
        .filter_map(|c| c.mean.map(|m| (m, c)))
        .min_by(|(ma, a), (mb, b)| {
            ma.total_cmp(mb)
                .then(a.k.cmp(&b.k))
                .then(b.alpha.total_cmp(&a.alpha))
        })
        .map(|(_, c)| (c.k, c.alpha))
        .ok_or(LdaError::NoValidCells)?;
    Ok(SweepResult {
        rows,
        cells,
        selected_k: best.0,
        selected_alpha: best.1,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Sequential k-fold grid search over `(K, multiplier / K)`.
pub fn cv_sweep(corpus: &Corpus, params: &SweepParams) -> Result<SweepResult, LdaError> {
    let plan = sweep_plan(corpus, params)?;
    let mut results = Vec::with_capacity(plan.cells.len() * plan.folds.len());
    for cell in &plan.cells {
        for fold in 0..plan.folds.len() {
            results.push((cell.index, fold, run_cell_fold(corpus, &plan, cell, fold, params)));
        }
    }
    summarize_sweep(&plan, &results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_params() -> SweepParams {
        SweepParams {
            k_grid: vec![2, 3],
            alpha_multipliers: vec![2.0, 1.0],
            folds: 2,
            iters: 40,
            burn_in: 20,
            thin: 5,
            fold_in_iters: 10,
            fold_in_burn_in: 5,
            ..SweepParams::new(1)
        }
    }

    #[test]
    fn folds_partition_documents() {
        let c = Corpus::new((0..11).map(|i| vec![i % 3]).collect(), 3).unwrap();
        let p = SweepParams { folds: 3, ..small_params() };
        let plan = sweep_plan(&c, &p).unwrap();
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        assert_eq!(plan.training_docs(0).len(), 7);
        assert_eq!(plan.cells.len(), 4);
        assert_eq!(plan.cells[1].alpha, 0.5);
        // Deterministic under the same seed.
        assert_eq!(plan, sweep_plan(&c, &p).unwrap());
    }

    #[test]
    fn two_docs_two_folds() {
        let c = Corpus::new(vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0]], 2).unwrap();
        let r = cv_sweep(&c, &small_params()).unwrap();
        assert_eq!(r.rows.len(), 4 * 2);
        assert!(r.cells.iter().all(CellSummary::is_valid));
        assert!(r.rows.iter().all(|row| row.perplexity.unwrap() > 0.0));
    }

    #[test]
    fn precondition_errors() {
        let c = Corpus::new(vec![vec![0]], 1).unwrap();
        assert!(matches!(
            cv_sweep(&c, &small_params()),
            Err(LdaError::TooFewDocuments { docs: 1, folds: 2 })
        ));
        let c2 = Corpus::new(vec![vec![0], vec![0]], 1).unwrap();
        let p = SweepParams { folds: 1, ..small_params() };
        assert!(matches!(cv_sweep(&c2, &p), Err(LdaError::InvalidParams(_))));
    }

    #[test]
    fn selection_tie_breaks() {
        let plan = SweepPlan {
            cells: vec![
                SweepCell { index: 0, k: 10, multiplier: 1.0, alpha: 0.1 },
                SweepCell { index: 1, k: 5, multiplier: 1.0, alpha: 0.2 },
                SweepCell { index: 2, k: 5, multiplier: 2.0, alpha: 0.4 },
                SweepCell { index: 3, k: 20, multiplier: 1.0, alpha: 0.05 },
            ],
            folds: vec![vec![0], vec![1]],
        };
        let results = vec![
            (0, 0, Ok(3.0)),
            (0, 1, Ok(3.0)),
            (1, 0, Ok(3.0)),
            (1, 1, Ok(3.0)),
            (2, 0, Ok(2.0)),
            (2, 1, Ok(4.0)),
            (3, 0, Ok(1.0)),
            (3, 1, Err(LdaError::EmptyCorpus)),
        ];
        let r = summarize_sweep(&plan, &results).unwrap();
        // Cells 0-2 tie at 3.0; K=5 beats K=10 and alpha 0.4 beats 0.2.
        assert_eq!((r.selected_k, r.selected_alpha), (5, 0.4));
        assert!(!r.cells[3].is_valid());
        assert!(r.cells[3].error.as_deref().unwrap().starts_with("fold 1"));
        assert_eq!(r.cells[2].std, Some(libm::sqrt(2.0)));

        let all_bad = vec![(0, 0, Err(LdaError::EmptyCorpus))];
        let plan1 = SweepPlan { cells: plan.cells[..1].to_vec(), folds: vec![vec![0]] };
        assert_eq!(summarize_sweep(&plan1, &all_bad), Err(LdaError::NoValidCells));
    }
}
