#![allow(dead_code)]

pub mod images;
pub mod mock;
pub mod scenarios;
pub mod videos;

use std::path::{Path, PathBuf};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_vistopics"))
}

/// A config small enough for a run over a handful of short videos to
/// finish in seconds.
pub fn small_config(input: &Path, run: &Path) -> String {
    format!(
        r#"input_dir = "{}"
run_dir = "{}"
seed = 7

[captioner]
kind = "stub"

[preprocess]
min_df = 2

[lda]
k_grid = [2, 3, 4]
alpha_multipliers = [2.0, 1.0]
folds = 3
iters = 100
burn_in = 50
thin = 5
fold_in_iters = 20
fold_in_burn_in = 10

[validation]
n_items = 10
"#,
        input.display(),
        run.display()
    )
}
