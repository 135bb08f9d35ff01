//! `migrate fit`: estimate the two-step selection model on the model matrix.
//!
//! The selection equation uses every column; the outcome equation drops
//! coherence (the exclusion restriction) and models the coactive indicator
//! on migrated rows.

use std::io::{BufWriter, Write};

use anyhow::Result;
use nalgebra::DMatrix;

use migration_core::econometrics::heckman::HeckmanInput;
use migration_core::econometrics::fit_heckman;

use crate::artifacts::{require_upstream, StageMeta};
use crate::config::PipelineConfig;

pub fn run(config: &PipelineConfig, config_hash: &str) -> Result<()> {
    let out_dir = &config.output_dir;
    let features_meta = require_upstream(out_dir, config_hash, "features")?;

    let matrix = super::load_matrix(out_dir)?;
    let coherence = matrix.column_index("coherence")?;
    let outcome_columns: Vec<String> = matrix
        .columns
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != coherence)
        .map(|(_, c)| c.clone())
        .collect();

    let selected_rows: Vec<usize> =
        (0..matrix.n_rows()).filter(|&i| matrix.selection[i]).collect();
    let out_col_idx: Vec<usize> =
        (0..matrix.columns.len()).filter(|&j| j != coherence).collect();
    let x_out = DMatrix::from_fn(selected_rows.len(), out_col_idx.len(), |i, j| {
        matrix.data[(selected_rows[i], out_col_idx[j])]
    });
    let outcome: Vec<f64> = selected_rows
        .iter()
        .map(|&i| if matrix.outcome[i] == Some(true) { 1.0 } else { 0.0 })
        .collect();

    let fit = fit_heckman(&HeckmanInput {
        x_sel: &matrix.data,
        selection_columns: &matrix.columns,
        x_out: &x_out,
        outcome_columns: &outcome_columns,
        selected: &matrix.selection,
        outcome: &outcome,
    })?;

    {
        let file = std::fs::File::create(out_dir.join("fit.json"))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &fit)?;
        writeln!(w)?;
    }

    let mut meta = StageMeta::new("fit", config_hash, config.seed);
    meta.record_upstream(&features_meta);
    meta.counts.insert("rows".into(), fit.n_total as u64);
    meta.counts.insert("selected_rows".into(), fit.n_selected as u64);
    meta.record_artifact(out_dir, "fit.json")?;
    meta.write(out_dir)?;
    Ok(())
}
