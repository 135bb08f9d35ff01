//! `migrate classify`: train the hierarchical classifier, cross-validate it
//! against the flat baseline and any external prediction tables, and persist
//! the model plus per-user predictions.

use std::io::{BufReader, BufWriter, Write};

use anyhow::{Context, Result};

use migration_core::boost::eval::{cross_validate, parse_predictions, CrossValidateParams};
use migration_core::boost::store::save_two_step;
use migration_core::boost::fit_two_step;

use crate::artifacts::{require_upstream, StageMeta};
use crate::config::PipelineConfig;

pub fn run(config: &PipelineConfig, config_hash: &str) -> Result<()> {
    let out_dir = &config.output_dir;
    let features_meta = require_upstream(out_dir, config_hash, "features")?;

    let matrix = super::load_matrix(out_dir)?;
    let labels = super::matrix_labels(&matrix);
    let (x, feature_names) = super::feature_view(&matrix);

    let mut external = Vec::new();
    for table in &config.boost.external_predictions {
        let file = std::fs::File::open(&table.path)
            .with_context(|| format!("cannot open {}", table.path.display()))?;
        external.push((table.name.clone(), parse_predictions(BufReader::new(file))?));
    }

    let params = CrossValidateParams {
        folds: config.boost.folds,
        split: (0.6, 0.2, 0.2),
        seed: config.seed,
        two_step: config.boost.to_two_step_params(config.seed),
        threshold_grid: config.boost.threshold_grid.clone(),
    };
    let report = cross_validate(&x, &labels, &matrix.users, &feature_names, &params, &external)?;

    // Final model for downstream scoring: trained on all rows.
    let model = fit_two_step(&x, &labels, &feature_names, &params.two_step)?;
    save_two_step(&out_dir.join("model.bin"), &model)?;

    {
        let file = std::fs::File::create(out_dir.join("predictions.tsv"))?;
        let mut w = BufWriter::new(file);
        for (i, user) in matrix.users.iter().enumerate() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            writeln!(w, "{user}\t{}", model.predict_row(&row))?;
        }
    }
    {
        let file = std::fs::File::create(out_dir.join("eval.json"))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
    }

    let mut meta = StageMeta::new("classify", config_hash, config.seed);
    meta.record_upstream(&features_meta);
    meta.counts.insert("rows".into(), matrix.n_rows() as u64);
    meta.counts.insert("models_compared".into(), report.models.len() as u64);
    for name in ["model.bin", "predictions.tsv", "eval.json"] {
        meta.record_artifact(out_dir, name)?;
    }
    meta.write(out_dir)?;
    Ok(())
}
