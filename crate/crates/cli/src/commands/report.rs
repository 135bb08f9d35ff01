//! `migrate report`: render the regression table, per-feature marginal-effect
//! curves, and the classifier comparison from the fitted artifacts.

use std::io::{BufWriter, Write};

use anyhow::{Context, Result};

use migration_core::boost::eval::{render_eval_report, reference_fixture, EvalReport};
use migration_core::econometrics::report::{
    regression_record, render_regression_table, write_margin_curve,
};
use migration_core::econometrics::{marginal_effects, HeckmanFit, Stage};

use crate::artifacts::{require_upstream, StageMeta};
use crate::config::PipelineConfig;

pub fn run(config: &PipelineConfig, config_hash: &str) -> Result<()> {
    let out_dir = &config.output_dir;
    let features_meta = require_upstream(out_dir, config_hash, "features")?;
    let fit_meta = require_upstream(out_dir, config_hash, "fit")?;
    let classify_meta = require_upstream(out_dir, config_hash, "classify")?;

    let fit_path = out_dir.join("fit.json");
    let fit: HeckmanFit = serde_json::from_str(
        &std::fs::read_to_string(&fit_path)
            .with_context(|| format!("cannot read {}", fit_path.display()))?,
    )
    .context("corrupt fit artifact")?;
    let eval_path = out_dir.join("eval.json");
    let eval: EvalReport = serde_json::from_str(
        &std::fs::read_to_string(&eval_path)
            .with_context(|| format!("cannot read {}", eval_path.display()))?,
    )
    .context("corrupt eval artifact")?;
    let matrix = super::load_matrix(out_dir)?;

    let report_dir = out_dir.join("report");
    let margins_dir = report_dir.join("margins");
    std::fs::create_dir_all(&margins_dir)?;

    std::fs::write(report_dir.join("regression.txt"), render_regression_table(&fit))?;
    {
        let file = std::fs::File::create(report_dir.join("regression.json"))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &regression_record(&fit))?;
        writeln!(w)?;
    }

    let mut artifacts = vec![
        "report/regression.txt".to_string(),
        "report/regression.json".to_string(),
        "report/classifier_comparison.txt".to_string(),
        "report/reference_comparison.txt".to_string(),
    ];
    for feature in &config.econometrics.margin_features {
        let j = matrix.column_index(feature)?;
        let column = matrix.data.column(j);
        let (lo, hi) = column
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let points = config.econometrics.margin_grid_points.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let effect = marginal_effects(&fit, &matrix, Stage::Selection, feature, &grid)?;
        let name = format!("report/margins/{feature}.tsv");
        let file = std::fs::File::create(out_dir.join(&name))?;
        let mut w = BufWriter::new(file);
        write_margin_curve(&mut w, &effect)?;
        artifacts.push(name);
    }

    std::fs::write(report_dir.join("classifier_comparison.txt"), render_eval_report(&eval))?;
    std::fs::write(
        report_dir.join("reference_comparison.txt"),
        render_eval_report(&reference_fixture()),
    )?;

    let mut meta = StageMeta::new("report", config_hash, config.seed);
    meta.record_upstream(&features_meta);
    meta.record_upstream(&fit_meta);
    meta.record_upstream(&classify_meta);
    meta.counts.insert("margin_curves".into(), config.econometrics.margin_features.len() as u64);
    for name in &artifacts {
        meta.record_artifact(out_dir, name)?;
    }
    meta.write(out_dir)?;
    Ok(())
}
