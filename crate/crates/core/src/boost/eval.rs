//! Cross-validated evaluation: stratified resplits, validation-tuned stage
//! thresholds, flat baselines, confusion matrices, and F1 reporting.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gbdt::{fit_gbdt, GbdtModel};
use super::twostep::{fit_two_step, TwoStepParams};
use super::BoostError;
use crate::corpus::MigrationLabel;

pub const LABEL_ORDER: [MigrationLabel; 3] =
    [MigrationLabel::RedditOnly, MigrationLabel::Coactive, MigrationLabel::FullyMigrated];

fn label_index(label: MigrationLabel) -> usize {
    LABEL_ORDER.iter().position(|&l| l == label).expect("discarded rows are excluded")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMatrix {
    /// counts[true][predicted], label order RO / CA / FM.
    pub counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: MigrationLabel, predicted: MigrationLabel) {
        self.counts[label_index(truth)][label_index(predicted)] += 1;
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn per_class_f1(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (c, slot) in out.iter_mut().enumerate() {
            let tp = self.counts[c][c] as f64;
            let fp: f64 = (0..3).filter(|&r| r != c).map(|r| self.counts[r][c] as f64).sum();
            let fn_: f64 = (0..3).filter(|&p| p != c).map(|p| self.counts[c][p] as f64).sum();
            *slot = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        }
        out
    }

    pub fn macro_f1(&self) -> f64 {
        self.per_class_f1().iter().sum::<f64>() / 3.0
    }
}

/// Macro-F1 of a binary prediction (mean of the two one-vs-rest F1 scores).
pub fn binary_macro_f1(truth: &[bool], predicted: &[bool]) -> f64 {
    let f1_for = |class: bool| {
        let tp = truth
            .iter()
            .zip(predicted)
            .filter(|(&t, &p)| t == class && p == class)
            .count() as f64;
        let fp = truth
            .iter()
            .zip(predicted)
            .filter(|(&t, &p)| t != class && p == class)
            .count() as f64;
        let fn_ = truth
            .iter()
            .zip(predicted)
            .filter(|(&t, &p)| t == class && p != class)
            .count() as f64;
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        }
    };
    (f1_for(true) + f1_for(false)) / 2.0
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelEval {
    pub name: String,
    /// Mean macro-F1 over the three labels, across folds.
    pub macro_f1: f64,
    pub per_class_f1: [f64; 3],
    /// Confusion counts summed over folds, when the model ran locally.
    pub confusion: Option<ConfusionMatrix>,
    /// Binary F1 of the migrate-at-all stage (hierarchical model only).
    pub stage1_f1: Option<f64>,
    /// Binary F1 of the coactive stage on truly migrated rows.
    pub stage2_f1: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelEval>,
    pub folds: usize,
    pub split: (f64, f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CrossValidateParams {
    pub folds: usize,
    pub split: (f64, f64, f64),
    pub seed: u64,
    pub two_step: TwoStepParams,
    /// Candidate stage thresholds tried on the validation split.
    pub threshold_grid: Vec<f64>,
}

impl Default for CrossValidateParams {
    fn default() -> Self {
        CrossValidateParams {
            folds: 5,
            split: (0.6, 0.2, 0.2),
            seed: 42,
            two_step: TwoStepParams::default(),
            threshold_grid: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        }
    }
}

/// One stratified train/validation/test resplit; deterministic in the seed.
pub fn stratified_split(
    labels: &[MigrationLabel],
    split: (f64, f64, f64),
    seed: u64,
    fold: usize,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), BoostError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (fold as u64).wrapping_mul(0x9E37_79B9));
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for label in LABEL_ORDER {
        let mut rows: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == label).collect();
        rows.shuffle(&mut rng);
        let n = rows.len();
        let n_train = (split.0 * n as f64).round() as usize;
        let n_val = (split.1 * n as f64).round() as usize;
        let (tr, rest) = rows.split_at(n_train.min(n));
        let (va, te) = rest.split_at(n_val.min(rest.len()));
        for (name, part) in [("train", tr), ("validation", va), ("test", te)] {
            if part.is_empty() {
                return Err(BoostError::FoldMissingClass {
                    fold,
                    split: match name {
                        "train" => "train",
                        "validation" => "validation",
                        _ => "test",
                    },
                    label: label.to_string(),
                });
            }
        }
        train.extend_from_slice(tr);
        validation.extend_from_slice(va);
        test.extend_from_slice(te);
    }
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok((train, validation, test))
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

fn flat_one_vs_rest(
    x_train: &DMatrix<f64>,
    y_train: &[MigrationLabel],
    feature_names: &[String],
    params: &CrossValidateParams,
) -> Result<[GbdtModel; 3], BoostError> {
    let fit_class = |label: MigrationLabel| {
        let y: Vec<bool> = y_train.iter().map(|&l| l == label).collect();
        fit_gbdt(x_train, &y, feature_names, &params.two_step.gbdt)
    };
    Ok([
        fit_class(MigrationLabel::RedditOnly)?,
        fit_class(MigrationLabel::Coactive)?,
        fit_class(MigrationLabel::FullyMigrated)?,
    ])
}

fn flat_predict(models: &[GbdtModel; 3], row: &[f64]) -> MigrationLabel {
    let probs = [
        models[0].predict_proba(row),
        models[1].predict_proba(row),
        models[2].predict_proba(row),
    ];
    let best = (0..3)
        .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
        .expect("three candidates");
    LABEL_ORDER[best]
}

/// Run the repeated stratified-resplit protocol: train on 60%, tune the two
/// stage thresholds on 20% by macro-F1, score the held-out 20%. Baselines:
/// a flat one-vs-rest GBDT trained on the same split, plus any external
/// prediction tables keyed by user.
pub fn cross_validate(
    x: &DMatrix<f64>,
    labels: &[MigrationLabel],
    users: &[String],
    feature_names: &[String],
    params: &CrossValidateParams,
    external: &[(String, BTreeMap<String, MigrationLabel>)],
) -> Result<EvalReport, BoostError> {
    assert_eq!(x.nrows(), labels.len(), "label length mismatch");
    assert_eq!(x.nrows(), users.len(), "user length mismatch");
    let rows: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] != MigrationLabel::Discarded).collect();
    let kept_labels: Vec<MigrationLabel> = rows.iter().map(|&i| labels[i]).collect();
    let kept_x = select_rows(x, &rows);
    let kept_users: Vec<String> = rows.iter().map(|&i| users[i].clone()).collect();

    let mut two_step_f1 = 0.0;
    let mut stage1_f1 = 0.0;
    let mut stage2_f1 = 0.0;
    let mut two_step_confusion = ConfusionMatrix::default();
    let mut flat_f1 = 0.0;
    let mut flat_confusion = ConfusionMatrix::default();
    let mut external_f1 = vec![0.0; external.len()];
    let mut external_confusion = vec![ConfusionMatrix::default(); external.len()];

    for fold in 0..params.folds {
        let (train, validation, test) =
            stratified_split(&kept_labels, params.split, params.seed, fold)?;
        let x_train = select_rows(&kept_x, &train);
        let y_train: Vec<MigrationLabel> = train.iter().map(|&i| kept_labels[i]).collect();
        let model = fit_two_step(&x_train, &y_train, feature_names, &params.two_step)?;

        // Pick the threshold pair that maximizes validation macro-F1.
        let row_of = |i: usize| -> Vec<f64> { kept_x.row(i).iter().copied().collect() };
        let mut tuned = model.clone();
        let mut best_f1 = -1.0;
        for &t1 in &params.threshold_grid {
            for &t2 in &params.threshold_grid {
                let mut cm = ConfusionMatrix::default();
                for &i in &validation {
                    let mut candidate = model.clone();
                    candidate.stage1_threshold = t1;
                    candidate.stage2_threshold = t2;
                    cm.record(kept_labels[i], candidate.predict_row(&row_of(i)));
                }
                let f1 = cm.macro_f1();
                if f1 > best_f1 + 1e-12 {
                    best_f1 = f1;
                    tuned.stage1_threshold = t1;
                    tuned.stage2_threshold = t2;
                }
            }
        }

        // Score the test split.
        let mut cm = ConfusionMatrix::default();
        let mut s1_truth = Vec::new();
        let mut s1_pred = Vec::new();
        let mut s2_truth = Vec::new();
        let mut s2_pred = Vec::new();
        for &i in &test {
            let row = row_of(i);
            let predicted = tuned.predict_row(&row);
            cm.record(kept_labels[i], predicted);
            let truly_migrated = kept_labels[i] != MigrationLabel::RedditOnly;
            s1_truth.push(truly_migrated);
            s1_pred.push(tuned.stage1.predict_proba(&row) >= tuned.stage1_threshold);
            if truly_migrated {
                s2_truth.push(kept_labels[i] == MigrationLabel::Coactive);
                s2_pred.push(tuned.stage2.predict_proba(&row) >= tuned.stage2_threshold);
            }
        }
        two_step_f1 += cm.macro_f1();
        stage1_f1 += binary_macro_f1(&s1_truth, &s1_pred);
        stage2_f1 += binary_macro_f1(&s2_truth, &s2_pred);
        for t in 0..3 {
            for p in 0..3 {
                two_step_confusion.counts[t][p] += cm.counts[t][p];
            }
        }

        // Flat one-vs-rest baseline on the same split.
        let flat = flat_one_vs_rest(&x_train, &y_train, feature_names, params)?;
        let mut cm = ConfusionMatrix::default();
        for &i in &test {
            cm.record(kept_labels[i], flat_predict(&flat, &row_of(i)));
        }
        flat_f1 += cm.macro_f1();
        for t in 0..3 {
            for p in 0..3 {
                flat_confusion.counts[t][p] += cm.counts[t][p];
            }
        }

        // External prediction tables, scored on the same test rows.
        for (e, (_, table)) in external.iter().enumerate() {
            let mut cm = ConfusionMatrix::default();
            for &i in &test {
                if let Some(&predicted) = table.get(&kept_users[i]) {
                    cm.record(kept_labels[i], predicted);
                }
            }
            external_f1[e] += cm.macro_f1();
            for t in 0..3 {
                for p in 0..3 {
                    external_confusion[e].counts[t][p] += cm.counts[t][p];
                }
            }
        }
    }

    let folds = params.folds as f64;
    let mut models = vec![
        ModelEval {
            name: "2STEP".to_string(),
            macro_f1: two_step_f1 / folds,
            per_class_f1: two_step_confusion.per_class_f1(),
            confusion: Some(two_step_confusion),
            stage1_f1: Some(stage1_f1 / folds),
            stage2_f1: Some(stage2_f1 / folds),
        },
        ModelEval {
            name: "Flat GBDT".to_string(),
            macro_f1: flat_f1 / folds,
            per_class_f1: flat_confusion.per_class_f1(),
            confusion: Some(flat_confusion),
            stage1_f1: None,
            stage2_f1: None,
        },
    ];
    for (e, (name, _)) in external.iter().enumerate() {
        models.push(ModelEval {
            name: name.clone(),
            macro_f1: external_f1[e] / folds,
            per_class_f1: external_confusion[e].per_class_f1(),
            confusion: Some(external_confusion[e].clone()),
            stage1_f1: None,
            stage2_f1: None,
        });
    }

    Ok(EvalReport { models, folds: params.folds, split: params.split, seed: params.seed })
}

/// Parse an external prediction table: `user<TAB>label` per line.
pub fn parse_predictions<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<String, MigrationLabel>, BoostError> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let user = parts.next().unwrap_or_default();
        let label = parts.next().ok_or_else(|| BoostError::BadPredictionFile {
            line: idx + 1,
            message: "expected user<TAB>label".to_string(),
        })?;
        let label: MigrationLabel =
            label.trim().parse().map_err(|e: String| BoostError::BadPredictionFile {
                line: idx + 1,
                message: e,
            })?;
        out.insert(user.to_string(), label);
    }
    Ok(out)
}

/// Render the comparison in the three-column layout: overall macro-F1 plus
/// the two stage-level scores where they apply.
pub fn render_eval_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16}{:>12}{:>12}{:>12}\n",
        "Model", "All labels", "1st step", "2nd step"
    ));
    out.push_str(&"-".repeat(52));
    out.push('\n');
    for model in &report.models {
        let stage = |v: Option<f64>| v.map(|f| format!("{f:.2}")).unwrap_or_default();
        out.push_str(&format!(
            "{:<16}{:>12}{:>12}{:>12}\n",
            model.name,
            format!("{:.2}", model.macro_f1),
            stage(model.stage1_f1),
            stage(model.stage2_f1),
        ));
    }
    out.push_str(&"-".repeat(52));
    out.push('\n');
    out.push_str(&format!(
        "{} stratified resplits, {:.0}/{:.0}/{:.0} train/validation/test, seed {}\n",
        report.folds,
        report.split.0 * 100.0,
        report.split.1 * 100.0,
        report.split.2 * 100.0,
        report.seed
    ));
    out
}

/// Machine-readable form of the evaluation report.
pub fn eval_record(report: &EvalReport) -> serde_json::Value {
    serde_json::json!({
        "folds": report.folds,
        "split": [report.split.0, report.split.1, report.split.2],
        "seed": report.seed,
        "models": report.models.iter().map(|m| serde_json::json!({
            "name": m.name,
            "macro_f1": m.macro_f1,
            "per_class_f1": {
                "reddit_only": m.per_class_f1[0],
                "coactive": m.per_class_f1[1],
                "fully_migrated": m.per_class_f1[2],
            },
            "stage1_f1": m.stage1_f1,
            "stage2_f1": m.stage2_f1,
            "confusion": m.confusion.as_ref().map(|c| c.counts),
        })).collect::<Vec<_>>(),
    })
}

/// The published comparison, kept as a rendering fixture (not a target the
/// pipeline is expected to reproduce on arbitrary data).
pub fn reference_fixture() -> EvalReport {
    let row = |name: &str, f1: f64| ModelEval {
        name: name.to_string(),
        macro_f1: f1,
        per_class_f1: [0.0; 3],
        confusion: None,
        stage1_f1: None,
        stage2_f1: None,
    };
    let mut two_step = row("2STEP", 0.74);
    two_step.stage1_f1 = Some(0.84);
    two_step.stage2_f1 = Some(0.88);
    EvalReport {
        models: vec![
            row("SVM", 0.44),
            row("Random Forest", 0.52),
            row("XGBoost", 0.65),
            row("AdaBoost", 0.41),
            two_step,
        ],
        folds: 5,
        split: (0.6, 0.2, 0.2),
        seed: 42,
    }
}
