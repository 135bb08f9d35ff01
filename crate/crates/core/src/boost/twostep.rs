//! The hierarchical two-step classifier: a first model separates users who
//! migrate at all, a second separates coactive from fully-migrated users.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gbdt::{fit_gbdt, GbdtModel, GbdtParams};
use super::BoostError;
use crate::corpus::MigrationLabel;

#[derive(Debug, Clone)]
pub struct TwoStepParams {
    pub gbdt: GbdtParams,
    /// Majority-class rows kept per minority row in stage-1 training.
    pub downsample_ratio: f64,
    pub stage1_threshold: f64,
    pub stage2_threshold: f64,
    /// Train stage 2 on ground-truth migrated rows instead of the rows
    /// stage 1 predicts positive (a documented protocol deviation).
    pub stage2_on_truth: bool,
}

impl Default for TwoStepParams {
    fn default() -> Self {
        TwoStepParams {
            gbdt: GbdtParams::default(),
            downsample_ratio: 1.0,
            stage1_threshold: 0.5,
            stage2_threshold: 0.5,
            stage2_on_truth: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepModel {
    /// Migrated (coactive or fully migrated) vs Reddit-only.
    pub stage1: GbdtModel,
    /// Coactive vs fully migrated, applied to stage-1 positives.
    pub stage2: GbdtModel,
    pub stage1_threshold: f64,
    pub stage2_threshold: f64,
}

impl TwoStepModel {
    pub fn predict_row(&self, row: &[f64]) -> MigrationLabel {
        if self.stage1.predict_proba(row) < self.stage1_threshold {
            MigrationLabel::RedditOnly
        } else if self.stage2.predict_proba(row) >= self.stage2_threshold {
            MigrationLabel::Coactive
        } else {
            MigrationLabel::FullyMigrated
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<MigrationLabel> {
        (0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                self.predict_row(&row)
            })
            .collect()
    }
}

/// Subsample the majority class without replacement down to
/// `ratio` × minority count; returns the kept row indices, sorted.
pub fn downsample_majority(
    labels: &[bool],
    ratio: f64,
    seed: u64,
) -> Result<Vec<usize>, BoostError> {
    if ratio <= 0.0 {
        return Err(BoostError::BadRatio(ratio));
    }
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(BoostError::SingleClass);
    }
    let (minority, mut majority) = if positives.len() <= negatives.len() {
        (positives, negatives)
    } else {
        (negatives, positives)
    };
    let keep = ((ratio * minority.len() as f64).round() as usize).min(majority.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority.shuffle(&mut rng);
    majority.truncate(keep);
    let mut kept = minority;
    kept.extend(majority);
    kept.sort_unstable();
    Ok(kept)
}

fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Fit the hierarchical classifier. Discarded rows are dropped; the other
/// three labels must all be present.
pub fn fit_two_step(
    x: &DMatrix<f64>,
    labels: &[MigrationLabel],
    feature_names: &[String],
    params: &TwoStepParams,
) -> Result<TwoStepModel, BoostError> {
    assert_eq!(x.nrows(), labels.len(), "label length mismatch");
    let rows: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] != MigrationLabel::Discarded).collect();
    for required in
        [MigrationLabel::RedditOnly, MigrationLabel::Coactive, MigrationLabel::FullyMigrated]
    {
        if !rows.iter().any(|&i| labels[i] == required) {
            return Err(BoostError::MissingLabel(required.to_string()));
        }
    }

    // Stage 1: migrated vs Reddit-only, on downsampled rows.
    let migrated: Vec<bool> =
        rows.iter().map(|&i| labels[i] != MigrationLabel::RedditOnly).collect();
    let kept = downsample_majority(&migrated, params.downsample_ratio, params.gbdt.seed)?;
    let stage1_rows: Vec<usize> = kept.iter().map(|&k| rows[k]).collect();
    let stage1_y: Vec<bool> = kept.iter().map(|&k| migrated[k]).collect();
    let stage1 = fit_gbdt(&select_rows(x, &stage1_rows), &stage1_y, feature_names, &params.gbdt)?;

    // Stage 2: coactive vs fully migrated, trained on the rows stage 1
    // flags as migrating (the appendix protocol), restricted to rows whose
    // true label resolves that distinction.
    let stage2_pool: Vec<usize> = if params.stage2_on_truth {
        rows.iter().copied().filter(|&i| labels[i] != MigrationLabel::RedditOnly).collect()
    } else {
        let flagged: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                stage1.predict_proba(&row) >= params.stage1_threshold
            })
            .collect();
        if flagged.is_empty() {
            return Err(BoostError::NoStagePositives);
        }
        flagged
    };
    let stage2_rows: Vec<usize> = stage2_pool
        .iter()
        .copied()
        .filter(|&i| {
            matches!(labels[i], MigrationLabel::Coactive | MigrationLabel::FullyMigrated)
        })
        .collect();
    let stage2_y: Vec<bool> =
        stage2_rows.iter().map(|&i| labels[i] == MigrationLabel::Coactive).collect();
    if !stage2_y.iter().any(|&v| v) || stage2_y.iter().all(|&v| v) {
        return Err(BoostError::SingleClass);
    }
    let stage2 = fit_gbdt(&select_rows(x, &stage2_rows), &stage2_y, feature_names, &params.gbdt)?;

    Ok(TwoStepModel {
        stage1,
        stage2,
        stage1_threshold: params.stage1_threshold,
        stage2_threshold: params.stage2_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::synth::{generate_two_stage, SynthParams};

    #[test]
    fn downsample_keeps_minority_count() {
        let mut labels = vec![false; 1000];
        labels.extend(vec![true; 100]);
        let kept = downsample_majority(&labels, 1.0, 7).unwrap();
        assert_eq!(kept.len(), 200);
        assert_eq!(kept.iter().filter(|&&i| labels[i]).count(), 100);
        assert_eq!(kept.iter().filter(|&&i| !labels[i]).count(), 100);
    }

    #[test]
    fn downsample_ratio_two() {
        let mut labels = vec![false; 1000];
        labels.extend(vec![true; 100]);
        let kept = downsample_majority(&labels, 2.0, 7).unwrap();
        assert_eq!(kept.iter().filter(|&&i| !labels[i]).count(), 200);
    }

    #[test]
    fn downsample_noop_when_minority_is_larger_than_target() {
        let mut labels = vec![false; 50];
        labels.extend(vec![true; 60]);
        let kept = downsample_majority(&labels, 2.0, 7).unwrap();
        // Majority (60 true) stays whole: 2 x 50 > 60.
        assert_eq!(kept.len(), 110);
    }

    #[test]
    fn downsample_bad_ratio_is_fatal() {
        let labels = vec![true, false];
        assert!(matches!(downsample_majority(&labels, 0.0, 1), Err(BoostError::BadRatio(_))));
    }

    #[test]
    fn downsample_is_deterministic() {
        let mut labels = vec![false; 500];
        labels.extend(vec![true; 50]);
        assert_eq!(
            downsample_majority(&labels, 1.0, 3).unwrap(),
            downsample_majority(&labels, 1.0, 3).unwrap()
        );
    }

    #[test]
    fn separable_two_stage_process_is_learned() {
        let data = generate_two_stage(&SynthParams { n: 900, seed: 5, ..SynthParams::default() });
        let params = TwoStepParams {
            gbdt: GbdtParams { n_trees: 30, min_leaf: 5, ..GbdtParams::default() },
            ..TwoStepParams::default()
        };
        let model = fit_two_step(&data.x, &data.labels, &data.feature_names, &params).unwrap();
        let predicted = model.predict(&data.x);
        let correct =
            predicted.iter().zip(data.labels.iter()).filter(|(a, b)| a == b).count();
        assert!(
            correct as f64 / data.labels.len() as f64 > 0.98,
            "training accuracy {correct}/{}",
            data.labels.len()
        );
    }

    #[test]
    fn all_reddit_only_training_set_is_fatal() {
        let data = generate_two_stage(&SynthParams { n: 300, seed: 1, ..SynthParams::default() });
        let labels = vec![MigrationLabel::RedditOnly; 300];
        let result =
            fit_two_step(&data.x, &labels, &data.feature_names, &TwoStepParams::default());
        assert!(matches!(result, Err(BoostError::MissingLabel(_))));
    }

    #[test]
    fn same_seed_and_data_give_identical_models() {
        let data = generate_two_stage(&SynthParams { n: 400, seed: 8, ..SynthParams::default() });
        let params = TwoStepParams {
            gbdt: GbdtParams { n_trees: 10, min_leaf: 5, ..GbdtParams::default() },
            ..TwoStepParams::default()
        };
        let a = fit_two_step(&data.x, &data.labels, &data.feature_names, &params).unwrap();
        let b = fit_two_step(&data.x, &data.labels, &data.feature_names, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&data.x), b.predict(&data.x));
    }

    #[test]
    fn discarded_rows_are_ignored() {
        let data = generate_two_stage(&SynthParams { n: 400, seed: 2, ..SynthParams::default() });
        let mut labels = data.labels.clone();
        // Poison a handful of rows as discarded; the fit must still succeed.
        for l in labels.iter_mut().take(20) {
            *l = MigrationLabel::Discarded;
        }
        let params = TwoStepParams {
            gbdt: GbdtParams { n_trees: 10, min_leaf: 5, ..GbdtParams::default() },
            ..TwoStepParams::default()
        };
        assert!(fit_two_step(&data.x, &labels, &data.feature_names, &params).is_ok());
    }
}
