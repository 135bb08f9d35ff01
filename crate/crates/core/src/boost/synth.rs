//! Synthetic benchmark generator: a two-stage threshold process with a clear
//! margin, used to exercise the hierarchical classifier end to end.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::MigrationLabel;

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n: usize,
    pub seed: u64,
    /// Half-width of the empty band around each decision boundary.
    pub margin: f64,
    /// Fraction of rows that migrate at all.
    pub migrate_rate: f64,
    /// Fraction of migrated rows that are coactive.
    pub coactive_rate: f64,
    /// Pure-noise feature columns appended after the two informative ones.
    pub noise_features: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 600,
            seed: 42,
            margin: 0.5,
            migrate_rate: 0.3,
            coactive_rate: 0.5,
            noise_features: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub x: DMatrix<f64>,
    pub labels: Vec<MigrationLabel>,
    pub feature_names: Vec<String>,
    pub users: Vec<String>,
}

/// Draw labels first, then place the informative features on the correct
/// side of the stage-1 (feature `a`) and stage-2 (feature `b`) thresholds,
/// leaving a `margin`-wide gap at zero so the classes are separable.
pub fn generate_two_stage(params: &SynthParams) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let p = 2 + params.noise_features;
    let mut x = DMatrix::zeros(params.n, p);
    let mut labels = Vec::with_capacity(params.n);
    let mut users = Vec::with_capacity(params.n);
    for i in 0..params.n {
        let migrates = rng.gen::<f64>() < params.migrate_rate;
        let label = if migrates {
            if rng.gen::<f64>() < params.coactive_rate {
                MigrationLabel::Coactive
            } else {
                MigrationLabel::FullyMigrated
            }
        } else {
            MigrationLabel::RedditOnly
        };
        let side = |positive: bool, rng: &mut ChaCha8Rng| {
            let magnitude = rng.gen_range(params.margin..(params.margin + 2.0));
            if positive {
                magnitude
            } else {
                -magnitude
            }
        };
        x[(i, 0)] = side(migrates, &mut rng);
        x[(i, 1)] = if migrates {
            side(label == MigrationLabel::Coactive, &mut rng)
        } else {
            rng.gen_range(-2.5..2.5)
        };
        for j in 2..p {
            x[(i, j)] = rng.gen_range(-2.5..2.5);
        }
        labels.push(label);
        users.push(format!("user{i:04}"));
    }
    let feature_names = (0..p)
        .map(|j| match j {
            0 => "a".to_string(),
            1 => "b".to_string(),
            _ => format!("noise{}", j - 1),
        })
        .collect();
    SynthData { x, labels, feature_names, users }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_planted_thresholds() {
        let data = generate_two_stage(&SynthParams::default());
        for i in 0..data.x.nrows() {
            let a = data.x[(i, 0)];
            let b = data.x[(i, 1)];
            match data.labels[i] {
                MigrationLabel::RedditOnly => assert!(a < -0.5),
                MigrationLabel::Coactive => assert!(a > 0.5 && b > 0.5),
                MigrationLabel::FullyMigrated => assert!(a > 0.5 && b < -0.5),
                MigrationLabel::Discarded => panic!("generator never discards"),
            }
        }
    }

    #[test]
    fn all_three_labels_appear() {
        let data = generate_two_stage(&SynthParams::default());
        for label in
            [MigrationLabel::RedditOnly, MigrationLabel::Coactive, MigrationLabel::FullyMigrated]
        {
            assert!(data.labels.contains(&label), "missing {label}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_two_stage(&SynthParams::default());
        let b = generate_two_stage(&SynthParams::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels, b.labels);
    }
}
