//! Marginal effects at means for the fitted selection model, with
//! delta-method confidence bands and response curves over a feature grid.

use nalgebra::DVector;

use super::heckman::HeckmanFit;
use super::mills::{inverse_mills, normal_cdf, normal_pdf};
use super::EconError;
use crate::features::ModelMatrix;

const BAND_CRITICAL: f64 = 1.959963984540054; // two-sided 95%

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Selection,
    Outcome,
}

#[derive(Debug, Clone)]
pub struct CurvePoint {
    /// Feature value in model (standardized) scale.
    pub value: f64,
    /// Predicted probability (selection) or conditional mean (outcome).
    pub response: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct MarginalEffect {
    pub feature: String,
    pub stage: Stage,
    /// Derivative of the response with respect to the feature, at means.
    pub effect_at_means: f64,
    pub effect_band: (f64, f64),
    pub curve: Vec<CurvePoint>,
}

/// Marginal effect of one feature, holding every other column at its mean.
///
/// Grid values are in model scale (standardized if the matrix was). The
/// selection-stage effect at means is `phi(xbar' gamma) * gamma_k`; the
/// outcome stage adds the Mills-ratio slope times the selection coefficient.
pub fn marginal_effects(
    fit: &HeckmanFit,
    matrix: &ModelMatrix,
    stage: Stage,
    feature: &str,
    grid: &[f64],
) -> Result<MarginalEffect, EconError> {
    let sel_means = column_means(matrix, &fit.selection_columns)?;
    let gamma = &fit.selection.coefficients;

    match stage {
        Stage::Selection => {
            let k = fit
                .selection_columns
                .iter()
                .position(|c| c == feature)
                .ok_or_else(|| EconError::UnknownFeature(feature.to_string()))?;

            let z_bar = sel_means.dot(gamma);
            let effect = normal_pdf(z_bar) * gamma[k];
            // Gradient of the effect with respect to gamma.
            let mut g = DVector::zeros(gamma.len());
            for j in 0..gamma.len() {
                g[j] = -z_bar * normal_pdf(z_bar) * sel_means[j] * gamma[k];
            }
            g[k] += normal_pdf(z_bar);
            let var = (g.transpose() * &fit.selection.covariance * &g)[(0, 0)].max(0.0);
            let half = BAND_CRITICAL * var.sqrt();

            let curve = grid
                .iter()
                .map(|&v| {
                    let mut x = sel_means.clone();
                    x[k] = v;
                    let z = x.dot(gamma);
                    let p = normal_cdf(z);
                    let grad = normal_pdf(z) * &x;
                    let pv =
                        (grad.transpose() * &fit.selection.covariance * &grad)[(0, 0)].max(0.0);
                    let h = BAND_CRITICAL * pv.sqrt();
                    CurvePoint { value: v, response: p, lower: p - h, upper: p + h }
                })
                .collect();

            Ok(MarginalEffect {
                feature: feature.to_string(),
                stage,
                effect_at_means: effect,
                effect_band: (effect - half, effect + half),
                curve,
            })
        }
        Stage::Outcome => {
            let k_out = fit
                .outcome_columns
                .iter()
                .position(|c| c == feature)
                .ok_or_else(|| EconError::UnknownFeature(feature.to_string()))?;
            let k_sel = fit.selection_columns.iter().position(|c| c == feature);
            let out_means = column_means(matrix, &fit.outcome_columns)?;
            let beta = &fit.outcome_coefficients;
            let p_out = fit.outcome_columns.len();
            let beta_lambda = beta[p_out];

            // Conditional mean: x_out' beta + beta_lambda * lambda(x_sel' gamma).
            // The selection index moves with the feature when it appears there.
            let respond = |v: f64| -> (f64, DVector<f64>) {
                let mut x_out = out_means.clone();
                x_out[k_out] = v;
                let mut x_sel = sel_means.clone();
                if let Some(ks) = k_sel {
                    x_sel[ks] = v;
                }
                let lambda = inverse_mills(x_sel.dot(gamma));
                let mut x_star = DVector::zeros(p_out + 1);
                for j in 0..p_out {
                    x_star[j] = x_out[j];
                }
                x_star[p_out] = lambda;
                (x_star.dot(beta), x_star)
            };

            let z_bar_at = |v: f64| {
                let mut x_sel = sel_means.clone();
                if let Some(ks) = k_sel {
                    x_sel[ks] = v;
                }
                x_sel.dot(gamma)
            };
            let v_mean = out_means[k_out];
            let z_bar = z_bar_at(v_mean);
            let lambda_bar = inverse_mills(z_bar);
            // d lambda / dz = -lambda (lambda + z).
            let mills_slope = k_sel
                .map(|ks| -lambda_bar * (lambda_bar + z_bar) * gamma[ks])
                .unwrap_or(0.0);
            let effect = beta[k_out] + beta_lambda * mills_slope;
            // Delta-method band treating the stage-1 coefficients as fixed.
            let mut g = DVector::zeros(p_out + 1);
            g[k_out] = 1.0;
            g[p_out] = mills_slope;
            let var = (g.transpose() * &fit.outcome_covariance * &g)[(0, 0)].max(0.0);
            let half = BAND_CRITICAL * var.sqrt();

            let curve = grid
                .iter()
                .map(|&v| {
                    let (y, x_star) = respond(v);
                    let pv = (x_star.transpose() * &fit.outcome_covariance * &x_star)[(0, 0)]
                        .max(0.0);
                    let h = BAND_CRITICAL * pv.sqrt();
                    CurvePoint { value: v, response: y, lower: y - h, upper: y + h }
                })
                .collect();

            Ok(MarginalEffect {
                feature: feature.to_string(),
                stage,
                effect_at_means: effect,
                effect_band: (effect - half, effect + half),
                curve,
            })
        }
    }
}

fn column_means(matrix: &ModelMatrix, columns: &[String]) -> Result<DVector<f64>, EconError> {
    let n = matrix.data.nrows() as f64;
    let mut means = DVector::zeros(columns.len());
    for (j, name) in columns.iter().enumerate() {
        let col = matrix
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| EconError::UnknownFeature(name.clone()))?;
        means[j] = matrix.data.column(col).sum() / n;
    }
    Ok(means)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::heckman::{fit_heckman, HeckmanInput};
    use crate::econometrics::probit::ProbitFit;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// A matrix whose column means are exactly the given vector.
    fn matrix_with_means(columns: &[&str], means: &[f64]) -> ModelMatrix {
        let n = 2;
        let mut data = DMatrix::zeros(n, columns.len());
        for j in 0..columns.len() {
            // Two rows at mean +/- 1 (intercept stays constant).
            let spread = if j == 0 { 0.0 } else { 1.0 };
            data[(0, j)] = means[j] - spread;
            data[(1, j)] = means[j] + spread;
        }
        ModelMatrix {
            users: vec!["u1".into(), "u2".into()],
            columns: columns.iter().map(|s| s.to_string()).collect(),
            data,
            selection: vec![true, false],
            outcome: vec![Some(true), None],
            means: vec![0.0; columns.len() - 1],
            stddevs: vec![1.0; columns.len() - 1],
            standardized: true,
            dropped_rows: 0,
        }
    }

    /// A selection-only fixture fit with chosen probit coefficients.
    fn fixture_fit(gamma: &[f64], sel_cols: &[&str]) -> HeckmanFit {
        let p = gamma.len();
        HeckmanFit {
            selection: ProbitFit {
                coefficients: DVector::from_vec(gamma.to_vec()),
                covariance: DMatrix::identity(p, p) * 1e-4,
                log_likelihood: 0.0,
                log_likelihood_trace: Vec::new(),
                iterations: 1,
                converged: true,
            },
            selection_columns: sel_cols.iter().map(|s| s.to_string()).collect(),
            outcome_coefficients: DVector::from_vec(vec![0.0, 0.0]),
            outcome_columns: vec!["(Intercept)".into()],
            outcome_covariance: DMatrix::identity(2, 2) * 1e-4,
            rho: 0.0,
            rho_clamped: false,
            sigma: 1.0,
            aic_selection: 0.0,
            aic_outcome: 0.0,
            outcome_log_likelihood: 0.0,
            n_total: 2,
            n_selected: 1,
            mean_delta: 0.0,
        }
    }

    #[test]
    fn effect_at_means_matches_closed_form() {
        // At a zero index, phi(0) * gamma_k = 0.3989... * 0.78.
        let fit = fixture_fit(&[0.0, 0.78], &["(Intercept)", "tox"]);
        let matrix = matrix_with_means(&["(Intercept)", "tox"], &[1.0, 0.0]);
        // Index at means: 1 * 0 + 0 * 0.78 = 0.
        let me = marginal_effects(&fit, &matrix, Stage::Selection, "tox", &[0.0]).unwrap();
        assert_relative_eq!(me.effect_at_means, 0.311167, epsilon = 1e-5);
    }

    #[test]
    fn twenty_percent_toxicity_shift_is_about_eight_points() {
        // Standardized toxicity coefficient 0.78 with baseline probability
        // Phi(-0.75) ~= 0.227. A +20% shift of the raw mean (0.3, sd 0.19)
        // moves the standardized value by 0.06 / 0.19.
        let fit = fixture_fit(&[-0.75, 0.78], &["(Intercept)", "tox"]);
        let matrix = matrix_with_means(&["(Intercept)", "tox"], &[1.0, 0.0]);
        let shift = 0.06 / 0.19;
        let me =
            marginal_effects(&fit, &matrix, Stage::Selection, "tox", &[0.0, shift]).unwrap();
        let delta = me.curve[1].response - me.curve[0].response;
        assert_relative_eq!(delta, 0.0806, epsilon = 5e-4);
        assert!(delta > 0.07 && delta < 0.09);
    }

    #[test]
    fn effect_matches_finite_difference_of_curve() {
        let fit = fixture_fit(&[0.4, -0.9, 0.3], &["(Intercept)", "a", "b"]);
        let matrix = matrix_with_means(&["(Intercept)", "a", "b"], &[1.0, 0.2, -0.1]);
        let v = 0.2; // mean of "a"
        let h = 1e-5;
        let me =
            marginal_effects(&fit, &matrix, Stage::Selection, "a", &[v - h, v + h]).unwrap();
        let fd = (me.curve[1].response - me.curve[0].response) / (2.0 * h);
        assert!((me.effect_at_means - fd).abs() < 1e-6, "{} vs {}", me.effect_at_means, fd);
    }

    #[test]
    fn zero_coefficient_gives_flat_curve() {
        let fit = fixture_fit(&[0.5, 0.0], &["(Intercept)", "tox"]);
        let matrix = matrix_with_means(&["(Intercept)", "tox"], &[1.0, 0.0]);
        let grid: Vec<f64> = (-5..=5).map(|i| i as f64 / 2.0).collect();
        let me = marginal_effects(&fit, &matrix, Stage::Selection, "tox", &grid).unwrap();
        assert_eq!(me.effect_at_means, 0.0);
        for pt in &me.curve {
            assert_relative_eq!(pt.response, me.curve[0].response, epsilon = 1e-15);
        }
    }

    #[test]
    fn unknown_feature_is_fatal() {
        let fit = fixture_fit(&[0.5, 0.1], &["(Intercept)", "tox"]);
        let matrix = matrix_with_means(&["(Intercept)", "tox"], &[1.0, 0.0]);
        let result = marginal_effects(&fit, &matrix, Stage::Selection, "nope", &[0.0]);
        assert!(matches!(result, Err(EconError::UnknownFeature(_))));
    }

    #[test]
    fn bands_widen_away_from_the_mass_of_data() {
        let fit = fixture_fit(&[0.0, 1.0], &["(Intercept)", "tox"]);
        let matrix = matrix_with_means(&["(Intercept)", "tox"], &[1.0, 0.0]);
        let me = marginal_effects(&fit, &matrix, Stage::Selection, "tox", &[0.0, 3.0]).unwrap();
        let width = |pt: &CurvePoint| pt.upper - pt.lower;
        assert!(width(&me.curve[0]) > 0.0);
        for pt in &me.curve {
            assert!(pt.lower <= pt.response && pt.response <= pt.upper);
        }
    }

    #[test]
    fn outcome_stage_matches_finite_difference() {
        // A real two-step fit so the outcome covariance and Mills slope are
        // exercised end to end.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = crate::econometrics::heckman::testgen::generate(
            4_000,
            &[0.2, 0.8, 0.7],
            &[1.0, 0.5],
            0.5,
            1.0,
            &mut rng,
        );
        let sel_cols: Vec<String> =
            ["(Intercept)", "x1", "excl"].iter().map(|s| s.to_string()).collect();
        let out_cols: Vec<String> = ["(Intercept)", "x1"].iter().map(|s| s.to_string()).collect();
        let fit = fit_heckman(&HeckmanInput {
            x_sel: &data.x_sel,
            selection_columns: &sel_cols,
            x_out: &data.x_out,
            outcome_columns: &out_cols,
            selected: &data.selected,
            outcome: &data.outcome,
        })
        .unwrap();

        let matrix = matrix_with_means(&["(Intercept)", "x1", "excl"], &[1.0, 0.1, -0.2]);
        let h = 1e-5;
        let me =
            marginal_effects(&fit, &matrix, Stage::Outcome, "x1", &[0.1 - h, 0.1 + h]).unwrap();
        let fd = (me.curve[1].response - me.curve[0].response) / (2.0 * h);
        assert!((me.effect_at_means - fd).abs() < 1e-6, "{} vs {}", me.effect_at_means, fd);
    }
}
