//! Two-step selection estimator: probit selection, least-squares outcome with
//! an inverse Mills ratio correction, disturbance-parameter recovery, and
//! corrected standard errors.

use nalgebra::{DMatrix, DVector};

use super::mills::inverse_mills;
use super::probit::{fit_probit, ProbitFit};
use super::EconError;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HeckmanFit {
    pub selection: ProbitFit,
    pub selection_columns: Vec<String>,
    /// Outcome coefficients, the Mills-ratio coefficient last.
    pub outcome_coefficients: DVector<f64>,
    pub outcome_columns: Vec<String>,
    /// Two-step corrected covariance of the outcome coefficients.
    pub outcome_covariance: DMatrix<f64>,
    pub rho: f64,
    pub rho_clamped: bool,
    pub sigma: f64,
    pub aic_selection: f64,
    pub aic_outcome: f64,
    pub outcome_log_likelihood: f64,
    pub n_total: usize,
    pub n_selected: usize,
    /// Mean of delta_i = lambda_i (lambda_i + z_i) over selected rows.
    pub mean_delta: f64,
}

impl HeckmanFit {
    pub fn lambda_coefficient(&self) -> f64 {
        self.outcome_coefficients[self.outcome_coefficients.len() - 1]
    }

    pub fn outcome_standard_errors(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.outcome_covariance.nrows(),
            (0..self.outcome_covariance.nrows())
                .map(|i| self.outcome_covariance[(i, i)].max(0.0).sqrt()),
        )
    }
}

pub struct HeckmanInput<'a> {
    /// Selection design, all rows, intercept included.
    pub x_sel: &'a DMatrix<f64>,
    pub selection_columns: &'a [String],
    /// Outcome design on selected rows only (in original row order).
    pub x_out: &'a DMatrix<f64>,
    pub outcome_columns: &'a [String],
    pub selected: &'a [bool],
    /// Outcome values on selected rows.
    pub outcome: &'a [f64],
}

/// Fit the two-step selection model.
///
/// Input rows are canonicalized (sorted) before any accumulation, so any row
/// permutation of the same data yields bit-identical estimates.
pub fn fit_heckman(input: &HeckmanInput<'_>) -> Result<HeckmanFit, EconError> {
    let n = input.x_sel.nrows();
    assert_eq!(n, input.selected.len(), "selected length mismatch");
    let n_sel = input.selected.iter().filter(|&&s| s).count();
    assert_eq!(n_sel, input.x_out.nrows(), "outcome design row mismatch");
    assert_eq!(n_sel, input.outcome.len(), "outcome length mismatch");

    let p_out = input.x_out.ncols();
    let has_exclusion = input
        .selection_columns
        .iter()
        .any(|c| c != "(Intercept)" && !input.outcome_columns.contains(c));
    if !has_exclusion {
        return Err(EconError::NoExclusionRestriction);
    }
    if n_sel < p_out + 2 {
        return Err(EconError::TooFewSelected { selected: n_sel, params: p_out });
    }

    // Map each full-matrix row to its selected-subset row, then sort rows by
    // content for permutation-invariant accumulation.
    let mut sel_row_of = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if input.selected[i] {
            sel_row_of[i] = next;
            next += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let row_cmp = compare_rows(input, a, b);
        row_cmp.then_with(|| input.selected[b].cmp(&input.selected[a]))
    });

    let p_sel = input.x_sel.ncols();
    let mut x_sel = DMatrix::zeros(n, p_sel);
    let mut y_sel = Vec::with_capacity(n);
    let mut x_out = DMatrix::zeros(n_sel, p_out);
    let mut y_out = Vec::with_capacity(n_sel);
    let mut x_sel_selected = DMatrix::zeros(n_sel, p_sel);
    let mut k = 0;
    for (new_i, &old_i) in order.iter().enumerate() {
        for j in 0..p_sel {
            x_sel[(new_i, j)] = input.x_sel[(old_i, j)];
        }
        y_sel.push(if input.selected[old_i] { 1.0 } else { 0.0 });
        if input.selected[old_i] {
            let old_sel = sel_row_of[old_i];
            for j in 0..p_out {
                x_out[(k, j)] = input.x_out[(old_sel, j)];
            }
            for j in 0..p_sel {
                x_sel_selected[(k, j)] = input.x_sel[(old_i, j)];
            }
            y_out.push(input.outcome[old_sel]);
            k += 1;
        }
    }

    // Stage 1: probit selection.
    let selection = fit_probit(&x_sel, &y_sel, Some(&input.selection_columns.to_vec()))?;
    let gamma = &selection.coefficients;

    // Mills ratio terms on the selected rows.
    let z_sel = &x_sel_selected * gamma;
    let lambda: Vec<f64> = z_sel.iter().map(|&z| inverse_mills(z)).collect();
    let delta: Vec<f64> = lambda.iter().zip(z_sel.iter()).map(|(&l, &z)| l * (l + z)).collect();
    let mean_delta = delta.iter().sum::<f64>() / n_sel as f64;

    // Stage 2: least squares of the outcome on [X_out, lambda].
    let mut x_star = DMatrix::zeros(n_sel, p_out + 1);
    for i in 0..n_sel {
        for j in 0..p_out {
            x_star[(i, j)] = x_out[(i, j)];
        }
        x_star[(i, p_out)] = lambda[i];
    }
    let y_vec = DVector::from_vec(y_out);
    let xtx = x_star.transpose() * &x_star;
    let xty = x_star.transpose() * &y_vec;
    let xtx_inv = xtx
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| EconError::SingularHessian("outcome design with Mills ratio".into()))?;
    let beta = &xtx_inv * &xty;

    let residuals = &y_vec - &x_star * &beta;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let beta_lambda = beta[p_out];
    let sigma2 = ssr / n_sel as f64 + mean_delta * beta_lambda * beta_lambda;
    let sigma = sigma2.max(0.0).sqrt();
    let rho_raw = if sigma > 0.0 { beta_lambda / sigma } else { 0.0 };
    let rho = rho_raw.clamp(-1.0, 1.0);
    let rho_clamped = rho != rho_raw;

    // Two-step corrected covariance:
    //   V = sigma^2 A [X*'(I - rho^2 D) X* + Q] A,  A = (X*'X*)^-1,
    //   Q = rho^2 (X*' D W) V_gamma (W' D X*),  D = diag(delta).
    let rho2 = rho * rho;
    let mut m = DMatrix::zeros(p_out + 1, p_out + 1);
    for i in 0..n_sel {
        let w = 1.0 - rho2 * delta[i];
        for a in 0..=p_out {
            for b in a..=p_out {
                m[(a, b)] += w * x_star[(i, a)] * x_star[(i, b)];
            }
        }
    }
    for a in 0..=p_out {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    let mut xdw = DMatrix::zeros(p_out + 1, p_sel);
    for i in 0..n_sel {
        for a in 0..=p_out {
            for b in 0..p_sel {
                xdw[(a, b)] += delta[i] * x_star[(i, a)] * x_sel_selected[(i, b)];
            }
        }
    }
    let q = rho2 * &xdw * &selection.covariance * xdw.transpose();
    let outcome_covariance = sigma2 * &xtx_inv * (m + q) * &xtx_inv;

    // Gaussian residual likelihood for the stage-2 AIC.
    let sigma2_mle = (ssr / n_sel as f64).max(1e-300);
    let outcome_ll =
        -0.5 * n_sel as f64 * ((2.0 * std::f64::consts::PI * sigma2_mle).ln() + 1.0);
    // Parameters: outcome coefficients + Mills coefficient + residual scale.
    let p_stage2 = (p_out + 2) as f64;

    Ok(HeckmanFit {
        aic_selection: selection.aic(),
        selection,
        selection_columns: input.selection_columns.to_vec(),
        outcome_coefficients: beta,
        outcome_columns: input.outcome_columns.to_vec(),
        outcome_covariance,
        rho,
        rho_clamped,
        sigma,
        aic_outcome: 2.0 * p_stage2 - 2.0 * outcome_ll,
        outcome_log_likelihood: outcome_ll,
        n_total: n,
        n_selected: n_sel,
        mean_delta,
    })
}

fn compare_rows(input: &HeckmanInput<'_>, a: usize, b: usize) -> std::cmp::Ordering {
    for j in 0..input.x_sel.ncols() {
        let ord = input.x_sel[(a, j)].total_cmp(&input.x_sel[(b, j)]);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

#[cfg(test)]
pub(crate) mod testgen {
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// Synthetic generator: probit selection with an exclusion regressor,
    /// linear outcome with disturbance correlation `rho`.
    pub struct Synthetic {
        pub x_sel: DMatrix<f64>,
        pub x_out: DMatrix<f64>,
        pub selected: Vec<bool>,
        pub outcome: Vec<f64>,
    }

    pub fn generate(
        n: usize,
        gamma: &[f64; 3],
        beta: &[f64; 2],
        rho: f64,
        sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> Synthetic {
        let mut x_sel = DMatrix::zeros(n, 3);
        let mut selected = Vec::with_capacity(n);
        let mut x_out_rows = Vec::new();
        let mut outcome = Vec::new();
        for i in 0..n {
            let x1: f64 = rng.sample(rand_distr::StandardNormal);
            let excl: f64 = rng.sample(rand_distr::StandardNormal);
            x_sel[(i, 0)] = 1.0;
            x_sel[(i, 1)] = x1;
            x_sel[(i, 2)] = excl;
            let u: f64 = rng.sample(rand_distr::StandardNormal);
            let v: f64 = rng.sample(rand_distr::StandardNormal);
            let eps = sigma * (rho * u + (1.0 - rho * rho).sqrt() * v);
            let sel = gamma[0] + gamma[1] * x1 + gamma[2] * excl + u > 0.0;
            selected.push(sel);
            if sel {
                x_out_rows.push([1.0, x1]);
                outcome.push(beta[0] + beta[1] * x1 + eps);
            }
        }
        let x_out = DMatrix::from_fn(x_out_rows.len(), 2, |i, j| x_out_rows[i][j]);
        Synthetic { x_sel, x_out, selected, outcome }
    }

    pub fn sel_names() -> Vec<String> {
        ["(Intercept)", "x1", "excl"].iter().map(|s| s.to_string()).collect()
    }

    pub fn out_names() -> Vec<String> {
        ["(Intercept)", "x1"].iter().map(|s| s.to_string()).collect()
    }
}
