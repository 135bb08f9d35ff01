//! Probit maximum likelihood via Newton-Raphson with step-halving.

use nalgebra::{DMatrix, DVector};

use super::mills::{normal_cdf, normal_pdf};
use super::EconError;

const GRADIENT_TOL: f64 = 1e-8;
/// Accepted (near-)full Newton steps smaller than this cannot move the
/// likelihood; on large samples the gradient's cancellation noise can sit
/// just above `GRADIENT_TOL`, so step size is the secondary stop.
const STEP_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100;
const SEPARATION_BOUND: f64 = 20.0;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ProbitFit {
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted Newton step, starting at beta = 0.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ProbitFit {
    pub fn standard_errors(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.covariance.nrows(),
            (0..self.covariance.nrows()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()),
        )
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.coefficients.len() as f64 - 2.0 * self.log_likelihood
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let z = x * beta;
    let mut ll = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let q = if yi > 0.5 { 1.0 } else { -1.0 };
        // ln Phi(q z), floored to dodge -inf during line search.
        ll += normal_cdf(q * z[i]).max(1e-300).ln();
    }
    ll
}

/// Fit a probit model. `x` must include the intercept column; `y` is 0/1.
///
/// Newton-Raphson with analytic gradient and observed Hessian, step-halving
/// so the likelihood never decreases, converged when the gradient max-norm
/// drops below 1e-8, the Newton decrement falls below the likelihood's
/// floating-point resolution, or an accepted near-full Newton step no
/// longer moves any coefficient.
pub fn fit_probit(
    x: &DMatrix<f64>,
    y: &[f64],
    column_names: Option<&[String]>,
) -> Result<ProbitFit, EconError> {
    let n = x.nrows();
    let p = x.ncols();
    assert_eq!(n, y.len(), "row count mismatch");
    if n <= p {
        return Err(EconError::TooFewRows { rows: n, cols: p });
    }
    let ones = y.iter().filter(|&&v| v > 0.5).count();
    if ones == 0 || ones == n {
        return Err(EconError::DegenerateResponse);
    }

    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(x, y, &beta);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    let mut hessian = DMatrix::zeros(p, p);

    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;
        let z = x * &beta;
        let mut gradient = DVector::zeros(p);
        hessian.fill(0.0);
        for i in 0..n {
            let q = if y[i] > 0.5 { 1.0 } else { -1.0 };
            let zi = z[i];
            // g_i = q phi(z) / Phi(q z); observed Hessian weight g_i (g_i + z_i).
            let g = q * normal_pdf(zi) / normal_cdf(q * zi).max(1e-300);
            let w = g * (g + zi);
            let xi = x.row(i);
            for a in 0..p {
                gradient[a] += g * xi[a];
                for b in a..p {
                    hessian[(a, b)] -= w * xi[a] * xi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hessian[(a, b)] = hessian[(b, a)];
            }
        }

        let grad_norm = gradient.amax();
        if grad_norm < GRADIENT_TOL {
            converged = true;
            break;
        }

        let neg_hessian = -&hessian;
        let step = neg_hessian
            .clone()
            .lu()
            .solve(&gradient)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| EconError::SingularHessian(collinear_hint(x, column_names)))?;

        // The Newton decrement g' H^-1 g bounds the attainable likelihood
        // gain; once it falls below the floating-point resolution of the
        // likelihood itself no step can be distinguished from the optimum.
        if gradient.dot(&step).abs() < 1e-12 * (1.0 + ll.abs()) {
            converged = true;
            break;
        }

        // Step-halving: never let the likelihood decrease.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &beta + &step * scale;
            let cand_ll = log_likelihood(x, y, &candidate);
            if cand_ll >= ll - 1e-12 {
                beta = candidate;
                ll = cand_ll;
                trace.push(ll);
                accepted = true;
                break;
            }
            scale /= 2.0;
        }
        if !accepted {
            break;
        }
        if scale >= 0.5 && (scale * &step).amax() < STEP_TOL {
            converged = true;
            break;
        }

        if beta.amax() > SEPARATION_BOUND {
            let worst = (0..p).max_by(|&a, &b| beta[a].abs().total_cmp(&beta[b].abs())).unwrap();
            let name = column_names
                .and_then(|names| names.get(worst).cloned())
                .unwrap_or_else(|| format!("column {worst}"));
            return Err(EconError::PerfectSeparation(name));
        }
    }

    // Covariance: inverse negative Hessian at the optimum.
    let covariance = (-&hessian)
        .lu()
        .try_inverse()
        .ok_or_else(|| EconError::SingularHessian(collinear_hint(x, column_names)))?;

    Ok(ProbitFit {
        coefficients: beta,
        covariance,
        log_likelihood: ll,
        log_likelihood_trace: trace,
        iterations,
        converged,
    })
}

/// Name near-collinear column pairs for the singular-Hessian diagnostic.
fn collinear_hint(x: &DMatrix<f64>, column_names: Option<&[String]>) -> String {
    let p = x.ncols();
    let name = |j: usize| -> String {
        column_names
            .and_then(|names| names.get(j).cloned())
            .unwrap_or_else(|| format!("column {j}"))
    };
    let mut pairs = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            let ca = x.column(a);
            let cb = x.column(b);
            let n = x.nrows() as f64;
            let ma = ca.sum() / n;
            let mb = cb.sum() / n;
            let mut cov = 0.0;
            let mut va = 0.0;
            let mut vb = 0.0;
            for i in 0..x.nrows() {
                cov += (ca[i] - ma) * (cb[i] - mb);
                va += (ca[i] - ma).powi(2);
                vb += (cb[i] - mb).powi(2);
            }
            if va == 0.0 || vb == 0.0 || (cov / (va.sqrt() * vb.sqrt())).abs() > 0.9999 {
                pairs.push(format!("{} ~ {}", name(a), name(b)));
            }
        }
    }
    if pairs.is_empty() {
        "unidentified".to_string()
    } else {
        pairs.join(", ")
    }
}
