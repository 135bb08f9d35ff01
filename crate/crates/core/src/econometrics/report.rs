//! Plain-text regression table, machine-readable fit record, and
//! marginal-effect curve export.

use std::io::Write;

use super::heckman::HeckmanFit;
use super::margins::MarginalEffect;
use super::mills::normal_cdf;

/// Row layout: group headers with the canonical column names under each.
const LAYOUT: &[(&str, &[&str])] = &[
    ("", &["(Intercept)"]),
    ("Reflection", &["tox", "emo", "ang", "anx"]),
    ("Exploration", &["div", "eng"]),
    ("Connection", &["ppb", "apb", "sen", "dvi"]),
    ("Controls", &["coherence", "n_posts", "seniority"]),
];

pub fn display_name(column: &str) -> &str {
    match column {
        "tox" => "Toxicity (TOX)",
        "emo" => "Emotionality (EMO)",
        "ang" => "Anger (ANG)",
        "anx" => "Anxiety (ANX)",
        "div" => "Diversification (DIV)",
        "eng" => "Engagement (ENG)",
        "ppb" => "Passive Int. (PPB)",
        "apb" => "Active Int. (APB)",
        "sen" => "Neigh. Seniority (SEN)",
        "dvi" => "Neigh. Div. (DVI)",
        "coherence" => "Coherence",
        "n_posts" => "Numb. Posts",
        "seniority" => "Seniority",
        other => other,
    }
}

pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}

fn two_sided_p(estimate: f64, se: f64) -> f64 {
    if se <= 0.0 {
        return 1.0;
    }
    2.0 * (1.0 - normal_cdf((estimate / se).abs()))
}

fn cell(estimate: f64, se: f64) -> String {
    format!("{:.2} ({:.2}){}", estimate, se, significance_stars(two_sided_p(estimate, se)))
}

/// Approximate dispersion-parameter standard errors from the Mills-ratio
/// coefficient, treating the stage-1 estimates as fixed.
fn rho_sigma_se(fit: &HeckmanFit) -> (f64, f64) {
    let p = fit.outcome_coefficients.len() - 1;
    let se_bl = fit.outcome_covariance[(p, p)].max(0.0).sqrt();
    let se_rho = if fit.sigma > 0.0 { se_bl / fit.sigma } else { 0.0 };
    let se_sigma = if fit.sigma > 0.0 {
        (fit.mean_delta * fit.lambda_coefficient() / fit.sigma).abs() * se_bl
    } else {
        0.0
    };
    (se_rho, se_sigma)
}

/// Render the two-equation fit as a plain-text table: coefficient, standard
/// error in parentheses, significance stars, one column per equation.
pub fn render_regression_table(fit: &HeckmanFit) -> String {
    let label_w = 26;
    let col_w = 20;
    let sel_se = fit.selection.standard_errors();
    let out_se = fit.outcome_standard_errors();

    let sel_cell = |name: &str| -> String {
        fit.selection_columns
            .iter()
            .position(|c| c == name)
            .map(|j| cell(fit.selection.coefficients[j], sel_se[j]))
            .unwrap_or_default()
    };
    let out_cell = |name: &str| -> String {
        fit.outcome_columns
            .iter()
            .position(|c| c == name)
            .map(|j| cell(fit.outcome_coefficients[j], out_se[j]))
            .unwrap_or_default()
    };
    let row = |label: &str, sel: &str, out: &str| {
        format!("{label:<label_w$}{sel:>col_w$}{out:>col_w$}\n")
    };

    let mut out = String::new();
    out.push_str(&row("", "Selection Eq.", "Outcome Eq."));
    out.push_str(&"-".repeat(label_w + 2 * col_w));
    out.push('\n');

    let mut covered: Vec<&str> = Vec::new();
    for &(group, names) in LAYOUT {
        let present: Vec<&&str> = names
            .iter()
            .filter(|n| {
                fit.selection_columns.iter().any(|c| c == **n)
                    || fit.outcome_columns.iter().any(|c| c == **n)
            })
            .collect();
        if present.is_empty() {
            continue;
        }
        if !group.is_empty() {
            out.push_str(&row(group, "", ""));
        }
        for &&name in &present {
            let indent = if group.is_empty() { "" } else { "  " };
            let label = format!("{indent}{}", display_name(name));
            out.push_str(&row(&label, &sel_cell(name), &out_cell(name)));
            covered.push(name);
        }
    }
    // Any column outside the canonical layout still gets a row.
    for name in fit.selection_columns.iter().chain(fit.outcome_columns.iter()) {
        if name != "(Intercept)" && !covered.contains(&name.as_str()) {
            out.push_str(&row(name, &sel_cell(name), &out_cell(name)));
            covered.push(name);
        }
    }

    let (se_rho, se_sigma) = rho_sigma_se(fit);
    out.push_str(&"-".repeat(label_w + 2 * col_w));
    out.push('\n');
    out.push_str(&row("Rho (\u{03c1})", "", &cell(fit.rho, se_rho)));
    out.push_str(&row("Sigma (\u{03c3})", "", &format!("{:.2} ({:.2})", fit.sigma, se_sigma)));
    out.push_str(&row(
        "AIC",
        &format!("{:.2}", fit.aic_selection),
        &format!("{:.2}", fit.aic_outcome),
    ));
    out.push_str(&row(
        "Num. obs.",
        &fit.n_total.to_string(),
        &fit.n_selected.to_string(),
    ));
    out.push_str(&"-".repeat(label_w + 2 * col_w));
    out.push_str("\n*** p < 0.001; ** p < 0.01; * p < 0.05\n");
    out
}

/// Machine-readable record of the fit.
pub fn regression_record(fit: &HeckmanFit) -> serde_json::Value {
    let sel_se = fit.selection.standard_errors();
    let out_se = fit.outcome_standard_errors();
    let coef_list = |names: &[String], coefs: &nalgebra::DVector<f64>, ses: &nalgebra::DVector<f64>| {
        names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                serde_json::json!({
                    "column": name,
                    "label": display_name(name),
                    "estimate": coefs[j],
                    "std_error": ses[j],
                    "p_value": two_sided_p(coefs[j], ses[j]),
                })
            })
            .collect::<Vec<_>>()
    };
    let mut out_names = fit.outcome_columns.clone();
    out_names.push("lambda".to_string());
    let (se_rho, se_sigma) = rho_sigma_se(fit);
    serde_json::json!({
        "selection": {
            "coefficients": coef_list(&fit.selection_columns, &fit.selection.coefficients, &sel_se),
            "log_likelihood": fit.selection.log_likelihood,
            "aic": fit.aic_selection,
            "n": fit.n_total,
            "converged": fit.selection.converged,
        },
        "outcome": {
            "coefficients": coef_list(&out_names, &fit.outcome_coefficients, &out_se),
            "aic": fit.aic_outcome,
            "n": fit.n_selected,
        },
        "rho": fit.rho,
        "rho_std_error": se_rho,
        "rho_clamped": fit.rho_clamped,
        "sigma": fit.sigma,
        "sigma_std_error": se_sigma,
    })
}

/// Export a marginal-effect curve as delimiter-separated values.
pub fn write_margin_curve<W: Write>(w: &mut W, effect: &MarginalEffect) -> std::io::Result<()> {
    writeln!(w, "value\tresponse\tband_low\tband_high")?;
    for pt in &effect.curve {
        writeln!(w, "{}\t{}\t{}\t{}", pt.value, pt.response, pt.lower, pt.upper)?;
    }
    Ok(())
}
