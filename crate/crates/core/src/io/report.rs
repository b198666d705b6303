use std::fmt::Write as _;

use crate::error::Result;
use crate::estimators::FitStats;
use crate::io::OutputMode;
use crate::panel::{CovarianceKind, Weighting, INTERCEPT};
use crate::study::{ClusterReport, ReportBundle};

const RULE: &str = "------------------------------------------------------------------------------------------------";
const DOUBLE_RULE: &str = "================================================================================================";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rendered {
    pub text: Option<String>,
    pub json: Option<String>,
}

pub fn emit_report(bundle: &ReportBundle, mode: OutputMode) -> Result<Rendered> {
    Ok(Rendered {
        text: mode.text().then(|| render_text(bundle)),
        json: if mode.json() { Some(render_json(bundle)?) } else { None },
    })
}

/// Pretty-printed JSON with shortest round-trip float formatting.
pub fn render_json(bundle: &ReportBundle) -> Result<String> {
    let mut s = serde_json::to_string_pretty(bundle)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<ReportBundle> {
    Ok(serde_json::from_str(text)?)
}

fn num(x: f64) -> String {
    format!("{x:>16.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| format!("{:>16}", "NA"), num)
}

fn pair_line(out: &mut String, l1: &str, v1: String, l2: &str, v2: String) {
    let _ = writeln!(out, "{l1:<24}{v1}    {l2:<24}{v2}");
}

/// Slopes in model order, intercept last.
fn display_order(names: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..names.len()).filter(|&i| names[i] != INTERCEPT).collect();
    order.extend((0..names.len()).filter(|&i| names[i] == INTERCEPT));
    order
}

pub fn render_text(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let a = &bundle.assignment;
    let join = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(" ");
    out.push_str("Panel EGLS replication report\n");
    let _ = writeln!(out, "Indicator: {}", bundle.indicator);
    let _ = writeln!(out, "Median score: {:.6}", a.median);
    let _ = writeln!(out, "Inclusive cluster ({}): {}", a.inclusive.len(), join(&a.inclusive));
    let _ = writeln!(out, "Extractive cluster ({}): {}", a.extractive.len(), join(&a.extractive));
    for c in &bundle.clusters {
        render_model(&mut out, c);
    }
    if let [a, b] = &bundle.clusters[..] {
        render_comparison(&mut out, a, b);
    }
    out
}

fn covariance_line(kind: CovarianceKind, weighting: Weighting) -> &'static str {
    match (kind, weighting) {
        (CovarianceKind::PcsePeriodSur, _) => "Period SUR (PCSE) standard errors & covariance (d.f. corrected)",
        (CovarianceKind::Ordinary, Weighting::PeriodSur) => "Conventional standard errors & covariance (weighted)",
        (CovarianceKind::Ordinary, Weighting::None) => "Conventional standard errors & covariance",
    }
}

fn render_model(out: &mut String, c: &ClusterReport) {
    let e = &c.estimation;
    let weighted = e.period_covariance.is_some();
    out.push_str(DOUBLE_RULE);
    let _ = writeln!(out, "\nModel: {} institutions cluster", c.cluster);
    let _ = writeln!(out, "{RULE}");
    let _ = writeln!(out, "Dependent Variable: {}", e.dependent.to_uppercase());
    let _ = writeln!(out, "Method: {}", e.method.description());
    let (first, last) = (c.periods.first().copied().unwrap_or(0), c.periods.last().copied().unwrap_or(0));
    let _ = writeln!(out, "Sample (adjusted): {first} {last}");
    let _ = writeln!(out, "Periods included: {}", c.periods.len());
    let _ = writeln!(out, "Cross-sections included: {}", e.n_entities);
    let balance = if c.balanced { "balanced" } else { "unbalanced" };
    let _ = writeln!(out, "Total panel ({balance}) observations: {}", e.n_obs);
    if weighted {
        out.push_str("Linear estimation after one-step weighting matrix\n");
    }
    let weighting = if weighted { Weighting::PeriodSur } else { Weighting::None };
    let _ = writeln!(out, "{}", covariance_line(e.covariance_kind, weighting));
    let _ = writeln!(out, "{RULE}");
    let _ = writeln!(
        out,
        "{:<24}{:>16}{:>16}{:>16}{:>16}",
        "Variable", "Coefficient", "Std. Error", "t-Statistic", "Prob."
    );
    let _ = writeln!(out, "{RULE}");
    for i in display_order(&e.names) {
        let _ = writeln!(
            out,
            "{:<24}{}{}{}{}",
            e.names[i].to_uppercase(),
            num(e.coefficients[i]),
            num(e.std_errors[i]),
            num(e.t_stats[i]),
            num(e.p_values[i])
        );
    }
    let _ = writeln!(out, "{RULE}");
    if weighted {
        render_weighted(out, &e.weighted_stats);
        render_unweighted(out, &e.unweighted_stats);
    } else {
        out.push_str("Statistics\n");
        let _ = writeln!(out, "{RULE}");
        render_full(out, &e.unweighted_stats);
    }

    let _ = writeln!(
        out,
        "Pearson correlations ({}-{})",
        c.correlation_window.0, c.correlation_window.1
    );
    for p in &c.correlations {
        let label = format!("{} vs {}", p.first.to_uppercase(), p.second.to_uppercase());
        let _ = writeln!(out, "{label:<24}{}", num(p.r));
    }
    let col = &c.collinearity;
    let _ = writeln!(out, "{RULE}");
    out.push_str("Multicollinearity screen\n");
    let _ = writeln!(out, "{:<24}{}", "Max |correlation|", num(col.max_abs_correlation));
    let _ = writeln!(out, "{:<24}{}", "Model R-squared", num(col.model_r_squared));
    let _ = writeln!(out, "{:<24}{:>16}", "Verdict", col.verdict());

    if !c.tests.is_empty() {
        let _ = writeln!(out, "{RULE}");
        out.push_str("Diagnostic tests\n");
        let _ = writeln!(out, "{RULE}");
        let _ = writeln!(
            out,
            "{:<46}{:>16}{:>12}{:>6}{:>12}  Result",
            "Test", "Statistic", "d.f.", "n", "Prob."
        );
        for t in &c.tests {
            let p = t.p_value.map_or_else(|| format!("{:>12}", "NA"), |p| format!("{p:>12.6}"));
            let _ = writeln!(
                out,
                "{:<46}{}{:>12}{:>6}{p}  {}",
                t.title,
                num(t.statistic),
                t.df.to_string(),
                t.n_obs,
                t.verdict
            );
        }
    }
    for w in &c.warnings {
        let _ = writeln!(out, "Warning: {w}");
    }
}

fn render_weighted(out: &mut String, w: &FitStats) {
    out.push_str("Weighted Statistics\n");
    let _ = writeln!(out, "{RULE}");
    render_full(out, w);
}

fn render_full(out: &mut String, w: &FitStats) {
    pair_line(out, "R-squared", num(w.r_squared), "Mean dependent var", num(w.mean_dep));
    pair_line(out, "Adjusted R-squared", num(w.adj_r_squared), "S.D. dependent var", num(w.sd_dep));
    pair_line(out, "S.E. of regression", num(w.se_regression), "Sum squared resid", num(w.ssr));
    pair_line(out, "F-statistic", opt(w.f_statistic), "Durbin-Watson stat", opt(w.durbin_watson));
    let _ = writeln!(out, "{:<24}{}", "Prob(F-statistic)", opt(w.prob_f));
    let _ = writeln!(out, "{RULE}");
}

fn render_unweighted(out: &mut String, u: &FitStats) {
    out.push_str("Unweighted Statistics\n");
    let _ = writeln!(out, "{RULE}");
    pair_line(out, "R-squared", num(u.r_squared), "Mean dependent var", num(u.mean_dep));
    pair_line(out, "Sum squared resid", num(u.ssr), "Durbin-Watson stat", opt(u.durbin_watson));
    let _ = writeln!(out, "{RULE}");
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn render_comparison(out: &mut String, a: &ClusterReport, b: &ClusterReport) {
    out.push_str(DOUBLE_RULE);
    out.push_str("\nCross-cluster comparison\n");
    let _ = writeln!(out, "{RULE}");
    let _ = writeln!(
        out,
        "{:<24}{:>16}{:>16}",
        "Variable",
        capitalize(a.cluster.key()),
        capitalize(b.cluster.key())
    );
    let (ea, eb) = (&a.estimation, &b.estimation);
    for i in display_order(&ea.names) {
        let name = &ea.names[i];
        let other = eb.coefficient(name).map_or_else(|| format!("{:>16}", "NA"), num);
        let _ = writeln!(out, "{:<24}{}{other}", name.to_uppercase(), num(ea.coefficients[i]));
    }
    let weighted = ea.period_covariance.is_some() && eb.period_covariance.is_some();
    if weighted {
        let _ = writeln!(
            out,
            "{:<24}{}{}",
            "R-squared (weighted)",
            num(ea.weighted_stats.r_squared),
            num(eb.weighted_stats.r_squared)
        );
    }
    let _ = writeln!(
        out,
        "{:<24}{}{}",
        if weighted { "R-squared (unweighted)" } else { "R-squared" },
        num(ea.unweighted_stats.r_squared),
        num(eb.unweighted_stats.r_squared)
    );
}
