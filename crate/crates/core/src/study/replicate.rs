use std::fmt;
use std::str::FromStr;
use std::thread;

use serde::{Deserialize, Serialize};

use super::cluster::{median_cluster, ClusterAssignment, ScoreTable};
use super::crisis::{add_dummy, CrisisCalendar};
use crate::diagnostics::{
    breusch_godfrey, breusch_pagan_godfrey, cross_section_dependence, hausman_from, jarque_bera,
    multicollinearity_screen, redundant_fixed_effects, CorrelationPair, MulticollinearityScreen,
    TestResult,
};
use crate::error::{Error, Result};
use crate::estimators::{estimate, fixed_effects, ols, random_effects, EstimationResult, OmegaDivisor};
use crate::numerics::pearson;
use crate::panel::{assemble, DesignMatrix, ModelSpec, Panel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterKind {
    Inclusive,
    Extractive,
}

impl ClusterKind {
    pub fn key(self) -> &'static str {
        match self {
            ClusterKind::Inclusive => "inclusive",
            ClusterKind::Extractive => "extractive",
        }
    }

    pub fn members(self, assignment: &ClusterAssignment) -> Vec<String> {
        let set = match self {
            ClusterKind::Inclusive => &assignment.inclusive,
            ClusterKind::Extractive => &assignment.extractive,
        };
        set.iter().cloned().collect()
    }
}

impl fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ClusterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inclusive" => Ok(ClusterKind::Inclusive),
            "extractive" => Ok(ClusterKind::Extractive),
            _ => Err(Error::InvalidInput(format!("unknown cluster `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationConfig {
    pub indicator: String,
    pub spec: ModelSpec,
    pub clusters: Vec<ClusterKind>,
    /// Order of the Breusch-Godfrey test.
    pub bg_lags: usize,
    pub omega_divisor: OmegaDivisor,
    /// Panel variable that receives the crisis dummy.
    pub dummy_name: String,
    /// When false, only estimation and correlations are produced.
    pub diagnostics: bool,
}

impl ReplicationConfig {
    pub fn new(indicator: &str, spec: ModelSpec) -> Self {
        Self {
            indicator: indicator.to_string(),
            spec,
            clusters: vec![ClusterKind::Inclusive, ClusterKind::Extractive],
            bg_lags: 2,
            omega_divisor: OmegaDivisor::default(),
            dummy_name: "dummy".into(),
            diagnostics: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster: ClusterKind,
    pub members: Vec<String>,
    pub estimation: EstimationResult,
    pub balanced: bool,
    pub periods: Vec<i32>,
    /// Redundant FE (F, LR), Hausman, Jarque-Bera, Breusch-Pagan LM,
    /// Pesaran CD, Breusch-Pagan-Godfrey, Breusch-Godfrey.
    pub tests: Vec<TestResult>,
    /// Dependent variable against each distinct non-dummy regressor, over
    /// every panel year where both are present.
    pub correlations: Vec<CorrelationPair>,
    pub correlation_window: (i32, i32),
    pub collinearity: MulticollinearityScreen,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub indicator: String,
    pub assignment: ClusterAssignment,
    pub clusters: Vec<ClusterReport>,
}

/// Clusters the countries on the configured indicator, then estimates and
/// tests the model separately for each requested cluster. Clusters run on
/// their own threads.
pub fn replicate(
    panel: &Panel,
    scores: &ScoreTable,
    calendar: &CrisisCalendar,
    config: &ReplicationConfig,
) -> Result<ReportBundle> {
    if config.clusters.is_empty() {
        return Err(Error::InvalidInput("no clusters requested".into()));
    }
    config.spec.validate()?;
    let assignment = median_cluster(scores, &config.indicator)?;
    let results: Vec<Result<ClusterReport>> = thread::scope(|s| {
        let handles: Vec<_> = config
            .clusters
            .iter()
            .map(|&kind| {
                let assignment = &assignment;
                s.spawn(move || run_cluster(panel, calendar, config, assignment, kind))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("cluster worker panicked"))
            .collect()
    });
    Ok(ReportBundle {
        indicator: config.indicator.clone(),
        assignment,
        clusters: results.into_iter().collect::<Result<_>>()?,
    })
}

fn run_cluster(
    panel: &Panel,
    calendar: &CrisisCalendar,
    config: &ReplicationConfig,
    assignment: &ClusterAssignment,
    kind: ClusterKind,
) -> Result<ClusterReport> {
    let tag = |stage: &'static str| {
        move |e: Error| Error::Cluster {
            cluster: kind.key().to_string(),
            stage,
            source: Box::new(e),
        }
    };
    let mut warnings = Vec::new();
    let wanted = kind.members(assignment);
    let (members, missing): (Vec<String>, Vec<String>) = wanted
        .into_iter()
        .partition(|c| panel.entities().contains(c));
    for c in missing {
        warnings.push(format!("{c} has a score but no panel data"));
    }
    if members.is_empty() {
        return Err(tag("sample")(Error::EmptySample("no cluster member has panel data".into())));
    }
    let sub = panel.select_entities(&members).map_err(tag("sample"))?;
    let uses_dummy = config.spec.regressors.iter().any(|r| r.name == config.dummy_name);
    let sub = if uses_dummy && !sub.has_variable(&config.dummy_name) {
        add_dummy(&sub, calendar, &config.dummy_name).map_err(tag("crisis dummy"))?
    } else {
        sub
    };
    let dm = assemble(&sub, &config.spec).map_err(tag("sample"))?;
    let estimation = estimate(&dm, &config.spec, config.omega_divisor).map_err(tag("estimation"))?;
    warnings.extend(estimation.warnings.iter().cloned());

    let (correlations, corr_warnings) =
        dependent_correlations(&sub, &config.spec, &config.dummy_name).map_err(tag("correlations"))?;
    warnings.extend(corr_warnings);
    let collinearity = multicollinearity_screen(&dm, estimation.weighted_stats.r_squared)
        .map_err(tag("multicollinearity"))?;
    warnings.extend(collinearity.warnings.iter().cloned());

    let tests = if config.diagnostics {
        diagnostics_battery(&dm, &estimation, config.bg_lags).map_err(tag("diagnostics"))?
    } else {
        Vec::new()
    };
    for t in &tests {
        for w in &t.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }

    Ok(ClusterReport {
        cluster: kind,
        members,
        balanced: dm.is_balanced(),
        periods: dm.periods(),
        estimation,
        tests,
        correlations,
        correlation_window: (sub.first_year(), sub.last_year()),
        collinearity,
        warnings,
    })
}

/// The fixed test battery, in report order. Residual tests other than
/// Jarque-Bera use the unweighted residuals and the original regressors.
pub fn diagnostics_battery(
    dm: &DesignMatrix,
    estimation: &EstimationResult,
    bg_lags: usize,
) -> Result<Vec<TestResult>> {
    let pooled = ols(dm)?;
    let fe = fixed_effects(dm)?;
    let re = random_effects(dm)?;
    let redundant = redundant_fixed_effects(&pooled, &fe)?;
    let cross = cross_section_dependence(&estimation.residuals_unweighted, dm.obs_index())?;
    Ok(vec![
        redundant.f_test,
        redundant.lr_test,
        hausman_from(&fe, &re)?,
        jarque_bera(&estimation.residuals_weighted)?,
        cross.breusch_pagan_lm,
        cross.pesaran_cd,
        breusch_pagan_godfrey(dm, &estimation.residuals_unweighted)?,
        breusch_godfrey(dm, &estimation.residuals_unweighted, bg_lags)?,
    ])
}

fn dependent_correlations(
    panel: &Panel,
    spec: &ModelSpec,
    dummy: &str,
) -> Result<(Vec<CorrelationPair>, Vec<String>)> {
    let mut bases: Vec<&str> = Vec::new();
    for r in &spec.regressors {
        let name = r.name.as_str();
        if name != dummy && name != spec.dependent && !bases.contains(&name) {
            bases.push(name);
        }
    }
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for v in bases {
        let (a, b): (Vec<f64>, Vec<f64>) = panel
            .entities()
            .iter()
            .flat_map(|c| (panel.first_year()..=panel.last_year()).map(move |y| (c, y)))
            .filter_map(|(c, y)| Some((panel.get(c, y, &spec.dependent)?, panel.get(c, y, v)?)))
            .unzip();
        match pearson(&a, &b) {
            Ok(r) => pairs.push(CorrelationPair {
                first: spec.dependent.clone(),
                second: v.to_string(),
                r,
            }),
            Err(Error::ZeroVariance(_)) => {
                warnings.push(format!("{} / {v}: no variation, correlation skipped", spec.dependent))
            }
            Err(e) => return Err(e),
        }
    }
    Ok((pairs, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_panel, CovarianceKind, Observation, Regressor, Weighting};
    use crate::study::cluster::ScoreRow;
    use crate::study::crisis::CrisisInterval;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const COUNTRIES: [&str; 12] = ["AA", "BB", "CC", "DD", "EE", "FF", "GG", "HH", "II", "JJ", "KK", "LL"];

    fn inputs(seed: u64) -> (Panel, ScoreTable, CrisisCalendar) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut rows = Vec::new();
        let mut cal = CrisisCalendar::new(2012);
        for (i, c) in COUNTRIES.iter().enumerate() {
            cal.add(c, CrisisInterval::closed(2004 + (i as i32 % 3), 2007 + (i as i32 % 4)).unwrap())
                .unwrap();
            for y in 2000..=2012 {
                let g = z();
                let x = 10.0 + 3.0 * z();
                let unem = 2.0 + 0.3 * x - 0.5 * g + 0.4 * z();
                rows.push(Observation::new(c, y, "unem", Some(unem)));
                rows.push(Observation::new(c, y, "youth", Some(x)));
                rows.push(Observation::new(c, y, "growth", Some(g)));
            }
        }
        let scores = ScoreTable::new(
            COUNTRIES
                .iter()
                .enumerate()
                .map(|(i, c)| ScoreRow::new(c, "Inst", 1.5 + 0.4 * i as f64))
                .collect(),
        )
        .unwrap();
        (build_panel(rows).unwrap(), scores, cal)
    }

    fn config() -> ReplicationConfig {
        let spec = ModelSpec {
            dependent: "unem".into(),
            regressors: vec![
                Regressor::new("youth", 1),
                Regressor::new("growth", 0),
                Regressor::new("dummy", 0),
            ],
            include_intercept: true,
            sample: (2004, 2008),
            weighting: Weighting::PeriodSur,
            covariance: CovarianceKind::PcsePeriodSur,
        };
        ReplicationConfig::new("Inst", spec)
    }

    #[test]
    fn two_clusters_end_to_end() {
        let (panel, scores, cal) = inputs(1);
        let bundle = replicate(&panel, &scores, &cal, &config()).unwrap();
        assert_eq!(bundle.clusters.len(), 2);
        let inc = &bundle.clusters[0];
        assert_eq!(inc.cluster, ClusterKind::Inclusive);
        assert_eq!(inc.members, vec!["GG", "HH", "II", "JJ", "KK", "LL"]);
        assert_eq!(inc.estimation.n_obs, 6 * 5);
        assert_eq!(inc.periods, (2004..=2008).collect::<Vec<_>>());
        assert!(inc.balanced);
        assert_eq!(inc.tests.len(), 8);
        assert_eq!(inc.correlations.len(), 2);
        assert_eq!(inc.correlation_window, (2000, 2012));
        assert!(inc.estimation.coefficient("dummy").is_some());
    }

    #[test]
    fn deterministic() {
        let (panel, scores, cal) = inputs(2);
        let a = replicate(&panel, &scores, &cal, &config()).unwrap();
        let b = replicate(&panel, &scores, &cal, &config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_cluster_without_diagnostics() {
        let (panel, scores, cal) = inputs(3);
        let mut cfg = config();
        cfg.clusters = vec![ClusterKind::Extractive];
        cfg.diagnostics = false;
        let bundle = replicate(&panel, &scores, &cal, &cfg).unwrap();
        assert_eq!(bundle.clusters.len(), 1);
        assert_eq!(bundle.clusters[0].members, vec!["AA", "BB", "CC", "DD", "EE", "FF"]);
        assert!(bundle.clusters[0].tests.is_empty());
    }

    #[test]
    fn errors_carry_cluster_and_stage() {
        let (panel, scores, _) = inputs(4);
        let mut cal = CrisisCalendar::new(2012);
        for (i, c) in COUNTRIES[6..].iter().enumerate() {
            cal.add(c, CrisisInterval::open(2004 + i as i32)).unwrap();
        }
        let err = replicate(&panel, &scores, &cal, &config()).unwrap_err();
        match err {
            Error::Cluster { cluster, stage, source } => {
                assert_eq!(cluster, "extractive");
                assert_eq!(stage, "crisis dummy");
                assert!(matches!(*source, Error::UnknownCountry(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
