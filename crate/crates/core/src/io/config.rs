use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::OmegaDivisor;
use crate::panel::{CovarianceKind, ModelSpec, Regressor, Weighting};
use crate::study::{ClusterKind, ReplicationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    #[default]
    Text,
    Json,
    Both,
}

impl OutputMode {
    pub fn text(self) -> bool {
        matches!(self, OutputMode::Text | OutputMode::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputMode::Json | OutputMode::Both)
    }
}

impl FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(OutputMode::Text),
            "json" => Ok(OutputMode::Json),
            "both" => Ok(OutputMode::Both),
            _ => Err(Error::InvalidInput(format!("output must be text, json or both, not `{s}`"))),
        }
    }
}

impl fmt::Display for OutputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputMode::Text => "text",
            OutputMode::Json => "json",
            OutputMode::Both => "both",
        })
    }
}

/// A replication run as declared in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub scores_path: PathBuf,
    pub events_path: PathBuf,
    /// Where open crisis intervals end. Defaults to the panel's last year.
    pub horizon_end: Option<i32>,
    pub output: OutputMode,
    pub replication: ReplicationConfig,
    /// Non-fatal remarks from parsing, such as a zero lag written out.
    pub warnings: Vec<String>,
}

/// Parses `name` or `name(-k)`. A written-out zero lag is accepted with a
/// warning.
pub fn parse_regressor(expr: &str) -> Result<(Regressor, Option<String>)> {
    let bad = || Error::InvalidInput(format!("malformed regressor expression `{expr}`"));
    let valid_name = |s: &str| {
        !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
    };
    let expr_t = expr.trim();
    let Some(open) = expr_t.find('(') else {
        return if valid_name(expr_t) { Ok((Regressor::new(expr_t, 0), None)) } else { Err(bad()) };
    };
    let name = &expr_t[..open];
    let lag = expr_t[open..]
        .strip_prefix("(-")
        .and_then(|s| s.strip_suffix(')'))
        .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
        .ok_or_else(bad)?;
    if !valid_name(name) {
        return Err(bad());
    }
    let lag: usize = lag.parse().map_err(|_| bad())?;
    let warning = (lag == 0).then(|| format!("regressor `{expr_t}` has a zero lag; read as `{name}`"));
    Ok((Regressor::new(name, lag), warning))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, path, base)
    }

    /// Parses flat `key = value` lines; `#` starts a comment and
    /// `regressor` may repeat. Relative paths resolve against `base`.
    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line as u64,
            message,
        };
        let mut b = Builder::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(line, format!("expected `key = value`, found `{content}`")))?;
            b.set(key, value, base).map_err(|e| err(line, e.to_string()))?;
        }
        b.finish(path)
    }
}

#[derive(Default)]
struct Builder {
    data: Option<PathBuf>,
    scores: Option<PathBuf>,
    events: Option<PathBuf>,
    indicator: Option<String>,
    horizon_end: Option<i32>,
    dependent: Option<String>,
    regressors: Vec<Regressor>,
    intercept: Option<bool>,
    sample: Option<(i32, i32)>,
    weighting: Option<Weighting>,
    covariance: Option<CovarianceKind>,
    clusters: Option<Vec<ClusterKind>>,
    bg_lags: Option<usize>,
    output: Option<OutputMode>,
    omega_divisor: Option<OmegaDivisor>,
    dummy: Option<String>,
    diagnostics: Option<bool>,
    warnings: Vec<String>,
}

fn once<T>(slot: &mut Option<T>, key: &str, value: T) -> Result<()> {
    if slot.is_some() {
        return Err(Error::InvalidInput(format!("`{key}` given twice")));
    }
    *slot = Some(value);
    Ok(())
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(Error::InvalidInput(format!("`{key}` must be true or false, not `{value}`"))),
    }
}

fn parse_int<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidInput(format!("`{key}` must be an integer, not `{value}`")))
}

impl Builder {
    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        match key {
            "data" => once(&mut self.data, key, base.join(value)),
            "scores" => once(&mut self.scores, key, base.join(value)),
            "events" => once(&mut self.events, key, base.join(value)),
            "indicator" => once(&mut self.indicator, key, value.to_string()),
            "horizon_end" => once(&mut self.horizon_end, key, parse_int(key, value)?),
            "dependent" => once(&mut self.dependent, key, value.to_string()),
            "regressor" => {
                let (r, warning) = parse_regressor(value)?;
                self.warnings.extend(warning);
                self.regressors.push(r);
                Ok(())
            }
            "intercept" => once(&mut self.intercept, key, parse_bool(key, value)?),
            "sample" => {
                let years: Vec<&str> = value.split_whitespace().collect();
                let [first, last] = years[..] else {
                    return Err(Error::InvalidInput(format!(
                        "`sample` takes two years, e.g. `2004 2017`, not `{value}`"
                    )));
                };
                once(&mut self.sample, key, (parse_int(key, first)?, parse_int(key, last)?))
            }
            "weighting" => once(
                &mut self.weighting,
                key,
                match value {
                    "period-sur" => Weighting::PeriodSur,
                    "none" => Weighting::None,
                    _ => return Err(Error::InvalidInput(format!("unknown weighting `{value}`"))),
                },
            ),
            "covariance" => once(
                &mut self.covariance,
                key,
                match value {
                    "pcse" => CovarianceKind::PcsePeriodSur,
                    "ordinary" => CovarianceKind::Ordinary,
                    _ => return Err(Error::InvalidInput(format!("unknown covariance `{value}`"))),
                },
            ),
            "clusters" => {
                let kinds = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<Vec<ClusterKind>>>()?;
                once(&mut self.clusters, key, kinds)
            }
            "bg_lags" => once(&mut self.bg_lags, key, parse_int(key, value)?),
            "output" => once(&mut self.output, key, value.parse()?),
            "omega_divisor" => once(
                &mut self.omega_divisor,
                key,
                match value {
                    "entity-count" => OmegaDivisor::EntityCount,
                    "pair-count" => OmegaDivisor::PairCount,
                    _ => return Err(Error::InvalidInput(format!("unknown omega_divisor `{value}`"))),
                },
            ),
            "dummy" => once(&mut self.dummy, key, value.to_string()),
            "diagnostics" => once(&mut self.diagnostics, key, parse_bool(key, value)?),
            _ => Err(Error::InvalidInput(format!("unknown key `{key}`"))),
        }
    }

    fn finish(self, path: &Path) -> Result<RunConfig> {
        let missing = |key: &str| Error::Config {
            path: path.to_path_buf(),
            message: format!("missing required key `{key}`"),
        };
        let spec = ModelSpec {
            dependent: self.dependent.ok_or_else(|| missing("dependent"))?,
            regressors: self.regressors,
            include_intercept: self.intercept.unwrap_or(true),
            sample: self.sample.ok_or_else(|| missing("sample"))?,
            weighting: self.weighting.unwrap_or(Weighting::PeriodSur),
            covariance: self.covariance.unwrap_or(CovarianceKind::PcsePeriodSur),
        };
        spec.validate().map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
        let mut replication = ReplicationConfig::new(&self.indicator.ok_or_else(|| missing("indicator"))?, spec);
        if let Some(c) = self.clusters {
            replication.clusters = c;
        }
        if let Some(l) = self.bg_lags {
            replication.bg_lags = l;
        }
        if let Some(d) = self.omega_divisor {
            replication.omega_divisor = d;
        }
        if let Some(d) = self.dummy {
            replication.dummy_name = d;
        }
        if let Some(d) = self.diagnostics {
            replication.diagnostics = d;
        }
        Ok(RunConfig {
            data_path: self.data.ok_or_else(|| missing("data"))?,
            scores_path: self.scores.ok_or_else(|| missing("scores"))?,
            events_path: self.events.ok_or_else(|| missing("events"))?,
            horizon_end: self.horizon_end,
            output: self.output.unwrap_or_default(),
            replication,
            warnings: self.warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regressor_expressions() {
        assert_eq!(parse_regressor("youth(-1)").unwrap(), (Regressor::new("youth", 1), None));
        assert_eq!(parse_regressor("growth").unwrap(), (Regressor::new("growth", 0), None));
        let (r, w) = parse_regressor("x(-0)").unwrap();
        assert_eq!(r, Regressor::new("x", 0));
        assert!(w.is_some());
        for bad in ["youth(1)", "youth(-)", "(-1)", "youth(-1", "you th", "youth(-1)x", ""] {
            let e = parse_regressor(bad).unwrap_err().to_string();
            assert!(e.contains(&format!("`{bad}`")), "{e}");
        }
    }

    const MINIMAL: &str = "
        # comment
        data = panel.csv
        scores = scores.csv
        events = events.csv   # trailing comment
        indicator = Institutions
        dependent = unem
        regressor = youth(-1)
        regressor = growth
        sample = 2004 2017
    ";

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("cfg/run.cfg"), Path::new("cfg")).unwrap();
        assert_eq!(cfg.data_path, Path::new("cfg/panel.csv"));
        assert_eq!(cfg.output, OutputMode::Text);
        assert_eq!(cfg.horizon_end, None);
        let r = &cfg.replication;
        assert_eq!(r.spec.regressors, vec![Regressor::new("youth", 1), Regressor::new("growth", 0)]);
        assert!(r.spec.include_intercept);
        assert_eq!(r.spec.weighting, Weighting::PeriodSur);
        assert_eq!(r.clusters, vec![ClusterKind::Inclusive, ClusterKind::Extractive]);
        assert_eq!(r.bg_lags, 2);
    }

    #[test]
    fn overrides() {
        let text = format!(
            "{MINIMAL}\nclusters = extractive\nomega_divisor = pair-count\noutput = both\nhorizon_end = 2015\ndiagnostics = false\n"
        );
        let cfg = RunConfig::parse(&text, Path::new("run.cfg"), Path::new("")).unwrap();
        assert_eq!(cfg.replication.clusters, vec![ClusterKind::Extractive]);
        assert_eq!(cfg.replication.omega_divisor, OmegaDivisor::PairCount);
        assert_eq!(cfg.output, OutputMode::Both);
        assert_eq!(cfg.horizon_end, Some(2015));
        assert!(!cfg.replication.diagnostics);
    }

    #[test]
    fn errors() {
        let at = |text: &str| match RunConfig::parse(text, Path::new("run.cfg"), Path::new("")) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected a parse error, got {other:?}"),
        };
        assert_eq!(at("data = a\nnonsense\n"), 2);
        assert_eq!(at("data = a\ncolour = red\n"), 2);
        assert_eq!(at("data = a\ndata = b\n"), 2);
        assert_eq!(at("sample = 2004\n"), 1);
        assert_eq!(at("regressor = y(+1)\n"), 1);
        assert!(matches!(
            RunConfig::parse("data = a\n", Path::new("run.cfg"), Path::new("")),
            Err(Error::Config { .. })
        ));
    }
}
