//! Specification, residual and cross-section dependence tests.

mod collinearity;
mod cross_section;
mod effects;
mod residual;

pub use collinearity::{multicollinearity_screen, CorrelationPair, MulticollinearityScreen};
pub use cross_section::{cross_section_dependence, CrossSectionTests};
pub use effects::{
    hausman, hausman_from, hausman_statistic, redundant_fixed_effects, redundant_fixed_effects_on,
    HausmanStatistic, RedundantFixedEffects,
};
pub use residual::{breusch_godfrey, breusch_pagan_godfrey, jarque_bera};

use std::fmt;

use serde::{Deserialize, Serialize};

/// A null hypothesis is retained when its p-value is at least this level.
pub const SIGNIFICANCE: f64 = 0.05;

/// Degrees of freedom of a test statistic's reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub enum Df {
    None,
    Single(usize),
    Pair(usize, usize),
}

impl From<Df> for Vec<usize> {
    fn from(df: Df) -> Self {
        match df {
            Df::None => vec![],
            Df::Single(a) => vec![a],
            Df::Pair(a, b) => vec![a, b],
        }
    }
}

impl TryFrom<Vec<usize>> for Df {
    type Error = String;

    fn try_from(v: Vec<usize>) -> Result<Self, String> {
        match v[..] {
            [] => Ok(Df::None),
            [a] => Ok(Df::Single(a)),
            [a, b] => Ok(Df::Pair(a, b)),
            _ => Err(format!("at most two degrees of freedom, got {}", v.len())),
        }
    }
}

impl fmt::Display for Df {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Df::None => f.write_str("-"),
            Df::Single(a) => write!(f, "{a}"),
            Df::Pair(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Stable machine key, e.g. `breusch_godfrey`.
    pub name: String,
    pub title: String,
    pub null_hypothesis: String,
    pub statistic: f64,
    pub df: Df,
    pub p_value: Option<f64>,
    pub n_obs: usize,
    pub retained: bool,
    pub verdict: String,
    pub warnings: Vec<String>,
}

/// Naming and wording of one test: key, display title, null hypothesis, and
/// the conclusions when the null is retained or rejected.
pub(crate) struct TestLabels {
    pub name: &'static str,
    pub title: &'static str,
    pub null: &'static str,
    pub if_retained: &'static str,
    pub if_rejected: &'static str,
}

impl TestLabels {
    pub(crate) fn result(&self, statistic: f64, df: Df, p_value: f64, n_obs: usize) -> TestResult {
        let retained = p_value >= SIGNIFICANCE;
        TestResult {
            name: self.name.into(),
            title: self.title.into(),
            null_hypothesis: self.null.into(),
            statistic,
            df,
            p_value: Some(p_value),
            n_obs,
            retained,
            verdict: if retained { self.if_retained } else { self.if_rejected }.into(),
            warnings: Vec::new(),
        }
    }
}
