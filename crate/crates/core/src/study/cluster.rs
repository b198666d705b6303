use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SCORE: f64 = 1.0;
pub const MAX_SCORE: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub country: String,
    pub indicator: String,
    pub score: f64,
    pub world_rank: Option<u32>,
    pub eu_rank: Option<u32>,
}

impl ScoreRow {
    pub fn new(country: &str, indicator: &str, score: f64) -> Self {
        Self {
            country: country.to_string(),
            indicator: indicator.to_string(),
            score,
            world_rank: None,
            eu_rank: None,
        }
    }
}

/// Country scores on the 1-7 scale, any number of indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &rows {
            if !(MIN_SCORE..=MAX_SCORE).contains(&r.score) {
                return Err(Error::InvalidInput(format!(
                    "score {} for {} / {} is outside [{MIN_SCORE}, {MAX_SCORE}]",
                    r.score, r.country, r.indicator
                )));
            }
            if !seen.insert((r.indicator.as_str(), r.country.as_str())) {
                return Err(Error::InvalidInput(format!(
                    "{} scored twice on {}",
                    r.country, r.indicator
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn indicators(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.indicator.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn scores(&self, indicator: &str) -> BTreeMap<&str, f64> {
        self.rows
            .iter()
            .filter(|r| r.indicator == indicator)
            .map(|r| (r.country.as_str(), r.score))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub indicator: String,
    pub median: f64,
    pub inclusive: BTreeSet<String>,
    pub extractive: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl ClusterAssignment {
    pub fn countries(&self) -> BTreeSet<&str> {
        self.inclusive
            .iter()
            .chain(&self.extractive)
            .map(String::as_str)
            .collect()
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Splits the countries scored on `indicator` at the median score:
/// strictly above is inclusive, the rest extractive. Scores equal to the
/// median land in the extractive cluster with a warning.
pub fn median_cluster(table: &ScoreTable, indicator: &str) -> Result<ClusterAssignment> {
    let scores = table.scores(indicator);
    if scores.is_empty() {
        return Err(Error::UnknownVariable(indicator.to_string()));
    }
    if scores.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "clustering on {indicator} needs at least two scored countries"
        )));
    }
    let values: Vec<f64> = scores.values().copied().collect();
    let median = median(&values).expect("non-empty");
    let mut out = ClusterAssignment {
        indicator: indicator.to_string(),
        median,
        inclusive: BTreeSet::new(),
        extractive: BTreeSet::new(),
        warnings: Vec::new(),
    };
    for (&country, &score) in &scores {
        if score > median {
            out.inclusive.insert(country.to_string());
        } else {
            if score == median {
                out.warnings.push(format!(
                    "{country} scores exactly the median {median} and is assigned to the extractive cluster"
                ));
            }
            out.extractive.insert(country.to_string());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftCategory {
    Identical,
    Similar,
    SignificantlyDifferent,
}

/// One country leaving the inclusive cluster, paired with one entering it
/// when the counts allow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub leaving: Option<String>,
    pub entering: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub category: DriftCategory,
    pub left_inclusive: Vec<String>,
    pub entered_inclusive: Vec<String>,
    pub replacements: Vec<Replacement>,
}

/// Compares an alternative clustering against the main one by the number
/// of countries that leave the inclusive cluster: none is identical, one or
/// two similar, three or more significantly different.
pub fn subindicator_drift(main: &ClusterAssignment, alt: &ClusterAssignment) -> Result<DriftReport> {
    if main.countries() != alt.countries() {
        return Err(Error::InvalidInput(format!(
            "clusterings on {} and {} cover different countries",
            main.indicator, alt.indicator
        )));
    }
    let left: Vec<String> = main.inclusive.difference(&alt.inclusive).cloned().collect();
    let entered: Vec<String> = alt.inclusive.difference(&main.inclusive).cloned().collect();
    let category = match left.len() {
        0 => DriftCategory::Identical,
        1 | 2 => DriftCategory::Similar,
        _ => DriftCategory::SignificantlyDifferent,
    };
    let pairs = left.len().max(entered.len());
    let replacements = (0..pairs)
        .map(|i| Replacement {
            leaving: left.get(i).cloned(),
            entering: entered.get(i).cloned(),
        })
        .collect();
    Ok(DriftReport {
        category,
        left_inclusive: left,
        entered_inclusive: entered,
        replacements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(indicator: &str, scores: &[(&str, f64)]) -> ScoreTable {
        ScoreTable::new(scores.iter().map(|&(c, s)| ScoreRow::new(c, indicator, s)).collect()).unwrap()
    }

    fn set(codes: &[&str]) -> BTreeSet<String> {
        codes.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_countries() {
        let a = median_cluster(&table("I", &[("AA", 1.0), ("BB", 7.0)]), "I").unwrap();
        assert_eq!(a.median, 4.0);
        assert_eq!(a.inclusive, set(&["BB"]));
        assert_eq!(a.extractive, set(&["AA"]));
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn ties_go_extractive_with_warning() {
        let a = median_cluster(&table("I", &[("AA", 3.0), ("BB", 4.0), ("CC", 5.0)]), "I").unwrap();
        assert_eq!(a.extractive, set(&["AA", "BB"]));
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn table_validation() {
        assert!(ScoreTable::new(vec![ScoreRow::new("AA", "I", 7.5)]).is_err());
        assert!(ScoreTable::new(vec![ScoreRow::new("AA", "I", 2.0), ScoreRow::new("AA", "I", 3.0)]).is_err());
        let t = table("I", &[("AA", 2.0)]);
        assert!(median_cluster(&t, "I").is_err());
        assert!(matches!(median_cluster(&t, "J"), Err(Error::UnknownVariable(_))));
    }

    proptest! {
        #[test]
        fn matches_sorting_oracle(scores in prop::collection::vec(1.0f64..7.0, 7)) {
            let codes: Vec<String> = (0..7).map(|i| format!("C{i}")).collect();
            let rows: Vec<(&str, f64)> = codes.iter().map(String::as_str).zip(scores.iter().copied()).collect();
            let a = median_cluster(&table("I", &rows), "I").unwrap();
            let mut sorted = rows.clone();
            sorted.sort_by(|x, y| x.1.total_cmp(&y.1));
            prop_assert_eq!(a.median, sorted[3].1);
            let above: BTreeSet<String> = rows.iter().filter(|r| r.1 > sorted[3].1).map(|r| r.0.to_string()).collect();
            prop_assert_eq!(&a.inclusive, &above);
            prop_assert_eq!(a.inclusive.len() + a.extractive.len(), 7);
            prop_assert!(a.inclusive.is_disjoint(&a.extractive));
        }

        #[test]
        fn membership_invariant_under_increasing_transform(scores in prop::collection::vec(1.0f64..7.0, 2..20)) {
            let codes: Vec<String> = (0..scores.len()).map(|i| format!("C{i}")).collect();
            let rows: Vec<(&str, f64)> = codes.iter().map(String::as_str).zip(scores.iter().copied()).collect();
            // maps [1, 7] into [1, 7], strictly increasing
            let squashed: Vec<(&str, f64)> = rows.iter().map(|&(c, s)| (c, 1.0 + 6.0 * ((s - 1.0) / 6.0).powi(3))).collect();
            let a = median_cluster(&table("I", &rows), "I").unwrap();
            let b = median_cluster(&table("I", &squashed), "I").unwrap();
            prop_assert_eq!(a.inclusive, b.inclusive);
        }
    }

    fn assignment(indicator: &str, inclusive: &[&str], extractive: &[&str]) -> ClusterAssignment {
        ClusterAssignment {
            indicator: indicator.into(),
            median: 4.0,
            inclusive: set(inclusive),
            extractive: set(extractive),
            warnings: vec![],
        }
    }

    #[test]
    fn drift_categories() {
        let main = assignment("main", &["BE", "DE", "DK", "FR", "UK", "PT"], &["CZ", "IT", "ES", "PL", "RO"]);
        let same = subindicator_drift(&main, &main).unwrap();
        assert_eq!(same.category, DriftCategory::Identical);
        assert!(same.replacements.is_empty());

        let swap = assignment("ip", &["BE", "DE", "DK", "FR", "UK", "CZ"], &["PT", "IT", "ES", "PL", "RO"]);
        let d = subindicator_drift(&main, &swap).unwrap();
        assert_eq!(d.category, DriftCategory::Similar);
        assert_eq!(
            d.replacements,
            vec![Replacement { leaving: Some("PT".into()), entering: Some("CZ".into()) }]
        );

        let five = assignment(
            "terror",
            &["PT", "CZ", "IT", "ES", "PL", "RO"],
            &["BE", "DE", "DK", "FR", "UK"],
        );
        let d = subindicator_drift(&main, &five).unwrap();
        assert_eq!(d.category, DriftCategory::SignificantlyDifferent);
        assert_eq!(d.left_inclusive, vec!["BE", "DE", "DK", "FR", "UK"]);
        assert_eq!(d.replacements.len(), 5);

        let other = assignment("x", &["BE"], &["SE"]);
        assert!(subindicator_drift(&main, &other).is_err());
    }
}
