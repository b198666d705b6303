use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;

/// Kind of crisis episode. Carried as a label only; every kind counts the
/// same for the dummy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrisisCategory {
    Currency,
    Sovereign,
    Macroprudential,
    Banking,
    AssetPrice,
    Transition,
}

impl CrisisCategory {
    pub const ALL: [CrisisCategory; 6] = [
        CrisisCategory::Currency,
        CrisisCategory::Sovereign,
        CrisisCategory::Macroprudential,
        CrisisCategory::Banking,
        CrisisCategory::AssetPrice,
        CrisisCategory::Transition,
    ];

    pub fn token(self) -> &'static str {
        match self {
            CrisisCategory::Currency => "currency",
            CrisisCategory::Sovereign => "sovereign",
            CrisisCategory::Macroprudential => "macroprudential",
            CrisisCategory::Banking => "banking",
            CrisisCategory::AssetPrice => "asset-price",
            CrisisCategory::Transition => "transition",
        }
    }
}

impl fmt::Display for CrisisCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CrisisCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown crisis category `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalEnd {
    Year(i32),
    /// Still ongoing: runs to the calendar horizon.
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrisisInterval {
    pub start: i32,
    pub end: IntervalEnd,
    pub category: Option<CrisisCategory>,
}

impl CrisisInterval {
    pub fn closed(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInput(format!("crisis interval {start}-{end} is inverted")));
        }
        Ok(Self { start, end: IntervalEnd::Year(end), category: None })
    }

    pub fn open(start: i32) -> Self {
        Self { start, end: IntervalEnd::Open, category: None }
    }

    pub fn with_category(self, category: CrisisCategory) -> Self {
        Self { category: Some(category), ..self }
    }

    /// Inclusive on both ends; open intervals stop at `horizon_end`.
    pub fn contains(&self, year: i32, horizon_end: i32) -> bool {
        let end = match self.end {
            IntervalEnd::Year(y) => y,
            IntervalEnd::Open => horizon_end,
        };
        self.start <= year && year <= end
    }
}

/// Crisis episodes per country. Overlapping or abutting intervals are
/// allowed; a year is a crisis year if any interval covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrisisCalendar {
    entries: BTreeMap<String, Vec<CrisisInterval>>,
    horizon_end: i32,
}

impl CrisisCalendar {
    pub fn new(horizon_end: i32) -> Self {
        Self { entries: BTreeMap::new(), horizon_end }
    }

    pub fn horizon_end(&self) -> i32 {
        self.horizon_end
    }

    pub fn with_horizon(mut self, horizon_end: i32) -> Self {
        self.horizon_end = horizon_end;
        self
    }

    /// Registers a country with no episodes (yet).
    pub fn add_country(&mut self, country: &str) {
        self.entries.entry(country.to_string()).or_default();
    }

    pub fn add(&mut self, country: &str, interval: CrisisInterval) -> Result<()> {
        if let IntervalEnd::Year(end) = interval.end {
            if interval.start > end {
                return Err(Error::InvalidInput(format!(
                    "crisis interval {}-{end} for {country} is inverted",
                    interval.start
                )));
            }
        }
        self.entries.entry(country.to_string()).or_default().push(interval);
        Ok(())
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn intervals(&self, country: &str) -> Option<&[CrisisInterval]> {
        self.entries.get(country).map(Vec::as_slice)
    }

    /// Number of crisis years for `country` within `from..=to`.
    pub fn crisis_years(&self, country: &str, from: i32, to: i32) -> Result<usize> {
        let mut count = 0;
        for year in from..=to {
            count += usize::from(crisis_dummy(self, country, year)? == 1);
        }
        Ok(count)
    }
}

/// 1 when `year` falls inside any of `country`'s crisis intervals, else 0.
pub fn crisis_dummy(calendar: &CrisisCalendar, country: &str, year: i32) -> Result<u8> {
    let intervals = calendar
        .intervals(country)
        .ok_or_else(|| Error::UnknownCountry(country.to_string()))?;
    Ok(u8::from(
        intervals.iter().any(|i| i.contains(year, calendar.horizon_end)),
    ))
}

/// Adds the crisis dummy as a panel variable named `name`, defined for
/// every entity and year of `panel`.
pub fn add_dummy(panel: &Panel, calendar: &CrisisCalendar, name: &str) -> Result<Panel> {
    panel.with_variable(name, |country, year| {
        crisis_dummy(calendar, country, year).map(|d| Some(f64::from(d)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_panel, Observation};
    use proptest::prelude::*;

    fn calendar() -> CrisisCalendar {
        let mut c = CrisisCalendar::new(2017);
        c.add("DE", CrisisInterval::closed(2003, 2003).unwrap()).unwrap();
        c.add("DE", CrisisInterval::closed(2007, 2013).unwrap()).unwrap();
        c.add("EL", CrisisInterval::open(2010)).unwrap();
        c.add("IT", CrisisInterval::closed(2008, 2011).unwrap()).unwrap();
        c.add("IT", CrisisInterval::closed(2011, 2013).unwrap()).unwrap();
        c.add_country("XX");
        c
    }

    #[test]
    fn interval_lookup() {
        let c = calendar();
        assert_eq!(crisis_dummy(&c, "DE", 2005).unwrap(), 0);
        assert_eq!(crisis_dummy(&c, "DE", 2010).unwrap(), 1);
        assert_eq!(crisis_dummy(&c, "DE", 2003).unwrap(), 1);
        assert_eq!(c.crisis_years("DE", 2003, 2017).unwrap(), 8);
        assert_eq!(crisis_dummy(&c, "EL", 2017).unwrap(), 1);
        assert_eq!(crisis_dummy(&c, "EL", 2018).unwrap(), 0);
        assert_eq!(c.crisis_years("EL", 2003, 2017).unwrap(), 8);
        // abutting intervals share 2011 once
        assert_eq!(c.crisis_years("IT", 2003, 2017).unwrap(), 6);
        assert_eq!(c.crisis_years("XX", 2003, 2017).unwrap(), 0);
        assert!(matches!(crisis_dummy(&c, "ZZ", 2010), Err(Error::UnknownCountry(_))));
    }

    #[test]
    fn horizon_moves_open_end() {
        let c = calendar().with_horizon(2012);
        assert_eq!(c.crisis_years("EL", 2003, 2017).unwrap(), 3);
    }

    #[test]
    fn inverted_interval_rejected() {
        assert!(CrisisInterval::closed(2010, 2005).is_err());
        let mut c = CrisisCalendar::new(2017);
        let bad = CrisisInterval { start: 2010, end: IntervalEnd::Year(2005), category: None };
        assert!(c.add("XX", bad).is_err());
    }

    #[test]
    fn categories_round_trip_and_do_not_matter() {
        for cat in CrisisCategory::ALL {
            assert_eq!(cat.token().parse::<CrisisCategory>().unwrap(), cat);
        }
        assert!("systemic".parse::<CrisisCategory>().is_err());
        let mut tagged = CrisisCalendar::new(2017);
        tagged
            .add("DE", CrisisInterval::closed(2007, 2013).unwrap().with_category(CrisisCategory::Banking))
            .unwrap();
        assert_eq!(tagged.crisis_years("DE", 2003, 2017).unwrap(), 7);
    }

    #[test]
    fn dummy_becomes_panel_variable() {
        let rows = (2003..=2006).flat_map(|y| {
            [Observation::new("DE", y, "unem", Some(1.0)), Observation::new("EL", y, "unem", Some(2.0))]
        });
        let panel = build_panel(rows).unwrap();
        let with = add_dummy(&panel, &calendar(), "dummy").unwrap();
        assert_eq!(with.get("DE", 2003, "dummy"), Some(1.0));
        assert_eq!(with.get("DE", 2004, "dummy"), Some(0.0));
        let missing = build_panel([Observation::new("FR", 2003, "unem", Some(1.0))]).unwrap();
        assert!(add_dummy(&missing, &calendar(), "dummy").is_err());
    }

    proptest! {
        #[test]
        fn adding_an_interval_never_clears_a_year(
            start in 2000i32..2020, len in 0i32..8, extra_start in 2000i32..2020, extra_len in 0i32..8,
            year in 1998i32..2025,
        ) {
            let mut c = CrisisCalendar::new(2017);
            c.add("AA", CrisisInterval::closed(start, start + len).unwrap()).unwrap();
            let before = crisis_dummy(&c, "AA", year).unwrap();
            c.add("AA", CrisisInterval::closed(extra_start, extra_start + extra_len).unwrap()).unwrap();
            prop_assert!(crisis_dummy(&c, "AA", year).unwrap() >= before);
        }
    }
}
