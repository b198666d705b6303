//! Country-by-year panel storage, lagging, and assembly of the stacked
//! estimation sample.
//!
//! A [`Panel`] is rectangular over its entities and a contiguous range of
//! years; any cell may be missing. [`assemble`] turns a panel plus a
//! [`ModelSpec`] into a [`DesignMatrix`] with listwise deletion, rows ordered
//! entity-major and year-minor so each entity's rows form one contiguous block.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name given to the intercept column.
pub const INTERCEPT: &str = "C";

/// One input cell for [`build_panel`]. `value: None` marks an explicitly
/// missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub entity: String,
    pub year: i32,
    pub variable: String,
    pub value: Option<f64>,
}

impl Observation {
    pub fn new(entity: &str, year: i32, variable: &str, value: Option<f64>) -> Self {
        Self {
            entity: entity.to_string(),
            year,
            variable: variable.to_string(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    entities: Vec<String>,
    first_year: i32,
    n_periods: usize,
    variables: Vec<String>,
    /// One dense column per variable, indexed `entity * n_periods + period`.
    columns: Vec<Vec<Option<f64>>>,
}

/// Builds a panel spanning the min..max year range of `rows`.
///
/// Entities and variables keep their order of first appearance. The same
/// (entity, year, variable) may appear more than once only with equal values.
pub fn build_panel<I>(rows: I) -> Result<Panel>
where
    I: IntoIterator<Item = Observation>,
{
    let rows: Vec<Observation> = rows.into_iter().collect();
    if rows.is_empty() {
        return Err(Error::InvalidInput("no observations supplied".into()));
    }

    let mut entities: Vec<String> = Vec::new();
    let mut entity_pos: HashMap<String, usize> = HashMap::new();
    let mut variables: Vec<String> = Vec::new();
    let mut variable_pos: HashMap<String, usize> = HashMap::new();
    let mut first_year = i32::MAX;
    let mut last_year = i32::MIN;

    for row in &rows {
        if !entity_pos.contains_key(&row.entity) {
            entity_pos.insert(row.entity.clone(), entities.len());
            entities.push(row.entity.clone());
        }
        if !variable_pos.contains_key(&row.variable) {
            variable_pos.insert(row.variable.clone(), variables.len());
            variables.push(row.variable.clone());
        }
        first_year = first_year.min(row.year);
        last_year = last_year.max(row.year);
    }

    let n_periods = (last_year - first_year + 1) as usize;
    let mut columns = vec![vec![None; entities.len() * n_periods]; variables.len()];

    for row in rows {
        let Some(value) = row.value else { continue };
        if !value.is_finite() {
            return Err(Error::NonFiniteCell {
                entity: row.entity,
                year: row.year,
                variable: row.variable,
            });
        }
        let e = entity_pos[&row.entity];
        let v = variable_pos[&row.variable];
        let slot = &mut columns[v][e * n_periods + (row.year - first_year) as usize];
        match *slot {
            Some(existing) if existing != value => {
                return Err(Error::ConflictingCell {
                    entity: row.entity,
                    year: row.year,
                    variable: row.variable,
                    first: existing,
                    second: value,
                });
            }
            _ => *slot = Some(value),
        }
    }

    Ok(Panel {
        entities,
        first_year,
        n_periods,
        variables,
        columns,
    })
}

impl Panel {
    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_periods as i32 - 1
    }

    pub fn periods(&self) -> Vec<i32> {
        (self.first_year..=self.last_year()).collect()
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variable_index(name).is_some()
    }

    /// Number of non-missing cells across all variables.
    pub fn cell_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|v| v.is_some()).count())
            .sum()
    }

    pub fn get(&self, entity: &str, year: i32, variable: &str) -> Option<f64> {
        let e = self.entities.iter().position(|x| x == entity)?;
        let v = self.variable_index(variable)?;
        self.value_at(e, year, v)
    }

    fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    fn value_at(&self, entity: usize, year: i32, variable: usize) -> Option<f64> {
        if year < self.first_year || year > self.last_year() {
            return None;
        }
        self.columns[variable][entity * self.n_periods + (year - self.first_year) as usize]
    }

    /// Returns a copy with a new variable filled from `f(entity, year)`.
    pub fn with_variable<F>(&self, name: &str, mut f: F) -> Result<Panel>
    where
        F: FnMut(&str, i32) -> Result<Option<f64>>,
    {
        if self.has_variable(name) {
            return Err(Error::InvalidInput(format!(
                "variable `{name}` already exists in the panel"
            )));
        }
        let mut column = Vec::with_capacity(self.entities.len() * self.n_periods);
        for entity in &self.entities {
            for year in self.first_year..=self.last_year() {
                let value = f(entity, year)?;
                if let Some(v) = value {
                    if !v.is_finite() {
                        return Err(Error::NonFiniteCell {
                            entity: entity.clone(),
                            year,
                            variable: name.to_string(),
                        });
                    }
                }
                column.push(value);
            }
        }
        let mut out = self.clone();
        out.variables.push(name.to_string());
        out.columns.push(column);
        Ok(out)
    }

    /// Restricts the panel to `entities`, keeping the panel's own entity order.
    pub fn select_entities(&self, entities: &[String]) -> Result<Panel> {
        for e in entities {
            if !self.entities.contains(e) {
                return Err(Error::UnknownCountry(e.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.entities.len())
            .filter(|&i| entities.contains(&self.entities[i]))
            .collect();
        let t = self.n_periods;
        let columns = self
            .columns
            .iter()
            .map(|col| {
                keep.iter()
                    .flat_map(|&i| col[i * t..(i + 1) * t].iter().copied())
                    .collect()
            })
            .collect();
        Ok(Panel {
            entities: keep.iter().map(|&i| self.entities[i].clone()).collect(),
            first_year: self.first_year,
            n_periods: t,
            variables: self.variables.clone(),
            columns,
        })
    }
}

/// Name of the `k`-period lag of `variable`, e.g. `youth(-1)`.
pub fn lag_name(variable: &str, k: usize) -> String {
    format!("{variable}(-{k})")
}

/// Adds the `k`-period lag of `variable` as a new variable named by
/// [`lag_name`]. The first `k` years of every entity become missing.
pub fn lag(panel: &Panel, variable: &str, k: usize) -> Result<Panel> {
    if k == 0 {
        return Err(Error::InvalidInput("lag order must be at least 1".into()));
    }
    let v = panel
        .variable_index(variable)
        .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
    let name = lag_name(variable, k);
    let t = panel.n_periods;
    let source = &panel.columns[v];
    let mut column = vec![None; source.len()];
    for e in 0..panel.entities.len() {
        for p in k..t {
            column[e * t + p] = source[e * t + p - k];
        }
    }
    let mut out = panel.clone();
    match out.variable_index(&name) {
        Some(existing) => out.columns[existing] = column,
        None => {
            out.variables.push(name);
            out.columns.push(column);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regressor {
    pub name: String,
    pub lag: usize,
}

impl Regressor {
    pub fn new(name: &str, lag: usize) -> Self {
        Self {
            name: name.to_string(),
            lag,
        }
    }

    pub fn label(&self) -> String {
        if self.lag == 0 {
            self.name.clone()
        } else {
            lag_name(&self.name, self.lag)
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    None,
    PeriodSur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    Ordinary,
    PcsePeriodSur,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: String,
    pub regressors: Vec<Regressor>,
    pub include_intercept: bool,
    pub sample: (i32, i32),
    pub weighting: Weighting,
    pub covariance: CovarianceKind,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() && !self.include_intercept {
            return Err(Error::InvalidInput("model has no regressors".into()));
        }
        if self
            .regressors
            .iter()
            .any(|r| r.lag == 0 && r.name == self.dependent)
        {
            return Err(Error::InvalidInput(format!(
                "dependent variable `{}` appears as a contemporaneous regressor",
                self.dependent
            )));
        }
        let mut seen = BTreeSet::new();
        for r in &self.regressors {
            if !seen.insert(r.label()) {
                return Err(Error::InvalidInput(format!("regressor `{r}` listed twice")));
            }
        }
        if self.sample.0 > self.sample.1 {
            return Err(Error::InvalidInput(format!(
                "sample window {}-{} is inverted",
                self.sample.0, self.sample.1
            )));
        }
        Ok(())
    }

    /// Column labels of the design matrix, intercept first when present.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.regressors.len() + 1);
        if self.include_intercept {
            names.push(INTERCEPT.to_string());
        }
        names.extend(self.regressors.iter().map(Regressor::label));
        names
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsId {
    pub entity: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityBlock {
    pub entity: String,
    pub rows: Range<usize>,
}

/// Stacked estimation sample: `y`, `X`, and the (entity, year) of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    y: DVector<f64>,
    x: DMatrix<f64>,
    obs_index: Vec<ObsId>,
    entity_blocks: Vec<EntityBlock>,
    column_names: Vec<String>,
    dependent: String,
    has_intercept: bool,
}

impl DesignMatrix {
    /// Builds a design matrix from raw parts. Rows must already be grouped
    /// by entity (each entity contiguous) with strictly increasing years
    /// inside each group.
    pub fn from_parts(
        dependent: &str,
        y: DVector<f64>,
        x: DMatrix<f64>,
        obs_index: Vec<ObsId>,
        column_names: Vec<String>,
        has_intercept: bool,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || obs_index.len() != n {
            return Err(Error::InvalidInput(format!(
                "row mismatch: y has {n}, X has {}, index has {}",
                x.nrows(),
                obs_index.len()
            )));
        }
        if x.ncols() != column_names.len() {
            return Err(Error::InvalidInput(format!(
                "X has {} columns but {} names",
                x.ncols(),
                column_names.len()
            )));
        }
        if n == 0 {
            return Err(Error::EmptySample("no rows".into()));
        }
        if x.ncols() >= n {
            return Err(Error::TooFewObservations { n, k: x.ncols() });
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design contains non-finite values".into()));
        }

        let mut entity_blocks: Vec<EntityBlock> = Vec::new();
        for (i, obs) in obs_index.iter().enumerate() {
            match entity_blocks.last_mut() {
                Some(block) if block.entity == obs.entity => {
                    if obs_index[i - 1].year >= obs.year {
                        return Err(Error::InvalidInput(format!(
                            "rows of `{}` are not in increasing year order",
                            obs.entity
                        )));
                    }
                    block.rows.end = i + 1;
                }
                _ => {
                    if entity_blocks.iter().any(|b| b.entity == obs.entity) {
                        return Err(Error::InvalidInput(format!(
                            "rows of `{}` are not contiguous",
                            obs.entity
                        )));
                    }
                    entity_blocks.push(EntityBlock {
                        entity: obs.entity.clone(),
                        rows: i..i + 1,
                    });
                }
            }
        }

        Ok(Self {
            y,
            x,
            obs_index,
            entity_blocks,
            column_names,
            dependent: dependent.to_string(),
            has_intercept,
        })
    }

    /// Same rows and labels with replaced data, used for transformed
    /// (weighted or demeaned) versions of a sample.
    pub(crate) fn with_data(&self, y: DVector<f64>, x: DMatrix<f64>) -> Self {
        debug_assert_eq!(y.len(), self.n());
        debug_assert_eq!(x.shape(), self.x.shape());
        Self {
            y,
            x,
            ..self.clone()
        }
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn obs_index(&self) -> &[ObsId] {
        &self.obs_index
    }

    pub fn entity_blocks(&self) -> &[EntityBlock] {
        &self.entity_blocks
    }

    pub fn n_entities(&self) -> usize {
        self.entity_blocks.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn dependent(&self) -> &str {
        &self.dependent
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// Distinct years present in the sample, ascending.
    pub fn periods(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.obs_index.iter().map(|o| o.year).collect();
        set.into_iter().collect()
    }

    /// True when every entity is observed in every sample period.
    pub fn is_balanced(&self) -> bool {
        let t = self.periods().len();
        self.entity_blocks.iter().all(|b| b.rows.len() == t)
    }

    pub fn sample_range(&self) -> (i32, i32) {
        let periods = self.periods();
        (periods[0], periods[periods.len() - 1])
    }
}

/// Assembles the estimation sample for `spec`, dropping every (entity, year)
/// where the dependent variable or any regressor is missing.
pub fn assemble(panel: &Panel, spec: &ModelSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let dep = panel
        .variable_index(&spec.dependent)
        .ok_or_else(|| Error::UnknownVariable(spec.dependent.clone()))?;
    let regs: Vec<(usize, i32)> = spec
        .regressors
        .iter()
        .map(|r| {
            panel
                .variable_index(&r.name)
                .map(|v| (v, r.lag as i32))
                .ok_or_else(|| Error::UnknownVariable(r.name.clone()))
        })
        .collect::<Result<_>>()?;

    let first = spec.sample.0.max(panel.first_year());
    let last = spec.sample.1.min(panel.last_year());
    if first > last {
        return Err(Error::EmptySample(format!(
            "window {}-{} lies outside panel years {}-{}",
            spec.sample.0,
            spec.sample.1,
            panel.first_year(),
            panel.last_year()
        )));
    }

    let k = regs.len() + usize::from(spec.include_intercept);
    let mut ys = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut obs_index = Vec::new();
    let mut row = Vec::with_capacity(k);

    for (e, entity) in panel.entities.iter().enumerate() {
        'years: for year in first..=last {
            let Some(yv) = panel.value_at(e, year, dep) else {
                continue;
            };
            row.clear();
            if spec.include_intercept {
                row.push(1.0);
            }
            for &(v, lag) in &regs {
                match panel.value_at(e, year - lag, v) {
                    Some(xv) => row.push(xv),
                    None => continue 'years,
                }
            }
            ys.push(yv);
            xs.extend_from_slice(&row);
            obs_index.push(ObsId {
                entity: entity.clone(),
                year,
            });
        }
    }

    let n = ys.len();
    if n == 0 {
        return Err(Error::EmptySample(format!(
            "no complete observations in {first}-{last}"
        )));
    }
    if k >= n {
        return Err(Error::TooFewObservations { n, k });
    }
    DesignMatrix::from_parts(
        &spec.dependent,
        DVector::from_vec(ys),
        DMatrix::from_row_slice(n, k, &xs),
        obs_index,
        spec.column_names(),
        spec.include_intercept,
    )
}
