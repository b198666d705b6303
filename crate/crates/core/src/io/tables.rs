use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::panel::{build_panel, Observation, Panel};
use crate::study::{CrisisCalendar, CrisisInterval, ScoreRow, ScoreTable};

const PANEL_KEYS: [&str; 2] = ["country", "year"];
const SCORE_HEADER: [&str; 3] = ["country", "indicator", "score"];
const SCORE_RANKS: [&str; 2] = ["world_rank", "eu_rank"];
const EVENT_HEADER: [&str; 3] = ["country", "start_year", "end_year"];
const EVENT_CATEGORY: &str = "category";
const ONGOING: &str = "ongoing";

/// CSV rows with their 1-based line numbers, header first.
struct Rows {
    path: PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Rows {
    fn read<R: Read>(source: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(source);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            rows.push((line, rec));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "file is empty".into(),
            });
        }
        Ok(Self { path: path.to_path_buf(), rows })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn header(&self) -> (u64, Vec<&str>) {
        let (line, rec) = &self.rows[0];
        (*line, rec.iter().collect())
    }

    fn body(&self) -> impl Iterator<Item = &(u64, csv::StringRecord)> {
        self.rows.iter().skip(1)
    }

    fn check_width(&self, line: u64, rec: &csv::StringRecord, width: usize) -> Result<()> {
        if rec.len() != width {
            return Err(self.err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        Ok(())
    }

    fn year(&self, line: u64, field: &str, what: &str) -> Result<i32> {
        field
            .parse()
            .map_err(|_| self.err(line, format!("{what} `{field}` is not an integer year")))
    }

    fn number(&self, line: u64, field: &str, what: &str) -> Result<f64> {
        let v: f64 = field
            .parse()
            .map_err(|_| self.err(line, format!("{what} `{field}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(line, format!("{what} `{field}` is not finite")));
        }
        Ok(v)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Reads a wide panel: `country,year,<var>,...`, one row per country-year.
/// Empty fields are missing cells.
pub fn read_panel_csv(path: &Path) -> Result<Panel> {
    parse_panel_csv(open(path)?, path)
}

pub fn parse_panel_csv<R: Read>(source: R, path: &Path) -> Result<Panel> {
    let rows = Rows::read(source, path)?;
    let (hline, header) = rows.header();
    if header.len() < 3 || header[..2] != PANEL_KEYS {
        return Err(rows.err(hline, "header must be `country,year,<variable>,...`"));
    }
    let vars = &header[2..];
    let mut seen_vars = HashSet::new();
    for v in vars {
        if v.is_empty() || !seen_vars.insert(*v) {
            return Err(rows.err(hline, format!("variable name `{v}` is empty or repeated")));
        }
    }
    let mut keys = HashSet::new();
    let mut cells = Vec::new();
    for (line, rec) in rows.body() {
        let line = *line;
        rows.check_width(line, rec, header.len())?;
        let country = &rec[0];
        if country.is_empty() {
            return Err(rows.err(line, "empty country code"));
        }
        let year = rows.year(line, &rec[1], "year")?;
        if !keys.insert((country.to_string(), year)) {
            return Err(rows.err(line, format!("duplicate row for ({country}, {year})")));
        }
        for (v, field) in vars.iter().zip(rec.iter().skip(2)) {
            let value = if field.is_empty() {
                None
            } else {
                Some(rows.number(line, field, v)?)
            };
            cells.push(Observation::new(country, year, v, value));
        }
    }
    if cells.is_empty() {
        return Err(rows.err(hline, "no data rows"));
    }
    build_panel(cells)
}

/// Reads `country,indicator,score`, optionally followed by
/// `world_rank,eu_rank`.
pub fn read_scores_csv(path: &Path) -> Result<ScoreTable> {
    parse_scores_csv(open(path)?, path)
}

pub fn parse_scores_csv<R: Read>(source: R, path: &Path) -> Result<ScoreTable> {
    let rows = Rows::read(source, path)?;
    let (hline, header) = rows.header();
    let with_ranks = header.len() == 5 && header[3..] == SCORE_RANKS;
    if header[..header.len().min(3)] != SCORE_HEADER || !(header.len() == 3 || with_ranks) {
        return Err(rows.err(
            hline,
            "header must be `country,indicator,score` or `country,indicator,score,world_rank,eu_rank`",
        ));
    }
    let mut table = Vec::new();
    let mut seen = HashSet::new();
    for (line, rec) in rows.body() {
        let line = *line;
        rows.check_width(line, rec, header.len())?;
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(rows.err(line, "empty country or indicator"));
        }
        let score = rows.number(line, &rec[2], "score")?;
        if !(crate::study::MIN_SCORE..=crate::study::MAX_SCORE).contains(&score) {
            return Err(rows.err(line, format!("score {score} is outside [1, 7]")));
        }
        if !seen.insert((rec[0].to_string(), rec[1].to_string())) {
            return Err(rows.err(line, format!("{} scored twice on {}", &rec[0], &rec[1])));
        }
        let mut row = ScoreRow::new(&rec[0], &rec[1], score);
        if with_ranks {
            let rank = |i: usize| -> Result<Option<u32>> {
                if rec[i].is_empty() {
                    return Ok(None);
                }
                rec[i]
                    .parse()
                    .map(Some)
                    .map_err(|_| rows.err(line, format!("{} `{}` is not a rank", header[i], &rec[i])))
            };
            row.world_rank = rank(3)?;
            row.eu_rank = rank(4)?;
        }
        table.push(row);
    }
    ScoreTable::new(table)
}

/// Reads `country,start_year,end_year[,category]`. `end_year` may be
/// `ongoing`, which runs to `horizon_end`. A row with both years empty
/// lists a country without episodes.
pub fn read_events_csv(path: &Path, horizon_end: i32) -> Result<CrisisCalendar> {
    parse_events_csv(open(path)?, path, horizon_end)
}

pub fn parse_events_csv<R: Read>(source: R, path: &Path, horizon_end: i32) -> Result<CrisisCalendar> {
    let rows = Rows::read(source, path)?;
    let (hline, header) = rows.header();
    let with_category = header.len() == 4 && header[3] == EVENT_CATEGORY;
    if header[..header.len().min(3)] != EVENT_HEADER || !(header.len() == 3 || with_category) {
        return Err(rows.err(
            hline,
            "header must be `country,start_year,end_year` or `country,start_year,end_year,category`",
        ));
    }
    let mut cal = CrisisCalendar::new(horizon_end);
    for (line, rec) in rows.body() {
        let line = *line;
        rows.check_width(line, rec, header.len())?;
        let country = &rec[0];
        if country.is_empty() {
            return Err(rows.err(line, "empty country code"));
        }
        if rec[1].is_empty() && rec[2].is_empty() {
            cal.add_country(country);
            continue;
        }
        let start = rows.year(line, &rec[1], "start_year")?;
        let mut interval = if &rec[2] == ONGOING {
            CrisisInterval::open(start)
        } else {
            let end = rows.year(line, &rec[2], "end_year")?;
            CrisisInterval::closed(start, end).map_err(|e| rows.err(line, e.to_string()))?
        };
        if with_category && !rec[3].is_empty() {
            interval = interval.with_category(rec[3].parse().map_err(|e: Error| rows.err(line, e.to_string()))?);
        }
        cal.add(country, interval).map_err(|e| rows.err(line, e.to_string()))?;
    }
    Ok(cal)
}
