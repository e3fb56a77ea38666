//! CSV inputs: lifetimes, covariates, current ages and failure scripts.
//!
//! Every file starts with an exact header line; errors carry the 1-based
//! line number and, where it applies, the column name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use pmkit::estimation::{CovariateSeries, FailureRecord, LifetimeDataset};

use crate::error::{CliError, CliResult};

pub const LIFETIMES_HEADER: [&str; 4] = ["farm_id", "unit_id", "event", "age_months"];
pub const COVARIATES_HEADER: [&str; 3] = ["unit_id", "month", "value"];
pub const AGES_HEADER: [&str; 2] = ["unit_id", "age_months"];
pub const SCRIPT_HEADER: [&str; 2] = ["unit_id", "failure_age"];

fn invalid(message: String) -> CliError {
    CliError::usage("invalid_input", message)
}

struct Table {
    name: String,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, header: &[&str]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&path.display().to_string(), &text, header)
    }

    fn parse(name: &str, text: &str, header: &[&str]) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let found = reader
            .headers()
            .map_err(|e| invalid(format!("{name}: line 1: {e}")))?
            .clone();
        if found.iter().collect::<Vec<_>>() != header {
            return Err(invalid(format!(
                "{name}: line 1: header must be `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                invalid(format!("{name}: line {line}: {e}"))
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Self {
            name: name.to_string(),
            rows,
        })
    }

    fn error(&self, line: u64, column: &str, message: impl std::fmt::Display) -> CliError {
        invalid(format!("{}: line {line}, column `{column}`: {message}", self.name))
    }

    fn positive(&self, line: u64, column: &str, field: &str) -> CliResult<u32> {
        match field.parse::<u32>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(self.error(line, column, format!("expected a positive integer, found `{field}`"))),
        }
    }

    fn id(&self, line: u64, column: &str, field: &str) -> CliResult<String> {
        if field.is_empty() || field.contains(';') {
            return Err(self.error(line, column, format!("invalid id `{field}`")));
        }
        Ok(field.to_string())
    }
}

/// `farm_id,unit_id,event,age_months` with `event` one of `failure`, `censored`.
pub fn parse_lifetimes_csv(path: &Path) -> CliResult<LifetimeDataset> {
    lifetimes_from_table(Table::read(path, &LIFETIMES_HEADER)?)
}

pub fn parse_lifetimes_str(name: &str, text: &str) -> CliResult<LifetimeDataset> {
    lifetimes_from_table(Table::parse(name, text, &LIFETIMES_HEADER)?)
}

fn lifetimes_from_table(table: Table) -> CliResult<LifetimeDataset> {
    let mut ds = LifetimeDataset::default();
    let mut seen = BTreeSet::new();
    for (line, r) in &table.rows {
        let farm = table.id(*line, "farm_id", &r[0])?;
        let unit = table.id(*line, "unit_id", &r[1])?;
        let age = table.positive(*line, "age_months", &r[3])?;
        let failed = match &r[2] {
            "failure" => true,
            "censored" => false,
            other => {
                return Err(table.error(*line, "event", format!("expected `failure` or `censored`, found `{other}`")))
            }
        };
        if !seen.insert((farm.clone(), unit.clone(), failed, age)) {
            return Err(table.error(*line, "unit_id", format!("duplicate record for unit `{unit}` of farm `{farm}`")));
        }
        if failed {
            ds.failures.push(FailureRecord {
                unit_id: unit,
                failure_age: age,
                covariates: None,
            });
        } else {
            ds.censored_ages.push(age);
        }
    }
    Ok(ds)
}

/// `unit_id,month,value`, rows in any order, months consecutive per unit.
pub fn parse_covariates_csv(path: &Path) -> CliResult<BTreeMap<String, CovariateSeries>> {
    covariates_from_table(Table::read(path, &COVARIATES_HEADER)?)
}

pub fn parse_covariates_str(name: &str, text: &str) -> CliResult<BTreeMap<String, CovariateSeries>> {
    covariates_from_table(Table::parse(name, text, &COVARIATES_HEADER)?)
}

fn covariates_from_table(table: Table) -> CliResult<BTreeMap<String, CovariateSeries>> {
    let mut units: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for (line, r) in &table.rows {
        let unit = table.id(*line, "unit_id", &r[0])?;
        let month = table.positive(*line, "month", &r[1])?;
        let value: f64 = r[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| table.error(*line, "value", format!("expected a finite number, found `{}`", &r[2])))?;
        if units.entry(unit.clone()).or_default().insert(month, value).is_some() {
            return Err(table.error(*line, "month", format!("month {month} repeated for unit `{unit}`")));
        }
    }
    let mut out = BTreeMap::new();
    for (unit, months) in units {
        let first = *months.keys().next().expect("at least one row per unit");
        for (k, &month) in months.keys().enumerate() {
            let expected = first + k as u32;
            if month != expected {
                return Err(invalid(format!(
                    "{}: unit `{unit}` has no value for month {expected}",
                    table.name
                )));
            }
        }
        let series = CovariateSeries::new(unit.clone(), first, months.into_values().collect())?;
        out.insert(unit, series);
    }
    Ok(out)
}

/// `unit_id,age_months`; ages may be zero. Order is kept.
pub fn parse_ages_csv(path: &Path) -> CliResult<Vec<(String, u32)>> {
    ages_from_table(Table::read(path, &AGES_HEADER)?)
}

pub fn parse_ages_str(name: &str, text: &str) -> CliResult<Vec<(String, u32)>> {
    ages_from_table(Table::parse(name, text, &AGES_HEADER)?)
}

fn ages_from_table(table: Table) -> CliResult<Vec<(String, u32)>> {
    let mut out: Vec<(String, u32)> = Vec::new();
    for (line, r) in &table.rows {
        let unit = table.id(*line, "unit_id", &r[0])?;
        let age = r[1]
            .parse::<u32>()
            .map_err(|_| table.error(*line, "age_months", format!("expected a non-negative integer, found `{}`", &r[1])))?;
        if out.iter().any(|(u, _)| *u == unit) {
            return Err(table.error(*line, "unit_id", format!("unit `{unit}` listed twice")));
        }
        out.push((unit, age));
    }
    if out.is_empty() {
        return Err(invalid(format!("{}: no units", table.name)));
    }
    Ok(out)
}

/// `unit_id,failure_age`; rows of one unit are its successive gearboxes.
pub fn parse_script_csv(path: &Path) -> CliResult<Vec<(String, Vec<u32>)>> {
    script_from_table(Table::read(path, &SCRIPT_HEADER)?)
}

pub fn parse_script_str(name: &str, text: &str) -> CliResult<Vec<(String, Vec<u32>)>> {
    script_from_table(Table::parse(name, text, &SCRIPT_HEADER)?)
}

fn script_from_table(table: Table) -> CliResult<Vec<(String, Vec<u32>)>> {
    let mut out: Vec<(String, Vec<u32>)> = Vec::new();
    for (line, r) in &table.rows {
        let unit = table.id(*line, "unit_id", &r[0])?;
        let age = table.positive(*line, "failure_age", &r[1])?;
        match out.iter_mut().find(|(u, _)| *u == unit) {
            Some((_, ages)) => ages.push(age),
            None => out.push((unit, vec![age])),
        }
    }
    Ok(out)
}
