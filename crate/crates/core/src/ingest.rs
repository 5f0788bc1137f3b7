//! Country × indicator × year panels: loading, validation and windowing.
//!
//! Two CSV layouts are understood. The long layout has one observation per
//! row under the header `country,indicator,year,value`; the wide layout has
//! one (country, indicator) pair per row followed by one column per year.
//! Empty cells are missing. The World Bank's `..` marker and `NA`/`NaN` are
//! read as missing too, with a diagnostic.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorKind {
    Environmental,
    Economic,
    Gdp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorId {
    pub code: String,
    pub description: String,
    pub units: String,
    pub kind: IndicatorKind,
}

impl IndicatorId {
    fn unknown(code: &str) -> Self {
        Self {
            code: code.to_string(),
            description: code.to_string(),
            units: String::new(),
            kind: IndicatorKind::Environmental,
        }
    }
}

const BUNDLED_DICTIONARY: &str = include_str!("../data/indicators.json");

/// The bundled indicator dictionary.
pub fn default_dictionary() -> Vec<IndicatorId> {
    serde_json::from_str(BUNDLED_DICTIONARY).expect("bundled dictionary is valid JSON")
}

pub fn load_dictionary<R: Read>(reader: R) -> Result<Vec<IndicatorId>> {
    let dict: Vec<IndicatorId> = serde_json::from_reader(reader)?;
    let mut seen = BTreeSet::new();
    for id in &dict {
        if !seen.insert(id.code.as_str()) {
            return Err(Error::invalid(format!("duplicate indicator code `{}`", id.code)));
        }
    }
    Ok(dict)
}

/// The ten economies used by default.
pub fn default_countries() -> Vec<String> {
    ["US", "CN", "JP", "DE", "GB", "IN", "BR", "AU", "FR", "CA"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelFormat {
    LongCsv,
    WideCsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "epsilon")]
pub enum PositivityPolicy {
    Reject,
    Floor(f64),
}

impl Default for PositivityPolicy {
    fn default() -> Self {
        PositivityPolicy::Reject
    }
}

/// Dense country × indicator × year grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorPanel {
    countries: Vec<String>,
    indicators: Vec<IndicatorId>,
    first_year: i32,
    last_year: i32,
    values: Vec<Option<f64>>,
    /// Parse-time notes (missing markers and their locations).
    pub diagnostics: Vec<String>,
}

impl IndicatorPanel {
    /// Empty (all-missing) panel over the given axes.
    pub fn new(
        countries: Vec<String>,
        indicators: Vec<IndicatorId>,
        first_year: i32,
        last_year: i32,
    ) -> Result<Self> {
        if last_year < first_year {
            return Err(Error::invalid(format!(
                "year range [{first_year}, {last_year}] is empty"
            )));
        }
        check_unique(countries.iter().map(String::as_str), "country")?;
        check_unique(indicators.iter().map(|i| i.code.as_str()), "indicator")?;
        let n = countries.len() * indicators.len() * (last_year - first_year + 1) as usize;
        Ok(Self {
            countries,
            indicators,
            first_year,
            last_year,
            values: vec![None; n],
            diagnostics: Vec::new(),
        })
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn indicators(&self) -> &[IndicatorId] {
        &self.indicators
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.last_year
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.first_year..=self.last_year
    }

    pub fn n_years(&self) -> usize {
        (self.last_year - self.first_year + 1) as usize
    }

    fn offset(&self, c: usize, k: usize, year: i32) -> usize {
        debug_assert!(year >= self.first_year && year <= self.last_year);
        (c * self.indicators.len() + k) * self.n_years() + (year - self.first_year) as usize
    }

    pub fn get(&self, c: usize, k: usize, year: i32) -> Option<f64> {
        self.values[self.offset(c, k, year)]
    }

    pub fn set(&mut self, c: usize, k: usize, year: i32, value: Option<f64>) {
        let o = self.offset(c, k, year);
        self.values[o] = value;
    }

    pub fn country_index(&self, code: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == code)
    }

    pub fn indicator_index(&self, code: &str) -> Option<usize> {
        self.indicators.iter().position(|i| i.code == code)
    }

    /// Index of the single GDP-per-capita indicator.
    pub fn gdp_index(&self) -> Result<usize> {
        let gdp: Vec<usize> = self
            .indicators
            .iter()
            .enumerate()
            .filter(|(_, i)| i.kind == IndicatorKind::Gdp)
            .map(|(k, _)| k)
            .collect();
        match gdp.as_slice() {
            [k] => Ok(*k),
            _ => Err(Error::invalid(format!(
                "panel must contain exactly one GDP indicator, found {}",
                gdp.len()
            ))),
        }
    }

    /// Smallest non-missing value, if any.
    pub fn min_value(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::min)
    }

    /// Keep only the listed countries, in the listed order.
    pub fn select_countries(&self, codes: &[String]) -> Result<Self> {
        let idx: Vec<usize> = codes
            .iter()
            .map(|c| {
                self.country_index(c)
                    .ok_or_else(|| Error::Mismatch(format!("country `{c}` not in panel")))
            })
            .collect::<Result<_>>()?;
        let mut out = Self::new(
            codes.to_vec(),
            self.indicators.clone(),
            self.first_year,
            self.last_year,
        )?;
        for (new_c, &old_c) in idx.iter().enumerate() {
            for k in 0..self.indicators.len() {
                for y in self.years() {
                    out.set(new_c, k, y, self.get(old_c, k, y));
                }
            }
        }
        Ok(out)
    }
}

fn check_unique<'a>(items: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for it in items {
        if !seen.insert(it) {
            return Err(Error::invalid(format!("duplicate {what} `{it}`")));
        }
    }
    Ok(())
}

enum Cell {
    Value(f64),
    Missing(Option<String>),
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Cell> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(Cell::Missing(None));
    }
    if matches!(s, ".." | "NA" | "NaN" | "nan" | "n/a") {
        return Ok(Cell::Missing(Some(format!(
            "line {line}, column `{column}`: missing marker `{s}`"
        ))));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Cell::Value(v)),
        _ => Err(Error::NonNumeric {
            line,
            column: column.to_string(),
            value: s.to_string(),
        }),
    }
}

fn parse_year(raw: &str, line: u64, column: &str) -> Result<i32> {
    raw.trim().parse::<i32>().map_err(|_| Error::NonNumeric {
        line,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

struct Observation {
    country: String,
    indicator: String,
    year: i32,
    cell: Cell,
}

/// Parse a panel. Indicator metadata comes from `dictionary`; codes not in
/// the dictionary are kept as environmental indicators with a diagnostic.
pub fn load_panel<R: Read>(
    source: R,
    format: PanelFormat,
    dictionary: &[IndicatorId],
) -> Result<IndicatorPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut obs = Vec::new();

    match format {
        PanelFormat::LongCsv => {
            if header != ["country", "indicator", "year", "value"] {
                return Err(Error::MalformedHeader(format!(
                    "expected `country,indicator,year,value`, got `{}`",
                    header.join(",")
                )));
            }
            for rec in rdr.records() {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line());
                obs.push(Observation {
                    country: rec[0].trim().to_string(),
                    indicator: rec[1].trim().to_string(),
                    year: parse_year(&rec[2], line, "year")?,
                    cell: parse_cell(&rec[3], line, "value")?,
                });
            }
        }
        PanelFormat::WideCsv => {
            if header.len() < 3 || header[0] != "country" || header[1] != "indicator" {
                return Err(Error::MalformedHeader(format!(
                    "expected `country,indicator,<year>,...`, got `{}`",
                    header.join(",")
                )));
            }
            let years: Vec<i32> = header[2..]
                .iter()
                .map(|h| {
                    h.parse::<i32>()
                        .map_err(|_| Error::MalformedHeader(format!("`{h}` is not a year")))
                })
                .collect::<Result<_>>()?;
            if years.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::MalformedHeader(
                    "year columns must be contiguous and increasing".into(),
                ));
            }
            for rec in rdr.records() {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line());
                for (j, &year) in years.iter().enumerate() {
                    obs.push(Observation {
                        country: rec[0].trim().to_string(),
                        indicator: rec[1].trim().to_string(),
                        year,
                        cell: parse_cell(&rec[j + 2], line, &header[j + 2])?,
                    });
                }
            }
        }
    }

    if obs.is_empty() {
        return Err(Error::short("panel has no data rows"));
    }

    let mut countries: Vec<String> = Vec::new();
    let mut codes: Vec<String> = Vec::new();
    let mut first = i32::MAX;
    let mut last = i32::MIN;
    for o in &obs {
        if !countries.contains(&o.country) {
            countries.push(o.country.clone());
        }
        if !codes.contains(&o.indicator) {
            codes.push(o.indicator.clone());
        }
        first = first.min(o.year);
        last = last.max(o.year);
    }

    let by_code: HashMap<&str, &IndicatorId> =
        dictionary.iter().map(|d| (d.code.as_str(), d)).collect();
    let mut diagnostics = Vec::new();
    let indicators: Vec<IndicatorId> = codes
        .iter()
        .map(|c| match by_code.get(c.as_str()) {
            Some(id) => (*id).clone(),
            None => {
                diagnostics.push(format!("indicator `{c}` not in dictionary"));
                IndicatorId::unknown(c)
            }
        })
        .collect();

    let mut panel = IndicatorPanel::new(countries, indicators, first, last)?;
    let mut seen = vec![false; panel.values.len()];
    for o in obs {
        let c = panel.country_index(&o.country).expect("axis built from rows");
        let k = panel.indicator_index(&o.indicator).expect("axis built from rows");
        let off = panel.offset(c, k, o.year);
        if std::mem::replace(&mut seen[off], true) {
            return Err(Error::DuplicateCell {
                country: o.country,
                indicator: o.indicator,
                year: o.year,
            });
        }
        panel.values[off] = match o.cell {
            Cell::Value(v) => Some(v),
            Cell::Missing(note) => {
                diagnostics.extend(note);
                None
            }
        };
    }
    panel.diagnostics = diagnostics;
    Ok(panel)
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Serialize a panel so that [`load_panel`] reads it back unchanged.
pub fn write_panel<W: Write>(panel: &IndicatorPanel, format: PanelFormat, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    match format {
        PanelFormat::LongCsv => {
            w.write_record(["country", "indicator", "year", "value"])?;
            for (c, country) in panel.countries.iter().enumerate() {
                for (k, ind) in panel.indicators.iter().enumerate() {
                    for y in panel.years() {
                        w.write_record([
                            country.clone(),
                            ind.code.clone(),
                            y.to_string(),
                            fmt_cell(panel.get(c, k, y)),
                        ])?;
                    }
                }
            }
        }
        PanelFormat::WideCsv => {
            let mut header = vec!["country".to_string(), "indicator".to_string()];
            header.extend(panel.years().map(|y| y.to_string()));
            w.write_record(&header)?;
            for (c, country) in panel.countries.iter().enumerate() {
                for (k, ind) in panel.indicators.iter().enumerate() {
                    let mut row = vec![country.clone(), ind.code.clone()];
                    row.extend(panel.years().map(|y| fmt_cell(panel.get(c, k, y))));
                    w.write_record(&row)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One replaced cell under the floor policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FloorEvent {
    pub country: String,
    pub indicator: String,
    pub year: i32,
    pub original: f64,
    pub replacement: f64,
}

/// Enforce strictly positive values. Under `Floor(eps)` every nonpositive
/// value becomes `eps` and is logged; under `Reject` the first one aborts.
pub fn validate_positivity(
    panel: &IndicatorPanel,
    policy: PositivityPolicy,
) -> Result<(IndicatorPanel, Vec<FloorEvent>)> {
    if let PositivityPolicy::Floor(eps) = policy {
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("floor epsilon must be > 0, got {eps}")));
        }
    }
    let mut out = panel.clone();
    let mut events = Vec::new();
    for (c, country) in panel.countries.iter().enumerate() {
        for (k, ind) in panel.indicators.iter().enumerate() {
            for y in panel.years() {
                let Some(v) = panel.get(c, k, y) else { continue };
                if v > 0.0 {
                    continue;
                }
                match policy {
                    PositivityPolicy::Reject => {
                        return Err(Error::NonPositive {
                            country: country.clone(),
                            indicator: ind.code.clone(),
                            year: y,
                            value: v,
                        })
                    }
                    PositivityPolicy::Floor(eps) => {
                        warn!("floored {v} at ({country}, {}, {y}) to {eps}", ind.code);
                        out.set(c, k, y, Some(eps));
                        events.push(FloorEvent {
                            country: country.clone(),
                            indicator: ind.code.clone(),
                            year: y,
                            original: v,
                            replacement: eps,
                        });
                    }
                }
            }
        }
    }
    Ok((out, events))
}

/// Restrict the year axis to `[start, end]`.
pub fn select_window(panel: &IndicatorPanel, start: i32, end: i32) -> Result<IndicatorPanel> {
    if start > end || start < panel.first_year || end > panel.last_year {
        return Err(Error::WindowOutOfRange {
            start,
            end,
            first: panel.first_year,
            last: panel.last_year,
        });
    }
    let mut out = IndicatorPanel::new(
        panel.countries.clone(),
        panel.indicators.clone(),
        start,
        end,
    )?;
    for c in 0..panel.countries.len() {
        for k in 0..panel.indicators.len() {
            for y in start..=end {
                out.set(c, k, y, panel.get(c, k, y));
            }
        }
    }
    out.diagnostics = panel.diagnostics.clone();
    Ok(out)
}
