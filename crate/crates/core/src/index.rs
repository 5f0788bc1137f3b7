//! Normalized indicators, per-country environmental indices (EI), their
//! dollar-denominated counterparts (DEI) and the global average (GDEI).
//!
//! Normalization is cross-sectional and done year by year: for every
//! indicator each country's value is divided by the sum over countries, so
//! the shares of one indicator in one year sum to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{IndicatorKind, IndicatorPanel};

/// Reserved country code of the global index.
pub const GLOBAL: &str = "GLOBAL";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GdpPolicy {
    /// Average the non-GDP shares only (divide by K - 1).
    #[default]
    ExcludeGdpDivideByKMinus1,
    /// Average every share including GDP (divide by K).
    IncludeAllDivideByK,
}

/// Yearly index values for one country (or [`GLOBAL`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub country: String,
    pub first_year: i32,
    pub values: Vec<f64>,
}

impl IndexSeries {
    pub fn last_year(&self) -> i32 {
        self.first_year + self.values.len() as i32 - 1
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first_year..=self.last_year()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series is non-empty")
    }
}

/// Cross-sectional shares for one year: `shares[k][j]` is indicator `k` of
/// the `j`-th participating country.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedYear {
    pub year: i32,
    /// Panel indices of the participating countries.
    pub countries: Vec<usize>,
    pub shares: Vec<Vec<f64>>,
}

/// EI per (country, year); `None` where the country-year was excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct EiTable {
    pub countries: Vec<String>,
    pub first_year: i32,
    values: Vec<Vec<Option<f64>>>,
}

impl EiTable {
    pub fn new(countries: Vec<String>, first_year: i32, values: Vec<Vec<Option<f64>>>) -> Self {
        Self {
            countries,
            first_year,
            values,
        }
    }

    pub fn get(&self, c: usize, year: i32) -> Option<f64> {
        let t = year - self.first_year;
        if t < 0 {
            return None;
        }
        self.values[c].get(t as usize).copied().flatten()
    }

    pub fn n_years(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Shares of every indicator across the given countries in `year`.
pub fn normalize_subset(panel: &IndicatorPanel, year: i32, countries: &[usize]) -> Result<NormalizedYear> {
    if countries.len() < 2 {
        return Err(Error::short(format!(
            "normalization in {year} needs at least 2 countries, got {}",
            countries.len()
        )));
    }
    let mut shares = Vec::with_capacity(panel.indicators().len());
    for (k, ind) in panel.indicators().iter().enumerate() {
        let mut row = Vec::with_capacity(countries.len());
        for &c in countries {
            let v = panel.get(c, k, year).ok_or_else(|| Error::MissingValue {
                country: panel.countries()[c].clone(),
                indicator: ind.code.clone(),
                year,
            })?;
            if !(v > 0.0) {
                return Err(Error::NonPositive {
                    country: panel.countries()[c].clone(),
                    indicator: ind.code.clone(),
                    year,
                    value: v,
                });
            }
            row.push(v);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
        shares.push(row);
    }
    Ok(NormalizedYear {
        year,
        countries: countries.to_vec(),
        shares,
    })
}

/// Shares across all panel countries; every value that year must be present.
pub fn normalize(panel: &IndicatorPanel, year: i32) -> Result<NormalizedYear> {
    if !panel.years().contains(&year) {
        return Err(Error::WindowOutOfRange {
            start: year,
            end: year,
            first: panel.first_year(),
            last: panel.last_year(),
        });
    }
    let all: Vec<usize> = (0..panel.countries().len()).collect();
    normalize_subset(panel, year, &all)
}

/// Arithmetic mean of the selected shares per participating country.
pub fn environmental_index(
    normalized: &NormalizedYear,
    kinds: &[IndicatorKind],
    policy: GdpPolicy,
) -> Result<Vec<f64>> {
    if kinds.len() != normalized.shares.len() {
        return Err(Error::Mismatch(format!(
            "{} indicator kinds for {} share rows",
            kinds.len(),
            normalized.shares.len()
        )));
    }
    let rows: Vec<&Vec<f64>> = normalized
        .shares
        .iter()
        .zip(kinds)
        .filter(|(_, kind)| policy == GdpPolicy::IncludeAllDivideByK || **kind != IndicatorKind::Gdp)
        .map(|(row, _)| row)
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid("no indicators left to average"));
    }
    let n = rows.len() as f64;
    Ok((0..normalized.countries.len())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect())
}

/// Countries' EI for every year, excluding incomplete country-years.
#[derive(Clone, Debug)]
pub struct EiBuild {
    pub table: EiTable,
    /// `(country, year)` pairs left out because some indicator was missing.
    pub excluded: Vec<(String, i32)>,
}

pub fn build_ei(panel: &IndicatorPanel, policy: GdpPolicy) -> Result<EiBuild> {
    panel.gdp_index()?;
    let kinds: Vec<IndicatorKind> = panel.indicators().iter().map(|i| i.kind).collect();
    let n_c = panel.countries().len();
    let mut values = vec![vec![None; panel.n_years()]; n_c];
    let mut excluded = Vec::new();
    for (t, year) in panel.years().enumerate() {
        let complete: Vec<usize> = (0..n_c)
            .filter(|&c| (0..kinds.len()).all(|k| panel.get(c, k, year).is_some()))
            .collect();
        for c in (0..n_c).filter(|c| !complete.contains(c)) {
            excluded.push((panel.countries()[c].clone(), year));
        }
        let norm = normalize_subset(panel, year, &complete)?;
        let ei = environmental_index(&norm, &kinds, policy)?;
        for (j, &c) in complete.iter().enumerate() {
            values[c][t] = Some(ei[j]);
        }
    }
    Ok(EiBuild {
        table: EiTable::new(panel.countries().to_vec(), panel.first_year(), values),
        excluded,
    })
}

/// DEI = GDP per capita × EI for every country whose EI is complete over the
/// table's years. Countries with excluded years are skipped.
pub fn dollarize(ei: &EiTable, panel: &IndicatorPanel) -> Result<Vec<IndexSeries>> {
    let gdp = panel.gdp_index()?;
    let mut out = Vec::new();
    for (c, country) in ei.countries.iter().enumerate() {
        let pc = panel
            .country_index(country)
            .ok_or_else(|| Error::Mismatch(format!("country `{country}` not in panel")))?;
        let years = ei.first_year..ei.first_year + ei.n_years() as i32;
        let mut values = Vec::with_capacity(ei.n_years());
        let mut complete = true;
        for year in years {
            let Some(e) = ei.get(c, year) else {
                complete = false;
                continue;
            };
            let g = if panel.years().contains(&year) {
                panel.get(pc, gdp, year)
            } else {
                None
            };
            let g = g.ok_or_else(|| Error::MissingValue {
                country: country.clone(),
                indicator: panel.indicators()[gdp].code.clone(),
                year,
            })?;
            values.push(g * e);
        }
        if complete {
            out.push(IndexSeries {
                country: country.clone(),
                first_year: ei.first_year,
                values,
            });
        }
    }
    Ok(out)
}

/// GDEI: equal-weight mean of the country DEIs per year.
pub fn global_index(deis: &[IndexSeries]) -> Result<IndexSeries> {
    let first = deis
        .first()
        .ok_or_else(|| Error::short("global index needs at least one series"))?;
    for s in deis {
        if s.first_year != first.first_year || s.values.len() != first.values.len() {
            return Err(Error::Mismatch(format!(
                "series `{}` spans {}..={} but `{}` spans {}..={}",
                s.country,
                s.first_year,
                s.last_year(),
                first.country,
                first.first_year,
                first.last_year()
            )));
        }
    }
    let n = deis.len() as f64;
    let values = (0..first.values.len())
        .map(|t| deis.iter().map(|s| s.values[t]).sum::<f64>() / n)
        .collect();
    Ok(IndexSeries {
        country: GLOBAL.to_string(),
        first_year: first.first_year,
        values,
    })
}

/// Everything index construction produces.
#[derive(Clone, Debug)]
pub struct IndexBuild {
    pub ei: EiTable,
    pub deis: Vec<IndexSeries>,
    pub global: IndexSeries,
    pub excluded: Vec<(String, i32)>,
    /// Countries dropped from the DEI set because some year was excluded.
    pub dropped: Vec<String>,
}

pub fn build_index(panel: &IndicatorPanel, policy: GdpPolicy) -> Result<IndexBuild> {
    let EiBuild { table, excluded } = build_ei(panel, policy)?;
    let deis = dollarize(&table, panel)?;
    let dropped = table
        .countries
        .iter()
        .filter(|c| !deis.iter().any(|s| &s.country == *c))
        .cloned()
        .collect();
    let global = global_index(&deis)?;
    Ok(IndexBuild {
        ei: table,
        deis,
        global,
        excluded,
        dropped,
    })
}
