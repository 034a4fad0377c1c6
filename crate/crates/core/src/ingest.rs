//! CSV ingestion: loans plus four country lookup tables, merged into
//! per-loan features and model-ready matrices.
//!
//! Loan rows that fail to parse are collected as structured rejects rather
//! than aborting the load; loans whose countries are absent from the lookup
//! tables are dropped and counted in the ingestion report. Reference tables
//! themselves must parse cleanly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Utc};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::StudyData;
use crate::design::{split_dataset, ColumnKind, DesignMatrix, SectorDataset};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::stats;
use crate::types::{CountryIndicators, LoanRecord, PairFeatures, Sector};

const LOANS_HEADER: [&str; 10] = [
    "loan_id",
    "sector",
    "currency_policy",
    "language",
    "loan_amount",
    "borrower_gender",
    "posted_at",
    "funded_at",
    "borrower_country",
    "lender_countries",
];
const INDICATORS_HEADER: [&str; 9] = [
    "country",
    "ease_of_business",
    "loan_access",
    "women_ratio",
    "affordability",
    "vc_finance",
    "capacity_innovation",
    "internet_penetration",
    "gdp",
];
const DISTANCES_HEADER: [&str; 3] = ["country_a", "country_b", "km"];
const MIGRANTS_HEADER: [&str; 3] = ["origin", "host", "count"];
const COLONIZATION_HEADER: [&str; 3] = ["colonized", "colonizer", "flag"];

/// One loan row that could not be parsed; `row` is 1-based over data rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReject {
    pub row: usize,
    pub field: String,
    pub detail: String,
}

/// Parsed loans plus the rows that had to be rejected.
#[derive(Debug, Clone)]
pub struct LoadedLoans {
    pub records: Vec<LoanRecord>,
    pub rejects: Vec<RowReject>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    Ok(csv::ReaderBuilder::new().flexible(true).from_path(path)?)
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = reader.headers()?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::SchemaMismatch {
            path: path.to_path_buf(),
            detail: format!("expected columns {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, name: &str) -> std::result::Result<&'a str, RowReject> {
    let value = record.get(idx).unwrap_or("").trim();
    if value.is_empty() {
        return Err(RowReject { row: 0, field: name.to_string(), detail: "missing value".into() });
    }
    Ok(value)
}

fn parse_binary(record: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<u8, RowReject> {
    let raw = field(record, idx, name)?;
    match raw {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(RowReject {
            row: 0,
            field: name.to_string(),
            detail: format!("expected 0 or 1, found '{other}'"),
        }),
    }
}

fn parse_timestamp(record: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<DateTime<Utc>, RowReject> {
    let raw = field(record, idx, name)?;
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| RowReject { row: 0, field: name.to_string(), detail: e.to_string() })
}

fn parse_loan_row(record: &csv::StringRecord) -> std::result::Result<LoanRecord, RowReject> {
    if record.len() != LOANS_HEADER.len() {
        return Err(RowReject {
            row: 0,
            field: "row".into(),
            detail: format!("expected {} fields, found {}", LOANS_HEADER.len(), record.len()),
        });
    }
    let loan_id = field(record, 0, "loan_id")?.to_string();
    let sector_raw = field(record, 1, "sector")?;
    let sector = Sector::parse(sector_raw).ok_or_else(|| RowReject {
        row: 0,
        field: "sector".into(),
        detail: format!("unknown sector '{sector_raw}'"),
    })?;
    let currency_policy = parse_binary(record, 2, "currency_policy")?;
    let language = field(record, 3, "language")?.to_string();
    let amount_raw = field(record, 4, "loan_amount")?;
    let loan_amount: f64 = amount_raw.parse().map_err(|_| RowReject {
        row: 0,
        field: "loan_amount".into(),
        detail: format!("not a number: '{amount_raw}'"),
    })?;
    let borrower_gender = parse_binary(record, 5, "borrower_gender")?;
    let posted_at = parse_timestamp(record, 6, "posted_at")?;
    let funded_at = parse_timestamp(record, 7, "funded_at")?;
    if funded_at < posted_at {
        return Err(RowReject {
            row: 0,
            field: "funded_at".into(),
            detail: "funded_at precedes posted_at".into(),
        });
    }
    let borrower_country = field(record, 8, "borrower_country")?.to_string();
    let lenders_raw = field(record, 9, "lender_countries")?;
    let lender_countries: Vec<String> = lenders_raw
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    LoanRecord::new(
        loan_id,
        sector,
        currency_policy,
        language,
        loan_amount,
        borrower_gender,
        posted_at,
        funded_at,
        borrower_country,
        lender_countries,
    )
    .map_err(|e| RowReject { row: 0, field: "row".into(), detail: e.to_string() })
}

/// Load loans.csv. Unparseable rows become rejects instead of failing the
/// whole load; a missing file or a wrong header is a hard error.
pub fn load_loans(path: &Path) -> Result<LoadedLoans> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &LOANS_HEADER)?;
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        match row {
            Ok(record) => match parse_loan_row(&record) {
                Ok(loan) => records.push(loan),
                Err(mut reject) => {
                    reject.row = row_no;
                    rejects.push(reject);
                }
            },
            Err(e) => rejects.push(RowReject {
                row: row_no,
                field: "row".into(),
                detail: e.to_string(),
            }),
        }
    }
    Ok(LoadedLoans { records, rejects })
}

/// Country lookup tables. Distance lookups are symmetric.
#[derive(Debug, Clone, Default)]
pub struct RawTables {
    pub indicators: BTreeMap<String, CountryIndicators>,
    distances: BTreeMap<(String, String), f64>,
    pub migrants: BTreeMap<(String, String), f64>,
    pub colonization: BTreeMap<(String, String), bool>,
}

fn unordered_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl RawTables {
    /// Great-circle distance between two countries, in km, whichever order
    /// they are given in.
    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        self.distances.get(&unordered_key(a, b)).copied()
    }

    pub fn insert_distance(&mut self, a: &str, b: &str, km: f64) {
        self.distances.insert(unordered_key(a, b), km);
    }

    /// Migrant stock originating in `origin` and living in `host`; absent
    /// pairs count as zero.
    pub fn migrants_between(&self, origin: &str, host: &str) -> f64 {
        self.migrants.get(&(origin.to_string(), host.to_string())).copied().unwrap_or(0.0)
    }

    /// Whether `colonizer` once colonized `colonized`; absent pairs are
    /// treated as no relation.
    pub fn was_colonized_by(&self, colonized: &str, colonizer: &str) -> bool {
        self.colonization
            .get(&(colonized.to_string(), colonizer.to_string()))
            .copied()
            .unwrap_or(false)
    }
}

fn parse_table_field<T: std::str::FromStr>(raw: &str, row: usize, name: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::RowParseError {
        row,
        field: name.to_string(),
        detail: format!("cannot parse '{raw}'"),
    })
}

pub fn load_indicators(path: &Path) -> Result<BTreeMap<String, CountryIndicators>> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &INDICATORS_HEADER)?;
    let mut map = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = row?;
        let country: String = parse_table_field(record.get(0).unwrap_or(""), row_no, "country")?;
        let numbers: Vec<f64> = (1..9)
            .map(|j| parse_table_field(record.get(j).unwrap_or(""), row_no, INDICATORS_HEADER[j]))
            .collect::<Result<_>>()?;
        let entry = CountryIndicators {
            country: country.clone(),
            ease_of_business: numbers[0],
            loan_access: numbers[1],
            women_ratio: numbers[2],
            affordability: numbers[3],
            vc_finance: numbers[4],
            capacity_innovation: numbers[5],
            internet_penetration: numbers[6],
            gdp: numbers[7],
        };
        entry.validate()?;
        if map.insert(country.clone(), entry).is_some() {
            return Err(Error::RowParseError {
                row: row_no,
                field: "country".into(),
                detail: format!("duplicate entry for '{country}'"),
            });
        }
    }
    Ok(map)
}

fn load_pair_table(
    path: &Path,
    header: &[&str],
    symmetric: bool,
) -> Result<BTreeMap<(String, String), f64>> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, header)?;
    let mut map = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = row?;
        let a = record.get(0).unwrap_or("").trim().to_string();
        let b = record.get(1).unwrap_or("").trim().to_string();
        if a.is_empty() || b.is_empty() {
            return Err(Error::RowParseError {
                row: row_no,
                field: header[if a.is_empty() { 0 } else { 1 }].to_string(),
                detail: "missing country".into(),
            });
        }
        let value: f64 = parse_table_field(record.get(2).unwrap_or(""), row_no, header[2])?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::RowParseError {
                row: row_no,
                field: header[2].to_string(),
                detail: format!("{value} must be a finite non-negative number"),
            });
        }
        let key = if symmetric { unordered_key(&a, &b) } else { (a, b) };
        if let Some(old) = map.insert(key.clone(), value) {
            if old != value {
                return Err(Error::RowParseError {
                    row: row_no,
                    field: header[2].to_string(),
                    detail: format!("conflicting values {old} and {value} for {key:?}"),
                });
            }
        }
    }
    Ok(map)
}

pub fn load_distances(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    load_pair_table(path, &DISTANCES_HEADER, true)
}

pub fn load_migrants(path: &Path) -> Result<BTreeMap<(String, String), f64>> {
    load_pair_table(path, &MIGRANTS_HEADER, false)
}

pub fn load_colonization(path: &Path) -> Result<BTreeMap<(String, String), bool>> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &COLONIZATION_HEADER)?;
    let mut map = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = row?;
        let a = record.get(0).unwrap_or("").trim().to_string();
        let b = record.get(1).unwrap_or("").trim().to_string();
        let flag: u8 = parse_table_field(record.get(2).unwrap_or(""), row_no, "flag")?;
        if flag > 1 {
            return Err(Error::RowParseError {
                row: row_no,
                field: "flag".into(),
                detail: format!("expected 0 or 1, found {flag}"),
            });
        }
        map.insert((a, b), flag == 1);
    }
    Ok(map)
}

/// Load the four lookup tables from their individual paths.
pub fn load_tables(
    indicators: &Path,
    distances: &Path,
    migrants: &Path,
    colonization: &Path,
) -> Result<RawTables> {
    Ok(RawTables {
        indicators: load_indicators(indicators)?,
        distances: load_distances(distances)?,
        migrants: load_migrants(migrants)?,
        colonization: load_colonization(colonization)?,
    })
}

/// Load a directory that uses the standard five file names.
pub fn load_bundle(dir: &Path) -> Result<(LoadedLoans, RawTables)> {
    let loans = load_loans(&dir.join("loans.csv"))?;
    let tables = load_tables(
        &dir.join("indicators.csv"),
        &dir.join("distances.csv"),
        &dir.join("migrants.csv"),
        &dir.join("colonization.csv"),
    )?;
    Ok((loans, tables))
}

/// Average the pairwise features over every (borrower, lender) pair of one
/// loan. Pairs missing a distance or lender indicators are skipped; at least
/// one resolvable pair is required. The colonization flag comes from one
/// uniformly chosen lender, seeded by the loan id so the result does not
/// depend on row order or worker scheduling.
pub fn derive_pair_features(loan: &LoanRecord, tables: &RawTables, seed: u64) -> Result<PairFeatures> {
    let borrower = tables
        .indicators
        .get(&loan.borrower_country)
        .ok_or_else(|| Error::MissingCountryData {
            country: loan.borrower_country.clone(),
            table: "indicators",
        })?;
    let mut distances = Vec::new();
    let mut migrants = Vec::new();
    let mut gdp_differences = Vec::new();
    let mut first_gap: Option<Error> = None;
    for lender in &loan.lender_countries {
        let lender_indicators = tables.indicators.get(lender);
        let distance = tables.distance(&loan.borrower_country, lender);
        match (lender_indicators, distance) {
            (Some(ind), Some(km)) => {
                distances.push(km);
                migrants.push(tables.migrants_between(&loan.borrower_country, lender));
                gdp_differences.push(ind.gdp - borrower.gdp);
            }
            (None, _) => {
                first_gap.get_or_insert(Error::MissingCountryData {
                    country: lender.clone(),
                    table: "indicators",
                });
            }
            (_, None) => {
                first_gap.get_or_insert(Error::MissingCountryData {
                    country: lender.clone(),
                    table: "distances",
                });
            }
        }
    }
    if distances.is_empty() {
        return Err(first_gap.expect("at least one lender country by construction"));
    }
    let mut rng = rng_for(seed, "colonization-pick", loan.loan_id.as_bytes());
    let pick = &loan.lender_countries[rng.random_range(0..loan.lender_countries.len())];
    let colonized = tables.was_colonized_by(&loan.borrower_country, pick);
    PairFeatures::new(
        stats::mean(&distances)?,
        stats::mean(&migrants)?,
        u8::from(colonized),
        stats::mean(&gdp_differences)?,
    )
}

/// Sector columns appended to the base design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectorEncoding {
    /// No sector information.
    None,
    /// One indicator column: loan belongs to the given sector.
    Binary(Sector),
    /// One indicator per sector except the reference category.
    FullDummy,
}

/// Fully derived, unstandardized features for one loan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub loan_id: String,
    pub sector: Sector,
    pub currency_policy: u8,
    /// 1 when the posting language is English; all others collapse to 0.
    pub language: u8,
    pub ease_of_business: f64,
    pub colonization: u8,
    pub borrower_gender: u8,
    pub loan_amount: f64,
    pub distance: f64,
    pub migrants: f64,
    pub gdp_difference: f64,
    pub loan_access: f64,
    pub women_ratio: f64,
    pub affordability: f64,
    pub vc_finance: f64,
    pub capacity_innovation: f64,
    pub internet_penetration: f64,
    /// Outcome: days from posting to full funding.
    pub funding_days: f64,
}

impl FeatureRow {
    fn numeric_base(&self) -> [f64; 15] {
        [
            f64::from(self.currency_policy),
            f64::from(self.language),
            self.ease_of_business,
            f64::from(self.colonization),
            f64::from(self.borrower_gender),
            self.loan_amount,
            self.distance,
            self.migrants,
            self.gdp_difference,
            self.loan_access,
            self.women_ratio,
            self.affordability,
            self.vc_finance,
            self.capacity_innovation,
            self.internet_penetration,
        ]
    }
}

const BASE_NAMES: [&str; 16] = [
    "intercept",
    "currency_policy",
    "language",
    "ease_of_business",
    "colonization",
    "borrower_gender",
    "loan_amount",
    "distance",
    "migrants",
    "gdp_difference",
    "loan_access",
    "women_ratio",
    "affordability",
    "vc_finance",
    "capacity_innovation",
    "internet_penetration",
];
const BASE_KINDS: [ColumnKind; 16] = [
    ColumnKind::Intercept,
    ColumnKind::Binary,
    ColumnKind::Binary,
    ColumnKind::Numeric,
    ColumnKind::Binary,
    ColumnKind::Binary,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
    ColumnKind::Numeric,
];

const FEATURES_HEADER: [&str; 18] = [
    "loan_id",
    "sector",
    "currency_policy",
    "language",
    "ease_of_business",
    "colonization",
    "borrower_gender",
    "loan_amount",
    "distance",
    "migrants",
    "gdp_difference",
    "loan_access",
    "women_ratio",
    "affordability",
    "vc_finance",
    "capacity_innovation",
    "internet_penetration",
    "funding_days",
];

/// Derived features for a set of loans, in load order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

/// Counts and summary statistics from one ingestion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Data rows seen in loans.csv, parseable or not.
    pub rows_read: usize,
    pub rows_rejected: usize,
    /// Loans dropped because a country was absent from a lookup table,
    /// keyed by table name.
    pub dropped_by_table: BTreeMap<String, usize>,
    pub loans_kept: usize,
    pub borrower_countries: usize,
    pub distinct_languages: usize,
    pub mean_loan_amount: f64,
    pub mean_funding_days: f64,
    pub sd_funding_days: f64,
}

/// Join loans against the lookup tables. Loans with unresolvable countries
/// are dropped and counted per table; any parse rejects are merged into the
/// report by [`LoadedLoans::ingest`].
pub fn derive_feature_table(
    records: &[LoanRecord],
    tables: &RawTables,
    seed: u64,
) -> Result<(FeatureTable, IngestReport)> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let derived: Vec<Result<FeatureRow>> = records
        .par_iter()
        .map(|loan| {
            let pair = derive_pair_features(loan, tables, seed)?;
            let borrower = &tables.indicators[&loan.borrower_country];
            Ok(FeatureRow {
                loan_id: loan.loan_id.clone(),
                sector: loan.sector,
                currency_policy: loan.currency_policy,
                language: u8::from(loan.language.eq_ignore_ascii_case("english")),
                ease_of_business: borrower.ease_of_business,
                colonization: pair.colonization,
                borrower_gender: loan.borrower_gender,
                loan_amount: loan.loan_amount,
                distance: pair.distance,
                migrants: pair.migrants,
                gdp_difference: pair.gdp_difference,
                loan_access: borrower.loan_access,
                women_ratio: borrower.women_ratio,
                affordability: borrower.affordability,
                vc_finance: borrower.vc_finance,
                capacity_innovation: borrower.capacity_innovation,
                internet_penetration: borrower.internet_penetration,
                funding_days: loan.funding_time().days(),
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(records.len());
    let mut dropped_by_table: BTreeMap<String, usize> = BTreeMap::new();
    let mut countries = BTreeSet::new();
    let mut languages = BTreeSet::new();
    for (loan, result) in records.iter().zip(derived) {
        match result {
            Ok(row) => {
                rows.push(row);
                countries.insert(loan.borrower_country.clone());
                languages.insert(loan.language.to_ascii_lowercase());
            }
            Err(Error::MissingCountryData { table, .. }) => {
                *dropped_by_table.entry(table.to_string()).or_insert(0) += 1;
            }
            Err(other) => return Err(other),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let amounts: Vec<f64> = rows.iter().map(|r| r.loan_amount).collect();
    let days: Vec<f64> = rows.iter().map(|r| r.funding_days).collect();
    let report = IngestReport {
        rows_read: records.len(),
        rows_rejected: 0,
        dropped_by_table,
        loans_kept: rows.len(),
        borrower_countries: countries.len(),
        distinct_languages: languages.len(),
        mean_loan_amount: stats::mean(&amounts)?,
        mean_funding_days: stats::mean(&days)?,
        sd_funding_days: if days.len() > 1 { stats::sample_sd(&days)? } else { 0.0 },
    };
    Ok((FeatureTable { rows }, report))
}

impl LoadedLoans {
    /// Derive features and fold the parse rejects into the report counts.
    pub fn ingest(&self, tables: &RawTables, seed: u64) -> Result<(FeatureTable, IngestReport)> {
        let (table, mut report) = derive_feature_table(&self.records, tables, seed)?;
        report.rows_read = self.records.len() + self.rejects.len();
        report.rows_rejected = self.rejects.len();
        Ok((table, report))
    }
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Assemble the design matrix: intercept, the fixed covariate block, and
    /// the requested sector encoding. Numeric columns are standardized and
    /// the fitted scales are retained on the result.
    pub fn design(&self, encoding: SectorEncoding) -> Result<DesignMatrix> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut names: Vec<String> = BASE_NAMES.iter().map(|s| s.to_string()).collect();
        let mut kinds: Vec<ColumnKind> = BASE_KINDS.to_vec();
        let sector_columns: Vec<Sector> = match encoding {
            SectorEncoding::None => Vec::new(),
            SectorEncoding::Binary(s) => vec![s],
            SectorEncoding::FullDummy => {
                Sector::ALL.into_iter().filter(|s| *s != Sector::REFERENCE).collect()
            }
        };
        for s in &sector_columns {
            names.push(format!("sector:{}", s.name()));
            kinds.push(ColumnKind::Binary);
        }
        let p = names.len();
        let raw = DMatrix::from_fn(self.rows.len(), p, |i, j| {
            let row = &self.rows[i];
            if j == 0 {
                1.0
            } else if j < BASE_NAMES.len() {
                row.numeric_base()[j - 1]
            } else {
                f64::from(row.sector == sector_columns[j - BASE_NAMES.len()])
            }
        });
        DesignMatrix::from_raw(raw, names, &kinds)
    }

    /// Funding times, aligned with the design rows.
    pub fn outcomes(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.funding_days))
    }

    pub fn sectors(&self) -> Vec<Sector> {
        self.rows.iter().map(|r| r.sector).collect()
    }

    /// Covariates plus sector labels for per-sector causal studies. The
    /// design excludes sector columns; each study derives its own indicator.
    pub fn study_data(&self) -> Result<StudyData> {
        StudyData::new(self.design(SectorEncoding::None)?, self.outcomes(), self.sectors())
    }

    /// One sector's treated-vs-rest dataset over the sector-free design.
    pub fn sector_dataset(&self, sector: Sector) -> Result<SectorDataset> {
        let w = self.rows.iter().map(|r| u8::from(r.sector == sector)).collect();
        SectorDataset::new(self.design(SectorEncoding::None)?, self.outcomes(), w)
    }

    /// Write the derived features; floats print in shortest round-trip form
    /// so a read-back is bit-identical.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(FEATURES_HEADER)?;
        for row in &self.rows {
            let mut record: Vec<String> = vec![row.loan_id.clone(), row.sector.name().to_string()];
            for v in [
                f64::from(row.currency_policy),
                f64::from(row.language),
                row.ease_of_business,
                f64::from(row.colonization),
                f64::from(row.borrower_gender),
                row.loan_amount,
                row.distance,
                row.migrants,
                row.gdp_difference,
                row.loan_access,
                row.women_ratio,
                row.affordability,
                row.vc_finance,
                row.capacity_innovation,
                row.internet_penetration,
                row.funding_days,
            ] {
                let mut cell = String::new();
                let _ = write!(cell, "{v}");
                record.push(cell);
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<FeatureTable> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let headers: Vec<&str> = reader.headers()?.iter().collect();
        if headers != FEATURES_HEADER {
            return Err(Error::SchemaMismatch {
                path: "features.csv".into(),
                detail: format!("expected columns {FEATURES_HEADER:?}, found {headers:?}"),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row_no = i + 1;
            let record = record?;
            if record.len() != FEATURES_HEADER.len() {
                return Err(Error::RowParseError {
                    row: row_no,
                    field: "row".into(),
                    detail: format!("expected {} fields, found {}", FEATURES_HEADER.len(), record.len()),
                });
            }
            let cell = |idx: usize| record.get(idx).unwrap_or("").trim();
            let number = |idx: usize| -> Result<f64> {
                parse_table_field(cell(idx), row_no, FEATURES_HEADER[idx])
            };
            let flag = |idx: usize| -> Result<u8> {
                let v: u8 = parse_table_field(cell(idx), row_no, FEATURES_HEADER[idx])?;
                if v > 1 {
                    return Err(Error::RowParseError {
                        row: row_no,
                        field: FEATURES_HEADER[idx].to_string(),
                        detail: format!("expected 0 or 1, found {v}"),
                    });
                }
                Ok(v)
            };
            let sector = Sector::parse(cell(1)).ok_or_else(|| Error::RowParseError {
                row: row_no,
                field: "sector".into(),
                detail: format!("unknown sector '{}'", cell(1)),
            })?;
            rows.push(FeatureRow {
                loan_id: cell(0).to_string(),
                sector,
                currency_policy: flag(2)?,
                language: flag(3)?,
                ease_of_business: number(4)?,
                colonization: flag(5)?,
                borrower_gender: flag(6)?,
                loan_amount: number(7)?,
                distance: number(8)?,
                migrants: number(9)?,
                gdp_difference: number(10)?,
                loan_access: number(11)?,
                women_ratio: number(12)?,
                affordability: number(13)?,
                vc_finance: number(14)?,
                capacity_innovation: number(15)?,
                internet_penetration: number(16)?,
                funding_days: number(17)?,
            });
        }
        Ok(FeatureTable { rows })
    }
}

/// Assemble a design matrix straight from loan records: derive features,
/// drop unresolvable loans, standardize.
pub fn build_design_matrix(
    loans: &[LoanRecord],
    tables: &RawTables,
    encoding: SectorEncoding,
    seed: u64,
) -> Result<DesignMatrix> {
    let (table, _) = derive_feature_table(loans, tables, seed)?;
    table.design(encoding)
}

/// Seeded 70/30-style split; see [`split_dataset`] for the semantics.
pub fn train_test_split(
    d: &SectorDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(SectorDataset, SectorDataset)> {
    let mut rng = rng_for(seed, "train-test-split", b"");
    split_dataset(d, train_fraction, &mut rng)
}
