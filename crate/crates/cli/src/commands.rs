//! The five subcommands. Each returns the artifact paths it wrote; the
//! binary exits zero only when every requested artifact landed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lendfair_core::design::{ColumnScale, DesignMatrix, SectorDataset};
use lendfair_core::gibbs::run_gibbs;
use lendfair_core::ingest::{self, FeatureTable, IngestReport, RowReject, SectorEncoding};
use lendfair_core::linear::{fit_ols, rmse, OlsFit};
use lendfair_core::seed::{derive_seed, rng_for};
use lendfair_core::synthetic::{write_csv_bundle, CsvBundleSpec, BUNDLE_FILES};
use lendfair_core::{
    build_constraint, group_gap, run_fair_gibbs_with, run_sector_study, split_dataset, Sector,
    SectorStudy, StudyConfig,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PenaltyKind, RunConfig, SNAPSHOT_FILE};

/// Dataset artifact produced by `ingest` and consumed by the model commands.
pub const FEATURES_FILE: &str = "features.csv";

fn prepare_output_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn write_snapshot(config: &RunConfig, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(SNAPSHOT_FILE);
    std::fs::write(&path, config.snapshot_toml()?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Shortest representation that parses back to the same bits.
fn cell(v: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v}");
    s
}

fn load_features(config: &RunConfig) -> Result<FeatureTable> {
    let path = config.output_dir.join(FEATURES_FILE);
    if !path.exists() {
        bail!(
            "no dataset artifact at {}; run the ingest command first",
            path.display()
        );
    }
    let file = std::fs::File::open(&path)?;
    Ok(FeatureTable::read_csv(file)?)
}

#[derive(Serialize)]
struct IngestArtifact<'a> {
    #[serde(flatten)]
    report: &'a IngestReport,
    rejects: &'a [RowReject],
}

/// Parse the five inputs, derive per-loan features, and write the dataset
/// artifact plus a report of what was kept, rejected, and dropped.
pub fn cmd_ingest(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let inputs = config.input_paths()?;
    let loaded = ingest::load_loans(&inputs.loans)?;
    let tables = ingest::load_tables(
        &inputs.indicators,
        &inputs.distances,
        &inputs.migrants,
        &inputs.colonization,
    )?;
    let (features, report) = loaded.ingest(&tables, config.seed)?;

    let dir = prepare_output_dir(config)?;
    let snapshot = write_snapshot(config, &dir)?;
    let features_path = dir.join(FEATURES_FILE);
    let file = std::fs::File::create(&features_path)
        .with_context(|| format!("writing {}", features_path.display()))?;
    features.write_csv(file)?;
    let report_path = dir.join("ingest_report.json");
    write_json(&report_path, &IngestArtifact { report: &report, rejects: &loaded.rejects })?;

    println!(
        "ingested {} loans ({} rejected, {} dropped on joins) from {} countries",
        report.loans_kept,
        report.rows_rejected,
        report.dropped_by_table.values().sum::<usize>(),
        report.borrower_countries,
    );
    Ok(vec![snapshot, features_path, report_path])
}

/// Which design the `ols` command fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OlsModel {
    /// Covariates only, no sector columns.
    M1,
    /// Covariates plus one dummy per non-reference sector.
    M2,
    /// Covariates plus a single sector indicator.
    Binary,
}

fn file_tag(sector: Sector) -> String {
    sector.name().to_ascii_lowercase().replace(' ', "_")
}

#[derive(Serialize)]
struct CoefficientTable {
    model: String,
    residual_variance: f64,
    coefficients: Vec<CoefficientRow>,
}

#[derive(Serialize)]
struct CoefficientRow {
    column: String,
    estimate: f64,
}

fn write_coefficient_table(dir: &Path, tag: &str, fit: &OlsFit) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("ols_{tag}.csv"));
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(["column", "estimate"])?;
    for (name, value) in fit.columns.iter().zip(fit.coefficients.iter()) {
        writer.write_record([name.as_str(), cell(*value).as_str()])?;
    }
    writer.flush()?;

    let json_path = dir.join(format!("ols_{tag}.json"));
    let table = CoefficientTable {
        model: tag.to_string(),
        residual_variance: fit.residual_variance,
        coefficients: fit
            .columns
            .iter()
            .zip(fit.coefficients.iter())
            .map(|(column, estimate)| CoefficientRow { column: column.clone(), estimate: *estimate })
            .collect(),
    };
    write_json(&json_path, &table)?;
    Ok(vec![csv_path, json_path])
}

/// Fit ordinary least squares on the ingested dataset and write the
/// coefficient table(s).
pub fn cmd_ols(config: &RunConfig, model: OlsModel, sector: Option<&str>) -> Result<Vec<PathBuf>> {
    let features = load_features(config)?;
    let y = features.outcomes();
    let mut designs: Vec<(String, SectorEncoding)> = Vec::new();
    match model {
        OlsModel::M1 => designs.push(("m1".into(), SectorEncoding::None)),
        OlsModel::M2 => designs.push(("m2".into(), SectorEncoding::FullDummy)),
        OlsModel::Binary => {
            let picked = match sector {
                Some(name) => vec![Sector::parse(name)
                    .ok_or_else(|| anyhow!("unknown sector '{name}'"))?],
                None => config.selected_sectors()?,
            };
            for s in picked {
                designs.push((format!("binary_{}", file_tag(s)), SectorEncoding::Binary(s)));
            }
        }
    }

    let dir = prepare_output_dir(config)?;
    let mut artifacts = vec![write_snapshot(config, &dir)?];
    for (tag, encoding) in designs {
        let design = features.design(encoding)?;
        let fit = fit_ols(&design, &y)?;
        println!("{tag}: {} coefficients, residual variance {:.4}", fit.columns.len(), fit.residual_variance);
        artifacts.extend(write_coefficient_table(&dir, &tag, &fit)?);
    }
    Ok(artifacts)
}

#[derive(Serialize)]
struct AteArtifact {
    studies: Vec<SectorStudy>,
    /// Sectors whose study failed, with the failure message; the rest of the
    /// table is still written.
    errors: std::collections::BTreeMap<String, String>,
}

const ATE_HEADER: [&str; 16] = [
    "sector",
    "n_treated",
    "n_control",
    "naive_estimate",
    "naive_se",
    "baseline_estimate",
    "baseline_se",
    "dre_estimate",
    "dre_se",
    "dre_ci_low",
    "dre_ci_high",
    "rmse_ssr",
    "rmse_lr",
    "propensity_f1",
    "propensity_accuracy",
    "flagged",
];

/// Run the per-sector causal studies and write the summary table. Failures
/// are isolated per sector.
pub fn cmd_ate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let features = load_features(config)?;
    let data = features.study_data()?;
    let study_config = StudyConfig {
        train_fraction: config.train_fraction,
        hyper: config.hyper.to_hyper(config.seed),
        ate_on_test_rows: false,
    };
    let sectors = config.selected_sectors()?;
    let results: Vec<(Sector, lendfair_core::Result<SectorStudy>)> = sectors
        .par_iter()
        .map(|s| (*s, run_sector_study(&data, *s, &study_config)))
        .collect();

    let mut studies = Vec::new();
    let mut errors = std::collections::BTreeMap::new();
    for (sector, result) in results {
        match result {
            Ok(study) => studies.push(study),
            Err(e) => {
                errors.insert(sector.name().to_string(), e.to_string());
            }
        }
    }

    let dir = prepare_output_dir(config)?;
    let snapshot = write_snapshot(config, &dir)?;
    let csv_path = dir.join("ate_by_sector.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(ATE_HEADER)?;
    for s in &studies {
        writer.write_record([
            s.sector.name().to_string(),
            s.n_treated.to_string(),
            s.n_control.to_string(),
            cell(s.naive.estimate),
            cell(s.naive.std_error),
            cell(s.baseline.estimate),
            cell(s.baseline.std_error),
            cell(s.dre.estimate),
            cell(s.dre.std_error),
            cell(s.dre.ci_low),
            cell(s.dre.ci_high),
            cell(s.rmse_ssr),
            cell(s.rmse_lr),
            cell(s.propensity_f1),
            cell(s.propensity_accuracy),
            s.flagged.to_string(),
        ])?;
    }
    writer.flush()?;
    let report_path = dir.join("ate_report.json");
    write_json(&report_path, &AteArtifact { studies, errors: errors.clone() })?;

    for (sector, message) in &errors {
        eprintln!("{sector}: study failed: {message}");
    }
    println!(
        "ate: {} sectors reported, {} failed",
        sectors.len() - errors.len(),
        errors.len()
    );
    Ok(vec![snapshot, csv_path, report_path])
}

/// One sector's fairness comparison: held-out RMSE for each model family and
/// the group mean-prediction gap with and without the penalty.
#[derive(Debug, Clone, Serialize)]
pub struct FairSectorReport {
    pub sector: Sector,
    pub n_train: usize,
    pub n_test: usize,
    pub lambda: f64,
    pub penalty: PenaltyKind,
    pub rmse_lr: f64,
    pub rmse_lr_loan_attrs: f64,
    pub rmse_ssr: f64,
    pub rmse_ssr_fair: f64,
    pub gap_unpenalized: f64,
    pub gap_penalized: f64,
}

/// Loan-level attributes, as opposed to columns joined in from country data.
const LOAN_ATTR_COLUMNS: [&str; 5] =
    ["intercept", "currency_policy", "language", "borrower_gender", "loan_amount"];

fn select_named_columns(design: &DesignMatrix, keep: &[String]) -> Result<DesignMatrix> {
    let names = design.names();
    let indices: Vec<usize> = keep
        .iter()
        .map(|k| {
            names
                .iter()
                .position(|n| n == k)
                .ok_or_else(|| anyhow!("column '{k}' not in the design"))
        })
        .collect::<Result<_>>()?;
    let raw = design.raw().select_columns(indices.iter());
    let scales: Vec<ColumnScale> = indices.iter().map(|&j| design.scales()[j]).collect();
    Ok(DesignMatrix::with_scales(raw, keep.to_vec(), scales)?)
}

fn posterior_mean_rmse_and_gap(
    coefficients: &DVector<f64>,
    columns: &[String],
    test: &SectorDataset,
) -> Result<(f64, f64)> {
    let pred = lendfair_core::linear::linear_predictor(coefficients, columns, &test.x)?;
    let e = rmse(test.y.as_slice(), pred.as_slice())?;
    let gap = group_gap(&test.x, &test.w, coefficients)?.abs();
    Ok((e, gap))
}

fn fair_sector_report(
    features: &FeatureTable,
    sector: Sector,
    config: &RunConfig,
) -> Result<FairSectorReport> {
    let design = features.design(SectorEncoding::Binary(sector))?;
    let w: Vec<u8> = features.rows.iter().map(|r| u8::from(r.sector == sector)).collect();
    let dataset = SectorDataset::new(design, features.outcomes(), w)?;
    let mut rng = rng_for(config.seed, "fair-split", sector.name().as_bytes());
    let (train, test) = split_dataset(&dataset, config.train_fraction, &mut rng)?;

    let lr = fit_ols(&train.x, &train.y)?;
    let rmse_lr = rmse(test.y.as_slice(), lr.predict(&test.x)?.as_slice())?;

    let attr_names: Vec<String> = LOAN_ATTR_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once(format!("sector:{}", sector.name())))
        .collect();
    let attr_train = select_named_columns(&train.x, &attr_names)?;
    let attr_test = select_named_columns(&test.x, &attr_names)?;
    let lr_attrs = fit_ols(&attr_train, &train.y)?;
    let rmse_lr_loan_attrs = rmse(test.y.as_slice(), lr_attrs.predict(&attr_test)?.as_slice())?;

    // Same chain seed for both samplers, so lambda = 0 reproduces the plain
    // run bit for bit.
    let hyper = {
        let mut h = config.hyper.to_hyper(config.seed);
        h.seed = derive_seed(config.seed, "fair-chain", sector.name().as_bytes());
        h
    };
    let plain = run_gibbs(&train.x, &train.y, &hyper)?;
    let (rmse_ssr, gap_unpenalized) = posterior_mean_rmse_and_gap(
        &plain.posterior_mean_coefficients()?,
        &plain.columns,
        &test,
    )?;

    let constraint = build_constraint(&train.x, &train.w, config.fair.lambda)?;
    let fair = run_fair_gibbs_with(
        &train.x,
        &train.y,
        &constraint,
        &hyper,
        config.fair.penalty.variant(),
    )?;
    let (rmse_ssr_fair, gap_penalized) = posterior_mean_rmse_and_gap(
        &fair.posterior_mean_coefficients()?,
        &fair.columns,
        &test,
    )?;

    Ok(FairSectorReport {
        sector,
        n_train: train.n(),
        n_test: test.n(),
        lambda: config.fair.lambda,
        penalty: config.fair.penalty,
        rmse_lr,
        rmse_lr_loan_attrs,
        rmse_ssr,
        rmse_ssr_fair,
        gap_unpenalized,
        gap_penalized,
    })
}

#[derive(Serialize)]
struct FairArtifact {
    reports: Vec<FairSectorReport>,
    errors: std::collections::BTreeMap<String, String>,
}

const FAIR_HEADER: [&str; 10] = [
    "sector",
    "n_train",
    "n_test",
    "lambda",
    "rmse_lr",
    "rmse_lr_loan_attrs",
    "rmse_ssr",
    "rmse_ssr_fair",
    "gap_unpenalized",
    "gap_penalized",
];

/// Compare the plain and fairness-penalized samplers per sector.
pub fn cmd_fair(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let features = load_features(config)?;
    let sectors = config.selected_sectors()?;
    let results: Vec<(Sector, Result<FairSectorReport>)> = sectors
        .par_iter()
        .map(|s| (*s, fair_sector_report(&features, *s, config)))
        .collect();

    let mut reports = Vec::new();
    let mut errors = std::collections::BTreeMap::new();
    for (sector, result) in results {
        match result {
            Ok(report) => reports.push(report),
            Err(e) => {
                errors.insert(sector.name().to_string(), e.to_string());
            }
        }
    }

    let dir = prepare_output_dir(config)?;
    let snapshot = write_snapshot(config, &dir)?;
    let csv_path = dir.join("fair_by_sector.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(FAIR_HEADER)?;
    for r in &reports {
        writer.write_record([
            r.sector.name().to_string(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            cell(r.lambda),
            cell(r.rmse_lr),
            cell(r.rmse_lr_loan_attrs),
            cell(r.rmse_ssr),
            cell(r.rmse_ssr_fair),
            cell(r.gap_unpenalized),
            cell(r.gap_penalized),
        ])?;
    }
    writer.flush()?;
    let report_path = dir.join("fair_report.json");
    write_json(&report_path, &FairArtifact { reports, errors: errors.clone() })?;

    for (sector, message) in &errors {
        eprintln!("{sector}: fairness run failed: {message}");
    }
    println!(
        "fair: {} sectors reported, {} failed (lambda {})",
        sectors.len() - errors.len(),
        errors.len(),
        config.fair.lambda
    );
    Ok(vec![snapshot, csv_path, report_path])
}

/// Parameters for the synthetic bundle generator.
#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub loans: usize,
    pub countries: usize,
    pub lenders: usize,
    pub sector_effect: f64,
}

/// Write a five-file synthetic CSV bundle into the output directory.
pub fn cmd_synth(config: &RunConfig, params: &SynthParams) -> Result<Vec<PathBuf>> {
    let spec = CsvBundleSpec {
        loans: params.loans,
        borrower_countries: params.countries,
        lender_countries: params.lenders,
        sector_effect: params.sector_effect,
        seed: config.seed,
    };
    let dir = prepare_output_dir(config)?;
    let snapshot = write_snapshot(config, &dir)?;
    write_csv_bundle(&dir, &spec)?;
    println!("synth: wrote a {}-loan bundle to {}", params.loans, dir.display());
    let mut artifacts = vec![snapshot];
    artifacts.extend(BUNDLE_FILES.iter().map(|f| dir.join(f)));
    Ok(artifacts)
}
