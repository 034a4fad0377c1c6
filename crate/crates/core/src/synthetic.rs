//! Seeded synthetic data: regression problems with known sparse truth,
//! causal datasets with controllable model misspecification, grouped data
//! with a confounded group gap, and CSV bundles in the ingestion schema.
//!
//! Generated design matrices carry a leading intercept column; coefficient
//! vectors in the specs refer to the feature columns that follow it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{ColumnKind, DesignMatrix, SectorDataset};
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::sigmoid;
use crate::types::Sector;

/// Which generating model hides a term from the fitted models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Misspecification {
    /// Both models see the full truth.
    None,
    /// The outcome carries a hidden quadratic term.
    Outcome,
    /// The treatment assignment carries a hidden quadratic term.
    Propensity,
    /// Both are contaminated; no estimator sees the truth.
    Both,
}

/// Strength of the hidden quadratic in the outcome.
pub const OUTCOME_QUAD: f64 = 2.0;
/// Strength of the hidden quadratic in the treatment logit. Strong enough
/// that double misspecification visibly biases the effect estimate, mild
/// enough that the influence-curve SE stays calibrated when the outcome
/// model alone carries the fit.
pub const PROPENSITY_QUAD: f64 = 0.6;

/// Parameters of the synthetic generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Number of feature columns (the intercept is added on top).
    pub p: usize,
    /// Feature coefficients of the outcome; length p.
    pub true_beta: Vec<f64>,
    /// Strictly increasing indices of the nonzero entries of `true_beta`.
    pub support: Vec<usize>,
    pub noise_sd: f64,
    /// Constant treatment effect added to treated outcomes.
    pub treatment_effect: f64,
    /// Feature coefficients of the treatment logit; length p.
    pub propensity_coefs: Vec<f64>,
    /// Constant term of the treatment logit.
    pub propensity_intercept: f64,
    pub misspecification: Misspecification,
    pub seed: u64,
}

impl SyntheticSpec {
    /// A pure-regression spec: no treatment machinery.
    pub fn regression(n: usize, true_beta: Vec<f64>, noise_sd: f64, seed: u64) -> SyntheticSpec {
        let p = true_beta.len();
        let support = (0..p).filter(|j| true_beta[*j] != 0.0).collect();
        SyntheticSpec {
            n,
            p,
            true_beta,
            support,
            noise_sd,
            treatment_effect: 0.0,
            propensity_coefs: vec![0.0; p],
            propensity_intercept: 0.0,
            misspecification: Misspecification::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!("n = {} must be >= 2", self.n)));
        }
        if self.p == 0 {
            return Err(Error::InvalidSpec("p must be >= 1".into()));
        }
        if self.true_beta.len() != self.p {
            return Err(Error::InvalidSpec(format!(
                "true_beta has length {}, expected p = {}",
                self.true_beta.len(),
                self.p
            )));
        }
        if self.propensity_coefs.len() != self.p {
            return Err(Error::InvalidSpec(format!(
                "propensity_coefs has length {}, expected p = {}",
                self.propensity_coefs.len(),
                self.p
            )));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(Error::InvalidSpec(format!("noise_sd = {} must be positive", self.noise_sd)));
        }
        for (name, v) in [
            ("treatment_effect", self.treatment_effect),
            ("propensity_intercept", self.propensity_intercept),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} is not finite")));
            }
        }
        let expected: Vec<usize> = (0..self.p).filter(|j| self.true_beta[*j] != 0.0).collect();
        if self.support != expected {
            return Err(Error::InvalidSpec(format!(
                "support {:?} must list exactly the nonzero coefficients {:?} in increasing order",
                self.support, expected
            )));
        }
        Ok(())
    }
}

/// Intercept plus p standard-normal feature columns, standardized so the
/// sample mean is exactly 0 and the sample sd exactly 1 per feature.
fn feature_matrix(n: usize, p: usize, master: u64, context: &str) -> Result<DesignMatrix> {
    let mut rng = seed::rng_for(master, context, b"x");
    let mut raw = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        raw[(i, 0)] = 1.0;
        for j in 0..p {
            raw[(i, j + 1)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut names = vec!["intercept".to_string()];
    names.extend((1..=p).map(|j| format!("x{j}")));
    let mut kinds = vec![ColumnKind::Intercept];
    kinds.extend(std::iter::repeat_n(ColumnKind::Numeric, p));
    DesignMatrix::from_raw(raw, names, &kinds)
}

/// Feature coefficients prefixed with a zero intercept coefficient.
fn with_intercept(coefs: &[f64]) -> DVector<f64> {
    let mut full = Vec::with_capacity(coefs.len() + 1);
    full.push(0.0);
    full.extend_from_slice(coefs);
    DVector::from_vec(full)
}

/// The hidden quadratic: the square of the first feature column, centered to
/// exact sample mean zero so it cannot leak through the intercept.
fn hidden_quadratic(x: &DesignMatrix) -> DVector<f64> {
    let n = x.n();
    let mut q = DVector::from_iterator(n, (0..n).map(|i| x.values()[(i, 1)].powi(2)));
    let m = q.sum() / n as f64;
    q.add_scalar_mut(-m);
    q
}

/// Draw a sparse linear regression problem with known truth.
pub fn generate_regression(spec: &SyntheticSpec) -> Result<(DesignMatrix, DVector<f64>)> {
    spec.validate()?;
    let x = feature_matrix(spec.n, spec.p, spec.seed, "synthetic-regression")?;
    let beta = with_intercept(&spec.true_beta);
    let mut rng = seed::rng_for(spec.seed, "synthetic-regression", b"noise");
    let noise = DVector::from_iterator(
        spec.n,
        (0..spec.n).map(|_| spec.noise_sd * rng.sample::<f64, _>(StandardNormal)),
    );
    let y = x.values() * beta + noise;
    Ok((x, y))
}

const TREATMENT_RETRIES: usize = 10;

/// Draw a causal dataset: covariates, a treatment assigned by a logistic
/// model, and an outcome with constant treatment effect
/// `spec.treatment_effect`. Depending on `spec.misspecification` a hidden
/// centered quadratic of the first feature contaminates the outcome
/// (`OUTCOME_QUAD`), the treatment logit (`PROPENSITY_QUAD`), or both.
pub fn generate_causal(spec: &SyntheticSpec) -> Result<SectorDataset> {
    spec.validate()?;
    let x = feature_matrix(spec.n, spec.p, spec.seed, "synthetic-causal")?;
    let q = hidden_quadratic(&x);
    let pc = with_intercept(&spec.propensity_coefs);
    let mut logit = x.values() * pc;
    logit.add_scalar_mut(spec.propensity_intercept);
    if matches!(spec.misspecification, Misspecification::Propensity | Misspecification::Both) {
        logit += &q * PROPENSITY_QUAD;
    }

    let mut w = Vec::new();
    let mut assigned = false;
    for attempt in 0..TREATMENT_RETRIES {
        let mut rng = seed::rng_for(spec.seed, "synthetic-causal-w", &(attempt as u64).to_le_bytes());
        w = (0..spec.n)
            .map(|i| u8::from(rng.random::<f64>() < sigmoid(logit[i])))
            .collect();
        let treated = w.iter().filter(|v| **v == 1).count();
        if treated > 0 && treated < spec.n {
            assigned = true;
            break;
        }
    }
    if !assigned {
        return Err(Error::DegenerateTreatment(TREATMENT_RETRIES));
    }

    let beta = with_intercept(&spec.true_beta);
    let mut y = x.values() * beta;
    for i in 0..spec.n {
        y[i] += spec.treatment_effect * f64::from(w[i]);
    }
    if matches!(spec.misspecification, Misspecification::Outcome | Misspecification::Both) {
        y += &q * OUTCOME_QUAD;
    }
    let mut rng = seed::rng_for(spec.seed, "synthetic-causal", b"noise");
    for i in 0..spec.n {
        y[i] += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
    }
    SectorDataset::new(x, y, w)
}

/// Parameters for a dataset whose group membership is confounded with some
/// of the features, producing a large group gap in fitted predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBiasSpec {
    pub n: usize,
    /// Features whose raw mean is shifted by `shift` for group 1.
    pub confounded: usize,
    /// Features independent of the group.
    pub clean: usize,
    pub shift: f64,
    /// Direct additive effect of group membership on the outcome.
    pub group_effect: f64,
    /// Outcome coefficient of each confounded feature (model scale).
    pub confound_effect: f64,
    pub noise_sd: f64,
    pub group_fraction: f64,
    pub seed: u64,
}

impl GroupBiasSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidSpec("n must be >= 4".into()));
        }
        if self.confounded + self.clean == 0 {
            return Err(Error::InvalidSpec("need at least one feature".into()));
        }
        if !(self.group_fraction > 0.0 && self.group_fraction < 1.0) {
            return Err(Error::InvalidSpec("group_fraction must lie in (0, 1)".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(Error::InvalidSpec("noise_sd must be positive".into()));
        }
        Ok(())
    }
}

/// Dataset with design `[intercept, group, confounded..., clean...]` where
/// the group column doubles as the treatment indicator. The outcome depends
/// on the group directly and on the confounded features, so a fitted model
/// shows a group gap larger than `group_effect` alone.
pub fn generate_group_bias(spec: &GroupBiasSpec) -> Result<SectorDataset> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, "synthetic-group-bias", b"");
    let p = 2 + spec.confounded + spec.clean;
    let w: Vec<u8> = (0..spec.n)
        .map(|_| u8::from(rng.random::<f64>() < spec.group_fraction))
        .collect();
    if !w.contains(&1) || !w.contains(&0) {
        return Err(Error::DegenerateTreatment(1));
    }
    let mut raw = DMatrix::zeros(spec.n, p);
    for i in 0..spec.n {
        raw[(i, 0)] = 1.0;
        raw[(i, 1)] = f64::from(w[i]);
        for j in 0..spec.confounded {
            raw[(i, 2 + j)] = spec.shift * f64::from(w[i]) + rng.sample::<f64, _>(StandardNormal);
        }
        for j in 0..spec.clean {
            raw[(i, 2 + spec.confounded + j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut names = vec!["intercept".to_string(), "group".to_string()];
    names.extend((0..spec.confounded).map(|j| format!("conf{j}")));
    names.extend((0..spec.clean).map(|j| format!("clean{j}")));
    let mut kinds = vec![ColumnKind::Intercept, ColumnKind::Binary];
    kinds.extend(std::iter::repeat_n(ColumnKind::Numeric, spec.confounded + spec.clean));
    let x = DesignMatrix::from_raw(raw, names, &kinds)?;

    // The outcome is linear in the standardized columns, so a linear model
    // can represent it exactly.
    let mut y = DVector::zeros(spec.n);
    for i in 0..spec.n {
        let mut v = spec.group_effect * f64::from(w[i]);
        for j in 0..spec.confounded {
            v += spec.confound_effect * x.values()[(i, 2 + j)];
        }
        v += spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
        y[i] = v;
    }
    SectorDataset::new(x, y, w)
}

/// Parameters of the CSV bundle generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvBundleSpec {
    pub loans: usize,
    pub borrower_countries: usize,
    pub lender_countries: usize,
    /// Additive funding-time shift (days) applied per sector index; 0 makes
    /// funding time independent of sector.
    pub sector_effect: f64,
    pub seed: u64,
}

impl Default for CsvBundleSpec {
    fn default() -> CsvBundleSpec {
        CsvBundleSpec {
            loans: 400,
            borrower_countries: 8,
            lender_countries: 6,
            sector_effect: 0.0,
            seed: 0,
        }
    }
}

impl CsvBundleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.loans == 0 || self.borrower_countries == 0 || self.lender_countries == 0 {
            return Err(Error::InvalidSpec("bundle sizes must be positive".into()));
        }
        if !self.sector_effect.is_finite() {
            return Err(Error::InvalidSpec("sector_effect is not finite".into()));
        }
        Ok(())
    }
}

/// File names written by `write_csv_bundle`.
pub const BUNDLE_FILES: [&str; 5] = [
    "loans.csv",
    "indicators.csv",
    "distances.csv",
    "migrants.csv",
    "colonization.csv",
];

/// Write a complete, ingestible CSV bundle into `dir`. Every referenced
/// country has indicator and distance rows; migrant and colonization rows
/// cover only some pairs, exercising the ingestion defaults.
pub fn write_csv_bundle(dir: &Path, spec: &CsvBundleSpec) -> Result<()> {
    spec.validate()?;
    std::fs::create_dir_all(dir)?;
    let borrowers: Vec<String> = (0..spec.borrower_countries).map(|i| format!("Borrowland-{i}")).collect();
    let lenders: Vec<String> = (0..spec.lender_countries).map(|i| format!("Lendland-{i}")).collect();
    let languages = ["English", "Spanish", "French", "Portuguese"];

    let mut rng = seed::rng_for(spec.seed, "csv-bundle", b"loans");
    let amount_dist = LogNormal::new(6.2, 0.8).expect("valid lognormal");
    let funding_dist = Exp::new(1.0 / 10.0).expect("valid exponential");
    let mut loans = csv::Writer::from_path(dir.join("loans.csv"))?;
    loans.write_record([
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
    ])?;
    for i in 0..spec.loans {
        let sector = Sector::ALL[rng.random_range(0..Sector::ALL.len())];
        let amount: f64 = amount_dist.sample(&mut rng);
        let amount = amount.clamp(25.0, 10_000.0).round();
        let posted_day = rng.random_range(0..360) as i64;
        let posted_sec = rng.random_range(0..86_400) as i64;
        let posted = chrono::DateTime::parse_from_rfc3339("2017-01-01T00:00:00Z")
            .expect("valid timestamp")
            .with_timezone(&chrono::Utc)
            + chrono::Duration::days(posted_day)
            + chrono::Duration::seconds(posted_sec);
        let days = funding_dist.sample(&mut rng) + spec.sector_effect * sector.index() as f64 + 0.05;
        let funded = posted + chrono::Duration::seconds((days * 86_400.0) as i64);
        let borrower = &borrowers[rng.random_range(0..borrowers.len())];
        let k = rng.random_range(1..=3.min(lenders.len()));
        let mut picks: Vec<&str> = Vec::with_capacity(k);
        while picks.len() < k {
            let c = lenders[rng.random_range(0..lenders.len())].as_str();
            if !picks.contains(&c) {
                picks.push(c);
            }
        }
        let mut lender_field = String::new();
        for (idx, c) in picks.iter().enumerate() {
            if idx > 0 {
                lender_field.push('|');
            }
            let _ = write!(lender_field, "{c}");
        }
        loans.write_record([
            format!("L{i:05}"),
            sector.name().to_string(),
            u8::from(rng.random::<f64>() < 0.4).to_string(),
            languages[rng.random_range(0..languages.len())].to_string(),
            format!("{amount}"),
            u8::from(rng.random::<f64>() < 0.6).to_string(),
            posted.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            funded.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            borrower.clone(),
            lender_field,
        ])?;
    }
    loans.flush()?;

    let mut rng = seed::rng_for(spec.seed, "csv-bundle", b"tables");
    let all: Vec<&String> = borrowers.iter().chain(lenders.iter()).collect();
    let mut indicators = csv::Writer::from_path(dir.join("indicators.csv"))?;
    indicators.write_record([
        "country",
        "ease_of_business",
        "loan_access",
        "women_ratio",
        "affordability",
        "vc_finance",
        "capacity_innovation",
        "internet_penetration",
        "gdp",
    ])?;
    for (idx, c) in all.iter().enumerate() {
        // Lender countries trend richer so gdp_difference is informative.
        let rich = idx >= borrowers.len();
        let gdp_base = if rich { 30_000.0 } else { 2_500.0 };
        indicators.write_record([
            (*c).clone(),
            format!("{}", rng.random_range(1..=190)),
            format!("{:.2}", rng.random::<f64>() * 80.0 + 10.0),
            format!("{:.3}", rng.random::<f64>() * 0.5 + 0.3),
            format!("{:.2}", rng.random::<f64>() * 60.0 + 20.0),
            format!("{:.2}", rng.random::<f64>() * 5.0 + 1.0),
            format!("{:.2}", rng.random::<f64>() * 5.0 + 2.0),
            format!("{:.1}", rng.random::<f64>() * 80.0 + 10.0),
            format!("{:.0}", gdp_base * (0.5 + rng.random::<f64>())),
        ])?;
    }
    indicators.flush()?;

    let mut distances = csv::Writer::from_path(dir.join("distances.csv"))?;
    distances.write_record(["country_a", "country_b", "km"])?;
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            distances.write_record([
                all[i].clone(),
                all[j].clone(),
                format!("{:.0}", rng.random::<f64>() * 14_500.0 + 500.0),
            ])?;
        }
    }
    distances.flush()?;

    let mut migrants = csv::Writer::from_path(dir.join("migrants.csv"))?;
    migrants.write_record(["origin", "host", "count"])?;
    for b in &borrowers {
        for l in &lenders {
            // Leave roughly 30% of pairs absent; ingestion treats them as 0.
            if rng.random::<f64>() < 0.7 {
                migrants.write_record([
                    b.clone(),
                    l.clone(),
                    format!("{}", rng.random_range(0..250_000)),
                ])?;
            }
        }
    }
    migrants.flush()?;

    let mut colonization = csv::Writer::from_path(dir.join("colonization.csv"))?;
    colonization.write_record(["colonized", "colonizer", "flag"])?;
    for b in &borrowers {
        for l in &lenders {
            if rng.random::<f64>() < 0.25 {
                colonization.write_record([
                    b.clone(),
                    l.clone(),
                    u8::from(rng.random::<f64>() < 0.6).to_string(),
                ])?;
            }
        }
    }
    colonization.flush()?;
    Ok(())
}
