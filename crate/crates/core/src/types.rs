//! Domain records and parameter bundles shared across the crate.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loan sectors, in the canonical order used for every per-sector output.
///
/// `Agriculture` is the reference category: full-dummy design matrices encode
/// the other eleven sectors and leave it as the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    Manufacturing,
    Transportation,
    Clothing,
    PersonalUse,
    Housing,
    Food,
    Arts,
    Retail,
    Construction,
    Agriculture,
    Services,
    Education,
}

impl Sector {
    /// All sectors in canonical order.
    pub const ALL: [Sector; 12] = [
        Sector::Manufacturing,
        Sector::Transportation,
        Sector::Clothing,
        Sector::PersonalUse,
        Sector::Housing,
        Sector::Food,
        Sector::Arts,
        Sector::Retail,
        Sector::Construction,
        Sector::Agriculture,
        Sector::Services,
        Sector::Education,
    ];

    /// The dummy-encoding reference category.
    pub const REFERENCE: Sector = Sector::Agriculture;

    /// Display name, as it appears in input CSVs and reports.
    pub fn name(self) -> &'static str {
        match self {
            Sector::Manufacturing => "Manufacturing",
            Sector::Transportation => "Transportation",
            Sector::Clothing => "Clothing",
            Sector::PersonalUse => "Personal Use",
            Sector::Housing => "Housing",
            Sector::Food => "Food",
            Sector::Arts => "Arts",
            Sector::Retail => "Retail",
            Sector::Construction => "Construction",
            Sector::Agriculture => "Agriculture",
            Sector::Services => "Services",
            Sector::Education => "Education",
        }
    }

    /// Position in canonical order.
    pub fn index(self) -> usize {
        Sector::ALL.iter().position(|s| *s == self).expect("member of ALL")
    }

    /// Parse a sector name; matching is case-insensitive and ignores
    /// surrounding whitespace. Also accepts the underscore spelling of
    /// "Personal Use".
    pub fn parse(name: &str) -> Option<Sector> {
        let cleaned = name.trim().to_ascii_lowercase().replace('_', " ");
        Sector::ALL
            .into_iter()
            .find(|s| s.name().to_ascii_lowercase() == cleaned)
    }
}

impl std::fmt::Display for Sector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Days from posting to full funding. Non-negative and finite by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundingTime {
    days: f64,
}

impl FundingTime {
    pub fn new(days: f64) -> Result<FundingTime> {
        if !days.is_finite() || days < 0.0 {
            return Err(Error::InvalidSpec(format!("funding time {days} must be finite and >= 0")));
        }
        Ok(FundingTime { days })
    }

    /// Fractional days between two instants; errors if `funded` precedes `posted`.
    pub fn from_span(posted: DateTime<Utc>, funded: DateTime<Utc>) -> Result<FundingTime> {
        let secs = (funded - posted).num_seconds();
        if secs < 0 {
            return Err(Error::InvalidSpec(format!(
                "funded_at {funded} precedes posted_at {posted}"
            )));
        }
        FundingTime::new(secs as f64 / 86_400.0)
    }

    pub fn days(self) -> f64 {
        self.days
    }
}

/// One loan as read from the loans CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LoanRecord {
    pub loan_id: String,
    pub sector: Sector,
    /// 1 when repayments are pegged to USD, 0 otherwise.
    pub currency_policy: u8,
    /// Posting language, e.g. "English".
    pub language: String,
    pub loan_amount: f64,
    /// 1 = female borrower, 0 = male.
    pub borrower_gender: u8,
    pub posted_at: DateTime<Utc>,
    pub funded_at: DateTime<Utc>,
    pub borrower_country: String,
    /// Countries of the participating lenders; at least one.
    pub lender_countries: Vec<String>,
}

impl LoanRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        loan_id: String,
        sector: Sector,
        currency_policy: u8,
        language: String,
        loan_amount: f64,
        borrower_gender: u8,
        posted_at: DateTime<Utc>,
        funded_at: DateTime<Utc>,
        borrower_country: String,
        lender_countries: Vec<String>,
    ) -> Result<LoanRecord> {
        if !(loan_amount.is_finite() && loan_amount > 0.0) {
            return Err(Error::InvalidSpec(format!("loan_amount {loan_amount} must be positive")));
        }
        if currency_policy > 1 || borrower_gender > 1 {
            return Err(Error::InvalidSpec("binary fields must be 0 or 1".into()));
        }
        if lender_countries.is_empty() {
            return Err(Error::InvalidSpec(format!("loan {loan_id} has no lender countries")));
        }
        if funded_at < posted_at {
            return Err(Error::InvalidSpec(format!(
                "loan {loan_id}: funded_at precedes posted_at"
            )));
        }
        Ok(LoanRecord {
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
        })
    }

    pub fn funding_time(&self) -> FundingTime {
        FundingTime::from_span(self.posted_at, self.funded_at).expect("ordering checked at construction")
    }
}

/// Country-level development indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryIndicators {
    pub country: String,
    pub ease_of_business: f64,
    pub loan_access: f64,
    pub women_ratio: f64,
    pub affordability: f64,
    pub vc_finance: f64,
    pub capacity_innovation: f64,
    /// Percent of population online, in [0, 100].
    pub internet_penetration: f64,
    pub gdp: f64,
}

impl CountryIndicators {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.internet_penetration) {
            return Err(Error::InvalidSpec(format!(
                "{}: internet_penetration {} outside [0, 100]",
                self.country, self.internet_penetration
            )));
        }
        for (name, v) in [
            ("ease_of_business", self.ease_of_business),
            ("loan_access", self.loan_access),
            ("women_ratio", self.women_ratio),
            ("affordability", self.affordability),
            ("vc_finance", self.vc_finance),
            ("capacity_innovation", self.capacity_innovation),
            ("gdp", self.gdp),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{}: {name} is not finite", self.country)));
            }
        }
        Ok(())
    }
}

/// Borrower/lender relation features for one loan, averaged over its lenders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    /// Mean great-circle distance in km; non-negative.
    pub distance: f64,
    /// Mean migrant stock; non-negative.
    pub migrants: f64,
    /// 1 if a uniformly chosen lender country once colonized the borrower country.
    pub colonization: u8,
    /// Mean lender GDP minus borrower GDP.
    pub gdp_difference: f64,
}

impl PairFeatures {
    pub fn new(distance: f64, migrants: f64, colonization: u8, gdp_difference: f64) -> Result<PairFeatures> {
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(Error::InvalidSpec(format!("distance {distance} must be >= 0")));
        }
        if !(migrants.is_finite() && migrants >= 0.0) {
            return Err(Error::InvalidSpec(format!("migrants {migrants} must be >= 0")));
        }
        if colonization > 1 {
            return Err(Error::InvalidSpec("colonization flag must be 0 or 1".into()));
        }
        if !gdp_difference.is_finite() {
            return Err(Error::InvalidSpec("gdp_difference is not finite".into()));
        }
        Ok(PairFeatures { distance, migrants, colonization, gdp_difference })
    }
}

/// Hyperparameters and chain settings for the spike-and-slab sampler.
///
/// The slab variance is `sigma2 * tau2` with `tau2 ~ InvGamma(1/2, s2/2)`;
/// `s2` is the squared scale of that prior. Inclusion probabilities start at
/// `theta_init` with a `Beta(a, b)` prior, and the noise variance carries an
/// `InvGamma(alpha1, alpha2)` prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabHyper {
    pub a: f64,
    pub b: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub s2: f64,
    pub theta_init: f64,
    pub burn_in: usize,
    pub draws: usize,
    pub seed: u64,
    /// Fairness penalty weight; 0 disables the penalty.
    pub lambda: f64,
}

impl Default for SpikeSlabHyper {
    fn default() -> SpikeSlabHyper {
        SpikeSlabHyper {
            a: 1.0,
            b: 1.0,
            alpha1: 0.01,
            alpha2: 0.01,
            s2: 0.25,
            theta_init: 0.5,
            burn_in: 1000,
            draws: 4000,
            seed: 0,
            lambda: 0.0,
        }
    }
}

impl SpikeSlabHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("s2", self.s2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.theta_init > 0.0 && self.theta_init < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "theta_init = {} must lie in (0, 1)",
                self.theta_init
            )));
        }
        if self.draws == 0 {
            return Err(Error::InvalidSpec("draws must be >= 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidSpec(format!("lambda = {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

/// Which average-treatment-effect estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AteMethod {
    /// Difference of group means.
    Naive,
    /// Outcome-regression imputation with least-squares models.
    BaselineLr,
    /// Doubly robust estimator with spike-and-slab outcome models.
    DreSsr,
}

impl AteMethod {
    pub fn label(self) -> &'static str {
        match self {
            AteMethod::Naive => "naive",
            AteMethod::BaselineLr => "baseline_lr",
            AteMethod::DreSsr => "dre_ssr",
        }
    }
}

/// A point estimate of an average treatment effect with its sampling error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    pub method: AteMethod,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sector: Option<Sector>,
}

impl AteResult {
    pub fn new(
        method: AteMethod,
        estimate: f64,
        std_error: f64,
        ci_low: f64,
        ci_high: f64,
        sector: Option<Sector>,
    ) -> Result<AteResult> {
        if !(std_error.is_finite() && std_error >= 0.0) {
            return Err(Error::InvalidSpec(format!("std_error {std_error} must be >= 0")));
        }
        if !(ci_low <= estimate && estimate <= ci_high) {
            return Err(Error::InvalidSpec(format!(
                "interval [{ci_low}, {ci_high}] must contain estimate {estimate}"
            )));
        }
        Ok(AteResult { method, estimate, std_error, ci_low, ci_high, sector })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn sector_order_and_names_are_canonical() {
        assert_eq!(Sector::ALL.len(), 12);
        assert_eq!(Sector::ALL[0], Sector::Manufacturing);
        assert_eq!(Sector::ALL[9], Sector::Agriculture);
        assert_eq!(Sector::ALL[11], Sector::Education);
        assert_eq!(Sector::PersonalUse.name(), "Personal Use");
        assert_eq!(Sector::REFERENCE, Sector::Agriculture);
        for (i, s) in Sector::ALL.into_iter().enumerate() {
            assert_eq!(s.index(), i);
        }
    }

    #[test]
    fn sector_parse_is_forgiving_about_case_and_spacing() {
        assert_eq!(Sector::parse("retail"), Some(Sector::Retail));
        assert_eq!(Sector::parse("  Personal Use "), Some(Sector::PersonalUse));
        assert_eq!(Sector::parse("personal_use"), Some(Sector::PersonalUse));
        assert_eq!(Sector::parse("AGRICULTURE"), Some(Sector::Agriculture));
        assert_eq!(Sector::parse("Fishing"), None);
    }

    #[test]
    fn funding_time_rejects_negative_spans() {
        let posted = Utc.with_ymd_and_hms(2017, 3, 1, 12, 0, 0).unwrap();
        let funded = Utc.with_ymd_and_hms(2017, 3, 4, 0, 0, 0).unwrap();
        let ft = FundingTime::from_span(posted, funded).unwrap();
        assert!((ft.days() - 2.5).abs() < 1e-12);
        assert!(FundingTime::from_span(funded, posted).is_err());
        assert!(FundingTime::new(f64::NAN).is_err());
        assert!(FundingTime::new(-0.1).is_err());
    }

    #[test]
    fn loan_record_constructor_enforces_invariants() {
        let posted = Utc.with_ymd_and_hms(2017, 3, 1, 0, 0, 0).unwrap();
        let funded = Utc.with_ymd_and_hms(2017, 3, 2, 0, 0, 0).unwrap();
        let ok = LoanRecord::new(
            "L1".into(),
            Sector::Retail,
            1,
            "English".into(),
            500.0,
            1,
            posted,
            funded,
            "Kenya".into(),
            vec!["United States".into()],
        );
        assert!(ok.is_ok());
        let no_lenders = LoanRecord::new(
            "L2".into(),
            Sector::Retail,
            0,
            "English".into(),
            500.0,
            0,
            posted,
            funded,
            "Kenya".into(),
            vec![],
        );
        assert!(no_lenders.is_err());
        let bad_amount = LoanRecord::new(
            "L3".into(),
            Sector::Retail,
            0,
            "English".into(),
            0.0,
            0,
            posted,
            funded,
            "Kenya".into(),
            vec!["France".into()],
        );
        assert!(bad_amount.is_err());
    }

    #[test]
    fn hyper_defaults_validate_and_bad_values_fail() {
        let h = SpikeSlabHyper::default();
        h.validate().unwrap();
        assert_eq!(h.burn_in, 1000);
        assert_eq!(h.draws, 4000);
        assert!((h.s2 - 0.25).abs() < 1e-15);
        let mut bad = h.clone();
        bad.theta_init = 1.0;
        assert!(bad.validate().is_err());
        bad = h.clone();
        bad.s2 = 0.0;
        assert!(bad.validate().is_err());
        bad = h;
        bad.lambda = -0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ate_result_requires_consistent_interval() {
        assert!(AteResult::new(AteMethod::Naive, 1.0, 0.5, 0.0, 2.0, None).is_ok());
        assert!(AteResult::new(AteMethod::Naive, 3.0, 0.5, 0.0, 2.0, None).is_err());
        assert!(AteResult::new(AteMethod::Naive, 1.0, -1.0, 0.0, 2.0, None).is_err());
    }
}
