//! Estimators for how loan sector affects crowdfunding speed.
//!
//! The crate covers the full pipeline: ingesting loan and country CSVs into
//! design matrices, spike-and-slab Bayesian variable selection by Gibbs
//! sampling, a fairness-penalized sampler that pulls group mean predictions
//! together, doubly robust average-treatment-effect estimation, and synthetic
//! data generators used to validate all of the above.

pub mod causal;
pub mod design;
pub mod error;
pub mod fair;
pub mod gibbs;
pub mod ingest;
pub mod linear;
pub mod seed;
pub mod stats;
pub mod synthetic;
pub mod types;

pub use causal::{
    ate_baseline, ate_baseline_with_models, ate_dre, ate_naive, run_all_sector_studies,
    run_sector_study, OutcomeModel, OutcomePair, SectorStudy, StudyConfig, StudyData,
    PROPENSITY_CLIP, Z_975,
};
pub use design::{
    split_dataset, validate_sector_dataset, ColumnKind, ColumnScale, DesignMatrix, SectorDataset,
};
pub use error::{Error, Result};
pub use fair::{build_constraint, group_gap, run_fair_gibbs, run_fair_gibbs_with, FairnessConstraint};
pub use gibbs::{
    run_gibbs, GibbsState, PenaltyVariant, PosteriorDraws, PosteriorSummary, SpikeSlabSampler,
};
pub use ingest::{
    build_design_matrix, derive_feature_table, derive_pair_features, load_bundle,
    load_colonization, load_distances, load_indicators, load_loans, load_migrants, load_tables,
    train_test_split, FeatureRow, FeatureTable, IngestReport, LoadedLoans, RawTables, RowReject,
    SectorEncoding,
};
pub use linear::{
    classification_metrics, fit_logistic, fit_ols, rmse, ClassificationMetrics, LogisticFit,
    OlsFit,
};
pub use types::{
    AteMethod, AteResult, CountryIndicators, FundingTime, LoanRecord, PairFeatures, Sector,
    SpikeSlabHyper,
};
