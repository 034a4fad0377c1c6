//! Shared fixtures for the benchmark targets.

use lendfair_core::design::{DesignMatrix, SectorDataset};
use lendfair_core::synthetic::{
    generate_causal, generate_group_bias, generate_regression, write_csv_bundle, CsvBundleSpec,
    GroupBiasSpec, Misspecification, SyntheticSpec,
};
use lendfair_core::{load_bundle, LoadedLoans, RawTables};
use nalgebra::DVector;

pub fn regression_fixture(n: usize, p: usize) -> (DesignMatrix, DVector<f64>) {
    let mut beta = vec![0.0; p];
    for (j, v) in beta.iter_mut().enumerate().step_by(4) {
        *v = if j % 8 == 0 { 1.5 } else { -1.0 };
    }
    let spec = SyntheticSpec::regression(n, beta, 1.0, 1234);
    generate_regression(&spec).unwrap()
}

pub fn causal_fixture(n: usize) -> SectorDataset {
    let spec = SyntheticSpec {
        n,
        p: 4,
        true_beta: vec![1.5, -1.0, 0.8, 0.5],
        support: vec![0, 1, 2, 3],
        noise_sd: 1.0,
        treatment_effect: 2.0,
        propensity_coefs: vec![1.2, -0.5, 0.3, 0.0],
        propensity_intercept: -0.8,
        misspecification: Misspecification::None,
        seed: 4321,
    };
    generate_causal(&spec).unwrap()
}

pub fn group_bias_fixture(n: usize) -> SectorDataset {
    let spec = GroupBiasSpec {
        n,
        confounded: 4,
        clean: 3,
        shift: 1.5,
        group_effect: 0.6,
        confound_effect: 0.3,
        noise_sd: 3.0,
        group_fraction: 0.5,
        seed: 2024,
    };
    generate_group_bias(&spec).unwrap()
}

pub fn bundle_fixture(loans: usize) -> (LoadedLoans, RawTables) {
    let dir = tempfile::tempdir().unwrap();
    let spec = CsvBundleSpec {
        loans,
        borrower_countries: 30,
        lender_countries: 6,
        sector_effect: 0.5,
        seed: 7,
    };
    write_csv_bundle(dir.path(), &spec).unwrap();
    load_bundle(dir.path()).unwrap()
}
