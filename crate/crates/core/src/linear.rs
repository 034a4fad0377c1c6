//! Least-squares and logistic regression, plus the prediction-quality
//! metrics used to compare models.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats::sigmoid;

/// Condition-number estimate above which a design is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default iteration cap for the logistic fit.
pub const LOGISTIC_MAX_ITER: usize = 100;

/// Default convergence tolerance for the logistic fit: largest coefficient
/// update relative to max(1, |coefficient|).
pub const LOGISTIC_TOL: f64 = 1e-8;

/// Coefficient magnitude treated as divergence toward a separable optimum.
const LOGISTIC_DIVERGENCE_BOUND: f64 = 1e8;

/// An ordinary least squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    /// Residual sum of squares divided by (n - p).
    pub residual_variance: f64,
    pub columns: Vec<String>,
}

/// A logistic regression fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub columns: Vec<String>,
}

fn check_shapes(x: &DesignMatrix, rows: usize) -> Result<()> {
    if x.n() == 0 || x.p() == 0 {
        return Err(Error::EmptyInput);
    }
    if rows != x.n() {
        return Err(Error::LengthMismatch {
            context: "response vs design rows",
            left: rows,
            right: x.n(),
        });
    }
    Ok(())
}

fn check_columns(fitted: &[String], x: &DesignMatrix) -> Result<()> {
    if fitted != x.names() {
        return Err(Error::ColumnMismatch(format!(
            "fit has [{}], input has [{}]",
            fitted.join(", "),
            x.names().join(", ")
        )));
    }
    Ok(())
}

/// X * beta after verifying the column layout matches the fit.
pub fn linear_predictor(coefficients: &DVector<f64>, columns: &[String], x: &DesignMatrix) -> Result<DVector<f64>> {
    check_columns(columns, x)?;
    if coefficients.len() != x.p() {
        return Err(Error::DimensionMismatch {
            context: "coefficient length",
            expected: x.p(),
            got: coefficients.len(),
        });
    }
    Ok(x.values() * coefficients)
}

/// Ordinary least squares via column-pivoted QR. Requires n > p; reports
/// `SingularDesign` when the R-diagonal condition estimate exceeds
/// `CONDITION_LIMIT`.
pub fn fit_ols(x: &DesignMatrix, y: &DVector<f64>) -> Result<OlsFit> {
    check_shapes(x, y.len())?;
    let (n, p) = (x.n(), x.p());
    if n <= p {
        return Err(Error::TooFewRows { n, p });
    }
    let qr = x.values().clone().col_piv_qr();
    let r = qr.r();
    let mut d_max: f64 = 0.0;
    let mut d_min = f64::INFINITY;
    for j in 0..p {
        let d = r[(j, j)].abs();
        d_max = d_max.max(d);
        d_min = d_min.min(d);
    }
    let condition = if d_min > 0.0 { d_max / d_min } else { f64::INFINITY };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularDesign { condition });
    }
    let qty = qr.q().transpose() * y;
    let mut coef = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { condition })?;
    qr.p().inv_permute_rows(&mut coef);
    let residuals = y - x.values() * &coef;
    let rss = residuals.norm_squared();
    Ok(OlsFit {
        coefficients: coef,
        residual_variance: rss / (n - p) as f64,
        columns: x.names().to_vec(),
    })
}

impl OlsFit {
    pub fn predict(&self, x: &DesignMatrix) -> Result<DVector<f64>> {
        linear_predictor(&self.coefficients, &self.columns, x)
    }
}

/// Bernoulli log-likelihood at linear predictor `eta` for labels `w`.
fn log_likelihood(eta: &DVector<f64>, w: &[u8]) -> f64 {
    eta.iter()
        .zip(w)
        .map(|(e, wi)| {
            // ln(1 + exp(e)) without overflow.
            let softplus = e.max(0.0) + (-e.abs()).exp().ln_1p();
            f64::from(*wi) * e - softplus
        })
        .sum()
}

/// Logistic regression by Newton iterations with step halving, so the
/// log-likelihood never decreases across iterations.
pub fn fit_logistic(x: &DesignMatrix, w: &[u8]) -> Result<LogisticFit> {
    fit_logistic_with(x, w, LOGISTIC_MAX_ITER, LOGISTIC_TOL)
}

pub fn fit_logistic_with(x: &DesignMatrix, w: &[u8], max_iter: usize, tol: f64) -> Result<LogisticFit> {
    check_shapes(x, w.len())?;
    if w.iter().any(|v| *v > 1) {
        return Err(Error::InvalidSpec("labels must be 0 or 1".into()));
    }
    let ones = w.iter().filter(|v| **v == 1).count();
    if ones == 0 || ones == w.len() {
        return Err(Error::SingleClassInput);
    }
    let (n, p) = (x.n(), x.p());
    if n <= p {
        return Err(Error::TooFewRows { n, p });
    }

    let xm = x.values();
    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(&(xm * &beta), w);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=max_iter {
        iterations = iter;
        let eta = xm * &beta;
        let mu: DVector<f64> = eta.map(sigmoid);
        let resid = DVector::from_iterator(n, w.iter().zip(mu.iter()).map(|(wi, m)| f64::from(*wi) - m));
        let grad = xm.transpose() * &resid;

        // Weighted Gram matrix X^T diag(mu (1 - mu)) X.
        let mut weighted = xm.clone();
        for i in 0..n {
            let wi = (mu[i] * (1.0 - mu[i])).max(1e-10);
            for v in weighted.row_mut(i).iter_mut() {
                *v *= wi;
            }
        }
        let hessian = xm.transpose() * weighted;
        let chol = hessian
            .cholesky()
            .ok_or(Error::SingularDesign { condition: f64::INFINITY })?;
        let step = chol.solve(&grad);

        // Halve the step until the log-likelihood stops decreasing.
        let mut scale = 1.0;
        let (candidate, cand_ll) = loop {
            let cand = &beta + &step * scale;
            let cand_ll = log_likelihood(&(xm * &cand), w);
            if cand_ll >= ll - 1e-12 || scale < 1e-10 {
                break (cand, cand_ll);
            }
            scale *= 0.5;
        };

        if candidate.amax() > LOGISTIC_DIVERGENCE_BOUND {
            return Err(Error::DivergedSeparableData);
        }
        let max_update = (&candidate - &beta)
            .iter()
            .zip(beta.iter())
            .map(|(d, b)| d.abs() / b.abs().max(1.0))
            .fold(0.0f64, f64::max);
        beta = candidate;
        ll = cand_ll;
        if max_update < tol {
            converged = true;
            break;
        }
    }

    Ok(LogisticFit {
        coefficients: beta,
        converged,
        iterations,
        columns: x.names().to_vec(),
    })
}

impl LogisticFit {
    /// Predicted probabilities, strictly inside (0, 1) up to floating-point
    /// saturation of the logistic function.
    pub fn predict_proba(&self, x: &DesignMatrix) -> Result<DVector<f64>> {
        Ok(linear_predictor(&self.coefficients, &self.columns, x)?.map(sigmoid))
    }
}

/// Root mean squared error.
pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            context: "rmse inputs",
            left: truth.len(),
            right: pred.len(),
        });
    }
    let mse = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    /// Harmonic mean of precision and recall for the positive (label 1)
    /// class; 1.0 when both samples agree there are no positives.
    pub f1: f64,
    /// Fraction of correct predictions, in [0, 1].
    pub accuracy: f64,
}

/// F1 and accuracy at the given probability threshold; predictions at or
/// above the threshold count as the positive class.
pub fn classification_metrics(labels: &[u8], probs: &[f64], threshold: f64) -> Result<ClassificationMetrics> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() != probs.len() {
        return Err(Error::LengthMismatch {
            context: "classification metric inputs",
            left: labels.len(),
            right: probs.len(),
        });
    }
    let (mut tp, mut fp, mut fne, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (label, prob) in labels.iter().zip(probs) {
        let pred = u8::from(*prob >= threshold);
        if pred == *label {
            correct += 1;
        }
        match (pred, label) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fne += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fne;
    let f1 = if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 };
    Ok(ClassificationMetrics {
        f1,
        accuracy: correct as f64 / labels.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::ColumnKind;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn design_from_columns(cols: &[Vec<f64>], standardize_from: usize) -> DesignMatrix {
        let n = cols[0].len();
        let p = cols.len();
        let raw = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let kinds: Vec<ColumnKind> = (0..p)
            .map(|j| {
                if j == 0 {
                    ColumnKind::Intercept
                } else if j < standardize_from {
                    ColumnKind::Binary
                } else {
                    ColumnKind::Numeric
                }
            })
            .collect();
        DesignMatrix::from_raw(raw, names, &kinds).unwrap()
    }

    fn random_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = crate::seed::rng_for(seed, "linear-test", b"x");
        let mut cols = vec![vec![1.0; n]];
        for _ in 1..p {
            cols.push((0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect());
        }
        design_from_columns(&cols, 1)
    }

    // Independent oracle: solve the normal equations X^T X b = X^T y by
    // Cholesky, with no shared code with fit_ols.
    fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        xtx.cholesky().expect("well conditioned").solve(&xty)
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        for seed in 0..5u64 {
            let x = random_design(20, 3, seed);
            let mut rng = crate::seed::rng_for(seed, "linear-test", b"y");
            let y = DVector::from_fn(20, |_, _| rng.random::<f64>() * 10.0 - 5.0);
            let fit = fit_ols(&x, &y).unwrap();
            let oracle = normal_equations(x.values(), &y);
            for j in 0..3 {
                let rel = (fit.coefficients[j] - oracle[j]).abs() / oracle[j].abs().max(1e-12);
                assert!(rel < 1e-8, "seed {seed} col {j}: rel {rel:e}");
            }
        }
    }

    #[test]
    fn ols_recovers_exact_linear_data() {
        let x = random_design(30, 3, 11);
        let truth = DVector::from_vec(vec![2.0, -1.5, 0.75]);
        let y = x.values() * &truth;
        let fit = fit_ols(&x, &y).unwrap();
        for j in 0..3 {
            assert_relative_eq!(fit.coefficients[j], truth[j], epsilon = 1e-9);
        }
        assert!(fit.residual_variance < 1e-18);
    }

    #[test]
    fn ols_residual_variance_uses_n_minus_p() {
        // Two points, one column: residuals are +-1, RSS = 2, n - p = 1.
        let raw = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let x = DesignMatrix::from_raw(raw, vec!["intercept".into()], &[ColumnKind::Intercept]).unwrap();
        let y = DVector::from_vec(vec![0.0, 2.0]);
        let fit = fit_ols(&x, &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 1.0);
        assert_relative_eq!(fit.residual_variance, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_rejects_duplicate_columns_as_singular() {
        let mut rng = crate::seed::rng_for(3, "linear-test", b"dup");
        let base: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let cols = [vec![1.0; 10], base.clone(), base];
        let n = cols[0].len();
        let raw = DMatrix::from_fn(n, 3, |i, j| cols[j][i]);
        // Bypass standardization so the duplicate columns stay identical.
        let x = DesignMatrix::from_raw(
            raw,
            vec!["intercept".into(), "a".into(), "b".into()],
            &[ColumnKind::Intercept, ColumnKind::Numeric, ColumnKind::Numeric],
        )
        .unwrap();
        let y = DVector::from_fn(10, |i, _| i as f64);
        assert!(matches!(fit_ols(&x, &y), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn ols_requires_more_rows_than_columns() {
        let raw = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, 0.7]);
        let x = DesignMatrix::from_raw(
            raw,
            vec!["intercept".into(), "a".into()],
            &[ColumnKind::Intercept, ColumnKind::Numeric],
        )
        .unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(fit_ols(&x, &y), Err(Error::TooFewRows { n: 2, p: 2 })));
    }

    #[test]
    fn predict_checks_column_layout() {
        let x = random_design(12, 2, 5);
        let y = DVector::from_fn(12, |i, _| i as f64);
        let fit = fit_ols(&x, &y).unwrap();
        let other = {
            let raw = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 1.0, 0.4]);
            DesignMatrix::from_raw(
                raw,
                vec!["intercept".into(), "renamed".into()],
                &[ColumnKind::Intercept, ColumnKind::Numeric],
            )
            .unwrap()
        };
        assert!(matches!(fit.predict(&other), Err(Error::ColumnMismatch(_))));
        let preds = fit.predict(&x).unwrap();
        assert_eq!(preds.len(), 12);
    }

    #[test]
    fn logistic_intercept_only_recovers_base_rate() {
        let n = 100;
        let raw = DMatrix::from_element(n, 1, 1.0);
        let x = DesignMatrix::from_raw(raw, vec!["intercept".into()], &[ColumnKind::Intercept]).unwrap();
        let w: Vec<u8> = (0..n).map(|i| u8::from(i < 30)).collect();
        let fit = fit_logistic(&x, &w).unwrap();
        assert!(fit.converged);
        let probs = fit.predict_proba(&x).unwrap();
        assert_relative_eq!(probs[0], 0.30, epsilon = 1e-6);
    }

    #[test]
    fn logistic_separates_well_spread_classes() {
        // One strong feature: labels mostly follow its sign.
        let mut rng = crate::seed::rng_for(21, "linear-test", b"logit");
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let w: Vec<u8> = xs
            .iter()
            .map(|x| u8::from(rng.random::<f64>() < sigmoid(4.0 * x)))
            .collect();
        let cols = vec![vec![1.0; n], xs];
        let x = design_from_columns(&cols, 1);
        let fit = fit_logistic(&x, &w).unwrap();
        assert!(fit.converged);
        let probs = fit.predict_proba(&x).unwrap();
        let m = classification_metrics(&w, probs.as_slice(), 0.5).unwrap();
        assert!(m.accuracy > 0.9, "accuracy {}", m.accuracy);
    }

    #[test]
    fn logistic_gradient_vanishes_at_optimum() {
        for seed in 0..10u64 {
            let n = 150;
            let x = random_design(n, 3, 100 + seed);
            let mut rng = crate::seed::rng_for(seed, "linear-test", b"labels");
            let w: Vec<u8> = (0..n)
                .map(|i| {
                    let eta = 0.5 * x.values()[(i, 1)] - 0.3 * x.values()[(i, 2)];
                    u8::from(rng.random::<f64>() < sigmoid(eta))
                })
                .collect();
            let fit = fit_logistic(&x, &w).unwrap();
            assert!(fit.converged, "seed {seed}");
            let mu = fit.predict_proba(&x).unwrap();
            let grad = x.values().transpose()
                * DVector::from_iterator(n, w.iter().zip(mu.iter()).map(|(wi, m)| f64::from(*wi) - m));
            assert!(grad.amax() < 1e-6, "seed {seed}: grad {:e}", grad.amax());
        }
    }

    #[test]
    fn logistic_analytic_gradient_matches_finite_differences() {
        let n = 60;
        let x = random_design(n, 3, 77);
        let mut rng = crate::seed::rng_for(77, "linear-test", b"fd");
        let w: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let beta = DVector::from_vec(vec![0.3, -0.7, 0.2]);
        let analytic = {
            let mu: DVector<f64> = (x.values() * &beta).map(sigmoid);
            x.values().transpose()
                * DVector::from_iterator(n, w.iter().zip(mu.iter()).map(|(wi, m)| f64::from(*wi) - m))
        };
        let h = 1e-5;
        for j in 0..3 {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (log_likelihood(&(x.values() * &up), &w) - log_likelihood(&(x.values() * &dn), &w)) / (2.0 * h);
            let rel = (fd - analytic[j]).abs() / analytic[j].abs().max(1e-8);
            assert!(rel < 1e-3, "col {j}: rel {rel:e}");
        }
    }

    #[test]
    fn logistic_rejects_single_class_and_detects_separation() {
        let x = random_design(20, 2, 9);
        assert!(matches!(fit_logistic(&x, &[1u8; 20]), Err(Error::SingleClassInput)));
        assert!(matches!(fit_logistic(&x, &[0u8; 20]), Err(Error::SingleClassInput)));

        // Perfectly separated labels push the coefficient to infinity.
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 - 19.5).collect();
        let w: Vec<u8> = xs.iter().map(|v| u8::from(*v > 0.0)).collect();
        let cols = vec![vec![1.0; n], xs];
        let x = design_from_columns(&cols, 1);
        match fit_logistic_with(&x, &w, 5000, 1e-14) {
            Err(Error::DivergedSeparableData) => {}
            Ok(fit) => assert!(!fit.converged, "separable data must not converge"),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }

    #[test]
    fn rmse_matches_hand_values() {
        assert_relative_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), (12.5f64).sqrt());
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn classification_metrics_match_hand_counts() {
        // labels:  1 1 0 0 1 0, preds at 0.5: 1 0 1 0 1 0
        let labels = [1u8, 1, 0, 0, 1, 0];
        let probs = [0.9, 0.2, 0.7, 0.1, 0.6, 0.4];
        let m = classification_metrics(&labels, &probs, 0.5).unwrap();
        // tp = 2, fp = 1, fn = 1 -> f1 = 4/6; correct = 4/6.
        assert_relative_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(m.accuracy, 2.0 / 3.0, epsilon = 1e-12);

        let perfect = classification_metrics(&labels, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0], 0.5).unwrap();
        assert_relative_eq!(perfect.f1, 1.0);
        assert_relative_eq!(perfect.accuracy, 1.0);
    }
}
