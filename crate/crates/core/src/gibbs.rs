//! Spike-and-slab linear regression by Gibbs sampling.
//!
//! Each coefficient is either exactly zero (spike) or drawn from a
//! `N(0, sigma2 * tau2)` slab, with a shared Bernoulli inclusion rate theta.
//! The sampler sweeps: inclusion scan, coefficient block draw, theta, tau2,
//! sigma2. Sufficient statistics (X^T X, X^T y, y^T y) are precomputed, so a
//! sweep costs O(p^2 + |active|^3) independent of n.
//!
//! The same machinery runs the fairness-penalized variant: a linear term
//! `weight * beta . d` added to the squared error tilts the coefficient mean,
//! the inclusion odds, and the noise-variance rate. With a zero penalty the
//! arithmetic is bit-identical to the plain sampler.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::seed;
use crate::stats::{quantile, sigmoid};
use crate::types::SpikeSlabHyper;

/// Numeric guard for variance draws; keeps extreme inverse-gamma tails from
/// producing zero or infinity.
const VARIANCE_FLOOR: f64 = 1e-300;
const VARIANCE_CEIL: f64 = 1e300;

/// Current values of every sampled quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub beta: DVector<f64>,
    pub pi: Vec<bool>,
    pub theta: f64,
    pub tau2: f64,
    pub sigma2: f64,
}

/// How the linear fairness term enters the conditionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyVariant {
    /// The penalty weight scales with n, so the tilt survives against the
    /// O(n) squared-error term. This is the default.
    PerObservation,
    /// The penalty enters once, unscaled: the coefficient mean uses
    /// `X^T y - d` and the inclusion score adds `d_j`. Kept for comparison;
    /// its effect vanishes as n grows.
    OneShot,
}

/// Linear tilt applied to the conditionals. All-zero terms reproduce the
/// plain sampler exactly.
#[derive(Debug, Clone, PartialEq)]
struct PenaltyTerms {
    /// Subtracted from X^T y in the coefficient-mean solve.
    beta_shift: DVector<f64>,
    /// Added to the inclusion scan score u_j.
    pi_shift: DVector<f64>,
    /// Multiplies beta . d in the noise-variance rate.
    q_weight: f64,
    d: DVector<f64>,
}

impl PenaltyTerms {
    fn none(p: usize) -> PenaltyTerms {
        PenaltyTerms {
            beta_shift: DVector::zeros(p),
            pi_shift: DVector::zeros(p),
            q_weight: 0.0,
            d: DVector::zeros(p),
        }
    }

    fn new(variant: PenaltyVariant, lambda: f64, d: &DVector<f64>, n: usize) -> PenaltyTerms {
        match variant {
            PenaltyVariant::PerObservation => {
                let weight = n as f64 * lambda;
                PenaltyTerms {
                    beta_shift: d * (weight / 2.0),
                    pi_shift: d * (-weight / 2.0),
                    q_weight: weight,
                    d: d.clone(),
                }
            }
            PenaltyVariant::OneShot => PenaltyTerms {
                beta_shift: d.clone(),
                pi_shift: d.clone(),
                q_weight: lambda,
                d: d.clone(),
            },
        }
    }
}

/// A spike-and-slab sampler bound to one regression problem.
pub struct SpikeSlabSampler {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n: usize,
    p: usize,
    names: Vec<String>,
    /// Intercept column index; pinned active and skipped by the scan.
    intercept: Option<usize>,
    hyper: SpikeSlabHyper,
    penalty: PenaltyTerms,
    var_y: f64,
}

impl SpikeSlabSampler {
    pub fn new(x: &DesignMatrix, y: &DVector<f64>, hyper: &SpikeSlabHyper) -> Result<SpikeSlabSampler> {
        SpikeSlabSampler::build(x, y, hyper, None)
    }

    /// Penalized sampler; `d` is the treated-minus-control feature mean gap
    /// on the model scale.
    pub fn penalized(
        x: &DesignMatrix,
        y: &DVector<f64>,
        hyper: &SpikeSlabHyper,
        lambda: f64,
        d: &DVector<f64>,
        variant: PenaltyVariant,
    ) -> Result<SpikeSlabSampler> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidSpec(format!("lambda = {lambda} must be >= 0")));
        }
        if d.len() != x.p() {
            return Err(Error::DimensionMismatch {
                context: "fairness direction length",
                expected: x.p(),
                got: d.len(),
            });
        }
        SpikeSlabSampler::build(x, y, hyper, Some((lambda, d, variant)))
    }

    fn build(
        x: &DesignMatrix,
        y: &DVector<f64>,
        hyper: &SpikeSlabHyper,
        penalty: Option<(f64, &DVector<f64>, PenaltyVariant)>,
    ) -> Result<SpikeSlabSampler> {
        hyper.validate()?;
        if x.n() == 0 || x.p() == 0 {
            return Err(Error::EmptyInput);
        }
        if y.len() != x.n() {
            return Err(Error::LengthMismatch {
                context: "response vs design rows",
                left: y.len(),
                right: x.n(),
            });
        }
        let xm = x.values();
        let n = x.n();
        let p = x.p();
        let mean_y = y.sum() / n as f64;
        let var_y = if n > 1 {
            y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / (n - 1) as f64
        } else {
            1.0
        };
        let terms = match penalty {
            Some((lambda, d, variant)) => PenaltyTerms::new(variant, lambda, d, n),
            None => PenaltyTerms::none(p),
        };
        Ok(SpikeSlabSampler {
            gram: xm.transpose() * xm,
            xty: xm.transpose() * y,
            yty: y.dot(y),
            n,
            p,
            names: x.names().to_vec(),
            intercept: x.intercept_index(),
            hyper: hyper.clone(),
            penalty: terms,
            var_y: var_y.max(1e-12),
        })
    }

    /// A data-free chain: n = 0 sufficient statistics, so every conditional
    /// collapses to its prior. Used to validate the sweep against the priors.
    pub fn prior_chain(p: usize, hyper: &SpikeSlabHyper) -> Result<SpikeSlabSampler> {
        hyper.validate()?;
        if p == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(SpikeSlabSampler {
            gram: DMatrix::zeros(p, p),
            xty: DVector::zeros(p),
            yty: 0.0,
            n: 0,
            p,
            names: (0..p).map(|j| format!("x{j}")).collect(),
            intercept: None,
            hyper: hyper.clone(),
            penalty: PenaltyTerms::none(p),
            var_y: 1.0,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Everything active, coefficients zero, unit tau2, noise at the sample
    /// variance of y.
    pub fn initial_state(&self) -> GibbsState {
        GibbsState {
            beta: DVector::zeros(self.p),
            pi: vec![true; self.p],
            theta: self.hyper.theta_init,
            tau2: 1.0,
            sigma2: self.var_y,
        }
    }

    /// theta | pi ~ Beta(a + sum(pi), b + p - sum(pi)). The count includes a
    /// pinned intercept.
    pub fn sample_theta(&self, state: &GibbsState, rng: &mut ChaCha8Rng) -> f64 {
        let k = state.pi.iter().filter(|v| **v).count() as f64;
        let dist = BetaDist::new(self.hyper.a + k, self.hyper.b + self.p as f64 - k)
            .expect("positive Beta parameters");
        dist.sample(rng)
    }

    /// tau2 | beta, pi, sigma2 ~ InvGamma(1/2 + sum(pi)/2, s2/2 + beta.beta / (2 sigma2)).
    /// With nothing active this is the tau2 prior.
    pub fn sample_tau2(&self, state: &GibbsState, rng: &mut ChaCha8Rng) -> f64 {
        let k = state.pi.iter().filter(|v| **v).count() as f64;
        let shape = 0.5 + 0.5 * k;
        let rate = 0.5 * self.hyper.s2 + state.beta.norm_squared() / (2.0 * state.sigma2);
        inverse_gamma(shape, rate, rng)
    }

    /// Residual sum of squares from the sufficient statistics, clamped at 0
    /// against cancellation error.
    fn rss(&self, beta: &DVector<f64>) -> f64 {
        let quad = (beta.transpose() * &self.gram * beta)[(0, 0)];
        (self.yty - 2.0 * beta.dot(&self.xty) + quad).max(0.0)
    }

    /// sigma2 | y, beta ~ InvGamma(alpha1 + n/2, alpha2 + Q/2) where Q is the
    /// penalized residual sum of squares, clamped at 0.
    pub fn sample_sigma2(&self, state: &GibbsState, rng: &mut ChaCha8Rng) -> f64 {
        let q = (self.rss(&state.beta) + self.penalty.q_weight * state.beta.dot(&self.penalty.d)).max(0.0);
        let shape = self.hyper.alpha1 + 0.5 * self.n as f64;
        let rate = self.hyper.alpha2 + 0.5 * q;
        inverse_gamma(shape, rate, rng)
    }

    /// Block draw of the active coefficients from their joint normal
    /// conditional; inactive coefficients are exactly zero.
    pub fn sample_beta(&self, state: &GibbsState, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        let active: Vec<usize> = (0..self.p).filter(|j| state.pi[*j]).collect();
        let mut beta = DVector::zeros(self.p);
        if active.is_empty() {
            return Ok(beta);
        }
        let k = active.len();
        let mut precision = DMatrix::zeros(k, k);
        for (r, jr) in active.iter().enumerate() {
            for (c, jc) in active.iter().enumerate() {
                precision[(r, c)] = self.gram[(*jr, *jc)];
            }
            precision[(r, r)] += 1.0 / state.tau2;
        }
        let rhs = DVector::from_iterator(k, active.iter().map(|j| self.xty[*j] - self.penalty.beta_shift[*j]));
        let chol = precision.cholesky().ok_or(Error::NumericalSingularity)?;
        let mean = chol.solve(&rhs);
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let spread = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(Error::NumericalSingularity)?;
        let scale = state.sigma2.sqrt();
        for (r, j) in active.iter().enumerate() {
            beta[*j] = mean[r] + scale * spread[r];
        }
        Ok(beta)
    }

    /// Posterior inclusion probability of coordinate j given the rest of the
    /// state, with the coefficient integrated out. Computed in log space.
    pub fn inclusion_probability(&self, state: &GibbsState, j: usize) -> f64 {
        let s_j = self.gram[(j, j)];
        let mut gb_j = 0.0;
        for k in 0..self.p {
            gb_j += self.gram[(j, k)] * state.beta[k];
        }
        // x_j . z where z is the residual excluding coordinate j's own term.
        let u = self.xty[j] - gb_j + s_j * state.beta[j] + self.penalty.pi_shift[j];
        let denom = s_j + 1.0 / state.tau2;
        let k_term = u * u / (2.0 * state.sigma2 * denom);
        let logit = state.theta.ln() - (1.0 - state.theta).ln()
            + 0.5 * ((state.sigma2 / denom).ln() - (state.sigma2 * state.tau2).ln())
            + k_term;
        sigmoid(logit)
    }

    /// Sequential inclusion scan. Each draw takes effect immediately: a
    /// deactivated coordinate has its coefficient zeroed, which changes the
    /// residual seen by later coordinates. A pinned intercept is skipped.
    pub fn scan_pi(&self, state: &mut GibbsState, rng: &mut ChaCha8Rng) {
        for j in 0..self.p {
            if self.intercept == Some(j) {
                state.pi[j] = true;
                continue;
            }
            let zeta = self.inclusion_probability(state, j);
            let active = rng.random_bool(zeta);
            state.pi[j] = active;
            if !active {
                state.beta[j] = 0.0;
            }
        }
    }

    /// One full sweep in the fixed order: pi scan, beta, theta, tau2, sigma2.
    pub fn sweep(&self, state: &mut GibbsState, rng: &mut ChaCha8Rng) -> Result<()> {
        self.scan_pi(state, rng);
        state.beta = self.sample_beta(state, rng)?;
        state.theta = self.sample_theta(state, rng);
        state.tau2 = self.sample_tau2(state, rng);
        state.sigma2 = self.sample_sigma2(state, rng);
        Ok(())
    }

    /// Run burn-in plus retained sweeps from the seed in the hyperparameters.
    pub fn run(&self) -> Result<PosteriorDraws> {
        let mut rng = seed::rng_for(self.hyper.seed, "spike-slab-chain", b"");
        let mut state = self.initial_state();
        for _ in 0..self.hyper.burn_in {
            self.sweep(&mut state, &mut rng)?;
        }
        let t = self.hyper.draws;
        let mut beta = DMatrix::zeros(t, self.p);
        let mut pi = DMatrix::zeros(t, self.p);
        let mut theta = Vec::with_capacity(t);
        let mut tau2 = Vec::with_capacity(t);
        let mut sigma2 = Vec::with_capacity(t);
        for row in 0..t {
            self.sweep(&mut state, &mut rng)?;
            for j in 0..self.p {
                beta[(row, j)] = state.beta[j];
                pi[(row, j)] = u8::from(state.pi[j]);
            }
            theta.push(state.theta);
            tau2.push(state.tau2);
            sigma2.push(state.sigma2);
        }
        Ok(PosteriorDraws {
            beta,
            pi,
            theta,
            tau2,
            sigma2,
            columns: self.names.clone(),
            hyper: self.hyper.clone(),
        })
    }
}

/// InvGamma(shape, rate) draw via the reciprocal of a gamma variate, clamped
/// away from 0 and infinity.
fn inverse_gamma(shape: f64, rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    let gamma = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    let g: f64 = gamma.sample(rng);
    (1.0 / g).clamp(VARIANCE_FLOOR, VARIANCE_CEIL)
}

/// Plain spike-and-slab run.
pub fn run_gibbs(x: &DesignMatrix, y: &DVector<f64>, hyper: &SpikeSlabHyper) -> Result<PosteriorDraws> {
    SpikeSlabSampler::new(x, y, hyper)?.run()
}

/// Retained draws of every sampled quantity, one row per sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    /// draws x p coefficient values; exactly 0 where `pi` is 0.
    pub beta: DMatrix<f64>,
    /// draws x p inclusion indicators.
    pub pi: DMatrix<u8>,
    pub theta: Vec<f64>,
    pub tau2: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub columns: Vec<String>,
    pub hyper: SpikeSlabHyper,
}

/// Posterior summary of one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub mean: f64,
    pub inclusion_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// JSON-friendly summary of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub coefficients: Vec<CoefficientSummary>,
    pub theta_mean: f64,
    pub tau2_mean: f64,
    pub sigma2_mean: f64,
    pub draws: usize,
    pub hyper: SpikeSlabHyper,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn require_draws(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDraws);
        }
        Ok(())
    }

    /// Marginal posterior means, zeros included.
    pub fn posterior_mean_coefficients(&self) -> Result<DVector<f64>> {
        self.require_draws()?;
        let t = self.len() as f64;
        Ok(DVector::from_iterator(
            self.beta.ncols(),
            self.beta.column_iter().map(|c| c.sum() / t),
        ))
    }

    /// Per-coordinate inclusion frequencies.
    pub fn inclusion_probabilities(&self) -> Result<DVector<f64>> {
        self.require_draws()?;
        let t = self.len() as f64;
        Ok(DVector::from_iterator(
            self.pi.ncols(),
            self.pi.column_iter().map(|c| c.iter().map(|v| f64::from(*v)).sum::<f64>() / t),
        ))
    }

    /// Central credible interval per coefficient at the given level.
    pub fn credible_intervals(&self, level: f64) -> Result<Vec<(f64, f64)>> {
        self.require_draws()?;
        if !(0.0 < level && level < 1.0) {
            return Err(Error::InvalidSpec(format!("credible level {level} outside (0, 1)")));
        }
        let tail = (1.0 - level) / 2.0;
        let mut out = Vec::with_capacity(self.beta.ncols());
        for c in self.beta.column_iter() {
            let col: Vec<f64> = c.iter().copied().collect();
            out.push((quantile(&col, tail)?, quantile(&col, 1.0 - tail)?));
        }
        Ok(out)
    }

    pub fn summary(&self) -> Result<PosteriorSummary> {
        let means = self.posterior_mean_coefficients()?;
        let incl = self.inclusion_probabilities()?;
        let cis = self.credible_intervals(0.95)?;
        let t = self.len() as f64;
        let coefficients = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, name)| CoefficientSummary {
                name: name.clone(),
                mean: means[j],
                inclusion_probability: incl[j],
                ci_low: cis[j].0,
                ci_high: cis[j].1,
            })
            .collect();
        Ok(PosteriorSummary {
            coefficients,
            theta_mean: self.theta.iter().sum::<f64>() / t,
            tau2_mean: self.tau2.iter().sum::<f64>() / t,
            sigma2_mean: self.sigma2.iter().sum::<f64>() / t,
            draws: self.len(),
            hyper: self.hyper.clone(),
        })
    }

    /// Columnar CSV, one row per retained draw. Floats are written in Rust's
    /// shortest round-trip form, so reading the file back reproduces the
    /// draws bit for bit.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["draw".to_string(), "theta".into(), "tau2".into(), "sigma2".into()];
        header.extend(self.columns.iter().map(|c| format!("beta:{c}")));
        header.extend(self.columns.iter().map(|c| format!("pi:{c}")));
        w.write_record(&header)?;
        for row in 0..self.len() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(row.to_string());
            rec.push(format!("{}", self.theta[row]));
            rec.push(format!("{}", self.tau2[row]));
            rec.push(format!("{}", self.sigma2[row]));
            for j in 0..self.beta.ncols() {
                rec.push(format!("{}", self.beta[(row, j)]));
            }
            for j in 0..self.pi.ncols() {
                rec.push(self.pi[(row, j)].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of `write_csv`. The hyperparameters are not stored in the CSV
    /// and must be supplied by the caller.
    pub fn read_csv<R: Read>(input: R, hyper: SpikeSlabHyper) -> Result<PosteriorDraws> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let fields: Vec<&str> = header.iter().collect();
        if fields.len() < 4 || fields[..4] != ["draw", "theta", "tau2", "sigma2"] {
            return Err(Error::SchemaMismatch {
                path: "<draws csv>".into(),
                detail: "expected columns draw, theta, tau2, sigma2, beta:*, pi:*".into(),
            });
        }
        let columns: Vec<String> = fields[4..]
            .iter()
            .take_while(|f| f.starts_with("beta:"))
            .map(|f| f["beta:".len()..].to_string())
            .collect();
        let p = columns.len();
        if fields.len() != 4 + 2 * p {
            return Err(Error::SchemaMismatch {
                path: "<draws csv>".into(),
                detail: format!("expected {} columns, found {}", 4 + 2 * p, fields.len()),
            });
        }
        for (j, name) in columns.iter().enumerate() {
            let expect = format!("pi:{name}");
            if fields[4 + p + j] != expect {
                return Err(Error::SchemaMismatch {
                    path: "<draws csv>".into(),
                    detail: format!("expected column '{expect}', found '{}'", fields[4 + p + j]),
                });
            }
        }
        let mut theta = Vec::new();
        let mut tau2 = Vec::new();
        let mut sigma2 = Vec::new();
        let mut beta_rows: Vec<f64> = Vec::new();
        let mut pi_rows: Vec<u8> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |idx: usize, field: &str| -> Result<f64> {
                rec.get(idx)
                    .ok_or_else(|| Error::RowParseError {
                        row: i + 1,
                        field: field.into(),
                        detail: "missing".into(),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::RowParseError {
                        row: i + 1,
                        field: field.into(),
                        detail: e.to_string(),
                    })
            };
            theta.push(parse(1, "theta")?);
            tau2.push(parse(2, "tau2")?);
            sigma2.push(parse(3, "sigma2")?);
            for (j, name) in columns.iter().enumerate() {
                beta_rows.push(parse(4 + j, &format!("beta:{name}"))?);
            }
            for (j, name) in columns.iter().enumerate() {
                let v = parse(4 + p + j, &format!("pi:{name}"))?;
                pi_rows.push(v as u8);
            }
        }
        let t = theta.len();
        Ok(PosteriorDraws {
            beta: DMatrix::from_row_slice(t, p, &beta_rows),
            pi: DMatrix::from_row_slice(t, p, &pi_rows),
            theta,
            tau2,
            sigma2,
            columns,
            hyper,
        })
    }
}
