//! Small numeric helpers shared by the samplers, estimators, and tests.

use crate::error::{Error, Result};

/// Arithmetic mean. Errors on empty input.
pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased sample variance (n - 1 denominator). Errors if n < 2.
pub fn sample_variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let m = mean(xs)?;
    let ss = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    Ok(ss / (xs.len() - 1) as f64)
}

/// Sample standard deviation.
pub fn sample_sd(xs: &[f64]) -> Result<f64> {
    Ok(sample_variance(xs)?.sqrt())
}

/// Population variance (n denominator), as used by standardization.
pub fn population_variance(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = mean(xs)?;
    Ok(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

/// Linearly interpolated quantile, q in [0, 1]. Sorts a copy of the input.
pub fn quantile(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidSpec(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN input"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Numerically stable logistic function; never returns exactly 0 or 1 for
/// finite input of moderate magnitude, and saturates cleanly otherwise.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of `sigmoid`; p must lie strictly inside (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN input"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN input"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN input"));
    // The supremum of |F_a - F_b| is attained at a sample point, so
    // evaluating both right-continuous ECDFs over the merged support of the
    // two samples is exact.
    let mut merged = Vec::with_capacity(sa.len() + sb.len());
    merged.extend_from_slice(&sa);
    merged.extend_from_slice(&sb);
    merged.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN input"));
    let ecdf = |s: &[f64], t: f64| -> f64 {
        let k = s.partition_point(|v| *v <= t);
        k as f64 / s.len() as f64
    };
    let mut d: f64 = 0.0;
    for t in &merged {
        d = d.max((ecdf(&sa, *t) - ecdf(&sb, *t)).abs());
    }
    Ok(d)
}

/// Large-sample Kolmogorov-Smirnov critical coefficient at significance 0.01.
pub const KS_COEF_001: f64 = 1.62762;

/// One-sample KS critical value at significance 0.01.
pub fn ks_one_sample_critical(n: usize) -> f64 {
    KS_COEF_001 / (n as f64).sqrt()
}

/// Two-sample KS critical value at significance 0.01.
pub fn ks_two_sample_critical(n: usize, m: usize) -> f64 {
    KS_COEF_001 * (((n + m) as f64) / (n as f64 * m as f64)).sqrt()
}
