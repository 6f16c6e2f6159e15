//! Location tests against Monte-Carlo samples, paired comparisons across
//! treatments, and simple linear regression.

mod tdist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use tdist::{ln_gamma, regularized_beta, student_t_cdf, student_t_sf};

/// Alternative hypothesis of a location test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TwoSided,
    /// Mean exceeds the reference.
    Greater,
    /// Mean falls below the reference.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: f64,
    pub n: usize,
    pub direction: Direction,
}

fn p_value(t: f64, dof: f64, direction: Direction) -> f64 {
    let p = match direction {
        Direction::Greater => student_t_sf(t, dof),
        Direction::Less => student_t_cdf(t, dof),
        Direction::TwoSided => 2.0 * student_t_sf(t.abs(), dof),
    };
    p.clamp(0.0, 1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Classical one-sample t-test of the sample mean against `reference`.
///
/// Identical samples equal to the reference give `t = 0, p = 1`; identical
/// samples away from it are a [`Error::ZeroVariance`].
pub fn one_sample_t(samples: &[f64], reference: f64, direction: Direction) -> Result<TestResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let m = mean(samples);
    let var = sample_variance(samples, m);
    let dof = (n - 1) as f64;
    if var == 0.0 {
        if m == reference {
            return Ok(TestResult {
                statistic: 0.0,
                p_value: 1.0,
                dof,
                n,
                direction,
            });
        }
        return Err(Error::ZeroVariance { mean: m, reference });
    }
    let statistic = (m - reference) / (var / n as f64).sqrt();
    Ok(TestResult {
        statistic,
        p_value: p_value(statistic, dof, direction),
        dof,
        n,
        direction,
    })
}

/// Paired t-test: a one-sample test of `x − y` against zero.
pub fn paired_t(x: &[f64], y: &[f64], direction: Direction) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    one_sample_t(&diffs, 0.0, direction)
}

/// Two-sample Welch t-test with Satterthwaite degrees of freedom.
pub fn welch_t(x: &[f64], y: &[f64], direction: Direction) -> Result<TestResult> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (
        sample_variance(x, mx) / x.len() as f64,
        sample_variance(y, my) / y.len() as f64,
    );
    let se2 = vx + vy;
    if se2 == 0.0 {
        return Err(Error::ZeroVariance {
            mean: mx,
            reference: my,
        });
    }
    let statistic = (mx - my) / se2.sqrt();
    let dof = se2 * se2 / (vx * vx / (x.len() - 1) as f64 + vy * vy / (y.len() - 1) as f64);
    Ok(TestResult {
        statistic,
        p_value: p_value(statistic, dof, direction),
        dof,
        n: x.len() + y.len(),
        direction,
    })
}

/// Fraction of samples strictly below `value`, plus half the ties.
pub fn percentile_of(samples: &[f64], value: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let below = samples.iter().filter(|&&s| s < value).count();
    let ties = samples.iter().filter(|&&s| s == value).count();
    Ok((below as f64 + 0.5 * ties as f64) / samples.len() as f64)
}

/// Monte-Carlo upper-tail p-value `(1 + #{s ≥ value}) / (n + 1)`.
pub fn monte_carlo_p_upper(samples: &[f64], value: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let at_least = samples.iter().filter(|&&s| s >= value).count();
    Ok((1 + at_least) as f64 / (samples.len() + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Least-squares line `y = slope·x + intercept`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateX);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sst: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let sigma2 = ssr / (n - 2) as f64;
    let r_squared = if sst == 0.0 {
        0.0
    } else {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    };
    Ok(OlsFit {
        slope,
        intercept,
        slope_stderr: (sigma2 / sxx).sqrt(),
        intercept_stderr: (sigma2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt(),
        r_squared,
        n,
    })
}
