//! Two-proportion effect sizes and 2x2 contingency tests.
//!
//! Cohen's h uses the arcsine-transform definition
//! `h = 2*asin(sqrt(p1)) - 2*asin(sqrt(p2))`, the confidence interval the
//! normal approximation `h +/- z*sqrt(1/n1 + 1/n2)`, and the chi-square
//! p-value the 1-df survival function `p = erfc(sqrt(x/2))`.
//!
//! The Pearson statistic is computed in integer arithmetic while the counts
//! allow it, so that it is bit-for-bit invariant under row and column swaps
//! of the table.

use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

/// z for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_964;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid counts: {x} successes out of {n} trials")]
    InvalidCounts { x: u64, n: u64 },
    #[error("degenerate table: a row or column margin is zero")]
    DegenerateTable,
}

/// Cohen's h for a pair of proportions with its 95% confidence interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EffectSize {
    pub h: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n1: u64,
    pub n2: u64,
}

/// Pearson chi-square statistic for a 2x2 table with its 1-df p-value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p_value: f64,
    pub yates: bool,
}

fn check_counts(x: u64, n: u64) -> Result<(), StatsError> {
    if n == 0 || x > n {
        return Err(StatsError::InvalidCounts { x, n });
    }
    Ok(())
}

/// Arcsine transform `phi = 2*asin(sqrt(p))`.
fn phi(x: u64, n: u64) -> f64 {
    2.0 * (x as f64 / n as f64).sqrt().asin()
}

/// Cohen's h: `2*asin(sqrt(x1/n1)) - 2*asin(sqrt(x2/n2))`.
pub fn cohens_h(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<f64, StatsError> {
    check_counts(x1, n1)?;
    check_counts(x2, n2)?;
    Ok(phi(x1, n1) - phi(x2, n2))
}

/// Normal-approximation confidence interval `h +/- z*sqrt(1/n1 + 1/n2)`.
pub fn cohens_h_ci(
    x1: u64,
    n1: u64,
    x2: u64,
    n2: u64,
    z: f64,
) -> Result<(f64, f64), StatsError> {
    let h = cohens_h(x1, n1, x2, n2)?;
    let half_width = z * (1.0 / n1 as f64 + 1.0 / n2 as f64).sqrt();
    Ok((h - half_width, h + half_width))
}

/// Cohen's h with its 95% interval, bundled.
pub fn effect_size(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<EffectSize, StatsError> {
    let h = cohens_h(x1, n1, x2, n2)?;
    let (ci_low, ci_high) = cohens_h_ci(x1, n1, x2, n2, Z_95)?;
    Ok(EffectSize {
        h,
        ci_low,
        ci_high,
        n1,
        n2,
    })
}

/// Survival function of the 1-df chi-square distribution.
///
/// `p(0) = 1`, strictly decreasing in the statistic.
pub fn chi_square_p_value(statistic: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    erfc((statistic / 2.0).sqrt())
}

/// Pearson chi-square test on the 2x2 table `[[a, b], [c, d]]`.
///
/// With `yates`, `|ad - bc|` is replaced by `max(|ad - bc| - N/2, 0)`.
pub fn chi_square_2x2(
    a: u64,
    b: u64,
    c: u64,
    d: u64,
    yates: bool,
) -> Result<ChiSquareResult, StatsError> {
    let row1 = a + b;
    let row2 = c + d;
    let col1 = a + c;
    let col2 = b + d;
    if row1 == 0 || row2 == 0 || col1 == 0 || col2 == 0 {
        return Err(StatsError::DegenerateTable);
    }
    let n = row1 + row2;
    let det_abs = (i128::from(a) * i128::from(d) - i128::from(b) * i128::from(c)).unsigned_abs();

    let statistic = if yates {
        // Work in halves so the N/2 correction stays integral.
        let adjusted2 = (2 * det_abs).saturating_sub(u128::from(n));
        ratio(u128::from(n), adjusted2, adjusted2, row1, row2, col1, col2)
            .map(|r| r / 4.0)
            .unwrap_or_else(|| {
                let adj = (det_abs as f64 * 2.0 - n as f64).max(0.0) / 2.0;
                ratio_f64(n, adj, row1, row2, col1, col2)
            })
    } else {
        ratio(u128::from(n), det_abs, det_abs, row1, row2, col1, col2)
            .unwrap_or_else(|| ratio_f64(n, det_abs as f64, row1, row2, col1, col2))
    };

    Ok(ChiSquareResult {
        statistic,
        p_value: chi_square_p_value(statistic),
        yates,
    })
}

/// `n * u * v / (row1 * row2 * col1 * col2)` in exact integer arithmetic.
///
/// Returns None when the numerator overflows u128 (astronomical counts);
/// callers then fall back to the f64 path.
fn ratio(
    n: u128,
    u: u128,
    v: u128,
    row1: u64,
    row2: u64,
    col1: u64,
    col2: u64,
) -> Option<f64> {
    let numerator = n.checked_mul(u)?.checked_mul(v)?;
    let denominator = u128::from(row1)
        .checked_mul(u128::from(row2))?
        .checked_mul(u128::from(col1))?
        .checked_mul(u128::from(col2))?;
    Some(numerator as f64 / denominator as f64)
}

fn ratio_f64(n: u64, det_abs: f64, row1: u64, row2: u64, col1: u64, col2: u64) -> f64 {
    let denominator = row1 as f64 * row2 as f64 * col1 as f64 * col2 as f64;
    n as f64 * det_abs * det_abs / denominator
}
