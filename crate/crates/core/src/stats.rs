//! Goodness-of-fit tests and summary statistics used by the checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Smallest expected count allowed in a chi-square cell before merging.
pub const MIN_EXPECTED: f64 = 5.0;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation / sqrt(n)).
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn from_slice(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                count,
            };
        }
        let mean = xs.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, count }
    }

    /// `|mean - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Pearson chi-square goodness-of-fit result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells left after merging sparse ones.
    pub cells: usize,
}

impl ChiSquareTest {
    /// A single cell carries no information: every sample matches.
    pub fn is_degenerate(&self) -> bool {
        self.cells <= 1
    }
}

/// Pearson test of `observed` counts against cell probabilities `probs`.
///
/// Cells whose expected count is below [`MIN_EXPECTED`] are pooled,
/// smallest first, until the pool reaches it (the pool is then folded into
/// the smallest remaining cell if still short). Zero-probability cells are
/// dropped; an observation in one makes the statistic infinite.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probs.len() {
        return Err(Error::SizeMismatch {
            expected: probs.len(),
            got: observed.len(),
        });
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::TooFewSamples("chi-square test needs observations"));
    }
    let total = n as f64;
    if observed.iter().zip(probs).any(|(&o, &p)| o > 0 && p <= 0.0) {
        return Ok(ChiSquareTest {
            statistic: f64::INFINITY,
            dof: observed.len().saturating_sub(1),
            p_value: 0.0,
            cells: observed.len(),
        });
    }

    let mut cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| (o as f64, p * total))
        .collect();
    cells.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(cells.len());
    let mut pool = (0.0, 0.0);
    let mut pooling = false;
    for (o, e) in cells {
        if e < MIN_EXPECTED || (pooling && pool.1 < MIN_EXPECTED) {
            pool.0 += o;
            pool.1 += e;
            pooling = true;
        } else {
            merged.push((o, e));
        }
    }
    if pooling {
        if pool.1 >= MIN_EXPECTED || merged.is_empty() {
            merged.push(pool);
        } else {
            merged[0].0 += pool.0;
            merged[0].1 += pool.1;
        }
    }

    let statistic: f64 = merged.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let cells = merged.len();
    let dof = cells.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        dist.sf(statistic)
    };
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
        cells,
    })
}

/// Two-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges poorly here; the value is 1 to
        // double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test with the asymptotic p-value (Stephens' small-sample
/// correction). Ties are handled by stepping through equal values together,
/// which makes the test conservative for discrete data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples("KS test needs two non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let p_value = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    Ok(KsTest {
        statistic: d,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se() {
        let m = MeanSe::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(m.within(2.0, 1.0));
        assert!(!m.within(4.0, 2.0));
    }

    #[test]
    fn chi_square_known_value() {
        // 3 cells, statistic = 4/25 + 4/25 + 0 = 0.32 on 2 dof: p = exp(-0.16)
        let t = chi_square_gof(&[27, 23, 50], &[0.25, 0.25, 0.5]).unwrap();
        assert!((t.statistic - 0.32).abs() < 1e-12);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - (-0.16f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn chi_square_merges_sparse_cells() {
        let t = chi_square_gof(&[98, 1, 1], &[0.98, 0.01, 0.01]).unwrap();
        assert_eq!(t.cells, 1);
        assert!(t.is_degenerate());
        assert_eq!(t.p_value, 1.0);
        let t = chi_square_gof(&[50, 0, 0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn chi_square_impossible_cell() {
        let t = chi_square_gof(&[40, 40, 1], &[0.5, 0.5, 0.0]).unwrap();
        assert!(t.statistic.is_infinite());
        assert_eq!(t.p_value, 0.0);
        assert!(chi_square_gof(&[1, 2], &[1.0]).is_err());
    }

    #[test]
    fn kolmogorov_reference_points() {
        // tabulated: Q(1.36) ~= 0.0495, Q(1.63) ~= 0.0098
        assert!((kolmogorov_sf(1.36) - 0.0495).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 2e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let t = ks_two_sample(&a, &a).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        let t = ks_two_sample(&a, &b).unwrap();
        assert_eq!(t.statistic, 1.0);
        assert!(t.p_value < 1e-10);
    }
}
