//! Exact analytics of the growth model.
//!
//! Everything here is a pure function of the [`WeightFunction`]: the
//! Laplace-type transform `rho_hat` of the first-generation birth times,
//! its derivative, the Malthusian parameter (the unique root of
//! `rho_hat(lambda) = 1`), and the closed-form entropy and dimension of the
//! limiting leaf measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default residual tolerance for [`solve_malthusian`].
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 10_000;

/// Birth rates indexed by current number of children.
///
/// `rate(j)` is the rate at which a vertex that already has `j` children
/// produces child `j + 1`. A vertex with `max_children()` children stops
/// reproducing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightFunction {
    rates: Vec<f64>,
}

impl WeightFunction {
    /// Builds a weight function with `K = rates.len()`.
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::TooFewChildren(rates.len()));
        }
        if rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(Self { rates })
    }

    /// Builds a weight function and checks the declared `K` against the rates.
    pub fn with_k(k: usize, rates: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewChildren(k));
        }
        if rates.len() != k {
            return Err(Error::WeightCount {
                expected: k,
                got: rates.len(),
            });
        }
        Self::new(rates)
    }

    /// `K`, the maximal number of children.
    #[inline]
    pub fn max_children(&self) -> usize {
        self.rates.len()
    }

    /// Birth rate of a vertex with `degree` children; zero once saturated.
    #[inline]
    pub fn rate(&self, degree: usize) -> f64 {
        self.rates.get(degree).copied().unwrap_or(0.0)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// The same model sped up by a factor `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.rates.iter().map(|r| r * c).collect())
    }
}

impl TryFrom<Vec<f64>> for WeightFunction {
    type Error = Error;

    fn try_from(rates: Vec<f64>) -> Result<Self> {
        Self::new(rates)
    }
}

impl From<WeightFunction> for Vec<f64> {
    fn from(w: WeightFunction) -> Self {
        w.rates
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "lambda",
            range: "(0, inf)",
            value: lambda,
        })
    }
}

/// `sum_{j=1..K} prod_{i<j} w(i) / (lambda + w(i))`.
pub fn rho_hat(w: &WeightFunction, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mut product = 1.0;
    let mut total = 0.0;
    for &rate in w.rates() {
        product *= rate / (lambda + rate);
        total += product;
    }
    Ok(total)
}

/// Derivative of [`rho_hat`] with respect to `lambda`. Always negative.
pub fn rho_hat_prime(w: &WeightFunction, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mut product = 1.0;
    let mut inv_sum = 0.0;
    let mut total = 0.0;
    for &rate in w.rates() {
        product *= rate / (lambda + rate);
        inv_sum += 1.0 / (lambda + rate);
        total += product * inv_sum;
    }
    Ok(-total)
}

/// Outcome of the Malthusian root search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalthusRoot {
    pub lambda: f64,
    /// `rho_hat(lambda) - 1`.
    pub residual: f64,
    pub iterations: usize,
}

/// Finds the unique `lambda > 0` with `rho_hat(lambda) = 1` by bisection.
///
/// The bracket starts at `[1e-12 * max w, max w]` and the upper end doubles
/// until `rho_hat` drops below one. Bisection stops once the residual is at
/// most `tol` and the bracket is narrower than `tol` relative to its
/// midpoint, or when the bracket can no longer shrink in double precision.
pub fn solve_malthusian(w: &WeightFunction, tol: f64) -> Result<MalthusRoot> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain {
            name: "tol",
            range: "(0, inf)",
            value: tol,
        });
    }
    let f = |lambda: f64| rho_hat(w, lambda).map(|r| r - 1.0);

    let mut lo = 1e-12 * w.max_rate();
    let mut hi = w.max_rate();
    let mut iterations = 0;
    while f(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
    }

    let mut best = (hi, f(hi)?);
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let r = f(mid)?;
        if r.abs() <= best.1.abs() {
            best = (mid, r);
        }
        if r > 0.0 {
            lo = mid;
        } else if r < 0.0 {
            hi = mid;
        } else {
            best = (mid, r);
            break;
        }
        if best.1.abs() <= tol && hi - lo <= tol * mid {
            break;
        }
    }
    Ok(MalthusRoot {
        lambda: best.0,
        residual: best.1,
        iterations,
    })
}

/// Closed-form entropy from an already solved Malthusian parameter:
/// `h = -lambda * rho_hat'(lambda)`.
pub fn entropy_at(w: &WeightFunction, lambda: f64) -> Result<f64> {
    Ok(-lambda * rho_hat_prime(w, lambda)?)
}

/// Entropy (nats) of the limiting leaf measure, solving for the Malthusian
/// parameter with [`DEFAULT_TOL`].
pub fn entropy_closed_form(w: &WeightFunction) -> Result<f64> {
    let root = solve_malthusian(w, DEFAULT_TOL)?;
    entropy_at(w, root.lambda)
}

fn check_contraction(a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "a",
            range: "(0, 1)",
            value: a,
        })
    }
}

/// Hausdorff (= packing) dimension for the leaf metric with contraction `a`.
pub fn hausdorff_dimension(w: &WeightFunction, a: f64) -> Result<f64> {
    check_contraction(a)?;
    Ok(entropy_closed_form(w)? / -a.ln())
}

/// Everything the `solve` command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalthusReport {
    pub lambda_star: f64,
    pub h: f64,
    pub dimension: f64,
    pub a: f64,
    /// `rho_hat(lambda_star) - 1`.
    pub rho_at_root: f64,
    pub iterations: usize,
}

impl MalthusReport {
    pub fn compute(w: &WeightFunction, a: f64, tol: f64) -> Result<Self> {
        check_contraction(a)?;
        let root = solve_malthusian(w, tol)?;
        let h = entropy_at(w, root.lambda)?;
        Ok(Self {
            lambda_star: root.lambda,
            h,
            dimension: h / -a.ln(),
            a,
            rho_at_root: root.residual,
            iterations: root.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN_LAMBDA: f64 = 0.618_033_988_749_894_8;
    const GOLDEN_H: f64 = 0.527_864_045_000_420_6;

    fn binary() -> WeightFunction {
        WeightFunction::new(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_invalid_weights() {
        assert_eq!(
            WeightFunction::new(vec![1.0]),
            Err(Error::TooFewChildren(1))
        );
        assert_eq!(
            WeightFunction::new(vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight)
        );
        assert_eq!(
            WeightFunction::new(vec![1.0, f64::NAN]),
            Err(Error::NonPositiveWeight)
        );
        assert!(matches!(
            WeightFunction::with_k(3, vec![1.0, 1.0]),
            Err(Error::WeightCount {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn rho_hat_examples() {
        let w = binary();
        assert!((rho_hat(&w, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((rho_hat(&w, 0.618_033_988_75).unwrap() - 1.0).abs() < 1e-9);
        assert!((rho_hat(&w, 1e-14).unwrap() - 2.0).abs() < 1e-12);
        assert!(rho_hat(&w, 0.0).is_err());
        assert!(rho_hat(&w, -1.0).is_err());
    }

    #[test]
    fn rho_hat_prime_examples() {
        let w = binary();
        assert!((rho_hat_prime(&w, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert!((rho_hat_prime(&w, 0.618_033_988_75).unwrap() + 0.854_101_966_25).abs() < 1e-9);
        let eps = 1e-6;
        let fd = (rho_hat(&w, 1.0 + eps).unwrap() - rho_hat(&w, 1.0 - eps).unwrap()) / (2.0 * eps);
        assert!((fd + 0.5).abs() < 1e-8);
        assert!(rho_hat_prime(&w, 0.0).is_err());
    }

    #[test]
    fn malthusian_examples() {
        let root = solve_malthusian(&binary(), DEFAULT_TOL).unwrap();
        assert!((root.lambda - GOLDEN_LAMBDA).abs() < 1e-12);
        assert!(root.residual.abs() <= DEFAULT_TOL);

        let scaled = WeightFunction::new(vec![3.5, 3.5]).unwrap();
        let root = solve_malthusian(&scaled, DEFAULT_TOL).unwrap();
        assert!((root.lambda - 3.5 * GOLDEN_LAMBDA).abs() < 1e-11);

        let ternary = WeightFunction::new(vec![1.0, 1.0, 1.0]).unwrap();
        let root = solve_malthusian(&ternary, DEFAULT_TOL).unwrap();
        assert!((root.lambda - 0.839_286_755_214_161_1).abs() < 1e-8);

        assert!(solve_malthusian(&binary(), 0.0).is_err());
    }

    #[test]
    fn entropy_and_dimension_examples() {
        let w = binary();
        let h = entropy_closed_form(&w).unwrap();
        assert!((h - GOLDEN_H).abs() < 1e-9);
        let hc = entropy_closed_form(&WeightFunction::new(vec![0.01, 0.01]).unwrap()).unwrap();
        assert!((hc - GOLDEN_H).abs() < 1e-9);

        let d = hausdorff_dimension(&w, (-1.0f64).exp()).unwrap();
        assert!((d - GOLDEN_H).abs() < 1e-9);
        let d = hausdorff_dimension(&w, 0.5).unwrap();
        assert!((d - 0.76155).abs() < 1e-4);
        let d = hausdorff_dimension(&w, (-h).exp()).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        assert!(hausdorff_dimension(&w, 1.0).is_err());
        assert!(hausdorff_dimension(&w, 0.0).is_err());
    }

    #[test]
    fn report_is_consistent() {
        let r = MalthusReport::compute(&binary(), 0.5, DEFAULT_TOL).unwrap();
        assert_eq!(r.dimension, r.h / -(0.5f64).ln());
        assert!(r.rho_at_root.abs() <= DEFAULT_TOL);
        assert!(r.h > 0.0 && r.h <= 2f64.ln());
    }
}
