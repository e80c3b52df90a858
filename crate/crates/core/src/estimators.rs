//! Finite-time estimators of the limiting objects of a grown tree.
//!
//! At time `t` the quantities below are the natural plug-ins:
//! `theta_hat(x) = exp(-lambda (t - sigma_x)) |G_x|`, `delta_hat(x) = |G_x| / |G|`,
//! and the level measure puts mass proportional to `|G_x|` on the vertices
//! of one generation. Every output records the time, tree size and level it
//! was computed at.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{subtree_sizes, TimeKind, TreeRealization};

/// Coverage below which a level measure is considered under-grown.
pub const MIN_COVERAGE: f64 = 0.99;

/// `exp(-lambda (t - sigma_x)) |G_x(t)|` at the tree's clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub vertex: usize,
    pub value: f64,
    pub t: f64,
}

fn check_rate(lambda: f64) -> Result<()> {
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

fn require_continuous(tree: &TreeRealization) -> Result<()> {
    match tree.time_kind() {
        TimeKind::Continuous => Ok(()),
        TimeKind::Discrete => Err(Error::DiscreteTime),
    }
}

/// `|G_x|` by walking the subtree of `x` only.
pub fn subtree_size(tree: &TreeRealization, x: usize) -> Result<u64> {
    tree.check_vertex(x)?;
    let mut count = 0u64;
    let mut stack = vec![x];
    while let Some(v) = stack.pop() {
        count += 1;
        stack.extend(tree.children(v));
    }
    Ok(count)
}

/// Normalised subtree size of `x` given `|G_x|`.
pub fn theta_from_size(tree: &TreeRealization, lambda: f64, x: usize, size: u64) -> f64 {
    (-lambda * (tree.clock() - tree.birth_time(x))).exp() * size as f64
}

pub fn theta_hat(tree: &TreeRealization, lambda: f64, x: usize) -> Result<ThetaEstimate> {
    check_rate(lambda)?;
    require_continuous(tree)?;
    let size = subtree_size(tree, x)?;
    Ok(ThetaEstimate {
        vertex: x,
        value: theta_from_size(tree, lambda, x, size),
        t: tree.clock(),
    })
}

/// Fraction of the tree descending from `x`, `|G_x| / |G|`.
pub fn delta_hat(tree: &TreeRealization, x: usize) -> Result<f64> {
    Ok(subtree_size(tree, x)? as f64 / tree.len() as f64)
}

/// Normalised subtree sizes over one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMeasure {
    pub level: usize,
    /// `(vertex id, weight)` in id order.
    pub entries: Vec<(usize, f64)>,
    /// `sum over |y| = level of |G_y|`.
    pub normalization: u64,
    /// `normalization / |G|`: the share of the tree below this level.
    pub coverage: f64,
    pub tree_size: usize,
    pub t: f64,
}

impl LevelMeasure {
    pub fn weight_of(&self, vertex: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&vertex, |&(v, _)| v)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Shannon entropy in nats, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        self.entries
            .iter()
            .filter(|&&(_, p)| p > 0.0)
            .map(|&(_, p)| -p * p.ln())
            .sum()
    }
}

pub fn level_measure(tree: &TreeRealization, n: usize) -> Result<LevelMeasure> {
    level_measure_with_sizes(tree, &subtree_sizes(tree), n)
}

/// [`level_measure`] reusing sizes from [`subtree_sizes`].
pub fn level_measure_with_sizes(
    tree: &TreeRealization,
    sizes: &[u64],
    n: usize,
) -> Result<LevelMeasure> {
    debug_assert_eq!(sizes.len(), tree.len());
    let level = tree.level(n);
    if level.is_empty() {
        return Err(Error::EmptyLevel(n));
    }
    let normalization: u64 = level.iter().map(|&v| sizes[v]).sum();
    let total = normalization as f64;
    let entries = level
        .into_iter()
        .map(|v| (v, sizes[v] as f64 / total))
        .collect();
    Ok(LevelMeasure {
        level: n,
        entries,
        normalization,
        coverage: total / tree.len() as f64,
        tree_size: tree.len(),
        t: tree.clock(),
    })
}

/// Entropy of one level measure and its per-generation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub level: usize,
    /// `H_n`, nats.
    pub entropy: f64,
    /// `H_n / n`.
    pub h_hat: f64,
    pub coverage: f64,
    pub tree_size: usize,
    pub t: f64,
}

impl EntropyEstimate {
    pub fn from_measure(measure: &LevelMeasure) -> Result<Self> {
        if measure.level == 0 {
            return Err(Error::Domain {
                name: "level",
                range: "[1, inf)",
                value: 0.0,
            });
        }
        let entropy = measure.entropy();
        Ok(Self {
            level: measure.level,
            entropy,
            h_hat: entropy / measure.level as f64,
            coverage: measure.coverage,
            tree_size: measure.tree_size,
            t: measure.t,
        })
    }

    pub fn is_covered(&self) -> bool {
        self.coverage >= MIN_COVERAGE
    }
}

pub fn entropy_estimate(tree: &TreeRealization, n: usize) -> Result<EntropyEstimate> {
    EntropyEstimate::from_measure(&level_measure(tree, n)?)
}

/// `sum over born |x| = n of exp(-lambda sigma_x)`.
pub fn t_weight_level_sum(tree: &TreeRealization, lambda: f64, n: usize) -> Result<f64> {
    check_rate(lambda)?;
    require_continuous(tree)?;
    Ok((0..tree.len())
        .filter(|&v| tree.depth(v) == n)
        .map(|v| (-lambda * tree.birth_time(v)).exp())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{grow_continuous, grow_discrete, Stop};
    use crate::malthus::WeightFunction;
    use crate::rng::SeedSpec;

    fn binary() -> WeightFunction {
        WeightFunction::new(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn theta_of_fresh_root_is_one() {
        let tree = grow_continuous(&binary(), Stop::Size(1), SeedSpec::new(0, 0)).unwrap();
        let theta = theta_hat(&tree, 0.618, 0).unwrap();
        assert_eq!(theta.value, 1.0);
        assert_eq!(theta.t, 0.0);
        assert!(matches!(
            theta_hat(&tree, 0.618, 3),
            Err(Error::MissingVertex(3))
        ));
        assert!(theta_hat(&tree, 0.0, 0).is_err());
    }

    #[test]
    fn discrete_trees_have_no_theta() {
        let tree = grow_discrete(&binary(), 10, SeedSpec::new(0, 0)).unwrap();
        assert_eq!(theta_hat(&tree, 0.6, 0), Err(Error::DiscreteTime));
        assert_eq!(t_weight_level_sum(&tree, 0.6, 1), Err(Error::DiscreteTime));
    }

    #[test]
    fn delta_examples() {
        let cherry = TreeRealization::from_shape(binary(), &[2, 0, 0]).unwrap();
        assert_eq!(delta_hat(&cherry, 0).unwrap(), 1.0);
        assert!((delta_hat(&cherry, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(delta_hat(&cherry, 9).is_err());

        let tree = grow_continuous(&binary(), Stop::Size(400), SeedSpec::new(3, 0)).unwrap();
        let n = tree.len() as f64;
        for x in 0..tree.len() {
            let children: f64 = tree.children(x).map(|c| delta_hat(&tree, c).unwrap()).sum();
            assert!((children - (delta_hat(&tree, x).unwrap() - 1.0 / n)).abs() < 1e-12);
        }
    }

    #[test]
    fn level_measure_examples() {
        let cherry = TreeRealization::from_shape(binary(), &[2, 0, 0]).unwrap();
        let m = level_measure(&cherry, 1).unwrap();
        assert_eq!(m.entries, vec![(1, 0.5), (2, 0.5)]);
        assert!((m.coverage - 2.0 / 3.0).abs() < 1e-15);

        let chain = TreeRealization::chain(binary(), 2);
        let m = level_measure(&chain, 1).unwrap();
        assert_eq!(m.entries, vec![(1, 1.0)]);
        assert_eq!(m.weight_of(1), Some(1.0));
        assert_eq!(m.weight_of(2), None);

        assert_eq!(level_measure(&chain, 3), Err(Error::EmptyLevel(3)));
    }

    #[test]
    fn entropy_examples() {
        let complete = TreeRealization::complete(binary(), 6);
        for n in 1..=6 {
            let e = entropy_estimate(&complete, n).unwrap();
            assert!((e.entropy - n as f64 * 2f64.ln()).abs() < 1e-12);
            assert!((e.h_hat - 2f64.ln()).abs() < 1e-12);
        }
        let chain = TreeRealization::chain(binary(), 4);
        assert_eq!(entropy_estimate(&chain, 3).unwrap().entropy, 0.0);
        assert!(entropy_estimate(&chain, 0).is_err());
    }

    #[test]
    fn t_weight_examples() {
        let tree = grow_continuous(&binary(), Stop::Time(3.0), SeedSpec::new(1, 0)).unwrap();
        assert_eq!(t_weight_level_sum(&tree, 0.618, 0).unwrap(), 1.0);
        if tree.len() > 1 {
            assert!(t_weight_level_sum(&tree, 1e12, 1).unwrap() < 1e-12);
        }
    }
}
