//! Size-biased random leaf paths.
//!
//! A path starts at the root and, at a vertex `x`, steps to child `xi` with
//! probability `q(xi) = |G_xi| / (|G_x| - 1)`: the share of `x`'s strict
//! descendants that sit under `xi`. The fractions of one vertex's children
//! sum to one exactly, and the probability of reaching `y_n` is the
//! product of the fractions along the way. That product is the path
//! measure used by the ergodic entropy and local-dimension estimates; on a
//! large tree it differs from the level measure only through the vertices
//! shallower than `n`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::theta_from_size;
use crate::growth::{subtree_sizes, TimeKind, TreeRealization};
use crate::rng::{SeedSpec, SimRng};
use crate::stats::MeanSe;

/// A root-to-depth-`n` path `y_0 .. y_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafPath {
    /// `y_0 = root, ..., y_n`.
    pub vertices: Vec<usize>,
    /// `|G_{y_k}|` for every vertex on the path.
    pub subtree_sizes: Vec<u64>,
    /// `q(y_k)` for `k = 1..=n`.
    pub fractions: Vec<f64>,
    /// `sum_k log q(y_k)`.
    pub log_weight: f64,
}

impl LeafPath {
    pub fn depth(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().expect("path contains the root")
    }

    /// Path-measure weight of the end vertex, `exp(log_weight)`.
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    /// `-(1/n) log(weight)`, the per-generation information of the path.
    pub fn neg_log_weight_per_level(&self) -> f64 {
        -self.log_weight / self.depth() as f64
    }

    /// The weight from the integer sizes alone. Consecutive fractions share
    /// a size, so the product collapses to
    /// `|G_{y_n}| / (|G| - 1) * prod_{0<k<n} |G_{y_k}| / (|G_{y_k}| - 1)`.
    pub fn telescoped_log_weight(&self) -> f64 {
        let n = self.depth();
        let s = &self.subtree_sizes;
        if n == 0 {
            return 0.0;
        }
        (s[n] as f64).ln() - ((s[0] - 1) as f64).ln()
            + s[1..n]
                .iter()
                .map(|&x| (x as f64 / (x - 1) as f64).ln())
                .sum::<f64>()
    }
}

/// Samples paths on one fixed tree; subtree sizes are computed once.
pub struct LeafSampler<'a> {
    tree: &'a TreeRealization,
    sizes: Vec<u64>,
}

impl<'a> LeafSampler<'a> {
    pub fn new(tree: &'a TreeRealization) -> Self {
        Self {
            tree,
            sizes: subtree_sizes(tree),
        }
    }

    pub fn tree(&self) -> &TreeRealization {
        self.tree
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<LeafPath> {
        let tree = self.tree;
        let mut v = tree.root();
        let mut path = LeafPath {
            vertices: Vec::with_capacity(n + 1),
            subtree_sizes: Vec::with_capacity(n + 1),
            fractions: Vec::with_capacity(n),
            log_weight: 0.0,
        };
        path.vertices.push(v);
        path.subtree_sizes.push(self.sizes[v]);
        for depth in 0..n {
            let below = self.sizes[v] - 1;
            if below == 0 {
                return Err(Error::InsufficientGrowth {
                    vertex: v,
                    depth,
                    target: n,
                });
            }
            // integer draw: child i wins with probability |G_xi| / below
            let mut ticket = rng.random_range(0..below);
            let mut next = None;
            for c in tree.children(v) {
                if ticket < self.sizes[c] {
                    next = Some(c);
                    break;
                }
                ticket -= self.sizes[c];
            }
            let child = next.expect("children sizes sum to |G_x| - 1");
            let q = self.sizes[child] as f64 / below as f64;
            path.fractions.push(q);
            path.log_weight += q.ln();
            path.vertices.push(child);
            path.subtree_sizes.push(self.sizes[child]);
            v = child;
        }
        Ok(path)
    }

    /// Draws `count` paths that reach depth `n`, redrawing those that stop at
    /// a leaf above it. Returns the paths and the number of redraws; fails
    /// with [`Error::InsufficientGrowth`] once redraws exceed `max_dead_ends`.
    pub fn sample_reaching(
        &self,
        n: usize,
        count: usize,
        max_dead_ends: usize,
        rng: &mut SimRng,
    ) -> Result<(Vec<LeafPath>, usize)> {
        let mut paths = Vec::with_capacity(count);
        let mut dead_ends = 0;
        while paths.len() < count {
            match self.sample(n, rng) {
                Ok(path) => paths.push(path),
                Err(Error::InsufficientGrowth { .. }) if dead_ends < max_dead_ends => {
                    dead_ends += 1
                }
                Err(e) => return Err(e),
            }
        }
        Ok((paths, dead_ends))
    }

    /// Exact law of `y_n` under the path rule: `(vertex, probability)` for
    /// every depth-`n` vertex reachable with positive probability.
    pub fn end_distribution(&self, n: usize) -> Vec<(usize, f64)> {
        let tree = self.tree;
        let mut frontier = vec![(tree.root(), 1.0)];
        for _ in 0..n {
            let mut next = Vec::new();
            for (v, p) in frontier {
                let below = self.sizes[v] - 1;
                for c in tree.children(v) {
                    next.push((c, p * self.sizes[c] as f64 / below as f64));
                }
            }
            frontier = next;
        }
        frontier.sort_by_key(|&(v, _)| v);
        frontier
    }
}

pub fn sample_leaf_path(tree: &TreeRealization, n: usize, seed: SeedSpec) -> Result<LeafPath> {
    LeafSampler::new(tree).sample(n, &mut seed.rng())
}

/// Path average of `-(1/n) sum_k log q(y_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub level: usize,
    pub n_paths: usize,
    pub mean: f64,
    pub se: f64,
}

/// Ergodic entropy estimate: mean of `-(1/n) log weight(y_n)` over
/// `n_paths` independent paths on the same tree.
pub fn ergodic_entropy_estimate(
    tree: &TreeRealization,
    n: usize,
    n_paths: usize,
    seed: SeedSpec,
) -> Result<ErgodicEstimate> {
    if n == 0 || n_paths == 0 {
        return Err(Error::Domain {
            name: "level and path count",
            range: "[1, inf)",
            value: 0.0,
        });
    }
    let sampler = LeafSampler::new(tree);
    let mut rng = seed.rng();
    let values = (0..n_paths)
        .map(|_| {
            sampler
                .sample(n, &mut rng)
                .map(|p| p.neg_log_weight_per_level())
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = MeanSe::from_slice(&values);
    Ok(ErgodicEstimate {
        level: n,
        n_paths,
        mean: stats.mean,
        se: stats.se,
    })
}

/// `log weight(y_n) / (n log a)`: the finite-`n` local dimension at the
/// path's end, since the ball of radius `a^n` around a leaf is the cylinder
/// of its first `n` letters.
pub fn local_dimension_estimate(tree: &TreeRealization, path: &LeafPath, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain {
            name: "a",
            range: "(0, 1)",
            value: a,
        });
    }
    let n = path.depth();
    if n == 0 {
        return Err(Error::Domain {
            name: "path depth",
            range: "[1, inf)",
            value: 0.0,
        });
    }
    if path.vertices.iter().any(|&v| !tree.contains(v)) {
        return Err(Error::ForeignPath);
    }
    if !path.log_weight.is_finite() {
        return Err(Error::Domain {
            name: "path weight",
            range: "(0, 1]",
            value: path.weight(),
        });
    }
    Ok(path.log_weight / (n as f64 * a.ln()))
}

/// `X_k = theta_hat(y_k)` along a sampled path, `k = 0..=n`.
pub fn theta_chain_samples(
    tree: &TreeRealization,
    lambda: f64,
    path: &LeafPath,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain {
            name: "lambda",
            range: "(0, inf)",
            value: lambda,
        });
    }
    if tree.time_kind() != TimeKind::Continuous {
        return Err(Error::DiscreteTime);
    }
    path.vertices
        .iter()
        .zip(&path.subtree_sizes)
        .map(|(&v, &size)| {
            tree.check_vertex(v)?;
            Ok(theta_from_size(tree, lambda, v, size))
        })
        .collect()
}

/// Draws index `j` with probability `p_j z_j / sum_k p_k z_k` (0-based).
pub fn size_biased_choice(values: &[f64], extra_weights: &[f64], seed: SeedSpec) -> Result<usize> {
    size_biased_choice_with(values, extra_weights, &mut seed.rng())
}

/// [`size_biased_choice`] on a caller-owned stream.
pub fn size_biased_choice_with<R: Rng + ?Sized>(
    values: &[f64],
    extra_weights: &[f64],
    rng: &mut R,
) -> Result<usize> {
    if values.len() != extra_weights.len() {
        return Err(Error::SizeMismatch {
            expected: values.len(),
            got: extra_weights.len(),
        });
    }
    if values
        .iter()
        .chain(extra_weights)
        .any(|&x| !(x >= 0.0 && x.is_finite()))
    {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = values.iter().zip(extra_weights).map(|(z, p)| z * p).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (j, (z, p)) in values.iter().zip(extra_weights).enumerate() {
        let mass = z * p;
        if mass <= 0.0 {
            continue;
        }
        last = j;
        if u < mass {
            return Ok(j);
        }
        u -= mass;
    }
    Ok(last)
}

/// The three-step size-biased variate: draw `z = sample(rng)`, pick `J` by
/// [`size_biased_choice_with`] and return `z_J`.
pub fn size_biased_variate<R, F>(extra_weights: &[f64], mut sample: F, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Vec<f64>,
{
    let z = sample(rng);
    let j = size_biased_choice_with(&z, extra_weights, rng)?;
    Ok(z[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{entropy_estimate, level_measure};
    use crate::malthus::WeightFunction;

    fn binary() -> WeightFunction {
        WeightFunction::new(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn chain_path_is_forced() {
        let chain = TreeRealization::chain(binary(), 2);
        let path = sample_leaf_path(&chain, 2, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(path.vertices, vec![0, 1, 2]);
        assert_eq!(path.fractions, vec![1.0, 1.0]);
        assert_eq!(path.weight(), 1.0);
        let err = sample_leaf_path(&chain, 3, SeedSpec::new(1, 0)).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientGrowth {
                vertex: 2,
                depth: 2,
                target: 3
            }
        ));
    }

    #[test]
    fn redraws_paths_that_stop_early() {
        // root -> {1 -> {3}, 2}: half the walks stop at the leaf 2
        let tree = TreeRealization::from_shape(binary(), &[2, 1, 0, 0]).unwrap();
        let sampler = LeafSampler::new(&tree);
        let mut rng = SeedSpec::new(2, 0).rng();
        let (paths, dead_ends) = sampler.sample_reaching(2, 200, 1000, &mut rng).unwrap();
        assert_eq!(paths.len(), 200);
        assert!(paths.iter().all(|p| p.end() == tree.find(&[1, 1]).unwrap()));
        assert!(dead_ends > 50 && dead_ends < 350, "{dead_ends}");
        let err = sampler.sample_reaching(2, 200, 3, &mut rng).unwrap_err();
        assert!(matches!(err, Error::InsufficientGrowth { .. }));
    }

    #[test]
    fn cherry_paths_split_evenly() {
        let cherry = TreeRealization::from_shape(binary(), &[2, 0, 0]).unwrap();
        let sampler = LeafSampler::new(&cherry);
        assert_eq!(sampler.end_distribution(1), vec![(1, 0.5), (2, 0.5)]);
        let mut rng = SeedSpec::new(5, 0).rng();
        let ones = (0..4000)
            .filter(|_| sampler.sample(1, &mut rng).unwrap().end() == 1)
            .count();
        // binomial(4000, 1/2): sd ~ 31.6
        assert!((ones as f64 - 2000.0).abs() < 4.0 * 31.7);
    }

    #[test]
    fn uniform_tree_gives_exact_log_k() {
        let tree = TreeRealization::complete(binary(), 8);
        let est = ergodic_entropy_estimate(&tree, 8, 50, SeedSpec::new(2, 0)).unwrap();
        assert!((est.mean - 2f64.ln()).abs() < 1e-12);
        let path = sample_leaf_path(&tree, 8, SeedSpec::new(3, 0)).unwrap();
        assert!((local_dimension_estimate(&tree, &path, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((local_dimension_estimate(&tree, &path, 0.25).unwrap() - 0.5).abs() < 1e-12);
        assert!(local_dimension_estimate(&tree, &path, 1.0).is_err());
        // level measure and path measure agree on complete trees
        let m = level_measure(&tree, 8).unwrap();
        assert!((m.weight_of(path.end()).unwrap() - path.weight()).abs() < 1e-15);
        assert!((entropy_estimate(&tree, 8).unwrap().h_hat - est.mean).abs() < 1e-12);
    }

    #[test]
    fn telescoping_identity() {
        let w = binary();
        let tree = crate::growth::grow_continuous(
            &w,
            crate::growth::Stop::Size(3000),
            SeedSpec::new(4, 0),
        )
        .unwrap();
        let sampler = LeafSampler::new(&tree);
        let mut rng = SeedSpec::new(4, 1).rng();
        for _ in 0..200 {
            let path = sampler.sample(4, &mut rng).unwrap();
            assert!((path.log_weight - path.telescoped_log_weight()).abs() < 1e-10);
            for k in 0..4 {
                let exact = path.subtree_sizes[k + 1] as f64 / (path.subtree_sizes[k] - 1) as f64;
                assert_eq!(path.fractions[k], exact);
                assert_eq!(tree.parent(path.vertices[k + 1]), Some(path.vertices[k]));
            }
        }
        let total: f64 = sampler.end_distribution(4).iter().map(|&(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_chain_starts_at_root_theta() {
        let w = binary();
        let tree = crate::growth::grow_continuous(
            &w,
            crate::growth::Stop::Size(2000),
            SeedSpec::new(6, 0),
        )
        .unwrap();
        let path = sample_leaf_path(&tree, 5, SeedSpec::new(6, 1)).unwrap();
        let xs = theta_chain_samples(&tree, 0.618, &path).unwrap();
        let root = crate::estimators::theta_hat(&tree, 0.618, 0).unwrap();
        assert_eq!(xs.len(), 6);
        assert_eq!(xs[0], root.value);
        assert!(xs.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn size_biased_choice_edge_cases() {
        assert_eq!(
            size_biased_choice(&[5.0], &[1.0], SeedSpec::new(0, 0)),
            Ok(0)
        );
        assert_eq!(
            size_biased_choice(&[1.0, 2.0], &[0.0, 0.0], SeedSpec::new(0, 0)),
            Err(Error::DegenerateWeights)
        );
        assert_eq!(
            size_biased_choice(&[-1.0, 2.0], &[0.5, 0.5], SeedSpec::new(0, 0)),
            Err(Error::DegenerateWeights)
        );
        for r in 0..50 {
            // zero-product entries are never chosen
            let j = size_biased_choice(&[1.0, 2.0, 3.0], &[0.5, 0.0, 0.5], SeedSpec::new(1, r))
                .unwrap();
            assert_ne!(j, 1);
        }
    }
}
