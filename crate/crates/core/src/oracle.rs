//! Exact law of the discrete-time tree on a handful of vertices.
//!
//! The distribution is built by expanding every attachment sequence,
//! merging sequences that produce the same ordered shape. Probabilities are
//! exact rationals: each `f64` weight is converted to the dyadic rational it
//! represents, so the oracle shares no floating-point path with the
//! simulators. Shapes are keyed by their preorder list of child counts, the
//! same canonical encoding as [`TreeRealization::shape_encoding`], but the
//! oracle keeps its own tree representation.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::growth::{TimeKind, TreeRealization};
use crate::malthus::WeightFunction;
use crate::rng::SeedSpec;
use crate::stats::{chi_square_gof, ChiSquareTest};

/// Largest tree the enumeration accepts.
pub const MAX_VERTICES: usize = 9;

/// Exact distribution over ordered shapes with a fixed vertex count.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDistribution {
    n_vertices: usize,
    probs: BTreeMap<Vec<u32>, BigRational>,
}

impl ShapeDistribution {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Exact probability of a shape (zero if unreachable).
    pub fn exact(&self, shape: &[u32]) -> BigRational {
        self.probs
            .get(shape)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn probability(&self, shape: &[u32]) -> f64 {
        to_f64(&self.exact(shape))
    }

    /// Sum of all probabilities, exactly.
    pub fn total(&self) -> BigRational {
        self.probs
            .values()
            .fold(BigRational::zero(), |acc, p| acc + p)
    }

    /// `(shape, probability)` in shape order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.probs.iter().map(|(s, p)| (s.as_slice(), to_f64(p)))
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("weights are finite")
}

/// Ordered tree as child lists, vertex 0 the root, ids in preorder.
struct Shape {
    children: Vec<Vec<usize>>,
}

impl Shape {
    fn decode(code: &[u32]) -> Self {
        let mut children = vec![Vec::new(); code.len()];
        let mut stack: Vec<(usize, u32)> = vec![(0, code[0])];
        for (id, &count) in code.iter().enumerate().skip(1) {
            while let Some(&(_, 0)) = stack.last() {
                stack.pop();
            }
            let top = stack.last_mut().expect("well-formed encoding");
            top.1 -= 1;
            children[top.0].push(id);
            stack.push((id, count));
        }
        Self { children }
    }

    fn encode(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.children.len());
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            out.push(self.children[v].len() as u32);
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    /// Encoding after appending a last child to `parent`.
    fn grown(&self, parent: usize) -> Vec<u32> {
        let mut children = self.children.clone();
        let id = children.len();
        children.push(Vec::new());
        children[parent].push(id);
        Shape { children }.encode()
    }
}

/// Exact shape distribution of the discrete-time tree with `n_vertices`.
pub fn enumerate_discrete_distribution(
    w: &WeightFunction,
    n_vertices: usize,
) -> Result<ShapeDistribution> {
    if n_vertices > MAX_VERTICES {
        return Err(Error::EnumerationTooLarge {
            max: MAX_VERTICES,
            got: n_vertices,
        });
    }
    if n_vertices == 0 {
        return Err(Error::Domain {
            name: "n_vertices",
            range: "[1, 9]",
            value: 0.0,
        });
    }
    let k = w.max_children();
    let rates: Vec<BigRational> = w.rates().iter().map(|&r| exact(r)).collect();

    let mut states: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    states.insert(vec![0], BigRational::from_integer(BigInt::from(1)));
    for _ in 1..n_vertices {
        let mut next: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
        for (code, p) in &states {
            let shape = Shape::decode(code);
            let live: Vec<(usize, usize)> = shape
                .children
                .iter()
                .enumerate()
                .map(|(v, c)| (v, c.len()))
                .filter(|&(_, d)| d < k)
                .collect();
            let total = live
                .iter()
                .fold(BigRational::zero(), |acc, &(_, d)| acc + &rates[d]);
            if total.is_zero() {
                continue;
            }
            for &(v, d) in &live {
                let step = p * &rates[d] / &total;
                *next.entry(shape.grown(v)).or_insert_with(BigRational::zero) += step;
            }
        }
        states = next;
    }
    Ok(ShapeDistribution {
        n_vertices,
        probs: states,
    })
}

/// Pearson chi-square of simulated shapes against the exact law.
///
/// Sparse cells are merged (see [`chi_square_gof`]); shapes the law gives
/// zero probability make the statistic infinite.
pub fn compare_to_simulator(
    dist: &ShapeDistribution,
    samples: &[TreeRealization],
) -> Result<ChiSquareTest> {
    let shapes = samples
        .iter()
        .map(|t| {
            if t.len() == dist.n_vertices {
                Ok(t.shape_encoding())
            } else {
                Err(Error::SizeMismatch {
                    expected: dist.n_vertices,
                    got: t.len(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    compare_shapes(dist, shapes.iter().map(Vec::as_slice))
}

/// [`compare_to_simulator`] on bare shape encodings.
pub fn compare_shapes<'a, I>(dist: &ShapeDistribution, shapes: I) -> Result<ChiSquareTest>
where
    I: IntoIterator<Item = &'a [u32]>,
{
    let index: BTreeMap<&[u32], usize> = dist
        .probs
        .keys()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    // last cell collects shapes outside the support
    let mut observed = vec![0u64; index.len() + 1];
    for shape in shapes {
        if shape.len() != dist.n_vertices {
            return Err(Error::SizeMismatch {
                expected: dist.n_vertices,
                got: shape.len(),
            });
        }
        let cell = index.get(shape).copied().unwrap_or(index.len());
        observed[cell] += 1;
    }
    let mut probs: Vec<f64> = dist.probs.values().map(to_f64).collect();
    probs.push(0.0);
    chi_square_gof(&observed, &probs)
}

/// Negative control: attaches to a uniformly chosen unsaturated vertex,
/// ignoring the weights.
pub fn grow_uniform_impostor(
    w: &WeightFunction,
    n_vertices: usize,
    seed: SeedSpec,
) -> Result<TreeRealization> {
    if n_vertices == 0 {
        return Err(Error::Domain {
            name: "n_vertices",
            range: "[1, inf)",
            value: 0.0,
        });
    }
    let k = w.max_children();
    let mut rng = seed.rng();
    let mut tree = TreeRealization::singleton(w.clone(), TimeKind::Discrete);
    let mut live: Vec<usize> = vec![0];
    while tree.len() < n_vertices && !live.is_empty() {
        let slot = rng.random_range(0..live.len());
        let parent = live[slot];
        let child = tree.attach(parent, tree.len() as f64);
        if tree.degree(parent) == k {
            live.swap_remove(slot);
        }
        live.push(child);
    }
    tree.set_clock((tree.len() - 1) as f64);
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn w(rates: &[f64]) -> WeightFunction {
        WeightFunction::new(rates.to_vec()).unwrap()
    }

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    const PATH3: &[u32] = &[1, 1, 0];
    const CHERRY: &[u32] = &[2, 0, 0];

    #[test]
    fn two_vertices() {
        let d = enumerate_discrete_distribution(&w(&[0.3, 7.0]), 2).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.exact(&[1, 0]).is_one());
    }

    #[test]
    fn three_vertices() {
        let d = enumerate_discrete_distribution(&w(&[1.0, 1.0]), 3).unwrap();
        assert_eq!(d.exact(PATH3), ratio(1, 2));
        assert_eq!(d.exact(CHERRY), ratio(1, 2));
        let d = enumerate_discrete_distribution(&w(&[1.0, 2.0]), 3).unwrap();
        assert_eq!(d.exact(CHERRY), ratio(2, 3));
        assert_eq!(d.exact(PATH3), ratio(1, 3));
    }

    #[test]
    fn cherry_ratio_grid() {
        for &(a, b) in &[(1.0, 0.25), (0.5, 3.0), (2.0, 2.0), (1.0, 1e3)] {
            let d = enumerate_discrete_distribution(&w(&[a, b]), 3).unwrap();
            assert!((d.probability(CHERRY) - b / (a + b)).abs() < 1e-15);
        }
    }

    #[test]
    fn normalised_and_saturating() {
        for n in 1..=MAX_VERTICES {
            let d = enumerate_discrete_distribution(&w(&[1.0, 2.0]), n).unwrap();
            assert!(d.total().is_one(), "n = {n}");
            assert!(d
                .iter()
                .all(|(s, _)| s.len() == n && s.iter().all(|&c| c <= 2)));
        }
        // ordered trees on 5 vertices with out-degree <= 2: Motzkin(4) = 9;
        // with no degree cap: Catalan(4) = 14
        let d = enumerate_discrete_distribution(&w(&[1.0, 1.0]), 5).unwrap();
        assert_eq!(d.len(), 9);
        let d = enumerate_discrete_distribution(&w(&[1.0, 1.0, 1.0, 1.0]), 5).unwrap();
        assert_eq!(d.len(), 14);
        assert!(enumerate_discrete_distribution(&w(&[1.0, 1.0]), 10).is_err());
        assert!(enumerate_discrete_distribution(&w(&[1.0, 1.0]), 0).is_err());
    }

    #[test]
    fn encoding_round_trip() {
        for code in [vec![0], vec![2, 1, 0, 0], vec![1, 2, 0, 1, 0]] {
            assert_eq!(Shape::decode(&code).encode(), code);
        }
        assert_eq!(Shape::decode(&[1, 0]).grown(0), vec![2, 0, 0]);
        assert_eq!(Shape::decode(&[1, 0]).grown(1), vec![1, 1, 0]);
    }

    #[test]
    fn compare_rejects_wrong_sizes() {
        let d = enumerate_discrete_distribution(&w(&[1.0, 1.0]), 3).unwrap();
        let tree = TreeRealization::chain(w(&[1.0, 1.0]), 3);
        assert!(matches!(
            compare_to_simulator(&d, &[tree]),
            Err(Error::SizeMismatch {
                expected: 3,
                got: 4
            })
        ));
    }

    #[test]
    fn trivial_cell_is_exact_match() {
        let wf = w(&[1.0, 1.0]);
        let d = enumerate_discrete_distribution(&wf, 2).unwrap();
        let samples: Vec<_> = (0..20)
            .map(|r| crate::growth::grow_discrete(&wf, 2, SeedSpec::new(0, r)).unwrap())
            .collect();
        let t = compare_to_simulator(&d, &samples).unwrap();
        assert!(t.is_degenerate());
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn impostor_is_uniform() {
        let wf = w(&[1.0, 2.0]);
        let tree = grow_uniform_impostor(&wf, 50, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(tree.len(), 50);
        assert_eq!(tree.validate(), Ok(()));
    }
}
