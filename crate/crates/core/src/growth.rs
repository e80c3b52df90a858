//! Random tree generators and the arena tree they produce.
//!
//! Three samplers share one [`TreeRealization`] type:
//!
//! * [`grow_continuous`]: the continuous-time chain, simulated event by event
//!   (Gillespie). The holding time is `Exp(W(G))` and the parent is chosen
//!   with probability `w(deg x) / W(G)`. Rates depend on the degree only, so
//!   live vertices are kept in one bucket per degree and a parent is drawn
//!   in two stages: a degree class with probability `|bucket_d| w(d) / W`,
//!   then a uniform member. Each event costs `O(K)`.
//! * [`grow_discrete`]: the embedded jump chain. Same attachment rule, no
//!   clock; birth "times" are attachment ranks.
//! * [`grow_recursive_construction`]: every vertex draws its own children's
//!   inter-birth gaps `Exp(w(0)), Exp(w(1)), ...` and the tree at horizon `T`
//!   keeps the vertices born by `T`. Equal in law to the continuous chain but
//!   not coupled to it.
//!
//! Vertex ids are assigned in insertion order, so a parent always has a
//! smaller id than its children.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig;
use crate::malthus::WeightFunction;
use crate::rng::{SeedSpec, SimRng};

const NONE: u32 = u32::MAX;

/// Header of the tree CSV dump.
pub const CSV_HEADER: &str = "id,parent_id,child_index,birth_time,degree";

/// What the stored birth times mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    /// Real birth times of the continuous-time model.
    Continuous,
    /// Attachment ranks standing in for birth times.
    Discrete,
}

/// When to stop growing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stop {
    /// Stop as soon as the tree has this many vertices.
    Size(usize),
    /// Return the tree as it is at this time.
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Vertex {
    parent: u32,
    child_index: u32,
    degree: u32,
    depth: u32,
    first_child: u32,
    last_child: u32,
    next_sibling: u32,
    birth_time: f64,
}

/// A rooted ordered tree grown under a [`WeightFunction`].
///
/// Saturated vertices (degree `K`) are in no bucket and contribute nothing
/// to the total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRealization {
    weights: WeightFunction,
    vertices: Vec<Vertex>,
    buckets: Vec<Vec<u32>>,
    bucket_slot: Vec<u32>,
    clock: f64,
    time_kind: TimeKind,
    saturated: bool,
}

impl TreeRealization {
    /// The tree `{root}` at time zero.
    pub fn singleton(weights: WeightFunction, time_kind: TimeKind) -> Self {
        let k = weights.max_children();
        let mut tree = Self {
            weights,
            vertices: Vec::new(),
            buckets: vec![Vec::new(); k],
            bucket_slot: Vec::new(),
            clock: 0.0,
            time_kind,
            saturated: false,
        };
        tree.vertices.push(Vertex {
            parent: NONE,
            child_index: 0,
            degree: 0,
            depth: 0,
            first_child: NONE,
            last_child: NONE,
            next_sibling: NONE,
            birth_time: 0.0,
        });
        tree.bucket_slot.push(NONE);
        tree.enter_bucket(0);
        tree
    }

    /// Rebuilds a tree from its canonical shape encoding (preorder list of
    /// child counts). Birth times are preorder ranks.
    pub fn from_shape(weights: WeightFunction, encoding: &[u32]) -> Result<Self> {
        let k = weights.max_children() as u32;
        if encoding.is_empty() || encoding.iter().any(|&c| c > k) {
            return Err(Error::InvalidShape);
        }
        let mut tree = Self::singleton(weights, TimeKind::Discrete);
        // (vertex, children still to attach)
        let mut stack = vec![(0usize, encoding[0])];
        for &count in &encoding[1..] {
            let parent = loop {
                match stack.last_mut() {
                    Some((_, 0)) => {
                        stack.pop();
                    }
                    Some((v, left)) => {
                        *left -= 1;
                        break *v;
                    }
                    None => return Err(Error::InvalidShape),
                }
            };
            let rank = tree.len() as f64;
            let id = tree.attach(parent, rank);
            stack.push((id, count));
        }
        if stack.iter().any(|&(_, left)| left > 0) {
            return Err(Error::InvalidShape);
        }
        tree.clock = (tree.len() - 1) as f64;
        Ok(tree)
    }

    /// The complete `K`-ary tree of the given depth.
    pub fn complete(weights: WeightFunction, depth: usize) -> Self {
        let k = weights.max_children();
        let mut tree = Self::singleton(weights, TimeKind::Discrete);
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(frontier.len() * k);
            for &v in &frontier {
                for _ in 0..k {
                    let rank = tree.len() as f64;
                    next.push(tree.attach(v, rank));
                }
            }
            frontier = next;
        }
        tree.clock = (tree.len() - 1) as f64;
        tree
    }

    /// The chain `root -> 1 -> 11 -> ...` with `depth` edges.
    pub fn chain(weights: WeightFunction, depth: usize) -> Self {
        let mut tree = Self::singleton(weights, TimeKind::Discrete);
        for d in 0..depth {
            tree.attach(d, (d + 1) as f64);
        }
        tree.clock = depth as f64;
        tree
    }

    /// Moves the clock forward; it never precedes the latest birth.
    pub fn set_clock(&mut self, t: f64) {
        let latest = self
            .vertices
            .iter()
            .map(|v| v.birth_time)
            .fold(0.0, f64::max);
        assert!(t >= latest, "clock {t} precedes a birth at {latest}");
        self.clock = t;
    }

    fn enter_bucket(&mut self, id: usize) {
        let degree = self.vertices[id].degree as usize;
        if degree < self.buckets.len() {
            self.bucket_slot[id] = self.buckets[degree].len() as u32;
            self.buckets[degree].push(id as u32);
        } else {
            self.bucket_slot[id] = NONE;
        }
    }

    fn leave_bucket(&mut self, id: usize) {
        let degree = self.vertices[id].degree as usize;
        let slot = self.bucket_slot[id] as usize;
        let bucket = &mut self.buckets[degree];
        bucket.swap_remove(slot);
        if let Some(&moved) = bucket.get(slot) {
            self.bucket_slot[moved as usize] = slot as u32;
        }
        self.bucket_slot[id] = NONE;
    }

    /// Appends a new last child to `parent`, born at `birth_time`.
    ///
    /// Panics if `parent` is already saturated.
    pub fn attach(&mut self, parent: usize, birth_time: f64) -> usize {
        let k = self.weights.max_children() as u32;
        let p = &self.vertices[parent];
        assert!(p.degree < k, "vertex {parent} is saturated");
        debug_assert!(birth_time >= p.birth_time);
        debug_assert!(
            p.last_child == NONE || birth_time >= self.vertices[p.last_child as usize].birth_time
        );

        let id = self.vertices.len();
        assert!(id < NONE as usize, "tree too large for 32-bit ids");
        let depth = p.depth + 1;
        let child_index = p.degree + 1;
        let previous_last = p.last_child;

        self.leave_bucket(parent);
        {
            let p = &mut self.vertices[parent];
            p.degree += 1;
            if previous_last == NONE {
                p.first_child = id as u32;
            }
            p.last_child = id as u32;
        }
        if previous_last != NONE {
            self.vertices[previous_last as usize].next_sibling = id as u32;
        }
        self.enter_bucket(parent);

        self.vertices.push(Vertex {
            parent: parent as u32,
            child_index,
            degree: 0,
            depth,
            first_child: NONE,
            last_child: NONE,
            next_sibling: NONE,
            birth_time,
        });
        self.bucket_slot.push(NONE);
        self.enter_bucket(id);
        id
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    /// Never true: a realization always contains the root.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn root(&self) -> usize {
        0
    }

    pub fn weights(&self) -> &WeightFunction {
        &self.weights
    }

    /// Current time `t` (for discrete trees, the number of attachments).
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn time_kind(&self) -> TimeKind {
        self.time_kind
    }

    /// True if growth stopped because every vertex reached degree `K`.
    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.vertices.len()
    }

    pub fn check_vertex(&self, id: usize) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::MissingVertex(id))
        }
    }

    #[inline]
    pub fn parent(&self, id: usize) -> Option<usize> {
        let p = self.vertices[id].parent;
        (p != NONE).then_some(p as usize)
    }

    /// Position of `id` among its siblings, starting at 1; 0 for the root.
    #[inline]
    pub fn child_index(&self, id: usize) -> usize {
        self.vertices[id].child_index as usize
    }

    #[inline]
    pub fn degree(&self, id: usize) -> usize {
        self.vertices[id].degree as usize
    }

    #[inline]
    pub fn depth(&self, id: usize) -> usize {
        self.vertices[id].depth as usize
    }

    #[inline]
    pub fn birth_time(&self, id: usize) -> f64 {
        self.vertices[id].birth_time
    }

    /// Children of `id` in birth order.
    pub fn children(&self, id: usize) -> Children<'_> {
        Children {
            tree: self,
            next: self.vertices[id].first_child,
        }
    }

    /// The label `i_1 i_2 ... i_n` of `id` (empty for the root).
    pub fn label(&self, id: usize) -> Vec<u32> {
        let mut label = Vec::with_capacity(self.depth(id));
        let mut v = id;
        while let Some(p) = self.parent(v) {
            label.push(self.vertices[v].child_index);
            v = p;
        }
        label.reverse();
        label
    }

    /// The vertex with the given label, if it has been born.
    pub fn find(&self, label: &[u32]) -> Option<usize> {
        let mut v = self.root();
        for &i in label {
            v = self.children(v).nth((i as usize).checked_sub(1)?)?;
        }
        Some(v)
    }

    /// Ids of all vertices at `depth`, in id order.
    pub fn level(&self, depth: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| self.depth(v) == depth)
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.vertices
            .iter()
            .map(|v| v.depth as usize)
            .max()
            .unwrap_or(0)
    }

    /// `W(G)` as maintained by the degree buckets.
    pub fn total_weight(&self) -> f64 {
        self.buckets
            .iter()
            .enumerate()
            .map(|(d, b)| b.len() as f64 * self.weights.rate(d))
            .sum()
    }

    /// Number of unsaturated vertices with each degree `0..K`.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(Vec::len).collect()
    }

    /// Canonical shape: preorder list of child counts.
    pub fn shape_encoding(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root()];
        let mut scratch = Vec::new();
        while let Some(v) = stack.pop() {
            out.push(self.vertices[v].degree);
            scratch.clear();
            scratch.extend(self.children(v));
            stack.extend(scratch.iter().rev());
        }
        out
    }

    /// The realization as it was at an earlier time `t`: the vertices born
    /// by `t`, re-indexed in id order, with the clock set to `t`.
    pub fn at_time(&self, t: f64) -> Result<Self> {
        if self.time_kind == TimeKind::Discrete {
            return Err(Error::DiscreteTime);
        }
        if !(t >= 0.0 && t <= self.clock) {
            return Err(Error::Domain {
                name: "t",
                range: "[0, clock]",
                value: t,
            });
        }
        let mut remap = vec![NONE; self.len()];
        let mut out = Self::singleton(self.weights.clone(), self.time_kind);
        remap[0] = 0;
        for v in 1..self.len() {
            if self.birth_time(v) <= t {
                let parent = remap[self.vertices[v].parent as usize];
                debug_assert_ne!(parent, NONE);
                remap[v] = out.attach(parent as usize, self.birth_time(v)) as u32;
            }
        }
        out.clock = t;
        Ok(out)
    }

    /// Checks every structural invariant by full recomputation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let k = self.weights.max_children();
        let root = self.vertices.first().ok_or("tree has no root")?;
        if root.parent != NONE || root.birth_time != 0.0 || root.depth != 0 {
            return Err("root must be parentless, born at time 0, at depth 0".into());
        }
        let mut degree_count = vec![0usize; k + 1];
        for (id, v) in self.vertices.iter().enumerate() {
            let children: Vec<usize> = self.children(id).collect();
            if children.len() != v.degree as usize || children.len() > k {
                return Err(format!(
                    "vertex {id}: degree {} vs {} children",
                    v.degree,
                    children.len()
                ));
            }
            let mut previous_birth = v.birth_time;
            for (pos, &c) in children.iter().enumerate() {
                let child = &self.vertices[c];
                if child.parent as usize != id || child.child_index as usize != pos + 1 {
                    return Err(format!("vertex {c}: bad parent link or child index"));
                }
                if child.depth != v.depth + 1 || c <= id {
                    return Err(format!("vertex {c}: bad depth or id order"));
                }
                // strict in exact arithmetic; a tiny holding time can be
                // absorbed by a large clock value
                if child.birth_time < previous_birth {
                    return Err(format!(
                        "vertex {c}: born before its parent or elder sibling"
                    ));
                }
                previous_birth = child.birth_time;
            }
            if v.birth_time > self.clock {
                return Err(format!("vertex {id}: born after the clock"));
            }
            degree_count[v.degree as usize] += 1;
            let slot = self.bucket_slot[id];
            if (v.degree as usize) < k {
                let bucket = &self.buckets[v.degree as usize];
                if bucket.get(slot as usize) != Some(&(id as u32)) {
                    return Err(format!("vertex {id}: missing from degree bucket"));
                }
            } else if slot != NONE {
                return Err(format!("vertex {id}: saturated but bucketed"));
            }
        }
        for (d, bucket) in self.buckets.iter().enumerate() {
            if bucket.len() != degree_count[d] {
                return Err(format!(
                    "bucket {d}: {} members, {} vertices",
                    bucket.len(),
                    degree_count[d]
                ));
            }
        }
        if total_weight(self) != self.total_weight() {
            return Err("incremental total weight disagrees with recomputation".into());
        }
        Ok(())
    }

    /// Writes the tree as CSV (`id,parent_id,child_index,birth_time,degree`).
    /// The root row has an empty parent and child index 0.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for (id, v) in self.vertices.iter().enumerate() {
            let parent = if v.parent == NONE {
                String::new()
            } else {
                v.parent.to_string()
            };
            writeln!(
                out,
                "{id},{parent},{},{},{}",
                v.child_index,
                sig(v.birth_time),
                v.degree
            )?;
        }
        Ok(())
    }
}

/// Iterator over the children of a vertex.
pub struct Children<'a> {
    tree: &'a TreeRealization,
    next: u32,
}

impl Iterator for Children<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next == NONE {
            return None;
        }
        let id = self.next as usize;
        self.next = self.tree.vertices[id].next_sibling;
        Some(id)
    }
}

/// `W(G) = sum over unsaturated x of w(deg x)`, recomputed from the degrees.
///
/// Vertices are tallied per degree before weighting, so the result is
/// bit-identical to [`TreeRealization::total_weight`].
pub fn total_weight(tree: &TreeRealization) -> f64 {
    let w = tree.weights();
    let mut counts = vec![0usize; w.max_children()];
    for v in 0..tree.len() {
        if let Some(c) = counts.get_mut(tree.degree(v)) {
            *c += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(d, &c)| c as f64 * w.rate(d))
        .sum()
}

/// `|G_x|` for every vertex, indexed by id.
pub fn subtree_sizes(tree: &TreeRealization) -> Vec<u64> {
    let mut sizes = vec![1u64; tree.len()];
    for v in (1..tree.len()).rev() {
        let p = tree.vertices[v].parent as usize;
        sizes[p] += sizes[v];
    }
    sizes
}

fn pick_parent(tree: &TreeRealization, total: f64, rng: &mut SimRng) -> usize {
    let mut u = rng.random::<f64>() * total;
    let mut class = None;
    for (d, bucket) in tree.buckets.iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        class = Some(d);
        let mass = bucket.len() as f64 * tree.weights.rate(d);
        if u < mass {
            break;
        }
        u -= mass;
    }
    // falling through only happens by rounding; the last nonempty class wins
    let bucket = &tree.buckets[class.expect("positive total weight")];
    bucket[rng.random_range(0..bucket.len())] as usize
}

fn check_stop(stop: Stop) -> Result<()> {
    match stop {
        Stop::Size(n) if n >= 1 => Ok(()),
        Stop::Size(n) => Err(Error::Domain {
            name: "size",
            range: "[1, inf)",
            value: n as f64,
        }),
        Stop::Time(t) if t > 0.0 && t.is_finite() => Ok(()),
        Stop::Time(t) => Err(Error::Domain {
            name: "time horizon",
            range: "(0, inf)",
            value: t,
        }),
    }
}

/// Continuous-time growth, exact in law.
pub fn grow_continuous(w: &WeightFunction, stop: Stop, seed: SeedSpec) -> Result<TreeRealization> {
    check_stop(stop)?;
    let mut rng = seed.rng();
    let mut tree = TreeRealization::singleton(w.clone(), TimeKind::Continuous);
    if let Stop::Size(n) = stop {
        tree.vertices.reserve(n);
        tree.bucket_slot.reserve(n);
    }
    loop {
        if let Stop::Size(n) = stop {
            if tree.len() >= n {
                break;
            }
        }
        let total = tree.total_weight();
        if total <= 0.0 {
            tree.saturated = true;
            break;
        }
        let wait: f64 = Exp1.sample(&mut rng);
        let next = tree.clock + wait / total;
        if let Stop::Time(horizon) = stop {
            if next > horizon {
                tree.clock = horizon;
                break;
            }
        }
        tree.clock = next;
        let parent = pick_parent(&tree, total, &mut rng);
        tree.attach(parent, next);
    }
    debug_assert_eq!(tree.validate(), Ok(()));
    Ok(tree)
}

/// The embedded jump chain after `n_vertices - 1` attachments.
pub fn grow_discrete(
    w: &WeightFunction,
    n_vertices: usize,
    seed: SeedSpec,
) -> Result<TreeRealization> {
    check_stop(Stop::Size(n_vertices))?;
    let mut rng = seed.rng();
    let mut tree = TreeRealization::singleton(w.clone(), TimeKind::Discrete);
    tree.vertices.reserve(n_vertices);
    tree.bucket_slot.reserve(n_vertices);
    while tree.len() < n_vertices {
        let total = tree.total_weight();
        if total <= 0.0 {
            tree.saturated = true;
            break;
        }
        let parent = pick_parent(&tree, total, &mut rng);
        let rank = tree.len() as f64;
        tree.attach(parent, rank);
        tree.clock = rank;
    }
    debug_assert_eq!(tree.validate(), Ok(()));
    Ok(tree)
}

/// The per-vertex exponential construction, keeping vertices born by
/// `horizon`.
pub fn grow_recursive_construction(
    w: &WeightFunction,
    horizon: f64,
    seed: SeedSpec,
) -> Result<TreeRealization> {
    check_stop(Stop::Time(horizon))?;
    grow_recursive_generations(w, horizon, usize::MAX, seed)
}

/// The per-vertex exponential construction restricted to depth at most
/// `max_depth`. An infinite `horizon` is allowed here and yields the
/// complete first `max_depth` generations with their birth times.
pub fn grow_recursive_generations(
    w: &WeightFunction,
    horizon: f64,
    max_depth: usize,
    seed: SeedSpec,
) -> Result<TreeRealization> {
    if horizon.is_nan() || horizon <= 0.0 || (horizon.is_infinite() && max_depth == usize::MAX) {
        return Err(Error::Domain {
            name: "time horizon",
            range: "(0, inf) or infinite with a depth limit",
            value: horizon,
        });
    }
    let k = w.max_children();
    let mut rng = seed.rng();
    let mut tree = TreeRealization::singleton(w.clone(), TimeKind::Continuous);
    // ids are handed out breadth first, so the arena doubles as the queue
    let mut next = 0;
    while next < tree.len() {
        let v = next;
        next += 1;
        if tree.depth(v) >= max_depth {
            continue;
        }
        let mut birth = tree.birth_time(v);
        for i in 0..k {
            let gap: f64 = Exp1.sample(&mut rng);
            birth += gap / w.rate(i);
            if birth > horizon {
                break;
            }
            tree.attach(v, birth);
        }
    }
    tree.clock = horizon;
    debug_assert_eq!(tree.validate(), Ok(()));
    Ok(tree)
}
