//! Regular vine tree sequences: representation, validation, counting, and
//! the peeling decomposition used by simulation and conditioning.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One edge of a vine tree: the conditioned pair and the conditioning set.
/// An edge in tree k (0-based) has k conditioning variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub conditioned: (usize, usize),
    pub conditioning: Vec<usize>,
}

impl EdgeSpec {
    pub fn new(a: usize, b: usize, mut conditioning: Vec<usize>) -> Self {
        conditioning.sort_unstable();
        EdgeSpec { conditioned: (a.min(b), a.max(b)), conditioning }
    }

    /// All variables the edge touches, sorted.
    pub fn complete_set(&self) -> Vec<usize> {
        let mut s = self.conditioning.clone();
        s.push(self.conditioned.0);
        s.push(self.conditioned.1);
        s.sort_unstable();
        s
    }

    pub fn contains_conditioned(&self, v: usize) -> bool {
        self.conditioned.0 == v || self.conditioned.1 == v
    }

    /// The other conditioned variable.
    pub fn partner(&self, v: usize) -> usize {
        debug_assert!(self.contains_conditioned(v));
        if self.conditioned.0 == v {
            self.conditioned.1
        } else {
            self.conditioned.0
        }
    }
}

/// A regular vine on `dimension` variables: `dimension - 1` trees, where
/// tree k (0-based) has `dimension - 1 - k` edges. Construction validates
/// the full set of vine conditions, so a held `VineStructure` is always
/// a regular vine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StructureRepr", into = "StructureRepr")]
pub struct VineStructure {
    dimension: usize,
    trees: Vec<Vec<EdgeSpec>>,
}

#[derive(Serialize, Deserialize)]
struct StructureRepr {
    dimension: usize,
    trees: Vec<Vec<EdgeSpec>>,
}

impl From<VineStructure> for StructureRepr {
    fn from(s: VineStructure) -> Self {
        StructureRepr { dimension: s.dimension, trees: s.trees }
    }
}

impl TryFrom<StructureRepr> for VineStructure {
    type Error = String;
    fn try_from(r: StructureRepr) -> std::result::Result<Self, String> {
        VineStructure::new(r.dimension, r.trees).map_err(|e| e.to_string())
    }
}

/// Disjoint-set used by the spanning-tree checks.
struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let root = self.find(self.0[x]);
            self.0[x] = root;
        }
        self.0[x]
    }

    /// Returns false if x and y were already connected.
    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        self.0[rx] = ry;
        true
    }
}

impl VineStructure {
    pub fn new(dimension: usize, trees: Vec<Vec<EdgeSpec>>) -> Result<Self> {
        let violations = Self::violations(dimension, &trees);
        if violations.is_empty() {
            Ok(VineStructure { dimension, trees })
        } else {
            Err(Error::InvalidModel(violations.join("; ")))
        }
    }

    /// All regularity violations of a proposed tree sequence: tree and edge
    /// counts, conditioning-set shapes, spanning-tree connectivity, and the
    /// proximity condition (each deeper edge must join two previous-tree
    /// edges whose complete sets are D + {a} and D + {b}). Empty means the
    /// sequence is a regular vine.
    pub fn violations(dimension: usize, trees: &[Vec<EdgeSpec>]) -> Vec<String> {
        let d = dimension;
        let mut out = Vec::new();
        if d == 0 {
            return vec!["a vine needs at least one variable".into()];
        }
        // A single variable carries no trees; the model degenerates cleanly.
        if trees.len() != d - 1 {
            return vec![format!("expected {} trees, got {}", d - 1, trees.len())];
        }
        for (k, tree) in trees.iter().enumerate() {
            if tree.len() != d - 1 - k {
                out.push(format!("tree {k} needs {} edges, got {}", d - 1 - k, tree.len()));
                continue;
            }
            for e in tree {
                let (a, b) = e.conditioned;
                if a == b || a >= d || b >= d {
                    out.push(format!("tree {k}: conditioned pair ({a}, {b}) out of range"));
                }
                if e.conditioning.len() != k {
                    out.push(format!(
                        "tree {k}: edge ({a}, {b}) needs {k} conditioning variables"
                    ));
                }
                if e.conditioning.windows(2).any(|w| w[0] >= w[1]) {
                    out.push(format!(
                        "tree {k}: conditioning of ({a}, {b}) must be sorted and distinct"
                    ));
                }
                if e.conditioning.iter().any(|&v| v >= d || v == a || v == b) {
                    out.push(format!(
                        "tree {k}: conditioning of ({a}, {b}) overlaps the pair or exceeds range"
                    ));
                }
            }
        }
        if !out.is_empty() || trees.is_empty() {
            // Shape problems make the connectivity checks meaningless.
            return out;
        }

        // Tree 0 must span the variables.
        let mut uf = UnionFind::new(d);
        for e in &trees[0] {
            if !uf.union(e.conditioned.0, e.conditioned.1) {
                out.push(format!(
                    "tree 0: edge ({}, {}) closes a cycle",
                    e.conditioned.0, e.conditioned.1
                ));
            }
        }

        for k in 1..trees.len() {
            let mut by_set: HashMap<Vec<usize>, usize> = HashMap::new();
            for (i, e) in trees[k - 1].iter().enumerate() {
                by_set.insert(e.complete_set(), i);
            }
            let mut uf = UnionFind::new(trees[k - 1].len());
            for e in &trees[k] {
                let mut sa = e.conditioning.clone();
                sa.push(e.conditioned.0);
                sa.sort_unstable();
                let mut sb = e.conditioning.clone();
                sb.push(e.conditioned.1);
                sb.sort_unstable();
                match (by_set.get(&sa), by_set.get(&sb)) {
                    (Some(&na), Some(&nb)) => {
                        if !uf.union(na, nb) {
                            out.push(format!(
                                "tree {k}: edge ({}, {} | {:?}) closes a cycle",
                                e.conditioned.0, e.conditioned.1, e.conditioning
                            ));
                        }
                    }
                    _ => out.push(format!(
                        "tree {k}: edge ({}, {} | {:?}) violates proximity (no parent \
                         edges in tree {})",
                        e.conditioned.0,
                        e.conditioned.1,
                        e.conditioning,
                        k - 1
                    )),
                }
            }
        }
        out
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn trees(&self) -> &[Vec<EdgeSpec>] {
        &self.trees
    }

    pub fn edge(&self, tree: usize, idx: usize) -> &EdgeSpec {
        &self.trees[tree][idx]
    }

    pub fn edge_count(&self) -> usize {
        self.dimension * (self.dimension - 1) / 2
    }

    /// True if `v` appears in some conditioned pair of every tree and in no
    /// conditioning set; such a variable admits closed-form conditioning on
    /// all the others.
    pub fn is_terminal_variable(&self, v: usize) -> bool {
        self.trees.iter().all(|tree| {
            tree.iter().filter(|e| e.contains_conditioned(v)).count() == 1
                && tree.iter().all(|e| !e.conditioning.contains(&v))
        })
    }

    /// Peels variables off the vine one at a time, starting from the top
    /// tree. Every regular vine admits this decomposition; it is the basis
    /// for simulation and conditional evaluation. When `prefer_last` is set
    /// and that variable is conditioned in the top edge, it becomes the
    /// final variable of the returned order (the deepest chain).
    pub fn peeling(&self, prefer_last: Option<usize>) -> Peeling {
        let d = self.dimension;
        // Edges still in the shrinking sub-vine, per tree.
        let mut active: Vec<Vec<usize>> =
            self.trees.iter().map(|t| (0..t.len()).collect()).collect();
        let mut order = vec![0usize; d];
        let mut columns: Vec<Vec<ColumnStep>> = vec![Vec::new(); d];

        for size in (2..=d).rev() {
            let top = size - 2;
            assert_eq!(active[top].len(), 1, "sub-vine top tree must hold one edge");
            let top_edge = &self.trees[top][active[top][0]];
            let (a, b) = top_edge.conditioned;
            let v = match prefer_last {
                Some(p) if p == a || p == b => p,
                // Peel the larger conditioned variable for determinism.
                _ => a.max(b),
            };
            order[size - 1] = v;

            let mut column = Vec::with_capacity(size - 1);
            for tree in 0..=top {
                let mut hit = None;
                for (slot, &idx) in active[tree].iter().enumerate() {
                    if self.trees[tree][idx].contains_conditioned(v) {
                        assert!(hit.is_none(), "variable conditioned twice in one tree");
                        hit = Some((slot, idx));
                    }
                }
                let (slot, idx) = hit.expect("peel variable must appear in every active tree");
                let e = &self.trees[tree][idx];
                column.push(ColumnStep {
                    tree,
                    edge: idx,
                    partner: e.partner(v),
                    v_is_first: e.conditioned.0 == v,
                });
                active[tree].remove(slot);
            }
            // The removed edges form a nested chain: each deeper conditioning
            // set adds the previous partner.
            debug_assert!(column.windows(2).all(|w| {
                let deep = &self.trees[w[1].tree][w[1].edge];
                deep.conditioning.contains(&w[0].partner)
            }));
            columns[size - 1] = column;
        }

        for tree in &active {
            assert!(tree.is_empty(), "peeling must consume every edge");
        }
        let v0 = (0..d).find(|v| !order[1..].contains(v)).expect("one variable remains");
        order[0] = v0;
        Peeling { order, columns }
    }

    /// Number of labeled regular vine structures in this dimension:
    /// d!/2 * 2^((d-2)(d-3)/2). Exact in u128 up to d = 15.
    pub fn count_structures(dimension: usize) -> Result<u128> {
        if dimension < 2 {
            return Err(Error::domain("structure count needs dimension >= 2"));
        }
        let d = dimension as u128;
        let mut fact: u128 = 1;
        for i in 2..=d {
            fact = fact
                .checked_mul(i)
                .ok_or_else(|| Error::domain("structure count overflows u128"))?;
        }
        let exp = (dimension - 2) * (dimension.saturating_sub(3)) / 2;
        let pow = 1u128
            .checked_shl(exp as u32)
            .filter(|_| exp < 128)
            .ok_or_else(|| Error::domain("structure count overflows u128"))?;
        (fact / 2)
            .checked_mul(pow)
            .ok_or_else(|| Error::domain("structure count overflows u128"))
    }
}

/// One step of a peeled variable's chain: the edge (tree and index) where the
/// variable is conditioned, its partner variable, and which slot of the
/// stored pair the variable occupies.
#[derive(Clone, Debug)]
pub struct ColumnStep {
    pub tree: usize,
    pub edge: usize,
    pub partner: usize,
    pub v_is_first: bool,
}

/// Result of [`VineStructure::peeling`]: an assignment order for the
/// variables and, for each position k >= 1, the chain of edges that couple
/// `order[k]` to the earlier variables (one edge per tree 0..k-1).
#[derive(Clone, Debug)]
pub struct Peeling {
    pub order: Vec<usize>,
    pub columns: Vec<Vec<ColumnStep>>,
}

#[cfg(test)]
pub(crate) fn random_structure(dimension: usize, seed: u64) -> VineStructure {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = dimension;

    // Random spanning tree on the variables (random Kruskal).
    let mut pairs: Vec<(usize, usize)> =
        (0..d).flat_map(|a| ((a + 1)..d).map(move |b| (a, b))).collect();
    pairs.shuffle(&mut rng);
    let mut uf = UnionFind::new(d);
    let mut trees = vec![Vec::new()];
    for (a, b) in pairs {
        if uf.union(a, b) {
            trees[0].push(EdgeSpec::new(a, b, vec![]));
        }
    }

    // Deeper trees: random spanning tree of the proximity graph.
    for k in 1..d - 1 {
        let prev: Vec<Vec<usize>> = trees[k - 1].iter().map(|e| e.complete_set()).collect();
        let mut pairs: Vec<(usize, usize)> = (0..prev.len())
            .flat_map(|i| ((i + 1)..prev.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let shared = prev[i].iter().filter(|v| prev[j].contains(v)).count();
                shared == k
            })
            .collect();
        pairs.shuffle(&mut rng);
        let mut uf = UnionFind::new(prev.len());
        let mut tree = Vec::new();
        for (i, j) in pairs {
            if tree.len() == d - 1 - k {
                break;
            }
            if uf.union(i, j) {
                let inter: Vec<usize> =
                    prev[i].iter().copied().filter(|v| prev[j].contains(v)).collect();
                let a = *prev[i].iter().find(|v| !inter.contains(v)).unwrap();
                let b = *prev[j].iter().find(|v| !inter.contains(v)).unwrap();
                tree.push(EdgeSpec::new(a, b, inter));
            }
        }
        assert_eq!(tree.len(), d - 1 - k, "proximity graph must stay connected");
        trees.push(tree);
    }
    let _ = rng.gen::<u8>();
    VineStructure::new(d, trees).expect("random construction yields a regular vine")
}
