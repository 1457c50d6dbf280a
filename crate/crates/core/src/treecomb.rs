//! Marked binary trees and forests indexing collision histories.
//!
//! A tree is either a single edge (the trivial tree) or a vertex with a
//! marked and an unmarked daughter. Edges are implicit: every node owns the
//! edge above it, so an edge is addressed by the path of branch choices from
//! the root of its tree. The root edge is the empty path.
//!
//! Canonical strings: a leaf is `.`, a vertex is `(marked|unmarked)` and the
//! trees of a forest are joined by `;`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which daughter-edge a step descends into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    Marked,
    Unmarked,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MarkedBinaryTree {
    Leaf,
    Vertex(Arc<MarkedBinaryTree>, Arc<MarkedBinaryTree>),
}

impl MarkedBinaryTree {
    pub fn trivial() -> Self {
        MarkedBinaryTree::Leaf
    }

    pub fn vertex(marked: MarkedBinaryTree, unmarked: MarkedBinaryTree) -> Self {
        MarkedBinaryTree::Vertex(Arc::new(marked), Arc::new(unmarked))
    }

    /// The tree with one vertex and two leaves.
    pub fn cherry() -> Self {
        Self::vertex(Self::Leaf, Self::Leaf)
    }

    /// The tree whose vertices all lie on the marked spine.
    pub fn caterpillar(n: usize) -> Self {
        (0..n).fold(Self::Leaf, |acc, _| Self::vertex(acc, Self::Leaf))
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, MarkedBinaryTree::Leaf)
    }

    pub fn daughters(&self) -> Option<(&MarkedBinaryTree, &MarkedBinaryTree)> {
        match self {
            MarkedBinaryTree::Leaf => None,
            MarkedBinaryTree::Vertex(m, u) => Some((m, u)),
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            MarkedBinaryTree::Leaf => 0,
            MarkedBinaryTree::Vertex(m, u) => 1 + m.vertex_count() + u.vertex_count(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.vertex_count() + 1
    }

    /// Edges including the root edge; the trivial tree has one.
    pub fn edge_count(&self) -> usize {
        2 * self.vertex_count() + 1
    }

    /// Number of vertices on the longest root-to-leaf route.
    pub fn depth(&self) -> usize {
        match self {
            MarkedBinaryTree::Leaf => 0,
            MarkedBinaryTree::Vertex(m, u) => 1 + m.depth().max(u.depth()),
        }
    }

    pub fn subtree(&self, path: &[Branch]) -> Option<&MarkedBinaryTree> {
        let mut node = self;
        for step in path {
            let (m, u) = node.daughters()?;
            node = match step {
                Branch::Marked => m,
                Branch::Unmarked => u,
            };
        }
        Some(node)
    }

    /// Paths to every edge, depth first with the marked branch first.
    pub fn edge_paths(&self) -> Vec<Vec<Branch>> {
        let mut out = Vec::with_capacity(self.edge_count());
        self.walk(&mut Vec::new(), &mut |p, _| out.push(p.to_vec()));
        out
    }

    /// Paths to the leaf edges in canonical (marked-first) order.
    pub fn leaf_paths(&self) -> Vec<Vec<Branch>> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.walk(&mut Vec::new(), &mut |p, node| {
            if node.is_trivial() {
                out.push(p.to_vec())
            }
        });
        out
    }

    /// Paths to the mother-edges of every vertex.
    pub fn vertex_paths(&self) -> Vec<Vec<Branch>> {
        let mut out = Vec::with_capacity(self.vertex_count());
        self.walk(&mut Vec::new(), &mut |p, node| {
            if !node.is_trivial() {
                out.push(p.to_vec())
            }
        });
        out
    }

    fn walk<F: FnMut(&[Branch], &MarkedBinaryTree)>(&self, path: &mut Vec<Branch>, f: &mut F) {
        f(path, self);
        if let Some((m, u)) = self.daughters() {
            path.push(Branch::Marked);
            m.walk(path, f);
            path.pop();
            path.push(Branch::Unmarked);
            u.walk(path, f);
            path.pop();
        }
    }

    /// Returns a copy with the node at `path` replaced.
    pub fn replace_at(&self, path: &[Branch], new: MarkedBinaryTree) -> Option<MarkedBinaryTree> {
        match path.split_first() {
            None => Some(new),
            Some((step, rest)) => {
                let (m, u) = self.daughters()?;
                Some(match step {
                    Branch::Marked => Self::vertex(m.replace_at(rest, new)?, u.clone()),
                    Branch::Unmarked => Self::vertex(m.clone(), u.replace_at(rest, new)?),
                })
            }
        }
    }

    pub fn canonical_string(&self) -> String {
        let mut s = String::with_capacity(4 * self.vertex_count() + 1);
        self.write_canonical(&mut s);
        s
    }

    fn write_canonical(&self, s: &mut String) {
        match self {
            MarkedBinaryTree::Leaf => s.push('.'),
            MarkedBinaryTree::Vertex(m, u) => {
                s.push('(');
                m.write_canonical(s);
                s.push('|');
                u.write_canonical(s);
                s.push(')');
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bytes = text.as_bytes();
        let mut pos = 0;
        let tree = parse_tree(bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(Error::Parse {
                pos,
                msg: "trailing input".into(),
            });
        }
        Ok(tree)
    }
}

fn parse_tree(bytes: &[u8], pos: &mut usize) -> Result<MarkedBinaryTree> {
    let expect = |pos: &mut usize, c: u8| -> Result<()> {
        if bytes.get(*pos) == Some(&c) {
            *pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                pos: *pos,
                msg: format!("expected '{}'", c as char),
            })
        }
    };
    match bytes.get(*pos) {
        Some(b'.') => {
            *pos += 1;
            Ok(MarkedBinaryTree::Leaf)
        }
        Some(b'(') => {
            *pos += 1;
            let m = parse_tree(bytes, pos)?;
            expect(pos, b'|')?;
            let u = parse_tree(bytes, pos)?;
            expect(pos, b')')?;
            Ok(MarkedBinaryTree::vertex(m, u))
        }
        _ => Err(Error::Parse {
            pos: *pos,
            msg: "expected '.' or '('".into(),
        }),
    }
}

impl Ord for MarkedBinaryTree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.vertex_count()
            .cmp(&other.vertex_count())
            .then_with(|| match (self, other) {
                (MarkedBinaryTree::Vertex(m1, u1), MarkedBinaryTree::Vertex(m2, u2)) => {
                    m1.cmp(m2).then_with(|| u1.cmp(u2))
                }
                _ => Ordering::Equal,
            })
    }
}

impl PartialOrd for MarkedBinaryTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MarkedBinaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_string())
    }
}

/// Address of one edge: the tree it belongs to and the path from that root.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub tree: usize,
    pub path: Vec<Branch>,
}

impl EdgeRef {
    pub fn root(tree: usize) -> Self {
        EdgeRef {
            tree,
            path: Vec::new(),
        }
    }

    pub fn new(tree: usize, path: Vec<Branch>) -> Self {
        EdgeRef { tree, path }
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    pub fn child(&self, b: Branch) -> Self {
        let mut path = self.path.clone();
        path.push(b);
        EdgeRef {
            tree: self.tree,
            path,
        }
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.tree)?;
        for b in &self.path {
            f.write_str(match b {
                Branch::Marked => "m",
                Branch::Unmarked => "u",
            })?;
        }
        Ok(())
    }
}

/// Upper limits on enumeration sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeCaps {
    pub max_tree_vertices: usize,
    pub max_forest_vertices: usize,
    pub max_forest_roots: usize,
}

impl Default for TreeCaps {
    fn default() -> Self {
        TreeCaps {
            max_tree_vertices: 10,
            max_forest_vertices: 6,
            max_forest_roots: 6,
        }
    }
}

/// Ordered tuple of marked binary trees.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Forest {
    trees: Vec<MarkedBinaryTree>,
}

impl Forest {
    pub fn new(trees: Vec<MarkedBinaryTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        Ok(Forest { trees })
    }

    pub fn single(tree: MarkedBinaryTree) -> Self {
        Forest { trees: vec![tree] }
    }

    pub fn trees(&self) -> &[MarkedBinaryTree] {
        &self.trees
    }

    pub fn tree(&self, j: usize) -> Option<&MarkedBinaryTree> {
        self.trees.get(j)
    }

    /// Number of trees (roots).
    pub fn k(&self) -> usize {
        self.trees.len()
    }

    /// Total vertex count.
    pub fn n(&self) -> usize {
        self.trees.iter().map(|t| t.vertex_count()).sum()
    }

    pub fn roots(&self) -> Vec<EdgeRef> {
        (0..self.k()).map(EdgeRef::root).collect()
    }

    /// Roots of trivial components (R₁).
    pub fn trivial_roots(&self) -> Vec<EdgeRef> {
        self.roots_where(|t| t.is_trivial())
    }

    /// Roots of nontrivial components (R₂).
    pub fn nontrivial_roots(&self) -> Vec<EdgeRef> {
        self.roots_where(|t| !t.is_trivial())
    }

    fn roots_where(&self, pred: impl Fn(&MarkedBinaryTree) -> bool) -> Vec<EdgeRef> {
        self.trees
            .iter()
            .enumerate()
            .filter(|(_, t)| pred(t))
            .map(|(j, _)| EdgeRef::root(j))
            .collect()
    }

    /// All leaves, tree by tree in canonical order.
    pub fn leaves(&self) -> Vec<EdgeRef> {
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(j, t)| t.leaf_paths().into_iter().map(move |p| EdgeRef::new(j, p)))
            .collect()
    }

    /// Leaves of nontrivial components (L₂).
    pub fn nontrivial_leaves(&self) -> Vec<EdgeRef> {
        self.leaves()
            .into_iter()
            .filter(|e| !self.trees[e.tree].is_trivial())
            .collect()
    }

    /// Vertices, addressed by their mother-edges.
    pub fn vertices(&self) -> Vec<EdgeRef> {
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(j, t)| {
                t.vertex_paths()
                    .into_iter()
                    .map(move |p| EdgeRef::new(j, p))
            })
            .collect()
    }

    pub fn edges(&self) -> Vec<EdgeRef> {
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(j, t)| t.edge_paths().into_iter().map(move |p| EdgeRef::new(j, p)))
            .collect()
    }

    /// Edges of the nontrivial components (E₂).
    pub fn nontrivial_edges(&self) -> Vec<EdgeRef> {
        self.edges()
            .into_iter()
            .filter(|e| !self.trees[e.tree].is_trivial())
            .collect()
    }

    /// Roots plus leaves with a trivial tree's single edge counted twice.
    pub fn external_edge_count(&self) -> usize {
        self.k() + self.leaves().len()
    }

    pub fn node(&self, e: &EdgeRef) -> Option<&MarkedBinaryTree> {
        self.trees.get(e.tree)?.subtree(&e.path)
    }

    pub fn contains_edge(&self, e: &EdgeRef) -> bool {
        self.node(e).is_some()
    }

    fn require_edge(&self, e: &EdgeRef) -> Result<&MarkedBinaryTree> {
        self.node(e)
            .ok_or_else(|| Error::EdgeNotFound(e.to_string()))
    }

    pub fn canonical_string(&self) -> String {
        self.trees
            .iter()
            .map(|t| t.canonical_string())
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut trees = Vec::new();
        let mut offset = 0;
        for part in text.split(';') {
            let t = MarkedBinaryTree::parse(part).map_err(|e| match e {
                Error::Parse { pos, msg } => Error::Parse {
                    pos: pos + offset,
                    msg,
                },
                other => other,
            })?;
            trees.push(t);
            offset += part.len() + 1;
        }
        Forest::new(trees)
    }
}

impl fmt::Display for Forest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_string())
    }
}

/// n-th Catalan number, (1/(n+1))·binom(2n, n).
pub fn catalan(n: usize) -> BigUint {
    let mut binom = BigUint::one();
    for i in 0..n {
        binom = binom * BigUint::from(2 * n - i) / BigUint::from(i + 1);
    }
    binom / BigUint::from(n + 1)
}

/// Σ over compositions n₁+…+n_k = n of ∏ catalan(n_i).
pub fn forest_count_formula(n: usize, k: usize) -> BigUint {
    // k-fold convolution of the Catalan sequence
    let cat: Vec<BigUint> = (0..=n).map(catalan).collect();
    let mut acc: Vec<BigUint> = (0..=n)
        .map(|i| {
            if i == 0 {
                BigUint::one()
            } else {
                BigUint::zero()
            }
        })
        .collect();
    for _ in 0..k {
        acc = (0..=n)
            .map(|m| (0..=m).map(|i| &acc[m - i] * &cat[i]).sum())
            .collect();
    }
    acc[n].clone()
}

/// Upper bound 2^{3n+k} on the forest count.
pub fn forest_count_bound(n: usize, k: usize) -> BigUint {
    BigUint::one() << (3 * n + k)
}

/// All marked binary trees with `n` vertices, in canonical order.
pub fn enumerate_trees(n: usize, caps: &TreeCaps) -> Result<Vec<MarkedBinaryTree>> {
    if n > caps.max_tree_vertices {
        return Err(Error::CapExceeded {
            what: "tree vertices",
            value: n as u64,
            cap: caps.max_tree_vertices as u64,
        });
    }
    Ok(trees_up_to(n).swap_remove(n))
}

fn trees_up_to(n: usize) -> Vec<Vec<MarkedBinaryTree>> {
    let mut by_size: Vec<Vec<MarkedBinaryTree>> = vec![vec![MarkedBinaryTree::Leaf]];
    for m in 1..=n {
        let mut level = Vec::new();
        for marked_n in 0..m {
            let unmarked_n = m - 1 - marked_n;
            for a in &by_size[marked_n] {
                for b in &by_size[unmarked_n] {
                    level.push(MarkedBinaryTree::vertex(a.clone(), b.clone()));
                }
            }
        }
        by_size.push(level);
    }
    by_size
}

/// All forests of `k` trees with `n` vertices in total.
///
/// Ordered by composition (n₁, …, n_k) lexicographically, then by the
/// canonical order of each component.
pub fn enumerate_forests(n: usize, k: usize, caps: &TreeCaps) -> Result<Vec<Forest>> {
    if n > caps.max_forest_vertices {
        return Err(Error::CapExceeded {
            what: "forest vertices",
            value: n as u64,
            cap: caps.max_forest_vertices as u64,
        });
    }
    if k == 0 || k > caps.max_forest_roots {
        return Err(Error::CapExceeded {
            what: "forest roots",
            value: k as u64,
            cap: caps.max_forest_roots as u64,
        });
    }
    let by_size = trees_up_to(n);
    let mut out = Vec::new();
    for comp in compositions(n, k) {
        let mut partial: Vec<Vec<MarkedBinaryTree>> = vec![Vec::new()];
        for &ni in &comp {
            partial = partial
                .into_iter()
                .flat_map(|prefix| {
                    by_size[ni].iter().map(move |t| {
                        let mut p = prefix.clone();
                        p.push(t.clone());
                        p
                    })
                })
                .collect();
        }
        out.extend(partial.into_iter().map(|trees| Forest { trees }));
    }
    Ok(out)
}

/// Weak compositions of n into k parts, lexicographic.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, k - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

/// Reflexive partial order: `v ⪯ w` iff `v` lies on the route from `w` to
/// the root. Both are vertex addresses (paths to mother-edges) in `t`.
pub fn partial_order_leq(v: &[Branch], w: &[Branch], t: &MarkedBinaryTree) -> bool {
    debug_assert!(t.subtree(v).is_some_and(|s| !s.is_trivial()));
    debug_assert!(t.subtree(w).is_some_and(|s| !s.is_trivial()));
    w.starts_with(v)
}

/// Strict order `v ≺ w`.
pub fn partial_order_lt(v: &[Branch], w: &[Branch], t: &MarkedBinaryTree) -> bool {
    v != w && partial_order_leq(v, w, t)
}

/// The leaf reached from `e` along marked daughter-edges only.
pub fn granddaughter(e: &EdgeRef, f: &Forest) -> Result<EdgeRef> {
    let mut node = f.require_edge(e)?;
    let mut out = e.clone();
    while let Some((m, _)) = node.daughters() {
        out.path.push(Branch::Marked);
        node = m;
    }
    Ok(out)
}

/// Vertices with no vertex strictly above them in the order (both
/// daughter-edges are leaves).
pub fn maximal_vertices(f: &Forest) -> Vec<EdgeRef> {
    f.vertices()
        .into_iter()
        .filter(|v| {
            let (m, u) = f.node(v).and_then(|t| t.daughters()).expect("vertex");
            m.is_trivial() && u.is_trivial()
        })
        .collect()
}

/// Removes the vertex below a nontrivial root: its marked daughter keeps the
/// root's slot and its unmarked daughter becomes root k+1.
pub fn surgery_remove_root_vertex(f: &Forest, root_edge: &EdgeRef) -> Result<Forest> {
    if !root_edge.is_root() {
        return Err(Error::invalid(format!("{root_edge} is not a root edge")));
    }
    let tree = f.require_edge(root_edge)?;
    let (m, u) = tree.daughters().ok_or(Error::TrivialRoot(root_edge.tree))?;
    let mut trees = f.trees.clone();
    trees[root_edge.tree] = m.clone();
    trees.push(u.clone());
    Ok(Forest { trees })
}

/// Inverse direction of [`surgery_remove_root_vertex`]: attaches the last
/// root as the unmarked daughter of a new vertex under root `j`.
pub fn graft_last_root(f: &Forest, j: usize) -> Result<Forest> {
    let k = f.k();
    if k < 2 || j >= k - 1 {
        return Err(Error::invalid(format!(
            "cannot graft last root onto {j} (k = {k})"
        )));
    }
    let mut trees = f.trees.clone();
    let last = trees.pop().expect("k >= 2");
    trees[j] = MarkedBinaryTree::vertex(trees[j].clone(), last);
    Ok(Forest { trees })
}

/// Splits a leaf with a new vertex whose unmarked daughter is a new leaf.
pub fn surgery_split_leaf(f: &Forest, leaf: &EdgeRef) -> Result<Forest> {
    let node = f.require_edge(leaf)?;
    if !node.is_trivial() {
        return Err(Error::EdgeNotFound(format!("{leaf} is not a leaf")));
    }
    let mut trees = f.trees.clone();
    trees[leaf.tree] = trees[leaf.tree]
        .replace_at(&leaf.path, MarkedBinaryTree::cherry())
        .expect("path checked");
    Ok(Forest { trees })
}

/// Removes a maximal vertex together with its two daughter-edges.
pub fn remove_maximal_vertex(f: &Forest, vertex: &EdgeRef) -> Result<Forest> {
    let node = f.require_edge(vertex)?;
    match node.daughters() {
        Some((m, u)) if m.is_trivial() && u.is_trivial() => {}
        _ => return Err(Error::invalid(format!("{vertex} is not a maximal vertex"))),
    }
    let mut trees = f.trees.clone();
    trees[vertex.tree] = trees[vertex.tree]
        .replace_at(&vertex.path, MarkedBinaryTree::Leaf)
        .expect("path checked");
    Ok(Forest { trees })
}

/// Bijection from the leaves of a forest onto {1, …, n+k}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafLabeling {
    labels: BTreeMap<EdgeRef, usize>,
}

impl LeafLabeling {
    /// Leaves numbered in canonical order, tree by tree.
    pub fn canonical(f: &Forest) -> Self {
        LeafLabeling {
            labels: f
                .leaves()
                .into_iter()
                .enumerate()
                .map(|(i, e)| (e, i + 1))
                .collect(),
        }
    }

    pub fn from_map(f: &Forest, labels: BTreeMap<EdgeRef, usize>) -> Result<Self> {
        let leaves = f.leaves();
        let total = leaves.len();
        if labels.len() != total || leaves.iter().any(|e| !labels.contains_key(e)) {
            return Err(Error::invalid("labelling must cover exactly the leaves"));
        }
        let mut seen = vec![false; total + 1];
        for &l in labels.values() {
            if l == 0 || l > total || std::mem::replace(&mut seen[l], true) {
                return Err(Error::invalid(format!(
                    "label {l} is out of range or repeated"
                )));
            }
        }
        Ok(LeafLabeling { labels })
    }

    pub fn label(&self, leaf: &EdgeRef) -> Option<usize> {
        self.labels.get(leaf).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Root labelling π₁: root of tree j carries j (1-based).
    pub fn root_label(root: &EdgeRef) -> usize {
        root.tree + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn caps() -> TreeCaps {
        TreeCaps::default()
    }

    #[test]
    fn catalan_values() {
        let got: Vec<u64> = (0..=7).map(|n| catalan(n).try_into().unwrap()).collect();
        assert_eq!(got, vec![1, 1, 2, 5, 14, 42, 132, 429]);
    }

    #[test]
    fn small_enumerations() {
        assert_eq!(
            enumerate_trees(0, &caps()).unwrap(),
            vec![MarkedBinaryTree::Leaf]
        );
        assert_eq!(
            enumerate_trees(1, &caps()).unwrap(),
            vec![MarkedBinaryTree::cherry()]
        );
        assert_eq!(enumerate_trees(4, &caps()).unwrap().len(), 14);
        assert!(matches!(
            enumerate_trees(11, &caps()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn tree_order_is_sorted_and_distinct() {
        for n in 0..=7 {
            let trees = enumerate_trees(n, &caps()).unwrap();
            assert!(trees.windows(2).all(|w| w[0] < w[1]), "n = {n}");
            let strings: HashSet<_> = trees.iter().map(|t| t.canonical_string()).collect();
            assert_eq!(strings.len(), trees.len());
        }
    }

    #[test]
    fn forest_small_counts() {
        assert_eq!(enumerate_forests(0, 3, &caps()).unwrap().len(), 1);
        assert_eq!(enumerate_forests(1, 2, &caps()).unwrap().len(), 2);
        let f22 = enumerate_forests(2, 2, &caps()).unwrap();
        assert_eq!(f22.len(), 5);
        // brute force: all pairs of trees of up to 2 vertices with vertex total 2
        let mut brute = 0;
        for a in 0..=2 {
            for ta in enumerate_trees(a, &caps()).unwrap() {
                for tb in enumerate_trees(2 - a, &caps()).unwrap() {
                    let f = Forest::new(vec![ta.clone(), tb]).unwrap();
                    assert!(f22.contains(&f));
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 5);
        assert!(enumerate_forests(7, 1, &caps()).is_err());
        assert!(enumerate_forests(1, 0, &caps()).is_err());
    }

    #[test]
    fn canonical_grammar() {
        assert_eq!(MarkedBinaryTree::Leaf.canonical_string(), ".");
        assert_eq!(MarkedBinaryTree::cherry().canonical_string(), "(.|.)");
        let t = MarkedBinaryTree::vertex(MarkedBinaryTree::cherry(), MarkedBinaryTree::Leaf);
        assert_eq!(t.canonical_string(), "((.|.)|.)");
        let f = Forest::new(vec![t, MarkedBinaryTree::Leaf]).unwrap();
        assert_eq!(f.canonical_string(), "((.|.)|.);.");
        for bad in ["", "(", "(.|.", "(.,.)", ".;", "..", "(.|.))"] {
            assert!(Forest::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn forest_parse_round_trip() {
        for f in enumerate_forests(3, 2, &caps()).unwrap() {
            assert_eq!(Forest::parse(&f.canonical_string()).unwrap(), f);
        }
    }

    #[test]
    fn counting_identities() {
        for n in 0..=4 {
            for k in 1..=3 {
                for f in enumerate_forests(n, k, &caps()).unwrap() {
                    assert_eq!(f.roots().len(), k);
                    assert_eq!(f.leaves().len(), n + k);
                    assert_eq!(f.vertices().len(), n);
                    let r1 = f.trivial_roots().len();
                    assert_eq!(r1 + f.nontrivial_roots().len(), k);
                    assert_eq!(f.nontrivial_edges().len(), k + 2 * n - r1);
                    assert_eq!(f.leaves().len() - f.nontrivial_leaves().len(), r1);
                    assert_eq!(f.external_edge_count(), 2 * k + n);
                }
            }
        }
    }

    #[test]
    fn order_examples() {
        let cat = MarkedBinaryTree::caterpillar(2);
        let root: Vec<Branch> = vec![];
        let deep = vec![Branch::Marked];
        assert!(partial_order_leq(&root, &deep, &cat));
        assert!(!partial_order_leq(&deep, &root, &cat));
        assert!(partial_order_leq(&deep, &deep, &cat));
        assert!(!partial_order_lt(&deep, &deep, &cat));
        let balanced =
            MarkedBinaryTree::vertex(MarkedBinaryTree::cherry(), MarkedBinaryTree::cherry());
        let (a, b) = (vec![Branch::Marked], vec![Branch::Unmarked]);
        assert!(!partial_order_leq(&a, &b, &balanced));
        assert!(!partial_order_leq(&b, &a, &balanced));
    }

    #[test]
    fn order_axioms_and_maximal_vertices_brute_force() {
        for n in 1..=5 {
            for t in enumerate_trees(n, &caps()).unwrap() {
                let vs = t.vertex_paths();
                for a in &vs {
                    assert!(partial_order_leq(a, a, &t));
                    for b in &vs {
                        if a != b && partial_order_leq(a, b, &t) {
                            assert!(!partial_order_leq(b, a, &t));
                        }
                        for c in &vs {
                            if partial_order_leq(a, b, &t) && partial_order_leq(b, c, &t) {
                                assert!(partial_order_leq(a, c, &t));
                            }
                        }
                    }
                }
                let f = Forest::single(t.clone());
                let brute: Vec<EdgeRef> = vs
                    .iter()
                    .filter(|v| !vs.iter().any(|w| partial_order_lt(v, w, &t)))
                    .map(|p| EdgeRef::new(0, p.clone()))
                    .collect();
                assert_eq!(maximal_vertices(&f), brute);
            }
        }
    }

    #[test]
    fn maximal_vertex_examples() {
        let one = Forest::single(MarkedBinaryTree::cherry());
        assert_eq!(maximal_vertices(&one), vec![EdgeRef::root(0)]);
        let cat = Forest::single(MarkedBinaryTree::caterpillar(2));
        assert_eq!(
            maximal_vertices(&cat),
            vec![EdgeRef::new(0, vec![Branch::Marked])]
        );
        let two =
            Forest::new(vec![MarkedBinaryTree::cherry(), MarkedBinaryTree::cherry()]).unwrap();
        assert_eq!(
            maximal_vertices(&two),
            vec![EdgeRef::root(0), EdgeRef::root(1)]
        );
        assert!(maximal_vertices(&Forest::single(MarkedBinaryTree::Leaf)).is_empty());
    }

    #[test]
    fn granddaughter_examples() {
        let cat = Forest::single(MarkedBinaryTree::caterpillar(2));
        let leaf = EdgeRef::new(0, vec![Branch::Unmarked]);
        assert_eq!(granddaughter(&leaf, &cat).unwrap(), leaf);
        assert_eq!(
            granddaughter(&EdgeRef::root(0), &cat).unwrap(),
            EdgeRef::new(0, vec![Branch::Marked, Branch::Marked])
        );
        let one = Forest::single(MarkedBinaryTree::cherry());
        assert_eq!(
            granddaughter(&EdgeRef::root(0), &one).unwrap(),
            EdgeRef::new(0, vec![Branch::Marked])
        );
        assert!(granddaughter(&EdgeRef::root(3), &one).is_err());
    }

    #[test]
    fn remove_root_vertex_examples() {
        let f = Forest::single(MarkedBinaryTree::cherry());
        let g = surgery_remove_root_vertex(&f, &EdgeRef::root(0)).unwrap();
        assert_eq!(g, enumerate_forests(0, 2, &caps()).unwrap()[0]);
        let triv = Forest::single(MarkedBinaryTree::Leaf);
        assert!(matches!(
            surgery_remove_root_vertex(&triv, &EdgeRef::root(0)),
            Err(Error::TrivialRoot(0))
        ));
        // a T_{4,3} forest with a caterpillar first component
        let f = Forest::parse("(((.|.)|.)|.);(.|.);.").unwrap();
        assert_eq!((f.n(), f.k()), (4, 3));
        let g = surgery_remove_root_vertex(&f, &EdgeRef::root(0)).unwrap();
        assert_eq!((g.n(), g.k()), (3, 4));
        assert_eq!(g.canonical_string(), "((.|.)|.);(.|.);.;.");
        assert_eq!(g.leaves().len(), f.leaves().len());
    }

    #[test]
    fn root_removal_has_k_preimages() {
        for n in 1..=3 {
            for k in 1..=3 {
                let mut hits = std::collections::HashMap::new();
                for f in enumerate_forests(n, k, &caps()).unwrap() {
                    for r in f.nontrivial_roots() {
                        let g = surgery_remove_root_vertex(&f, &r).unwrap();
                        *hits.entry(g).or_insert(0usize) += 1;
                    }
                }
                let targets = enumerate_forests(n - 1, k + 1, &caps()).unwrap();
                assert_eq!(hits.len(), targets.len());
                for t in targets {
                    assert_eq!(hits[&t], k, "n={n} k={k} {t}");
                    for j in 0..k {
                        let pre = graft_last_root(&t, j).unwrap();
                        assert_eq!(
                            surgery_remove_root_vertex(&pre, &EdgeRef::root(j)).unwrap(),
                            t
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn split_leaf_examples() {
        let f = Forest::single(MarkedBinaryTree::Leaf);
        let g = surgery_split_leaf(&f, &EdgeRef::root(0)).unwrap();
        assert_eq!(g, Forest::single(MarkedBinaryTree::cherry()));
        let f = Forest::parse("(((.|.)|.)|.);(.|.);.").unwrap();
        let leaf = EdgeRef::new(0, vec![Branch::Marked, Branch::Unmarked]);
        let g = surgery_split_leaf(&f, &leaf).unwrap();
        assert_eq!((g.n(), g.k()), (5, 3));
        assert_eq!(g.canonical_string(), "(((.|.)|(.|.))|.);(.|.);.");
        assert!(surgery_split_leaf(&f, &EdgeRef::root(0)).is_err());
        assert!(surgery_split_leaf(&f, &EdgeRef::root(5)).is_err());
    }

    #[test]
    fn split_then_remove_is_identity() {
        for f in enumerate_forests(3, 2, &caps()).unwrap() {
            for leaf in f.leaves() {
                let g = surgery_split_leaf(&f, &leaf).unwrap();
                assert!(maximal_vertices(&g).contains(&leaf));
                assert_eq!(remove_maximal_vertex(&g, &leaf).unwrap(), f);
            }
        }
    }

    #[test]
    fn split_leaf_is_surjective() {
        for k in 1..=2 {
            for n in 1..=3 {
                let mut images = HashSet::new();
                for f in enumerate_forests(n - 1, k, &caps()).unwrap() {
                    for leaf in f.leaves() {
                        images.insert(surgery_split_leaf(&f, &leaf).unwrap());
                    }
                }
                assert_eq!(
                    images.len(),
                    enumerate_forests(n, k, &caps()).unwrap().len()
                );
            }
        }
    }

    #[test]
    fn labelings() {
        let f = Forest::parse("(.|.);.").unwrap();
        let lab = LeafLabeling::canonical(&f);
        assert_eq!(lab.len(), 3);
        assert_eq!(lab.label(&EdgeRef::root(1)), Some(3));
        assert_eq!(LeafLabeling::root_label(&EdgeRef::root(1)), 2);
        let mut bad = BTreeMap::new();
        for e in f.leaves() {
            bad.insert(e, 1);
        }
        assert!(LeafLabeling::from_map(&f, bad).is_err());
        let mut ok = BTreeMap::new();
        for (i, e) in f.leaves().into_iter().rev().enumerate() {
            ok.insert(e, i + 1);
        }
        assert!(LeafLabeling::from_map(&f, ok).is_ok());
    }
}
