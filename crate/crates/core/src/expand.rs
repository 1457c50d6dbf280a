//! Tree-indexed collision terms in the time domain and the truncated
//! solution series.
//!
//! For a marked binary tree the collision term is the recursion
//!
//! * `F(leaf, s) = e^{sΔ} u₀`
//! * `F(vertex, s) = ∫₀^s e^{(s−r)Δ} V(F(marked, r), F(unmarked, r)) dr`
//!
//! with `V` the bilinear vertex. Each nesting level uses the same
//! one-dimensional rule scaled to `[0, s]`, so a subtree evaluated at the
//! node path `x_{i₁}, …, x_{i_d}` sits at time `t·Π x_{i_j}` and its value
//! depends only on the subtree shape and the multiset of node indices. The
//! evaluator caches on exactly that key.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    heat_propagate, l2_norm, pairwise_sum, rel_l2_diff, sobolev_norm, GridSpec,
    SpectralVectorField, WaveVector,
};
use crate::hierarchy::SimplexQuadrature;
use crate::interact::vertex_bilinear;
use crate::refsolver::{solve, SolverConfig};
use crate::treecomb::{enumerate_trees, MarkedBinaryTree, TreeCaps};

/// Limits applied before any tree evaluation starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpandConfig {
    pub max_tree_vertices: usize,
    /// Refuse runs predicted to need more vertex evaluations than this.
    pub vertex_eval_budget: u64,
    /// Largest admissible ratio ‖order 1‖ / ‖order 0‖ in the series.
    pub small_time_ratio: f64,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig {
            max_tree_vertices: 6,
            vertex_eval_budget: 200_000,
            small_time_ratio: 0.7,
        }
    }
}

impl ExpandConfig {
    fn check_tree(&self, tree: &MarkedBinaryTree) -> Result<()> {
        let n = tree.vertex_count();
        if n > self.max_tree_vertices {
            return Err(Error::CapExceeded {
                what: "tree vertices",
                value: n as u64,
                cap: self.max_tree_vertices as u64,
            });
        }
        Ok(())
    }
}

/// Inputs of one collision term.
#[derive(Clone, Debug)]
pub struct TreeTermRequest<'a> {
    pub tree: &'a MarkedBinaryTree,
    pub t: f64,
    pub u0: &'a SpectralVectorField,
    pub quadrature: SimplexQuadrature,
}

type CacheKey = (String, Vec<u8>);
type Slot = Arc<Mutex<Option<Arc<SpectralVectorField>>>>;

/// Evaluates collision terms for one initial datum, one final time and one
/// rule, sharing subtree values across trees.
pub struct TreeEvaluator {
    u0: SpectralVectorField,
    t: f64,
    rule: Arc<Vec<(f64, f64)>>,
    cache: Mutex<HashMap<CacheKey, Slot>>,
    evals: AtomicU64,
}

impl TreeEvaluator {
    pub fn new(u0: &SpectralVectorField, t: f64, q: &SimplexQuadrature) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if u0.grid().n() > 128 {
            return Err(Error::CapExceeded {
                what: "grid size for tree evaluation",
                value: u0.grid().n() as u64,
                cap: 128,
            });
        }
        Ok(TreeEvaluator {
            u0: u0.clone(),
            t,
            rule: q.rule()?,
            cache: Mutex::new(HashMap::new()),
            evals: AtomicU64::new(0),
        })
    }

    pub fn vertex_evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// t·Π x_i over the (sorted) node indices, multiplied in that order.
    fn time_of(&self, nodes: &[u8]) -> f64 {
        nodes
            .iter()
            .fold(self.t, |acc, &i| acc * self.rule[i as usize].0)
    }

    pub fn tree_term(&self, tree: &MarkedBinaryTree) -> Result<SpectralVectorField> {
        Ok(self.eval(tree, &[])?.as_ref().clone())
    }

    fn eval(&self, tree: &MarkedBinaryTree, nodes: &[u8]) -> Result<Arc<SpectralVectorField>> {
        let (marked, unmarked) = match tree.daughters() {
            None => return Ok(Arc::new(heat_propagate(&self.u0, self.time_of(nodes))?)),
            Some(d) => d,
        };
        let key = (tree.canonical_string(), nodes.to_vec());
        let slot = {
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            cache.entry(key).or_default().clone()
        };
        // Holding the slot while recursing is safe: daughters are strictly
        // smaller shapes, so slots are locked in a well-founded order.
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(done) = guard.as_ref() {
            return Ok(done.clone());
        }
        let s = self.time_of(nodes);
        let mut parts = Vec::with_capacity(self.rule.len());
        for (i, &(_, w)) in self.rule.iter().enumerate() {
            let mut inner_nodes = nodes.to_vec();
            inner_nodes.push(i as u8);
            inner_nodes.sort_unstable();
            let r = self.time_of(&inner_nodes);
            let a = self.eval(marked, &inner_nodes)?;
            let b = self.eval(unmarked, &inner_nodes)?;
            let v = vertex_bilinear(&a, &b)?;
            self.evals.fetch_add(1, Ordering::Relaxed);
            parts.push(heat_propagate(&v, s - r)?.scaled(Complex64::new(s * w, 0.0)));
        }
        let mut value = pairwise_sum(self.u0.grid(), &parts)?;
        value.flags.divergence_free = true;
        value.flags.mean_zero = true;
        let value = Arc::new(value);
        *guard = Some(value.clone());
        Ok(value)
    }
}

/// Cache keys a set of trees will touch, as (shape, node multiset) pairs.
fn reachable_keys(
    tree: &MarkedBinaryTree,
    nodes: &mut Vec<u8>,
    q: usize,
    seen: &mut HashSet<CacheKey>,
) {
    let Some((m, u)) = tree.daughters() else {
        return;
    };
    let mut sorted = nodes.clone();
    sorted.sort_unstable();
    if !seen.insert((tree.canonical_string(), sorted)) {
        return;
    }
    for i in 0..q {
        nodes.push(i as u8);
        reachable_keys(m, nodes, q, seen);
        reachable_keys(u, nodes, q, seen);
        nodes.pop();
    }
}

/// Vertex evaluations a cached run over `trees` performs, and the count an
/// uncached recursion would need (Σ over vertices of q^{depth + 1}).
pub fn predicted_vertex_evals(trees: &[MarkedBinaryTree], q: usize) -> (u64, u64) {
    let mut seen = HashSet::new();
    for t in trees {
        reachable_keys(t, &mut Vec::new(), q, &mut seen);
    }
    fn uncached(t: &MarkedBinaryTree, depth: u32, q: u64) -> u64 {
        match t.daughters() {
            None => 0,
            Some((m, u)) => q
                .saturating_pow(depth + 1)
                .saturating_add(uncached(m, depth + 1, q).saturating_mul(1))
                .saturating_add(uncached(u, depth + 1, q)),
        }
    }
    let raw = trees
        .iter()
        .map(|t| uncached(t, 0, q as u64))
        .fold(0u64, u64::saturating_add);
    ((seen.len() as u64) * q as u64, raw)
}

fn check_budget(
    trees: &[MarkedBinaryTree],
    q: &SimplexQuadrature,
    cfg: &ExpandConfig,
) -> Result<()> {
    let (cached, _) = predicted_vertex_evals(trees, q.nodes);
    if cached > cfg.vertex_eval_budget {
        return Err(Error::CapExceeded {
            what: "predicted vertex evaluations",
            value: cached,
            cap: cfg.vertex_eval_budget,
        });
    }
    Ok(())
}

/// The collision contribution of one tree.
pub fn tree_term(req: &TreeTermRequest<'_>, cfg: &ExpandConfig) -> Result<SpectralVectorField> {
    cfg.check_tree(req.tree)?;
    check_budget(std::slice::from_ref(req.tree), &req.quadrature, cfg)?;
    TreeEvaluator::new(req.u0, req.t, &req.quadrature)?.tree_term(req.tree)
}

/// The same recursion with a distinct field at every leaf, in canonical
/// (marked-first) leaf order. Uncached.
pub fn tree_term_multilinear(
    tree: &MarkedBinaryTree,
    t: f64,
    leaves: &[SpectralVectorField],
    q: &SimplexQuadrature,
) -> Result<SpectralVectorField> {
    if leaves.len() != tree.leaf_count() {
        return Err(Error::invalid(format!(
            "tree has {} leaves, {} fields given",
            tree.leaf_count(),
            leaves.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let rule = q.rule()?;
    fn rec(
        tree: &MarkedBinaryTree,
        s: f64,
        leaves: &[SpectralVectorField],
        rule: &[(f64, f64)],
    ) -> Result<SpectralVectorField> {
        match tree.daughters() {
            None => heat_propagate(&leaves[0], s),
            Some((m, u)) => {
                let (lm, lu) = leaves.split_at(m.leaf_count());
                let mut parts = Vec::with_capacity(rule.len());
                for &(x, w) in rule {
                    let r = s * x;
                    let v = vertex_bilinear(&rec(m, r, lm, rule)?, &rec(u, r, lu, rule)?)?;
                    parts.push(heat_propagate(&v, s - r)?.scaled(Complex64::new(s * w, 0.0)));
                }
                pairwise_sum(leaves[0].grid(), &parts)
            }
        }
    }
    rec(tree, t, leaves, &rule)
}

/// Σ_{T ∈ 𝔗ₙ} of the collision terms, evaluated on a shared evaluator.
pub fn tree_sum_with(
    eval: &TreeEvaluator,
    n: usize,
    cfg: &ExpandConfig,
) -> Result<SpectralVectorField> {
    if n == 0 {
        return heat_propagate(&eval.u0, eval.t);
    }
    let caps = TreeCaps {
        max_tree_vertices: cfg.max_tree_vertices,
        ..TreeCaps::default()
    };
    let trees = enumerate_trees(n, &caps)?;
    check_budget(&trees, &SimplexQuadrature::gauss(eval.rule.len()), cfg)?;
    let terms: Vec<SpectralVectorField> = trees
        .par_iter()
        .map(|t| eval.tree_term(t))
        .collect::<Result<_>>()?;
    pairwise_sum(eval.u0.grid(), &terms)
}

pub fn tree_sum(
    n: usize,
    t: f64,
    u0: &SpectralVectorField,
    q: &SimplexQuadrature,
    cfg: &ExpandConfig,
) -> Result<SpectralVectorField> {
    tree_sum_with(&TreeEvaluator::new(u0, t, q)?, n, cfg)
}

#[derive(Clone, Debug)]
pub struct TreeSumEstimate {
    pub value: SpectralVectorField,
    /// ‖value − value with the comparison rule‖_{L²}.
    pub error_estimate: f64,
    pub vertex_evals: u64,
}

pub fn tree_sum_with_estimate(
    n: usize,
    t: f64,
    u0: &SpectralVectorField,
    q: &SimplexQuadrature,
    cfg: &ExpandConfig,
) -> Result<TreeSumEstimate> {
    let a = TreeEvaluator::new(u0, t, q)?;
    let b = TreeEvaluator::new(u0, t, &q.check())?;
    let value = tree_sum_with(&a, n, cfg)?;
    let check = tree_sum_with(&b, n, cfg)?;
    Ok(TreeSumEstimate {
        error_estimate: l2_norm(&value.sub(&check)?),
        value,
        vertex_evals: a.vertex_evals() + b.vertex_evals(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub order: usize,
    pub term_l2: f64,
    pub term_hneg2: f64,
    /// Relative L² error of the partial sum through this order.
    pub cum_error_vs_ref: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub t: f64,
    pub rows: Vec<SeriesRow>,
    /// exp of the least-squares slope of ln ‖term‖ over orders ≥ 2.
    pub geometric_ratio: Option<f64>,
    /// Set when the last three term norms do not decrease.
    pub non_decay: bool,
    pub vertex_evals: u64,
    pub cached_entries: usize,
}

impl SeriesReport {
    pub const CSV_HEADER: &'static str = "order,term_l2,term_hneg2,cum_error_vs_ref,seconds";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let err = r
                .cum_error_vs_ref
                .map(|e| format!("{e:.6e}"))
                .unwrap_or_default();
            s.push_str(&format!(
                "{},{:.6e},{:.6e},{},{:.3}\n",
                r.order, r.term_l2, r.term_hneg2, err, r.seconds
            ));
        }
        s
    }

    /// ‖term_{n}‖ / ‖term_{n−1}‖ for consecutive orders.
    pub fn successive_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].term_l2 / w[0].term_l2)
            .collect()
    }
}

/// Least-squares line through (x, y): (slope, intercept, slope std. error).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::DegenerateFit(format!("{n} points")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::DegenerateFit(
            "no spread in abscissae or non-finite data".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, intercept, stderr))
}

/// Partial sums of the tree series through `max_order`.
pub fn solution_series(
    u0: &SpectralVectorField,
    t: f64,
    max_order: usize,
    q: &SimplexQuadrature,
    reference: Option<&SpectralVectorField>,
    cfg: &ExpandConfig,
) -> Result<(SeriesReport, SpectralVectorField)> {
    if max_order > cfg.max_tree_vertices {
        return Err(Error::CapExceeded {
            what: "series order",
            value: max_order as u64,
            cap: cfg.max_tree_vertices as u64,
        });
    }
    let caps = TreeCaps {
        max_tree_vertices: cfg.max_tree_vertices,
        ..TreeCaps::default()
    };
    let all_trees: Vec<MarkedBinaryTree> = (1..=max_order)
        .map(|n| enumerate_trees(n, &caps))
        .collect::<Result<Vec<_>>>()?
        .concat();
    check_budget(&all_trees, q, cfg)?;
    let eval = TreeEvaluator::new(u0, t, q)?;
    let mut rows = Vec::with_capacity(max_order + 1);
    let mut partial = SpectralVectorField::zeros(u0.grid());
    for n in 0..=max_order {
        let clock = Instant::now();
        let term = tree_sum_with(&eval, n, cfg)?;
        partial = partial.add(&term)?;
        let row = SeriesRow {
            order: n,
            term_l2: l2_norm(&term),
            term_hneg2: sobolev_norm(&term, -2.0),
            cum_error_vs_ref: reference.map(|r| rel_l2_diff(&partial, r)).transpose()?,
            seconds: clock.elapsed().as_secs_f64(),
        };
        if n == 1 && rows.first().is_some_and(|r0: &SeriesRow| r0.term_l2 > 0.0) {
            let ratio = row.term_l2 / rows[0].term_l2;
            if ratio > cfg.small_time_ratio {
                return Err(Error::SmallTimeRegime {
                    ratio,
                    limit: cfg.small_time_ratio,
                });
            }
        }
        rows.push(row);
    }
    let tail: Vec<&SeriesRow> = rows
        .iter()
        .filter(|r| r.order >= 2 && r.term_l2 > 0.0)
        .collect();
    let geometric_ratio = if tail.len() >= 2 {
        let xs: Vec<f64> = tail.iter().map(|r| r.order as f64).collect();
        let ys: Vec<f64> = tail.iter().map(|r| r.term_l2.ln()).collect();
        Some(fit_line(&xs, &ys)?.0.exp())
    } else {
        None
    };
    let last: Vec<f64> = rows.iter().rev().take(3).map(|r| r.term_l2).collect();
    let non_decay = last.len() == 3 && !(last[0] < last[1] && last[1] < last[2]) && last[2] > 0.0;
    let report = SeriesReport {
        t,
        rows,
        geometric_ratio,
        non_decay,
        vertex_evals: eval.vertex_evals(),
        cached_entries: eval.cached_entries(),
    };
    Ok((report, partial))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderFit {
    pub n: usize,
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    /// Slope implied by the t^{n/2} bound.
    pub bound_slope: f64,
}

/// Fits log ‖u_ref(t) − S_{n−1}(t)‖ against log t, where S_{n−1} is the
/// series through order n−1 and `reference` supplies u(t).
pub fn remainder_probe(
    n: usize,
    times: &[f64],
    u0: &SpectralVectorField,
    q: &SimplexQuadrature,
    cfg: &ExpandConfig,
    reference: &dyn Fn(f64) -> Result<SpectralVectorField>,
) -> Result<RemainderFit> {
    if !(1..=4).contains(&n) {
        return Err(Error::invalid(format!(
            "remainder order must be 1..=4, got {n}"
        )));
    }
    if times.len() < 3 {
        return Err(Error::DegenerateFit("need at least three times".into()));
    }
    if let Some(&bad) = times.iter().find(|&&t| !(t > 0.0 && t <= 0.2)) {
        return Err(Error::invalid(format!("probe time {bad} outside (0, 0.2]")));
    }
    let mut errors = Vec::with_capacity(times.len());
    for &t in times {
        let (_, partial) = solution_series(u0, t, n - 1, q, None, cfg)?;
        errors.push(l2_norm(&reference(t)?.sub(&partial)?));
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::DegenerateFit("zero truncation error".into()));
    }
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (slope, _, slope_stderr) = fit_line(&xs, &ys)?;
    Ok(RemainderFit {
        n,
        times: times.to_vec(),
        errors,
        slope,
        slope_stderr,
        bound_slope: n as f64 / 2.0,
    })
}

/// λ u(λx) on the grid with λN modes per axis: û_λ(λk) = λ⁴ û(k).
pub fn dilate(u: &SpectralVectorField, lambda: usize) -> Result<SpectralVectorField> {
    if lambda == 0 {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    let g = u.grid();
    let big = GridSpec::with_dealias(g.n() * lambda, g.dealias())?;
    let l = lambda as i64;
    if g.dealias() && (big.band() < l * g.band() || big.band() >= l * (g.band() + 1)) {
        return Err(Error::invalid(format!(
            "dealiasing bands {} and {} are not compatible under dilation by {lambda}",
            g.band(),
            big.band()
        )));
    }
    let mut out = SpectralVectorField::zeros(big);
    let factor = (lambda as f64).powi(4);
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let kb = WaveVector::new(l * k.0[0], l * k.0[1], l * k.0[2]);
        if !big.in_range(kb) {
            continue;
        }
        for c in 0..3 {
            out.set(c, kb, u.get(c, k) * factor);
        }
    }
    out.flags = u.flags;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "path")]
pub enum ScalingPath {
    Solver,
    Series { order: usize },
}

/// Relative L² difference between "solve to λ²t, then dilate" and "dilate,
/// then solve to t". Both solver paths use the same number of steps, so
/// the discretizations are isomorphic.
pub fn scaling_invariance_check(
    u0: &SpectralVectorField,
    lambda: usize,
    t: f64,
    path: ScalingPath,
    solver: &SolverConfig,
    q: &SimplexQuadrature,
    cfg: &ExpandConfig,
) -> Result<f64> {
    if lambda == 0 {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    if lambda == 1 {
        return Ok(0.0);
    }
    let l2 = (lambda * lambda) as f64;
    let scaled0 = dilate(u0, lambda)?;
    let (a, b) = match path {
        ScalingPath::Solver => (
            dilate(&solve(u0, l2 * t, solver)?, lambda)?,
            solve(&scaled0, t, solver)?,
        ),
        ScalingPath::Series { order } => (
            dilate(&solution_series(u0, l2 * t, order, q, None, cfg)?.1, lambda)?,
            solution_series(&scaled0, t, order, q, None, cfg)?.1,
        ),
    };
    rel_l2_diff(&b, &a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_defect, taylor_green};

    fn grid() -> GridSpec {
        GridSpec::new(8).unwrap()
    }

    #[test]
    fn trivial_tree_is_free_evolution() {
        let u0 = taylor_green(grid(), 0.2).unwrap();
        let req = TreeTermRequest {
            tree: &MarkedBinaryTree::Leaf,
            t: 0.3,
            u0: &u0,
            quadrature: SimplexQuadrature::default(),
        };
        let v = tree_term(&req, &ExpandConfig::default()).unwrap();
        assert_eq!(v, heat_propagate(&u0, 0.3).unwrap());
    }

    #[test]
    fn nontrivial_trees_vanish_at_time_zero() {
        let u0 = taylor_green(grid(), 0.2).unwrap();
        for n in 1..=3 {
            for tree in enumerate_trees(n, &TreeCaps::default()).unwrap() {
                let eval = TreeEvaluator::new(&u0, 0.0, &SimplexQuadrature::default()).unwrap();
                assert!(eval.tree_term(&tree).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn caching_is_exact_and_shape_only() {
        let u0 = taylor_green(grid(), 0.5).unwrap();
        let q = SimplexQuadrature::gauss(4);
        let trees = enumerate_trees(3, &TreeCaps::default()).unwrap();
        let shared = TreeEvaluator::new(&u0, 0.1, &q).unwrap();
        for tree in &trees {
            let fresh = TreeEvaluator::new(&u0, 0.1, &q)
                .unwrap()
                .tree_term(tree)
                .unwrap();
            assert_eq!(shared.tree_term(tree).unwrap(), fresh);
            let copy = MarkedBinaryTree::parse(&tree.canonical_string()).unwrap();
            assert_eq!(shared.tree_term(&copy).unwrap(), fresh);
            assert!(divergence_defect(&fresh) < 1e-13);
        }
    }

    #[test]
    fn multilinear_agrees_with_symmetric_evaluation() {
        let u0 = taylor_green(grid(), 0.5).unwrap();
        let q = SimplexQuadrature::gauss(4);
        let tree = MarkedBinaryTree::parse("((.|.)|.)").unwrap();
        let a = tree_term_multilinear(&tree, 0.1, &vec![u0.clone(); 3], &q).unwrap();
        let b = TreeEvaluator::new(&u0, 0.1, &q)
            .unwrap()
            .tree_term(&tree)
            .unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15 * b.max_abs());
    }

    #[test]
    fn predicted_evals_match_actual() {
        let u0 = taylor_green(grid(), 0.5).unwrap();
        let q = SimplexQuadrature::gauss(3);
        let trees: Vec<_> = (1..=3)
            .flat_map(|n| enumerate_trees(n, &TreeCaps::default()).unwrap())
            .collect();
        let eval = TreeEvaluator::new(&u0, 0.1, &q).unwrap();
        for t in &trees {
            eval.tree_term(t).unwrap();
        }
        let (cached, raw) = predicted_vertex_evals(&trees, 3);
        assert_eq!(eval.vertex_evals(), cached);
        assert!(raw >= cached);
        // uncached count of the caterpillar with two vertices: 3 + 9
        assert_eq!(
            predicted_vertex_evals(&[MarkedBinaryTree::caterpillar(2)], 3).1,
            12
        );
    }

    #[test]
    fn budget_refuses() {
        let u0 = taylor_green(grid(), 0.5).unwrap();
        let cfg = ExpandConfig {
            vertex_eval_budget: 10,
            ..ExpandConfig::default()
        };
        let r = tree_sum(3, 0.1, &u0, &SimplexQuadrature::default(), &cfg);
        assert!(matches!(r, Err(Error::CapExceeded { .. })));
        let big = MarkedBinaryTree::caterpillar(7);
        let req = TreeTermRequest {
            tree: &big,
            t: 0.1,
            u0: &u0,
            quadrature: SimplexQuadrature::default(),
        };
        assert!(tree_term(&req, &ExpandConfig::default()).is_err());
    }

    #[test]
    fn order_zero_series_is_heat_flow() {
        let u0 = taylor_green(grid(), 0.5).unwrap();
        let (rep, s) = solution_series(
            &u0,
            0.1,
            0,
            &SimplexQuadrature::default(),
            None,
            &ExpandConfig::default(),
        )
        .unwrap();
        assert_eq!(s, heat_propagate(&u0, 0.1).unwrap());
        assert_eq!(rep.rows.len(), 1);
        let z = SpectralVectorField::zeros(grid());
        let (rep, s) = solution_series(
            &z,
            0.1,
            3,
            &SimplexQuadrature::default(),
            None,
            &ExpandConfig::default(),
        )
        .unwrap();
        assert!(s.is_zero());
        assert!(rep.rows.iter().all(|r| r.term_l2 == 0.0));
    }

    #[test]
    fn small_time_guard() {
        let u0 = taylor_green(grid(), 50.0).unwrap();
        let r = solution_series(
            &u0,
            0.2,
            2,
            &SimplexQuadrature::gauss(4),
            None,
            &ExpandConfig::default(),
        );
        assert!(matches!(r, Err(Error::SmallTimeRegime { .. })), "{r:?}");
    }

    #[test]
    fn line_fit() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, c, e) = fit_line(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14 && e < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn dilation_maps_modes() {
        let u0 = taylor_green(GridSpec::new(16).unwrap(), 0.1).unwrap();
        let d = dilate(&u0, 2).unwrap();
        assert_eq!(d.grid().n(), 32);
        let k = WaveVector::new(1, 1, 1);
        assert_eq!(d.get(0, WaveVector::new(2, 2, 2)), u0.get(0, k) * 16.0);
        // λ u(λx) has L² norm λ times the original on the same torus
        assert!((l2_norm(&d) - 2.0 * l2_norm(&u0)).abs() < 1e-12);
        assert!(dilate(&u0, 0).is_err());
    }
}
