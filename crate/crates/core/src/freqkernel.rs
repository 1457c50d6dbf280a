//! Frequency-space kernels of single trees, evaluated for one momentum
//! configuration at a time.
//!
//! Every edge `e` carries a propagator `1/(γ_e − q_e² + iτ_e)` and, at each
//! vertex, the frequencies satisfy `τ_a = τ_b + τ_c`. Resolving those
//! constraints leaves one convolution per vertex and one outer integral
//! against `e^{−t(γ_r + iτ)}` at the root. All τ integrals use the measure
//! dτ/2π.
//!
//! Values are normalized so that the scalar kernel equals the time-ordered
//! heat integral of the tree: for the single-vertex tree,
//! `∫₀ᵗ e^{−(t−s)q_a² − s q_b² − s q_c²} ds`. The full collision contribution
//! is that scalar times the vertex algebra applied to the leaf amplitudes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, WaveVector};
use crate::hierarchy::gauss_legendre_unit;
use crate::treecomb::{Branch, MarkedBinaryTree};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest tree evaluated in frequency space.
pub const MAX_KERNEL_VERTICES: usize = 2;

/// Strictly negative edge weights, additive at every vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaAssignment {
    values: BTreeMap<Vec<Branch>, f64>,
}

impl GammaAssignment {
    /// Leaf values in canonical (marked-first) leaf order determine the rest.
    pub fn from_leaves(tree: &MarkedBinaryTree, leaves: &[f64]) -> Result<Self> {
        let paths = tree.leaf_paths();
        if paths.len() != leaves.len() {
            return Err(Error::invalid(format!(
                "tree has {} leaves, {} gammas given",
                paths.len(),
                leaves.len()
            )));
        }
        if let Some(g) = leaves.iter().find(|g| !(**g < 0.0)) {
            return Err(Error::invalid(format!(
                "gamma must be strictly negative, got {g}"
            )));
        }
        let mut values = BTreeMap::new();
        let mut it = leaves.iter().copied();
        fn fill(
            t: &MarkedBinaryTree,
            path: &mut Vec<Branch>,
            it: &mut dyn Iterator<Item = f64>,
            out: &mut BTreeMap<Vec<Branch>, f64>,
        ) -> f64 {
            let g = match t.daughters() {
                None => it.next().expect("leaf count checked"),
                Some((m, u)) => {
                    path.push(Branch::Marked);
                    let a = fill(m, path, it, out);
                    path.pop();
                    path.push(Branch::Unmarked);
                    let b = fill(u, path, it, out);
                    path.pop();
                    a + b
                }
            };
            out.insert(path.clone(), g);
            g
        }
        fill(tree, &mut Vec::new(), &mut it, &mut values);
        Ok(GammaAssignment { values })
    }

    /// Accepts a full edge map after checking sign and additivity.
    pub fn from_map(tree: &MarkedBinaryTree, values: BTreeMap<Vec<Branch>, f64>) -> Result<Self> {
        let edges = tree.edge_paths();
        if edges.len() != values.len() || edges.iter().any(|e| !values.contains_key(e)) {
            return Err(Error::invalid(
                "gamma map does not match the edges of the tree",
            ));
        }
        if let Some(g) = values.values().find(|g| !(**g < 0.0)) {
            return Err(Error::invalid(format!(
                "gamma must be strictly negative, got {g}"
            )));
        }
        for v in tree.vertex_paths() {
            let a = values[&v];
            let mut b = v.clone();
            b.push(Branch::Marked);
            let mut c = v.clone();
            c.push(Branch::Unmarked);
            let (gb, gc) = (values[&b], values[&c]);
            if (a - gb - gc).abs() > 1e-12 * a.abs() {
                return Err(Error::invalid(format!(
                    "gamma not additive at vertex {v:?}"
                )));
            }
        }
        Ok(GammaAssignment { values })
    }

    pub fn get(&self, edge: &[Branch]) -> Option<f64> {
        self.values.get(edge).copied()
    }

    pub fn values(&self) -> &BTreeMap<Vec<Branch>, f64> {
        &self.values
    }
}

/// Leaf momenta in canonical leaf order; internal momenta follow from
/// q_a = q_b + q_c.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentumAssignment {
    pub leaves: Vec<WaveVector>,
}

impl MomentumAssignment {
    pub fn new(leaves: Vec<WaveVector>) -> Self {
        MomentumAssignment { leaves }
    }

    /// Momentum of every edge, keyed by path.
    pub fn edge_momenta(
        &self,
        tree: &MarkedBinaryTree,
    ) -> Result<BTreeMap<Vec<Branch>, WaveVector>> {
        if tree.leaf_count() != self.leaves.len() {
            return Err(Error::invalid(format!(
                "tree has {} leaves, {} momenta given",
                tree.leaf_count(),
                self.leaves.len()
            )));
        }
        let mut out = BTreeMap::new();
        let mut it = self.leaves.iter().copied();
        fn fill(
            t: &MarkedBinaryTree,
            path: &mut Vec<Branch>,
            it: &mut dyn Iterator<Item = WaveVector>,
            out: &mut BTreeMap<Vec<Branch>, WaveVector>,
        ) -> WaveVector {
            let q = match t.daughters() {
                None => it.next().expect("leaf count checked"),
                Some((m, u)) => {
                    path.push(Branch::Marked);
                    let a = fill(m, path, it, out);
                    path.pop();
                    path.push(Branch::Unmarked);
                    let b = fill(u, path, it, out);
                    path.pop();
                    a + b
                }
            };
            out.insert(path.clone(), q);
            q
        }
        fill(tree, &mut Vec::new(), &mut it, &mut out);
        Ok(out)
    }

    pub fn root(&self) -> WaveVector {
        self.leaves
            .iter()
            .fold(WaveVector::new(0, 0, 0), |a, &b| a + b)
    }

    /// Every edge momentum must be a retained mode of `grid`.
    pub fn check_grid(&self, tree: &MarkedBinaryTree, grid: &GridSpec) -> Result<()> {
        for (path, q) in self.edge_momenta(tree)? {
            if !grid.in_range(q) || !grid.retained(q) {
                return Err(Error::invalid(format!(
                    "momentum {q:?} on edge {path:?} is not a retained mode"
                )));
            }
        }
        Ok(())
    }
}

/// Panel rules for the τ integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauQuadrature {
    /// Lower bound on the truncation point T of the outer integral.
    pub half_width: f64,
    /// T is at least `kappa / t`, so the oscillation has ≳ κ/2π periods.
    pub kappa: f64,
    /// Gauss–Legendre nodes per panel, even.
    pub panel_nodes: usize,
    /// Integration-by-parts terms in each outer tail.
    pub tail_terms: usize,
}

impl Default for TauQuadrature {
    fn default() -> Self {
        TauQuadrature {
            half_width: 200.0,
            kappa: 40.0,
            panel_nodes: 12,
            tail_terms: 4,
        }
    }
}

impl TauQuadrature {
    pub fn validate(&self) -> Result<()> {
        if self.panel_nodes < 4 || !self.panel_nodes.is_multiple_of(2) || self.panel_nodes > 64 {
            return Err(Error::Quadrature(format!(
                "panel node count must be even and in 4..=64, got {}",
                self.panel_nodes
            )));
        }
        if !(self.half_width > 0.0) || !(self.kappa > 0.0) {
            return Err(Error::Quadrature(
                "half-width and kappa must be positive".into(),
            ));
        }
        if self.tail_terms == 0 || self.tail_terms > 6 {
            return Err(Error::Quadrature("tail terms must be in 1..=6".into()));
        }
        Ok(())
    }

    /// The refined rule used for error estimates.
    pub fn check(&self) -> Self {
        TauQuadrature {
            half_width: 1.5 * self.half_width,
            kappa: 1.5 * self.kappa,
            panel_nodes: self.panel_nodes + 8,
            tail_terms: self.tail_terms,
        }
    }

    fn truncation(&self, t: f64) -> f64 {
        if t == 0.0 {
            self.half_width
        } else {
            self.half_width.max(self.kappa / t.abs())
        }
    }
}

/// Result of one τ quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauValue {
    pub value: Complex64,
    /// T·(|g(T)| + |g(−T)|) for the outer integrand g.
    pub tail_bound: f64,
    /// Magnitude of the last integration-by-parts term kept.
    pub tail_remainder: f64,
    pub truncation: f64,
}

/// Propagator structure of a tree: c_e = q_e² − γ_e on every edge.
#[derive(Clone, Debug)]
enum Node {
    Leaf {
        c: f64,
    },
    Vertex {
        c: f64,
        min_c: f64,
        sum_c: f64,
        b: Box<Node>,
        d: Box<Node>,
    },
}

impl Node {
    fn min_c(&self) -> f64 {
        match self {
            Node::Leaf { c } => *c,
            Node::Vertex { min_c, .. } => *min_c,
        }
    }

    fn sum_c(&self) -> f64 {
        match self {
            Node::Leaf { c } => *c,
            Node::Vertex { sum_c, .. } => *sum_c,
        }
    }

    fn vertex(c: f64, b: Node, d: Node) -> Node {
        Node::Vertex {
            c,
            min_c: c.min(b.min_c()).min(d.min_c()),
            sum_c: c + b.sum_c() + d.sum_c(),
            b: Box::new(b),
            d: Box::new(d),
        }
    }

    /// D̃(τ) = 1/(c − iτ) · ∫ dτ'/2π D̃_b(τ') D̃_d(τ − τ').
    fn eval(&self, tau: f64, rules: &Rules) -> Complex64 {
        match self {
            Node::Leaf { c } => 1.0 / Complex64::new(*c, -tau),
            Node::Vertex { c, b, d, .. } => {
                let peaks = [(0.0, b.min_c()), (tau, d.min_c())];
                let reach = 4.0 * b.sum_c().max(d.sum_c());
                let h = integrate_line(
                    |s| b.eval(s, rules) * d.eval(tau - s, rules),
                    &peaks,
                    reach,
                    rules,
                );
                h / (2.0 * PI) / Complex64::new(*c, -tau)
            }
        }
    }
}

struct Rules {
    panel: Arc<Vec<(f64, f64)>>,
}

impl Rules {
    fn new(nodes: usize) -> Result<Self> {
        Ok(Rules {
            panel: gauss_legendre_unit(nodes)?,
        })
    }

    fn panel_sum(&self, a: f64, b: f64, f: &dyn Fn(f64) -> Complex64) -> Complex64 {
        let len = b - a;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(x, w) in self.panel.iter() {
            acc += f(a + len * x) * w;
        }
        acc * len
    }
}

/// Breakpoints on [lo, hi] graded geometrically towards each peak and no
/// further apart than `max_len`.
fn graded_edges(lo: f64, hi: f64, peaks: &[(f64, f64)], max_len: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    let span = hi - lo;
    for &(x0, w) in peaks {
        if x0 > lo && x0 < hi {
            pts.push(x0);
        }
        let mut d = 0.5 * w;
        while d < span {
            for p in [x0 - d, x0 + d] {
                if p > lo && p < hi {
                    pts.push(p);
                }
            }
            d *= 2.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    let tiny = 1e-12 * span.max(1.0);
    pts.dedup_by(|a, b| (*a - *b).abs() < tiny);
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let pieces = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
        }
    }
    out
}

/// ∫_ℝ f for an integrand decaying at least like 1/τ² beyond the peaks;
/// tails beyond `reach` of the outermost peak are mapped to [0, 1].
fn integrate_line(
    f: impl Fn(f64) -> Complex64,
    peaks: &[(f64, f64)],
    reach: f64,
    rules: &Rules,
) -> Complex64 {
    let lo = peaks.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - reach;
    let hi = peaks.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + reach;
    let mut acc = Complex64::new(0.0, 0.0);
    let edges = graded_edges(lo, hi, peaks, f64::INFINITY);
    for w in edges.windows(2) {
        acc += rules.panel_sum(w[0], w[1], &f);
    }
    acc + mapped_tails(&f, lo, hi, reach, rules)
}

/// ∫_{hi}^∞ f + ∫_{−∞}^{lo} f with τ = hi + L(1−u)/u (and mirrored), both
/// tails summed at the same u so slowly decaying odd parts cancel.
fn mapped_tails(
    f: &dyn Fn(f64) -> Complex64,
    lo: f64,
    hi: f64,
    scale: f64,
    rules: &Rules,
) -> Complex64 {
    let tail = |u: f64| {
        if u <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let d = scale * (1.0 - u) / u;
        (f(hi + d) + f(lo - d)) * (scale / (u * u))
    };
    rules.panel_sum(0.0, 0.5, &tail) + rules.panel_sum(0.5, 1.0, &tail)
}

/// Fornberg weights for derivatives 0..=m at x0 from samples at `xs`.
fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivatives g^{(m)}(x0), m < count, from a 9-point stencil of spacing h.
fn derivatives(
    g: &(dyn Fn(f64) -> Complex64 + Sync),
    x0: f64,
    h: f64,
    count: usize,
) -> Vec<Complex64> {
    let xs: Vec<f64> = (-4..=4).map(|j| x0 + h * j as f64).collect();
    let vals: Vec<Complex64> = xs.par_iter().map(|&x| g(x)).collect();
    let w = fd_weights(x0, &xs, count.saturating_sub(1));
    w.iter()
        .map(|row| row.iter().zip(&vals).map(|(a, v)| v * *a).sum())
        .collect()
}

/// ∫_ℝ g(τ) e^{−iωτ} dτ: graded panels on [−T, T] no longer than π/|ω|,
/// and integration by parts beyond ±T. For ω = 0 the tails are mapped.
fn integrate_oscillatory(
    g: &(dyn Fn(f64) -> Complex64 + Sync),
    omega: f64,
    peak_width: f64,
    quad: &TauQuadrature,
) -> Result<TauValue> {
    quad.validate()?;
    let rules = Rules::new(quad.panel_nodes)?;
    let big_t = quad.truncation(omega);
    let max_len = if omega == 0.0 {
        f64::INFINITY
    } else {
        PI / omega.abs()
    };
    let edges = graded_edges(-big_t, big_t, &[(0.0, peak_width)], max_len);
    let panel = rules.panel.clone();
    let integrand = |tau: f64| g(tau) * (-I * omega * tau).exp();
    let pieces: Vec<Complex64> = edges
        .par_windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            panel
                .iter()
                .map(|&(x, wt)| integrand(w[0] + len * x) * wt)
                .sum::<Complex64>()
                * len
        })
        .collect();
    let mut value: Complex64 = pieces.into_iter().sum();
    let tail_bound = big_t * (g(big_t).norm() + g(-big_t).norm());
    let mut tail_remainder = 0.0;
    if omega == 0.0 {
        value += mapped_tails(&integrand, -big_t, big_t, big_t, &rules);
    } else {
        let h = big_t / 32.0;
        let dr = derivatives(g, big_t, h, quad.tail_terms);
        let dl = derivatives(g, -big_t, h, quad.tail_terms);
        let iw = I * omega;
        let er = (-I * omega * big_t).exp();
        let el = (I * omega * big_t).exp();
        let mut pow = iw;
        for m in 0..quad.tail_terms {
            let right = er * dr[m] / pow;
            let left = -el * dl[m] / pow;
            value += right + left;
            tail_remainder = right.norm() + left.norm();
            pow *= iw;
        }
    }
    Ok(TauValue {
        value,
        tail_bound,
        tail_remainder,
        truncation: big_t,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatIdentity {
    /// The quadrature value of ∫ dτ/2π e^{−s(γ+iτ)} / (q² − γ − iτ).
    pub value: Complex64,
    /// Distance to e^{−sq²} for s > 0, to 0 for s < 0.
    pub residual: f64,
    pub tail_bound: f64,
}

/// The Cauchy representation of the heat factor: for γ < 0,
/// e^{−sq²} + ∫ dτ/2π e^{−s(γ+iτ)}/(γ − q² + iτ) vanishes for s > 0, and
/// the integral alone vanishes for s < 0. The returned value has the
/// propagator sign flipped so that it approximates e^{−sq²} itself.
pub fn heat_identity_residual(
    s: f64,
    q2: f64,
    gamma: f64,
    quad: &TauQuadrature,
) -> Result<HeatIdentity> {
    if !(gamma < 0.0) || !(q2 >= 0.0) {
        return Err(Error::invalid("need γ < 0 and q² ≥ 0"));
    }
    if s == 0.0 {
        return Err(Error::invalid("the identity is discontinuous at s = 0"));
    }
    let c = q2 - gamma;
    let pre = (-s * gamma).exp() / (2.0 * PI);
    let g = move |tau: f64| pre / Complex64::new(c, -tau);
    let v = integrate_oscillatory(&g, s, c, quad)?;
    let target = if s > 0.0 { (-s * q2).exp() } else { 0.0 };
    Ok(HeatIdentity {
        value: v.value,
        residual: (v.value - target).norm(),
        tail_bound: v.tail_bound,
    })
}

fn check_tree(tree: &MarkedBinaryTree) -> Result<()> {
    if tree.vertex_count() > MAX_KERNEL_VERTICES {
        return Err(Error::CapExceeded {
            what: "frequency-kernel tree vertices",
            value: tree.vertex_count() as u64,
            cap: MAX_KERNEL_VERTICES as u64,
        });
    }
    Ok(())
}

/// Builds the propagator tree; `frozen` names a vertex whose daughters lose
/// their propagators, which turns it into a leaf carrying its own momentum.
fn build_nodes(
    tree: &MarkedBinaryTree,
    gamma: &GammaAssignment,
    mom: &MomentumAssignment,
    frozen: Option<&[Branch]>,
) -> Result<Node> {
    let q = mom.edge_momenta(tree)?;
    if let Some(g) = gamma.values().keys().find(|k| !q.contains_key(*k)) {
        return Err(Error::invalid(format!(
            "gamma given for unknown edge {g:?}"
        )));
    }
    fn rec(
        t: &MarkedBinaryTree,
        path: &mut Vec<Branch>,
        gamma: &GammaAssignment,
        q: &BTreeMap<Vec<Branch>, WaveVector>,
        frozen: Option<&[Branch]>,
    ) -> Result<Node> {
        let g = gamma
            .get(path)
            .ok_or_else(|| Error::invalid(format!("no gamma on edge {path:?}")))?;
        let c = q[path.as_slice()].norm2() as f64 - g;
        match t.daughters() {
            Some((m, u)) if frozen != Some(path.as_slice()) => {
                path.push(Branch::Marked);
                let b = rec(m, path, gamma, q, frozen)?;
                path.pop();
                path.push(Branch::Unmarked);
                let d = rec(u, path, gamma, q, frozen)?;
                path.pop();
                Ok(Node::vertex(c, b, d))
            }
            _ => Ok(Node::Leaf { c }),
        }
    }
    rec(tree, &mut Vec::new(), gamma, &q, frozen)
}

fn root_integral(nodes: &Node, gamma_root: f64, t: f64, quad: &TauQuadrature) -> Result<TauValue> {
    let rules = Rules::new(quad.panel_nodes)?;
    let pre = (-t * gamma_root).exp() / (2.0 * PI);
    let g = |tau: f64| nodes.eval(tau, &rules) * pre;
    integrate_oscillatory(&g, t, nodes.min_c(), quad)
}

/// Scalar kernel with a quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    /// |value − value with the refined rule| + last tail term.
    pub error_estimate: f64,
    pub tail_bound: f64,
}

fn with_estimate(
    f: impl Fn(&TauQuadrature) -> Result<TauValue>,
    quad: &TauQuadrature,
) -> Result<KernelValue> {
    let a = f(quad)?;
    let b = f(&quad.check())?;
    Ok(KernelValue {
        value: a.value,
        error_estimate: (a.value - b.value).norm() + a.tail_remainder,
        tail_bound: a.tail_bound,
    })
}

/// The scalar part of the collision kernel of `tree` at time `t` for one
/// momentum configuration and one γ family.
pub fn kernel_scalar(
    tree: &MarkedBinaryTree,
    t: f64,
    gamma: &GammaAssignment,
    mom: &MomentumAssignment,
    quad: &TauQuadrature,
) -> Result<TauValue> {
    check_tree(tree)?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if tree.is_trivial() {
        return Err(Error::invalid("the trivial tree has no τ integral"));
    }
    let nodes = build_nodes(tree, gamma, mom, None)?;
    root_integral(&nodes, gamma.get(&[]).expect("root gamma"), t, quad)
}

/// The vertex algebra on single-mode data: each vertex maps amplitudes
/// (A at q_b, B at q_c) to −i(p·B)(A − p(p·A)/|p|²) at p = q_b + q_c.
pub fn vertex_amplitude(
    tree: &MarkedBinaryTree,
    mom: &MomentumAssignment,
    amplitudes: &[[Complex64; 3]],
) -> Result<(WaveVector, [Complex64; 3])> {
    if amplitudes.len() != tree.leaf_count() || mom.leaves.len() != tree.leaf_count() {
        return Err(Error::invalid(
            "one momentum and one amplitude per leaf required",
        ));
    }
    fn rec(
        t: &MarkedBinaryTree,
        q: &[WaveVector],
        a: &[[Complex64; 3]],
    ) -> (WaveVector, [Complex64; 3]) {
        match t.daughters() {
            None => (q[0], a[0]),
            Some((m, u)) => {
                let split = m.leaf_count();
                let (qb, ab) = rec(m, &q[..split], &a[..split]);
                let (qc, ac) = rec(u, &q[split..], &a[split..]);
                let p = qb + qc;
                let pf = p.as_f64();
                let p2 = p.norm2() as f64;
                if p2 == 0.0 {
                    return (p, [Complex64::new(0.0, 0.0); 3]);
                }
                let dot = |v: &[Complex64; 3]| v[0] * pf[0] + v[1] * pf[1] + v[2] * pf[2];
                let pb = dot(&ac);
                let pa = dot(&ab);
                let mut out = [Complex64::new(0.0, 0.0); 3];
                for i in 0..3 {
                    out[i] = -I * pb * (ab[i] - pa * pf[i] / p2);
                }
                (p, out)
            }
        }
    }
    Ok(rec(tree, &mom.leaves, amplitudes))
}

/// Kernel value on single-mode leaf data: the scalar τ integral and that
/// scalar times the vertex algebra of the leaf amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneModeKernel {
    pub scalar: KernelValue,
    pub root_momentum: WaveVector,
    pub amplitude: [Complex64; 3],
}

pub fn kernel_eval_onemode(
    tree: &MarkedBinaryTree,
    t: f64,
    gamma: &GammaAssignment,
    mom: &MomentumAssignment,
    amplitudes: &[[Complex64; 3]],
    quad: &TauQuadrature,
) -> Result<OneModeKernel> {
    let scalar = with_estimate(|q| kernel_scalar(tree, t, gamma, mom, q), quad)?;
    let (root_momentum, k) = vertex_amplitude(tree, mom, amplitudes)?;
    Ok(OneModeKernel {
        scalar,
        root_momentum,
        amplitude: k.map(|z| z * scalar.value),
    })
}

/// |G(γ₁) − G(γ₂)| for the scalar kernel.
pub fn gamma_independence_residual(
    tree: &MarkedBinaryTree,
    t: f64,
    g1: &GammaAssignment,
    g2: &GammaAssignment,
    mom: &MomentumAssignment,
    quad: &TauQuadrature,
) -> Result<f64> {
    if g1 == g2 {
        return Ok(0.0);
    }
    let a = kernel_scalar(tree, t, g1, mom, quad)?;
    let b = kernel_scalar(tree, t, g2, mom, quad)?;
    Ok((a.value - b.value).norm())
}

/// Scalar error kernel with the given maximal vertex frozen: its daughters
/// carry no propagators and its frequency is not constrained by theirs.
pub fn error_kernel_scalar(
    tree: &MarkedBinaryTree,
    vertex: &[Branch],
    t: f64,
    gamma: &GammaAssignment,
    mom: &MomentumAssignment,
    quad: &TauQuadrature,
) -> Result<TauValue> {
    check_tree(tree)?;
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let node = tree
        .subtree(vertex)
        .ok_or_else(|| Error::EdgeNotFound(format!("{vertex:?}")))?;
    match node.daughters() {
        Some((m, u)) if m.is_trivial() && u.is_trivial() => {}
        _ => {
            return Err(Error::invalid(format!(
                "{vertex:?} is not a maximal vertex"
            )))
        }
    }
    let nodes = build_nodes(tree, gamma, mom, Some(vertex))?;
    root_integral(&nodes, gamma.get(&[]).expect("root gamma"), t, quad)
}

/// Q summed over the maximal vertices of the tree.
pub fn error_kernel_eval_onemode(
    tree: &MarkedBinaryTree,
    t: f64,
    gamma: &GammaAssignment,
    mom: &MomentumAssignment,
    amplitudes: &[[Complex64; 3]],
    quad: &TauQuadrature,
) -> Result<OneModeKernel> {
    let maximal = maximal_vertex_paths(tree);
    let scalar = with_estimate(
        |q| {
            let mut total = TauValue {
                value: Complex64::new(0.0, 0.0),
                tail_bound: 0.0,
                tail_remainder: 0.0,
                truncation: 0.0,
            };
            for v in &maximal {
                let r = error_kernel_scalar(tree, v, t, gamma, mom, q)?;
                total.value += r.value;
                total.tail_bound += r.tail_bound;
                total.tail_remainder += r.tail_remainder;
                total.truncation = r.truncation;
            }
            Ok(total)
        },
        quad,
    )?;
    let (root_momentum, k) = vertex_amplitude(tree, mom, amplitudes)?;
    Ok(OneModeKernel {
        scalar,
        root_momentum,
        amplitude: k.map(|z| z * scalar.value),
    })
}

pub fn maximal_vertex_paths(tree: &MarkedBinaryTree) -> Vec<Vec<Branch>> {
    tree.vertex_paths()
        .into_iter()
        .filter(|p| {
            tree.subtree(p)
                .and_then(|s| s.daughters())
                .is_some_and(|(m, u)| m.is_trivial() && u.is_trivial())
        })
        .collect()
}

/// ∫₀ᵗ Q_{T, t−s} ds for the error kernel, by Gauss–Legendre in s.
pub fn error_kernel_time_integral(
    tree: &MarkedBinaryTree,
    t: f64,
    gamma: &GammaAssignment,
    mom: &MomentumAssignment,
    quad: &TauQuadrature,
    s_nodes: usize,
) -> Result<Complex64> {
    let rule = gauss_legendre_unit(s_nodes)?;
    let maximal = maximal_vertex_paths(tree);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(x, w) in rule.iter() {
        let sigma = t * (1.0 - x);
        for v in &maximal {
            acc += error_kernel_scalar(tree, v, sigma, gamma, mom, quad)?.value * (t * w);
        }
    }
    Ok(acc)
}

/// ∫₀ᵗ e^{−(t−s)a − s(b+c)} ds in closed form.
pub fn one_vertex_closed_form(t: f64, a: f64, b: f64, c: f64) -> f64 {
    let d = b + c - a;
    if d.abs() < 1e-12 {
        t * (-t * a).exp()
    } else {
        (-t * a).exp() * (-(-t * d).exp_m1()) / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(a: i64, b: i64, c: i64) -> WaveVector {
        WaveVector::new(a, b, c)
    }

    #[test]
    fn fornberg_weights_differentiate_polynomials() {
        let xs: Vec<f64> = (-4..=4).map(|j| 2.0 + 0.1 * j as f64).collect();
        let w = fd_weights(2.0, &xs, 3);
        let f = |x: f64| x.powi(5);
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let d: Vec<f64> = w
            .iter()
            .map(|r| r.iter().zip(&vals).map(|(a, b)| a * b).sum())
            .collect();
        let exact = [32.0, 80.0, 160.0, 240.0];
        for (a, b) in d.iter().zip(exact) {
            assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn heat_identity() {
        let q = TauQuadrature::default();
        let r = heat_identity_residual(1.0, 1.0, -1.0, &q).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        assert!((r.value.re - (-1f64).exp()).abs() < 1e-6);
        let r = heat_identity_residual(-1.0, 1.0, -0.5, &q).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        for s in [0.1, 0.01] {
            let r = heat_identity_residual(s, 2.0, -1.0, &q).unwrap();
            assert!(r.residual < 1e-6, "s={s}: {r:?}");
        }
    }

    #[test]
    fn gammas_are_additive() {
        let t = MarkedBinaryTree::caterpillar(2);
        let g = GammaAssignment::from_leaves(&t, &[-1.0, -0.5, -2.0]).unwrap();
        assert_eq!(g.get(&[]), Some(-3.5));
        assert_eq!(g.get(&[Branch::Marked]), Some(-1.5));
        assert!(GammaAssignment::from_map(&t, g.values().clone()).is_ok());
        let mut bad = g.values().clone();
        bad.insert(vec![], -3.0);
        assert!(GammaAssignment::from_map(&t, bad).is_err());
        assert!(GammaAssignment::from_leaves(&t, &[-1.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn momenta_resolve_by_conservation() {
        let t = MarkedBinaryTree::parse("(.|(.|.))").unwrap();
        let m = MomentumAssignment::new(vec![wv(1, 0, 0), wv(0, 1, 0), wv(0, 0, 2)]);
        let e = m.edge_momenta(&t).unwrap();
        assert_eq!(e.len(), t.edge_count());
        assert_eq!(e[&vec![]], m.root());
        assert_eq!(e[&vec![Branch::Unmarked]], wv(0, 1, 2));
        assert!(m.check_grid(&t, &GridSpec::new(16).unwrap()).is_ok());
        assert!(m.check_grid(&t, &GridSpec::new(4).unwrap()).is_err());
    }

    #[test]
    fn one_vertex_kernel_matches_closed_form() {
        let t = MarkedBinaryTree::cherry();
        let m = MomentumAssignment::new(vec![wv(1, 0, 0), wv(1, 1, 0)]);
        let q = TauQuadrature::default();
        for (tt, gs) in [(0.1, [-1.0, -1.0]), (0.05, [-2.0, -0.5])] {
            let g = GammaAssignment::from_leaves(&t, &gs).unwrap();
            let v = kernel_scalar(&t, tt, &g, &m, &q).unwrap();
            let exact = one_vertex_closed_form(tt, 5.0, 1.0, 2.0);
            assert!((v.value - exact).norm() < 1e-7, "{v:?} vs {exact}");
        }
    }

    #[test]
    fn kernel_vanishes_at_time_zero() {
        let q = TauQuadrature::default();
        for tree in [MarkedBinaryTree::cherry(), MarkedBinaryTree::caterpillar(2)] {
            let leaves: Vec<WaveVector> =
                (0..tree.leaf_count()).map(|i| wv(1, i as i64, 0)).collect();
            let m = MomentumAssignment::new(leaves);
            let g = GammaAssignment::from_leaves(&tree, &vec![-1.0; tree.leaf_count()]).unwrap();
            let v = kernel_scalar(&tree, 0.0, &g, &m, &q).unwrap();
            assert!(v.value.norm() < 1e-5, "{v:?}");
        }
    }

    #[test]
    fn error_kernel_single_vertex_is_heat_factor() {
        let t = MarkedBinaryTree::cherry();
        let m = MomentumAssignment::new(vec![wv(1, 0, 0), wv(1, 1, 0)]);
        let g = GammaAssignment::from_leaves(&t, &[-1.0, -0.7]).unwrap();
        let v = error_kernel_scalar(&t, &[], 0.1, &g, &m, &TauQuadrature::default()).unwrap();
        assert!((v.value - (-0.5f64).exp()).norm() < 1e-6, "{v:?}");
    }

    #[test]
    fn vertex_algebra_is_transverse() {
        let t = MarkedBinaryTree::cherry();
        let m = MomentumAssignment::new(vec![wv(1, 0, 0), wv(0, 1, 0)]);
        let a = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
        ];
        let b = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        let (p, v) = vertex_amplitude(&t, &m, &[a, b]).unwrap();
        let pf = p.as_f64();
        let dot: Complex64 = (0..3).map(|i| v[i] * pf[i]).sum();
        assert!(dot.norm() < 1e-15);
        assert!(v.iter().any(|z| z.norm() > 0.1));
    }

    #[test]
    fn caps() {
        let t = MarkedBinaryTree::caterpillar(3);
        let m = MomentumAssignment::new(vec![wv(1, 0, 0); 4]);
        let g = GammaAssignment::from_leaves(&t, &[-1.0; 4]).unwrap();
        assert!(kernel_scalar(&t, 0.1, &g, &m, &TauQuadrature::default()).is_err());
        let bad = TauQuadrature {
            panel_nodes: 7,
            ..TauQuadrature::default()
        };
        assert!(bad.validate().is_err());
    }
}
