//! Nested Duhamel iterates computed directly from the hierarchy.
//!
//! The n-th term with data u₀^{⊗(k+n)} is
//!
//! ∫₀ᵗ dt₁ ∫₀^{t₁} dt₂ … ∫₀^{t_{n−1}} dt_n
//!     𝒯⁽ᵏ⁾(t−t₁) W⁽ᵏ⁾ 𝒯⁽ᵏ⁺¹⁾(t₁−t₂) W⁽ᵏ⁺¹⁾ … W⁽ᵏ⁺ⁿ⁻¹⁾ 𝒯⁽ᵏ⁺ⁿ⁾(t_n) u₀^{⊗(k+n)}
//!
//! evaluated path by path over a product rule on the time simplex. Each
//! sequence of slot choices made by the W operators is a "history"; there
//! are k(k+1)…(k+n−1) of them.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{LowRankTensorField, RankOneTerm, SimplexQuadrature};
use crate::error::{Error, Result};
use crate::field::{
    heat_propagate, inner, l2_norm, pairwise_sum, FieldFlags, GridSpec, SpectralVectorField,
    WaveVector,
};
use crate::interact::{k_plus, vertex_bilinear};

/// Largest admissible history count k(k+1)…(k+n−1).
pub const MAX_DUHAMEL_TERMS: u64 = 10_000;

pub fn history_count(n: usize, k: usize) -> u64 {
    (0..n).fold(1u64, |acc, m| acc.saturating_mul((k + m) as u64))
}

/// One node path through the simplex t > t₁ > … > t_n > 0.
struct SimplexPath {
    times: Vec<f64>,
    weight: f64,
}

fn simplex_paths(rule: &[(f64, f64)], first: usize, n: usize, t: f64) -> Vec<SimplexPath> {
    let mut out = Vec::new();
    let mut times = vec![t * rule[first].0];
    let weight = t * rule[first].1;
    fn rec(
        rule: &[(f64, f64)],
        n: usize,
        times: &mut Vec<f64>,
        w: f64,
        out: &mut Vec<SimplexPath>,
    ) {
        if times.len() == n {
            out.push(SimplexPath {
                times: times.clone(),
                weight: w,
            });
            return;
        }
        let s = *times.last().expect("nonempty");
        for &(x, wx) in rule {
            times.push(s * x);
            rec(rule, n, times, w * s * wx, out);
            times.pop();
        }
    }
    rec(rule, n, &mut times, weight, &mut out);
    out
}

/// State entering the innermost W.
enum Innermost<'a> {
    /// Free evolution e^{t_nΔ}u₀ in every slot.
    Free(&'a SpectralVectorField),
    /// Fixed factors, not propagated (remainder terms with frozen data).
    Frozen(&'a [Arc<SpectralVectorField>]),
}

/// Rank-one terms of one path, in history order.
fn path_histories(
    start: &Innermost<'_>,
    k: usize,
    t: f64,
    path: &SimplexPath,
    evals: &mut u64,
) -> Result<Vec<Vec<Arc<SpectralVectorField>>>> {
    let n = path.times.len();
    let first = match start {
        Innermost::Free(u0) => {
            let free = Arc::new(heat_propagate(u0, path.times[n - 1])?);
            (0..k + n).map(|_| Arc::clone(&free)).collect()
        }
        Innermost::Frozen(factors) => factors.to_vec(),
    };
    let mut items: Vec<Vec<Arc<SpectralVectorField>>> = vec![first];
    for m in (1..=n).rev() {
        let order = k + m;
        let mut next = Vec::with_capacity(items.len() * (order - 1));
        for factors in &items {
            let last = &factors[order - 1];
            for j in 0..order - 1 {
                let merged = vertex_bilinear(&factors[j], last)?;
                *evals += 1;
                let mut f = factors[..order - 1].to_vec();
                f[j] = Arc::new(merged);
                next.push(f);
            }
        }
        let later = if m == 1 { t } else { path.times[m - 2] };
        let dt = later - path.times[m - 1];
        // propagate each distinct factor once
        let mut done: HashMap<*const SpectralVectorField, Arc<SpectralVectorField>> =
            HashMap::new();
        for f in next.iter_mut() {
            for slot in f.iter_mut() {
                let key = Arc::as_ptr(slot);
                let propagated = match done.get(&key) {
                    Some(p) => p.clone(),
                    None => {
                        let p = Arc::new(heat_propagate(slot, dt)?);
                        done.insert(key, p.clone());
                        p
                    }
                };
                *slot = propagated;
            }
        }
        items = next;
    }
    Ok(items)
}

fn duhamel_with_rule(
    n: usize,
    k: usize,
    t: f64,
    start: &Innermost<'_>,
    grid: GridSpec,
    q: &SimplexQuadrature,
) -> Result<(LowRankTensorField, u64)> {
    let histories = history_count(n, k) as usize;
    let rule = q.rule()?;
    // one task per outermost node, merged in node order
    let partial: Vec<Result<(Vec<Vec<RankOneTerm>>, u64)>> = (0..rule.len())
        .into_par_iter()
        .map(|first| {
            let mut evals = 0u64;
            let mut per_history: Vec<Vec<RankOneTerm>> = vec![Vec::new(); histories];
            // order one: accumulate each history in path order instead of
            // keeping one term per path
            let mut sums: Vec<SpectralVectorField> = Vec::new();
            if k == 1 {
                sums = vec![SpectralVectorField::zeros(grid); histories];
            }
            for path in simplex_paths(&rule, first, n, t) {
                let items = path_histories(start, k, t, &path, &mut evals)?;
                for (h, factors) in items.into_iter().enumerate() {
                    let coeff = Complex64::new(path.weight, 0.0);
                    if k == 1 {
                        sums[h].axpy(coeff, &factors[0])?;
                    } else {
                        per_history[h].push(RankOneTerm { coeff, factors });
                    }
                }
            }
            for (h, f) in sums.into_iter().enumerate() {
                per_history[h].push(RankOneTerm {
                    coeff: Complex64::new(1.0, 0.0),
                    factors: vec![Arc::new(f)],
                });
            }
            Ok((per_history, evals))
        })
        .collect();
    let mut evals = 0;
    let mut by_history: Vec<Vec<RankOneTerm>> = vec![Vec::new(); histories];
    for p in partial {
        let (per, e) = p?;
        evals += e;
        for (h, terms) in per.into_iter().enumerate() {
            by_history[h].extend(terms);
        }
    }
    let terms = if k == 1 {
        // order one: collapse each history to a single field
        by_history
            .into_iter()
            .map(|terms| {
                let parts: Vec<SpectralVectorField> =
                    terms.iter().map(|t| t.factors[0].scaled(t.coeff)).collect();
                let mut f = pairwise_sum(grid, &parts)?;
                f.flags = FieldFlags {
                    divergence_free: true,
                    mean_zero: true,
                };
                Ok(RankOneTerm {
                    coeff: Complex64::new(1.0, 0.0),
                    factors: vec![Arc::new(f)],
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        by_history.into_iter().flatten().collect()
    };
    Ok((LowRankTensorField::new(k, grid, terms)?, evals))
}

fn check_request(n: usize, k: usize, t: f64, q: &SimplexQuadrature) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("Duhamel order and rank must be positive"));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let count = history_count(n, k);
    if count > MAX_DUHAMEL_TERMS {
        return Err(Error::CapExceeded {
            what: "Duhamel rank-one terms",
            value: count,
            cap: MAX_DUHAMEL_TERMS,
        });
    }
    q.validate()
}

/// The n-th fully expanded Duhamel term for data u₀^{⊗(k+n)}.
///
/// For k = 1 the result has exactly n! terms, one field per history. For
/// larger k every (history, node path) pair contributes its own term.
pub fn duhamel_term_direct(
    n: usize,
    k: usize,
    t: f64,
    u0: &SpectralVectorField,
    q: &SimplexQuadrature,
) -> Result<LowRankTensorField> {
    check_request(n, k, t, q)?;
    Ok(duhamel_with_rule(n, k, t, &Innermost::Free(u0), u0.grid(), q)?.0)
}

/// ∫₀ᵗ dt₁ … ∫₀^{t_{n−1}} dt_n 𝒯⁽ᵏ⁾(t−t₁)W⁽ᵏ⁾ … 𝒯(t_{n−1}−t_n) W⁽ᵏ⁺ⁿ⁻¹⁾ f
/// for a fixed rank-one state f = f₁ ⊗ … ⊗ f_{k+n} that is not evolved.
pub fn duhamel_remainder_frozen(
    k: usize,
    t: f64,
    factors: &[SpectralVectorField],
    q: &SimplexQuadrature,
) -> Result<LowRankTensorField> {
    let grid = factors
        .first()
        .ok_or_else(|| Error::invalid("no factors given"))?
        .grid();
    if factors.len() <= k {
        return Err(Error::invalid("need more factors than the output order"));
    }
    let n = factors.len() - k;
    check_request(n, k, t, q)?;
    let shared: Vec<Arc<SpectralVectorField>> =
        factors.iter().map(|f| Arc::new(f.clone())).collect();
    Ok(duhamel_with_rule(n, k, t, &Innermost::Frozen(&shared), grid, q)?.0)
}

#[derive(Clone, Debug)]
pub struct DuhamelEstimate {
    pub value: LowRankTensorField,
    /// Norm of the difference to the comparison rule.
    pub error_estimate: f64,
    pub vertex_evals: u64,
}

impl DuhamelEstimate {
    /// The represented field when k = 1.
    pub fn field(&self) -> Result<SpectralVectorField> {
        self.value.to_field()
    }
}

/// As [`duhamel_term_direct`], also evaluated with the comparison rule.
/// For k > 1 the difference norm comes from the Gram matrix and is limited
/// to roughly √ε relative accuracy.
pub fn duhamel_term_with_estimate(
    n: usize,
    k: usize,
    t: f64,
    u0: &SpectralVectorField,
    q: &SimplexQuadrature,
) -> Result<DuhamelEstimate> {
    check_request(n, k, t, q)?;
    let start = Innermost::Free(u0);
    let (value, evals) = duhamel_with_rule(n, k, t, &start, u0.grid(), q)?;
    let (check, evals2) = duhamel_with_rule(n, k, t, &start, u0.grid(), &q.check())?;
    let error_estimate = if k == 1 {
        l2_norm(&value.to_field()?.sub(&check.to_field()?)?)
    } else {
        value.add(&check.scaled(Complex64::new(-1.0, 0.0)))?.norm()
    };
    Ok(DuhamelEstimate {
        value,
        error_estimate,
        vertex_evals: evals + evals2,
    })
}

/// |⟨u₀, W⁺_{1,2}(u₀ ⊗ u₀)⟩| with W⁺ = −K⁺. For real u₀ this equals
/// ½|∫|u₀|² ∇·u₀|, so it vanishes for divergence-free data.
pub fn consistency_check(u0: &SpectralVectorField) -> Result<f64> {
    let w_plus = k_plus(u0, u0)?.scaled(Complex64::new(-1.0, 0.0));
    Ok(inner(u0, &w_plus)?.norm())
}

/// |⟨u₀^{⊗k}, Σ_j W⁺_{j,k+1} u₀^{⊗(k+1)}⟩| evaluated through the low-rank
/// representation.
pub fn consistency_residual_k(u0: &SpectralVectorField, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("consistency needs k >= 1"));
    }
    let shared = Arc::new(u0.clone());
    let mut terms = Vec::with_capacity(k);
    for j in 0..k {
        let mut factors = vec![shared.clone(); k];
        factors[j] = Arc::new(k_plus(&shared, &shared)?.scaled(Complex64::new(-1.0, 0.0)));
        terms.push(RankOneTerm {
            coeff: Complex64::new(1.0, 0.0),
            factors,
        });
    }
    let applied = LowRankTensorField::new(k, u0.grid(), terms)?;
    let power = super::tensor_power(u0, k)?;
    Ok(power.inner(&applied)?.norm())
}

/// u = (sin x, 0, cos x + cos 2x): compressible, with ½∫|u|² ∇·u = 2π³.
pub fn compressible_fixture(grid: GridSpec) -> Result<SpectralVectorField> {
    if grid.band() < 2 {
        return Err(Error::invalid(
            "grid too small for the compressible fixture",
        ));
    }
    let m = grid.len() as f64;
    let mut u = SpectralVectorField::zeros(grid);
    let e = |a| WaveVector::new(a, 0, 0);
    u.set(0, e(1), Complex64::new(0.0, -m / 2.0));
    u.set(0, e(-1), Complex64::new(0.0, m / 2.0));
    for a in [1, -1, 2, -2] {
        u.set(2, e(a), Complex64::new(m / 2.0, 0.0));
    }
    u.flags = FieldFlags {
        divergence_free: false,
        mean_zero: true,
    };
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{random_divfree, rel_l2_diff, taylor_green};
    use crate::hierarchy::QuadScheme;

    #[test]
    fn history_counts() {
        assert_eq!(history_count(3, 1), 6);
        assert_eq!(history_count(2, 2), 6);
        assert_eq!(history_count(1, 4), 4);
    }

    #[test]
    fn first_term_matches_fine_quadrature() {
        let g = GridSpec::new(8).unwrap();
        let u0 = taylor_green(g, 1.0).unwrap();
        let t = 0.05;
        let d = duhamel_term_direct(1, 1, t, &u0, &SimplexQuadrature::default()).unwrap();
        assert_eq!(d.term_count(), 1);
        // composite midpoint with Richardson extrapolation on the closed integrand
        let mid = |panels: usize| {
            let h = t / panels as f64;
            let parts: Vec<_> = (0..panels)
                .map(|i| {
                    let s = (i as f64 + 0.5) * h;
                    let v = heat_propagate(&u0, s).unwrap();
                    heat_propagate(&vertex_bilinear(&v, &v).unwrap(), t - s)
                        .unwrap()
                        .scaled(Complex64::new(h, 0.0))
                })
                .collect();
            pairwise_sum(g, &parts).unwrap()
        };
        let (a, b) = (mid(200), mid(400));
        let extrap = b
            .scaled(Complex64::new(4.0 / 3.0, 0.0))
            .sub(&a.scaled(Complex64::new(1.0 / 3.0, 0.0)))
            .unwrap();
        let rel = rel_l2_diff(&d.to_field().unwrap(), &extrap).unwrap();
        assert!(rel < 1e-9, "rel = {rel}");
    }

    #[test]
    fn term_count_and_zero_data() {
        let g = GridSpec::new(4).unwrap();
        let u0 = taylor_green(g, 0.5).unwrap();
        let q = SimplexQuadrature::gauss(3);
        let d = duhamel_term_direct(3, 1, 0.05, &u0, &q).unwrap();
        assert_eq!(d.term_count(), 6);
        let z = duhamel_term_direct(2, 1, 0.05, &SpectralVectorField::zeros(g), &q).unwrap();
        assert!(z.to_field().unwrap().is_zero());
        assert!(matches!(
            duhamel_term_direct(8, 1, 0.05, &u0, &q),
            Err(Error::CapExceeded { .. })
        ));
        assert!(duhamel_term_direct(1, 1, -0.1, &u0, &q).is_err());
    }

    #[test]
    fn gauss_beats_midpoint() {
        let g = GridSpec::new(8).unwrap();
        let u0 = random_divfree(g, 4, 3.0, 2.0).unwrap();
        let t = 0.1;
        let fine = duhamel_term_direct(2, 1, t, &u0, &SimplexQuadrature::gauss(12))
            .unwrap()
            .to_field()
            .unwrap();
        let gl = duhamel_term_direct(2, 1, t, &u0, &SimplexQuadrature::gauss(4))
            .unwrap()
            .to_field()
            .unwrap();
        let mid = SimplexQuadrature {
            scheme: QuadScheme::Uniform,
            nodes: 4,
            check_nodes: 8,
        };
        let mp = duhamel_term_direct(2, 1, t, &u0, &mid)
            .unwrap()
            .to_field()
            .unwrap();
        let (e_gl, e_mp) = (
            rel_l2_diff(&gl, &fine).unwrap(),
            rel_l2_diff(&mp, &fine).unwrap(),
        );
        assert!(e_gl < 1e-6 && e_mp > 1e-4, "{e_gl} {e_mp}");
    }

    #[test]
    fn consistency_examples() {
        let g = GridSpec::new(16).unwrap();
        let u = random_divfree(g, 9, 3.0, 1.0).unwrap();
        assert!(consistency_check(&u).unwrap() < 1e-13);
        assert_eq!(
            consistency_check(&SpectralVectorField::zeros(g)).unwrap(),
            0.0
        );
        let c = compressible_fixture(g).unwrap();
        let r = consistency_check(&c).unwrap();
        let expect = 2.0 * std::f64::consts::PI.powi(3);
        assert!((r - expect).abs() < 1e-10 * expect, "{r} vs {expect}");
        assert!(r > 1e-3 * l2_norm(&c).powi(3));
    }

    #[test]
    fn consistency_at_rank_two() {
        let g = GridSpec::new(8).unwrap();
        let u = random_divfree(g, 10, 3.0, 1.0).unwrap();
        assert!(consistency_residual_k(&u, 2).unwrap() < 1e-13);
        let c = compressible_fixture(g).unwrap();
        let r1 = consistency_check(&c).unwrap();
        let r2 = consistency_residual_k(&c, 2).unwrap();
        // two slots, each giving ‖u‖² times the k = 1 pairing
        let expect = 2.0 * l2_norm(&c).powi(2) * r1;
        assert!((r2 - expect).abs() < 1e-10 * expect);
    }
}
