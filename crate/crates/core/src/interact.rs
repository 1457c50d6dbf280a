//! The bilinear collision vertex.
//!
//! For a marked factor `a` and an unmarked factor `b` let
//! `C_{μi}(p) = (â_μ ⋆ b̂_i)(p)` be the lattice convolution. Then
//!
//! * `K⁺(a, b)_μ(p) = i pⁱ C_{μi}(p)`
//! * `K⁻(a, b)_μ(p) = −i p^μ p^ℓ pⁱ C_{ℓi}(p) / |p|²`
//! * `vertex_bilinear(a, b) = −(K⁺ + K⁻) = −P ∇·(a ⊗ b)`
//!
//! so that the Navier–Stokes nonlinearity is `vertex_bilinear(u, u)` and the
//! hierarchy reads `∂ₜu⁽ᵏ⁾ = Δu⁽ᵏ⁾ + W⁽ᵏ⁾u⁽ᵏ⁺¹⁾` with no further signs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{
    fft3_forward, fft3_inverse, FieldFlags, GridSpec, SpectralVectorField, WaveVector, ZERO,
};
use crate::hierarchy::{LowRankTensorField, RankOneTerm};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The nine convolutions C_{μi} = â_μ ⋆ b̂_i, row-major in (μ, i).
fn convolutions(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<Vec<Vec<Complex64>>> {
    a.check_same_grid(b)?;
    let grid = a.grid();
    let n = grid.n();
    let to_physical = |f: &SpectralVectorField| -> Vec<Vec<Complex64>> {
        (0..3)
            .map(|c| {
                let mut comp = f.component(c).to_vec();
                if grid.dealias() {
                    for (idx, z) in comp.iter_mut().enumerate() {
                        if !grid.retained(grid.wavevector(idx)) {
                            *z = ZERO;
                        }
                    }
                }
                fft3_inverse(n, &mut comp);
                comp
            })
            .collect()
    };
    let pa = to_physical(a);
    let same = std::ptr::eq(a, b) || a.coeffs() == b.coeffs();
    let pb = if same { pa.clone() } else { to_physical(b) };
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(9);
    for mu in 0..3 {
        for i in 0..3 {
            if same && i < mu {
                // C_{μi} = C_{iμ} when a = b
                let sym = out[i * 3 + mu].clone();
                out.push(sym);
                continue;
            }
            let mut prod: Vec<Complex64> = pa[mu].iter().zip(&pb[i]).map(|(x, y)| x * y).collect();
            fft3_forward(n, &mut prod);
            out.push(prod);
        }
    }
    Ok(out)
}

/// Derivative wavevector: Nyquist components are dropped when the grid is
/// not dealiased (they have no antisymmetric partner).
fn derivative_k(grid: GridSpec, k: WaveVector) -> Option<[f64; 3]> {
    if k.is_zero() || (!grid.dealias() && grid.is_nyquist(k)) || !grid.retained(k) {
        None
    } else {
        Some(k.as_f64())
    }
}

#[derive(Clone, Copy)]
enum Part {
    Plus,
    Minus,
    Vertex,
}

fn assemble(grid: GridSpec, conv: &[Vec<Complex64>], part: Part) -> SpectralVectorField {
    let m = grid.len();
    let mut out = SpectralVectorField::zeros(grid);
    let data = out.coeffs_mut();
    for idx in 0..m {
        let k = grid.wavevector(idx);
        let Some(p) = derivative_k(grid, k) else {
            continue;
        };
        let p2 = k.norm2() as f64;
        let mut d = [ZERO; 3];
        for (mu, dm) in d.iter_mut().enumerate() {
            *dm = (0..3).map(|i| conv[mu * 3 + i][idx] * p[i]).sum();
        }
        let pd: Complex64 = (0..3).map(|l| d[l] * p[l]).sum::<Complex64>() / p2;
        for mu in 0..3 {
            let plus = I * d[mu];
            let minus = -I * p[mu] * pd;
            data[mu * m + idx] = match part {
                Part::Plus => plus,
                Part::Minus => minus,
                Part::Vertex => -(plus + minus),
            };
        }
    }
    out.flags = FieldFlags {
        divergence_free: matches!(part, Part::Vertex),
        mean_zero: true,
    };
    out
}

pub fn k_plus(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<SpectralVectorField> {
    Ok(assemble(a.grid(), &convolutions(a, b)?, Part::Plus))
}

pub fn k_minus(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<SpectralVectorField> {
    Ok(assemble(a.grid(), &convolutions(a, b)?, Part::Minus))
}

/// −P∇·(a ⊗ b) via pseudo-spectral products (15 transforms).
pub fn vertex_bilinear(
    a: &SpectralVectorField,
    b: &SpectralVectorField,
) -> Result<SpectralVectorField> {
    Ok(assemble(a.grid(), &convolutions(a, b)?, Part::Vertex))
}

/// The Navier–Stokes nonlinearity −P∇·(u ⊗ u).
pub fn nonlinearity(u: &SpectralVectorField) -> Result<SpectralVectorField> {
    vertex_bilinear(u, u)
}

/// Σ_{j=1}^{k} W_{j,k+1} on a low-rank state of order k+1: slot k+1 of each
/// rank-one term is merged into slot j by the vertex.
pub fn apply_w(state: &LowRankTensorField) -> Result<LowRankTensorField> {
    let order = state.order();
    if order < 2 {
        return Err(Error::invalid("W needs a state of order at least 2"));
    }
    let k = order - 1;
    let mut terms = Vec::with_capacity(state.terms().len() * k);
    for term in state.terms() {
        let last = &term.factors[k];
        for j in 0..k {
            let merged = vertex_bilinear(&term.factors[j], last)?;
            let mut factors = term.factors[..k].to_vec();
            factors[j] = std::sync::Arc::new(merged);
            terms.push(RankOneTerm {
                coeff: term.coeff,
                factors,
            });
        }
    }
    LowRankTensorField::new(k, state.grid(), terms)
}

/// Direct O(M²) lattice convolution, independent of the transform path.
pub mod reference {
    use super::*;

    fn support(f: &SpectralVectorField) -> Vec<(WaveVector, [Complex64; 3])> {
        let grid = f.grid();
        let m = grid.len();
        (0..m)
            .filter_map(|idx| {
                let k = grid.wavevector(idx);
                if !grid.retained(k) {
                    return None;
                }
                let v = [
                    f.coeffs()[idx],
                    f.coeffs()[m + idx],
                    f.coeffs()[2 * m + idx],
                ];
                v.iter().any(|z| z.norm_sqr() > 0.0).then_some((k, v))
            })
            .collect()
    }

    /// C_{μi}(p) = N⁻³ Σ_{k} â_μ(k) b̂_i(p − k), wrapped modulo N on
    /// grids without dealiasing.
    pub fn convolutions_direct(
        a: &SpectralVectorField,
        b: &SpectralVectorField,
    ) -> Result<Vec<Vec<Complex64>>> {
        a.check_same_grid(b)?;
        let grid = a.grid();
        let m = grid.len();
        let scale = 1.0 / m as f64;
        let mut conv = vec![vec![ZERO; m]; 9];
        let sa = support(a);
        let sb = support(b);
        for (ka, va) in &sa {
            for (kb, vb) in &sb {
                let p = *ka + *kb;
                if grid.dealias() && !grid.retained(p) {
                    continue;
                }
                let idx = grid.index(p);
                for mu in 0..3 {
                    for i in 0..3 {
                        conv[mu * 3 + i][idx] += va[mu] * vb[i] * scale;
                    }
                }
            }
        }
        Ok(conv)
    }

    pub fn vertex_bilinear_direct(
        a: &SpectralVectorField,
        b: &SpectralVectorField,
    ) -> Result<SpectralVectorField> {
        Ok(assemble(
            a.grid(),
            &convolutions_direct(a, b)?,
            Part::Vertex,
        ))
    }

    pub fn k_plus_direct(
        a: &SpectralVectorField,
        b: &SpectralVectorField,
    ) -> Result<SpectralVectorField> {
        Ok(assemble(a.grid(), &convolutions_direct(a, b)?, Part::Plus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_defect, inner, leray_project, random_divfree, rel_l2_diff};

    fn g() -> GridSpec {
        GridSpec::new(8).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_mode_hand_convolution() {
        let grid = g();
        let (ka, kb) = (WaveVector::new(1, 0, 0), WaveVector::new(0, 1, 0));
        let a =
            SpectralVectorField::single_mode(grid, ka, [ZERO, c(2.0, 0.0), c(0.0, 1.0)]).unwrap();
        let bhat = [c(1.0, 0.0), c(0.5, 0.0), c(0.0, -0.25)];
        let b = SpectralVectorField::single_mode(grid, kb, bhat).unwrap();
        let out = k_plus(&a, &b).unwrap();
        let p = (ka + kb).as_f64();
        let pb: Complex64 = (0..3).map(|i| bhat[i] * p[i]).sum();
        let m = grid.len() as f64;
        for mu in 0..3 {
            let expect = I * pb * a.get(mu, ka) / m;
            assert!((out.get(mu, ka + kb) - expect).norm() < 1e-15);
        }
        let norm_total: f64 = out.coeffs().iter().map(|z| z.norm()).sum();
        let at_p: f64 = (0..3).map(|mu| out.get(mu, ka + kb).norm()).sum();
        assert!((norm_total - at_p).abs() < 1e-14);
    }

    #[test]
    fn k_minus_is_a_gradient() {
        let grid = g();
        let a = random_divfree(grid, 1, 3.0, 1.0).unwrap();
        let b = random_divfree(grid, 2, 3.0, 1.0).unwrap();
        let km = k_minus(&a, &b).unwrap();
        assert!(leray_project(&km).max_abs() < 1e-14 * km.max_abs().max(1e-300));
        let v = vertex_bilinear(&a, &b).unwrap();
        assert!(divergence_defect(&v) < 1e-14);
        let kp = k_plus(&a, &b).unwrap();
        let sum = kp.add(&km).unwrap().scaled(c(-1.0, 0.0));
        assert!(sum.max_abs_diff(&v).unwrap() < 1e-15);
    }

    #[test]
    fn spectral_and_direct_paths_agree() {
        let grid = g();
        let a = random_divfree(grid, 3, 3.0, 1.0).unwrap();
        let b = random_divfree(grid, 4, 3.0, 1.0).unwrap();
        let fast = vertex_bilinear(&a, &b).unwrap();
        let slow = reference::vertex_bilinear_direct(&a, &b).unwrap();
        assert!(rel_l2_diff(&fast, &slow).unwrap() < 1e-12);
        let grid = GridSpec::with_dealias(8, false).unwrap();
        let a = random_divfree(grid, 3, 3.0, 1.0).unwrap();
        let b = random_divfree(grid, 4, 3.0, 1.0).unwrap();
        let fast = vertex_bilinear(&a, &b).unwrap();
        let slow = reference::vertex_bilinear_direct(&a, &b).unwrap();
        assert!(rel_l2_diff(&fast, &slow).unwrap() < 1e-12);
    }

    #[test]
    fn energy_neutral_for_divergence_free_fields() {
        let u = random_divfree(g(), 5, 3.0, 1.0).unwrap();
        let v = nonlinearity(&u).unwrap();
        assert!(inner(&u, &v).unwrap().norm() < 1e-14);
    }

    #[test]
    fn zero_operand_gives_zero() {
        let u = random_divfree(g(), 5, 3.0, 1.0).unwrap();
        let z = SpectralVectorField::zeros(g());
        assert!(vertex_bilinear(&u, &z).unwrap().is_zero());
        assert!(vertex_bilinear(&z, &u).unwrap().is_zero());
        assert!(
            vertex_bilinear(&u, &SpectralVectorField::zeros(GridSpec::new(4).unwrap())).is_err()
        );
    }
}
