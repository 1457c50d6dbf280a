//! Explicit tensors for micro grids, used as an oracle for the low-rank
//! representation.

use num_complex::Complex64;

use super::LowRankTensorField;
use crate::error::{Error, Result};
use crate::field::{GridSpec, ZERO};

/// Coefficients indexed by (c₁, k₁, …, c_k, k_k), slot 1 slowest; each
/// (c, k) pair is flattened as `c·N³ + index(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    pub order: usize,
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl DenseTensor {
    fn slot_len(&self) -> usize {
        3 * self.grid.len()
    }

    pub fn norm(&self) -> f64 {
        let m = self.grid.len() as f64;
        let w = ((2.0 * std::f64::consts::PI).powi(3) / (m * m)).powi(self.order as i32);
        (w * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Θ_σ: output slot `j` takes input slot `perm[j]`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseTensor> {
        let k = self.order;
        let mut seen = vec![false; k];
        if perm.len() != k
            || perm
                .iter()
                .any(|&p| p >= k || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::invalid("not a permutation of the slots"));
        }
        let s = self.slot_len();
        let mut out = vec![ZERO; self.data.len()];
        let mut digits = vec![0usize; k];
        for (flat, z) in self.data.iter().enumerate() {
            let mut r = flat;
            for d in digits.iter_mut().rev() {
                *d = r % s;
                r /= s;
            }
            let target = perm.iter().fold(0usize, |acc, &p| acc * s + digits[p]);
            out[target] = *z;
        }
        Ok(DenseTensor {
            data: out,
            ..self.clone()
        })
    }

    /// e^{tΔ⁽ᵏ⁾}: multiplier exp(−t Σ_j |k_j|²).
    pub fn heat(&self, t: f64) -> Result<DenseTensor> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let s = self.slot_len();
        let m = self.grid.len();
        let k2 = self.grid.k2_table();
        let mut out = self.clone();
        for (flat, z) in out.data.iter_mut().enumerate() {
            let mut r = flat;
            let mut total = 0.0;
            for _ in 0..self.order {
                total += k2[(r % s) % m];
                r /= s;
            }
            *z *= (-t * total).exp();
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Expands a low-rank state on a grid with N ≤ 4 and order ≤ 3.
pub fn dense_materialize(state: &LowRankTensorField) -> Result<DenseTensor> {
    let grid = state.grid();
    if grid.n() > 4 {
        return Err(Error::CapExceeded {
            what: "dense grid size",
            value: grid.n() as u64,
            cap: 4,
        });
    }
    if state.order() > 3 {
        return Err(Error::CapExceeded {
            what: "dense tensor order",
            value: state.order() as u64,
            cap: 3,
        });
    }
    let s = 3 * grid.len();
    let total = s.pow(state.order() as u32);
    let mut data = vec![ZERO; total];
    for term in state.terms() {
        // running outer product, slot 1 slowest
        let mut acc = vec![term.coeff];
        for f in &term.factors {
            let mut next = Vec::with_capacity(acc.len() * s);
            for a in &acc {
                next.extend(f.coeffs().iter().map(|b| a * b));
            }
            acc = next;
        }
        for (d, a) in data.iter_mut().zip(acc) {
            *d += a;
        }
    }
    Ok(DenseTensor {
        order: state.order(),
        grid,
        data,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::{random_divfree, transform_inverse, SpectralVectorField};
    use crate::hierarchy::{heat_propagate_k, tensor_power, RankOneTerm};

    fn grid() -> GridSpec {
        GridSpec::with_dealias(4, false).unwrap()
    }

    fn random(seed: u64) -> Arc<SpectralVectorField> {
        Arc::new(random_divfree(grid(), seed, 3.0, 1.0).unwrap())
    }

    fn random_state(order: usize, terms: usize) -> LowRankTensorField {
        let terms = (0..terms)
            .map(|t| RankOneTerm {
                coeff: Complex64::new(0.5 + t as f64, -0.25 * t as f64),
                factors: (0..order).map(|j| random((10 * t + j) as u64)).collect(),
            })
            .collect();
        LowRankTensorField::new(order, grid(), terms).unwrap()
    }

    #[test]
    fn rank_one_is_outer_product() {
        let (a, b) = (random(1), random(2));
        let st = LowRankTensorField::new(
            2,
            grid(),
            vec![RankOneTerm {
                coeff: Complex64::new(1.0, 0.0),
                factors: vec![a.clone(), b.clone()],
            }],
        )
        .unwrap();
        let d = dense_materialize(&st).unwrap();
        let s = 3 * grid().len();
        for (i, x) in a.coeffs().iter().enumerate().step_by(7) {
            for (j, y) in b.coeffs().iter().enumerate().step_by(5) {
                assert_eq!(d.data[i * s + j], x * y);
            }
        }
    }

    #[test]
    fn gram_norm_matches_dense() {
        let st = random_state(2, 5);
        let dense = dense_materialize(&st).unwrap();
        assert!((dense.norm() - st.norm()).abs() < 1e-12 * dense.norm());
        let sum = st.add(&random_state(2, 1)).unwrap();
        let ds = dense_materialize(&sum).unwrap();
        let d1 = dense_materialize(&random_state(2, 1)).unwrap();
        let manual: Vec<Complex64> = dense
            .data
            .iter()
            .zip(&d1.data)
            .map(|(a, b)| a + b)
            .collect();
        assert!(ds
            .data
            .iter()
            .zip(&manual)
            .all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn low_rank_heat_matches_dense() {
        let st = random_state(2, 3);
        let lhs = dense_materialize(&heat_propagate_k(&st, 0.2).unwrap()).unwrap();
        let rhs = dense_materialize(&st).unwrap().heat(0.2).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn symmetric_data_is_permutation_invariant() {
        let u = random(3);
        let d = dense_materialize(&tensor_power(&u, 3).unwrap()).unwrap();
        let scale = d.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            assert!(d.permute(&perm).unwrap().max_abs_diff(&d) < 1e-15 * scale);
        }
        // a non-symmetric state is moved but keeps its norm
        let st = random_state(2, 2);
        let ds = dense_materialize(&st).unwrap();
        let p = ds.permute(&[1, 0]).unwrap();
        assert!(p.max_abs_diff(&ds) > 1e-3);
        assert!((p.norm() - ds.norm()).abs() < 1e-13 * ds.norm());
        assert!(ds.permute(&[0, 0]).is_err());
        assert!(transform_inverse(&u).max_imag() < 1e-14);
    }

    #[test]
    fn guards() {
        let big = LowRankTensorField::zero(2, GridSpec::new(8).unwrap()).unwrap();
        assert!(dense_materialize(&big).is_err());
        let deep = LowRankTensorField::zero(4, grid()).unwrap();
        assert!(dense_materialize(&deep).is_err());
    }
}
