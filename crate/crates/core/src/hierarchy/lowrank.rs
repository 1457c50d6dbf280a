use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{heat_propagate, inner, pairwise_sum, GridSpec, SpectralVectorField};

/// c · (a₁ ⊗ … ⊗ a_k). Factors are shared, never mutated.
#[derive(Clone, Debug)]
pub struct RankOneTerm {
    pub coeff: Complex64,
    pub factors: Vec<Arc<SpectralVectorField>>,
}

/// Sum of rank-one terms of a fixed order on one grid.
#[derive(Clone, Debug)]
pub struct LowRankTensorField {
    order: usize,
    grid: GridSpec,
    terms: Vec<RankOneTerm>,
}

impl LowRankTensorField {
    pub fn new(order: usize, grid: GridSpec, terms: Vec<RankOneTerm>) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("tensor order must be positive"));
        }
        for t in &terms {
            if t.factors.len() != order {
                return Err(Error::invalid(format!(
                    "rank-one term has {} factors, expected {order}",
                    t.factors.len()
                )));
            }
            if let Some(f) = t.factors.iter().find(|f| f.grid() != grid) {
                return Err(Error::GridMismatch(grid.n(), f.grid().n()));
            }
        }
        Ok(LowRankTensorField { order, grid, terms })
    }

    pub fn zero(order: usize, grid: GridSpec) -> Result<Self> {
        Self::new(order, grid, Vec::new())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn push(&mut self, term: RankOneTerm) -> Result<()> {
        if term.factors.len() != self.order {
            return Err(Error::invalid("order mismatch in pushed term"));
        }
        self.terms.push(term);
        Ok(())
    }

    /// Concatenation of the two term lists.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.order != self.order {
            return Err(Error::invalid("cannot add tensors of different order"));
        }
        if other.grid != self.grid {
            return Err(Error::GridMismatch(self.grid.n(), other.grid.n()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(LowRankTensorField { terms, ..*self })
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        LowRankTensorField {
            terms: self
                .terms
                .iter()
                .map(|t| RankOneTerm {
                    coeff: t.coeff * s,
                    factors: t.factors.clone(),
                })
                .collect(),
            ..*self
        }
    }

    /// ⟨X, Y⟩ = Σ_{a,b} conj(c_a) c_b Π_j ⟨x_{a,j}, y_{b,j}⟩.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if other.order != self.order {
            return Err(Error::invalid(
                "inner product of tensors of different order",
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.terms {
            for b in &other.terms {
                let mut p = a.coeff.conj() * b.coeff;
                for (x, y) in a.factors.iter().zip(&b.factors) {
                    p *= inner(x, y)?;
                }
                acc += p;
            }
        }
        Ok(acc)
    }

    /// L² norm from the Gram matrix of the terms.
    pub fn norm(&self) -> f64 {
        self.inner(self)
            .map(|z| z.re.max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }

    /// For order one: the represented field, summed pairwise in term order.
    pub fn to_field(&self) -> Result<SpectralVectorField> {
        if self.order != 1 {
            return Err(Error::invalid("only order-one tensors are single fields"));
        }
        let parts: Vec<SpectralVectorField> = self
            .terms
            .iter()
            .map(|t| t.factors[0].scaled(t.coeff))
            .collect();
        pairwise_sum(self.grid, &parts)
    }
}

/// u^{⊗k} as a single rank-one term with coefficient 1.
pub fn tensor_power(u: &SpectralVectorField, k: usize) -> Result<LowRankTensorField> {
    let shared = Arc::new(u.clone());
    LowRankTensorField::new(
        k,
        u.grid(),
        vec![RankOneTerm {
            coeff: Complex64::new(1.0, 0.0),
            factors: vec![shared; k],
        }],
    )
}

/// 𝒯⁽ᵏ⁾(t): heat flow applied to every factor.
pub fn heat_propagate_k(state: &LowRankTensorField, t: f64) -> Result<LowRankTensorField> {
    let mut terms = Vec::with_capacity(state.terms.len());
    for term in &state.terms {
        let mut factors: Vec<Arc<SpectralVectorField>> = Vec::with_capacity(state.order);
        for (j, f) in term.factors.iter().enumerate() {
            // reuse the propagated copy when a factor is repeated within the term
            let shared = term.factors[..j]
                .iter()
                .position(|g| Arc::ptr_eq(g, f))
                .map(|i| factors[i].clone());
            factors.push(match shared {
                Some(done) => done,
                None => Arc::new(heat_propagate(f, t)?),
            });
        }
        terms.push(RankOneTerm {
            coeff: term.coeff,
            factors,
        });
    }
    LowRankTensorField::new(state.order, state.grid, terms)
}
