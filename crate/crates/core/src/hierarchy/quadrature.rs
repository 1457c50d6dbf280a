use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type RuleCache = Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>;

/// Gauss–Legendre nodes and weights mapped to [0, 1], nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> Result<Arc<Vec<(f64, f64)>>> {
    static RULES: OnceLock<RuleCache> = OnceLock::new();
    let degree =
        NonZeroUsize::new(n).ok_or_else(|| Error::Quadrature("zero nodes requested".into()))?;
    let mut rules = RULES
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    Ok(rules
        .entry(n)
        .or_insert_with(|| {
            let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(degree)
                .as_node_weight_pairs()
                .iter()
                .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(pairs)
        })
        .clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadScheme {
    GaussLegendre,
    /// Composite midpoint rule.
    Uniform,
}

/// One-dimensional rule applied at every level of a nested time simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimplexQuadrature {
    pub scheme: QuadScheme,
    pub nodes: usize,
    /// Node count of the comparison rule used for error estimates.
    pub check_nodes: usize,
}

impl Default for SimplexQuadrature {
    fn default() -> Self {
        SimplexQuadrature {
            scheme: QuadScheme::GaussLegendre,
            nodes: 8,
            check_nodes: 12,
        }
    }
}

impl SimplexQuadrature {
    pub fn gauss(nodes: usize) -> Self {
        SimplexQuadrature {
            scheme: QuadScheme::GaussLegendre,
            nodes,
            check_nodes: nodes + nodes / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.check_nodes < 2 {
            return Err(Error::Quadrature(format!(
                "need at least 2 nodes per level, got {} / {}",
                self.nodes, self.check_nodes
            )));
        }
        if self.nodes > 64 || self.check_nodes > 64 {
            return Err(Error::CapExceeded {
                what: "nodes per level",
                value: self.nodes.max(self.check_nodes) as u64,
                cap: 64,
            });
        }
        Ok(())
    }

    /// The comparison rule.
    pub fn check(&self) -> Self {
        SimplexQuadrature {
            scheme: self.scheme,
            nodes: self.check_nodes,
            check_nodes: self.check_nodes,
        }
    }

    /// (node, weight) pairs on [0, 1].
    pub fn rule(&self) -> Result<Arc<Vec<(f64, f64)>>> {
        self.validate()?;
        match self.scheme {
            QuadScheme::GaussLegendre => gauss_legendre_unit(self.nodes),
            QuadScheme::Uniform => {
                let h = 1.0 / self.nodes as f64;
                Ok(Arc::new(
                    (0..self.nodes).map(|i| ((i as f64 + 0.5) * h, h)).collect(),
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = gauss_legendre_unit(5).unwrap();
        for p in 0..10 {
            let s: f64 = rule.iter().map(|(x, w)| w * x.powi(p)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-15, "degree {p}");
        }
        assert!(rule.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn midpoint_is_second_order() {
        let err = |n| {
            let q = SimplexQuadrature {
                scheme: QuadScheme::Uniform,
                nodes: n,
                check_nodes: n,
            };
            let s: f64 = q.rule().unwrap().iter().map(|(x, w)| w * x.exp()).sum();
            (s - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 4.0).abs() < 0.05);
    }

    #[test]
    fn rejects_degenerate_rules() {
        assert!(SimplexQuadrature::gauss(1).validate().is_err());
        assert!(SimplexQuadrature::gauss(8).validate().is_ok());
    }
}
