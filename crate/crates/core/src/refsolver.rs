//! Reference solutions of the incompressible Navier–Stokes equation on the
//! torus by two independent methods: an exponential time-differencing
//! Runge–Kutta stepper and Picard iteration of the mild formulation on a
//! Chebyshev collocation grid in time.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::snapshot::write_snapshot;
use crate::field::{
    heat_propagate, l2_norm, pairwise_sum, sobolev_norm, transform_inverse, SpectralVectorField,
    ZERO,
};
use crate::hierarchy::{gauss_legendre_unit, SimplexQuadrature};
use crate::interact::nonlinearity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    EtdRk2,
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardSettings {
    /// Chebyshev–Gauss–Lobatto points in time are `nodes + 1`.
    pub nodes: usize,
    pub max_sweeps: usize,
    /// Stop once the relative increment of a sweep falls below this.
    pub tolerance: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            nodes: 20,
            max_sweeps: 60,
            tolerance: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Target step; ignored when `steps` is set.
    pub dt: f64,
    pub steps: Option<usize>,
    pub require_dealias: bool,
    pub integrator: Integrator,
    pub picard: PicardSettings,
    /// Set to false to drop the nonlinear term (linear heat flow).
    pub nonlinear: bool,
    /// Largest admissible dt·max|u|·k_max.
    pub cfl_limit: f64,
    /// Abort when ‖u‖ exceeds this multiple of ‖u₀‖.
    pub blowup_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 5e-4,
            steps: None,
            require_dealias: true,
            integrator: Integrator::EtdRk2,
            picard: PicardSettings::default(),
            nonlinear: true,
            cfl_limit: 1.0,
            blowup_factor: 10.0,
        }
    }
}

impl SolverConfig {
    pub fn with_steps(steps: usize) -> Self {
        SolverConfig {
            steps: Some(steps),
            ..Self::default()
        }
    }

    pub fn steps_for(&self, t: f64) -> Result<usize> {
        match self.steps {
            Some(0) => Err(Error::invalid("step count must be positive")),
            Some(s) => Ok(s),
            None if self.dt > 0.0 => Ok(((t / self.dt).ceil() as usize).max(1)),
            None => Err(Error::invalid(format!(
                "time step must be positive, got {}",
                self.dt
            ))),
        }
    }

    fn check(&self, u0: &SpectralVectorField, t: f64) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::NegativeTime(t));
        }
        if self.require_dealias && !u0.grid().dealias() {
            return Err(Error::DealiasingRequired);
        }
        Ok(())
    }
}

fn nonlinear_term(u: &SpectralVectorField, on: bool) -> Result<SpectralVectorField> {
    if on {
        nonlinearity(u)
    } else {
        Ok(SpectralVectorField::zeros(u.grid()))
    }
}

/// φ₁(z) = (eᶻ − 1)/z and φ₂(z) = (eᶻ − 1 − z)/z².
fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 0.1 {
        // Taylor series through z⁸; the truncation error is below 1e-15.
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        let mut term1 = 1.0; // z^j/(j+1)!
        let mut term2 = 0.5; // z^j/(j+2)!
        for j in 0..9 {
            p1 += term1;
            p2 += term2;
            term1 *= z / (j + 2) as f64;
            term2 *= z / (j + 3) as f64;
        }
        (p1, p2)
    } else {
        let e = z.exp_m1();
        (e / z, (e - z) / (z * z))
    }
}

fn max_speed(u: &SpectralVectorField) -> f64 {
    transform_inverse(u)
        .real_parts()
        .chunks(3)
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .fold(0.0, f64::max)
}

fn dissipation(u: &SpectralVectorField) -> f64 {
    // ‖∇u‖² = Σ |k|² |û|² with the Parseval weight
    let h1 = sobolev_norm(u, 1.0).powi(2);
    let l2 = l2_norm(u).powi(2);
    h1 - l2
}

/// Time-ordered stored states of one solve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<SpectralVectorField>,
    /// Whether the producing run included the nonlinear term.
    pub nonlinear: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    times: &'a [f64],
    files: Vec<String>,
    config: &'a SolverConfig,
    error_estimate: Option<f64>,
    energy_defect: f64,
}

impl Trajectory {
    /// Lagrange interpolation through at most six stored states nearest `t`.
    pub fn at(&self, t: f64) -> Result<SpectralVectorField> {
        let n = self.times.len();
        if n == 0 {
            return Err(Error::MissingTrajectory(t));
        }
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        let slack = 1e-12 * t1.abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::MissingTrajectory(t));
        }
        if let Some(i) = self.times.iter().position(|&s| s == t) {
            return Ok(self.fields[i].clone());
        }
        let m = n.min(6);
        let upper = self.times.partition_point(|&s| s < t);
        let start = upper.saturating_sub(m / 2).min(n - m);
        let nodes = &self.times[start..start + m];
        let parts: Vec<SpectralVectorField> = (0..m)
            .map(|j| {
                let w: f64 = (0..m)
                    .filter(|&i| i != j)
                    .map(|i| (t - nodes[i]) / (nodes[j] - nodes[i]))
                    .product();
                self.fields[start + j].scaled(Complex64::new(w, 0.0))
            })
            .collect();
        let mut out = pairwise_sum(self.fields[0].grid(), &parts)?;
        out.flags = self.fields[0].flags;
        Ok(out)
    }

    /// Writes one snapshot per state plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, solution: &EtdSolution, config: &SolverConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.fields.len());
        for (i, (t, u)) in self.times.iter().zip(&self.fields).enumerate() {
            let name = format!("state_{i:05}.nsfs");
            write_snapshot(&dir.join(&name), u, serde_json::json!({ "time": t }))?;
            files.push(name);
        }
        let manifest = Manifest {
            times: &self.times,
            files,
            config,
            error_estimate: solution.error_estimate,
            energy_defect: solution.energy_defect,
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_vec_pretty(&manifest)?,
        )?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EtdSolution {
    pub field: SpectralVectorField,
    /// ‖u_h − u_{h/2}‖/3 when requested.
    pub error_estimate: Option<f64>,
    /// |‖u(t)‖² + 2∫‖∇u‖² − ‖u₀‖²| / ‖u₀‖², trapezoidal in time.
    pub energy_defect: f64,
    pub steps: usize,
    pub trajectory: Option<Trajectory>,
}

fn etd_run(
    u0: &SpectralVectorField,
    t: f64,
    steps: usize,
    cfg: &SolverConfig,
    keep: bool,
) -> Result<EtdSolution> {
    let grid = u0.grid();
    let h = t / steps as f64;
    let m = grid.len();
    let k2 = grid.k2_table();
    let mut e = vec![0.0; m];
    let mut p1 = vec![0.0; m];
    let mut p2 = vec![0.0; m];
    for idx in 0..m {
        let z = -h * k2[idx];
        e[idx] = z.exp();
        let (a, b) = phi12(z);
        p1[idx] = h * a;
        p2[idx] = h * b;
    }
    let norm0 = l2_norm(u0);
    if cfg.nonlinear && norm0 > 0.0 {
        let kmax = (grid.band() as f64) * 3f64.sqrt();
        let cfl = h * max_speed(u0) * kmax;
        if cfl > cfg.cfl_limit {
            return Err(Error::Stability(format!(
                "dt·max|u|·k_max = {cfl:.3} exceeds {}",
                cfg.cfl_limit
            )));
        }
    }
    let mut u = u0.clone();
    let mut traj = keep.then(|| Trajectory {
        times: vec![0.0],
        fields: vec![u0.clone()],
        nonlinear: cfg.nonlinear,
    });
    let mut diss_prev = dissipation(&u);
    let mut diss_int = 0.0;
    for step in 0..steps {
        let nu = nonlinear_term(&u, cfg.nonlinear)?;
        let mut a = u.clone();
        for c in 0..3 {
            let (ac, nc) = (a.component_mut(c), nu.component(c));
            for idx in 0..m {
                ac[idx] = ac[idx] * e[idx] + nc[idx] * p1[idx];
            }
        }
        let na = nonlinear_term(&a, cfg.nonlinear)?;
        for c in 0..3 {
            let (nac, nuc) = (na.component(c), nu.component(c));
            let ac = a.component_mut(c);
            for idx in 0..m {
                ac[idx] += (nac[idx] - nuc[idx]) * p2[idx];
            }
        }
        u = a;
        u.flags = u0.flags;
        let norm = l2_norm(&u);
        let time = (step + 1) as f64 * h;
        if !norm.is_finite() || (norm0 > 0.0 && norm > cfg.blowup_factor * norm0) {
            return Err(Error::BlowUp {
                time,
                factor: norm / norm0,
            });
        }
        let diss = dissipation(&u);
        diss_int += 0.5 * h * (diss + diss_prev);
        diss_prev = diss;
        if let Some(tr) = traj.as_mut() {
            tr.times.push(time);
            tr.fields.push(u.clone());
        }
    }
    let energy_defect = if norm0 > 0.0 {
        (l2_norm(&u).powi(2) + 2.0 * diss_int - norm0 * norm0).abs() / (norm0 * norm0)
    } else {
        0.0
    };
    Ok(EtdSolution {
        field: u,
        error_estimate: None,
        energy_defect,
        steps,
        trajectory: traj,
    })
}

/// ETDRK2 (Cox–Matthews) with the heat factor treated exactly.
pub fn solve_etd(
    u0: &SpectralVectorField,
    t_final: f64,
    cfg: &SolverConfig,
) -> Result<SpectralVectorField> {
    Ok(solve_etd_full(u0, t_final, cfg, false, false)?.field)
}

/// As [`solve_etd`], optionally with a step-halving error estimate and the
/// stored trajectory.
pub fn solve_etd_full(
    u0: &SpectralVectorField,
    t_final: f64,
    cfg: &SolverConfig,
    estimate_error: bool,
    keep_trajectory: bool,
) -> Result<EtdSolution> {
    cfg.check(u0, t_final)?;
    let steps = cfg.steps_for(t_final)?;
    if t_final == 0.0 {
        return etd_run(u0, 0.0, 1, &cfg_linear_free(cfg), keep_trajectory);
    }
    let mut sol = etd_run(u0, t_final, steps, cfg, keep_trajectory)?;
    if estimate_error {
        let fine = etd_run(u0, t_final, 2 * steps, cfg, false)?;
        sol.error_estimate = Some(l2_norm(&sol.field.sub(&fine.field)?) / 3.0);
    }
    Ok(sol)
}

fn cfg_linear_free(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        nonlinear: false,
        ..*cfg
    }
}

/// Observed order log₂(‖u_S − u_{2S}‖ / ‖u_{2S} − u_{4S}‖).
pub fn etd_convergence_order(
    u0: &SpectralVectorField,
    t: f64,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    cfg.check(u0, t)?;
    let a = etd_run(u0, t, steps, cfg, false)?.field;
    let b = etd_run(u0, t, 2 * steps, cfg, false)?.field;
    let c = etd_run(u0, t, 4 * steps, cfg, false)?.field;
    let d1 = l2_norm(&a.sub(&b)?);
    let d2 = l2_norm(&b.sub(&c)?);
    if !(d2 > 0.0) {
        return Err(Error::DegenerateFit(
            "step-halving differences vanish".into(),
        ));
    }
    Ok((d1 / d2).log2())
}

/// Chebyshev–Gauss–Lobatto points on [0, t], ascending, with barycentric
/// weights.
fn cgl_nodes(m: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let pts = (0..=m)
        .map(|j| 0.5 * t * (1.0 - (std::f64::consts::PI * j as f64 / m as f64).cos()))
        .collect();
    let w = (0..=m)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    (pts, w)
}

fn lagrange_all(x: f64, nodes: &[f64], bw: &[f64]) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&s| s == x) {
        let mut out = vec![0.0; nodes.len()];
        out[j] = 1.0;
        return out;
    }
    let terms: Vec<f64> = nodes.iter().zip(bw).map(|(s, w)| w / (x - s)).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / total).collect()
}

/// W[i][j](λ) = ∫₀^{s_i} e^{−λ(s_i−s)} ℓ_j(s) ds for one decay rate λ.
fn collocation_weights(
    lambda: f64,
    nodes: &[f64],
    bw: &[f64],
    rule: &[(f64, f64)],
) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut out = vec![vec![0.0; n]; n];
    for (i, &si) in nodes.iter().enumerate().skip(1) {
        for &(x, w) in rule {
            let s = si * x;
            let f = si * w * (-lambda * (si - s)).exp();
            for (j, l) in lagrange_all(s, nodes, bw).into_iter().enumerate() {
                out[i][j] += f * l;
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub field: SpectralVectorField,
    pub sweeps: usize,
    /// Relative change of the final sweep.
    pub last_increment: f64,
    /// Largest ratio of successive increments observed.
    pub max_ratio: f64,
    pub trajectory: Trajectory,
}

/// Picard iteration u ← e^{sΔ}u₀ + ∫₀^s e^{(s−r)Δ} N(u(r)) dr on the
/// collocation grid. With `fixed_sweeps` the iteration runs exactly that many
/// sweeps; otherwise it runs to the configured tolerance.
pub fn picard_iterate(
    u0: &SpectralVectorField,
    t: f64,
    cfg: &SolverConfig,
    fixed_sweeps: Option<usize>,
) -> Result<PicardSolution> {
    cfg.check(u0, t)?;
    let p = cfg.picard;
    if p.nodes < 2 || p.nodes > 64 {
        return Err(Error::invalid(format!(
            "Picard nodes must be in 2..=64, got {}",
            p.nodes
        )));
    }
    let grid = u0.grid();
    let m = grid.len();
    let (nodes, bw) = cgl_nodes(p.nodes, t);
    let free: Vec<SpectralVectorField> = nodes
        .iter()
        .map(|&s| heat_propagate(u0, s))
        .collect::<Result<_>>()?;
    // decay rates are integers |k|², so weights are tabulated per value
    let k2 = grid.k2_table();
    let rule = gauss_legendre_unit(48)?;
    let mut weights: HashMap<u64, Vec<Vec<f64>>> = HashMap::new();
    for &v in &k2 {
        weights
            .entry(v as u64)
            .or_insert_with(|| collocation_weights(v, &nodes, &bw, &rule));
    }
    let table: Vec<&Vec<Vec<f64>>> = k2.iter().map(|v| &weights[&(*v as u64)]).collect();

    let mut states = free.clone();
    let scale = free.iter().map(l2_norm).fold(0.0, f64::max);
    let mut sweeps = 0;
    let mut last_increment = 0.0;
    let mut prev_increment = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut rising = 0;
    let target = fixed_sweeps.unwrap_or(p.max_sweeps);
    while sweeps < target {
        let nl: Vec<SpectralVectorField> = states
            .iter()
            .map(|u| nonlinear_term(u, cfg.nonlinear))
            .collect::<Result<_>>()?;
        let mut next = free.clone();
        let mut increment: f64 = 0.0;
        for (i, out) in next.iter_mut().enumerate().skip(1) {
            for c in 0..3 {
                let oc = out.component_mut(c);
                for idx in 0..m {
                    let w = &table[idx][i];
                    let mut acc = ZERO;
                    for (j, f) in nl.iter().enumerate() {
                        acc += f.component(c)[idx] * w[j];
                    }
                    oc[idx] += acc;
                }
            }
            out.flags = u0.flags;
            increment = increment.max(l2_norm(&out.sub(&states[i])?));
        }
        states = next;
        sweeps += 1;
        last_increment = if scale > 0.0 {
            increment / scale
        } else {
            increment
        };
        if fixed_sweeps.is_some() {
            continue;
        }
        if last_increment <= p.tolerance {
            break;
        }
        if prev_increment.is_finite() && prev_increment > 0.0 {
            let ratio = increment / prev_increment;
            max_ratio = max_ratio.max(ratio);
            rising = if ratio >= 1.0 { rising + 1 } else { 0 };
            if rising >= 2 {
                return Err(Error::NonContraction { ratio, sweeps });
            }
        }
        prev_increment = increment;
    }
    if fixed_sweeps.is_none() && last_increment > p.tolerance {
        return Err(Error::NonContraction {
            ratio: max_ratio,
            sweeps,
        });
    }
    Ok(PicardSolution {
        field: states[p.nodes].clone(),
        sweeps,
        last_increment,
        max_ratio,
        trajectory: Trajectory {
            times: nodes,
            fields: states,
            nonlinear: cfg.nonlinear,
        },
    })
}

pub fn solve_picard(
    u0: &SpectralVectorField,
    t_final: f64,
    cfg: &SolverConfig,
) -> Result<SpectralVectorField> {
    Ok(picard_iterate(u0, t_final, cfg, None)?.field)
}

/// Dispatches on `cfg.integrator`.
pub fn solve(
    u0: &SpectralVectorField,
    t_final: f64,
    cfg: &SolverConfig,
) -> Result<SpectralVectorField> {
    match cfg.integrator {
        Integrator::EtdRk2 => solve_etd(u0, t_final, cfg),
        Integrator::Picard => solve_picard(u0, t_final, cfg),
    }
}

/// ‖u_c(t) − e^{tΔ}u₀ − ∫₀^t e^{(t−s)Δ} N(u_c(s)) ds‖_{L²} with u_c read
/// from `trajectory`. The integral uses one copy of `q` per interval between
/// stored times.
pub fn residual_mild(
    candidate: &SpectralVectorField,
    u0: &SpectralVectorField,
    t: f64,
    q: &SimplexQuadrature,
    trajectory: &Trajectory,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let grid = u0.grid();
    candidate.check_same_grid(u0)?;
    let mut breaks: Vec<f64> = trajectory
        .times
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < t)
        .collect();
    breaks.insert(0, 0.0);
    breaks.push(t);
    if trajectory.times.first().is_none_or(|&s| s > 0.0) {
        return Err(Error::MissingTrajectory(0.0));
    }
    let rule = q.rule()?;
    let mut parts = vec![heat_propagate(u0, t)?];
    if t > 0.0 {
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            for &(x, wt) in rule.iter() {
                let s = a + (b - a) * x;
                let nl = nonlinear_term(&trajectory.at(s)?, trajectory.nonlinear)?;
                parts.push(heat_propagate(&nl, t - s)?.scaled(Complex64::new((b - a) * wt, 0.0)));
            }
        }
    }
    let mild = pairwise_sum(grid, &parts)?;
    Ok(l2_norm(&candidate.sub(&mild)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{divergence_defect, random_divfree, rel_l2_diff, taylor_green, GridSpec};
    use crate::hierarchy::duhamel_term_direct;

    fn g() -> GridSpec {
        GridSpec::new(16).unwrap()
    }

    #[test]
    fn phi_functions_are_continuous() {
        for z in [-0.1 - 1e-12, -0.1 + 1e-12, 0.1 - 1e-12] {
            let (a, b) = phi12(z);
            let e = z.exp_m1();
            assert!((a - e / z).abs() < 1e-14);
            assert!((b - (e - z) / (z * z)).abs() < 1e-12);
        }
        assert_eq!(phi12(0.0), (1.0, 0.5));
    }

    #[test]
    fn zero_data_stays_zero() {
        let z = SpectralVectorField::zeros(g());
        assert!(solve_etd(&z, 0.05, &SolverConfig::default())
            .unwrap()
            .is_zero());
        assert!(solve_picard(&z, 0.05, &SolverConfig::default())
            .unwrap()
            .is_zero());
    }

    #[test]
    fn linear_hook_gives_heat_flow() {
        let u0 = random_divfree(g(), 3, 3.0, 1.0).unwrap();
        let cfg = SolverConfig {
            nonlinear: false,
            ..SolverConfig::default()
        };
        let u = solve_etd(&u0, 0.05, &cfg).unwrap();
        let h = heat_propagate(&u0, 0.05).unwrap();
        assert!(rel_l2_diff(&u, &h).unwrap() < 1e-13);
        let sol = solve_etd_full(&u0, 0.05, &cfg, false, true).unwrap();
        let r = residual_mild(
            &sol.field,
            &u0,
            0.05,
            &SimplexQuadrature::gauss(4),
            &sol.trajectory.unwrap(),
        )
        .unwrap();
        assert!(r < 1e-13 * l2_norm(&u0), "{r}");
    }

    #[test]
    fn etd_is_projected_and_balances_energy() {
        let u0 = taylor_green(g(), 1.0).unwrap();
        let sol = solve_etd_full(&u0, 0.05, &SolverConfig::default(), true, true).unwrap();
        assert!(divergence_defect(&sol.field) < 1e-11);
        assert!(sol.energy_defect < 1e-6, "{}", sol.energy_defect);
        let err = sol.error_estimate.unwrap();
        let r = residual_mild(
            &sol.field,
            &u0,
            0.05,
            &SimplexQuadrature::gauss(4),
            &sol.trajectory.unwrap(),
        )
        .unwrap();
        assert!(r < 10.0 * err.max(1e-14), "residual {r}, estimate {err}");
    }

    #[test]
    fn etd_second_order() {
        let u0 = taylor_green(g(), 1.0).unwrap();
        let p = etd_convergence_order(&u0, 0.05, 10, &SolverConfig::default()).unwrap();
        assert!((p - 2.0).abs() < 0.2, "{p}");
    }

    #[test]
    fn picard_matches_etd() {
        let u0 = taylor_green(g(), 0.1).unwrap();
        let a = solve_picard(&u0, 0.05, &SolverConfig::default()).unwrap();
        let b = solve_etd(&u0, 0.05, &SolverConfig::default()).unwrap();
        assert!(rel_l2_diff(&a, &b).unwrap() < 1e-6);
    }

    #[test]
    fn picard_sweeps_are_picard_polynomials() {
        let u0 = taylor_green(g(), 0.5).unwrap();
        let cfg = SolverConfig::default();
        let s0 = picard_iterate(&u0, 0.05, &cfg, Some(0)).unwrap().field;
        assert_eq!(s0, heat_propagate(&u0, 0.05).unwrap());
        let s1 = picard_iterate(&u0, 0.05, &cfg, Some(1)).unwrap().field;
        let d = duhamel_term_direct(1, 1, 0.05, &u0, &SimplexQuadrature::gauss(12)).unwrap();
        assert!(rel_l2_diff(&s1.sub(&s0).unwrap(), &d.to_field().unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn guards() {
        let u0 = taylor_green(g(), 1.0).unwrap();
        let raw = taylor_green(GridSpec::with_dealias(16, false).unwrap(), 1.0).unwrap();
        assert!(matches!(
            solve_etd(&raw, 0.1, &SolverConfig::default()),
            Err(Error::DealiasingRequired)
        ));
        let coarse = SolverConfig::with_steps(1);
        assert!(matches!(
            solve_etd(&taylor_green(g(), 100.0).unwrap(), 1.0, &coarse),
            Err(Error::Stability(_))
        ));
        assert!(solve_etd(&u0, -1.0, &SolverConfig::default()).is_err());
        let big = taylor_green(g(), 200.0).unwrap();
        assert!(matches!(
            solve_picard(&big, 0.5, &SolverConfig::default()),
            Err(Error::NonContraction { .. })
        ));
    }

    #[test]
    fn trajectory_interpolation_and_io() {
        let u0 = taylor_green(g(), 1.0).unwrap();
        let cfg = SolverConfig::with_steps(20);
        let sol = solve_etd_full(&u0, 0.02, &cfg, false, true).unwrap();
        let tr = sol.trajectory.clone().unwrap();
        let mid = tr.at(0.0105).unwrap();
        let direct = solve_etd(&u0, 0.0105, &SolverConfig::with_steps(21)).unwrap();
        assert!(rel_l2_diff(&mid, &direct).unwrap() < 1e-6);
        assert!(tr.at(0.5).is_err());
        let dir = tempfile::tempdir().unwrap();
        tr.write(dir.path(), &sol, &cfg).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["times"].as_array().unwrap().len(), 21);
    }
}
