//! The subcommands of the `nstree` binary. Every command validates its
//! configuration before touching the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::expand::{scaling_invariance_check, solution_series, ScalingPath, SeriesReport};
use crate::field::snapshot::write_snapshot;
use crate::field::{divergence_defect, l2_norm};
use crate::refsolver::{picard_iterate, solve_etd, solve_etd_full, Integrator, SolverConfig};
use crate::report::Envelope;
use crate::treecomb::{
    catalan, enumerate_forests, enumerate_trees, forest_count_bound, forest_count_formula, TreeCaps,
};
use crate::verify::{run_criterion, run_suite, VerifyReport, SCALING_STEPS};

/// What a command did: whether every check passed, the files it wrote and
/// a human-readable summary.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        std::fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }

    fn envelope<T: Serialize>(&mut self, path: PathBuf, env: &Envelope<T>) -> Result<()> {
        env.write(&path)?;
        self.files.push(path);
        Ok(())
    }
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub n: usize,
    pub k: usize,
    pub count: u64,
    pub formula: u64,
    pub bound: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreesReport {
    pub n_max: usize,
    pub k_max: usize,
    pub rows: Vec<CountRow>,
}

fn to_u64(x: num_bigint::BigUint) -> Result<u64> {
    u64::try_from(x).map_err(|_| Error::invalid("count does not fit in 64 bits"))
}

/// Writes `trees_n{n}.txt`, `forests_k{k}_n{n}.txt` (k ≥ 2) and
/// `counts.csv` with columns `n,k,count,formula,bound`.
pub fn cmd_trees(n_max: usize, k_max: usize, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let caps = TreeCaps::default();
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if n_max > caps.max_tree_vertices {
        return Err(Error::CapExceeded {
            what: "tree vertices",
            value: n_max as u64,
            cap: caps.max_tree_vertices as u64,
        });
    }
    if k_max >= 2 && n_max > caps.max_forest_vertices {
        return Err(Error::CapExceeded {
            what: "forest vertices",
            value: n_max as u64,
            cap: caps.max_forest_vertices as u64,
        });
    }
    if k_max > caps.max_forest_roots {
        return Err(Error::CapExceeded {
            what: "forest roots",
            value: k_max as u64,
            cap: caps.max_forest_roots as u64,
        });
    }
    prepare(cfg, out)?;
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    let mut rows = Vec::new();
    for k in 1..=k_max {
        for n in 0..=n_max {
            let catalog: Vec<String> = if k == 1 {
                enumerate_trees(n, &caps)?
                    .iter()
                    .map(|t| t.canonical_string())
                    .collect()
            } else {
                enumerate_forests(n, k, &caps)?
                    .iter()
                    .map(|f| f.canonical_string())
                    .collect()
            };
            let name = if k == 1 {
                format!("trees_n{n}.txt")
            } else {
                format!("forests_k{k}_n{n}.txt")
            };
            let mut text = catalog.join("\n");
            text.push('\n');
            outcome.write(out.join(name), &text)?;
            let formula = if k == 1 {
                catalan(n)
            } else {
                forest_count_formula(n, k)
            };
            let row = CountRow {
                n,
                k,
                count: catalog.len() as u64,
                formula: to_u64(formula)?,
                bound: to_u64(forest_count_bound(n, k))?,
            };
            outcome.pass &= row.count == row.formula && row.count <= row.bound;
            rows.push(row);
        }
    }
    let mut csv = String::from("n,k,count,formula,bound\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.n, r.k, r.count, r.formula, r.bound)
            .expect("string write");
    }
    outcome.write(out.join("counts.csv"), &csv)?;
    outcome.lines = rows
        .iter()
        .map(|r| {
            format!(
                "n={} k={}: {} (formula {}, bound {})",
                r.n, r.k, r.count, r.formula, r.bound
            )
        })
        .collect();
    let report = TreesReport { n_max, k_max, rows };
    outcome.envelope(
        out.join("trees.json"),
        &Envelope::new("trees", cfg, outcome.pass, report),
    )?;
    Ok(outcome)
}

fn emit_checks(
    command: &str,
    report: VerifyReport,
    cfg: &RunConfig,
    out: &Path,
) -> Result<Outcome> {
    let mut outcome = Outcome {
        pass: report.pass,
        ..Outcome::default()
    };
    for r in &report.criteria {
        outcome.lines.push(r.line());
        outcome
            .lines
            .extend(r.checks.iter().map(|c| format!("  {}", c.line())));
    }
    outcome.write(out.join(format!("{command}.csv")), &report.to_csv())?;
    outcome.envelope(
        out.join(format!("{command}.json")),
        &Envelope::new(command, cfg, report.pass, report),
    )?;
    Ok(outcome)
}

/// Runs the configured criteria; writes `verify.json` and `verify.csv`.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(cfg, out)?;
    let report = run_suite(cfg)?;
    emit_checks("verify", report, cfg, out)
}

/// The frequency-kernel checks alone; writes `kernelcheck.json` and
/// `kernelcheck.csv`.
pub fn cmd_kernelcheck(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(cfg, out)?;
    let clock = std::time::Instant::now();
    let c = run_criterion(5, cfg);
    let report = VerifyReport {
        pass: c.pass,
        criteria: vec![c],
        seconds: clock.elapsed().as_secs_f64(),
    };
    emit_checks("kernelcheck", report, cfg, out)
}

/// Partial sums of the tree series at every configured time, compared with
/// the ETD reference. Writes `series_t{t}.csv` per time and `series.json`.
pub fn cmd_series(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(cfg, out)?;
    let u0 = cfg.initial.build(cfg.grid()?)?;
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    let mut reports: Vec<SeriesReport> = Vec::new();
    for &t in &cfg.times {
        let reference = solve_etd(&u0, t, &cfg.solver)?;
        let (report, _) = solution_series(
            &u0,
            t,
            cfg.series_max_order,
            &cfg.quadrature,
            Some(&reference),
            &cfg.expand,
        )?;
        outcome.pass &= !report.non_decay;
        outcome.write(out.join(format!("series_t{t}.csv")), &report.to_csv())?;
        let last = report.rows.last().and_then(|r| r.cum_error_vs_ref);
        outcome.lines.push(format!(
            "t={t}: order {} partial sum vs reference {}, geometric ratio {}{}",
            cfg.series_max_order,
            last.map(|e| format!("{e:.3e}"))
                .unwrap_or_else(|| "n/a".into()),
            report
                .geometric_ratio
                .map(|r| format!("{r:.3e}"))
                .unwrap_or_else(|| "n/a".into()),
            if report.non_decay {
                " (NON-DECAYING)"
            } else {
                ""
            }
        ));
        reports.push(report);
    }
    outcome.envelope(
        out.join("series.json"),
        &Envelope::new("series", cfg, outcome.pass, reports),
    )?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRow {
    pub t: f64,
    pub integrator: Integrator,
    pub file: String,
    pub l2: f64,
    pub divergence_defect: f64,
    /// Step-halving estimate (ETD) or last Picard increment.
    pub error_estimate: Option<f64>,
    pub energy_defect: Option<f64>,
    pub iterations: usize,
}

/// Solves to every configured time with the configured integrator and
/// writes one snapshot per time plus `solve.csv` and `solve.json`.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(cfg, out)?;
    let u0 = cfg.initial.build(cfg.grid()?)?;
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    let init = out.join("initial.nsfs");
    write_snapshot(
        &init,
        &u0,
        serde_json::json!({ "time": 0.0, "initial": cfg.initial }),
    )?;
    outcome.files.push(init);
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let (field, error_estimate, energy_defect, iterations) = match cfg.solver.integrator {
            Integrator::EtdRk2 => {
                let s = solve_etd_full(&u0, t, &cfg.solver, true, false)?;
                (s.field, s.error_estimate, Some(s.energy_defect), s.steps)
            }
            Integrator::Picard => {
                let s = picard_iterate(&u0, t, &cfg.solver, None)?;
                (s.field, Some(s.last_increment), None, s.sweeps)
            }
        };
        let file = format!("solution_t{t}.nsfs");
        write_snapshot(
            &out.join(&file),
            &field,
            serde_json::json!({ "time": t, "initial": cfg.initial, "solver": cfg.solver }),
        )?;
        outcome.files.push(out.join(&file));
        let row = SolveRow {
            t,
            integrator: cfg.solver.integrator,
            file,
            l2: l2_norm(&field),
            divergence_defect: divergence_defect(&field),
            error_estimate,
            energy_defect,
            iterations,
        };
        outcome.lines.push(format!(
            "t={t}: |u| = {:.6e}, estimate {}, {} iterations",
            row.l2,
            row.error_estimate
                .map(|e| format!("{e:.2e}"))
                .unwrap_or_else(|| "n/a".into()),
            row.iterations
        ));
        rows.push(row);
    }
    let mut csv =
        String::from("t,integrator,l2,divergence_defect,error_estimate,energy_defect,iterations\n");
    for r in &rows {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6e}")).unwrap_or_default();
        writeln!(
            csv,
            "{},{:?},{:.9e},{:.3e},{},{},{}",
            r.t,
            r.integrator,
            r.l2,
            r.divergence_defect,
            opt(r.error_estimate),
            opt(r.energy_defect),
            r.iterations
        )
        .expect("string write");
    }
    outcome.write(out.join("solve.csv"), &csv)?;
    outcome.envelope(
        out.join("solve.json"),
        &Envelope::new("solve", cfg, true, rows),
    )?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub t: f64,
    pub lambda: usize,
    pub solver: f64,
    pub series: f64,
    pub series_order: usize,
    pub pass: bool,
}

pub const SCALING_SOLVER_TOL: f64 = 5e-6;
pub const SCALING_SERIES_TOL: f64 = 1e-4;

/// Dilation check through both the solver and the series at every
/// configured time. Writes `scaling.csv` and `scaling.json`.
pub fn cmd_scalingcheck(cfg: &RunConfig, lambda: usize, out: &Path) -> Result<Outcome> {
    if lambda == 0 {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    let big = cfg.grid_n * lambda;
    if big > 2 * crate::config::MAX_GRID {
        return Err(Error::CapExceeded {
            what: "dilated grid size",
            value: big as u64,
            cap: 2 * crate::config::MAX_GRID as u64,
        });
    }
    prepare(cfg, out)?;
    let u0 = cfg.initial.build(cfg.grid()?)?;
    let solver = SolverConfig {
        steps: Some(cfg.solver.steps.unwrap_or(SCALING_STEPS)),
        ..cfg.solver
    };
    let order = cfg.series_max_order.min(3);
    let mut outcome = Outcome {
        pass: true,
        ..Outcome::default()
    };
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let s = scaling_invariance_check(
            &u0,
            lambda,
            t,
            ScalingPath::Solver,
            &solver,
            &cfg.quadrature,
            &cfg.expand,
        )?;
        let e = scaling_invariance_check(
            &u0,
            lambda,
            t,
            ScalingPath::Series { order },
            &solver,
            &cfg.quadrature,
            &cfg.expand,
        )?;
        let pass = s < SCALING_SOLVER_TOL && e < SCALING_SERIES_TOL;
        outcome.pass &= pass;
        outcome.lines.push(format!(
            "t={t}: solver {s:.3e}, order-{order} series {e:.3e}"
        ));
        rows.push(ScalingRow {
            t,
            lambda,
            solver: s,
            series: e,
            series_order: order,
            pass,
        });
    }
    let mut csv = String::from("t,lambda,solver_rel_diff,series_rel_diff,series_order,pass\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{:.6e},{:.6e},{},{}",
            r.t, r.lambda, r.solver, r.series, r.series_order, r.pass
        )
        .expect("string write");
    }
    outcome.write(out.join("scaling.csv"), &csv)?;
    outcome.envelope(
        out.join("scaling.json"),
        &Envelope::new("scalingcheck", cfg, outcome.pass, rows),
    )?;
    Ok(outcome)
}
