use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use meshfree_core::benchmark::{
    convergence_scan, estimate_order, run_seed, solve_on, stability_report, stencil_scan, write_runs_csv,
    write_stability_csv, ExperimentConfig, RunRecord, ScanTable,
};
use meshfree_core::config::parse_config;
use meshfree_core::solver::write_solution_csv;
use meshfree_core::weights::{monomial_exactness, node_weights, COND_WARN};
use meshfree_core::{discretize_ball, Engine, NeighborIndex, Result};

use crate::Verb;

/// Reproduction tolerance of the exactness check.
const EXACTNESS_TOL: f64 = 1e-7;

pub fn dispatch(verb: Verb, config: Option<&Path>, out: &Path, overrides: &[String]) -> Result<ExitCode> {
    let cfg = parse_config(config, Some(verb.name()), overrides)?;
    fs::create_dir_all(out)?;
    match verb {
        Verb::Solve => solve(&cfg, out),
        Verb::Converge => {
            let table = convergence_scan(&cfg)?;
            write_tables(out, &table)?;
            if cfg.n_targets.len() >= 3 {
                for o in estimate_order(&table.records)? {
                    println!("{} m={}: order {:.2}", o.engine, o.m, o.slope);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Verb::StencilScan => {
            let table = stencil_scan(&cfg)?;
            write_tables(out, &table)?;
            Ok(ExitCode::SUCCESS)
        }
        Verb::Stability => {
            let table = convergence_scan(&cfg)?;
            write_tables(out, &table)?;
            Ok(ExitCode::SUCCESS)
        }
        Verb::CheckWeights => check_weights(&cfg),
    }
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_tables(out: &Path, table: &ScanTable) -> Result<()> {
    for r in &table.rejected {
        println!("skipped {} m={} n={}: {}", r.engine, r.m, r.n, r.reason);
    }
    write_runs_csv(create(out, "runs.csv")?, &table.records)?;
    let rows = stability_report(&table.records);
    write_stability_csv(create(out, "stability.csv")?, &rows)?;
    for row in &rows {
        match row.stats {
            Some(s) => println!(
                "{} m={} N={} n={}: median e_inf {:.3e}, spread {:.3} ({} of {} runs finite)",
                row.engine, row.m, row.n_target, row.n, s.e_median, s.spread, s.runs_finite, row.runs
            ),
            None => println!(
                "{} m={} N={} n={}: no finite run out of {}",
                row.engine, row.m, row.n_target, row.n, row.runs
            ),
        }
    }
    Ok(())
}

/// First engine, degree and node count of the configuration, run 0.
fn solve(cfg: &ExperimentConfig, out: &Path) -> Result<ExitCode> {
    cfg.validate()?;
    let (engine, m, target) = (cfg.engines[0], cfg.m[0], cfg.n_targets[0]);
    let seed = run_seed(cfg.base_seed, cfg.d, target, 0);
    let nodes = discretize_ball(cfg.d, target, seed)?;
    let index = NeighborIndex::build(&nodes);
    let basis = cfg.basis_spec(engine, m);
    let n = cfg.n.resolve(m, cfg.d);
    let outcome = solve_on(&nodes, &index, &basis, n, &cfg.solver)?;
    nodes.write_csv(create(out, "nodes.csv")?)?;
    write_solution_csv(create(out, "solution.csv")?, &nodes, &outcome.solution.u_hat)?;
    let record = RunRecord {
        d: cfg.d,
        engine,
        m,
        k: cfg.k,
        n_target: target,
        n_actual: nodes.len(),
        n,
        run: 0,
        seed,
        e_inf: outcome.e_inf,
        t_weights_s: if cfg.timings { outcome.t_weights } else { 0.0 },
        t_solve_s: if cfg.timings { outcome.t_solve } else { 0.0 },
        max_cond: outcome.max_cond,
    };
    write_runs_csv(create(out, "runs.csv")?, &[record])?;
    println!(
        "{engine} m={m} n={n}: N = {}, e_inf = {:.3e}, residual = {:.1e}",
        nodes.len(),
        outcome.e_inf,
        outcome.solution.residual
    );
    Ok(ExitCode::SUCCESS)
}

fn check_weights(cfg: &ExperimentConfig) -> Result<ExitCode> {
    cfg.validate()?;
    let target = cfg.n_targets[0];
    let nodes = discretize_ball(cfg.d, target, run_seed(cfg.base_seed, cfg.d, target, 0))?;
    let index = NeighborIndex::build(&nodes);
    let mut all_pass = true;
    let mut engines = cfg.engines.clone();
    engines.retain(|e| *e != Engine::Collocation);
    for &engine in &engines {
        for &m in &cfg.m {
            let n = cfg.n.resolve(m, cfg.d);
            let basis = cfg.basis_spec(engine, m);
            let (mut checked, mut excluded, mut failed, mut worst) = (0usize, 0usize, 0usize, 0.0f64);
            for c in nodes.interior() {
                let w = match node_weights(&nodes, &index, &basis, c, n) {
                    Ok(w) if w.cond_estimate < COND_WARN => w,
                    _ => {
                        excluded += 1;
                        continue;
                    }
                };
                let pts: Vec<f64> = w
                    .neighbor_indices
                    .iter()
                    .flat_map(|&j| nodes.point(j).iter().copied())
                    .collect();
                let err = monomial_exactness(&pts, nodes.point(c), &w.w, m)?;
                checked += 1;
                worst = worst.max(err);
                if err > EXACTNESS_TOL {
                    failed += 1;
                }
            }
            let pass = failed == 0 && checked > 0;
            all_pass &= pass;
            println!(
                "{} {engine} m={m} n={n}: {checked} stencils, worst error {worst:.2e}, {failed} above {EXACTNESS_TOL:e}, {excluded} excluded",
                if pass { "PASS" } else { "FAIL" },
            );
        }
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
