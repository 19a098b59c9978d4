//! Experiment drivers: single runs, stencil-size scans, convergence scans and
//! the normalized spread (e_max − e_min) / e_median over re-discretizations.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::basis::monomial_count;
use crate::geometry::{discretize_ball, NeighborIndex, NodeSet};
use crate::solver::{assemble, inf_norm_error, solve_sparse, Solution, SolverConfig};
use crate::weights::{check_stencil_size, compute_all_weights, BasisSpec, Engine, WlsWeight};
use crate::{Error, Result};

/// Stencil size n = 2·C(m+d, d).
pub fn recommended_stencil(m: usize, d: usize) -> usize {
    2 * monomial_count(m, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilSize {
    /// [`recommended_stencil`] for each m.
    Auto,
    Fixed(usize),
}

impl StencilSize {
    pub fn resolve(self, m: usize, d: usize) -> usize {
        match self {
            StencilSize::Auto => recommended_stencil(m, d),
            StencilSize::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub engines: Vec<Engine>,
    pub m: Vec<usize>,
    /// PHS exponent for RBF-FD.
    pub k: u32,
    pub n: StencilSize,
    /// Explicit stencil sizes for the stencil scan; `None` scans s..=5s.
    pub n_list: Option<Vec<usize>>,
    pub n_targets: Vec<usize>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub wls_weight: WlsWeight,
    pub solver: SolverConfig,
    /// Record wall times; when off the time columns are zero and output is
    /// byte-reproducible.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 2,
            engines: vec![Engine::Wls, Engine::RbfFd],
            m: vec![2, 4, 6],
            k: 3,
            n: StencilSize::Auto,
            n_list: None,
            n_targets: vec![1000, 2000, 4000, 8000, 16000],
            n_runs: 20,
            base_seed: 0,
            wls_weight: WlsWeight::default(),
            solver: SolverConfig::default(),
            timings: true,
        }
    }
}

impl ExperimentConfig {
    pub fn basis_spec(&self, engine: Engine, m: usize) -> BasisSpec {
        BasisSpec {
            engine,
            m,
            k: self.k,
            wls_weight: self.wls_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 2 && self.d != 3 {
            return Err(Error::UnsupportedDimension(self.d));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("N_runs must be at least 1".into()));
        }
        if self.engines.is_empty() || self.m.is_empty() || self.n_targets.is_empty() {
            return Err(Error::Config("engine, m and N must be non-empty".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidPhsExponent);
        }
        Ok(())
    }
}

/// Seed of run `run` at node count `n_target`. Engines, degrees and stencil
/// sizes share it, so every variant sees the same discretization.
pub fn run_seed(base_seed: u64, d: usize, n_target: usize, run: usize) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for v in [d as u64, n_target as u64, run as u64] {
        h = splitmix64(h ^ v);
    }
    base_seed ^ h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub d: usize,
    pub engine: Engine,
    pub m: usize,
    pub k: u32,
    pub n_target: usize,
    pub n_actual: usize,
    pub n: usize,
    pub run: usize,
    pub seed: u64,
    /// +∞ marks a failed run (singular system, non-convergence, ...).
    pub e_inf: f64,
    pub t_weights_s: f64,
    pub t_solve_s: f64,
    pub max_cond: f64,
}

impl RunRecord {
    pub fn is_sentinel(&self) -> bool {
        !self.e_inf.is_finite()
    }
}

/// Everything [`run_single`] needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub d: usize,
    pub basis: BasisSpec,
    pub n_target: usize,
    pub n: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

/// Weights, assembly and solve on an existing discretization.
pub fn solve_on(
    nodes: &NodeSet,
    index: &NeighborIndex,
    basis: &BasisSpec,
    n: usize,
    solver: &SolverConfig,
) -> Result<SolveOutcome> {
    let t0 = Instant::now();
    let weights = compute_all_weights(nodes, index, basis, n)?;
    let t_weights = t0.elapsed().as_secs_f64();
    let max_cond = weights.iter().map(|w| w.cond_estimate).fold(0.0, f64::max);
    let t1 = Instant::now();
    let system = assemble(nodes, &weights)?;
    let solution = solve_sparse(&system, solver)?;
    let t_solve = t1.elapsed().as_secs_f64();
    let e_inf = inf_norm_error(&solution.u_hat, nodes)?;
    Ok(SolveOutcome {
        solution,
        e_inf: if e_inf.is_nan() { f64::INFINITY } else { e_inf },
        t_weights,
        t_solve,
        max_cond,
    })
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Solution,
    pub e_inf: f64,
    pub t_weights: f64,
    pub t_solve: f64,
    pub max_cond: f64,
}

fn record_on(nodes: &NodeSet, index: &NeighborIndex, spec: &RunSpec, run: usize, timings: bool) -> RunRecord {
    let outcome = solve_on(nodes, index, &spec.basis, spec.n, &spec.solver);
    let (e_inf, tw, ts, cond) = match outcome {
        Ok(o) => (o.e_inf, o.t_weights, o.t_solve, o.max_cond),
        Err(_) => (f64::INFINITY, 0.0, 0.0, f64::NAN),
    };
    RunRecord {
        d: spec.d,
        engine: spec.basis.engine,
        m: spec.basis.m,
        k: spec.basis.k,
        n_target: spec.n_target,
        n_actual: nodes.len(),
        n: spec.n,
        run,
        seed: spec.seed,
        e_inf,
        t_weights_s: if timings { tw } else { 0.0 },
        t_solve_s: if timings { ts } else { 0.0 },
        max_cond: cond,
    }
}

/// Discretize, compute weights, assemble, solve and measure e∞.
///
/// Failures inside the numerical pipeline become a +∞ sentinel; only an
/// invalid discretization request is an error.
pub fn run_single(spec: &RunSpec, run: usize) -> Result<RunRecord> {
    let nodes = discretize_ball(spec.d, spec.n_target, spec.seed)?;
    let index = NeighborIndex::build(&nodes);
    Ok(record_on(&nodes, &index, spec, run, true))
}

/// A scan configuration that was not run, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub engine: Engine,
    pub m: usize,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanTable {
    pub records: Vec<RunRecord>,
    pub rejected: Vec<Rejected>,
}

/// Records keyed by cell index, plus the cells that were not run.
type JobOutput = (Vec<(usize, RunRecord)>, Vec<Rejected>);

/// (engine, m, n) cells evaluated on every discretization.
struct Cell {
    basis: BasisSpec,
    n: usize,
}

fn run_cells(cfg: &ExperimentConfig, cells_for: impl Fn(usize) -> Vec<Cell> + Sync) -> Result<ScanTable> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_targets
        .iter()
        .flat_map(|&t| (0..cfg.n_runs).map(move |r| (t, r)))
        .collect();
    let per_job: Vec<Result<JobOutput>> = jobs
        .par_iter()
        .map(|&(target, run)| {
            let seed = run_seed(cfg.base_seed, cfg.d, target, run);
            let nodes = discretize_ball(cfg.d, target, seed)?;
            let index = NeighborIndex::build(&nodes);
            let mut out = Vec::new();
            let mut rejected = Vec::new();
            for (ci, cell) in cells_for(nodes.len()).into_iter().enumerate() {
                if let Err(e) = check_stencil_size(&cell.basis, cfg.d, cell.n, nodes.len()) {
                    rejected.push(Rejected {
                        engine: cell.basis.engine,
                        m: cell.basis.m,
                        n: cell.n,
                        reason: e.to_string(),
                    });
                    continue;
                }
                let spec = RunSpec {
                    d: cfg.d,
                    basis: cell.basis,
                    n_target: target,
                    n: cell.n,
                    seed,
                    solver: cfg.solver,
                };
                out.push((ci, record_on(&nodes, &index, &spec, run, cfg.timings)));
            }
            Ok((out, rejected))
        })
        .collect();

    // Configuration-then-run order, independent of completion order.
    let mut keyed = Vec::new();
    let mut rejected: Vec<Rejected> = Vec::new();
    for (job, res) in jobs.iter().zip(per_job) {
        let (records, rej) = res?;
        let t_idx = cfg.n_targets.iter().position(|&t| t == job.0).unwrap_or(0);
        keyed.extend(records.into_iter().map(|(ci, r)| ((t_idx, ci, r.run), r)));
        for r in rej {
            if !rejected.contains(&r) {
                rejected.push(r);
            }
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(ScanTable {
        records: keyed.into_iter().map(|(_, r)| r).collect(),
        rejected,
    })
}

/// Default stencil sizes scanned for basis size s: s, s+1 and 1.5s..5s.
pub fn default_scan_sizes(s: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0]
        .iter()
        .map(|f| (f * s as f64).ceil() as usize)
        .collect();
    sizes.push(s + 1);
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// Error against stencil size at fixed node counts.
pub fn stencil_scan(cfg: &ExperimentConfig) -> Result<ScanTable> {
    run_cells(cfg, |_| {
        let mut cells = Vec::new();
        for &engine in &cfg.engines {
            for &m in &cfg.m {
                let sizes = match &cfg.n_list {
                    Some(list) => list.clone(),
                    None => default_scan_sizes(monomial_count(m, cfg.d)),
                };
                for n in sizes {
                    cells.push(Cell {
                        basis: cfg.basis_spec(engine, m),
                        n,
                    });
                }
            }
        }
        cells
    })
}

/// Error against node count with one stencil size per degree.
pub fn convergence_scan(cfg: &ExperimentConfig) -> Result<ScanTable> {
    if cfg.n_targets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("N targets must be strictly ascending".into()));
    }
    run_cells(cfg, |_| {
        let mut cells = Vec::new();
        for &engine in &cfg.engines {
            for &m in &cfg.m {
                cells.push(Cell {
                    basis: cfg.basis_spec(engine, m),
                    n: cfg.n.resolve(m, cfg.d),
                });
            }
        }
        cells
    })
}

/// Order statistics of the finite errors of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityStats {
    pub e_min: f64,
    pub e_median: f64,
    pub e_max: f64,
    /// (e_max − e_min) / e_median
    pub spread: f64,
    pub runs_finite: usize,
    pub runs_sentinel: usize,
}

/// Min, median (mean of the two central values for even counts), max and
/// normalized spread. Non-finite values are counted as sentinels and
/// excluded.
pub fn stability_stats(errors: &[f64]) -> Result<StabilityStats> {
    let mut finite: Vec<f64> = errors.iter().copied().filter(|e| e.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::NoFiniteErrors);
    }
    finite.sort_by(f64::total_cmp);
    let k = finite.len();
    let e_median = if k % 2 == 1 {
        finite[k / 2]
    } else {
        0.5 * (finite[k / 2 - 1] + finite[k / 2])
    };
    let (e_min, e_max) = (finite[0], finite[k - 1]);
    Ok(StabilityStats {
        e_min,
        e_median,
        e_max,
        spread: (e_max - e_min) / e_median,
        runs_finite: k,
        runs_sentinel: errors.len() - k,
    })
}

/// One row of `stability.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub d: usize,
    pub engine: Engine,
    pub m: usize,
    pub n_target: usize,
    pub n: usize,
    /// `None` when every run was a sentinel.
    pub stats: Option<StabilityStats>,
    pub runs: usize,
    pub mean_n_actual: f64,
}

/// Groups records by (engine, m, N_target, n) in order of first appearance.
pub fn stability_report(records: &[RunRecord]) -> Vec<StabilityRow> {
    let mut keys: Vec<(Engine, usize, usize, usize)> = Vec::new();
    for r in records {
        let key = (r.engine, r.m, r.n_target, r.n);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(engine, m, n_target, n)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| (r.engine, r.m, r.n_target, r.n) == (engine, m, n_target, n))
                .collect();
            let errors: Vec<f64> = group.iter().map(|r| r.e_inf).collect();
            StabilityRow {
                d: group[0].d,
                engine,
                m,
                n_target,
                n,
                stats: stability_stats(&errors).ok(),
                runs: group.len(),
                mean_n_actual: group.iter().map(|r| r.n_actual as f64).sum::<f64>() / group.len() as f64,
            }
        })
        .collect()
}

/// Least-squares slope of log(e) against log(h) over (h, e) pairs with
/// finite positive error.
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| e.is_finite() && *e > 0.0 && *h > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints(pts.len()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints(1));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub engine: Engine,
    pub m: usize,
    pub slope: f64,
    /// (nominal h, median e∞) per node count.
    pub points: Vec<(f64, f64)>,
}

/// Convergence order per (engine, m): slope of log(median e∞) against
/// log(N^(−1/d)) with N the mean realized node count.
pub fn estimate_order(records: &[RunRecord]) -> Result<Vec<OrderEstimate>> {
    let rows = stability_report(records);
    let mut keys: Vec<(Engine, usize)> = Vec::new();
    for r in &rows {
        if !keys.contains(&(r.engine, r.m)) {
            keys.push((r.engine, r.m));
        }
    }
    keys.into_iter()
        .map(|(engine, m)| {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.engine == engine && r.m == m)
                .filter_map(|r| {
                    let h = r.mean_n_actual.powf(-1.0 / r.d as f64);
                    r.stats.map(|s| (h, s.e_median))
                })
                .collect();
            Ok(OrderEstimate {
                engine,
                m,
                slope: fit_order(&points)?,
                points,
            })
        })
        .collect()
}

fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

pub const RUNS_HEADER: [&str; 13] = [
    "d",
    "engine",
    "m",
    "k",
    "N_target",
    "N_actual",
    "n",
    "run",
    "seed",
    "e_inf",
    "t_weights_s",
    "t_solve_s",
    "max_cond",
];

pub const STABILITY_HEADER: [&str; 10] = [
    "d",
    "engine",
    "m",
    "N_target",
    "n",
    "runs_finite",
    "e_min",
    "e_median",
    "e_max",
    "spread",
];

pub fn write_runs_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_HEADER)?;
    for r in records {
        w.write_record([
            r.d.to_string(),
            r.engine.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.n_target.to_string(),
            r.n_actual.to_string(),
            r.n.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            fmt_f(r.e_inf),
            fmt_f(r.t_weights_s),
            fmt_f(r.t_solve_s),
            fmt_f(r.max_cond),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stability_csv<W: Write>(out: W, rows: &[StabilityRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STABILITY_HEADER)?;
    for r in rows {
        let (finite, stats) = match r.stats {
            Some(s) => (s.runs_finite, [s.e_min, s.e_median, s.e_max, s.spread].map(fmt_f)),
            None => (0, [f64::NAN; 4].map(fmt_f)),
        };
        let mut row = vec![
            r.d.to_string(),
            r.engine.to_string(),
            r.m.to_string(),
            r.n_target.to_string(),
            r.n.to_string(),
            finite.to_string(),
        ];
        row.extend(stats);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
