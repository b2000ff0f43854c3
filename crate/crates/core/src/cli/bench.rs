use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cli::config::{resolve, run_resolved, Algorithm, Resolved, SolverSpec};
use crate::data::{Dataset, PowerIteration, SparsityReport};
use crate::error::{Error, Result};
use crate::loss::{LossKind, Objective};
use crate::schedule::{agd_bound, step_size_c, StepOption};
use crate::solver::{Agd, Iterative, RunResult, SolveOptions, StoppingRule};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-12,
            max_iter: 1_000_000,
            check_every: 100,
        }
    }
}

/// A high-accuracy solution used as the optimum in suboptimality traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub f_star: f64,
    #[serde(skip)]
    pub w_star: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tolerance: f64,
}

impl Reference {
    /// `||w1 - w*||^2` for the default start `w1 = 0`.
    pub fn r2(&self) -> f64 {
        self.w_star.iter().map(|v| v * v).sum()
    }
}

/// Runs accelerated gradient with step constant `rho` until the optimality
/// residual reaches `cfg.grad_tol` or `cfg.max_iter` steps have been taken.
/// Returns the final iterate once the tolerance is met, and otherwise the
/// checkpoint with the lowest objective; the residual is that of the returned
/// point.
///
/// Started from zero, so on underdetermined least squares it approaches the
/// minimum-norm minimizer.
pub fn reference_optimum(
    obj: Objective<'_>,
    report: &SparsityReport,
    cfg: ReferenceConfig,
) -> Result<Reference> {
    let c = step_size_c(StepOption::Rho, report, false)?;
    let mut agd = Agd::new(obj, c)?;
    let residual_of = |agd: &Agd<'_>| {
        let w = agd.weights();
        let g = obj.full_gradient(&agd.margins_w());
        obj.optimality_residual(&w, &g)
    };
    let mut residual = residual_of(&agd);
    let mut best = (agd.value(), agd.weights(), residual);
    let mut steps = 0;
    while residual > cfg.grad_tol && steps < cfg.max_iter {
        agd.step()?;
        steps += 1;
        if steps % cfg.check_every.max(1) == 0 || steps == cfg.max_iter {
            residual = residual_of(&agd);
            let value = agd.value();
            if !value.is_finite() {
                return Err(Error::Reference(format!(
                    "objective became {value} at step {steps}"
                )));
            }
            if value <= best.0 {
                best = (value, agd.weights(), residual);
            }
        }
    }
    let (f_star, w_star, residual) = if residual <= cfg.grad_tol {
        (agd.value(), agd.weights(), residual)
    } else {
        best
    };
    Ok(Reference {
        f_star,
        w_star,
        residual,
        iterations: steps,
        converged: residual <= cfg.grad_tol,
        tolerance: cfg.grad_tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Window points dropped because the value was not positive.
    pub skipped: usize,
}

/// Least-squares line through `(ln t, ln v)` for `lo <= t <= hi`.
pub fn fit_loglog_slope(points: &[(u64, f64)], lo: u64, hi: u64) -> Option<SlopeFit> {
    let mut skipped = 0;
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, _)| (lo..=hi).contains(t))
        .filter_map(|&(t, v)| {
            if v > 0.0 && v.is_finite() {
                Some(((t as f64).ln(), v.ln()))
            } else {
                skipped += 1;
                None
            }
        })
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(SlopeFit {
        slope,
        intercept: my - slope * mx,
        points: xy.len(),
        skipped,
    })
}

/// Pointwise mean of the suboptimality column over traces that share the
/// same checkpoints.
pub fn mean_suboptimality(traces: &[Trace]) -> Result<Vec<(u64, f64)>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidParameter("no traces to average".into()))?;
    let mut sums: Vec<(u64, f64)> = first.rows.iter().map(|r| (r.iter, 0.0)).collect();
    for trace in traces {
        if trace.rows.len() != sums.len() {
            return Err(Error::InvalidParameter(
                "traces to average have different checkpoints".into(),
            ));
        }
        for (acc, row) in sums.iter_mut().zip(&trace.rows) {
            if row.iter != acc.0 {
                return Err(Error::InvalidParameter(
                    "traces to average have different checkpoints".into(),
                ));
            }
            acc.1 += row
                .suboptimality
                .ok_or_else(|| Error::InvalidParameter("trace lacks suboptimality".into()))?;
        }
    }
    let k = traces.len() as f64;
    Ok(sums.into_iter().map(|(t, s)| (t, s / k)).collect())
}

/// The suboptimality bound that applies to `resolved` after `t` iterates,
/// if there is one.
pub fn theoretical_bound(resolved: &Resolved, beta: f64, r2: f64, t: usize) -> Option<f64> {
    match resolved.algorithm {
        Algorithm::Agd1 | Algorithm::Agd2 | Algorithm::Agd3 => {
            agd_bound(resolved.c?, beta, r2, t).ok()
        }
        Algorithm::AccelShotgun => resolved.params?.bound(beta, r2, t).ok(),
        Algorithm::Shotgun => None,
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algorithms: Vec<SolverSpec>,
    pub loss: LossKind,
    pub lambda: f64,
    pub stop: StoppingRule,
    pub seeds: Vec<u64>,
    pub window: (u64, u64),
    pub bound_check: bool,
    /// Multiplier on the bound in bound-check mode.
    pub bound_slack: f64,
    /// Run seeds concurrently. Timing is not recorded in this mode.
    pub concurrent: bool,
    pub record_time: bool,
    pub workers: usize,
    pub power: PowerIteration,
    pub reference: ReferenceConfig,
}

impl BenchConfig {
    pub fn new(algorithms: Vec<SolverSpec>, seeds: Vec<u64>) -> Self {
        Self {
            algorithms,
            loss: LossKind::Square,
            lambda: 0.0,
            stop: StoppingRule::max_iter(1000),
            seeds,
            window: (10, 1000),
            bound_check: false,
            bound_slack: 1.0,
            concurrent: false,
            record_time: true,
            workers: 0,
            power: PowerIteration::default(),
            reference: ReferenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanPoint {
    pub iter: u64,
    pub mean_suboptimality: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmReport {
    pub label: String,
    pub resolved: Resolved,
    pub seeds: Vec<u64>,
    pub slope: Option<SlopeFit>,
    /// In bound-check mode: mean suboptimality within the slackened bound at
    /// every checkpoint.
    pub bound_ok: Option<bool>,
    pub final_mean_suboptimality: f64,
    pub mean_trace: Vec<MeanPoint>,
    #[serde(skip)]
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub dataset_sha256: Option<String>,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    pub kappa: usize,
    pub kappa_bar: f64,
    pub rho: f64,
    pub rho_converged: bool,
    pub loss: LossKind,
    pub lambda: f64,
    pub reference: Reference,
    pub window: (u64, u64),
    pub bound_slack: f64,
    pub algorithms: Vec<AlgorithmReport>,
}

/// Runs every configured algorithm over every seed on the same dataset.
pub fn run_bench(
    data: &Dataset,
    cfg: &BenchConfig,
    dataset_sha256: Option<String>,
) -> Result<BenchReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one seed is required".into(),
        ));
    }
    cfg.stop.validate()?;
    let x = data.x();
    let report = SparsityReport::compute(x, cfg.power)?;
    let obj = Objective::new(data, cfg.loss, cfg.lambda)?;
    let reference = reference_optimum(obj, &report, cfg.reference)?;
    let r2 = reference.r2();
    let opts = SolveOptions {
        stop: cfg.stop,
        f_star: Some(reference.f_star),
        record_time: cfg.record_time && !cfg.concurrent,
        trace_residual: true,
        workers: 0,
    };

    let mut seen: HashMap<&'static str, usize> = HashMap::new();
    let mut algorithms = Vec::new();
    for spec in &cfg.algorithms {
        let resolved = resolve(spec, &report, x.n_cols())?;
        let name = spec.algorithm.name();
        let count = seen.entry(name).or_default();
        *count += 1;
        let label = if *count == 1 {
            name.to_string()
        } else {
            format!("{name}-{count}")
        };

        let run_one = |seed: &u64| run_resolved(obj, &resolved, *seed, None, &opts);
        let runs: Vec<RunResult> = crate::solver::with_workers(cfg.workers, || {
            if cfg.concurrent {
                cfg.seeds
                    .par_iter()
                    .map(run_one)
                    .collect::<Result<Vec<_>>>()
            } else {
                cfg.seeds.iter().map(run_one).collect::<Result<Vec<_>>>()
            }
        })??;

        let traces: Vec<Trace> = runs.iter().map(|r| r.trace.clone()).collect();
        let mean = mean_suboptimality(&traces)?;
        let beta = obj.beta();
        let mean_trace: Vec<MeanPoint> = mean
            .iter()
            .map(|&(t, m)| MeanPoint {
                iter: t,
                mean_suboptimality: m,
                bound: if cfg.bound_check {
                    theoretical_bound(&resolved, beta, r2, t as usize)
                } else {
                    None
                },
            })
            .collect();
        let bound_ok = cfg.bound_check.then(|| {
            mean_trace.iter().all(|p| match p.bound {
                Some(b) => p.mean_suboptimality <= b * cfg.bound_slack,
                None => true,
            })
        });
        algorithms.push(AlgorithmReport {
            label,
            slope: fit_loglog_slope(&mean, cfg.window.0, cfg.window.1),
            bound_ok,
            final_mean_suboptimality: mean.last().map_or(f64::NAN, |p| p.1),
            mean_trace,
            seeds: cfg.seeds.clone(),
            resolved,
            runs,
        });
    }

    Ok(BenchReport {
        dataset_sha256,
        n: x.n_rows(),
        d: x.n_cols(),
        nnz: x.nnz(),
        kappa: report.kappa,
        kappa_bar: report.kappa_bar,
        rho: report.rho,
        rho_converged: report.rho_converged,
        loss: cfg.loss,
        lambda: cfg.lambda,
        reference,
        window: cfg.window,
        bound_slack: cfg.bound_slack,
        algorithms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseColMatrix;
    use crate::trace::TraceRow;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(u64, f64)> = (1..=1000).map(|t| (t, 3.0 / (t as f64).powi(2))).collect();
        let fit = fit_loglog_slope(&pts, 10, 1000).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert_eq!(fit.points, 991);
        assert!(fit_loglog_slope(&pts, 5, 5).is_none());
    }

    #[test]
    fn non_positive_points_are_skipped() {
        let pts = vec![(10, 1.0), (20, 0.0), (40, 0.25)];
        let fit = fit_loglog_slope(&pts, 1, 100).unwrap();
        assert_eq!(fit.skipped, 1);
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_requires_matching_checkpoints() {
        let row = |iter, s| TraceRow {
            iter,
            elapsed_ns: None,
            objective: 1.0,
            suboptimality: Some(s),
            grad_inf_norm: None,
        };
        let a = Trace {
            rows: vec![row(1, 1.0), row(2, 0.5)],
        };
        let b = Trace {
            rows: vec![row(1, 3.0), row(2, 1.5)],
        };
        assert_eq!(
            mean_suboptimality(&[a.clone(), b]).unwrap(),
            vec![(1, 2.0), (2, 1.0)]
        );
        let c = Trace {
            rows: vec![row(1, 1.0), row(3, 0.5)],
        };
        assert!(mean_suboptimality(&[a, c]).is_err());
    }

    #[test]
    fn reference_on_orthonormal_lasso() {
        let data = Dataset::new(SparseColMatrix::identity(2), vec![2.0, 0.3]).unwrap();
        let obj = Objective::new(&data, LossKind::Square, 0.5).unwrap();
        let report = SparsityReport::compute(data.x(), PowerIteration::default()).unwrap();
        let r = reference_optimum(obj, &report, ReferenceConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.w_star, vec![1.5, 0.0]);
        // 1/2 (0.5^2 + 0.3^2) + 0.5 * 1.5
        assert!((r.f_star - 0.92).abs() < 1e-15);
    }
}
