//! The solvers and the shared run loop.
//!
//! * [`Agd`]: accelerated proximal gradient over all coordinates, with the
//!   step constant chosen from `rho`, `kappa` or `kappa_bar`.
//! * [`Shotgun`]: parallel coordinate descent on a random subset, no momentum.
//! * [`NaiveAccel`] / [`ImplicitAccel`]: accelerated parallel coordinate
//!   descent, stored literally or through a two-vector representation that
//!   only touches the sampled coordinates.
//!
//! Each solver implements [`Iterative`]; [`run`] drives it with a
//! [`StoppingRule`] and records a [`Trace`].

mod accel;
mod agd;
mod sampling;
mod shotgun;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use accel::{
    accel_shotgun_solve, accel_shotgun_step, AccelMode, ImplicitAccel, NaiveAccel, SolverState,
    COEFFICIENT_RANGE,
};
pub use agd::{agd_solve, Agd};
pub use sampling::{sample_subset, SubsetSampler};
pub use shotgun::{shotgun_solve, Shotgun};

use crate::error::{Error, Result};
use crate::loss::{Objective, PAR_MIN_WORK};
use crate::trace::{Trace, TraceRow};

/// Margin caches are recomputed from scratch this often to cap drift.
pub const REFRESH_EVERY: usize = 1000;

/// Soft threshold `sign(v) max(|v| - a, 0)`.
#[inline]
pub fn shrink_scalar(v: f64, a: f64) -> f64 {
    if v > a {
        v - a
    } else if v < -a {
        v + a
    } else {
        0.0
    }
}

/// Coordinate-wise soft threshold.
pub fn shrink(w: &[f64], a: f64) -> Vec<f64> {
    debug_assert!(a >= 0.0);
    w.iter().map(|&v| shrink_scalar(v, a)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Maximum number of update steps.
    pub max_iter: usize,
    /// Stop when successive checkpoint objectives differ by at most this
    /// fraction. Zero disables the test.
    pub objective_tol: f64,
    /// Stop when the optimality residual (`||grad f||_inf` without
    /// regularization) drops to this value. Zero disables the test.
    pub grad_norm_tol: f64,
    /// Record a checkpoint every this many steps.
    pub checkpoint_every: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            objective_tol: 0.0,
            grad_norm_tol: 0.0,
            checkpoint_every: 1,
        }
    }
}

impl StoppingRule {
    pub fn max_iter(max_iter: usize) -> Self {
        Self {
            max_iter,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidParameter(
                "checkpoint_every must be at least 1".into(),
            ));
        }
        if !(self.objective_tol >= 0.0) || !(self.grad_norm_tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    ObjectiveTol,
    GradNormTol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub stop: StoppingRule,
    /// Known optimal value; fills the suboptimality column.
    pub f_star: Option<f64>,
    /// Record wall-clock time per checkpoint.
    pub record_time: bool,
    /// Record the optimality residual at every checkpoint, not only when the
    /// gradient stopping test needs it.
    pub trace_residual: bool,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stop: StoppingRule::default(),
            f_star: None,
            record_time: true,
            trace_residual: true,
            workers: 0,
        }
    }
}

/// Work counters, in vector entries read or written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkStats {
    /// Entries touched by update steps.
    pub step_touches: u64,
    /// Entries touched by checkpoints, cache refreshes and re-materialization.
    pub maintenance_touches: u64,
    pub rematerializations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Final iterate in the original feature space.
    pub w_final: Vec<f64>,
    /// Final iterate in the (normalized) space the solver worked in.
    pub w_solver: Vec<f64>,
    pub trace: Trace,
    /// Update steps taken.
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_objective: f64,
    pub wall_ns: u64,
    pub stats: WorkStats,
}

/// Gradient coordinates `grad f_j` for `j` in `subset`, with the margin of row
/// `i` given by `margin(i)`. Runs in parallel only when the subset holds enough
/// stored entries; the result is the same either way.
pub(crate) fn subset_gradients<F>(
    obj: &Objective<'_>,
    subset: &[usize],
    margin: F,
    out: &mut Vec<f64>,
) where
    F: Fn(usize) -> f64 + Sync,
{
    out.clear();
    let x = obj.data().x();
    let work: usize = subset.iter().map(|&j| x.column_nnz(j)).sum();
    if work >= PAR_MIN_WORK && subset.len() > 1 {
        subset
            .par_iter()
            .map(|&j| obj.column_gradient(j, &margin))
            .collect_into_vec(out);
    } else {
        out.extend(subset.iter().map(|&j| obj.column_gradient(j, &margin)));
    }
}

/// `out[k] = f(k)` for every index, in parallel for long vectors.
pub(crate) fn fill_with<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync,
{
    if out.len() >= PAR_MIN_WORK {
        out.par_iter_mut()
            .with_min_len(4096)
            .enumerate()
            .for_each(|(k, o)| *o = f(k));
    } else {
        for (k, o) in out.iter_mut().enumerate() {
            *o = f(k);
        }
    }
}

/// A solver that advances one iterate at a time.
pub trait Iterative {
    fn objective(&self) -> &Objective<'_>;
    /// Index `t` of the current iterate `w_t`; 1 before any step.
    fn t(&self) -> usize;
    fn step(&mut self) -> Result<()>;
    /// Materializes `w_t`.
    fn weights(&self) -> Vec<f64>;
    /// Materializes `X w_t`.
    fn margins_w(&self) -> Vec<f64>;
    /// `F(w_t)`.
    fn value(&self) -> f64 {
        let obj = self.objective();
        if obj.lambda() == 0.0 {
            obj.smooth_value(&self.margins_w())
        } else {
            obj.full_value(&self.weights(), &self.margins_w())
        }
    }
    fn stats(&self) -> WorkStats;
    fn add_maintenance(&mut self, touches: u64);
}

/// Runs `f` on a dedicated pool of `workers` threads (or inline for 0).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Drives `solver` until a stopping criterion fires.
pub fn run<S: Iterative + Send>(solver: &mut S, opts: &SolveOptions) -> Result<RunResult> {
    opts.stop.validate()?;
    with_workers(opts.workers, || run_inline(solver, opts))?
}

fn run_inline<S: Iterative>(solver: &mut S, opts: &SolveOptions) -> Result<RunResult> {
    let start = Instant::now();
    let stop = opts.stop;
    let mut trace = Trace::default();
    let mut steps = 0usize;
    let mut prev_value: Option<f64> = None;

    let stop_reason = loop {
        let at_checkpoint = steps % stop.checkpoint_every == 0 || steps == stop.max_iter;
        if at_checkpoint {
            let value = solver.value();
            if !value.is_finite() {
                return Err(Error::NonFinite("objective"));
            }
            let n = solver.objective().n_examples() as u64;
            let need_residual = stop.grad_norm_tol > 0.0 || opts.trace_residual;
            let residual = if need_residual {
                let w = solver.weights();
                let obj = solver.objective();
                let g = obj.full_gradient(&solver.margins_w());
                let touches = obj.data().x().nnz() as u64 + 2 * w.len() as u64;
                let r = obj.optimality_residual(&w, &g);
                solver.add_maintenance(touches);
                Some(r)
            } else {
                None
            };
            solver.add_maintenance(n);
            trace.push(TraceRow {
                iter: solver.t() as u64,
                elapsed_ns: opts.record_time.then(|| start.elapsed().as_nanos() as u64),
                objective: value,
                suboptimality: opts.f_star.map(|f| value - f),
                grad_inf_norm: residual,
            })?;

            if let Some(r) = residual {
                if stop.grad_norm_tol > 0.0 && r <= stop.grad_norm_tol {
                    break StopReason::GradNormTol;
                }
            }
            if let Some(p) = prev_value {
                let scale = value.abs().max(p.abs()).max(f64::MIN_POSITIVE);
                if stop.objective_tol > 0.0 && (value - p).abs() <= stop.objective_tol * scale {
                    break StopReason::ObjectiveTol;
                }
            }
            prev_value = Some(value);
        }
        if steps == stop.max_iter {
            break StopReason::MaxIter;
        }
        solver.step()?;
        steps += 1;
    };

    let w_solver = solver.weights();
    let w_final = solver.objective().data().restore_solution(&w_solver)?;
    Ok(RunResult {
        w_final,
        w_solver,
        final_objective: trace.last().map(|r| r.objective).unwrap_or(f64::NAN),
        trace,
        iterations: steps,
        stop_reason,
        wall_ns: start.elapsed().as_nanos() as u64,
        stats: solver.stats(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink(&[2.0, -0.5, 0.1], 0.5), vec![1.5, 0.0, 0.0]);
        let w = [3.0, -1e-300, 0.0, -7.5];
        assert_eq!(shrink(&w, 0.0), w.to_vec());
        assert_eq!(shrink(&w, 7.5), vec![0.0; 4]);
        assert_eq!(shrink(&[-2.0], 0.5), vec![-1.5]);
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::max_iter(0).validate().is_err());
        assert!(StoppingRule {
            checkpoint_every: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StoppingRule {
            grad_norm_tol: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(StoppingRule::default().validate().is_ok());
    }
}
