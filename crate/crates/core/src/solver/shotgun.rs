use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::schedule::Sampling;
use crate::solver::agd::start_point;
use crate::solver::{
    run, shrink_scalar, subset_gradients, Iterative, RunResult, SolveOptions, SubsetSampler,
    WorkStats, REFRESH_EVERY,
};

/// Parallel coordinate descent without momentum: every sampled coordinate
/// takes the step `1 / beta` against the same margins, then all updates are
/// applied together.
#[derive(Debug, Clone)]
pub struct Shotgun<'a> {
    obj: Objective<'a>,
    sampler: SubsetSampler,
    t: usize,
    w: Vec<f64>,
    mw: Vec<f64>,
    subset: Vec<usize>,
    grads: Vec<f64>,
    since_refresh: usize,
    stats: WorkStats,
}

impl<'a> Shotgun<'a> {
    pub fn new(
        obj: Objective<'a>,
        p: usize,
        sampling: Sampling,
        seed: u64,
        w0: Option<&[f64]>,
    ) -> Result<Self> {
        let w = start_point(w0, obj.n_features())?;
        Ok(Self {
            sampler: SubsetSampler::new(obj.n_features(), p, sampling, seed)?,
            mw: obj.margins(&w),
            obj,
            t: 1,
            w,
            subset: Vec::with_capacity(p),
            grads: Vec::with_capacity(p),
            since_refresh: 0,
            stats: WorkStats::default(),
        })
    }
}

impl Iterative for Shotgun<'_> {
    fn objective(&self) -> &Objective<'_> {
        &self.obj
    }

    fn t(&self) -> usize {
        self.t
    }

    fn step(&mut self) -> Result<()> {
        self.sampler.sample_into(&mut self.subset);
        let mw = &self.mw;
        subset_gradients(&self.obj, &self.subset, |i| mw[i], &mut self.grads);
        if self.grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let inv_beta = 1.0 / self.obj.beta();
        let a = self.obj.lambda() * inv_beta;
        let x = self.obj.data().x();
        let mut touched = 0u64;
        for (&j, &g) in self.subset.iter().zip(&self.grads) {
            let old = self.w[j];
            let new = shrink_scalar(old - inv_beta * g, a);
            self.w[j] = new;
            x.axpy_column(j, new - old, &mut self.mw);
            touched += 2 * x.column_nnz(j) as u64 + 1;
        }
        self.t += 1;
        self.stats.step_touches += touched;

        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.since_refresh = 0;
            self.mw = self.obj.margins(&self.w);
            self.stats.maintenance_touches += (x.nnz() + x.n_rows()) as u64;
        }
        Ok(())
    }

    fn weights(&self) -> Vec<f64> {
        self.w.clone()
    }

    fn margins_w(&self) -> Vec<f64> {
        self.mw.clone()
    }

    fn stats(&self) -> WorkStats {
        self.stats
    }

    fn add_maintenance(&mut self, touches: u64) {
        self.stats.maintenance_touches += touches;
    }
}

pub fn shotgun_solve(
    obj: Objective<'_>,
    p: usize,
    sampling: Sampling,
    seed: u64,
    w0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<RunResult> {
    run(&mut Shotgun::new(obj, p, sampling, seed, w0)?, opts)
}
