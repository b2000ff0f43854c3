use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::schedule::gamma;
use crate::solver::{fill_with, run, shrink_scalar, Iterative, RunResult, SolveOptions, WorkStats};

/// Accelerated proximal gradient with step `1 / (c beta)`.
///
/// `w_{t+1} = shrink(u_t - eta grad f(u_t), lambda eta)` and
/// `u_{t+1} = (1 - gamma_t) w_{t+1} + gamma_t w_t`.
#[derive(Debug, Clone)]
pub struct Agd<'a> {
    obj: Objective<'a>,
    c: f64,
    eta: f64,
    t: usize,
    w: Vec<f64>,
    u: Vec<f64>,
    w_next: Vec<f64>,
    mw: Vec<f64>,
    mu: Vec<f64>,
    stats: WorkStats,
}

impl<'a> Agd<'a> {
    pub fn new(obj: Objective<'a>, c: f64) -> Result<Self> {
        Self::with_start(obj, c, None)
    }

    /// Starts from `w0` (zero when `None`); `u_1 = w_1 = w0`.
    pub fn with_start(obj: Objective<'a>, c: f64, w0: Option<&[f64]>) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step constant must be positive, got {c}"
            )));
        }
        let d = obj.n_features();
        let w = start_point(w0, d)?;
        let mw = obj.margins(&w);
        Ok(Self {
            eta: 1.0 / (c * obj.beta()),
            obj,
            c,
            t: 1,
            u: w.clone(),
            w_next: vec![0.0; d],
            mu: mw.clone(),
            w,
            mw,
            stats: WorkStats::default(),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }
}

pub(crate) fn start_point(w0: Option<&[f64]>, d: usize) -> Result<Vec<f64>> {
    match w0 {
        None => Ok(vec![0.0; d]),
        Some(w) if w.len() != d => Err(Error::LengthMismatch {
            expected: d,
            found: w.len(),
        }),
        Some(w) if w.iter().any(|v| !v.is_finite()) => Err(Error::NonFinite("starting point")),
        Some(w) => Ok(w.to_vec()),
    }
}

impl Iterative for Agd<'_> {
    fn objective(&self) -> &Objective<'_> {
        &self.obj
    }

    fn t(&self) -> usize {
        self.t
    }

    fn step(&mut self) -> Result<()> {
        let grad = self.obj.full_gradient(&self.mu);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let eta = self.eta;
        let a = self.obj.lambda() * eta;
        let u = &self.u;
        fill_with(&mut self.w_next, |j| shrink_scalar(u[j] - eta * grad[j], a));

        let g = gamma(self.t);
        let (w, wn) = (&self.w, &self.w_next);
        fill_with(&mut self.u, |j| (1.0 - g) * wn[j] + g * w[j]);
        let mw_next = self.obj.margins(&self.w_next);
        let mw = &self.mw;
        fill_with(&mut self.mu, |i| (1.0 - g) * mw_next[i] + g * mw[i]);

        std::mem::swap(&mut self.w, &mut self.w_next);
        self.mw = mw_next;
        self.t += 1;

        let nnz = self.obj.data().x().nnz() as u64;
        let (n, d) = (self.obj.n_examples() as u64, self.obj.n_features() as u64);
        self.stats.step_touches += 2 * nnz + 3 * d + 3 * n;
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

/// Runs [`Agd`] from `w0` (or zero) under `opts`.
pub fn agd_solve(
    obj: Objective<'_>,
    c: f64,
    w0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<RunResult> {
    run(&mut Agd::with_start(obj, c, w0)?, opts)
}
