use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::schedule::{gamma, theta, ShotgunParams};
use crate::solver::agd::start_point;
use crate::solver::{
    fill_with, run, subset_gradients, Iterative, RunResult, SolveOptions, SubsetSampler, WorkStats,
    REFRESH_EVERY,
};

/// Range the implicit coefficient may occupy before the representation is
/// rebuilt from the materialized iterates.
pub const COEFFICIENT_RANGE: (f64, f64) = (1e-12, 1e12);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelMode {
    /// Stores `w_t` and `u_t`; every step costs `O(d + n)`.
    Naive,
    /// Stores two auxiliary vectors; a step touches only the sampled columns.
    #[default]
    Implicit,
}

/// Explicit iterates of the accelerated coordinate method.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub margins_w: Vec<f64>,
    pub margins_u: Vec<f64>,
}

impl SolverState {
    /// `t = 1`, `w_1 = u_1 = w0`.
    pub fn new(obj: &Objective<'_>, w0: &[f64]) -> Result<Self> {
        let w = start_point(Some(w0), obj.n_features())?;
        let m = obj.margins(&w);
        Ok(Self {
            t: 1,
            u: w.clone(),
            w,
            margins_u: m.clone(),
            margins_w: m,
        })
    }
}

fn ensure_unregularized(obj: &Objective<'_>) -> Result<()> {
    if obj.lambda() > 0.0 {
        return Err(Error::RegularizationUnsupported(obj.lambda()));
    }
    Ok(())
}

fn check_params(obj: &Objective<'_>, params: &ShotgunParams) -> Result<()> {
    if params.d != obj.n_features() {
        return Err(Error::LengthMismatch {
            expected: obj.n_features(),
            found: params.d,
        });
    }
    Ok(())
}

fn checked_steps(
    obj: &Objective<'_>,
    params: &ShotgunParams,
    subset: &[usize],
    margin: impl Fn(usize) -> f64 + Sync,
    out: &mut Vec<f64>,
) -> Result<()> {
    subset_gradients(obj, subset, margin, out);
    if out.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let step = params.eta / obj.beta();
    for g in out.iter_mut() {
        *g = -(step * *g);
    }
    Ok(())
}

/// One literal step on explicit iterates with the coordinate set `subset`
/// (sorted, distinct):
///
/// * `w_{t+1,j} = u_{t,j} - (eta/beta) grad f(u_t)_j` on the subset, `u_{t,j}` elsewhere;
/// * `u_{t+1} = (1 - gamma_t) w_{t+1} + gamma_t w_t + c_t (u_t - w_{t+1})`.
pub fn accel_shotgun_step(
    state: &mut SolverState,
    obj: &Objective<'_>,
    params: &ShotgunParams,
    subset: &[usize],
) -> Result<()> {
    ensure_unregularized(obj)?;
    check_params(obj, params)?;
    let d = obj.n_features();
    if let Some(&j) = subset.iter().find(|&&j| j >= d) {
        return Err(Error::OutOfBounds { index: j, dim: d });
    }
    let mut deltas = Vec::with_capacity(subset.len());
    let mu = &state.margins_u;
    checked_steps(obj, params, subset, |i| mu[i], &mut deltas)?;

    let x = obj.data().x();
    let mut w_next = state.u.clone();
    let mut mw_next = state.margins_u.clone();
    for (&j, &delta) in subset.iter().zip(&deltas) {
        w_next[j] = state.u[j] + delta;
        x.axpy_column(j, delta, &mut mw_next);
    }

    let t = state.t;
    let gm = gamma(t);
    let c = params.step_back(t);
    let mut u_next = vec![0.0; d];
    let (w, u, wn) = (&state.w, &state.u, &w_next);
    fill_with(&mut u_next, |j| {
        (1.0 - gm) * wn[j] + gm * w[j] + c * (u[j] - wn[j])
    });
    let mut mu_next = vec![0.0; obj.n_examples()];
    let (mw, mu, mwn) = (&state.margins_w, &state.margins_u, &mw_next);
    fill_with(&mut mu_next, |i| {
        (1.0 - gm) * mwn[i] + gm * mw[i] + c * (mu[i] - mwn[i])
    });

    state.w = w_next;
    state.u = u_next;
    state.margins_w = mw_next;
    state.margins_u = mu_next;
    state.t += 1;
    Ok(())
}

/// Accelerated parallel coordinate descent on explicit iterates.
#[derive(Debug, Clone)]
pub struct NaiveAccel<'a> {
    obj: Objective<'a>,
    params: ShotgunParams,
    sampler: SubsetSampler,
    state: SolverState,
    subset: Vec<usize>,
    since_refresh: usize,
    stats: WorkStats,
}

impl<'a> NaiveAccel<'a> {
    pub fn new(
        obj: Objective<'a>,
        params: ShotgunParams,
        seed: u64,
        w0: Option<&[f64]>,
    ) -> Result<Self> {
        ensure_unregularized(&obj)?;
        check_params(&obj, &params)?;
        let w = start_point(w0, obj.n_features())?;
        Ok(Self {
            sampler: SubsetSampler::new(params.d, params.p, params.sampling, seed)?,
            state: SolverState::new(&obj, &w)?,
            obj,
            params,
            subset: Vec::with_capacity(params.p),
            since_refresh: 0,
            stats: WorkStats::default(),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Applies one step with a caller-chosen coordinate set.
    pub fn step_with(&mut self, subset: &[usize]) -> Result<()> {
        accel_shotgun_step(&mut self.state, &self.obj, &self.params, subset)?;
        let x = self.obj.data().x();
        let nnz: usize = subset.iter().map(|&j| x.column_nnz(j)).sum();
        self.stats.step_touches += (2 * nnz + 3 * x.n_cols() + 4 * x.n_rows()) as u64;

        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.since_refresh = 0;
            self.state.margins_w = self.obj.margins(&self.state.w);
            self.state.margins_u = self.obj.margins(&self.state.u);
            self.stats.maintenance_touches += 2 * (x.nnz() + x.n_rows()) as u64;
        }
        Ok(())
    }
}

impl Iterative for NaiveAccel<'_> {
    fn objective(&self) -> &Objective<'_> {
        &self.obj
    }

    fn t(&self) -> usize {
        self.state.t
    }

    fn step(&mut self) -> Result<()> {
        let mut subset = std::mem::take(&mut self.subset);
        self.sampler.sample_into(&mut subset);
        let res = self.step_with(&subset);
        self.subset = subset;
        res
    }

    fn weights(&self) -> Vec<f64> {
        self.state.w.clone()
    }

    fn margins_w(&self) -> Vec<f64> {
        self.state.margins_w.clone()
    }

    fn stats(&self) -> WorkStats {
        self.stats
    }

    fn add_maintenance(&mut self, touches: u64) {
        self.stats.maintenance_touches += touches;
    }
}

/// Accelerated parallel coordinate descent in `O(sum of sampled column
/// lengths)` per step.
///
/// Holds `z`, `y` and a scalar `a` with
///
/// * `w_t = z + a y`
/// * `u_t = z + a (1 - 1/theta_t) y`
///
/// where `z = theta_t u_t - (theta_t - 1) w_t` moves only on the sampled
/// coordinates. Margins `X z` and `X y` are cached alongside.
#[derive(Debug, Clone)]
pub struct ImplicitAccel<'a> {
    obj: Objective<'a>,
    params: ShotgunParams,
    sampler: SubsetSampler,
    t: usize,
    z: Vec<f64>,
    y: Vec<f64>,
    a: f64,
    mz: Vec<f64>,
    my: Vec<f64>,
    subset: Vec<usize>,
    deltas: Vec<f64>,
    since_refresh: usize,
    stats: WorkStats,
}

impl<'a> ImplicitAccel<'a> {
    pub fn new(
        obj: Objective<'a>,
        params: ShotgunParams,
        seed: u64,
        w0: Option<&[f64]>,
    ) -> Result<Self> {
        ensure_unregularized(&obj)?;
        check_params(&obj, &params)?;
        let z = start_point(w0, obj.n_features())?;
        let (d, n) = (obj.n_features(), obj.n_examples());
        Ok(Self {
            sampler: SubsetSampler::new(params.d, params.p, params.sampling, seed)?,
            mz: obj.margins(&z),
            my: vec![0.0; n],
            obj,
            params,
            t: 1,
            z,
            y: vec![0.0; d],
            a: 1.0,
            subset: Vec::with_capacity(params.p),
            deltas: Vec::with_capacity(params.p),
            since_refresh: 0,
            stats: WorkStats::default(),
        })
    }

    fn alpha_u(&self) -> f64 {
        self.a * (1.0 - 1.0 / theta(self.t))
    }

    /// The coefficient `a` in `w_t = z + a y`.
    pub fn coefficient(&self) -> f64 {
        self.a
    }

    /// Materializes `u_t`.
    pub fn u(&self) -> Vec<f64> {
        let b = self.alpha_u();
        self.z.iter().zip(&self.y).map(|(z, y)| z + b * y).collect()
    }

    /// Materializes `X u_t`.
    pub fn margins_u(&self) -> Vec<f64> {
        let b = self.alpha_u();
        self.mz
            .iter()
            .zip(&self.my)
            .map(|(z, y)| z + b * y)
            .collect()
    }

    /// Rebuilds the representation with `a = 1` from the current iterates.
    pub fn rematerialize(&mut self) {
        let th = theta(self.t);
        let w = self.weights();
        let u = self.u();
        for j in 0..self.z.len() {
            let z = th * u[j] - (th - 1.0) * w[j];
            self.z[j] = z;
            self.y[j] = w[j] - z;
        }
        self.a = 1.0;
        self.refresh_margins();
        self.stats.rematerializations += 1;
        self.stats.maintenance_touches += 4 * self.z.len() as u64;
    }

    fn refresh_margins(&mut self) {
        self.mz = self.obj.margins(&self.z);
        self.my = self.obj.margins(&self.y);
        let x = self.obj.data().x();
        self.stats.maintenance_touches += 2 * (x.nnz() + x.n_rows()) as u64;
    }

    /// Applies one step with a caller-chosen coordinate set.
    pub fn step_with(&mut self, subset: &[usize]) -> Result<()> {
        let d = self.z.len();
        if let Some(&j) = subset.iter().find(|&&j| j >= d) {
            return Err(Error::OutOfBounds { index: j, dim: d });
        }
        let th = theta(self.t);
        let b = self.alpha_u();
        let (mz, my) = (&self.mz, &self.my);
        checked_steps(
            &self.obj,
            &self.params,
            subset,
            |i| mz[i] + b * my[i],
            &mut self.deltas,
        )?;

        // a_{t+1} = a_t (1 - 1/theta_t); at t = 1 it would vanish, but then
        // y is still zero and any positive value represents the same iterates.
        let a_next = if b == 0.0 { 1.0 } else { b };
        let gz = th * self.params.aggregate_gain();
        let gy = (1.0 - gz) / a_next;
        let x = self.obj.data().x();
        let mut touched = 0u64;
        for (&j, &delta) in subset.iter().zip(&self.deltas) {
            self.z[j] += gz * delta;
            self.y[j] += gy * delta;
            x.axpy_column(j, gz * delta, &mut self.mz);
            x.axpy_column(j, gy * delta, &mut self.my);
            touched += 3 * x.column_nnz(j) as u64 + 2;
        }
        self.a = a_next;
        self.t += 1;
        self.stats.step_touches += touched;

        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.since_refresh = 0;
            self.refresh_margins();
        }
        let (lo, hi) = COEFFICIENT_RANGE;
        if !(lo..=hi).contains(&self.a.abs()) {
            self.rematerialize();
        }
        Ok(())
    }
}

impl Iterative for ImplicitAccel<'_> {
    fn objective(&self) -> &Objective<'_> {
        &self.obj
    }

    fn t(&self) -> usize {
        self.t
    }

    fn step(&mut self) -> Result<()> {
        let mut subset = std::mem::take(&mut self.subset);
        self.sampler.sample_into(&mut subset);
        let res = self.step_with(&subset);
        self.subset = subset;
        res
    }

    fn weights(&self) -> Vec<f64> {
        let a = self.a;
        self.z.iter().zip(&self.y).map(|(z, y)| z + a * y).collect()
    }

    fn margins_w(&self) -> Vec<f64> {
        let a = self.a;
        self.mz
            .iter()
            .zip(&self.my)
            .map(|(z, y)| z + a * y)
            .collect()
    }

    fn value(&self) -> f64 {
        self.obj.smooth_value(&self.margins_w())
    }

    fn stats(&self) -> WorkStats {
        self.stats
    }

    fn add_maintenance(&mut self, touches: u64) {
        self.stats.maintenance_touches += touches;
    }
}

/// Runs the accelerated coordinate method in the chosen storage mode.
pub fn accel_shotgun_solve(
    obj: Objective<'_>,
    params: ShotgunParams,
    mode: AccelMode,
    seed: u64,
    w0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<RunResult> {
    match mode {
        AccelMode::Naive => run(&mut NaiveAccel::new(obj, params, seed, w0)?, opts),
        AccelMode::Implicit => run(&mut ImplicitAccel::new(obj, params, seed, w0)?, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, SparseColMatrix};
    use crate::loss::LossKind;
    use crate::schedule::{Sampling, StepChoice};

    fn small() -> Dataset {
        let x = SparseColMatrix::from_dense(&[
            vec![0.6, 0.0, 0.8, 0.0],
            vec![0.8, 0.6, 0.0, 0.0],
            vec![0.0, 0.8, 0.6, 0.6],
            vec![0.0, 0.0, 0.0, 0.8],
        ])
        .unwrap();
        Dataset::new(x, vec![1.0, -0.5, 0.25, 2.0]).unwrap()
    }

    #[test]
    fn untouched_coordinates_copy_u() {
        let data = small();
        let obj = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        let params =
            ShotgunParams::new(4, 2, 2.0, Sampling::UniformSubset, StepChoice::Optimal).unwrap();
        let mut s = SolverState::new(&obj, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        accel_shotgun_step(&mut s, &obj, &params, &[0, 2]).unwrap();
        let u_before = s.u.clone();
        accel_shotgun_step(&mut s, &obj, &params, &[1, 3]).unwrap();
        assert_eq!(s.w[0].to_bits(), u_before[0].to_bits());
        assert_eq!(s.w[2].to_bits(), u_before[2].to_bits());
        assert_ne!(s.w[1], u_before[1]);
    }

    #[test]
    fn implicit_matches_naive() {
        let data = small();
        let obj = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        let params =
            ShotgunParams::new(4, 2, 2.0, Sampling::UniformSubset, StepChoice::Optimal).unwrap();
        let mut naive = NaiveAccel::new(obj, params, 9, None).unwrap();
        let mut imp = ImplicitAccel::new(obj, params, 9, None).unwrap();
        for _ in 0..300 {
            naive.step().unwrap();
            imp.step().unwrap();
            let (wn, wi) = (naive.weights(), imp.weights());
            let (un, ui) = (&naive.state().u, imp.u());
            for j in 0..4 {
                assert!((wn[j] - wi[j]).abs() <= 1e-9 * (1.0 + wn[j].abs()));
                assert!((un[j] - ui[j]).abs() <= 1e-9 * (1.0 + un[j].abs()));
            }
        }
    }

    #[test]
    fn rematerialization_preserves_iterates() {
        let data = small();
        let obj = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        let params =
            ShotgunParams::new(4, 3, 2.0, Sampling::UniformSubset, StepChoice::Optimal).unwrap();
        let mut imp = ImplicitAccel::new(obj, params, 1, None).unwrap();
        let mut reference = ImplicitAccel::new(obj, params, 1, None).unwrap();
        for k in 0..40 {
            if k % 7 == 3 {
                imp.rematerialize();
                assert_eq!(imp.coefficient(), 1.0);
            }
            imp.step().unwrap();
            reference.step().unwrap();
        }
        for (a, b) in imp.weights().iter().zip(reference.weights()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(imp.stats().rematerializations >= 5);
    }

    #[test]
    fn lasso_is_refused() {
        let data = small();
        let obj = Objective::new(&data, LossKind::Square, 0.1).unwrap();
        let params =
            ShotgunParams::new(4, 2, 2.0, Sampling::UniformSubset, StepChoice::Optimal).unwrap();
        assert!(matches!(
            ImplicitAccel::new(obj, params, 0, None),
            Err(Error::RegularizationUnsupported(_))
        ));
        assert!(matches!(
            NaiveAccel::new(obj, params, 0, None),
            Err(Error::RegularizationUnsupported(_))
        ));
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let x = SparseColMatrix::from_dense(&[vec![1.0]]).unwrap();
        let data = Dataset::new(x, vec![1e308]).unwrap();
        let obj = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        let params =
            ShotgunParams::new(1, 1, 1.0, Sampling::UniformSubset, StepChoice::Fixed(1.9)).unwrap();
        let mut s = SolverState::new(&obj, &[-1e308]).unwrap();
        assert!(matches!(
            accel_shotgun_step(&mut s, &obj, &params, &[0]),
            Err(Error::NonFinite(_))
        ));
    }
}
