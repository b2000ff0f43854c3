//! Momentum sequences, step-size rules, parameter selection and the
//! convergence bounds used to check both solvers.
//!
//! `theta_0 = 0`, `theta_{t+1} = (1 + sqrt(1 + 4 theta_t^2)) / 2` and
//! `gamma_t = (1 - theta_t) / theta_{t+1}`.

use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::data::SparsityReport;
use crate::error::{Error, Result};

/// Memoized `theta_t` values. Safe to query from several threads; every
/// caller sees the same values because the recurrence is evaluated once.
#[derive(Debug)]
pub struct ThetaSchedule {
    cache: RwLock<Vec<f64>>,
}

impl Default for ThetaSchedule {
    fn default() -> Self {
        Self::new()
    }
}

impl ThetaSchedule {
    pub fn new() -> Self {
        Self {
            cache: RwLock::new(vec![0.0]),
        }
    }

    /// Process-wide schedule shared by the solvers.
    pub fn global() -> &'static ThetaSchedule {
        static GLOBAL: OnceLock<ThetaSchedule> = OnceLock::new();
        GLOBAL.get_or_init(ThetaSchedule::new)
    }

    pub fn theta(&self, t: usize) -> f64 {
        {
            let cache = self.cache.read().unwrap();
            if let Some(&v) = cache.get(t) {
                return v;
            }
        }
        let mut cache = self.cache.write().unwrap();
        // grow geometrically so long runs do not take the write lock every step
        let target = (t + 1).max(cache.len() * 2);
        while cache.len() < target {
            let prev = *cache.last().unwrap();
            cache.push(0.5 * (1.0 + (1.0 + 4.0 * prev * prev).sqrt()));
        }
        cache[t]
    }

    /// `gamma_t` for `t >= 1`.
    pub fn gamma(&self, t: usize) -> f64 {
        assert!(t >= 1, "gamma is defined for t >= 1");
        (1.0 - self.theta(t)) / self.theta(t + 1)
    }
}

pub fn theta(t: usize) -> f64 {
    ThetaSchedule::global().theta(t)
}

pub fn gamma(t: usize) -> f64 {
    ThetaSchedule::global().gamma(t)
}

/// Which curvature constant sets the gradient step `1 / (c beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOption {
    /// `c = rho`, the spectral radius of `X^T X` (FISTA).
    Rho,
    /// `c = kappa`, the maximum row sparsity.
    Kappa,
    /// `c = kappa_bar`, the weighted row sparsity.
    KappaBar,
}

/// The constant `c` for the chosen option. `Rho` needs a converged estimate
/// unless `force` is set.
pub fn step_size_c(option: StepOption, report: &SparsityReport, force: bool) -> Result<f64> {
    match option {
        StepOption::Rho if !report.rho_converged && !force => Err(Error::UnconvergedRho),
        StepOption::Rho => Ok(report.rho),
        StepOption::Kappa => Ok(report.kappa as f64),
        StepOption::KappaBar => Ok(report.kappa_bar),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `P` distinct coordinates, uniform over all subsets of that size.
    #[default]
    UniformSubset,
    /// One coordinate from each of `P` fixed contiguous blocks of size `d / P`.
    BlockPartition,
}

/// Interference between the `P` simultaneous coordinate updates.
pub fn sigma(p: usize, d: usize, rho: f64, sampling: Sampling) -> f64 {
    match sampling {
        Sampling::UniformSubset if d <= 1 => 0.0,
        Sampling::UniformSubset => (rho - 1.0) * ((p - 1) as f64 / (d - 1) as f64),
        Sampling::BlockPartition => (rho - 1.0) * (p as f64 / d as f64),
    }
}

/// Step-size coefficient minimizing the iteration estimate for a fixed `P`.
pub fn eta_star(sigma: f64) -> f64 {
    1.0 / (1.0 + sigma)
}

/// Number of parallel updates minimizing the iteration estimate at `eta = 1`,
/// rounded half up and clamped to `[1, d]`. Every `P` is admissible when
/// `rho <= 1`, and then all `d` coordinates are used.
pub fn p_star(d: usize, rho: f64) -> usize {
    if rho <= 1.0 {
        return d;
    }
    let raw = 2.0 / 3.0 * ((d as f64 - 1.0) / (rho - 1.0) + 1.0);
    ((raw + 0.5).floor() as usize).clamp(1, d)
}

/// `1 - (2P/d)(1 - load)` with `load = (eta/2)(1 + sigma)`.
fn step_back_factor(p: usize, d: usize, load: f64) -> f64 {
    1.0 - (2.0 * p as f64 / d as f64) * (1.0 - load)
}

/// Coefficient of the step-back term `c_t (u_t - w_{t+1})`.
pub fn step_back_coefficient(t: usize, p: usize, d: usize, eta: f64, sigma: f64) -> f64 {
    let load = 0.5 * eta * (1.0 + sigma);
    theta(t) / theta(t + 1) * step_back_factor(p, d, load)
}

/// How the accelerated coordinate method picks its step coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepChoice {
    /// `eta = 1 / (1 + sigma)`.
    Optimal,
    Fixed(f64),
}

/// Resolved parameters of one accelerated coordinate descent configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotgunParams {
    pub p: usize,
    pub d: usize,
    pub eta: f64,
    pub sigma: f64,
    /// `(eta / 2)(1 + sigma)`; must stay below 1.
    pub load: f64,
    pub sampling: Sampling,
    /// Curvature value used in place of `rho` when computing `sigma`.
    pub curvature: f64,
}

impl ShotgunParams {
    /// `curvature` is `rho` or any upper bound on it (`kappa_bar`, `kappa`).
    pub fn new(
        d: usize,
        p: usize,
        curvature: f64,
        sampling: Sampling,
        step: StepChoice,
    ) -> Result<Self> {
        if d == 0 || p == 0 || p > d {
            return Err(Error::InvalidParameter(format!(
                "P must lie in [1, d]; got P={p}, d={d}"
            )));
        }
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "curvature must be positive, got {curvature}"
            )));
        }
        if sampling == Sampling::BlockPartition && d % p != 0 {
            return Err(Error::BlockPartition { d, p });
        }
        let sigma = sigma(p, d, curvature, sampling);
        let (eta, load) = match step {
            // eta (1 + sigma) == 1 holds symbolically, so the load is exactly 1/2
            StepChoice::Optimal => (eta_star(sigma), 0.5),
            StepChoice::Fixed(eta) => (eta, 0.5 * eta * (1.0 + sigma)),
        };
        if !(eta > 0.0 && eta.is_finite()) || !(load < 1.0) {
            return Err(Error::StepHypothesis { eta, sigma });
        }
        Ok(Self {
            p,
            d,
            eta,
            sigma,
            load,
            sampling,
            curvature,
        })
    }

    /// Like [`ShotgunParams::new`], taking the curvature from a sparsity report.
    pub fn from_report(
        report: &SparsityReport,
        d: usize,
        p: usize,
        sampling: Sampling,
        step: StepChoice,
        curvature: StepOption,
        force: bool,
    ) -> Result<Self> {
        Self::new(d, p, step_size_c(curvature, report, force)?, sampling, step)
    }

    /// `c_t` for this configuration.
    pub fn step_back(&self, t: usize) -> f64 {
        theta(t) / theta(t + 1) * step_back_factor(self.p, self.d, self.load)
    }

    /// `1 / b = (2P/d)(1 - load)`: how far the aggregated sequence moves per
    /// unit of coordinate step.
    pub(crate) fn aggregate_gain(&self) -> f64 {
        2.0 * self.p as f64 / self.d as f64 * (1.0 - self.load)
    }

    /// Expected-suboptimality bound after `t` iterates.
    pub fn bound(&self, beta: f64, r2: f64, t: usize) -> Result<f64> {
        ConvergenceBound::AccelShotgun {
            beta,
            d: self.d,
            p: self.p,
            eta: self.eta,
            load: self.load,
            r2,
        }
        .value(t)
    }
}

/// Suboptimality bound for the full-gradient method: `2 c beta R2 / t^2`,
/// with `R2 = ||w_1 - w*||^2`.
pub fn agd_bound(c: f64, beta: f64, r2: f64, t: usize) -> Result<f64> {
    ConvergenceBound::Agd { c, beta, r2 }.value(t)
}

/// Expected-suboptimality bound for accelerated coordinate descent:
/// `beta d^2 R2 / (t^2 P^2 eta (1 - (eta/2)(1 + sigma)))`.
pub fn accel_shotgun_bound(
    beta: f64,
    d: usize,
    p: usize,
    eta: f64,
    sigma: f64,
    r2: f64,
    t: usize,
) -> Result<f64> {
    ConvergenceBound::AccelShotgun {
        beta,
        d,
        p,
        eta,
        load: 0.5 * eta * (1.0 + sigma),
        r2,
    }
    .value(t)
}

/// A bound of the form `K / t^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceBound {
    Agd {
        c: f64,
        beta: f64,
        r2: f64,
    },
    AccelShotgun {
        beta: f64,
        d: usize,
        p: usize,
        eta: f64,
        /// `(eta/2)(1 + sigma)`
        load: f64,
        r2: f64,
    },
}

impl ConvergenceBound {
    fn first_t(&self) -> usize {
        match self {
            ConvergenceBound::Agd { .. } => 1,
            ConvergenceBound::AccelShotgun { .. } => 2,
        }
    }

    /// Numerator `K`.
    pub fn constant(&self) -> Result<f64> {
        match *self {
            ConvergenceBound::Agd { c, beta, r2 } => Ok(2.0 * c * beta * r2),
            ConvergenceBound::AccelShotgun {
                beta,
                d,
                p,
                eta,
                load,
                r2,
            } => {
                if !(eta > 0.0) || !(load < 1.0) || p == 0 {
                    return Err(Error::StepHypothesis {
                        eta,
                        sigma: 2.0 * load / eta - 1.0,
                    });
                }
                let (d, p) = (d as f64, p as f64);
                Ok(beta * d * d * r2 / (p * p * eta * (1.0 - load)))
            }
        }
    }

    pub fn value(&self, t: usize) -> Result<f64> {
        if t < self.first_t() {
            return Err(Error::InvalidParameter(format!(
                "bound holds from t = {}, got t = {t}",
                self.first_t()
            )));
        }
        let t = t as f64;
        Ok(self.constant()? / (t * t))
    }

    /// Smallest admissible `t` with `value(t) <= eps`.
    pub fn iterations_to_eps(&self, eps: f64) -> Result<usize> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must be positive, got {eps}"
            )));
        }
        let k = self.constant()?;
        let lo = self.first_t();
        let mut t = ((k / eps).sqrt().ceil() as usize).max(lo);
        while t > lo && self.value(t - 1)? <= eps {
            t -= 1;
        }
        while self.value(t)? > eps {
            t += 1;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_values() {
        assert_eq!(theta(0), 0.0);
        assert_eq!(theta(1), 1.0);
        assert!((theta(2) - 1.618_034_0).abs() < 1e-7);
        assert!((theta(3) - 2.193_527_1).abs() < 1e-7);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(1), 0.0);
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let theta3 = 0.5 * (1.0 + (1.0 + 4.0 * phi * phi).sqrt());
        assert!((gamma(2) - (1.0 - phi) / theta3).abs() < 1e-15);
        assert!((gamma(2) + 0.281_753_5).abs() < 1e-7);
    }

    #[test]
    fn concurrent_queries_agree() {
        let s = ThetaSchedule::new();
        let results: Vec<f64> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..8)
                .map(|k| {
                    let s = &s;
                    scope.spawn(move || s.theta(1000 + 37 * k) + s.theta(5000))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (k, r) in results.iter().enumerate() {
            assert_eq!(*r, theta(1000 + 37 * k) + theta(5000));
        }
    }

    fn report(rho: f64, kappa: usize, kappa_bar: f64, converged: bool) -> SparsityReport {
        SparsityReport {
            row_counts: vec![],
            kappa,
            kappa_bar,
            rho,
            rho_converged: converged,
        }
    }

    #[test]
    fn step_constants() {
        let r = report(1.48, 2, 1.64, true);
        assert_eq!(step_size_c(StepOption::Rho, &r, false).unwrap(), 1.48);
        assert_eq!(step_size_c(StepOption::Kappa, &r, false).unwrap(), 2.0);
        assert_eq!(step_size_c(StepOption::KappaBar, &r, false).unwrap(), 1.64);
        let r = report(1.0, 1, 1.0, true);
        for o in [StepOption::Rho, StepOption::Kappa, StepOption::KappaBar] {
            assert_eq!(step_size_c(o, &r, false).unwrap(), 1.0);
        }
        let r = report(1.4, 2, 1.6, false);
        assert!(matches!(
            step_size_c(StepOption::Rho, &r, false),
            Err(Error::UnconvergedRho)
        ));
        assert_eq!(step_size_c(StepOption::Rho, &r, true).unwrap(), 1.4);
        assert_eq!(step_size_c(StepOption::KappaBar, &r, false).unwrap(), 1.6);
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma(1, 57, 9.0, Sampling::UniformSubset), 0.0);
        assert_eq!(sigma(40, 40, 3.7, Sampling::UniformSubset), 3.7 - 1.0);
        assert!((sigma(34, 100, 4.0, Sampling::UniformSubset) - 1.0).abs() < 1e-15);
        assert_eq!(sigma(1, 1, 1.0, Sampling::UniformSubset), 0.0);
        assert_eq!(sigma(5, 100, 5.0, Sampling::BlockPartition), 0.2);
    }

    #[test]
    fn step_back_values() {
        for &rho in &[1.0, 1.48, 3.0, 49.0, 7.3] {
            let d = 13;
            let s = sigma(d, d, rho, Sampling::UniformSubset);
            for t in 1..20 {
                assert!(step_back_coefficient(t, d, d, 1.0 / rho, s).abs() < 1e-15);
            }
            let params =
                ShotgunParams::new(d, d, rho, Sampling::UniformSubset, StepChoice::Optimal)
                    .unwrap();
            for t in 1..20 {
                assert_eq!(params.step_back(t), 0.0);
            }
        }
        let c1 = step_back_coefficient(1, 1, 10, 1.0, 0.0);
        assert!((c1 - 0.556_230_6).abs() < 1e-7);
        let limit = 1.0 - 0.2 * (1.0 - 0.5);
        let far = step_back_coefficient(1_000_000, 1, 10, 1.0, 0.0);
        assert!((far - limit).abs() < 1e-5);
    }

    #[test]
    fn parameter_selection() {
        assert_eq!(eta_star(0.0), 1.0);
        assert_eq!(p_star(101, 5.0), 17);
        assert_eq!(p_star(50, 1.0), 50);
        assert_eq!(p_star(10, 1000.0), 1);
        // raw optimum exceeds d when rho is close to 1
        assert_eq!(p_star(10, 1.01), 10);
    }

    #[test]
    fn params_validation() {
        assert!(matches!(
            ShotgunParams::new(10, 3, 2.0, Sampling::BlockPartition, StepChoice::Optimal),
            Err(Error::BlockPartition { d: 10, p: 3 })
        ));
        assert!(
            ShotgunParams::new(10, 0, 2.0, Sampling::UniformSubset, StepChoice::Optimal).is_err()
        );
        assert!(
            ShotgunParams::new(10, 11, 2.0, Sampling::UniformSubset, StepChoice::Optimal).is_err()
        );
        // eta = 1 with sigma = 1 puts the load at exactly 1
        let err = ShotgunParams::new(
            100,
            34,
            4.0,
            Sampling::UniformSubset,
            StepChoice::Fixed(1.0),
        );
        assert!(matches!(err, Err(Error::StepHypothesis { .. })), "{err:?}");
        let ok = ShotgunParams::new(
            100,
            10,
            4.0,
            Sampling::UniformSubset,
            StepChoice::Fixed(1.0),
        )
        .unwrap();
        assert!(ok.load < 1.0);
        let opt =
            ShotgunParams::new(100, 34, 4.0, Sampling::UniformSubset, StepChoice::Optimal).unwrap();
        assert!((opt.eta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bound_values() {
        let b = accel_shotgun_bound(1.0, 2, 2, 1.0, 0.0, 5.0, 10).unwrap();
        assert!((b - 0.1).abs() < 1e-15);
        assert!((agd_bound(1.0, 1.0, 5.0, 10).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(agd_bound(3.0, 1.0, 0.0, 7).unwrap(), 0.0);
        assert_eq!(
            accel_shotgun_bound(1.0, 9, 3, 0.5, 0.2, 0.0, 7).unwrap(),
            0.0
        );
        assert!(accel_shotgun_bound(1.0, 2, 2, 1.0, 0.0, 5.0, 1).is_err());
        assert!(agd_bound(1.0, 1.0, 5.0, 0).is_err());
        assert!(accel_shotgun_bound(1.0, 10, 5, 1.0, 1.5, 1.0, 4).is_err());
    }

    #[test]
    fn iteration_counts() {
        let b = ConvergenceBound::Agd {
            c: 1.0,
            beta: 1.0,
            r2: 5.0,
        };
        assert_eq!(b.iterations_to_eps(0.1).unwrap(), 10);
        assert_eq!(b.iterations_to_eps(10.0).unwrap(), 1);
        assert_eq!(b.iterations_to_eps(1e6).unwrap(), 1);
        assert!(b.iterations_to_eps(0.0).is_err());

        let at = |p: usize| {
            ConvergenceBound::AccelShotgun {
                beta: 1.0,
                d: 1000,
                p,
                eta: 1.0,
                load: 0.6,
                r2: 3.0,
            }
            .iterations_to_eps(1e-4)
            .unwrap()
        };
        for p in [1, 2, 5, 10, 50] {
            let (t1, t2) = (at(p), at(2 * p));
            assert!(t2.abs_diff(t1.div_ceil(2)) <= 1, "p={p}: {t1} vs {t2}");
        }
    }
}
