use std::fmt;
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::data::SparsityReport;
use crate::error::{Error, Result};
use crate::loss::Objective;
use crate::schedule::{
    p_star, sigma, step_size_c, Sampling, ShotgunParams, StepChoice, StepOption,
};
use crate::solver::{
    accel_shotgun_solve, agd_solve, shotgun_solve, AccelMode, RunResult, SolveOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Accelerated gradient, step constant rho.
    Agd1,
    /// Accelerated gradient, step constant kappa.
    Agd2,
    /// Accelerated gradient, step constant kappa_bar.
    Agd3,
    /// Parallel coordinate descent without momentum.
    Shotgun,
    /// Accelerated parallel coordinate descent.
    AccelShotgun,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Agd1 => "agd1",
            Algorithm::Agd2 => "agd2",
            Algorithm::Agd3 => "agd3",
            Algorithm::Shotgun => "shotgun",
            Algorithm::AccelShotgun => "accel-shotgun",
        }
    }

    pub fn step_option(self) -> Option<StepOption> {
        match self {
            Algorithm::Agd1 => Some(StepOption::Rho),
            Algorithm::Agd2 => Some(StepOption::Kappa),
            Algorithm::Agd3 => Some(StepOption::KappaBar),
            _ => None,
        }
    }
}

/// A parameter given explicitly or left for the solver to choose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AutoOr<T> {
    #[default]
    Auto,
    Value(T),
}

impl<T: FromStr> FromStr for AutoOr<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(AutoOr::Auto)
        } else {
            s.parse()
                .map(AutoOr::Value)
                .map_err(|e| format!("'{s}': {e}"))
        }
    }
}

impl<T: fmt::Display> fmt::Display for AutoOr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    pub p: AutoOr<usize>,
    pub eta: AutoOr<f64>,
    pub sampling: Sampling,
    pub mode: AccelMode,
    /// Accept an unconverged spectral estimate.
    pub force_rho: bool,
}

impl SolverSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            p: AutoOr::Auto,
            eta: AutoOr::Auto,
            sampling: Sampling::UniformSubset,
            mode: AccelMode::Implicit,
            force_rho: false,
        }
    }
}

/// Parameters after every `auto` has been replaced by its value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub algorithm: Algorithm,
    /// Step constant of the gradient methods.
    pub c: Option<f64>,
    pub p: Option<usize>,
    pub eta: Option<f64>,
    pub sigma: Option<f64>,
    pub load: Option<f64>,
    pub sampling: Option<Sampling>,
    pub mode: Option<AccelMode>,
    pub auto: Vec<&'static str>,
    #[serde(skip)]
    pub params: Option<ShotgunParams>,
    pub warnings: Vec<String>,
}

fn converged_rho(report: &SparsityReport, force: bool) -> Result<f64> {
    step_size_c(StepOption::Rho, report, force)
}

/// Fills in `auto` parameters from the sparsity report of the (normalized)
/// design matrix.
pub fn resolve(spec: &SolverSpec, report: &SparsityReport, d: usize) -> Result<Resolved> {
    let mut out = Resolved {
        algorithm: spec.algorithm,
        c: None,
        p: None,
        eta: None,
        sigma: None,
        load: None,
        sampling: None,
        mode: None,
        auto: Vec::new(),
        params: None,
        warnings: Vec::new(),
    };
    if !report.rho_converged {
        out.warnings.push(format!(
            "power iteration did not converge; rho estimate {}",
            report.rho
        ));
    }
    let pick_p = |out: &mut Resolved| -> Result<usize> {
        match spec.p {
            AutoOr::Value(p) => Ok(p),
            AutoOr::Auto => {
                out.auto.push("p");
                Ok(p_star(d, converged_rho(report, spec.force_rho)?))
            }
        }
    };
    match spec.algorithm {
        Algorithm::Agd1 | Algorithm::Agd2 | Algorithm::Agd3 => {
            let option = spec.algorithm.step_option().expect("gradient algorithm");
            out.c = Some(step_size_c(option, report, spec.force_rho)?);
            out.auto.push("c");
        }
        Algorithm::Shotgun => {
            let p = pick_p(&mut out)?;
            if p == 0 || p > d {
                return Err(Error::InvalidParameter(format!(
                    "P must lie in [1, d]; got P={p}, d={d}"
                )));
            }
            let s = sigma(p, d, report.rho, spec.sampling);
            let load = 0.5 * (1.0 + s);
            if load >= 1.0 {
                out.warnings.push(format!(
                    "P={p} exceeds the safe range for unit steps ((1 + sigma)/2 = {load})"
                ));
            }
            out.p = Some(p);
            out.eta = Some(1.0);
            out.sigma = Some(s);
            out.load = Some(load);
            out.sampling = Some(spec.sampling);
        }
        Algorithm::AccelShotgun => {
            let p = pick_p(&mut out)?;
            let rho = converged_rho(report, spec.force_rho)?;
            let step = match spec.eta {
                AutoOr::Auto => {
                    out.auto.push("eta");
                    StepChoice::Optimal
                }
                AutoOr::Value(eta) => StepChoice::Fixed(eta),
            };
            let params = ShotgunParams::new(d, p, rho, spec.sampling, step)?;
            out.p = Some(p);
            out.eta = Some(params.eta);
            out.sigma = Some(params.sigma);
            out.load = Some(params.load);
            out.sampling = Some(spec.sampling);
            out.mode = Some(spec.mode);
            out.params = Some(params);
        }
    }
    Ok(out)
}

/// Runs the resolved algorithm on `obj`.
pub fn run_resolved(
    obj: Objective<'_>,
    resolved: &Resolved,
    seed: u64,
    w0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<RunResult> {
    match resolved.algorithm {
        Algorithm::Agd1 | Algorithm::Agd2 | Algorithm::Agd3 => {
            agd_solve(obj, resolved.c.expect("resolved c"), w0, opts)
        }
        Algorithm::Shotgun => shotgun_solve(
            obj,
            resolved.p.expect("resolved p"),
            resolved.sampling.unwrap_or_default(),
            seed,
            w0,
            opts,
        ),
        Algorithm::AccelShotgun => accel_shotgun_solve(
            obj,
            resolved.params.expect("resolved params"),
            resolved.mode.unwrap_or_default(),
            seed,
            w0,
            opts,
        ),
    }
}
