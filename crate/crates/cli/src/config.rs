//! Run configuration: a TOML file with four blocks, overridden by flags.

use std::path::Path;

use bumpforge::ansatz_norms::tau_upper;
use bumpforge::lattice::LatticeSpec;
use bumpforge::profile::ProfileK;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: Problem,
    pub profile: ProfileBlock,
    pub solver: Solver,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Problem {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    /// Defaults to (−1, …, −1).
    pub a: Option<Vec<f64>>,
    /// Finite lattice {0..m}^k. Exclusive with `window`.
    pub m: Option<usize>,
    /// Orthant window [−W, W]^k with the first `orthant` coordinates nonnegative.
    pub window: Option<usize>,
    pub orthant: usize,
    pub l: u64,
    pub tau: f64,
}

impl Default for Problem {
    fn default() -> Self {
        Self {
            n: 5,
            k: 1,
            beta: 4.5,
            a: None,
            m: None,
            window: None,
            orthant: 0,
            l: 8,
            tau: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileBlock {
    pub r_in: f64,
    pub r_out: f64,
    /// Use the closed-form example pair instead of the local model.
    pub exact_example: bool,
}

impl Default for ProfileBlock {
    fn default() -> Self {
        Self {
            r_in: 0.25,
            r_out: 0.5,
            exact_example: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub grad_tol: f64,
    pub max_iterations: usize,
    pub positions: bool,
    pub position_rel_tol: f64,
    pub position_max_iterations: usize,
    /// Refinement level of the sup-norm sampling plan.
    pub sampling_level: usize,
    pub seed: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iterations: 200,
            positions: true,
            position_rel_tol: 1e-4,
            position_max_iterations: 20,
            sampling_level: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub format: Option<Format>,
    pub path: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn a(&self) -> Vec<f64> {
        self.problem.a.clone().unwrap_or_else(|| vec![-1.0; self.problem.n])
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        let bad = |m: String| Err(CliError::Config(m));
        if p.n < 5 {
            return bad(format!("n = {} must be at least 5", p.n));
        }
        if p.k < 1 || 2 * p.k + 2 >= p.n {
            return bad(format!(
                "k = {} must satisfy 1 <= k < (n-2)/2 = {}",
                p.k,
                (p.n as f64 - 2.0) / 2.0
            ));
        }
        let nf = p.n as f64;
        if !(p.beta > nf - 2.0 && p.beta < nf) {
            return bad(format!(
                "beta = {} must lie in (n-2, n) = ({}, {})",
                p.beta,
                p.n - 2,
                p.n
            ));
        }
        let upper = tau_upper(p.n, p.k);
        if !(p.tau >= p.k as f64 && p.tau < upper) {
            return bad(format!("tau = {} must lie in [k, tau0) = [{}, {upper})", p.tau, p.k));
        }
        if p.l == 0 {
            return bad("l must be a positive integer".into());
        }
        match (p.m, p.window) {
            (Some(_), Some(_)) => return bad("set either problem.m or problem.window, not both".into()),
            (None, Some(_)) if p.orthant > p.k => return bad(format!("orthant = {} exceeds k = {}", p.orthant, p.k)),
            (Some(_), None) if p.orthant != 0 => return bad("problem.orthant applies to windows only".into()),
            _ => {}
        }
        self.profile().map(|_| ())?;
        if !(self.solver.grad_tol > 0.0 && self.solver.position_rel_tol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        if self.solver.max_iterations == 0 || self.solver.position_max_iterations == 0 {
            return bad("solver iteration caps must be positive".into());
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<ProfileK, CliError> {
        let p = &self.problem;
        ProfileK::new(p.n, p.k, p.beta, self.a(), self.profile.r_in, self.profile.r_out)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn lattice_spec(&self) -> LatticeSpec {
        let p = &self.problem;
        match p.window {
            Some(w) => LatticeSpec::orthant(p.n, p.k, p.orthant, w, p.l, p.beta),
            None => LatticeSpec::finite(p.n, p.k, p.m.unwrap_or(2), p.l, p.beta),
        }
    }
}
