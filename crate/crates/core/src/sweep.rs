//! One-parameter sweeps of the equilibrium and its indicators.

use serde::Serialize;

use crate::equilibrium::{solve_equilibrium_with, Equilibrium, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::{concentration, equilibrium_v_star};
use crate::params::{ModelParams, CONFIG_KEYS};

/// Extra sweepable name: `inv_p1 = 1 / p1`.
pub const INV_P1: &str = "inv_p1";

/// Parameter value at a grid point, resolving derived names.
pub fn apply(params: &ModelParams, name: &str, value: f64) -> Result<ModelParams> {
    match name {
        INV_P1 => {
            if !(value > 0.0) {
                return Err(Error::Domain {
                    what: "inv_p1",
                    value,
                });
            }
            params.with("p1", 1.0 / value)
        }
        _ => params.with(name, value),
    }
}

pub fn is_sweepable(name: &str) -> bool {
    name == INV_P1 || CONFIG_KEYS.contains(&name)
}

/// `n` evenly spaced points on `[from, to]`.
pub fn grid(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..n)
            .map(|k| {
                if k + 1 == n {
                    to
                } else {
                    from + (to - from) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Outputs at one grid point. Quantities that are undefined there
/// (divergent moments) are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct PointOutputs {
    pub a1: f64,
    pub a2: f64,
    pub q1: f64,
    pub q2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub theta2: f64,
    pub p_corridor: f64,
    pub chi_inf: f64,
    pub mean: f64,
    pub variance: Option<f64>,
    pub ratio: Option<f64>,
    pub gini_h: f64,
    pub v_star: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl PointOutputs {
    pub const NAMES: [&'static str; 16] = [
        "a1", "a2", "Q1", "Q2", "eta1", "eta2", "theta2", "P_corridor", "chi_inf", "mean", "variance", "ratio",
        "gini_H", "V_star", "residual", "iterations",
    ];

    pub fn values(&self) -> [Option<f64>; 16] {
        [
            Some(self.a1),
            Some(self.a2),
            Some(self.q1),
            Some(self.q2),
            Some(self.eta1),
            Some(self.eta2),
            Some(self.theta2),
            Some(self.p_corridor),
            Some(self.chi_inf),
            Some(self.mean),
            self.variance,
            self.ratio,
            Some(self.gini_h),
            self.v_star,
            Some(self.residual),
            Some(self.iterations as f64),
        ]
    }

    pub fn from_equilibrium(eq: &Equilibrium) -> Result<Self> {
        let law = &eq.law;
        let conc = concentration(law, 0)?;
        let v_star = match equilibrium_v_star(eq) {
            Ok(v) => Some(v),
            Err(Error::DivergentMoment { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(PointOutputs {
            a1: eq.a_star[0],
            a2: eq.a_star[1],
            q1: eq.q_star[0],
            q2: eq.q_star[1],
            eta1: eq.eta_star[0],
            eta2: eq.eta_star[1],
            theta2: eq.theta2(),
            p_corridor: law.corridor_probability(),
            chi_inf: law.corridor_share()?,
            mean: conc.mean,
            variance: conc.variance,
            ratio: conc.ratio,
            gini_h: conc.gini_h,
            v_star,
            residual: eq.residual,
            iterations: eq.iterations,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub outputs: std::result::Result<PointOutputs, SweepFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub code: &'static str,
    pub message: String,
}

impl From<Error> for SweepFailure {
    fn from(e: Error) -> Self {
        SweepFailure {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

pub fn solve_point(params: &ModelParams, name: &str, value: f64, opts: &EquilibriumOptions) -> Result<PointOutputs> {
    let p = apply(params, name, value)?;
    let eq = solve_equilibrium_with(&p, opts)?;
    PointOutputs::from_equilibrium(&eq)
}

/// Solves every grid point; failures are recorded per point. Results are
/// in grid order.
pub fn sweep(
    params: &ModelParams,
    name: &str,
    values: &[f64],
    opts: &EquilibriumOptions,
    exec: Execution,
) -> Result<Vec<SweepPoint>> {
    if !is_sweepable(name) {
        return Err(Error::Config(format!("unknown sweep parameter `{name}`")));
    }
    Ok(exec.map(values, |&v| SweepPoint {
        value: v,
        outputs: solve_point(params, name, v, opts).map_err(SweepFailure::from),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = grid(0.05, 0.35, 61);
        assert_eq!(g.len(), 61);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[60], 0.35);
        assert!((g[30] - 0.2).abs() < 1e-15);
        assert_eq!(grid(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn failures_are_per_point() {
        let base = ModelParams::figure1();
        let opts = EquilibriumOptions {
            probe: false,
            ..Default::default()
        };
        let pts = sweep(&base, "sigma1", &[0.1, -1.0, 0.2], &opts, Execution::Sequential).unwrap();
        assert!(pts[0].outputs.is_ok());
        assert!(pts[1].outputs.is_err());
        assert!(pts[2].outputs.is_ok());
        assert!(sweep(&base, "nope", &[1.0], &opts, Execution::Sequential).is_err());
    }

    #[test]
    fn inv_p1_maps_to_p1() {
        let p = apply(&ModelParams::figure1(), INV_P1, 20.0).unwrap();
        assert_eq!(p.regimes[0].p, 0.05);
    }
}
