//! Mean-field closure: aggregate production equals the stationary
//! conditional mean capacity it induces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stationary::StationaryLaw;
use crate::threshold::{solve_thresholds_unchecked, ThresholdSolution};

/// Output of one best-response evaluation.
#[derive(Debug, Clone)]
pub struct BestResponse {
    pub q: [f64; 2],
    pub eta: [f64; 2],
    pub thresholds: ThresholdSolution,
    pub law: StationaryLaw,
    /// Conditional mean capacities `(RQ)_i`.
    pub rq: [f64; 2],
}

/// Prices from `q`, thresholds, stationary law and its conditional means.
pub fn best_response(params: &ModelParams, q: [f64; 2]) -> Result<BestResponse> {
    let eta = params.prices(q)?;
    response_at_prices(params, q, eta)
}

fn response_at_prices(params: &ModelParams, q: [f64; 2], eta: [f64; 2]) -> Result<BestResponse> {
    let thresholds = solve_thresholds_unchecked(params, eta)?;
    let law = StationaryLaw::new(params, thresholds.thresholds())?;
    let rq = law.conditional_means()?;
    Ok(BestResponse {
        q,
        eta,
        thresholds,
        law,
        rq,
    })
}

/// Uniform bounds on the best-response map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    /// Thresholds at the floor prices `eta = varphi`.
    pub a_low: [f64; 2],
    pub q_low: [f64; 2],
    /// Thresholds at the prices generated by `q_low`.
    pub a_high: [f64; 2],
    pub q_high: [f64; 2],
}

impl Bounds {
    pub fn contains(&self, q: [f64; 2]) -> bool {
        (0..2).all(|i| q[i] >= self.q_low[i] * (1.0 - 1e-12) && q[i] <= self.q_high[i] * (1.0 + 1e-12))
    }
}

pub fn equilibrium_bounds(params: &ModelParams) -> Result<Bounds> {
    params.checked()?;
    bounds_unchecked(params)
}

fn bounds_unchecked(params: &ModelParams) -> Result<Bounds> {
    let floor = [params.regimes[0].varphi, params.regimes[1].varphi];
    let low = response_at_prices(params, [f64::INFINITY; 2], floor)?;
    let high = best_response(params, low.rq)?;
    Ok(Bounds {
        a_low: low.thresholds.thresholds(),
        q_low: low.rq,
        a_high: high.thresholds.thresholds(),
        q_high: high.rq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    /// Initial Picard damping.
    pub omega: f64,
    /// Relative residual target `max_i |Q_i - (RQ)_i| / Q_i`.
    pub tol: f64,
    /// Relative width of the certified invariant box.
    pub bracket_tol: f64,
    pub max_iter: usize,
    /// Finite-difference Newton steps once the residual is small.
    pub newton: bool,
    /// Second solve from the upper corner of the bounds.
    pub probe: bool,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            omega: 0.5,
            tol: 1e-8,
            bracket_tol: 1e-8,
            max_iter: 500,
            newton: true,
            probe: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub q: [f64; 2],
    pub rq: [f64; 2],
    pub residual: f64,
    pub omega: f64,
    pub step: &'static str,
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub params: ModelParams,
    pub q_star: [f64; 2],
    pub a_star: [f64; 2],
    pub eta_star: [f64; 2],
    pub thresholds: ThresholdSolution,
    pub law: StationaryLaw,
    /// Relative fixed-point residual at `q_star`.
    pub residual: f64,
    /// Box `[lower, upper]` mapped into itself by the best response.
    pub bracket: [[f64; 2]; 2],
    pub bounds: Bounds,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    /// Solution reached from the upper corner and its relative distance to
    /// `q_star`.
    pub probe: Option<([f64; 2], f64)>,
}

impl Equilibrium {
    pub fn theta2(&self) -> f64 {
        self.law.tail.theta2
    }

    pub fn bracket_width(&self) -> f64 {
        (0..2)
            .map(|i| (self.bracket[1][i] - self.bracket[0][i]) / self.q_star[i])
            .fold(0.0, f64::max)
    }
}

fn rel_residual(q: [f64; 2], rq: [f64; 2]) -> f64 {
    (0..2).map(|i| (q[i] - rq[i]).abs() / q[i].abs()).fold(0.0, f64::max)
}

struct Run {
    q: [f64; 2],
    last: BestResponse,
    residual: f64,
    trace: Vec<TraceRow>,
}

fn newton_step(params: &ModelParams, br: &BestResponse) -> Option<[f64; 2]> {
    let q = br.q;
    let f0 = [q[0] - br.rq[0], q[1] - br.rq[1]];
    let mut j = [[0.0; 2]; 2];
    for k in 0..2 {
        let h = 1e-6 * q[k];
        let mut qh = q;
        qh[k] += h;
        let r = best_response(params, qh).ok()?.rq;
        for i in 0..2 {
            let fi = qh[i] - r[i];
            j[i][k] = (fi - f0[i]) / h;
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let dx = [
        -(f0[0] * j[1][1] - j[0][1] * f0[1]) / det,
        -(j[0][0] * f0[1] - j[1][0] * f0[0]) / det,
    ];
    let next = [q[0] + dx[0], q[1] + dx[1]];
    (next[0] > 0.0 && next[1] > 0.0).then_some(next)
}

fn iterate(params: &ModelParams, start: [f64; 2], opts: &EquilibriumOptions) -> Result<Run> {
    let mut omega = opts.omega;
    let mut q = start;
    let mut br = best_response(params, q)?;
    let mut res = rel_residual(q, br.rq);
    let mut trace = Vec::new();
    let mut best = res;
    for iter in 0..opts.max_iter {
        trace.push(TraceRow {
            iter,
            q,
            rq: br.rq,
            residual: res,
            omega,
            step: "eval",
        });
        if res < opts.tol * 1e-3 || (res < opts.tol && !opts.newton) {
            return Ok(Run {
                q,
                last: br,
                residual: res,
                trace,
            });
        }
        if opts.newton && res < 1e-3 {
            if let Some(next) = newton_step(params, &br) {
                if let Ok(nb) = best_response(params, next) {
                    let nr = rel_residual(next, nb.rq);
                    if nr < res {
                        q = next;
                        br = nb;
                        res = nr;
                        best = best.min(res);
                        trace.last_mut().unwrap().step = "newton";
                        continue;
                    }
                }
            }
            if res < opts.tol {
                return Ok(Run {
                    q,
                    last: br,
                    residual: res,
                    trace,
                });
            }
        }
        let next = [
            (1.0 - omega) * q[0] + omega * br.rq[0],
            (1.0 - omega) * q[1] + omega * br.rq[1],
        ];
        let nb = best_response(params, next)?;
        let nr = rel_residual(next, nb.rq);
        if nr > res {
            omega = (omega * 0.5).max(1.0 / 64.0);
        }
        q = next;
        br = nb;
        res = nr;
        best = best.min(res);
    }
    if res < opts.tol {
        return Ok(Run {
            q,
            last: br,
            residual: res,
            trace,
        });
    }
    Err(Error::NonConvergence {
        stage: "fixed point",
        best_residual: best,
        detail: format!("{} iterations, last Q = {q:?}", opts.max_iter),
    })
}

/// Smallest box `[q (1-e), q (1+e)]` with `R(upper) >= lower` and
/// `R(lower) <= upper`; antitonicity of `R` then makes it invariant.
fn certify(params: &ModelParams, q: [f64; 2], residual: f64, width: f64) -> Result<Option<[[f64; 2]; 2]>> {
    let mut eps = (4.0 * residual).max(1e-11);
    while 2.0 * eps <= width {
        let lo = [q[0] * (1.0 - eps), q[1] * (1.0 - eps)];
        let hi = [q[0] * (1.0 + eps), q[1] * (1.0 + eps)];
        let r_lo = best_response(params, lo)?.rq;
        let r_hi = best_response(params, hi)?.rq;
        if (0..2).all(|i| r_hi[i] >= lo[i] && r_lo[i] <= hi[i]) {
            return Ok(Some([lo, hi]));
        }
        eps *= 2.0;
    }
    Ok(None)
}

/// Solves the fixed point `Q = R Q`.
pub fn solve_equilibrium(params: &ModelParams) -> Result<Equilibrium> {
    solve_equilibrium_with(params, &EquilibriumOptions::default())
}

pub fn solve_equilibrium_with(params: &ModelParams, opts: &EquilibriumOptions) -> Result<Equilibrium> {
    params.checked()?;
    let bounds = bounds_unchecked(params)?;
    let run = iterate(params, bounds.q_low, opts)?;
    let probe = if opts.probe {
        let other = iterate(params, bounds.q_high, opts)?;
        let gap = (0..2)
            .map(|i| (other.q[i] - run.q[i]).abs() / run.q[i])
            .fold(0.0, f64::max);
        Some((other.q, gap))
    } else {
        None
    };
    let bracket = certify(params, run.q, run.residual, opts.bracket_tol)?.ok_or_else(|| {
        Error::NonConvergence {
            stage: "fixed point certificate",
            best_residual: run.residual,
            detail: format!("no invariant box of relative width {} around {:?}", opts.bracket_tol, run.q),
        }
    })?;
    let Run {
        q,
        last,
        residual,
        trace,
    } = run;
    Ok(Equilibrium {
        params: *params,
        q_star: q,
        a_star: last.thresholds.thresholds(),
        eta_star: last.eta,
        thresholds: last.thresholds,
        law: last.law,
        residual,
        bracket,
        bounds,
        iterations: trace.len(),
        trace,
        probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_one_equilibrium() {
        let p = ModelParams::figure1();
        let eq = solve_equilibrium(&p).unwrap();
        assert!((eq.q_star[0] - 37.415).abs() < 0.01, "{:?}", eq.q_star);
        assert!((eq.q_star[1] - 26.691).abs() < 0.01);
        assert!(eq.residual < 1e-8);
        assert!(eq.bracket_width() < 1e-8);
        assert!(eq.probe.unwrap().1 < 1e-6);
        assert!(eq.bounds.contains(eq.q_star));
        let again = best_response(&p, eq.q_star).unwrap();
        assert!(rel_residual(eq.q_star, again.rq) < 1e-8);
    }

    #[test]
    fn bounds_are_ordered_and_respect_price_bound() {
        let p = ModelParams::figure1();
        let b = equilibrium_bounds(&p).unwrap();
        for i in 0..2 {
            assert!(0.0 < b.q_low[i] && b.q_low[i] <= b.q_high[i]);
            let cap = (p.regimes[i].varphi - (p.rho + p.delta)) / (2.0 * p.c);
            assert!(b.a_low[i] < cap);
            let tight = (p.regimes[i].varphi - p.kappa * (p.rho + p.delta)) / (2.0 * p.c);
            assert!(b.a_low[i] < tight);
        }
    }

    #[test]
    fn best_response_is_antitone() {
        let p = ModelParams::figure1();
        let b = equilibrium_bounds(&p).unwrap();
        let pts = [b.q_low, [b.q_low[0], b.q_high[1]], [b.q_high[0], b.q_low[1]], b.q_high];
        let r: Vec<_> = pts.iter().map(|&q| best_response(&p, q).unwrap().rq).collect();
        for (x, rx) in pts.iter().zip(&r) {
            for (y, ry) in pts.iter().zip(&r) {
                if x[0] <= y[0] && x[1] <= y[1] {
                    assert!(ry[0] <= rx[0] + 1e-9 && ry[1] <= rx[1] + 1e-9);
                }
            }
            assert!(b.contains(*rx));
        }
    }

    #[test]
    fn symmetric_response_is_symmetric() {
        let p = ModelParams::symmetric(&ModelParams::figure1(), 0.15, 0.2, 10.0);
        let r = best_response(&p, [20.0, 20.0]).unwrap().rq;
        assert!((r[0] - r[1]).abs() < 1e-9 * r[0]);
    }
}
