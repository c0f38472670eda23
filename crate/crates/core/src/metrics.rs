//! Economic indicators built on an equilibrium: concentration indices,
//! stationary firm value and its elasticities.

use serde::Serialize;

use crate::equilibrium::{solve_equilibrium_with, Equilibrium, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::params::{ModelParams, Regime};
use crate::power::{power_integral, LOG_BRANCH_TOL};
use crate::quad::integrate;
use crate::stationary::StationaryLaw;
use crate::threshold::ThresholdSolution;

/// Moment-based and Gini concentration measures of the stationary law.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub mean: f64,
    /// `None` when the second moment diverges.
    pub variance: Option<f64>,
    /// `Var / E^2`.
    pub ratio: Option<f64>,
    /// Area between the diagonal and the capacity-share curve.
    pub gini_h: f64,
    /// Same construction with the conditional mean `E[X | X <= x(q)]`
    /// in place of the capacity share.
    pub gini_h_conditional: f64,
    /// Samples `(q, share of capacity held below the q-quantile)`.
    pub gini_curve: Vec<(f64, f64)>,
}

/// `E[X 1{X <= x}]`.
fn partial_mean(law: &StationaryLaw, x: f64) -> f64 {
    Regime::BOTH
        .iter()
        .map(|&i| law.partial_moment(1.0, 0.0, x, i).unwrap_or(f64::NAN))
        .sum()
}

/// Capacity share held by firms below the `q`-quantile.
pub fn gini_curve_point(law: &StationaryLaw, mean: f64, q: f64) -> Result<f64> {
    if q >= 1.0 {
        return Ok(1.0);
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    Ok(partial_mean(law, law.quantile(q)?) / mean)
}

/// `int_0^1 |q - curve(q)| dq` by adaptive quadrature in `q`.
fn area(curve: impl Fn(f64) -> f64) -> f64 {
    integrate(|q| (q - curve(q)).abs(), 0.0, 1.0, 1e-10, 1e-9).0
}

pub fn gini_h(law: &StationaryLaw) -> Result<f64> {
    let mean = law.mean()?;
    Ok(area(|q| gini_curve_point(law, mean, q).unwrap_or(f64::NAN)))
}

pub fn concentration(law: &StationaryLaw, curve_points: usize) -> Result<ConcentrationReport> {
    let mean = law.mean()?;
    let variance = match law.second_moment() {
        Ok(m2) => Some((m2 - mean * mean).max(0.0)),
        Err(Error::DivergentMoment { .. }) => None,
        Err(e) => return Err(e),
    };
    let share = |q: f64| gini_curve_point(law, mean, q).unwrap_or(f64::NAN);
    let gini_h = area(share);
    let gini_h_conditional = area(|q| if q > 0.0 { share(q) / q } else { 0.0 });
    let gini_curve = (0..curve_points)
        .map(|k| {
            let q = if curve_points > 1 {
                k as f64 / (curve_points - 1) as f64
            } else {
                0.5
            };
            (q, share(q))
        })
        .collect();
    Ok(ConcentrationReport {
        mean,
        variance,
        ratio: variance.map(|v| v / (mean * mean)),
        gini_h,
        gini_h_conditional,
        gini_curve,
    })
}

/// Gini H of an empirical population given as sorted capacities.
pub fn empirical_gini_h(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    let mut cum = 0.0;
    let mut acc = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let prev = cum / total;
        cum += x;
        let next = cum / total;
        // trapezoid of q - L(q) over ((k)/n, (k+1)/n)
        let q0 = k as f64 / n;
        let q1 = (k + 1) as f64 / n;
        acc += 0.5 * ((q0 - prev) + (q1 - next)) / n;
    }
    acc
}

/// Pooled empirical Gini H of `samples` together with a batch-means
/// standard error over `batches` contiguous blocks.
pub fn batch_gini_h(samples: &[f64], batches: usize) -> (f64, f64) {
    let mut all = samples.to_vec();
    all.sort_by(f64::total_cmp);
    let pooled = empirical_gini_h(&all);
    let size = samples.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return (pooled, f64::NAN);
    }
    let hs: Vec<f64> = samples
        .chunks_exact(size)
        .take(batches)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_by(f64::total_cmp);
            empirical_gini_h(&c)
        })
        .collect();
    let n = hs.len() as f64;
    let m = hs.iter().sum::<f64>() / n;
    let var = hs.iter().map(|h| (h - m) * (h - m)).sum::<f64>() / (n - 1.0);
    (pooled, (var / n).sqrt())
}

/// Firm value `V` above the upper threshold written as
/// `sum_j c_j (x/a2)^e_j`, plus flags for logarithmic terms.
struct UpperValue {
    terms: Vec<(f64, f64)>,
    log_terms: Vec<f64>,
}

fn upper_value(sol: &ThresholdSolution, i: Regime, a2: f64) -> UpperValue {
    let v = sol.upper_piece(i);
    let v_a2 = sol.V(a2, i).expect("positive threshold");
    let mut terms = vec![(v.cst * a2, 1.0), (0.5 * v.lin * a2 * a2, 2.0)];
    let mut log_terms = Vec::new();
    let mut cst = v_a2 - v.cst * a2 - 0.5 * v.lin * a2 * a2;
    for p in &v.terms {
        let k = 1.0 + p.exp;
        if k.abs() < LOG_BRANCH_TOL {
            log_terms.push(p.coef * a2);
        } else {
            terms.push((p.coef * a2 / k, k));
            cst -= p.coef * a2 / k;
        }
    }
    terms.push((cst, 0.0));
    UpperValue { terms, log_terms }
}

/// `int_{t0}^inf t^(s-1) ln t dt` for `s < 0`.
fn log_power_tail(s: f64, t0: f64) -> f64 {
    let p = t0.powf(s);
    -p * t0.ln() / s + p / (s * s)
}

/// Log-space cut-off beyond which `V * pdf` is integrated analytically.
const TAIL_CUT: f64 = 8.0;

/// Stationary expected firm value `sum_i int V(x,i) p(dx,i)`.
pub fn v_star(sol: &ThresholdSolution, law: &StationaryLaw) -> Result<f64> {
    if !(2.0 + law.tail.theta2 < 0.0) {
        return Err(Error::DivergentMoment {
            order: 2,
            theta2: law.tail.theta2,
        });
    }
    let a2 = law.ordered_thresholds()[1];
    let cut = a2 * TAIL_CUT.exp();
    let mut total = 0.0;
    for i in Regime::BOTH {
        for piece in law.pieces(i) {
            let hi = piece.hi.min(cut);
            let (v, _) = integrate(
                |z| {
                    let x = z.exp();
                    sol.V(x, i).unwrap_or(f64::NAN) * piece.cdf.d1(x) * x
                },
                piece.lo.ln(),
                hi.ln(),
                1e-14,
                1e-12,
            );
            total += v;
            if piece.hi.is_infinite() {
                total += tail_value(sol, i, a2, piece.cdf, cut);
            }
        }
    }
    Ok(total)
}

fn tail_value(sol: &ThresholdSolution, i: Regime, a2: f64, cdf: &crate::power::PowerSum, cut: f64) -> f64 {
    let uv = upper_value(sol, i, a2);
    let tc = cut / a2;
    let mut total = 0.0;
    for dens in &cdf.terms {
        let w = dens.coef * dens.exp * (a2 / dens.anchor).powf(dens.exp);
        if w == 0.0 {
            continue;
        }
        for &(c, e) in &uv.terms {
            total += w * c * power_integral(e + dens.exp - 1.0, tc, f64::INFINITY);
        }
        for &c in &uv.log_terms {
            total += w * c * log_power_tail(dens.exp, tc);
        }
    }
    total
}

/// Brute-force `V*` by quadrature out to `x = a2 * e^span`, for checks.
pub fn v_star_truncated(sol: &ThresholdSolution, law: &StationaryLaw, span: f64) -> f64 {
    let a2 = law.ordered_thresholds()[1];
    let top = a2 * span.exp();
    let mut total = 0.0;
    for i in Regime::BOTH {
        for piece in law.pieces(i) {
            let hi = piece.hi.min(top);
            total += integrate(
                |z| {
                    let x = z.exp();
                    sol.V(x, i).unwrap_or(f64::NAN) * piece.cdf.d1(x) * x
                },
                piece.lo.ln(),
                hi.ln(),
                1e-14,
                1e-13,
            )
            .0;
        }
    }
    total
}

pub fn equilibrium_v_star(eq: &Equilibrium) -> Result<f64> {
    v_star(&eq.thresholds, &eq.law)
}

/// Which coordinate of regime 1 is perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ElasticityParam {
    Sigma1,
    P1,
    Varphi1,
}

impl ElasticityParam {
    pub const ALL: [ElasticityParam; 3] = [ElasticityParam::Sigma1, ElasticityParam::P1, ElasticityParam::Varphi1];

    pub fn key(self) -> &'static str {
        match self {
            ElasticityParam::Sigma1 => "sigma1",
            ElasticityParam::P1 => "p1",
            ElasticityParam::Varphi1 => "varphi1",
        }
    }

    /// Sign convention: costs of volatility and switching count positive.
    fn sign(self) -> f64 {
        match self {
            ElasticityParam::Varphi1 => 1.0,
            _ => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Elasticity {
    pub param: ElasticityParam,
    /// Richardson-extrapolated elasticity.
    pub value: f64,
    /// Central-difference estimates at steps `h` and `h/2`.
    pub coarse: f64,
    pub fine: f64,
    /// Halving the step moved the estimate by less than 10% of its size
    /// (or by less than `1e-6` in absolute terms).
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueReport {
    pub v_star: f64,
    pub elasticities: Vec<Elasticity>,
}

impl ValueReport {
    pub fn get(&self, p: ElasticityParam) -> f64 {
        self.elasticities.iter().find(|e| e.param == p).map_or(f64::NAN, |e| e.value)
    }
}

/// Relative central-difference step.
pub const ELASTICITY_STEP: f64 = 1e-3;

fn v_star_of(params: &ModelParams) -> Result<f64> {
    let opts = EquilibriumOptions {
        probe: false,
        tol: 1e-11,
        ..Default::default()
    };
    let eq = solve_equilibrium_with(params, &opts)?;
    equilibrium_v_star(&eq)
}

/// Elasticities of `V*` with respect to regime-1 coordinates at a point
/// where both regimes share `(sigma, p, varphi)`.
pub fn elasticities(params: &ModelParams, exec: Execution) -> Result<ValueReport> {
    let [r1, r2] = params.regimes;
    if r1 != r2 {
        return Err(Error::Config(
            "elasticities are evaluated at a point with identical regimes".into(),
        ));
    }
    let mut jobs: Vec<ModelParams> = vec![*params];
    for p in ElasticityParam::ALL {
        let x = params.get(p.key()).unwrap();
        for s in [1.0, -1.0, 0.5, -0.5] {
            jobs.push(params.with(p.key(), x * (1.0 + s * ELASTICITY_STEP))?);
        }
    }
    let vals: Vec<Result<f64>> = exec.map(&jobs, v_star_of);
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let v0 = vals[0];
    let elasticities = ElasticityParam::ALL
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let x = params.get(p.key()).unwrap();
            let v = &vals[1 + 4 * k..5 + 4 * k];
            let h = ELASTICITY_STEP * x;
            let d_coarse = (v[0] - v[1]) / (2.0 * h);
            let d_fine = (v[2] - v[3]) / h;
            let scale = p.sign() * x / v0;
            let coarse = scale * d_coarse;
            let fine = scale * d_fine;
            let value = (4.0 * fine - coarse) / 3.0;
            let stable = (fine - coarse).abs() <= 0.1 * value.abs() || (fine - coarse).abs() < 1e-6;
            Elasticity {
                param: p,
                value,
                coarse,
                fine,
                stable,
            }
        })
        .collect();
    Ok(ValueReport {
        v_star: v0,
        elasticities,
    })
}

/// One row of the elasticity table.
#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub sigma2: f64,
    pub varphi2: f64,
    pub report: ValueReport,
}

/// Volatilities and price levels spanned by the elasticity table.
pub const TABLE1_SIGMA: [f64; 3] = [0.1, 0.2, 0.3];
pub const TABLE1_VARPHI: [f64; 2] = [10.0, 15.0];
pub const TABLE1_P: f64 = 0.1;

/// Elasticity table: `nu = (sigma, 1/10, varphi)` for every combination.
/// Only `delta, rho, kappa, c, alpha` of `base` are used.
pub fn table1(base: &ModelParams, exec: Execution) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for &s in &TABLE1_SIGMA {
        for &v in &TABLE1_VARPHI {
            let p = ModelParams::symmetric(base, s, TABLE1_P, v);
            rows.push(Table1Row {
                sigma2: s,
                varphi2: v,
                report: elasticities(&p, exec)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;
    use crate::quad::quad;

    #[test]
    fn concentration_fig1() {
        let eq = solve_equilibrium(&ModelParams::figure1()).unwrap();
        let rep = concentration(&eq.law, 11).unwrap();
        assert!(rep.gini_h > 0.0 && rep.gini_h < 0.5);
        assert!(rep.variance.unwrap() > 0.0);
        let c = &rep.gini_curve;
        assert_eq!(c[0], (0.0, 0.0));
        assert_eq!(c[10], (1.0, 1.0));
        for w in c.windows(2) {
            assert!(w[1].1 >= w[0].1 && w[1].1 <= w[1].0 + 1e-12);
        }
        // same area computed in x rather than q
        let law = &eq.law;
        let [lo, a2] = law.ordered_thresholds();
        let f = |z: f64| {
            let x = z.exp();
            (law.marginal_cdf(x) - partial_mean(law, x) / rep.mean) * law.marginal_pdf(x) * x
        };
        let alt = quad(f, lo.ln(), a2.ln(), 1e-12) + quad(f, a2.ln(), a2.ln() + 30.0, 1e-12);
        assert!((alt - rep.gini_h).abs() < 1e-7, "{alt} {}", rep.gini_h);
    }

    #[test]
    fn empirical_gini_limits() {
        assert!(empirical_gini_h(&vec![3.0; 1000]).abs() < 1e-12);
        let mut mono = vec![0.0; 9999];
        mono.push(1.0);
        assert!((empirical_gini_h(&mono) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn v_star_tail_matches_brute_force() {
        let eq = solve_equilibrium(&ModelParams::figure1()).unwrap();
        let v = equilibrium_v_star(&eq).unwrap();
        let brute = v_star_truncated(&eq.thresholds, &eq.law, 1e6f64.ln());
        assert!(v > 0.0);
        assert!((v - brute).abs() < 1e-6 * v, "{v} {brute}");
    }
}
