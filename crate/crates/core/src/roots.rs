//! Characteristic exponents of the value-function and stationary-law ODEs.
//!
//! Polynomials are stored as coefficient arrays, lowest degree first.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ModelParams, Regime};

const MAX_BISECTION: usize = 200;

/// Horner evaluation, coefficients lowest degree first.
#[inline]
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `|P(r)| / sum_k |c_k| |r|^k`, the residual relative to the size of the
/// terms that cancel at `r`.
pub fn normalized_residual(coeffs: &[f64], r: f64) -> f64 {
    let scale: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * r.abs().powi(k as i32))
        .sum();
    if scale == 0.0 {
        0.0
    } else {
        eval(coeffs, r).abs() / scale
    }
}

fn mul_quadratics(a: [f64; 3], b: [f64; 3]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Real roots `lo < hi` of a quadratic with a positive leading coefficient
/// and a negative constant term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticRoots {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: [f64; 3],
}

impl QuadraticRoots {
    fn solve(coeffs: [f64; 3]) -> Result<Self> {
        let [c, b, a] = coeffs;
        let disc = b * b - 4.0 * a * c;
        if !(a > 0.0) || !(disc >= 0.0) {
            return Err(Error::numerical(
                "quadratic roots",
                format!("no real roots for {coeffs:?}"),
            ));
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
        let (r1, r2) = (q / a, c / q);
        Ok(QuadraticRoots {
            lo: r1.min(r2),
            hi: r1.max(r2),
            coeffs,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval(&self.coeffs, x)
    }
}

/// Four real roots in increasing order together with the quartic they solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuarticRoots {
    pub roots: [f64; 4],
    pub coeffs: [f64; 5],
}

impl QuarticRoots {
    pub fn eval(&self, x: f64) -> f64 {
        eval(&self.coeffs, x)
    }

    pub fn max_residual(&self) -> f64 {
        self.roots
            .iter()
            .map(|&r| normalized_residual(&self.coeffs, r))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailExponent {
    pub theta2: f64,
    /// First moment of the stationary law is finite (`1 + theta2 < 0`).
    pub moment_finite: bool,
}

impl TailExponent {
    /// Moment of order `k` is finite.
    pub fn has_moment(&self, k: u32) -> bool {
        k as f64 + self.theta2 < 0.0
    }
}

/// Coefficients of `G_i(g) = sigma_i^2/2 g(g-1) - (delta - sigma_i^2) g - (rho + delta + p_i)`.
pub fn g_poly(params: &ModelParams, i: Regime) -> [f64; 3] {
    let r = params.regime(i);
    let s2 = r.sigma * r.sigma;
    [
        -(params.rho + params.delta + r.p),
        0.5 * s2 - params.delta,
        0.5 * s2,
    ]
}

/// Coefficients of `phi_i(t) = sigma_i^2/2 t^2 + (delta + sigma_i^2/2) t - p_i`.
pub fn phi_poly(params: &ModelParams, i: Regime) -> [f64; 3] {
    let r = params.regime(i);
    let s2 = r.sigma * r.sigma;
    [-r.p, params.delta + 0.5 * s2, 0.5 * s2]
}

/// `G_1 G_2 - p_1 p_2`.
pub fn g_bar_poly(params: &ModelParams) -> [f64; 5] {
    let mut q = mul_quadratics(g_poly(params, Regime::One), g_poly(params, Regime::Two));
    q[0] -= params.p(Regime::One) * params.p(Regime::Two);
    q
}

/// `phi_1 phi_2 - p_1 p_2`; its constant term vanishes identically.
pub fn phi_bar_poly(params: &ModelParams) -> [f64; 5] {
    let mut q = mul_quadratics(phi_poly(params, Regime::One), phi_poly(params, Regime::Two));
    q[0] = 0.0;
    q
}

/// `phi_bar(t) / t`, formed directly from the factor coefficients.
pub fn theta_cubic(params: &ModelParams) -> [f64; 4] {
    let [m1, b1, a1] = phi_poly(params, Regime::One);
    let [m2, b2, a2] = phi_poly(params, Regime::Two);
    let (p1, p2) = (-m1, -m2);
    [
        -(b1 * p2 + b2 * p1),
        b1 * b2 - a1 * p2 - a2 * p1,
        a1 * b2 + a2 * b1,
        a1 * a2,
    ]
}

pub fn gamma_roots(params: &ModelParams) -> Result<QuadraticRoots> {
    gamma_roots_for(params, Regime::One)
}

pub fn gamma_roots_for(params: &ModelParams, i: Regime) -> Result<QuadraticRoots> {
    QuadraticRoots::solve(g_poly(params, i))
}

pub fn alpha1_roots(params: &ModelParams) -> Result<QuadraticRoots> {
    alpha_roots_for(params, Regime::One)
}

pub fn alpha_roots_for(params: &ModelParams, i: Regime) -> Result<QuadraticRoots> {
    QuadraticRoots::solve(phi_poly(params, i))
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, stage: &'static str) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::numerical(
            stage,
            format!("no sign change on [{lo}, {hi}] ({flo:e}, {fhi:e})"),
        ));
    }
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pushes `edge` away from `anchor` until `f(edge)` has sign `target`.
fn expand(f: &impl Fn(f64) -> f64, anchor: f64, dir: f64, target: f64, stage: &'static str) -> Result<f64> {
    let mut step = 1.0_f64.max(anchor.abs());
    for _ in 0..200 {
        let x = anchor + dir * step;
        if f(x).signum() == target {
            return Ok(x);
        }
        step *= 2.0;
    }
    Err(Error::numerical(stage, "bracket expansion failed"))
}

/// Bracket endpoints sit on roots of a factor, where the product has a known
/// sign that rounding can hide when the switching intensities are tiny.
/// Moves `x` by a few ulps in direction `dir` until `f` has sign `target`.
fn nudge(f: &impl Fn(f64) -> f64, x: f64, dir: f64, target: f64, stage: &'static str) -> Result<f64> {
    let mut step = 1e-13 * x.abs().max(1.0);
    let mut y = x;
    for _ in 0..40 {
        if f(y).signum() == target && f(y) != 0.0 {
            return Ok(y);
        }
        y = x + dir * step;
        step *= 2.0;
    }
    Err(Error::numerical(stage, format!("sign pattern violated near {x}")))
}

/// `lambda_1 < lambda_2 < 0 < lambda_3 < lambda_4`, the roots of `G_bar`.
pub fn lambda_roots(params: &ModelParams) -> Result<QuarticRoots> {
    const STAGE: &str = "lambda roots";
    let coeffs = g_bar_poly(params);
    let gamma = gamma_roots(params)?;
    let f = |x: f64| eval(&coeffs, x);
    if !(f(0.0) > 0.0) {
        return Err(Error::numerical(STAGE, "G_bar(0) must be positive"));
    }
    let (glo, ghi) = (gamma.lo, gamma.hi);
    let left = expand(&f, glo, -1.0, 1.0, STAGE)?;
    let right = expand(&f, ghi, 1.0, 1.0, STAGE)?;
    let roots = [
        bisect(f, left, nudge(&f, glo, 1.0, -1.0, STAGE)?, STAGE)?,
        bisect(f, nudge(&f, glo, -1.0, -1.0, STAGE)?, 0.0, STAGE)?,
        bisect(f, 0.0, nudge(&f, ghi, 1.0, -1.0, STAGE)?, STAGE)?,
        bisect(f, nudge(&f, ghi, -1.0, -1.0, STAGE)?, right, STAGE)?,
    ];
    Ok(QuarticRoots { roots, coeffs })
}

/// `theta_1 < theta_2 < theta_3 = 0 < theta_4`, the roots of `phi_bar`, and
/// the tail exponent `theta_2`.
pub fn theta_roots(params: &ModelParams) -> Result<(QuarticRoots, TailExponent)> {
    const STAGE: &str = "theta roots";
    let cubic = theta_cubic(params);
    let f = |x: f64| eval(&cubic, x);
    let a1 = alpha_roots_for(params, Regime::One)?;
    let a2 = alpha_roots_for(params, Regime::Two)?;
    let (lo_min, lo_max) = (a1.lo.min(a2.lo), a1.lo.max(a2.lo));
    let hi_max = a1.hi.max(a2.hi);
    if !(f(0.0) < 0.0) {
        return Err(Error::numerical(STAGE, "deflated cubic must be negative at 0"));
    }
    let left = expand(&f, lo_min, -1.0, -1.0, STAGE)?;
    let right = expand(&f, hi_max, 1.0, 1.0, STAGE)?;
    let t1 = bisect(f, left, nudge(&f, lo_min, 1.0, 1.0, STAGE)?, STAGE)?;
    let t2 = bisect(f, nudge(&f, lo_max, -1.0, 1.0, STAGE)?, 0.0, STAGE)?;
    let t4 = bisect(f, nudge(&f, hi_max, -1.0, -1.0, STAGE)?, right, STAGE)?;
    let quartic = QuarticRoots {
        roots: [t1, t2, 0.0, t4],
        coeffs: phi_bar_poly(params),
    };
    Ok((
        quartic,
        TailExponent {
            theta2: t2,
            moment_finite: 1.0 + t2 < 0.0,
        },
    ))
}

/// All four root families for one labelling of the regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharRoots {
    pub gamma: QuadraticRoots,
    pub lambda: QuarticRoots,
    pub alpha: QuadraticRoots,
    pub theta: QuarticRoots,
    pub tail: TailExponent,
}

impl CharRoots {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let (theta, tail) = theta_roots(params)?;
        Ok(CharRoots {
            gamma: gamma_roots(params)?,
            lambda: lambda_roots(params)?,
            alpha: alpha1_roots(params)?,
            theta,
            tail,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> ModelParams {
        ModelParams::figure1()
    }

    #[test]
    fn gamma_vieta_and_residual() {
        let p = fig1();
        let g = gamma_roots(&p).unwrap();
        let s2 = 0.04;
        assert!(g.lo < 0.0 && g.hi > 0.0);
        assert!((g.lo * g.hi + 2.0 * (p.rho + p.delta + 0.1) / s2).abs() < 1e-12);
        assert!((g.lo + g.hi - (2.0 * p.delta / s2 - 1.0)).abs() < 1e-12);
        assert!(normalized_residual(&g.coeffs, g.lo) < 1e-12);
        assert!(normalized_residual(&g.coeffs, g.hi) < 1e-12);
    }

    #[test]
    fn alpha_limits_and_vieta() {
        let p = fig1();
        let a = alpha1_roots(&p).unwrap();
        assert!((a.lo * a.hi + 2.0 * 0.1 / 0.04).abs() < 1e-12);
        assert!(a.eval(a.lo).abs() < 1e-12 && a.eval(a.hi).abs() < 1e-12);
        let tiny = p.with("p1", 1e-12).unwrap();
        let a = alpha1_roots(&tiny).unwrap();
        assert!((a.lo - (-1.0 - 2.0 * p.delta / 0.04)).abs() < 1e-9);
        assert!(a.hi.abs() < 1e-9);
    }

    #[test]
    fn lambda_roots_fig1() {
        let lam = lambda_roots(&fig1()).unwrap();
        let r = lam.roots;
        assert!(r[0] < r[1] && r[1] < 0.0 && 0.0 < r[2] && r[2] < r[3]);
        assert!(lam.max_residual() < 1e-12);
        assert!((r[0] + 3.555).abs() < 1e-3 && (r[3] - 11.066).abs() < 1e-3);
    }

    #[test]
    fn symmetric_lambda_factorises() {
        let p = ModelParams::symmetric(&fig1(), 0.2, 0.1, 10.0);
        let lam = lambda_roots(&p).unwrap();
        let mut g = g_poly(&p, Regime::One);
        g[0] -= 0.1;
        let minus = QuadraticRoots::solve(g).unwrap();
        g[0] += 0.2;
        let plus = QuadraticRoots::solve(g).unwrap();
        let mut expect = [minus.lo, minus.hi, plus.lo, plus.hi];
        expect.sort_by(f64::total_cmp);
        for (x, y) in lam.roots.iter().zip(expect) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn theta_roots_fig1() {
        let (th, tail) = theta_roots(&fig1()).unwrap();
        let r = th.roots;
        assert_eq!(r[2], 0.0);
        assert!(r[0] < r[1] && r[1] < 0.0 && r[3] > 0.0);
        assert!(th.max_residual() < 1e-12);
        assert!((tail.theta2 + 6.432).abs() < 1e-3);
        assert!(tail.moment_finite && tail.has_moment(2));
    }

    #[test]
    fn theta2_small_switching_limit() {
        let p = fig1().with("p1", 1e-9).unwrap().with("p2", 1e-9).unwrap();
        let (_, tail) = theta_roots(&p).unwrap();
        let binding = (-1.0 - 2.0 * p.delta / 0.04_f64).max(-1.0 - 2.0 * p.delta / 0.0225);
        assert!((tail.theta2 - binding).abs() < 1e-6, "{}", tail.theta2);
    }

    #[test]
    fn theta2_decreases_with_delta() {
        let mut last = 0.0;
        for k in 0..20 {
            let p = fig1().with("delta", 0.02 + 0.01 * k as f64).unwrap();
            let (_, tail) = theta_roots(&p).unwrap();
            assert!(tail.theta2 < last);
            last = tail.theta2;
        }
    }
}
