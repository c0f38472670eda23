//! Closed-form stationary joint law of capacity and regime under the
//! barrier policy.
//!
//! Label conventions follow [`crate::threshold`]: internally label 1 owns the
//! lower threshold, public methods take original regimes.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ModelParams, Regime};
use crate::power::PowerSum;
use crate::roots::{alpha1_roots, phi_poly, theta_roots, QuadraticRoots, QuarticRoots, TailExponent};
use crate::roots::eval as poly_eval;

#[derive(Debug, Clone, Serialize)]
pub struct StationaryLaw {
    swapped: bool,
    params: ModelParams,
    /// Ordered thresholds, `a[0] <= a[1]`.
    a: [f64; 2],
    /// `ln a`.
    pub b: [f64; 2],
    pub alpha: QuadraticRoots,
    pub theta: QuarticRoots,
    pub tail: TailExponent,
    /// `(A1, A2, B1, B2)`.
    pub coeffs: [f64; 4],
    /// `(phi_1(theta_1), phi_1(theta_2)) / p_2`.
    pub phi1: [f64; 2],
    /// Stationary regime probabilities, ordered labels.
    pi: [f64; 2],
    corridor: PowerSum,
    upper: [PowerSum; 2],
}

/// One smooth piece of a regime's CDF on `[lo, hi)`.
#[derive(Debug, Clone, Copy)]
pub struct Piece<'a> {
    pub lo: f64,
    pub hi: f64,
    pub cdf: &'a PowerSum,
}

impl StationaryLaw {
    /// Builds the law for thresholds `a` given in original labels.
    pub fn new(params: &ModelParams, a: [f64; 2]) -> Result<Self> {
        for &x in &a {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Domain {
                    what: "threshold",
                    value: x,
                });
            }
        }
        let swapped = a[0] > a[1];
        let (q, a) = if swapped {
            (params.swapped(), [a[1], a[0]])
        } else {
            (*params, a)
        };
        Self::ordered(q, a, swapped)
    }

    fn ordered(params: ModelParams, a: [f64; 2], swapped: bool) -> Result<Self> {
        let alpha = alpha1_roots(&params)?;
        let (theta, tail) = theta_roots(&params)?;
        let pi = params.chain().pi;
        let p2 = params.regimes[1].p;
        let [t1, t2, _, _] = theta.roots;
        let phi1 = phi_poly(&params, Regime::One);
        let phi1 = [poly_eval(&phi1, t1) / p2, poly_eval(&phi1, t2) / p2];
        let b = [a[0].ln(), a[1].ln()];
        let gap = b[1] - b[0];
        let (ap, am) = (alpha.hi, alpha.lo);
        let (ep, em) = ((ap * gap).exp(), (am * gap).exp());
        #[rustfmt::skip]
        let m = Matrix4::new(
            1.0, 1.0, 0.0, 0.0,
            ep, em, -1.0, -1.0,
            ap * ep, am * em, -t1, -t2,
            0.0, 0.0, phi1[0], phi1[1],
        );
        let rhs = Vector4::new(0.0, pi[0], 0.0, pi[1]);
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("stationary law", "singular coefficient system"))?;
        let coeffs = [sol[0], -sol[0], sol[2], sol[3]];
        let [a1c, a2c, b1, b2] = coeffs;
        Ok(StationaryLaw {
            swapped,
            params,
            a,
            b,
            alpha,
            theta,
            tail,
            coeffs,
            phi1,
            pi,
            corridor: PowerSum::new(a[0], [(a1c, ap), (a2c, am)], 0.0, 0.0),
            upper: [
                PowerSum::new(a[1], [(b1, t1), (b2, t2)], 0.0, pi[0]),
                PowerSum::new(a[1], [(-b1 * phi1[0], t1), (-b2 * phi1[1], t2)], 0.0, pi[1]),
            ],
        })
    }

    #[inline]
    fn label(&self, i: Regime) -> Regime {
        if self.swapped {
            i.other()
        } else {
            i
        }
    }

    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    /// Thresholds in original labels.
    pub fn thresholds(&self) -> [f64; 2] {
        if self.swapped {
            [self.a[1], self.a[0]]
        } else {
            self.a
        }
    }

    /// `(min a, max a)`.
    pub fn ordered_thresholds(&self) -> [f64; 2] {
        self.a
    }

    pub fn ordered_params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pi(&self, i: Regime) -> f64 {
        self.pi[self.label(i).index()]
    }

    /// Smooth pieces of regime `i`'s CDF, in increasing order of `x`.
    pub fn pieces(&self, i: Regime) -> Vec<Piece<'_>> {
        let [a1, a2] = self.a;
        match self.label(i) {
            Regime::One => {
                let mut out = Vec::with_capacity(2);
                if a2 > a1 {
                    out.push(Piece {
                        lo: a1,
                        hi: a2,
                        cdf: &self.corridor,
                    });
                }
                out.push(Piece {
                    lo: a2,
                    hi: f64::INFINITY,
                    cdf: &self.upper[0],
                });
                out
            }
            Regime::Two => vec![Piece {
                lo: a2,
                hi: f64::INFINITY,
                cdf: &self.upper[1],
            }],
        }
    }

    fn piece_at(&self, x: f64, label: Regime) -> Option<&PowerSum> {
        let [a1, a2] = self.a;
        match label {
            Regime::One if x <= a1 => None,
            Regime::One if x < a2 => Some(&self.corridor),
            Regime::Two if x <= a2 => None,
            _ => Some(&self.upper[label.index()]),
        }
    }

    /// `P(X <= x, regime = i)`.
    pub fn cdf(&self, x: f64, i: Regime) -> f64 {
        self.piece_at(x, self.label(i)).map_or(0.0, |p| p.value(x))
    }

    /// Density of `P(X in dx, regime = i)`.
    pub fn pdf(&self, x: f64, i: Regime) -> f64 {
        self.piece_at(x, self.label(i)).map_or(0.0, |p| p.d1(x))
    }

    /// Marginal CDF of capacity.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        self.cdf(x, Regime::One) + self.cdf(x, Regime::Two)
    }

    pub fn marginal_pdf(&self, x: f64) -> f64 {
        self.pdf(x, Regime::One) + self.pdf(x, Regime::Two)
    }

    /// `P(X > x)`, evaluated without cancellation in the tail.
    pub fn survival(&self, x: f64) -> f64 {
        let [a1, a2] = self.a;
        if x <= a1 {
            1.0
        } else if x < a2 {
            1.0 - self.corridor.value(x)
        } else {
            let t = x / a2;
            let [_, _, b1, b2] = self.coeffs;
            let [t1, t2, _, _] = self.theta.roots;
            -(b1 * (1.0 - self.phi1[0]) * t.powf(t1) + b2 * (1.0 - self.phi1[1]) * t.powf(t2))
        }
    }

    /// `int_lo^hi x^m P(X in dx, regime = i)`, `hi = inf` allowed.
    pub fn partial_moment(&self, m: f64, lo: f64, hi: f64, i: Regime) -> Result<f64> {
        if hi.is_infinite() && !(m + self.tail.theta2 < 0.0) && self.coeffs[3] != 0.0 {
            return Err(Error::DivergentMoment {
                order: m.ceil() as u32,
                theta2: self.tail.theta2,
            });
        }
        let mut total = 0.0;
        for piece in self.pieces(i) {
            let (l, h) = (lo.max(piece.lo), hi.min(piece.hi));
            if h > l {
                total += piece.cdf.stieltjes_moment(m, l, h);
            }
        }
        Ok(total)
    }

    /// `E[X^m ; regime = i]`.
    pub fn moment(&self, m: u32, i: Regime) -> Result<f64> {
        self.partial_moment(m as f64, 0.0, f64::INFINITY, i)
    }

    /// `E[X | regime = i]`.
    pub fn conditional_mean(&self, i: Regime) -> Result<f64> {
        Ok(self.moment(1, i)? / self.pi(i))
    }

    /// Both conditional means, original labels.
    pub fn conditional_means(&self) -> Result<[f64; 2]> {
        Ok([
            self.conditional_mean(Regime::One)?,
            self.conditional_mean(Regime::Two)?,
        ])
    }

    /// `E[X]`.
    pub fn mean(&self) -> Result<f64> {
        Ok(self.moment(1, Regime::One)? + self.moment(1, Regime::Two)?)
    }

    /// `E[X^2]`.
    pub fn second_moment(&self) -> Result<f64> {
        Ok(self.moment(2, Regime::One)? + self.moment(2, Regime::Two)?)
    }

    /// Smallest `x` with marginal CDF at least `q`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain {
                what: "quantile level",
                value: q,
            });
        }
        let lo0 = self.a[0];
        let cap = 1e3 * self.a[1] / (1.0 - q).powf(1.0 / self.tail.theta2.abs());
        let mut hi = self.a[1].max(lo0 * 2.0);
        while self.marginal_cdf(hi) < q && hi < cap {
            hi = (2.0 * hi).min(cap);
        }
        let (mut lo, mut hi) = (lo0.ln(), hi.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.marginal_cdf(mid.exp()) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi.exp())
    }

    /// Stationary probability of the open corridor `(min a, max a)`.
    pub fn corridor_probability(&self) -> f64 {
        let [a1, a2] = self.a;
        if a2 > a1 {
            self.corridor.value(a2)
        } else {
            0.0
        }
    }

    /// Share of aggregate capacity held inside the corridor.
    pub fn corridor_share(&self) -> Result<f64> {
        let [a1, a2] = self.a;
        if a2 <= a1 {
            return Ok(0.0);
        }
        let inside = self.corridor.stieltjes_moment(1.0, a1, a2);
        Ok(inside / self.mean()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::quad;

    fn fig1_law() -> StationaryLaw {
        StationaryLaw::new(&ModelParams::figure1(), [31.628, 15.421]).unwrap()
    }

    #[test]
    fn structure_and_limits() {
        let law = fig1_law();
        assert!(law.is_swapped());
        assert_eq!(law.coeffs[1], -law.coeffs[0]);
        let [a1, a2] = law.ordered_thresholds();
        let lo = Regime::Two;
        assert_eq!(law.cdf(a1, lo), 0.0);
        assert_eq!(law.cdf(a2, Regime::One), 0.0);
        for i in Regime::BOTH {
            assert!((law.cdf(1e12 * a2, i) - law.pi(i)).abs() < 1e-10);
        }
        let mut last = 0.0;
        for k in 0..=10_000 {
            let x = a1 * 0.9 * (1e3f64).powf(k as f64 / 10_000.0);
            let f = law.marginal_cdf(x);
            assert!(f >= last - 1e-15);
            last = f;
        }
    }

    #[test]
    fn density_integrates_to_pi_and_means_match_quadrature() {
        let law = fig1_law();
        let [a1, a2] = law.ordered_thresholds();
        for i in Regime::BOTH {
            let lo = if law.pi(i) > 0.0 && law.cdf(a2, i) > 0.0 { a1 } else { a2 };
            let tot = quad(|z| law.pdf(z.exp(), i) * z.exp(), lo.ln(), a2.ln(), 1e-13)
                + quad(|z| law.pdf(z.exp(), i) * z.exp(), a2.ln(), a2.ln() + 40.0, 1e-13);
            assert!((tot - law.pi(i)).abs() < 1e-8, "{i:?} {tot}");
            let m = quad(|z| law.pdf(z.exp(), i) * z.exp() * z.exp(), lo.ln(), a2.ln(), 1e-14)
                + quad(|z| law.pdf(z.exp(), i) * z.exp() * z.exp(), a2.ln(), a2.ln() + 40.0, 1e-14);
            let exact = law.moment(1, i).unwrap();
            assert!((m - exact).abs() < 1e-8 * exact, "{m} {exact}");
        }
        assert!((law.mean().unwrap() - 33.84).abs() < 0.02);
    }

    #[test]
    fn quantile_round_trip() {
        let law = fig1_law();
        for q in [1e-6, 0.01, 0.2, 0.5, 0.9, 0.999] {
            let x = law.quantile(q).unwrap();
            assert!((law.marginal_cdf(x) - q).abs() < 1e-10, "{q}");
        }
        let x = law.quantile(1e-12).unwrap();
        assert!((x / law.ordered_thresholds()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_regime_pareto_mean() {
        let p = ModelParams::symmetric(&ModelParams::figure1(), 0.2, 0.1, 10.0);
        let law = StationaryLaw::new(&p, [20.0, 20.0]).unwrap();
        let th = -1.0 - 2.0 * p.delta / 0.04;
        let expect = 20.0 * th.abs() / (th.abs() - 1.0);
        assert!((law.mean().unwrap() - expect).abs() < 1e-10 * expect);
        assert_eq!(law.corridor_probability(), 0.0);
        assert_eq!(law.corridor_share().unwrap(), 0.0);
    }

    #[test]
    fn survival_matches_cdf_and_tail_slope() {
        let law = fig1_law();
        let a2 = law.ordered_thresholds()[1];
        for m in [0.7, 1.0, 1.5, 3.0] {
            let x = a2 * m;
            assert!((law.survival(x) - (1.0 - law.marginal_cdf(x))).abs() < 1e-13);
        }
        let (x0, x1) = (10.0 * a2, 1e3 * a2);
        let slope = (law.survival(x1).ln() - law.survival(x0).ln()) / (x1 / x0).ln();
        assert!((slope - law.tail.theta2).abs() < 0.01);
    }

    #[test]
    fn heavy_tail_is_an_error() {
        let p = ModelParams::figure1().with("sigma1", 0.6).unwrap().with("delta", 0.02).unwrap();
        let law = StationaryLaw::new(&p, [10.0, 12.0]).unwrap();
        assert!(law.tail.theta2 > -2.0 && law.tail.moment_finite);
        assert!(law.mean().is_ok());
        assert!(matches!(law.second_moment(), Err(Error::DivergentMoment { order: 2, .. })));
    }
}
