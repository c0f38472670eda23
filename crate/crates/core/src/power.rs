//! Piecewise closed forms of the shape `sum_j c_j (x/a)^e_j + l x + k`.

use serde::Serialize;

/// Tolerance below which `1 + e` is treated as zero and power integrals
/// switch to their logarithmic form.
pub const LOG_BRANCH_TOL: f64 = 1e-9;

/// `int_0^z exp((1+g) s) ds`, continuous through `g = -1`.
#[inline]
pub fn expm1_ratio(z: f64, g: f64) -> f64 {
    let k = 1.0 + g;
    if k.abs() < LOG_BRANCH_TOL {
        z
    } else {
        (k * z).exp_m1() / k
    }
}

/// `int_{t0}^{t1} t^g dt` for `0 < t0 <= t1`, with `t1 = inf` allowed when
/// `g < -1`.
pub fn power_integral(g: f64, t0: f64, t1: f64) -> f64 {
    if t1.is_infinite() {
        let k = 1.0 + g;
        debug_assert!(k < 0.0);
        return -t0.powf(k) / k;
    }
    let (z0, z1) = (t0.ln(), t1.ln());
    let k = 1.0 + g;
    // t0^k * int_0^{z1-z0} e^{k s} ds
    (k * z0).exp() * expm1_ratio(z1 - z0, g)
}

/// `coef (x/anchor)^exp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exp: f64,
    pub anchor: f64,
}

impl PowerTerm {
    #[inline]
    fn scaled(&self, x: f64) -> f64 {
        self.coef * (x / self.anchor).powf(self.exp)
    }
}

/// `sum_j coef_j (x/anchor_j)^exp_j + lin x + cst`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSum {
    pub terms: [PowerTerm; 2],
    pub lin: f64,
    pub cst: f64,
}

impl PowerSum {
    /// Both power terms anchored at `anchor`.
    pub fn new(anchor: f64, terms: [(f64, f64); 2], lin: f64, cst: f64) -> Self {
        Self::anchored(terms.map(|(coef, exp)| (coef, exp, anchor)), lin, cst)
    }

    /// Terms given as `(coef, exp, anchor)`.
    pub fn anchored(terms: [(f64, f64, f64); 2], lin: f64, cst: f64) -> Self {
        PowerSum {
            terms: terms.map(|(coef, exp, anchor)| PowerTerm { coef, exp, anchor }),
            lin,
            cst,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.terms.iter().map(|p| p.scaled(x)).sum::<f64>() + self.lin * x + self.cst
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.terms.iter().map(|p| p.exp * p.scaled(x)).sum::<f64>() / x + self.lin
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|p| p.exp * (p.exp - 1.0) * p.scaled(x))
            .sum::<f64>()
            / (x * x)
    }

    /// `int_lo^hi value(x) dx` for `0 < lo <= hi < inf`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let power: f64 = self
            .terms
            .iter()
            .map(|p| p.coef * p.anchor * power_integral(p.exp, lo / p.anchor, hi / p.anchor))
            .sum();
        power + 0.5 * self.lin * (hi * hi - lo * lo) + self.cst * (hi - lo)
    }

    /// `int_lo^hi x^m d(value)(x)` over the power terms only (the affine
    /// part must vanish for this to be a moment of a distribution).
    /// `hi = inf` is allowed when every `exp + m < 0`.
    pub fn stieltjes_moment(&self, m: f64, lo: f64, hi: f64) -> f64 {
        self.terms
            .iter()
            .filter(|p| p.coef != 0.0)
            .map(|p| {
                let a = p.anchor;
                p.coef * p.exp * a.powf(m) * power_integral(p.exp + m - 1.0, lo / a, hi / a)
            })
            .sum()
    }
}
