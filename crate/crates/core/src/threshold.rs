//! Investment thresholds for fixed prices, and the closed-form marginal value
//! `v` and firm value `V` built on them.
//!
//! Internally everything is expressed in *ordered labels*: label 1 is the
//! regime owning the lower threshold. When that is the original regime 2 the
//! parameters are swapped and [`ThresholdSolution::is_swapped`] is set; the
//! public evaluators take original regime labels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ModelParams, Regime};
use crate::power::PowerSum;
use crate::roots::{gamma_roots_for, CharRoots};

const NEWTON_MAX: usize = 100;
const ACCEPT_RESIDUAL: f64 = 1e-10;

/// Affine particular solutions and coupling ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticularCoeffs {
    pub c1: f64,
    pub d1: f64,
    pub l: [f64; 2],
    pub r: [f64; 2],
    pub g11: f64,
    pub g12: f64,
}

fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Particular coefficients for the labelling of `params` as given.
pub fn particular_coeffs(params: &ModelParams, eta: [f64; 2], roots: &CharRoots) -> Result<ParticularCoeffs> {
    let (d, rho, c, kappa) = (params.delta, params.rho, params.c, params.kappa);
    let [r1, r2] = params.regimes;
    let (s1, s2) = (r1.sigma * r1.sigma, r2.sigma * r2.sigma);
    let (p1, p2) = (r1.p, r2.p);
    let c1 = -2.0 * c / (rho + 2.0 * d + p1 - s1);
    let d1 = (eta[0] + p1 * kappa) / (rho + d + p1);
    let l = solve2(
        [[rho + 2.0 * d + p1 - s1, -p1], [-p2, rho + 2.0 * d + p2 - s2]],
        [-2.0 * c, -2.0 * c],
    )
    .ok_or_else(|| Error::numerical("particular coefficients", "singular L system"))?;
    let r = solve2([[rho + d + p1, -p1], [-p2, rho + d + p2]], eta)
        .ok_or_else(|| Error::numerical("particular coefficients", "singular R system"))?;
    let [l1, l2, _, _] = roots.lambda.roots;
    let g1 = |x: f64| roots.gamma.eval(x) / p1;
    Ok(ParticularCoeffs {
        c1,
        d1,
        l,
        r,
        g11: g1(l1),
        g12: g1(l2),
    })
}

/// Coefficient ladder of the two-equation threshold system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ladder {
    pub c: [[f64; 2]; 2],
    pub d: [[f64; 2]; 2],
    pub e: [[f64; 2]; 2],
    pub f: [[f64; 2]; 2],
}

impl Ladder {
    fn new(kappa: f64, roots: &CharRoots, pc: &ParticularCoeffs) -> Self {
        let (gp, gm) = (roots.gamma.hi, roots.gamma.lo);
        let [l1, l2, _, _] = roots.lambda.roots;
        let ParticularCoeffs {
            c1, d1, l, r, g11, g12, ..
        } = *pc;
        let c = [
            [(kappa - d1) * gm / (gm - gp), c1 * (1.0 - gm) / (gm - gp)],
            [-(kappa - d1) * gp / (gm - gp), -c1 * (1.0 - gp) / (gm - gp)],
        ];
        let d = [
            [
                -(kappa - r[1]) * l2 / (g11 * (l2 - l1)),
                -l[1] * (1.0 - l2) / (g11 * (l2 - l1)),
            ],
            [
                (kappa - r[1]) * l1 / (g12 * (l2 - l1)),
                l[1] * (1.0 - l1) / (g12 * (l2 - l1)),
            ],
        ];
        let e = [
            [d[0][0] + d[1][0] + r[0] - d1, d[0][1] + d[1][1] + l[0] - c1],
            [d[0][0] * l1 + d[1][0] * l2, d[0][1] * l1 + d[1][1] * l2 + l[0] - c1],
        ];
        let f = [
            [
                (e[1][0] - gm * e[0][0]) / (gp - gm),
                (e[1][1] - gm * e[0][1]) / (gp - gm),
            ],
            [
                (e[0][0] * gp - e[1][0]) / (gp - gm),
                (e[0][1] * gp - e[1][1]) / (gp - gm),
            ],
        ];
        Ladder { c, d, e, f }
    }
}

/// The threshold system in one fixed labelling.
struct System {
    params: ModelParams,
    eta: [f64; 2],
    roots: CharRoots,
    coeffs: ParticularCoeffs,
    ladder: Ladder,
}

impl System {
    fn new(params: ModelParams, eta: [f64; 2]) -> Result<Self> {
        let roots = CharRoots::new(&params)?;
        let coeffs = particular_coeffs(&params, eta, &roots)?;
        let ladder = Ladder::new(params.kappa, &roots, &coeffs);
        Ok(System {
            params,
            eta,
            roots,
            coeffs,
            ladder,
        })
    }

    fn exps(&self) -> [f64; 2] {
        [self.roots.gamma.hi, self.roots.gamma.lo]
    }

    /// Raw residuals, their term scales and the Jacobian in `(ln a1, ln a2)`.
    /// The growing-exponent equation is divided by `(a2/a1)^gamma+` so that
    /// neither residual overflows on the ordered half-plane.
    fn eval(&self, x: [f64; 2]) -> ([f64; 2], [f64; 2], [[f64; 2]; 2]) {
        let (a1, a2) = (x[0].exp(), x[1].exp());
        let gap = x[1] - x[0];
        let (c, f) = (&self.ladder.c, &self.ladder.f);
        let [gp, gm] = self.exps();
        let mut r = [0.0; 2];
        let mut s = [0.0; 2];
        let mut j = [[0.0; 2]; 2];

        let e = (-gp * gap).exp();
        let lin = c[0][0] + c[0][1] * a1;
        let up = f[0][0] + f[0][1] * a2;
        r[0] = lin - e * up;
        s[0] = c[0][0].abs() + (c[0][1] * a1).abs() + e * (f[0][0].abs() + (f[0][1] * a2).abs());
        j[0][0] = c[0][1] * a1 - gp * e * up;
        j[0][1] = gp * e * up - e * f[0][1] * a2;

        let t = (gm * gap).exp();
        let lin = c[1][0] + c[1][1] * a1;
        r[1] = t * lin - (f[1][0] + f[1][1] * a2);
        s[1] = t * (c[1][0].abs() + (c[1][1] * a1).abs()) + f[1][0].abs() + (f[1][1] * a2).abs();
        j[1][0] = -gm * t * lin + t * c[1][1] * a1;
        j[1][1] = gm * t * lin - f[1][1] * a2;
        (r, s, j)
    }

    fn rel_residual(&self, x: [f64; 2]) -> f64 {
        let (r, s, _) = self.eval(x);
        let v = (r[0].abs() / s[0].max(f64::MIN_POSITIVE)).max(r[1].abs() / s[1].max(f64::MIN_POSITIVE));
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    /// Damped Newton with backtracking on the squared residual norm.
    fn newton(&self, mut x: [f64; 2]) -> ([f64; 2], f64) {
        let norm = |r: [f64; 2]| r[0] * r[0] + r[1] * r[1];
        for _ in 0..NEWTON_MAX {
            let (r, _, j) = self.eval(x);
            let n0 = norm(r);
            if !n0.is_finite() || self.rel_residual(x) < 1e-15 {
                break;
            }
            let Some(dx) = solve2(j, [-r[0], -r[1]]) else {
                break;
            };
            let cap = 2.0 / dx[0].abs().max(dx[1].abs()).max(2.0);
            let mut lam = cap;
            let mut moved = false;
            for _ in 0..60 {
                let y = [x[0] + lam * dx[0], x[1] + lam * dx[1]];
                let n1 = norm(self.eval(y).0);
                if n1.is_finite() && n1 < n0 * (1.0 - 1e-4 * lam) {
                    x = y;
                    moved = true;
                    break;
                }
                lam *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (x, self.rel_residual(x))
    }

    /// Smooth-fit threshold of regime `i` with switching turned off.
    fn single_regime(&self, i: Regime) -> Option<f64> {
        let p = &self.params;
        let solo = p.with(if i == Regime::One { "p1" } else { "p2" }, 0.0).ok()?;
        let g = gamma_roots_for(&solo, i).ok()?.lo;
        let s2 = p.sigma(i).powi(2);
        let l = -2.0 * p.c / (p.rho + 2.0 * p.delta - s2);
        let r = self.eta[i.index()] / (p.rho + p.delta);
        let a = (p.kappa - r) * g / (l * (g - 1.0));
        (a > 0.0 && a.is_finite()).then_some(a)
    }

    fn seeds(&self) -> Vec<[f64; 2]> {
        let s1 = self.single_regime(Regime::One);
        let s2 = self.single_regime(Regime::Two);
        let mut out = Vec::new();
        match (s1, s2) {
            (Some(x), Some(y)) => {
                let (u, w) = (x.ln(), y.ln());
                out.push([u, w]);
                out.push([u.min(w), u.max(w)]);
                out.push([0.5 * (u + w); 2]);
                out.push([u.min(w) - 0.5, u.max(w)]);
            }
            (Some(x), None) | (None, Some(x)) => out.push([x.ln(); 2]),
            (None, None) => {}
        }
        out
    }

    /// Coarse log-grid scan of the ordered half-plane `ln a1 <= ln a2`.
    fn scan(&self, centre: f64) -> Vec<[f64; 2]> {
        const N: usize = 60;
        const HALF: f64 = 5.0;
        let h = 2.0 * HALF / N as f64;
        let mut cands = Vec::new();
        for i in 0..=N {
            for j in i..=N {
                let x = [centre - HALF + h * i as f64, centre - HALF + h * j as f64];
                let r = self.rel_residual(x);
                if r.is_finite() {
                    cands.push((r, x));
                }
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        cands.into_iter().take(8).map(|c| c.1).collect()
    }

    fn centre(&self) -> f64 {
        let s: Vec<f64> = [Regime::One, Regime::Two]
            .iter()
            .filter_map(|&i| self.single_regime(i))
            .map(f64::ln)
            .collect();
        if s.is_empty() {
            let p = &self.params;
            let x = (self.eta[0].max(self.eta[1]) - p.kappa * (p.rho + p.delta)).abs() / (2.0 * p.c);
            x.max(1.0).ln()
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        }
    }

    /// Best converged ordered root, or the best residual reached.
    fn solve(&self) -> std::result::Result<[f64; 2], (f64, Vec<String>)> {
        let mut trace = Vec::new();
        let mut best = f64::INFINITY;
        let mut try_from = |x0: [f64; 2], tag: &str, trace: &mut Vec<String>| {
            let (x, r) = self.newton(x0);
            trace.push(format!("{tag} ({:.4},{:.4}) -> ({:.6},{:.6}) res {r:.2e}", x0[0], x0[1], x[0], x[1]));
            best = best.min(r);
            (r < ACCEPT_RESIDUAL && x[0] <= x[1] + 1e-12 && self.admissible(x)).then_some(x)
        };
        for x0 in self.seeds() {
            if let Some(x) = try_from(x0, "seed", &mut trace) {
                return Ok(x);
            }
        }
        for x0 in self.scan(self.centre()) {
            if let Some(x) = try_from(x0, "scan", &mut trace) {
                return Ok(x);
            }
        }
        Err((best, trace))
    }

    fn admissible(&self, x: [f64; 2]) -> bool {
        let a = [x[0].exp(), x[1].exp().max(x[0].exp())];
        let sol = Shape::new(self, a);
        let kappa = self.params.kappa;
        let tol = 1e-9 * kappa.abs().max(1.0);
        let top = a[1] * 50.0;
        (0..=200).all(|k| {
            let y = a[0] * (top / a[0]).powf(k as f64 / 200.0);
            Regime::BOTH.iter().all(|&i| {
                let v = sol.v(y, i);
                v.is_finite() && v <= kappa + tol
            })
        })
    }
}

/// Piecewise pieces of `v` in ordered labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Shape {
    a: [f64; 2],
    kappa: f64,
    corridor: PowerSum,
    upper: [PowerSum; 2],
}

impl Shape {
    fn new(sys: &System, a: [f64; 2]) -> Self {
        let (c, d, f) = (&sys.ladder.c, &sys.ladder.d, &sys.ladder.f);
        let pc = &sys.coeffs;
        let [l1, l2, _, _] = sys.roots.lambda.roots;
        // growing term taken from the upper end, decaying term from the lower
        let aa = f[0][0] + f[0][1] * a[1];
        let bb = c[1][0] + c[1][1] * a[0];
        let m1 = d[0][0] + d[0][1] * a[1];
        let m2 = d[1][0] + d[1][1] * a[1];
        Shape {
            a,
            kappa: sys.params.kappa,
            corridor: PowerSum::anchored(
                [(aa, sys.roots.gamma.hi, a[1]), (bb, sys.roots.gamma.lo, a[0])],
                pc.c1,
                pc.d1,
            ),
            upper: [
                PowerSum::new(a[1], [(m1, l1), (m2, l2)], pc.l[0], pc.r[0]),
                PowerSum::new(a[1], [(-m1 * pc.g11, l1), (-m2 * pc.g12, l2)], pc.l[1], pc.r[1]),
            ],
        }
    }

    fn piece(&self, x: f64, label: Regime) -> Option<&PowerSum> {
        match label {
            Regime::One if x <= self.a[0] => None,
            Regime::One if x < self.a[1] => Some(&self.corridor),
            Regime::Two if x <= self.a[1] => None,
            _ => Some(&self.upper[label.index()]),
        }
    }

    fn v(&self, x: f64, label: Regime) -> f64 {
        self.piece(x, label).map_or(self.kappa, |p| p.value(x))
    }

    /// `int_{a_label}^x v(y, label) dy`, negative extension `kappa (x - a)`.
    fn primitive(&self, x: f64, label: Regime) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        match label {
            Regime::One => {
                if x <= a1 {
                    self.kappa * (x - a1)
                } else if x <= a2 {
                    self.corridor.integral(a1, x)
                } else {
                    self.corridor.integral(a1, a2) + self.upper[0].integral(a2, x)
                }
            }
            Regime::Two => {
                if x <= a2 {
                    self.kappa * (x - a2)
                } else {
                    self.upper[1].integral(a2, x)
                }
            }
        }
    }
}

/// Thresholds and the closed-form value functions at fixed prices.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSolution {
    swapped: bool,
    params: ModelParams,
    eta: [f64; 2],
    pub roots: CharRoots,
    pub coeffs: ParticularCoeffs,
    pub ladder: Ladder,
    shape: Shape,
    k: [f64; 2],
    residual: f64,
}

impl ThresholdSolution {
    fn build(sys: System, x: [f64; 2], swapped: bool) -> Self {
        let a = [x[0].exp(), x[1].exp().max(x[0].exp())];
        let residual = sys.rel_residual(x);
        let shape = Shape::new(&sys, a);
        let k = solve_k_ordered(&sys.params, sys.eta, &shape);
        ThresholdSolution {
            swapped,
            params: sys.params,
            eta: sys.eta,
            roots: sys.roots,
            coeffs: sys.coeffs,
            ladder: sys.ladder,
            shape,
            k,
            residual,
        }
    }

    /// Ordered label of an original regime.
    #[inline]
    pub fn label(&self, i: Regime) -> Regime {
        if self.swapped {
            i.other()
        } else {
            i
        }
    }

    /// True when original regime 2 owns the lower threshold.
    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    /// Original regime owning the lower threshold.
    pub fn lower_regime(&self) -> Regime {
        self.label(Regime::One)
    }

    /// Parameters in ordered labels.
    pub fn ordered_params(&self) -> &ModelParams {
        &self.params
    }

    /// Prices in ordered labels.
    pub fn ordered_eta(&self) -> [f64; 2] {
        self.eta
    }

    /// `(a_lower, a_upper)`.
    pub fn ordered_thresholds(&self) -> [f64; 2] {
        self.shape.a
    }

    /// Thresholds in original labels.
    pub fn thresholds(&self) -> [f64; 2] {
        let a = self.shape.a;
        if self.swapped {
            [a[1], a[0]]
        } else {
            a
        }
    }

    pub fn threshold(&self, i: Regime) -> f64 {
        self.shape.a[self.label(i).index()]
    }

    /// Relative residual of the two threshold equations at the solution.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Coefficients `(A, B)` on the corridor, `A` scaled at the upper
    /// threshold and `B` at the lower one, and `(M1, M2)` above it.
    pub fn amplitudes(&self) -> [f64; 4] {
        let s = &self.shape;
        [
            s.corridor.terms[0].coef,
            s.corridor.terms[1].coef,
            s.upper[0].terms[0].coef,
            s.upper[0].terms[1].coef,
        ]
    }

    /// Integration constants `k_i = V(a_i, i)`, original labels.
    pub fn k(&self, i: Regime) -> f64 {
        self.k[self.label(i).index()]
    }

    /// Marginal value of capacity.
    pub fn v(&self, x: f64, i: Regime) -> Result<f64> {
        check_x(x)?;
        Ok(self.shape.v(x, self.label(i)))
    }

    /// `(v, v', v'')` using one-sided pieces: `right` selects the piece
    /// valid just above `x`.
    pub fn v_derivs(&self, x: f64, i: Regime, right: bool) -> [f64; 3] {
        let label = self.label(i);
        let probe = if right { x * (1.0 + 1e-14) } else { x * (1.0 - 1e-14) };
        match self.shape.piece(probe, label) {
            None => [self.params.kappa, 0.0, 0.0],
            Some(p) => [p.value(x), p.d1(x), p.d2(x)],
        }
    }

    /// Firm value under the optimal investment policy.
    #[allow(non_snake_case)]
    pub fn V(&self, x: f64, i: Regime) -> Result<f64> {
        check_x(x)?;
        let label = self.label(i);
        Ok(self.k[label.index()] + self.shape.primitive(x, label))
    }

    /// Closed form of `v(., i)` above the upper threshold, anchored there.
    pub fn upper_piece(&self, i: Regime) -> &PowerSum {
        &self.shape.upper[self.label(i).index()]
    }

    /// `int_lo^hi v(y, i) dy` in closed form.
    pub fn v_integral(&self, lo: f64, hi: f64, i: Regime) -> f64 {
        let label = self.label(i);
        self.shape.primitive(hi, label) - self.shape.primitive(lo, label)
    }

    /// Largest value-match / derivative-match violation at the thresholds.
    pub fn smooth_fit_residual(&self) -> f64 {
        let [a1, a2] = self.shape.a;
        let kappa = self.params.kappa;
        let s = &self.shape;
        let mut worst: f64 = 0.0;
        let mut push = |x: f64| worst = worst.max(x.abs());
        if a2 > a1 {
            push(s.corridor.value(a1) - kappa);
            push(s.corridor.d1(a1));
            push(s.corridor.value(a2) - s.upper[0].value(a2));
            push(s.corridor.d1(a2) - s.upper[0].d1(a2));
        } else {
            push(s.upper[0].value(a1) - kappa);
            push(s.upper[0].d1(a1));
        }
        push(s.upper[1].value(a2) - kappa);
        push(s.upper[1].d1(a2));
        worst
    }
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "capacity",
            value: x,
        })
    }
}

/// Integration constants from the HJB equations at the two thresholds.
fn solve_k_ordered(params: &ModelParams, eta: [f64; 2], shape: &Shape) -> [f64; 2] {
    let (rho, d, c, kappa) = (params.rho, params.delta, params.c, params.kappa);
    let (p1, p2) = (params.regimes[0].p, params.regimes[1].p);
    let [a1, a2] = shape.a;
    let corridor = if a2 > a1 {
        shape.corridor.integral(a1, a2)
    } else {
        0.0
    };
    let rhs = [
        -((eta[0] - d * kappa) * a1 - c * a1 * a1 - p1 * kappa * (a2 - a1)),
        -((eta[1] - d * kappa) * a2 - c * a2 * a2 + p2 * corridor),
    ];
    // determinant rho^2 + rho (p1 + p2) > 0
    solve2([[-(rho + p1), p1], [p2, -(rho + p2)]], rhs).expect("k system is nonsingular")
}

/// Solves for the thresholds at prices `eta` (original labels).
pub fn solve_thresholds(params: &ModelParams, eta: [f64; 2]) -> Result<ThresholdSolution> {
    params.checked()?;
    solve_thresholds_unchecked(params, eta)
}

pub(crate) fn solve_thresholds_unchecked(params: &ModelParams, eta: [f64; 2]) -> Result<ThresholdSolution> {
    for (k, &e) in eta.iter().enumerate() {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Domain {
                what: if k == 0 { "eta1" } else { "eta2" },
                value: e,
            });
        }
    }
    let mut found = Vec::new();
    let mut best = f64::INFINITY;
    let mut trace = Vec::new();
    for swapped in [false, true] {
        let (q, e) = if swapped {
            (params.swapped(), [eta[1], eta[0]])
        } else {
            (*params, eta)
        };
        let sys = System::new(q, e)?;
        match sys.solve() {
            Ok(x) => found.push((sys, x, swapped)),
            Err((r, t)) => {
                best = best.min(r);
                trace.extend(t.into_iter().map(|s| format!("swapped={swapped}: {s}")));
            }
        }
    }
    match found.len() {
        0 => Err(Error::NonConvergence {
            stage: "threshold system",
            best_residual: best,
            detail: trace.join("; "),
        }),
        1 => {
            let (sys, x, sw) = found.pop().unwrap();
            Ok(ThresholdSolution::build(sys, x, sw))
        }
        _ => {
            let (_, x1, _) = &found[0];
            let (_, x2, _) = &found[1];
            let a = [x1[0].exp(), x1[1].exp()];
            let b = [x2[1].exp(), x2[0].exp()];
            let close = |u: f64, v: f64| (u - v).abs() <= 1e-7 * u.abs().max(v.abs());
            if close(a[0], b[0]) && close(a[1], b[1]) {
                let (sys, x, sw) = found.swap_remove(0);
                Ok(ThresholdSolution::build(sys, x, sw))
            } else {
                Err(Error::numerical(
                    "threshold system",
                    format!("both orderings admit solutions: {a:?} and {b:?}"),
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::quad;

    fn fig1_eta() -> (ModelParams, [f64; 2]) {
        let p = ModelParams::figure1();
        let eta = p.prices([37.415, 26.691]).unwrap();
        (p, eta)
    }

    #[test]
    fn particular_coeffs_symmetric_and_plugback() {
        let base = ModelParams::figure1();
        let p = ModelParams::symmetric(&base, 0.15, 0.2, 8.0);
        let roots = CharRoots::new(&p).unwrap();
        let pc = particular_coeffs(&p, [9.0, 9.0], &roots).unwrap();
        let l = -2.0 * p.c / (p.rho + 2.0 * p.delta - 0.0225);
        assert!((pc.l[0] - l).abs() < 1e-14 && (pc.l[1] - l).abs() < 1e-14);
        assert!((pc.r[0] - 9.0 / (p.rho + p.delta)).abs() < 1e-12);

        let p = base;
        let eta = p.prices([1.0, 1.0]).unwrap();
        let roots = CharRoots::new(&p).unwrap();
        let pc = particular_coeffs(&p, eta, &roots).unwrap();
        let (rho, d) = (p.rho, p.delta);
        let res_r = (rho + d + 0.1) * pc.r[0] - 0.1 * pc.r[1] - eta[0];
        let res_l = -0.2 * pc.l[0] + (rho + 2.0 * d + 0.2 - 0.0225) * pc.l[1] + 2.0 * p.c;
        assert!(res_r.abs() < 1e-12 && res_l.abs() < 1e-12);

        let p0 = p.with("c", 0.0).unwrap();
        let pc = particular_coeffs(&p0, eta, &roots).unwrap();
        assert_eq!([pc.c1, pc.l[0], pc.l[1]], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn figure_one_thresholds() {
        let (p, eta) = fig1_eta();
        let s = solve_thresholds(&p, eta).unwrap();
        let a = s.thresholds();
        assert!(s.is_swapped(), "regime 1 owns the higher threshold");
        assert!((a[0] - 31.628).abs() < 0.01 && (a[1] - 15.421).abs() < 0.01, "{a:?}");
        assert!(s.residual() < 1e-10);
        assert!(s.smooth_fit_residual() < 1e-8);
    }

    #[test]
    fn symmetric_reduces_to_single_regime() {
        let p = ModelParams::symmetric(&ModelParams::figure1(), 0.15, 0.3, 9.0);
        let eta = [9.5, 9.5];
        let s = solve_thresholds(&p, eta).unwrap();
        let solo = p.with("p1", 0.0).unwrap();
        let g = gamma_roots_for(&solo, Regime::One).unwrap().lo;
        let l = -2.0 * p.c / (p.rho + 2.0 * p.delta - 0.0225);
        let r = 9.5 / (p.rho + p.delta);
        let a = (p.kappa - r) * g / (l * (g - 1.0));
        let [a1, a2] = s.thresholds();
        assert!((a1 - a).abs() < 1e-8 * a && (a2 - a).abs() < 1e-8 * a, "{a1} {a2} {a}");
    }

    #[test]
    fn v_properties() {
        let (p, eta) = fig1_eta();
        let s = solve_thresholds(&p, eta).unwrap();
        for i in Regime::BOTH {
            let ai = s.threshold(i);
            assert_eq!(s.v(0.5 * ai, i).unwrap(), p.kappa);
            let mut last = f64::INFINITY;
            for k in 1..400 {
                let x = ai * 0.2 * 1.02f64.powi(k);
                let v = s.v(x, i).unwrap();
                assert!(v <= p.kappa + 1e-12 && v <= last + 1e-12);
                last = v;
            }
            let x = 1e6 * ai;
            let lin = s.coeffs.l[s.label(i).index()];
            assert!((s.v(x, i).unwrap() / x - lin).abs() < 1e-4);
        }
        assert!(s.v(0.0, Regime::One).is_err());
    }

    #[test]
    fn k_plugback_and_integral() {
        let (p, eta) = fig1_eta();
        let s = solve_thresholds(&p, eta).unwrap();
        let lo = s.lower_regime();
        let hi = lo.other();
        let [a1, a2] = s.ordered_thresholds();
        let num = quad(|y| s.v(y, lo).unwrap(), a1, a2, 1e-13);
        let exact = s.v_integral(a1, a2, lo);
        assert!((num - exact).abs() < 1e-9 * exact.abs().max(1.0));
        let q = s.ordered_params();
        let e = s.ordered_eta();
        let (k1, k2) = (s.k(lo), s.k(hi));
        let (p1, p2) = (q.regimes[0].p, q.regimes[1].p);
        let r1 = -(q.rho + p1) * k1 + p1 * k2 + (e[0] - q.delta * q.kappa) * a1 - q.c * a1 * a1
            - p1 * q.kappa * (a2 - a1);
        let r2 = p2 * k1 - (q.rho + p2) * k2 + (e[1] - q.delta * q.kappa) * a2 - q.c * a2 * a2 + p2 * exact;
        assert!(r1.abs() < 1e-10 * k1.abs() && r2.abs() < 1e-10 * k2.abs());
    }

    #[test]
    fn big_v_derivative_is_v() {
        let (p, eta) = fig1_eta();
        let s = solve_thresholds(&p, eta).unwrap();
        for i in Regime::BOTH {
            for m in [0.7, 1.3, 2.0, 5.0, 20.0] {
                let x = s.threshold(i) * m;
                let h = 1e-4 * x;
                let d = (s.V(x + h, i).unwrap() - s.V(x - h, i).unwrap()) / (2.0 * h);
                assert!((d - s.v(x, i).unwrap()).abs() < 1e-6, "{i:?} {m}");
            }
        }
    }

    #[test]
    fn higher_production_lowers_thresholds() {
        let p = ModelParams::figure1();
        let mut last = [f64::INFINITY; 2];
        for q in [5.0, 10.0, 20.0, 40.0, 80.0] {
            let s = solve_thresholds(&p, p.prices([q, 25.0]).unwrap()).unwrap();
            let a = s.thresholds();
            assert!(a[0] <= last[0] + 1e-9 && a[1] <= last[1] + 1e-9);
            last = a;
        }
    }
}
