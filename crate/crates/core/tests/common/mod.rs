#![allow(dead_code)]

use mfe_core::{ModelParams, Regime, RegimeParams};
use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;

/// Real roots of `sum c_k x^k` as eigenvalues of the companion matrix,
/// sorted ascending. Panics on a genuinely complex root.
pub fn companion_roots(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        m[(0, k)] = -coeffs[n - 1 - k] / lead;
        if k + 1 < n {
            m[(k + 1, k)] = 1.0;
        }
    }
    let mut out: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .map(|z| {
            assert!(z.im.abs() <= 1e-7 * z.re.abs().max(1.0), "complex root {z}");
            z.re
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// A parameter draw that passes validation without warnings.
pub fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    loop {
        let delta: f64 = rng.random_range(0.01..0.3);
        let sigma: [f64; 2] = [rng.random_range(0.03..0.45), rng.random_range(0.03..0.45)];
        let s2 = sigma[0].max(sigma[1]).powi(2);
        let rho = 2.0 * s2 + rng.random_range(0.005..0.1);
        let kappa: f64 = rng.random_range(1.0..20.0);
        let floor = rho + delta;
        let regime = |s: f64, rng: &mut R| RegimeParams {
            sigma: s,
            p: rng.random_range(0.01..0.99),
            varphi: kappa * floor * rng.random_range(1.05..4.0),
            zeta: rng.random_range(0.2..3.0),
        };
        let p = ModelParams {
            delta,
            rho,
            kappa,
            c: rng.random_range(0.02..0.5),
            alpha: rng.random_range(0.1..0.9),
            regimes: [regime(sigma[0], rng), regime(sigma[1], rng)],
        };
        if p.validate().is_clean() {
            return p;
        }
    }
}

/// Free boundaries located by a finite-difference solver of the
/// variational inequality `min{A v + f, kappa - v} = 0` for the marginal
/// value, on a uniform grid in `z = ln x` with Howard policy iteration.
pub struct FdBoundaries {
    pub a: [f64; 2],
    /// Grid spacing in `ln x`.
    pub dz: f64,
    pub iterations: usize,
}

pub fn fd_free_boundaries(params: &ModelParams, eta: [f64; 2], nodes: usize) -> FdBoundaries {
    let (d, rho, c, kappa) = (params.delta, params.rho, params.c, params.kappa);
    let top = 3.5f64.exp() * eta[0].max(eta[1]) / (2.0 * c);
    let (z0, z1) = (top.ln() - 7.6, top.ln());
    let dz = (z1 - z0) / (nodes - 1) as f64;
    let x: Vec<f64> = (0..nodes).map(|n| (z0 + n as f64 * dz).exp()).collect();
    let reg = |i: usize| params.regime(Regime::from_index(i));
    // far-field: affine particular solution
    let s = [reg(0).sigma.powi(2), reg(1).sigma.powi(2)];
    let p = [reg(0).p, reg(1).p];
    let lin = Matrix2::new(rho + 2.0 * d + p[0] - s[0], -p[0], -p[1], rho + 2.0 * d + p[1] - s[1])
        .lu()
        .solve(&Vector2::new(-2.0 * c, -2.0 * c))
        .unwrap();
    let cst = Matrix2::new(rho + d + p[0], -p[0], -p[1], rho + d + p[1])
        .lu()
        .solve(&Vector2::new(eta[0], eta[1]))
        .unwrap();
    let far = |i: usize| lin[i] * x[nodes - 1] + cst[i];

    let coef = |i: usize| {
        let diff = 0.5 * s[i] / (dz * dz);
        let drift = (0.5 * s[i] - d) / (2.0 * dz);
        (diff - drift, -2.0 * diff - (rho + d) - p[i], diff + drift)
    };
    let co = [coef(0), coef(1)];
    let f = |i: usize, n: usize| eta[i] - 2.0 * c * x[n];
    let apply = |v: &[[f64; 2]], i: usize, n: usize| {
        let (lo, mid, hi) = co[i];
        lo * v[n - 1][i] + mid * v[n][i] + hi * v[n + 1][i] + p[i] * v[n][1 - i] + f(i, n)
    };

    let mut stop = vec![[false; 2]; nodes];
    stop[0] = [true; 2];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let v = solve_policy(&stop, &co, &p, kappa, &f, [far(0), far(1)], nodes);
        let mut changed = false;
        for n in 1..nodes - 1 {
            for i in 0..2 {
                let cont = apply(&v, i, n);
                let want = kappa - v[n][i] < cont;
                if want != stop[n][i] {
                    stop[n][i] = want;
                    changed = true;
                }
            }
        }
        if !changed || iterations > 5000 {
            break;
        }
    }
    let a = [0, 1].map(|i| {
        let k = (0..nodes - 1).rev().find(|&n| stop[n][i]).unwrap();
        assert!(k > 0 && k < nodes - 10, "free boundary at the edge of the grid");
        x[k]
    });
    FdBoundaries { a, dz, iterations }
}

#[allow(clippy::too_many_arguments)]
fn solve_policy(
    stop: &[[bool; 2]],
    co: &[(f64, f64, f64); 2],
    p: &[f64; 2],
    kappa: f64,
    f: &dyn Fn(usize, usize) -> f64,
    far: [f64; 2],
    nodes: usize,
) -> Vec<[f64; 2]> {
    // block rows: A_n v_{n-1} + B_n v_n + C_n v_{n+1} = r_n
    let mut cp = vec![Matrix2::zeros(); nodes];
    let mut dp = vec![Vector2::zeros(); nodes];
    for n in 0..nodes {
        let mut a = Matrix2::zeros();
        let mut b = Matrix2::zeros();
        let mut cmat = Matrix2::zeros();
        let mut r = Vector2::zeros();
        for i in 0..2 {
            if n == nodes - 1 {
                b[(i, i)] = 1.0;
                r[i] = far[i];
            } else if stop[n][i] {
                b[(i, i)] = 1.0;
                r[i] = kappa;
            } else {
                let (lo, mid, hi) = co[i];
                a[(i, i)] = lo;
                b[(i, i)] = mid;
                b[(i, 1 - i)] = p[i];
                cmat[(i, i)] = hi;
                r[i] = -f(i, n);
            }
        }
        let (m, rhs) = if n == 0 {
            (b, r)
        } else {
            (b - a * cp[n - 1], r - a * dp[n - 1])
        };
        let inv = m.try_inverse().expect("singular block");
        cp[n] = inv * cmat;
        dp[n] = inv * rhs;
    }
    let mut v = vec![[0.0; 2]; nodes];
    let mut next = Vector2::zeros();
    for n in (0..nodes).rev() {
        let cur = if n + 1 == nodes { dp[n] } else { dp[n] - cp[n] * next };
        v[n] = [cur[0], cur[1]];
        next = cur;
    }
    v
}

/// Relative residual of `(1/2) s^2 x^2 v'' + (s^2 - delta) x v' - (rho+delta) v
/// + p (v_j - v_i) + eta_i - 2 c x` at `x`, given value and derivatives.
pub fn v_ode_residual(params: &ModelParams, eta: [f64; 2], i: Regime, x: f64, v: [f64; 3], vj: f64) -> f64 {
    let r = params.regime(i);
    let s2 = r.sigma * r.sigma;
    let terms = [
        0.5 * s2 * x * x * v[2],
        (s2 - params.delta) * x * v[1],
        -(params.rho + params.delta) * v[0],
        r.p * (vj - v[0]),
        eta[i.index()],
        -2.0 * params.c * x,
    ];
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    terms.iter().sum::<f64>().abs() / scale
}

/// Same for the value function:
/// `(1/2) s^2 x^2 V'' - delta x V' - rho V + p (V_j - V_i) + eta_i x - c x^2`.
#[allow(clippy::too_many_arguments)]
pub fn big_v_ode_residual(
    params: &ModelParams,
    eta: [f64; 2],
    i: Regime,
    x: f64,
    big_v: f64,
    v: f64,
    v1: f64,
    big_vj: f64,
) -> f64 {
    let r = params.regime(i);
    let s2 = r.sigma * r.sigma;
    let terms = [
        0.5 * s2 * x * x * v1,
        -params.delta * x * v,
        -params.rho * big_v,
        r.p * (big_vj - big_v),
        eta[i.index()] * x,
        -params.c * x * x,
    ];
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    terms.iter().sum::<f64>().abs() / scale
}
