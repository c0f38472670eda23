//! Exogenous model constants, their admissibility checks, the regime chain's
//! stationary law and the inverse-demand map.
//!
//! The price-level intercept of the inverse demand is called `varphi`
//! throughout, so that it never collides with the characteristic polynomials
//! of the stationary law.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of the two-state macroeconomic chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    One,
    Two,
}

impl Regime {
    pub const BOTH: [Regime; 2] = [Regime::One, Regime::Two];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Regime::One => 0,
            Regime::Two => 1,
        }
    }

    #[inline]
    pub fn other(self) -> Regime {
        match self {
            Regime::One => Regime::Two,
            Regime::Two => Regime::One,
        }
    }

    pub fn from_index(i: usize) -> Regime {
        if i == 0 {
            Regime::One
        } else {
            Regime::Two
        }
    }

    /// 1-based label used in file formats.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Per-regime constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    /// Production volatility.
    pub sigma: f64,
    /// Intensity of leaving this regime.
    pub p: f64,
    /// Price level (intercept of the inverse demand).
    pub varphi: f64,
    /// Inverse-demand scale.
    pub zeta: f64,
}

/// All exogenous constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub rho: f64,
    pub kappa: f64,
    pub c: f64,
    pub alpha: f64,
    pub regimes: [RegimeParams; 2],
}

/// Keys of the flat config format, in canonical order.
pub const CONFIG_KEYS: [&str; 13] = [
    "delta", "rho", "kappa", "c", "alpha", "sigma1", "sigma2", "p1", "p2", "varphi1", "varphi2",
    "zeta1", "zeta2",
];

impl ModelParams {
    /// Parameters of the trajectory / long-run average figure.
    pub fn figure1() -> Self {
        ModelParams {
            delta: 0.1,
            rho: 0.08,
            kappa: 10.0,
            c: 0.1,
            alpha: 0.5,
            regimes: [
                RegimeParams {
                    sigma: 0.2,
                    p: 0.1,
                    varphi: 10.0,
                    zeta: 1.0,
                },
                RegimeParams {
                    sigma: 0.15,
                    p: 0.2,
                    varphi: 5.0,
                    zeta: 1.0,
                },
            ],
        }
    }

    /// Symmetric configuration with `nu = (sigma, p, varphi)` in both regimes
    /// and unit demand scale.
    pub fn symmetric(base: &ModelParams, sigma: f64, p: f64, varphi: f64) -> Self {
        let r = RegimeParams {
            sigma,
            p,
            varphi,
            zeta: 1.0,
        };
        ModelParams {
            regimes: [r, r],
            ..*base
        }
    }

    #[inline]
    pub fn regime(&self, i: Regime) -> &RegimeParams {
        &self.regimes[i.index()]
    }

    #[inline]
    pub fn sigma(&self, i: Regime) -> f64 {
        self.regimes[i.index()].sigma
    }

    #[inline]
    pub fn p(&self, i: Regime) -> f64 {
        self.regimes[i.index()].p
    }

    /// Copy with the two regime labels exchanged.
    pub fn swapped(&self) -> Self {
        ModelParams {
            regimes: [self.regimes[1], self.regimes[0]],
            ..*self
        }
    }

    /// Reads a named parameter (config key).
    pub fn get(&self, key: &str) -> Option<f64> {
        let [r1, r2] = &self.regimes;
        Some(match key {
            "delta" => self.delta,
            "rho" => self.rho,
            "kappa" => self.kappa,
            "c" => self.c,
            "alpha" => self.alpha,
            "sigma1" => r1.sigma,
            "sigma2" => r2.sigma,
            "p1" => r1.p,
            "p2" => r2.p,
            "varphi1" => r1.varphi,
            "varphi2" => r2.varphi,
            "zeta1" => r1.zeta,
            "zeta2" => r2.zeta,
            _ => return None,
        })
    }

    /// Returns a copy with the named parameter replaced.
    pub fn with(&self, key: &str, value: f64) -> Result<Self> {
        let mut out = *self;
        let [r1, r2] = &mut out.regimes;
        let slot = match key {
            "delta" => &mut out.delta,
            "rho" => &mut out.rho,
            "kappa" => &mut out.kappa,
            "c" => &mut out.c,
            "alpha" => &mut out.alpha,
            "sigma1" => &mut r1.sigma,
            "sigma2" => &mut r2.sigma,
            "p1" => &mut r1.p,
            "p2" => &mut r2.p,
            "varphi1" => &mut r1.varphi,
            "varphi2" => &mut r2.varphi,
            "zeta1" => &mut r1.zeta,
            "zeta2" => &mut r2.zeta,
            other => return Err(Error::Config(format!("unknown parameter `{other}`"))),
        };
        *slot = value;
        Ok(out)
    }

    fn from_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        for key in map.keys() {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::MissingKey(k.to_string()))
        };
        Ok(ModelParams {
            delta: get("delta")?,
            rho: get("rho")?,
            kappa: get("kappa")?,
            c: get("c")?,
            alpha: get("alpha")?,
            regimes: [
                RegimeParams {
                    sigma: get("sigma1")?,
                    p: get("p1")?,
                    varphi: get("varphi1")?,
                    zeta: get("zeta1")?,
                },
                RegimeParams {
                    sigma: get("sigma2")?,
                    p: get("p2")?,
                    varphi: get("varphi2")?,
                    zeta: get("zeta2")?,
                },
            ],
        })
    }

    /// Parses either a JSON object or `key = value` lines (`:` or whitespace
    /// also accepted as separator, `#` starts a comment).
    pub fn from_config_str(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let mut map = BTreeMap::new();
        if trimmed.starts_with('{') {
            let obj: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(trimmed).map_err(|e| Error::Config(e.to_string()))?;
            for (k, v) in obj {
                let x = v
                    .as_f64()
                    .ok_or_else(|| Error::Config(format!("key `{k}` is not a number")))?;
                map.insert(k, x);
            }
        } else {
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once(['=', ':'])
                    .or_else(|| line.split_once(char::is_whitespace))
                    .ok_or_else(|| {
                        Error::Config(format!("line {}: expected `key = value`", lineno + 1))
                    })?;
                let (k, v) = (k.trim(), v.trim());
                let x: f64 = v.parse().map_err(|_| {
                    Error::Config(format!("line {}: `{v}` is not a decimal number", lineno + 1))
                })?;
                if map.insert(k.to_string(), x).is_some() {
                    return Err(Error::Config(format!("duplicate key `{k}`")));
                }
            }
        }
        Self::from_map(&map)
    }

    /// Renders the flat `key = value` form in canonical key order.
    pub fn to_config_string(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap()))
            .collect()
    }

    /// Checks every admissibility constraint.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Validates and refuses parameters that carry any error-level issue.
    pub fn checked(&self) -> Result<&Self> {
        let report = self.validate();
        if report.is_admissible() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(report))
        }
    }

    /// Stationary law of the regime chain.
    pub fn chain(&self) -> ChainLaw {
        chain_stationary(self)
    }

    /// Market price in regime `i` when aggregate production there is `q`.
    pub fn inverse_demand(&self, q: f64, i: Regime) -> Result<f64> {
        if !(q > 0.0) {
            return Err(Error::Domain {
                what: "aggregate production",
                value: q,
            });
        }
        let r = self.regime(i);
        Ok(r.varphi + r.zeta * q.powf(-self.alpha))
    }

    /// Price pair for an aggregate-production pair.
    pub fn prices(&self, q: [f64; 2]) -> Result<[f64; 2]> {
        Ok([
            self.inverse_demand(q[0], Regime::One)?,
            self.inverse_demand(q[1], Regime::Two)?,
        ])
    }
}

/// Stationary distribution of the two-state chain with exit intensities
/// `p1`, `p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainLaw {
    pub pi: [f64; 2],
}

impl ChainLaw {
    #[inline]
    pub fn get(&self, i: Regime) -> f64 {
        self.pi[i.index()]
    }
}

pub fn chain_stationary(params: &ModelParams) -> ChainLaw {
    let (p1, p2) = (params.regimes[0].p, params.regimes[1].p);
    let s = p1 + p2;
    ChainLaw {
        pi: [p2 / s, p1 / s],
    }
}

/// Constraint identifiers reported by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Constraint {
    /// A scalar that must be strictly positive (or finite) is not.
    Positivity,
    /// Demand elasticity outside (0,1).
    ElasticityRange,
    /// Switch intensity outside (0,1); the unit upper bound is specific to
    /// the nominal model statement.
    IntensityRange,
    /// rho > 2 max sigma_i^2.
    Impatience,
    /// min varphi_i > rho + delta.
    PriceLevel,
    /// rho + 2 delta > sigma_i^2, needed for the affine particular solutions.
    Integrability,
    /// varphi_i > kappa (rho + delta): a regime-i firm facing the floor price
    /// still has a positive investment threshold.
    InvestmentCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub constraint: Constraint,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        !self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn flags(&self, c: Constraint) -> bool {
        self.issues.iter().any(|i| i.constraint == c)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }

    fn push(&mut self, constraint: Constraint, severity: Severity, message: String) {
        self.issues.push(Issue {
            constraint,
            severity,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            writeln!(f, "  [{tag}] {:?}: {}", issue.constraint, issue.message)?;
        }
        Ok(())
    }
}

pub fn validate(params: &ModelParams) -> ValidationReport {
    use Severity::*;
    let mut report = ValidationReport::default();

    let scalars = [
        ("delta", params.delta),
        ("rho", params.rho),
        ("kappa", params.kappa),
        ("c", params.c),
    ];
    for (name, x) in scalars {
        if !(x > 0.0 && x.is_finite()) {
            report.push(Constraint::Positivity, Error, format!("{name} = {x} must be > 0"));
        }
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        report.push(
            Constraint::ElasticityRange,
            Error,
            format!("alpha = {} must lie in (0,1)", params.alpha),
        );
    }
    for i in Regime::BOTH {
        let r = params.regime(i);
        let n = i.label();
        for (name, x) in [("sigma", r.sigma), ("varphi", r.varphi), ("zeta", r.zeta)] {
            if !(x > 0.0 && x.is_finite()) {
                report.push(
                    Constraint::Positivity,
                    Error,
                    format!("{name}{n} = {x} must be > 0"),
                );
            }
        }
        if !(r.p > 0.0 && r.p.is_finite()) {
            report.push(
                Constraint::IntensityRange,
                Error,
                format!("p{n} = {} must be > 0", r.p),
            );
        } else if r.p >= 1.0 {
            report.push(
                Constraint::IntensityRange,
                Warning,
                format!("p{n} = {} outside the model's nominal range (0,1)", r.p),
            );
        }
    }
    if !report.is_admissible() {
        return report;
    }

    let s2max = params
        .regimes
        .iter()
        .map(|r| r.sigma * r.sigma)
        .fold(0.0, f64::max);
    if !(params.rho > 2.0 * s2max) {
        let how = if params.rho == 2.0 * s2max {
            "holds with equality"
        } else {
            "is violated"
        };
        report.push(
            Constraint::Impatience,
            Warning,
            format!(
                "rho > 2 max sigma_i^2 {how} (rho = {}, 2 max sigma^2 = {})",
                params.rho,
                2.0 * s2max
            ),
        );
    }
    let vmin = params.regimes[0].varphi.min(params.regimes[1].varphi);
    if !(vmin > params.rho + params.delta) {
        report.push(
            Constraint::PriceLevel,
            Error,
            format!(
                "min varphi_i = {vmin} must exceed rho + delta = {}",
                params.rho + params.delta
            ),
        );
    }
    for i in Regime::BOTH {
        let r = params.regime(i);
        if !(params.rho + 2.0 * params.delta > r.sigma * r.sigma) {
            report.push(
                Constraint::Integrability,
                Error,
                format!(
                    "rho + 2 delta = {} must exceed sigma{}^2 = {}",
                    params.rho + 2.0 * params.delta,
                    i.label(),
                    r.sigma * r.sigma
                ),
            );
        }
        let floor = params.kappa * (params.rho + params.delta);
        if !(r.varphi > floor) {
            report.push(
                Constraint::InvestmentCost,
                Warning,
                format!(
                    "varphi{} = {} does not exceed kappa (rho + delta) = {floor}",
                    i.label(),
                    r.varphi
                ),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn easy() -> ModelParams {
        let r = RegimeParams {
            sigma: 0.1,
            p: 0.3,
            varphi: 2.0,
            zeta: 1.0,
        };
        ModelParams {
            delta: 0.1,
            rho: 1.0,
            kappa: 1.0,
            c: 0.1,
            alpha: 0.5,
            regimes: [r, r],
        }
    }

    #[test]
    fn figure_parameters_sit_on_the_impatience_boundary() {
        let report = ModelParams::figure1().validate();
        assert!(report.is_admissible());
        assert!(report.flags(Constraint::Impatience));
        assert!(report.warnings().count() == 1, "{report}");
    }

    #[test]
    fn comfortable_parameters_pass_everything() {
        assert!(easy().validate().is_clean());
    }

    #[test]
    fn price_level_boundary_is_flagged() {
        let mut p = easy();
        p.regimes[0].varphi = p.rho + p.delta;
        let report = p.validate();
        assert!(report.flags(Constraint::PriceLevel));
        assert!(!report.is_admissible());
        assert!(p.checked().is_err());
    }

    #[test]
    fn validate_is_idempotent() {
        let p = ModelParams::figure1();
        assert_eq!(p.validate(), p.validate());
    }

    #[test]
    fn intensity_of_one_is_only_a_warning() {
        let p = ModelParams::figure1().with("p1", 1.0).unwrap();
        let report = p.validate();
        assert!(report.flags(Constraint::IntensityRange));
        assert!(report.is_admissible());
        let bad = ModelParams::figure1().with("p2", 0.0).unwrap();
        assert!(!bad.validate().is_admissible());
    }

    #[test]
    fn inverse_demand_examples() {
        let mut p = easy();
        p.regimes[0].varphi = 10.0;
        p.regimes[1].varphi = 5.0;
        assert!((p.inverse_demand(4.0, Regime::One).unwrap() - 10.5).abs() < 1e-15);
        assert!((p.inverse_demand(1.0, Regime::Two).unwrap() - 6.0).abs() < 1e-15);
        assert!(p.inverse_demand(0.0, Regime::One).is_err());
        assert!(p.inverse_demand(-1.0, Regime::One).is_err());
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let eta = p.inverse_demand(2f64.powi(k), Regime::One).unwrap();
            assert!(eta < last && eta > 10.0);
            last = eta;
        }
        assert!(last - 10.0 < 1e-5);
    }

    #[test]
    fn chain_law_examples() {
        let pi = ModelParams::figure1().chain().pi;
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-15);
        let pi = easy().chain().pi;
        assert_eq!(pi, [0.5, 0.5]);
        // pi P = 0
        let p = ModelParams::figure1();
        let (p1, p2) = (p.regimes[0].p, p.regimes[1].p);
        let pi = p.chain().pi;
        assert!((-pi[0] * p1 + pi[1] * p2).abs() < 1e-15);
        assert!((pi[0] * p1 - pi[1] * p2).abs() < 1e-15);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let p = ModelParams::figure1();
        let text = p.to_config_string();
        assert_eq!(ModelParams::from_config_str(&text).unwrap(), p);
        let json = serde_json::to_string(
            &CONFIG_KEYS
                .iter()
                .map(|k| (k.to_string(), p.get(k).unwrap()))
                .collect::<BTreeMap<_, _>>(),
        )
        .unwrap();
        assert_eq!(ModelParams::from_config_str(&json).unwrap(), p);

        let missing: String = text.lines().filter(|l| !l.starts_with("zeta2")).map(|l| format!("{l}\n")).collect();
        match ModelParams::from_config_str(&missing) {
            Err(Error::MissingKey(k)) => assert_eq!(k, "zeta2"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ModelParams::from_config_str("delta = abc").is_err());
        assert!(ModelParams::from_config_str(&format!("{text}bogus = 1\n")).is_err());
    }

    #[test]
    fn swapping_twice_is_identity() {
        let p = ModelParams::figure1();
        assert_eq!(p.swapped().swapped(), p);
        assert_eq!(p.swapped().regimes[0], p.regimes[1]);
    }
}
