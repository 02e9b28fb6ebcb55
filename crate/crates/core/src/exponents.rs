//! Exponent algebra for the system `-Δu = v^p u^r`, `-Δv = u^q v^s`.
//!
//! Everything in this module is a closed-form function of the tuple
//! `(n, p, q, r, s)`: the scaling pair `(a, b)`, the regime classification by
//! `q + s` against `n/(n-2)`, the decay profiles of `u` and `v`, and the
//! threshold and asymptotic constants attached to the subcritical regime.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for the regime comparison `q + s` vs `n/(n-2)`.
/// Exact ties (within this tolerance) classify as `Critical`.
pub const REGIME_TOL: f64 = 1e-12;

/// Tolerance for the critical-condition check `1/a + 1/b = (n-2)/n`.
pub const CRITICAL_CONDITION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("dimension must satisfy n >= 3, got n = {0}")]
    DimensionTooSmall(u32),
    #[error("exponent {name} must satisfy {name} >= 1, got {value}")]
    ExponentBelowOne { name: &'static str, value: f64 },
    #[error("exponent {name} must satisfy {name} >= 0, got {value}")]
    ExponentNegative { name: &'static str, value: f64 },
    #[error("ordering p - s >= q - r violated: p - s = {p_minus_s}, q - r = {q_minus_r}")]
    OrderingViolated { p_minus_s: f64, q_minus_r: f64 },
    #[error("lower bound q - r > -1 violated: q - r = {q_minus_r}")]
    LowerBoundViolated { q_minus_r: f64 },
    #[error("exponent {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("operation requires the subcritical regime (q + s < n/(n-2)), got {0:?}")]
    NotSubcritical(Regime),
    #[error("constant degenerates: q + s = n/(n-2) exactly")]
    DegenerateAtCritical,
    #[error("operation requires an admissible report (a, b > n/(n-2)); a = {a}, b = {b}")]
    Inadmissible { a: f64, b: f64 },
}

/// The exponent tuple `(n, p, q, r, s)`, validated against the standing
/// hypotheses `n >= 3`, `p, q >= 1`, `r, s >= 0`, `p - s >= q - r > -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl SystemParams {
    /// Validates the hypotheses and returns the tuple. The error names the
    /// violated inequality.
    pub fn new(n: u32, p: f64, q: f64, r: f64, s: f64) -> Result<Self, ParamError> {
        for (name, value) in [("p", p), ("q", q), ("r", r), ("s", s)] {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { name, value });
            }
        }
        if n < 3 {
            return Err(ParamError::DimensionTooSmall(n));
        }
        if p < 1.0 {
            return Err(ParamError::ExponentBelowOne { name: "p", value: p });
        }
        if q < 1.0 {
            return Err(ParamError::ExponentBelowOne { name: "q", value: q });
        }
        if r < 0.0 {
            return Err(ParamError::ExponentNegative { name: "r", value: r });
        }
        if s < 0.0 {
            return Err(ParamError::ExponentNegative { name: "s", value: s });
        }
        let p_minus_s = p - s;
        let q_minus_r = q - r;
        if q_minus_r <= -1.0 {
            return Err(ParamError::LowerBoundViolated { q_minus_r });
        }
        if p_minus_s < q_minus_r {
            return Err(ParamError::OrderingViolated { p_minus_s, q_minus_r });
        }
        Ok(Self { n, p, q, r, s })
    }

    /// Re-validates a deserialized tuple.
    pub fn validate(&self) -> Result<(), ParamError> {
        Self::new(self.n, self.p, self.q, self.r, self.s).map(|_| ())
    }

    pub fn dim(&self) -> f64 {
        f64::from(self.n)
    }

    /// The Serrin exponent `n/(n-2)` that separates the regimes.
    pub fn serrin(&self) -> f64 {
        self.dim() / (self.dim() - 2.0)
    }

    /// The symmetric counterpart `(n, q, p, s, r)`: swapping the two
    /// equations swaps `(p, r) <-> (q, s)` and `a <-> b`.
    pub fn swapped(&self) -> Result<Self, ParamError> {
        Self::new(self.n, self.q, self.p, self.s, self.r)
    }
}

/// Classification of `q + s` against `n/(n-2)`; selects the decay profile
/// of `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Supercritical => write!(f, "Supercritical"),
            Regime::Critical => write!(f, "Critical"),
            Regime::Subcritical => write!(f, "Subcritical"),
        }
    }
}

/// A decay model `ρ^(-exponent) * (ln ρ)^(log_power)` up to an amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub exponent: f64,
    pub log_power: f64,
}

/// Derived scaling data for a parameter tuple: the Lebesgue pair `(a, b)`,
/// the admissibility flag `a, b > n/(n-2)`, the regime, the decay profiles,
/// and (in the subcritical regime) the threshold constant and the asymptotic
/// product constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub params: SystemParams,
    pub a: f64,
    pub b: f64,
    pub admissible: bool,
    pub regime: Regime,
    pub u_profile: DecayProfile,
    pub v_profile: DecayProfile,
    /// Threshold constant for the subcritical regime; `+inf` when `s = 0`.
    /// `None` outside the subcritical regime.
    pub c_nqs: Option<f64>,
    /// The asymptotic product constant `((n-2)q - 2)(n - (n-2)(q+s))/(1-s)^2`;
    /// `None` outside the subcritical regime.
    pub asymptotic_constant: Option<f64>,
}

/// Derives the scaling pair, regime, and profiles from a validated tuple.
///
/// Inadmissible tuples (`a` or `b` at or below `n/(n-2)`) still produce the
/// full report for diagnostics; downstream operations refuse them.
pub fn derive_scaling(params: &SystemParams) -> ScalingReport {
    let n = params.dim();
    let (p, q, r, s) = (params.p, params.q, params.r, params.s);
    let det = p * q - (r - 1.0) * (s - 1.0);
    let a = n * det / (2.0 * (p - s + 1.0));
    let b = n * det / (2.0 * (q - r + 1.0));
    let serrin = params.serrin();
    let admissible = a > serrin && b > serrin;

    let regime = classify_regime(params);
    let u_profile = DecayProfile {
        exponent: n - 2.0,
        log_power: 0.0,
    };
    let v_profile = match regime {
        Regime::Supercritical => DecayProfile {
            exponent: n - 2.0,
            log_power: 0.0,
        },
        Regime::Critical => DecayProfile {
            exponent: n - 2.0,
            log_power: 1.0 / (1.0 - s),
        },
        Regime::Subcritical => DecayProfile {
            exponent: ((n - 2.0) * q - 2.0) / (1.0 - s),
            log_power: 0.0,
        },
    };

    let (c_nqs, asymptotic_constant) = if regime == Regime::Subcritical {
        (
            threshold_constant(params).ok(),
            asymptotic_product_constant(params).ok(),
        )
    } else {
        (None, None)
    };

    ScalingReport {
        params: *params,
        a,
        b,
        admissible,
        regime,
        u_profile,
        v_profile,
        c_nqs,
        asymptotic_constant,
    }
}

/// Regime of `q + s` against `n/(n-2)` with ties (within [`REGIME_TOL`])
/// classified as `Critical`.
pub fn classify_regime(params: &SystemParams) -> Regime {
    let gap = params.q + params.s - params.serrin();
    if gap.abs() <= REGIME_TOL {
        Regime::Critical
    } else if gap > 0.0 {
        Regime::Supercritical
    } else {
        Regime::Subcritical
    }
}

/// Residuals of the two scale identities
/// `p/b + r/a = 2/n + 1/a` and `q/a + s/b = 2/n + 1/b`.
pub fn check_scale_identities(report: &ScalingReport) -> (f64, f64) {
    let p = &report.params;
    let n = p.dim();
    let first = (p.p / report.b + p.r / report.a - 2.0 / n - 1.0 / report.a).abs();
    let second = (p.q / report.a + p.s / report.b - 2.0 / n - 1.0 / report.b).abs();
    (first, second)
}

/// Whether `1/a + 1/b = (n-2)/n` within [`CRITICAL_CONDITION_TOL`], together
/// with the signed residual `1/a + 1/b - (n-2)/n`.
pub fn check_critical_condition(report: &ScalingReport) -> (bool, f64) {
    let n = report.params.dim();
    let residual = 1.0 / report.a + 1.0 / report.b - (n - 2.0) / n;
    (residual.abs() <= CRITICAL_CONDITION_TOL, residual)
}

/// The threshold constant of the subcritical regime:
/// `+inf` if `s = 0`; `(n-2)^2/(4s)` if `2q + s >= (n+2)/(n-2)`;
/// `((n-2)q - 2)(n - (n-2)(q+s))/(s(1-s)^2)` otherwise.
pub fn threshold_constant(params: &SystemParams) -> Result<f64, RegimeError> {
    let regime = classify_regime(params);
    if regime != Regime::Subcritical {
        return Err(RegimeError::NotSubcritical(regime));
    }
    let n = params.dim();
    let (q, s) = (params.q, params.s);
    if s == 0.0 {
        return Ok(f64::INFINITY);
    }
    if 2.0 * q + s >= (n + 2.0) / (n - 2.0) {
        Ok((n - 2.0) * (n - 2.0) / (4.0 * s))
    } else {
        Ok(((n - 2.0) * q - 2.0) * (n - (n - 2.0) * (q + s)) / (s * (1.0 - s) * (1.0 - s)))
    }
}

/// The asymptotic product constant
/// `((n-2)q - 2)(n - (n-2)(q+s))/(1-s)^2` of the subcritical regime.
///
/// Strictly smaller than [`threshold_constant`] whenever `s > 0`; degenerates
/// to zero on the regime boundary, which is rejected.
pub fn asymptotic_product_constant(params: &SystemParams) -> Result<f64, RegimeError> {
    let regime = classify_regime(params);
    if regime != Regime::Subcritical {
        return Err(RegimeError::NotSubcritical(regime));
    }
    let n = params.dim();
    let (q, s) = (params.q, params.s);
    let gap = n - (n - 2.0) * (q + s);
    if gap.abs() <= (n - 2.0) * REGIME_TOL {
        return Err(RegimeError::DegenerateAtCritical);
    }
    let value = ((n - 2.0) * q - 2.0) * gap / ((1.0 - s) * (1.0 - s));
    // Dominance by the threshold constant holds under the standing
    // hypotheses, where subcriticality forces s < 1 and q > 2/(n-2);
    // inadmissible tuples can reach this formula with either factor
    // negative.
    if s > 0.0 && s < 1.0 && value > 0.0 {
        debug_assert!(
            value < threshold_constant(params).unwrap_or(f64::INFINITY),
            "asymptotic constant must stay below the threshold constant"
        );
    }
    Ok(value)
}

/// Which nonnegativity constraints the hypotheses impose on `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignRequirements {
    pub u_nonnegative: bool,
    pub v_nonnegative: bool,
}

/// `u >= 0` is required if `r = 0` (continuity of the nonlinearity) or if
/// `r < 1` and `s < 1` (the sublinear comparison argument); `v >= 0` is
/// required if `s = 0`.
pub fn sign_requirements(params: &SystemParams) -> SignRequirements {
    SignRequirements {
        u_nonnegative: params.r == 0.0 || (params.r < 1.0 && params.s < 1.0),
        v_nonnegative: params.s == 0.0,
    }
}

/// Refuses inadmissible reports; used by downstream operations.
pub fn require_admissible(report: &ScalingReport) -> Result<(), RegimeError> {
    if report.admissible {
        Ok(())
    } else {
        Err(RegimeError::Inadmissible {
            a: report.a,
            b: report.b,
        })
    }
}
