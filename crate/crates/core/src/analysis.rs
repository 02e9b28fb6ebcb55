//! Asymptotic and integral diagnostics: decay-rate fits, weak-Lebesgue
//! quasinorms, and the pointwise/integral checks the decay theory predicts
//! for solved states.

use serde::Serialize;
use thiserror::Error;

use crate::exponents::{asymptotic_product_constant, threshold_constant, Regime, RegimeError};
use crate::field::{OriginModel, RadialField};
use crate::gammafn::sphere_surface_area;
use crate::greens::{inner_prefix, GreensError};
use crate::solver::GroundState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("|f| is not nonincreasing at node {index}")]
    NotMonotone { index: usize },
    #[error("non-positive sample {value} at node {index} inside the fit window")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("fit window [{lo}, {hi}] is invalid: {reason}")]
    BadWindow { lo: f64, hi: f64, reason: String },
    #[error("need at least {min} points, got {actual}")]
    TooFewPoints { min: usize, actual: usize },
    #[error("decay fit unreliable: rms residual {rms} exceeds {limit}")]
    UnreliableFit { rms: f64, limit: f64 },
    #[error("operation requires the {expected:?} regime, state is {actual:?}")]
    WrongRegime { expected: Regime, actual: Regime },
    #[error("comparison inequality requires p >= s, got p = {p}, s = {s}")]
    ComparisonHypothesisFails { p: f64, s: f64 },
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Greens(#[from] GreensError),
}

/// Fitted decay model `f ≈ amplitude · ρ^(-exponent) · (ln ρ)^(log_power)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub log_power: f64,
    pub amplitude: f64,
    pub fit_window: (f64, f64),
    /// Root-mean-square residual of the fit in log space.
    pub rms_residual: f64,
}

/// Default fit window: fractions 0.5 and 0.9 of the grid span in log
/// placement, clear of both the preasymptotic region and the tail model.
pub fn default_fit_window(field: &RadialField) -> (f64, f64) {
    let lo = field.grid().rho_min();
    let hi = field.grid().rho_max();
    let span = (hi / lo).ln();
    (lo * (0.5 * span).exp(), lo * (0.9 * span).exp())
}

/// Least-squares fit of `ln f` against `ln A - m ln ρ (+ κ ln ln ρ)` over
/// the window; `κ` is fixed to zero unless `expected_log` (joint fitting of
/// the log power is reserved for regimes that predict it).
pub fn estimate_decay(
    field: &RadialField,
    expected_log: bool,
    window: Option<(f64, f64)>,
) -> Result<DecayFit, AnalysisError> {
    let (lo, hi) = window.unwrap_or_else(|| default_fit_window(field));
    if !(lo > 0.0 && hi > lo) {
        return Err(AnalysisError::BadWindow {
            lo,
            hi,
            reason: "window must satisfy 0 < lo < hi".into(),
        });
    }
    if expected_log && lo <= 1.0 {
        return Err(AnalysisError::BadWindow {
            lo,
            hi,
            reason: "log-corrected fits need ln ln ρ, so the window must sit above ρ = 1".into(),
        });
    }

    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (i, (&rho, &value)) in field.grid().nodes().iter().zip(field.values()).enumerate() {
        if rho < lo || rho > hi {
            continue;
        }
        if value <= 0.0 {
            return Err(AnalysisError::NonPositiveSample { index: i, value });
        }
        ts.push(rho.ln());
        ys.push(value.ln());
    }
    if ts.len() < 4 {
        return Err(AnalysisError::TooFewPoints {
            min: 4,
            actual: ts.len(),
        });
    }

    // Regressors: 1, -ln ρ, and optionally ln ln ρ.
    let cols = if expected_log { 3 } else { 2 };
    let row = |t: f64| -> [f64; 3] { [1.0, -t, if expected_log { t.ln() } else { 0.0 }] };
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (&t, &y) in ts.iter().zip(&ys) {
        let r = row(t);
        for i in 0..cols {
            for j in 0..cols {
                ata[i][j] += r[i] * r[j];
            }
            aty[i] += r[i] * y;
        }
    }
    let coef = solve_small(&mut ata, &mut aty, cols).ok_or(AnalysisError::BadWindow {
        lo,
        hi,
        reason: "normal equations are singular on this window".into(),
    })?;

    let mut ss = 0.0;
    for (&t, &y) in ts.iter().zip(&ys) {
        let r = row(t);
        let fitted = (0..cols).map(|i| coef[i] * r[i]).sum::<f64>();
        ss += (y - fitted) * (y - fitted);
    }
    Ok(DecayFit {
        exponent: coef[1],
        log_power: if expected_log { coef[2] } else { 0.0 },
        amplitude: coef[0].exp(),
        fit_window: (lo, hi),
        rms_residual: (ss / ts.len() as f64).sqrt(),
    })
}

/// Amplitude of `f` against a pinned decay profile: the window mean of
/// `ln f + m ln ρ - κ ln ln ρ`, exponentiated.
///
/// Extracting amplitudes against the profile exponent (rather than a freely
/// fitted one) is what makes the asymptotic product transform with exactly
/// cancelling powers under the scale invariance.
pub fn profile_amplitude(
    field: &RadialField,
    exponent: f64,
    log_power: f64,
    window: Option<(f64, f64)>,
) -> Result<f64, AnalysisError> {
    let (lo, hi) = window.unwrap_or_else(|| default_fit_window(field));
    if !(lo > 0.0 && hi > lo) || (log_power != 0.0 && lo <= 1.0) {
        return Err(AnalysisError::BadWindow {
            lo,
            hi,
            reason: "need 0 < lo < hi (and lo > 1 for log-corrected profiles)".into(),
        });
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for (i, (&rho, &value)) in field.grid().nodes().iter().zip(field.values()).enumerate() {
        if rho < lo || rho > hi {
            continue;
        }
        if value <= 0.0 {
            return Err(AnalysisError::NonPositiveSample { index: i, value });
        }
        let mut term = value.ln() + exponent * rho.ln();
        if log_power != 0.0 {
            term -= log_power * rho.ln().ln();
        }
        acc += term;
        count += 1;
    }
    if count < 4 {
        return Err(AnalysisError::TooFewPoints {
            min: 4,
            actual: count,
        });
    }
    Ok((acc / count as f64).exp())
}

/// Gaussian elimination with partial pivoting on a `cols x cols` system.
fn solve_small(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], cols: usize) -> Option<[f64; 3]> {
    for k in 0..cols {
        let pivot = (k..cols).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[pivot][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, pivot);
        b.swap(k, pivot);
        for i in k + 1..cols {
            let f = a[i][k] / a[k][k];
            for j in k..cols {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0f64; 3];
    for k in (0..cols).rev() {
        let mut acc = b[k];
        for j in k + 1..cols {
            acc -= a[k][j] * x[j];
        }
        x[k] = acc / a[k][k];
    }
    Some(x)
}

fn check_nonincreasing(field: &RadialField) -> Result<(), AnalysisError> {
    let v = field.values();
    for i in 1..v.len() {
        if v[i].abs() > v[i - 1].abs() * (1.0 + 1e-12) + 1e-300 {
            return Err(AnalysisError::NotMonotone { index: i });
        }
    }
    Ok(())
}

/// Weak-`L^σ` quasinorm `sup_h h · meas{|f| > h}^(1/σ)` of a radial
/// nonincreasing field. The supremum is evaluated at every node level plus
/// the closed-form suprema of the origin and tail models; it is `+∞` when
/// the tail (or an origin singularity) is too fat for the index.
pub fn lorentz_weak_quasinorm(field: &RadialField, sigma: f64) -> Result<f64, AnalysisError> {
    assert!(sigma > 1.0, "weak quasinorm needs sigma > 1");
    check_nonincreasing(field)?;
    let n = f64::from(field.grid().dim());
    let ball_coeff = sphere_surface_area(field.grid().dim()) / n;
    let nodes = field.grid().nodes();
    let values = field.values();

    let mut best: f64 = 0.0;
    for (&rho, &value) in nodes.iter().zip(values) {
        if value.abs() > 0.0 {
            best = best.max(value.abs() * (ball_coeff * rho.powf(n)).powf(1.0 / sigma));
        }
    }

    // Origin region: level sets above f(ρ_1) live inside the first ball,
    // bounded by f(0)·vol(B_ρ1)^(1/σ) for a finite origin; a power
    // singularity has an exact in-model supremum.
    match field.origin() {
        OriginModel::Quadratic { value } => {
            best = best.max(value.abs() * (ball_coeff * nodes[0].powf(n)).powf(1.0 / sigma));
        }
        OriginModel::SingularPower => {
            let g = field.origin_power_exponent();
            if g * sigma > n {
                return Ok(f64::INFINITY);
            }
            // g·σ <= n: the origin-region supremum is attained at the first
            // node level, already a candidate.
        }
    }

    // Tail: ln G(τ) = ln A + (n/σ - γ)τ + κ ln τ + ln(vol coeff)/σ.
    let tail = field.tail();
    if tail.amplitude != 0.0 {
        let slope = n / sigma - tail.exponent;
        if slope > 1e-12 || (slope.abs() <= 1e-12 && tail.log_power > 0.0) {
            return Ok(f64::INFINITY);
        }
        let tau_n = field.grid().rho_max().ln();
        let tau_opt = if slope.abs() <= 1e-12 || tail.log_power == 0.0 {
            tau_n
        } else {
            (tail.log_power / -slope).max(tau_n)
        };
        let ln_g = tail.amplitude.abs().ln()
            + slope.min(0.0) * tau_opt
            + if tail.log_power == 0.0 {
                0.0
            } else {
                tail.log_power * tau_opt.ln()
            }
            + ball_coeff.ln() / sigma;
        best = best.max(ln_g.exp());
    }
    Ok(best)
}

/// `sup_B |B|^(-1/σ') ∫_B |f| dx` over centered balls, computed with the
/// same piecewise power-law quadrature as the Newton potential. For radial
/// nonincreasing `f` this is the dual characterization of the weak
/// quasinorm up to the factor `σ'`.
pub fn dual_average_norm(field: &RadialField, sigma: f64) -> Result<f64, AnalysisError> {
    assert!(sigma > 1.0, "dual norm needs sigma > 1");
    check_nonincreasing(field)?;
    let n = f64::from(field.grid().dim());
    let omega = sphere_surface_area(field.grid().dim());
    let ball_coeff = omega / n;
    let sigma_conj = sigma / (sigma - 1.0);

    let masses = inner_prefix(field)?;
    let nodes = field.grid().nodes();
    let mut best: f64 = 0.0;
    for (&rho, &mass) in nodes.iter().zip(&masses) {
        let d = (ball_coeff * rho.powf(n)).powf(-1.0 / sigma_conj) * omega * mass;
        best = best.max(d);
    }

    let tail = field.tail();
    if tail.amplitude != 0.0 {
        let gamma = tail.exponent;
        let kappa = tail.log_power;
        let growth = n / sigma - gamma;
        if growth > 1e-12 || (growth.abs() <= 1e-12 && kappa > 0.0) {
            return Ok(f64::INFINITY);
        }
        if growth.abs() <= 1e-12 {
            // Borderline pure power: D(R) tends to its limit from below.
            let limit =
                omega * tail.amplitude.abs() / (n - gamma) * ball_coeff.powf(-1.0 / sigma_conj);
            best = best.max(limit);
        } else if gamma < n {
            // The supremum may sit beyond the grid; walk the tail model.
            let mut mass = masses[masses.len() - 1];
            let mut tau = field.grid().rho_max().ln();
            let step = 0.05f64;
            let mut declines = 0u32;
            for _ in 0..40_000 {
                let r0 = tau.exp();
                let r1 = (tau + step).exp();
                mass += tail.amplitude.abs() * seg_power_log_integral(r0, r1, n - 1.0 - gamma, kappa);
                tau += step;
                if !mass.is_finite() {
                    return Ok(f64::INFINITY);
                }
                let d = (ball_coeff.ln() + n * tau) * (-1.0 / sigma_conj) + (omega * mass).ln();
                let d = d.exp();
                if d > best {
                    best = d;
                    declines = 0;
                } else {
                    declines += 1;
                    if declines > 200 {
                        break;
                    }
                }
            }
        }
        // gamma >= n: finite mass, D(R) decays beyond the grid.
    }
    Ok(best)
}

/// `∫_(r0)^(r1) t^c (ln t)^κ dt` for one short tail segment (`r0 > 1`) by
/// Simpson in `τ = ln t`; adequate at the walk's step size.
fn seg_power_log_integral(r0: f64, r1: f64, c: f64, kappa: f64) -> f64 {
    let f = |tau: f64| {
        ((c + 1.0) * tau).exp() * if kappa == 0.0 { 1.0 } else { tau.powf(kappa) }
    };
    let (a, b) = (r0.ln(), r1.ln());
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

/// Weak-space membership indices and quasinorms of a solved state: `u` at
/// `n/(n-2)`, and `v` at the regime-dependent index (a ladder descending to
/// `n/(n-2)` in the critical case).
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub u_sigma: f64,
    pub u_norm: f64,
    pub v_norms: Vec<(f64, f64)>,
    pub all_finite: bool,
}

pub fn membership_report(state: &GroundState) -> Result<MembershipReport, AnalysisError> {
    let params = &state.params;
    let n = params.dim();
    let serrin = params.serrin();
    let u_norm = lorentz_weak_quasinorm(&state.u, serrin)?;

    let v_sigmas: Vec<f64> = match state.scaling.regime {
        Regime::Supercritical => vec![serrin],
        Regime::Subcritical => vec![n * (1.0 - params.s) / ((n - 2.0) * params.q - 2.0)],
        Regime::Critical => (0..=6).map(|k| serrin + 0.5f64.powi(k)).collect(),
    };
    let mut v_norms = Vec::with_capacity(v_sigmas.len());
    for sigma in v_sigmas {
        v_norms.push((sigma, lorentz_weak_quasinorm(&state.v, sigma)?));
    }
    let all_finite = u_norm.is_finite() && v_norms.iter().all(|(_, x)| x.is_finite());
    Ok(MembershipReport {
        u_sigma: serrin,
        u_norm,
        v_norms,
        all_finite,
    })
}

/// Fitted blow-up of `‖v‖_(σ,∞)` as `σ` descends to `n/(n-2)` in the
/// critical regime: slope of `ln ‖v‖` against `-ln((n-2)σ - n)` (target
/// `1/(1-s)`) and the empirical prefactor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlowupFit {
    pub slope: f64,
    pub prefactor: f64,
}

pub fn critical_blowup_fit(
    state: &GroundState,
    ladder: Option<&[f64]>,
) -> Result<BlowupFit, AnalysisError> {
    if state.scaling.regime != Regime::Critical {
        return Err(AnalysisError::WrongRegime {
            expected: Regime::Critical,
            actual: state.scaling.regime,
        });
    }
    let n = state.params.dim();
    let serrin = state.params.serrin();
    let default: Vec<f64> = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.01]
        .iter()
        .map(|o| serrin + o)
        .collect();
    let ladder = ladder.map(|l| l.to_vec()).unwrap_or(default);
    if ladder.len() < 4 {
        return Err(AnalysisError::TooFewPoints {
            min: 4,
            actual: ladder.len(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &sigma in &ladder {
        let gap = (n - 2.0) * sigma - n;
        if gap <= 0.0 {
            return Err(AnalysisError::BadWindow {
                lo: sigma,
                hi: sigma,
                reason: "ladder index must exceed n/(n-2)".into(),
            });
        }
        let norm = lorentz_weak_quasinorm(&state.v, sigma)?;
        if !norm.is_finite() || norm <= 0.0 {
            return Err(AnalysisError::UnreliableFit {
                rms: f64::INFINITY,
                limit: 0.0,
            });
        }
        xs.push(-gap.ln());
        ys.push(norm.ln());
    }
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    Ok(BlowupFit {
        slope,
        prefactor: (my - slope * mx).exp(),
    })
}

/// Maximum signed violation of the pointwise comparison inequality
/// `v^(p-s+1)/(p-s+1) <= u^(q-r+1)/(q-r+1)` over the grid nodes. Negative
/// values mean the inequality holds with margin.
pub fn check_comparison(state: &GroundState) -> Result<f64, AnalysisError> {
    let params = &state.params;
    if params.p < params.s {
        return Err(AnalysisError::ComparisonHypothesisFails {
            p: params.p,
            s: params.s,
        });
    }
    let eu = params.q - params.r + 1.0;
    let ev = params.p - params.s + 1.0;
    let mut worst = f64::NEG_INFINITY;
    for (&u, &v) in state.u.values().iter().zip(state.v.values()) {
        let violation = v.abs().powf(ev) / ev - u.max(0.0).powf(eu) / eu;
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// Envelope ratios against the theoretical decay profiles: suprema and
/// infima over nodes of `u(1 + ρ^(n-2))` and `v(1 + h(ρ))` with `h` the
/// regime profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeReport {
    pub sup_ratio_u: f64,
    pub inf_ratio_u: f64,
    pub sup_ratio_v: f64,
    pub inf_ratio_v: f64,
}

pub fn envelope_report(state: &GroundState) -> Result<EnvelopeReport, AnalysisError> {
    let n = state.params.dim();
    let s = state.params.s;
    let regime = state.scaling.regime;
    let m_v = state.scaling.v_profile.exponent;
    let h = |rho: f64| -> f64 {
        match regime {
            Regime::Supercritical => rho.powf(n - 2.0),
            Regime::Critical => rho.powf(n - 2.0) * rho.ln_1p().powf(-1.0 / (1.0 - s)),
            Regime::Subcritical => rho.powf(m_v),
        }
    };
    let mut report = EnvelopeReport {
        sup_ratio_u: f64::NEG_INFINITY,
        inf_ratio_u: f64::INFINITY,
        sup_ratio_v: f64::NEG_INFINITY,
        inf_ratio_v: f64::INFINITY,
    };
    for ((&rho, &u), &v) in state
        .u
        .grid()
        .nodes()
        .iter()
        .zip(state.u.values())
        .zip(state.v.values())
    {
        let ru = u.abs() * (1.0 + rho.powf(n - 2.0));
        let rv = v.abs() * (1.0 + h(rho));
        report.sup_ratio_u = report.sup_ratio_u.max(ru);
        report.inf_ratio_u = report.inf_ratio_u.min(ru);
        report.sup_ratio_v = report.sup_ratio_v.max(rv);
        report.inf_ratio_v = report.inf_ratio_v.min(rv);
    }
    Ok(report)
}

/// Measured vs predicted asymptotic product `ℓ_u^q ℓ_v^(s-1)` in the
/// subcritical regime, plus the threshold-hypothesis check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticProductCheck {
    /// Tail amplitude of `u` against the `ρ^(2-n)` profile.
    pub ell_u: f64,
    /// Tail amplitude of `v` against its subcritical profile.
    pub ell_v: f64,
    pub measured: f64,
    pub predicted: f64,
    pub rel_error: f64,
    /// Whether the measured product sits below the threshold constant (the
    /// symmetry hypothesis); trivially true when the threshold is infinite.
    pub below_threshold: bool,
    pub u_fit: DecayFit,
    pub v_fit: DecayFit,
}

/// Maximum rms log-residual accepted from the two decay fits.
pub const PRODUCT_FIT_RMS_LIMIT: f64 = 0.05;

/// Measures `ℓ_u^q ℓ_v^(s-1)` on a solved subcritical state.
///
/// Free decay fits gate the reliability (rms residual and the match of the
/// fitted exponents); the amplitudes entering the product are extracted
/// against the pinned profile exponents so the product is exactly
/// scale-covariant.
pub fn asymptotic_product_check(
    state: &GroundState,
    window: Option<(f64, f64)>,
) -> Result<AsymptoticProductCheck, AnalysisError> {
    if state.scaling.regime != Regime::Subcritical {
        return Err(AnalysisError::WrongRegime {
            expected: Regime::Subcritical,
            actual: state.scaling.regime,
        });
    }
    let u_fit = estimate_decay(&state.u, false, window)?;
    let v_fit = estimate_decay(&state.v, false, window)?;
    for fit in [&u_fit, &v_fit] {
        if fit.rms_residual > PRODUCT_FIT_RMS_LIMIT {
            return Err(AnalysisError::UnreliableFit {
                rms: fit.rms_residual,
                limit: PRODUCT_FIT_RMS_LIMIT,
            });
        }
    }
    let params = &state.params;
    let ell_u = profile_amplitude(&state.u, state.scaling.u_profile.exponent, 0.0, window)?;
    let ell_v = profile_amplitude(&state.v, state.scaling.v_profile.exponent, 0.0, window)?;
    let measured = ell_u.powf(params.q) * ell_v.powf(params.s - 1.0);
    let predicted = asymptotic_product_constant(params)?;
    let threshold = threshold_constant(params)?;
    Ok(AsymptoticProductCheck {
        ell_u,
        ell_v,
        measured,
        predicted,
        rel_error: (measured - predicted).abs() / predicted.abs(),
        below_threshold: measured < threshold,
        u_fit,
        v_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::derive_scaling;
    use crate::field::{RadialGrid, TailModel};
    use crate::solver::{Residuals, SolveDiagnostics, SolveMethod};
    use crate::SystemParams;

    fn field_from(
        n: u32,
        f: impl Fn(f64) -> f64,
        origin: OriginModel,
        tail: TailModel,
    ) -> RadialField {
        RadialField::sample(RadialGrid::standard(n), f, origin, tail).unwrap()
    }

    /// Hand-built state for tests that only exercise the analysis surface.
    fn synthetic_state(params: SystemParams, u: RadialField, v: RadialField) -> GroundState {
        GroundState {
            params,
            scaling: derive_scaling(&params),
            beta_star: v.value_at_zero().unwrap_or(f64::NAN),
            residuals: Residuals {
                ode_sup_u: 0.0,
                ode_sup_v: 0.0,
                green_rel_u: 0.0,
                green_rel_v: 0.0,
            },
            method: SolveMethod::Shooting,
            diagnostics: SolveDiagnostics::default(),
            u,
            v,
        }
    }

    fn bubble_field() -> RadialField {
        field_from(
            3,
            |rho| (1.0 + rho * rho / 3.0).powf(-0.5),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(3.0f64.sqrt(), 1.0).unwrap(),
        )
        .declare_nonnegative()
        .unwrap()
    }

    #[test]
    fn decay_fit_exact_on_pure_power() {
        let f = field_from(
            3,
            |rho| rho.powi(-2),
            OriginModel::SingularPower,
            TailModel::power(1.0, 2.0).unwrap(),
        );
        let fit = estimate_decay(&f, false, None).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.amplitude - 1.0).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn decay_fit_recovers_log_correction() {
        let f = field_from(
            3,
            |rho| {
                if rho > 1.0 {
                    rho.powi(-1) * rho.ln()
                } else {
                    rho.powi(-1)
                }
            },
            OriginModel::SingularPower,
            TailModel::new(1.0, 1.0, 1.0).unwrap(),
        );
        let fit = estimate_decay(&f, true, None).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-6, "m = {}", fit.exponent);
        assert!((fit.log_power - 1.0).abs() < 1e-6, "κ = {}", fit.log_power);
        assert!((fit.amplitude - 1.0).abs() < 1e-6, "A = {}", fit.amplitude);
    }

    #[test]
    fn decay_fit_on_the_bubble() {
        let f = field_from(
            3,
            |rho| (1.0 + rho * rho / 3.0).powf(-0.5),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(3.0f64.sqrt(), 1.0).unwrap(),
        );
        let fit = estimate_decay(&f, false, None).unwrap();
        assert!((fit.exponent - 1.0).abs() <= 1e-3, "m = {}", fit.exponent);
        assert!(
            (fit.amplitude - 3.0f64.sqrt()).abs() <= 1e-2,
            "A = {}",
            fit.amplitude
        );
    }

    #[test]
    fn decay_fit_rejects_nonpositive_windows() {
        let f = field_from(
            3,
            |rho| 1.0 - rho / 100.0,
            OriginModel::Quadratic { value: 1.0 },
            TailModel::zero(),
        );
        assert!(matches!(
            estimate_decay(&f, false, None),
            Err(AnalysisError::NonPositiveSample { .. })
        ));
    }

    #[test]
    fn weak_quasinorm_analytic_values() {
        // f = min(1, ρ^(-1)), σ = 3: (4π/3)^(1/3).
        let f = field_from(
            3,
            |rho| rho.recip().min(1.0),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(1.0, 1.0).unwrap(),
        );
        let got = lorentz_weak_quasinorm(&f, 3.0).unwrap();
        let want = (4.0 * std::f64::consts::PI / 3.0).powf(1.0 / 3.0);
        assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want}");

        // Indicator of the unit ball, σ = 2: (4π/3)^(1/2).
        let ind = field_from(
            3,
            |rho| if rho <= 1.0 { 1.0 } else { 0.0 },
            OriginModel::Quadratic { value: 1.0 },
            TailModel::zero(),
        );
        let got = lorentz_weak_quasinorm(&ind, 2.0).unwrap();
        let want = (4.0 * std::f64::consts::PI / 3.0).sqrt();
        assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want}");
    }

    #[test]
    fn weak_quasinorm_scaling_law() {
        // ‖f(μ·)‖ = μ^(-n/σ) ‖f‖. On a dyadic grid the μ = 2 shift maps
        // nodes onto nodes, so the discrete suprema obey the law exactly.
        let mu = 2.0;
        let grid = RadialGrid::new(3, 2.0f64.powi(-14), 2.0f64.powi(18), 2049).unwrap();
        let f = RadialField::sample(
            grid.clone(),
            |rho| rho.recip().min(1.0),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(1.0, 1.0).unwrap(),
        )
        .unwrap();
        let g = RadialField::sample(
            grid,
            |rho| (mu * rho).recip().min(1.0),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(1.0 / mu, 1.0).unwrap(),
        )
        .unwrap();
        for sigma in [3.0, 4.0] {
            let nf = lorentz_weak_quasinorm(&f, sigma).unwrap();
            let ng = lorentz_weak_quasinorm(&g, sigma).unwrap();
            let want = mu.powf(-3.0 / sigma) * nf;
            assert!(
                (ng - want).abs() <= 1e-10 * want,
                "sigma {sigma}: {ng} vs {want}"
            );
        }
    }

    #[test]
    fn weak_quasinorm_detects_fat_tails_and_monotonicity() {
        let f = field_from(
            3,
            |rho| rho.recip().min(1.0),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(1.0, 1.0).unwrap(),
        );
        // σ = 2: γσ = 2 < n = 3 — not in weak-L².
        assert_eq!(lorentz_weak_quasinorm(&f, 2.0).unwrap(), f64::INFINITY);

        let rising = field_from(
            3,
            |rho| rho.min(10.0),
            OriginModel::Quadratic { value: 0.0 },
            TailModel::zero(),
        );
        assert!(matches!(
            lorentz_weak_quasinorm(&rising, 2.0),
            Err(AnalysisError::NotMonotone { .. })
        ));
    }

    #[test]
    fn dual_norm_ball_indicator_and_sandwich() {
        let ind = field_from(
            3,
            |rho| if rho <= 1.0 { 1.0 } else { 0.0 },
            OriginModel::Quadratic { value: 1.0 },
            TailModel::zero(),
        );
        let got = dual_average_norm(&ind, 2.0).unwrap();
        let want = (4.0 * std::f64::consts::PI / 3.0).sqrt();
        assert!((got - want).abs() <= 1e-2 * want, "{got} vs {want}");

        // Sandwich: weak <= dual <= σ' · weak on monotone test fields.
        let kink = field_from(
            3,
            |rho| rho.recip().min(1.0),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(1.0, 1.0).unwrap(),
        );
        let bubble = field_from(
            3,
            |rho| (1.0 + rho * rho / 3.0).powf(-0.5),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(3.0f64.sqrt(), 1.0).unwrap(),
        );
        for f in [&ind, &kink, &bubble] {
            for sigma in [2.0, 3.0, 5.0] {
                let weak = lorentz_weak_quasinorm(f, sigma).unwrap();
                let dual = dual_average_norm(f, sigma).unwrap();
                if !weak.is_finite() {
                    assert!(!dual.is_finite(), "dual must diverge with weak");
                    continue;
                }
                let conj = sigma / (sigma - 1.0);
                assert!(
                    weak <= dual * (1.0 + 1e-9),
                    "sigma {sigma}: weak {weak} > dual {dual}"
                );
                assert!(
                    dual <= conj * weak * (1.0 + 1e-9),
                    "sigma {sigma}: dual {dual} > σ'·weak {}",
                    conj * weak
                );
            }
        }
    }

    #[test]
    fn synthetic_critical_field_blowup_slope() {
        // v = ρ^(-1) ln(e + ρ) has ‖v‖(σ,∞) ~ (σ - 3)^(-1) as σ ↓ 3.
        // Bounded core (otherwise a ρ^(-1) origin singularity alone pushes
        // the σ > 3 quasinorms to infinity).
        let cap = (std::f64::consts::E + 1.0).ln();
        let params = SystemParams::new(3, 11.0, 3.0, 0.0, 0.0).unwrap();
        let v = field_from(
            3,
            |rho| (rho.recip() * (std::f64::consts::E + rho).ln()).min(cap),
            OriginModel::Quadratic { value: cap },
            TailModel::new(1.0, 1.0, 1.0).unwrap(),
        );
        let state = synthetic_state(params, bubble_field(), v);
        let ladder: Vec<f64> = [0.01, 0.05, 0.1, 0.2, 0.35, 0.5].iter().map(|o| 3.0 + o).collect();
        let fit = critical_blowup_fit(&state, Some(&ladder)).unwrap();
        assert!(
            (fit.slope - 1.0).abs() <= 0.05,
            "synthetic blow-up slope {} within 5% of 1",
            fit.slope
        );

        // Supercritical states are refused.
        let params = SystemParams::new(3, 5.0, 5.0, 0.0, 0.0).unwrap();
        let state = synthetic_state(params, bubble_field(), bubble_field());
        assert!(matches!(
            critical_blowup_fit(&state, None),
            Err(AnalysisError::WrongRegime { .. })
        ));
    }

    #[test]
    fn envelope_of_the_bubble() {
        let params = SystemParams::new(3, 5.0, 5.0, 0.0, 0.0).unwrap();
        let state = synthetic_state(params, bubble_field(), bubble_field());
        let env = envelope_report(&state).unwrap();
        // g(ρ) = (1+ρ)(1+ρ²/3)^(-1/2): g' vanishes at ρ = 3 with g(3) = 2,
        // above the ρ -> ∞ limit sqrt(3); the infimum sits at the origin.
        assert!((env.sup_ratio_u - 2.0).abs() <= 1e-3, "sup {}", env.sup_ratio_u);
        assert!((env.inf_ratio_u - 1.0).abs() <= 1e-3, "inf {}", env.inf_ratio_u);
        assert!(env.inf_ratio_v > 0.0 && env.sup_ratio_v.is_finite());
    }

    #[test]
    fn comparison_is_equality_for_the_symmetric_pair() {
        let params = SystemParams::new(3, 5.0, 5.0, 0.0, 0.0).unwrap();
        let state = synthetic_state(params, bubble_field(), bubble_field());
        let violation = check_comparison(&state).unwrap();
        assert!(violation.abs() <= 1e-15, "u ≡ v gives equality, got {violation}");

        // p < s refuses.
        let params = SystemParams::new(3, 1.0, 1.0, 1.5, 1.5).unwrap();
        let state = synthetic_state(params, bubble_field(), bubble_field());
        assert!(matches!(
            check_comparison(&state),
            Err(AnalysisError::ComparisonHypothesisFails { .. })
        ));
    }

    #[test]
    fn dual_norm_of_borderline_power_attains_the_upper_bound() {
        // f = min(1, ρ^(-1)), σ = 3: D(R) increases to σ'·weak exactly.
        let f = field_from(
            3,
            |rho| rho.recip().min(1.0),
            OriginModel::Quadratic { value: 1.0 },
            TailModel::power(1.0, 1.0).unwrap(),
        );
        let weak = lorentz_weak_quasinorm(&f, 3.0).unwrap();
        let dual = dual_average_norm(&f, 3.0).unwrap();
        assert!(
            (dual - 1.5 * weak).abs() <= 1e-6 * weak,
            "dual {dual} vs 1.5·weak {}",
            1.5 * weak
        );
    }
}
