//! Radial Newton potential and discrete radial Laplacian.
//!
//! For radial `f` on `R^n` the Newtonian potential `Γ∗f` reduces to
//!
//! ```text
//! w(ρ) = 1/(n-2) · [ ρ^(2-n) ∫_0^ρ f(t) t^(n-1) dt + ∫_ρ^∞ f(t) t dt ]
//! ```
//!
//! the unique decaying radial solution of `-Δw = f`. The integrands span many
//! decades, so segments are represented as log-log linear (piecewise power
//! law) and integrated in closed form; the segment rule is exact on pure
//! powers. The `[0, ρ_1]` piece uses the field's origin model and the
//! `[ρ_N, ∞)` piece uses the tail model, including the log-corrected
//! antiderivative via the incomplete gamma function.

use std::sync::Arc;

use thiserror::Error;

use crate::exponents::{classify_regime, Regime, SystemParams};
use crate::field::{FieldError, OriginModel, RadialField, RadialGrid, TailModel};
use crate::gammafn::{log_power_tail_integral, sphere_surface_area};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreensError {
    #[error("outer integral diverges: tail exponent {exponent} must exceed 2")]
    TailNotIntegrable { exponent: f64 },
    #[error("origin singularity too strong: local exponent {exponent} must be below {limit}")]
    OriginNotIntegrable { exponent: f64, limit: f64 },
    #[error("operation requires the subcritical regime with s < 1, got {regime:?} (s = {s})")]
    WrongRegime { regime: Regime, s: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Normalization constants of the fundamental solution
/// `Γ(x) = ((n-2) ω_(n-1))^(-1) |x|^(2-n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub n: u32,
    /// Surface area of the unit sphere `S^(n-1)`.
    pub omega: f64,
    /// `1 / ((n-2) ω_(n-1))`.
    pub gamma_norm: f64,
}

impl KernelConstants {
    pub fn new(n: u32) -> Self {
        assert!(n >= 3, "kernel requires n >= 3");
        let omega = sphere_surface_area(n);
        Self {
            n,
            omega,
            gamma_norm: 1.0 / ((f64::from(n) - 2.0) * omega),
        }
    }

    /// Volume of the unit ball, `ω_(n-1) / n`.
    pub fn ball_volume(&self) -> f64 {
        self.omega / f64::from(self.n)
    }
}

/// Closed-form `∫_(r0)^(r1) f(t) t^k dt` with `f` represented as the power
/// law through the endpoint values; falls back to linear interpolation when
/// the endpoints vanish or change sign.
fn segment_integral(r0: f64, r1: f64, f0: f64, f1: f64, k: f64) -> f64 {
    if f0 == 0.0 && f1 == 0.0 {
        return 0.0;
    }
    let h = (r1 / r0).ln();
    let same_sign = f0 * f1 > 0.0;
    // Very steep local exponents mean the power-law model is extrapolating a
    // near-jump; the linear rule is better conditioned there.
    if same_sign {
        let m = (f1 / f0).abs().ln() / h;
        if m.abs() < 60.0 {
            let c = m + k + 1.0;
            let growth = if c.abs() < 1e-12 {
                h
            } else {
                (c * h).exp_m1() / c
            };
            return f0 * r0.powf(k + 1.0) * growth;
        }
    }
    // Linear-in-t fallback: f = a + b t.
    let b = (f1 - f0) / (r1 - r0);
    let a = f0 - b * r0;
    let int_pow = |j: f64| -> f64 {
        let c = j + 1.0;
        r0.powf(c) * (c * h).exp_m1() / c
    };
    a * int_pow(k) + b * int_pow(k + 1.0)
}

/// `∫_0^(ρ_1) f(t) t^k dt` from the origin model.
fn origin_integral(f: &RadialField, k: f64) -> Result<f64, GreensError> {
    let r1 = f.grid().rho_min();
    match f.origin() {
        OriginModel::Quadratic { value } => {
            let c2 = (f.values()[0] - value) / (r1 * r1);
            Ok(value * r1.powf(k + 1.0) / (k + 1.0) + c2 * r1.powf(k + 3.0) / (k + 3.0))
        }
        OriginModel::SingularPower => {
            let g = f.origin_power_exponent();
            if g >= k + 1.0 {
                return Err(GreensError::OriginNotIntegrable {
                    exponent: g,
                    limit: k + 1.0,
                });
            }
            Ok(f.values()[0] * r1.powf(k + 1.0) / (k + 1.0 - g))
        }
    }
}

/// `∫_(ρ_N)^∞ f(t) t^k dt` from the tail model; requires `γ > k + 1`.
pub(crate) fn tail_integral(f: &RadialField, k: f64) -> Result<f64, GreensError> {
    let tail = f.tail();
    if tail.amplitude == 0.0 {
        return Ok(0.0);
    }
    let c = k + 1.0 - tail.exponent;
    if c >= 0.0 {
        return Err(GreensError::TailNotIntegrable {
            exponent: tail.exponent,
        });
    }
    Ok(tail.amplitude * log_power_tail_integral(c, tail.log_power, f.grid().rho_max()))
}

/// Cumulative `inner[i] = ∫_0^(ρ_i) f t^(n-1) dt`.
pub(crate) fn inner_prefix(f: &RadialField) -> Result<Vec<f64>, GreensError> {
    let nodes = f.grid().nodes();
    let k = f64::from(f.grid().dim()) - 1.0;
    let mut acc = origin_integral(f, k)?;
    let mut out = Vec::with_capacity(nodes.len());
    out.push(acc);
    for i in 1..nodes.len() {
        acc += segment_integral(nodes[i - 1], nodes[i], f.values()[i - 1], f.values()[i], k);
        out.push(acc);
    }
    Ok(out)
}

/// Cumulative `outer[i] = ∫_(ρ_i)^∞ f t dt`.
fn outer_suffix(f: &RadialField) -> Result<Vec<f64>, GreensError> {
    let nodes = f.grid().nodes();
    let mut out = vec![0.0; nodes.len()];
    let mut acc = tail_integral(f, 1.0)?;
    out[nodes.len() - 1] = acc;
    for i in (0..nodes.len() - 1).rev() {
        acc += segment_integral(nodes[i], nodes[i + 1], f.values()[i], f.values()[i + 1], 1.0);
        out[i] = acc;
    }
    Ok(out)
}

/// Tolerance for the boundary case `γ = n` where the potential picks up a
/// logarithmic tail.
const TAIL_BOUNDARY_TOL: f64 = 1e-9;

fn potential_tail(f: &RadialField, total_mass: f64, n: f64) -> Result<TailModel, GreensError> {
    let tail = f.tail();
    if tail.amplitude == 0.0 || tail.exponent > n + TAIL_BOUNDARY_TOL {
        // Finite total mass: w ~ mass/(n-2) · ρ^(2-n).
        return Ok(TailModel::new(total_mass / (n - 2.0), n - 2.0, 0.0)?);
    }
    if (tail.exponent - n).abs() <= TAIL_BOUNDARY_TOL {
        // Log-divergent mass: the log power increments.
        let kappa = tail.log_power + 1.0;
        return Ok(TailModel::new(
            tail.amplitude / ((n - 2.0) * kappa),
            n - 2.0,
            kappa,
        )?);
    }
    // 2 < γ < n: the closed-form power-law solution.
    let gamma = tail.exponent;
    Ok(TailModel::new(
        tail.amplitude / ((gamma - 2.0) * (n - gamma)),
        gamma - 2.0,
        tail.log_power,
    )?)
}

/// The Newton potential `w = Γ∗f` sampled on the grid of `f`, with the tail
/// model propagated in closed form.
///
/// Requires the tail exponent of `f` to exceed 2 (convergent outer integral)
/// and the origin singularity, if any, to be milder than `t^(-n)`.
pub fn newton_potential(f: &RadialField) -> Result<RadialField, GreensError> {
    let tail = f.tail();
    if tail.amplitude != 0.0 && tail.exponent <= 2.0 {
        return Err(GreensError::TailNotIntegrable {
            exponent: tail.exponent,
        });
    }
    let n = f64::from(f.grid().dim());
    let inner = inner_prefix(f)?;
    let outer = outer_suffix(f)?;
    let nodes = f.grid().nodes();
    let values: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &rho)| (rho.powf(2.0 - n) * inner[i] + outer[i]) / (n - 2.0))
        .collect();

    // w(0) = 1/(n-2) ∫_0^∞ f t dt when the near-origin ∫ f t dt converges.
    let origin = match origin_integral(f, 1.0) {
        Ok(first) => {
            let full = first
                + nodes
                    .windows(2)
                    .zip(f.values().windows(2))
                    .map(|(r, v)| segment_integral(r[0], r[1], v[0], v[1], 1.0))
                    .sum::<f64>()
                + tail_integral(f, 1.0)?;
            OriginModel::Quadratic {
                value: full / (n - 2.0),
            }
        }
        Err(_) => OriginModel::SingularPower,
    };

    let total_mass = inner[nodes.len() - 1] + tail_integral(f, n - 1.0).unwrap_or(0.0);
    let out_tail = potential_tail(f, total_mass, n)?;
    Ok(RadialField::new(f.grid().clone(), values, origin, out_tail)?)
}

/// The Newton potential of `f` evaluated at a single radius inside the grid
/// span. The splitting segment is subdivided exactly, so the value agrees
/// with [`newton_potential`] at the nodes.
pub fn potential_at(f: &RadialField, rho: f64) -> Result<f64, GreensError> {
    assert!(
        rho >= f.grid().rho_min() && rho <= f.grid().rho_max(),
        "potential_at requires rho inside the grid span"
    );
    let tail = f.tail();
    if tail.amplitude != 0.0 && tail.exponent <= 2.0 {
        return Err(GreensError::TailNotIntegrable {
            exponent: tail.exponent,
        });
    }
    let n = f64::from(f.grid().dim());
    let nodes = f.grid().nodes();
    let k_in = n - 1.0;

    let mut inner = origin_integral(f, k_in)?;
    let mut outer = tail_integral(f, 1.0)?;
    for i in 1..nodes.len() {
        let (r0, r1) = (nodes[i - 1], nodes[i]);
        let (f0, f1) = (f.values()[i - 1], f.values()[i]);
        if r1 <= rho {
            inner += segment_integral(r0, r1, f0, f1, k_in);
        } else if r0 >= rho {
            outer += segment_integral(r0, r1, f0, f1, 1.0);
        } else {
            let fm = f.eval(rho);
            inner += segment_integral(r0, rho, f0, fm, k_in);
            outer += segment_integral(rho, r1, fm, f1, 1.0);
        }
    }
    Ok((rho.powf(2.0 - n) * inner + outer) / (n - 2.0))
}

/// Result of checking the closed-form value of the limit integral
/// `∫ Γ(ω - y) |y|^((2s - q(n-2))/(1-s)) dy`, `|ω| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitIntegralCheck {
    pub quadrature: f64,
    pub closed_form: f64,
    pub rel_error: f64,
}

/// Quadrature-vs-closed-form check of the limit integral behind the
/// asymptotic product identity. Requires the subcritical regime and `s < 1`.
pub fn verify_limit_integral(
    params: &SystemParams,
    grid: Option<Arc<RadialGrid>>,
) -> Result<LimitIntegralCheck, GreensError> {
    let regime = classify_regime(params);
    if regime != Regime::Subcritical || params.s >= 1.0 {
        return Err(GreensError::WrongRegime {
            regime,
            s: params.s,
        });
    }
    let n = params.dim();
    let (q, s) = (params.q, params.s);
    let gamma = (q * (n - 2.0) - 2.0 * s) / (1.0 - s);
    let grid = grid.unwrap_or_else(|| RadialGrid::standard(params.n));
    let f = RadialField::sample(
        grid,
        |rho| rho.powf(-gamma),
        OriginModel::SingularPower,
        TailModel::power(1.0, gamma)?,
    )?;
    let quadrature = potential_at(&f, 1.0)?;
    let closed_form = (1.0 - s) * (1.0 - s) / (((n - 2.0) * q - 2.0) * (n - (n - 2.0) * (q + s)));
    let rel_error = (quadrature - closed_form).abs() / closed_form.abs();
    Ok(LimitIntegralCheck {
        quadrature,
        closed_form,
        rel_error,
    })
}

/// Discrete `-Δf = -(f'' + (n-1)/ρ · f')` in the log-radius variable.
///
/// The three-point stencil is constructed to annihilate the harmonic
/// functions `1` and `ρ^(2-n)` exactly; otherwise the far field of a
/// harmonic-dominated field would swamp the residual. Endpoints use
/// one-sided stencils and are low-accuracy.
pub fn radial_laplacian(f: &RadialField) -> Result<RadialField, GreensError> {
    let grid = f.grid();
    if grid.len() < 4 {
        return Err(GreensError::Field(FieldError::TooFewNodes {
            min: 4,
            actual: grid.len(),
        }));
    }
    let n = f64::from(grid.dim());
    let h = grid.log_step();
    let lambda = (n - 2.0) * h;
    let em = (-lambda).exp();

    // Interior: exact on {1, e^((2-n)t)}, second-order on smooth fields.
    let c_plus = (n - 2.0) / (h * (1.0 - em));
    let c_minus = c_plus * em;
    let c_zero = -(c_plus + c_minus);

    // One-sided variants with the same exactness on harmonics.
    let w2 = (n - 2.0) / (h * (1.0 - em));
    let forward = [w2 * em, -w2 * (1.0 + em), w2];
    let big_e = 1.0 / em;
    let b0 = (n - 2.0) / (h * (big_e - 1.0));
    let backward = [b0, -b0 * (1.0 + big_e), b0 * big_e];

    let v = f.values();
    let nodes = grid.nodes();
    let mut out = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let lhat = if i == 0 {
            forward[0] * v[0] + forward[1] * v[1] + forward[2] * v[2]
        } else if i == v.len() - 1 {
            backward[0] * v[i - 2] + backward[1] * v[i - 1] + backward[2] * v[i]
        } else {
            c_minus * v[i - 1] + c_zero * v[i] + c_plus * v[i + 1]
        };
        out.push(-lhat / (nodes[i] * nodes[i]));
    }

    let origin = match f.origin() {
        OriginModel::Quadratic { value } => {
            let c2 = (v[0] - value) / (nodes[0] * nodes[0]);
            OriginModel::Quadratic {
                value: -2.0 * n * c2,
            }
        }
        OriginModel::SingularPower => OriginModel::SingularPower,
    };

    // Diagnostic tail: log-log slope over the last interior pair.
    let m = v.len() - 2;
    let tail = if v[m] > 0.0 && v[m - 1] > 0.0 {
        let slope = -(v[m] / v[m - 1]).ln() / h;
        if slope > 0.0 {
            TailModel::new(v[m] * nodes[m].powf(slope), slope, 0.0)
                .unwrap_or_else(|_| TailModel::zero())
        } else {
            TailModel::zero()
        }
    } else {
        TailModel::zero()
    };

    Ok(RadialField::new(grid.clone(), out, origin, tail)?)
}
