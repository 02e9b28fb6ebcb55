//! Embedded Dormand–Prince 5(4) integrator with dense output.
//!
//! Purpose-built for the radial shooting problem: fixed-size state vectors,
//! step-size control with a PI element, and the standard fourth-order
//! interpolant on each accepted step so the caller can locate sign changes
//! to high precision.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxStepsExceeded { max_steps: usize, t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            h_init: 1e-4,
            h_max: 0.25,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub t1: f64,
    cont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    /// Evaluates the interpolant at `t ∈ [t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / (self.t1 - self.t0);
        let theta1 = 1.0 - theta;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + theta1
                            * (self.cont[2][i]
                                + theta * (self.cont[3][i] + theta1 * self.cont[4][i])));
        }
        out
    }

    pub fn y1(&self) -> [f64; D] {
        self.eval(self.t1)
    }
}

/// What the step callback wants next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
#[allow(dead_code)] // result record; callers read what they need
pub struct IntegrationEnd<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub steps: usize,
    pub stopped_by_callback: bool,
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end` (`t_end > t0`), invoking
/// `on_step` after every accepted step. The first-same-as-last evaluation is
/// reused; the callback may stop the integration early.
pub fn integrate<const D: usize>(
    rhs: &mut impl FnMut(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    t_end: f64,
    y0: [f64; D],
    opts: &OdeOptions,
    mut on_step: impl FnMut(&DenseStep<D>) -> StepOutcome,
) -> Result<IntegrationEnd<D>, OdeError> {
    assert!(t_end > t0, "integration runs forward in t");
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);
    let mut h = opts.h_init.min(t_end - t0).min(opts.h_max);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut err_prev: f64 = 1.0;

    while t < t_end {
        if steps + rejected >= opts.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                max_steps: opts.max_steps,
                t,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        let k2 = rhs(t + h / 5.0, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + 3.0 * h / 10.0, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + 4.0 * h / 5.0,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + 8.0 * h / 9.0,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = axpy(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = rhs(t + h, &y1);

        // Embedded error estimate.
        let mut err_sq = 0.0;
        for i in 0..D {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            let r = e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / D as f64).sqrt().max(1e-30);

        if err <= 1.0 {
            let fac = (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 10.0);
            err_prev = err;

            let mut cont = [[0.0; D]; 5];
            for i in 0..D {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k7[i] - bspl;
                cont[4][i] = h
                    * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let step = DenseStep {
                t0: t,
                t1: t + h,
                cont,
            };
            t += h;
            y = y1;
            k1 = k7;
            steps += 1;
            if on_step(&step) == StepOutcome::Stop {
                return Ok(IntegrationEnd {
                    t,
                    y,
                    steps,
                    stopped_by_callback: true,
                });
            }
            h = (h * fac).min(opts.h_max);
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }

    Ok(IntegrationEnd {
        t,
        y,
        steps,
        stopped_by_callback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_high_accuracy() {
        let mut rhs = |_t: f64, y: &[f64; 1]| [-y[0]];
        let end = integrate(&mut rhs, 0.0, 5.0, [1.0], &OdeOptions::default(), |_| {
            StepOutcome::Continue
        })
        .unwrap();
        let want = (-5.0f64).exp();
        assert!(
            (end.y[0] - want).abs() < 1e-9 * want,
            "y(5) = {}, want {want}",
            end.y[0]
        );
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let mut rhs = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut worst = 0.0f64;
        integrate(
            &mut rhs,
            0.0,
            10.0,
            [1.0, 0.0],
            &OdeOptions::default(),
            |step| {
                for j in 1..=4 {
                    let t = step.t0 + (step.t1 - step.t0) * j as f64 / 4.0;
                    let y = step.eval(t);
                    worst = worst.max((y[0] - t.cos()).abs());
                    worst = worst.max((y[1] + t.sin()).abs());
                }
                StepOutcome::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-9, "dense-output error {worst}");
    }

    #[test]
    fn callback_can_stop_early() {
        let mut rhs = |_t: f64, y: &[f64; 1]| [y[0]];
        let end = integrate(&mut rhs, 0.0, 50.0, [1.0], &OdeOptions::default(), |step| {
            if step.y1()[0] > 10.0 {
                StepOutcome::Stop
            } else {
                StepOutcome::Continue
            }
        })
        .unwrap();
        assert!(end.stopped_by_callback);
        assert!(end.t < 50.0);
        assert!(end.y[0] >= 10.0);
    }
}
