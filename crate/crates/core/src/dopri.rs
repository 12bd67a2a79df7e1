//! Dormand–Prince 5(4) with continuous output and upward-crossing guard detection.
//!
//! Dense output uses Hairer's fourth-order continuous extension, stored per
//! accepted step so that callers can evaluate or integrate the solution at
//! arbitrary times after the run.

use crate::error::IntegrationError;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

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

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Optional cap on the step length (days).
    pub h_max: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 2_000_000,
            h_max: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    /// Last time at which this step is part of the solution (clipped at events).
    pub t_end: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluates the interpolant; `t` should lie in `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| {
            r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])))
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t_end
    }
}

/// How an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// The guard function crossed zero upward; `t` and the interpolated state at the root.
    Guard { t: f64 },
    /// Reached the requested final time.
    TMax,
    /// Field magnitude fell below the stationarity threshold.
    Stationary,
}

/// Result of one run: accepted mesh samples and per-step dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Run<const N: usize> {
    pub samples: Vec<(f64, [f64; N])>,
    pub steps: Vec<DenseStep<N>>,
    pub stop: Stop,
    pub rejected: usize,
}

impl<const N: usize> Run<N> {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.0).unwrap_or(0.0)
    }

    pub fn last_state(&self) -> [f64; N] {
        self.samples.last().map(|s| s.1).unwrap_or([0.0; N])
    }
}

/// Guard `g(y) = y[component] - level`, firing on an upward crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guard {
    pub component: usize,
    pub level: f64,
    /// Root refinement stops when `|g| <= tolerance`.
    pub tolerance: f64,
}

impl Guard {
    fn value<const N: usize>(&self, y: &[f64; N]) -> f64 {
        y[self.component] - self.level
    }
}

fn weighted_rms<const N: usize>(
    err: &[f64; N],
    y0: &[f64; N],
    y1: &[f64; N],
    opts: &SolverOptions,
) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = opts.abs_tol + opts.rel_tol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

fn initial_step<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    opts: &SolverOptions,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let sc: [f64; N] = std::array::from_fn(|i| opts.abs_tol + opts.rel_tol * y0[i].abs());
    let rms = |v: &[f64; N]| -> f64 {
        ((0..N).map(|i| (v[i] / sc[i]).powi(2)).sum::<f64>() / N as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = f(t0 + h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_final`, stopping early on a guard crossing.
///
/// Only upward crossings (`g < 0` at the start of an accepted step, `g >= 0` at its end)
/// are reported. A start point with `g >= 0` does not fire until the solution has
/// first gone below the guard.
pub fn integrate<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t_final: f64,
    guard: Option<Guard>,
    stationary_tol: Option<f64>,
    opts: &SolverOptions,
) -> Result<Run<N>, IntegrationError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut samples = vec![(t0, y0)];
    let mut steps = Vec::new();
    let mut rejected = 0;
    if t_final <= t0 {
        return Ok(Run {
            samples,
            steps,
            stop: Stop::TMax,
            rejected,
        });
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let span = t_final - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut h = initial_step(f, t, &y, &k1, opts).min(h_max);
    let mut last_rejected = false;

    for _ in 0..opts.max_steps {
        if let Some(eps) = stationary_tol {
            let still = (0..N).all(|i| k1[i].abs() <= eps * (1.0 + y[i].abs()));
            if still {
                return Ok(Run {
                    samples,
                    steps,
                    stop: Stop::Stationary,
                    rejected,
                });
            }
        }

        let remaining = t_final - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(IntegrationError::StepSizeUnderflow {
                t,
                h,
                state: y.to_vec(),
            });
        }

        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if last { t_final } else { t + h };
        let k7 = f(t_new, &y_new);

        let err: [f64; N] = std::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let err_norm = weighted_rms(&err, &y, &y_new, opts);
        if !err_norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(IntegrationError::NonFinite {
                    t,
                    state: y.to_vec(),
                });
            }
            h *= FAC_MIN;
            rejected += 1;
            last_rejected = true;
            continue;
        }

        if err_norm > 1.0 {
            let fac = (SAFETY * err_norm.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            rejected += 1;
            last_rejected = true;
            continue;
        }

        let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
        let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
        let coeffs = [
            y,
            ydiff,
            bspl,
            std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
            std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            }),
        ];
        let mut step = DenseStep {
            t0: t,
            h,
            t_end: t_new,
            coeffs,
        };

        if let Some(g) = guard {
            let g0 = g.value(&y);
            let g1 = g.value(&y_new);
            if g0 < 0.0 && g1 >= 0.0 {
                let t_hit = refine_root(&step, &g, t, t_new, g0, g1);
                let y_hit = step.eval(t_hit);
                step.t_end = t_hit;
                steps.push(step);
                if t_hit > t {
                    samples.push((t_hit, y_hit));
                } else {
                    // Root at the step start: replace rather than duplicate the sample.
                    samples.last_mut().unwrap().1 = y_hit;
                }
                return Ok(Run {
                    samples,
                    steps,
                    stop: Stop::Guard { t: t_hit },
                    rejected,
                });
            }
        }

        steps.push(step);
        samples.push((t_new, y_new));
        t = t_new;
        y = y_new;
        k1 = k7;
        if last {
            return Ok(Run {
                samples,
                steps,
                stop: Stop::TMax,
                rejected,
            });
        }

        let mut fac = SAFETY * err_norm.max(1e-10).powf(-0.2);
        fac = fac.clamp(FAC_MIN, FAC_MAX);
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(h_max);
    }
    Err(IntegrationError::TooManySteps {
        t,
        max_steps: opts.max_steps,
    })
}

/// Illinois-modified regula falsi on the interpolant, bracketed in `[a, b]`.
fn refine_root<const N: usize>(
    step: &DenseStep<N>,
    guard: &Guard,
    a: f64,
    b: f64,
    ga: f64,
    gb: f64,
) -> f64 {
    if gb.abs() <= guard.tolerance {
        return b;
    }
    let (mut a, mut b, mut ga, mut gb) = (a, b, ga, gb);
    let mut side = 0i8;
    for _ in 0..200 {
        let t = if (gb - ga).abs() > 0.0 {
            (a * gb - b * ga) / (gb - ga)
        } else {
            0.5 * (a + b)
        };
        let t = if t > a && t < b { t } else { 0.5 * (a + b) };
        let g = guard.value(&step.eval(t));
        if g.abs() <= guard.tolerance || (b - a) <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            // Prefer the root estimate on the reached side of the guard.
            return if g >= 0.0 || g.abs() <= guard.tolerance {
                t
            } else {
                b
            };
        }
        if g < 0.0 {
            a = t;
            ga = g;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            gb = g;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let run = integrate(&f, 0.0, [1.0], 5.0, None, None, &SolverOptions::default()).unwrap();
        assert_eq!(run.stop, Stop::TMax);
        assert_eq!(run.t_end(), 5.0);
        let exact = (-5.0f64).exp();
        assert!((run.last_state()[0] - exact).abs() < 1e-10 * exact.max(1e-2));
        for w in run.samples.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let run = integrate(
            &f,
            0.0,
            [0.0, 1.0],
            10.0,
            None,
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        for step in &run.steps {
            for k in 1..4 {
                let t = step.t0 + step.h * k as f64 / 4.0;
                let y = step.eval(t);
                assert!((y[0] - t.sin()).abs() < 1e-8, "t = {t}");
                assert!((y[1] - t.cos()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn guard_crossing_is_located() {
        // y = t, guard at 0.7.
        let f = |_t: f64, _y: &[f64; 1]| [1.0];
        let guard = Guard {
            component: 0,
            level: 0.7,
            tolerance: 1e-12,
        };
        let run = integrate(
            &f,
            0.0,
            [0.0],
            5.0,
            Some(guard),
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        match run.stop {
            Stop::Guard { t } => assert!((t - 0.7).abs() < 1e-11),
            other => panic!("unexpected stop {other:?}"),
        }
        assert!((run.last_state()[0] - 0.7).abs() <= 1e-12);
    }

    #[test]
    fn downward_crossing_is_ignored() {
        let f = |_t: f64, _y: &[f64; 1]| [-1.0];
        let guard = Guard {
            component: 0,
            level: 0.5,
            tolerance: 1e-12,
        };
        let run = integrate(
            &f,
            0.0,
            [1.0],
            2.0,
            Some(guard),
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(run.stop, Stop::TMax);
    }

    #[test]
    fn stationary_stop() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let run = integrate(
            &f,
            0.0,
            [1.0],
            1e4,
            None,
            Some(1e-9),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(run.stop, Stop::Stationary);
        assert!(run.t_end() < 1e4);
    }

    #[test]
    fn step_limit_reported() {
        let f = |_t: f64, y: &[f64; 1]| [-y[0]];
        let opts = SolverOptions {
            max_steps: 3,
            h_max: Some(0.01),
            ..SolverOptions::default()
        };
        assert!(matches!(
            integrate(&f, 0.0, [1.0], 10.0, None, None, &opts),
            Err(IntegrationError::TooManySteps { .. })
        ));
    }
}
