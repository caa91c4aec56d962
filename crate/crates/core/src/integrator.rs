//! Shared adaptive Runge-Kutta stepper.
//!
//! An embedded 5(4) pair with PI step-size control and a fourth-order dense
//! interpolant, generic over the state container. Both the moment dynamics
//! and the density-matrix solver step through this code so that any
//! discrepancy between them reflects closure error rather than differences
//! in the stepper.

use thiserror::Error;

use crate::C64;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("step size underflow at t = {t:.6e} (state norm {norm:.3e})")]
    StepSizeUnderflow { t: f64, norm: f64 },
    #[error("non-finite state detected at t = {t:.6e}")]
    NonFinite { t: f64 },
    #[error("step limit {limit} exceeded at t = {t:.6e}")]
    TooManySteps { t: f64, limit: usize },
    #[error("integration aborted by observer at t = {t:.6e}: {reason}")]
    Aborted { t: f64, reason: String },
}

/// Tolerances and horizon for one integration.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration horizon in units of the inverse decay rate.
    pub t_end: f64,
    pub max_step: Option<f64>,
    /// Number of uniformly spaced samples the trajectory drivers record.
    pub dense_samples: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-7,
            abs_tol: 1e-10,
            t_end: 10.0,
            max_step: None,
            dense_samples: 400,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    /// Tighter defaults used for the exact density-matrix solver.
    pub fn oracle() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            ..Default::default()
        }
    }
}

/// State container the stepper can integrate: a flat collection of f64
/// components under linear operations.
pub trait OdeState: Clone + Send + Sync {
    /// self += a * x
    fn scaled_add(&mut self, a: f64, x: &Self);
    fn fill_zero(&mut self);
    /// Weighted RMS of `self` interpreted as an error against the tolerance
    /// mix atol + rtol * max(|y0|, |y1|), component-wise.
    fn error_norm(&self, y0: &Self, y1: &Self, abs_tol: f64, rel_tol: f64) -> f64;
    fn is_finite(&self) -> bool;
    fn norm_inf(&self) -> f64;
}

impl OdeState for Vec<f64> {
    fn scaled_add(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }

    fn fill_zero(&mut self) {
        self.iter_mut().for_each(|v| *v = 0.0);
    }

    fn error_norm(&self, y0: &Self, y1: &Self, abs_tol: f64, rel_tol: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            let sc = abs_tol + rel_tol * y0[i].abs().max(y1[i].abs());
            let r = self[i] / sc;
            acc += r * r;
        }
        (acc / self.len().max(1) as f64).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn norm_inf(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl OdeState for Vec<C64> {
    fn scaled_add(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }

    fn fill_zero(&mut self) {
        self.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    }

    fn error_norm(&self, y0: &Self, y1: &Self, abs_tol: f64, rel_tol: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            let sc = abs_tol + rel_tol * y0[i].norm().max(y1[i].norm());
            let r = self[i].norm() / sc;
            acc += r * r;
        }
        (acc / self.len().max(1) as f64).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn norm_inf(&self) -> f64 {
        self.iter().fold(0.0_f64, |m, v| m.max(v.norm()))
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights equal the last A row (first-same-as-last pair).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
// Dense-output weights for the fourth-order interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Dense view of one accepted step. Evaluate anywhere in [t0, t0+h]; the
/// interpolant reproduces the step endpoints exactly.
pub struct StepDense<'a, S: OdeState> {
    pub t0: f64,
    pub h: f64,
    cont: &'a [S; 5],
}

impl<'a, S: OdeState> StepDense<'a, S> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at time `t`, written into `out`.
    pub fn eval(&self, t: f64, out: &mut S) {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let th1 = 1.0 - theta;
        // Nested form: c0 + θ(c1 + (1-θ)(c2 + θ(c3 + (1-θ) c4))).
        out.clone_from(&self.cont[0]);
        let mut w = theta;
        out.scaled_add(w, &self.cont[1]);
        w *= th1;
        out.scaled_add(w, &self.cont[2]);
        w *= theta;
        out.scaled_add(w, &self.cont[3]);
        w *= th1;
        out.scaled_add(w, &self.cont[4]);
    }

    /// Clone the interpolation data so a step can be revisited later.
    pub fn to_owned_step(&self) -> OwnedStepDense<S> {
        OwnedStepDense {
            t0: self.t0,
            h: self.h,
            cont: self.cont.clone(),
        }
    }
}

/// Owning copy of a step interpolant.
#[derive(Clone)]
pub struct OwnedStepDense<S: OdeState> {
    pub t0: f64,
    pub h: f64,
    cont: [S; 5],
}

impl<S: OdeState> OwnedStepDense<S> {
    pub fn view(&self) -> StepDense<'_, S> {
        StepDense {
            t0: self.t0,
            h: self.h,
            cont: &self.cont,
        }
    }
}

/// Whether to keep stepping after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

/// Counters reported after an integration.
#[derive(Debug, Clone, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Final integration time (equals t_end unless stopped early).
    pub t_final: f64,
    /// Set when repeated rejections suggest the step-size floor is binding.
    pub stiffness_suspected: bool,
}

/// Integrate y' = f(t, y) from `t0` over `[t0, t0 + cfg.t_end]`.
///
/// `f(t, &y, &mut dy)` must be pure. After every accepted step the observer
/// receives a dense view of the step and may stop the run. The final state
/// is written back into `y0`.
pub fn integrate<S, F, O>(
    mut f: F,
    y0: &mut S,
    t0: f64,
    cfg: &IntegratorConfig,
    mut observer: O,
) -> Result<IntegrationStats, IntegratorError>
where
    S: OdeState,
    F: FnMut(f64, &S, &mut S),
    O: FnMut(&StepDense<'_, S>) -> StepControl,
{
    let t_end = t0 + cfg.t_end;
    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut y = y0.clone();
    let mut k: Vec<S> = (0..7)
        .map(|_| {
            let mut s = y.clone();
            s.fill_zero();
            s
        })
        .collect();
    let mut y_stage = y.clone();
    let mut y_new = y.clone();
    let mut err = y.clone();
    let mut cont: [S; 5] = [y.clone(), y.clone(), y.clone(), y.clone(), y.clone()];

    f(t, &y, &mut k[0]);
    stats.rhs_evals += 1;

    let max_step = cfg.max_step.unwrap_or(cfg.t_end).min(cfg.t_end);
    let mut h = initial_step(&mut f, &y, &k[0].clone(), t, cfg, max_step, &mut stats);
    let mut err_old: f64 = 1e-4;
    let mut consecutive_rejects = 0usize;

    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 10.0;

    while t < t_end {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(IntegratorError::TooManySteps {
                t,
                limit: cfg.max_steps,
            });
        }
        h = h.min(t_end - t).min(max_step);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(IntegratorError::StepSizeUnderflow {
                t,
                norm: y.norm_inf(),
            });
        }

        // Stage evaluations; k[0] is carried over from the previous step.
        for i in 1..7 {
            y_stage.clone_from(&y);
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = A[i][j];
                if a != 0.0 {
                    y_stage.scaled_add(a * h, kj);
                }
            }
            if i < 6 {
                let (head, tail) = k.split_at_mut(i);
                let _ = head;
                f(t + C[i] * h, &y_stage, &mut tail[0]);
            } else {
                // Stage 7 is evaluated at the candidate solution y_new.
                y_new.clone_from(&y_stage);
                f(t + h, &y_new, &mut k[6]);
            }
            stats.rhs_evals += 1;
        }

        // Error estimate: (b5 - b4) contracted with the stages.
        err.fill_zero();
        for i in 0..7 {
            let w = B5[i] - B4[i];
            if w != 0.0 {
                err.scaled_add(w * h, &k[i]);
            }
        }
        let err_norm = err.error_norm(&y, &y_new, cfg.abs_tol, cfg.rel_tol);

        if !err_norm.is_finite() || !y_new.is_finite() {
            stats.rejected += 1;
            consecutive_rejects += 1;
            if consecutive_rejects > 30 {
                return Err(IntegratorError::NonFinite { t });
            }
            h *= 0.1;
            continue;
        }

        if err_norm <= 1.0 {
            // Accept: build the dense interpolant before advancing.
            cont[0].clone_from(&y);
            cont[1].clone_from(&y_new);
            cont[1].scaled_add(-1.0, &y); // ydiff
            cont[2].fill_zero();
            cont[2].scaled_add(h, &k[0]);
            cont[2].scaled_add(-1.0, &cont[1]); // h k1 - ydiff
            cont[3].clone_from(&cont[1]);
            cont[3].scaled_add(-h, &k[6]);
            cont[3].scaled_add(-1.0, &cont[2]); // ydiff - h k7 - bspl
            cont[4].fill_zero();
            for i in 0..7 {
                if D[i] != 0.0 {
                    cont[4].scaled_add(D[i] * h, &k[i]);
                }
            }

            let step = StepDense {
                t0: t,
                h,
                cont: &cont,
            };
            let control = observer(&step);

            t += h;
            y.clone_from(&y_new);
            k.swap(0, 6); // first-same-as-last
            stats.accepted += 1;
            consecutive_rejects = 0;

            // PI controller.
            let err_n = err_norm.max(1e-10);
            let fac = err_n.powf(EXPO1) / err_old.powf(BETA) / SAFETY;
            let fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            h /= fac;
            err_old = err_n;

            if control == StepControl::Stop {
                break;
            }
        } else {
            stats.rejected += 1;
            consecutive_rejects += 1;
            if consecutive_rejects >= 12 {
                stats.stiffness_suspected = true;
            }
            let fac = (err_norm.powf(EXPO1) / SAFETY).min(1.0 / FAC_MIN);
            h /= fac;
        }
    }

    stats.t_final = t;
    y0.clone_from(&y);
    Ok(stats)
}

/// Rough initial step size from the magnitudes of the state and its
/// derivative, refined with one explicit Euler probe.
fn initial_step<S, F>(
    f: &mut F,
    y: &S,
    f0: &S,
    t: f64,
    cfg: &IntegratorConfig,
    max_step: f64,
    stats: &mut IntegrationStats,
) -> f64
where
    S: OdeState,
    F: FnMut(f64, &S, &mut S),
{
    let d0 = y.norm_inf();
    let d1 = f0.norm_inf();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(max_step);
    let mut y1 = y.clone();
    y1.scaled_add(h0, f0);
    let mut f1 = y.clone();
    f1.fill_zero();
    f(t + h0, &y1, &mut f1);
    stats.rhs_evals += 1;
    f1.scaled_add(-1.0, f0);
    let d2 = f1.norm_inf() / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1).min(max_step)
}
