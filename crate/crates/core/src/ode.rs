//! Dormand-Prince 5(4) integrator with PI step-size control.
//!
//! The stepper owns the state vector and advances it one accepted step at a
//! time; callers drive the loop so they can observe, snapshot, or stop on
//! their own criteria. Step limits passed to [`DormandPrince::step`] are hit
//! exactly, which is how snapshot times are honoured.

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
}

/// How the embedded error estimate is scaled before comparing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// `max_i |e_i| / (atol + rtol * max(|y|_inf, |y_new|_inf))`.
    Global,
    /// `max_i |e_i| / (atol + rtol * max(|y_i|, |y_new_i|))`.
    Componentwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub rel: T,
    pub abs: T,
}

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

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct DormandPrince<T> {
    t: T,
    y: Vec<T>,
    h: Option<T>,
    err_prev: T,
    tol: Tolerance<T>,
    norm: ErrorNorm,
    k: [Vec<T>; 7],
    y_stage: Vec<T>,
    y_new: Vec<T>,
    fsal: bool,
    accepted: usize,
    rejected: usize,
    evaluations: usize,
}

impl<T: Scalar> DormandPrince<T> {
    pub fn new(t0: T, y0: Vec<T>, tol: Tolerance<T>, norm: ErrorNorm) -> Self {
        let n = y0.len();
        Self {
            t: t0,
            y: y0,
            h: None,
            err_prev: T::of(1e-4),
            tol,
            norm,
            k: std::array::from_fn(|_| vec![T::zero(); n]),
            y_stage: vec![T::zero(); n],
            y_new: vec![T::zero(); n],
            fsal: false,
            accepted: 0,
            rejected: 0,
            evaluations: 0,
        }
    }

    pub fn with_initial_step(mut self, h: T) -> Self {
        self.h = Some(h);
        self
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// Zeroes every component with `|y_i| < threshold`; returns how many.
    pub fn flush_below(&mut self, threshold: T) -> usize {
        let mut count = 0;
        for v in self.y.iter_mut() {
            if *v != T::zero() && v.abs() < threshold {
                *v = T::zero();
                count += 1;
            }
        }
        if count > 0 {
            self.fsal = false;
        }
        count
    }

    pub fn into_state(self) -> (T, Vec<T>) {
        (self.t, self.y)
    }

    /// Step size that will be attempted next.
    pub fn next_step(&self) -> Option<T> {
        self.h
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn scaled_error(&self, err: &[T]) -> T {
        match self.norm {
            ErrorNorm::Global => {
                let ymax = self
                    .y
                    .iter()
                    .chain(&self.y_new)
                    .fold(T::zero(), |acc, v| acc.max(v.abs()));
                let sc = self.tol.abs + self.tol.rel * ymax;
                err.iter().fold(T::zero(), |acc, e| acc.max(e.abs())) / sc
            }
            ErrorNorm::Componentwise => err
                .iter()
                .zip(self.y.iter().zip(&self.y_new))
                .fold(T::zero(), |acc, (e, (a, b))| {
                    let sc = self.tol.abs + self.tol.rel * a.abs().max(b.abs());
                    acc.max(e.abs() / sc)
                }),
        }
    }

    fn initial_step<F>(&mut self, rhs: &mut F) -> T
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        // Hairer-Norsett-Wanner starting step heuristic
        rhs(self.t, &self.y, &mut self.k[0]);
        self.evaluations += 1;
        self.fsal = true;
        let scale = |v: T, y: T| v / (self.tol.abs + self.tol.rel * y.abs());
        let d0 = self.y.iter().map(|&y| scale(y, y).abs()).fold(T::zero(), T::max);
        let d1 = self.k[0].iter().zip(&self.y).map(|(&f, &y)| scale(f, y).abs()).fold(T::zero(), T::max);
        let tiny = T::of(1e-5);
        let h0 = if d0 < tiny || d1 < tiny { T::of(1e-6) } else { T::of(0.01) * d0 / d1 };
        for (ys, (&y, &f)) in self.y_stage.iter_mut().zip(self.y.iter().zip(&self.k[0])) {
            *ys = y + h0 * f;
        }
        rhs(self.t + h0, &self.y_stage, &mut self.k[1]);
        self.evaluations += 1;
        let d2 = self
            .k[1]
            .iter()
            .zip(&self.k[0])
            .zip(&self.y)
            .map(|((&f1, &f0), &y)| scale(f1 - f0, y).abs())
            .fold(T::zero(), T::max)
            / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= T::of(1e-15) {
            (h0 * T::of(1e-3)).max(T::of(1e-6))
        } else {
            (T::of(0.01) / dmax).powf(T::of(0.2))
        };
        (T::of(100.0) * h0).min(h1)
    }

    /// Advances by one accepted step, never past `t_limit`.
    ///
    /// Returns the size of the accepted step. When the step lands on
    /// `t_limit` the time is set to `t_limit` exactly.
    pub fn step<F>(&mut self, rhs: &mut F, t_limit: T) -> Result<T, OdeError>
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let n = self.y.len();
        if self.h.is_none() {
            let h = self.initial_step(rhs);
            self.h = Some(h);
        }
        if !self.fsal {
            rhs(self.t, &self.y, &mut self.k[0]);
            self.evaluations += 1;
            self.fsal = true;
        }
        let floor = T::epsilon() * T::of(16.0) * self.t.abs().max(T::one());
        if t_limit - self.t <= floor {
            self.t = t_limit;
            return Ok(T::zero());
        }
        let mut h = self.h.expect("initialised above");
        let mut err = vec![T::zero(); n];
        loop {
            let remaining = t_limit - self.t;
            let clamped = h >= remaining;
            if clamped {
                h = remaining;
            }
            // also catches a NaN step
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(h > floor) {
                return Err(OdeError::StepUnderflow {
                    t: self.t.to_f64().unwrap_or(f64::NAN),
                    h: h.to_f64().unwrap_or(f64::NAN),
                });
            }
            self.stages(rhs, h);
            for (i, e) in err.iter_mut().enumerate() {
                *e = h
                    * (T::of(E1) * self.k[0][i]
                        + T::of(E3) * self.k[2][i]
                        + T::of(E4) * self.k[3][i]
                        + T::of(E5) * self.k[4][i]
                        + T::of(E6) * self.k[5][i]
                        + T::of(E7) * self.k[6][i]);
            }
            let mut e = self.scaled_error(&err);
            if !e.is_finite() || self.y_new.iter().any(|v| !v.is_finite()) {
                e = T::infinity();
            }
            let fac11 = e.powf(T::of(0.2 - 0.75 * BETA));
            if e <= T::one() {
                let fac = fac11 / self.err_prev.powf(T::of(BETA));
                let fac = (fac / T::of(SAFETY)).max(T::of(1.0 / FAC_MAX)).min(T::of(1.0 / FAC_MIN));
                self.err_prev = e.max(T::of(1e-4));
                let next = h / fac;
                self.t = if clamped { t_limit } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.accepted += 1;
                // a step shortened to hit t_limit should not shrink the next one
                let prev = self.h.expect("set");
                self.h = Some(if clamped { next.max(prev) } else { next });
                return Ok(h);
            }
            self.rejected += 1;
            let shrink = if e.is_finite() {
                (fac11 / T::of(SAFETY)).min(T::of(1.0 / FAC_MIN))
            } else {
                T::of(1.0 / FAC_MIN)
            };
            h /= shrink;
            self.h = Some(h);
        }
    }

    fn stages<F>(&mut self, rhs: &mut F, h: T)
    where
        F: FnMut(T, &[T], &mut [T]),
    {
        let t = self.t;
        let y = &self.y;
        let ys = &mut self.y_stage;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;

        for i in 0..y.len() {
            ys[i] = y[i] + h * T::of(A21) * k1[i];
        }
        rhs(t + T::of(C2) * h, ys, k2);
        for i in 0..y.len() {
            ys[i] = y[i] + h * (T::of(A31) * k1[i] + T::of(A32) * k2[i]);
        }
        rhs(t + T::of(C3) * h, ys, k3);
        for i in 0..y.len() {
            ys[i] = y[i] + h * (T::of(A41) * k1[i] + T::of(A42) * k2[i] + T::of(A43) * k3[i]);
        }
        rhs(t + T::of(C4) * h, ys, k4);
        for i in 0..y.len() {
            ys[i] = y[i]
                + h * (T::of(A51) * k1[i]
                    + T::of(A52) * k2[i]
                    + T::of(A53) * k3[i]
                    + T::of(A54) * k4[i]);
        }
        rhs(t + T::of(C5) * h, ys, k5);
        for i in 0..y.len() {
            ys[i] = y[i]
                + h * (T::of(A61) * k1[i]
                    + T::of(A62) * k2[i]
                    + T::of(A63) * k3[i]
                    + T::of(A64) * k4[i]
                    + T::of(A65) * k5[i]);
        }
        rhs(t + h, ys, k6);
        let yn = &mut self.y_new;
        for i in 0..y.len() {
            yn[i] = y[i]
                + h * (T::of(A71) * k1[i]
                    + T::of(A73) * k3[i]
                    + T::of(A74) * k4[i]
                    + T::of(A75) * k5[i]
                    + T::of(A76) * k6[i]);
        }
        rhs(t + h, yn, k7);
        self.evaluations += 6;
    }
}

/// Integrates from the current state to `t_end`, returning the final state.
pub fn integrate_to<T, F>(
    t0: T,
    y0: Vec<T>,
    t_end: T,
    tol: Tolerance<T>,
    norm: ErrorNorm,
    mut rhs: F,
) -> Result<Vec<T>, OdeError>
where
    T: Scalar,
    F: FnMut(T, &[T], &mut [T]),
{
    let mut dp = DormandPrince::new(t0, y0, tol, norm);
    while dp.t() < t_end {
        dp.step(&mut rhs, t_end)?;
    }
    Ok(dp.into_state().1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let tol = Tolerance { rel: 1e-10, abs: 1e-12 };
        let y = integrate_to(0.0, vec![1.0], 5.0, tol, ErrorNorm::Componentwise, |_, y, dy| {
            dy[0] = -2.0 * y[0];
        })
        .unwrap();
        assert!((y[0] / (-10.0f64).exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_hits_limits_exactly() {
        let tol = Tolerance { rel: 1e-11, abs: 1e-13 };
        let mut dp = DormandPrince::new(0.0, vec![1.0, 0.0], tol, ErrorNorm::Global);
        let mut rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        for stop in [0.5, 1.0, std::f64::consts::PI] {
            while dp.t() < stop {
                dp.step(&mut rhs, stop).unwrap();
            }
            assert_eq!(dp.t(), stop);
            assert!((dp.y()[0] - stop.cos()).abs() < 1e-9);
            assert!((dp.y()[1] + stop.sin()).abs() < 1e-9);
        }
        assert!(dp.accepted_steps() > 0);
    }

    #[test]
    fn fifth_order_convergence() {
        // global error should fall by ~2^5 when the (fixed) step halves
        let run = |h: f64| {
            let tol = Tolerance { rel: 1e3, abs: 1e3 };
            let mut dp = DormandPrince::new(0.0, vec![1.0], tol, ErrorNorm::Global)
                .with_initial_step(h);
            let mut rhs = |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = t.cos();
            let mut t_next = h;
            while dp.t() < 1.0 - 1e-12 {
                dp.step(&mut rhs, t_next.min(1.0)).unwrap();
                t_next = dp.t() + h;
            }
            (dp.y()[0] - (1.0 + 1f64.sin())).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let ratio = e1 / e2;
        assert!(ratio > 20.0, "order ratio {ratio}");
    }

    #[test]
    fn blow_up_reports_underflow() {
        let tol = Tolerance { rel: 1e-8, abs: 1e-10 };
        let err = integrate_to(0.0, vec![1.0], 2.0, tol, ErrorNorm::Componentwise, |_, y, dy| {
            dy[0] = y[0] * y[0];
        })
        .unwrap_err();
        let OdeError::StepUnderflow { t, .. } = err;
        assert!(t < 1.001 && t > 0.99, "t = {t}");
    }

    #[test]
    fn flush_zeroes_small_components_only() {
        let tol = Tolerance { rel: 1e-10, abs: 1e-12 };
        let mut dp = DormandPrince::new(0.0, vec![1.0, -1e-300, 1e-20, 0.0], tol, ErrorNorm::Componentwise);
        assert_eq!(dp.flush_below(1e-290), 1);
        assert_eq!(dp.y(), &[1.0, 0.0, 1e-20, 0.0]);
        let mut decay = |_: f64, y: &[f64], dy: &mut [f64]| {
            for (d, v) in dy.iter_mut().zip(y) {
                *d = -v;
            }
        };
        dp.step(&mut decay, 1.0).unwrap();
        assert_eq!(dp.flush_below(1e-290), 0);
    }
}
