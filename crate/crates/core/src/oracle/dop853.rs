//! Adaptive Dormand–Prince 8(5,3) integration of `y′ = f(x, y)` for complex
//! vectors, with the combined 5th/3rd-order error estimate.

use super::tableau::{A, B, C, E3, E5, STAGES};
use crate::{CVec, Error, Result, C64};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed `|h|`.
    pub max_step: f64,
    pub max_steps: usize,
}

/// Counters of one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest accepted scaled error norm (`≤ 1`).
    pub max_error: f64,
}

fn axpy(y: &CVec, h: f64, coef: &[f64], k: &[CVec]) -> CVec {
    let mut out = y.clone();
    for (c, ki) in coef.iter().zip(k) {
        if *c != 0.0 {
            out.axpy(C64::new(h * c, 0.0), ki, C64::new(1.0, 0.0));
        }
    }
    out
}

/// One step of size `h` from `(x, y)` with `f(x, y) = fy`. Returns the new
/// state, its derivative and the scaled error norm.
fn step<F: FnMut(f64, &CVec) -> CVec>(f: &mut F, x: f64, y: &CVec, fy: &CVec, h: f64, ctl: &StepControl) -> (CVec, CVec, f64) {
    let mut k: Vec<CVec> = Vec::with_capacity(STAGES + 1);
    k.push(fy.clone());
    for s in 1..STAGES {
        let ys = axpy(y, h, &A[s][..s], &k);
        k.push(f(x + C[s] * h, &ys));
    }
    let y_new = axpy(y, h, &B, &k);
    let f_new = f(x + h, &y_new);
    k.push(f_new.clone());
    let n = y.len();
    let (mut e5, mut e3) = (0.0, 0.0);
    for i in 0..n {
        let scale = ctl.atol + ctl.rtol * y[i].norm().max(y_new[i].norm());
        let mut s5 = C64::new(0.0, 0.0);
        let mut s3 = C64::new(0.0, 0.0);
        for (j, kj) in k.iter().enumerate() {
            s5 += kj[i] * E5[j];
            s3 += kj[i] * E3[j];
        }
        e5 += (s5 / scale).norm_sqr();
        e3 += (s3 / scale).norm_sqr();
    }
    let err = if e5 == 0.0 && e3 == 0.0 {
        0.0
    } else {
        h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
    };
    (y_new, f_new, err)
}

/// Integrates from `x0` to `x1` (either direction), calling `on_step(x, y)`
/// after the initial point and every accepted step. `on_step` may abort by
/// returning an error.
pub fn integrate<F, S>(mut f: F, x0: f64, x1: f64, y0: CVec, ctl: &StepControl, mut on_step: S) -> Result<(CVec, IntegratorStats)>
where
    F: FnMut(f64, &CVec) -> CVec,
    S: FnMut(f64, &CVec) -> Result<()>,
{
    if !(ctl.rtol > 0.0 && ctl.atol >= 0.0 && ctl.max_step > 0.0) {
        return Err(Error::Integrator("tolerances and max_step must be positive".into()));
    }
    let mut stats = IntegratorStats::default();
    on_step(x0, &y0)?;
    if x0 == x1 {
        return Ok((y0, stats));
    }
    let dir = (x1 - x0).signum();
    let span = (x1 - x0).abs();
    let mut x = x0;
    let mut y = y0;
    let mut fy = f(x, &y);
    stats.evaluations += 1;
    let mut h = ctl.max_step.min(0.01 * span);
    let mut rejected_last = false;
    while (x1 - x) * dir > 0.0 {
        if stats.steps + stats.rejected >= ctl.max_steps {
            return Err(Error::Integrator(format!("step budget {} exhausted at x = {x}", ctl.max_steps)));
        }
        let min_step = 1e-14 * x.abs().max(span);
        if h < min_step {
            return Err(Error::Integrator(format!("step size underflow at x = {x} (h = {h:.3e})")));
        }
        h = h.min(ctl.max_step);
        let remaining = (x1 - x).abs();
        let last = h >= remaining;
        let hs = if last { remaining * dir } else { h * dir };
        let (y_new, f_new, err) = step(&mut f, x, &y, &fy, hs, ctl);
        stats.evaluations += STAGES;
        if err < 1.0 {
            let mut factor = if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
            if rejected_last {
                factor = factor.min(1.0);
            }
            x = if last { x1 } else { x + hs };
            y = y_new;
            fy = f_new;
            stats.steps += 1;
            stats.max_error = stats.max_error.max(err);
            rejected_last = false;
            on_step(x, &y)?;
            h = hs.abs() * factor;
        } else {
            h = hs.abs() * MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            stats.rejected += 1;
            rejected_last = true;
        }
        if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Integrator(format!("non-finite state at x = {x}")));
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn ctl(tol: f64) -> StepControl {
        StepControl {
            rtol: tol,
            atol: tol,
            max_step: 1.0,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn tableau_consistency() {
        for s in 0..STAGES {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-14);
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(E5.iter().sum::<f64>().abs() < 1e-14);
        assert!(E3.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn exponential_growth() {
        let (y, st) = integrate(|_, y| y.clone(), 0.0, 2.0, dvector![C64::new(1.0, 0.0)], &ctl(1e-12), |_, _| Ok(())).unwrap();
        assert!((y[0].re - 2f64.exp()).abs() < 1e-10);
        assert!(st.steps > 0 && st.max_error <= 1.0);
    }

    #[test]
    fn oscillation_both_directions() {
        let f = |_: f64, y: &CVec| y * C64::new(0.0, 50.0);
        let y0 = dvector![C64::new(1.0, 0.0)];
        let (y, _) = integrate(f, 0.0, 1.0, y0.clone(), &ctl(1e-12), |_, _| Ok(())).unwrap();
        assert!((y[0] - C64::from_polar(1.0, 50.0)).norm() < 1e-9);
        let (back, _) = integrate(f, 1.0, 0.0, y, &ctl(1e-12), |_, _| Ok(())).unwrap();
        assert!((back[0] - 1.0).norm() < 1e-9);
    }

    #[test]
    fn eighth_order_convergence() {
        // fixed steps through a huge tolerance and a step ceiling
        let run = |h: f64| {
            let c = StepControl {
                rtol: 1.0,
                atol: 1.0,
                max_step: h,
                max_steps: 1_000_000,
            };
            let (y, _) = integrate(|x, y| y * C64::new(0.0, (3.0 * x).cos() * 4.0), 0.0, 1.0, dvector![C64::new(1.0, 0.0)], &c, |_, _| Ok(())).unwrap();
            (y[0] - C64::from_polar(1.0, 4.0 / 3.0 * 3f64.sin())).norm()
        };
        let (e1, e2) = (run(0.1), run(0.05));
        let order = (e1 / e2).log2();
        assert!(order > 7.0, "order {order}: {e1:e} {e2:e}");
    }

    #[test]
    fn callback_can_abort() {
        let r = integrate(|_, y| y.clone(), 0.0, 1.0, dvector![C64::new(1.0, 0.0)], &ctl(1e-10), |x, _| {
            if x > 0.5 {
                Err(Error::Integrator("stop".into()))
            } else {
                Ok(())
            }
        });
        assert!(r.is_err());
    }
}
