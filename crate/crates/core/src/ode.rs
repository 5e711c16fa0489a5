//! Adaptive Dormand–Prince 5(4) integrator used by the reference oracles.
//!
//! Deliberately independent from every solver path: nothing in the PDE
//! pipeline calls into this module.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns `y(t1)`.
pub fn integrate_adaptive<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: OdeTolerance) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut h = span * 1e-3;
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    f(t, &y, &mut k[0]);
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::InvalidInput("ODE integrator exceeded step budget".into()));
        }
        let last = (t1 - t).abs() <= h;
        if last {
            h = (t1 - t).abs();
        }
        for s in 1..7 {
            for i in 0..n {
                stage[i] = y[i] + dir * h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            f(t + dir * C[s] * h, &stage, &mut k[s]);
        }
        let mut err = 0.0f64;
        for i in 0..n {
            y5[i] = y[i] + dir * h * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>();
            let y4 = y[i] + dir * h * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
            let sc = tol.abs + tol.rel * y[i].abs().max(y5[i].abs());
            err = err.max(((y5[i] - y4) / sc).abs());
        }
        if !err.is_finite() {
            return Err(Error::InvalidInput("non-finite value in ODE integration".into()));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + dir * h };
            y.copy_from_slice(&y5);
            // first-same-as-last
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if t != t1 && h < span * 1e-15 {
            return Err(Error::InvalidInput("ODE step size underflow".into()));
        }
    }
    Ok(y)
}
