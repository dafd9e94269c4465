//! Dormand-Prince 5(4) with step-size control, stepping onto each output time.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Dp45Options {
    /// Mixed absolute/relative local tolerance.
    pub tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dp45Options {
    fn default() -> Self {
        Self { tol: 1e-10, h_init: 1e-3, h_min: 1e-14, max_steps: 10_000_000 }
    }
}

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
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrate the autonomous system `y' = f(y)` and return `y` at every
/// time of `t_out` (the first entry is the start time).
pub fn dp45(f: impl Fn(&Array1<C64>) -> Array1<C64>, y0: Array1<C64>, t_out: &[f64], opts: Dp45Options) -> Result<Vec<Array1<C64>>> {
    let mut out = Vec::with_capacity(t_out.len());
    out.push(y0.clone());
    let mut y = y0;
    let mut t = t_out[0];
    let mut h = opts.h_init;
    let mut steps = 0usize;
    let mut k1 = f(&y);
    for &target in &t_out[1..] {
        while t < target {
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            let mut k: Vec<Array1<C64>> = Vec::with_capacity(7);
            k.push(k1.clone());
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        ys.scaled_add(C64::new(step * a, 0.0), kj);
                    }
                }
                k.push(f(&ys));
            }
            let mut y5 = y.clone();
            let mut err = 0.0f64;
            for (i, b5) in B5.iter().enumerate() {
                if *b5 != 0.0 {
                    y5.scaled_add(C64::new(step * b5, 0.0), &k[i]);
                }
            }
            for idx in 0..y.len() {
                let e: C64 = k.iter().enumerate().map(|(i, ki)| ki[idx] * (B5[i] - B4[i])).sum();
                let sc = opts.tol * (1.0 + y[idx].norm().max(y5[idx].norm()));
                err = err.max((e * step).norm() / sc);
            }
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Integration(format!("step budget exhausted at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
                k1 = k.swap_remove(6);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) {
                h = step * factor;
            }
            if h < opts.h_min {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let lam = C64::new(-0.7, 3.0);
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.37).collect();
        let ys = dp45(|y| y.mapv(|v| v * lam), Array1::from(vec![C64::new(1.0, 0.0)]), &t, Dp45Options::default()).unwrap();
        for (y, &ti) in ys.iter().zip(&t) {
            assert!((y[0] - (lam * ti).exp()).norm() < 1e-9);
        }
    }
}
