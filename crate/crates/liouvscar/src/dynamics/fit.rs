//! Least-squares fit of `e^{-βt} cos(ωt)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: f64,
    pub omega: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual.
    pub rms: f64,
    pub samples: usize,
    pub iterations: usize,
}

fn model(t: f64, beta: f64, omega: f64) -> f64 {
    (-beta * t).exp() * (omega * t).cos()
}

fn sse(t: &[f64], y: &[f64], p: (f64, f64)) -> f64 {
    t.iter().zip(y).map(|(&ti, &yi)| (yi - model(ti, p.0, p.1)).powi(2)).sum()
}

/// Initial guess: ω from the first zero crossing, β from the size of the
/// first extremum after it.
fn initial_guess(t: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let z = (1..y.len()).find(|&i| y[i - 1] > 0.0 && y[i] <= 0.0).ok_or_else(|| Error::Fit("signal never crosses zero".into()))?;
    let tz = t[z - 1] + (t[z] - t[z - 1]) * y[z - 1] / (y[z - 1] - y[z]);
    let omega = std::f64::consts::FRAC_PI_2 / tz;
    let ext = (z..y.len()).take_while(|&i| i + 1 >= y.len() || y[i + 1] < y[i]).last().unwrap_or(z);
    let beta = if y[ext] < 0.0 { (-(-y[ext]).ln() / t[ext]).max(0.0) } else { 0.0 };
    Ok((beta, omega))
}

/// Levenberg-Marquardt on `(β, ω)` over the samples with `t` in `window`.
pub fn fit_damped_cosine(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<FitResult> {
    if t.len() != y.len() {
        return Err(Error::Dimension { expected: t.len(), got: y.len() });
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = t.iter().zip(y).filter(|(&ti, _)| ti >= window.0 && ti <= window.1).map(|(&a, &b)| (a, b)).unzip();
    if ts.len() < 20 {
        return Err(Error::Fit(format!("{} samples in the fit window, need 20", ts.len())));
    }
    let mut p = initial_guess(&ts, &ys)?;
    let mut cost = sse(&ts, &ys, p);
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let (mut a, mut g) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&ti, &yi) in ts.iter().zip(&ys) {
            let e = (-p.0 * ti).exp();
            let (c, s) = ((p.1 * ti).cos(), (p.1 * ti).sin());
            let jac = [-ti * e * c, -ti * e * s];
            let res = yi - e * c;
            for i in 0..2 {
                g[i] += jac[i] * res;
                for j in 0..2 {
                    a[i][j] += jac[i] * jac[j];
                }
            }
        }
        let mut accepted = false;
        while mu < 1e12 {
            let m = [[a[0][0] * (1.0 + mu), a[0][1]], [a[1][0], a[1][1] * (1.0 + mu)]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 1e-300 {
                mu *= 10.0;
                continue;
            }
            let d0 = (m[1][1] * g[0] - m[0][1] * g[1]) / det;
            let d1 = (m[0][0] * g[1] - m[1][0] * g[0]) / det;
            let trial = (p.0 + d0, p.1 + d1);
            let c = sse(&ts, &ys, trial);
            if c < cost {
                let small = (d0.abs() + d1.abs()) < 1e-12 * (1.0 + p.0.abs() + p.1.abs());
                p = trial;
                cost = c;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                if small {
                    mu = f64::INFINITY;
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted || !mu.is_finite() {
            break;
        }
    }
    if !p.0.is_finite() || !p.1.is_finite() {
        return Err(Error::Fit("fit diverged".into()));
    }
    Ok(FitResult { beta: p.0, omega: p.1, window, rms: (cost / ts.len() as f64).sqrt(), samples: ts.len(), iterations })
}
