//! Projected fixed-point iteration `x ← Π(x + d(F(x) − x))` with Newton
//! acceleration on the projected residual.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct FpConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Plain damped steps taken before Newton steps are attempted.
    pub newton_after: usize,
    pub lower: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct FpOutcome {
    pub x: Vec<f64>,
    /// Per-coordinate scaled residuals at `x`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FpOutcome {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

fn project(x: &mut [f64], lower: &[f64]) {
    for (v, &lo) in x.iter_mut().zip(lower) {
        if *v < lo {
            *v = lo;
        }
    }
}

/// Scaled projected residual `(Π(F(x)) − x)/(1 + |x|)`.
fn residual<F: FnMut(&[f64]) -> Option<Vec<f64>>>(map: &mut F, x: &[f64], lower: &[f64]) -> Option<Vec<f64>> {
    let mut fx = map(x)?;
    if fx.iter().any(|v| !v.is_finite()) {
        return None;
    }
    project(&mut fx, lower);
    Some(fx.iter().zip(x).map(|(f, v)| (f - v) / (1.0 + v.abs())).collect())
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn iterate<F: FnMut(&[f64]) -> Option<Vec<f64>>>(mut map: F, x0: &[f64], cfg: &FpConfig) -> FpOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, &cfg.lower);
    let fail = |x: Vec<f64>, it| FpOutcome {
        residuals: vec![f64::INFINITY; n],
        x,
        iterations: it,
        converged: false,
    };
    let Some(mut r) = residual(&mut map, &x, &cfg.lower) else {
        return fail(x, 0);
    };
    let mut it = 0;
    while it < cfg.max_iter {
        if max_abs(&r) < cfg.tol {
            return FpOutcome {
                x,
                residuals: r,
                iterations: it,
                converged: true,
            };
        }
        it += 1;
        if it > cfg.newton_after {
            if let Some((xn, rn)) = newton_step(&mut map, &x, &r, cfg) {
                x = xn;
                r = rn;
                continue;
            }
        }
        // damped step in unscaled coordinates
        let mut xn: Vec<f64> = x
            .iter()
            .zip(&r)
            .map(|(v, rv)| v + cfg.damping * rv * (1.0 + v.abs()))
            .collect();
        project(&mut xn, &cfg.lower);
        match residual(&mut map, &xn, &cfg.lower) {
            Some(rn) => {
                x = xn;
                r = rn;
            }
            None => return fail(x, it),
        }
    }
    let converged = max_abs(&r) < cfg.tol;
    FpOutcome {
        x,
        residuals: r,
        iterations: it,
        converged,
    }
}

fn newton_step<F: FnMut(&[f64]) -> Option<Vec<f64>>>(
    map: &mut F,
    x: &[f64],
    r: &[f64],
    cfg: &FpConfig,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let h = 1e-7 * (1.0 + x[j].abs());
        let mut xp = x.to_vec();
        // step inward at a lower bound so the difference stays feasible
        xp[j] += h;
        let rp = residual(map, &xp, &cfg.lower)?;
        for i in 0..n {
            jac[(i, j)] = (rp[i] - r[i]) / h;
        }
    }
    let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
    let delta = jac.lu().solve(&rhs)?;
    if delta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let r0 = norm(r);
    let mut t = 1.0;
    for _ in 0..8 {
        let mut xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(v, d)| v + t * d).collect();
        project(&mut xn, &cfg.lower);
        if let Some(rn) = residual(map, &xn, &cfg.lower) {
            if norm(&rn) < (1.0 - 1e-4 * t) * r0 {
                return Some((xn, rn));
            }
        }
        t *= 0.5;
    }
    None
}
