//! Finite-size precoders: a proximal-gradient GLSE solver for the convex
//! cases, exhaustive oracles, RZF and antenna-selection baselines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalties::{prox_unchecked, PenaltySpec, SupportSpec};
use crate::rmt::{gram_eigenvalues, CMatrix};

pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest `N` accepted by [`glse_exhaustive_l0`].
pub const MAX_L0_ANTENNAS: usize = 16;
/// Largest `(M+1)^N` accepted by [`glse_exhaustive_discrete`].
pub const MAX_DISCRETE_CANDIDATES: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecodeOutput {
    pub x: Vec<Complex64>,
    /// `‖Hx − √ρ s‖² + Σ u(xₙ)`
    pub objective: f64,
    /// `‖Hx − √ρ s‖²/K`
    pub distortion: f64,
    /// `‖x‖²/N`
    pub power: f64,
    /// `‖x‖₀/N`
    pub activity: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PrecodeOutput {
    pub fn vector(&self) -> CVector {
        CVector::from_column_slice(&self.x)
    }
}

fn check_dims(h: &CMatrix, s: &CVector, rho: f64) -> Result<()> {
    if h.nrows() != s.len() {
        return Err(Error::Config(format!(
            "channel has {} rows but the data vector has {} entries",
            h.nrows(),
            s.len()
        )));
    }
    if h.ncols() == 0 || h.nrows() == 0 {
        return Err(Error::Config("empty channel matrix".into()));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Config(format!("rho must be finite and >= 0, got {rho}")));
    }
    Ok(())
}

/// Evaluates the output statistics of `x` on an instance.
pub fn evaluate(h: &CMatrix, s: &CVector, rho: f64, penalty: &PenaltySpec, x: &CVector) -> (f64, f64, f64, f64) {
    let r = h * x - s * Complex64::from(rho.sqrt());
    let fit = r.norm_squared();
    let pen: f64 = x.iter().map(|&v| penalty.eval(v)).sum();
    let n = x.len() as f64;
    let active = x.iter().filter(|v| **v != ZERO).count() as f64;
    (fit + pen, fit / h.nrows() as f64, x.norm_squared() / n, active / n)
}

fn output(
    h: &CMatrix,
    s: &CVector,
    rho: f64,
    penalty: &PenaltySpec,
    x: CVector,
    iterations: usize,
    converged: bool,
) -> PrecodeOutput {
    let (objective, distortion, power, activity) = evaluate(h, s, rho, penalty, &x);
    PrecodeOutput {
        x: x.as_slice().to_vec(),
        objective,
        distortion,
        power,
        activity,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvexOptions {
    pub max_iter: usize,
    /// Stop when the relative objective decrease falls below this ...
    pub rel_tol: f64,
    /// ... and the gradient-mapping residual is below `opt_tol·(1 + ‖x‖)`.
    pub opt_tol: f64,
}

impl Default for ConvexOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            rel_tol: 1e-10,
            opt_tol: 1e-9,
        }
    }
}

/// GLSE with `λ0 = 0` on `ℂ` or a disk, by accelerated proximal gradient
/// with step `1/L`, `L = 2σ_max(H)²`, and restart whenever the objective
/// increases.
pub fn glse_convex(
    h: &CMatrix,
    s: &CVector,
    rho: f64,
    penalty: &PenaltySpec,
    support: &SupportSpec,
    opts: &ConvexOptions,
) -> Result<PrecodeOutput> {
    check_dims(h, s, rho)?;
    if penalty.lambda0 != 0.0 {
        return Err(Error::Config("glse_convex needs lambda0 = 0".into()));
    }
    penalty.validate(false)?;
    support.validate()?;
    let cap = match *support {
        SupportSpec::FullComplex => f64::INFINITY,
        SupportSpec::Disk { peak_power } => peak_power.sqrt(),
        _ => {
            return Err(Error::Config(format!(
                "glse_convex needs a convex support, got {support:?}"
            )))
        }
    };
    let n = h.ncols();
    let lip = 2.0 * gram_eigenvalues(h).last().copied().unwrap_or(0.0);
    if lip == 0.0 {
        return Ok(output(h, s, rho, penalty, CVector::zeros(n), 0, true));
    }
    let t = 1.0 / lip;
    let (shrink, scale) = (t * penalty.lambda1, 1.0 + 2.0 * t * penalty.lambda2);
    let target = s * Complex64::from(rho.sqrt());
    let ha = h.adjoint();
    let grad = |v: &CVector| (&ha * (h * v - &target)) * Complex64::from(2.0);
    let step = |y: &CVector| -> CVector {
        let w = y - grad(y) * Complex64::from(t);
        w.map(|wi| prox_unchecked(wi, shrink, scale, cap))
    };
    let obj = |v: &CVector| (h * v - &target).norm_squared() + v.iter().map(|&z| penalty.eval(z)).sum::<f64>();

    let mut x = CVector::zeros(n);
    let mut y = x.clone();
    let mut f_x = obj(&x);
    let mut theta = 1.0_f64;
    for it in 1..=opts.max_iter {
        let x_new = step(&y);
        let f_new = obj(&x_new);
        if f_new > f_x + 1e-13 * f_x.abs() {
            // restart from the last iterate without momentum
            y = x.clone();
            theta = 1.0;
            continue;
        }
        // near the optimum the objective is flat to rounding, so the
        // gradient-mapping test decides restarts there
        if (&y - &x_new).dotc(&(&x_new - &x)).re > 0.0 {
            theta = 1.0;
            y = x_new.clone();
        } else {
            let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            y = &x_new + (&x_new - &x) * Complex64::from((theta - 1.0) / theta_new);
            theta = theta_new;
        }
        let dec = ((f_x - f_new) / f_x.abs().max(f64::MIN_POSITIVE)).max(0.0);
        x = x_new;
        f_x = f_new;
        if dec < opts.rel_tol {
            let res = (&x - step(&x)).norm() * lip;
            if res < opts.opt_tol * (1.0 + x.norm()) {
                return Ok(output(h, s, rho, penalty, x, it, true));
            }
        }
    }
    Ok(output(h, s, rho, penalty, x, opts.max_iter, false))
}

/// `‖G(x)‖` with `G(x) = L(x − prox(x − ∇f(x)/L))`, the optimality residual
/// of the composite objective on a convex support.
pub fn optimality_residual(
    h: &CMatrix,
    s: &CVector,
    rho: f64,
    penalty: &PenaltySpec,
    support: &SupportSpec,
    x: &CVector,
) -> Result<f64> {
    check_dims(h, s, rho)?;
    let cap = match *support {
        SupportSpec::FullComplex => f64::INFINITY,
        SupportSpec::Disk { peak_power } => peak_power.sqrt(),
        _ => return Err(Error::Config("optimality residual needs a convex support".into())),
    };
    let lip = 2.0 * gram_eigenvalues(h).last().copied().unwrap_or(0.0);
    if lip == 0.0 {
        return Ok(0.0);
    }
    let t = 1.0 / lip;
    let target = s * Complex64::from(rho.sqrt());
    let g = (h.adjoint() * (h * x - target)) * Complex64::from(2.0 * t);
    let p = (x - g).map(|w| prox_unchecked(w, t * penalty.lambda1, 1.0 + 2.0 * t * penalty.lambda2, cap));
    Ok((x - p).norm() * lip)
}

/// `x = √ρ Hᴴ(HHᴴ + λI)⁻¹ s`.
pub fn rzf(h: &CMatrix, s: &CVector, rho: f64, lambda2: f64) -> Result<PrecodeOutput> {
    check_dims(h, s, rho)?;
    if !(lambda2 >= 0.0 && lambda2.is_finite()) {
        return Err(Error::Config(format!(
            "RZF weight must be finite and >= 0, got {lambda2}"
        )));
    }
    let k = h.nrows();
    let gram = h * h.adjoint() + CMatrix::identity(k, k) * Complex64::from(lambda2);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Degenerate("HHᴴ + λI is singular; use λ > 0".into()))?;
    let x = h.adjoint() * chol.solve(s) * Complex64::from(rho.sqrt());
    Ok(output(h, s, rho, &PenaltySpec::ridge(lambda2), x, 0, true))
}

/// Exact ℓ0 GLSE over `ℂ` by enumerating all supports. Each support is
/// solved as a ridge problem on its columns.
pub fn glse_exhaustive_l0(h: &CMatrix, s: &CVector, rho: f64, penalty: &PenaltySpec) -> Result<PrecodeOutput> {
    check_dims(h, s, rho)?;
    let n = h.ncols();
    if n > MAX_L0_ANTENNAS {
        return Err(Error::Guard(format!(
            "exhaustive l0 search over N = {n} > {MAX_L0_ANTENNAS} antennas refused; use glse_convex with an l1 penalty as a surrogate"
        )));
    }
    if penalty.lambda1 != 0.0 {
        return Err(Error::Config("glse_exhaustive_l0 needs lambda1 = 0".into()));
    }
    penalty.validate(false)?;
    let gram = h.adjoint() * h;
    let b = h.adjoint() * s * Complex64::from(rho.sqrt());
    let base = rho * s.norm_squared();
    let mut best = (base, CVector::zeros(n));
    let mut idx = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        idx.clear();
        idx.extend((0..n).filter(|&i| mask & (1 << i) != 0));
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |r, c| {
            gram[(idx[r], idx[c])] + if r == c { Complex64::from(penalty.lambda2) } else { ZERO }
        });
        let rhs = CVector::from_fn(k, |r, _| b[idx[r]]);
        let v = match sub.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match sub.svd(true, true).solve(&rhs, 1e-12) {
                Ok(v) => v,
                Err(_) => continue,
            },
        };
        // at the ridge optimum the fit plus quadratic term is base − Re(bᴴv)
        let val = base - rhs.dotc(&v).re + penalty.lambda0 * k as f64;
        if val < best.0 {
            let mut x = CVector::zeros(n);
            for (r, &i) in idx.iter().enumerate() {
                x[i] = v[r];
            }
            best = (val, x);
        }
    }
    let n_sets = 1usize << n;
    Ok(output(h, s, rho, penalty, best.1, n_sets, true))
}

/// Exact GLSE over `{0} ∪ M-PSK` with a quadratic weight. With
/// `exact_active = Some(L)` only vectors with exactly `L` nonzero entries
/// are searched.
pub fn glse_exhaustive_discrete(
    h: &CMatrix,
    s: &CVector,
    rho: f64,
    lambda2: f64,
    support: &SupportSpec,
    exact_active: Option<usize>,
) -> Result<PrecodeOutput> {
    check_dims(h, s, rho)?;
    support.validate()?;
    let SupportSpec::MPskZero { order, peak_power } = *support else {
        return Err(Error::Config(format!(
            "glse_exhaustive_discrete needs an M-PSK support, got {support:?}"
        )));
    };
    let (k, n) = h.shape();
    let count = (order as f64 + 1.0).powi(n as i32);
    if count > MAX_DISCRETE_CANDIDATES {
        return Err(Error::Guard(format!(
            "exhaustive search over (M+1)^N = {count:.3e} > {MAX_DISCRETE_CANDIDATES:e} candidates refused"
        )));
    }
    if let Some(l) = exact_active {
        if l > n {
            return Err(Error::Config(format!("exact activity {l} exceeds N = {n}")));
        }
    }
    let alphabet: Vec<Complex64> = std::iter::once(ZERO).chain(support.constellation()).collect();
    // columns times each symbol, precomputed
    let cols: Vec<Vec<CVector>> = (0..n)
        .map(|j| alphabet.iter().map(|&a| h.column(j) * a).collect())
        .collect();
    let mut search = Search {
        cols: &cols,
        n,
        exact: exact_active,
        sym_pen: lambda2 * peak_power,
        best: f64::INFINITY,
        best_choice: vec![0; n],
        choice: vec![0; n],
        visited: 0,
    };
    let mut levels = vec![CVector::zeros(k); n + 1];
    levels[0] = -s * Complex64::from(rho.sqrt());
    search.descend(0, 0, &mut levels);
    if !search.best.is_finite() {
        return Err(Error::Degenerate(
            "no candidate satisfies the activity constraint".into(),
        ));
    }
    let x = CVector::from_iterator(n, search.best_choice.iter().map(|&c| alphabet[c]));
    let visited = search.visited;
    Ok(output(h, s, rho, &PenaltySpec::ridge(lambda2), x, visited, true))
}

struct Search<'a> {
    cols: &'a [Vec<CVector>],
    n: usize,
    exact: Option<usize>,
    sym_pen: f64,
    best: f64,
    best_choice: Vec<usize>,
    choice: Vec<usize>,
    visited: usize,
}

impl Search<'_> {
    /// `levels[j]` holds the residual `Hx − √ρ s` after fixing `x₀..x_{j−1}`.
    fn descend(&mut self, j: usize, active: usize, levels: &mut [CVector]) {
        if j == self.n {
            self.visited += 1;
            if self.exact.is_some_and(|l| l != active) {
                return;
            }
            let val = levels[j].norm_squared() + self.sym_pen * active as f64;
            if val < self.best {
                self.best = val;
                self.best_choice.copy_from_slice(&self.choice);
            }
            return;
        }
        if let Some(l) = self.exact {
            if active > l || active + (self.n - j) < l {
                return;
            }
        }
        for c in 0..self.cols[j].len() {
            let (head, tail) = levels.split_at_mut(j + 1);
            if c == 0 {
                tail[0].copy_from(&head[j]);
            } else {
                head[j].add_to(&self.cols[j][c], &mut tail[0]);
            }
            self.choice[j] = c;
            self.descend(j + 1, active + (c != 0) as usize, levels);
        }
    }
}

/// Indices (0-based, ascending) of the `l` columns with the largest norms.
/// Ties go to the lower index.
pub fn tas_strongest(h: &CMatrix, l: usize) -> Result<Vec<usize>> {
    let n = h.ncols();
    if l == 0 || l > n {
        return Err(Error::Config(format!("need 1 <= L <= N = {n}, got L = {l}")));
    }
    let norms: Vec<f64> = (0..n).map(|j| h.column(j).norm_squared()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut pick = order[..l].to_vec();
    pick.sort_unstable();
    Ok(pick)
}

/// Uniform random `l`-subset of `0..n`, ascending, deterministic in `seed`.
pub fn tas_random(n: usize, l: usize, seed: u64) -> Result<Vec<usize>> {
    if l == 0 || l > n {
        return Err(Error::Config(format!("need 1 <= L <= N = {n}, got L = {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = sample(&mut rng, n, l).into_vec();
    pick.sort_unstable();
    Ok(pick)
}

/// Columns `idx` of `h`.
pub fn select_columns(h: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(h.nrows(), idx.len(), |r, c| h[(r, idx[c])])
}

/// Places the entries of an output on a column subset back into length `n`.
pub fn embed(x: &[Complex64], idx: &[usize], n: usize) -> CVector {
    let mut out = CVector::zeros(n);
    for (v, &i) in x.iter().zip(idx) {
        out[i] = *v;
    }
    out
}

/// RZF on the antenna subset `idx`, zero elsewhere. Statistics are taken
/// over all `N` antennas.
pub fn rzf_on_subset(h: &CMatrix, s: &CVector, rho: f64, lambda2: f64, idx: &[usize]) -> Result<PrecodeOutput> {
    let sub = rzf(&select_columns(h, idx), s, rho, lambda2)?;
    let x = embed(&sub.x, idx, h.ncols());
    Ok(output(h, s, rho, &PenaltySpec::ridge(lambda2), x, 0, true))
}

/// Block-diagonal channel and stacked data for block-wise precoding.
pub fn block_stack(channels: &[CMatrix], data: &[CVector]) -> Result<(CMatrix, CVector)> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Config("block_stack needs at least one block".into()))?;
    let (k, n) = first.shape();
    if channels.len() != data.len() {
        return Err(Error::Config(format!(
            "{} channel blocks but {} data blocks",
            channels.len(),
            data.len()
        )));
    }
    if channels.iter().any(|c| c.shape() != (k, n)) || data.iter().any(|d| d.len() != k) {
        return Err(Error::Config("all blocks must share (K, N)".into()));
    }
    let b = channels.len();
    let mut ht = CMatrix::zeros(k * b, n * b);
    let mut st = CVector::zeros(k * b);
    for (i, (hb, sb)) in channels.iter().zip(data).enumerate() {
        ht.view_mut((i * k, i * n), (k, n)).copy_from(hb);
        st.rows_mut(i * k, k).copy_from(sb);
    }
    Ok((ht, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmt::{sample_channel, ChannelSpec};
    use approx::assert_relative_eq;

    fn instance(n: usize, k: usize, seed: u64) -> (CMatrix, CVector) {
        let h = sample_channel(&ChannelSpec::new(n, k, seed)).unwrap().matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let s = CVector::from_vec(crate::rmt::complex_normals(&mut rng, k, 1.0));
        (h, s)
    }

    #[test]
    fn convex_ridge_is_rzf() {
        let (h, s) = instance(64, 32, 3);
        let a = glse_convex(
            &h,
            &s,
            1.0,
            &PenaltySpec::ridge(0.1),
            &SupportSpec::FullComplex,
            &ConvexOptions::default(),
        )
        .unwrap();
        let b = rzf(&h, &s, 1.0, 0.1).unwrap();
        let d = (a.vector() - b.vector()).norm() / b.vector().norm();
        assert!(
            a.converged && d < 1e-6,
            "{d} {} {}",
            a.iterations,
            optimality_residual(
                &h,
                &s,
                1.0,
                &PenaltySpec::ridge(0.1),
                &SupportSpec::FullComplex,
                &a.vector()
            )
            .unwrap()
        );
    }

    #[test]
    fn rzf_single_user() {
        let (h, s) = instance(5, 1, 9);
        let out = rzf(&h, &s, 2.0, 0.3).unwrap();
        let hr = h.row(0).adjoint();
        let want = &hr * s[0] * Complex64::from(2f64.sqrt() / (h.row(0).norm_squared() + 0.3));
        assert_relative_eq!((out.vector() - want).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exhaustive_l0_without_sparsity_is_ridge() {
        let (h, s) = instance(8, 4, 1);
        let a = glse_exhaustive_l0(&h, &s, 1.0, &PenaltySpec::ridge(0.2)).unwrap();
        let b = rzf(&h, &s, 1.0, 0.2).unwrap();
        assert!((a.vector() - b.vector()).norm() < 1e-8 * b.vector().norm());
        let z = glse_exhaustive_l0(&h, &s, 1.0, &PenaltySpec::l0(0.2, 1e6)).unwrap();
        assert_eq!(z.activity, 0.0);
    }

    #[test]
    fn discrete_scalar_case() {
        let h = CMatrix::from_element(1, 1, Complex64::from(1.0));
        let s = CVector::from_element(1, Complex64::from(1.0));
        let sup = SupportSpec::MPskZero {
            order: 2,
            peak_power: 1.0,
        };
        let out = glse_exhaustive_discrete(&h, &s, 1.0, 0.0, &sup, None).unwrap();
        assert!((out.x[0] - Complex64::from(1.0)).norm() < 1e-12);
        let zero = glse_exhaustive_discrete(&h, &(s * Complex64::from(0.0)), 1.0, 0.5, &sup, None).unwrap();
        assert_eq!(zero.x[0], ZERO);
    }

    #[test]
    fn strongest_columns() {
        let h = CMatrix::from_row_slice(
            1,
            3,
            &[Complex64::from(3.0), Complex64::from(1.0), Complex64::from(2.0)],
        );
        assert_eq!(tas_strongest(&h, 2).unwrap(), vec![0, 2]);
        assert_eq!(tas_strongest(&h, 3).unwrap(), vec![0, 1, 2]);
        assert!(tas_random(4, 0, 1).is_err());
        assert_eq!(tas_random(4, 4, 1).unwrap(), vec![0, 1, 2, 3]);
    }
}
