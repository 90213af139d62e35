//! Channel ensemble `H = A^{1/2} G` and the spectral transforms of `J = HᴴH`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub type CMatrix = DMatrix<Complex64>;

/// Discrete path-loss law: `(gain, probability)` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLoss(pub Vec<(f64, f64)>);

impl Default for PathLoss {
    fn default() -> Self {
        Self::unit()
    }
}

impl PathLoss {
    pub fn unit() -> Self {
        PathLoss(vec![(1.0, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config("path-loss law has no atoms".into()));
        }
        let mut total = 0.0;
        for &(a, p) in &self.0 {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("path-loss gain {a} must be finite and >= 0")));
            }
            if !(p >= 0.0) {
                return Err(Error::Config(format!("path-loss probability {p} is negative")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("path-loss probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&(a, p)| a == 1.0 || p == 0.0)
    }

    pub fn mean_gain(&self) -> f64 {
        self.0.iter().map(|&(a, p)| a * p).sum()
    }

    fn check_pole(&self, omega: f64) -> Result<()> {
        for (i, &(a, p)) in self.0.iter().enumerate() {
            if p > 0.0 && 1.0 - a * omega <= 0.0 {
                return Err(Error::Domain(format!(
                    "R-transform pole: atom {i} (gain {a}) has 1 - a*omega = {} at omega = {omega}",
                    1.0 - a * omega
                )));
            }
        }
        Ok(())
    }
}

/// `R(ω) = α Σ p a/(1 − aω)`.
pub fn r_transform(load: f64, pl: &PathLoss, omega: f64) -> Result<f64> {
    pl.check_pole(omega)?;
    Ok(load * pl.0.iter().map(|&(a, p)| p * a / (1.0 - a * omega)).sum::<f64>())
}

/// `R'(ω) = α Σ p a²/(1 − aω)²`.
pub fn r_transform_prime(load: f64, pl: &PathLoss, omega: f64) -> Result<f64> {
    pl.check_pole(omega)?;
    Ok(load
        * pl.0
            .iter()
            .map(|&(a, p)| {
                let d = 1.0 - a * omega;
                p * a * a / (d * d)
            })
            .sum::<f64>())
}

/// `∫₀ˣ R(−t) dt = α Σ p ln(1 + a x)`, for `x ≥ 0`.
pub fn r_transform_integral(load: f64, pl: &PathLoss, x: f64) -> f64 {
    load * pl.0.iter().map(|&(a, p)| p * (a * x).ln_1p()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub n_tx: usize,
    pub n_users: usize,
    pub load: f64,
    #[serde(default)]
    pub pathloss_atoms: PathLoss,
    pub rng_seed: u64,
}

impl ChannelSpec {
    pub fn new(n_tx: usize, n_users: usize, rng_seed: u64) -> Self {
        let load = if n_tx == 0 {
            f64::NAN
        } else {
            n_users as f64 / n_tx as f64
        };
        Self {
            n_tx,
            n_users,
            load,
            pathloss_atoms: PathLoss::unit(),
            rng_seed,
        }
    }

    pub fn with_pathloss(mut self, pl: PathLoss) -> Self {
        self.pathloss_atoms = pl;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_users == 0 {
            return Err(Error::Config(format!(
                "channel dimensions must be positive (N={}, K={})",
                self.n_tx, self.n_users
            )));
        }
        let exact = self.n_users as f64 / self.n_tx as f64;
        if (self.load - exact).abs() > 1e-12 * exact {
            return Err(Error::Config(format!(
                "load {} does not equal K/N = {exact}",
                self.load
            )));
        }
        self.pathloss_atoms.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSample {
    pub matrix: CMatrix,
    pub seed_used: u64,
}

impl ChannelSample {
    pub fn n_tx(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Circularly symmetric complex normal draws with total variance `var`.
pub fn complex_normals(rng: &mut ChaCha8Rng, n: usize, var: f64) -> Vec<Complex64> {
    let nd = Normal::new(0.0, (0.5 * var).sqrt()).expect("finite variance");
    (0..n).map(|_| Complex64::new(nd.sample(rng), nd.sample(rng))).collect()
}

pub fn sample_channel(spec: &ChannelSpec) -> Result<ChannelSample> {
    spec.validate()?;
    let (n, k) = (spec.n_tx, spec.n_users);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let atoms = &spec.pathloss_atoms.0;
    let gains: Vec<f64> = if atoms.len() == 1 {
        vec![atoms[0].0; k]
    } else {
        let w = WeightedIndex::new(atoms.iter().map(|a| a.1))
            .map_err(|e| Error::Config(format!("path-loss weights: {e}")))?;
        (0..k).map(|_| atoms[w.sample(&mut rng)].0).collect()
    };
    let g = complex_normals(&mut rng, n * k, 1.0 / n as f64);
    let matrix = CMatrix::from_fn(k, n, |r, c| g[r * n + c] * gains[r].sqrt());
    Ok(ChannelSample {
        matrix,
        seed_used: spec.rng_seed,
    })
}

/// Eigenvalues of `J = HᴴH` (length N), ascending. Uses the smaller Gramian
/// and pads with zeros.
pub fn gram_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let (k, n) = h.shape();
    let small = if k < n { h * h.adjoint() } else { h.adjoint() * h };
    let mut ev: Vec<f64> = small.symmetric_eigenvalues().iter().map(|&v| v.max(0.0)).collect();
    ev.resize(n, 0.0);
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn stieltjes_of_eigenvalues(ev: &[f64], s: Complex64) -> Complex64 {
    ev.iter()
        .map(|&l| (Complex64::new(l, 0.0) - s).inv())
        .sum::<Complex64>()
        / ev.len() as f64
}

/// `(1/N) Σ (λₙ − s)⁻¹` over the eigenvalues of `J`.
pub fn empirical_stieltjes(sample: &ChannelSample, s: Complex64) -> Result<Complex64> {
    if !(s.im > 0.0) {
        return Err(Error::Domain(format!("Stieltjes argument needs Im s > 0, got {s}")));
    }
    Ok(stieltjes_of_eigenvalues(&gram_eigenvalues(&sample.matrix), s))
}

/// Limiting Stieltjes transform, the root of `R(−g) − 1/g = s` with `Im g > 0`.
pub fn stieltjes_limit(load: f64, pl: &PathLoss, s: Complex64) -> Result<Complex64> {
    if !(s.im > 0.0) {
        return Err(Error::Domain(format!("Stieltjes argument needs Im s > 0, got {s}")));
    }
    pl.validate()?;
    if pl.is_unit() {
        // s g² + (s + 1 − α) g + 1 = 0
        let b = s + 1.0 - load;
        let disc = (b * b - 4.0 * s).sqrt();
        let g1 = (-b + disc) / (2.0 * s);
        let g2 = (-b - disc) / (2.0 * s);
        return Ok(if g1.im >= g2.im { g1 } else { g2 });
    }
    let h = |g: Complex64| -> (Complex64, Complex64) {
        let mut r = Complex64::new(0.0, 0.0);
        let mut dr = Complex64::new(0.0, 0.0);
        for &(a, p) in &pl.0 {
            let d = 1.0 + a * g;
            r += p * a / d;
            dr -= p * a * a / (d * d);
        }
        (load * r - 1.0 / g - s, load * dr + 1.0 / (g * g))
    };
    // continuation from far above the real axis, where g ≈ −1/s
    let top = s.im.max(10.0 + s.re.abs());
    let steps = 60;
    let mut g = -1.0 / Complex64::new(s.re, top);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let im = top * (s.im / top).powf(t);
        let target = Complex64::new(s.re, im);
        let hs = |g: Complex64| {
            let (v, d) = h(g);
            (v + s - target, d)
        };
        for _ in 0..100 {
            let (v, d) = hs(g);
            let mut step = v / d;
            // keep the iterate in the upper half plane
            while (g - step).im <= 0.0 {
                step *= 0.5;
            }
            g -= step;
            if step.norm() < 1e-14 * (1.0 + g.norm()) {
                break;
            }
        }
    }
    let (res, _) = h(g);
    if !(res.norm() < 1e-8 * (1.0 + g.norm())) {
        return Err(Error::NoConvergence {
            iterations: steps,
            residual: res.norm(),
            detail: format!("Stieltjes continuation at s = {s}"),
        });
    }
    Ok(g)
}

/// Marčenko-Pastur density of `J` for unit gains (continuous part only).
pub fn mp_density(load: f64, x: f64) -> f64 {
    let (a, b) = mp_edges(load);
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * x)
}

pub fn mp_edges(load: f64) -> (f64, f64) {
    let r = load.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// CDF of the unit-gain limiting spectrum of `J`, including the atom at 0.
pub fn mp_cdf(load: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let (a, b) = mp_edges(load);
    let atom = (1.0 - load).max(0.0);
    if x <= a {
        return atom;
    }
    let hi = x.min(b);
    // t = a + (b−a) sin²θ removes the square-root edges
    let th = (((hi - a) / (b - a)).sqrt()).min(1.0).asin();
    let body = quad::integrate(
        |t| {
            let (s, c) = t.sin_cos();
            let lam = a + (b - a) * s * s;
            let w = (b - a) * s * c;
            w * 2.0 * w / (2.0 * std::f64::consts::PI * lam)
        },
        0.0,
        th,
        quad::Tolerance::default(),
    );
    (atom + body).min(1.0)
}
