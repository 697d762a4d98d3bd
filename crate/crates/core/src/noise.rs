//! Noise models, the impulsive `(ε, η)` threshold decomposition and its
//! moment bounds.
//!
//! Given sampled noise `ξ ∈ ℝⁿ` on a grid with point measure `1/n` and a
//! threshold `λ > 0`, the corrupted set is `M_c = {i : |ξ_i| > λ}`. The
//! intact part carries `ε = (1/n) Σ_{i ∉ M_c} |ξ_i|` and the corrupted set has
//! measure `η = #M_c / n` (the domain has measure one).
//!
//! All randomness goes through [`ChaCha8Rng`] seeded from a `u64`, so every
//! sample is reproducible from its seed. Streams for replicate studies come
//! from [`derive_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linop::Grid;

/// Measure `|M|` of the data domain `[0, 1]`.
pub const DOMAIN_MEASURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian {
        sigma: f64,
    },
    /// `N(0, σ²)` plus, with probability `outlier_prob` per component, an
    /// independent jump of `±outlier_scale` with a fair random sign.
    GaussianWithOutliers {
        sigma: f64,
        outlier_prob: f64,
        outlier_scale: f64,
    },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseModel::Gaussian { sigma }
    }

    pub fn with_outliers(sigma: f64, outlier_prob: f64, outlier_scale: f64) -> Self {
        NoiseModel::GaussianWithOutliers {
            sigma,
            outlier_prob,
            outlier_scale,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::GaussianWithOutliers { sigma, .. } => sigma,
        }
    }

    /// `σ = 0` is accepted and yields exact data.
    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be finite and nonnegative, got {sigma}")));
        }
        if let NoiseModel::GaussianWithOutliers {
            outlier_prob,
            outlier_scale,
            ..
        } = *self
        {
            if !(0.0..=1.0).contains(&outlier_prob) {
                return Err(invalid(
                    "outlier_prob",
                    format!("must lie in [0, 1], got {outlier_prob}"),
                ));
            }
            if !(outlier_scale > 0.0 && outlier_scale.is_finite()) {
                return Err(invalid(
                    "outlier_scale",
                    format!("must be positive, got {outlier_scale}"),
                ));
            }
        }
        Ok(())
    }

    /// Variance of a single component.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::GaussianWithOutliers {
                sigma,
                outlier_prob,
                outlier_scale,
            } => sigma * sigma + outlier_prob * outlier_scale * outlier_scale,
        }
    }

    /// Cumulative distribution function of a single component.
    pub fn cdf(&self, x: f64) -> f64 {
        let gauss = |sigma: f64, x: f64| {
            if sigma == 0.0 {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                standard_normal_cdf(x / sigma)
            }
        };
        match *self {
            NoiseModel::Gaussian { sigma } => gauss(sigma, x),
            NoiseModel::GaussianWithOutliers {
                sigma,
                outlier_prob: p,
                outlier_scale: s,
            } => (1.0 - p) * gauss(sigma, x) + 0.5 * p * (gauss(sigma, x - s) + gauss(sigma, x + s)),
        }
    }
}

/// `Φ(x)`, the standard normal cdf.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mixes `parts` into `master` to obtain an independent-looking stream seed.
///
/// Uses the SplitMix64 finalizer on each step, so nearby inputs give
/// unrelated seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// Draws `n` i.i.d. components of `model`.
///
/// Gaussian components are drawn first, outlier indicators afterwards, so a
/// zero outlier probability reproduces the pure Gaussian sample for the same
/// seed.
pub fn sample_noise(model: &NoiseModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = model.sigma();
    let mut xi: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        })
        .collect();
    if let NoiseModel::GaussianWithOutliers {
        outlier_prob,
        outlier_scale,
        ..
    } = *model
    {
        for x in xi.iter_mut() {
            let hit = rng.random::<f64>() < outlier_prob;
            let positive: bool = rng.random();
            if hit {
                *x += if positive { outlier_scale } else { -outlier_scale };
            }
        }
    }
    Ok(xi)
}

/// `(ε, η)` split of a noise vector at threshold `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveDecomposition {
    pub lambda: f64,
    /// Zero-based indices with `|ξ_i| > λ`.
    pub corrupted: Vec<usize>,
    /// `L1` mass of the intact components.
    pub epsilon: f64,
    /// Measure of the corrupted set.
    pub eta: f64,
}

pub fn decompose(xi: &[f64], lambda: f64, grid: &Grid) -> Result<ImpulsiveDecomposition> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    crate::error::check_len(grid.n(), xi.len())?;
    Ok(split(xi, lambda, grid.weight()))
}

fn split(xi: &[f64], lambda: f64, weight: f64) -> ImpulsiveDecomposition {
    let mut corrupted = Vec::new();
    let mut intact = 0.0;
    for (i, &x) in xi.iter().enumerate() {
        if x.abs() > lambda {
            corrupted.push(i);
        } else {
            intact += x.abs();
        }
    }
    let eta = weight * corrupted.len() as f64 * DOMAIN_MEASURE;
    ImpulsiveDecomposition {
        lambda,
        corrupted,
        epsilon: weight * intact,
        eta,
    }
}

/// Upper bounds on `E[ε]` and `E[η^r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBounds {
    pub eps_bound: f64,
    pub eta_bound: f64,
}

/// Moment bounds for i.i.d. centered noise with the cdf and variance of
/// `model`:
///
/// ```text
/// E[ε]   ≤ sqrt(F(λ) − F(−λ)) · sqrt(V[ξ₁])
/// E[η^r] ≤ |M|^r (1 − F(λ) + F(−λ))
/// ```
pub fn moment_bounds(model: &NoiseModel, lambda: f64, r: f64, measure: f64) -> Result<MomentBounds> {
    model.validate()?;
    check_bound_args(lambda, r, measure)?;
    let inside = (model.cdf(lambda) - model.cdf(-lambda)).max(0.0);
    Ok(MomentBounds {
        eps_bound: inside.sqrt() * model.variance().sqrt(),
        eta_bound: measure.powf(r) * (1.0 - model.cdf(lambda) + model.cdf(-lambda)),
    })
}

fn check_bound_args(lambda: f64, r: f64, measure: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    if !(r >= 1.0) {
        return Err(invalid("r", format!("must be at least 1, got {r}")));
    }
    if !(measure > 0.0) {
        return Err(invalid("measure", format!("must be positive, got {measure}")));
    }
    Ok(())
}

/// Gaussian specialization of [`moment_bounds`]:
/// `E[ε] ≤ σ sqrt(1 − 2Φ(−λ/σ))`, `E[η^r] ≤ 2|M|^r Φ(−λ/σ)`.
pub fn gaussian_moment_bounds(sigma: f64, lambda: f64, r: f64, measure: f64) -> Result<MomentBounds> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    check_bound_args(lambda, r, measure)?;
    let tail = standard_normal_cdf(-lambda / sigma);
    Ok(MomentBounds {
        eps_bound: sigma * (1.0 - 2.0 * tail).max(0.0).sqrt(),
        eta_bound: 2.0 * measure.powf(r) * tail,
    })
}

/// Monte Carlo means of `ε` and `η^r` with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean_eps: f64,
    pub mean_eta_r: f64,
    pub se_eps: f64,
    pub se_eta_r: f64,
    pub trials: usize,
}

/// Estimates `E[ε]` and `E[η^r]` from `trials` independent noise vectors of
/// length `n`. Trial `t` uses the stream `derive_seed(seed, [t])`.
pub fn empirical_moments(
    model: &NoiseModel,
    lambda: f64,
    r: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    if !(r >= 1.0) {
        return Err(invalid("r", format!("must be at least 1, got {r}")));
    }
    let weight = 1.0 / n.max(1) as f64;
    let mut eps = Welford::default();
    let mut eta = Welford::default();
    for t in 0..trials {
        let xi = sample_noise(model, n, derive_seed(seed, &[t as u64]))?;
        // λ = 0 is allowed here: every nonzero component counts as corrupted
        let d = split(&xi, lambda, weight);
        eps.push(d.epsilon);
        eta.push(d.eta.powf(r));
    }
    Ok(MomentEstimate {
        mean_eps: eps.mean,
        mean_eta_r: eta.mean,
        se_eps: eps.standard_error(),
        se_eta_r: eta.standard_error(),
        trials,
    })
}

#[derive(Default)]
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.count - 1) as f64;
        (var / self.count as f64).sqrt()
    }
}
