//! Sampling check of the per-component joint Gaussian construction.
//!
//! Component ℓ is realized as a zero-mean pair (Z, Ẑ) with covariance
//! `[[λ, c], [c, λ̂]]`, `c = √(λ̂(λ−γ))`. Then E[(Z−Ẑ)²] is the closed-form
//! distortion and Var(Z | Ẑ) = γ.
//!
//! Draws come from a counter-based generator: sample `i` of stream `k` is a
//! pure function of `(seed, k, i)`, so streams can be produced in any order
//! or in parallel and merged deterministically.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::ComponentKernel;
use crate::math::{ln, sin_cos, sqrt};
use crate::model::{PerceptionMetric, RdpSolution, SourceSpectrum};

/// Samples per stream.
pub const STREAM_LEN: u64 = 1 << 16;
pub const MIN_SAMPLES: u64 = 1000;
/// Pass threshold in standard errors.
pub const SE_MULTIPLIER: f64 = 4.0;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointGaussianPair {
    lambda: f64,
    gamma: f64,
    lambda_hat: f64,
    cross: f64,
}

impl JointGaussianPair {
    pub fn cov(&self) -> [[f64; 2]; 2] {
        [[self.lambda, self.cross], [self.cross, self.lambda_hat]]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    pub fn determinant(&self) -> f64 {
        self.lambda * self.lambda_hat - self.cross * self.cross
    }

    /// E[(Z − Ẑ)²] = λ − 2c + λ̂.
    pub fn analytic_distortion(&self) -> f64 {
        ComponentKernel::new_unchecked(self.lambda).distortion_unchecked(self.gamma, self.lambda_hat)
    }

    /// Lower-triangular factor `[[a, 0], [b, d]]` of the covariance.
    fn factor(&self) -> (f64, f64, f64) {
        let a = sqrt(self.lambda);
        (a, self.cross / a, sqrt(self.lambda_hat * self.gamma / self.lambda))
    }
}

pub fn build_pair(lambda: f64, gamma: f64, lambda_hat: f64) -> Result<JointGaussianPair> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::DomainError("component variance must be positive and finite"));
    }
    if !(gamma > 0.0 && gamma <= lambda) {
        return Err(Error::DomainError("water level must lie in (0, λ]"));
    }
    if !(lambda_hat >= 0.0 && lambda_hat.is_finite()) {
        return Err(Error::DomainError(
            "reconstruction variance must be nonnegative and finite",
        ));
    }
    let pair = JointGaussianPair {
        lambda,
        gamma,
        lambda_hat,
        cross: sqrt(lambda_hat * (lambda - gamma)),
    };
    let det = pair.determinant();
    if det < -1e-12 * lambda * lambda_hat {
        return Err(Error::NonPsd { determinant: det });
    }
    Ok(pair)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticStats {
    /// ½ ln(λ/γ), nats.
    pub mi: f64,
    /// +∞ when λ̂ = 0.
    pub kl: f64,
    pub w2: f64,
}

pub fn analytic_component_stats(pair: &JointGaussianPair) -> AnalyticStats {
    let k = ComponentKernel::new_unchecked(pair.lambda);
    AnalyticStats {
        mi: crate::model::component_rate(pair.lambda, pair.gamma),
        kl: k.perception_kl(pair.lambda_hat),
        w2: k.perception_w2(pair.lambda_hat),
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of component `index` under a run seed.
pub fn component_seed(seed: u64, index: usize) -> u64 {
    splitmix(seed ^ (index as u64).wrapping_add(1).wrapping_mul(GOLDEN))
}

fn stream_key(seed: u64, stream: u64) -> u64 {
    splitmix(splitmix(seed).wrapping_add(stream.wrapping_mul(GOLDEN)))
}

/// Uniform in (0, 1].
fn unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals for counter `i` of a keyed stream.
fn normal_pair(key: u64, i: u64) -> (f64, f64) {
    let base = key.wrapping_add((2 * i).wrapping_mul(GOLDEN));
    let u1 = unit(splitmix(base));
    let u2 = unit(splitmix(base.wrapping_add(GOLDEN)));
    let r = sqrt(-2.0 * ln(u1));
    let (s, c) = sin_cos(core::f64::consts::TAU * u2);
    (r * c, r * s)
}

/// Running first and second moments (Welford/Chan) of one statistic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            sqrt(self.variance() / self.n as f64)
        }
    }
}

/// Sufficient statistics of a batch of draws.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    /// (z − ẑ)²
    pub distortion: Welford,
    /// ẑ²
    pub recon_power: Welford,
    pub sum_zz: f64,
    pub sum_hh: f64,
    pub sum_zh: f64,
}

impl Moments {
    pub fn merge(&mut self, other: &Moments) {
        self.distortion.merge(&other.distortion);
        self.recon_power.merge(&other.recon_power);
        self.sum_zz += other.sum_zz;
        self.sum_hh += other.sum_hh;
        self.sum_zh += other.sum_zh;
    }

    pub fn n(&self) -> u64 {
        self.distortion.n
    }
}

/// Number of streams needed for `n` draws.
pub fn stream_count(n: u64) -> u64 {
    n.div_ceil(STREAM_LEN)
}

/// Draws of stream `stream` that belong to a run of `n` draws.
pub fn stream_len(n: u64, stream: u64) -> u64 {
    n.saturating_sub(stream * STREAM_LEN).min(STREAM_LEN)
}

pub fn sample_stream(pair: &JointGaussianPair, seed: u64, stream: u64, len: u64) -> Moments {
    let (a, b, d) = pair.factor();
    let key = stream_key(seed, stream);
    let mut m = Moments::default();
    for i in 0..len {
        let (n1, n2) = normal_pair(key, i);
        let z = a * n1;
        let h = b * n1 + d * n2;
        let e = z - h;
        m.distortion.push(e * e);
        m.recon_power.push(h * h);
        m.sum_zz += z * z;
        m.sum_hh += h * h;
        m.sum_zh += z * h;
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub n_samples: u64,
    pub empirical_distortion: f64,
    pub analytic_distortion: f64,
    /// −½ ln(1 − ρ̂²) from the sample correlation; `None` when λ̂ = 0.
    pub empirical_mi_estimate: Option<f64>,
    pub standard_error: f64,
    pub seed: u64,
    pub empirical_reconstruction_variance: f64,
    pub reconstruction_variance_se: f64,
    /// Distortion within [`SE_MULTIPLIER`] standard errors of the analytic value.
    pub passed: bool,
}

impl SampleReport {
    pub fn from_moments(pair: &JointGaussianPair, m: &Moments, seed: u64) -> Self {
        let analytic = pair.analytic_distortion();
        let empirical = m.distortion.mean;
        let se = m.distortion.standard_error();
        let mi = (pair.lambda_hat > 0.0).then(|| {
            let rho2 = m.sum_zh * m.sum_zh / (m.sum_zz * m.sum_hh);
            -0.5 * crate::math::ln_1p(-rho2.min(1.0))
        });
        Self {
            n_samples: m.n(),
            empirical_distortion: empirical,
            analytic_distortion: analytic,
            empirical_mi_estimate: mi,
            standard_error: se,
            seed,
            empirical_reconstruction_variance: m.recon_power.mean,
            reconstruction_variance_se: m.recon_power.standard_error(),
            passed: (empirical - analytic).abs() <= SE_MULTIPLIER * se,
        }
    }

    pub fn reconstruction_variance_passed(&self, lambda_hat: f64) -> bool {
        (self.empirical_reconstruction_variance - lambda_hat).abs() <= SE_MULTIPLIER * self.reconstruction_variance_se
    }
}

/// Merges stream results in stream order.
pub fn merge_streams<'a>(streams: impl IntoIterator<Item = &'a Moments>) -> Moments {
    let mut total = Moments::default();
    for m in streams {
        total.merge(m);
    }
    total
}

pub fn sample_and_measure(pair: &JointGaussianPair, n: u64, seed: u64) -> Result<SampleReport> {
    if n < MIN_SAMPLES {
        return Err(Error::DomainError("at least 1000 samples are required"));
    }
    let streams: Vec<Moments> = (0..stream_count(n))
        .map(|k| sample_stream(pair, seed, k, stream_len(n, k)))
        .collect();
    Ok(SampleReport::from_moments(pair, &merge_streams(&streams), seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCheck {
    pub reports: Vec<SampleReport>,
    pub stats: Vec<AnalyticStats>,
    pub analytic_distortion: f64,
    /// NaN for an unconstrained solution.
    pub analytic_perception: f64,
    pub empirical_distortion: f64,
    pub pooled_standard_error: f64,
    pub distortion_consistent: bool,
    pub perception_consistent: bool,
    pub passed: bool,
}

/// Tolerance when comparing summed analytic quantities to a solution.
pub const ANALYTIC_TOL: f64 = 1e-10;

/// Builds the pairs of a solution, checking that the analytic totals
/// reproduce the reported distortion and perception.
pub fn solution_pairs(s: &SourceSpectrum, sol: &RdpSolution) -> Result<Vec<JointGaussianPair>> {
    if sol.allocations.len() != s.len() {
        return Err(Error::ShapeMismatch {
            dim: s.len(),
            len: sol.allocations.len(),
        });
    }
    s.lambdas()
        .iter()
        .zip(&sol.allocations)
        .map(|(&l, a)| build_pair(l, a.gamma.min(l), a.lambda_hat))
        .collect()
}

/// Assembles the verdict from per-component reports.
pub fn assemble_check(
    s: &SourceSpectrum,
    sol: &RdpSolution,
    pairs: &[JointGaussianPair],
    reports: Vec<SampleReport>,
) -> SolutionCheck {
    let stats: Vec<AnalyticStats> = pairs.iter().map(analytic_component_stats).collect();
    let analytic_distortion: f64 = pairs.iter().map(|p| p.analytic_distortion()).sum();
    let analytic_perception = match sol.metric {
        PerceptionMetric::Unconstrained => f64::NAN,
        m => s.kernels().zip(pairs).map(|(k, p)| k.perception(m, p.lambda_hat)).sum(),
    };
    let empirical_distortion: f64 = reports.iter().map(|r| r.empirical_distortion).sum();
    let pooled = sqrt(reports.iter().map(|r| r.standard_error * r.standard_error).sum::<f64>());
    let close = |a: f64, b: f64| (a - b).abs() <= ANALYTIC_TOL * a.abs().max(1.0) || a == b;
    let distortion_consistent = close(analytic_distortion, sol.achieved_distortion);
    let perception_consistent =
        sol.metric == PerceptionMetric::Unconstrained || close(analytic_perception, sol.achieved_perception);
    let passed = distortion_consistent
        && perception_consistent
        && reports.iter().all(|r| r.passed)
        && (empirical_distortion - analytic_distortion).abs() <= SE_MULTIPLIER * pooled;
    SolutionCheck {
        reports,
        stats,
        analytic_distortion,
        analytic_perception,
        empirical_distortion,
        pooled_standard_error: pooled,
        distortion_consistent,
        perception_consistent,
        passed,
    }
}

/// Samples every component of a solution with `n` draws each; component ℓ
/// uses the key [`component_seed`]`(seed, ℓ)`.
pub fn verify_solution(s: &SourceSpectrum, sol: &RdpSolution, n: u64, seed: u64) -> Result<SolutionCheck> {
    let pairs = solution_pairs(s, sol)?;
    let reports = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| sample_and_measure(p, n, component_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_check(s, sol, &pairs, reports))
}
