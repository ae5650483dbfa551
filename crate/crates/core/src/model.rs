//! Domain types shared by the solvers.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::eigen::{self, SymMatrix};
use crate::error::{Error, Result};
use crate::kernel::ComponentKernel;
use crate::roots;

/// Default relative threshold (against the largest eigenvalue) below which
/// covariance eigenvalues are treated as null components.
pub const DEFAULT_NULL_TOLERANCE: f64 = 1e-12;

/// Eigenvalues of the source covariance, sorted descending, plus the
/// decorrelating basis when the source came from a full covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpectrum {
    lambdas: Vec<f64>,
    basis: Option<Vec<f64>>,
    ambient_dim: usize,
}

impl SourceSpectrum {
    /// Uses the given variances directly (already decorrelated source).
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionZero);
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidEigenvalue { index, value });
            }
        }
        let mut lambdas = values.to_vec();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            lambdas,
            basis: None,
            ambient_dim: values.len(),
        })
    }

    /// Decomposes a covariance and drops null components. `rel_tol` is
    /// scaled by the largest eigenvalue.
    pub fn from_covariance(m: &SymMatrix, rel_tol: f64) -> Result<Self> {
        if !(rel_tol >= 0.0) {
            return Err(Error::DomainError("null tolerance must be nonnegative"));
        }
        let e = eigen::decompose(m)?;
        let lambda_max = e.eigenvalues[0];
        if !(lambda_max > 0.0) {
            return Err(Error::AllComponentsNull);
        }
        let stripped = eigen::strip_null_components(&e, rel_tol * lambda_max)?;
        Ok(Self {
            lambdas: stripped.eigenvalues,
            basis: Some(stripped.basis),
            ambient_dim: stripped.dim,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Row-major `len() × ambient_dim()` basis, rows are eigenvectors.
    pub fn basis(&self) -> Option<&[f64]> {
        self.basis.as_deref()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn total_variance(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[self.lambdas.len() - 1]
    }

    pub(crate) fn kernels(&self) -> impl Iterator<Item = ComponentKernel> + '_ {
        self.lambdas.iter().map(|&l| ComponentKernel::new_unchecked(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerceptionMetric {
    /// KL divergence D(P_X̂ ‖ P_X).
    Kl,
    /// Squared Wasserstein-2 distance.
    W2,
    /// No perception constraint.
    Unconstrained,
}

impl PerceptionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            PerceptionMetric::Kl => "kl",
            PerceptionMetric::W2 => "w2",
            PerceptionMetric::Unconstrained => "none",
        }
    }
}

impl fmt::Display for PerceptionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerceptionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kl" => Ok(PerceptionMetric::Kl),
            "w2" => Ok(PerceptionMetric::W2),
            "none" | "unconstrained" => Ok(PerceptionMetric::Unconstrained),
            _ => Err(Error::DomainError("metric must be one of kl, w2, none")),
        }
    }
}

/// One (D, P, metric) evaluation point.
///
/// A perception budget of `+∞` and [`PerceptionMetric::Unconstrained`]
/// always go together; the constructor normalizes either one to the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffQuery {
    distortion: f64,
    perception: f64,
    metric: PerceptionMetric,
}

impl TradeoffQuery {
    pub fn new(distortion: f64, perception: f64, metric: PerceptionMetric) -> Result<Self> {
        if !(distortion > 0.0 && distortion.is_finite()) {
            return Err(Error::NonPositiveDistortion(distortion));
        }
        if !(perception >= 0.0) {
            return Err(Error::InvalidPerception(perception));
        }
        let (perception, metric) = if perception == f64::INFINITY || metric == PerceptionMetric::Unconstrained {
            (f64::INFINITY, PerceptionMetric::Unconstrained)
        } else {
            (perception, metric)
        };
        Ok(Self {
            distortion,
            perception,
            metric,
        })
    }

    pub fn unconstrained(distortion: f64) -> Result<Self> {
        Self::new(distortion, f64::INFINITY, PerceptionMetric::Unconstrained)
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    pub fn perception(&self) -> f64 {
        self.perception
    }

    pub fn metric(&self) -> PerceptionMetric {
        self.metric
    }
}

/// Per-component water level, reconstruction variance and rate (nats).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentAllocation {
    pub gamma: f64,
    pub lambda_hat: f64,
    pub rate: f64,
}

impl ComponentAllocation {
    /// Rate is derived from the water level as ½·ln(λ/γ).
    pub fn new(lambda: f64, gamma: f64, lambda_hat: f64) -> Self {
        Self {
            gamma,
            lambda_hat,
            rate: component_rate(lambda, gamma),
        }
    }
}

pub(crate) fn component_rate(lambda: f64, gamma: f64) -> f64 {
    if gamma >= lambda {
        0.0
    } else {
        0.5 * crate::math::ln(lambda / gamma)
    }
}

/// Multipliers of the distortion (`nu1`) and perception (`nu2`)
/// constraints. `nu2` is `+∞` for perfect-perception solutions, where no
/// finite multiplier exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub nu1: f64,
    pub nu2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    /// Distortion and perception both bind; every component has positive rate.
    BothActive,
    /// Only distortion binds: classical reverse water-filling.
    DistortionOnly,
    /// Zero rate suffices.
    DistortionInactive,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::BothActive => "both_active",
            CaseTag::DistortionOnly => "distortion_only",
            CaseTag::DistortionInactive => "distortion_inactive",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both_active" => Ok(CaseTag::BothActive),
            "distortion_only" => Ok(CaseTag::DistortionOnly),
            "distortion_inactive" => Ok(CaseTag::DistortionInactive),
            _ => Err(Error::DomainError("unknown case tag")),
        }
    }
}

/// Residuals of the first-order conditions with box multipliers ξ (for
/// γ ≤ λ) and η (for λ̂ ≥ 0).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity_gamma: Vec<f64>,
    pub stationarity_lambda_hat: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub complementarity: f64,
}

impl KktResiduals {
    /// Largest absolute residual over stationarity and complementarity.
    pub fn max_residual(&self) -> f64 {
        self.stationarity_gamma
            .iter()
            .chain(&self.stationarity_lambda_hat)
            .fold(self.complementarity.abs(), |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdpSolution {
    /// Total rate in nats.
    pub total_rate: f64,
    pub allocations: Vec<ComponentAllocation>,
    pub dual: DualPoint,
    pub case_tag: CaseTag,
    pub kkt_residual: f64,
    pub kkt: KktResiduals,
    pub achieved_distortion: f64,
    /// NaN when the metric is [`PerceptionMetric::Unconstrained`].
    pub achieved_perception: f64,
    pub metric: PerceptionMetric,
}

impl RdpSolution {
    pub fn gammas(&self) -> Vec<f64> {
        self.allocations.iter().map(|a| a.gamma).collect()
    }

    pub fn lambda_hats(&self) -> Vec<f64> {
        self.allocations.iter().map(|a| a.lambda_hat).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.allocations.iter().map(|a| a.rate).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateUnit {
    Nats,
    Bits,
}

impl RateUnit {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            RateUnit::Nats => nats,
            RateUnit::Bits => nats / core::f64::consts::LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateUnit::Nats => "nats",
            RateUnit::Bits => "bits",
        }
    }
}

impl FromStr for RateUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" => Ok(RateUnit::Nats),
            "bits" => Ok(RateUnit::Bits),
            _ => Err(Error::DomainError("rate unit must be nats or bits")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMetadata {
    pub source: String,
    pub rate_unit: RateUnit,
    pub version: String,
}

/// Result of one sweep point, with rates already expressed in the sweep's
/// rate unit.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Solved {
        case_tag: CaseTag,
        total_rate: f64,
        allocations: Vec<ComponentAllocation>,
    },
    Infeasible,
    ConvergenceFailure,
}

impl SweepOutcome {
    pub fn from_solution(sol: &RdpSolution, unit: RateUnit) -> Self {
        SweepOutcome::Solved {
            case_tag: sol.case_tag,
            total_rate: unit.from_nats(sol.total_rate),
            allocations: sol
                .allocations
                .iter()
                .map(|a| ComponentAllocation {
                    rate: unit.from_nats(a.rate),
                    ..*a
                })
                .collect(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SweepOutcome::Solved { case_tag, .. } => case_tag.as_str(),
            SweepOutcome::Infeasible => "infeasible",
            SweepOutcome::ConvergenceFailure => "convergence_failure",
        }
    }
}

/// Grid of queries with aligned outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSweep {
    pub metadata: SweepMetadata,
    pub queries: Vec<TradeoffQuery>,
    pub solutions: Vec<SweepOutcome>,
}

/// Minimum-distortion zero-rate reconstruction variances.
///
/// Minimizes Σ λ̂ subject to Σ P(λ̂) ≤ P, which is the canonical member of
/// the zero-rate feasible set. W2 has a closed form; KL is solved by
/// bisection on the scalar multiplier μ of λ̂ + μ·P(λ̂), whose
/// per-component minimizer is λ̂ = λμ/(μ + 2λ).
pub fn zero_rate_reconstruction(s: &SourceSpectrum, metric: PerceptionMetric, perception: f64) -> Result<Vec<f64>> {
    if !(perception >= 0.0) {
        return Err(Error::InvalidPerception(perception));
    }
    let lambdas = s.lambdas();
    match metric {
        PerceptionMetric::Unconstrained => Ok(alloc::vec![0.0; lambdas.len()]),
        _ if perception == f64::INFINITY => Ok(alloc::vec![0.0; lambdas.len()]),
        _ if perception == 0.0 => Ok(lambdas.to_vec()),
        PerceptionMetric::W2 => {
            // W2 of the scaled reconstruction √λ̂ = c·√λ is (1 − c)²·Σλ
            let total = s.total_variance();
            if total <= perception {
                return Ok(alloc::vec![0.0; lambdas.len()]);
            }
            let scale = 1.0 - crate::math::sqrt(perception / total);
            Ok(lambdas.iter().map(|l| l * scale * scale).collect())
        }
        PerceptionMetric::Kl => {
            // λ̂ = λ(1 + u) with u = −2λ/(μ + 2λ); everything is evaluated
            // from t = ln μ so that huge budgets (μ → 0) stay finite
            let parts = |t: f64, l: f64| {
                let mu = crate::math::exp(t);
                let u = -2.0 * l / (mu + 2.0 * l);
                let log1p_u = if t > 0.0 {
                    -crate::math::ln_1p(2.0 * l * crate::math::exp(-t))
                } else {
                    t - crate::math::ln(mu + 2.0 * l)
                };
                (u, log1p_u)
            };
            let excess = |t: f64| -> f64 {
                lambdas
                    .iter()
                    .map(|&l| {
                        let (u, log1p_u) = parts(t, l);
                        crate::kernel::kl_shape(u, log1p_u)
                    })
                    .sum::<f64>()
                    - perception
            };
            let x0 = crate::math::ln(s.total_variance());
            let (lo, hi) = roots::expand_bracket_decreasing(excess, x0, 1.0, 200, "zero-rate multiplier")?;
            let t = roots::bisect(excess, lo, hi, roots::DEFAULT_MAX_ITER, "zero-rate multiplier")?;
            // keep the perception side feasible as measured by the kernels
            let hats_at = |t: f64| -> Vec<f64> {
                let mu = crate::math::exp(t);
                lambdas.iter().map(|&l| l * mu / (mu + 2.0 * l)).collect()
            };
            let mut t = t;
            let mut hats = hats_at(t);
            for _ in 0..64 {
                let used: f64 = s.kernels().zip(&hats).map(|(k, &h)| k.perception_kl(h)).sum();
                if used <= perception {
                    break;
                }
                t = libm::nextafter(t, f64::INFINITY);
                hats = hats_at(t);
            }
            Ok(hats)
        }
    }
}

/// Smallest distortion achievable at zero rate under the perception budget:
/// Σ(λ + λ̂) at the minimum-distortion zero-rate reconstruction.
pub fn max_zero_rate_distortion(s: &SourceSpectrum, metric: PerceptionMetric, perception: f64) -> Result<f64> {
    let hats = zero_rate_reconstruction(s, metric, perception)?;
    Ok(s.lambdas().iter().zip(&hats).map(|(l, h)| l + h).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn covariance_eigenvalues_sorted() {
        let m = SymMatrix::diagonal(&[3.0, 2.0, 5.0, 4.0, 1.0]).unwrap();
        let s = SourceSpectrum::from_covariance(&m, DEFAULT_NULL_TOLERANCE).unwrap();
        assert_eq!(s.lambdas(), &[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert!(s.basis().is_some());
    }

    #[test]
    fn identity_covariance() {
        let s = SourceSpectrum::from_covariance(&SymMatrix::identity(2).unwrap(), 1e-12).unwrap();
        assert_eq!(s.lambdas(), &[1.0, 1.0]);
    }

    #[test]
    fn rank_one_covariance_is_stripped() {
        let m = SymMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let s = SourceSpectrum::from_covariance(&m, 1e-12).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.lambdas()[0] - 2.0).abs() < 1e-14);
        assert_eq!(s.ambient_dim(), 2);
    }

    #[test]
    fn eigenvalue_list_validation() {
        assert!(matches!(
            SourceSpectrum::from_eigenvalues(&[1.0, 0.0]),
            Err(Error::InvalidEigenvalue { index: 1, .. })
        ));
        assert_eq!(SourceSpectrum::from_eigenvalues(&[]).unwrap_err(), Error::DimensionZero);
    }

    #[test]
    fn query_normalizes_unconstrained() {
        let q = TradeoffQuery::new(1.0, f64::INFINITY, PerceptionMetric::Kl).unwrap();
        assert_eq!(q.metric(), PerceptionMetric::Unconstrained);
        let q = TradeoffQuery::new(1.0, 3.0, PerceptionMetric::Unconstrained).unwrap();
        assert_eq!(q.perception(), f64::INFINITY);
        assert!(matches!(
            TradeoffQuery::new(0.0, 1.0, PerceptionMetric::Kl),
            Err(Error::NonPositiveDistortion(_))
        ));
        assert!(matches!(
            TradeoffQuery::new(1.0, -1.0, PerceptionMetric::Kl),
            Err(Error::InvalidPerception(_))
        ));
        assert!(TradeoffQuery::new(f64::NAN, 1.0, PerceptionMetric::Kl).is_err());
    }

    #[test]
    fn zero_rate_distortion_examples() {
        let one = SourceSpectrum::from_eigenvalues(&[1.0]).unwrap();
        assert_eq!(max_zero_rate_distortion(&one, PerceptionMetric::Kl, 0.0).unwrap(), 2.0);
        let two = SourceSpectrum::from_eigenvalues(&[1.0, 2.0]).unwrap();
        for m in [PerceptionMetric::Kl, PerceptionMetric::W2] {
            assert_eq!(max_zero_rate_distortion(&two, m, 0.0).unwrap(), 6.0);
        }
        assert_eq!(max_zero_rate_distortion(&one, PerceptionMetric::W2, 1.0).unwrap(), 1.0);
        assert_eq!(
            max_zero_rate_distortion(&two, PerceptionMetric::Unconstrained, f64::INFINITY).unwrap(),
            3.0
        );
    }

    #[test]
    fn kl_zero_rate_meets_budget() {
        let s = SourceSpectrum::from_eigenvalues(&[3.0, 2.0, 5.0]).unwrap();
        for p in [1e-6, 0.01, 0.5, 3.0] {
            let hats = zero_rate_reconstruction(&s, PerceptionMetric::Kl, p).unwrap();
            let used: f64 = s.kernels().zip(&hats).map(|(k, &h)| k.perception_kl(h)).sum();
            assert!(used <= p && used > p * (1.0 - 1e-9), "p={p} used={used}");
        }
    }

    #[test]
    fn kl_zero_rate_is_minimum_distortion() {
        // perturbing along the constraint surface can only raise Σλ̂
        let s = SourceSpectrum::from_eigenvalues(&[2.0, 1.0]).unwrap();
        let p = 0.2;
        let hats = zero_rate_reconstruction(&s, PerceptionMetric::Kl, p).unwrap();
        let best: f64 = hats.iter().sum();
        let k = [ComponentKernel::new(2.0).unwrap(), ComponentKernel::new(1.0).unwrap()];
        for i in 1..200 {
            let h0 = hats[0] * (0.5 + i as f64 / 200.0);
            let left = p - k[0].perception_kl(h0);
            if left < 0.0 {
                continue;
            }
            // smallest λ̂₁ ≤ λ₁ spending the remaining budget
            let h1 = roots::bisect(|h| k[1].perception_kl(h) - left, 1e-12, 1.0, 400, "t").unwrap();
            assert!(h0 + h1 >= best - 1e-9);
        }
    }
}
