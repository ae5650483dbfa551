//! Classical reverse water-filling for a Gaussian vector source (no
//! perception constraint) and its small-ε asymptotic laws.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::ln;
use crate::model::{
    CaseTag, ComponentAllocation, DualPoint, KktResiduals, PerceptionMetric, RdpSolution, SourceSpectrum,
};

#[derive(Debug, Clone, PartialEq)]
pub struct WaterLevel {
    /// Common level ν(D). For D ≥ Σλ this is λ_max.
    pub nu: f64,
    /// min(ν, λ_ℓ) per component, in spectrum order.
    pub per_component: Vec<f64>,
}

/// Solves Σ[λ_ℓ − ν]⁺ = [Σλ − D]⁺ exactly.
///
/// The left side is piecewise linear in ν with breakpoints at the
/// eigenvalues, so the root is located by scanning the sorted spectrum.
pub fn water_level(s: &SourceSpectrum, distortion: f64) -> Result<WaterLevel> {
    if !(distortion > 0.0) {
        return Err(Error::NonPositiveDistortion(distortion));
    }
    let lambdas = s.lambdas();
    let total = s.total_variance();
    let removed = total - distortion;
    if removed <= 0.0 {
        return Ok(WaterLevel {
            nu: lambdas[0],
            per_component: lambdas.to_vec(),
        });
    }
    // with the k largest components above the level:
    // Σ_{i<k} (λ_i − ν) = Σλ − D  ⇒  ν = (S_k − (Σλ − D)) / k
    let mut prefix = 0.0;
    let mut nu = 0.0;
    for (k, &lam) in lambdas.iter().enumerate() {
        prefix += lam;
        nu = (prefix - removed) / (k + 1) as f64;
        let next = lambdas.get(k + 1).copied().unwrap_or(0.0);
        if nu >= next {
            break;
        }
    }
    let per_component = lambdas.iter().map(|&l| nu.min(l)).collect();
    Ok(WaterLevel { nu, per_component })
}

/// Rate-distortion function R(D, ∞) as a solution record.
///
/// Reconstruction variances are λ̂ = λ − γ; the dual point is
/// (1/(2ν), 0).
pub fn reverse_waterfill(s: &SourceSpectrum, distortion: f64) -> Result<RdpSolution> {
    let wl = water_level(s, distortion)?;
    let allocations: Vec<ComponentAllocation> = s
        .lambdas()
        .iter()
        .zip(&wl.per_component)
        .map(|(&l, &g)| ComponentAllocation::new(l, g, l - g))
        .collect();
    let total_rate = allocations.iter().map(|a| a.rate).sum();
    let nu1 = 0.5 / wl.nu;
    let kkt = waterfill_kkt(s, &allocations, nu1);
    Ok(RdpSolution {
        total_rate,
        achieved_distortion: wl.per_component.iter().sum(),
        achieved_perception: f64::NAN,
        dual: DualPoint { nu1, nu2: 0.0 },
        case_tag: CaseTag::DistortionOnly,
        kkt_residual: kkt.max_residual(),
        kkt,
        allocations,
        metric: PerceptionMetric::Unconstrained,
    })
}

/// First-order residuals of the water-filling solution with ν₂ = 0.
///
/// Saturated components sit at γ = λ, λ̂ = 0; along the optimal path
/// λ̂ = λ − γ the ratio √(λ̂/(λ−γ)) is 1 there, which gives
/// ξ = 1/(2λ) − ν₁ ≥ 0.
pub(crate) fn waterfill_kkt(s: &SourceSpectrum, allocations: &[ComponentAllocation], nu1: f64) -> KktResiduals {
    let mut out = KktResiduals::default();
    for (&l, a) in s.lambdas().iter().zip(allocations) {
        let gap = l - a.gamma;
        let ratio = if gap > 0.0 {
            crate::math::sqrt(a.lambda_hat / gap)
        } else {
            1.0
        };
        let xi = if gap > 0.0 { 0.0 } else { (0.5 / l - nu1).max(0.0) };
        out.stationarity_gamma.push(0.5 / a.gamma - nu1 * ratio - xi);
        let inv_ratio = if a.lambda_hat > 0.0 {
            crate::math::sqrt(gap / a.lambda_hat)
        } else {
            1.0
        };
        out.stationarity_lambda_hat.push(nu1 * (1.0 - inv_ratio));
        out.xi.push(xi);
        out.eta.push(0.0);
        out.complementarity = out.complementarity.max((xi * gap).abs());
    }
    out
}

/// High-distortion estimate of R(Σλ − ε, ∞): ε/(2λ_max), with ε split
/// evenly over the components attaining λ_max.
pub fn high_distortion_rd_estimate(s: &SourceSpectrum, eps: f64) -> (f64, Vec<f64>) {
    let lambdas = s.lambdas();
    let lmax = s.lambda_max();
    let ties = lambdas.iter().filter(|&&l| l == lmax).count() as f64;
    let levels = lambdas
        .iter()
        .map(|&l| if l == lmax { lmax - eps / ties } else { l })
        .collect();
    (eps / (2.0 * lmax), levels)
}

/// Low-distortion law R(ε, ∞) = ½Σ ln(Lλ_ℓ/ε) with common level ε/L; exact
/// while ε/L ≤ λ_min.
pub fn low_distortion_rd_estimate(s: &SourceSpectrum, eps: f64) -> (f64, f64) {
    let n = s.len() as f64;
    let rate = 0.5 * s.lambdas().iter().map(|&l| ln(n * l / eps)).sum::<f64>();
    (rate, eps / n)
}
