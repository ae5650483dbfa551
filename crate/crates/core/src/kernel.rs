//! Per-component loss kernels and the closed-form stationary maps of the
//! Lagrangian at a fixed dual point (ν₁, ν₂).
//!
//! For a component of variance λ with water level γ and reconstruction
//! variance λ̂:
//!
//! * distortion `D(γ, λ̂) = λ − 2√(λ̂(λ−γ)) + λ̂`
//! * KL perception `P(λ̂) = ½(λ̂/λ − 1 + ln(λ/λ̂))`
//! * W2 perception `P(λ̂) = (√λ − √λ̂)²`
//!
//! Roots of the stationarity equations are found by bisection on their
//! natural brackets, which needs no choice of quadratic branch.

use crate::error::{Error, Result};
use crate::math::{ln, ln_1p, sqrt};
use crate::model::{DualPoint, PerceptionMetric};
use crate::roots;

/// ½(u − ln(1+u)) given `u` and a separately computed `ln(1+u)`.
///
/// This is the KL divergence between zero-mean Gaussians with variance
/// ratio `1 + u`. Small `|u|` uses the series to avoid cancellation.
pub(crate) fn kl_shape(u: f64, log1p_u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        0.5 * u2 * (0.5 - u / 3.0 + u2 / 4.0 - u2 * u / 5.0)
    } else {
        0.5 * (u - log1p_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentKernel {
    lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaFixedPoint {
    pub theta: f64,
    /// LHS − RHS of θ/(1 + (1−θ)ν₁/ν₂) = √(1 − θ/(2ν₁λ)) at `theta`.
    pub residual: f64,
}

fn check_dual(dual: DualPoint) -> Result<()> {
    if dual.nu1 > 0.0 && dual.nu2 > 0.0 && dual.nu1.is_finite() && dual.nu2.is_finite() {
        Ok(())
    } else {
        Err(Error::DualDegenerate {
            nu1: dual.nu1,
            nu2: dual.nu2,
        })
    }
}

impl ComponentKernel {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Self { lambda })
        } else {
            Err(Error::InvalidEigenvalue {
                index: 0,
                value: lambda,
            })
        }
    }

    pub(crate) fn new_unchecked(lambda: f64) -> Self {
        debug_assert!(lambda > 0.0);
        Self { lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Squared error of the component, written as
    /// `(√(λ−γ) − √λ̂)² + γ` which is the same polynomial but cannot go
    /// negative through rounding.
    pub fn distortion(&self, gamma: f64, lambda_hat: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma <= self.lambda) {
            return Err(Error::DomainError("water level must lie in (0, λ]"));
        }
        if !(lambda_hat >= 0.0) {
            return Err(Error::DomainError("reconstruction variance must be nonnegative"));
        }
        Ok(self.distortion_unchecked(gamma, lambda_hat))
    }

    pub(crate) fn distortion_unchecked(&self, gamma: f64, lambda_hat: f64) -> f64 {
        let d = sqrt(self.lambda - gamma) - sqrt(lambda_hat);
        d * d + gamma
    }

    /// KL divergence of N(0, λ̂) from N(0, λ). `+∞` at λ̂ = 0, NaN for
    /// negative λ̂.
    pub fn perception_kl(&self, lambda_hat: f64) -> f64 {
        if lambda_hat == 0.0 {
            return f64::INFINITY;
        }
        if !(lambda_hat > 0.0) {
            return f64::NAN;
        }
        let r = lambda_hat / self.lambda;
        if r < 0.5 {
            // ln_1p(r − 1) would lose r entirely once r < ulp(1)
            return 0.5 * (r - 1.0 - ln(r));
        }
        let u = (lambda_hat - self.lambda) / self.lambda;
        kl_shape(u, ln_1p(u))
    }

    /// Squared W2 distance between N(0, λ) and N(0, λ̂).
    pub fn perception_w2(&self, lambda_hat: f64) -> f64 {
        let d = sqrt(self.lambda) - sqrt(lambda_hat);
        d * d
    }

    /// Perception loss under `metric`; zero for the unconstrained metric.
    pub fn perception(&self, metric: PerceptionMetric, lambda_hat: f64) -> f64 {
        match metric {
            PerceptionMetric::Kl => self.perception_kl(lambda_hat),
            PerceptionMetric::W2 => self.perception_w2(lambda_hat),
            PerceptionMetric::Unconstrained => 0.0,
        }
    }

    /// ∂D/∂γ = √(λ̂/(λ−γ)).
    pub fn distortion_d_gamma(&self, gamma: f64, lambda_hat: f64) -> f64 {
        sqrt(lambda_hat / (self.lambda - gamma))
    }

    /// ∂D/∂λ̂ = 1 − √((λ−γ)/λ̂).
    pub fn distortion_d_lambda_hat(&self, gamma: f64, lambda_hat: f64) -> f64 {
        1.0 - sqrt((self.lambda - gamma) / lambda_hat)
    }

    /// Hessian of D in (γ, λ̂) as `(d²/dγ², d²/dγdλ̂, d²/dλ̂²)`.
    pub fn distortion_hessian(&self, gamma: f64, lambda_hat: f64) -> (f64, f64, f64) {
        let a = self.lambda - gamma;
        let b = lambda_hat;
        let (sa, sb) = (sqrt(a), sqrt(b));
        (0.5 * sb / (a * sa), 0.5 / (sa * sb), 0.5 * sa / (b * sb))
    }

    pub fn perception_derivative(&self, metric: PerceptionMetric, lambda_hat: f64) -> f64 {
        match metric {
            PerceptionMetric::Kl => 0.5 * (1.0 / self.lambda - 1.0 / lambda_hat),
            PerceptionMetric::W2 => 1.0 - sqrt(self.lambda / lambda_hat),
            PerceptionMetric::Unconstrained => 0.0,
        }
    }

    pub fn perception_second_derivative(&self, metric: PerceptionMetric, lambda_hat: f64) -> f64 {
        match metric {
            PerceptionMetric::Kl => 0.5 / (lambda_hat * lambda_hat),
            PerceptionMetric::W2 => 0.5 * sqrt(self.lambda) / (lambda_hat * sqrt(lambda_hat)),
            PerceptionMetric::Unconstrained => 0.0,
        }
    }

    /// Left side minus right side of the KL water-level equation
    /// ν₁(1 − 2ν₁γ) = ½ν₂(4γ²ν₁²/(λ−γ) − 1/λ). Strictly decreasing on (0, λ).
    pub fn kl_gamma_equation(&self, gamma: f64, dual: DualPoint) -> f64 {
        let (nu1, nu2, l) = (dual.nu1, dual.nu2, self.lambda);
        let g = 2.0 * nu1 * gamma;
        nu1 * (1.0 - g) - 0.5 * nu2 * (g * g / (l - gamma) - 1.0 / l)
    }

    /// KL water level at a dual point with both multipliers positive: the
    /// unique root in (0, λ) of [`Self::kl_gamma_equation`].
    pub fn stationary_gamma_kl(&self, dual: DualPoint) -> Result<f64> {
        Ok(self.stationary_pair_kl(dual)?.0)
    }

    /// KL optimal pair (γ, λ̂) at a dual point with both multipliers positive.
    ///
    /// Roots in the upper half of (0, λ) are located in the gap t = λ − γ,
    /// so λ̂ = t/(2γν₁)² keeps full relative precision when γ is within a
    /// few ulps of λ.
    pub fn stationary_pair_kl(&self, dual: DualPoint) -> Result<(f64, f64)> {
        check_dual(dual)?;
        let (nu1, nu2, l) = (dual.nu1, dual.nu2, self.lambda);
        let half = 0.5 * l;
        let (gamma, gap) = if self.kl_gamma_equation(half, dual) <= 0.0 {
            let g = roots::bisect(
                |g| self.kl_gamma_equation(g, dual),
                0.0,
                half,
                roots::DEFAULT_MAX_ITER,
                "kl water level",
            )?;
            let g = if g > 0.0 { g } else { libm::nextafter(0.0, 1.0) };
            (g, l - g)
        } else {
            // same equation with λ − γ replaced by t; increasing in t
            let in_gap = |t: f64| {
                let g = 2.0 * nu1 * (l - t);
                nu1 * (1.0 - g) - 0.5 * nu2 * (g * g / t - 1.0 / l)
            };
            let t = roots::bisect(in_gap, 0.0, half, roots::DEFAULT_MAX_ITER, "kl water level gap")?;
            let t = if t > 0.0 { t } else { libm::nextafter(0.0, 1.0) };
            (clamp_open(l - t, l), t)
        };
        let g = 2.0 * gamma * nu1;
        Ok((gamma, gap / (g * g)))
    }

    /// The quadratic-formula root of the KL water-level equation that lies
    /// in (0, λ). Cross-check for [`Self::stationary_gamma_kl`].
    pub fn gamma_kl_closed_form(&self, dual: DualPoint) -> Option<f64> {
        let (nu1, nu2, l) = (dual.nu1, dual.nu2, self.lambda);
        // a γ² + b γ + c = 0 after clearing denominators
        let a = 4.0 * l * nu1 * nu1 * (1.0 - nu2);
        let b = -(2.0 * l * nu1 + 4.0 * l * l * nu1 * nu1 + nu2);
        let c = l * (2.0 * l * nu1 + nu2);
        let in_range = |g: f64| g > 0.0 && g < l;
        if a == 0.0 {
            let g = -c / b;
            return in_range(g).then_some(g);
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (b - sqrt(disc));
        [q / a, c / q].into_iter().find(|&g| in_range(g))
    }

    /// λ̂ = (λ − γ)/(4γ²ν₁²), the KL reconstruction variance for a water
    /// level γ ∈ (0, λ).
    pub fn stationary_lambda_hat_kl(&self, gamma: f64, nu1: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma < self.lambda) {
            return Err(Error::DomainError("water level must lie in (0, λ)"));
        }
        if !(nu1 > 0.0) {
            return Err(Error::DualDegenerate { nu1, nu2: f64::NAN });
        }
        let g = 2.0 * gamma * nu1;
        Ok((self.lambda - gamma) / (g * g))
    }

    /// Inverse of [`Self::stationary_lambda_hat_kl`] in γ:
    /// γ = 2λ/(1 + √(1 + 16λλ̂ν₁²)).
    pub fn gamma_from_lambda_hat(&self, lambda_hat: f64, nu1: f64) -> f64 {
        2.0 * self.lambda / (1.0 + sqrt(1.0 + 16.0 * self.lambda * lambda_hat * nu1 * nu1))
    }

    /// G(θ) = θ − √(1 − θ/(2ν₁λ))·(1 + (1−θ)ν₁/ν₂), an increasing rearrangement
    /// of the W2 fixed-point equation that stays finite at the bracket end.
    fn theta_rearranged(&self, theta: f64, dual: DualPoint) -> f64 {
        let r = dual.nu1 / dual.nu2;
        let inner = (1.0 - theta / (2.0 * dual.nu1 * self.lambda)).max(0.0);
        theta - sqrt(inner) * (1.0 + (1.0 - theta) * r)
    }

    /// LHS − RHS of θ/(1 + (1−θ)ν₁/ν₂) = √(1 − θ/(2ν₁λ)).
    pub fn theta_residual(&self, theta: f64, dual: DualPoint) -> f64 {
        let r = dual.nu1 / dual.nu2;
        let inner = (1.0 - theta / (2.0 * dual.nu1 * self.lambda)).max(0.0);
        theta / (1.0 + (1.0 - theta) * r) - sqrt(inner)
    }

    /// Upper end of the θ bracket: min(1 + ν₂/ν₁, 2ν₁λ).
    pub fn theta_upper(&self, dual: DualPoint) -> f64 {
        (1.0 + dual.nu2 / dual.nu1).min(2.0 * dual.nu1 * self.lambda)
    }

    pub fn theta_fixed_point_w2(&self, dual: DualPoint) -> Result<ThetaFixedPoint> {
        check_dual(dual)?;
        let upper = self.theta_upper(dual);
        let theta = roots::bisect(
            |t| self.theta_rearranged(t, dual),
            0.0,
            upper,
            roots::DEFAULT_MAX_ITER,
            "w2 theta fixed point",
        )?;
        let theta = clamp_open(theta, upper);
        Ok(ThetaFixedPoint {
            theta,
            residual: self.theta_residual(theta, dual),
        })
    }

    /// W2 optimal pair (γ, λ̂) = (θ/(2ν₁), λ/(1 + (1−θ)ν₁/ν₂)²).
    pub fn stationary_pair_w2(&self, dual: DualPoint) -> Result<(f64, f64)> {
        let tp = self.theta_fixed_point_w2(dual)?;
        let gamma = clamp_open(tp.theta / (2.0 * dual.nu1), self.lambda);
        let scale = 1.0 + (1.0 - tp.theta) * dual.nu1 / dual.nu2;
        Ok((gamma, self.lambda / (scale * scale)))
    }

    /// Water level under perfect perception (λ̂ = λ):
    /// γ = 2λ/(1 + √(1 + 16ν₁²λ²)).
    pub fn perfect_perception_gamma(&self, nu1: f64) -> f64 {
        self.gamma_from_lambda_hat(self.lambda, nu1)
    }

    /// λ − γ for [`Self::perfect_perception_gamma`], computed without
    /// cancellation for small ν₁.
    pub fn perfect_perception_gap(&self, nu1: f64) -> f64 {
        let x = 16.0 * nu1 * nu1 * self.lambda * self.lambda;
        let s = sqrt(1.0 + x);
        // s − 1 = x/(1 + s)
        self.lambda * (x / (1.0 + s)) / (1.0 + s)
    }
}

/// Pulls a root that landed on the open upper bound back inside.
fn clamp_open(x: f64, upper: f64) -> f64 {
    if x >= upper {
        libm::nextafter(upper, 0.0)
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(l: f64) -> ComponentKernel {
        ComponentKernel::new(l).unwrap()
    }

    fn dual(nu1: f64, nu2: f64) -> DualPoint {
        DualPoint { nu1, nu2 }
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(k(1.0).distortion(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(k(1.0).distortion(1.0, 0.0).unwrap(), 1.0);
        assert!((k(1.0).distortion(0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn distortion_domain() {
        assert!(matches!(k(1.0).distortion(1.5, 0.5), Err(Error::DomainError(_))));
        assert!(matches!(k(1.0).distortion(0.0, 0.5), Err(Error::DomainError(_))));
        assert!(matches!(k(1.0).distortion(0.5, -0.1), Err(Error::DomainError(_))));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(k(1.0).perception_kl(1.0), 0.0);
        let e = core::f64::consts::E;
        assert!((k(1.0).perception_kl(e) - (e - 2.0) / 2.0).abs() < 1e-15);
        assert_eq!(k(2.0).perception_kl(0.0), f64::INFINITY);
    }

    #[test]
    fn kl_series_branch_is_continuous() {
        let kk = k(1.0);
        for u in [9.9e-5, 1.01e-4, -9.9e-5, -1.01e-4] {
            let direct = 0.5 * (u - libm::log1p(u));
            let v = kk.perception_kl(1.0 + u);
            assert!((v - direct).abs() < 1e-12 * direct.abs().max(1e-300) + 1e-20);
        }
    }

    #[test]
    fn w2_examples() {
        assert_eq!(k(4.0).perception_w2(1.0), 1.0);
        assert_eq!(k(4.0).perception_w2(4.0), 0.0);
        assert_eq!(k(4.0).perception_w2(0.0), 4.0);
    }

    #[test]
    fn kl_gamma_small_nu2_approaches_rd_level() {
        let g = k(1.0).stationary_gamma_kl(dual(0.5, 1e-9)).unwrap();
        assert!((g - 1.0).abs() < 1e-4 && g < 1.0);
    }

    #[test]
    fn kl_gamma_unit_dual() {
        // independent: the quadratic has the exact root 3/7 at λ = ν₁ = ν₂ = 1
        let g = k(1.0).stationary_gamma_kl(dual(1.0, 1.0)).unwrap();
        assert!((g - 3.0 / 7.0).abs() < 1e-15);
        assert!(k(1.0).kl_gamma_equation(g, dual(1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kl_gamma_large_nu1_goes_to_zero() {
        let g = k(1.0).stationary_gamma_kl(dual(1e6, 1.0)).unwrap();
        assert!(g < 1e-5);
    }

    #[test]
    fn kl_gamma_needs_positive_duals() {
        assert!(matches!(
            k(1.0).stationary_gamma_kl(dual(0.0, 1.0)),
            Err(Error::DualDegenerate { .. })
        ));
        assert!(matches!(
            k(1.0).stationary_gamma_kl(dual(1.0, 0.0)),
            Err(Error::DualDegenerate { .. })
        ));
    }

    #[test]
    fn closed_form_matches_bisection() {
        for &(l, n1, n2) in &[(1.0, 1.0, 0.3), (2.0, 0.7, 3.0), (0.5, 2.0, 1.0), (5.0, 0.05, 0.01)] {
            let kk = k(l);
            let a = kk.stationary_gamma_kl(dual(n1, n2)).unwrap();
            let b = kk.gamma_kl_closed_form(dual(n1, n2)).unwrap();
            assert!((a - b).abs() < 1e-12 * l, "{l} {n1} {n2}: {a} vs {b}");
        }
    }

    #[test]
    fn lambda_hat_kl_examples() {
        assert!((k(1.0).stationary_lambda_hat_kl(0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((k(2.0).stationary_lambda_hat_kl(1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let near = k(1.0).stationary_lambda_hat_kl(1.0 - 1e-12, 1.0).unwrap();
        assert!(near > 0.0 && near < 1e-11);
        assert!(k(1.0).stationary_lambda_hat_kl(1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_from_lambda_hat_examples() {
        let nu1 = (3.0f64 / 16.0).sqrt();
        assert!((k(1.0).gamma_from_lambda_hat(1.0, nu1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((k(1.0).gamma_from_lambda_hat(1e-300, 1.0) - 1.0).abs() < 1e-15);
        assert!((k(1.0).gamma_from_lambda_hat(0.5, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_unit_dual() {
        let tp = k(1.0).theta_fixed_point_w2(dual(1.0, 1.0)).unwrap();
        assert!((tp.theta - 0.860_319_418_003_893_5).abs() < 1e-13);
        assert!(tp.residual.abs() <= 1e-12);
    }

    #[test]
    fn theta_large_nu2_limit() {
        let (l, n1) = (1.0, 0.8);
        let tp = k(l).theta_fixed_point_w2(dual(n1, 1e12)).unwrap();
        let limit = tp.theta - libm::sqrt(1.0 - tp.theta / (2.0 * n1 * l));
        assert!(limit.abs() < 1e-10);
    }

    #[test]
    fn w2_pair_unit_dual() {
        let (g, h) = k(1.0).stationary_pair_w2(dual(1.0, 1.0)).unwrap();
        assert!((g - 0.430_159_709_001_946_7).abs() < 1e-13);
        assert!((h - 0.769_898_905_872_859_7).abs() < 1e-12);
    }

    #[test]
    fn perfect_perception_examples() {
        let nu1 = (3.0f64 / 16.0).sqrt();
        assert!((k(1.0).perfect_perception_gamma(nu1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((k(1.0).perfect_perception_gamma(1e-12) - 1.0).abs() < 1e-15);
        assert!(k(1.0).perfect_perception_gamma(1e12) < 1e-11);
        let gap = k(3.0).perfect_perception_gap(1e-5);
        let direct = 3.0 - k(3.0).perfect_perception_gamma(1e-5);
        assert!((gap - direct).abs() < 1e-12);
    }
}
