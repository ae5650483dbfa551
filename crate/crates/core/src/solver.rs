//! Full RDP evaluation.
//!
//! [`solve`] classifies the query into one of three regimes, in this order:
//!
//! 1. zero rate already meets the distortion budget ([`CaseTag::DistortionInactive`]),
//! 2. the reverse water-filling solution already meets the perception
//!    budget ([`CaseTag::DistortionOnly`]),
//! 3. both constraints bind ([`CaseTag::BothActive`]); the multipliers
//!    (ν₁, ν₂) are found so that both constraints hold with equality.
//!
//! In regime 3 the allocation at a fixed dual point is exact per component
//! (see [`crate::kernel`]). The Lagrange dual is concave and differentiable
//! there, with partial derivatives equal to the constraint slacks, so
//! ΣD − D is nonincreasing in ν₁ and, after maximizing over ν₁, ΣP − P is
//! nonincreasing in ν₂. Both are solved as bracketed 1-D roots in log ν.

use alloc::vec::Vec;

use crate::classic;
use crate::error::{Error, Result};
use crate::kernel::ComponentKernel;
use crate::math::{exp, ln, ln_1p, sqrt};
use crate::model::{
    self, CaseTag, ComponentAllocation, DualPoint, KktResiduals, PerceptionMetric, RdpSolution, SourceSpectrum,
    TradeoffQuery,
};
use crate::roots;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Allowed |ΣD − D|, relative to Σλ.
    pub distortion_tol: f64,
    /// Allowed |ΣP − P|, absolute.
    pub perception_tol: f64,
    /// Iteration budget for each 1-D dual search.
    pub max_dual_iterations: usize,
    /// Initial step, in ln ν, when bracketing a multiplier.
    pub dual_step_init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            distortion_tol: 1e-9,
            perception_tol: 1e-9,
            max_dual_iterations: 500,
            dual_step_init: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distortion_tol > 0.0
            && self.perception_tol > 0.0
            && self.dual_step_init > 0.0
            && self.max_dual_iterations > 0
        {
            Ok(())
        } else {
            Err(Error::DomainError(
                "solver tolerances, step and iteration budget must be positive",
            ))
        }
    }
}

// absolute tolerance on ln ν for the Brent searches
const LOG_NU_XTOL: f64 = 1e-15;
// doubling steps allowed while bracketing a multiplier
const BRACKET_STEPS: usize = 64;
// ln ν₂ at which every component allocation has stopped moving in f64
const SATURATED_LOG_NU2: f64 = -700.0;

/// Infimum of the distortion over the feasible set for a perception
/// budget P ≥ 0 under either metric.
///
/// Taking λ̂ = λ (zero perception loss) and γ → 0 drives the distortion to
/// zero, so every positive budget is feasible.
pub fn infimum_distortion(_s: &SourceSpectrum, _metric: PerceptionMetric, _perception: f64) -> f64 {
    0.0
}

pub fn solve(s: &SourceSpectrum, q: &TradeoffQuery, cfg: &SolverConfig) -> Result<RdpSolution> {
    cfg.validate()?;
    let (d, p, metric) = (q.distortion(), q.perception(), q.metric());
    if !(d > infimum_distortion(s, metric, p)) {
        return Err(Error::InfeasibleQuery {
            distortion: d,
            perception: p,
            reason: "distortion budget at or below the feasible infimum",
        });
    }

    let hats = model::zero_rate_reconstruction(s, metric, p)?;
    let zero_rate_distortion: f64 = s.lambdas().iter().zip(&hats).map(|(l, h)| l + h).sum();
    if zero_rate_distortion <= d {
        return Ok(zero_rate_solution(s, metric, &hats));
    }

    if metric == PerceptionMetric::Unconstrained {
        return classic::reverse_waterfill(s, d);
    }

    if p == 0.0 {
        let mut sol = solve_perfect_perception(s, d, cfg)?;
        sol.metric = metric;
        return Ok(sol);
    }

    let mut rd = classic::reverse_waterfill(s, d)?;
    let rd_perception = total_perception(s, metric, &rd.allocations);
    if rd_perception <= p {
        rd.metric = metric;
        rd.achieved_perception = rd_perception;
        return Ok(rd);
    }

    solve_both_active(s, d, p, metric, cfg)
}

fn total_perception(s: &SourceSpectrum, metric: PerceptionMetric, allocs: &[ComponentAllocation]) -> f64 {
    s.kernels()
        .zip(allocs)
        .map(|(k, a)| k.perception(metric, a.lambda_hat))
        .sum()
}

fn total_distortion(s: &SourceSpectrum, allocs: &[ComponentAllocation]) -> f64 {
    s.kernels()
        .zip(allocs)
        .map(|(k, a)| k.distortion_unchecked(a.gamma, a.lambda_hat))
        .sum()
}

fn zero_rate_solution(s: &SourceSpectrum, metric: PerceptionMetric, hats: &[f64]) -> RdpSolution {
    let allocations: Vec<ComponentAllocation> = s
        .lambdas()
        .iter()
        .zip(hats)
        .map(|(&l, &h)| ComponentAllocation {
            gamma: l,
            lambda_hat: h,
            rate: 0.0,
        })
        .collect();
    // ν₁ = ν₂ = 0: γ = λ minimizes the rate whatever λ̂ is, and the box
    // multiplier ξ = 1/(2λ) absorbs the γ-stationarity condition
    let mut kkt = KktResiduals::default();
    for &l in s.lambdas() {
        kkt.xi.push(0.5 / l);
        kkt.eta.push(0.0);
        kkt.stationarity_gamma.push(0.0);
        kkt.stationarity_lambda_hat.push(0.0);
    }
    let achieved_perception = match metric {
        PerceptionMetric::Unconstrained => f64::NAN,
        _ => total_perception(s, metric, &allocations),
    };
    RdpSolution {
        total_rate: 0.0,
        achieved_distortion: total_distortion(s, &allocations),
        achieved_perception,
        dual: DualPoint { nu1: 0.0, nu2: 0.0 },
        case_tag: CaseTag::DistortionInactive,
        kkt_residual: kkt.max_residual(),
        kkt,
        allocations,
        metric,
    }
}

/// Minimizer of the Lagrangian for one component at a dual point with both
/// multipliers positive.
pub fn stationary_allocation(k: &ComponentKernel, metric: PerceptionMetric, dual: DualPoint) -> Result<(f64, f64)> {
    match metric {
        PerceptionMetric::Kl => k.stationary_pair_kl(dual),
        PerceptionMetric::W2 => k.stationary_pair_w2(dual),
        PerceptionMetric::Unconstrained => Err(Error::DualDegenerate {
            nu1: dual.nu1,
            nu2: 0.0,
        }),
    }
}

/// Allocation plus constraint totals (ΣD, ΣP) at a dual point.
pub fn evaluate_at_dual(
    s: &SourceSpectrum,
    metric: PerceptionMetric,
    dual: DualPoint,
) -> Result<(Vec<ComponentAllocation>, f64, f64)> {
    let mut allocs = Vec::with_capacity(s.len());
    let (mut dist, mut perc) = (0.0, 0.0);
    for k in s.kernels() {
        let (gamma, lambda_hat) = stationary_allocation(&k, metric, dual)?;
        dist += k.distortion_unchecked(gamma, lambda_hat);
        perc += k.perception(metric, lambda_hat);
        allocs.push(ComponentAllocation::new(k.lambda(), gamma, lambda_hat));
    }
    Ok((allocs, dist, perc))
}

/// ν₁ meeting the distortion budget with equality at a fixed ν₂.
fn nu1_for_distortion(
    s: &SourceSpectrum,
    metric: PerceptionMetric,
    d: f64,
    nu2: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let slack = |t: f64| match evaluate_at_dual(s, metric, DualPoint { nu1: exp(t), nu2 }) {
        Ok((_, dist, _)) => dist - d,
        Err(_) => f64::NAN,
    };
    let t0 = ln(s.len() as f64 / (2.0 * d));
    let (lo, hi) =
        roots::expand_bracket_decreasing(slack, t0, cfg.dual_step_init, BRACKET_STEPS, "distortion multiplier")?;
    let t = if lo == hi {
        lo
    } else {
        roots::brent(
            slack,
            lo,
            hi,
            LOG_NU_XTOL,
            cfg.max_dual_iterations,
            "distortion multiplier",
        )?
    };
    Ok(exp(t))
}

fn solve_both_active(
    s: &SourceSpectrum,
    d: f64,
    p: f64,
    metric: PerceptionMetric,
    cfg: &SolverConfig,
) -> Result<RdpSolution> {
    // ΣP − P at the distortion-feasible ν₁(ν₂); nonincreasing in ln ν₂
    let slack = |u: f64| -> f64 {
        let nu2 = exp(u);
        let Ok(nu1) = nu1_for_distortion(s, metric, d, nu2, cfg) else {
            return f64::NAN;
        };
        match evaluate_at_dual(s, metric, DualPoint { nu1, nu2 }) {
            Ok((_, _, perc)) => perc - p,
            Err(_) => f64::NAN,
        }
    };
    let u = match roots::expand_bracket_decreasing(
        slack,
        0.0,
        cfg.dual_step_init,
        BRACKET_STEPS,
        "perception multiplier",
    ) {
        Ok((lo, hi)) if lo == hi => lo,
        Ok((lo, hi)) => roots::brent(
            slack,
            lo,
            hi,
            LOG_NU_XTOL,
            cfg.max_dual_iterations,
            "perception multiplier",
        )?,
        // Large KL budgets on components that water-filling would switch off
        // need λ̂ ~ e^(−2P), far below what γ = λ − gap resolves. The slack then
        // never turns positive and the allocation is the water-filling limit
        // up to rounding.
        Err(Error::NoBracket { .. }) if slack(SATURATED_LOG_NU2) <= 0.0 => SATURATED_LOG_NU2,
        Err(e) => return Err(e),
    };
    let nu2 = exp(u);
    let nu1 = nu1_for_distortion(s, metric, d, nu2, cfg)?;
    let dual = DualPoint { nu1, nu2 };
    let (allocations, dist, perc) = evaluate_at_dual(s, metric, dual)?;

    let d_err = (dist - d).abs();
    if !(d_err <= cfg.distortion_tol * s.total_variance()) {
        return Err(Error::ConvergenceFailure {
            stage: "distortion constraint",
            iterations: cfg.max_dual_iterations,
            residual: d_err,
        });
    }
    let p_err = if u == SATURATED_LOG_NU2 {
        (perc - p).max(0.0)
    } else {
        (perc - p).abs()
    };
    if !(p_err <= cfg.perception_tol) {
        return Err(Error::ConvergenceFailure {
            stage: "perception constraint",
            iterations: cfg.max_dual_iterations,
            residual: p_err,
        });
    }
    if let Some(a) = s.lambdas().iter().zip(&allocations).find(|(l, a)| !(a.gamma < **l)) {
        return Err(Error::ConvergenceFailure {
            stage: "positive-rate check",
            iterations: 0,
            residual: *a.0 - a.1.gamma,
        });
    }

    let kkt = both_active_kkt(s, metric, dual, &allocations, dist - d, perc - p);
    Ok(RdpSolution {
        total_rate: allocations.iter().map(|a| a.rate).sum(),
        achieved_distortion: dist,
        achieved_perception: perc,
        dual,
        case_tag: CaseTag::BothActive,
        kkt_residual: kkt.max_residual(),
        kkt,
        allocations,
        metric,
    })
}

/// Stationarity residuals with ξ = η = 0 (interior allocation).
pub fn both_active_kkt(
    s: &SourceSpectrum,
    metric: PerceptionMetric,
    dual: DualPoint,
    allocations: &[ComponentAllocation],
    distortion_slack: f64,
    perception_slack: f64,
) -> KktResiduals {
    let mut out = KktResiduals::default();
    for (k, a) in s.kernels().zip(allocations) {
        let (g, h) = (a.gamma, a.lambda_hat);
        out.stationarity_gamma
            .push(0.5 / g - dual.nu1 * k.distortion_d_gamma(g, h));
        out.stationarity_lambda_hat
            .push(dual.nu1 * k.distortion_d_lambda_hat(g, h) + dual.nu2 * k.perception_derivative(metric, h));
        out.xi.push(0.0);
        out.eta.push(0.0);
    }
    out.complementarity = (dual.nu1 * distortion_slack)
        .abs()
        .max((dual.nu2 * perception_slack).abs());
    out
}

/// R(D, 0): every reconstruction variance is pinned to λ and the water
/// levels follow γ = 2λ/(1 + √(1 + 16ν₁²λ²)), with ν₁ fixed by
/// D = Σ(2λ − 2√(λ(λ − γ))).
///
/// Requires 0 < D < 2Σλ. The result is tagged with the KL metric; the
/// perception loss is zero under either metric.
pub fn solve_perfect_perception(s: &SourceSpectrum, d: f64, cfg: &SolverConfig) -> Result<RdpSolution> {
    cfg.validate()?;
    let upper = 2.0 * s.total_variance();
    if !(d > 0.0 && d < upper) {
        return Err(Error::OutOfRange {
            value: d,
            lower: 0.0,
            upper,
        });
    }
    let distortion_at = |nu1: f64| -> f64 {
        s.kernels()
            .map(|k| {
                let l = k.lambda();
                2.0 * l - 2.0 * sqrt(l * k.perfect_perception_gap(nu1))
            })
            .sum()
    };
    let slack = |t: f64| distortion_at(exp(t)) - d;
    let t0 = ln(s.len() as f64 / (2.0 * d));
    let (lo, hi) = roots::expand_bracket_decreasing(
        slack,
        t0,
        cfg.dual_step_init,
        BRACKET_STEPS,
        "perfect-perception multiplier",
    )?;
    let t = if lo == hi {
        lo
    } else {
        roots::brent(
            slack,
            lo,
            hi,
            LOG_NU_XTOL,
            cfg.max_dual_iterations,
            "perfect-perception multiplier",
        )?
    };
    let nu1 = exp(t);

    let mut allocations = Vec::with_capacity(s.len());
    let mut kkt = KktResiduals::default();
    for k in s.kernels() {
        let l = k.lambda();
        let x = 16.0 * nu1 * nu1 * l * l;
        let root = sqrt(1.0 + x);
        // ½ ln((1 + √(1+x))/2) = ½ ln(1 + (√(1+x) − 1)/2)
        let rate = 0.5 * ln_1p(0.5 * x / (1.0 + root));
        let gamma = k.perfect_perception_gamma(nu1);
        allocations.push(ComponentAllocation {
            gamma,
            lambda_hat: l,
            rate,
        });
        kkt.stationarity_gamma
            .push(0.5 / gamma - nu1 * k.distortion_d_gamma(gamma, l));
        // λ̂ is pinned by the P = 0 constraint; its multiplier is unbounded
        kkt.stationarity_lambda_hat.push(0.0);
        kkt.xi.push(0.0);
        kkt.eta.push(0.0);
    }
    let dist = total_distortion(s, &allocations);
    let d_err = (dist - d).abs();
    if !(d_err <= cfg.distortion_tol * s.total_variance()) {
        return Err(Error::ConvergenceFailure {
            stage: "perfect-perception distortion",
            iterations: cfg.max_dual_iterations,
            residual: d_err,
        });
    }
    kkt.complementarity = nu1 * (dist - d).abs();
    Ok(RdpSolution {
        total_rate: allocations.iter().map(|a| a.rate).sum(),
        achieved_distortion: dist,
        achieved_perception: 0.0,
        dual: DualPoint {
            nu1,
            nu2: f64::INFINITY,
        },
        case_tag: CaseTag::BothActive,
        kkt_residual: kkt.max_residual(),
        kkt,
        allocations,
        metric: PerceptionMetric::Kl,
    })
}

/// R(2Σλ − ε, 0) ≈ ε²/(8Σλ²), with water levels λ − ε²λ³/(4(Σλ²)²).
pub fn high_distortion_p0_estimate(s: &SourceSpectrum, eps: f64) -> (f64, Vec<f64>) {
    let sum_sq: f64 = s.lambdas().iter().map(|l| l * l).sum();
    let rate = eps * eps / (8.0 * sum_sq);
    let levels = s
        .lambdas()
        .iter()
        .map(|&l| l - eps * eps * l * l * l / (4.0 * sum_sq * sum_sq))
        .collect();
    (rate, levels)
}

/// R(ε, 0) ≈ ½Σ ln(Lλ/ε) + (ε/(8L))Σ 1/λ, with water levels
/// ε/L − ε²/(2L²λ) + (ε²/(4L³))Σ 1/λ.
pub fn low_distortion_p0_estimate(s: &SourceSpectrum, eps: f64) -> (f64, Vec<f64>) {
    let n = s.len() as f64;
    let inv_sum: f64 = s.lambdas().iter().map(|l| 1.0 / l).sum();
    let rate = 0.5 * s.lambdas().iter().map(|&l| ln(n * l / eps)).sum::<f64>() + eps / (8.0 * n) * inv_sum;
    let levels = s
        .lambdas()
        .iter()
        .map(|&l| eps / n - eps * eps / (2.0 * n * n * l) + eps * eps / (4.0 * n * n * n) * inv_sum)
        .collect();
    (rate, levels)
}
