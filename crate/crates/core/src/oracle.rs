//! Direct minimization of the primal program over (γ, λ̂), independent of
//! the dual machinery in [`crate::solver`].
//!
//! Log-barrier interior point: each stage centers
//! `t·rate(x) − Σ ln(slack_i(x))` by damped Newton steps, then multiplies
//! `t` by 10. With `m` inequality constraints the final duality gap is
//! bounded by `m/t`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::ComponentKernel;
use crate::math::{ln, sqrt};
use crate::model::{PerceptionMetric, SourceSpectrum, TradeoffQuery};

const T_INITIAL: f64 = 1.0;
const T_FACTOR: f64 = 10.0;
const MU_FINAL: f64 = 1e-8;
const SEED_HALVINGS: usize = 20;
const NEWTON_MAX_ITER: usize = 200;
const CENTERING_TOL: f64 = 1e-12;
// half squared Newton decrement below which a stalled line search is
// attributed to rounding in the barrier value
const STALL_TOL: f64 = 1e-6;
const LINE_SEARCH_HALVINGS: usize = 80;
const ARMIJO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub gammas: Vec<f64>,
    pub lambda_hats: Vec<f64>,
}

impl PrimalPoint {
    /// Σ ½ ln(λ/γ) in nats.
    pub fn rate(&self, s: &SourceSpectrum) -> f64 {
        s.lambdas().iter().zip(&self.gammas).map(|(l, g)| 0.5 * ln(l / g)).sum()
    }

    pub fn distortion(&self, s: &SourceSpectrum) -> f64 {
        s.kernels()
            .zip(self.gammas.iter().zip(&self.lambda_hats))
            .map(|(k, (&g, &h))| k.distortion_unchecked(g, h))
            .sum()
    }

    pub fn perception(&self, s: &SourceSpectrum, metric: PerceptionMetric) -> f64 {
        s.kernels()
            .zip(&self.lambda_hats)
            .map(|(k, &h)| k.perception(metric, h))
            .sum()
    }

    /// Strictly inside the box and both budgets.
    pub fn is_strictly_feasible(&self, s: &SourceSpectrum, q: &TradeoffQuery) -> bool {
        let n = s.len();
        if self.gammas.len() != n || self.lambda_hats.len() != n {
            return false;
        }
        let boxed = s
            .lambdas()
            .iter()
            .zip(self.gammas.iter().zip(&self.lambda_hats))
            .all(|(&l, (&g, &h))| g > 0.0 && g < l && h > 0.0 && h.is_finite());
        boxed
            && self.distortion(s) < q.distortion()
            && (q.metric() == PerceptionMetric::Unconstrained
                || !q.perception().is_finite()
                || self.perception(s, q.metric()) < q.perception())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub rate: f64,
    pub point: PrimalPoint,
    /// 1/t at the last barrier stage.
    pub barrier_mu_final: f64,
    /// Max-norm of the centering gradient divided by t at the returned point.
    pub gradient_norm_final: f64,
    /// m/t with m inequality constraints: bound on rate − optimum.
    pub duality_gap_bound: f64,
}

/// Barrier program in the variables x = (γ₁..γ_L, λ̂₁..λ̂_L), or x = γ
/// alone when λ̂ is pinned to λ.
struct Program {
    kernels: Vec<ComponentKernel>,
    distortion: f64,
    /// `None` when the perception budget is absent.
    perception: Option<(PerceptionMetric, f64)>,
    pinned: bool,
}

struct Evaluation {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Program {
    fn new(s: &SourceSpectrum, q: &TradeoffQuery) -> Self {
        let perception = match q.metric() {
            PerceptionMetric::Unconstrained => None,
            m if q.perception().is_finite() => Some((m, q.perception())),
            _ => None,
        };
        Self {
            kernels: s.kernels().collect(),
            distortion: q.distortion(),
            perception,
            pinned: false,
        }
    }

    fn pinned(s: &SourceSpectrum, distortion: f64) -> Self {
        Self {
            kernels: s.kernels().collect(),
            distortion,
            perception: None,
            pinned: true,
        }
    }

    fn len(&self) -> usize {
        self.kernels.len()
    }

    fn dim(&self) -> usize {
        if self.pinned {
            self.len()
        } else {
            2 * self.len()
        }
    }

    fn constraint_count(&self) -> usize {
        // γ < λ per component, λ̂ > 0 per free component, the distortion
        // budget and the optional perception budget; γ > 0 is enforced by
        // the rate term itself
        let hats = if self.pinned { 0 } else { self.len() };
        self.len() + hats + 1 + usize::from(self.perception.is_some())
    }

    fn lambda_hat(&self, x: &[f64], i: usize) -> f64 {
        if self.pinned {
            self.kernels[i].lambda()
        } else {
            x[self.len() + i]
        }
    }

    fn point(&self, x: &[f64]) -> PrimalPoint {
        PrimalPoint {
            gammas: x[..self.len()].to_vec(),
            lambda_hats: (0..self.len()).map(|i| self.lambda_hat(x, i)).collect(),
        }
    }

    fn rate(&self, x: &[f64]) -> f64 {
        self.kernels.iter().zip(x).map(|(k, g)| 0.5 * ln(k.lambda() / g)).sum()
    }

    fn slacks(&self, x: &[f64]) -> Option<(f64, f64)> {
        let mut dist = 0.0;
        let mut perc = 0.0;
        for (i, k) in self.kernels.iter().enumerate() {
            let (g, h) = (x[i], self.lambda_hat(x, i));
            if !(g > 0.0 && g < k.lambda() && h > 0.0) {
                return None;
            }
            dist += k.distortion_unchecked(g, h);
            if let Some((m, _)) = self.perception {
                perc += k.perception(m, h);
            }
        }
        let sd = self.distortion - dist;
        let sp = self.perception.map_or(1.0, |(_, p)| p - perc);
        (sd > 0.0 && sp > 0.0).then_some((sd, sp))
    }

    fn barrier_value(&self, x: &[f64], t: f64) -> Option<f64> {
        let (sd, sp) = self.slacks(x)?;
        let mut v = t * self.rate(x) - ln(sd);
        if self.perception.is_some() {
            v -= ln(sp);
        }
        for (i, k) in self.kernels.iter().enumerate() {
            v -= ln(k.lambda() - x[i]);
            if !self.pinned {
                v -= ln(x[self.len() + i]);
            }
        }
        Some(v)
    }

    fn evaluate(&self, x: &[f64], t: f64) -> Option<Evaluation> {
        let value = self.barrier_value(x, t)?;
        let (sd, sp) = self.slacks(x)?;
        let (n, dim) = (self.len(), self.dim());
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        let mut d_grad = vec![0.0; dim];
        let mut p_grad = vec![0.0; dim];

        for (i, k) in self.kernels.iter().enumerate() {
            let (g, h) = (x[i], self.lambda_hat(x, i));
            let gap = k.lambda() - g;
            grad[i] += -0.5 * t / g + 1.0 / gap;
            hess[i * dim + i] += 0.5 * t / (g * g) + 1.0 / (gap * gap);

            let (hgg, hgb, hbb) = k.distortion_hessian(g, h);
            d_grad[i] = k.distortion_d_gamma(g, h);
            hess[i * dim + i] += hgg / sd;
            if !self.pinned {
                let j = n + i;
                grad[j] += -1.0 / h;
                hess[j * dim + j] += 1.0 / (h * h);
                d_grad[j] = k.distortion_d_lambda_hat(g, h);
                hess[i * dim + j] += hgb / sd;
                hess[j * dim + i] += hgb / sd;
                hess[j * dim + j] += hbb / sd;
                if let Some((m, _)) = self.perception {
                    p_grad[j] = k.perception_derivative(m, h);
                    hess[j * dim + j] += k.perception_second_derivative(m, h) / sp;
                }
            }
        }
        for a in 0..dim {
            grad[a] += d_grad[a] / sd;
            for b in 0..dim {
                hess[a * dim + b] += d_grad[a] * d_grad[b] / (sd * sd);
            }
        }
        if self.perception.is_some() {
            for a in 0..dim {
                grad[a] += p_grad[a] / sp;
                for b in 0..dim {
                    hess[a * dim + b] += p_grad[a] * p_grad[b] / (sp * sp);
                }
            }
        }
        Some(Evaluation { value, grad, hess })
    }

    /// γ = λ/2 with λ̂ = λ, halving γ until the distortion budget holds.
    fn seed(&self) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        for (i, k) in self.kernels.iter().enumerate() {
            x[i] = 0.5 * k.lambda();
            if !self.pinned {
                x[self.len() + i] = k.lambda();
            }
        }
        for _ in 0..=SEED_HALVINGS {
            if self.slacks(&x).is_some() {
                return Ok(x);
            }
            for g in &mut x[..self.len()] {
                *g *= 0.5;
            }
        }
        Err(Error::InfeasibleSeed)
    }

    fn minimize(&self, mut x: Vec<f64>) -> Result<OracleResult> {
        if self.slacks(&x).is_none() {
            return Err(Error::InfeasibleSeed);
        }
        let dim = self.dim();
        let mut t = T_INITIAL;
        let mut grad_norm = f64::INFINITY;
        loop {
            for _ in 0..NEWTON_MAX_ITER {
                let ev = self.evaluate(&x, t).ok_or(Error::InfeasibleSeed)?;
                grad_norm = ev.grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) / t;
                let step = solve_spd(&ev.hess, &ev.grad, dim).ok_or(Error::NonPsd { determinant: 0.0 })?;
                // step = H⁻¹g, the Newton direction is −step
                let slope: f64 = -ev.grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
                let half_decrement = -0.5 * slope;
                if half_decrement <= CENTERING_TOL {
                    break;
                }
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..LINE_SEARCH_HALVINGS {
                    let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - alpha * si).collect();
                    if let Some(v) = self.barrier_value(&trial, t) {
                        if v <= ev.value + ARMIJO * alpha * slope {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    if half_decrement <= STALL_TOL {
                        break;
                    }
                    return Err(Error::LineSearchFailure {
                        stage: "barrier centering",
                    });
                }
            }
            if 1.0 / t <= MU_FINAL {
                break;
            }
            t *= T_FACTOR;
        }
        let point = self.point(&x);
        Ok(OracleResult {
            rate: self.rate(&x),
            point,
            barrier_mu_final: 1.0 / t,
            gradient_norm_final: grad_norm,
            duality_gap_bound: self.constraint_count() as f64 / t,
        })
    }
}

/// Solves `H y = g` for symmetric positive definite `H` (row-major) by
/// Cholesky after symmetric diagonal scaling.
fn solve_spd(h: &[f64], g: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let d = h[i * n + i];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        scale[i] = 1.0 / sqrt(d);
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = scale[i] * h[i * n + j] * scale[j];
        }
    }
    let mut jitter = 0.0;
    for _ in 0..8 {
        if let Some(l) = cholesky(&a, n, jitter) {
            let rhs: Vec<f64> = (0..n).map(|i| scale[i] * g[i]).collect();
            let y = cholesky_solve(&l, &rhs, n);
            return Some((0..n).map(|i| scale[i] * y[i]).collect());
        }
        jitter = if jitter == 0.0 { 1e-14 } else { jitter * 100.0 };
    }
    None
}

fn cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Minimizes the rate over (γ, λ̂) subject to both budgets.
///
/// Needs P > 0 (or no perception constraint); use [`minimize_primal_p0`]
/// for perfect perception.
pub fn minimize_primal(
    s: &SourceSpectrum,
    q: &TradeoffQuery,
    seed_point: Option<&PrimalPoint>,
) -> Result<OracleResult> {
    if q.metric() != PerceptionMetric::Unconstrained && q.perception() == 0.0 {
        return Err(Error::DomainError(
            "zero perception budget has no interior; use minimize_primal_p0",
        ));
    }
    let program = Program::new(s, q);
    let x = match seed_point {
        Some(p) => {
            if !p.is_strictly_feasible(s, q) {
                return Err(Error::InfeasibleSeed);
            }
            p.gammas.iter().chain(&p.lambda_hats).copied().collect()
        }
        None => program.seed()?,
    };
    program.minimize(x)
}

/// Perfect perception: λ̂ is pinned to λ and only γ is optimized.
pub fn minimize_primal_p0(s: &SourceSpectrum, distortion: f64) -> Result<OracleResult> {
    let upper = 2.0 * s.total_variance();
    if !(distortion > 0.0 && distortion < upper) {
        return Err(Error::OutOfRange {
            value: distortion,
            lower: 0.0,
            upper,
        });
    }
    let program = Program::pinned(s, distortion);
    let x = program.seed()?;
    program.minimize(x)
}

/// Largest relative error between analytic and central-difference partials
/// of the rate, the total distortion and (if constrained) the total
/// perception, over all 2L coordinates. Relative errors are taken against
/// `max(|analytic|, 1)`.
pub fn check_gradients(s: &SourceSpectrum, q: &TradeoffQuery, point: &PrimalPoint) -> f64 {
    let metric = q.metric();
    let mut worst = 0.0f64;
    let mut record = |analytic: f64, fd: f64| {
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(1.0));
    };
    for ((k, &g), &h) in s.kernels().zip(&point.gammas).zip(&point.lambda_hats) {
        let l = k.lambda();

        let step = 1e-6 * g.min(l - g);
        let fd = |f: &dyn Fn(f64) -> f64| (f(g + step) - f(g - step)) / (2.0 * step);
        record(-0.5 / g, fd(&|x| 0.5 * ln(l / x)));
        record(k.distortion_d_gamma(g, h), fd(&|x| k.distortion_unchecked(x, h)));

        let step = 1e-6 * h;
        let fd = |f: &dyn Fn(f64) -> f64| (f(h + step) - f(h - step)) / (2.0 * step);
        record(k.distortion_d_lambda_hat(g, h), fd(&|x| k.distortion_unchecked(g, x)));
        if metric != PerceptionMetric::Unconstrained {
            record(k.perception_derivative(metric, h), fd(&|x| k.perception(metric, x)));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{self, SolverConfig};

    fn spec(v: &[f64]) -> SourceSpectrum {
        SourceSpectrum::from_eigenvalues(v).unwrap()
    }

    #[test]
    fn scalar_rd() {
        let r = minimize_primal(&spec(&[1.0]), &TradeoffQuery::unconstrained(0.5).unwrap(), None).unwrap();
        assert!((r.rate - 0.5 * core::f64::consts::LN_2).abs() < 1e-6);
        assert!((r.point.gammas[0] - 0.5).abs() < 1e-5);
        assert!(r.barrier_mu_final <= MU_FINAL);
        assert!(r.duality_gap_bound <= 1e-6);
    }

    #[test]
    fn scalar_w2_tiny_perception_budget() {
        let q = TradeoffQuery::new(1.0, 1e-10, PerceptionMetric::W2).unwrap();
        let r = minimize_primal(&spec(&[1.0]), &q, None).unwrap();
        assert!((r.rate - 0.5 * ln(4.0 / 3.0)).abs() < 1e-3);
    }

    #[test]
    fn agrees_with_dual_solver_kl() {
        let s = spec(&[2.0, 1.0]);
        let q = TradeoffQuery::new(1.0, 0.05, PerceptionMetric::Kl).unwrap();
        let r = minimize_primal(&s, &q, None).unwrap();
        let sol = solver::solve(&s, &q, &SolverConfig::default()).unwrap();
        assert!(
            (r.rate - sol.total_rate).abs() < 1e-6,
            "{} vs {}",
            r.rate,
            sol.total_rate
        );
        assert!(r.point.distortion(&s) <= 1.0 + 1e-8);
        assert!(r.point.perception(&s, PerceptionMetric::Kl) <= 0.05 + 1e-8);
    }

    #[test]
    fn five_component_kl_instance() {
        let s = spec(&[3.0, 2.0, 5.0, 4.0, 1.0]);
        let q = TradeoffQuery::new(7.5, 0.1, PerceptionMetric::Kl).unwrap();
        let r = minimize_primal(&s, &q, None).unwrap();
        let sol = solver::solve(&s, &q, &SolverConfig::default()).unwrap();
        assert!(
            (r.rate - sol.total_rate).abs() < 1e-6,
            "{} vs {}",
            r.rate,
            sol.total_rate
        );
    }

    #[test]
    fn perfect_perception_reduction() {
        let r = minimize_primal_p0(&spec(&[1.0]), 1.0).unwrap();
        assert!((r.point.gammas[0] - 0.75).abs() < 1e-6);
        assert_eq!(r.point.lambda_hats, vec![1.0]);
        let pair = minimize_primal_p0(&spec(&[1.0, 1.0]), 2.0).unwrap();
        assert!((pair.point.gammas[0] - pair.point.gammas[1]).abs() < 1e-9);
        let edge = minimize_primal_p0(&spec(&[1.0]), 2.0 - 1e-6).unwrap();
        assert!(edge.rate < 1e-6);
        assert!(minimize_primal_p0(&spec(&[1.0]), 2.0).is_err());
    }

    #[test]
    fn zero_perception_rejected() {
        let q = TradeoffQuery::new(1.0, 0.0, PerceptionMetric::Kl).unwrap();
        assert!(minimize_primal(&spec(&[1.0]), &q, None).is_err());
    }

    #[test]
    fn infeasible_seed_rejected() {
        let q = TradeoffQuery::new(1.0, 0.1, PerceptionMetric::Kl).unwrap();
        let bad = PrimalPoint {
            gammas: vec![1.0],
            lambda_hats: vec![1.0],
        };
        assert_eq!(
            minimize_primal(&spec(&[1.0]), &q, Some(&bad)),
            Err(Error::InfeasibleSeed)
        );
    }

    #[test]
    fn gradient_examples() {
        let s = spec(&[1.0]);
        let k = ComponentKernel::new(1.0).unwrap();
        assert!((k.distortion_d_gamma(0.5, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(k.perception_derivative(PerceptionMetric::Kl, 1.0), 0.0);
        let p = PrimalPoint {
            gammas: vec![0.5],
            lambda_hats: vec![0.5],
        };
        for m in [PerceptionMetric::Kl, PerceptionMetric::W2] {
            let q = TradeoffQuery::new(1.0, 0.1, m).unwrap();
            assert!(check_gradients(&s, &q, &p) < 1e-5);
        }
    }

    #[test]
    fn distortion_hessian_is_singular() {
        let k = ComponentKernel::new(2.0).unwrap();
        for &(g, h) in &[(0.3, 1.1), (1.5, 0.2), (1.0, 2.5)] {
            let (a, b, c) = k.distortion_hessian(g, h);
            assert!(a > 0.0 && c > 0.0);
            assert!((a * c - b * b).abs() <= 1e-12 * a * c);
            // finite-difference check of the mixed entry
            let e = 1e-5;
            let fd = (k.distortion_unchecked(g + e, h + e)
                - k.distortion_unchecked(g + e, h - e)
                - k.distortion_unchecked(g - e, h + e)
                + k.distortion_unchecked(g - e, h - e))
                / (4.0 * e * e);
            assert!((fd - b).abs() < 1e-4, "{fd} vs {b}");
        }
    }

    #[test]
    fn spd_solver() {
        let h = [4.0, 1.0, 1.0, 3.0];
        let y = solve_spd(&h, &[1.0, 2.0], 2).unwrap();
        assert!((4.0 * y[0] + y[1] - 1.0).abs() < 1e-14);
        assert!((y[0] + 3.0 * y[1] - 2.0).abs() < 1e-14);
        assert!(solve_spd(&[-1.0], &[1.0], 1).is_none());
    }
}
