//! Cross-checks of one solution: the dual solver against the barrier
//! oracle, plus Monte Carlo sampling of every component.

use gaussrdp_core::montecarlo::{self, AnalyticStats, Moments, SampleReport, SolutionCheck};
use gaussrdp_core::oracle::{self, OracleResult};
use gaussrdp_core::{solver, CaseTag, PerceptionMetric, RdpSolution, SolverConfig, SourceSpectrum, TradeoffQuery};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::Result;

/// Allowed |solver − oracle| in nats: max(1e-4, 1e-3·rate).
pub fn rate_tolerance(rate: f64) -> f64 {
    1e-4f64.max(1e-3 * rate)
}

pub const KKT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub solution: RdpSolution,
    pub oracle_rate: f64,
    pub oracle_gap_bound: f64,
    pub rate_delta: f64,
    pub rate_tolerance: f64,
    pub kkt_passed: bool,
    pub monte_carlo: SolutionCheck,
    pub passed: bool,
}

/// Oracle value for the query. Perfect perception at or beyond 2Σλ is
/// zero rate in closed form.
pub fn oracle_rate(s: &SourceSpectrum, q: &TradeoffQuery) -> gaussrdp_core::Result<(f64, f64)> {
    let perfect = q.metric() != PerceptionMetric::Unconstrained && q.perception() == 0.0;
    if perfect {
        if q.distortion() >= 2.0 * s.total_variance() {
            return Ok((0.0, 0.0));
        }
        let r = oracle::minimize_primal_p0(s, q.distortion())?;
        return Ok((r.rate, r.duality_gap_bound));
    }
    let r: OracleResult = oracle::minimize_primal(s, q, None)?;
    Ok((r.rate, r.duality_gap_bound))
}

/// Same result as [`montecarlo::verify_solution`], with the streams of all
/// components sampled in parallel and merged in order.
pub fn monte_carlo(s: &SourceSpectrum, sol: &RdpSolution, n: u64, seed: u64) -> Result<SolutionCheck> {
    if n < montecarlo::MIN_SAMPLES {
        return Err(crate::error::CliError::Input(format!(
            "--samples must be at least {}",
            montecarlo::MIN_SAMPLES
        )));
    }
    let pairs = montecarlo::solution_pairs(s, sol)?;
    let streams = montecarlo::stream_count(n);
    let tasks: Vec<(usize, u64)> = (0..pairs.len())
        .flat_map(|i| (0..streams).map(move |k| (i, k)))
        .collect();
    let moments: Vec<Moments> = tasks
        .par_iter()
        .map(|&(i, k)| {
            let seed_i = montecarlo::component_seed(seed, i);
            montecarlo::sample_stream(&pairs[i], seed_i, k, montecarlo::stream_len(n, k))
        })
        .collect();
    let reports: Vec<SampleReport> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let chunk = &moments[i * streams as usize..(i + 1) * streams as usize];
            SampleReport::from_moments(
                p,
                &montecarlo::merge_streams(chunk),
                montecarlo::component_seed(seed, i),
            )
        })
        .collect();
    Ok(montecarlo::assemble_check(s, sol, &pairs, reports))
}

pub fn run(s: &SourceSpectrum, q: &TradeoffQuery, cfg: &SolverConfig, samples: u64, seed: u64) -> Result<VerifyReport> {
    let solution = solver::solve(s, q, cfg)?;
    let (oracle_rate, oracle_gap_bound) = oracle_rate(s, q)?;
    let rate_delta = (solution.total_rate - oracle_rate).abs();
    let tol = rate_tolerance(solution.total_rate);
    let kkt_passed = solution.case_tag != CaseTag::BothActive || solution.kkt_residual <= KKT_TOLERANCE;
    let monte_carlo = monte_carlo(s, &solution, samples, seed)?;
    let passed = rate_delta <= tol && kkt_passed && monte_carlo.passed;
    Ok(VerifyReport {
        solution,
        oracle_rate,
        oracle_gap_bound,
        rate_delta,
        rate_tolerance: tol,
        kkt_passed,
        monte_carlo,
        passed,
    })
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn stats_json(lambda: f64, st: &AnalyticStats, r: &SampleReport, gamma: f64, lambda_hat: f64) -> Value {
    json!({
        "lambda": num(lambda),
        "gamma": num(gamma),
        "lambda_hat": num(lambda_hat),
        "mi": num(st.mi),
        "kl": num(st.kl),
        "w2": num(st.w2),
        "n_samples": r.n_samples,
        "seed": r.seed,
        "empirical_distortion": num(r.empirical_distortion),
        "analytic_distortion": num(r.analytic_distortion),
        "standard_error": num(r.standard_error),
        "empirical_mi": r.empirical_mi_estimate.map_or(Value::Null, num),
        "empirical_reconstruction_variance": num(r.empirical_reconstruction_variance),
        "passed": r.passed,
    })
}

pub fn to_json(s: &SourceSpectrum, q: &TradeoffQuery, r: &VerifyReport) -> Result<String> {
    let mc = &r.monte_carlo;
    let components: Vec<Value> = s
        .lambdas()
        .iter()
        .zip(&r.solution.allocations)
        .zip(mc.stats.iter().zip(&mc.reports))
        .map(|((&l, a), (st, rep))| stats_json(l, st, rep, a.gamma, a.lambda_hat))
        .collect();
    let doc = json!({
        "D": num(q.distortion()),
        "P": num(q.perception()),
        "metric": q.metric().as_str(),
        "case_tag": r.solution.case_tag.as_str(),
        "solver_rate_nats": num(r.solution.total_rate),
        "oracle_rate_nats": num(r.oracle_rate),
        "oracle_gap_bound": num(r.oracle_gap_bound),
        "rate_delta": num(r.rate_delta),
        "rate_tolerance": num(r.rate_tolerance),
        "rate_passed": r.rate_delta <= r.rate_tolerance,
        "kkt_residual": num(r.solution.kkt_residual),
        "kkt_passed": r.kkt_passed,
        "monte_carlo": {
            "empirical_distortion": num(mc.empirical_distortion),
            "analytic_distortion": num(mc.analytic_distortion),
            "analytic_perception": num(mc.analytic_perception),
            "pooled_standard_error": num(mc.pooled_standard_error),
            "distortion_consistent": mc.distortion_consistent,
            "perception_consistent": mc.perception_consistent,
            "passed": mc.passed,
            "components": components,
        },
        "passed": r.passed,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}
