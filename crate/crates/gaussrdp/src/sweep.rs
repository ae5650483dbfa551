//! Grid evaluation with bounded parallelism and deterministic ordering.

use gaussrdp_core::model::{SweepMetadata, SweepOutcome};
use gaussrdp_core::{
    solver, CurveSweep, Error, PerceptionMetric, RateUnit, SolverConfig, SourceSpectrum, TradeoffQuery,
};
use rayon::prelude::*;

use crate::error::{CliError, Result};

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(CliError::Input("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {jobs} worker threads: {e}")))
}

/// Queries in distortion-major order.
pub fn grid_queries(metric: PerceptionMetric, distortions: &[f64], perceptions: &[f64]) -> Result<Vec<TradeoffQuery>> {
    let mut out = Vec::with_capacity(distortions.len() * perceptions.len());
    for &d in distortions {
        for &p in perceptions {
            out.push(TradeoffQuery::new(d, p, metric)?);
        }
    }
    Ok(out)
}

/// Maps a solver result to a sweep row; infeasible and non-converged points
/// become rows instead of aborting the sweep.
pub fn outcome(result: std::result::Result<gaussrdp_core::RdpSolution, Error>, unit: RateUnit) -> Result<SweepOutcome> {
    match result {
        Ok(sol) => Ok(SweepOutcome::from_solution(&sol, unit)),
        Err(e) => match CliError::from(e) {
            CliError::Infeasible(_) => Ok(SweepOutcome::Infeasible),
            CliError::Convergence(_) => Ok(SweepOutcome::ConvergenceFailure),
            other => Err(other),
        },
    }
}

pub fn run(
    s: &SourceSpectrum,
    queries: Vec<TradeoffQuery>,
    cfg: &SolverConfig,
    metadata: SweepMetadata,
    jobs: usize,
) -> Result<CurveSweep> {
    let unit = metadata.rate_unit;
    let solutions = pool(jobs)?.install(|| {
        queries
            .par_iter()
            .map(|q| outcome(solver::solve(s, q, cfg), unit))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(CurveSweep {
        metadata,
        queries,
        solutions,
    })
}
