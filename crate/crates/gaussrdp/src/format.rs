//! CSV and JSON renderings of solutions and sweeps.
//!
//! CSV numbers use 17 significant digits (`{:.16e}`), which round-trips
//! every `f64`. A sweep file starts with `# key: value` metadata lines,
//! then a header row, then one row per grid point in grid order.

use gaussrdp_core::model::{SweepMetadata, SweepOutcome};
use gaussrdp_core::{
    CaseTag, ComponentAllocation, CurveSweep, PerceptionMetric, RateUnit, RdpSolution, SourceSpectrum, TradeoffQuery,
};
use serde_json::{json, Map, Value};

use crate::error::{CliError, Result};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_num(x: f64) -> Value {
    // JSON has no infinities; they (and NaN) are written as null
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn json_nums(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(json_num).collect())
}

pub fn rate_column(unit: RateUnit) -> &'static str {
    match unit {
        RateUnit::Nats => "rate_nats",
        RateUnit::Bits => "rate_bits",
    }
}

pub fn header(unit: RateUnit, components: usize) -> Vec<String> {
    let mut h: Vec<String> = ["D", "P", "metric", rate_column(unit), "case_tag"]
        .map(String::from)
        .into();
    for prefix in ["gamma", "lambda_hat", "rate"] {
        h.extend((1..=components).map(|i| format!("{prefix}_{i}")));
    }
    h
}

fn row(q: &TradeoffQuery, outcome: &SweepOutcome, components: usize) -> Vec<String> {
    let mut r = vec![
        num(q.distortion()),
        num(q.perception()),
        q.metric().as_str().to_string(),
    ];
    match outcome {
        SweepOutcome::Solved {
            total_rate,
            allocations,
            ..
        } => {
            r.push(num(*total_rate));
            r.push(outcome.tag().to_string());
            r.extend(allocations.iter().map(|a| num(a.gamma)));
            r.extend(allocations.iter().map(|a| num(a.lambda_hat)));
            r.extend(allocations.iter().map(|a| num(a.rate)));
        }
        _ => {
            r.push(String::new());
            r.push(outcome.tag().to_string());
            r.extend(std::iter::repeat_n(String::new(), 3 * components));
        }
    }
    r
}

pub fn sweep_to_csv(sweep: &CurveSweep, components: usize) -> Result<String> {
    let m = &sweep.metadata;
    let mut out = format!(
        "# source: {}\n# rate_unit: {}\n# version: {}\n",
        m.source,
        m.rate_unit.as_str(),
        m.version
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(m.rate_unit, components))?;
    for (q, o) in sweep.queries.iter().zip(&sweep.solutions) {
        w.write_record(row(q, o, components))?;
    }
    let body = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

fn bad(line: usize, what: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("sweep csv line {line}: {what}"))
}

fn parse_num(s: &str, line: usize, col: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| bad(line, format!("invalid number '{s}' in column {col}")))
}

/// Parses [`sweep_to_csv`] output.
pub fn sweep_from_csv(text: &str) -> Result<CurveSweep> {
    let (mut source, mut unit, mut version) = (None, None, None);
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let Some((key, value)) = line[1..].split_once(':') else {
            continue;
        };
        let value = value.trim().to_string();
        match key.trim() {
            "source" => source = Some(value),
            "rate_unit" => unit = Some(value.parse::<RateUnit>().map_err(|e| bad(0, e))?),
            "version" => version = Some(value),
            _ => {}
        }
    }
    let metadata = SweepMetadata {
        source: source.ok_or_else(|| bad(0, "missing '# source:' line"))?,
        rate_unit: unit.ok_or_else(|| bad(0, "missing '# rate_unit:' line"))?,
        version: version.ok_or_else(|| bad(0, "missing '# version:' line"))?,
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let head = reader.headers()?.clone();
    if head.len() < 5 || (head.len() - 5) % 3 != 0 {
        return Err(bad(1, "header does not have 5 + 3L columns"));
    }
    let components = (head.len() - 5) / 3;
    let expected = header(metadata.rate_unit, components);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(bad(1, format!("unexpected header; expected {}", expected.join(","))));
    }

    let mut queries = Vec::new();
    let mut solutions = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let metric: PerceptionMetric = rec[2].parse().map_err(|e| bad(line, e))?;
        let q = TradeoffQuery::new(parse_num(&rec[0], line, "D")?, parse_num(&rec[1], line, "P")?, metric)
            .map_err(|e| bad(line, e))?;
        let outcome = match &rec[4] {
            "infeasible" => SweepOutcome::Infeasible,
            "convergence_failure" => SweepOutcome::ConvergenceFailure,
            tag => {
                let case_tag: CaseTag = tag.parse().map_err(|e| bad(line, e))?;
                let field = |i: usize, col: &str| parse_num(&rec[i], line, col);
                let allocations = (0..components)
                    .map(|i| {
                        Ok(ComponentAllocation {
                            gamma: field(5 + i, "gamma")?,
                            lambda_hat: field(5 + components + i, "lambda_hat")?,
                            rate: field(5 + 2 * components + i, "rate")?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SweepOutcome::Solved {
                    case_tag,
                    total_rate: field(3, "rate")?,
                    allocations,
                }
            }
        };
        queries.push(q);
        solutions.push(outcome);
    }
    Ok(CurveSweep {
        metadata,
        queries,
        solutions,
    })
}

fn metadata_json(m: &SweepMetadata) -> Value {
    json!({ "source": m.source, "rate_unit": m.rate_unit.as_str(), "version": m.version })
}

fn outcome_json(q: &TradeoffQuery, o: &SweepOutcome, unit: RateUnit) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("D".into(), json_num(q.distortion()));
    m.insert("P".into(), json_num(q.perception()));
    m.insert("metric".into(), q.metric().as_str().into());
    match o {
        SweepOutcome::Solved {
            total_rate,
            allocations,
            ..
        } => {
            m.insert(rate_column(unit).into(), json_num(*total_rate));
            m.insert("case_tag".into(), o.tag().into());
            m.insert("gamma".into(), json_nums(allocations.iter().map(|a| a.gamma)));
            m.insert("lambda_hat".into(), json_nums(allocations.iter().map(|a| a.lambda_hat)));
            m.insert("rate".into(), json_nums(allocations.iter().map(|a| a.rate)));
        }
        _ => {
            m.insert(rate_column(unit).into(), Value::Null);
            m.insert("case_tag".into(), o.tag().into());
        }
    }
    m
}

pub fn sweep_to_json(sweep: &CurveSweep) -> Result<String> {
    let unit = sweep.metadata.rate_unit;
    let points: Vec<Value> = sweep
        .queries
        .iter()
        .zip(&sweep.solutions)
        .map(|(q, o)| Value::Object(outcome_json(q, o, unit)))
        .collect();
    let doc = json!({ "metadata": metadata_json(&sweep.metadata), "points": points });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Point record: the sweep row fields plus source, dual point and KKT data.
pub fn solution_to_json(
    s: &SourceSpectrum,
    q: &TradeoffQuery,
    sol: &RdpSolution,
    metadata: &SweepMetadata,
) -> Result<String> {
    let unit = metadata.rate_unit;
    let mut m = outcome_json(q, &SweepOutcome::from_solution(sol, unit), unit);
    m.insert("metadata".into(), metadata_json(metadata));
    m.insert("lambda".into(), json_nums(s.lambdas().iter().copied()));
    m.insert(
        "dual".into(),
        json!({ "nu1": json_num(sol.dual.nu1), "nu2": json_num(sol.dual.nu2) }),
    );
    m.insert("kkt_residual".into(), json_num(sol.kkt_residual));
    m.insert("achieved_distortion".into(), json_num(sol.achieved_distortion));
    m.insert("achieved_perception".into(), json_num(sol.achieved_perception));
    Ok(serde_json::to_string_pretty(&Value::Object(m))? + "\n")
}
