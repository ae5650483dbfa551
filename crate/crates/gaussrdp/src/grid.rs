//! Scalar-or-grid axis values: `0.5`, `inf`, or `min:max:count[:linear|log]`.

use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    Scalar(f64),
    Grid {
        min: f64,
        max: f64,
        count: usize,
        spacing: Spacing,
    },
}

impl Axis {
    pub fn is_grid(&self) -> bool {
        matches!(self, Axis::Grid { .. })
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Scalar(v) => vec![v],
            Axis::Grid { min, count: 1, .. } => vec![min],
            Axis::Grid {
                min,
                max,
                count,
                spacing,
            } => {
                let last = (count - 1) as f64;
                let mut out: Vec<f64> = (0..count)
                    .map(|i| {
                        let f = i as f64 / last;
                        match spacing {
                            Spacing::Linear => min + (max - min) * f,
                            Spacing::Log => (min.ln() + (max.ln() - min.ln()) * f).exp(),
                        }
                    })
                    .collect();
                out[0] = min;
                out[count - 1] = max;
                out
            }
        }
    }
}

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("invalid {what} '{s}'")))?;
    if v.is_nan() {
        return Err(CliError::Input(format!("invalid {what} '{s}'")));
    }
    Ok(v)
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 1 {
            return Ok(Axis::Scalar(number(s, "value")?));
        }
        if !(3..=4).contains(&parts.len()) {
            return Err(CliError::Input(format!(
                "grid spec '{s}' must be min:max:count[:linear|log]"
            )));
        }
        let min = number(parts[0], "grid minimum")?;
        let max = number(parts[1], "grid maximum")?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("invalid grid count '{}'", parts[2])))?;
        let spacing = match parts.get(3).map(|p| p.trim()) {
            None | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(CliError::Input(format!("unknown grid spacing '{other}'"))),
        };
        if count == 0 {
            return Err(CliError::Input("grid count must be at least 1".into()));
        }
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(CliError::Input(format!(
                "grid bounds in '{s}' must be finite with min ≤ max"
            )));
        }
        if spacing == Spacing::Log && min <= 0.0 {
            return Err(CliError::Input("log-spaced grid needs a positive minimum".into()));
        }
        Ok(Axis::Grid {
            min,
            max,
            count,
            spacing,
        })
    }
}
