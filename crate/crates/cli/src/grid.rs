//! Parsers for the curve command's grid and subsampling-schedule
//! mini-languages. Both are fixed grammars, not expression parsers: the
//! schedule admits exactly a constant, `c/sqrt(m)`, `1/sqrt(m*log m)`, and
//! `c*sqrt(log m/m)`.

use crate::{param, CliError};

/// Subsampling probability as a function of the composition length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PRule {
    Fixed(f64),
    /// `c/sqrt(m)`.
    OverSqrtM(f64),
    /// `1/sqrt(m*log m)`.
    InvSqrtMLogM,
    /// `c*sqrt(log m/m)`.
    SqrtLogMOverM(f64),
}

impl PRule {
    pub fn p_at(self, m: u64) -> f64 {
        let m = m as f64;
        match self {
            PRule::Fixed(v) => v,
            PRule::OverSqrtM(c) => c / m.sqrt(),
            PRule::InvSqrtMLogM => 1.0 / (m * m.ln()).sqrt(),
            PRule::SqrtLogMOverM(c) => c * (m.ln() / m).sqrt(),
        }
    }

    /// True when every grid point sees the same probability, enabling the
    /// shared-moments curve fast path.
    pub fn is_fixed(self) -> bool {
        matches!(self, PRule::Fixed(_))
    }
}

/// Parse a schedule. Whitespace is insignificant (`0.4 / sqrt(m)` works).
pub fn parse_p_rule(input: &str) -> Result<PRule, CliError> {
    let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || {
        param(format!(
            "unrecognized --p-rule `{input}`; expected fixed:<v>, <c>/sqrt(m), \
             1/sqrt(m*log m), or <c>*sqrt(log m/m)"
        ))
    };
    if let Some(rest) = compact.strip_prefix("fixed:") {
        return rest.parse().map(PRule::Fixed).map_err(|_| bad());
    }
    if compact == "1/sqrt(m*logm)" {
        return Ok(PRule::InvSqrtMLogM);
    }
    if let Some(coef) = compact.strip_suffix("/sqrt(m)") {
        return coef.parse().map(PRule::OverSqrtM).map_err(|_| bad());
    }
    if let Some(coef) = compact.strip_suffix("*sqrt(logm/m)") {
        return coef.parse().map(PRule::SqrtLogMOverM).map_err(|_| bad());
    }
    Err(bad())
}

/// Parse `start:stop:count` (linear) or `start:stop:count-log` (geometric)
/// into an ascending grid of composition lengths. Endpoints are hit
/// exactly; interior points are rounded to integers and duplicates merged,
/// so the result can be shorter than `count`.
pub fn parse_m_grid(input: &str) -> Result<Vec<u64>, CliError> {
    let trimmed = input.trim();
    let (body, log_spaced) = match trimmed.strip_suffix("-log") {
        Some(body) => (body, true),
        None => (trimmed, false),
    };
    let parts: Vec<&str> = body.split(':').collect();
    let bad = |why: &str| param(format!("invalid --m-grid `{input}`: {why}"));
    if parts.len() != 3 {
        return Err(bad("expected start:stop:count or start:stop:count-log"));
    }
    let start: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| bad("start is not a number"))?;
    let stop: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| bad("stop is not a number"))?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| bad("count is not a nonnegative integer"))?;
    if count == 0 {
        return Err(bad("count = 0 gives an empty grid"));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(bad("endpoints must be finite"));
    }
    if start < 1.0 {
        return Err(bad("start must be at least 1"));
    }
    if stop < start {
        return Err(bad("stop must be >= start"));
    }
    if count == 1 {
        if start != stop {
            return Err(bad("count = 1 requires start = stop"));
        }
        return Ok(vec![start.round() as u64]);
    }

    let mut grid = Vec::with_capacity(count);
    let (lo, hi) = if log_spaced {
        (start.ln(), stop.ln())
    } else {
        (start, stop)
    };
    for i in 0..count {
        let value = if i == 0 {
            start
        } else if i == count - 1 {
            stop
        } else {
            let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            if log_spaced {
                t.exp()
            } else {
                t
            }
        };
        let m = value.round() as u64;
        if grid.last() != Some(&m) {
            grid.push(m);
        }
    }
    Ok(grid)
}
