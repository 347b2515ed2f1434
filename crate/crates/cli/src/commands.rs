//! Command execution: build core requests from the resolved options,
//! evaluate them, and assemble the output record.

use std::time::Instant;

use ea_core::accountant::{self, AccountantRequest, EpsilonPoint, Evaluation, Target};
use ea_core::mechanisms::MechanismSpec;

use crate::grid::{parse_m_grid, parse_p_rule, PRule};
use crate::opts::{
    build_spec, resolve_common, resolve_point_p, Cli, Command, CurveOpts, DeltaOpts, EpsilonOpts,
    FormatArg, MechanismArg, Resolved,
};
use crate::output::{render, Emission, OutputRecord, RequestEcho, ResultRow, SCHEMA_VERSION};
use crate::{param, CliError};

pub fn execute(cli: Cli) -> Result<Emission, CliError> {
    match cli.command {
        Command::Delta(opts) => cmd_delta(opts),
        Command::Epsilon(opts) => cmd_epsilon(opts),
        Command::Curve(opts) => cmd_curve(opts),
    }
}

fn build_request(
    composition: Vec<(MechanismSpec, u64)>,
    resolved: &Resolved,
    target: Target,
) -> Result<AccountantRequest, CliError> {
    let req = AccountantRequest::new(composition, resolved.mode, resolved.order, target)?;
    match resolved.smoothing {
        Some(se) => Ok(req.with_smoothing_eps(se)?),
        None => Ok(req),
    }
}

/// Echo skeleton with the shared fields filled in; the command-specific
/// fields (m, p, targets, grid) start as null.
fn echo(resolved: &Resolved, command: &str) -> RequestEcho {
    RequestEcho {
        command: command.into(),
        mechanism: resolved.mechanism.name().into(),
        m: None,
        p: None,
        sigma: resolved.sigma,
        mu: resolved.mu,
        order: resolved.order as u32,
        mode: resolved.mode_name.into(),
        smoothing_eps: resolved.smoothing_echo,
        seed: resolved.seed,
        eps: None,
        delta: None,
        m_grid: None,
        p_rule: None,
    }
}

/// Enforce the record contract that every emitted number is finite. An
/// infinite bound (the upper ε when the bounding envelope never crosses the
/// target δ) becomes null plus a diagnostic, never a made-up number.
fn keep_finite(
    field: &'static str,
    m: u64,
    value: Option<f64>,
    diagnostics: &mut Vec<String>,
) -> Option<f64> {
    match value {
        None => None,
        Some(v) if v.is_finite() => Some(v),
        Some(v) if v == f64::INFINITY => {
            diagnostics.push(format!(
                "m={m}: {field} is unbounded (the bounding envelope never crosses the target); \
                 emitted as null"
            ));
            None
        }
        Some(v) => {
            diagnostics.push(format!(
                "m={m}: {field} is non-finite ({v}); emitted as null"
            ));
            None
        }
    }
}

fn epsilon_row(m: u64, point: &EpsilonPoint, diagnostics: &mut Vec<String>) -> ResultRow {
    ResultRow::Epsilon {
        m,
        eps_lower: keep_finite("eps_lower", m, point.eps_lower, diagnostics),
        eps_est: keep_finite("eps_est", m, Some(point.eps_est), diagnostics),
        eps_upper: keep_finite("eps_upper", m, point.eps_upper, diagnostics),
    }
}

fn cmd_delta(opts: DeltaOpts) -> Result<Emission, CliError> {
    let opts = opts.merged()?;
    let resolved = resolve_common(&opts.common, FormatArg::Json)?;
    let m = opts.m.ok_or_else(|| param("--m is required"))?;
    let eps = opts.eps.ok_or_else(|| param("--eps is required"))?;
    let p = resolve_point_p(resolved.mechanism, resolved.p_flag)?;
    let spec = build_spec(&resolved, p)?;
    let req = build_request(vec![(spec, m)], &resolved, Target::Epsilon(eps))?;

    let started = Instant::now();
    let point = accountant::delta_at_epsilon(&req)?;
    let timing_ms = resolved
        .timing
        .then(|| started.elapsed().as_millis() as u64);

    let mut diagnostics = Vec::new();
    let row = ResultRow::Delta {
        m,
        epsilon: eps,
        delta_lower: keep_finite("delta_lower", m, point.delta_lower, &mut diagnostics),
        delta_est: point.delta_est,
        delta_upper: keep_finite("delta_upper", m, point.delta_upper, &mut diagnostics),
    };

    let mut request = echo(&resolved, "delta");
    request.m = Some(m);
    request.p = Some(p);
    request.eps = Some(eps);
    let record = OutputRecord {
        schema_version: SCHEMA_VERSION.into(),
        request,
        results: vec![row],
        timing_ms,
        diagnostics,
    };
    render(record, resolved.format, resolved.out.clone())
}

fn cmd_epsilon(opts: EpsilonOpts) -> Result<Emission, CliError> {
    let opts = opts.merged()?;
    let resolved = resolve_common(&opts.common, FormatArg::Json)?;
    let m = opts.m.ok_or_else(|| param("--m is required"))?;
    let delta = opts.delta.ok_or_else(|| param("--delta is required"))?;
    let p = resolve_point_p(resolved.mechanism, resolved.p_flag)?;
    let spec = build_spec(&resolved, p)?;
    let req = build_request(vec![(spec, m)], &resolved, Target::Delta(delta))?;

    let started = Instant::now();
    let point = accountant::epsilon_at_delta(&req)?;
    let timing_ms = resolved
        .timing
        .then(|| started.elapsed().as_millis() as u64);

    let mut diagnostics = Vec::new();
    let row = epsilon_row(m, &point, &mut diagnostics);

    let mut request = echo(&resolved, "epsilon");
    request.m = Some(m);
    request.p = Some(p);
    request.delta = Some(delta);
    let record = OutputRecord {
        schema_version: SCHEMA_VERSION.into(),
        request,
        results: vec![row],
        timing_ms,
        diagnostics,
    };
    render(record, resolved.format, resolved.out.clone())
}

fn cmd_curve(opts: CurveOpts) -> Result<Emission, CliError> {
    let opts = opts.merged()?;
    let resolved = resolve_common(&opts.common, FormatArg::Csv)?;
    let delta = opts.delta.ok_or_else(|| param("--delta is required"))?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(param(format!(
            "inversion needs delta in (0, 1), got {delta}"
        )));
    }
    let grid_text = opts
        .m_grid
        .clone()
        .ok_or_else(|| param("--m-grid is required"))?;
    let grid = parse_m_grid(&grid_text)?;

    let rule = match (resolved.mechanism, resolved.p_flag, opts.p_rule.as_deref()) {
        (MechanismArg::Gaussian, _, Some(_)) => {
            return Err(param(
                "the gaussian mechanism is not subsampled; --p-rule does not apply",
            ));
        }
        (MechanismArg::Gaussian, p_flag, None) => {
            resolve_point_p(MechanismArg::Gaussian, p_flag)?;
            PRule::Fixed(1.0)
        }
        (_, Some(_), Some(_)) => {
            return Err(param("--p conflicts with --p-rule; give exactly one"));
        }
        (_, Some(p), None) => PRule::Fixed(p),
        (_, None, Some(text)) => parse_p_rule(text)?,
        (_, None, None) => {
            return Err(param("give --p or --p-rule for subsampled mechanisms"));
        }
    };

    // Reject a schedule that leaves [0, 1] anywhere on the grid before
    // spending any evaluation time.
    for &m in &grid {
        let p = rule.p_at(m);
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(param(format!(
                "the subsampling schedule leaves [0, 1]: p({m}) = {p}"
            )));
        }
    }

    let threads = thread_cap()?.min(grid.len());
    let started = Instant::now();
    let evals = if rule.is_fixed() {
        // Identical composition at every m: moments are computed once and
        // rescaled, so each extra point is cheap.
        let spec = build_spec(&resolved, rule.p_at(grid[0]))?;
        let req = build_request(vec![(spec, 1)], &resolved, Target::Delta(delta))?;
        run_chunked(&grid, threads, &|chunk: &[u64]| {
            let points = accountant::privacy_curve(&req, chunk)?;
            Ok(points
                .into_iter()
                .map(|pt| (pt.m, pt.result.map(expect_epsilon)))
                .collect())
        })?
    } else {
        // The schedule changes the mechanism with m, so each point carries
        // its own moment computation. Surface request-level problems once,
        // up front, instead of as per-point failures.
        let probe = build_spec(&resolved, rule.p_at(grid[0]))?;
        build_request(vec![(probe, 1)], &resolved, Target::Delta(delta))?;
        run_chunked(&grid, threads, &|chunk: &[u64]| {
            chunk
                .iter()
                .map(|&m| {
                    let spec = build_spec(&resolved, rule.p_at(m))?;
                    let req = build_request(vec![(spec, m)], &resolved, Target::Delta(delta))?;
                    Ok((m, accountant::epsilon_at_delta(&req)))
                })
                .collect()
        })?
    };
    let timing_ms = resolved
        .timing
        .then(|| started.elapsed().as_millis() as u64);

    let mut diagnostics = Vec::new();
    let mut rows = Vec::with_capacity(evals.len());
    let mut failures = 0usize;
    let mut first_error: Option<CliError> = None;
    for (m, outcome) in evals {
        match outcome {
            Ok(point) => rows.push(epsilon_row(m, &point, &mut diagnostics)),
            Err(err) => {
                failures += 1;
                diagnostics.push(format!("m={m}: {err}"));
                if first_error.is_none() {
                    first_error = Some(err.into());
                }
                rows.push(ResultRow::Epsilon {
                    m,
                    eps_lower: None,
                    eps_est: None,
                    eps_upper: None,
                });
            }
        }
    }
    if failures == rows.len() {
        return Err(first_error.expect("nonempty grid"));
    }

    let mut request = echo(&resolved, "curve");
    request.delta = Some(delta);
    request.m_grid = Some(grid_text);
    request.p_rule = opts.p_rule.clone();
    if let PRule::Fixed(p) = rule {
        request.p = Some(p);
    }
    let record = OutputRecord {
        schema_version: SCHEMA_VERSION.into(),
        request,
        results: rows,
        timing_ms,
        diagnostics,
    };
    render(record, resolved.format, resolved.out.clone())
}

fn expect_epsilon(evaluation: Evaluation) -> EpsilonPoint {
    match evaluation {
        Evaluation::EpsilonAt(point) => point,
        Evaluation::DeltaAt(_) => unreachable!("curve requests carry a delta target"),
    }
}

type PointResults = Vec<(u64, ea_core::Result<EpsilonPoint>)>;

/// Evaluate grid chunks on up to `threads` worker threads, preserving grid
/// order. Evaluation is pure, so the output is identical for every thread
/// count; the cap only bounds concurrency.
fn run_chunked(
    grid: &[u64],
    threads: usize,
    worker: &(dyn Fn(&[u64]) -> Result<PointResults, CliError> + Sync),
) -> Result<PointResults, CliError> {
    if threads <= 1 || grid.len() <= 1 {
        return worker(grid);
    }
    let chunk_len = grid.len().div_ceil(threads);
    let parts: Vec<Result<PointResults, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .chunks(chunk_len)
            .map(|chunk| scope.spawn(move || worker(chunk)))
            .collect();
        handles
            .into_iter()
            .map(|handle| handle.join().expect("curve worker panicked"))
            .collect()
    });
    let mut merged = Vec::with_capacity(grid.len());
    for part in parts {
        merged.extend(part?);
    }
    Ok(merged)
}

/// Parallelism cap from `EA_NUM_THREADS`; absent means 1.
fn thread_cap() -> Result<usize, CliError> {
    match std::env::var("EA_NUM_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(err) => Err(param(format!("EA_NUM_THREADS is unreadable: {err}"))),
        Ok(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                param(format!(
                    "EA_NUM_THREADS must be a positive integer, got `{raw}`"
                ))
            }),
    }
}
