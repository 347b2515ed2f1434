//! Flag surface, config-file merging, and option resolution.
//!
//! Every value-bearing flag can also be supplied by a `--config` file of
//! `key = value` lines (keys match the long flag names, `-` and `_`
//! interchangeable, `#` starts a comment); explicit flags win on conflict.
//! Resolution turns the merged options into core request pieces, reporting
//! domain problems as parameter errors (exit code 2).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ea_core::accountant::Mode;
use ea_core::bounds::DEFAULT_SMOOTHING_EPS;
use ea_core::mechanisms::{MechanismKind, MechanismSpec};

use crate::{param, CliError};

/// Privacy accountant for m-fold compositions of subsampled noise
/// mechanisms.
///
/// Computes δ at a fixed ε, or ε at a fixed δ, for the composition of m
/// mechanism invocations, using an Edgeworth-corrected normal approximation
/// of the privacy-loss distribution. Modes: `aea` gives the point estimate
/// at the requested order; `eeai` gives the order-1 estimate plus a rigorous
/// finite-sample interval; `oracle` computes a near-exact FFT reference;
/// `clt` is shorthand for `aea --order 0` (records echo the normalized
/// form). Exit codes: 0 success, 2 parameter or configuration error,
/// 3 numeric failure.
#[derive(Debug, Parser)]
#[command(name = "ea", version, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// δ at a fixed ε for an m-fold composition.
    Delta(DeltaOpts),
    /// ε at a fixed δ (curve inversion); bounds included in eeai mode.
    Epsilon(EpsilonOpts),
    /// ε(δ) swept over a grid of composition lengths m.
    Curve(CurveOpts),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    /// Gaussian noise applied to a Poisson-subsampled query.
    SubsampledGaussian,
    /// Laplace noise applied to a Poisson-subsampled query.
    SubsampledLaplace,
    /// Plain Gaussian mechanism (no subsampling; p is fixed at 1).
    Gaussian,
}

impl MechanismArg {
    pub fn name(self) -> &'static str {
        match self {
            MechanismArg::SubsampledGaussian => "subsampled-gaussian",
            MechanismArg::SubsampledLaplace => "subsampled-laplace",
            MechanismArg::Gaussian => "gaussian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Edgeworth point estimate at the requested order.
    Aea,
    /// Order-1 point estimate plus finite-sample interval.
    Eeai,
    /// Near-exact FFT reference (slow; single mechanism only).
    Oracle,
    /// Order-0 estimate; shorthand for `aea --order 0`.
    Clt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, Args)]
pub struct CommonOpts {
    /// Mechanism family.
    #[arg(long, value_enum)]
    pub mechanism: Option<MechanismArg>,

    /// Subsampling probability in [0, 1].
    #[arg(long)]
    pub p: Option<f64>,

    /// Gaussian noise multiplier σ > 0; the hypothesis-pair shift is
    /// μ = 1/σ. Gaussian mechanisms only; conflicts with --mu.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Shift parameter μ ≥ 0 of the mechanism's hypothesis pair, given
    /// directly. Conflicts with --sigma.
    #[arg(long)]
    pub mu: Option<f64>,

    /// Edgeworth order, 0 through 3. Defaults to 1; eeai requires 1 and
    /// clt forces 0.
    #[arg(long)]
    pub order: Option<u32>,

    /// Evaluation mode [default: aea].
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,

    /// Smoothing parameter in (0, 1/3) used by the finite-sample remainder
    /// bound (eeai mode) [default: 0.1].
    #[arg(long)]
    pub smoothing_eps: Option<f64>,

    /// Seed echoed into the output record for provenance. Every computation
    /// here is deterministic, so the seed does not change results.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output format [default: json; curve defaults to csv].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Write the record to this path instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// `key = value` file supplying defaults for any long flag of this
    /// command; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Measure wall-clock evaluation time and emit it as timing_ms.
    /// Off by default so identical invocations produce identical bytes.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Clone, Debug, Args)]
pub struct DeltaOpts {
    #[command(flatten)]
    pub common: CommonOpts,

    /// Composition length (number of mechanism invocations).
    #[arg(long)]
    pub m: Option<u64>,

    /// Privacy parameter ε > 0 at which δ is evaluated.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct EpsilonOpts {
    #[command(flatten)]
    pub common: CommonOpts,

    /// Composition length (number of mechanism invocations).
    #[arg(long)]
    pub m: Option<u64>,

    /// Privacy parameter δ in (0, 1) at which the curve is inverted.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct CurveOpts {
    #[command(flatten)]
    pub common: CommonOpts,

    /// Privacy parameter δ in (0, 1) at which every grid point is inverted.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Composition-length grid, `start:stop:count` (linearly spaced) or
    /// `start:stop:count-log` (geometrically spaced); endpoints inclusive,
    /// duplicates after rounding are merged.
    #[arg(long)]
    pub m_grid: Option<String>,

    /// Subsampling schedule over the grid: `fixed:<v>`, `<c>/sqrt(m)`,
    /// `1/sqrt(m*log m)`, or `<c>*sqrt(log m/m)`. `--p <v>` is shorthand
    /// for `fixed:<v>`.
    #[arg(long)]
    pub p_rule: Option<String>,
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

/// Parse a `key = value` config file into normalized key/value pairs.
/// Keys are lowercased with `-` folded to `_`; values may be wrapped in
/// single or double quotes; `#` starts a comment.
fn load_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| param(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key_part, value_part) = line.split_once('=').ok_or_else(|| {
            param(format!(
                "config {}:{}: expected `key = value`",
                path.display(),
                idx + 1
            ))
        })?;
        let key = key_part.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(param(format!(
                "config {}:{}: empty key",
                path.display(),
                idx + 1
            )));
        }
        let mut value = value_part.trim();
        for quote in ['"', '\''] {
            if value.len() >= 2 && value.starts_with(quote) && value.ends_with(quote) {
                value = &value[1..value.len() - 1];
                break;
            }
        }
        if map.insert(key.clone(), value.to_string()).is_some() {
            return Err(param(format!(
                "config {}: duplicate key `{key}`",
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Consume `key` from the config map; fill `slot` only if the flag was not
/// given (flags win, but the key is still recognized and removed).
fn take<T>(
    cfg: &mut BTreeMap<String, String>,
    key: &str,
    slot: &mut Option<T>,
    parse: impl FnOnce(&str) -> Result<T, CliError>,
) -> Result<(), CliError> {
    if let Some(raw) = cfg.remove(key) {
        if slot.is_none() {
            *slot = Some(parse(&raw)?);
        }
    }
    Ok(())
}

fn cfg_num<T: std::str::FromStr>(key: &str) -> impl FnOnce(&str) -> Result<T, CliError> + '_ {
    move |raw| {
        raw.parse::<T>()
            .map_err(|_| param(format!("config: invalid value `{raw}` for `{key}`")))
    }
}

fn cfg_enum<T: ValueEnum>(key: &str) -> impl FnOnce(&str) -> Result<T, CliError> + '_ {
    move |raw| {
        T::from_str(raw, false)
            .map_err(|_| param(format!("config: invalid value `{raw}` for `{key}`")))
    }
}

fn apply_common(
    cfg: &mut BTreeMap<String, String>,
    common: &mut CommonOpts,
) -> Result<(), CliError> {
    take(cfg, "mechanism", &mut common.mechanism, cfg_enum("mechanism"))?;
    take(cfg, "p", &mut common.p, cfg_num("p"))?;
    take(cfg, "sigma", &mut common.sigma, cfg_num("sigma"))?;
    take(cfg, "mu", &mut common.mu, cfg_num("mu"))?;
    take(cfg, "order", &mut common.order, cfg_num("order"))?;
    take(cfg, "mode", &mut common.mode, cfg_enum("mode"))?;
    take(
        cfg,
        "smoothing_eps",
        &mut common.smoothing_eps,
        cfg_num("smoothing_eps"),
    )?;
    take(cfg, "seed", &mut common.seed, cfg_num("seed"))?;
    take(cfg, "format", &mut common.format, cfg_enum("format"))?;
    take(cfg, "out", &mut common.out, |raw| Ok(PathBuf::from(raw)))?;
    if let Some(raw) = cfg.remove("timing") {
        let value = match raw.as_str() {
            "true" => true,
            "false" => false,
            _ => {
                return Err(param(format!(
                    "config: invalid value `{raw}` for `timing` (expected true or false)"
                )))
            }
        };
        common.timing = common.timing || value;
    }
    Ok(())
}

fn reject_leftovers(cfg: BTreeMap<String, String>) -> Result<(), CliError> {
    if let Some(key) = cfg.into_keys().next() {
        return Err(param(format!(
            "config: unknown key `{key}` for this command"
        )));
    }
    Ok(())
}

impl DeltaOpts {
    /// Fill unset flags from the `--config` file, if any.
    pub fn merged(mut self) -> Result<Self, CliError> {
        if let Some(path) = self.common.config.clone() {
            let mut cfg = load_config(&path)?;
            apply_common(&mut cfg, &mut self.common)?;
            take(&mut cfg, "m", &mut self.m, cfg_num("m"))?;
            take(&mut cfg, "eps", &mut self.eps, cfg_num("eps"))?;
            reject_leftovers(cfg)?;
        }
        Ok(self)
    }
}

impl EpsilonOpts {
    pub fn merged(mut self) -> Result<Self, CliError> {
        if let Some(path) = self.common.config.clone() {
            let mut cfg = load_config(&path)?;
            apply_common(&mut cfg, &mut self.common)?;
            take(&mut cfg, "m", &mut self.m, cfg_num("m"))?;
            take(&mut cfg, "delta", &mut self.delta, cfg_num("delta"))?;
            reject_leftovers(cfg)?;
        }
        Ok(self)
    }
}

impl CurveOpts {
    pub fn merged(mut self) -> Result<Self, CliError> {
        if let Some(path) = self.common.config.clone() {
            let mut cfg = load_config(&path)?;
            apply_common(&mut cfg, &mut self.common)?;
            take(&mut cfg, "delta", &mut self.delta, cfg_num("delta"))?;
            take(&mut cfg, "m_grid", &mut self.m_grid, |raw| {
                Ok(raw.to_string())
            })?;
            take(&mut cfg, "p_rule", &mut self.p_rule, |raw| {
                Ok(raw.to_string())
            })?;
            reject_leftovers(cfg)?;
        }
        Ok(self)
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

/// The shift parameter as the user expressed it. σ is the Gaussian noise
/// multiplier (μ = 1/σ); μ is the shift itself and works for every family.
#[derive(Clone, Copy, Debug)]
pub enum Shift {
    Sigma(f64),
    Mu(f64),
}

/// Common options after merging and domain checks, ready to build core
/// requests from.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub mechanism: MechanismArg,
    pub shift: Shift,
    /// Effective shift μ (equal to `1/σ` when σ was given).
    pub mu: f64,
    /// The σ flag as given, for the request echo.
    pub sigma: Option<f64>,
    pub p_flag: Option<f64>,
    pub order: usize,
    pub mode: Mode,
    /// Mode name after normalization (`clt` echoes as `aea` with order 0).
    pub mode_name: &'static str,
    /// Explicit smoothing parameter; `None` means the library default.
    pub smoothing: Option<f64>,
    /// Effective smoothing parameter, for the request echo.
    pub smoothing_echo: f64,
    pub seed: Option<u64>,
    pub format: FormatArg,
    pub out: Option<PathBuf>,
    pub timing: bool,
}

/// Validate and normalize the shared flags. `default_format` differs per
/// command (tables default to CSV, single points to JSON).
pub fn resolve_common(
    common: &CommonOpts,
    default_format: FormatArg,
) -> Result<Resolved, CliError> {
    let mechanism = common
        .mechanism
        .ok_or_else(|| param("--mechanism is required"))?;

    let shift = match (common.sigma, common.mu) {
        (Some(_), Some(_)) => {
            return Err(param("--sigma conflicts with --mu; give exactly one"));
        }
        (None, None) => {
            return Err(param("one of --sigma or --mu is required"));
        }
        (Some(sigma), None) => {
            if mechanism == MechanismArg::SubsampledLaplace {
                return Err(param(
                    "--sigma applies to the Gaussian family; give --mu for subsampled-laplace",
                ));
            }
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(param(format!("sigma must be finite and > 0, got {sigma}")));
            }
            Shift::Sigma(sigma)
        }
        (None, Some(mu)) => {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(param(format!("mu must be finite and >= 0, got {mu}")));
            }
            Shift::Mu(mu)
        }
    };
    let mu = match shift {
        Shift::Sigma(sigma) => 1.0 / sigma,
        Shift::Mu(mu) => mu,
    };

    let mode_arg = common.mode.unwrap_or(ModeArg::Aea);
    let (mode, order, mode_name) = match mode_arg {
        ModeArg::Clt => {
            if let Some(order) = common.order {
                if order != 0 {
                    return Err(param(format!(
                        "clt is the order-0 estimate; omit --order or pass 0, got {order}"
                    )));
                }
            }
            (Mode::Aea, 0, "aea")
        }
        ModeArg::Aea => (Mode::Aea, common.order.unwrap_or(1) as usize, "aea"),
        ModeArg::Eeai => (Mode::Eeai, common.order.unwrap_or(1) as usize, "eeai"),
        ModeArg::Oracle => (Mode::Oracle, common.order.unwrap_or(1) as usize, "oracle"),
    };

    Ok(Resolved {
        mechanism,
        shift,
        mu,
        sigma: common.sigma,
        p_flag: common.p,
        order,
        mode,
        mode_name,
        smoothing: common.smoothing_eps,
        smoothing_echo: common.smoothing_eps.unwrap_or(DEFAULT_SMOOTHING_EPS),
        seed: common.seed,
        format: common.format.unwrap_or(default_format),
        out: common.out.clone(),
        timing: common.timing,
    })
}

/// The subsampling probability for single-point commands: required for the
/// subsampled families, fixed at 1 for the plain Gaussian.
pub fn resolve_point_p(mechanism: MechanismArg, p_flag: Option<f64>) -> Result<f64, CliError> {
    match mechanism {
        MechanismArg::Gaussian => match p_flag {
            None => Ok(1.0),
            Some(p) => {
                if p == 1.0 {
                    Ok(1.0)
                } else {
                    Err(param(format!(
                        "the gaussian mechanism is not subsampled; omit --p or pass 1, got {p}"
                    )))
                }
            }
        },
        _ => p_flag.ok_or_else(|| param("--p is required for subsampled mechanisms")),
    }
}

/// Build the mechanism spec for one subsampling probability.
pub fn build_spec(resolved: &Resolved, p: f64) -> Result<MechanismSpec, CliError> {
    let spec = match (resolved.mechanism, resolved.shift) {
        (MechanismArg::SubsampledGaussian, Shift::Sigma(sigma)) => {
            MechanismSpec::subsampled_gaussian(sigma, p)
        }
        (MechanismArg::SubsampledGaussian, Shift::Mu(mu)) => {
            MechanismSpec::new(MechanismKind::SubsampledGaussian, mu, p)
        }
        (MechanismArg::SubsampledLaplace, Shift::Mu(mu)) => {
            MechanismSpec::subsampled_laplace(mu, p)
        }
        (MechanismArg::SubsampledLaplace, Shift::Sigma(_)) => {
            unreachable!("rejected during resolution")
        }
        (MechanismArg::Gaussian, Shift::Sigma(sigma)) => MechanismSpec::pure_gaussian(1.0 / sigma),
        (MechanismArg::Gaussian, Shift::Mu(mu)) => MechanismSpec::pure_gaussian(mu),
    }?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(args: &[(&str, &str)]) -> CommonOpts {
        let mut c = CommonOpts::default();
        for &(key, value) in args {
            match key {
                "mechanism" => c.mechanism = Some(ValueEnum::from_str(value, false).unwrap()),
                "p" => c.p = Some(value.parse().unwrap()),
                "sigma" => c.sigma = Some(value.parse().unwrap()),
                "mu" => c.mu = Some(value.parse().unwrap()),
                "order" => c.order = Some(value.parse().unwrap()),
                "mode" => c.mode = Some(ValueEnum::from_str(value, false).unwrap()),
                _ => unreachable!(),
            }
        }
        c
    }

    #[test]
    fn sigma_mu_conflicts_are_rejected() {
        let both = common(&[
            ("mechanism", "subsampled-gaussian"),
            ("sigma", "0.8"),
            ("mu", "1.25"),
        ]);
        assert!(resolve_common(&both, FormatArg::Json).is_err());

        let neither = common(&[("mechanism", "subsampled-gaussian")]);
        assert!(resolve_common(&neither, FormatArg::Json).is_err());

        let laplace_sigma = common(&[("mechanism", "subsampled-laplace"), ("sigma", "0.8")]);
        assert!(resolve_common(&laplace_sigma, FormatArg::Json).is_err());
    }

    #[test]
    fn clt_normalizes_to_order_zero_aea() {
        let clt = common(&[
            ("mechanism", "subsampled-gaussian"),
            ("sigma", "0.8"),
            ("mode", "clt"),
        ]);
        let resolved = resolve_common(&clt, FormatArg::Json).unwrap();
        assert_eq!(resolved.mode, Mode::Aea);
        assert_eq!(resolved.order, 0);
        assert_eq!(resolved.mode_name, "aea");

        let clt_order2 = common(&[
            ("mechanism", "subsampled-gaussian"),
            ("sigma", "0.8"),
            ("mode", "clt"),
            ("order", "2"),
        ]);
        assert!(resolve_common(&clt_order2, FormatArg::Json).is_err());
    }

    #[test]
    fn sigma_maps_to_reciprocal_shift() {
        let opts = common(&[("mechanism", "subsampled-gaussian"), ("sigma", "0.8")]);
        let resolved = resolve_common(&opts, FormatArg::Json).unwrap();
        let spec = build_spec(&resolved, 0.01).unwrap();
        assert_eq!(spec.mu, resolved.mu);
        assert_eq!(spec.mu, 1.0 / 0.8);
    }

    #[test]
    fn gaussian_rejects_subsampling() {
        assert!(resolve_point_p(MechanismArg::Gaussian, Some(0.5)).is_err());
        assert_eq!(resolve_point_p(MechanismArg::Gaussian, None).unwrap(), 1.0);
        assert!(resolve_point_p(MechanismArg::SubsampledGaussian, None).is_err());
    }

    #[test]
    fn config_file_fills_unset_flags_and_flags_win() {
        let dir = std::env::temp_dir().join(format!("ea-cli-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("delta.cfg");
        std::fs::write(
            &path,
            "# fixture\nmechanism = subsampled-gaussian\nsigma = 0.8\np = 0.01\nm = 1000\neps = 2.0  # inline comment\nmode = \"eeai\"\n",
        )
        .unwrap();

        let mut opts = DeltaOpts {
            common: CommonOpts::default(),
            m: None,
            eps: Some(3.0), // explicit flag must win over the file's 2.0
        };
        opts.common.config = Some(path.clone());
        let merged = opts.merged().unwrap();
        assert_eq!(merged.eps, Some(3.0));
        assert_eq!(merged.m, Some(1000));
        assert_eq!(merged.common.sigma, Some(0.8));
        assert_eq!(merged.common.mode, Some(ModeArg::Eeai));

        std::fs::write(&path, "mystery = 1\n").unwrap();
        let mut opts = DeltaOpts {
            common: CommonOpts::default(),
            m: None,
            eps: None,
        };
        opts.common.config = Some(path.clone());
        assert!(opts.merged().is_err());

        std::fs::remove_dir_all(&dir).ok();
    }
}
