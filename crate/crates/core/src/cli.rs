//! Command-line front end.
//!
//! Every parameter resolves as flag, then config-file entry, then default. The
//! resolved values are echoed in the output so a run can be repeated exactly.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bounds::{
    rosenthal_alpha, rosenthal_bound, rosenthal_grid_optimize, rosenthal_min_steps, rosenthal_u,
    two_term_bound, two_term_min_steps, DriftMinorization, RosenthalParams, Sweep,
};
use crate::error::{Error, Result};
use crate::families::{BetaBinomialFamily, Cutoff, PoissonGammaFamily, SpectralData, XChain};
use crate::numerics::{exact_min_steps, tv_curve, worst_start_tv_curve, LogMagnitude, StepCount};
use crate::operators::{
    alpha_multipliers, collapse_census, eigenfunction_decay_curve, simulate_trajectory, JointState,
    ScanStrategy,
};
use crate::report::{self, cell};
use crate::scan_compare::{compare, pg_mixing_demo, CompareConfig, MonteCarloConfig};
use crate::spectral::{alpha_scan_eigenvalues, argmax_gap, coupling_u, spectral_gap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    BetaBinomial,
    PoissonGamma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum ScanKind {
    #[serde(rename = "random")]
    #[value(name = "random")]
    Random,
    #[serde(rename = "K")]
    #[value(name = "K")]
    K,
    #[serde(rename = "Ktilde")]
    #[value(name = "Ktilde")]
    KTilde,
}

#[derive(Debug, Parser)]
#[command(
    name = "gibbs-rates",
    version,
    about = "Convergence rates of two-component Gibbs samplers"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for Monte Carlo subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat JSON object of parameter defaults (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drift/minorization bound curve and minimal step count.
    Rosenthal(RosenthalArgs),
    /// Minimal steps for `A^l + weight * B^l <= target`.
    TwoTerm(TwoTermArgs),
    /// Random-scan eigenvalues, spectral gap and its maximizer.
    Spectral(SpectralArgs),
    /// Systematic versus random scan report for beta/binomial.
    ScanCompare(ScanCompareArgs),
    /// Exact TV curve of an x-chain by matrix powers.
    ExactTv(ExactTvArgs),
    /// Collapse census and scan-weight multipliers of words in P1, P2.
    Words(WordsArgs),
    /// Monte Carlo eigenfunction decay and sample trajectories.
    Simulate(SimulateArgs),
    /// Poisson/gamma minimal steps by starting state.
    PgDemo(PgDemoArgs),
}

#[derive(Debug, Args)]
struct RosenthalArgs {
    /// Beta/binomial size; sets default drift constants.
    #[arg(long)]
    n: Option<u64>,
    /// Small-set radius: the drift function's level set V <= d.
    #[arg(long)]
    d: Option<f64>,
    /// Coupling exponent in (0, 1).
    #[arg(long)]
    r: Option<f64>,
    /// TV target for the minimal step count.
    #[arg(long)]
    target: Option<f64>,
    /// Drift rate (default n/(n+2)).
    #[arg(long)]
    lambda: Option<f64>,
    /// Drift constant (default n/(n+2)).
    #[arg(long)]
    b: Option<f64>,
    /// log2 of the minorization constant (default -n).
    #[arg(long, allow_hyphen_values = true)]
    epsilon_log2: Option<f64>,
    /// Drift function at the start (default 0).
    #[arg(long)]
    v: Option<f64>,
    /// Also minimize over a built-in (d, r) grid.
    #[arg(long)]
    grid: bool,
}

#[derive(Debug, Args)]
struct TwoTermArgs {
    /// First geometric ratio.
    #[arg(long)]
    a: Option<f64>,
    /// Second geometric ratio.
    #[arg(long)]
    b: Option<f64>,
    /// Coefficient on the second term.
    #[arg(long)]
    weight: Option<f64>,
    /// Bound target.
    #[arg(long)]
    target: Option<f64>,
    /// Step counts at which to report the bound.
    #[arg(long, value_delimiter = ',')]
    check: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
struct SpectralArgs {
    /// Scan weight (probability of refreshing theta).
    #[arg(long)]
    alpha: Option<f64>,
    /// Product mu_1 eta_1 (default 0.5 when no other source is given).
    #[arg(long)]
    product: Option<f64>,
    /// Use the uniform-prior beta/binomial family of this size.
    #[arg(long)]
    n: Option<u64>,
    /// Degree-1 coefficient mu_1 (requires --eta).
    #[arg(long)]
    mu: Option<f64>,
    /// Degree-1 coefficient eta_1 (requires --mu).
    #[arg(long)]
    eta: Option<f64>,
    /// Tabulate the gap over an evenly spaced scan-weight grid.
    #[arg(long)]
    gap_curve: bool,
    /// Number of grid points for --gap-curve.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Args)]
struct ScanCompareArgs {
    /// Beta/binomial size (uniform prior).
    #[arg(long)]
    n: Option<u64>,
    /// Last step count tabulated.
    #[arg(long)]
    max_steps: Option<usize>,
    /// TV target for the minimal-step summary.
    #[arg(long)]
    target: Option<f64>,
    /// Drift/minorization small-set radius (with --r adds that bound).
    #[arg(long)]
    d: Option<f64>,
    /// Drift/minorization coupling exponent.
    #[arg(long)]
    r: Option<f64>,
    /// Monte Carlo trajectories (0 disables the check).
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Steps tracked by the Monte Carlo check.
    #[arg(long)]
    mc_steps: Option<usize>,
}

#[derive(Debug, Args)]
struct ExactTvArgs {
    /// Conjugate pair.
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    /// Beta/binomial size.
    #[arg(long)]
    n: Option<u64>,
    /// Beta prior first parameter.
    #[arg(long)]
    a: Option<f64>,
    /// Beta prior second parameter.
    #[arg(long)]
    b: Option<f64>,
    /// Gamma prior shape.
    #[arg(long)]
    shape: Option<f64>,
    /// Gamma prior rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Truncation point of the Poisson/gamma state space.
    #[arg(long)]
    x_max: Option<u64>,
    /// Starting state; the worst start is used when absent.
    #[arg(long)]
    start: Option<u64>,
    /// Last step count tabulated.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Also report the first step with TV at most this value.
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Debug, Args)]
struct WordsArgs {
    /// Word length (1 to 20).
    #[arg(long)]
    len: Option<usize>,
    /// Scan weight at which to evaluate the multipliers.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Beta/binomial size (uniform prior).
    #[arg(long)]
    n: Option<u64>,
    /// Scan weight (probability of refreshing theta).
    #[arg(long)]
    alpha: Option<f64>,
    /// Starting data value.
    #[arg(long)]
    x0: Option<u64>,
    /// Starting parameter value.
    #[arg(long)]
    theta0: Option<f64>,
    /// Last step count estimated.
    #[arg(long)]
    steps: Option<usize>,
    /// Independent trajectories (at least 1000).
    #[arg(long)]
    samples: Option<usize>,
    /// Also record one trajectory of this many steps.
    #[arg(long)]
    trajectory_steps: Option<usize>,
    /// Scan used for the recorded trajectory.
    #[arg(long, value_enum)]
    scan: Option<ScanKind>,
}

#[derive(Debug, Args)]
struct PgDemoArgs {
    /// Gamma prior shape.
    #[arg(long)]
    shape: Option<f64>,
    /// Gamma prior rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Truncation point of the state space.
    #[arg(long)]
    x_max: Option<u64>,
    /// Comma-separated starting states.
    #[arg(long, value_delimiter = ',')]
    starts: Option<Vec<u64>>,
    /// TV target.
    #[arg(long)]
    target: Option<f64>,
}

/// Flag, then config file, then default; records what it resolved.
struct Resolver {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Resolver {
    fn new(file: Map<String, Value>) -> Self {
        Resolver {
            file: file
                .into_iter()
                .map(|(k, v)| (k.replace('-', "_"), v))
                .collect(),
            resolved: Map::new(),
        }
    }

    fn optional<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
    ) -> Result<Option<T>> {
        let from_file = self.file.remove(key);
        let value =
            match (flag, from_file) {
                (Some(v), _) => Some(v),
                (None, Some(Value::Null)) | (None, None) => None,
                (None, Some(v)) => Some(serde_json::from_value(v.clone()).map_err(|e| {
                    Error::InvalidParameter {
                        name: key,
                        reason: format!("config value {v}: {e}"),
                    }
                })?),
            };
        if let Some(v) = &value {
            self.resolved.insert(
                key.to_string(),
                serde_json::to_value(v).map_err(|e| Error::Output(e.to_string()))?,
            );
        }
        Ok(value)
    }

    fn get<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
        default: T,
    ) -> Result<T> {
        match self.optional(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.insert(
                    key.to_string(),
                    serde_json::to_value(&default).map_err(|e| Error::Output(e.to_string()))?,
                );
                Ok(default)
            }
        }
    }

    fn flag(&mut self, key: &'static str, flag: bool) -> Result<bool> {
        self.get(key, flag.then_some(true), false)
    }

    fn finish(self) -> Result<Map<String, Value>> {
        if let Some(key) = self.file.keys().next() {
            return Err(Error::invalid(
                "config",
                format!("unknown key `{key}` for this subcommand"),
            ));
        }
        Ok(self.resolved)
    }
}

struct Rendered {
    result: Value,
    csv: String,
}

fn value<T: Serialize>(v: &T) -> Result<Value> {
    report::to_value(v)
}

fn run_rosenthal(a: RosenthalArgs, res: &mut Resolver) -> Result<Rendered> {
    let n = res.get("n", a.n, 100u64)?;
    let nf = n as f64;
    let d = res.get("d", a.d, 1000.0)?;
    let r = res.get("r", a.r, 0.001)?;
    let target = res.get("target", a.target, 0.01)?;
    let lambda = res.get("lambda", a.lambda, nf / (nf + 2.0))?;
    let b = res.get("b", a.b, nf / (nf + 2.0))?;
    let eps_log2 = res.get("epsilon_log2", a.epsilon_log2, -nf)?;
    let v = res.get("v", a.v, 0.0)?;
    let grid = res.flag("grid", a.grid)?;

    let cert = DriftMinorization::new(
        lambda,
        b,
        LogMagnitude::from_ln(eps_log2 * std::f64::consts::LN_2),
        v,
    )?;
    let params = RosenthalParams::new(d, r);
    let min_steps = rosenthal_min_steps(&cert, &params, target)?;
    let top = (min_steps.log10().ceil() as u32 + 1).min(38);
    let curve = std::iter::once(StepCount::ZERO)
        .chain((0..=top).map(|k| StepCount(10u128.pow(k))))
        .map(|s| {
            let bound = rosenthal_bound(&cert, &params, s)?;
            Ok(json!({"steps": s, "bound": value(&bound)?, "vacuous": bound.ln() >= 0.0}))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid_optimum = if grid {
        let ds: Vec<f64> = (1..=6).map(|k| 10f64.powi(k)).collect();
        let rs = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        Some(rosenthal_grid_optimize(&cert, target, &ds, &rs)?)
    } else {
        None
    };
    let csv_rows: Vec<Vec<String>> = curve
        .iter()
        .map(|row| {
            vec![
                row["steps"].to_string(),
                row["bound"]["mantissa"].to_string(),
                row["bound"]["exponent"].to_string(),
                row["bound"]["ln"].to_string(),
                row["vacuous"].to_string(),
            ]
        })
        .collect();
    Ok(Rendered {
        result: json!({
            "cert": value(&cert)?,
            "params": value(&params)?,
            "alpha": report::sig12(rosenthal_alpha(&cert, d)),
            "u": report::sig12(rosenthal_u(&cert, d)),
            "min_steps": min_steps,
            "min_steps_log10": report::sig12(min_steps.log10()),
            "curve": curve,
            "grid_optimum": value(&grid_optimum)?,
        }),
        csv: report::to_csv(
            &[
                "steps",
                "bound_mantissa",
                "bound_exponent",
                "bound_ln",
                "vacuous",
            ],
            &csv_rows,
        )?,
    })
}

fn run_two_term(a: TwoTermArgs, res: &mut Resolver) -> Result<Rendered> {
    let ra = res.get("a", a.a, 0.99986)?;
    let rb = res.get("b", a.b, 0.998497)?;
    let weight = res.get("weight", a.weight, 2.0)?;
    let target = res.get("target", a.target, 0.01)?;
    let checks = res.get("check", a.check, Vec::<u64>::new())?;
    let min_steps = two_term_min_steps(ra, rb, weight, target)?;
    let at = |s: StepCount| two_term_bound(ra, rb, weight, s);
    let before = match min_steps.checked_sub(1) {
        Some(s) => Some(at(s)?),
        None => None,
    };
    let check_rows = checks
        .iter()
        .map(|&s| {
            let v = at(StepCount::from(s))?;
            Ok((s, v, v <= target))
        })
        .collect::<Result<Vec<_>>>()?;
    let csv_rows: Vec<Vec<String>> =
        std::iter::once((min_steps.get() as u64, at(min_steps)?, true))
            .chain(check_rows.iter().copied())
            .map(|(s, v, ok)| vec![s.to_string(), cell(Some(v)), ok.to_string()])
            .collect();
    Ok(Rendered {
        result: json!({
            "min_steps": min_steps,
            "value_at_min": report::sig12(at(min_steps)?),
            "value_before_min": before.map(report::sig12),
            "checks": check_rows.iter().map(|&(s, v, ok)| json!({"steps": s, "value": report::sig12(v), "satisfied": ok})).collect::<Vec<_>>(),
        }),
        csv: report::to_csv(&["steps", "value", "satisfied"], &csv_rows)?,
    })
}

fn run_spectral(a: SpectralArgs, res: &mut Resolver) -> Result<Rendered> {
    let alpha = res.get("alpha", a.alpha, 0.5)?;
    let n = res.optional("n", a.n)?;
    let mu = res.optional("mu", a.mu)?;
    let eta = res.optional("eta", a.eta)?;
    let product = res.optional("product", a.product)?;
    let gap_curve = res.flag("gap_curve", a.gap_curve)?;
    let grid = res.get("grid", a.grid, 101usize)?;

    let sources = [
        n.is_some(),
        mu.is_some() || eta.is_some(),
        product.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() > 1 {
        return Err(Error::invalid(
            "product",
            "give only one of --n, --mu/--eta, --product",
        ));
    }
    let data = match (n, mu, eta) {
        (Some(n), _, _) => BetaBinomialFamily::uniform(n)?.spectral_data()?,
        (_, Some(mu), Some(eta)) => SpectralData::from_factors(mu, eta, Cutoff::Unbounded),
        (_, Some(_), None) | (_, None, Some(_)) => {
            return Err(Error::invalid(
                "mu",
                "--mu and --eta must be given together",
            ))
        }
        _ => {
            let q = product.unwrap_or(0.5);
            res.resolved.insert("product".into(), json!(q));
            SpectralData::from_products(&[q], Cutoff::Unbounded)
        }
    };
    let q = data.levels[0].product();
    let spectrum = alpha_scan_eigenvalues(alpha, &data)?;
    let gap = spectral_gap(alpha, q)?;
    let optimum = argmax_gap(q)?;
    let coupling = match data.levels[0].factors() {
        Some((mu, eta)) if alpha > 0.0 && alpha < 1.0 => coupling_u(alpha, mu, eta).ok(),
        _ => None,
    };

    if gap_curve && grid < 2 {
        return Err(Error::invalid("grid", "need at least 2 grid points"));
    }
    let curve = if gap_curve {
        let pts = (0..grid)
            .map(|i| {
                let w = i as f64 / (grid - 1) as f64;
                let s = alpha_scan_eigenvalues(
                    w,
                    &SpectralData::from_products(&[q], Cutoff::Unbounded),
                )?;
                Ok(json!({
                    "scan_weight": w,
                    "gap": spectral_gap(w, q)?,
                    "lambda_plus": s.levels[0].lambda_plus,
                    "lambda_minus": s.levels[0].lambda_minus,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Some(pts)
    } else {
        None
    };

    let csv = match &curve {
        Some(pts) => {
            let rows: Vec<Vec<String>> = pts
                .iter()
                .map(|p| {
                    ["scan_weight", "gap", "lambda_plus", "lambda_minus"]
                        .iter()
                        .map(|k| cell(p[*k].as_f64()))
                        .collect()
                })
                .collect();
            report::to_csv(
                &["scan_weight", "gap", "lambda_plus", "lambda_minus"],
                &rows,
            )?
        }
        None => {
            let rows: Vec<Vec<String>> = spectrum
                .levels
                .iter()
                .map(|l| {
                    vec![
                        l.k.to_string(),
                        cell(Some(l.lambda_plus)),
                        cell(Some(l.lambda_minus)),
                        cell(l.u_plus),
                        cell(l.u_minus),
                    ]
                })
                .collect();
            report::to_csv(
                &["k", "lambda_plus", "lambda_minus", "u_plus", "u_minus"],
                &rows,
            )?
        }
    };
    Ok(Rendered {
        result: json!({
            "product": report::sig12(q),
            "basis_note": data.basis_note,
            "spectrum": value(&spectrum)?,
            "gap": report::sig12(gap),
            "argmax": value(&optimum)?,
            "coupling": value(&coupling)?,
            "gap_curve": value(&curve)?,
        }),
        csv,
    })
}

fn run_scan_compare(a: ScanCompareArgs, res: &mut Resolver, seed: u64) -> Result<Rendered> {
    let mut cfg = CompareConfig::new(
        res.get("n", a.n, 100u64)?,
        res.get("max_steps", a.max_steps, 300usize)?,
        res.get("target", a.target, 0.01)?,
    );
    let d = res.get("d", a.d, 1000.0)?;
    let r = res.get("r", a.r, 0.001)?;
    cfg.rosenthal = Some(RosenthalParams::new(d, r));
    let samples = res.get("mc_samples", a.mc_samples, 0usize)?;
    let mc_steps = res.get("mc_steps", a.mc_steps, 20usize)?;
    if samples > 0 {
        cfg.monte_carlo = Some(MonteCarloConfig {
            samples,
            seed,
            max_steps: mc_steps,
        });
    }
    let report = compare(&cfg)?;
    Ok(Rendered {
        result: value(&report)?,
        csv: report.to_csv()?,
    })
}

fn run_exact_tv(a: ExactTvArgs, res: &mut Resolver) -> Result<Rendered> {
    let family = res.get("family", a.family, FamilyKind::BetaBinomial)?;
    let chain: XChain = match family {
        FamilyKind::BetaBinomial => {
            let n = res.get("n", a.n, 10u64)?;
            if n > crate::scan_compare::MAX_EXACT_N {
                return Err(Error::InfeasibleN(n));
            }
            BetaBinomialFamily::new(n, res.get("a", a.a, 1.0)?, res.get("b", a.b, 1.0)?)?.x_chain()
        }
        FamilyKind::PoissonGamma => PoissonGammaFamily::new(
            res.get("shape", a.shape, 1.0)?,
            res.get("rate", a.rate, 1.0)?,
            res.get("x_max", a.x_max, 400u64)?,
        )?
        .x_chain(),
    };
    let start = res.optional("start", a.start)?;
    if let (FamilyKind::PoissonGamma, Some(j)) = (family, start) {
        let fam = PoissonGammaFamily::new(
            res.resolved["shape"].as_f64().unwrap_or(1.0),
            res.resolved["rate"].as_f64().unwrap_or(1.0),
            res.resolved["x_max"].as_u64().unwrap_or(400),
        )?;
        fam.validate_start(j)?;
    }
    let max_steps = res.get("max_steps", a.max_steps, 50usize)?;
    let target = res.optional("target", a.target)?;
    if let Some(t) = target {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(
                "target",
                format!("need 0 < target < 1, got {t}"),
            ));
        }
    }
    let (rows, min_steps): (Vec<(usize, f64, usize)>, Option<u64>) = match start {
        Some(s) => {
            let s = s as usize;
            let curve = tv_curve(&chain.kernel, s, &chain.stationary, max_steps)?;
            let m = target
                .map(|t| exact_min_steps(&chain.kernel, s, &chain.stationary, t, 1_000_000))
                .transpose()?
                .flatten();
            (
                curve
                    .into_iter()
                    .enumerate()
                    .map(|(l, tv)| (l, tv, s))
                    .collect(),
                m,
            )
        }
        None => {
            let curve = worst_start_tv_curve(&chain.kernel, &chain.stationary, max_steps)?;
            let m =
                target.and_then(|t| curve.iter().position(|&(tv, _)| tv <= t).map(|l| l as u64));
            (
                curve
                    .into_iter()
                    .enumerate()
                    .map(|(l, (tv, s))| (l, tv, s))
                    .collect(),
                m,
            )
        }
    };
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|&(l, tv, s)| vec![l.to_string(), cell(Some(tv)), s.to_string()])
        .collect();
    let mut notes = Vec::new();
    if family == FamilyKind::PoissonGamma && start.is_none() {
        notes.push(
            "worst start scans every truncated state; rows from states near x_max include truncation error",
        );
    }
    Ok(Rendered {
        result: json!({
            "states": chain.kernel.dim(),
            "rows": rows.iter().map(|&(l, tv, s)| json!({"steps": l, "tv": report::sig12(tv), "start": s})).collect::<Vec<_>>(),
            "min_steps": min_steps,
            "notes": notes,
        }),
        csv: report::to_csv(&["steps", "tv", "start"], &csv_rows)?,
    })
}

fn run_words(a: WordsArgs, res: &mut Resolver) -> Result<Rendered> {
    let len = res.get("len", a.len, 3usize)?;
    let alpha = res.get("alpha", a.alpha, 0.5)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("need 0 <= alpha <= 1, got {alpha}"),
        ));
    }
    let census = collapse_census(len)?;
    let multipliers = alpha_multipliers(len)?;
    let exact_alpha = BigRational::from_float(alpha)
        .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)));
    let words: Vec<Value> = census
        .counts
        .iter()
        .map(|(w, &count)| {
            let poly = &multipliers[w];
            json!({
                "word": w.to_string(),
                "count": count,
                "coefficients": poly.coefficients,
                "value": report::sig12(poly.evaluate(alpha)),
                "value_exact": poly.evaluate_exact(&exact_alpha).to_string(),
            })
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = words
        .iter()
        .map(|w| {
            vec![
                w["word"].as_str().unwrap_or_default().to_string(),
                w["count"].to_string(),
                w["coefficients"]
                    .as_array()
                    .map(|c| {
                        c.iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .unwrap_or_default(),
                cell(w["value"].as_f64()),
                w["value_exact"].as_str().unwrap_or_default().to_string(),
            ]
        })
        .collect();
    Ok(Rendered {
        result: json!({"len": len, "total": census.total(), "words": words}),
        csv: report::to_csv(
            &["word", "count", "coefficients", "value", "value_exact"],
            &csv_rows,
        )?,
    })
}

fn run_simulate(a: SimulateArgs, res: &mut Resolver, seed: u64) -> Result<Rendered> {
    let n = res.get("n", a.n, 10u64)?;
    let alpha = res.get("alpha", a.alpha, 0.5)?;
    let x0 = res.get("x0", a.x0, 0u64)?;
    let theta0 = res.get("theta0", a.theta0, 0.9)?;
    let steps = res.get("steps", a.steps, 20usize)?;
    let samples = res.get("samples", a.samples, 100_000usize)?;
    let trajectory_steps = res.optional("trajectory_steps", a.trajectory_steps)?;
    let scan = res.get("scan", a.scan, ScanKind::Random)?;

    let fam = BetaBinomialFamily::uniform(n)?;
    let s0 = JointState::new(x0, theta0);
    let decay = eigenfunction_decay_curve(&fam, s0, alpha, steps, samples, seed)?;
    let trajectory = trajectory_steps
        .map(|len| {
            let strategy = match scan {
                ScanKind::Random => ScanStrategy::random(alpha)?,
                ScanKind::K => ScanStrategy::Systematic { sweep: Sweep::K },
                ScanKind::KTilde => ScanStrategy::Systematic {
                    sweep: Sweep::KTilde,
                },
            };
            simulate_trajectory(&fam.into(), s0, strategy, len, seed)
        })
        .transpose()?;
    let csv_rows: Vec<Vec<String>> = decay
        .iter()
        .map(|d| {
            vec![
                d.steps.to_string(),
                cell(Some(d.estimate)),
                cell(Some(d.std_error)),
                cell(Some(d.expected)),
            ]
        })
        .collect();
    Ok(Rendered {
        result: json!({
            "statistical": true,
            "decay": value(&decay)?,
            "trajectory": value(&trajectory)?,
        }),
        csv: report::to_csv(&["steps", "estimate", "std_error", "expected"], &csv_rows)?,
    })
}

fn run_pg_demo(a: PgDemoArgs, res: &mut Resolver) -> Result<Rendered> {
    let fam = PoissonGammaFamily::new(
        res.get("shape", a.shape, 1.0)?,
        res.get("rate", a.rate, 1.0)?,
        res.get("x_max", a.x_max, 400u64)?,
    )?;
    let starts = res.get("starts", a.starts, vec![0u64, 8, 16, 32, 64, 128])?;
    let target = res.get("target", a.target, 0.01)?;
    let demo = pg_mixing_demo(&fam, &starts, target)?;
    Ok(Rendered {
        result: value(&demo)?,
        csv: demo.to_csv()?,
    })
}

fn load_config(path: Option<&PathBuf>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => {
            if let Some((k, _)) = map.iter().find(|(_, v)| v.is_object()) {
                return Err(Error::invalid(
                    "config",
                    format!("key `{k}`: nested objects are not supported"),
                ));
            }
            Ok(map)
        }
        Ok(_) => Err(Error::invalid("config", "expected a flat JSON object")),
        Err(e) => Err(Error::invalid("config", format!("invalid JSON: {e}"))),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Rosenthal(_) => "rosenthal",
        Command::TwoTerm(_) => "two-term",
        Command::Spectral(_) => "spectral",
        Command::ScanCompare(_) => "scan-compare",
        Command::ExactTv(_) => "exact-tv",
        Command::Words(_) => "words",
        Command::Simulate(_) => "simulate",
        Command::PgDemo(_) => "pg-demo",
    }
}

/// Runs a parsed command line and returns the rendered output.
pub fn execute(cli: Cli) -> Result<String> {
    let mut res = Resolver::new(load_config(cli.config.as_ref())?);
    let format = res.get("format", cli.format, Format::Json)?;
    let out = res.optional("out", cli.out.map(|p| p.display().to_string()))?;
    let name = command_name(&cli.command);
    let uses_seed = matches!(cli.command, Command::Simulate(_) | Command::ScanCompare(_));
    let seed = if uses_seed {
        res.get("seed", cli.seed, 0u64)?
    } else {
        0
    };
    let rendered = match cli.command {
        Command::Rosenthal(a) => run_rosenthal(a, &mut res)?,
        Command::TwoTerm(a) => run_two_term(a, &mut res)?,
        Command::Spectral(a) => run_spectral(a, &mut res)?,
        Command::ScanCompare(a) => run_scan_compare(a, &mut res, seed)?,
        Command::ExactTv(a) => run_exact_tv(a, &mut res)?,
        Command::Words(a) => run_words(a, &mut res)?,
        Command::Simulate(a) => run_simulate(a, &mut res, seed)?,
        Command::PgDemo(a) => run_pg_demo(a, &mut res)?,
    };
    let mut config = res.finish()?;
    // The output path does not change the result.
    config.remove("out");
    let text = match format {
        // Config values stay exact so the echo can be replayed with --config.
        Format::Json => report::pretty(&json!({
            "command": name,
            "config": config,
            "result": report::round_floats(rendered.result),
        }))?,
        Format::Csv => format!(
            "# command: {name}\n# config: {}\n{}",
            serde_json::to_string(&config).map_err(|e| Error::Output(e.to_string()))?,
            rendered.csv
        ),
    };
    match out {
        Some(path) => {
            std::fs::write(&path, &text).map_err(|e| Error::Output(format!("{path}: {e}")))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

/// Full entry point: parses `argv`, runs, prints, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
