//! Command-line front end: parse integrands, run the engine and the oracles,
//! emit human-readable or JSON reports.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 numeric non-convergence,
//! 3 check-suite failure.

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::expr::{parse, render_expr};
use crate::kernel::ModularContext;
use crate::pv::{pv_single_step, PvOptions};
use crate::regint::integrate_all;
use crate::report::{
    c2a, fmt_complex, CheckReport, ConstantLine, OracleReport, PerEps, Report, SeriesLine,
    StepReport,
};
use crate::{checks, Error, Point, Result, DEFAULT_JET_CAP};

#[derive(Parser, Debug)]
#[command(
    name = "ellreg",
    about = "Regularized integrals of elliptic correlators by iterated residues",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Iterated regularized integral of an integrand over all its points.
    Integrate {
        /// Modular parameter, e.g. 0+2i
        #[arg(long)]
        tau: String,
        /// Integration order, e.g. 1,2,3 (default: ascending point order)
        #[arg(long)]
        order: Option<String>,
        /// Print the intermediate expression after each step
        #[arg(long)]
        trace: bool,
        /// Emit a JSON report
        #[arg(long)]
        json: bool,
        /// Integrand in the DSL, e.g. "wp(1-2)*wp(2-3)"
        expr: String,
    },
    /// Principal-value quadrature of a single integration step.
    Pv {
        #[arg(long)]
        tau: String,
        /// Active (integrated) point index
        #[arg(long)]
        var: Point,
        /// Fixed point assignments, e.g. "2=0.1+0.2i,3=0.5+0.9i"
        #[arg(long)]
        fix: Option<String>,
        /// Excision radii, decreasing, e.g. 0.2,0.1,0.05
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        json: bool,
        expr: String,
    },
    /// Run a named verification suite.
    Check {
        /// paper | kernel | properties | all
        #[arg(long, default_value = "paper")]
        suite: String,
        /// Optional modular parameter override where the suite allows it
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print the cached modular constants.
    Constants {
        #[arg(long)]
        tau: String,
        #[arg(long)]
        json: bool,
    },
    /// Symbolic Laurent expansion of an integrand at a coincidence point.
    Expand {
        #[arg(long)]
        tau: String,
        /// Expanded (active) point index
        #[arg(long)]
        var: Point,
        /// Point the active variable collides with
        #[arg(long)]
        at: Point,
        /// Truncation order of the expansion
        #[arg(long)]
        order: i64,
        /// Optional assignments to evaluate the coefficients numerically
        #[arg(long)]
        fix: Option<String>,
        #[arg(long)]
        json: bool,
        expr: String,
    },
}

/// Parses `a+bi` (mandatory sign before the imaginary part), plus the plain
/// forms `a` and `bi`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse complex number `{s}`"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some(imag) = t.strip_suffix('i') {
        // find the sign splitting re and im (skip a leading sign, skip e±)
        let bytes = imag.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            if (bytes[i] == b'+' || bytes[i] == b'-')
                && bytes[i - 1] != b'e'
                && bytes[i - 1] != b'E'
            {
                split = Some(i);
                break;
            }
        }
        match split {
            Some(i) => {
                let re: f64 = imag[..i].parse().map_err(|_| bad())?;
                let im_str = &imag[i..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().map_err(|_| bad())?
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = if imag.is_empty() {
                    1.0
                } else {
                    imag.parse().map_err(|_| bad())?
                };
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = t.parse().map_err(|_| bad())?;
        Ok(Complex64::new(re, 0.0))
    }
}

fn parse_fix(s: &str) -> Result<BTreeMap<Point, Complex64>> {
    let mut out = BTreeMap::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (idx, val) = part.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("expected `point=value` in --fix, got `{part}`"))
        })?;
        let p: Point = idx
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad point index `{idx}`")))?;
        out.insert(p, parse_complex(val)?);
    }
    Ok(out)
}

fn parse_eps(s: &str) -> Result<Vec<f64>> {
    let eps: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad radius `{x}`")))
        })
        .collect::<Result<_>>()?;
    if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| e <= 0.0) {
        return Err(Error::InvalidArgument(
            "--eps must be a strictly decreasing list of positive radii".into(),
        ));
    }
    Ok(eps)
}

fn parse_order(s: &str) -> Result<Vec<Point>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<Point>()
                .map_err(|_| Error::InvalidArgument(format!("bad point index `{x}`")))
        })
        .collect()
}

fn context_from_env(tau: Complex64) -> Result<ModularContext> {
    let cutoff = std::env::var("ELLREG_SERIES_CUTOFF")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Error::InvalidArgument("bad ELLREG_SERIES_CUTOFF".into()))
        })
        .transpose()?;
    let jet_cap = std::env::var("ELLREG_JET_CAP")
        .ok()
        .map(|v| {
            v.parse::<u32>()
                .map_err(|_| Error::InvalidArgument("bad ELLREG_JET_CAP".into()))
        })
        .transpose()?
        .unwrap_or(DEFAULT_JET_CAP);
    ModularContext::new(tau, cutoff, jet_cap)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) | Error::PoleOnBoundary => 2,
        _ => 1,
    }
}

fn blank_report(command: &str, tau: Complex64) -> Report {
    Report {
        command: command.into(),
        tau: [tau.re, tau.im],
        expr: None,
        value: None,
        steps: None,
        oracle: None,
        checks: None,
        series: None,
        constants: None,
        error: None,
        exit_hint: 0,
        timing_ms: 0.0,
    }
}

fn emit(report: &Report, json: bool, text: &str) {
    if json {
        println!("{}", serde_json::to_string(report).expect("serializable report"));
    } else {
        print!("{text}");
    }
}

/// Runs the CLI on explicit arguments and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own help/version output with code 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err((e, command, tau, json)) => {
            let code = exit_code_for(&e);
            let mut rep = blank_report(&command, tau);
            rep.error = Some(e.to_string());
            rep.exit_hint = code;
            if json {
                println!("{}", serde_json::to_string(&rep).expect("serializable report"));
            } else {
                eprintln!("error: {e}");
            }
            code
        }
    }
}

type Fail = (Error, String, Complex64, bool);

fn dispatch(cli: Cli) -> std::result::Result<i32, Fail> {
    match cli.command {
        Cmd::Integrate {
            tau,
            order,
            trace,
            json,
            expr,
        } => {
            let tau_c = parse_complex(&tau).map_err(|e| (e, "integrate".into(), Complex64::new(0.0, 0.0), json))?;
            let fail = |e: Error| (e, "integrate".to_string(), tau_c, json);
            let t0 = Instant::now();
            let ctx = context_from_env(tau_c).map_err(fail)?;
            let f = parse(&expr).map_err(fail)?;
            let order_vec = match order {
                Some(o) => parse_order(&o).map_err(fail)?,
                None => f.points(),
            };
            let (final_expr, steps) =
                integrate_all(&f, &order_vec, ctx.jet_cap()).map_err(fail)?;
            let value = final_expr.evaluate(&ctx, &BTreeMap::new()).map_err(fail)?;
            let mut rep = blank_report("integrate", tau_c);
            rep.expr = Some(expr.clone());
            rep.value = Some(c2a(value));
            if trace {
                rep.steps = Some(
                    steps
                        .iter()
                        .map(|s| StepReport {
                            var: s.var,
                            result: render_expr(&s.result),
                        })
                        .collect(),
                );
            }
            rep.timing_ms = t0.elapsed().as_secs_f64() * 1e3;
            let mut text = String::new();
            if trace {
                for s in &steps {
                    text.push_str(&format!("step z{}: {}\n", s.var, render_expr(&s.result)));
                }
            }
            text.push_str(&format!("value = {}\n", fmt_complex(value)));
            emit(&rep, json, &text);
            Ok(0)
        }
        Cmd::Pv {
            tau,
            var,
            fix,
            eps,
            json,
            expr,
        } => {
            let tau_c = parse_complex(&tau).map_err(|e| (e, "pv".into(), Complex64::new(0.0, 0.0), json))?;
            let fail = |e: Error| (e, "pv".to_string(), tau_c, json);
            let t0 = Instant::now();
            let ctx = context_from_env(tau_c).map_err(fail)?;
            let f = parse(&expr).map_err(fail)?;
            let assign = match fix {
                Some(s) => parse_fix(&s).map_err(fail)?,
                None => BTreeMap::new(),
            };
            let mut opts = PvOptions::default();
            if let Some(e) = eps {
                opts.eps_list = parse_eps(&e).map_err(fail)?;
            }
            let rep_pv = pv_single_step(&f, var, &assign, &ctx, &opts).map_err(fail)?;
            let mut rep = blank_report("pv", tau_c);
            rep.expr = Some(expr.clone());
            rep.value = Some(c2a(rep_pv.value));
            rep.oracle = Some(OracleReport {
                value: c2a(rep_pv.value),
                per_eps: rep_pv
                    .per_eps_values
                    .iter()
                    .map(|(e, v)| PerEps {
                        eps: *e,
                        value: c2a(*v),
                    })
                    .collect(),
                error: rep_pv.extrapolated_error,
                converged: rep_pv.converged,
            });
            rep.exit_hint = if rep_pv.converged { 0 } else { 2 };
            rep.timing_ms = t0.elapsed().as_secs_f64() * 1e3;
            let mut text = String::new();
            for (e, v) in &rep_pv.per_eps_values {
                text.push_str(&format!("eps {:>8.5}: {}\n", e, fmt_complex(*v)));
            }
            text.push_str(&format!(
                "value = {}  (error estimate {:.3e}, converged: {})\n",
                fmt_complex(rep_pv.value),
                rep_pv.extrapolated_error,
                rep_pv.converged
            ));
            emit(&rep, json, &text);
            Ok(if rep_pv.converged { 0 } else { 2 })
        }
        Cmd::Check { suite, tau, json } => {
            let tau_c = match &tau {
                Some(t) => Some(parse_complex(t).map_err(|e| (e, "check".into(), Complex64::new(0.0, 0.0), json))?),
                None => None,
            };
            let tau_echo = tau_c.unwrap_or(Complex64::new(0.0, 0.0));
            let fail = |e: Error| (e, "check".to_string(), tau_echo, json);
            let t0 = Instant::now();
            let outcomes = checks::run_suite(&suite, tau_c).map_err(fail)?;
            let all_pass = outcomes.iter().all(|o| o.pass);
            let mut rep = blank_report("check", tau_echo);
            rep.checks = Some(
                outcomes
                    .iter()
                    .map(|o| CheckReport {
                        name: o.name.clone(),
                        pass: o.pass,
                        got: c2a(o.got),
                        want: c2a(o.want),
                        rel_err: o.rel_err,
                    })
                    .collect(),
            );
            rep.exit_hint = if all_pass { 0 } else { 3 };
            rep.timing_ms = t0.elapsed().as_secs_f64() * 1e3;
            let mut text = String::new();
            for o in &outcomes {
                text.push_str(&format!(
                    "{} {} (rel_err {:.3e}, {:.1} ms)\n",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.name,
                    o.rel_err,
                    o.millis
                ));
                if !o.pass {
                    text.push_str(&format!(
                        "     got {}, want {}\n",
                        fmt_complex(o.got),
                        fmt_complex(o.want)
                    ));
                }
            }
            text.push_str(&format!(
                "{}/{} checks passed\n",
                outcomes.iter().filter(|o| o.pass).count(),
                outcomes.len()
            ));
            emit(&rep, json, &text);
            Ok(if all_pass { 0 } else { 3 })
        }
        Cmd::Constants { tau, json } => {
            let tau_c = parse_complex(&tau).map_err(|e| (e, "constants".into(), Complex64::new(0.0, 0.0), json))?;
            let fail = |e: Error| (e, "constants".to_string(), tau_c, json);
            let t0 = Instant::now();
            let ctx = context_from_env(tau_c).map_err(fail)?;
            let mut rep = blank_report("constants", tau_c);
            rep.constants = Some(
                ctx.constants()
                    .iter()
                    .map(|(n, v)| ConstantLine {
                        name: n.to_string(),
                        value: c2a(*v),
                    })
                    .collect(),
            );
            rep.timing_ms = t0.elapsed().as_secs_f64() * 1e3;
            let mut text = String::new();
            for (n, v) in ctx.constants() {
                text.push_str(&format!("{n:>14} = {}\n", fmt_complex(v)));
            }
            emit(&rep, json, &text);
            Ok(0)
        }
        Cmd::Expand {
            tau,
            var,
            at,
            order,
            fix,
            json,
            expr,
        } => {
            let tau_c = parse_complex(&tau).map_err(|e| (e, "expand".into(), Complex64::new(0.0, 0.0), json))?;
            let fail = |e: Error| (e, "expand".to_string(), tau_c, json);
            let t0 = Instant::now();
            let ctx = context_from_env(tau_c).map_err(fail)?;
            let f = parse(&expr).map_err(fail)?;
            if var == at {
                return Err(fail(Error::InvalidArgument(
                    "--var and --at must be different points".into(),
                )));
            }
            let series = f
                .laurent_expand(var, at, order, ctx.jet_cap())
                .map_err(fail)?;
            let assign = match fix {
                Some(s) => Some(parse_fix(&s).map_err(fail)?),
                None => None,
            };
            let mut lines = Vec::new();
            for e in series.lead_exponent()..=series.trunc_order() {
                let coeff = series.coefficient(e).map_err(fail)?;
                let rendered = match &assign {
                    Some(a) => fmt_complex(coeff.evaluate(&ctx, a).map_err(fail)?),
                    None => {
                        let text = render_expr(&coeff);
                        if coeff.terms().len() > 1 {
                            format!("({text})")
                        } else {
                            text
                        }
                    }
                };
                lines.push(SeriesLine {
                    exponent: e,
                    coeff: rendered,
                });
            }
            let mut rep = blank_report("expand", tau_c);
            rep.expr = Some(expr.clone());
            rep.series = Some(lines.clone());
            rep.timing_ms = t0.elapsed().as_secs_f64() * 1e3;
            let mut text = format!(
                "exponents {}..{}\n",
                series.lead_exponent(),
                series.trunc_order()
            );
            for l in &lines {
                text.push_str(&format!("{} * w^{}\n", l.coeff, l.exponent));
            }
            emit(&rep, json, &text);
            Ok(0)
        }
    }
}
