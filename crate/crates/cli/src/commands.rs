use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sau_core::activation::ActivationKind;
use sau_core::mollifier::Mollifier;
use sau_core::nn::TrainReport;
use sau_core::quadrature::QuadratureSpec;
use sau_core::verify::{
    convergence_suite, doubled_gaussian, grad_suite, mollifier_suite, oracle_suite, ConvergenceOptions, GradOptions,
    OracleOptions, Suite,
};

use crate::run::{load_config, load_data, run_once, RunConfig, COMPARE_KEYS, TRAIN_KEYS};
use crate::{CliError, CompareArgs, EvalArgs, TrainArgs, VerifyArgs};

const MAX_GRID_POINTS: f64 = 1e8;

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

/// Summary lines go to stdout unless the CSV already does.
fn summary(to_stdout: bool, line: &str) {
    if to_stdout {
        // a closed pipe is not worth failing a finished run over
        let _ = writeln!(std::io::stdout(), "{line}");
    } else {
        eprintln!("{line}");
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let kind = ActivationKind::from_name(&args.activation, args.alpha, args.n).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(args.xmin.is_finite() && args.xmax.is_finite() && args.xmin < args.xmax) {
        return Err(CliError::Usage(format!(
            "need xmin < xmax, got {} and {}",
            args.xmin, args.xmax
        )));
    }
    if !(args.step.is_finite() && args.step > 0.0) {
        return Err(CliError::Usage(format!("step must be positive, got {}", args.step)));
    }
    let span = (args.xmax - args.xmin) / args.step;
    if span > MAX_GRID_POINTS {
        return Err(CliError::Usage(format!("grid of {span:.0} points is too large")));
    }
    // tolerate xmax landing a rounding error short of the last point
    let count = (span + 1e-9).floor() as usize + 1;
    let mut csv = String::from("x,value,d_dx,d_dalpha\n");
    for i in 0..count {
        let x = args.xmin + i as f64 * args.step;
        let e = kind.eval(x);
        writeln!(csv, "{x},{},{},{}", e.value, e.d_dx, e.d_dalpha).unwrap();
    }
    write_output(args.output.as_deref(), &csv)
}

fn only_for(suite: Suite, flag: &str, given: bool, allowed: &[Suite]) -> Result<(), CliError> {
    if given && !allowed.contains(&suite) {
        return Err(CliError::Usage(format!(
            "--{flag} does not apply to the {} suite",
            suite.name()
        )));
    }
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let s = args.suite;
    only_for(
        s,
        "tol",
        args.tol.is_some(),
        &[Suite::Oracle, Suite::Grad, Suite::Convergence],
    )?;
    only_for(s, "h", args.h.is_some(), &[Suite::Grad])?;
    only_for(s, "samples", args.samples > 0, &[Suite::Grad])?;
    only_for(s, "quad-tol", args.quad_tol.is_some(), &[Suite::Oracle])?;
    only_for(s, "fixture", args.fixture.is_some(), &[Suite::Mollifier])?;
    let usage = |e: sau_core::verify::VerifyError| CliError::Usage(e.to_string());

    let report = match s {
        Suite::Oracle => {
            let d = OracleOptions::default();
            let opts = OracleOptions {
                tolerance: args.tol.unwrap_or(d.tolerance),
                quadrature_tolerance: args.quad_tol.unwrap_or(d.quadrature_tolerance),
                ..d
            };
            oracle_suite(&opts).map_err(usage)?
        }
        Suite::Grad => {
            let d = GradOptions::default();
            let opts = GradOptions {
                step: args.h.unwrap_or(d.step),
                tolerance: args.tol.unwrap_or(d.tolerance),
                operating_samples: args.samples,
                seed: args.seed,
            };
            grad_suite(&opts).map_err(usage)?
        }
        Suite::Convergence => {
            let d = ConvergenceOptions::default();
            let opts = ConvergenceOptions {
                ratio_tolerance: args.tol.unwrap_or(d.ratio_tolerance),
                ..d
            };
            convergence_suite(&opts).map_err(usage)?
        }
        Suite::Mollifier => {
            let candidates = match args.fixture.as_deref() {
                None => vec![Mollifier::gaussian(), Mollifier::bump()],
                Some("doubled-gaussian") => vec![doubled_gaussian()],
                Some(other) => {
                    return Err(CliError::Usage(format!(
                        "unknown fixture '{other}' (known: doubled-gaussian)"
                    )))
                }
            };
            mollifier_suite(&candidates, &QuadratureSpec::default())
        }
    };
    write_output(None, &format!("{report}\n"))?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} suite failed", s.name())))
    }
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let file = load_config(&args.flags, TRAIN_KEYS)?;
    let cfg = RunConfig::resolve(&args.flags, &file)?;
    let name = file
        .pick(args.activation.clone(), "activation")?
        .unwrap_or_else(|| "sau".into());
    let kind = cfg.activation(&name)?;
    let data = load_data(&cfg)?;
    let report = run_once(&cfg, &data, kind, cfg.train.seed)?;
    write_output(cfg.output.as_deref(), &report.to_csv())?;
    let to_stdout = cfg.output.is_some();
    match report.last() {
        Some(r) => summary(
            to_stdout,
            &format!(
                "final epoch {}: train_loss {} train_acc {} test_loss {} test_acc {}",
                r.epoch,
                r.train_loss,
                fmt_opt(r.train_accuracy),
                r.test_loss,
                fmt_opt(r.test_accuracy)
            ),
        ),
        None => summary(to_stdout, "no epochs run"),
    }
    Ok(())
}

fn parse_activation_list(raw: &str) -> Result<Vec<String>, CliError> {
    let names: Vec<String> = raw
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.len() < 2 {
        return Err(CliError::Usage("compare needs at least two activations".into()));
    }
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n) {
            return Err(CliError::Usage(format!("activation '{n}' listed twice")));
        }
    }
    Ok(names)
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn alpha_field(report: &TrainReport) -> String {
    report
        .last()
        .map(|r| r.alphas.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
        .unwrap_or_default()
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let file = load_config(&args.flags, COMPARE_KEYS)?;
    let raw = file
        .pick(args.activations.clone(), "activations")?
        .ok_or_else(|| CliError::Usage("--activations is required".into()))?;
    let names = parse_activation_list(&raw)?;
    let repeats_requested: Option<usize> = file.pick(args.repeats, "repeats")?;
    let repeats = repeats_requested.unwrap_or(1);
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be >= 1".into()));
    }
    let cfg = RunConfig::resolve(&args.flags, &file)?;
    let kinds = names.iter().map(|n| cfg.activation(n)).collect::<Result<Vec<_>, _>>()?;
    let data = load_data(&cfg)?;

    let mut csv = String::from("activation,final_test_acc,final_test_loss,wall_seconds,final_alpha");
    if repeats_requested.is_some() {
        csv.push_str(",repeats,test_acc_mean,test_acc_std,test_loss_mean,test_loss_std");
    }
    csv.push('\n');
    let mut failures = vec![];
    for kind in kinds {
        let mut reports = vec![];
        for r in 0..repeats {
            let seed = cfg.train.seed.wrapping_add(r as u64);
            match run_once(&cfg, &data, kind, seed) {
                Ok(rep) => reports.push(rep),
                Err(e) => {
                    eprintln!("sau: {} (seed {seed}) failed: {e}", kind.name());
                    failures.push(kind.name());
                    break;
                }
            }
        }
        if reports.len() < repeats {
            continue;
        }
        let first = &reports[0];
        let last = first.last();
        write!(
            csv,
            "{},{},{},{:.3},{}",
            kind.name(),
            fmt_opt(last.and_then(|r| r.test_accuracy)),
            last.map(|r| r.test_loss.to_string()).unwrap_or_default(),
            first.total_wall_seconds(),
            alpha_field(first)
        )
        .unwrap();
        if repeats_requested.is_some() {
            let accs: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.last().and_then(|e| e.test_accuracy))
                .collect();
            let losses: Vec<f64> = reports.iter().filter_map(|r| r.last().map(|e| e.test_loss)).collect();
            let pair = |v: &[f64]| {
                if v.len() == repeats {
                    let (m, s) = mean_std(v);
                    format!("{m},{s}")
                } else {
                    ",".to_string()
                }
            };
            write!(csv, ",{repeats},{},{}", pair(&accs), pair(&losses)).unwrap();
        }
        csv.push('\n');
    }
    write_output(cfg.output.as_deref(), &csv)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("runs failed for: {}", failures.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn activation_lists() {
        assert_eq!(parse_activation_list("relu, sau").unwrap(), vec!["relu", "sau"]);
        assert!(parse_activation_list("relu").is_err());
        assert!(parse_activation_list("relu,sau,relu").is_err());
    }
}
