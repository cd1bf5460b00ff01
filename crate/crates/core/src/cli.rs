use crate::config::{build_operator, load_config, run_all, run_scenario_at, RunConfig, ScenarioConfig};
use crate::grid::Point;
use crate::kernels::{check_hypothesis_h, hormander_constant, size_constant};
use crate::verify::report::{emit_report, ScenarioStatus};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

/// Default scenario suite compiled into the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default-suite.json");

const EXIT_PASS: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_GATED: i32 = 3;

#[derive(Parser)]
#[command(
    name = "fracops",
    version,
    about = "Weighted-inequality verification for composite fractional integral operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print invertibility and regularity certificates for every scenario kernel.
    CheckKernel {
        /// Scenario file; defaults to the built-in suite.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every scenario at its grid size and at double resolution, then
    /// write report.json and ratios.csv.
    Verify {
        /// Scenario file; defaults to the built-in suite.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; falls back to FRACOPS_OUT_DIR, then the config
        /// output_dir, then ./fracops-out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the scenarios along one parameter axis at single resolution
    /// and print a ratio-trend table.
    Sweep {
        /// Scenario file; defaults to the built-in suite.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: Axis,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Axis {
    Grid,
    P,
    Alpha,
    Lambda,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Grid => "grid",
            Axis::P => "p",
            Axis::Alpha => "alpha",
            Axis::Lambda => "lambda",
        }
    }
}

fn read_config(path: &Option<PathBuf>) -> Result<(RunConfig, String), String> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let cfg = load_config(&text).map_err(|e| format!("config error: {e}"))?;
    Ok((cfg, text))
}

fn check_kernel(cfg: &RunConfig) -> i32 {
    let mut violated = false;
    for sc in &cfg.scenarios {
        let op = match build_operator(&sc.operator, sc.grid.dim) {
            Ok(op) => op,
            Err(e) => {
                eprintln!("scenario {}: {e}", sc.name);
                return EXIT_CONFIG;
            }
        };
        let kernel = op.kernel();
        let hyp = check_hypothesis_h(kernel.matrices());
        println!(
            "scenario {}: preset {}, m = {}, alpha_total = {}",
            sc.name,
            sc.operator.preset,
            kernel.m(),
            kernel.alpha_total()
        );
        if hyp.pass {
            println!("  hypothesis (H): ok, min |det| = {}", hyp.min_det);
        } else {
            violated = true;
            println!("  hypothesis (H) violated, min |det| = {}", hyp.min_det);
        }
        let probe = if sc.grid.dim == 1 {
            Point::new_1d(0.1)
        } else {
            Point::new_2d(0.1, 0.05)
        };
        for (i, factor) in kernel.factors().iter().enumerate() {
            let size = size_constant(factor, &[0.5, 1.0, 2.0, 4.0]);
            let horm = hormander_constant(factor, sc.order, &probe, 2.0, 12);
            match (size, horm) {
                (Ok(s), Ok(h)) => println!(
                    "  factor {i}: size constant = {}, hormander sum = {}, tail slope = {}",
                    s.constant, h.partial_sum, h.tail_slope
                ),
                (s, h) => {
                    if let Err(e) = s {
                        println!("  factor {i}: size constant unavailable: {e}");
                    }
                    if let Err(e) = h {
                        println!("  factor {i}: hormander constant unavailable: {e}");
                    }
                }
            }
        }
    }
    if violated {
        eprintln!("hypothesis (H) violated");
        EXIT_FAIL
    } else {
        EXIT_PASS
    }
}

fn output_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    if let Ok(p) = std::env::var("FRACOPS_OUT_DIR") {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    if let Some(p) = &cfg.output_dir {
        return PathBuf::from(p);
    }
    PathBuf::from("fracops-out")
}

fn verify(cfg: &RunConfig, text: &str, out: &Path) -> i32 {
    let reports = match run_all(cfg, text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("scenario setup error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut any_fail = false;
    let mut any_gated = false;
    for rep in &reports {
        match rep.status() {
            ScenarioStatus::Pass => {
                let drift = rep.refinement.as_ref().map(|t| t.drift).unwrap_or(1.0);
                println!(
                    "scenario {}: PASS sup_ratio = {} drift = {drift}",
                    rep.scenario, rep.sup_ratio
                );
            }
            ScenarioStatus::Fail => {
                any_fail = true;
                let drift = rep.refinement.as_ref().map(|t| t.drift).unwrap_or(f64::NAN);
                println!(
                    "scenario {}: FAIL sup_ratio = {} drift = {drift}",
                    rep.scenario, rep.sup_ratio
                );
            }
            ScenarioStatus::Gated(reason) => {
                any_gated = true;
                println!("scenario {}: GATED ({reason})", rep.scenario);
            }
        }
    }
    match emit_report(&reports, out) {
        Ok((json, csv)) => {
            println!("wrote {}", json.display());
            println!("wrote {}", csv.display());
        }
        Err(e) => {
            eprintln!("cannot write reports: {e}");
            return EXIT_FAIL;
        }
    }
    if any_fail {
        EXIT_FAIL
    } else if any_gated {
        EXIT_GATED
    } else {
        EXIT_PASS
    }
}

/// The strong-type target exponent tied to p and the operator order.
fn strong_type_q(p: f64, alpha: f64, dim: usize) -> Option<f64> {
    let inv = 1.0 / p - alpha / dim as f64;
    (inv > 0.0).then(|| 1.0 / inv)
}

fn sweep_cases(sc: &ScenarioConfig, axis: Axis, value: f64) -> Option<ScenarioConfig> {
    let mut out = sc.clone();
    match axis {
        Axis::Grid => {
            out.grid.n = value as usize;
        }
        Axis::P => {
            sc.p?;
            out.p = Some(value);
            if sc.check == "strong-type" {
                let alpha = sc.operator.alpha.unwrap_or(0.0);
                out.q = Some(strong_type_q(value, alpha, sc.grid.dim)?);
            }
        }
        Axis::Alpha => {
            sc.operator.alpha?;
            out.operator.alpha = Some(value);
            if sc.check == "strong-type" {
                let p = sc.p?;
                out.q = Some(strong_type_q(p, value, sc.grid.dim)?);
            }
        }
        Axis::Lambda => {
            let mut lc = sc.lambda.clone()?;
            lc.min *= value;
            lc.max *= value;
            out.lambda = Some(lc);
        }
    }
    Some(out)
}

fn sweep(cfg: &RunConfig, axis: Axis) -> i32 {
    let values: Vec<f64> = match (&cfg.sweep, axis) {
        (Some(sw), Axis::Grid) => sw
            .grid
            .clone()
            .unwrap_or_default()
            .iter()
            .map(|&n| n as f64)
            .collect(),
        (Some(sw), Axis::P) => sw.p.clone().unwrap_or_default(),
        (Some(sw), Axis::Alpha) => sw.alpha.clone().unwrap_or_default(),
        (Some(sw), Axis::Lambda) => sw.lambda.clone().unwrap_or_default(),
        (None, _) => vec![],
    };
    if values.is_empty() {
        eprintln!("sweep axis {:?} has no values in the config", axis.name());
        return EXIT_CONFIG;
    }
    println!("axis,value,scenario,sup_ratio,trend");
    let mut prev: Vec<Option<f64>> = vec![None; cfg.scenarios.len()];
    for &value in &values {
        for (idx, sc) in cfg.scenarios.iter().enumerate() {
            let Some(modified) = sweep_cases(sc, axis, value) else {
                continue;
            };
            let run = match run_scenario_at(&modified, &cfg.seeds, modified.grid.n) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("scenario {} at {} = {value}: {e}", sc.name, axis.name());
                    return EXIT_FAIL;
                }
            };
            let sup = if run.gated.is_some() {
                f64::NAN
            } else {
                run.sup_ratio
            };
            let trend = match prev[idx] {
                Some(p) if p > 0.0 => format!("{}", sup / p),
                _ => String::new(),
            };
            println!("{},{value},{},{sup},{trend}", axis.name(), sc.name);
            prev[idx] = Some(sup);
        }
    }
    EXIT_PASS
}

/// Entry point shared by the binary and the tests; returns the process
/// exit code instead of exiting.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::CheckKernel { config } => match read_config(config) {
            Ok((cfg, _)) => check_kernel(&cfg),
            Err(e) => {
                eprintln!("{e}");
                EXIT_CONFIG
            }
        },
        Command::Verify { config, out } => match read_config(config) {
            Ok((cfg, text)) => verify(&cfg, &text, &output_dir(out, &cfg)),
            Err(e) => {
                eprintln!("{e}");
                EXIT_CONFIG
            }
        },
        Command::Sweep { config, axis } => match read_config(config) {
            Ok((cfg, _)) => sweep(&cfg, *axis),
            Err(e) => {
                eprintln!("{e}");
                EXIT_CONFIG
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_parses() {
        let cfg = load_config(DEFAULT_CONFIG).unwrap();
        assert_eq!(cfg.scenarios.len(), 6);
        let checks: Vec<&str> = cfg.scenarios.iter().map(|s| s.check.as_str()).collect();
        assert_eq!(
            checks,
            [
                "coifman",
                "pointwise-sharp",
                "strong-type",
                "weighted-bmo",
                "two-weight",
                "endpoint"
            ]
        );
        assert!(cfg.sweep.is_some());
    }

    #[test]
    fn sweep_overrides_follow_the_axis() {
        let cfg = load_config(DEFAULT_CONFIG).unwrap();
        let strong = cfg
            .scenarios
            .iter()
            .find(|s| s.check == "strong-type")
            .unwrap();
        let shifted = sweep_cases(strong, Axis::P, 1.25).unwrap();
        assert_eq!(shifted.p, Some(1.25));
        assert!((1.0 / shifted.q.unwrap() - 0.3).abs() < 1e-12);
        assert!(sweep_cases(strong, Axis::P, 2.0).is_none());
        let at_n = sweep_cases(strong, Axis::Grid, 64.0).unwrap();
        assert_eq!(at_n.grid.n, 64);
        assert!(sweep_cases(strong, Axis::Lambda, 2.0).is_none());
        let endpoint = cfg.scenarios.iter().find(|s| s.check == "endpoint").unwrap();
        let scaled = sweep_cases(endpoint, Axis::Lambda, 2.0).unwrap();
        assert!((scaled.lambda.as_ref().unwrap().min - 0.04).abs() < 1e-15);
    }

    #[test]
    fn unknown_arguments_exit_with_config_code() {
        assert_eq!(cli_main(["fracops", "bogus-command"]), EXIT_CONFIG);
        assert_eq!(cli_main(["fracops", "verify", "--bogus"]), EXIT_CONFIG);
    }
}
