use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use symreg_core::bootstrap::bootstrap_test;
use symreg_core::design::DesignPartition;
use symreg_core::distribution::Family;
use symreg_core::estimate::{aicc, FitOptions, Fitter, ModelSpec};
use symreg_core::inference::{Coefficients, ReportFlags, TestContext};
use symreg_core::simulation::{power_report, power_study, size_study, table_report, SimDesign};

use crate::data::{Dataset, Model};
use crate::{CliError, FitArgs, ModelArgs, SimArgs, TestArgs};

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(p) => write_file(p, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load(args: &ModelArgs) -> Result<Model, CliError> {
    Dataset::from_path(&args.data)?.model(&args.response, args.covariates.as_deref(), !args.no_intercept)
}

/// Symmetric spec on y, or log-symmetric spec on t with rows named 1-based.
fn spec(model: &Model, partition: DesignPartition, family: Family, log: bool) -> Result<ModelSpec, CliError> {
    if !log {
        return Ok(ModelSpec::new(model.y_vector(), partition, family)?);
    }
    ModelSpec::log_symmetric(&model.y, partition, family).map_err(|e| match e {
        symreg_core::Error::NonPositiveResponse { rows } => CliError::Data(format!(
            "--log needs a positive response; '{}' is not positive at data row(s) {}",
            model.response,
            rows.iter().map(|r| (r + 1).to_string()).collect::<Vec<_>>().join(", ")
        )),
        e => e.into(),
    })
}

#[derive(Serialize)]
struct Coef {
    name: String,
    estimate: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct FitReport {
    family: String,
    log_scale: bool,
    response: String,
    n: usize,
    p: usize,
    coefficients: Vec<Coef>,
    phi: f64,
    phi_std_error: f64,
    /// On the scale of the response as given (Jacobian included for --log).
    loglik: f64,
    /// Undefined (null) when n ≤ p + 2.
    aicc: Option<f64>,
    iterations: usize,
    converged: bool,
    degenerate: bool,
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let a = &args.model;
    let model = load(a)?;
    // The first column stands in as the tested block; only the full fit is used.
    let part = DesignPartition::new(model.x.clone(), &[0], &[0.0])?;
    let spec = spec(&model, part, a.family, a.log)?;
    let fitter = Fitter::for_spec(&spec, FitOptions::default())?;
    let f = fitter.fit(&spec.y)?;
    let (se, se_phi) = fitter.standard_errors(&f);
    let beta = spec.partition.to_caller_order(&f.beta);
    let se = spec.partition.to_caller_order(&se);
    let n = model.y.len();
    let p = model.covariates.len();
    let ll = f.loglik + spec.log_jacobian();
    let report = FitReport {
        family: a.family.to_string(),
        log_scale: a.log,
        response: model.response.clone(),
        n,
        p,
        coefficients: model
            .covariates
            .iter()
            .enumerate()
            .map(|(j, name)| Coef {
                name: name.clone(),
                estimate: beta[j],
                std_error: se[j],
            })
            .collect(),
        phi: f.phi,
        phi_std_error: se_phi,
        loglik: ll,
        aicc: aicc(ll, n, p + 1).ok(),
        iterations: f.iterations,
        converged: f.converged,
        degenerate: f.degenerate,
    };
    emit(&report, a.out.as_ref())?;
    if !f.converged {
        return Err(CliError::Unconverged(format!("{} iterations", f.iterations)));
    }
    Ok(())
}

#[derive(Serialize)]
struct StatRow {
    name: &'static str,
    value: Option<f64>,
    pvalue: Option<f64>,
    reject: Option<bool>,
}

#[derive(Serialize)]
struct FitSummary {
    loglik: f64,
    phi: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct BootstrapSummary {
    replicates: usize,
    seed: u64,
    failed: usize,
    statistics: Vec<StatRow>,
}

#[derive(Serialize)]
struct TestOutput {
    family: String,
    log_scale: bool,
    response: String,
    n: usize,
    p: usize,
    q: usize,
    tested: Vec<String>,
    null: Vec<f64>,
    alpha: f64,
    statistics: Vec<StatRow>,
    coefficients: Option<Coefficients>,
    flags: ReportFlags,
    unrestricted: FitSummary,
    restricted: FitSummary,
    bootstrap: Option<BootstrapSummary>,
}

const STAT_NAMES: [&str; 7] = ["S_W", "S_LR", "S_R", "S_T", "S*_LR", "S*_R", "S*_T"];
const BOOT_NAMES: [&str; 4] = ["Sb_W", "Sb_LR", "Sb_R", "Sb_T"];

pub fn test(args: &TestArgs) -> Result<(), CliError> {
    let a = &args.model;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let model = load(a)?;
    let q = args.tested.len();
    for (i, t) in args.tested.iter().enumerate() {
        if args.tested[..i].contains(t) {
            return Err(CliError::Usage(format!("column '{t}' listed twice in --test")));
        }
    }
    let null = args.null.clone().unwrap_or_else(|| vec![0.0; q]);
    if null.len() != q {
        return Err(CliError::Usage(format!("--null has {} values for {q} tested columns", null.len())));
    }
    let pos = model.positions(&args.tested)?;
    let part = DesignPartition::new(model.x.clone(), &pos, &null)?;
    let spec = spec(&model, part, a.family, a.log)?;
    let ctx = TestContext::for_spec(&spec, FitOptions::default())?;
    let (u, r) = ctx.fits(&spec.y)?;
    let report = ctx.report(&u, &r, args.force)?;
    let values = report.statistics.to_array();
    let pvalues = report.pvalues.to_array();
    let row = |name, v: f64, p: f64| StatRow {
        name,
        value: (!v.is_nan()).then_some(v),
        pvalue: (!p.is_nan()).then_some(p),
        reject: (!p.is_nan()).then_some(p < args.alpha),
    };
    let statistics = (0..7).map(|j| row(STAT_NAMES[j], values[j], pvalues[j])).collect();
    let bootstrap = match args.boot {
        Some(0) | None => None,
        Some(b) => {
            let raw = ctx.raw(&u, &r, args.force)?;
            let set = bootstrap_test(&ctx, &r, &raw, b, args.seed)?;
            Some(BootstrapSummary {
                replicates: b,
                seed: args.seed,
                failed: set.failed,
                statistics: set
                    .as_array()
                    .iter()
                    .zip(BOOT_NAMES)
                    .map(|(s, name)| row(name, s.observed, s.pvalue))
                    .collect(),
            })
        }
    };
    let summary = |f: &symreg_core::estimate::FitResult| FitSummary {
        loglik: f.loglik + spec.log_jacobian(),
        phi: f.phi,
        iterations: f.iterations,
        converged: f.converged,
    };
    let out = TestOutput {
        family: a.family.to_string(),
        log_scale: a.log,
        response: model.response.clone(),
        n: report.n,
        p: report.p,
        q,
        tested: args.tested.clone(),
        null,
        alpha: args.alpha,
        statistics,
        coefficients: report.coefficients,
        flags: report.flags,
        unrestricted: summary(&u),
        restricted: summary(&r),
        bootstrap,
    };
    emit(&out, a.out.as_ref())
}

#[derive(Debug, Clone, Copy)]
pub enum Study {
    Size,
    Power,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    design: &'a SimDesign,
    threads: Option<usize>,
    started_unix: u64,
    wall_time_s: f64,
    outputs: Vec<String>,
}

/// Reads a TOML design, a JSON design, or the `design` of a JSON manifest.
pub fn read_design(path: &Path) -> Result<SimDesign, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |e: String| CliError::Core(symreg_core::Error::Config(vec![format!("{}: {e}", path.display())]));
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let v = v.get("design").cloned().unwrap_or(v);
        serde_json::from_value(v).map_err(|e| bad(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}

pub fn simulate(args: &SimArgs, study: Study, threads: Option<usize>) -> Result<(), CliError> {
    let mut design = read_design(&args.config)?;
    if let Some(r) = args.reps {
        design.reps = r;
    }
    if let Some(s) = args.seed {
        design.seeds.noise = s;
    }
    if let Some(b) = args.boot {
        design.boot = (b > 0).then_some(b);
    }
    if let Some(a) = &args.alpha {
        design.alphas = a.clone();
    }
    if let Some(c) = args.calibration_reps {
        design.calibration_reps = c;
    }
    design.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let (command, files): (&'static str, Vec<(&str, String)>) = match study {
        Study::Size => {
            let res = size_study(&design)?;
            let (csv, text) = table_report(std::slice::from_ref(&res));
            print!("{text}");
            if res.failures > 0 {
                eprintln!("note: {} replicate(s) failed and were dropped", res.failures);
            }
            (
                "simulate-size",
                vec![
                    ("size.json", serde_json::to_string_pretty(&res).unwrap() + "\n"),
                    ("size.csv", csv),
                    ("size.txt", text),
                ],
            )
        }
        Study::Power => {
            let res = power_study(&design)?;
            let csv = power_report(&res);
            print!("{csv}");
            (
                "simulate-power",
                vec![
                    ("power.json", serde_json::to_string_pretty(&res).unwrap() + "\n"),
                    ("power.csv", csv),
                ],
            )
        }
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        for (name, body) in &files {
            write_file(&dir.join(name), body)?;
        }
        let manifest = Manifest {
            tool: "symreg",
            version: env!("CARGO_PKG_VERSION"),
            command,
            design: &design,
            threads,
            started_unix: started,
            wall_time_s: clock.elapsed().as_secs_f64(),
            outputs: files.iter().map(|(n, _)| n.to_string()).collect(),
        };
        write_file(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest).unwrap() + "\n"))?;
    }
    Ok(())
}
