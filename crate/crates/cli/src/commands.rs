//! One function per subcommand: merge configuration, run, print, write artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use qha_lab::concentration::{optimize_concentration, strict_gap_check, ConcentrationProblem};
use qha_lab::experiments::{write_csv, ExperimentConfig, ExperimentRegistry};
use qha_lab::gap_criteria::{m_d, p_threshold, wigner_ball_verdict, GapRow};
use qha_lab::io::{write_gap_csv, write_json, write_phase_csv, OperatorRecord, SignalRecord};
use qha_lab::operator_rep::{optimize_operator_concentration, OperatorClass};
use qha_lab::oracle::identity_suite;
use qha_lab::qha::{self, Exponent};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    self, BudgetArgs, CommonArgs, Problem, ProblemArgs, RunConfig, TransformKind,
    DEFAULT_GAP_RADII, DEFAULT_ORACLE_SIZES,
};
use crate::format::{sig, sig_list};
use crate::Failure;

/// Largest residual the identity suite accepts.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, clap::Args)]
pub struct TransformArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    /// What to compute.
    #[arg(long, value_enum)]
    kind: Option<TransformKind>,
}

#[derive(Debug, clap::Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Also run the escape families and report a gap verdict.
    #[arg(long)]
    strict_gap: bool,
}

#[derive(Debug, clap::Args)]
pub struct OpOptimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// `hilbert-schmidt`, `total-correlation` or `density`.
    #[arg(long)]
    class: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct GapArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    d: Vec<u32>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Ball radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
}

#[derive(Debug, clap::Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Experiment names, or `all`.
    names: Vec<String>,
    /// List the registered experiments and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
}

/// Loads the config and sets up the worker pool; returns the config and output directory.
fn prepare(common: &CommonArgs, command: &str) -> Result<(RunConfig, PathBuf), Failure> {
    let config = RunConfig::load(common.config.as_deref(), command)?;
    let workers = config::worker_count(&config, common)?;
    // A second call in the same process keeps the first pool, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global();
    let out = config::out_dir(&config, common);
    fs::create_dir_all(&out)
        .map_err(|e| Failure::tolerance(format!("cannot create `{}`: {e}", out.display())))?;
    Ok((config, out))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::tolerance(format!("cannot write `{}`: {e}", path.display())))
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    write_json(value, create(path)?)?;
    Ok(())
}

/// JSON has no infinity, so `p = ∞` is written as the string `"inf"`.
fn exponent_value(p: Exponent) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p.value())
    }
}

fn problem_inputs(problem: &Problem, window: Option<&qha_lab::io::WindowSpec>) -> Value {
    json!({
        "n": problem.grid.n(),
        "mode": problem.grid.mode().as_str(),
        "p": exponent_value(problem.p),
        "window": window,
        "region": problem.region,
    })
}

pub fn transform(args: TransformArgs) -> Result<(), Failure> {
    let (config, out) = prepare(&args.common, "transform")?;
    let problem = Problem::resolve(&config, &args.problem)?;
    let kind = args
        .kind
        .or(config.transform)
        .unwrap_or(TransformKind::Cohen);
    let grid = problem.grid;
    let field = match kind {
        TransformKind::Cohen => {
            let window = problem.window_or_default().build(grid)?;
            qha::cohen_transform(window.operator(), &problem.signal.build(grid)?)?
        }
        TransformKind::Ambiguity => qha::ambiguity(&problem.signal.build(grid)?),
        TransformKind::WeylSymbol => {
            qha::weyl_symbol(problem.window_or_default().build(grid)?.operator())
        }
        TransformKind::FourierWigner => {
            qha::fourier_wigner(problem.window_or_default().build(grid)?.operator())
        }
    };
    let path = out.join("transform.csv");
    write_phase_csv(&field, create(&path)?)?;
    let region = problem.region.build(grid)?;
    println!(
        "transform {kind:?} n={} mode={}",
        grid.n(),
        grid.mode().as_str()
    );
    println!("max |value| = {}", sig(field.max_abs()));
    println!("L2 norm = {}", sig(field.l2_norm()));
    println!(
        "Lp norm on region = {}",
        sig(field.lp_norm(&region, problem.p))
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn optimize(args: OptimizeArgs) -> Result<(), Failure> {
    let (config, out) = prepare(&args.common, "optimize")?;
    let problem = Problem::resolve(&config, &args.problem)?;
    let budget = config::optimizer_budget(&config, &args.common, &args.budget);
    let window_spec = problem.window_or_default();
    let window = window_spec.build(problem.grid)?;
    if window.is_zero() {
        return Err(qha_lab::LabError::ZeroWindow.into());
    }
    let region = problem.region.build(problem.grid)?;
    let concentration = ConcentrationProblem::new(window, region, problem.p)?;
    let result = if args.strict_gap || config.strict_gap.unwrap_or(false) {
        strict_gap_check(&concentration, &budget)?
    } else {
        optimize_concentration(&concentration, &budget)?
    };

    let optimizer_path = out.join("optimizer.json");
    save_json(&SignalRecord::from(&result.optimizer), &optimizer_path)?;
    let report = json!({
        "command": "optimize",
        "inputs": problem_inputs(&problem, Some(&window_spec)),
        "budget": budget,
        "result": result,
        "optimizer_file": "optimizer.json",
    });
    let report_path = out.join("optimize.json");
    save_json(&report, &report_path)?;

    println!("value = {}", sig(result.value));
    println!("ess_lower = {}", sig(result.ess_lower));
    println!("universal bound = {}", sig(result.upper_bounds.universal));
    if let Some(jensen) = result.upper_bounds.jensen {
        println!("jensen bound = {}", sig(jensen));
    }
    if let Some(bound) = result.upper_bounds.wigner_essential {
        println!("wigner essential bound = {}", sig(bound));
    }
    println!(
        "verdict = {}",
        result.verdict.map(|v| v.as_str()).unwrap_or("none")
    );
    println!(
        "strategy = {} start = {} iterations = {} converged = {}",
        result.strategy, result.start, result.iterations, result.converged
    );
    println!("wrote {}", report_path.display());
    Ok(())
}

pub fn op_optimize(args: OpOptimizeArgs) -> Result<(), Failure> {
    let (config, out) = prepare(&args.common, "op-optimize")?;
    let problem = Problem::resolve(&config, &args.problem)?;
    let budget = config::operator_budget(&config, &args.common, &args.budget);
    let class = match &args.class {
        Some(text) => text.parse::<OperatorClass>()?,
        None => config.class.unwrap_or(OperatorClass::Density),
    };
    // The total-correlation class needs no window; the others default to Wigner.
    let window_spec = match class {
        OperatorClass::TotalCorrelation => problem.window.clone(),
        _ => Some(problem.window_or_default()),
    };
    let window = window_spec
        .as_ref()
        .map(|spec| spec.build(problem.grid))
        .transpose()?;
    if window.as_ref().is_some_and(|w| w.is_zero()) {
        return Err(qha_lab::LabError::ZeroWindow.into());
    }
    let region = problem.region.build(problem.grid)?;
    let result =
        optimize_operator_concentration(window.as_ref(), &region, problem.p, class, &budget)?;

    let mut report = json!({
        "command": "op-optimize",
        "inputs": problem_inputs(&problem, window_spec.as_ref()),
        "budget": budget,
        "result": result,
    });
    if let Some(optimizer) = &result.optimizer {
        let record = qha_lab::windows::OperatorWindow::new(
            optimizer.clone(),
            qha_lab::windows::Structure::Custom,
        );
        save_json(
            &OperatorRecord::from(&record),
            &out.join("op-optimizer.json"),
        )?;
        report["optimizer_file"] = json!("op-optimizer.json");
    }
    let report_path = out.join("op-optimize.json");
    save_json(&report, &report_path)?;

    println!("class = {}", class);
    println!("value = {}", sig(result.value));
    println!("upper bound = {}", sig(result.upper_bound));
    if let Some(v) = result.symbol_route {
        println!("symbol route = {}", sig(v));
    }
    if let Some(v) = result.signal_route {
        println!("signal route = {}", sig(v));
    }
    println!("attained = {}", result.attained);
    println!("spectrum = {}", sig_list(&result.spectrum));
    println!("wrote {}", report_path.display());
    Ok(())
}

pub fn gap(args: GapArgs) -> Result<(), Failure> {
    let (config, out) = prepare(&args.common, "gap")?;
    let file = config.gap.clone().unwrap_or_default();
    let pick = |flag: &Vec<f64>, file: Option<Vec<f64>>, default: &[f64]| {
        if flag.is_empty() {
            file.unwrap_or_else(|| default.to_vec())
        } else {
            flag.clone()
        }
    };
    let dims = if args.d.is_empty() {
        file.d.clone().unwrap_or_else(|| vec![1])
    } else {
        args.d.clone()
    };
    let exponents = pick(&args.p, file.p.clone(), &[2.0]);
    let radii = pick(&args.radii, file.radii.clone(), &DEFAULT_GAP_RADII);

    let mut rows = Vec::new();
    for &d in &dims {
        let md = m_d(d)?;
        println!(
            "d={d} m_{d}={} p_threshold={}",
            sig(md),
            sig(p_threshold(d)?)
        );
        for &p in &exponents {
            let mut first = true;
            for &r in &radii {
                let v = wigner_ball_verdict(d, p, r)?;
                if first {
                    println!(
                        "  p={} C_{}^{}={} C_p^p<m_d: {}",
                        sig(p),
                        p,
                        p,
                        sig(v.cp_p),
                        v.cp_p < md
                    );
                    println!(
                        "  {:>20} {:>20} {:>20} {:>20}  verdict (criterion)",
                        "R", "x", "A_d", "F_d"
                    );
                    first = false;
                }
                let criterion = v.criterion.map(|c| c.as_str()).unwrap_or("-");
                println!(
                    "  {:>20} {:>20} {:>20} {:>20}  {} ({criterion})",
                    sig(r),
                    sig(v.x),
                    sig(v.a_d),
                    sig(v.f_d),
                    v.verdict()
                );
                rows.push(GapRow::from(&v));
            }
        }
    }
    let path = out.join("gap.csv");
    write_gap_csv(&rows, create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let (config, out) = prepare(&args.common, "experiment")?;
    let registry = ExperimentRegistry::default();
    if args.list {
        for name in registry.names() {
            println!("{name}");
        }
        return Ok(());
    }
    let mut settings: ExperimentConfig = config.experiment.clone().unwrap_or_default();
    if let Some(seed) = args.common.seed.or(config.seed) {
        settings.seed = seed;
    }
    settings.n = args.n.or(settings.n);
    settings.p = args.p.or(settings.p);
    settings.radius = args.radius.or(settings.radius);

    let names: Vec<&str> = if args.names.is_empty() || args.names.iter().any(|n| n == "all") {
        registry.names()
    } else {
        args.names.iter().map(String::as_str).collect()
    };
    // Unknown names are usage errors; catch them before spending time on the others.
    if let Some(unknown) = names.iter().find(|n| !registry.names().contains(n)) {
        return Err(qha_lab::LabError::Unknown {
            kind: "experiment",
            name: unknown.to_string(),
        }
        .into());
    }

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (name, outcome) in names.iter().zip(registry.run_all(&names, &settings)) {
        match outcome {
            Ok(report) => {
                save_json(&report, &out.join(format!("{name}.json")))?;
                println!(
                    "{} {name}: tail={} target={} tolerance={} monotone={} runtime={}s",
                    if report.passed { "PASS" } else { "FAIL" },
                    sig(report.tail),
                    sig(report.target.value),
                    sig(report.tolerance),
                    report.monotone,
                    sig(report.runtime.as_secs_f64())
                );
                for check in report.checks.iter().filter(|c| !c.passed) {
                    println!(
                        "  failed check {}: measured={} target={}",
                        check.name,
                        sig(check.measured),
                        sig(check.target)
                    );
                }
                reports.push(report);
            }
            Err(e) => {
                println!("ERROR {name}: {e}");
                errors.push(Failure::from(e));
            }
        }
    }
    let csv_path = out.join("experiments.csv");
    write_csv(&reports, create(&csv_path)?)?;
    println!("wrote {}", csv_path.display());

    if let Some(first) = errors.into_iter().min_by_key(|f| std::cmp::Reverse(f.code)) {
        return Err(first);
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(Failure::tolerance(format!(
            "outside tolerance: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

pub fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let (config, out) = prepare(&args.common, "oracle")?;
    let sizes = if args.n.is_empty() {
        config
            .oracle
            .as_ref()
            .and_then(|o| o.n.clone())
            .unwrap_or_else(|| DEFAULT_ORACLE_SIZES.to_vec())
    } else {
        args.n.clone()
    };
    let seed = args.common.seed.or(config.seed).unwrap_or(0);
    let mut records = Vec::new();
    let mut worst = 0.0f64;
    for &n in &sizes {
        for r in identity_suite(n, seed)? {
            let ok = r.residual <= ORACLE_TOLERANCE;
            println!(
                "n={n} {:<42} residual={} {}",
                r.name,
                sig(r.residual),
                if ok { "ok" } else { "FAIL" }
            );
            worst = worst.max(r.residual);
            records.push(json!({"n": n, "identity": r.name, "residual": r.residual, "passed": ok}));
        }
    }
    let path = out.join("oracle.json");
    save_json(
        &json!({"seed": seed, "tolerance": ORACLE_TOLERANCE, "residuals": records}),
        &path,
    )?;
    println!("max residual = {}", sig(worst));
    println!("wrote {}", path.display());
    if worst > ORACLE_TOLERANCE {
        return Err(Failure::tolerance(format!(
            "identity residual {} exceeds {}",
            sig(worst),
            sig(ORACLE_TOLERANCE)
        )));
    }
    Ok(())
}
