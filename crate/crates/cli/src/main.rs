use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use amub::mubgen::{csv_row, MubError, Tolerances, CSV_HEADER};
use amub::pipeline::{analyze_dir, build, load_report, BuildOptions, PipelineError};
use amub::planner::{choose_plan, mub_lower_bound, FactorizationPlan, MolsLibrary, PlanError, Resources, Target};
use amub::trims::Choice;
use amub::unitaries::HadamardSource;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use rayon::prelude::*;

const MAX_TABLE_DIM: usize = 5000;

#[derive(Parser)]
#[command(name = "amub", version, about = "Approximate mutually unbiased bases from resolvable block designs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor d, pick a construction and print its predicted quality
    Plan(PlanArgs),
    /// Build design, bases and claim report into a directory
    Build(BuildArgs),
    /// Reload a build directory and recompute the report
    Analyze(AnalyzeArgs),
    /// CSV sweep of predicted versus realized quality over a range of d
    Table(TableArgs),
    /// Write a build directory's report and bases as CSV
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Complex,
    Real,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Complex => Target::Complex,
            TargetArg::Real => Target::Real,
        }
    }
}

#[derive(Args)]
struct Sources {
    /// Mutually orthogonal Latin squares for a non-prime-power side (JSON)
    #[arg(long = "mols")]
    mols: Vec<PathBuf>,
    /// Extra real Hadamard matrices (JSON)
    #[arg(long, env = "AMUB_HADAMARD_LIB")]
    hadamard_lib: Option<PathBuf>,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, value_enum, default_value = "complex")]
    target: TargetArg,
    #[command(flatten)]
    sources: Sources,
}

fn positive(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {text}")),
    }
}

#[derive(Args)]
struct TolArgs {
    /// Slack between realized and predicted beta
    #[arg(long, value_parser = positive)]
    beta_tol: Option<f64>,
    /// Bound on max |U*U - I|
    #[arg(long, value_parser = positive)]
    unitary_tol: Option<f64>,
    /// Distance from 1/sqrt(d) accepted by the MUB check
    #[arg(long, value_parser = positive)]
    mub_tol: Option<f64>,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        let base = Tolerances::default();
        Tolerances {
            beta: self.beta_tol.unwrap_or(base.beta),
            unitary: self.unitary_tol.unwrap_or(base.unitary),
            mub: self.mub_tol.unwrap_or(base.mub),
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Print the plan as JSON only
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Randomize donor class and removed blocks/points with this seed
    #[arg(long)]
    seed: Option<u64>,
    /// Append the computational basis (excluded from claim checks)
    #[arg(long)]
    append_identity: bool,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Build directory
    #[arg(long)]
    dir: PathBuf,
    /// Print the recomputed report as JSON
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 4)]
    from: usize,
    #[arg(long)]
    to: usize,
    #[arg(long, value_enum, default_value = "complex")]
    target: TargetArg,
    #[command(flatten)]
    sources: Sources,
    /// Write the CSV here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Build directory
    #[arg(long)]
    dir: PathBuf,
    /// Where to write the CSV files (defaults to the build directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Claims(String),
    Infeasible(String),
    MissingHadamard(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Claims(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::MissingHadamard(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Claims(m) | Failure::Infeasible(m) | Failure::MissingHadamard(m) => m,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Plan(p) => p.into(),
            PipelineError::Mub(MubError::MissingRealHadamard(_)) => Failure::MissingHadamard(e.to_string()),
            other => Failure::Infeasible(other.to_string()),
        }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::NoRealHadamard { .. } => Failure::MissingHadamard(e.to_string()),
            other => Failure::Infeasible(other.to_string()),
        }
    }
}

fn resources(sources: &Sources) -> Result<Resources, Failure> {
    let mut hadamard = HadamardSource::new();
    if let Some(path) = &sources.hadamard_lib {
        hadamard
            .add_library_file(path)
            .map_err(|e| Failure::Infeasible(e.to_string()))?;
        info!("loaded Hadamard orders {:?} from {}", hadamard.library_orders(), path.display());
    }
    let mut mols = MolsLibrary::new();
    for path in &sources.mols {
        mols.load_file(path)?;
        info!("loaded MOLS from {}", path.display());
    }
    Ok(Resources { hadamard, mols })
}

fn describe(plan: &FactorizationPlan) -> String {
    let p = &plan.predicted;
    let mut out = String::new();
    let _ = writeln!(out, "d = {} = {} x {}, delta = {}", plan.d, plan.k, plan.s, plan.delta);
    let _ = writeln!(
        out,
        "q = {} ({}), e = {}, f = {}, sign {}",
        plan.q.q(),
        plan.q,
        plan.e,
        plan.f,
        if plan.sign == amub::planner::Sign::Plus { "+" } else { "-" }
    );
    let _ = writeln!(out, "route {} ({})", plan.route, plan.target);
    if let Some(c) = plan.constant {
        let _ = writeln!(out, "net side {}, offset {}, squares {}", c.side, c.offset, c.squares);
    }
    let _ = writeln!(
        out,
        "predicted beta = sqrt({}) = {:.6}",
        p.beta_exact.squared(),
        p.beta
    );
    let _ = writeln!(out, "predicted classes = {}", p.classes);
    if p.eps_lo == p.eps_hi {
        let _ = writeln!(out, "predicted eps = {}", p.eps_lo);
    } else {
        let _ = writeln!(out, "predicted eps in [{}, {}]", p.eps_lo, p.eps_hi);
    }
    let _ = writeln!(out, "mu = {}, |Delta| <= {}", p.mu, p.delta_set_bound);
    for n in &plan.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

fn plan_from(inputs: &Inputs, res: &Resources) -> Result<FactorizationPlan, Failure> {
    Ok(choose_plan(inputs.d, inputs.k, inputs.s, inputs.target.into(), res)?)
}

fn run_plan(args: PlanArgs) -> Result<(), Failure> {
    let res = resources(&args.inputs.sources)?;
    let plan = plan_from(&args.inputs, &res)?;
    if args.json {
        println!("{}", plan.to_json());
    } else {
        print!("{}", describe(&plan));
    }
    Ok(())
}

fn summarize(out: &amub::pipeline::BuildOutput) -> String {
    let r = &out.report;
    let mut s = format!(
        "{} bases in d = {}, beta realized {:.6} (predicted {:.6}), mu {}",
        r.bases,
        r.d,
        r.beta_realized,
        out.plan.predicted.beta,
        r.mu.map_or("-".into(), |m| m.to_string())
    );
    if let Some(b) = r.beta_with_identity {
        let _ = write!(s, ", beta with identity {b:.6}");
    }
    if let Some(f) = &r.flags {
        let _ = write!(s, "\nflags: {f:?}");
    }
    for n in &r.notes {
        let _ = write!(s, "\nnote: {n}");
    }
    s
}

fn claims_result(out: &amub::pipeline::BuildOutput) -> Result<(), Failure> {
    if out.report.passed() {
        Ok(())
    } else {
        Err(Failure::Claims(format!(
            "claim check failed: {:?}",
            out.report.flags
        )))
    }
}

fn run_build(args: BuildArgs) -> Result<(), Failure> {
    let res = resources(&args.inputs.sources)?;
    let plan = plan_from(&args.inputs, &res)?;
    info!("route {} with q = {}, e = {}, f = {}", plan.route, plan.q.q(), plan.e, plan.f);
    let opts = BuildOptions {
        choice: args.seed.map_or(Choice::Lowest, Choice::Seeded),
        append_identity: args.append_identity,
        tolerances: args.tol.tolerances(),
    };
    let start = Instant::now();
    let out = build(&plan, &res, opts)?;
    info!("built and checked in {:.2?}", start.elapsed());
    out.save(&args.out)?;
    info!("wrote {}", args.out.display());
    println!("{}", summarize(&out));
    claims_result(&out)
}

fn run_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let out = analyze_dir(&args.dir, &args.tol.tolerances())?;
    if args.json {
        println!("{}", out.report.to_json());
    } else {
        println!("{}", summarize(&out));
    }
    match load_report(&args.dir) {
        Ok(stored) if stored == out.report => info!("recomputed report matches the stored one"),
        Ok(_) => {
            return Err(Failure::Claims(
                "recomputed report differs from the stored report".into(),
            ))
        }
        Err(e) => debug!("no stored report to compare: {e}"),
    }
    claims_result(&out)
}

fn table_row(d: usize, target: Target, res: &Resources) -> Option<String> {
    let plan = match choose_plan(d, None, None, target, res) {
        Ok(p) => p,
        Err(e) => {
            debug!("d = {d}: {e}");
            return None;
        }
    };
    let start = Instant::now();
    match build(&plan, res, BuildOptions::default()) {
        Ok(out) => Some(csv_row(
            &plan,
            &out.report,
            mub_lower_bound(d),
            start.elapsed().as_millis(),
        )),
        Err(e) => {
            debug!("d = {d}: {e}");
            None
        }
    }
}

fn run_table(args: TableArgs) -> Result<(), Failure> {
    if args.to > MAX_TABLE_DIM || args.from > args.to {
        return Err(Failure::Infeasible(format!(
            "table range must satisfy from <= to <= {MAX_TABLE_DIM}"
        )));
    }
    let res = resources(&args.sources)?;
    let target: Target = args.target.into();
    let rows: Vec<String> = (args.from..=args.to)
        .into_par_iter()
        .filter_map(|d| table_row(d, target, &res))
        .collect();
    info!("{} feasible rows in [{}, {}]", rows.len(), args.from, args.to);
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Infeasible(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Infeasible(format!("{}: {e}", path.display())))
}

fn run_export(args: ExportArgs) -> Result<(), Failure> {
    let out = analyze_dir(&args.dir, &Tolerances::default())?;
    let dest = args.out.unwrap_or_else(|| args.dir.clone());
    std::fs::create_dir_all(&dest).map_err(|e| Failure::Infeasible(format!("{}: {e}", dest.display())))?;
    let row = csv_row(&out.plan, &out.report, mub_lower_bound(out.plan.d), 0);
    write_file(&dest.join("report.csv"), &format!("{CSV_HEADER}\n{row}\n"))?;
    let d = out.bases.d();
    for (l, basis) in out.bases.bases().iter().enumerate() {
        let dense = basis.dense();
        let mut text = String::from("row,col,re,im\n");
        for (i, z) in dense.iter().enumerate() {
            if z.re != 0.0 || z.im != 0.0 {
                let _ = writeln!(text, "{},{},{:e},{:e}", i / d, i % d, z.re, z.im);
            }
        }
        write_file(&dest.join(format!("basis_{l}.csv")), &text)?;
    }
    info!("wrote report.csv and {} basis files to {}", out.bases.len(), dest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => run_plan(a),
        Command::Build(a) => run_build(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Table(a) => run_table(a),
        Command::Export(a) => run_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
