use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stiga::nonlinear::NonlinearMethod;
use stiga::stabilization::dmp_audit;
use stiga_bench::cases::{case_by_name, BenchmarkCase, Refinement, CASE_NAMES};
use stiga_bench::BenchError;
use stiga_bench::config::{config_args, parse_config};
use stiga_bench::convergence::run_convergence;
use stiga_bench::output::{
    blocks_of, load_solution, save_solution, write_dmp_csv, write_errors_csv, write_iterations_csv, write_profile_csv,
    write_rates_csv,
};
use stiga_bench::run::{error_norms, final_l1_deviation, sample_profile, solve_case, SolveOptions};

#[derive(Parser)]
#[command(name = "stiga-bench", about = "Benchmark driver for the stiga space-time solver", args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and write the solution and reports.
    Solve(SolveArgs),
    /// Run the refinement series of a case and fit convergence rates.
    Converge(ConvergeArgs),
    /// Check a stored solution against the discrete maximum principle.
    Audit(AuditArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long)]
    case: String,
    #[arg(long, default_value = "kref")]
    refine: Refinement,
    #[arg(long)]
    slabs: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_parser = parse_method)]
    method: Option<NonlinearMethod>,
    #[arg(long)]
    regularized: Option<bool>,
    /// Solve the unstabilized Galerkin system.
    #[arg(long)]
    galerkin: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    relaxation: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// key=value file with defaults for these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: SolverArgs,
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Linear control points per spatial direction.
    #[arg(long)]
    nx: Option<usize>,
    /// Linear control points in time.
    #[arg(long)]
    nt: Option<usize>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    orders: Vec<usize>,
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<NonlinearMethod, String> {
    match s {
        "picard" => Ok(NonlinearMethod::Picard),
        "hybrid" => Ok(NonlinearMethod::Hybrid),
        other => Err(format!("unknown method '{other}', expected picard or hybrid")),
    }
}

fn load_case(name: &str) -> Result<BenchmarkCase> {
    case_by_name(name).with_context(|| format!("unknown case '{name}', available: {}", CASE_NAMES.join(", ")))
}

fn options(case: &BenchmarkCase, a: &SolverArgs, degree: usize) -> SolveOptions {
    let mut o = SolveOptions::for_case(case);
    o.degree = degree;
    o.refine = a.refine;
    o.slabs = a.slabs;
    if a.galerkin {
        o.stabilized = false;
    }
    let p = &mut o.params;
    p.q = a.q.unwrap_or(p.q);
    p.sigma = a.sigma.unwrap_or(p.sigma);
    p.epsilon = a.eps.unwrap_or(p.epsilon);
    p.gamma = a.gamma.unwrap_or(p.gamma);
    p.regularized = a.regularized.unwrap_or(p.regularized);
    let c = &mut o.config;
    c.tol = a.tol.unwrap_or(c.tol);
    c.method = a.method.unwrap_or(c.method);
    c.max_iters = a.max_iters.unwrap_or(c.max_iters);
    c.relaxation = a.relaxation.unwrap_or(c.relaxation);
    o
}

fn create(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::create(&path).with_context(|| format!("creating {}", path.display()))
}

fn coord_names(case: &BenchmarkCase) -> Vec<&'static str> {
    let mut v = vec!["x", "y"][..case.problem.spatial_dim].to_vec();
    if case.is_transient() {
        v.push("t");
    }
    v
}

fn solve(a: SolveArgs) -> Result<()> {
    let case = load_case(&a.common.case)?;
    let mut opts = options(&case, &a.common, a.order);
    if a.nx.is_some() || a.nt.is_some() {
        let mut cps = case.control_points.clone();
        let d = case.problem.spatial_dim;
        if let Some(nx) = a.nx {
            cps[..d].fill(nx);
        }
        if let Some(nt) = a.nt {
            if !case.is_transient() {
                bail!("{} is steady, --nt does not apply", case.name);
            }
            cps[d] = nt;
        }
        opts.control_points = Some(cps);
    }
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    let run = match solve_case(&case, &opts) {
        Ok(run) => run,
        Err(e) => {
            if let BenchError::Slab {
                slab,
                source: stiga::Error::NonConvergence { history, .. },
            } = &e
            {
                let mut w = create(out, "iterations.csv")?;
                writeln!(w, "slab,iter,update,residual,phase")?;
                for r in history {
                    writeln!(w, "{},{},{:e},{:e},{}", slab, r.iter, r.update, r.residual, r.phase)?;
                }
            }
            return Err(e.into());
        }
    };
    save_solution(&blocks_of(&run.trajectory), &out.join("solution.bin"))?;
    let reports: Vec<_> = run.trajectory.slabs.iter().filter_map(|s| s.dmp.clone()).collect();
    if !reports.is_empty() {
        write_dmp_csv(&reports, create(out, "dmp_report.csv")?)?;
    }
    write_iterations_csv(&run.trajectory, create(out, "iterations.csv")?)?;
    let samples = sample_profile(&case, &run.trajectory, 401);
    if !samples.is_empty() {
        write_profile_csv(&samples, &coord_names(&case), create(out, "profile.csv")?)?;
    }
    println!(
        "{}: p={} spans={:?} slabs={} unknowns={} iterations={} time={:.2?}",
        case.name,
        run.grid.degree,
        run.grid.spans,
        run.slabs,
        run.space.len(),
        run.iterations(),
        run.elapsed
    );
    if let Some(e) = error_norms(&case, &run) {
        println!("l2_rel={:.4e} h1_rel={:.4e}", e.l2, e.h1);
        let row = stiga_bench::convergence::LevelResult {
            order: run.grid.degree,
            level: 0,
            h: run.space.mesh_size(),
            dt: run.space.time_direction().map_or(0.0, |k| k.span_length()),
            l2: e.l2,
            h1: e.h1,
            unknowns: run.space.len(),
            iterations: run.iterations(),
            elapsed: run.elapsed,
        };
        write_errors_csv(&[row], create(out, "errors.csv")?)?;
    }
    if let (Some((lo, hi)), Some((dlo, dhi))) = (run.trajectory.value_range(), run.trajectory.data_range()) {
        println!(
            "range=[{lo:.6e}, {hi:.6e}] data=[{dlo:.6e}, {dhi:.6e}] violation={:.3e}",
            run.trajectory.global_dmp_violation()
        );
    }
    if case.is_transient() {
        println!("l1_final_deviation={:.6e}", final_l1_deviation(&case, &run.trajectory));
    }
    Ok(())
}

fn converge(a: ConvergeArgs) -> Result<()> {
    let case = load_case(&a.common.case)?;
    let base = options(&case, &a.common, 1);
    let slabs = a.common.slabs.unwrap_or(1);
    let study = run_convergence(&case, &a.orders, a.common.refine, slabs, a.levels, &base)?;
    let out = &a.common.out;
    fs::create_dir_all(out)?;
    write_errors_csv(&study.levels, create(out, "errors.csv")?)?;
    write_rates_csv(&study.rates, create(out, "rates.csv")?)?;
    for l in &study.levels {
        println!(
            "p={} level={} h={:.4e} dt={:.4e} l2={:.4e} h1={:.4e} n={} it={} {:.2?}",
            l.order, l.level, l.h, l.dt, l.l2, l.h1, l.unknowns, l.iterations, l.elapsed
        );
    }
    for r in &study.rates {
        println!("p={} slabs={} l2_rate={:.3} h1_rate={:.3}", r.order, r.slabs, r.l2_rate, r.h1_rate);
    }
    Ok(())
}

fn audit(a: AuditArgs) -> Result<()> {
    let blocks = load_solution(&a.input)?;
    let mut reports = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let mask: Vec<bool> = b.kinds.iter().map(|k| k.is_constrained()).collect();
        reports.push(dmp_audit(&b.space, &b.coeffs, &mask, &b.coeffs, None)?);
    }
    // initial layers of later slabs are copies, so the data range is that of
    // the Dirichlet values and the first initial layer
    let (mut dlo, mut dhi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (l, b) in blocks.iter().enumerate() {
        for (k, kind) in b.kinds.iter().enumerate() {
            let v = b.coeffs[k];
            lo = lo.min(v);
            hi = hi.max(v);
            let data = match kind {
                stiga::tensor::NodeKind::Dirichlet => true,
                stiga::tensor::NodeKind::Initial => l == 0,
                stiga::tensor::NodeKind::Free => false,
            };
            if data {
                dlo = dlo.min(v);
                dhi = dhi.max(v);
            }
        }
    }
    let violation = if dlo.is_finite() { 0f64.max(dlo - lo).max(hi - dhi) } else { 0.0 };
    println!("blocks={} range=[{lo:.6e}, {hi:.6e}] data=[{dlo:.6e}, {dhi:.6e}] violation={violation:.3e}", blocks.len());
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        write_dmp_csv(&reports, create(out, "dmp_report.csv")?)?;
    }
    if violation > a.tol {
        bail!("global maximum principle violated by {violation:.3e}");
    }
    Ok(())
}

/// Arguments with the entries of `--config <file>` spliced in after the
/// subcommand, so that flags given on the command line take precedence.
fn expand_args() -> Result<Vec<String>> {
    let mut args: Vec<String> = std::env::args().collect();
    let Some(pos) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    let path = args.get(pos + 1).context("--config needs a file")?.clone();
    let text = fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let entries = parse_config(&text)?;
    let extra = config_args(&entries, &["galerkin"]);
    let at = 2.min(args.len());
    args.splice(at..at, extra);
    Ok(args)
}

fn main() -> Result<()> {
    let cli = Cli::parse_from(expand_args()?);
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Converge(a) => converge(a),
        Command::Audit(a) => audit(a),
    }
}
