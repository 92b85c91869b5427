mod config;
mod error;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use timoshenko_core::experiments::{convergence_study, eta_sweep, locking_study};
use timoshenko_core::ssn_solve;

use crate::config::Config;
use crate::error::CliError;
use crate::output::{num, write_p0, write_p1, Table};

#[derive(Parser)]
#[command(name = "timoshenko", version, about = "Sparse optimal control of a Timoshenko beam")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one control problem and write the fields.
    Solve(Common),
    /// Solve along `control.etas`, warm-starting each solve.
    Sweep(Common),
    /// Control errors of both schemes against a fine locking-free solve.
    Locking(Common),
    /// Control, state and adjoint errors and fitted rates.
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the parallel studies (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Recorded in the output headers; the solvers are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let (name, args) = match &command {
        Command::Solve(a) => ("solve", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Locking(a) => ("locking", a),
        Command::Convergence(a) => ("convergence", a),
    };
    let cfg = Config::load(&args.config)?;
    if let Some(j) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::config(format!("--jobs: {e}")))?;
    }
    fs::create_dir_all(&args.out)?;
    let header = cfg.header(name, args.seed);
    match command {
        Command::Solve(_) => solve(&cfg, &args.out, header),
        Command::Sweep(_) => sweep(&cfg, &args.out, header),
        Command::Locking(_) => locking(&cfg, &args.out, header),
        Command::Convergence(_) => convergence(&cfg, &args.out, header),
    }
}

fn solve(cfg: &Config, out: &Path, header: Vec<(String, String)>) -> Result<(), CliError> {
    let problem = cfg.family()?.build(cfg.geometry.n, cfg.geometry.thickness, cfg.scheme()?)?;
    let r = ssn_solve(&problem, &cfg.ssn())?;
    let mesh = problem.mesh();
    write_p0(&out.join("control.txt"), mesh, &r.u)?;
    write_p1(&out.join("deflection.txt"), mesh, &r.state.w)?;
    write_p1(&out.join("rotation.txt"), mesh, &r.state.theta)?;
    write_p1(&out.join("adjoint_p.txt"), mesh, &r.adjoint.p)?;
    write_p1(&out.join("adjoint_q.txt"), mesh, &r.adjoint.q)?;
    let mut t = Table::new(
        header,
        &[
            "cost", "tracking", "l2_term", "l1_term", "l2norm", "null", "support_runs", "iterations", "residual",
            "converged",
        ],
    );
    t.push(vec![
        num(r.cost.total),
        num(r.cost.tracking),
        num(r.cost.l2_term),
        num(r.cost.l1_term),
        num(r.u.l2_norm(mesh)),
        r.null_count().to_string(),
        r.u.support_runs().len().to_string(),
        r.iterations.to_string(),
        num(r.final_residual()),
        r.converged.to_string(),
    ]);
    t.write(&out.join("summary.csv"))?;
    println!(
        "cost {} |u| {} null {}/{} in {} iterations",
        num(r.cost.total),
        num(r.u.l2_norm(mesh)),
        r.null_count(),
        mesh.element_count(),
        r.iterations
    );
    if r.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(1))
    }
}

fn sweep(cfg: &Config, out: &Path, header: Vec<(String, String)>) -> Result<(), CliError> {
    let problem = cfg.family()?.build(cfg.geometry.n, cfg.geometry.thickness, cfg.scheme()?)?;
    let rows = eta_sweep(&problem, &cfg.control.etas, &cfg.ssn())?;
    let mut t = Table::new(header, &["eta", "cost", "l2norm", "null", "iterations", "converged", "runtime_s"]);
    for (r, _) in &rows {
        t.push(vec![
            num(r.eta),
            num(r.cost),
            num(r.l2_norm),
            r.null_count.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            format!("{:.3}", r.runtime_secs),
        ]);
        println!("eta {} cost {} |u| {} null {}", num(r.eta), num(r.cost), num(r.l2_norm), r.null_count);
    }
    t.write(&out.join("sweep.csv"))?;
    match rows.iter().filter(|r| !r.0.converged).count() {
        0 => Ok(()),
        k => Err(CliError::NotConverged(k)),
    }
}

fn locking(cfg: &Config, out: &Path, mut header: Vec<(String, String)>) -> Result<(), CliError> {
    let s = &cfg.locking;
    let n_ref = s.reference_size();
    header.push(("n_ref".into(), n_ref.to_string()));
    let start = Instant::now();
    let rows = locking_study(&cfg.family()?, &s.thicknesses, &s.ns, n_ref, &cfg.ssn())?;
    let mut t = Table::new(header, &["scheme", "thickness", "n", "h", "control_l2_error", "iterations", "converged"]);
    for r in &rows {
        t.push(vec![
            r.scheme.name().to_string(),
            num(r.thickness),
            r.n.to_string(),
            num(cfg.geometry.length / r.n as f64),
            num(r.control_l2_error),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
    }
    t.write(&out.join("locking.csv"))?;
    println!("{} rows in {:.1}s", rows.len(), start.elapsed().as_secs_f64());
    match rows.iter().filter(|r| !r.converged).count() {
        0 => Ok(()),
        k => Err(CliError::NotConverged(k)),
    }
}

fn convergence(cfg: &Config, out: &Path, mut header: Vec<(String, String)>) -> Result<(), CliError> {
    let s = &cfg.convergence;
    let n_ref = s.reference_size();
    header.push(("n_ref".into(), n_ref.to_string()));
    let family = cfg.family()?;
    let scheme = cfg.scheme()?;
    let mut errors = Table::new(
        header.clone(),
        &["thickness", "n", "h", "control_l2", "state_l2", "state_h1", "adjoint_l2", "iterations", "converged"],
    );
    let mut rates = Table::new(header, &["thickness", "control_l2", "state_l2", "state_h1", "adjoint_l2"]);
    let mut failed = 0;
    for &thickness in &s.thicknesses {
        let rep = convergence_study(&family, thickness, scheme, &s.ns, n_ref, &cfg.ssn())?;
        for r in &rep.records {
            failed += usize::from(!r.converged);
            errors.push(vec![
                num(thickness),
                r.n.to_string(),
                num(r.h),
                num(r.control_l2),
                num(r.state_l2),
                num(r.state_h1),
                num(r.adjoint_l2),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]);
        }
        let q = rep.rates;
        rates.push(vec![num(thickness), num(q.control_l2), num(q.state_l2), num(q.state_h1), num(q.adjoint_l2)]);
        println!(
            "t {}: control {:.3} state L2 {:.3} state H1 {:.3} adjoint L2 {:.3}",
            num(thickness),
            q.control_l2,
            q.state_l2,
            q.state_h1,
            q.adjoint_l2
        );
    }
    errors.write(&out.join("convergence.csv"))?;
    rates.write(&out.join("rates.csv"))?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::NotConverged(failed))
    }
}
