use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gham::problem::AuxTag;
use gham_bench::commands::{cmd_compare, cmd_scaling, cmd_solve, cmd_sweep_hbar, CmdError};
use gham_bench::config::{ConfigError, Hbar, ProblemSpec, SolverKind};

#[derive(Parser)]
#[command(name = "gham", version, about = "Gegenbauer homotopy analysis solver and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write the solution, coefficients and residual history.
    Solve(Common),
    /// Residual against hbar.
    SweepHbar {
        #[command(flatten)]
        common: Common,
        /// Number of hbar samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Sweep interval, `lo,hi`.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: Option<[f64; 2]>,
        /// Iteration counts at which to report residuals.
        #[arg(long, value_delimiter = ',')]
        at: Option<Vec<usize>>,
    },
    /// Phase timings over a list of resolutions, with the iteration-time fit.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Resolutions, ascending.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        solvers: Option<Vec<SolverKind>>,
    },
    /// Run several solvers on the same problem and tabulate them.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        solvers: Option<Vec<SolverKind>>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run specification, or JSON with a `.json` extension.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    /// A number or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    hbar: Option<Hbar>,
    #[arg(long, value_parser = parse_aux)]
    aux: Option<AuxTag>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok([a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?]),
        _ => Err(format!("expected `lo,hi`, got `{s}`")),
    }
}

fn parse_aux(s: &str) -> Result<AuxTag, String> {
    s.parse().map_err(|e: gham::Error| e.to_string())
}

impl Common {
    fn spec(&self) -> Result<ProblemSpec, ConfigError> {
        let mut spec = match &self.config {
            Some(path) => ProblemSpec::from_path(path)?,
            None => ProblemSpec::default(),
        };
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(h) = self.hbar {
            spec.hbar = h;
        }
        if let Some(a) = self.aux {
            spec.aux = a;
        }
        if let Some(i) = self.iters {
            spec.max_iterations = i;
        }
        if let Some(t) = self.tol {
            spec.tolerance = t;
        }
        if let Some(s) = self.solver {
            spec.solver = s;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        Ok(spec)
    }
}

fn thread_pool() {
    let Ok(value) = std::env::var("HAM_THREADS") else { return };
    match value.parse::<usize>() {
        Ok(t) if t > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring HAM_THREADS = `{value}`"),
    }
}

fn run(cli: Cli) -> Result<i32, CmdError> {
    match cli.command {
        Command::Solve(c) => {
            let spec = c.spec()?;
            let s = cmd_solve(&spec, &c.out)?;
            println!(
                "{} {} n = {}: {:?} after {} iterations, residual {:.3e} (best {:.3e}), hbar {}",
                s.solver,
                s.aux,
                s.n,
                s.status,
                s.iterations,
                s.residual,
                s.best_residual,
                s.hbar.map_or("-".into(), |h| format!("{h:.6}")),
            );
            println!("wrote {}", c.out.display());
            Ok(s.status.exit_code())
        }
        Command::SweepHbar { common, samples, range, at } => {
            let mut spec = common.spec()?;
            if let Some(s) = samples {
                spec.sweep.samples = s;
            }
            if let Some(r) = range {
                spec.sweep.range = r;
            }
            if let Some(a) = at {
                spec.sweep.iterations = a;
            }
            spec.validate()?;
            let r = cmd_sweep_hbar(&spec, &common.out)?;
            let convergent = r.rows.iter().filter(|r| r.converged).count();
            println!("{} samples, {convergent} within tolerance", r.rows.len());
            match r.hbar_opt {
                Some(h) => println!("hbar_opt = {h:.6}"),
                None => println!("no convergent hbar in the range"),
            }
            println!("wrote {}", common.out.display());
            Ok(0)
        }
        Command::Scaling { common, ns, solvers } => {
            let mut spec = common.spec()?;
            if let Some(ns) = ns {
                spec.scaling.n = ns;
            }
            spec.validate()?;
            let solvers = solvers.unwrap_or_else(|| vec![spec.solver]);
            let r = cmd_scaling(&spec, &solvers, &common.out)?;
            println!("{:<7} {:>6} {:>11} {:>7} {:>7} {:>11}", "solver", "n", "total (s)", "ratio", "S", "residual");
            for row in &r.rows {
                println!(
                    "{:<7} {:>6} {:>11.4e} {:>7.2} {:>7.3} {:>11.3e}",
                    row.solver, row.n, row.t_total_s, row.ratio, row.s, row.residual
                );
            }
            for (solver, n, msg) in &r.halted {
                println!("{solver} stopped at n = {n}: {msg}");
            }
            if let Some(e) = r.factor_exponent {
                println!("factorization time ~ n^{e:.3}");
            }
            println!("wrote {}", common.out.display());
            Ok(0)
        }
        Command::Compare { common, solvers } => {
            let spec = common.spec()?;
            let solvers = solvers.unwrap_or_else(|| spec.compare.solvers.clone());
            let r = cmd_compare(&spec, &solvers, &common.out)?;
            for row in &r.rows {
                println!(
                    "{:<7} {:>4} iterations, residual {:.3e}, {:.4e} s",
                    row.solver, row.iterations, row.residual, row.t_total_s
                );
            }
            for (a, b, d) in &r.differences {
                println!("|{a} - {b}| = {d:.3e}");
            }
            println!("wrote {}", common.out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    thread_pool();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
