//! Per-iteration benchmark rows and their CSV form.

use std::io::Write;
use std::path::Path;

use gham::baselines::NewtonRun;
use gham::ham::{HamRun, PhaseTimes};
use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str =
    "run_id,solver,aux,n,iter,hbar,residual,t_setup_s,t_factor_s,t_solve_s,t_transform_s,t_deriv_s,converged";

/// One iteration of one run. Timings are cumulative from the start of the
/// run; a non-finite residual marks divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub run_id: String,
    pub solver: String,
    pub aux: String,
    pub n: usize,
    pub iter: usize,
    pub hbar: Option<f64>,
    pub residual: f64,
    pub t_setup_s: f64,
    pub t_factor_s: f64,
    pub t_solve_s: f64,
    pub t_transform_s: f64,
    pub t_deriv_s: f64,
    pub converged: bool,
}

impl BenchRecord {
    pub fn total_s(&self) -> f64 {
        self.t_setup_s + self.t_factor_s + self.t_solve_s + self.t_transform_s + self.t_deriv_s
    }

    pub fn iteration_s(&self) -> f64 {
        self.t_solve_s + self.t_transform_s + self.t_deriv_s
    }

    fn with_times(mut self, t: &PhaseTimes) -> Self {
        self.t_setup_s = t.setup.as_secs_f64();
        self.t_factor_s = t.factorize.as_secs_f64();
        self.t_solve_s = t.solve.as_secs_f64();
        self.t_transform_s = t.transform.as_secs_f64();
        self.t_deriv_s = t.derivative.as_secs_f64();
        self
    }
}

fn blank(run_id: &str, solver: &str, aux: &str, n: usize) -> BenchRecord {
    BenchRecord {
        run_id: run_id.into(),
        solver: solver.into(),
        aux: aux.into(),
        n,
        iter: 0,
        hbar: None,
        residual: f64::NAN,
        t_setup_s: 0.0,
        t_factor_s: 0.0,
        t_solve_s: 0.0,
        t_transform_s: 0.0,
        t_deriv_s: 0.0,
        converged: false,
    }
}

/// Rows for a homotopy run (GHAM or SHAM). A divergent final iteration gets
/// an infinite residual row.
pub fn ham_records(run_id: &str, solver: &str, aux: &str, n: usize, run: &HamRun) -> Vec<BenchRecord> {
    let mut out: Vec<BenchRecord> = run
        .state
        .residual_trace
        .iter()
        .zip(&run.iteration_times)
        .enumerate()
        .map(|(i, (&r, t))| BenchRecord {
            iter: i + 1,
            hbar: Some(run.hbar),
            residual: r,
            ..blank(run_id, solver, aux, n).with_times(t)
        })
        .collect();
    if let gham::ham::Stop::Diverged { iteration } = run.stop {
        if out.len() < iteration {
            out.push(BenchRecord {
                iter: iteration,
                hbar: Some(run.hbar),
                residual: f64::INFINITY,
                ..blank(run_id, solver, aux, n).with_times(&run.times)
            });
        }
    }
    if run.converged() {
        if let Some(last) = out.last_mut() {
            last.converged = true;
        }
    }
    out
}

/// Rows for a Newton run, one per step. Newton has no `ħ`; the whole step
/// time is reported as solve time apart from setup and factorization.
pub fn newton_records(run_id: &str, n: usize, run: &NewtonRun) -> Vec<BenchRecord> {
    let steps = run.steps().max(1) as f64;
    let mut out: Vec<BenchRecord> = run
        .step_times
        .iter()
        .enumerate()
        .map(|(i, total)| {
            // spread setup and factorization evenly; the rest is solve
            let frac = (i + 1) as f64 / steps;
            let setup = run.times.setup.as_secs_f64() * frac;
            let factor = run.times.factorize.as_secs_f64() * frac;
            BenchRecord {
                iter: i + 1,
                residual: run.residual_trace[i + 1],
                t_setup_s: setup,
                t_factor_s: factor,
                t_solve_s: (total.as_secs_f64() - setup - factor).max(0.0),
                ..blank(run_id, "NEWTON", "-", n)
            }
        })
        .collect();
    if run.converged {
        if let Some(last) = out.last_mut() {
            last.converged = true;
        }
    }
    out
}

/// Writes `# comment` then the header and rows.
pub fn write_csv(path: &Path, comment: &str, records: &[BenchRecord]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# {comment}")?;
    let mut w = csv::Writer::from_writer(file);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file produced by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?
        .deserialize()
        .collect()
}
