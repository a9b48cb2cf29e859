//! The `run`, `converge` and `compare` commands. Each writes its outputs
//! under the config's `out_dir` and returns a summary for the terminal.

use std::fs;
use std::path::{Path, PathBuf};

use gradflow::diagnostics::{self, ConvergenceRow, TraceRow};
use gradflow::io;
use gradflow::spectral::Field;
use gradflow::timestep::{Correction, Scheme, StepState, Stepper};
use rayon::prelude::*;

use crate::{CliError, RunConfig};

/// Default ratio `τ / τ_ref` of `compare` when no reference step is given.
pub const DEFAULT_REF_RATIO: usize = 10;

fn output<T>(r: gradflow::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Output)
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(e.into()))
}

/// Integrates `scheme` from `phi0` to its final time. Rows are kept every
/// `trace_every` steps (0 keeps only the first and last); row 0 and the last
/// completed step are always kept. On failure the rows gathered so far are
/// returned with the error.
pub fn integrate(
    scheme: &Scheme,
    phi0: &Field,
    trace_every: usize,
    mut on_state: impl FnMut(&StepState, usize) -> Result<(), CliError>,
) -> (Vec<TraceRow>, Option<CliError>) {
    let mut rows = Vec::new();
    let steps = match scheme.config().steps() {
        Ok(s) => s,
        Err(e) => return (rows, Some(CliError::from_setup(e))),
    };
    let mut state = match scheme.init_state(phi0) {
        Ok(s) => s,
        Err(e) => return (rows, Some(CliError::from_setup(e))),
    };
    let first = diagnostics::observe(scheme, &state, None);
    match first {
        Ok(row) => rows.push(row),
        Err(e) => return (rows, Some(CliError::Solver { step: 0, source: e })),
    }
    if let Err(e) = on_state(&state, steps) {
        return (rows, Some(e));
    }
    for k in 1..=steps {
        let row = scheme.advance(&mut state).and_then(|report| diagnostics::observe(scheme, &state, Some(&report)));
        let row = match row {
            Ok(r) => r,
            Err(e) => return (rows, Some(CliError::Solver { step: k, source: e })),
        };
        let keep = k == steps || (trace_every > 0 && k % trace_every == 0);
        let failed = on_state(&state, steps).err();
        if keep || failed.is_some() {
            rows.push(row);
        }
        if failed.is_some() {
            return (rows, failed);
        }
    }
    (rows, None)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub correction: Correction,
    pub trace: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub first: TraceRow,
    pub last: TraceRow,
}

pub fn snapshot_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("snapshot_{n:08}.gfs"))
}

/// `run`: one trajectory with the config's correction.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    run_with(cfg, cfg.correction, "trace.csv")
}

fn run_with(cfg: &RunConfig, correction: Correction, trace_name: &str) -> Result<RunSummary, CliError> {
    let grid = cfg.grid().map_err(CliError::from_setup)?;
    let scheme = cfg.scheme(&grid, correction).map_err(CliError::from_setup)?;
    let phi0 = cfg.initial_field(&grid);
    create_out_dir(&cfg.out_dir)?;
    let mut snapshots = Vec::new();
    let every = cfg.snapshot_every;
    let tau = cfg.tau;
    let (rows, failure) = integrate(&scheme, &phi0, cfg.trace_every, |state, steps| {
        let n = state.n();
        if every > 0 && (n % every == 0 || n == steps) {
            let path = snapshot_path(&cfg.out_dir, n);
            output(io::write_snapshot(&path, state.phi(), n as f64 * tau))?;
            snapshots.push(path);
        }
        Ok(())
    });
    let trace = cfg.out_dir.join(trace_name);
    output(io::write_trace(&trace, &rows))?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(RunSummary {
        correction,
        trace,
        snapshots,
        first: rows.first().cloned().expect("row 0 recorded"),
        last: rows.last().cloned().expect("row 0 recorded"),
    })
}

pub const CONVERGENCE_HEADER: &str = "tau,err_phi,err_q,rate_phi,rate_q";

pub fn format_convergence(rows: &[ConvergenceRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{},{}\n",
            r.tau,
            r.err_phi,
            r.err_q,
            opt(r.rate_phi),
            opt(r.rate_q)
        ));
    }
    out
}

/// `converge`: final-time errors of the config's scheme at each `tau`
/// against an EOP/CN reference at `ref_tau`. The table is written to
/// `out_dir/convergence.csv`.
pub fn converge(cfg: &RunConfig, taus: &[f64], ref_tau: f64) -> Result<Vec<ConvergenceRow>, CliError> {
    if taus.is_empty() {
        return Err(CliError::Usage("--tau-list is empty".into()));
    }
    if let Some(t) = taus.iter().chain([&ref_tau]).find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(CliError::Usage(format!("time steps must be positive, got {t}")));
    }
    let scenario = cfg.scenario().map_err(CliError::from_setup)?;
    for &tau in taus {
        scenario.scheme(scenario.stepper, scenario.correction, tau).map_err(CliError::from_setup)?;
    }
    let rows = diagnostics::converge(&scenario, taus, ref_tau).map_err(CliError::from_setup)?;
    create_out_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("convergence.csv");
    fs::write(&path, format_convergence(&rows)).map_err(|e| CliError::Output(e.into()))?;
    Ok(rows)
}

/// File-name form of a correction label (`relax:0.5` → `relax_0.5`).
pub fn label_slug(c: &Correction) -> String {
    c.to_string().replace(':', "_")
}

#[derive(Clone, Debug)]
pub struct CompareSummary {
    pub runs: Vec<RunSummary>,
    /// Joint `|E_mod − E_ref|` table; absent for a single correction.
    pub joint: Option<PathBuf>,
    /// Largest `|E_mod − E_ref|` per run, in the order of `runs`.
    pub max_gap: Vec<f64>,
}

/// Original energy of the EOP/CN reference at every `stride`-th step.
fn reference_energy(cfg: &RunConfig, ref_tau: f64, stride: usize) -> Result<Vec<f64>, CliError> {
    let grid = cfg.grid().map_err(CliError::from_setup)?;
    let mut sc = cfg.scheme_config(Correction::EnergyOpt);
    sc.stepper = Stepper::Cn;
    sc.tau = ref_tau;
    let scheme = Scheme::new(cfg.model, grid.clone(), sc).map_err(CliError::from_setup)?;
    let (rows, failure) = integrate(&scheme, &cfg.initial_field(&grid), stride, |_, _| Ok(()));
    match failure {
        Some(e) => Err(e),
        None => Ok(rows.iter().map(|r| r.e_orig).collect()),
    }
}

pub const COMPARE_PREFIX: &str = "n,t,E_ref";

/// `compare`: one trajectory per correction from the same initial field and
/// Step-1 settings, each traced to `out_dir/trace_<label>.csv`, plus
/// `out_dir/compare.csv` with `|E_mod − E_ref|` per correction, `E_ref` the
/// original energy of an EOP/CN reference at `ref_tau` (default
/// `τ / DEFAULT_REF_RATIO`). A single correction degenerates to `run`.
pub fn compare(cfg: &RunConfig, corrections: &[Correction], ref_tau: Option<f64>) -> Result<CompareSummary, CliError> {
    match corrections {
        [] => return Err(CliError::Usage("--corrections is empty".into())),
        [single] => {
            let run = run_with(cfg, *single, "trace.csv")?;
            return Ok(CompareSummary { runs: vec![run], joint: None, max_gap: Vec::new() });
        }
        _ => {}
    }
    let ref_tau = ref_tau.unwrap_or(cfg.tau / DEFAULT_REF_RATIO as f64);
    let ratio = cfg.tau / ref_tau;
    let stride = ratio.round() as usize;
    if ref_tau.is_nan() || ref_tau <= 0.0 || stride == 0 || (stride as f64 - ratio).abs() > 1e-9 * ratio {
        return Err(CliError::Usage(format!("tau = {} must be an integer multiple of --ref-tau = {ref_tau}", cfg.tau)));
    }
    let grid = cfg.grid().map_err(CliError::from_setup)?;
    for &c in corrections {
        cfg.scheme(&grid, c).map_err(CliError::from_setup)?;
    }
    create_out_dir(&cfg.out_dir)?;

    let (reference, runs) = rayon::join(
        || reference_energy(cfg, ref_tau, stride),
        || {
            corrections
                .par_iter()
                .map(|&c| run_with(cfg, c, &format!("trace_{}.csv", label_slug(&c))))
                .collect::<Vec<_>>()
        },
    );
    let runs: Vec<RunSummary> = runs.into_iter().collect::<Result<_, _>>()?;
    let e_ref = reference?;

    let traces: Vec<Vec<TraceRow>> =
        runs.iter().map(|r| output(io::read_trace(&r.trace))).collect::<Result<_, _>>()?;
    let mut text = String::from(COMPARE_PREFIX);
    for c in corrections {
        text.push_str(&format!(",gap_{c}"));
    }
    text.push('\n');
    let mut max_gap = vec![0.0f64; runs.len()];
    for (i, row) in traces[0].iter().enumerate() {
        let e = e_ref[row.n];
        text.push_str(&format!("{},{:.16e},{:.16e}", row.n, row.t, e));
        for (j, trace) in traces.iter().enumerate() {
            let gap = (trace[i].e_mod - e).abs();
            max_gap[j] = max_gap[j].max(gap);
            text.push_str(&format!(",{gap:.16e}"));
        }
        text.push('\n');
    }
    let joint = cfg.out_dir.join("compare.csv");
    fs::write(&joint, text).map_err(|e| CliError::Output(e.into()))?;
    Ok(CompareSummary { runs, joint: Some(joint), max_gap })
}
