//! Per-step observables, the run driver and the convergence harness.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::models::ModelSpec;
use crate::spectral::{Field, Grid2D};
use crate::timestep::{Correction, CorrectionRecord, Scheme, SchemeConfig, StepReport, StepState, Stepper};

/// `m = ∫ φ dA`
pub fn mass(phi: &Field) -> f64 {
    phi.integral()
}

/// `W = |Ω|^{-1/2} ‖φ − φ̄‖`
pub fn roughness(phi: &Field) -> f64 {
    let mean = phi.mean();
    (phi.map(|v| v - mean).norm_sq() / phi.grid().area()).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub t: f64,
    pub e_orig: f64,
    pub e_mod: f64,
    pub mass: f64,
    pub lambda: Option<f64>,
    pub xi: Option<f64>,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    /// `‖Q(φⁿ)‖² / ‖qⁿ‖²`; absent when `qⁿ ≡ 0`.
    pub ratio: Option<f64>,
    pub roughness: f64,
    pub lin_iters: usize,
    pub clamped: bool,
}

impl TraceRow {
    /// `|λ − 1|`, zero for steps without an EOP correction.
    pub fn lambda_defect(&self) -> f64 {
        self.lambda.map_or(0.0, |l| (l - 1.0).abs())
    }
}

/// Observables of a state after a step (`report = None` for the initial row).
pub fn observe(scheme: &Scheme, s: &StepState, report: Option<&StepReport>) -> Result<TraceRow> {
    let model = scheme.model();
    let q_exact = model.quadratize(s.phi())?;
    let q_norm = s.q().norm_sq();
    let ratio = if q_norm > 0.0 { Some(q_exact.norm_sq() / q_norm) } else { None };
    let record = report.map_or(CorrectionRecord::Baseline, |r| r.record);
    Ok(TraceRow {
        n: s.n(),
        t: s.n() as f64 * scheme.config().tau,
        e_orig: model.original_energy(s.phi()),
        e_mod: scheme.modified_energy(s),
        mass: mass(s.phi()),
        lambda: record.lambda(),
        xi: record.xi(),
        e1: record.e1(),
        e2: record.e2(),
        ratio,
        roughness: roughness(s.phi()),
        lin_iters: report.map_or(0, |r| r.lin_iters),
        clamped: record.clamped(),
    })
}

/// Runs a scheme from `phi0` to its final time, recording every
/// `trace_every`-th row (row 0 and the final row always). `on_step` sees each
/// new state.
pub fn simulate(
    scheme: &Scheme,
    phi0: &Field,
    trace_every: usize,
    mut on_step: impl FnMut(&StepState, &TraceRow) -> Result<()>,
) -> Result<(StepState, Vec<TraceRow>)> {
    let steps = scheme.config().steps()?;
    let mut state = scheme.init_state(phi0)?;
    let first = observe(scheme, &state, None)?;
    on_step(&state, &first)?;
    let mut rows = vec![first];
    for k in 1..=steps {
        let report = scheme.advance(&mut state)?;
        let row = observe(scheme, &state, Some(&report))?;
        on_step(&state, &row)?;
        if trace_every > 0 && (k % trace_every == 0 || k == steps) {
            rows.push(row);
        }
    }
    Ok((state, rows))
}

/// Runs to the final time without a trace.
pub fn final_state(scheme: &Scheme, phi0: &Field) -> Result<StepState> {
    let steps = scheme.config().steps()?;
    let mut state = scheme.init_state(phi0)?;
    for _ in 0..steps {
        scheme.advance(&mut state)?;
    }
    Ok(state)
}

/// Fixed problem data for a convergence study.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: ModelSpec,
    pub grid: Arc<Grid2D>,
    pub phi0: Field,
    pub stepper: Stepper,
    pub correction: Correction,
    pub t_final: f64,
    pub lin_tol: f64,
    pub lin_maxit: usize,
}

impl Scenario {
    pub fn scheme(&self, stepper: Stepper, correction: Correction, tau: f64) -> Result<Scheme> {
        let cfg = SchemeConfig {
            stepper,
            correction,
            tau,
            t_final: self.t_final,
            lin_tol: self.lin_tol,
            lin_maxit: self.lin_maxit,
        };
        Scheme::new(self.model, Arc::clone(&self.grid), cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub err_phi: f64,
    pub err_q: f64,
    /// Observed order against the previous row.
    pub rate_phi: Option<f64>,
    pub rate_q: Option<f64>,
}

fn rate(e_prev: f64, e: f64, tau_prev: f64, tau: f64) -> f64 {
    (e_prev / e).ln() / (tau_prev / tau).ln()
}

/// Final state of the EOP/CN reference run at `ref_tau`.
pub fn reference_state(scenario: &Scenario, ref_tau: f64) -> Result<StepState> {
    final_state(&scenario.scheme(Stepper::Cn, Correction::EnergyOpt, ref_tau)?, &scenario.phi0)
}

fn error_table(taus: &[f64], finals: &[StepState], reference: &StepState) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(taus.len());
    for (&tau, state) in taus.iter().zip(finals) {
        let err_phi = (state.phi() - reference.phi()).norm();
        let err_q = (state.q() - reference.q()).norm();
        let (rate_phi, rate_q) = match rows.last() {
            Some(prev) => (
                Some(rate(prev.err_phi, err_phi, prev.tau, tau)),
                Some(rate(prev.err_q, err_q, prev.tau, tau)),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow { tau, err_phi, err_q, rate_phi, rate_q });
    }
    rows
}

fn run_all(jobs: &[Scheme], phi0: &Field) -> Result<Vec<StepState>> {
    jobs.par_iter().map(|s| final_state(s, phi0)).collect()
}

/// Errors at the final time against a precomputed reference, in the order of
/// `taus`; cases run in parallel.
pub fn converge_against(scenario: &Scenario, taus: &[f64], reference: &StepState) -> Result<Vec<ConvergenceRow>> {
    let jobs: Vec<Scheme> =
        taus.iter().map(|&tau| scenario.scheme(scenario.stepper, scenario.correction, tau)).collect::<Result<_>>()?;
    let finals = run_all(&jobs, &scenario.phi0)?;
    Ok(error_table(taus, &finals, reference))
}

/// Errors at the final time against an EOP/CN reference at `ref_tau`.
pub fn converge(scenario: &Scenario, taus: &[f64], ref_tau: f64) -> Result<Vec<ConvergenceRow>> {
    let min_tau = taus.iter().copied().fold(f64::INFINITY, f64::min);
    if !(ref_tau > 0.0 && ref_tau <= min_tau) {
        return Err(crate::Error::InvalidScheme(format!(
            "reference tau {ref_tau} must be positive and no larger than the smallest tau {min_tau}"
        )));
    }
    let mut jobs = vec![scenario.scheme(Stepper::Cn, Correction::EnergyOpt, ref_tau)?];
    for &tau in taus {
        jobs.push(scenario.scheme(scenario.stepper, scenario.correction, tau)?);
    }
    let finals = run_all(&jobs, &scenario.phi0)?;
    let (reference, runs) = finals.split_first().expect("reference job present");
    Ok(error_table(taus, runs, reference))
}
