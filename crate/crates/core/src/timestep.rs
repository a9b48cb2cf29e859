//! Linear IEQ steppers (BDF1, BDF2, Crank-Nicolson) and the post-step
//! corrections of the auxiliary variable: relaxation (REQ) and energy
//! optimization (EOP).
//!
//! Step 1 eliminates the predicted auxiliary variable `q̂` analytically and
//! solves one linear system in `φⁿ⁺¹`:
//!
//! ```text
//! (α/τ)φ + θ·G(Lφ + N D φ) = rhs
//! ```
//!
//! with `θ = ½` for CN and `1` for BDFk, `N`/`D` the model's coupling
//! operators frozen at the extrapolated state. Step 2 replaces `q̂` by a
//! corrected `qⁿ⁺¹` that keeps the scheme's Lyapunov functional
//! non-increasing while staying as close as possible to `Q(φⁿ⁺¹)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linsolve::{self, LinearProblem};
use crate::models::{CouplingField, ModelSpec};
use crate::spectral::{Field, Grid2D, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stepper {
    Bdf1,
    Bdf2,
    Cn,
}

impl Stepper {
    pub fn name(self) -> &'static str {
        match self {
            Stepper::Bdf1 => "bdf1",
            Stepper::Bdf2 => "bdf2",
            Stepper::Cn => "cn",
        }
    }

    /// Leading coefficient `α` of the time difference.
    pub fn alpha(self) -> f64 {
        match self {
            Stepper::Bdf2 => 1.5,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stepper {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bdf1" => Ok(Stepper::Bdf1),
            "bdf2" => Ok(Stepper::Bdf2),
            "cn" => Ok(Stepper::Cn),
            other => Err(format!("unknown stepper '{other}' (expected bdf1, bdf2 or cn)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Correction {
    /// Keep `q̂`.
    Baseline,
    /// Relaxation with slack `η ∈ [0, 1]`.
    Relax(f64),
    /// Energy-optimal rescaling.
    EnergyOpt,
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::Baseline => f.write_str("baseline"),
            Correction::Relax(eta) => write!(f, "relax:{eta}"),
            Correction::EnergyOpt => f.write_str("eop"),
        }
    }
}

impl FromStr for Correction {
    type Err = String;
    /// Accepts `baseline`, `eop`, `relax` (η = 0.5) and `relax:<η>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "baseline" => Ok(Correction::Baseline),
            "eop" => Ok(Correction::EnergyOpt),
            "relax" => Ok(Correction::Relax(0.5)),
            _ => {
                let eta = lower
                    .strip_prefix("relax:")
                    .ok_or_else(|| format!("unknown correction '{s}' (expected baseline, relax[:eta] or eop)"))?;
                let eta: f64 = eta.parse().map_err(|_| format!("invalid eta '{eta}'"))?;
                if !(0.0..=1.0).contains(&eta) {
                    return Err(format!("eta = {eta} outside [0, 1]"));
                }
                Ok(Correction::Relax(eta))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub stepper: Stepper,
    pub correction: Correction,
    pub tau: f64,
    pub t_final: f64,
    pub lin_tol: f64,
    pub lin_maxit: usize,
}

impl SchemeConfig {
    pub fn new(stepper: Stepper, correction: Correction, tau: f64, t_final: f64) -> Self {
        Self {
            stepper,
            correction,
            tau,
            t_final,
            lin_tol: linsolve::DEFAULT_TOL,
            lin_maxit: linsolve::DEFAULT_MAXIT,
        }
    }

    /// Number of steps to reach `t_final`; `t_final` must be a whole multiple of `τ`.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if n.is_nan() || n < 0.0 || (ratio - n).abs() > 1e-8 * n.max(1.0) {
            return Err(Error::InvalidScheme(format!(
                "T = {} is not a whole number of steps of tau = {}",
                self.t_final, self.tau
            )));
        }
        Ok(n as usize)
    }
}

/// Complete time-marching state.
#[derive(Clone, Debug)]
pub struct StepState {
    n: usize,
    phi: Field,
    phi_prev: Field,
    q: Field,
    q_prev: Field,
    linear_energy: f64,
    q_energy: f64,
}

impl StepState {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn phi_prev(&self) -> &Field {
        &self.phi_prev
    }

    pub fn q(&self) -> &Field {
        &self.q
    }

    pub fn q_prev(&self) -> &Field {
        &self.q_prev
    }

    /// Cached `½(Lφⁿ, φⁿ)`.
    pub fn linear_energy(&self) -> f64 {
        self.linear_energy
    }

    /// Cached `w‖qⁿ‖²`.
    pub fn q_energy(&self) -> f64 {
        self.q_energy
    }
}

/// Per-step record of the auxiliary-variable correction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrectionRecord {
    Baseline,
    /// `e1`/`e2` are the weighted `E₁`, `E₂` (`Ē₁`, `Ē₂` for BDF2).
    EnergyOpt { lambda: f64, e1: f64, e2: f64, clamped: bool },
    Relax { xi: f64, a: f64, b: f64, c: f64, clamped: bool },
}

impl CorrectionRecord {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            CorrectionRecord::EnergyOpt { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }

    pub fn xi(&self) -> Option<f64> {
        match self {
            CorrectionRecord::Relax { xi, .. } => Some(*xi),
            _ => None,
        }
    }

    pub fn e1(&self) -> Option<f64> {
        match self {
            CorrectionRecord::EnergyOpt { e1, .. } => Some(*e1),
            _ => None,
        }
    }

    pub fn e2(&self) -> Option<f64> {
        match self {
            CorrectionRecord::EnergyOpt { e2, .. } => Some(*e2),
            _ => None,
        }
    }

    pub fn clamped(&self) -> bool {
        match self {
            CorrectionRecord::Baseline => false,
            CorrectionRecord::EnergyOpt { clamped, .. } | CorrectionRecord::Relax { clamped, .. } => *clamped,
        }
    }
}

/// Output of Step 1.
#[derive(Clone, Debug)]
pub struct BaselineStep {
    pub phi: Field,
    pub q_hat: Field,
    /// `τ(M𝒢μ, μ)` at the scheme's evaluation point of `μ`.
    pub mu_work: f64,
    pub lin_iters: usize,
    pub lin_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub record: CorrectionRecord,
    pub lin_iters: usize,
    pub lin_residual: f64,
    pub mu_work: f64,
}

/// A model bound to a grid and scheme settings, with cached symbols.
#[derive(Clone, Debug)]
pub struct Scheme {
    model: ModelSpec,
    grid: Arc<Grid2D>,
    cfg: SchemeConfig,
    l_sym: Symbol,
    g_sym: Symbol,
}

fn combine(terms: &[(f64, &Field)]) -> Field {
    let mut out = terms[0].1 * terms[0].0;
    for (a, f) in &terms[1..] {
        out.axpy(*a, f);
    }
    out
}

/// EOP rule for `λ² E₁ ≤ E₂`: `λ = 1` when admissible, otherwise the
/// admissible value closest to 1. Works for either sign of the weight.
pub fn eop_lambda(e1: f64, e2: f64) -> (f64, bool) {
    if e1 == 0.0 || e1 <= e2 {
        return (1.0, false);
    }
    let ratio = e2 / e1;
    if ratio < 0.0 {
        // only reachable with a positive weight and E₂ < 0 (round-off)
        (0.0, true)
    } else {
        (ratio.sqrt(), false)
    }
}

/// Smallest `ξ ∈ [0, 1]` with `aξ² + bξ + c ≤ 0`, given `a + b + c ≤ 0`.
pub fn relax_xi(a: f64, b: f64, c: f64) -> (f64, bool) {
    if a == 0.0 && b == 0.0 || c <= 0.0 {
        return (0.0, false);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return (1.0, true);
    }
    let denom = -b + disc.sqrt();
    if denom.is_nan() || denom <= 0.0 {
        return (1.0, true);
    }
    let xi = 2.0 * c / denom;
    if xi > 1.0 {
        (1.0, true)
    } else {
        (xi, false)
    }
}

impl Scheme {
    pub fn new(model: ModelSpec, grid: Arc<Grid2D>, cfg: SchemeConfig) -> Result<Self> {
        if !(cfg.tau.is_finite() && cfg.tau > 0.0) {
            return Err(Error::InvalidScheme(format!("tau must be positive, got {}", cfg.tau)));
        }
        if !(cfg.t_final.is_finite() && cfg.t_final >= 0.0) {
            return Err(Error::InvalidScheme(format!("T must be non-negative, got {}", cfg.t_final)));
        }
        if let Correction::Relax(eta) = cfg.correction {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidScheme(format!("eta = {eta} outside [0, 1]")));
            }
            if cfg.stepper == Stepper::Bdf2 {
                return Err(Error::InvalidScheme("relaxation is offered for cn and bdf1 only".into()));
            }
        }
        if cfg.lin_tol.is_nan() || cfg.lin_tol <= 0.0 || cfg.lin_maxit == 0 {
            return Err(Error::InvalidScheme("lin_tol and lin_maxit must be positive".into()));
        }
        let l_sym = model.l_symbol(&grid);
        let g_sym = model.g_symbol(&grid);
        Ok(Self { model, grid, cfg, l_sym, g_sym })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn l_symbol(&self) -> &[f64] {
        &self.l_sym
    }

    pub fn g_symbol(&self) -> &[f64] {
        &self.g_sym
    }

    fn linear_energy(&self, phi: &Field) -> f64 {
        0.5 * self.grid.forward(phi).quadratic_form(&self.l_sym)
    }

    /// `q⁰ = Q(φ⁰)`, histories bootstrapped with `φ⁻¹ = φ⁰`, `q⁻¹ = q⁰`.
    pub fn init_state(&self, phi0: &Field) -> Result<StepState> {
        if !phi0.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let phi = self.grid.project(phi0.clone());
        let q = self.model.quadratize(&phi)?;
        self.state_from_parts(0, phi.clone(), phi, q.clone(), q)
    }

    /// Builds a state from explicit histories.
    pub fn state_from_parts(
        &self,
        n: usize,
        phi: Field,
        phi_prev: Field,
        q: Field,
        q_prev: Field,
    ) -> Result<StepState> {
        for f in [&phi, &phi_prev, &q, &q_prev] {
            if !f.grid().same_as(&self.grid) {
                return Err(Error::GridMismatch);
            }
        }
        let linear_energy = self.linear_energy(&phi);
        let q_energy = self.model.q_weight() * q.norm_sq();
        Ok(StepState { n, phi, phi_prev, q, q_prev, linear_energy, q_energy })
    }

    /// Modified energy of the state from its cached terms.
    pub fn modified_energy(&self, s: &StepState) -> f64 {
        s.linear_energy + s.q_energy + self.model.energy_offset(&self.grid)
    }

    /// Stepper used to advance from step `n`: BDF2 takes a BDF1 first step.
    pub fn stepper_at(&self, n: usize) -> Stepper {
        match self.cfg.stepper {
            Stepper::Bdf2 if n == 0 => Stepper::Bdf1,
            other => other,
        }
    }

    /// The configured stepper's discrete Lyapunov functional at `s`.
    pub fn lyapunov(&self, s: &StepState) -> f64 {
        self.lyapunov_for(self.cfg.stepper, s)
    }

    /// Discrete Lyapunov functional of `stepper` at `s`.
    pub fn lyapunov_for(&self, stepper: Stepper, s: &StepState) -> f64 {
        let offset = self.model.energy_offset(&self.grid);
        match stepper {
            Stepper::Bdf1 | Stepper::Cn => s.linear_energy + s.q_energy + offset,
            Stepper::Bdf2 => {
                let w = self.model.q_weight();
                let phi_ext = combine(&[(2.0, &s.phi), (-1.0, &s.phi_prev)]);
                let q_ext = combine(&[(2.0, &s.q), (-1.0, &s.q_prev)]);
                0.5 * (s.linear_energy + self.linear_energy(&phi_ext))
                    + 0.5 * w * (s.q.norm_sq() + q_ext.norm_sq())
                    + offset
            }
        }
    }

    /// `(A(φ), A(q), B(φ))` for the stepper advancing `s`.
    fn history(&self, s: &StepState) -> (Field, Field, Field) {
        match self.stepper_at(s.n) {
            Stepper::Bdf1 => (s.phi.clone(), s.q.clone(), s.phi.clone()),
            Stepper::Bdf2 => (
                combine(&[(2.0, &s.phi), (-0.5, &s.phi_prev)]),
                combine(&[(2.0, &s.q), (-0.5, &s.q_prev)]),
                combine(&[(2.0, &s.phi), (-1.0, &s.phi_prev)]),
            ),
            Stepper::Cn => (s.phi.clone(), s.q.clone(), combine(&[(1.5, &s.phi), (-0.5, &s.phi_prev)])),
        }
    }

    /// `G(L φ + extra)` evaluated spectrally.
    fn mobility_of(&self, phi: &Field, extra: &Field, l_scale: f64) -> Field {
        let mut a = self.grid.forward(phi);
        let b = self.grid.forward(extra);
        for (((c, e), l), g) in a.coeffs_mut().iter_mut().zip(b.coeffs()).zip(&self.l_sym).zip(&self.g_sym) {
            *c = (*c * (l_scale * l) + e) * *g;
        }
        self.grid.inverse(&a)
    }

    /// The Step-1 operator of `stepper` in `φⁿ⁺¹` with the coupling frozen at `c`.
    pub fn step_operator<'a>(&'a self, stepper: Stepper, c: &'a CouplingField) -> impl Fn(&Field) -> Field + 'a {
        let alpha = stepper.alpha();
        let theta = if stepper == Stepper::Cn { 0.5 } else { 1.0 };
        let inv_tau = 1.0 / self.cfg.tau;
        move |phi: &Field| {
            let nd = c.couple(&c.evolve(phi));
            let mut out = self.mobility_of(phi, &nd, 1.0);
            out.scale(theta);
            out.axpy(alpha * inv_tau, phi);
            out
        }
    }

    /// Preconditioner symbol `α/τ + θ·G·(L + m̄)`, `m̄` the mean multiplier of
    /// the frozen coupling.
    pub fn precond_symbol(&self, stepper: Stepper, c: &CouplingField) -> Symbol {
        let alpha = stepper.alpha();
        let theta = if stepper == Stepper::Cn { 0.5 } else { 1.0 };
        let m = c.mean_multiplier();
        self.g_sym.iter().zip(&self.l_sym).map(|(g, l)| alpha / self.cfg.tau + theta * g * (l + m)).collect()
    }

    /// Pointwise weight `(α/τ + θGm(x)) / (α/τ + θGm̄)` of the preconditioner
    /// sandwich; only when `G` is a constant and the coupling is scalar.
    pub fn precond_weight(&self, stepper: Stepper, c: &CouplingField) -> Option<Field> {
        let g0 = self.g_sym[0];
        if g0 == 0.0 || self.g_sym.iter().any(|&g| g != g0) {
            return None;
        }
        let m = c.multiplier()?;
        let shift = stepper.alpha() / self.cfg.tau;
        let theta = if stepper == Stepper::Cn { 0.5 } else { 1.0 };
        let mean = shift + theta * g0 * m.mean();
        Some(m.map(|v| (shift + theta * g0 * v) / mean))
    }

    /// Coupling field at the extrapolated state `B(φ)`.
    pub fn extrapolated_coupling(&self, s: &StepState) -> Result<CouplingField> {
        let (_, _, b) = self.history(s);
        self.model.coupling(&b)
    }

    /// Right-hand side of the Step-1 system.
    pub fn step_rhs(&self, s: &StepState, c: &CouplingField) -> Field {
        let tau = self.cfg.tau;
        let (phi_a, q_a, _) = self.history(s);
        let stepper = self.stepper_at(s.n);
        match stepper {
            Stepper::Cn => {
                // φⁿ/τ − G(½Lφⁿ + N(qⁿ) − ½ N D φⁿ)
                let nq = c.couple(&s.q);
                let ndp = c.couple(&c.evolve(&s.phi));
                let extra = combine(&[(1.0, &nq), (-0.5, &ndp)]);
                let mut rhs = self.mobility_of(&s.phi, &extra, 0.5);
                rhs.scale(-1.0);
                rhs.axpy(1.0 / tau, &s.phi);
                rhs
            }
            Stepper::Bdf1 | Stepper::Bdf2 => {
                // A(φ)/τ − (1/α) G N(A(q) − D A(φ))
                let alpha = stepper.alpha();
                let resid = combine(&[(1.0, &q_a), (-1.0, &c.evolve(&phi_a))]);
                let n = c.couple(&resid);
                let zero = Field::zeros(&self.grid);
                let mut rhs = self.mobility_of(&zero, &n, 0.0);
                rhs.scale(-1.0 / alpha);
                rhs.axpy(1.0 / tau, &phi_a);
                rhs
            }
        }
    }

    /// Step 1: linear solve for `φⁿ⁺¹` and analytic recovery of `q̂ⁿ⁺¹`.
    pub fn step_baseline(&self, s: &StepState) -> Result<BaselineStep> {
        let tau = self.cfg.tau;
        let stepper = self.stepper_at(s.n);
        let alpha = stepper.alpha();
        let (phi_a, q_a, b) = self.history(s);
        let c = self.model.coupling(&b)?;
        let rhs = self.step_rhs(s, &c);
        let apply = self.step_operator(stepper, &c);
        let precond = self.precond_symbol(stepper, &c);
        let weight = self.precond_weight(stepper, &c);
        let sol = linsolve::solve(&LinearProblem {
            apply: &apply,
            precond_symbol: &precond,
            precond_weight: weight.as_ref(),
            rhs: &rhs,
            tol: self.cfg.lin_tol,
            maxit: self.cfg.lin_maxit,
        })?;
        let mut phi = sol.x;
        if !phi.is_finite() {
            return Err(Error::NonFinite { step: s.n + 1 });
        }
        if self.g_sym[0] == 0.0 {
            // the zero mode decouples: α·mean(φⁿ⁺¹) = mean(A(φ))
            let shift = phi_a.mean() / alpha - phi.mean();
            phi.values_mut().iter_mut().for_each(|v| *v += shift);
        }

        let (q_hat, mu) = match stepper {
            Stepper::Cn => {
                let dphi = combine(&[(1.0, &phi), (-1.0, &s.phi)]);
                let q_hat = combine(&[(1.0, &s.q), (1.0, &c.evolve(&dphi))]);
                let phi_mid = combine(&[(0.5, &phi), (0.5, &s.phi)]);
                let q_mid = combine(&[(0.5, &q_hat), (0.5, &s.q)]);
                (q_hat, self.chemical_potential(&phi_mid, &q_mid, &c))
            }
            Stepper::Bdf1 | Stepper::Bdf2 => {
                let dphi = combine(&[(alpha, &phi), (-1.0, &phi_a)]);
                let q_hat = combine(&[(1.0 / alpha, &q_a), (1.0 / alpha, &c.evolve(&dphi))]);
                let mu = self.chemical_potential(&phi, &q_hat, &c);
                (q_hat, mu)
            }
        };
        let mu_work = tau * self.grid.forward(&mu).quadratic_form(&self.g_sym);
        Ok(BaselineStep { phi, q_hat, mu_work, lin_iters: sol.iterations, lin_residual: sol.residual })
    }

    /// `μ = Lφ + N(q)` with the coupling frozen at `c`.
    pub fn chemical_potential(&self, phi: &Field, q: &Field, c: &CouplingField) -> Field {
        let mut s = self.grid.forward(phi);
        s.multiply(&self.l_sym);
        let mut mu = self.grid.inverse(&s);
        mu.axpy(1.0, &c.couple(q));
        mu
    }

    /// REQ: `qⁿ⁺¹ = ξq̂ + (1−ξ)Q(φⁿ⁺¹)` with the smallest admissible `ξ`.
    pub fn correct_relax(&self, step: &BaselineStep, eta: f64) -> Result<(Field, CorrectionRecord)> {
        let w = self.model.q_weight();
        let q_new = self.model.quadratize(&step.phi)?;
        let diff = combine(&[(1.0, &step.q_hat), (-1.0, &q_new)]);
        let a = w * diff.norm_sq();
        let b = 2.0 * w * diff.inner(&q_new);
        let c = -eta * step.mu_work + w * q_new.norm_sq() - w * step.q_hat.norm_sq();
        let (xi, clamped) = relax_xi(a, b, c);
        let q = combine(&[(xi, &step.q_hat), (1.0 - xi, &q_new)]);
        Ok((q, CorrectionRecord::Relax { xi, a, b, c, clamped }))
    }

    /// EOP: `qⁿ⁺¹ = λQ(φⁿ⁺¹)` (CN/BDF1) or `λ(Q − ⅖qⁿ) + ⅖qⁿ` (BDF2).
    pub fn correct_eop(&self, s: &StepState, phi_new: &Field) -> Result<(Field, CorrectionRecord)> {
        let w = self.model.q_weight();
        let q_new = self.model.quadratize(phi_new)?;
        let lin_new = self.linear_energy(phi_new);
        match self.stepper_at(s.n) {
            Stepper::Bdf1 | Stepper::Cn => {
                let e1 = w * q_new.norm_sq();
                let e2 = s.linear_energy + s.q_energy - lin_new;
                let (lambda, clamped) = eop_lambda(e1, e2);
                Ok((&q_new * lambda, CorrectionRecord::EnergyOpt { lambda, e1, e2, clamped }))
            }
            Stepper::Bdf2 => {
                let shifted = combine(&[(1.0, &q_new), (-0.4, &s.q)]);
                let e1 = w * shifted.norm_sq();
                let phi_ext = combine(&[(2.0, &s.phi), (-1.0, &s.phi_prev)]);
                let phi_new_ext = combine(&[(2.0, phi_new), (-1.0, &s.phi)]);
                let q_ext = combine(&[(2.0, &s.q), (-1.0, &s.q_prev)]);
                // ½(Lv, v) terms carry a factor 2 relative to (Lv, v)
                let e2 = 0.2
                    * (s.linear_energy + self.linear_energy(&phi_ext)
                        - lin_new
                        - self.linear_energy(&phi_new_ext))
                    + w * (4.0 / 25.0 * s.q.norm_sq() + 0.2 * q_ext.norm_sq());
                let (lambda, clamped) = eop_lambda(e1, e2);
                let q = combine(&[(lambda, &shifted), (0.4, &s.q)]);
                Ok((q, CorrectionRecord::EnergyOpt { lambda, e1, e2, clamped }))
            }
        }
    }

    /// Applies a correction to a Step-1 result.
    pub fn correct(&self, s: &StepState, step: &BaselineStep) -> Result<(Field, CorrectionRecord)> {
        match self.cfg.correction {
            Correction::Baseline => Ok((step.q_hat.clone(), CorrectionRecord::Baseline)),
            Correction::Relax(eta) => self.correct_relax(step, eta),
            Correction::EnergyOpt => self.correct_eop(s, &step.phi),
        }
    }

    /// Rotates the histories in.
    pub fn commit(&self, s: &mut StepState, phi: Field, q: Field) {
        let old_phi = std::mem::replace(&mut s.phi, phi);
        let old_q = std::mem::replace(&mut s.q, q);
        s.phi_prev = old_phi;
        s.q_prev = old_q;
        s.n += 1;
        s.linear_energy = self.linear_energy(&s.phi);
        s.q_energy = self.model.q_weight() * s.q.norm_sq();
    }

    /// Step 1 + Step 2 + history rotation.
    pub fn advance(&self, s: &mut StepState) -> Result<StepReport> {
        let step = self.step_baseline(s)?;
        let (q, record) = self.correct(s, &step)?;
        if !q.is_finite() {
            return Err(Error::NonFinite { step: s.n + 1 });
        }
        let report =
            StepReport { record, lin_iters: step.lin_iters, lin_residual: step.lin_residual, mu_work: step.mu_work };
        self.commit(s, step.phi, q);
        Ok(report)
    }
}
