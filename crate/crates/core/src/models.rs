//! Gradient-flow models as data: linear symbol `L`, mobility symbol `M𝒢`,
//! bulk potential, quadratization `Q` and the coupling fields that tie the
//! auxiliary variable `q` to `φ`.
//!
//! Every model's modified energy has the form
//! `½(Lφ, φ) + w‖q‖² + offset` with `w = c_q · s_N`. The coupling term in the
//! chemical potential is `N(q)` and the auxiliary evolution is `q_t = D(φ_t)`,
//! with `N = 2w D*` so that the modified energy is dissipated exactly.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{self, Field, Grid2D, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Allen-Cahn, L² flow of the double-well energy.
    Ac,
    /// Cahn-Hilliard with linear stabilizer κ, H⁻¹ flow.
    Ch,
    /// Phase field crystal, H⁻¹ flow, `q = φ²`.
    Pfc,
    /// Thin-film epitaxy without slope selection, L² flow.
    Mbe,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ac => "ac",
            ModelKind::Ch => "ch",
            ModelKind::Pfc => "pfc",
            ModelKind::Mbe => "mbe",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(ModelKind::Ac),
            "ch" => Ok(ModelKind::Ch),
            "pfc" => Ok(ModelKind::Pfc),
            "mbe" => Ok(ModelKind::Mbe),
            other => Err(format!("unknown model '{other}' (expected ac, ch, pfc or mbe)")),
        }
    }
}

/// Whether the auxiliary variable evolves with `φ_t` or with `∇φ_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingRank {
    Scalar,
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Interface coefficient α₀ (AC/CH).
    pub alpha0: f64,
    /// Interface width (AC/CH), undercooling (PFC) or `ε` of the MBE surface energy.
    pub eps: f64,
    /// Mobility M.
    pub mobility: f64,
    /// CH stabilizer; zero for the other models.
    pub kappa: f64,
    /// PFC parameter.
    pub beta: f64,
    /// Quadratization shift C₀ (unused by PFC).
    pub c0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: ModelParams,
}

/// Coupling coefficients evaluated at an extrapolated state.
#[derive(Clone, Debug)]
pub enum CouplingField {
    /// `N(q) = s_N·q·g`, `D(ψ) = scale·h·ψ`.
    Scalar { g: Field, h: Field, scale: f64, s_n: f64 },
    /// `N(q) = ∇·(q h)`, `D(ψ) = h·∇ψ`.
    Gradient { hx: Field, hy: Field },
}

impl CouplingField {
    /// Linearized auxiliary increment `D(ψ)`.
    pub fn evolve(&self, psi: &Field) -> Field {
        match self {
            CouplingField::Scalar { h, scale, .. } => h.zip_map(psi, |a, b| scale * a * b),
            CouplingField::Gradient { hx, hy } => {
                let (px, py) = spectral::gradient(psi);
                let mut out = hx.zip_map(&px, |a, b| a * b);
                out.values_mut()
                    .iter_mut()
                    .zip(hy.values().iter().zip(py.values()))
                    .for_each(|(o, (a, b))| *o += a * b);
                out
            }
        }
    }

    /// Coupling term `N(q)` of the chemical potential, projected when the
    /// grid dealiases.
    pub fn couple(&self, q: &Field) -> Field {
        let out = match self {
            CouplingField::Scalar { g, s_n, .. } => q.zip_map(g, |a, b| s_n * a * b),
            CouplingField::Gradient { hx, hy } => {
                let fx = q.zip_map(hx, |a, b| a * b);
                let fy = q.zip_map(hy, |a, b| a * b);
                spectral::divergence(&fx, &fy).expect("coupling fields share the grid of q")
            }
        };
        let grid = Arc::clone(out.grid());
        grid.project(out)
    }

    /// Pointwise multiplier `m` with `N(D(ψ)) = m·ψ` for scalar couplings
    /// (non-negative for every model); `None` for gradient couplings.
    pub fn multiplier(&self) -> Option<Field> {
        match self {
            CouplingField::Scalar { g, h, scale, s_n } => Some(g.zip_map(h, |a, b| s_n * scale * a * b)),
            CouplingField::Gradient { .. } => None,
        }
    }

    /// Spatial mean of [`Self::multiplier`], zero for gradient couplings.
    pub fn mean_multiplier(&self) -> f64 {
        self.multiplier().map_or(0.0, |m| m.mean())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidScheme(format!("{name} must be positive, got {v}")))
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, params: ModelParams) -> Result<Self> {
        let p = &params;
        check_positive("M", p.mobility)?;
        check_positive("eps", p.eps)?;
        match kind {
            ModelKind::Ac | ModelKind::Ch => {
                check_positive("alpha0", p.alpha0)?;
                check_positive("C0", p.c0)?;
            }
            ModelKind::Pfc => check_positive("beta", p.beta)?,
            ModelKind::Mbe => check_positive("C0", p.c0)?,
        }
        if kind == ModelKind::Ch && !(p.kappa.is_finite() && p.kappa >= 0.0) {
            return Err(Error::InvalidScheme(format!("kappa must be non-negative, got {}", p.kappa)));
        }
        Ok(Self { kind, params })
    }

    pub fn allen_cahn(alpha0: f64, eps: f64, mobility: f64, c0: f64) -> Result<Self> {
        Self::new(ModelKind::Ac, ModelParams { alpha0, eps, mobility, kappa: 0.0, beta: 0.0, c0 })
    }

    pub fn cahn_hilliard(alpha0: f64, eps: f64, mobility: f64, kappa: f64, c0: f64) -> Result<Self> {
        Self::new(ModelKind::Ch, ModelParams { alpha0, eps, mobility, kappa, beta: 0.0, c0 })
    }

    pub fn pfc(eps: f64, beta: f64, mobility: f64) -> Result<Self> {
        Self::new(ModelKind::Pfc, ModelParams { alpha0: 0.0, eps, mobility, kappa: 0.0, beta, c0: 0.0 })
    }

    pub fn mbe(eps: f64, mobility: f64, c0: f64) -> Result<Self> {
        Self::new(ModelKind::Mbe, ModelParams { alpha0: 0.0, eps, mobility, kappa: 0.0, beta: 0.0, c0 })
    }

    /// Scale of the nonlinear coupling in μ.
    pub fn s_n(&self) -> f64 {
        match self.kind {
            ModelKind::Ac | ModelKind::Ch => self.params.alpha0 / (self.params.eps * self.params.eps),
            ModelKind::Pfc | ModelKind::Mbe => 1.0,
        }
    }

    /// Coefficient of ‖q‖² relative to `s_N`.
    pub fn c_q(&self) -> f64 {
        match self.kind {
            ModelKind::Ac | ModelKind::Ch => 1.0,
            ModelKind::Pfc => 0.25,
            ModelKind::Mbe => -0.5,
        }
    }

    /// Weight `w = c_q·s_N` of ‖q‖² in the modified energy.
    pub fn q_weight(&self) -> f64 {
        self.c_q() * self.s_n()
    }

    /// Constant term of the modified energy.
    pub fn energy_offset(&self, grid: &Grid2D) -> f64 {
        match self.kind {
            ModelKind::Pfc => 0.0,
            _ => -self.q_weight() * self.params.c0 * grid.area(),
        }
    }

    pub fn coupling_rank(&self) -> CouplingRank {
        match self.kind {
            ModelKind::Mbe => CouplingRank::Gradient,
            _ => CouplingRank::Scalar,
        }
    }

    /// H⁻¹ flows leave the zero mode untouched.
    pub fn conserves_mass(&self) -> bool {
        matches!(self.kind, ModelKind::Ch | ModelKind::Pfc)
    }

    pub fn l_symbol(&self, grid: &Grid2D) -> Symbol {
        let p = self.params;
        match self.kind {
            ModelKind::Ac => grid.symbol_from(|kx, ky| p.alpha0 * (kx * kx + ky * ky)),
            ModelKind::Ch => {
                let stab = self.s_n() * p.kappa;
                grid.symbol_from(|kx, ky| p.alpha0 * (kx * kx + ky * ky) + stab)
            }
            ModelKind::Pfc => grid.symbol_from(|kx, ky| {
                let k2 = kx * kx + ky * ky;
                (p.beta - p.eps) - 2.0 * p.beta * k2 + k2 * k2
            }),
            ModelKind::Mbe => grid.symbol_from(|kx, ky| {
                let k2 = kx * kx + ky * ky;
                p.eps * p.eps * k2 * k2
            }),
        }
    }

    /// Symbol of the mobility operator `M𝒢`.
    pub fn g_symbol(&self, grid: &Grid2D) -> Symbol {
        let m = self.params.mobility;
        match self.kind {
            ModelKind::Ac | ModelKind::Mbe => vec![m; grid.len()],
            ModelKind::Ch | ModelKind::Pfc => grid.symbol_from(|kx, ky| m * (kx * kx + ky * ky)),
        }
    }

    /// Bulk energy density, without the `s_N` prefactor.
    pub fn bulk_f(&self, phi: &Field) -> Field {
        match self.kind {
            ModelKind::Ac | ModelKind::Ch => phi.map(double_well),
            ModelKind::Pfc => phi.map(|v| 0.25 * v.powi(4)),
            ModelKind::Mbe => {
                let (gx, gy) = spectral::gradient(phi);
                gx.zip_map(&gy, |a, b| -0.5 * (a * a + b * b).ln_1p())
            }
        }
    }

    /// CH density under the square root, `F(φ) − κφ²/2`.
    pub fn stabilized_f(&self, phi: &Field) -> Field {
        let kappa = self.params.kappa;
        phi.map(|v| double_well(v) - 0.5 * kappa * v * v)
    }

    fn radicand(&self, phi: &Field) -> Field {
        let c0 = self.params.c0;
        match self.kind {
            ModelKind::Ac => phi.map(|v| double_well(v) + c0),
            ModelKind::Ch => self.stabilized_f(phi).map(|v| v + c0),
            ModelKind::Mbe => {
                let (gx, gy) = spectral::gradient(phi);
                gx.zip_map(&gy, |a, b| (a * a + b * b).ln_1p() + c0)
            }
            ModelKind::Pfc => unreachable!("PFC quadratization has no radicand"),
        }
    }

    /// `Q(φ)`; fails if the radicand is negative anywhere.
    pub fn quadratize(&self, phi: &Field) -> Result<Field> {
        if self.kind == ModelKind::Pfc {
            return Ok(phi.map(|v| v * v));
        }
        let mut r = self.radicand(phi);
        let (index, min) = r
            .values()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        if min < 0.0 || min.is_nan() {
            return Err(Error::NegativeRadicand { min, index });
        }
        r.values_mut().iter_mut().for_each(|v| *v = v.sqrt());
        Ok(r)
    }

    /// Coupling coefficients at `φ`.
    pub fn coupling(&self, phi: &Field) -> Result<CouplingField> {
        let s_n = self.s_n();
        match self.kind {
            ModelKind::Ac | ModelKind::Ch => {
                let q = self.quadratize(phi)?;
                let shift = if self.kind == ModelKind::Ch { self.params.kappa } else { 0.0 };
                let g = phi.zip_map(&q, |v, qv| (v * v * v - v - shift * v) / qv);
                Ok(CouplingField::Scalar { h: g.clone(), g, scale: 0.5, s_n })
            }
            ModelKind::Pfc => Ok(CouplingField::Scalar {
                g: phi.clone(),
                h: phi.map(|v| 2.0 * v),
                scale: 1.0,
                s_n,
            }),
            ModelKind::Mbe => {
                let q = self.quadratize(phi)?;
                let (gx, gy) = spectral::gradient(phi);
                let denom = gx.zip_map(&gy, |a, b| 1.0 + a * a + b * b);
                let denom = denom.zip_map(&q, |d, qv| d * qv);
                Ok(CouplingField::Gradient {
                    hx: gx.zip_map(&denom, |a, d| a / d),
                    hy: gy.zip_map(&denom, |a, d| a / d),
                })
            }
        }
    }

    /// `½(Lφ, φ)` by Parseval.
    pub fn linear_energy(&self, phi: &Field) -> f64 {
        let grid = phi.grid();
        0.5 * grid.forward(phi).quadratic_form(&self.l_symbol(grid))
    }

    /// The model's free energy of `φ`.
    pub fn original_energy(&self, phi: &Field) -> f64 {
        let grid = phi.grid();
        let p = self.params;
        match self.kind {
            ModelKind::Ac | ModelKind::Ch => {
                let grad = grid.forward(phi).quadratic_form(&grid.k_squared());
                0.5 * p.alpha0 * grad + self.s_n() * self.bulk_f(phi).integral()
            }
            ModelKind::Pfc | ModelKind::Mbe => self.linear_energy(phi) + self.bulk_f(phi).integral(),
        }
    }

    /// `½(Lφ, φ) + w‖q‖² + offset`.
    pub fn modified_energy(&self, phi: &Field, q: &Field) -> Result<f64> {
        if !phi.same_grid(q) {
            return Err(Error::GridMismatch);
        }
        Ok(self.linear_energy(phi) + self.q_weight() * q.norm_sq() + self.energy_offset(phi.grid()))
    }
}

fn double_well(v: f64) -> f64 {
    let s = v * v - 1.0;
    0.25 * s * s
}
