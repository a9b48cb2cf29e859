//! Dense real-space oracle for small grids: every operator is assembled as an
//! explicit matrix from its Fourier symbol, and the coupled `(φ, q̂)` system of
//! one step is solved by LU.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use gradflow::models::{ModelKind, ModelSpec};
use gradflow::spectral::{Field, Grid2D};
use gradflow::timestep::Stepper;
use nalgebra::{DMatrix, DVector};

pub struct Dense {
    pub grid: Arc<Grid2D>,
    n: usize,
    k: Vec<(f64, f64)>,
    x: Vec<(f64, f64)>,
}

fn freq(j: usize, n: usize, len: f64) -> f64 {
    let m = if 2 * j < n { j as f64 } else { j as f64 - n as f64 };
    2.0 * PI * m / len
}

impl Dense {
    pub fn new(grid: &Arc<Grid2D>) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let [x0, x1, y0, y1] = grid.bounds();
        let mut k = Vec::new();
        let mut x = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                k.push((freq(ix, nx, x1 - x0), freq(iy, ny, y1 - y0)));
                x.push((x0 + ix as f64 * (x1 - x0) / nx as f64, y0 + iy as f64 * (y1 - y0) / ny as f64));
            }
        }
        Dense { grid: Arc::clone(grid), n: nx * ny, k, x }
    }

    fn assemble(&self, f: impl Fn(f64, f64, f64) -> f64) -> DMatrix<f64> {
        // M_ij = (1/N) Σ_k f(k, phase) with phase = k·(x_i − x_j)
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let (dx, dy) = (self.x[i].0 - self.x[j].0, self.x[i].1 - self.x[j].1);
            self.k.iter().map(|&(kx, ky)| f(kx, ky, kx * dx + ky * dy)).sum::<f64>() / n as f64
        })
    }

    /// Real multiplier with an even symbol.
    pub fn symbol(&self, s: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
        self.assemble(|kx, ky, ph| s(kx, ky) * ph.cos())
    }

    /// `∂x` (`axis = 0`) or `∂y`, zero at the Nyquist wavenumber.
    pub fn derivative(&self, axis: usize) -> DMatrix<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let nyq_x = freq(nx / 2, nx, self.grid.lx());
        let nyq_y = freq(ny / 2, ny, self.grid.ly());
        self.assemble(|kx, ky, ph| {
            let k = if axis == 0 {
                if kx == nyq_x { 0.0 } else { kx }
            } else if ky == nyq_y {
                0.0
            } else {
                ky
            };
            -k * ph.sin()
        })
    }

    pub fn l_matrix(&self, m: &ModelSpec) -> DMatrix<f64> {
        let p = m.params;
        let s_n = p.alpha0 / (p.eps * p.eps);
        match m.kind {
            ModelKind::Ac => self.symbol(|kx, ky| p.alpha0 * (kx * kx + ky * ky)),
            ModelKind::Ch => self.symbol(|kx, ky| p.alpha0 * (kx * kx + ky * ky) + s_n * p.kappa),
            ModelKind::Pfc => self.symbol(|kx, ky| {
                let k2 = kx * kx + ky * ky;
                p.beta - p.eps - 2.0 * p.beta * k2 + k2 * k2
            }),
            ModelKind::Mbe => self.symbol(|kx, ky| p.eps * p.eps * (kx * kx + ky * ky).powi(2)),
        }
    }

    pub fn g_matrix(&self, m: &ModelSpec) -> DMatrix<f64> {
        let mob = m.params.mobility;
        match m.kind {
            ModelKind::Ac | ModelKind::Mbe => DMatrix::identity(self.n, self.n) * mob,
            ModelKind::Ch | ModelKind::Pfc => self.symbol(|kx, ky| mob * (kx * kx + ky * ky)),
        }
    }

    /// Pointwise `Q(φ)`, evaluated without the library.
    pub fn quadratize(&self, m: &ModelSpec, phi: &DVector<f64>) -> DVector<f64> {
        let p = m.params;
        match m.kind {
            ModelKind::Ac => phi.map(|v| ((v * v - 1.0).powi(2) / 4.0 + p.c0).sqrt()),
            ModelKind::Ch => phi.map(|v| ((v * v - 1.0).powi(2) / 4.0 - p.kappa * v * v / 2.0 + p.c0).sqrt()),
            ModelKind::Pfc => phi.map(|v| v * v),
            ModelKind::Mbe => {
                let gx = self.derivative(0) * phi;
                let gy = self.derivative(1) * phi;
                DVector::from_fn(self.n, |i, _| ((gx[i] * gx[i] + gy[i] * gy[i]).ln_1p() + p.c0).sqrt())
            }
        }
    }

    /// Coupling matrices `(N, D)` frozen at `b`: `μ ∋ N q`, `δq = D δφ`.
    pub fn coupling(&self, m: &ModelSpec, b: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = m.params;
        let s_n = p.alpha0 / (p.eps * p.eps);
        let q = self.quadratize(m, b);
        match m.kind {
            ModelKind::Ac | ModelKind::Ch => {
                let kappa = if m.kind == ModelKind::Ch { p.kappa } else { 0.0 };
                let g = DVector::from_fn(self.n, |i, _| (b[i].powi(3) - b[i] - kappa * b[i]) / q[i]);
                (DMatrix::from_diagonal(&(&g * s_n)), DMatrix::from_diagonal(&(&g * 0.5)))
            }
            ModelKind::Pfc => (DMatrix::from_diagonal(b), DMatrix::from_diagonal(&(b * 2.0))),
            ModelKind::Mbe => {
                let (dx, dy) = (self.derivative(0), self.derivative(1));
                let gx = &dx * b;
                let gy = &dy * b;
                let denom = DVector::from_fn(self.n, |i, _| (1.0 + gx[i] * gx[i] + gy[i] * gy[i]) * q[i]);
                let hx = DMatrix::from_diagonal(&gx.component_div(&denom));
                let hy = DMatrix::from_diagonal(&gy.component_div(&denom));
                (&dx * &hx + &dy * &hy, &hx * &dx + &hy * &dy)
            }
        }
    }

    /// One Step 1 of the coupled system, solved directly.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        m: &ModelSpec,
        stepper: Stepper,
        tau: f64,
        phi: &DVector<f64>,
        phi_prev: &DVector<f64>,
        q: &DVector<f64>,
        q_prev: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let n = self.n;
        let l = self.l_matrix(m);
        let g = self.g_matrix(m);
        let eye = DMatrix::<f64>::identity(n, n);
        let (alpha, a_phi, a_q, b) = match stepper {
            Stepper::Bdf1 => (1.0, phi.clone(), q.clone(), phi.clone()),
            Stepper::Bdf2 => (1.5, phi * 2.0 - phi_prev * 0.5, q * 2.0 - q_prev * 0.5, phi * 2.0 - phi_prev),
            Stepper::Cn => (1.0, phi.clone(), q.clone(), phi * 1.5 - phi_prev * 0.5),
        };
        let (nm, dm) = self.coupling(m, &b);
        let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut rhs = DVector::<f64>::zeros(2 * n);
        match stepper {
            Stepper::Cn => {
                // (φ − φⁿ)/τ = −G[L(φ+φⁿ)/2 + N(q̂+qⁿ)/2],  q̂ − qⁿ = D(φ − φⁿ)
                big.view_mut((0, 0), (n, n)).copy_from(&(&eye / tau + &g * &l * 0.5));
                big.view_mut((0, n), (n, n)).copy_from(&(&g * &nm * 0.5));
                big.view_mut((n, 0), (n, n)).copy_from(&(-&dm));
                big.view_mut((n, n), (n, n)).copy_from(&eye);
                rhs.rows_mut(0, n).copy_from(&(phi / tau - &g * (&l * phi * 0.5 + &nm * q * 0.5)));
                rhs.rows_mut(n, n).copy_from(&(q - &dm * phi));
            }
            Stepper::Bdf1 | Stepper::Bdf2 => {
                // (αφ − A(φ))/τ = −G(Lφ + N q̂),  αq̂ − A(q) = D(αφ − A(φ))
                big.view_mut((0, 0), (n, n)).copy_from(&(&eye * (alpha / tau) + &g * &l));
                big.view_mut((0, n), (n, n)).copy_from(&(&g * &nm));
                big.view_mut((n, 0), (n, n)).copy_from(&(-&dm * alpha));
                big.view_mut((n, n), (n, n)).copy_from(&(&eye * alpha));
                rhs.rows_mut(0, n).copy_from(&(&a_phi / tau));
                rhs.rows_mut(n, n).copy_from(&(&a_q - &dm * &a_phi));
            }
        }
        let sol = big.lu().solve(&rhs).expect("nonsingular coupled system");
        (sol.rows(0, n).into_owned(), sol.rows(n, n).into_owned())
    }

    /// `(A u, v)·dA`
    pub fn form(&self, a: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (a * u).dot(v) * self.grid.cell_area()
    }

    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        u.dot(u) * self.grid.cell_area()
    }
}

pub fn to_vec(f: &Field) -> DVector<f64> {
    DVector::from_column_slice(f.values())
}

pub fn to_field(grid: &Arc<Grid2D>, v: &DVector<f64>) -> Field {
    Field::from_values(grid, v.as_slice().to_vec()).unwrap()
}

pub fn max_abs_diff(a: &Field, b: &DVector<f64>) -> f64 {
    a.values().iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
