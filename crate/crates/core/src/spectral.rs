//! Periodic grids, 2D Fourier transforms and Fourier-multiplier operators.
//!
//! Fields are stored row-major with `x` varying fastest (`index = iy * nx + ix`).
//! Spectral coefficients use the same layout and the unnormalized forward
//! convention; the inverse transform divides by `nx * ny`.
//!
//! Wavenumbers follow the usual FFT ordering: for an `n`-point axis of length
//! `L`, index `j < n/2` carries `2πj/L` and index `j >= n/2` carries
//! `2π(j - n)/L`. First-derivative multipliers vanish at the Nyquist index so
//! that derivatives of real fields stay real; even-order multipliers keep the
//! full `|k|²` there.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Per-mode real multiplier, laid out like the spectral coefficients.
pub type Symbol = Vec<f64>;

pub struct Grid2D {
    nx: usize,
    ny: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
    dealias: bool,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("x", &(self.x0, self.x1))
            .field("y", &(self.y0, self.y1))
            .field("dealias", &self.dealias)
            .finish()
    }
}

/// Builds a periodic grid on `[x0, x1) × [y0, y1)` without dealiasing.
pub fn make_grid(nx: usize, ny: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Arc<Grid2D>> {
    Grid2D::build(nx, ny, x0, x1, y0, y1, false)
}

fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * PI * m / length
        })
        .collect()
}

impl Grid2D {
    /// Builds a grid; `dealias` enables 2/3-rule truncation of the nonlinear
    /// coupling terms (see [`Grid2D::project`]).
    pub fn build(
        nx: usize,
        ny: usize,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        dealias: bool,
    ) -> Result<Arc<Self>> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be even and at least 4")));
            }
        }
        if !(x0.is_finite() && x1.is_finite() && x1 > x0) {
            return Err(Error::InvalidGrid(format!("degenerate x bounds [{x0}, {x1}]")));
        }
        if !(y0.is_finite() && y1.is_finite() && y1 > y0) {
            return Err(Error::InvalidGrid(format!("degenerate y bounds [{y0}, {y1}]")));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            nx,
            ny,
            x0,
            x1,
            y0,
            y1,
            kx: wavenumbers(nx, x1 - x0),
            ky: wavenumbers(ny, y1 - y0),
            dealias,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of cells (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.x0, self.x1, self.y0, self.y1]
    }

    pub fn lx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn ly(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn dx(&self) -> f64 {
        self.lx() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly() / self.ny as f64
    }

    /// Cell area `dA`, the quadrature weight of every integral.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Domain measure `|Ω|`.
    pub fn area(&self) -> f64 {
        self.lx() * self.ly()
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx()
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.dy()
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Same mode counts and bounds.
    pub fn same_as(&self, other: &Grid2D) -> bool {
        std::ptr::eq(self, other)
            || (self.nx == other.nx && self.ny == other.ny && self.bounds() == other.bounds())
    }

    /// Evaluates `f(kx, ky)` at every mode.
    pub fn symbol_from(&self, f: impl Fn(f64, f64) -> f64) -> Symbol {
        let mut out = Vec::with_capacity(self.len());
        for &ky in &self.ky {
            for &kx in &self.kx {
                out.push(f(kx, ky));
            }
        }
        out
    }

    /// `|k|²` at every mode, Nyquist included.
    pub fn k_squared(&self) -> Symbol {
        self.symbol_from(|kx, ky| kx * kx + ky * ky)
    }

    fn derivative_wavenumbers(k: &[f64]) -> Vec<f64> {
        let n = k.len();
        let mut out = k.to_vec();
        out[n / 2] = 0.0;
        out
    }

    /// 2/3-rule mask: 1 on retained modes, 0 on truncated ones.
    pub fn dealias_mask(&self) -> Symbol {
        let keep = |j: usize, n: usize| {
            let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
            3 * m.unsigned_abs() <= n
        };
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(if keep(ix, self.nx) && keep(iy, self.ny) { 1.0 } else { 0.0 });
            }
        }
        out
    }

    /// Applies the 2/3-rule truncation when the grid has dealiasing enabled;
    /// identity otherwise.
    pub fn project(self: &Arc<Self>, f: Field) -> Field {
        if !self.dealias {
            return f;
        }
        let mut s = self.forward(&f);
        for (c, m) in s.coeffs.iter_mut().zip(self.dealias_mask()) {
            *c *= m;
        }
        self.inverse(&s)
    }

    fn transform(&self, buf: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.nx, self.ny);
        let scratch_len = fx.get_inplace_scratch_len().max(fy.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        // rows are contiguous
        fx.process_with_scratch(buf, &mut scratch);
        let mut cols = vec![Complex64::new(0.0, 0.0); nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                cols[ix * ny + iy] = buf[iy * nx + ix];
            }
        }
        fy.process_with_scratch(&mut cols, &mut scratch);
        for ix in 0..nx {
            for iy in 0..ny {
                buf[iy * nx + ix] = cols[ix * ny + iy];
            }
        }
    }

    /// Forward transform (unnormalized).
    pub fn forward(self: &Arc<Self>, f: &Field) -> SpectralField {
        assert!(self.same_as(&f.grid), "forward: field lives on another grid");
        let mut coeffs: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut coeffs, &self.fwd_x, &self.fwd_y);
        SpectralField { grid: Arc::clone(self), coeffs }
    }

    /// Inverse transform, returning the real part and the largest discarded
    /// imaginary magnitude.
    pub fn inverse_with_residue(self: &Arc<Self>, s: &SpectralField) -> (Field, f64) {
        assert!(self.same_as(&s.grid), "inverse: coefficients live on another grid");
        let mut buf = s.coeffs.clone();
        self.transform(&mut buf, &self.inv_x, &self.inv_y);
        let norm = 1.0 / self.len() as f64;
        let mut residue = 0.0f64;
        let values = buf
            .iter()
            .map(|c| {
                residue = residue.max(c.im.abs() * norm);
                c.re * norm
            })
            .collect();
        (Field { grid: Arc::clone(self), values }, residue)
    }

    pub fn inverse(self: &Arc<Self>, s: &SpectralField) -> Field {
        self.inverse_with_residue(s).0
    }
}

/// Real scalar field on a periodic grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid2D>, c: f64) -> Self {
        Self { grid: Arc::clone(grid), values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    /// Samples `f(x, y)` at the cell nodes.
    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny() {
            let y = grid.y(iy);
            for ix in 0..grid.nx() {
                values.push(f(grid.x(ix), y));
            }
        }
        Self { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: Arc::clone(&self.grid), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination; panics if the grids differ.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        self.check(other);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field { grid: Arc::clone(&self.grid), values }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Field) {
        self.check(x);
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    fn check(&self, other: &Field) {
        assert!(self.grid.same_as(&other.grid), "field operands live on different grids");
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid.same_as(&other.grid)
    }

    /// dA-weighted L² inner product.
    pub fn inner(&self, other: &Field) -> f64 {
        self.check(other);
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_area()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `∫ f dA`
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|v| v * rhs)
    }
}

/// Fourier coefficients of a [`Field`].
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid2D>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Multiplies every mode by a real symbol.
    pub fn multiply(&mut self, symbol: &[f64]) {
        for (c, &s) in self.coeffs.iter_mut().zip(symbol) {
            *c *= s;
        }
    }

    /// `Σ symbol(k)·|f̂(k)|²·dA / N`: the quadratic form `(S f, f)` by Parseval.
    pub fn quadratic_form(&self, symbol: &[f64]) -> f64 {
        let sum: f64 = self.coeffs.iter().zip(symbol).map(|(c, &s)| s * c.norm_sqr()).sum();
        sum * self.grid.cell_area() / self.grid.len() as f64
    }

    pub fn parseval_norm_sq(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        sum * self.grid.cell_area() / self.grid.len() as f64
    }
}

fn check_symbol(grid: &Grid2D, symbol: &[f64]) -> Result<()> {
    if symbol.len() != grid.len() {
        return Err(Error::SymbolLayout { expected: grid.len(), got: symbol.len() });
    }
    Ok(())
}

/// Applies a real Fourier multiplier.
pub fn apply_symbol(f: &Field, symbol: &[f64]) -> Result<Field> {
    let grid = f.grid();
    check_symbol(grid, symbol)?;
    let mut s = grid.forward(f);
    s.multiply(symbol);
    Ok(grid.inverse(&s))
}

pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid();
    let symbol: Symbol = grid.k_squared().into_iter().map(|k2| -k2).collect();
    apply_symbol(f, &symbol).expect("symbol built from the field's own grid")
}

pub fn biharmonic(f: &Field) -> Field {
    let grid = f.grid();
    let symbol: Symbol = grid.k_squared().into_iter().map(|k2| k2 * k2).collect();
    apply_symbol(f, &symbol).expect("symbol built from the field's own grid")
}

/// `(∂x f, ∂y f)` with the Nyquist derivative set to zero.
pub fn gradient(f: &Field) -> (Field, Field) {
    let grid = f.grid();
    gradient_of_spectrum(&grid.forward(f))
}

pub(crate) fn gradient_of_spectrum(s: &SpectralField) -> (Field, Field) {
    let grid = s.grid();
    let kx = Grid2D::derivative_wavenumbers(grid.kx());
    let ky = Grid2D::derivative_wavenumbers(grid.ky());
    let nx = grid.nx();
    let mut sx = s.clone();
    let mut sy = s.clone();
    for (idx, (cx, cy)) in sx.coeffs.iter_mut().zip(sy.coeffs.iter_mut()).enumerate() {
        let i = Complex64::new(0.0, 1.0);
        *cx *= i * kx[idx % nx];
        *cy *= i * ky[idx / nx];
    }
    (grid.inverse(&sx), grid.inverse(&sy))
}

/// Spectrum of `∂x fx + ∂y fy`.
pub(crate) fn divergence_spectrum(fx: &Field, fy: &Field) -> Result<SpectralField> {
    if !fx.same_grid(fy) {
        return Err(Error::GridMismatch);
    }
    let grid = fx.grid();
    let kx = Grid2D::derivative_wavenumbers(grid.kx());
    let ky = Grid2D::derivative_wavenumbers(grid.ky());
    let nx = grid.nx();
    let mut sx = grid.forward(fx);
    let sy = grid.forward(fy);
    let i = Complex64::new(0.0, 1.0);
    for (idx, (cx, cy)) in sx.coeffs.iter_mut().zip(&sy.coeffs).enumerate() {
        *cx = i * (kx[idx % nx] * *cx + ky[idx / nx] * *cy);
    }
    Ok(sx)
}

pub fn divergence(fx: &Field, fy: &Field) -> Result<Field> {
    let s = divergence_spectrum(fx, fy)?;
    Ok(fx.grid().inverse(&s))
}
