//! Matrix-free restarted GMRES, right-preconditioned by a Fourier-diagonal
//! operator, optionally sandwiched between pointwise scalings
//! `W^{1/2} F W^{1/2}`; both factors are inverted exactly.

use crate::error::{Error, Result};
use crate::spectral::Field;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAXIT: usize = 500;
pub const RESTART: usize = 30;

pub struct LinearProblem<'a> {
    /// Full operator.
    pub apply: &'a dyn Fn(&Field) -> Field,
    /// Symbol of the constant-coefficient part; inverted per mode.
    pub precond_symbol: &'a [f64],
    /// Optional positive pointwise weight `W` of the sandwich.
    pub precond_weight: Option<&'a Field>,
    pub rhs: &'a Field,
    /// Relative residual tolerance.
    pub tol: f64,
    /// Cap on operator applications inside the Krylov iteration.
    pub maxit: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Field,
    pub iterations: usize,
    /// Absolute residual `‖apply(x) − rhs‖` (dA-weighted), recomputed from `x`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn precondition(symbol_inv: &[f64], scale: Option<&[f64]>, v: &Field) -> Field {
    let grid = v.grid();
    let Some(scale) = scale else {
        let mut s = grid.forward(v);
        s.multiply(symbol_inv);
        return grid.inverse(&s);
    };
    let mut u = v.clone();
    u.values_mut().iter_mut().zip(scale).for_each(|(a, b)| *a *= b);
    let mut s = grid.forward(&u);
    s.multiply(symbol_inv);
    let mut u = grid.inverse(&s);
    u.values_mut().iter_mut().zip(scale).for_each(|(a, b)| *a *= b);
    u
}

pub fn solve(p: &LinearProblem) -> Result<Solution> {
    let grid = p.rhs.grid();
    if p.precond_symbol.len() != grid.len() {
        return Err(Error::SymbolLayout { expected: grid.len(), got: p.precond_symbol.len() });
    }
    if let Some(mode) = p.precond_symbol.iter().position(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::SingularPreconditioner { mode });
    }
    let inv: Vec<f64> = p.precond_symbol.iter().map(|s| 1.0 / s).collect();
    let scale: Option<Vec<f64>> = match p.precond_weight {
        Some(w) => {
            if !w.same_grid(p.rhs) {
                return Err(Error::GridMismatch);
            }
            if let Some(i) = w.values().iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::SingularPreconditioner { mode: i });
            }
            Some(w.values().iter().map(|v| 1.0 / v.sqrt()).collect())
        }
        None => None,
    };
    let weight = grid.cell_area().sqrt();
    let b = p.rhs.values();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution { x: p.rhs.clone(), iterations: 0, residual: 0.0 });
    }
    let target = p.tol * b_norm;

    let mut x = Field::zeros(grid);
    let mut r: Vec<f64> = b.to_vec();
    let mut r_norm = b_norm;
    let mut iterations = 0;
    let m = RESTART;

    loop {
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Field> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = r_norm;
        v.push(r.iter().map(|a| a / r_norm).collect());

        let mut k = 0;
        while k < m && iterations < p.maxit {
            let vk = Field::from_values(grid, v[k].clone())?;
            let zk = precondition(&inv, scale.as_deref(), &vk);
            let mut w = (p.apply)(&zk).into_values();
            z.push(zk);
            iterations += 1;
            // modified Gram-Schmidt with one reorthogonalization pass
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i][k] += c;
                    w.iter_mut().zip(vi).for_each(|(a, b)| *a -= c * b);
                }
            }
            let h_next = norm(&w);
            h[k + 1][k] = h_next;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                k += 1;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            if g[k].abs() <= target || h_next == 0.0 {
                break;
            }
            v.push(w.iter().map(|a| a / h_next).collect());
        }

        // back substitution on the k×k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.axpy(*yi, zi);
        }

        let ax = (p.apply)(&x);
        r = b.iter().zip(ax.values()).map(|(a, c)| a - c).collect();
        r_norm = norm(&r);
        if r_norm <= target {
            return Ok(Solution { x, iterations, residual: r_norm * weight });
        }
        if iterations >= p.maxit || k == 0 {
            return Err(Error::NoConvergence { iterations, residual: r_norm / b_norm });
        }
    }
}
