//! Method-of-lines solvers for the four 1-D PDEs.
//!
//! Heat, wave and Burgers use second-order central differences on a grid
//! that includes both Dirichlet endpoints. KdV is solved pseudo-spectrally on
//! the `grid_points - 1` distinct periodic nodes with 2/3-rule dealiasing; the
//! recorded grid repeats the first node at `x = L`. All four integrate with
//! RK4 at a stable substep that evenly divides the recording interval.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::equation::{Equation, EquationName, Kind};
use super::ode::rk4;
use crate::error::{Error, Result};

const HEAT_SUBSTEP: f64 = 0.4; // × dx²
const WAVE_SUBSTEP: f64 = 0.9; // × dx
const BURGERS_CFL: f64 = 0.5; // × dx / max|u|
const KDV_SUBSTEP: f64 = 0.2; // × dx³

fn substeps(dt: f64, max_sub: f64) -> usize {
    ((dt / max_sub).ceil() as usize).max(1)
}

/// Solves `eq` from `u0` and returns the `(n_steps + 1) × grid_points`
/// row-major grid functions at the recording interval `dt`.
pub fn solve_pde(eq: &Equation, u0: &[f64], dt: f64, n_steps: usize) -> Result<Vec<f64>> {
    if eq.kind() != Kind::Pde {
        return Err(Error::Domain(format!("{} is not a PDE", eq.name)));
    }
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt must be positive, got {dt}")));
    }
    let n = eq.grid_points;
    if u0.len() != n {
        return Err(Error::Dimension {
            op: "solve_pde",
            left: vec![n],
            right: vec![u0.len()],
        });
    }
    check_boundary(eq, u0)?;
    let dx = eq.dx();
    let mut out = Vec::with_capacity((n_steps + 1) * n);
    out.extend_from_slice(u0);

    match eq.name {
        EquationName::Heat | EquationName::Burgers => {
            let mut u = u0.to_vec();
            let viscous = HEAT_SUBSTEP * dx * dx;
            for step in 1..=n_steps {
                let mut max_sub = viscous;
                if eq.name == EquationName::Burgers {
                    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if umax > 0.0 {
                        max_sub = max_sub.min(BURGERS_CFL * dx / umax);
                    }
                }
                let k = substeps(dt, max_sub);
                let h = dt / k as f64;
                let burgers = eq.name == EquationName::Burgers;
                let mut f = |u: &[f64], du: &mut [f64]| dirichlet_rhs(u, du, dx, burgers);
                for _ in 0..k {
                    u = rk4(&mut f, &u, h);
                }
                finish_step(&mut u, step, true)?;
                out.extend_from_slice(&u);
            }
        }
        EquationName::Wave => {
            // state = [u, u_t]; initial velocity is zero
            let mut s = vec![0.0; 2 * n];
            s[..n].copy_from_slice(u0);
            let k = substeps(dt, WAVE_SUBSTEP * dx);
            let h = dt / k as f64;
            let mut f = |s: &[f64], ds: &mut [f64]| wave_rhs(s, ds, n, dx);
            for step in 1..=n_steps {
                for _ in 0..k {
                    s = rk4(&mut f, &s, h);
                }
                let mut u = s[..n].to_vec();
                finish_step(&mut u, step, true)?;
                s[0] = 0.0;
                s[n - 1] = 0.0;
                out.extend_from_slice(&u);
            }
        }
        EquationName::Kdv => {
            let m = n - 1;
            let mut solver = KdvSpectral::new(m, eq.domain_length);
            let k = substeps(dt, KDV_SUBSTEP * dx * dx * dx);
            let h = dt / k as f64;
            let mut u = u0[..m].to_vec();
            for step in 1..=n_steps {
                for _ in 0..k {
                    u = rk4(&mut |u: &[f64], du: &mut [f64]| solver.rhs(u, du), &u, h);
                }
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::IntegrationBlowup { step });
                }
                out.extend_from_slice(&u);
                out.push(u[0]);
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

fn check_boundary(eq: &Equation, u0: &[f64]) -> Result<()> {
    let n = u0.len();
    let ok = match eq.name {
        EquationName::Kdv => u0[0] == u0[n - 1],
        _ => u0[0] == 0.0 && u0[n - 1] == 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "initial condition violates the {} boundary condition",
            eq.boundary().as_str()
        )))
    }
}

fn finish_step(u: &mut [f64], step: usize, dirichlet: bool) -> Result<()> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationBlowup { step });
    }
    if dirichlet {
        let n = u.len();
        u[0] = 0.0;
        u[n - 1] = 0.0;
    }
    Ok(())
}

/// `u_xx`, plus `-u u_x` (first-order upwind) for Burgers. Endpoints stay fixed.
fn dirichlet_rhs(u: &[f64], du: &mut [f64], dx: f64, burgers: bool) {
    let n = u.len();
    let inv_dx2 = 1.0 / (dx * dx);
    du[0] = 0.0;
    du[n - 1] = 0.0;
    for i in 1..n - 1 {
        let mut v = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_dx2;
        if burgers {
            let ux = if u[i] > 0.0 {
                (u[i] - u[i - 1]) / dx
            } else {
                (u[i + 1] - u[i]) / dx
            };
            v -= u[i] * ux;
        }
        du[i] = v;
    }
}

fn wave_rhs(s: &[f64], ds: &mut [f64], n: usize, dx: f64) {
    let (u, v) = s.split_at(n);
    let (du, dv) = ds.split_at_mut(n);
    du.copy_from_slice(v);
    du[0] = 0.0;
    du[n - 1] = 0.0;
    dv[0] = 0.0;
    dv[n - 1] = 0.0;
    let inv_dx2 = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        dv[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_dx2;
    }
}

/// Fourier pseudo-spectral right-hand side of `u_t = 6 u u_x - u_xxx`.
struct KdvSpectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    keep: Vec<bool>,
    buf_u: Vec<Complex64>,
    buf_sq: Vec<Complex64>,
}

impl KdvSpectral {
    fn new(n: usize, length: f64) -> Self {
        let mut planner = FftPlanner::new();
        let base = 2.0 * std::f64::consts::PI / length;
        let mut wavenumbers = vec![0.0; n];
        let mut keep = vec![false; n];
        for j in 0..n {
            let signed = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
            // the unpaired Nyquist mode of an even grid is dropped
            let nyquist = n.is_multiple_of(2) && j == n / 2;
            wavenumbers[j] = base * signed as f64;
            keep[j] = !nyquist && (signed.unsigned_abs() as usize) * 3 <= n;
        }
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
            keep,
            buf_u: vec![Complex64::new(0.0, 0.0); n],
            buf_sq: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn rhs(&mut self, u: &[f64], du: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            self.buf_u[i] = Complex64::new(u[i], 0.0);
            self.buf_sq[i] = Complex64::new(u[i] * u[i], 0.0);
        }
        self.forward.process(&mut self.buf_u);
        self.forward.process(&mut self.buf_sq);
        let i = Complex64::new(0.0, 1.0);
        for j in 0..n {
            if !self.keep[j] {
                self.buf_u[j] = Complex64::new(0.0, 0.0);
                continue;
            }
            let k = self.wavenumbers[j];
            // 6 u u_x = 3 (u²)_x ;  -u_xxx ↔ -(ik)³ û = i k³ û
            self.buf_u[j] = i * (3.0 * k) * self.buf_sq[j] + i * (k * k * k) * self.buf_u[j];
        }
        self.inverse.process(&mut self.buf_u);
        let scale = 1.0 / n as f64;
        for j in 0..n {
            du[j] = self.buf_u[j].re * scale;
        }
    }
}
