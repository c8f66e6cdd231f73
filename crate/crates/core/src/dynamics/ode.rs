use super::equation::{Equation, EquationName, Kind};
use crate::error::{Error, Result};

// Damped mean-field model of cylinder wake (mu, omega, A, lambda).
const FLUID_MU: f64 = 0.1;
const FLUID_OMEGA: f64 = 1.0;
const FLUID_A: f64 = -0.1;
const FLUID_LAMBDA: f64 = 10.0;

/// Time derivative of an ODE state. Second-order equations use the state
/// (position, velocity).
pub fn ode_rhs(eq: &Equation, s: &[f64]) -> Result<Vec<f64>> {
    if eq.kind() != Kind::Ode {
        return Err(Error::Domain(format!("{} is not an ODE", eq.name)));
    }
    if s.len() != eq.state_dim() {
        return Err(Error::Dimension {
            op: "ode_rhs",
            left: vec![eq.state_dim()],
            right: vec![s.len()],
        });
    }
    let mut out = vec![0.0; s.len()];
    rhs_into(eq, s, &mut out);
    Ok(out)
}

fn rhs_into(eq: &Equation, s: &[f64], out: &mut [f64]) {
    match eq.name {
        EquationName::Shm => {
            out[0] = s[1];
            out[1] = -s[0];
        }
        EquationName::Pendulum => {
            out[0] = s[1];
            out[1] = -s[0].sin();
        }
        EquationName::Lorenz => {
            let (x, y, z) = (s[0], s[1], s[2]);
            if eq.classical_lorenz {
                let (sigma, rho, beta) = (10.0, 28.0, 8.0 / 3.0);
                out[0] = sigma * (y - x);
                out[1] = x * (rho - z) - y;
                out[2] = x * y - beta * z;
            } else {
                out[0] = y - x;
                out[1] = x - x * z - y;
                out[2] = x * y - z;
            }
        }
        EquationName::FluidAttractor => {
            let (x, y, z) = (s[0], s[1], s[2]);
            if eq.stable_fluid {
                out[0] = FLUID_MU * x - FLUID_OMEGA * y + FLUID_A * x * z;
                out[1] = FLUID_OMEGA * x + FLUID_MU * y + FLUID_A * y * z;
                out[2] = -FLUID_LAMBDA * (z - x * x - y * y);
            } else {
                out[0] = x - y + x * z;
                out[1] = x + y + y * z;
                out[2] = x * x + y * y + z;
            }
        }
        _ => unreachable!("rhs_into called for a PDE"),
    }
}

/// Classical fourth-order Runge-Kutta step for `ds/dt = f(s)`.
pub fn rk4<F>(f: &mut F, s: &[f64], dt: f64) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = s.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f(s, &mut k1);
    for i in 0..n {
        tmp[i] = s[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = s[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = s[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    (0..n)
        .map(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// One RK4 step of an ODE. A non-finite result is reported as a blowup at step 1.
pub fn rk4_step(eq: &Equation, s: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("dt must be positive, got {dt}")));
    }
    ode_rhs(eq, s)?;
    let next = rk4(&mut |x: &[f64], out: &mut [f64]| rhs_into(eq, x, out), s, dt);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::IntegrationBlowup { step: 1 })
    }
}

/// Integrates `n_steps` RK4 steps and returns the `(n_steps + 1) × dim`
/// row-major states, starting with `s0`.
pub fn integrate_ode(eq: &Equation, s0: &[f64], dt: f64, n_steps: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity((n_steps + 1) * s0.len());
    out.extend_from_slice(s0);
    let mut s = s0.to_vec();
    for step in 1..=n_steps {
        s = rk4_step(eq, &s, dt).map_err(|e| match e {
            Error::IntegrationBlowup { .. } => Error::IntegrationBlowup { step },
            other => other,
        })?;
        out.extend_from_slice(&s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn right_hand_sides() {
        let shm = Equation::new(EquationName::Shm);
        assert_eq!(ode_rhs(&shm, &[1.0, 0.0]).unwrap(), vec![0.0, -1.0]);
        let pend = Equation::new(EquationName::Pendulum);
        assert_eq!(ode_rhs(&pend, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let lorenz = Equation::new(EquationName::Lorenz);
        assert_eq!(ode_rhs(&lorenz, &[1.0, 1.0, 1.0]).unwrap(), vec![0.0, -1.0, 0.0]);
        let fluid = Equation::new(EquationName::FluidAttractor);
        assert_eq!(ode_rhs(&fluid, &[1.0, 2.0, 3.0]).unwrap(), vec![2.0, 9.0, 8.0]);
        assert!(ode_rhs(&Equation::new(EquationName::Heat), &[0.0]).is_err());
        assert!(ode_rhs(&shm, &[0.0; 3]).is_err());
    }

    #[test]
    fn rk4_exact_for_constant_rhs() {
        let mut f = |_: &[f64], out: &mut [f64]| {
            out[0] = 2.5;
            out[1] = -1.0;
        };
        let next = rk4(&mut f, &[1.0, 1.0], 0.1);
        assert_eq!(next, vec![1.0 + 0.25, 1.0 - 0.1]);
    }

    #[test]
    fn shm_returns_after_one_period() {
        let shm = Equation::new(EquationName::Shm);
        let n = (2.0 * PI / 0.01).round() as usize;
        let dt = 2.0 * PI / n as f64;
        let states = integrate_ode(&shm, &[1.0, 0.0], dt, n).unwrap();
        let last = &states[2 * n..];
        assert!((last[0] - 1.0).abs() < 1e-6 && last[1].abs() < 1e-6, "{last:?}");
    }

    #[test]
    fn blowup_reports_step() {
        let mut eq = Equation::new(EquationName::FluidAttractor);
        eq.initial_range = (-1.0, 1.0);
        let err = integrate_ode(&eq, &[1.0, 1.0, 1.0], 0.1, 1000).unwrap_err();
        match err {
            Error::IntegrationBlowup { step } => assert!(step > 1 && step < 1000),
            other => panic!("{other:?}"),
        }
        assert!(rk4_step(&eq, &[1.0, 1.0, 1.0], 0.0).is_err());
    }
}
