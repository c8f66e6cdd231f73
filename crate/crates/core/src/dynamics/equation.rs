use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquationName {
    Shm,
    Pendulum,
    Lorenz,
    FluidAttractor,
    Heat,
    Wave,
    Burgers,
    Kdv,
}

impl EquationName {
    pub const ALL: [EquationName; 8] = [
        EquationName::Shm,
        EquationName::Pendulum,
        EquationName::Lorenz,
        EquationName::FluidAttractor,
        EquationName::Heat,
        EquationName::Wave,
        EquationName::Burgers,
        EquationName::Kdv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EquationName::Shm => "shm",
            EquationName::Pendulum => "pendulum",
            EquationName::Lorenz => "lorenz",
            EquationName::FluidAttractor => "fluid_attractor",
            EquationName::Heat => "heat",
            EquationName::Wave => "wave",
            EquationName::Burgers => "burgers",
            EquationName::Kdv => "kdv",
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            EquationName::Shm
            | EquationName::Pendulum
            | EquationName::Lorenz
            | EquationName::FluidAttractor => Kind::Ode,
            _ => Kind::Pde,
        }
    }

    pub fn boundary(self) -> Boundary {
        match self {
            EquationName::Heat | EquationName::Wave | EquationName::Burgers => Boundary::DirichletZero,
            EquationName::Kdv => Boundary::Periodic,
            _ => Boundary::None,
        }
    }
}

impl fmt::Display for EquationName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EquationName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EquationName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown equation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Ode,
    Pde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    None,
    DirichletZero,
    Periodic,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::None => "none",
            Boundary::DirichletZero => "dirichlet_zero",
            Boundary::Periodic => "periodic",
        }
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Boundary::None),
            "dirichlet_zero" => Ok(Boundary::DirichletZero),
            "periodic" => Ok(Boundary::Periodic),
            _ => Err(Error::Domain(format!("unknown boundary `{s}`"))),
        }
    }
}

/// One of the eight reference systems together with its sampling and
/// discretization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub name: EquationName,
    /// Spatial samples, both endpoints included (PDEs only).
    pub grid_points: usize,
    /// Spatial domain `[0, domain_length]` (PDEs only).
    pub domain_length: f64,
    /// Uniform range for random ODE initial conditions. For the pendulum it
    /// bounds the initial angle; the initial angular velocity is zero.
    pub initial_range: (f64, f64),
    /// Number of terms of the random Fourier series used for PDE initial data.
    pub modes: usize,
    /// Lorenz: use σ=10, ρ=28, β=8/3 instead of the unit-coefficient system.
    pub classical_lorenz: bool,
    /// Fluid attractor: use the damped mean-field model instead of the
    /// unit-coefficient system with a growing z-mode.
    pub stable_fluid: bool,
}

impl Equation {
    pub fn new(name: EquationName) -> Self {
        let initial_range = match name {
            EquationName::Pendulum => (-2.5, 2.5),
            EquationName::FluidAttractor => (-0.2, 0.2),
            _ => (-1.0, 1.0),
        };
        let domain_length = match name {
            EquationName::Kdv => 2.0 * std::f64::consts::PI,
            _ => 1.0,
        };
        Self {
            name,
            grid_points: 128,
            domain_length,
            initial_range,
            modes: 8,
            classical_lorenz: false,
            stable_fluid: false,
        }
    }

    pub fn kind(&self) -> Kind {
        self.name.kind()
    }

    pub fn boundary(&self) -> Boundary {
        self.name.boundary()
    }

    pub fn state_dim(&self) -> usize {
        match self.name {
            EquationName::Shm | EquationName::Pendulum => 2,
            EquationName::Lorenz | EquationName::FluidAttractor => 3,
            _ => self.grid_points,
        }
    }

    /// Grid spacing for a PDE grid with both endpoints included.
    pub fn dx(&self) -> f64 {
        self.domain_length / (self.grid_points - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.initial_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "initial_range must be a finite interval, got ({lo}, {hi})"
            )));
        }
        if self.kind() == Kind::Pde {
            if self.grid_points < 4 {
                return Err(Error::Config(format!(
                    "grid_points must be at least 4, got {}",
                    self.grid_points
                )));
            }
            if !(self.domain_length > 0.0) {
                return Err(Error::Config("domain_length must be positive".into()));
            }
            if self.modes == 0 {
                return Err(Error::Config("modes must be positive".into()));
            }
        }
        Ok(())
    }
}
