use std::fmt;
use std::str::FromStr;

use crate::dynamics::EquationName;
use crate::error::{Error, Result};
use crate::koopman::FormKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accuracy {
    Full,
    Max,
    /// Step `i` weighted by `λ^i`, λ ∈ (0, 1].
    Discounted(f64),
}

impl Accuracy {
    pub fn name(self) -> &'static str {
        match self {
            Accuracy::Full => "full",
            Accuracy::Max => "max",
            Accuracy::Discounted(_) => "discounted",
        }
    }

    pub fn lambda(self) -> Option<f64> {
        match self {
            Accuracy::Discounted(l) => Some(l),
            _ => None,
        }
    }

    /// Parses a level name; `discounted` takes `lambda`.
    pub fn from_name(name: &str, lambda: Option<f64>) -> Result<Self> {
        match (name, lambda) {
            ("full", _) => Ok(Accuracy::Full),
            ("max", _) => Ok(Accuracy::Max),
            ("discounted", Some(l)) => Ok(Accuracy::Discounted(l)),
            ("discounted", None) => Err(Error::Config(
                "discounted accuracy needs a lambda".into(),
            )),
            _ => Err(Error::Config(format!("unknown accuracy loss `{name}`"))),
        }
    }
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, { $($variant:ident => $name:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $ty {
            $($variant),+
        }

        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " `{}`"), s))),
                }
            }
        }
    };
}

named_enum!(Embedding, "embedding loss", {
    None => "none",
    Reconstruction => "reconstruction",
    Consistency => "consistency",
    Metric => "metric",
});

named_enum!(OperatorLoss, "operator loss", {
    None => "none",
    Norm => "norm",
    Isometry => "isometry",
    Unitary => "unitary",
    Determinant => "determinant",
});

named_enum!(Auxiliary, "auxiliary loss", {
    None => "none",
    AbsoluteMax => "absolute_max",
    Energy => "energy",
});

/// Where the isometry loss draws its vectors from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsometrySamples {
    /// Fresh standard-normal latent vectors.
    Latent,
    /// Encodings `E(v)` of the batch states.
    EncodedStates,
}

impl IsometrySamples {
    pub fn as_str(self) -> &'static str {
        match self {
            IsometrySamples::Latent => "latent",
            IsometrySamples::EncodedStates => "encoded_states",
        }
    }
}

impl fmt::Display for IsometrySamples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IsometrySamples {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latent" => Ok(IsometrySamples::Latent),
            "encoded_states" => Ok(IsometrySamples::EncodedStates),
            _ => Err(Error::Config(format!("unknown isometry sample source `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub accuracy: f64,
    pub embedding: f64,
    pub operator: f64,
    pub auxiliary: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            accuracy: 1.0,
            embedding: 1.0,
            operator: 1.0,
            auxiliary: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub accuracy: Accuracy,
    pub embedding: Embedding,
    pub operator: OperatorLoss,
    pub auxiliary: Auxiliary,
    pub weights: Weights,
    /// Power-iteration steps for the norm loss.
    pub power_iterations: usize,
    /// Vectors drawn per isometry-loss evaluation.
    pub isometry_samples: usize,
    pub isometry_source: IsometrySamples,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            accuracy: Accuracy::Full,
            embedding: Embedding::None,
            operator: OperatorLoss::None,
            auxiliary: Auxiliary::None,
            weights: Weights::default(),
            power_iterations: 10,
            isometry_samples: 64,
            isometry_source: IsometrySamples::Latent,
        }
    }
}

impl LossConfig {
    pub fn new(
        accuracy: Accuracy,
        embedding: Embedding,
        operator: OperatorLoss,
        auxiliary: Auxiliary,
    ) -> Self {
        Self {
            accuracy,
            embedding,
            operator,
            auxiliary,
            ..Self::default()
        }
    }

    /// Checks the combination rules against the operator form and dataset.
    pub fn validate(&self, form: FormKind, equation: EquationName) -> Result<()> {
        if let Accuracy::Discounted(l) = self.accuracy {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::Config(format!("lambda must lie in (0, 1], got {l}")));
            }
        }
        let w = self.weights;
        for (name, v) in [
            ("accuracy", w.accuracy),
            ("embedding", w.embedding),
            ("operator", w.operator),
            ("auxiliary", w.auxiliary),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("weight `{name}` must be positive, got {v}")));
            }
        }
        if self.operator == OperatorLoss::Determinant && form == FormKind::Dense {
            return Err(Error::Config(
                "the determinant loss requires the tridiagonal or jordan form".into(),
            ));
        }
        if self.auxiliary == Auxiliary::Energy && equation != EquationName::Pendulum {
            return Err(Error::Config(format!(
                "the energy loss is only defined for the pendulum, not {equation}"
            )));
        }
        if self.operator == OperatorLoss::Norm && self.power_iterations == 0 {
            return Err(Error::Config("power_iterations must be positive".into()));
        }
        if self.operator == OperatorLoss::Isometry && self.isometry_samples == 0 {
            return Err(Error::Config("isometry_samples must be positive".into()));
        }
        Ok(())
    }
}
