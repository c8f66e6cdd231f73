use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::seeding::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormKind {
    Dense,
    Tridiagonal,
    Jordan,
}

impl FormKind {
    pub const ALL: [FormKind; 3] = [FormKind::Dense, FormKind::Tridiagonal, FormKind::Jordan];

    pub fn as_str(self) -> &'static str {
        match self {
            FormKind::Dense => "dense",
            FormKind::Tridiagonal => "tridiagonal",
            FormKind::Jordan => "jordan",
        }
    }

    /// Number of learnable operator entries for encoding dimension `d`.
    pub fn param_count(self, d: usize) -> usize {
        match self {
            FormKind::Dense => d * d,
            FormKind::Tridiagonal => 3 * d - 2,
            FormKind::Jordan => d,
        }
    }

    pub fn check_dim(self, d: usize) -> Result<()> {
        match self {
            _ if d == 0 => Err(Error::Contract("encoding dimension must be positive".into())),
            FormKind::Tridiagonal if d < 2 => Err(Error::Contract(
                "tridiagonal form needs encoding dimension at least 2".into(),
            )),
            FormKind::Jordan if !d.is_multiple_of(2) => Err(Error::Contract(format!(
                "jordan form needs an even encoding dimension, got {d}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown operator form `{s}`")))
    }
}

/// The latent operator `K`. Structured forms store only their free entries.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorForm {
    /// `k` is `d × d`.
    Dense { d: usize, k: Tensor },
    /// Diagonal `a` (length d), superdiagonal `b` and subdiagonal `c`
    /// (length d−1): `K[i][i+1] = b[i]`, `K[i+1][i] = c[i]`.
    Tridiagonal { d: usize, a: Tensor, b: Tensor, c: Tensor },
    /// Blocks `[[re_i, im_i], [−im_i, re_i]]` on the diagonal.
    Jordan { d: usize, re: Tensor, im: Tensor },
}

/// An operator recorded on a tape. `params` follows [`OperatorForm::params`].
#[derive(Debug, Clone)]
pub struct BoundOperator {
    pub kind: FormKind,
    pub d: usize,
    pub params: Vec<Var>,
    /// The materialized `d × d` matrix.
    pub matrix: Var,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl OperatorForm {
    /// Near-identity initialization.
    pub fn init(kind: FormKind, d: usize, rng: &mut Rng) -> Result<Self> {
        kind.check_dim(d)?;
        Ok(match kind {
            FormKind::Dense => {
                let values = (0..d * d)
                    .map(|i| {
                        let eye = if i / d == i % d { 1.0 } else { 0.0 };
                        eye + 0.01 * normal(rng)
                    })
                    .collect();
                OperatorForm::Dense {
                    d,
                    k: Tensor::param(vec![d, d], values)?,
                }
            }
            FormKind::Tridiagonal => {
                let a = (0..d).map(|_| 1.0 + 0.01 * normal(rng)).collect();
                let b = (0..d - 1).map(|_| 0.01 * normal(rng)).collect();
                let c = (0..d - 1).map(|_| 0.01 * normal(rng)).collect();
                OperatorForm::Tridiagonal {
                    d,
                    a: Tensor::param(vec![d], a)?,
                    b: Tensor::param(vec![d - 1], b)?,
                    c: Tensor::param(vec![d - 1], c)?,
                }
            }
            FormKind::Jordan => {
                let phi: Vec<f64> = (0..d / 2).map(|_| rng.random_range(-0.05..=0.05)).collect();
                OperatorForm::Jordan {
                    d,
                    re: Tensor::param(vec![d / 2], phi.iter().map(|p| p.cos()).collect())?,
                    im: Tensor::param(vec![d / 2], phi.iter().map(|p| p.sin()).collect())?,
                }
            }
        })
    }

    pub fn dense(k: Tensor) -> Result<Self> {
        match k.shape() {
            [r, c] if r == c => Ok(OperatorForm::Dense { d: *r, k }),
            s => Err(Error::Contract(format!("dense operator must be square, got {s:?}"))),
        }
    }

    pub fn tridiagonal(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let d = a.len();
        FormKind::Tridiagonal.check_dim(d)?;
        if b.len() != d - 1 || c.len() != d - 1 {
            return Err(Error::Dimension {
                op: "tridiagonal",
                left: vec![d],
                right: vec![b.len(), c.len()],
            });
        }
        Ok(OperatorForm::Tridiagonal {
            d,
            a: Tensor::param(vec![d], a)?,
            b: Tensor::param(vec![d - 1], b)?,
            c: Tensor::param(vec![d - 1], c)?,
        })
    }

    pub fn jordan(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() || re.is_empty() {
            return Err(Error::Dimension {
                op: "jordan",
                left: vec![re.len()],
                right: vec![im.len()],
            });
        }
        let d = 2 * re.len();
        Ok(OperatorForm::Jordan {
            d,
            re: Tensor::param(vec![d / 2], re)?,
            im: Tensor::param(vec![d / 2], im)?,
        })
    }

    pub fn kind(&self) -> FormKind {
        match self {
            OperatorForm::Dense { .. } => FormKind::Dense,
            OperatorForm::Tridiagonal { .. } => FormKind::Tridiagonal,
            OperatorForm::Jordan { .. } => FormKind::Jordan,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorForm::Dense { d, .. }
            | OperatorForm::Tridiagonal { d, .. }
            | OperatorForm::Jordan { d, .. } => *d,
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            OperatorForm::Dense { k, .. } => vec![k],
            OperatorForm::Tridiagonal { a, b, c, .. } => vec![a, b, c],
            OperatorForm::Jordan { re, im, .. } => vec![re, im],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            OperatorForm::Dense { k, .. } => vec![k],
            OperatorForm::Tridiagonal { a, b, c, .. } => vec![a, b, c],
            OperatorForm::Jordan { re, im, .. } => vec![re, im],
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Dense row-major `d × d` materialization.
    pub fn matrix(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        match self {
            OperatorForm::Dense { k, .. } => m.copy_from_slice(k.values()),
            OperatorForm::Tridiagonal { a, b, c, .. } => {
                for (i, &v) in a.values().iter().enumerate() {
                    m[i * d + i] = v;
                }
                for i in 0..d - 1 {
                    m[i * d + i + 1] = b.values()[i];
                    m[(i + 1) * d + i] = c.values()[i];
                }
            }
            OperatorForm::Jordan { re, im, .. } => {
                for (i, (&a, &b)) in re.values().iter().zip(im.values()).enumerate() {
                    let (p, q) = (2 * i, 2 * i + 1);
                    m[p * d + p] = a;
                    m[p * d + q] = b;
                    m[q * d + p] = -b;
                    m[q * d + q] = a;
                }
            }
        }
        m
    }

    /// Eigenvalues `re_i ± im_i·i` of a Jordan form, one conjugate pair per block.
    pub fn jordan_eigenvalues(&self) -> Result<Vec<(Complex64, Complex64)>> {
        match self {
            OperatorForm::Jordan { re, im, .. } => Ok(re
                .values()
                .iter()
                .zip(im.values())
                .map(|(&a, &b)| (Complex64::new(a, b), Complex64::new(a, -b)))
                .collect()),
            other => Err(Error::Contract(format!(
                "eigenvalue readout requires the jordan form, got {}",
                other.kind()
            ))),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<BoundOperator> {
        let d = self.dim();
        let params: Vec<Var> = self.params().into_iter().map(|t| tape.leaf(t)).collect();
        let matrix = match self {
            OperatorForm::Dense { .. } => params[0],
            OperatorForm::Tridiagonal { .. } => {
                let diag = (0..d).map(|i| (i * d + i, 1.0)).collect();
                let upper = (0..d - 1).map(|i| (i * d + i + 1, 1.0)).collect();
                let lower = (0..d - 1).map(|i| ((i + 1) * d + i, 1.0)).collect();
                let a = tape.scatter(params[0], vec![d, d], diag)?;
                let b = tape.scatter(params[1], vec![d, d], upper)?;
                let c = tape.scatter(params[2], vec![d, d], lower)?;
                let ab = tape.add(a, b)?;
                tape.add(ab, c)?
            }
            OperatorForm::Jordan { .. } => {
                let h = d / 2;
                let first = (0..h).map(|i| (2 * i * d + 2 * i, 1.0)).collect();
                let second = (0..h).map(|i| ((2 * i + 1) * d + 2 * i + 1, 1.0)).collect();
                let upper = (0..h).map(|i| (2 * i * d + 2 * i + 1, 1.0)).collect();
                let lower = (0..h).map(|i| ((2 * i + 1) * d + 2 * i, -1.0)).collect();
                let a1 = tape.scatter(params[0], vec![d, d], first)?;
                let a2 = tape.scatter(params[0], vec![d, d], second)?;
                let b1 = tape.scatter(params[1], vec![d, d], upper)?;
                let b2 = tape.scatter(params[1], vec![d, d], lower)?;
                let diag = tape.add(a1, a2)?;
                let off = tape.add(b1, b2)?;
                tape.add(diag, off)?
            }
        };
        Ok(BoundOperator {
            kind: self.kind(),
            d,
            params,
            matrix,
        })
    }
}
