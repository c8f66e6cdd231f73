use std::fmt;
use std::str::FromStr;

use crate::dynamics::EquationName;
use crate::error::{Error, Result};
use crate::koopman::FormKind;
use crate::losses::{Accuracy, Auxiliary, Embedding, LossConfig, OperatorLoss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccuracyKind {
    Full,
    Max,
    Discounted,
}

impl AccuracyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccuracyKind::Full => "full",
            AccuracyKind::Max => "max",
            AccuracyKind::Discounted => "discounted",
        }
    }
}

impl FromStr for AccuracyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AccuracyKind::Full),
            "max" => Ok(AccuracyKind::Max),
            "discounted" => Ok(AccuracyKind::Discounted),
            _ => Err(Error::Config(format!("unknown accuracy loss `{s}`"))),
        }
    }
}

impl fmt::Display for AccuracyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional enumeration filters. Determinant with the dense form is always
/// excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Running without an operator loss only with the dense form.
    NoOperatorLossOnlyDense,
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_operator_loss_only_dense" => Ok(Constraint::NoOperatorLossOnlyDense),
            _ => Err(Error::Config(format!("unknown constraint `{s}`"))),
        }
    }
}

/// One point of a search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub id: usize,
    pub encoding_dim: usize,
    pub form: FormKind,
    pub accuracy: Accuracy,
    pub embedding: Embedding,
    pub operator: OperatorLoss,
    pub auxiliary: Auxiliary,
}

impl Combination {
    /// `template` with this combination's four terms substituted.
    pub fn loss_config(&self, template: &LossConfig) -> LossConfig {
        LossConfig {
            accuracy: self.accuracy,
            embedding: self.embedding,
            operator: self.operator,
            auxiliary: self.auxiliary,
            ..template.clone()
        }
    }

    /// Equality of option values, ignoring the id.
    pub fn same_options(&self, other: &Combination) -> bool {
        Combination { id: 0, ..*self } == Combination { id: 0, ..*other }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub equation: EquationName,
    pub encoding_dims: Vec<usize>,
    pub forms: Vec<FormKind>,
    pub accuracies: Vec<AccuracyKind>,
    /// Expanded for `discounted`, one level per factor.
    pub discount_factors: Vec<f64>,
    pub embeddings: Vec<Embedding>,
    pub operators: Vec<OperatorLoss>,
    pub auxiliaries: Vec<Auxiliary>,
    pub constraints: Vec<Constraint>,
}

/// Evaluation epochs used by the large searches, per equation.
pub fn default_epochs(equation: EquationName) -> usize {
    match equation {
        EquationName::Shm => 20,
        EquationName::Pendulum => 40,
        EquationName::Lorenz => 30,
        EquationName::Heat => 20,
        EquationName::Wave => 30,
        EquationName::Burgers => 50,
        EquationName::FluidAttractor | EquationName::Kdv => 20,
    }
}

impl SearchSpace {
    /// The large-search space for `equation`: every accuracy, embedding and
    /// operator term, with and without the tridiagonal mask. Without a mask
    /// the fourth operator option is "none"; with a mask it is the determinant.
    pub fn preset(equation: EquationName) -> Self {
        let (dims, auxiliaries) = match equation {
            EquationName::Shm => (vec![16, 32, 64], vec![Auxiliary::None]),
            EquationName::Pendulum => (vec![32, 64], vec![Auxiliary::None, Auxiliary::Energy]),
            EquationName::Lorenz => (vec![32, 64], vec![Auxiliary::None]),
            EquationName::Heat => (vec![64, 128], vec![Auxiliary::None, Auxiliary::AbsoluteMax]),
            EquationName::Wave => (vec![256], vec![Auxiliary::None, Auxiliary::AbsoluteMax]),
            EquationName::Burgers => (vec![512, 1024], vec![Auxiliary::None, Auxiliary::AbsoluteMax]),
            EquationName::FluidAttractor => (vec![32, 64], vec![Auxiliary::None]),
            EquationName::Kdv => (vec![64, 128], vec![Auxiliary::None, Auxiliary::AbsoluteMax]),
        };
        Self {
            equation,
            encoding_dims: dims,
            forms: vec![FormKind::Dense, FormKind::Tridiagonal],
            accuracies: vec![AccuracyKind::Full, AccuracyKind::Max, AccuracyKind::Discounted],
            discount_factors: vec![0.975],
            embeddings: vec![Embedding::Reconstruction, Embedding::Consistency, Embedding::Metric],
            operators: vec![
                OperatorLoss::Isometry,
                OperatorLoss::Norm,
                OperatorLoss::Unitary,
                OperatorLoss::Determinant,
                OperatorLoss::None,
            ],
            auxiliaries,
            constraints: vec![Constraint::NoOperatorLossOnlyDense],
        }
    }

    /// Every operator form against every operator loss (including none),
    /// trained with full accuracy and reconstruction only.
    pub fn operator_study(equation: EquationName, encoding_dim: usize) -> Self {
        Self {
            equation,
            encoding_dims: vec![encoding_dim],
            forms: FormKind::ALL.to_vec(),
            accuracies: vec![AccuracyKind::Full],
            discount_factors: vec![],
            embeddings: vec![Embedding::Reconstruction],
            operators: vec![
                OperatorLoss::None,
                OperatorLoss::Isometry,
                OperatorLoss::Norm,
                OperatorLoss::Unitary,
                OperatorLoss::Determinant,
            ],
            auxiliaries: vec![Auxiliary::None],
            constraints: vec![],
        }
    }

    fn accuracy_levels(&self) -> Result<Vec<Accuracy>> {
        let mut out = Vec::new();
        for &a in &self.accuracies {
            match a {
                AccuracyKind::Full => out.push(Accuracy::Full),
                AccuracyKind::Max => out.push(Accuracy::Max),
                AccuracyKind::Discounted => {
                    if self.discount_factors.is_empty() {
                        return Err(Error::Config(
                            "discounted accuracy needs at least one discount factor".into(),
                        ));
                    }
                    for &l in &self.discount_factors {
                        if !(l > 0.0 && l <= 1.0) {
                            return Err(Error::Config(format!(
                                "discount factor must lie in (0, 1], got {l}"
                            )));
                        }
                        out.push(Accuracy::Discounted(l));
                    }
                }
            }
        }
        Ok(out)
    }

    fn allowed(&self, form: FormKind, op: OperatorLoss, aux: Auxiliary) -> bool {
        if op == OperatorLoss::Determinant && form == FormKind::Dense {
            return false;
        }
        if aux == Auxiliary::Energy && self.equation != EquationName::Pendulum {
            return false;
        }
        self.constraints.iter().all(|c| match c {
            Constraint::NoOperatorLossOnlyDense => op != OperatorLoss::None || form == FormKind::Dense,
        })
    }

    /// Cartesian product in declared order (encoding dim outermost, then
    /// form, accuracy, embedding, operator loss, auxiliary), filtered by the
    /// constraints. Ids count from 0 in that order.
    pub fn enumerate(&self) -> Result<Vec<Combination>> {
        let accuracies = self.accuracy_levels()?;
        let mut out = Vec::new();
        for &encoding_dim in &self.encoding_dims {
            for &form in &self.forms {
                for &accuracy in &accuracies {
                    for &embedding in &self.embeddings {
                        for &operator in &self.operators {
                            for &auxiliary in &self.auxiliaries {
                                if !self.allowed(form, operator, auxiliary) {
                                    continue;
                                }
                                out.push(Combination {
                                    id: out.len(),
                                    encoding_dim,
                                    form,
                                    accuracy,
                                    embedding,
                                    operator,
                                    auxiliary,
                                });
                            }
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("the search space is empty after applying constraints".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_counts() {
        assert_eq!(SearchSpace::preset(EquationName::Shm).enumerate().unwrap().len(), 216);
        assert_eq!(SearchSpace::preset(EquationName::Lorenz).enumerate().unwrap().len(), 144);
        assert_eq!(SearchSpace::preset(EquationName::Pendulum).enumerate().unwrap().len(), 288);
        assert_eq!(SearchSpace::preset(EquationName::Heat).enumerate().unwrap().len(), 288);
        assert_eq!(SearchSpace::preset(EquationName::Burgers).enumerate().unwrap().len(), 288);
        let study = SearchSpace::operator_study(EquationName::Kdv, 16).enumerate().unwrap();
        assert_eq!(study.len(), 14);
    }

    #[test]
    fn determinant_never_dense() {
        let mut space = SearchSpace::preset(EquationName::Shm);
        space.constraints.clear();
        space.forms = FormKind::ALL.to_vec();
        let combos = space.enumerate().unwrap();
        assert!(combos
            .iter()
            .all(|c| !(c.operator == OperatorLoss::Determinant && c.form == FormKind::Dense)));
        assert!(combos.iter().enumerate().all(|(i, c)| c.id == i));
    }

    #[test]
    fn single_point_and_empty() {
        let mut space = SearchSpace::operator_study(EquationName::Shm, 8);
        space.forms = vec![FormKind::Jordan];
        space.operators = vec![OperatorLoss::Unitary];
        assert_eq!(space.enumerate().unwrap().len(), 1);
        space.forms = vec![FormKind::Dense];
        space.operators = vec![OperatorLoss::Determinant];
        assert!(matches!(space.enumerate(), Err(Error::Config(_))));
    }

    #[test]
    fn discount_factors_expand() {
        let mut space = SearchSpace::operator_study(EquationName::Shm, 8);
        space.forms = vec![FormKind::Dense];
        space.operators = vec![OperatorLoss::None];
        space.accuracies = vec![AccuracyKind::Full, AccuracyKind::Discounted];
        space.discount_factors = vec![1.0, 0.975, 0.95];
        let accs: Vec<_> = space.enumerate().unwrap().iter().map(|c| c.accuracy).collect();
        assert_eq!(
            accs,
            vec![
                Accuracy::Full,
                Accuracy::Discounted(1.0),
                Accuracy::Discounted(0.975),
                Accuracy::Discounted(0.95)
            ]
        );
        space.discount_factors.clear();
        assert!(space.enumerate().is_err());
    }
}
