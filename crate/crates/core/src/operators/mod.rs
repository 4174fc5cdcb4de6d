//! Matrix-free operators on lattice spinor fields.
//!
//! Every operator is a [`LinOp`]: a label, a hermiticity hint and a pure
//! apply function. Position multipliers act pointwise on stored samples,
//! momentum multipliers go through the unitary offset transform.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::grid::{Field, GridError, GridSpec};
use crate::model::ModelError;

mod dirac;
mod eigen;
mod lattice;
mod limits;
mod residual;

pub use dirac::*;
pub use eigen::*;
pub use lattice::Lattice;
pub use limits::*;
pub use residual::*;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigensolver did not converge after {iterations} iterations (last residuals {last:?})")]
    NotConverged {
        iterations: usize,
        last: Vec<f64>,
        history: Vec<f64>,
    },
}

pub type ApplyFn<const C: usize> = dyn Fn(&Field<C>) -> Field<C> + Send + Sync;

/// Linear operator on C-component fields over one grid.
#[derive(Clone)]
pub struct LinOp<const C: usize> {
    label: String,
    hermitian_hint: bool,
    spec: GridSpec,
    apply: Arc<ApplyFn<C>>,
}

pub type ScalarOp = LinOp<1>;
pub type PauliOp = LinOp<2>;
pub type DiracOp = LinOp<4>;

impl<const C: usize> fmt::Debug for LinOp<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinOp")
            .field("label", &self.label)
            .field("hermitian_hint", &self.hermitian_hint)
            .finish_non_exhaustive()
    }
}

impl<const C: usize> LinOp<C> {
    pub fn new(
        label: impl Into<String>,
        hermitian_hint: bool,
        spec: GridSpec,
        apply: impl Fn(&Field<C>) -> Field<C> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            hermitian_hint,
            spec,
            apply: Arc::new(apply),
        }
    }

    pub fn identity(spec: GridSpec) -> Self {
        Self::new("1", true, spec, |f| f.clone())
    }

    pub fn scalar(spec: GridSpec, a: f64) -> Self {
        Self::new(format!("{a}"), true, spec, move |f| f.clone().scale(C64::new(a, 0.0)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_hint(mut self, hint: bool) -> Self {
        self.hermitian_hint = hint;
        self
    }

    /// Applies the operator; the field must live on this operator's grid.
    pub fn apply(&self, f: &Field<C>) -> Field<C> {
        debug_assert_eq!(f.spec(), &self.spec);
        (self.apply)(f)
    }

    pub fn try_apply(&self, f: &Field<C>) -> Result<Field<C>, GridError> {
        if f.spec() != &self.spec {
            return Err(GridError::ShapeMismatch {
                expected: self.spec,
                found: *f.spec(),
            });
        }
        Ok((self.apply)(f))
    }

    /// self ∘ other: `other` acts first.
    pub fn compose(&self, other: &Self) -> Self {
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Self::new(
            format!("{}·{}", self.label, other.label),
            false,
            self.spec,
            move |f| a(&b(f)),
        )
    }

    pub fn plus(&self, other: &Self) -> Self {
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Self::new(
            format!("({} + {})", self.label, other.label),
            self.hermitian_hint && other.hermitian_hint,
            self.spec,
            move |f| &a(f) + &b(f),
        )
    }

    pub fn minus(&self, other: &Self) -> Self {
        let (a, b) = (self.apply.clone(), other.apply.clone());
        Self::new(
            format!("({} - {})", self.label, other.label),
            self.hermitian_hint && other.hermitian_hint,
            self.spec,
            move |f| &a(f) - &b(f),
        )
    }

    pub fn scaled(&self, s: C64) -> Self {
        let a = self.apply.clone();
        Self::new(
            format!("{s}·{}", self.label),
            self.hermitian_hint && s.im == 0.0,
            self.spec,
            move |f| a(f).scale(s),
        )
    }

    /// Commutator [self, other] as an operator.
    pub fn commutator(&self, other: &Self) -> Self {
        self.compose(other)
            .minus(&other.compose(self))
            .with_label(format!("[{}, {}]", self.label, other.label))
            .with_hint(false)
    }

    /// Sum of operators (at least one).
    pub fn sum(ops: &[Self]) -> Self {
        let first = ops.first().expect("sum of no operators").clone();
        ops[1..].iter().fold(first, |acc, op| acc.plus(op))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;

    fn ramp(spec: GridSpec) -> ScalarField {
        let data = (0..spec.len()).map(|i| C64::new(i as f64 * 1e-3, 1.0 - i as f64 * 1e-4)).collect();
        ScalarField::from_components(spec, [data]).unwrap()
    }

    #[test]
    fn combinators_follow_their_definitions() {
        let spec = GridSpec::new(16, 8.0).unwrap();
        let f = ramp(spec);
        let two = ScalarOp::scalar(spec, 2.0);
        let three = ScalarOp::scalar(spec, 3.0);
        let expect = |op: &ScalarOp, factor: C64| {
            let diff = &op.apply(&f) - &f.clone().scale(factor);
            assert!(diff.norm() <= 1e-14 * f.norm(), "{}", op.label());
        };
        expect(&two.compose(&three), C64::new(6.0, 0.0));
        expect(&two.plus(&three), C64::new(5.0, 0.0));
        expect(&two.minus(&three), C64::new(-1.0, 0.0));
        expect(&two.scaled(C64::new(0.0, 1.0)), C64::new(0.0, 2.0));
        expect(&ScalarOp::sum(&[two.clone(), three.clone(), ScalarOp::identity(spec)]), C64::new(6.0, 0.0));
        expect(&two.commutator(&three), C64::new(0.0, 0.0));
    }

    #[test]
    fn hints_propagate_conservatively() {
        let spec = GridSpec::new(16, 8.0).unwrap();
        let a = ScalarOp::scalar(spec, 2.0);
        assert!(a.plus(&a).hermitian_hint());
        assert!(!a.scaled(C64::new(0.0, 1.0)).hermitian_hint());
        assert!(!a.compose(&a).hermitian_hint());
        assert!(!a.commutator(&a).hermitian_hint());
    }

    #[test]
    fn try_apply_rejects_other_grids() {
        let op = ScalarOp::identity(GridSpec::new(16, 8.0).unwrap());
        let other = ScalarField::zeros(GridSpec::new(16, 9.0).unwrap());
        assert!(matches!(op.try_apply(&other), Err(GridError::ShapeMismatch { .. })));
    }
}
