use crate::error::{Error, Result};
use crate::sparse::{DenseVector, OperatorSpec};

/// How a problem was constructed. Some schedules only make sense on one form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemForm {
    Generic,
    ShiftedIdentity,
    RowScaled,
    ColumnScaled,
    PageRank,
    EigenShift,
}

/// The pair `(P, F₀)` whose solution satisfies `X = P·X + F₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointProblem {
    operator: OperatorSpec,
    f0: DenseVector,
    recover_scale: Option<Vec<f64>>,
    form: ProblemForm,
}

impl FixedPointProblem {
    pub fn new(operator: OperatorSpec, f0: DenseVector) -> Result<Self> {
        f0.check_len(operator.n())?;
        Ok(Self {
            operator,
            f0,
            recover_scale: None,
            form: ProblemForm::Generic,
        })
    }

    /// Attaches a per-entry divisor: the reported solution is `x_i = x'_i / scale_i`.
    pub fn with_recover_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        if scale.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: scale.len(),
            });
        }
        if let Some(index) = scale.iter().position(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "recover scale entry {index} must be finite and nonzero"
            )));
        }
        self.recover_scale = Some(scale);
        Ok(self)
    }

    pub(crate) fn with_form(mut self, form: ProblemForm) -> Self {
        self.form = form;
        self
    }

    pub fn n(&self) -> usize {
        self.operator.n()
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.operator
    }

    pub fn f0(&self) -> &DenseVector {
        &self.f0
    }

    pub fn recover_scale(&self) -> Option<&[f64]> {
        self.recover_scale.as_deref()
    }

    pub fn form(&self) -> ProblemForm {
        self.form
    }

    /// Maps a vector in the problem's own unknowns back to the caller's unknowns.
    pub fn recover(&self, raw: &[f64]) -> DenseVector {
        let values = match &self.recover_scale {
            Some(scale) => raw.iter().zip(scale).map(|(x, s)| x / s).collect(),
            None => raw.to_vec(),
        };
        DenseVector::from_raw(values)
    }

    /// `‖F + (I − P)·H − F₀‖∞`, the conservation defect of a diffusion state.
    pub fn conservation_defect(&self, fluid: &[f64], history: &[f64]) -> f64 {
        let ph = self
            .operator
            .matvec_slice(history)
            .expect("history has problem dimension");
        (0..self.n())
            .map(|i| (fluid[i] + history[i] - ph[i] - self.f0[i]).abs())
            .fold(0.0, f64::max)
    }
}
