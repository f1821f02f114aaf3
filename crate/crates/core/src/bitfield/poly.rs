use super::field::{Field, FieldElement};
use crate::error::{param, Result};

/// Polynomial over a single field, coefficients lowest degree first. The
/// leading coefficient is nonzero unless the polynomial is zero (empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    field: Field,
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn zero(field: Field) -> Self {
        Polynomial {
            field,
            coeffs: Vec::new(),
        }
    }

    pub fn new(field: Field, mut coeffs: Vec<FieldElement>) -> Result<Self> {
        if let Some(bad) = coeffs.iter().find(|c| c.field() != field) {
            return param(format!("coefficient {bad:?} not in {field:?}"));
        }
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Ok(Polynomial { field, coeffs })
    }

    pub fn from_values(field: Field, values: &[u64]) -> Result<Self> {
        let coeffs = values
            .iter()
            .map(|&v| field.element(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(field, coeffs)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ_j c_j a^j`, by Horner's rule.
    pub fn eval(&self, a: &FieldElement) -> Result<FieldElement> {
        if a.field() != self.field {
            return param(format!(
                "evaluation point in {:?}, polynomial over {:?}",
                a.field(),
                self.field
            ));
        }
        let mut acc = self.field.zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(a)?.add(c)?;
        }
        Ok(acc)
    }
}

pub fn poly_eval(p: &Polynomial, a: &FieldElement) -> Result<FieldElement> {
    p.eval(a)
}
