use std::sync::Arc;

use crate::algebra::{CsrMatrix, OperatorMatrix, SpaceLayout, C64};
use crate::error::{structural, Result};

/// Real scalar coefficient multiplying a modulated Hamiltonian term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modulation {
    /// `amplitude · cos(omega · t)`
    Cos { amplitude: f64, omega: f64 },
    /// `amplitude · sin(omega · t)`
    Sin { amplitude: f64, omega: f64 },
}

impl Modulation {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Modulation::Cos { amplitude, omega } => amplitude * (omega * t).cos(),
            Modulation::Sin { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Modulation::Cos { amplitude, .. } | Modulation::Sin { amplitude, .. } => amplitude,
        }
    }

    fn with_amplitude(&self, amplitude: f64) -> Modulation {
        match *self {
            Modulation::Cos { omega, .. } => Modulation::Cos { amplitude, omega },
            Modulation::Sin { omega, .. } => Modulation::Sin { amplitude, omega },
        }
    }

    fn same_carrier(&self, other: &Modulation) -> bool {
        match (self, other) {
            (Modulation::Cos { omega: a, .. }, Modulation::Cos { omega: b, .. }) => a == b,
            (Modulation::Sin { omega: a, .. }, Modulation::Sin { omega: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// `H(t) = H_static + Σ_k f_k(t) H_k` with Hermitian `H_k` and real `f_k`.
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    pub static_part: OperatorMatrix,
    pub modulated_parts: Vec<(OperatorMatrix, Modulation)>,
}

impl TimeDependentHamiltonian {
    pub fn new(static_part: OperatorMatrix) -> Self {
        TimeDependentHamiltonian {
            static_part,
            modulated_parts: vec![],
        }
    }

    pub fn zero(layout: Arc<SpaceLayout>) -> Self {
        TimeDependentHamiltonian::new(OperatorMatrix::zeros(layout))
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        self.static_part.layout()
    }

    pub fn dim(&self) -> usize {
        self.static_part.dim()
    }

    pub fn add_static(&mut self, op: &OperatorMatrix) -> Result<()> {
        self.check_layout(op)?;
        self.static_part = &self.static_part + op;
        Ok(())
    }

    pub fn add_modulated(&mut self, op: OperatorMatrix, modulation: Modulation) -> Result<()> {
        self.check_layout(&op)?;
        if op.max_abs() == 0.0 || modulation.amplitude() == 0.0 {
            return Ok(());
        }
        self.modulated_parts.push((op, modulation));
        Ok(())
    }

    /// Sum of two Hamiltonians on the same space.
    pub fn plus(mut self, other: TimeDependentHamiltonian) -> Result<Self> {
        self.add_static(&other.static_part)?;
        for (op, m) in other.modulated_parts {
            self.add_modulated(op, m)?;
        }
        Ok(self)
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        let mut h = self.static_part.clone();
        for (op, m) in &self.modulated_parts {
            h = &h + &op.scale_real(m.value(t));
        }
        h
    }

    /// Terms sharing a carrier merged into one operator with unit amplitude.
    pub fn merged_terms(&self) -> Vec<(CsrMatrix, Modulation)> {
        let mut out: Vec<(CsrMatrix, Modulation)> = Vec::new();
        for (op, m) in &self.modulated_parts {
            let scaled = op.matrix().scale(C64::new(m.amplitude(), 0.0));
            match out.iter_mut().find(|(_, k)| k.same_carrier(m)) {
                Some((acc, _)) => *acc = acc.add_scaled(C64::new(1.0, 0.0), &scaled),
                None => out.push((scaled, m.with_amplitude(1.0))),
            }
        }
        out.retain(|(m, _)| m.nnz() > 0);
        out
    }

    /// Largest `|H(t) − H(t)†|` entry over the given times.
    pub fn hermiticity_error_at(&self, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| self.at(t).hermiticity_error())
            .fold(0.0, f64::max)
    }

    fn check_layout(&self, op: &OperatorMatrix) -> Result<()> {
        if op.layout() != self.layout() {
            return Err(structural(
                "operator layout differs from Hamiltonian layout",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{embed, SpaceLayout};
    use crate::protocol::ops::{qutrit_sigma_x, Transition};

    #[test]
    fn merging_preserves_value() {
        let layout = Arc::new(SpaceLayout::qutrits(2).unwrap());
        let a = embed(&qutrit_sigma_x(Transition::Ge), 0, &layout).unwrap();
        let b = embed(&qutrit_sigma_x(Transition::Gf), 1, &layout).unwrap();
        let mut h = TimeDependentHamiltonian::zero(layout.clone());
        h.add_modulated(
            a,
            Modulation::Cos {
                amplitude: 0.5,
                omega: 0.3,
            },
        )
        .unwrap();
        h.add_modulated(
            b,
            Modulation::Cos {
                amplitude: -2.0,
                omega: 0.3,
            },
        )
        .unwrap();
        let terms = h.merged_terms();
        assert_eq!(terms.len(), 1);
        let t = 1.7;
        let direct = h.at(t);
        let merged = terms[0].0.scale(C64::new(terms[0].1.value(t), 0.0));
        assert!(direct.matrix().max_abs_diff(&merged) < 1e-14);
    }
}
