use serde::{Deserialize, Serialize};

use crate::error::{structural, Result};

/// Physical role of one tensor factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FactorKind {
    /// Two-level system, used by the qubit Bell-state scenario.
    Qubit,
    /// Three-level transmon (|g⟩, |e⟩, |f⟩).
    Qutrit,
    /// Truncated harmonic oscillator with `dim = cutoff + 1` Fock states.
    Cavity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
}

impl Factor {
    pub fn qubit() -> Self {
        Factor {
            kind: FactorKind::Qubit,
            dim: 2,
        }
    }

    pub fn qutrit() -> Self {
        Factor {
            kind: FactorKind::Qutrit,
            dim: 3,
        }
    }

    /// A cavity holding at most `cutoff` photons.
    pub fn cavity(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(structural(format!(
                "photon cutoff must be >= 1, got {cutoff}"
            )));
        }
        Ok(Factor {
            kind: FactorKind::Cavity,
            dim: cutoff + 1,
        })
    }
}

/// Ordered registry of tensor factors.
///
/// Factor 0 varies slowest in the flattened basis index (row-major ordering),
/// so the basis state with digits `(d_0, …, d_{k-1})` lives at
/// `Σ d_i · stride(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceLayout {
    factors: Vec<Factor>,
    total_dim: usize,
}

impl SpaceLayout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(structural("layout needs at least one factor"));
        }
        for (i, f) in factors.iter().enumerate() {
            let ok = match f.kind {
                FactorKind::Qubit => f.dim == 2,
                FactorKind::Qutrit => f.dim == 3,
                FactorKind::Cavity => f.dim >= 2,
            };
            if !ok {
                return Err(structural(format!(
                    "factor {i} of kind {:?} has invalid dimension {}",
                    f.kind, f.dim
                )));
            }
        }
        let total_dim = factors.iter().map(|f| f.dim).product();
        Ok(SpaceLayout { factors, total_dim })
    }

    /// `n_sites` qutrits followed by `n_sites - 1` cavities with a common cutoff.
    pub fn chain(n_sites: usize, cutoff: usize) -> Result<Self> {
        if n_sites < 1 {
            return Err(structural("a chain needs at least one qutrit"));
        }
        let mut factors = vec![Factor::qutrit(); n_sites];
        for _ in 1..n_sites {
            factors.push(Factor::cavity(cutoff)?);
        }
        SpaceLayout::new(factors)
    }

    /// `n` qutrits and nothing else.
    pub fn qutrits(n: usize) -> Result<Self> {
        SpaceLayout::new(vec![Factor::qutrit(); n])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, index: usize) -> Result<Factor> {
        self.factors.get(index).copied().ok_or_else(|| {
            structural(format!(
                "factor index {index} out of range for a layout with {} factors",
                self.factors.len()
            ))
        })
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Flattened-index stride of factor `index`.
    pub fn stride(&self, index: usize) -> usize {
        self.factors[index + 1..].iter().map(|f| f.dim).product()
    }

    pub fn indices_of(&self, kind: FactorKind) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Flattened index of a product basis state.
    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.factors.len() {
            return Err(structural(format!(
                "expected {} digits, got {}",
                self.factors.len(),
                digits.len()
            )));
        }
        let mut index = 0;
        for (d, f) in digits.iter().zip(&self.factors) {
            if *d >= f.dim {
                return Err(structural(format!(
                    "digit {d} out of range for dimension {}",
                    f.dim
                )));
            }
            index = index * f.dim + d;
        }
        Ok(index)
    }

    /// Inverse of [`SpaceLayout::index_of`].
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (slot, f) in digits.iter_mut().zip(&self.factors).rev() {
            *slot = index % f.dim;
            index /= f.dim;
        }
        digits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_layout_orders_qutrits_first() {
        let l = SpaceLayout::chain(3, 3).unwrap();
        assert_eq!(l.n_factors(), 5);
        assert_eq!(l.total_dim(), 27 * 16);
        assert_eq!(l.indices_of(FactorKind::Qutrit), vec![0, 1, 2]);
        assert_eq!(l.indices_of(FactorKind::Cavity), vec![3, 4]);
        assert_eq!(l.stride(0), 9 * 16);
        assert_eq!(l.stride(4), 1);
    }

    #[test]
    fn digits_round_trip() {
        let l = SpaceLayout::chain(2, 2).unwrap();
        for i in 0..l.total_dim() {
            assert_eq!(l.index_of(&l.digits_of(i)).unwrap(), i);
        }
    }

    #[test]
    fn rejects_bad_factors() {
        assert!(Factor::cavity(0).is_err());
        assert!(SpaceLayout::new(vec![Factor {
            kind: FactorKind::Qutrit,
            dim: 4
        }])
        .is_err());
        assert!(SpaceLayout::new(vec![]).is_err());
        let l = SpaceLayout::qutrits(2).unwrap();
        assert!(l.factor(2).is_err());
        assert!(l.index_of(&[0, 3]).is_err());
    }
}
