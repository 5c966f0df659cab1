//! Local qutrit and qubit operators on the `g, e, f` levels.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// A pair of qutrit levels `(lower, upper)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    Ge,
    Ef,
    Gf,
}

impl Transition {
    pub fn levels(self) -> (usize, usize) {
        match self {
            Transition::Ge => (0, 1),
            Transition::Ef => (1, 2),
            Transition::Gf => (0, 2),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Transition::Ge => "ge",
            Transition::Ef => "ef",
            Transition::Gf => "gf",
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `|upper⟩⟨lower|` on a `dim`-level system.
pub fn raising(dim: usize, lower: usize, upper: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(upper, lower)] = c(1.0, 0.0);
    m
}

pub fn projector(dim: usize, level: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(level, level)] = c(1.0, 0.0);
    m
}

/// `σ_z = −|lower⟩⟨lower| + |upper⟩⟨upper|`.
pub fn sigma_z(dim: usize, lower: usize, upper: usize) -> DMatrix<C64> {
    projector(dim, upper) - projector(dim, lower)
}

/// `σ₋ = |lower⟩⟨upper|`.
pub fn sigma_minus(dim: usize, lower: usize, upper: usize) -> DMatrix<C64> {
    raising(dim, lower, upper).adjoint()
}

pub fn sigma_x(dim: usize, lower: usize, upper: usize) -> DMatrix<C64> {
    let p = raising(dim, lower, upper);
    &p + p.adjoint()
}

/// `σ_y = i(σ₊ − σ₋)`, so that `cos θ σ_x − sin θ σ_y = e^{−iθ}σ₊ + h.c.`
pub fn sigma_y(dim: usize, lower: usize, upper: usize) -> DMatrix<C64> {
    let p = raising(dim, lower, upper);
    (&p - p.adjoint()) * c(0.0, 1.0)
}

pub fn qutrit_sigma_z(t: Transition) -> DMatrix<C64> {
    let (l, u) = t.levels();
    sigma_z(3, l, u)
}

pub fn qutrit_sigma_x(t: Transition) -> DMatrix<C64> {
    let (l, u) = t.levels();
    sigma_x(3, l, u)
}

pub fn qutrit_sigma_y(t: Transition) -> DMatrix<C64> {
    let (l, u) = t.levels();
    sigma_y(3, l, u)
}

pub fn qutrit_sigma_minus(t: Transition) -> DMatrix<C64> {
    let (l, u) = t.levels();
    sigma_minus(3, l, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::spin1_operators;

    #[test]
    fn rotating_combination_is_single_sideband() {
        let th: f64 = 0.37;
        let m = qutrit_sigma_x(Transition::Gf) * c(th.cos(), 0.0)
            - qutrit_sigma_y(Transition::Gf) * c(th.sin(), 0.0);
        let expected = c(th.cos(), -th.sin());
        assert!((m[(2, 0)] - expected).norm() < 1e-15);
        assert!((m[(0, 2)] - expected.conj()).norm() < 1e-15);
    }

    #[test]
    fn ladders_sum_to_scaled_spin_x() {
        let s = spin1_operators();
        let sum = qutrit_sigma_x(Transition::Ge) + qutrit_sigma_x(Transition::Ef);
        let diff = sum - &s.x * c(std::f64::consts::SQRT_2, 0.0);
        assert!(diff.camax() < 1e-15);
    }

    #[test]
    fn sigma_z_signs() {
        let z = qutrit_sigma_z(Transition::Gf);
        assert_eq!(z[(0, 0)], c(-1.0, 0.0));
        assert_eq!(z[(1, 1)], c(0.0, 0.0));
        assert_eq!(z[(2, 2)], c(1.0, 0.0));
        let m = qutrit_sigma_minus(Transition::Ef);
        assert_eq!(m[(1, 2)], c(1.0, 0.0));
    }
}
