use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::layout::{FactorKind, SpaceLayout};
use super::operator::OperatorMatrix;
use crate::error::{structural, Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Dense density matrix stored row-major.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    layout: Arc<SpaceLayout>,
    data: Vec<C64>,
}

/// State vector on a composite space.
#[derive(Clone, Debug)]
pub struct PureState {
    layout: Arc<SpaceLayout>,
    data: Vec<C64>,
}

impl PureState {
    pub fn new(layout: Arc<SpaceLayout>, data: Vec<C64>) -> Result<Self> {
        if data.len() != layout.total_dim() {
            return Err(structural(format!(
                "state of length {} does not match layout dimension {}",
                data.len(),
                layout.total_dim()
            )));
        }
        Ok(PureState { layout, data })
    }

    /// Product basis state `|index⟩`.
    pub fn basis(layout: Arc<SpaceLayout>, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(structural(format!(
                "basis index {index} out of range for dimension {d}"
            )));
        }
        let mut data = vec![ZERO; d];
        data[index] = C64::new(1.0, 0.0);
        Ok(PureState { layout, data })
    }

    /// Product basis state from per-factor digits.
    pub fn from_digits(layout: Arc<SpaceLayout>, digits: &[usize]) -> Result<Self> {
        let i = layout.index_of(digits)?;
        PureState::basis(layout, i)
    }

    /// Parses labels like `"gge"` (qutrit levels, qubits use `g`/`e`) with
    /// optional `"|0,1"` photon numbers for the cavities; cavities default to
    /// vacuum.
    pub fn from_label(layout: Arc<SpaceLayout>, label: &str) -> Result<Self> {
        let (levels, photons) = match label.split_once('|') {
            Some((l, p)) => (l, Some(p)),
            None => (label, None),
        };
        let mut digits = vec![0usize; layout.n_factors()];
        let spins: Vec<usize> = layout
            .factors()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind != FactorKind::Cavity)
            .map(|(i, _)| i)
            .collect();
        let chars: Vec<char> = levels.chars().collect();
        if chars.len() != spins.len() {
            return Err(Error::Parse(format!(
                "label `{label}` names {} levels but the layout has {} qubits/qutrits",
                chars.len(),
                spins.len()
            )));
        }
        for (ch, &fi) in chars.iter().zip(&spins) {
            let lvl = match ch {
                'g' => 0,
                'e' => 1,
                'f' => 2,
                _ => return Err(Error::Parse(format!("unknown level `{ch}` in `{label}`"))),
            };
            if lvl >= layout.factors()[fi].dim {
                return Err(Error::Parse(format!(
                    "level `{ch}` does not exist on factor {fi}"
                )));
            }
            digits[fi] = lvl;
        }
        if let Some(p) = photons {
            let cavs = layout.indices_of(FactorKind::Cavity);
            let ns: Vec<&str> = p.split(',').filter(|s| !s.is_empty()).collect();
            if ns.len() != cavs.len() {
                return Err(Error::Parse(format!(
                    "label `{label}` gives {} photon numbers for {} cavities",
                    ns.len(),
                    cavs.len()
                )));
            }
            for (n, &fi) in ns.iter().zip(&cavs) {
                digits[fi] = n
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad photon number `{n}`")))?;
            }
        }
        PureState::from_digits(layout, &digits)
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NumericalDegeneracy(
                "cannot normalize a zero state".into(),
            ));
        }
        self.data.iter_mut().for_each(|v| *v /= n);
        Ok(())
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl DensityMatrix {
    pub fn new(layout: Arc<SpaceLayout>, data: Vec<C64>) -> Result<Self> {
        let d = layout.total_dim();
        if data.len() != d * d {
            return Err(structural(format!(
                "density data of length {} does not match dimension {d}",
                data.len()
            )));
        }
        Ok(DensityMatrix { layout, data })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let d = psi.data.len();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = psi.data[i] * psi.data[j].conj();
            }
        }
        DensityMatrix {
            layout: psi.layout.clone(),
            data,
        }
    }

    /// Equal-weight mixture of the given states.
    pub fn mixture(states: &[PureState]) -> Result<Self> {
        let first = states.first().ok_or_else(|| structural("empty mixture"))?;
        let d = first.data.len();
        let w = 1.0 / states.len() as f64;
        let mut data = vec![ZERO; d * d];
        for s in states {
            for i in 0..d {
                if s.data[i] == ZERO {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += w * s.data[i] * s.data[j].conj();
                }
            }
        }
        Ok(DensityMatrix {
            layout: first.layout.clone(),
            data,
        })
    }

    /// Maximally mixed on all qubit/qutrit factors, cavities in vacuum.
    pub fn maximally_mixed_spins(layout: Arc<SpaceLayout>) -> Result<Self> {
        DensityMatrix::mixture(&spin_basis_states(&layout)?)
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dense();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-8) and positivity (-1e-8).
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NumericalDegeneracy(format!(
                "density matrix not Hermitian ({herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::NumericalDegeneracy(format!(
                "density matrix trace {tr}"
            )));
        }
        let lam = self.min_eigenvalue();
        if lam < -1e-8 {
            return Err(Error::NumericalDegeneracy(format!(
                "density matrix eigenvalue {lam:e} < 0"
            )));
        }
        Ok(())
    }
}

/// Every product basis state of the qubit/qutrit factors with all cavities in
/// vacuum, in flattened order.
pub fn spin_basis_states(layout: &Arc<SpaceLayout>) -> Result<Vec<PureState>> {
    let spins: Vec<usize> = layout
        .factors()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind != FactorKind::Cavity)
        .map(|(i, _)| i)
        .collect();
    let n: usize = spins.iter().map(|&i| layout.factors()[i].dim).product();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut digits = vec![0; layout.n_factors()];
        let mut rem = k;
        for &fi in spins.iter().rev() {
            let dim = layout.factors()[fi].dim;
            digits[fi] = rem % dim;
            rem /= dim;
        }
        out.push(PureState::from_digits(layout.clone(), &digits)?);
    }
    Ok(out)
}

/// A state an expectation value can be taken in.
pub trait ExpectationTarget {
    fn state_layout(&self) -> &Arc<SpaceLayout>;
    fn expect_unchecked(&self, op: &OperatorMatrix) -> C64;
}

impl ExpectationTarget for DensityMatrix {
    fn state_layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    /// `Tr(op · ρ)`.
    fn expect_unchecked(&self, op: &OperatorMatrix) -> C64 {
        let d = self.dim();
        op.matrix()
            .triplets()
            .map(|(r, c, v)| v * self.data[c * d + r])
            .sum()
    }
}

impl ExpectationTarget for PureState {
    fn state_layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    /// `⟨ψ|op|ψ⟩` (not divided by the norm).
    fn expect_unchecked(&self, op: &OperatorMatrix) -> C64 {
        expect_vector(op, &self.data)
    }
}

pub(crate) fn expect_vector(op: &OperatorMatrix, psi: &[C64]) -> C64 {
    let m = op.matrix();
    let mut acc = ZERO;
    for (r, pr) in psi.iter().enumerate() {
        if *pr == ZERO {
            continue;
        }
        let mut row = ZERO;
        for (c, v) in m.row(r) {
            row += v * psi[c];
        }
        acc += pr.conj() * row;
    }
    acc
}

/// Expectation value of `op` in a density matrix or state vector.
pub fn expectation<S: ExpectationTarget + ?Sized>(op: &OperatorMatrix, state: &S) -> Result<C64> {
    if op.layout().as_ref() != state.state_layout().as_ref() {
        return Err(structural("operator and state live on different layouts"));
    }
    let v = state.expect_unchecked(op);
    if op.hermitian_hint() == Some(true) {
        debug_assert!(
            v.im.abs() <= 1e-8 * v.norm().max(1.0),
            "Hermitian expectation has imaginary part {}",
            v.im
        );
    }
    Ok(v)
}
