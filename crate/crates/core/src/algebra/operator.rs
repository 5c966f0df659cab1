use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::layout::{FactorKind, SpaceLayout};
use super::sparse::CsrMatrix;
use crate::error::{structural, Result};

/// A square operator on the full composite space of a [`SpaceLayout`].
///
/// Storage is always sparse; dense views are available through
/// [`OperatorMatrix::to_dense`]. Arithmetic operators panic on layout
/// mismatch, the same way shape mismatches panic in `nalgebra`.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    layout: Arc<SpaceLayout>,
    matrix: CsrMatrix,
    hermitian_hint: Option<bool>,
}

impl OperatorMatrix {
    pub fn new(layout: Arc<SpaceLayout>, matrix: CsrMatrix) -> Result<Self> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(structural(format!(
                "operator of shape {}x{} does not match layout dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(OperatorMatrix {
            layout,
            matrix,
            hermitian_hint: None,
        })
    }

    pub fn from_dense(layout: Arc<SpaceLayout>, m: &DMatrix<C64>) -> Result<Self> {
        OperatorMatrix::new(layout, CsrMatrix::from_dense(m))
    }

    pub fn identity(layout: Arc<SpaceLayout>) -> Self {
        let d = layout.total_dim();
        OperatorMatrix {
            layout,
            matrix: CsrMatrix::identity(d),
            hermitian_hint: Some(true),
        }
    }

    pub fn zeros(layout: Arc<SpaceLayout>) -> Self {
        let d = layout.total_dim();
        OperatorMatrix {
            layout,
            matrix: CsrMatrix::zeros(d, d),
            hermitian_hint: Some(true),
        }
    }

    /// Marks the operator as Hermitian (checked in debug builds).
    pub fn with_hermitian_hint(mut self, hermitian: bool) -> Self {
        if hermitian {
            debug_assert!(
                self.matrix.hermiticity_error() <= 1e-12,
                "operator flagged Hermitian deviates by {}",
                self.matrix.hermiticity_error()
            );
        }
        self.hermitian_hint = Some(hermitian);
        self
    }

    pub fn hermitian_hint(&self) -> Option<bool> {
        self.hermitian_hint
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: self.matrix.adjoint(),
            hermitian_hint: self.hermitian_hint,
        }
    }

    pub fn scale(&self, s: C64) -> OperatorMatrix {
        let hint = match self.hermitian_hint {
            Some(true) if s.im == 0.0 => Some(true),
            _ => None,
        };
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: self.matrix.scale(s),
            hermitian_hint: hint,
        }
    }

    pub fn scale_real(&self, s: f64) -> OperatorMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        &(self * other) - &(other * self)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        self.assert_same_layout(other);
        self.matrix.max_abs_diff(&other.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.matrix.hermiticity_error()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(x)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diagonal().iter().sum()
    }

    fn assert_same_layout(&self, other: &OperatorMatrix) {
        assert!(
            Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout,
            "operators live on different layouts"
        );
    }

    fn combine(&self, other: &OperatorMatrix, s: f64) -> OperatorMatrix {
        self.assert_same_layout(other);
        let hint = match (self.hermitian_hint, other.hermitian_hint) {
            (Some(true), Some(true)) => Some(true),
            _ => None,
        };
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: self.matrix.add_scaled(C64::new(s, 0.0), &other.matrix),
            hermitian_hint: hint,
        }
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.combine(rhs, -1.0)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_layout(rhs);
        OperatorMatrix {
            layout: self.layout.clone(),
            matrix: self.matrix.matmul(&rhs.matrix),
            hermitian_hint: None,
        }
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scale_real(rhs)
    }
}

/// Embeds `local_op` on factor `factor_index`, with identities elsewhere.
pub fn embed(
    local_op: &DMatrix<C64>,
    factor_index: usize,
    layout: &Arc<SpaceLayout>,
) -> Result<OperatorMatrix> {
    embed_block(local_op, factor_index, 1, layout)
}

/// Embeds an operator acting on the `count` consecutive factors starting at
/// `first_factor` (e.g. a two-site projector).
pub fn embed_block(
    local_op: &DMatrix<C64>,
    first_factor: usize,
    count: usize,
    layout: &Arc<SpaceLayout>,
) -> Result<OperatorMatrix> {
    if count == 0 || first_factor + count > layout.n_factors() {
        return Err(structural(format!(
            "factor block {first_factor}..{} out of range for {} factors",
            first_factor + count,
            layout.n_factors()
        )));
    }
    let block_dim: usize = layout.factors()[first_factor..first_factor + count]
        .iter()
        .map(|f| f.dim)
        .product();
    if local_op.nrows() != block_dim || local_op.ncols() != block_dim {
        return Err(structural(format!(
            "local operator is {}x{} but factor block has dimension {block_dim}",
            local_op.nrows(),
            local_op.ncols()
        )));
    }
    let left: usize = layout.factors()[..first_factor]
        .iter()
        .map(|f| f.dim)
        .product();
    let right: usize = layout.factors()[first_factor + count..]
        .iter()
        .map(|f| f.dim)
        .product();
    let local = CsrMatrix::from_dense(local_op);
    let mut t = Vec::with_capacity(local.nnz() * left * right);
    for l in 0..left {
        for (r, c, v) in local.triplets() {
            let row0 = (l * block_dim + r) * right;
            let col0 = (l * block_dim + c) * right;
            for m in 0..right {
                t.push((row0 + m, col0 + m, v));
            }
        }
    }
    let d = layout.total_dim();
    OperatorMatrix::new(layout.clone(), CsrMatrix::from_triplets(d, d, t))
}

/// Truncated cavity annihilation operator with entries `a[n-1, n] = √n`.
pub fn annihilation(cutoff: usize) -> Result<DMatrix<C64>> {
    if cutoff < 1 {
        return Err(structural(format!(
            "photon cutoff must be >= 1, got {cutoff}"
        )));
    }
    let d = cutoff + 1;
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Embedded `â_k` for the cavity factor `factor_index`.
pub fn cavity_annihilation(
    factor_index: usize,
    layout: &Arc<SpaceLayout>,
) -> Result<OperatorMatrix> {
    let f = layout.factor(factor_index)?;
    if f.kind != FactorKind::Cavity {
        return Err(structural(format!("factor {factor_index} is not a cavity")));
    }
    embed(&annihilation(f.dim - 1)?, factor_index, layout)
}

/// Embedded `â_k†â_k`.
pub fn cavity_number(factor_index: usize, layout: &Arc<SpaceLayout>) -> Result<OperatorMatrix> {
    let f = layout.factor(factor_index)?;
    if f.kind != FactorKind::Cavity {
        return Err(structural(format!("factor {factor_index} is not a cavity")));
    }
    let n = DMatrix::from_fn(f.dim, f.dim, |r, c| {
        if r == c {
            C64::new(r as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(embed(&n, factor_index, layout)?.with_hermitian_hint(true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::layout::Factor;
    use nalgebra::SymmetricEigen;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn embed_identity_is_identity() {
        let l = Arc::new(SpaceLayout::qutrits(2).unwrap());
        let op = embed(&DMatrix::identity(3, 3), 0, &l).unwrap();
        assert_eq!(op.matrix(), &CsrMatrix::identity(9));
    }

    #[test]
    fn embed_sigma_z_on_second_factor() {
        let two = Factor {
            kind: FactorKind::Qubit,
            dim: 2,
        };
        let l = Arc::new(SpaceLayout::new(vec![two, two]).unwrap());
        let sz = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-1.0)]));
        let op = embed(&sz, 1, &l).unwrap();
        let diag: Vec<f64> = op.matrix().diagonal().iter().map(|v| v.re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
        assert!(op.matrix().is_diagonal());
    }

    #[test]
    fn embedded_number_operator_spectrum() {
        // Brute-force eigendecomposition of (â†â) embedded on a 36-dim space.
        let l = Arc::new(
            SpaceLayout::new(vec![
                Factor::qutrit(),
                Factor::qutrit(),
                Factor::cavity(3).unwrap(),
            ])
            .unwrap(),
        );
        let a = embed(&annihilation(3).unwrap(), 2, &l).unwrap();
        assert_eq!(a.matrix().nnz(), 27);
        let n = &a.adjoint() * &a;
        let eig = SymmetricEigen::new(n.to_dense());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| *v).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, chunk) in vals.chunks(9).enumerate() {
            for v in chunk {
                assert!((v - k as f64).abs() < 1e-10, "{v} vs {k}");
            }
        }
    }

    #[test]
    fn annihilation_matrices() {
        let a1 = annihilation(1).unwrap();
        assert_eq!(
            a1,
            DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)])
        );
        let a3 = annihilation(3).unwrap();
        for n in 1..4 {
            assert!((a3[(n - 1, n)].re - (n as f64).sqrt()).abs() < 1e-15);
        }
        let num = a3.adjoint() * &a3;
        for n in 0..4 {
            assert!((num[(n, n)].re - n as f64).abs() < 1e-14);
        }
        assert!(annihilation(0).is_err());
    }

    #[test]
    fn embed_errors() {
        let l = Arc::new(SpaceLayout::qutrits(2).unwrap());
        assert!(embed(&DMatrix::identity(2, 2), 0, &l).is_err());
        assert!(embed(&DMatrix::identity(3, 3), 2, &l).is_err());
        assert!(cavity_annihilation(0, &l).is_err());
    }
}
