//! Spin-1 view of the qutrits: total-spin sectors and the AKLT chain.
//!
//! Qutrit levels map to spin projections as `|g⟩ → m = +1`, `|e⟩ → m = 0`,
//! `|f⟩ → m = −1`, so the level index `k` carries `m = 1 − k` and
//! `|gg⟩ = |S = 2, S_z = +2⟩`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::algebra::{embed, embed_block, FactorKind, OperatorMatrix, SpaceLayout};
use crate::error::{structural, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QutritLevel {
    G,
    E,
    F,
}

impl QutritLevel {
    pub const ALL: [QutritLevel; 3] = [QutritLevel::G, QutritLevel::E, QutritLevel::F];

    pub fn index(self) -> usize {
        match self {
            QutritLevel::G => 0,
            QutritLevel::E => 1,
            QutritLevel::F => 2,
        }
    }

    /// Spin projection `m` of this level.
    pub fn m(self) -> i32 {
        1 - self.index() as i32
    }

    pub fn from_m(m: i32) -> Option<QutritLevel> {
        match m {
            1 => Some(QutritLevel::G),
            0 => Some(QutritLevel::E),
            -1 => Some(QutritLevel::F),
            _ => None,
        }
    }
}

/// Spin-1 matrices in the `(m = +1, 0, −1)` ordering.
#[derive(Clone, Debug)]
pub struct Spin1 {
    pub x: DMatrix<C64>,
    pub y: DMatrix<C64>,
    pub z: DMatrix<C64>,
}

pub fn spin1_operators() -> Spin1 {
    let r = std::f64::consts::SQRT_2;
    let mut plus = DMatrix::<C64>::zeros(3, 3);
    plus[(0, 1)] = C64::new(r, 0.0);
    plus[(1, 2)] = C64::new(r, 0.0);
    let minus = plus.adjoint();
    let x = (&plus + &minus) * C64::new(0.5, 0.0);
    let y = (&plus - &minus) * C64::new(0.0, -0.5);
    let z = DMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(-1.0, 0.0),
    ]));
    Spin1 { x, y, z }
}

/// An orthogonal projector together with the total-spin values it selects.
#[derive(Clone, Debug)]
pub struct SectorProjector {
    pub op: OperatorMatrix,
    pub sector_label: Vec<u32>,
    pub rank: usize,
}

impl SectorProjector {
    /// `max(|P² − P|, |P − P†|)` over all entries.
    pub fn projector_error(&self) -> f64 {
        let sq = &self.op * &self.op;
        sq.max_abs_diff(&self.op).max(self.op.hermiticity_error())
    }
}

/// `(S⃗_a + S⃗_b)²` on the 9-dimensional pair space.
pub fn pair_total_spin_squared() -> DMatrix<C64> {
    let s = spin1_operators();
    let id = DMatrix::<C64>::identity(3, 3);
    let mut total = DMatrix::<C64>::zeros(9, 9);
    for comp in [&s.x, &s.y, &s.z] {
        let sum = comp.kronecker(&id) + id.kronecker(comp);
        total += &sum * &sum;
    }
    total
}

/// `S⃗_a · S⃗_b` on the pair space.
pub fn pair_heisenberg() -> DMatrix<C64> {
    let s = spin1_operators();
    s.x.kronecker(&s.x) + s.y.kronecker(&s.y) + s.z.kronecker(&s.z)
}

/// Dense 9x9 projector onto total spin `s` of a pair, built by diagonalising
/// `(S⃗_a + S⃗_b)²` and keeping eigenvalue `s(s+1)`.
pub fn pair_sector_projector_local(s: u32) -> Result<DMatrix<C64>> {
    if s > 2 {
        return Err(structural(format!(
            "two spin-1 particles cannot have total spin {s}"
        )));
    }
    let target = (s * (s + 1)) as f64;
    let eig = SymmetricEigen::new(pair_total_spin_squared());
    let mut p = DMatrix::<C64>::zeros(9, 9);
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        if (lam - target).abs() < 1e-8 {
            let v = eig.eigenvectors.column(k);
            p += &v * v.adjoint();
        }
    }
    Ok(p)
}

fn check_adjacent_qutrits(site_i: usize, layout: &SpaceLayout) -> Result<()> {
    let a = layout.factor(site_i)?;
    let b = layout.factor(site_i + 1)?;
    if a.kind != FactorKind::Qutrit || b.kind != FactorKind::Qutrit {
        return Err(structural(format!(
            "factors {site_i} and {} are not both qutrits",
            site_i + 1
        )));
    }
    Ok(())
}

/// Projector onto total spin `s` of qutrit factors `site_i`, `site_i + 1`,
/// identity elsewhere.
pub fn pair_total_spin_projector(
    s: u32,
    site_i: usize,
    layout: &Arc<SpaceLayout>,
) -> Result<SectorProjector> {
    check_adjacent_qutrits(site_i, layout)?;
    let local = pair_sector_projector_local(s)?;
    let op = embed_block(&local, site_i, 2, layout)?.with_hermitian_hint(true);
    let rest = layout.total_dim() / 9;
    Ok(SectorProjector {
        op,
        sector_label: vec![s],
        rank: (2 * s as usize + 1) * rest,
    })
}

/// Total `(Σ_i S⃗_i)²` over every qutrit factor of the layout.
pub fn total_spin_squared(layout: &Arc<SpaceLayout>) -> Result<OperatorMatrix> {
    let s = spin1_operators();
    let sites = layout.indices_of(FactorKind::Qutrit);
    let mut total = OperatorMatrix::zeros(layout.clone());
    for comp in [&s.x, &s.y, &s.z] {
        let mut sum = OperatorMatrix::zeros(layout.clone());
        for &i in &sites {
            sum = &sum + &embed(comp, i, layout)?;
        }
        total = &total + &(&sum * &sum);
    }
    Ok(total.with_hermitian_hint(true))
}

/// Total `S_z` over every qutrit factor.
pub fn total_spin_z(layout: &Arc<SpaceLayout>) -> Result<OperatorMatrix> {
    let s = spin1_operators();
    let mut sum = OperatorMatrix::zeros(layout.clone());
    for i in layout.indices_of(FactorKind::Qutrit) {
        sum = &sum + &embed(&s.z, i, layout)?;
    }
    Ok(sum.with_hermitian_hint(true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AkltForm {
    /// `Σ_i P^{S=2}_{i,i+1}`.
    Projector,
    /// `Σ_i [S⃗_i·S⃗_{i+1} + ⅓(S⃗_i·S⃗_{i+1})²]`.
    Bilinear,
}

/// Open-chain AKLT Hamiltonian on `n` qutrits (no cavities).
pub fn aklt_hamiltonian(n: usize, form: AkltForm) -> Result<OperatorMatrix> {
    if n < 2 {
        return Err(structural(format!(
            "the AKLT chain needs at least two sites, got {n}"
        )));
    }
    let layout = Arc::new(SpaceLayout::qutrits(n)?);
    let bond = match form {
        AkltForm::Projector => pair_sector_projector_local(2)?,
        AkltForm::Bilinear => {
            let h = pair_heisenberg();
            &h + (&h * &h) * C64::new(1.0 / 3.0, 0.0)
        }
    };
    let mut total = OperatorMatrix::zeros(layout.clone());
    for i in 0..n - 1 {
        total = &total + &embed_block(&bond, i, 2, &layout)?;
    }
    Ok(total.with_hermitian_hint(true))
}

/// Ground space of the open AKLT chain.
#[derive(Clone, Debug)]
pub struct AkltSubspace {
    pub projector: SectorProjector,
    /// Orthonormal basis of the null space (columns), length `3^n` each.
    pub basis: Vec<DVector<C64>>,
}

const NULL_THRESHOLD: f64 = 1e-9;

/// Projector onto the null space of the projector-form AKLT Hamiltonian.
pub fn aklt_subspace(n: usize) -> Result<AkltSubspace> {
    let h = aklt_hamiltonian(n, AkltForm::Projector)?;
    let eig = SymmetricEigen::new(h.to_dense());
    let basis: Vec<DVector<C64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, lam)| lam.abs() < NULL_THRESHOLD)
        .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
        .collect();
    if basis.len() != 4 {
        return Err(Error::NumericalDegeneracy(format!(
            "open AKLT chain of {n} sites has a {}-dimensional ground space, expected 4",
            basis.len()
        )));
    }
    let d = h.dim();
    let mut p = DMatrix::<C64>::zeros(d, d);
    for v in &basis {
        p += v * v.adjoint();
    }
    p.iter_mut().for_each(|z| {
        if z.norm() < 1e-14 {
            *z = C64::new(0.0, 0.0);
        }
    });
    let op = OperatorMatrix::from_dense(h.layout().clone(), &p)?;
    Ok(AkltSubspace {
        projector: SectorProjector {
            op,
            sector_label: vec![0, 1],
            rank: 4,
        },
        basis,
    })
}

pub fn aklt_subspace_projector(n: usize) -> Result<SectorProjector> {
    Ok(aklt_subspace(n)?.projector)
}

impl AkltSubspace {
    /// The unique ground state with total `S_z = +1`, as a vector on the
    /// qutrit-only space. Global phase chosen so the largest entry is real
    /// and positive.
    pub fn state_sz_plus_one(&self) -> Result<DVector<C64>> {
        let n_states = self.basis[0].len();
        let n_sites = (n_states as f64).ln() / 3f64.ln();
        let n_sites = n_sites.round() as usize;
        let layout = SpaceLayout::qutrits(n_sites)?;
        let sz: Vec<f64> = (0..n_states)
            .map(|i| layout.digits_of(i).iter().map(|&k| 1.0 - k as f64).sum())
            .collect();
        // Project the ground space onto the S_z = +1 sector and take its single direction.
        let mut block = DMatrix::<C64>::zeros(n_states, n_states);
        for v in &self.basis {
            let w = DVector::from_fn(n_states, |i, _| {
                if (sz[i] - 1.0).abs() < 1e-12 {
                    v[i]
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            block += &w * w.adjoint();
        }
        let eig = SymmetricEigen::new(block);
        let (k, lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |acc, (k, l)| if *l > acc.1 { (k, *l) } else { acc },
            );
        if lam < 0.5 {
            return Err(Error::NumericalDegeneracy(
                "no S_z = +1 state in the AKLT ground space".into(),
            ));
        }
        let mut v = eig.eigenvectors.column(k).into_owned();
        let big =
            v.iter().copied().fold(
                C64::new(0.0, 0.0),
                |a, z| if z.norm() > a.norm() { z } else { a },
            );
        let phase = big.conj() / big.norm();
        v.iter_mut().for_each(|z| *z *= phase);
        Ok(v)
    }
}

/// The nine `|S, S_z⟩` states of a qutrit pair as 9-vectors, ordered
/// `(S, S_z)` = (0,0), (1,1), (1,0), (1,−1), (2,2), …, (2,−2).
pub fn pair_coupled_basis() -> Vec<((u32, i32), DVector<C64>)> {
    let s2 = pair_total_spin_squared();
    let mut out = Vec::with_capacity(9);
    for s in 0..=2u32 {
        for sz in (-(s as i32)..=s as i32).rev() {
            // basis states of the pair with m_a + m_b = sz
            let idx: Vec<usize> = (0..9)
                .filter(|i| (1 - (i / 3) as i32) + (1 - (i % 3) as i32) == sz)
                .collect();
            let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| s2[(idx[r], idx[c])]);
            let eig = SymmetricEigen::new(block);
            let target = (s * (s + 1)) as f64;
            let k = eig
                .eigenvalues
                .iter()
                .position(|l| (l - target).abs() < 1e-8)
                .expect("sector present");
            let col = eig.eigenvectors.column(k);
            let mut v = DVector::<C64>::zeros(9);
            for (r, &i) in idx.iter().enumerate() {
                v[i] = col[r];
            }
            out.push(((s, sz), v));
        }
    }
    out
}
