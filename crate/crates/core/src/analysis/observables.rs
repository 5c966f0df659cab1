use std::sync::Arc;

use nalgebra::DMatrix;

use crate::algebra::{cavity_number, embed_block, FactorKind, OperatorMatrix, SpaceLayout, C64};
use crate::error::{structural, Result};
use crate::spin::{aklt_subspace_projector, pair_coupled_basis};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservableKind {
    /// Expectation must lie in `[0, 1]`.
    Population,
    PhotonNumber,
    Other,
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub op: OperatorMatrix,
    pub kind: ObservableKind,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: OperatorMatrix, kind: ObservableKind) -> Self {
        Observable { name: name.into(), op, kind }
    }
}

/// Column name of the `|S, S_z⟩⟨S, S_z|` projector of a qutrit pair.
pub fn pair_sector_name(s: u32, sz: i32) -> String {
    let sign = match sz.signum() {
        1 => "p",
        -1 => "m",
        _ => "",
    };
    format!("P_S{s}_Sz{sign}{}", sz.abs())
}

pub const AKLT_POPULATION: &str = "P_AKLT";

pub fn photon_number_name(cavity: usize) -> String {
    format!("n_cav{cavity}")
}

/// Observables recorded for an `n_sites` chain whose first `n_sites`
/// factors are the qutrits: for two sites the nine coupled-basis
/// projectors and their `S = 2` total, for every chain the AKLT-subspace
/// population and one photon number per cavity.
pub fn build_observable_set(layout: &Arc<SpaceLayout>, n_sites: usize) -> Result<Vec<Observable>> {
    if n_sites < 2 || layout.n_factors() < n_sites {
        return Err(structural(format!("layout cannot hold {n_sites} qutrits")));
    }
    if layout.factors()[..n_sites].iter().any(|f| f.kind != FactorKind::Qutrit) {
        return Err(structural("the first factors of the layout must be the qutrits"));
    }
    let mut out = Vec::new();
    if n_sites == 2 {
        let mut s2 = DMatrix::<C64>::zeros(9, 9);
        for ((s, sz), v) in pair_coupled_basis() {
            let p = &v * v.adjoint();
            if s == 2 {
                s2 += &p;
            }
            out.push(Observable::new(
                pair_sector_name(s, sz),
                embed_block(&p, 0, 2, layout)?.with_hermitian_hint(true),
                ObservableKind::Population,
            ));
        }
        out.push(Observable::new("P_S2", embed_block(&s2, 0, 2, layout)?.with_hermitian_hint(true), ObservableKind::Population));
    }
    let aklt = aklt_subspace_projector(n_sites)?.op.to_dense();
    out.push(Observable::new(
        AKLT_POPULATION,
        embed_block(&aklt, 0, n_sites, layout)?.with_hermitian_hint(true),
        ObservableKind::Population,
    ));
    let cavities = layout.indices_of(FactorKind::Cavity);
    for (i, &f) in cavities.iter().enumerate() {
        out.push(Observable::new(photon_number_name(i), cavity_number(f, layout)?, ObservableKind::PhotonNumber));
    }
    Ok(out)
}
