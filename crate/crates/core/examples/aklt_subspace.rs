//! The AKLT ground space of open chains and the frustration-free property.

use std::sync::Arc;

use aklt_stabilizer::algebra::{OperatorMatrix, SpaceLayout};
use aklt_stabilizer::spin::{aklt_hamiltonian, aklt_subspace, pair_total_spin_projector, AkltForm};

fn main() -> aklt_stabilizer::Result<()> {
    for n in 2..=4 {
        let sub = aklt_subspace(n)?;
        let layout = Arc::new(SpaceLayout::qutrits(n)?);
        let p = &sub.projector.op;
        let mut worst: f64 = 0.0;
        for bond in 0..n - 1 {
            let p2 = pair_total_spin_projector(2, bond, &layout)?.op;
            worst = worst.max((p * &p2).max_abs());
        }
        println!(
            "N = {n}: rank {}, projector error {:.1e}, max |P_AKLT P^(S=2)_bond| = {worst:.1e}",
            sub.projector.rank,
            sub.projector.projector_error()
        );
    }

    // Per bond, P^(S=2) = (S.S + (S.S)^2/3)/2 + 1/3.
    let p = aklt_hamiltonian(3, AkltForm::Projector)?;
    let b = aklt_hamiltonian(3, AkltForm::Bilinear)?;
    let shifted = &b.scale_real(0.5) + &OperatorMatrix::identity(p.layout().clone()).scale_real(2.0 / 3.0);
    println!("N = 3: projector form vs shifted bilinear form, max difference {:.1e}", p.max_abs_diff(&shifted));

    let v = aklt_subspace(4)?.state_sz_plus_one()?;
    println!("N = 4 S_z = +1 AKLT state has {} nonzero amplitudes", v.iter().filter(|z| z.norm() > 1e-12).count());
    Ok(())
}
