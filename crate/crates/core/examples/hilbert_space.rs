//! Composite spaces: qutrits first, then truncated cavities.

use std::sync::Arc;

use aklt_stabilizer::algebra::{cavity_number, expectation, DensityMatrix, PureState, SpaceLayout};
use aklt_stabilizer::spin::total_spin_z;

fn main() -> aklt_stabilizer::Result<()> {
    for n in 2..=4 {
        let layout = SpaceLayout::chain(n, 3)?;
        println!("{n} sites, cutoff 3: dimension {}", layout.total_dim());
    }

    let layout = Arc::new(SpaceLayout::chain(2, 3)?);
    // Levels g, e, f for the qutrits; photon numbers after the bar.
    let psi = PureState::from_label(layout.clone(), "gf|2")?;
    let sz = total_spin_z(&layout)?;
    let n = cavity_number(2, &layout)?;
    println!("|gf,2>: <Sz> = {:.3}, <n> = {:.3}", expectation(&sz, &psi)?.re, expectation(&n, &psi)?.re);

    let rho = DensityMatrix::maximally_mixed_spins(layout.clone())?;
    println!("maximally mixed pair: trace {:.3}, smallest eigenvalue {:.4}", rho.trace().re, rho.min_eigenvalue());
    Ok(())
}
