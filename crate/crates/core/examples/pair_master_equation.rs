//! A qutrit pair from the maximally mixed state under the master equation:
//! the S = 2 sector empties and the AKLT subspace fills.

use aklt_stabilizer::algebra::DensityMatrix;
use aklt_stabilizer::analysis::{build_observable_set, pair_sector_name};
use aklt_stabilizer::mesolve::{evolve, IntegratorSettings};
use aklt_stabilizer::protocol::{build_collapse_channels, build_full_hamiltonian, CavityParams, ChainConfig};
use aklt_stabilizer::scenario::BASE_ROW_MHZ;

fn main() -> aklt_stabilizer::Result<()> {
    let cfg = ChainConfig::uniform(2, CavityParams::from_mhz(BASE_ROW_MHZ));
    let layout = cfg.layout()?;
    let h = build_full_hamiltonian(&cfg, &layout)?;
    let channels = build_collapse_channels(&cfg, &layout)?;
    let obs = build_observable_set(&layout, 2)?;
    let rho0 = DensityMatrix::maximally_mixed_spins(layout.clone())?;
    let grid: Vec<f64> = (0..=10).map(|k| 1000.0 * k as f64).collect();
    let r = evolve(&rho0, &h, &channels, &grid, &IntegratorSettings::default(), &obs)?;

    let aklt = r.series("P_AKLT").unwrap();
    let s2 = r.series("P_S2").unwrap();
    let n = r.series("n_cav0").unwrap();
    println!("{:>8} {:>8} {:>8} {:>8}", "t (us)", "P_AKLT", "P_S2", "<n>");
    for i in 0..grid.len() {
        println!("{:>8.1} {:>8.4} {:>8.4} {:>8.4}", grid[i] / 1e3, aklt[i], s2[i], n[i]);
    }
    let worst = (-2..=2).map(|m| r.series(&pair_sector_name(2, m)).unwrap()[10]).fold(0.0, f64::max);
    println!("largest S = 2 population at 10 us: {worst:.4}");
    println!("{} steps in {:.1} s", r.metadata.stats.accepted, r.metadata.wall_clock_s);
    Ok(())
}
