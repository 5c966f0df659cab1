//! Quantum-jump unravelling of the pair protocol compared with the master
//! equation, and bit-identical reruns from the same seed.

use aklt_stabilizer::algebra::{spin_basis_states, DensityMatrix};
use aklt_stabilizer::analysis::build_observable_set;
use aklt_stabilizer::mesolve::{evolve, IntegratorSettings};
use aklt_stabilizer::protocol::{build_collapse_channels, build_full_hamiltonian, CavityParams, ChainConfig};
use aklt_stabilizer::scenario::BASE_ROW_MHZ;
use aklt_stabilizer::trajectories::{run_ensemble, InitialCondition, TrajectorySettings};

fn main() -> aklt_stabilizer::Result<()> {
    let n_traj = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let cfg = ChainConfig::uniform(2, CavityParams::from_mhz(BASE_ROW_MHZ));
    let layout = cfg.layout()?;
    let h = build_full_hamiltonian(&cfg, &layout)?;
    let channels = build_collapse_channels(&cfg, &layout)?;
    let obs = build_observable_set(&layout, 2)?;
    let grid: Vec<f64> = (0..=8).map(|k| 500.0 * k as f64).collect();

    let me = evolve(&DensityMatrix::maximally_mixed_spins(layout.clone())?, &h, &channels, &grid, &IntegratorSettings::default(), &obs)?;
    let settings = TrajectorySettings { n_trajectories: n_traj, master_seed: 7, ..Default::default() };
    let initial = InitialCondition::uniform(spin_basis_states(&layout)?);
    let mc = run_ensemble(&initial, &h, &channels, &grid, &settings, &obs)?;

    let (a, b, e) = (me.series("P_AKLT").unwrap(), mc.series("P_AKLT").unwrap(), mc.std_err_of("P_AKLT").unwrap());
    println!("{:>7} {:>8} {:>16} {:>6}", "t (ns)", "ME", "MC", "z");
    for i in 0..grid.len() {
        let z = if e[i] > 0.0 { (b[i] - a[i]) / e[i] } else { 0.0 };
        println!("{:>7} {:>8.4} {:>8.4} ± {:.4} {:>6.2}", grid[i], a[i], b[i], e[i], z);
    }
    for (label, count) in mc.channel_labels.iter().zip(&mc.channel_jumps) {
        if *count > 0 {
            println!("{label}: {count} jumps");
        }
    }
    let again = run_ensemble(&initial, &h, &channels, &grid, &settings, &obs)?;
    println!("rerun bit-identical: {}", again.mean == mc.mean);
    Ok(())
}
