//! The two-qubit analogue: one cavity, stabilizing (|ge> - |eg>)/sqrt(2).

use aklt_stabilizer::algebra::DensityMatrix;
use aklt_stabilizer::mesolve::{evolve, IntegratorSettings};
use aklt_stabilizer::protocol::{build_qubit_bell_scenario, BellParams};
use aklt_stabilizer::analysis::{Observable, ObservableKind};

fn main() -> aklt_stabilizer::Result<()> {
    let p = BellParams::default();
    let s = build_qubit_bell_scenario(&p)?;
    let obs = [Observable::new("P_phi_minus", s.target.clone(), ObservableKind::Population)];
    let grid: Vec<f64> = (0..=12).map(|k| 500.0 * k as f64).collect();
    let r = evolve(&DensityMatrix::from_pure(&s.initial), &s.hamiltonian, &s.channels, &grid, &IntegratorSettings::default(), &obs)?;
    let kappa_linear = p.kappa / (2.0 * std::f64::consts::PI);
    for (t, v) in grid.iter().zip(r.series("P_phi_minus").unwrap()) {
        println!("t = {:>5} ns, (kappa/2pi) t = {:>4.1}: {:.4}", t, t * kappa_linear, v);
    }
    Ok(())
}
