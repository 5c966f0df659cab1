//! Builds the time-dependent Hamiltonian and collapse channels of a chain.

use aklt_stabilizer::protocol::{
    build_collapse_channels, build_full_hamiltonian, mhz_to_rad_per_ns, CavityParams, ChainConfig, QutritCoherence,
};
use aklt_stabilizer::scenario::BASE_ROW_MHZ;

fn main() -> aklt_stabilizer::Result<()> {
    let mut cfg = ChainConfig::uniform(3, CavityParams::from_mhz(BASE_ROW_MHZ));
    cfg.set_coherence(QutritCoherence::uniform(20e3, 30e3));
    let layout = cfg.layout()?;
    let h = build_full_hamiltonian(&cfg, &layout)?;
    println!("dimension {}, {} modulated terms", layout.total_dim(), h.modulated_parts.len());
    println!(
        "Omega_0 = {:.3} MHz, probe amplitude = {:.3} MHz",
        cfg.omega_0 / mhz_to_rad_per_ns(1.0),
        cfg.probe_amplitude(0) / mhz_to_rad_per_ns(1.0)
    );
    for t in [0.0, 3.7, 125.0] {
        println!("t = {t:>6} ns: Hermiticity error {:.1e}", h.at(t).hermiticity_error());
    }
    for ch in build_collapse_channels(&cfg, &layout)? {
        println!("{:<14} rate {:.3e} /ns", ch.label, ch.rate);
    }
    Ok(())
}
