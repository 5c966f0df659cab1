//! Scenario files, presets, overrides, output files and a small sweep.

use aklt_stabilizer::scenario::{
    preset, run_scenario, sweep, write_outputs, GridSection, Overrides, ScenarioFile, SweepParam, Time,
};

const CUSTOM: &str = r#"
name = "custom_pair"

[chain]
n_sites = 2
photon_cutoff = 4

[[chain.cavity]]
chi_ge = 40
chi_gf = 80
chi_ge_prime = 40
chi_gf_prime = 80
kappa = 2

[[chain.qutrit]]
t1 = 30
tphi = "inf"

[initial_state]
kind = "ground_state"

[solver]
kind = "master_equation"

[grid]
t_end = 3
n_points = 31

[fit]
start = "300 ns"
"#;

fn main() -> aklt_stabilizer::Result<()> {
    let out_dir = std::env::temp_dir().join("aklt-scenario-example");
    let file = ScenarioFile::from_toml(CUSTOM)?;
    let out = run_scenario(&file)?;
    write_outputs(&out, &out_dir.join(&file.name))?;
    println!("{} -> {}", file.name, out_dir.join(&file.name).display());
    println!("final P_AKLT = {:.4}, config hash {}", out.series("P_AKLT").unwrap().last().unwrap(), &out.metadata.config_hash[..12]);

    let mut bell = preset("bell_qubit")?;
    bell.apply(&Overrides { trajectories: Some(20), seed: Some(11), ..Default::default() });
    bell.grid = GridSection { t_end: Time(2e3), n_points: 21 };
    println!("{}", bell.to_toml()?);
    let short = run_scenario(&bell)?;
    let se = short.std_err_of("P_phi_minus").unwrap();
    println!("20 trajectories: P_phi_minus(2 us) = {:.3} ± {:.3}", short.series("P_phi_minus").unwrap()[20], se[20]);

    let rows = sweep(&preset("bell_qubit")?, SweepParam::ChiScale, &["0.5".into(), "1".into(), "2".into()], Some(&out_dir), |row| {
        match &row.outcome {
            Ok(f) => println!("chi x {}: C = {:.3}, 1/b = {:.0} ns", row.value, f.c, f.convergence_time_ns()),
            Err(e) => println!("chi x {}: {e}", row.value),
        }
    })?;
    println!("{} rows written to {}", rows.len(), out_dir.join("sweep.csv").display());
    Ok(())
}
