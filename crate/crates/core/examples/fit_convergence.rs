//! Fitting y = A exp(-b t) + C: synthetic data, then a real pair run.

use aklt_stabilizer::analysis::{fit_exponential, FitError, FitWindow};
use aklt_stabilizer::scenario::{preset, run_scenario, GridSection, Time};

fn main() -> aklt_stabilizer::Result<()> {
    let t: Vec<f64> = (0..200).map(|i| 50.0 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| 0.65 - 0.3 * (-t / 2000.0).exp()).collect();
    let fit = fit_exponential(&t, &y, FitWindow::default())?;
    let [ea, eb, ec] = fit.std_errors();
    println!("synthetic: A = {:.6} ± {ea:.1e}, b = {:.6e} ± {eb:.1e}, C = {:.6} ± {ec:.1e}", fit.a, fit.b, fit.c);

    match fit_exponential(&t, &vec![0.9; t.len()], FitWindow::default()) {
        Err(FitError::NoDecay { .. }) => println!("constant series: no decay detected"),
        other => println!("constant series: unexpected {other:?}"),
    }

    let mut pair = preset("fig3")?;
    pair.grid = GridSection { t_end: Time(6e3), n_points: 121 };
    let out = run_scenario(&pair)?;
    let r = out.fit_result().expect("fit succeeds");
    println!(
        "pair run: C = {:.4} ± {:.4}, convergence time 1/b = {:.0} ± {:.0} ns, window {:?} ns",
        r.c,
        r.std_errors()[2],
        r.convergence_time_ns(),
        r.convergence_time_err_ns(),
        r.fit_window
    );
    Ok(())
}
