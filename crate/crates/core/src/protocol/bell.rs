//! Two qubits sharing one cavity: the qubit analogue of the pair protocol,
//! stabilizing `|φ₋⟩ = (|ge⟩ − |eg⟩)/√2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::builders::CollapseChannel;
use super::config::mhz_to_rad_per_ns;
use super::hamiltonian::{Modulation, TimeDependentHamiltonian};
use super::ops::{sigma_minus, sigma_x, sigma_y, sigma_z};
use crate::algebra::{
    cavity_annihilation, cavity_number, embed, Factor, OperatorMatrix, PureState, SpaceLayout, C64,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellParams {
    pub chi_a: f64,
    pub chi_b: f64,
    pub kappa: f64,
    pub omega_0: f64,
    pub omega_n: f64,
    pub n_drive: u32,
    pub photon_cutoff: usize,
    /// Qubit `T₁` in ns; infinite disables relaxation.
    #[serde(with = "super::config::time_ns")]
    pub t1: f64,
}

impl Default for BellParams {
    fn default() -> Self {
        let kappa = mhz_to_rad_per_ns(2.0);
        BellParams {
            chi_a: mhz_to_rad_per_ns(40.0),
            chi_b: mhz_to_rad_per_ns(40.0),
            kappa,
            omega_0: kappa / 2.0,
            omega_n: kappa,
            n_drive: 2,
            photon_cutoff: 3,
            t1: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BellScenario {
    pub layout: Arc<SpaceLayout>,
    pub hamiltonian: TimeDependentHamiltonian,
    pub channels: Vec<CollapseChannel>,
    /// `|φ₋⟩⟨φ₋| ⊗ I_cavity`.
    pub target: OperatorMatrix,
    /// `|gg⟩ ⊗ |0⟩`.
    pub initial: PureState,
}

pub fn build_qubit_bell_scenario(p: &BellParams) -> Result<BellScenario> {
    if !(p.kappa > 0.0) || p.photon_cutoff < (p.n_drive as usize).max(1) {
        return Err(Error::Config(
            "bell scenario needs kappa > 0 and cutoff >= max(1, n_drive)".into(),
        ));
    }
    if !(p.t1 > 0.0) {
        return Err(Error::Config("bell scenario needs T1 > 0".into()));
    }
    let layout = Arc::new(SpaceLayout::new(vec![
        Factor::qubit(),
        Factor::qubit(),
        Factor::cavity(p.photon_cutoff)?,
    ])?);
    let q = |m: nalgebra::DMatrix<C64>, k: usize| embed(&m, k, &layout);
    let num = cavity_number(2, &layout)?;
    let zsum = &q(sigma_z(2, 0, 1) * C64::from(p.chi_a / 2.0), 0)?
        + &q(sigma_z(2, 0, 1) * C64::from(p.chi_b / 2.0), 1)?;
    let mut h = TimeDependentHamiltonian::new((&zsum * &num).with_hermitian_hint(true));
    h.add_static(&(&q(sigma_x(2, 0, 1), 0)? + &q(sigma_x(2, 0, 1), 1)?).scale_real(p.omega_0))?;

    let wbar = 0.5 * (p.chi_a + p.chi_b);
    let a = cavity_annihilation(2, &layout)?;
    let eps = p.kappa * (p.n_drive as f64).sqrt() / 2.0;
    h.add_modulated(
        &a + &a.adjoint(),
        Modulation::Cos {
            amplitude: 2.0 * eps,
            omega: wbar,
        },
    )?;
    let omega = p.n_drive as f64 * wbar;
    let x = &q(sigma_x(2, 0, 1), 0)? - &q(sigma_x(2, 0, 1), 1)?;
    let y = &q(sigma_y(2, 0, 1), 0)? - &q(sigma_y(2, 0, 1), 1)?;
    h.add_modulated(
        x,
        Modulation::Cos {
            amplitude: p.omega_n,
            omega,
        },
    )?;
    h.add_modulated(
        y,
        Modulation::Sin {
            amplitude: -p.omega_n,
            omega,
        },
    )?;

    let mut channels = vec![CollapseChannel {
        op: a,
        rate: p.kappa,
        label: "cavity_0".into(),
    }];
    if p.t1.is_finite() {
        for k in 0..2 {
            channels.push(CollapseChannel {
                op: q(sigma_minus(2, 0, 1), k)?,
                rate: 1.0 / p.t1,
                label: format!("relax_{k}"),
            });
        }
    }

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut phi = nalgebra::DMatrix::<C64>::zeros(4, 4);
    // basis order |gg⟩, |ge⟩, |eg⟩, |ee⟩
    let v = [0.0, s, -s, 0.0];
    for r in 0..4 {
        for c in 0..4 {
            phi[(r, c)] = C64::from(v[r] * v[c]);
        }
    }
    let target = crate::algebra::embed_block(&phi, 0, 2, &layout)?.with_hermitian_hint(true);
    let initial = PureState::from_digits(layout.clone(), &[0, 0, 0])?;
    Ok(BellScenario {
        layout,
        hamiltonian: h,
        channels,
        target,
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singlet_is_dark_for_zero_photon_drive() {
        let sc = build_qubit_bell_scenario(&BellParams::default()).unwrap();
        let layout = &sc.layout;
        let mut psi = vec![C64::from(0.0); layout.total_dim()];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        psi[layout.index_of(&[0, 1, 0]).unwrap()] = C64::from(s);
        psi[layout.index_of(&[1, 0, 0]).unwrap()] = C64::from(-s);
        let rx = &embed(&sigma_x(2, 0, 1), 0, layout).unwrap()
            + &embed(&sigma_x(2, 0, 1), 1, layout).unwrap();
        let out = rx.apply(&psi);
        assert!(out.iter().all(|z| z.norm() < 1e-15));
        let proj = sc.target.apply(&psi);
        assert!(proj.iter().zip(&psi).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn scenario_shapes() {
        let sc = build_qubit_bell_scenario(&BellParams::default()).unwrap();
        assert_eq!(sc.layout.total_dim(), 16);
        assert_eq!(sc.hamiltonian.modulated_parts.len(), 3);
        assert_eq!(sc.channels.len(), 1);
        assert!(sc.hamiltonian.hermiticity_error_at(&[0.0, 3.3, 100.0]) < 1e-14);
    }
}
