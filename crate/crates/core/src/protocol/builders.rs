use std::sync::Arc;

use nalgebra::DMatrix;

use super::config::{ChainConfig, DriveVariant, QutritCoherence};
use super::hamiltonian::{Modulation, TimeDependentHamiltonian};
use super::ops::{
    projector, qutrit_sigma_minus, qutrit_sigma_x, qutrit_sigma_y, qutrit_sigma_z, Transition,
};
use crate::algebra::{
    cavity_annihilation, cavity_number, embed, FactorKind, OperatorMatrix, SpaceLayout, C64,
};
use crate::error::{structural, Result};

/// A Lindblad channel `rate · D[op]`.
#[derive(Clone, Debug)]
pub struct CollapseChannel {
    pub op: OperatorMatrix,
    pub rate: f64,
    pub label: String,
}

/// Factor index of qutrit `i` in the chain layout.
pub fn qutrit_factor(i: usize) -> usize {
    i
}

/// Factor index of cavity `i` (between qutrits `i` and `i+1`).
pub fn cavity_factor(n_sites: usize, i: usize) -> usize {
    n_sites + i
}

fn check_layout(config: &ChainConfig, layout: &SpaceLayout) -> Result<()> {
    let n = config.n_sites;
    if layout.n_factors() != 2 * n - 1 {
        return Err(structural(format!(
            "layout has {} factors, a {n}-site chain needs {}",
            layout.n_factors(),
            2 * n - 1
        )));
    }
    for (k, f) in layout.factors().iter().enumerate() {
        let ok = if k < n {
            f.kind == FactorKind::Qutrit
        } else {
            f.kind == FactorKind::Cavity && f.dim == config.photon_cutoff + 1
        };
        if !ok {
            return Err(structural(format!(
                "factor {k} ({:?}, dim {}) does not match the chain config",
                f.kind, f.dim
            )));
        }
    }
    Ok(())
}

fn local(m: DMatrix<C64>, factor: usize, layout: &Arc<SpaceLayout>) -> Result<OperatorMatrix> {
    embed(&m, factor, layout)
}

/// Static dispersive coupling of every cavity to its two neighbouring qutrits.
pub fn build_system_hamiltonian(
    config: &ChainConfig,
    layout: &Arc<SpaceLayout>,
) -> Result<OperatorMatrix> {
    check_layout(config, layout)?;
    let n = config.n_sites;
    let mut h = OperatorMatrix::zeros(layout.clone());
    let e_proj = projector(3, 1);
    for (i, cav) in config.cavities.iter().enumerate() {
        let left = local(
            qutrit_sigma_z(Transition::Gf) * C64::from(cav.chi_gf / 2.0)
                + &e_proj * C64::from((cav.chi_ge - cav.chi_ef()) / 2.0),
            qutrit_factor(i),
            layout,
        )?;
        let right = local(
            qutrit_sigma_z(Transition::Gf) * C64::from(cav.chi_gf_prime / 2.0)
                + &e_proj * C64::from((cav.chi_ge_prime - cav.chi_ef_prime()) / 2.0),
            qutrit_factor(i + 1),
            layout,
        )?;
        let num = cavity_number(cavity_factor(n, i), layout)?;
        h = &h + &(&(&left + &right) * &num);
    }
    Ok(h.with_hermitian_hint(true))
}

/// Cavity probes `2ε_i cos(ω_p^i t)(â_i + â_i†)`.
pub fn build_probe(
    config: &ChainConfig,
    layout: &Arc<SpaceLayout>,
) -> Result<TimeDependentHamiltonian> {
    check_layout(config, layout)?;
    let mut h = TimeDependentHamiltonian::zero(layout.clone());
    for (i, cav) in config.cavities.iter().enumerate() {
        let a = cavity_annihilation(cavity_factor(config.n_sites, i), layout)?;
        let quad = (&a + &a.adjoint()).with_hermitian_hint(true);
        let eps = config.probe_amplitude(i);
        h.add_modulated(
            quad,
            Modulation::Cos {
                amplitude: 2.0 * eps,
                omega: cav.probe_frequency(),
            },
        )?;
    }
    Ok(h)
}

/// `Ω⁰ Σ_j (σ_x^{j,ge} + σ_x^{j,ef})`, i.e. `√2 Ω⁰ S_x^total`.
pub fn build_zero_photon_drive(
    config: &ChainConfig,
    layout: &Arc<SpaceLayout>,
) -> Result<OperatorMatrix> {
    check_layout(config, layout)?;
    let site = (qutrit_sigma_x(Transition::Ge) + qutrit_sigma_x(Transition::Ef))
        * C64::from(config.omega_0);
    let mut h = OperatorMatrix::zeros(layout.clone());
    for j in 0..config.n_sites {
        h = &h + &local(site.clone(), qutrit_factor(j), layout)?;
    }
    Ok(h.with_hermitian_hint(true))
}

/// Antisymmetric pair drive rotating with the `n`-photon-shifted transition.
///
/// For cavity `i` the drive is `(−1)^i Ωⁿ_i [cos(ωt)(σ_x^i − σ_x^{i+1}) − sin(ωt)(σ_y^i − σ_y^{i+1})]`.
/// The g↔f variant uses the `gf` ladder at `ω = n(χ_gf + χ'_gf)/2`; the `S_x`
/// variant drives the `ge` and `ef` ladders at `n(χ_ge + χ'_ge)/2` and
/// `n(χ_ef + χ'_ef)/2` respectively.
pub fn build_n_photon_drive(
    config: &ChainConfig,
    layout: &Arc<SpaceLayout>,
) -> Result<TimeDependentHamiltonian> {
    check_layout(config, layout)?;
    let mut h = TimeDependentHamiltonian::zero(layout.clone());
    let n = config.n_drive as f64;
    for (i, cav) in config.cavities.iter().enumerate() {
        let amp = config.omega_n[i] * if i % 2 == 0 { 1.0 } else { -1.0 };
        let ladders: Vec<(Transition, f64)> = match config.drive_variant {
            DriveVariant::GfRotation => vec![(Transition::Gf, n * cav.probe_frequency())],
            DriveVariant::SxRotation => vec![
                (Transition::Ge, n * 0.5 * (cav.chi_ge + cav.chi_ge_prime)),
                (
                    Transition::Ef,
                    n * 0.5 * (cav.chi_ef() + cav.chi_ef_prime()),
                ),
            ],
        };
        for (tr, omega) in ladders {
            let x = &local(qutrit_sigma_x(tr), qutrit_factor(i), layout)?
                - &local(qutrit_sigma_x(tr), qutrit_factor(i + 1), layout)?;
            let y = &local(qutrit_sigma_y(tr), qutrit_factor(i), layout)?
                - &local(qutrit_sigma_y(tr), qutrit_factor(i + 1), layout)?;
            h.add_modulated(
                x.with_hermitian_hint(true),
                Modulation::Cos {
                    amplitude: amp,
                    omega,
                },
            )?;
            h.add_modulated(
                y.with_hermitian_hint(true),
                Modulation::Sin {
                    amplitude: -amp,
                    omega,
                },
            )?;
        }
    }
    Ok(h)
}

/// Complete `H(t) = H_system + H_probe + H_0 + H_n`.
pub fn build_full_hamiltonian(
    config: &ChainConfig,
    layout: &Arc<SpaceLayout>,
) -> Result<TimeDependentHamiltonian> {
    let mut h = TimeDependentHamiltonian::new(build_system_hamiltonian(config, layout)?);
    h.add_static(&build_zero_photon_drive(config, layout)?)?;
    h.plus(build_probe(config, layout)?)?
        .plus(build_n_photon_drive(config, layout)?)
}

/// Relaxation and pure-dephasing channels of one qutrit on `factor`.
pub(crate) fn qutrit_channels(
    coherence: &QutritCoherence,
    factor: usize,
    site: usize,
    layout: &Arc<SpaceLayout>,
) -> Result<Vec<CollapseChannel>> {
    let mut out = Vec::new();
    for (tr, t1, t2) in [
        (Transition::Ge, coherence.t1_ge, coherence.t2_ge),
        (Transition::Ef, coherence.t1_ef, coherence.t2_ef),
    ] {
        if t1.is_finite() {
            out.push(CollapseChannel {
                op: local(qutrit_sigma_minus(tr), factor, layout)?,
                rate: 1.0 / t1,
                label: format!("relax_{}_{site}", tr.label()),
            });
        }
        let gamma_phi = QutritCoherence::pure_dephasing_rate(t1, t2)?;
        if gamma_phi > 0.0 {
            out.push(CollapseChannel {
                op: local(qutrit_sigma_z(tr), factor, layout)?.with_hermitian_hint(true),
                rate: gamma_phi / 2.0,
                label: format!("dephase_{}_{site}", tr.label()),
            });
        }
    }
    Ok(out)
}

/// Cavity loss on every cavity plus qutrit relaxation and dephasing.
pub fn build_collapse_channels(
    config: &ChainConfig,
    layout: &Arc<SpaceLayout>,
) -> Result<Vec<CollapseChannel>> {
    check_layout(config, layout)?;
    let mut out = Vec::new();
    for (i, cav) in config.cavities.iter().enumerate() {
        out.push(CollapseChannel {
            op: cavity_annihilation(cavity_factor(config.n_sites, i), layout)?,
            rate: cav.kappa,
            label: format!("cavity_{i}"),
        });
    }
    for (j, coh) in config.coherence.iter().enumerate() {
        out.extend(qutrit_channels(coh, qutrit_factor(j), j, layout)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::config::{mhz_to_rad_per_ns, CavityParams};
    use crate::spin::total_spin_squared;

    fn base(n: usize) -> ChainConfig {
        ChainConfig::uniform(n, CavityParams::from_mhz([40.0, 79.2, 38.0, 76.0, 2.0]))
    }

    fn diag_coeff(h: &OperatorMatrix, layout: &SpaceLayout, digits: &[usize]) -> C64 {
        let i = layout.index_of(digits).unwrap();
        h.matrix().get(i, i)
    }

    #[test]
    fn system_hamiltonian_photon_coefficients() {
        let cfg = base(2);
        let layout = cfg.layout().unwrap();
        let h = build_system_hamiltonian(&cfg, &layout).unwrap();
        let ee1 = diag_coeff(&h, &layout, &[1, 1, 1]);
        let ee0 = diag_coeff(&h, &layout, &[1, 1, 0]);
        assert!(((ee1 - ee0).re - mhz_to_rad_per_ns(0.4)).abs() < 1e-12);
        let gg1 = diag_coeff(&h, &layout, &[0, 0, 1]);
        let c = cfg.cavities[0];
        assert!((gg1.re + (c.chi_gf + c.chi_gf_prime) / 2.0).abs() < 1e-12);
        assert_eq!(diag_coeff(&h, &layout, &[0, 0, 0]), C64::from(0.0));
        assert!(h.matrix().is_diagonal());
    }

    #[test]
    fn zero_chi_gives_zero() {
        let mut cfg = base(2);
        cfg.cavities[0] = cfg.cavities[0].scale_chi(0.0);
        let layout = cfg.layout().unwrap();
        assert_eq!(
            build_system_hamiltonian(&cfg, &layout).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn probe_amplitude_and_frequency() {
        let cfg = base(2);
        let layout = cfg.layout().unwrap();
        let p = build_probe(&cfg, &layout).unwrap();
        assert_eq!(p.modulated_parts.len(), 1);
        let Modulation::Cos { amplitude, omega } = p.modulated_parts[0].1 else {
            panic!()
        };
        let eps = mhz_to_rad_per_ns(2.0) * 2f64.sqrt() / 2.0;
        assert!((amplitude - 2.0 * eps).abs() < 1e-15);
        assert!((omega - mhz_to_rad_per_ns(77.6)).abs() < 1e-12);
        let mut cfg0 = cfg.clone();
        cfg0.n_drive = 0;
        assert!(build_probe(&cfg0, &layout)
            .unwrap()
            .modulated_parts
            .is_empty());
    }

    #[test]
    fn zero_photon_drive_preserves_total_spin() {
        for n in [2, 3] {
            let cfg = base(n);
            let layout = cfg.layout().unwrap();
            let h0 = build_zero_photon_drive(&cfg, &layout).unwrap();
            let s2 = total_spin_squared(&layout).unwrap();
            assert!(h0.commutator(&s2).max_abs() < 1e-10);
        }
        let cfg = base(2);
        let layout = cfg.layout().unwrap();
        let h0 = build_zero_photon_drive(&cfg, &layout).unwrap();
        let ge = layout.index_of(&[1, 0, 0]).unwrap();
        let gg = layout.index_of(&[0, 0, 0]).unwrap();
        assert!((h0.matrix().get(ge, gg).re - cfg.omega_0).abs() < 1e-15);
    }

    #[test]
    fn gf_drive_at_zero_time() {
        let cfg = base(2);
        let layout = cfg.layout().unwrap();
        let hn = build_n_photon_drive(&cfg, &layout).unwrap();
        let expected = &local(qutrit_sigma_x(Transition::Gf), 0, &layout).unwrap()
            - &local(qutrit_sigma_x(Transition::Gf), 1, &layout).unwrap();
        let diff = hn
            .at(0.0)
            .max_abs_diff(&expected.scale_real(cfg.omega_n[0]));
        assert!(diff < 1e-15);
    }

    fn swap_qutrits(op: &OperatorMatrix, layout: &SpaceLayout) -> CsrMatrixAlias {
        let perm: Vec<usize> = (0..layout.total_dim())
            .map(|k| {
                let mut d = layout.digits_of(k);
                d.swap(0, 1);
                layout.index_of(&d).unwrap()
            })
            .collect();
        crate::algebra::CsrMatrix::from_triplets(
            layout.total_dim(),
            layout.total_dim(),
            op.matrix()
                .triplets()
                .map(|(r, c, v)| (perm[r], perm[c], v))
                .collect(),
        )
    }
    type CsrMatrixAlias = crate::algebra::CsrMatrix;

    #[test]
    fn drives_are_antisymmetric_under_swap() {
        for variant in [DriveVariant::GfRotation, DriveVariant::SxRotation] {
            let mut cfg = base(2);
            cfg.drive_variant = variant;
            let layout = cfg.layout().unwrap();
            let hn = build_n_photon_drive(&cfg, &layout).unwrap();
            for t in [0.0, 1.3, 17.9] {
                let h = hn.at(t);
                let swapped = swap_qutrits(&h, &layout);
                assert!(swapped.add_scaled(C64::from(1.0), h.matrix()).max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_hermitian_at_sampled_times() {
        for variant in [DriveVariant::GfRotation, DriveVariant::SxRotation] {
            let mut cfg = base(3);
            cfg.drive_variant = variant;
            let layout = cfg.layout().unwrap();
            let h = build_full_hamiltonian(&cfg, &layout).unwrap();
            let times: Vec<f64> = (0..100).map(|k| 37.1 * k as f64).collect();
            assert!(h.hermiticity_error_at(&times) < 1e-14);
        }
    }

    #[test]
    fn gf_drive_has_no_elements_inside_stretched_quintet() {
        // S=2 pair states other than |gg⟩, |ff⟩ span {|ge⟩+|eg⟩, |gf⟩+2|ee⟩+|fg⟩, |ef⟩+|fe⟩}.
        use crate::spin::pair_coupled_basis;
        let cfg = base(2);
        let layout = cfg.layout().unwrap();
        let h = build_n_photon_drive(&cfg, &layout)
            .unwrap()
            .at(0.0)
            .to_dense();
        let quintet: Vec<_> = pair_coupled_basis()
            .into_iter()
            .filter(|((s, m), _)| *s == 2 && m.abs() < 2)
            .map(|(_, v)| v)
            .collect();
        let cdim = cfg.photon_cutoff + 1;
        for u in &quintet {
            for v in &quintet {
                for ph in 0..cdim {
                    let lift = |w: &nalgebra::DVector<C64>| {
                        let mut full = nalgebra::DVector::<C64>::zeros(layout.total_dim());
                        for k in 0..9 {
                            full[k * cdim + ph] = w[k];
                        }
                        full
                    };
                    let val = (lift(u).adjoint() * &h * lift(v))[(0, 0)];
                    assert!(val.norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn collapse_channel_rates() {
        let mut cfg = base(2);
        let layout = cfg.layout().unwrap();
        let ch = build_collapse_channels(&cfg, &layout).unwrap();
        assert_eq!(ch.len(), 1 + 2 * 4);
        let deph = ch.iter().find(|c| c.label == "dephase_ge_0").unwrap();
        assert!((deph.rate - 0.5e-6).abs() < 1e-18);
        cfg.set_coherence(QutritCoherence::ideal());
        assert_eq!(build_collapse_channels(&cfg, &layout).unwrap().len(), 1);
        cfg.set_coherence(QutritCoherence::uniform(10e3, f64::INFINITY));
        let ch = build_collapse_channels(&cfg, &layout).unwrap();
        assert_eq!(ch.len(), 1 + 2 * 2);
        assert!(ch.iter().skip(1).all(|c| (c.rate - 1e-4).abs() < 1e-18));
        cfg.set_coherence(QutritCoherence::uniform(10e3, 30e3));
        assert!(build_collapse_channels(&cfg, &layout).is_err());
    }

    #[test]
    fn layout_mismatch_is_structural() {
        let cfg = base(3);
        let layout = Arc::new(SpaceLayout::chain(2, 3).unwrap());
        assert!(build_system_hamiltonian(&cfg, &layout).is_err());
        let layout = Arc::new(SpaceLayout::chain(3, 4).unwrap());
        assert!(build_probe(&cfg, &layout).is_err());
    }
}
