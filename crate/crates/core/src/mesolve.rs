//! Lindblad master-equation evolution of density matrices.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{DensityMatrix, C64};
use crate::analysis::{Observable, ObservableKind};
use crate::error::{structural, Error, Result};
use crate::generator::{CompiledGenerator, JumpForm};
use crate::integrate::{Dopri5, FrameMode, LawsonSystem, StepStats};
pub use crate::integrate::IntegratorSettings;
use crate::protocol::{CollapseChannel, TimeDependentHamiltonian};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionMetadata {
    pub solver: String,
    pub settings: IntegratorSettings,
    pub max_step_used: f64,
    pub stats: StepStats,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub max_trace_error: f64,
    pub min_population: f64,
    pub max_population: f64,
    pub diagnostics: Vec<String>,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub observables: Vec<NamedSeries>,
    pub final_state: DensityMatrix,
    pub metadata: EvolutionMetadata,
}

impl EvolutionResult {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }
}

/// Reference right-hand side `−i[H(t), ρ] + Σ_k γ_k D[L_k]ρ`, built with
/// plain sparse products and no frame tricks.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    t: f64,
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
) -> Result<DMatrix<C64>> {
    if rho.layout() != h.layout() {
        return Err(structural("density matrix and Hamiltonian live on different spaces"));
    }
    let r = rho.to_dense();
    let hd = h.at(t).to_dense();
    let mut out = (&hd * &r - &r * &hd) * C64::new(0.0, -1.0);
    for ch in channels {
        let l = ch.op.to_dense();
        let ld = l.adjoint();
        let ll = &ld * &l;
        out += (&l * &r * &ld - (&ll * &r + &r * &ll) * C64::new(0.5, 0.0)) * C64::new(ch.rate, 0.0);
    }
    Ok(out)
}

/// Recorded expectation values `Tr(O ρ)` for row-major `ρ`.
pub(crate) fn expect_rho(op: &crate::algebra::CsrMatrix, rho: &[C64], d: usize) -> C64 {
    let mut acc = ZERO;
    for (r, c, v) in op.triplets() {
        acc += v * rho[c * d + r];
    }
    acc
}

pub(crate) struct MasterSystem<'g> {
    gen: &'g CompiledGenerator,
    vals: Vec<C64>,
    k: Vec<C64>,
    tmp: Vec<C64>,
    diag_weights: Option<Vec<C64>>,
    monomial: Vec<Vec<(u32, u32, C64)>>,
    general: Vec<crate::algebra::CsrMatrix>,
    conj_e: std::cell::RefCell<Vec<C64>>,
}

impl<'g> MasterSystem<'g> {
    pub fn new(gen: &'g CompiledGenerator) -> Self {
        let d = gen.dim;
        let mut diag_weights: Option<Vec<C64>> = None;
        let mut monomial = Vec::new();
        let mut general = Vec::new();
        for j in &gen.jumps {
            match &j.form {
                JumpForm::Diagonal(l) => {
                    let w = diag_weights.get_or_insert_with(|| vec![ZERO; d * d]);
                    for r in 0..d {
                        if l[r] == ZERO {
                            continue;
                        }
                        for c in 0..d {
                            w[r * d + c] += l[r] * l[c].conj();
                        }
                    }
                }
                JumpForm::Monomial(m) => monomial.push(m.clone()),
                JumpForm::General(a) => general.push(a.clone()),
            }
        }
        MasterSystem {
            gen,
            vals: gen.value_buffer(),
            k: vec![ZERO; d * d],
            tmp: if general.is_empty() { vec![] } else { vec![ZERO; d * d] },
            diag_weights,
            monomial,
            general,
            conj_e: std::cell::RefCell::new(vec![ZERO; d]),
        }
    }
}

impl LawsonSystem for MasterSystem<'_> {

    fn frame(&self) -> Option<&crate::integrate::DiagonalFrame> {
        self.gen.frame.as_ref()
    }

    fn apply_frame(&self, e: &[C64], u: &mut [C64]) {
        let d = self.gen.dim;
        let mut ce = self.conj_e.borrow_mut();
        for (c, x) in ce.iter_mut().zip(e) {
            *c = x.conj();
        }
        for r in 0..d {
            let er = e[r];
            for (x, c) in u[r * d..(r + 1) * d].iter_mut().zip(ce.iter()) {
                *x *= er * c;
            }
        }
    }

    fn rhs(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.gen.dim;
        self.gen.load(t, &mut self.vals);
        self.gen.apply_left(&self.vals, rho, &mut self.k);
        // ρ is Hermitian, so A ρ + ρ A† = K + K†.
        for r in 0..d {
            for c in r..d {
                let a = self.k[r * d + c];
                let b = self.k[c * d + r];
                out[r * d + c] = a + b.conj();
                out[c * d + r] = b + a.conj();
            }
        }
        if let Some(w) = &self.diag_weights {
            for ((o, w), x) in out.iter_mut().zip(w).zip(rho) {
                *o += w * x;
            }
        }
        for m in &self.monomial {
            for &(r1, c1, v1) in m {
                let row_src = c1 as usize * d;
                let row_dst = r1 as usize * d;
                for &(r2, c2, v2) in m {
                    out[row_dst + r2 as usize] += v1 * v2.conj() * rho[row_src + c2 as usize];
                }
            }
        }
        for l in &self.general {
            // tmp = L ρ, then out += tmp L†.
            for r in 0..d {
                let row = &mut self.tmp[r * d..(r + 1) * d];
                row.fill(ZERO);
                for (k, v) in l.row(r) {
                    for (o, s) in row.iter_mut().zip(&rho[k * d..(k + 1) * d]) {
                        *o += v * s;
                    }
                }
            }
            for r in 0..d {
                let row = &self.tmp[r * d..(r + 1) * d];
                for c in 0..d {
                    let acc: C64 = l.row(c).map(|(k, v)| row[k] * v.conj()).sum();
                    out[r * d + c] += acc;
                }
            }
        }
    }
}

/// Largest rate or frequency in the generator, used for the lab-frame step bound.
pub(crate) fn generator_scale(h: &TimeDependentHamiltonian, channels: &[CollapseChannel]) -> f64 {
    let mut s = h.static_part.max_abs();
    for (op, m) in &h.modulated_parts {
        let omega = match *m {
            crate::protocol::Modulation::Cos { omega, .. } | crate::protocol::Modulation::Sin { omega, .. } => omega,
        };
        s = s.max(op.max_abs() * m.amplitude().abs()).max(omega.abs());
    }
    for ch in channels {
        s = s.max(ch.rate * ch.op.max_abs().powi(2));
    }
    s
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn check_observables(obs: &[Observable], layout: &std::sync::Arc<crate::algebra::SpaceLayout>) -> Result<()> {
    for o in obs {
        if o.op.layout() != layout {
            return Err(structural(format!("observable `{}` lives on a different space", o.name)));
        }
    }
    Ok(())
}

/// Integrates the master equation from `rho0` and records every observable
/// at each grid time.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
    grid: &[f64],
    settings: &IntegratorSettings,
    observables: &[Observable],
) -> Result<EvolutionResult> {
    let started = Instant::now();
    settings.validate()?;
    validate_grid(grid)?;
    if rho0.layout() != h.layout() {
        return Err(structural("initial state and Hamiltonian live on different spaces"));
    }
    check_observables(observables, h.layout())?;
    let d = h.dim();
    let gen = CompiledGenerator::new(h, channels, settings.frame)?;
    let mut sys = MasterSystem::new(&gen);
    let max_step = settings.effective_max_step(generator_scale(h, channels));
    let mut stepper = Dopri5::new(d * d, d, *settings, max_step, false);

    let mut rho = rho0.data().to_vec();
    let mut t = grid[0];
    let mut series: Vec<NamedSeries> =
        observables.iter().map(|o| NamedSeries { name: o.name.clone(), values: Vec::with_capacity(grid.len()) }).collect();
    let mut max_trace_error: f64 = 0.0;
    let (mut min_pop, mut max_pop) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut diagnostics = Vec::new();
    let trace0 = rho0.trace().re;

    for (gi, &tg) in grid.iter().enumerate() {
        while t < tg {
            stepper.step(&mut sys, &mut t, &mut rho, tg)?;
        }
        let tr: C64 = (0..d).map(|i| rho[i * d + i]).sum();
        max_trace_error = max_trace_error.max((tr.re - trace0).abs()).max(tr.im.abs());
        for (o, s) in observables.iter().zip(series.iter_mut()) {
            let v = expect_rho(o.op.matrix(), &rho, d).re;
            if o.kind == ObservableKind::Population {
                min_pop = min_pop.min(v);
                max_pop = max_pop.max(v);
                if !(-1e-6..=1.0 + 1e-6).contains(&v) && diagnostics.len() < 20 {
                    diagnostics.push(format!("{} = {v:.3e} outside [0, 1] at t = {} ns (grid index {gi})", o.name, tg));
                }
            }
            s.values.push(v);
        }
    }
    if max_trace_error > 1e-6 {
        diagnostics.push(format!("trace drifted by {max_trace_error:.3e}"));
    }
    let final_state = DensityMatrix::new(h.layout().clone(), rho)?;
    Ok(EvolutionResult {
        times: grid.to_vec(),
        observables: series,
        final_state,
        metadata: EvolutionMetadata {
            solver: "master_equation".into(),
            settings: *settings,
            max_step_used: max_step,
            stats: stepper.stats(),
            seed: None,
            config_hash: None,
            max_trace_error,
            min_population: min_pop,
            max_population: max_pop,
            diagnostics,
            wall_clock_s: started.elapsed().as_secs_f64(),
        },
    })
}

/// Frame-free evaluation of the compiled right-hand side, for testing the
/// fast path against [`lindblad_rhs`].
#[doc(hidden)]
pub fn compiled_rhs(
    rho: &DensityMatrix,
    t: f64,
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
) -> Result<Vec<C64>> {
    let gen = CompiledGenerator::new(h, channels, FrameMode::Lab)?;
    let mut sys = MasterSystem::new(&gen);
    let mut out = vec![ZERO; rho.data().len()];
    sys.rhs(t, rho.data(), &mut out);
    Ok(out)
}
