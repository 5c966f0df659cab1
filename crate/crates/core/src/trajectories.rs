//! Monte-Carlo wave-function (quantum-jump) unravelling of the master equation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{expect_vector, PureState, C64};
use crate::analysis::Observable;
use crate::error::{structural, Error, Result};
use crate::generator::CompiledGenerator;
use crate::integrate::{DiagonalFrame, Dopri5, IntegratorSettings, LawsonSystem, StepStats};
use crate::mesolve::{check_observables, generator_scale, NamedSeries};
use crate::protocol::{CollapseChannel, TimeDependentHamiltonian};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySettings {
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Accuracy of the located jump time, as a tolerance on `‖ψ‖²`.
    pub jump_norm_tol: f64,
    pub integrator: IntegratorSettings,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        TrajectorySettings {
            n_trajectories: 500,
            master_seed: 0x5eed,
            jump_norm_tol: 1e-10,
            integrator: IntegratorSettings::default(),
            workers: None,
        }
    }
}

impl TrajectorySettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::Config("need at least one trajectory".into()));
        }
        if !(self.jump_norm_tol > 0.0) {
            return Err(Error::Config("jump_norm_tol must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.integrator.validate()
    }
}

/// Initial condition of an ensemble: a fixed pure state or a finite mixture
/// sampled independently for every trajectory.
#[derive(Clone, Debug)]
pub enum InitialCondition {
    Pure(PureState),
    /// `(weight, state)` pairs; weights need not be normalized.
    Mixture(Vec<(f64, PureState)>),
}

impl InitialCondition {
    /// Equal-weight mixture, e.g. the maximally mixed state over a basis.
    pub fn uniform(states: Vec<PureState>) -> Self {
        InitialCondition::Mixture(states.into_iter().map(|s| (1.0, s)).collect())
    }

    fn sample<'a>(&'a self, rng: &mut ChaCha8Rng) -> &'a PureState {
        match self {
            InitialCondition::Pure(p) => p,
            InitialCondition::Mixture(items) => {
                let total: f64 = items.iter().map(|(w, _)| w).sum();
                let mut x = rng.random::<f64>() * total;
                for (w, s) in items {
                    if x < *w {
                        return s;
                    }
                    x -= w;
                }
                &items.last().expect("empty mixture").1
            }
        }
    }

    fn validate(&self, layout: &std::sync::Arc<crate::algebra::SpaceLayout>) -> Result<()> {
        let states: Vec<&PureState> = match self {
            InitialCondition::Pure(p) => vec![p],
            InitialCondition::Mixture(items) => {
                if items.is_empty() || items.iter().any(|(w, _)| !(*w >= 0.0)) || items.iter().all(|(w, _)| *w == 0.0) {
                    return Err(Error::Config("mixture needs nonnegative weights with positive sum".into()));
                }
                items.iter().map(|(_, s)| s).collect()
            }
        };
        for s in states {
            if s.layout() != layout {
                return Err(structural("initial state lives on a different space"));
            }
            if (s.norm_sqr() - 1.0).abs() > 1e-10 {
                return Err(Error::Config("initial states must be normalized".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time_ns: f64,
    pub channel: usize,
}

/// Observables of one trajectory, `values[observable][grid index]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub values: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvent>,
    pub stats: StepStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean: Vec<NamedSeries>,
    pub std_err: Vec<NamedSeries>,
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Jumps of each trajectory, in trajectory order.
    pub jump_counts: Vec<usize>,
    /// Jumps of each channel summed over trajectories, aligned with `channel_labels`.
    pub channel_jumps: Vec<usize>,
    pub channel_labels: Vec<String>,
    pub stats: StepStats,
    pub wall_clock_s: f64,
}

impl EnsembleResult {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.mean.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn std_err_of(&self, name: &str) -> Option<&[f64]> {
        self.std_err.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }
}

/// Random stream of trajectory `index`: a ChaCha8 generator keyed by the
/// master seed, on its own stream.
pub fn trajectory_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

struct SchrodingerSystem<'g> {
    gen: &'g CompiledGenerator,
}

impl LawsonSystem for SchrodingerSystem<'_> {

    fn frame(&self) -> Option<&DiagonalFrame> {
        self.gen.frame.as_ref()
    }

    fn apply_frame(&self, e: &[C64], u: &mut [C64]) {
        for (x, f) in u.iter_mut().zip(e) {
            *x *= f;
        }
    }

    fn rhs(&mut self, t: f64, u: &[C64], out: &mut [C64]) {
        self.gen.apply_vec(t, u, out);
    }
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Shared, immutable part of an ensemble run.
struct Prepared<'a> {
    gen: CompiledGenerator,
    observables: &'a [Observable],
    grid: &'a [f64],
    settings: TrajectorySettings,
    max_step: f64,
}

impl Prepared<'_> {
    fn run(&self, psi0: &PureState, rng: &mut ChaCha8Rng) -> Result<TrajectoryRecord> {
        let d = self.gen.dim;
        let mut sys = SchrodingerSystem { gen: &self.gen };
        let mut stepper = Dopri5::new(d, d, self.settings.integrator, self.max_step, true);
        let mut psi = psi0.data().to_vec();
        let mut t = self.grid[0];
        let mut threshold = 1.0 - rng.random::<f64>();
        let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(self.grid.len()); self.observables.len()];
        let mut jumps = Vec::new();
        let mut scratch = vec![ZERO; d];
        let mut weights = vec![0.0; d];
        let tol = self.settings.jump_norm_tol;

        for &tg in self.grid {
            while t < tg {
                stepper.step(&mut sys, &mut t, &mut psi, tg)?;
                if norm_sqr(&psi) > threshold {
                    continue;
                }
                let (t0, h) = stepper.last_step().expect("dense output enabled");
                let norm_at = |theta: f64, st: &Dopri5, buf: &mut [C64], w: &mut [f64]| -> f64 {
                    st.dense_raw(theta, buf);
                    match sys.frame() {
                        Some(f) => {
                            f.modulus_sqr(theta * h, w);
                            buf.iter().zip(w.iter()).map(|(z, m)| z.norm_sqr() * m).sum()
                        }
                        None => norm_sqr(buf),
                    }
                };
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let mut iterations = 0;
                let theta = loop {
                    let mid = 0.5 * (lo + hi);
                    let n = norm_at(mid, &stepper, &mut scratch, &mut weights);
                    if !n.is_finite() {
                        return Err(Error::Integrator { time_ns: t0 + mid * h, reason: "non-finite norm while locating a jump".into() });
                    }
                    if (n - threshold).abs() < tol {
                        break mid;
                    }
                    if n > threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    iterations += 1;
                    if (hi - lo) * h < 1e-12 {
                        break hi;
                    }
                    if iterations > 200 {
                        return Err(Error::Integrator { time_ns: t0 + mid * h, reason: "jump-time bisection did not converge".into() });
                    }
                };
                stepper.dense_eval(&sys, theta, &mut psi);
                t = t0 + theta * h;

                let rates: Vec<f64> = self.gen.jumps.iter().map(|j| j.rate_on(&psi)).collect();
                let total: f64 = rates.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Integrator { time_ns: t, reason: "norm decayed but no channel can fire".into() });
                }
                let mut x = rng.random::<f64>() * total;
                let mut k = rates.len() - 1;
                for (i, r) in rates.iter().enumerate() {
                    if x < *r {
                        k = i;
                        break;
                    }
                    x -= r;
                }
                self.gen.jumps[k].apply(&psi, &mut scratch);
                let nn = norm_sqr(&scratch).sqrt();
                for (p, s) in psi.iter_mut().zip(&scratch) {
                    *p = s / nn;
                }
                jumps.push(JumpEvent { time_ns: t, channel: k });
                stepper.reset();
                threshold = 1.0 - rng.random::<f64>();
            }
            let n2 = norm_sqr(&psi);
            for (o, v) in self.observables.iter().zip(values.iter_mut()) {
                v.push(expect_vector(&o.op, &psi).re / n2);
            }
        }
        Ok(TrajectoryRecord { values, jumps, stats: stepper.stats() })
    }
}

fn prepare<'a>(
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
    grid: &'a [f64],
    settings: &TrajectorySettings,
    observables: &'a [Observable],
) -> Result<Prepared<'a>> {
    settings.validate()?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("time grid must be non-empty, finite and strictly increasing".into()));
    }
    check_observables(observables, h.layout())?;
    let gen = CompiledGenerator::new(h, channels, settings.integrator.frame)?;
    let max_step = settings.integrator.effective_max_step(generator_scale(h, channels));
    Ok(Prepared { gen, observables, grid, settings: *settings, max_step })
}

/// Runs a single trajectory from `psi0` with the given random stream.
pub fn run_trajectory(
    psi0: &PureState,
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
    grid: &[f64],
    settings: &TrajectorySettings,
    observables: &[Observable],
    stream: &mut ChaCha8Rng,
) -> Result<TrajectoryRecord> {
    let prepared = prepare(h, channels, grid, settings, observables)?;
    InitialCondition::Pure(psi0.clone()).validate(h.layout())?;
    prepared.run(psi0, stream)
}

/// Runs `settings.n_trajectories` independent trajectories and averages
/// them in index order, so the result does not depend on the worker count.
pub fn run_ensemble(
    initial: &InitialCondition,
    h: &TimeDependentHamiltonian,
    channels: &[CollapseChannel],
    grid: &[f64],
    settings: &TrajectorySettings,
    observables: &[Observable],
) -> Result<EnsembleResult> {
    let started = Instant::now();
    let prepared = prepare(h, channels, grid, settings, observables)?;
    initial.validate(h.layout())?;
    let one = |i: usize| -> Result<TrajectoryRecord> {
        let mut rng = trajectory_stream(settings.master_seed, i as u64);
        let psi0 = initial.sample(&mut rng);
        prepared.run(psi0, &mut rng).map_err(|e| Error::Trajectory { index: i, source: Box::new(e) })
    };
    let n = settings.n_trajectories;
    let records: Vec<Result<TrajectoryRecord>> = match settings.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(|| (0..n).into_par_iter().map(one).collect()),
        None => (0..n).into_par_iter().map(one).collect(),
    };

    let n_obs = observables.len();
    let n_t = grid.len();
    let mut sum = vec![vec![0.0; n_t]; n_obs];
    let mut sum_sq = vec![vec![0.0; n_t]; n_obs];
    let mut jump_counts = Vec::with_capacity(n);
    let mut channel_jumps = vec![0; prepared.gen.jumps.len()];
    let mut stats = StepStats::default();
    for rec in records {
        let rec = rec?;
        for (o, series) in rec.values.iter().enumerate() {
            for (k, v) in series.iter().enumerate() {
                sum[o][k] += v;
                sum_sq[o][k] += v * v;
            }
        }
        jump_counts.push(rec.jumps.len());
        for j in &rec.jumps {
            channel_jumps[j.channel] += 1;
        }
        stats.accepted += rec.stats.accepted;
        stats.rejected += rec.stats.rejected;
        stats.rhs_evaluations += rec.stats.rhs_evaluations;
    }
    let nf = n as f64;
    let mut mean = Vec::with_capacity(n_obs);
    let mut std_err = Vec::with_capacity(n_obs);
    for (o, obs) in observables.iter().enumerate() {
        let m: Vec<f64> = sum[o].iter().map(|s| s / nf).collect();
        let se: Vec<f64> = if n > 1 {
            sum_sq[o]
                .iter()
                .zip(&m)
                .map(|(sq, mu)| (((sq - nf * mu * mu) / (nf - 1.0)).max(0.0) / nf).sqrt())
                .collect()
        } else {
            vec![0.0; n_t]
        };
        mean.push(NamedSeries { name: obs.name.clone(), values: m });
        std_err.push(NamedSeries { name: obs.name.clone(), values: se });
    }
    Ok(EnsembleResult {
        times: grid.to_vec(),
        mean,
        std_err,
        n_trajectories: n,
        master_seed: settings.master_seed,
        jump_counts,
        channel_jumps,
        channel_labels: prepared.gen.jumps.iter().map(|j| j.label.clone()).collect(),
        stats,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::{embed, DensityMatrix, OperatorMatrix, SpaceLayout};
    use crate::analysis::ObservableKind;
    use crate::mesolve::evolve;
    use crate::protocol::ops::{projector, qutrit_sigma_minus, qutrit_sigma_x, Transition};

    fn excited_decay() -> (Arc<SpaceLayout>, TimeDependentHamiltonian, Vec<CollapseChannel>, Vec<Observable>) {
        let layout = Arc::new(SpaceLayout::qutrits(1).unwrap());
        let h = TimeDependentHamiltonian::zero(layout.clone());
        let ch = vec![CollapseChannel {
            op: embed(&qutrit_sigma_minus(Transition::Ge), 0, &layout).unwrap(),
            rate: 1.0 / 1000.0,
            label: "relax".into(),
        }];
        let obs = vec![Observable::new("P_e", embed(&projector(3, 1), 0, &layout).unwrap(), ObservableKind::Population)];
        (layout, h, ch, obs)
    }

    #[test]
    fn two_level_decay_matches_exponential() {
        let (layout, h, ch, obs) = excited_decay();
        let e = PureState::from_digits(layout, &[1]).unwrap();
        let grid: Vec<f64> = (0..=30).map(|k| 100.0 * k as f64).collect();
        let s = TrajectorySettings { n_trajectories: 500, ..Default::default() };
        let r = run_ensemble(&InitialCondition::Pure(e), &h, &ch, &grid, &s, &obs).unwrap();
        let (m, se) = (r.series("P_e").unwrap(), r.std_err_of("P_e").unwrap());
        for (k, t) in grid.iter().enumerate() {
            let exact = (-t / 1000.0).exp();
            // Each trajectory is 0 or 1, so the binomial error is the right scale.
            let sigma = se[k].max((exact * (1.0 - exact) / 500.0).sqrt()).max(1e-12);
            assert!((m[k] - exact).abs() <= 3.0 * sigma, "t={t}: {} vs {exact} ± {sigma}", m[k]);
        }
        assert!(r.jump_counts.iter().all(|&n| n <= 1));
        assert_eq!(r.channel_jumps, vec![r.jump_counts.iter().sum::<usize>()]);
    }

    #[test]
    fn jump_times_are_exponentially_distributed() {
        let (layout, h, ch, obs) = excited_decay();
        let e = PureState::from_digits(layout, &[1]).unwrap();
        let s = TrajectorySettings::default();
        let prepared = prepare(&h, &ch, &[0.0, 1e5], &s, &obs).unwrap();
        let mut times = Vec::new();
        for i in 0..400 {
            let rec = prepared.run(&e, &mut trajectory_stream(11, i)).unwrap();
            assert_eq!(rec.jumps.len(), 1);
            times.push(rec.jumps[0].time_ns);
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        // Exponential with mean 1000 ns: standard error 50 ns.
        assert!((mean - 1000.0).abs() < 150.0, "{mean}");
    }

    #[test]
    fn single_unitary_trajectory_is_deterministic_evolution() {
        let layout = Arc::new(SpaceLayout::qutrits(1).unwrap());
        let omega = 0.01;
        let h = TimeDependentHamiltonian::new(embed(&qutrit_sigma_x(Transition::Ge), 0, &layout).unwrap().scale_real(omega));
        let obs = vec![Observable::new("P_e", embed(&projector(3, 1), 0, &layout).unwrap(), ObservableKind::Population)];
        let g = PureState::from_digits(layout.clone(), &[0]).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| 10.0 * k as f64).collect();
        let s = TrajectorySettings { n_trajectories: 1, ..Default::default() };
        let mc = run_ensemble(&InitialCondition::Pure(g.clone()), &h, &[], &grid, &s, &obs).unwrap();
        let me = evolve(&DensityMatrix::from_pure(&g), &h, &[], &grid, &s.integrator, &obs).unwrap();
        for (a, b) in mc.series("P_e").unwrap().iter().zip(me.series("P_e").unwrap()) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!(mc.std_err_of("P_e").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mixture_sampling_follows_weights() {
        let layout = Arc::new(SpaceLayout::qutrits(1).unwrap());
        let states: Vec<PureState> = (0..3).map(|k| PureState::from_digits(layout.clone(), &[k]).unwrap()).collect();
        let init = InitialCondition::Mixture(vec![(1.0, states[0].clone()), (3.0, states[1].clone()), (0.0, states[2].clone())]);
        let h = TimeDependentHamiltonian::zero(layout.clone());
        let obs: Vec<Observable> = (0..3)
            .map(|k| Observable::new(format!("P{k}"), embed(&projector(3, k), 0, &layout).unwrap(), ObservableKind::Population))
            .collect();
        let s = TrajectorySettings { n_trajectories: 4000, ..Default::default() };
        let r = run_ensemble(&init, &h, &[], &[0.0, 1.0], &s, &obs).unwrap();
        assert!((r.series("P1").unwrap()[0] - 0.75).abs() < 3.0 * r.std_err_of("P1").unwrap()[0]);
        assert_eq!(r.series("P2").unwrap()[0], 0.0);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let (layout, h, ch, obs) = excited_decay();
        let x = embed(&qutrit_sigma_x(Transition::Ge), 0, &layout).unwrap().scale_real(0.003);
        let mut h = h;
        h.add_static(&x).unwrap();
        let init = InitialCondition::uniform(vec![
            PureState::from_digits(layout.clone(), &[0]).unwrap(),
            PureState::from_digits(layout.clone(), &[1]).unwrap(),
        ]);
        let grid: Vec<f64> = (0..=10).map(|k| 200.0 * k as f64).collect();
        let base = TrajectorySettings { n_trajectories: 64, master_seed: 99, ..Default::default() };
        let one = run_ensemble(&init, &h, &ch, &grid, &TrajectorySettings { workers: Some(1), ..base }, &obs).unwrap();
        let three = run_ensemble(&init, &h, &ch, &grid, &TrajectorySettings { workers: Some(3), ..base }, &obs).unwrap();
        let again = run_ensemble(&init, &h, &ch, &grid, &base, &obs).unwrap();
        for r in [&three, &again] {
            assert_eq!(r.mean, one.mean);
            assert_eq!(r.std_err, one.std_err);
            assert_eq!(r.jump_counts, one.jump_counts);
        }
        let other = run_ensemble(&init, &h, &ch, &grid, &TrajectorySettings { master_seed: 100, ..base }, &obs).unwrap();
        assert_ne!(other.mean, one.mean);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let (layout, h, ch, obs) = excited_decay();
        let e = InitialCondition::Pure(PureState::from_digits(layout.clone(), &[1]).unwrap());
        let bad = TrajectorySettings { n_trajectories: 0, ..Default::default() };
        assert!(matches!(run_ensemble(&e, &h, &ch, &[0.0, 1.0], &bad, &obs), Err(Error::Config(_))));
        let ok = TrajectorySettings::default();
        assert!(matches!(run_ensemble(&e, &h, &ch, &[1.0, 0.0], &ok, &obs), Err(Error::Config(_))));
        let unnormalized = InitialCondition::Pure(PureState::new(layout.clone(), vec![C64::new(2.0, 0.0), ZERO, ZERO]).unwrap());
        assert!(matches!(run_ensemble(&unnormalized, &h, &ch, &[0.0, 1.0], &ok, &obs), Err(Error::Config(_))));
        let other = OperatorMatrix::identity(Arc::new(SpaceLayout::qutrits(2).unwrap()));
        let wrong = vec![Observable::new("x", other, ObservableKind::Other)];
        assert!(run_ensemble(&e, &h, &ch, &[0.0, 1.0], &ok, &wrong).is_err());
    }
}
