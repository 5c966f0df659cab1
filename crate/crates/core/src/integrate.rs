//! Adaptive Dormand–Prince 5(4) for complex linear systems `u' = D u + N(t, u)`.
//!
//! `D` is an optional constant diagonal generator that is integrated exactly
//! (Lawson / integrating-factor form); the embedded RK pair only sees the
//! remaining part `N`. With no frame this is the textbook Dopri5 with FSAL
//! and Hairer's continuous extension.

use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// How the static diagonal of the generator is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    /// Static diagonal propagated exactly; RK steps only resolve the rest.
    Interaction,
    /// Everything goes through the RK stages.
    Lab,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step in ns; `None` picks `0.1 / fastest scale`
    /// in the lab frame and no bound in the interaction frame.
    pub max_step: Option<f64>,
    pub frame: FrameMode,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
            frame: FrameMode::Interaction,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Config(
                "integrator tolerances must be positive".into(),
            ));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::Config("max_step must be positive".into()));
            }
        }
        Ok(())
    }

    /// The step bound actually used for a problem whose fastest rate is `scale` rad/ns.
    pub fn effective_max_step(&self, scale: f64) -> f64 {
        match (self.max_step, self.frame) {
            (Some(h), _) => h,
            (None, FrameMode::Lab) if scale > 0.0 => 0.1 / scale,
            _ => f64::INFINITY,
        }
    }
}

/// Exponentials of a diagonal generator, evaluated once per distinct entry.
#[derive(Clone, Debug)]
pub(crate) struct DiagonalFrame {
    unique_re: Vec<f64>,
    map_re: Vec<u32>,
    unique_im: Vec<f64>,
    map_im: Vec<u32>,
    /// Entries that differ from their representatives, by at most ~1e-12
    /// of the largest entry.
    corrections: Vec<(u32, C64)>,
}

/// Groups values closer than `quantum`; returns representatives, the map and
/// the offsets from the representatives.
fn group(values: &[f64], quantum: f64) -> (Vec<f64>, Vec<u32>, Vec<f64>) {
    let key = |x: f64| (x / quantum).round() as i64;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| key(values[i]));
    let mut unique: Vec<f64> = Vec::new();
    let mut map = vec![0u32; values.len()];
    let mut delta = vec![0.0; values.len()];
    let mut last = None;
    for i in order {
        let k = key(values[i]);
        if last != Some(k) {
            unique.push(values[i]);
            last = Some(k);
        }
        map[i] = (unique.len() - 1) as u32;
        delta[i] = values[i] - unique[unique.len() - 1];
    }
    (unique, map, delta)
}

impl DiagonalFrame {
    /// Real and imaginary parts are exponentiated separately, each over its
    /// distinct values. Entries closer than ~1e-12 of the largest one share a
    /// representative; each factor is corrected to first order in the tiny
    /// offset, which is exact to rounding for any step the integrator takes.
    pub fn new(generator: &[C64]) -> Self {
        let scale = generator.iter().fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs())).max(1e-300);
        let quantum = scale * 1e-12;
        let re: Vec<f64> = generator.iter().map(|z| z.re).collect();
        let im: Vec<f64> = generator.iter().map(|z| z.im).collect();
        let (unique_re, map_re, d_re) = group(&re, quantum);
        let (unique_im, map_im, d_im) = group(&im, quantum);
        let corrections = d_re
            .iter()
            .zip(&d_im)
            .enumerate()
            .filter(|(_, (a, b))| **a != 0.0 || **b != 0.0)
            .map(|(j, (a, b))| (j as u32, C64::new(*a, *b)))
            .collect();
        DiagonalFrame { unique_re, map_re, unique_im, map_im, corrections }
    }

    /// `out_j = exp(s D_j)` and `inv_j = exp(−s D_j)`.
    pub fn factors(&self, s: f64, out: &mut [C64], inv: &mut [C64]) {
        let er: Vec<f64> = self.unique_re.iter().map(|d| (d * s).exp()).collect();
        let er_inv: Vec<f64> = er.iter().map(|x| 1.0 / x).collect();
        let cis: Vec<C64> = self.unique_im.iter().map(|d| C64::from_polar(1.0, d * s)).collect();
        for j in 0..self.map_re.len() {
            let (r, p) = (self.map_re[j] as usize, cis[self.map_im[j] as usize]);
            out[j] = p * er[r];
            inv[j] = p.conj() * er_inv[r];
        }
        for &(j, d) in &self.corrections {
            let sd = d * s;
            out[j as usize] *= sd + 1.0;
            inv[j as usize] *= 1.0 - sd;
        }
    }

    /// `out_j = |exp(s D_j)|² = exp(2 s Re D_j)`.
    pub fn modulus_sqr(&self, s: f64, out: &mut [f64]) {
        let ex: Vec<f64> = self.unique_re.iter().map(|d| (2.0 * d * s).exp()).collect();
        for j in 0..self.map_re.len() {
            out[j] = ex[self.map_re[j] as usize];
        }
        for &(j, d) in &self.corrections {
            out[j as usize] *= 1.0 + 2.0 * d.re * s;
        }
    }
}

/// A system `u' = D u + N(t, u)` with `D` described by [`DiagonalFrame`].
pub(crate) trait LawsonSystem {
    fn frame(&self) -> Option<&DiagonalFrame>;
    /// Multiplies `u` in place by the frame factor built from per-level
    /// exponentials `e` (length `frame().len()`).
    fn apply_frame(&self, e: &[C64], u: &mut [C64]);
    fn rhs(&mut self, t: f64, u: &[C64], out: &mut [C64]);
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

pub(crate) struct Dopri5 {
    settings: IntegratorSettings,
    max_step: f64,
    k: [Vec<C64>; 7],
    stage: Vec<C64>,
    y1: Vec<C64>,
    fsal: Vec<C64>,
    fsal_next: Vec<C64>,
    fsal_valid: bool,
    e: Vec<C64>,
    e_inv: Vec<C64>,
    h: f64,
    err_old: f64,
    dense: Option<DenseStep>,
    stats: StepStats,
}

/// Data of the last accepted step for continuous output.
struct DenseStep {
    t0: f64,
    h: f64,
    r: [Vec<C64>; 5],
}

/// `out = base + Σ_m coeffs[m] · ks[m]`.
fn axpy_into<const M: usize>(out: &mut [C64], base: &[C64], coeffs: [f64; M], ks: [&[C64]; M]) {
    for i in 0..out.len() {
        let mut acc = base[i];
        for m in 0..M {
            acc += ks[m][i] * coeffs[m];
        }
        out[i] = acc;
    }
}

impl Dopri5 {
    pub fn new(
        n: usize,
        frame_len: usize,
        settings: IntegratorSettings,
        max_step: f64,
        keep_dense: bool,
    ) -> Self {
        let z = || vec![ZERO; n];
        Dopri5 {
            settings,
            max_step,
            k: [z(), z(), z(), z(), z(), z(), z()],
            stage: z(),
            y1: z(),
            fsal: z(),
            fsal_next: z(),
            fsal_valid: false,
            e: vec![ZERO; frame_len],
            e_inv: vec![ZERO; frame_len],
            h: 0.0,
            err_old: 1e-4,
            dense: keep_dense.then(|| DenseStep {
                t0: 0.0,
                h: 0.0,
                r: [z(), z(), z(), z(), z()],
            }),
            stats: StepStats::default(),
        }
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Forget the FSAL derivative, e.g. after the state was changed by a jump.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    fn stage_rhs<S: LawsonSystem>(&mut self, sys: &mut S, t: f64, c: f64, h: f64, i: usize) {
        let mut out = std::mem::take(&mut self.k[i]);
        if let Some(frame) = sys.frame() {
            frame.factors(c * h, &mut self.e, &mut self.e_inv);
            sys.apply_frame(&self.e, &mut self.stage);
            sys.rhs(t + c * h, &self.stage, &mut out);
            if i == 6 {
                self.fsal_next.copy_from_slice(&out);
            }
            sys.apply_frame(&self.e_inv, &mut out);
        } else {
            sys.rhs(t + c * h, &self.stage, &mut out);
            if i == 6 {
                self.fsal_next.copy_from_slice(&out);
            }
        }
        self.k[i] = out;
        self.stats.rhs_evaluations += 1;
    }

    fn initial_step(&self, t: f64, t_limit: f64) -> f64 {
        (1e-2f64)
            .min(self.max_step)
            .min((t_limit - t).abs().max(1e-12))
    }

    /// Takes one accepted step from `t` towards `t_limit` (never past it),
    /// updating `t` and `u` in place.
    pub fn step<S: LawsonSystem>(
        &mut self,
        sys: &mut S,
        t: &mut f64,
        u: &mut [C64],
        t_limit: f64,
    ) -> Result<()> {
        if self.stats.accepted + self.stats.rejected >= self.settings.max_steps {
            return Err(Error::Integrator {
                time_ns: *t,
                reason: "maximum number of steps exceeded".into(),
            });
        }
        if !self.fsal_valid {
            sys.rhs(*t, u, &mut self.fsal);
            self.stats.rhs_evaluations += 1;
            self.fsal_valid = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(*t, t_limit);
        }
        loop {
            let remaining = t_limit - *t;
            let mut h = self.h.min(self.max_step);
            let clipped = h >= remaining * (1.0 - 1e-12);
            if clipped {
                h = remaining;
            }
            if h < 1e-12 * t.abs().max(1.0) {
                return Err(Error::Integrator {
                    time_ns: *t,
                    reason: format!("step size underflow (h = {h:e} ns)"),
                });
            }
            self.k[0].copy_from_slice(&self.fsal);

            axpy_into(&mut self.stage, u, [h * A21], [&self.k[0]]);
            self.stage_rhs(sys, *t, C2, h, 1);
            {
                let [k1, k2, ..] = &self.k;
                axpy_into(&mut self.stage, u, [h * A31, h * A32], [k1, k2]);
            }
            self.stage_rhs(sys, *t, C3, h, 2);
            {
                let [k1, k2, k3, ..] = &self.k;
                axpy_into(&mut self.stage, u, [h * A41, h * A42, h * A43], [k1, k2, k3]);
            }
            self.stage_rhs(sys, *t, C4, h, 3);
            {
                let [k1, k2, k3, k4, ..] = &self.k;
                axpy_into(&mut self.stage, u, [h * A51, h * A52, h * A53, h * A54], [k1, k2, k3, k4]);
            }
            self.stage_rhs(sys, *t, C5, h, 4);
            {
                let [k1, k2, k3, k4, k5, ..] = &self.k;
                axpy_into(&mut self.stage, u, [h * A61, h * A62, h * A63, h * A64, h * A65], [k1, k2, k3, k4, k5]);
            }
            self.stage_rhs(sys, *t, 1.0, h, 5);
            {
                let [k1, _, k3, k4, k5, k6, _] = &self.k;
                axpy_into(&mut self.stage, u, [h * A71, h * A73, h * A74, h * A75, h * A76], [k1, k3, k4, k5, k6]);
            }
            // `stage` holds the fifth-order solution in the frame of the step start;
            // the last stage maps it to the new time in place, so keep a copy.
            let mut y1 = std::mem::take(&mut self.y1);
            y1.copy_from_slice(&self.stage);
            self.stage_rhs(sys, *t, 1.0, h, 6);
            let accepted = self.finish_step(sys, t, u, &y1, h, clipped, t_limit);
            self.y1 = y1;
            if accepted {
                return Ok(());
            }
        }
    }

    fn finish_step<S: LawsonSystem>(
        &mut self,
        sys: &S,
        t: &mut f64,
        u: &mut [C64],
        y1: &[C64],
        h: f64,
        clipped: bool,
        t_limit: f64,
    ) -> bool {
        let n = u.len();
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let mut acc = 0.0;
        let (rt, at) = (self.settings.rel_tol, self.settings.abs_tol);
        for i in 0..n {
            let e =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = at + rt * u[i].norm_sqr().max(y1[i].norm_sqr()).sqrt();
            acc += e.norm_sqr() / (sc * sc);
        }
        let err = (acc / n as f64).sqrt();
        if !err.is_finite() {
            self.stats.rejected += 1;
            self.h = h * 0.1;
            return false;
        }
        if err <= 1.0 {
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * self.err_old.powf(0.4 / 5.0);
            let h_new = h * fac.clamp(0.2, 5.0);
            self.err_old = err.max(1e-4);
            if let Some(d) = self.dense.as_mut() {
                let [k1, _, k3, k4, k5, k6, k7] = &self.k;
                d.t0 = *t;
                d.h = h;
                for i in 0..n {
                    let dy = y1[i] - u[i];
                    let bspl = k1[i] * h - dy;
                    d.r[0][i] = u[i];
                    d.r[1][i] = dy;
                    d.r[2][i] = bspl;
                    d.r[3][i] = dy - k7[i] * h - bspl;
                    d.r[4][i] = (k1[i] * D1
                        + k3[i] * D3
                        + k4[i] * D4
                        + k5[i] * D5
                        + k6[i] * D6
                        + k7[i] * D7)
                        * h;
                }
            }
            if sys.frame().is_some() {
                u.copy_from_slice(&self.stage);
            } else {
                u.copy_from_slice(y1);
            }
            std::mem::swap(&mut self.fsal, &mut self.fsal_next);
            *t = if clipped { t_limit } else { *t + h };
            self.h = if clipped { h_new.max(self.h) } else { h_new };
            self.stats.accepted += 1;
            return true;
        }
        self.stats.rejected += 1;
        let fac = 0.9 * err.powf(-0.2);
        self.h = h * fac.clamp(0.1, 1.0);
        false
    }

    /// Time span `(t0, h)` of the last accepted step.
    pub fn last_step(&self) -> Option<(f64, f64)> {
        self.dense.as_ref().map(|d| (d.t0, d.h))
    }

    /// Continuous extension in the frame of the last step's start, at
    /// fraction `theta ∈ [0, 1]`. Callers apply `exp(θ h D)` themselves.
    pub fn dense_raw(&self, theta: f64, out: &mut [C64]) {
        let d = self.dense.as_ref().expect("dense output not enabled");
        let th1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = d.r[0][i]
                + (d.r[1][i] + (d.r[2][i] + (d.r[3][i] + d.r[4][i] * th1) * theta) * th1) * theta;
        }
    }

    /// Continuous extension mapped back to the lab frame.
    pub fn dense_eval<S: LawsonSystem>(&mut self, sys: &S, theta: f64, out: &mut [C64]) {
        self.dense_raw(theta, out);
        if let Some(frame) = sys.frame() {
            let h = self.dense.as_ref().unwrap().h;
            frame.factors(theta * h, &mut self.e, &mut self.e_inv);
            sys.apply_frame(&self.e, out);
        }
    }
}
