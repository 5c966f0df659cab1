//! Least-squares fits of `y = A e^{−b t} + C`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Start of the default fit window.
pub const DEFAULT_FIT_START_NS: f64 = 500.0;

const MIN_POINTS: usize = 10;
const SCAN_POINTS: usize = 241;
const SCAN_DECADES: f64 = 4.0;
const MAX_LM_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("fit window holds {0} points, need at least 10")]
    TooFewPoints(usize),

    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },

    #[error("invalid fit window [{0}, {1}] ns")]
    InvalidWindow(f64, f64),

    #[error("value {value} at t = {time_ns} ns is outside [-0.1, 1.1]")]
    OutOfRange { time_ns: f64, value: f64 },

    #[error("non-finite sample at t = {0} ns")]
    NonFinite(f64),

    #[error("no decay detected (b = {b:e} /ns, level {c})")]
    NoDecay { b: f64, c: f64 },

    #[error("fit did not converge after {iterations} iterations (rms residual {residual_rms:e})")]
    NotConverged { iterations: usize, residual_rms: f64 },
}

/// Closed time interval used for fitting, in ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub start_ns: f64,
    /// `None` means the last sample.
    pub end_ns: Option<f64>,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { start_ns: DEFAULT_FIT_START_NS, end_ns: None }
    }
}

impl FitWindow {
    pub fn starting_at(start_ns: f64) -> Self {
        FitWindow { start_ns, end_ns: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Amplitude, referred to absolute time.
    pub a: f64,
    /// Rate in 1/ns.
    pub b: f64,
    pub c: f64,
    /// Covariance of `(A, b, C)`.
    pub covariance: [[f64; 3]; 3],
    pub fit_window: (f64, f64),
    pub residual_rms: f64,
    pub n_points: usize,
    pub iterations: usize,
}

impl FitResult {
    pub fn std_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn convergence_time_ns(&self) -> f64 {
        1.0 / self.b
    }

    /// Standard error of `1/b` by linear propagation.
    pub fn convergence_time_err_ns(&self) -> f64 {
        self.std_errors()[1] / (self.b * self.b)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.a * (-self.b * t).exp() + self.c
    }
}

struct Window {
    t0: f64,
    tau: Vec<f64>,
    y: Vec<f64>,
    t_end: f64,
}

fn select(times: &[f64], values: &[f64], window: FitWindow) -> Result<Window, FitError> {
    if times.len() != values.len() {
        return Err(FitError::LengthMismatch { times: times.len(), values: values.len() });
    }
    let last = times.last().copied().unwrap_or(f64::NAN);
    let end = window.end_ns.unwrap_or(last);
    if !window.start_ns.is_finite() || !(end >= window.start_ns) {
        return Err(FitError::InvalidWindow(window.start_ns, end));
    }
    let mut tau = Vec::new();
    let mut y = Vec::new();
    let mut t0 = f64::NAN;
    let mut t_end = f64::NAN;
    for (&t, &v) in times.iter().zip(values) {
        if t < window.start_ns || t > end {
            continue;
        }
        if !t.is_finite() || !v.is_finite() {
            return Err(FitError::NonFinite(t));
        }
        if !(-0.1..=1.1).contains(&v) {
            return Err(FitError::OutOfRange { time_ns: t, value: v });
        }
        if tau.is_empty() {
            t0 = t;
        }
        tau.push(t - t0);
        y.push(v);
        t_end = t;
    }
    if tau.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints(tau.len()));
    }
    Ok(Window { t0, tau, y, t_end })
}

/// Best `(A, C)` and residual sum of squares for a fixed rate.
fn project(w: &Window, b: f64) -> (f64, f64, f64) {
    let n = w.tau.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in w.tau.iter().zip(&w.y) {
        let e = (-b * t).exp();
        se += e;
        see += e * e;
        sy += y;
        sey += e * y;
    }
    let det = n * see - se * se;
    let (a, c) = if det.abs() <= 1e-14 * n * see {
        (0.0, sy / n)
    } else {
        ((n * sey - se * sy) / det, (see * sy - se * sey) / det)
    };
    let r = cost(w, a, b, c);
    (a, c, if r.is_finite() { r } else { f64::INFINITY })
}

fn cost(w: &Window, a: f64, b: f64, c: f64) -> f64 {
    w.tau.iter().zip(&w.y).map(|(&t, &y)| (a * (-b * t).exp() + c - y).powi(2)).sum()
}

fn golden(w: &Window, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |x: f64| project(w, x.exp()).2;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    (0.5 * (lo + hi)).exp()
}

struct LmOutcome {
    p: Vector3<f64>,
    cost: f64,
    jtj: Matrix3<f64>,
    iterations: usize,
    converged: bool,
}

fn jacobian_normal(w: &Window, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (&t, &y) in w.tau.iter().zip(&w.y) {
        let e = (-p[1] * t).exp();
        let j = Vector3::new(e, -p[0] * t * e, 1.0);
        let r = p[0] * e + p[2] - y;
        jtj += j * j.transpose();
        jtr += j * r;
    }
    (jtj, jtr)
}

fn levenberg_marquardt(w: &Window, start: Vector3<f64>) -> LmOutcome {
    let mut p = start;
    let mut c = cost(w, p[0], p[1], p[2]);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_LM_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = jacobian_normal(w, &p);
        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for i in 0..3 {
                m[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(delta) = m.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let q = p + delta;
            let cq = cost(w, q[0], q[1], q[2]);
            if cq.is_finite() && cq <= c {
                let small_step = delta.iter().zip(q.iter()).all(|(d, x)| d.abs() <= 1e-13 * (x.abs() + 1e-300) + 1e-300);
                let small_gain = c - cq <= 1e-15 * c + 1e-300;
                p = q;
                c = cq;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // No downhill step at any damping: already at the minimum to rounding.
        if !improved || converged {
            converged = true;
            break;
        }
    }
    let (jtj, _) = jacobian_normal(w, &p);
    LmOutcome { p, cost: c, jtj, iterations, converged }
}

/// Fits `y = A e^{−b t} + C` to the samples inside `window`.
///
/// The rate is located by variable projection (closed-form `A`, `C` for each
/// trial `b`, a logarithmic scan around the initial guess and a golden-section
/// refinement) and then polished by Levenberg–Marquardt on all three
/// parameters.
pub fn fit_exponential(times: &[f64], values: &[f64], window: FitWindow) -> Result<FitResult, FitError> {
    let w = select(times, values, window)?;
    let n = w.y.len();
    let mean = w.y.iter().sum::<f64>() / n as f64;
    let spread = w.y.iter().fold(0.0f64, |m, y| m.max((y - mean).abs()));
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Err(FitError::NoDecay { b: 0.0, c: mean });
    }

    let span = *w.tau.last().unwrap();
    let tail = (n / 10).max(1);
    let c_guess = w.y[n - tail..].iter().sum::<f64>() / tail as f64;
    let a_guess = w.y[0] - c_guess;
    let mid = 0.5 * span;
    let b_guess = 1.0 / mid;

    let lb0 = b_guess.ln();
    let step = 2.0 * SCAN_DECADES * std::f64::consts::LN_10 / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|k| lb0 - SCAN_DECADES * std::f64::consts::LN_10 + step * k as f64).collect();
    let costs: Vec<f64> = grid.iter().map(|&lb| project(&w, lb.exp()).2).collect();
    let best = (0..SCAN_POINTS).min_by(|&i, &j| costs[i].total_cmp(&costs[j])).unwrap();
    // A growing curve beats every decaying one.
    let grow = grid.iter().map(|&lb| (-lb.exp(), project(&w, -lb.exp()))).min_by(|x, y| x.1 .2.total_cmp(&y.1 .2)).unwrap();
    if grow.1 .2 < costs[best] {
        return Err(FitError::NoDecay { b: grow.0, c: grow.1 .1 });
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(SCAN_POINTS - 1)];
    let b_vp = golden(&w, lo, hi);
    let (a_vp, c_vp, cost_vp) = project(&w, b_vp);

    let start = if cost_vp <= cost(&w, a_guess, b_guess, c_guess) {
        Vector3::new(a_vp, b_vp, c_vp)
    } else {
        Vector3::new(a_guess, b_guess, c_guess)
    };
    let lm = levenberg_marquardt(&w, start);
    let residual_rms = (lm.cost / n as f64).sqrt();
    if !lm.converged {
        return Err(FitError::NotConverged { iterations: lm.iterations, residual_rms });
    }
    let (a_rel, b, c) = (lm.p[0], lm.p[1], lm.p[2]);
    if !(b > 0.0) || !b.is_finite() {
        return Err(FitError::NoDecay { b, c });
    }

    let dof = (n - 3) as f64;
    let s2 = lm.cost / dof;
    let cov_rel = lm.jtj.try_inverse().map(|m| m * s2).unwrap_or_else(|| Matrix3::from_element(f64::INFINITY));
    // Refer the amplitude to absolute time: A = A_rel e^{b t0}.
    let g = (b * w.t0).exp();
    let a = a_rel * g;
    let jac = Matrix3::new(g, a * w.t0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    let cov = jac * cov_rel * jac.transpose();
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = cov[(i, j)];
        }
    }
    Ok(FitResult {
        a,
        b,
        c,
        covariance,
        fit_window: (w.t0, w.t_end),
        residual_rms,
        n_points: n,
        iterations: lm.iterations,
    })
}

/// Residual dephasing rate from the decay of a population prepared inside
/// the target subspace; the same model as [`fit_exponential`], with `b` the
/// rate.
pub fn extract_dephasing_rate(times: &[f64], values: &[f64], window: FitWindow) -> Result<FitResult, FitError> {
    fit_exponential(times, values, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::{Rng, SeedableRng};

    /// Box–Muller sample.
    fn gaussian(rng: &mut impl Rng) -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn synthetic(n: usize, t_end: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
        let y = t.iter().map(|t| 0.3 * (-t / 2000.0).exp() + 0.65).collect();
        (t, y)
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let (t, y) = synthetic(200, 10_000.0);
        let f = fit_exponential(&t, &y, FitWindow::starting_at(0.0)).unwrap();
        assert!((f.a - 0.3).abs() < 1e-6, "{f:?}");
        assert!((f.b - 1.0 / 2000.0).abs() < 1e-6 / 2000.0, "{f:?}");
        assert!((f.c - 0.65).abs() < 1e-6, "{f:?}");
        assert!(f.residual_rms < 1e-9);
    }

    #[test]
    fn default_window_refers_amplitude_to_absolute_time() {
        let (t, y) = synthetic(200, 10_000.0);
        let f = fit_exponential(&t, &y, FitWindow::default()).unwrap();
        assert!(f.fit_window.0 >= 500.0);
        assert!((f.a - 0.3).abs() < 1e-6 && (f.c - 0.65).abs() < 1e-9);
    }

    #[test]
    fn noisy_fit_covers_truth() {
        let (t, y0) = synthetic(200, 10_000.0);
        let truth = [0.3, 1.0 / 2000.0, 0.65];
        let mut inside = [0usize; 3];
        let reps = 200;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = y0.iter().map(|v| v + 0.005 * gaussian(&mut rng)).collect();
            let f = fit_exponential(&t, &y, FitWindow::starting_at(0.0)).unwrap();
            let se = f.std_errors();
            let p = [f.a, f.b, f.c];
            for i in 0..3 {
                if (p[i] - truth[i]).abs() <= 3.0 * se[i] {
                    inside[i] += 1;
                }
            }
        }
        // 3σ coverage is 99.7%; allow a few misses.
        for k in inside {
            assert!(k >= reps as usize - 6, "{inside:?}");
        }
    }

    #[test]
    fn constant_series_has_no_decay() {
        let t: Vec<f64> = (0..50).map(|k| 100.0 * k as f64).collect();
        let y = vec![0.9; 50];
        assert!(matches!(fit_exponential(&t, &y, FitWindow::starting_at(0.0)), Err(FitError::NoDecay { .. })));
    }

    #[test]
    fn growing_series_has_no_decay() {
        let t: Vec<f64> = (0..50).map(|k| 100.0 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 0.1 + 0.05 * (t / 3000.0).exp()).collect();
        let r = fit_exponential(&t, &y, FitWindow::starting_at(0.0));
        assert!(matches!(r, Err(FitError::NoDecay { .. })), "{r:?}");
    }

    #[test]
    fn shift_invariance_and_idempotence() {
        let (t, y) = synthetic(120, 8000.0);
        let f = fit_exponential(&t, &y, FitWindow::starting_at(0.0)).unwrap();
        let shift = 1234.5;
        let ts: Vec<f64> = t.iter().map(|x| x + shift).collect();
        let g = fit_exponential(&ts, &y, FitWindow::starting_at(shift)).unwrap();
        assert!((f.b - g.b).abs() < 1e-9 && (f.c - g.c).abs() < 1e-9);
        assert!((g.a * (-g.b * shift).exp() - f.a).abs() < 1e-9);

        let model: Vec<f64> = t.iter().map(|&x| f.eval(x)).collect();
        let h = fit_exponential(&t, &model, FitWindow::starting_at(0.0)).unwrap();
        assert!((h.a - f.a).abs() < 1e-9 && (h.b - f.b).abs() < 1e-9 && (h.c - f.c).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let t: Vec<f64> = (0..5).map(|k| k as f64).collect();
        assert_eq!(fit_exponential(&t, &[0.5; 5], FitWindow::starting_at(0.0)), Err(FitError::TooFewPoints(5)));
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let mut y = vec![0.5; 20];
        y[3] = 1.5;
        assert!(matches!(fit_exponential(&t, &y, FitWindow::starting_at(0.0)), Err(FitError::OutOfRange { .. })));
        assert!(matches!(fit_exponential(&t, &y[..3], FitWindow::starting_at(0.0)), Err(FitError::LengthMismatch { .. })));
        assert!(matches!(
            fit_exponential(&t, &[0.5; 20], FitWindow { start_ns: 5.0, end_ns: Some(1.0) }),
            Err(FitError::InvalidWindow(..))
        ));
    }

    #[test]
    fn covariance_is_psd() {
        let (t, y0) = synthetic(100, 10_000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = y0.iter().map(|v| v + 0.01 * gaussian(&mut rng)).collect();
        let f = fit_exponential(&t, &y, FitWindow::default()).unwrap();
        let m = Matrix3::from_fn(|i, j| f.covariance[i][j]);
        let eig = m.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e >= -1e-12 * m.norm()), "{eig}");
    }
}
