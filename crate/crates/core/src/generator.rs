//! Time-dependent generators compiled into flat arrays for the solvers.

use crate::algebra::{CsrMatrix, C64};
use crate::error::{structural, Result};
use crate::integrate::{DiagonalFrame, FrameMode};
use crate::protocol::{CollapseChannel, Modulation, TimeDependentHamiltonian};

const ZERO: C64 = C64::new(0.0, 0.0);

/// `√γ L` in the cheapest representation that fits.
#[derive(Clone, Debug)]
pub(crate) enum JumpForm {
    Diagonal(Vec<C64>),
    /// `(row, col, value)` with at most one entry per row and column.
    Monomial(Vec<(u32, u32, C64)>),
    General(CsrMatrix),
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledJump {
    pub form: JumpForm,
    pub label: String,
}

impl CompiledJump {
    fn new(ch: &CollapseChannel) -> Self {
        let scaled = ch.op.matrix().scale(C64::new(ch.rate.sqrt(), 0.0));
        let form = if scaled.is_diagonal() {
            JumpForm::Diagonal(scaled.diagonal())
        } else if let Some(rows) = scaled.monomial_rows() {
            JumpForm::Monomial(
                rows.into_iter()
                    .enumerate()
                    .filter_map(|(r, e)| e.map(|(c, v)| (r as u32, c as u32, v)))
                    .collect(),
            )
        } else {
            JumpForm::General(scaled)
        };
        CompiledJump { form, label: ch.label.clone() }
    }

    /// `out = √γ L ψ`.
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        match &self.form {
            JumpForm::Diagonal(d) => {
                for i in 0..psi.len() {
                    out[i] = d[i] * psi[i];
                }
            }
            JumpForm::Monomial(m) => {
                out.fill(ZERO);
                for &(r, c, v) in m {
                    out[r as usize] = v * psi[c as usize];
                }
            }
            JumpForm::General(a) => a.mul_vec_into(psi, out),
        }
    }

    /// `γ ‖L ψ‖²`.
    pub fn rate_on(&self, psi: &[C64]) -> f64 {
        match &self.form {
            JumpForm::Diagonal(d) => d.iter().zip(psi).map(|(a, b)| (a * b).norm_sqr()).sum(),
            JumpForm::Monomial(m) => m.iter().map(|&(_, c, v)| (v * psi[c as usize]).norm_sqr()).sum(),
            JumpForm::General(a) => a.mul_vec(psi).iter().map(|z| z.norm_sqr()).sum(),
        }
    }
}

/// `A(t) = −i H_eff(t)` minus whatever the diagonal frame absorbs, on one
/// sparsity pattern, plus the jump operators.
///
/// Every stored entry is `amp · coef[kind](t)`, where a kind is one fixed
/// combination of the static part and the modulated carriers. A handful of
/// kinds covers the whole protocol, so `A(t)` is applied in one pass
/// without rebuilding its values.
pub(crate) struct CompiledGenerator {
    pub dim: usize,
    pub frame: Option<DiagonalFrame>,
    indptr: Vec<u32>,
    indices: Vec<u32>,
    amp: Vec<C64>,
    kind: Vec<u16>,
    /// Runs of equal kind inside each row: `(end, kind)`, indexed by `row_segs`.
    segs: Vec<(u32, u16)>,
    row_segs: Vec<u32>,
    /// Per kind: weight of the static part, then one weight per carrier.
    kinds: Vec<Vec<C64>>,
    modulations: Vec<Modulation>,
    pub jumps: Vec<CompiledJump>,
}

fn pattern_positions(pattern: &CsrMatrix, m: &CsrMatrix) -> Vec<(usize, C64)> {
    let mut out = Vec::with_capacity(m.nnz());
    for (r, c, v) in m.triplets() {
        let span = pattern.indptr()[r]..pattern.indptr()[r + 1];
        let k = pattern.indices()[span.clone()].binary_search(&c).expect("entry missing from pattern");
        out.push((span.start + k, v));
    }
    out
}

fn kind_key(u: &[C64]) -> Vec<(i64, i64)> {
    let q = |x: f64| (x * 1e12).round() as i64;
    u.iter().map(|z| (q(z.re), q(z.im))).collect()
}

impl CompiledGenerator {
    pub fn new(h: &TimeDependentHamiltonian, channels: &[CollapseChannel], frame: FrameMode) -> Result<Self> {
        let dim = h.dim();
        for ch in channels {
            if ch.op.layout() != h.layout() {
                return Err(structural(format!("channel `{}` lives on a different space", ch.label)));
            }
            if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
                return Err(structural(format!("channel `{}` has invalid rate {}", ch.label, ch.rate)));
            }
        }
        let minus_i = C64::new(0.0, -1.0);
        let mut decay = CsrMatrix::zeros(dim, dim);
        for ch in channels {
            let l = ch.op.matrix();
            decay = decay.add_scaled(C64::new(ch.rate, 0.0), &l.adjoint().matmul(l));
        }
        // H_eff = H − (i/2) Σ γ L†L, stored as −i H_eff.
        let a_static = h.static_part.matrix().scale(minus_i).add_scaled(C64::new(-0.5, 0.0), &decay);
        let (frame_generator, rest) = match frame {
            FrameMode::Interaction => (a_static.diagonal(), a_static.without_diagonal()),
            FrameMode::Lab => (vec![], a_static),
        };
        let terms: Vec<(CsrMatrix, Modulation)> =
            h.merged_terms().into_iter().map(|(m, f)| (m.scale(minus_i), f)).collect();

        let one = C64::new(1.0, 0.0);
        let mut pattern_t: Vec<(usize, usize, C64)> = rest.triplets().map(|(r, c, _)| (r, c, one)).collect();
        for (m, _) in &terms {
            pattern_t.extend(m.triplets().map(|(r, c, _)| (r, c, one)));
        }
        let pattern = CsrMatrix::from_triplets(dim, dim, pattern_t);
        let width = terms.len() + 1;
        let mut w = vec![ZERO; pattern.nnz() * width];
        for (k, v) in pattern_positions(&pattern, &rest) {
            w[k * width] += v;
        }
        for (j, (m, _)) in terms.iter().enumerate() {
            for (k, v) in pattern_positions(&pattern, m) {
                w[k * width + j + 1] += v;
            }
        }

        let mut indptr = vec![0u32];
        let mut indices = Vec::new();
        let mut amp = Vec::new();
        let mut kind = Vec::new();
        let mut kinds: Vec<Vec<C64>> = Vec::new();
        let mut keys: Vec<Vec<(i64, i64)>> = Vec::new();
        let mut segs = Vec::new();
        let mut row_segs = vec![0u32];
        for r in 0..dim {
            let mut row: Vec<(u16, u32, C64)> = Vec::new();
            for k in pattern.indptr()[r]..pattern.indptr()[r + 1] {
                let wk = &w[k * width..(k + 1) * width];
                let Some(lead) = wk.iter().copied().find(|z| *z != ZERO) else { continue };
                let u: Vec<C64> = wk.iter().map(|z| z / lead).collect();
                let key = kind_key(&u);
                let id = match keys.iter().position(|k| *k == key) {
                    Some(id) => id,
                    None => {
                        keys.push(key);
                        kinds.push(u);
                        kinds.len() - 1
                    }
                };
                if kinds.len() > u16::MAX as usize {
                    return Err(structural("too many distinct modulation patterns"));
                }
                row.push((id as u16, pattern.indices()[k] as u32, lead));
            }
            row.sort_by_key(|&(id, c, _)| (id, c));
            for (j, &(id, c, a)) in row.iter().enumerate() {
                indices.push(c);
                amp.push(a);
                kind.push(id);
                if row.get(j + 1).map(|e| e.0) != Some(id) {
                    segs.push((indices.len() as u32, id));
                }
            }
            indptr.push(indices.len() as u32);
            row_segs.push(segs.len() as u32);
        }
        let frame = (!frame_generator.is_empty()).then(|| DiagonalFrame::new(&frame_generator));
        Ok(CompiledGenerator {
            dim,
            frame,
            indptr,
            indices,
            amp,
            kind,
            segs,
            row_segs,
            kinds,
            modulations: terms.iter().map(|(_, f)| *f).collect(),
            jumps: channels.iter().filter(|c| c.rate > 0.0).map(CompiledJump::new).collect(),
        })
    }

    fn coefficients(&self, t: f64) -> Vec<C64> {
        let g: Vec<f64> = std::iter::once(1.0).chain(self.modulations.iter().map(|f| f.value(t))).collect();
        self.kinds.iter().map(|u| u.iter().zip(&g).map(|(a, b)| a * b).sum()).collect()
    }

    /// Buffer for the values of `A(t)` on the shared pattern.
    pub fn value_buffer(&self) -> Vec<C64> {
        vec![ZERO; self.amp.len()]
    }

    /// Writes the values of `A(t)` into `vals`.
    pub fn load(&self, t: f64, vals: &mut [C64]) {
        let coef = self.coefficients(t);
        for ((v, a), k) in vals.iter_mut().zip(&self.amp).zip(&self.kind) {
            *v = a * coef[*k as usize];
        }
    }

    /// `out = A(t) x` without materializing the values.
    pub fn apply_vec(&self, t: f64, x: &[C64], out: &mut [C64]) {
        let coef = self.coefficients(t);
        for r in 0..self.dim {
            let mut acc = ZERO;
            let mut k = self.indptr[r] as usize;
            for &(end, id) in &self.segs[self.row_segs[r] as usize..self.row_segs[r + 1] as usize] {
                let mut part = ZERO;
                while k < end as usize {
                    part += self.amp[k] * x[self.indices[k] as usize];
                    k += 1;
                }
                acc += coef[id as usize] * part;
            }
            out[r] = acc;
        }
    }

    /// `K = A ρ` for a row-major `d × d` matrix.
    pub fn apply_left(&self, vals: &[C64], rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for r in 0..d {
            let row = &mut out[r * d..(r + 1) * d];
            row.fill(ZERO);
            for k in self.indptr[r] as usize..self.indptr[r + 1] as usize {
                let a = vals[k];
                let c = self.indices[k] as usize;
                let src = &rho[c * d..(c + 1) * d];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
    }
}
