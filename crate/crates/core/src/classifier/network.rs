//! Encoders over a flat parameter vector, with hand-written backward passes.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub trait Real: Float + FromPrimitive + Debug + Send + Sync + 'static {}
impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    Recurrent,
    Attention,
    PooledLinear,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [
        EncoderKind::Recurrent,
        EncoderKind::Attention,
        EncoderKind::PooledLinear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Recurrent => "recurrent",
            EncoderKind::Attention => "attention",
            EncoderKind::PooledLinear => "pooled-linear",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            EncoderKind::Recurrent => 0,
            EncoderKind::Attention => 1,
            EncoderKind::PooledLinear => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.code() == c)
    }
}

/// A named parameter tensor of shape `rows × cols` (row-major).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    fn new(name: &str, rows: usize, cols: usize) -> Self {
        Self {
            name: name.to_string(),
            rows,
            cols,
        }
    }

    pub fn size(&self) -> usize {
        self.rows * self.cols
    }

    fn is_head(&self) -> bool {
        self.name.starts_with("out_")
    }

    fn is_bias(&self) -> bool {
        self.cols == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

pub fn layout(encoder: EncoderKind, dims: Dims) -> Vec<Block> {
    let Dims {
        input: d,
        hidden: h,
        classes: c,
    } = dims;
    match encoder {
        EncoderKind::PooledLinear => vec![Block::new("out_w", c, d), Block::new("out_b", c, 1)],
        EncoderKind::Recurrent => vec![
            Block::new("lstm_wx", 4 * h, d),
            Block::new("lstm_wh", 4 * h, h),
            Block::new("lstm_b", 4 * h, 1),
            Block::new("out_w", c, h),
            Block::new("out_b", c, 1),
        ],
        EncoderKind::Attention => vec![
            Block::new("in_w", h, d),
            Block::new("in_b", h, 1),
            Block::new("wq", h, h),
            Block::new("wk", h, h),
            Block::new("wv", h, h),
            Block::new("out_w", c, h),
            Block::new("out_b", c, 1),
        ],
    }
}

pub fn parameter_count(blocks: &[Block]) -> usize {
    blocks.iter().map(Block::size).sum()
}

/// Xavier-uniform weights, zero biases and a zero output head.
pub fn initialize<F: Real, R: Rng>(blocks: &[Block], rng: &mut R) -> Vec<F> {
    let mut out = Vec::with_capacity(parameter_count(blocks));
    for b in blocks {
        if b.is_head() || b.is_bias() {
            out.extend(std::iter::repeat_n(F::zero(), b.size()));
        } else {
            let a = (6.0 / (b.rows + b.cols) as f64).sqrt();
            out.extend((0..b.size()).map(|_| lit::<F>(rng.gen_range(-a..a))));
        }
    }
    out
}

fn split<'a, F>(mut rest: &'a [F], blocks: &[Block]) -> Vec<&'a [F]> {
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (head, tail) = rest.split_at(b.size());
        out.push(head);
        rest = tail;
    }
    out
}

fn split_mut<'a, F>(mut rest: &'a mut [F], blocks: &[Block]) -> Vec<&'a mut [F]> {
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(b.size());
        out.push(head);
        rest = tail;
    }
    out
}

/// `out = W x (+ b)`, W is `rows × cols`.
fn affine<F: Real>(w: &[F], b: Option<&[F]>, cols: usize, x: &[F], out: &mut [F]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b.map_or(F::zero(), |b| b[r]);
        for (wi, xi) in row.iter().zip(x) {
            acc = acc + *wi * *xi;
        }
        *o = acc;
    }
}

/// `dx += Wᵀ dy`.
fn affine_t_acc<F: Real>(w: &[F], cols: usize, dy: &[F], dx: &mut [F]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == F::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, wi) in dx.iter_mut().zip(row) {
            *d = *d + g * *wi;
        }
    }
}

/// `dW += dy ⊗ x`.
fn outer_acc<F: Real>(dw: &mut [F], cols: usize, dy: &[F], x: &[F]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == F::zero() {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, xi) in row.iter_mut().zip(x) {
            *d = *d + g * *xi;
        }
    }
}

fn add_assign<F: Real>(acc: &mut [F], x: &[F]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a = *a + *b;
    }
}

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Loss `-ln softmax(logits)[label]` and its gradient wrt the logits.
pub(crate) fn softmax_cross_entropy<F: Real>(logits: &[F], label: usize) -> (F, Vec<F>) {
    let m = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let sum = logits.iter().fold(F::zero(), |s, &l| s + (l - m).exp());
    let lse = m + sum.ln();
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| (l - lse).exp() - if i == label { F::one() } else { F::zero() })
        .collect();
    (lse - logits[label], grad)
}

/// Sinusoidal position encoding of width `h` at position `t`.
pub(crate) fn position_encoding<F: Real>(t: usize, h: usize) -> Vec<F> {
    (0..h)
        .map(|j| {
            let pair = (j / 2) as f64;
            let angle = t as f64 / 10_000f64.powf(2.0 * pair / h as f64);
            lit(if j % 2 == 0 { angle.sin() } else { angle.cos() })
        })
        .collect()
}

/// Valid steps of a sequence: (position, features).
pub(crate) type Steps<F> = [(usize, Vec<F>)];

pub(crate) struct Network<'a> {
    pub encoder: EncoderKind,
    pub dims: Dims,
    pub blocks: &'a [Block],
}

struct LstmStep<F> {
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    i: Vec<F>,
    f: Vec<F>,
    o: Vec<F>,
    g: Vec<F>,
    tanh_c: Vec<F>,
}

struct AttentionCache<F> {
    z: Vec<Vec<F>>,
    q: Vec<Vec<F>>,
    k: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    alpha: Vec<Vec<F>>,
    pooled: Vec<F>,
}

impl Network<'_> {
    pub fn logits<F: Real>(&self, params: &[F], steps: &Steps<F>) -> Vec<F> {
        let p = split(params, self.blocks);
        let c = self.dims.classes;
        let mut logits = vec![F::zero(); c];
        match self.encoder {
            EncoderKind::PooledLinear => {
                let m = self.mean_input(steps);
                affine(p[0], Some(p[1]), self.dims.input, &m, &mut logits);
            }
            EncoderKind::Recurrent => {
                let (h, _) = self.lstm_forward(&p, steps, false);
                affine(p[3], Some(p[4]), self.dims.hidden, &h, &mut logits);
            }
            EncoderKind::Attention => {
                let cache = self.attention_forward(&p, steps);
                affine(p[5], Some(p[6]), self.dims.hidden, &cache.pooled, &mut logits);
            }
        }
        logits
    }

    /// Loss for one labelled sequence; `grad` is overwritten with its gradient.
    pub fn loss_and_grad<F: Real>(&self, params: &[F], steps: &Steps<F>, label: usize, grad: &mut [F]) -> F {
        grad.iter_mut().for_each(|g| *g = F::zero());
        let p = split(params, self.blocks);
        let mut g = split_mut(grad, self.blocks);
        let Dims {
            input: d,
            hidden: h,
            classes: c,
        } = self.dims;
        let mut logits = vec![F::zero(); c];
        match self.encoder {
            EncoderKind::PooledLinear => {
                let m = self.mean_input(steps);
                affine(p[0], Some(p[1]), d, &m, &mut logits);
                let (loss, dl) = softmax_cross_entropy(&logits, label);
                outer_acc(g[0], d, &dl, &m);
                add_assign(g[1], &dl);
                loss
            }
            EncoderKind::Recurrent => {
                let (h_last, cache) = self.lstm_forward(&p, steps, true);
                affine(p[3], Some(p[4]), h, &h_last, &mut logits);
                let (loss, dl) = softmax_cross_entropy(&logits, label);
                outer_acc(g[3], h, &dl, &h_last);
                add_assign(g[4], &dl);
                let mut dh = vec![F::zero(); h];
                affine_t_acc(p[3], h, &dl, &mut dh);
                self.lstm_backward(&p, &mut g, steps, &cache, dh);
                loss
            }
            EncoderKind::Attention => {
                let cache = self.attention_forward(&p, steps);
                affine(p[5], Some(p[6]), h, &cache.pooled, &mut logits);
                let (loss, dl) = softmax_cross_entropy(&logits, label);
                outer_acc(g[5], h, &dl, &cache.pooled);
                add_assign(g[6], &dl);
                let mut dm = vec![F::zero(); h];
                affine_t_acc(p[5], h, &dl, &mut dm);
                self.attention_backward(&p, &mut g, steps, &cache, dm);
                loss
            }
        }
    }

    fn mean_input<F: Real>(&self, steps: &Steps<F>) -> Vec<F> {
        let mut m = vec![F::zero(); self.dims.input];
        for (_, x) in steps {
            add_assign(&mut m, x);
        }
        let n = lit::<F>(steps.len() as f64);
        m.iter_mut().for_each(|v| *v = *v / n);
        m
    }

    fn lstm_forward<F: Real>(&self, p: &[&[F]], steps: &Steps<F>, keep: bool) -> (Vec<F>, Vec<LstmStep<F>>) {
        let h = self.dims.hidden;
        let d = self.dims.input;
        let mut hs = vec![F::zero(); h];
        let mut cs = vec![F::zero(); h];
        let mut gates = vec![F::zero(); 4 * h];
        let mut cache = Vec::with_capacity(if keep { steps.len() } else { 0 });
        for (_, x) in steps {
            affine(p[0], Some(p[2]), d, x, &mut gates);
            affine_acc(p[1], h, &hs, &mut gates);
            let i: Vec<F> = gates[..h].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<F> = gates[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
            let o: Vec<F> = gates[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<F> = gates[3 * h..].iter().map(|&v| v.tanh()).collect();
            let c_new: Vec<F> = (0..h).map(|j| f[j] * cs[j] + i[j] * g[j]).collect();
            let tanh_c: Vec<F> = c_new.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<F> = (0..h).map(|j| o[j] * tanh_c[j]).collect();
            if keep {
                cache.push(LstmStep {
                    h_prev: std::mem::replace(&mut hs, h_new),
                    c_prev: std::mem::replace(&mut cs, c_new),
                    i,
                    f,
                    o,
                    g,
                    tanh_c,
                });
            } else {
                hs = h_new;
                cs = c_new;
            }
        }
        (hs, cache)
    }

    fn lstm_backward<F: Real>(
        &self,
        p: &[&[F]],
        g: &mut [&mut [F]],
        steps: &Steps<F>,
        cache: &[LstmStep<F>],
        mut dh: Vec<F>,
    ) {
        let h = self.dims.hidden;
        let d = self.dims.input;
        let mut dc = vec![F::zero(); h];
        let mut dgates = vec![F::zero(); 4 * h];
        for (s, (_, x)) in cache.iter().zip(steps).rev() {
            for j in 0..h {
                let one = F::one();
                let do_ = dh[j] * s.tanh_c[j];
                dc[j] = dc[j] + dh[j] * s.o[j] * (one - s.tanh_c[j] * s.tanh_c[j]);
                let di = dc[j] * s.g[j];
                let df = dc[j] * s.c_prev[j];
                let dg = dc[j] * s.i[j];
                dgates[j] = di * s.i[j] * (one - s.i[j]);
                dgates[h + j] = df * s.f[j] * (one - s.f[j]);
                dgates[2 * h + j] = do_ * s.o[j] * (one - s.o[j]);
                dgates[3 * h + j] = dg * (one - s.g[j] * s.g[j]);
                dc[j] = dc[j] * s.f[j];
            }
            outer_acc(g[0], d, &dgates, x);
            outer_acc(g[1], h, &dgates, &s.h_prev);
            add_assign(g[2], &dgates);
            dh.iter_mut().for_each(|v| *v = F::zero());
            affine_t_acc(p[1], h, &dgates, &mut dh);
        }
    }

    fn attention_forward<F: Real>(&self, p: &[&[F]], steps: &Steps<F>) -> AttentionCache<F> {
        let h = self.dims.hidden;
        let d = self.dims.input;
        let n = steps.len();
        let scale = lit::<F>(1.0 / (h as f64).sqrt());
        let mut z = Vec::with_capacity(n);
        let (mut q, mut k, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for (t, x) in steps {
            let mut zi = vec![F::zero(); h];
            affine(p[0], Some(p[1]), d, x, &mut zi);
            add_assign(&mut zi, &position_encoding::<F>(*t, h));
            let mut qi = vec![F::zero(); h];
            let mut ki = vec![F::zero(); h];
            let mut vi = vec![F::zero(); h];
            affine(p[2], None, h, &zi, &mut qi);
            affine(p[3], None, h, &zi, &mut ki);
            affine(p[4], None, h, &zi, &mut vi);
            z.push(zi);
            q.push(qi);
            k.push(ki);
            v.push(vi);
        }
        let mut alpha = Vec::with_capacity(n);
        let mut pooled = vec![F::zero(); h];
        for i in 0..n {
            let s: Vec<F> = (0..n).map(|j| dot(&q[i], &k[j]) * scale).collect();
            let m = s.iter().copied().fold(F::neg_infinity(), F::max);
            let e: Vec<F> = s.iter().map(|&x| (x - m).exp()).collect();
            let total = e.iter().fold(F::zero(), |a, &b| a + b);
            let a: Vec<F> = e.iter().map(|&x| x / total).collect();
            // residual: h_i = z_i + Σ_j α_ij v_j
            for c in 0..h {
                let mut acc = z[i][c];
                for j in 0..n {
                    acc = acc + a[j] * v[j][c];
                }
                pooled[c] = pooled[c] + acc;
            }
            alpha.push(a);
        }
        let nf = lit::<F>(n as f64);
        pooled.iter_mut().for_each(|x| *x = *x / nf);
        AttentionCache {
            z,
            q,
            k,
            v,
            alpha,
            pooled,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn attention_backward<F: Real>(
        &self,
        p: &[&[F]],
        g: &mut [&mut [F]],
        steps: &Steps<F>,
        c: &AttentionCache<F>,
        dm: Vec<F>,
    ) {
        let h = self.dims.hidden;
        let d = self.dims.input;
        let n = steps.len();
        let scale = lit::<F>(1.0 / (h as f64).sqrt());
        let nf = lit::<F>(n as f64);
        let dh: Vec<F> = dm.iter().map(|&x| x / nf).collect();
        let mut dz = vec![dh.clone(); n];
        let mut dq = vec![vec![F::zero(); h]; n];
        let mut dk = vec![vec![F::zero(); h]; n];
        let mut dv = vec![vec![F::zero(); h]; n];
        for i in 0..n {
            let a = &c.alpha[i];
            let da: Vec<F> = (0..n).map(|j| dot(&dh, &c.v[j])).collect();
            let weighted = (0..n).fold(F::zero(), |acc, j| acc + a[j] * da[j]);
            for j in 0..n {
                for (x, &y) in dv[j].iter_mut().zip(&dh) {
                    *x = *x + a[j] * y;
                }
                let ds = a[j] * (da[j] - weighted) * scale;
                for col in 0..h {
                    dq[i][col] = dq[i][col] + ds * c.k[j][col];
                    dk[j][col] = dk[j][col] + ds * c.q[i][col];
                }
            }
        }
        for i in 0..n {
            outer_acc(g[2], h, &dq[i], &c.z[i]);
            outer_acc(g[3], h, &dk[i], &c.z[i]);
            outer_acc(g[4], h, &dv[i], &c.z[i]);
            affine_t_acc(p[2], h, &dq[i], &mut dz[i]);
            affine_t_acc(p[3], h, &dk[i], &mut dz[i]);
            affine_t_acc(p[4], h, &dv[i], &mut dz[i]);
            outer_acc(g[0], d, &dz[i], &steps[i].1);
            add_assign(g[1], &dz[i]);
        }
    }
}

/// `out += W x`, W is `out.len() × cols`.
fn affine_acc<F: Real>(w: &[F], cols: usize, x: &[F], out: &mut [F]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = *o;
        for (wi, xi) in row.iter().zip(x) {
            acc = acc + *wi * *xi;
        }
        *o = acc;
    }
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (x, y)| s + *x * *y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_ce_uniform() {
        let (loss, g) = softmax_cross_entropy(&[0.0f64; 4], 2);
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        assert_eq!(g, vec![0.25, 0.25, -0.75, 0.25]);
    }

    #[test]
    fn position_encoding_origin() {
        let pe = position_encoding::<f64>(0, 6);
        assert_eq!(pe, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn layout_sizes() {
        let dims = Dims {
            input: 36,
            hidden: 64,
            classes: 4,
        };
        assert_eq!(parameter_count(&layout(EncoderKind::PooledLinear, dims)), 4 * 37);
        assert_eq!(
            parameter_count(&layout(EncoderKind::Recurrent, dims)),
            256 * 36 + 256 * 64 + 256 + 4 * 64 + 4
        );
    }
}
