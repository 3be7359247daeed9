//! Two-hidden-layer tanh MLPs: a Gaussian policy with a state-independent
//! log standard deviation, and a scalar value network. Gradients are computed
//! by hand.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::envs::Actor;
use crate::error::{contract, Result};

pub const HIDDEN: usize = 64;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Weights of `in -> hidden -> hidden -> out`, stored flat as
/// `w1 | b1 | w2 | b2 | w_out | b_out` with row-major matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

/// Batched activations, one row per input.
#[derive(Clone, Debug)]
pub struct BatchActivations {
    pub h1: DMatrix<f64>,
    pub h2: DMatrix<f64>,
    pub out: DMatrix<f64>,
}

/// Stacks equal-length rows into an `n x d` matrix.
pub fn stack_rows<R: AsRef<[f64]>>(rows: &[R]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i].as_ref()[j])
}

/// Hidden activations kept from a forward pass.
#[derive(Clone, Debug)]
pub struct Activations {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub out: Vec<f64>,
}

impl Mlp {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        let len = hidden * in_dim + hidden + hidden * hidden + hidden + out_dim * hidden + out_dim;
        Mlp {
            in_dim,
            hidden,
            out_dim,
            data: vec![0.0; len],
        }
    }

    /// Gaussian init with std `1/sqrt(fan_in)`; the output layer is scaled by `out_scale`.
    pub fn init(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        out_scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut m = Mlp::zeros(in_dim, hidden, out_dim);
        let l = m.layout();
        let mut fill = |range: std::ops::Range<usize>, std: f64, data: &mut [f64]| {
            for v in &mut data[range] {
                let z: f64 = StandardNormal.sample(rng);
                *v = z * std;
            }
        };
        fill(l.w1..l.b1, 1.0 / (in_dim as f64).sqrt(), &mut m.data);
        fill(l.w2..l.b2, 1.0 / (hidden as f64).sqrt(), &mut m.data);
        fill(l.w3..l.b3, out_scale / (hidden as f64).sqrt(), &mut m.data);
        m
    }

    fn layout(&self) -> Layout {
        let (i, h, o) = (self.in_dim, self.hidden, self.out_dim);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        Layout {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            end: b3 + o,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn w1(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.w1..l.b1]
    }
    pub fn b1(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.b1..l.w2]
    }
    pub fn w2(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.w2..l.b2]
    }
    pub fn b2(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.b2..l.w3]
    }
    pub fn w_out(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.w3..l.b3]
    }
    pub fn b_out(&self) -> &[f64] {
        let l = self.layout();
        &self.data[l.b3..l.end]
    }

    pub fn forward(&self, x: &[f64]) -> Activations {
        let l = self.layout();
        let (h, o) = (self.hidden, self.out_dim);
        let d = &self.data;
        let layer = |w: usize, b: usize, input: &[f64], rows: usize, tanh: bool| -> Vec<f64> {
            let cols = input.len();
            (0..rows)
                .map(|r| {
                    let row = &d[w + r * cols..w + (r + 1) * cols];
                    let z = d[b + r] + dot(row, input);
                    if tanh {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect()
        };
        let h1 = layer(l.w1, l.b1, x, h, true);
        let h2 = layer(l.w2, l.b2, &h1, h, true);
        let out = layer(l.w3, l.b3, &h2, o, false);
        Activations { h1, h2, out }
    }

    /// Accumulates `d(gᵀ out)/d params` into `grad`.
    pub fn backward(&self, x: &[f64], act: &Activations, g_out: &[f64], grad: &mut [f64]) {
        let l = self.layout();
        let (h, o, i_dim) = (self.hidden, self.out_dim, self.in_dim);
        let d = &self.data;
        let mut g_h2 = vec![0.0; h];
        for r in 0..o {
            let g = g_out[r];
            if g == 0.0 {
                continue;
            }
            grad[l.b3 + r] += g;
            let row = l.w3 + r * h;
            for c in 0..h {
                grad[row + c] += g * act.h2[c];
                g_h2[c] += g * d[row + c];
            }
        }
        let mut g_h1 = vec![0.0; h];
        for r in 0..h {
            let g = g_h2[r] * (1.0 - act.h2[r] * act.h2[r]);
            grad[l.b2 + r] += g;
            let row = l.w2 + r * h;
            for c in 0..h {
                grad[row + c] += g * act.h1[c];
                g_h1[c] += g * d[row + c];
            }
        }
        for r in 0..h {
            let g = g_h1[r] * (1.0 - act.h1[r] * act.h1[r]);
            grad[l.b1 + r] += g;
            let row = l.w1 + r * i_dim;
            for c in 0..i_dim {
                grad[row + c] += g * x[c];
            }
        }
    }

    /// Batched forward pass; rows of `x` are inputs.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> BatchActivations {
        let l = self.layout();
        let (i, h, o) = (self.in_dim, self.hidden, self.out_dim);
        let n = x.nrows();
        let d = &self.data;
        // Row-major `rows x cols` weights read as their column-major transpose.
        let wt = |start: usize, rows: usize, cols: usize| {
            DMatrixView::from_slice(&d[start..start + rows * cols], cols, rows)
        };
        let affine =
            |input: &DMatrix<f64>, w: usize, b: usize, rows: usize, cols: usize, tanh: bool| {
                let mut z = DMatrix::zeros(n, rows);
                z.gemm(1.0, input, &wt(w, rows, cols), 0.0);
                for (j, mut col) in z.column_iter_mut().enumerate() {
                    let bias = d[b + j];
                    col.apply(|v| {
                        *v += bias;
                        if tanh {
                            *v = v.tanh();
                        }
                    });
                }
                z
            };
        let h1 = affine(x, l.w1, l.b1, h, i, true);
        let h2 = affine(&h1, l.w2, l.b2, h, h, true);
        let out = affine(&h2, l.w3, l.b3, o, h, false);
        BatchActivations { h1, h2, out }
    }

    /// Batched [`Mlp::backward`]: accumulates `Σ_rows d(g_rowᵀ out_row)/d params`.
    pub fn backward_batch(
        &self,
        x: &DMatrix<f64>,
        act: &BatchActivations,
        g_out: &DMatrix<f64>,
        grad: &mut [f64],
    ) {
        let l = self.layout();
        let (i, h, o) = (self.in_dim, self.hidden, self.out_dim);
        let d = &self.data;
        let w_rows = |start: usize, rows: usize, cols: usize| {
            DMatrixView::from_slice_with_strides(
                &d[start..start + rows * cols],
                rows,
                cols,
                cols,
                1,
            )
        };
        // The row-major `rows x cols` gradient is a contiguous column-major
        // `cols x rows` matrix, accumulated as `inputᵀ G`.
        let acc = |grad: &mut [f64],
                   start: usize,
                   rows: usize,
                   cols: usize,
                   g: &DMatrix<f64>,
                   input: &DMatrix<f64>| {
            // Owned transpose: the small-matrix fallback in nalgebra mishandles
            // operands whose columns are strided.
            let input_t = input.transpose();
            let mut gw =
                DMatrixViewMut::from_slice(&mut grad[start..start + rows * cols], cols, rows);
            gw.gemm(1.0, &input_t, g, 1.0);
        };
        let bias = |grad: &mut [f64], start: usize, g: &DMatrix<f64>| {
            for (j, col) in g.column_iter().enumerate() {
                grad[start + j] += col.sum();
            }
        };
        let through_tanh = |mut g: DMatrix<f64>, a: &DMatrix<f64>| {
            g.zip_apply(a, |gv, av| *gv *= 1.0 - av * av);
            g
        };

        acc(grad, l.w3, o, h, g_out, &act.h2);
        bias(grad, l.b3, g_out);
        let g2 = through_tanh(g_out * w_rows(l.w3, o, h), &act.h2);
        acc(grad, l.w2, h, h, &g2, &act.h1);
        bias(grad, l.b2, &g2);
        let g1 = through_tanh(&g2 * w_rows(l.w2, h, h), &act.h1);
        acc(grad, l.w1, h, i, &g1, x);
        bias(grad, l.b1, &g1);
    }

    fn to_json(&self) -> MlpJson {
        let rows = |s: &[f64], cols: usize| s.chunks(cols).map(<[f64]>::to_vec).collect();
        MlpJson {
            in_dim: self.in_dim,
            hidden: self.hidden,
            out_dim: self.out_dim,
            w1: rows(self.w1(), self.in_dim),
            b1: self.b1().to_vec(),
            w2: rows(self.w2(), self.hidden),
            b2: self.b2().to_vec(),
            w_out: rows(self.w_out(), self.hidden),
            b_out: self.b_out().to_vec(),
        }
    }

    fn from_json(j: &MlpJson) -> Result<Self> {
        let mut m = Mlp::zeros(j.in_dim, j.hidden, j.out_dim);
        let shaped = |name: &str, rows: &Vec<Vec<f64>>, r: usize, c: usize| -> Result<Vec<f64>> {
            if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                return Err(contract(format!("{name} must be {r}x{c}")));
            }
            Ok(rows.concat())
        };
        let flat = |name: &str, v: &Vec<f64>, n: usize| -> Result<Vec<f64>> {
            if v.len() != n {
                return Err(contract(format!("{name} must have {n} entries")));
            }
            Ok(v.clone())
        };
        let parts = [
            shaped("w1", &j.w1, j.hidden, j.in_dim)?,
            flat("b1", &j.b1, j.hidden)?,
            shaped("w2", &j.w2, j.hidden, j.hidden)?,
            flat("b2", &j.b2, j.hidden)?,
            shaped("w_out", &j.w_out, j.out_dim, j.hidden)?,
            flat("b_out", &j.b_out, j.out_dim)?,
        ];
        m.data = parts.concat();
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(contract("network weights must be finite"));
        }
        Ok(m)
    }
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() / 4 * 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MlpJson {
    in_dim: usize,
    hidden: usize,
    out_dim: usize,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    w_out: Vec<Vec<f64>>,
    b_out: Vec<f64>,
}

/// Gaussian policy: mean from the MLP, state-independent `log_std`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

/// Gradient with the same shape as [`PolicyParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGrad {
    pub net: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl PolicyGrad {
    pub fn max_abs(&self) -> f64 {
        self.net
            .iter()
            .chain(&self.log_std)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl PolicyParams {
    pub fn new(obs_dim: usize, act_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        PolicyParams {
            net: Mlp::init(obs_dim, HIDDEN, act_dim, 0.01, rng),
            log_std: vec![0.0; act_dim],
        }
    }

    pub fn zeros(obs_dim: usize, act_dim: usize) -> Self {
        PolicyParams {
            net: Mlp::zeros(obs_dim, HIDDEN, act_dim),
            log_std: vec![0.0; act_dim],
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.in_dim
    }

    pub fn act_dim(&self) -> usize {
        self.net.out_dim
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(contract(format!(
                "observation has {} entries, policy expects {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_obs(obs)?;
        Ok(self.net.forward(obs).out)
    }

    pub fn log_prob_of_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((m, a), ls)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum()
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mean = self.forward(obs)?;
        if action.len() != self.act_dim() {
            return Err(contract("action dimension mismatch"));
        }
        Ok(self.log_prob_of_mean(&mean, action))
    }

    pub fn sample_with_mean(&self, mean: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect();
        let lp = self.log_prob_of_mean(mean, &action);
        (action, lp)
    }

    pub fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
        let mean = self.forward(obs)?;
        Ok(self.sample_with_mean(&mean, rng))
    }

    pub fn zero_grad(&self) -> PolicyGrad {
        PolicyGrad {
            net: vec![0.0; self.net.len()],
            log_std: vec![0.0; self.act_dim()],
        }
    }

    /// Accumulates `coef * ∇ log π(action | obs)` into `grad`; returns the log-probability.
    pub fn accumulate_log_prob_grad(
        &self,
        obs: &[f64],
        action: &[f64],
        coef: f64,
        grad: &mut PolicyGrad,
    ) -> f64 {
        let act = self.net.forward(obs);
        let lp = self.log_prob_of_mean(&act.out, action);
        if coef == 0.0 {
            return lp;
        }
        let mut g_mean = vec![0.0; self.act_dim()];
        for i in 0..self.act_dim() {
            let var = (2.0 * self.log_std[i]).exp();
            let diff = action[i] - act.out[i];
            g_mean[i] = coef * diff / var;
            grad.log_std[i] += coef * (diff * diff / var - 1.0);
        }
        self.net.backward(obs, &act, &g_mean, &mut grad.net);
        lp
    }

    pub fn log_probs_batch(&self, means: &DMatrix<f64>, actions: &DMatrix<f64>) -> Vec<f64> {
        (0..means.nrows())
            .map(|r| {
                (0..self.act_dim())
                    .map(|j| {
                        let ls = self.log_std[j];
                        let z = (actions[(r, j)] - means[(r, j)]) / ls.exp();
                        -0.5 * z * z - ls - HALF_LN_2PI
                    })
                    .sum()
            })
            .collect()
    }

    /// Batched [`PolicyParams::accumulate_log_prob_grad`] given the forward pass `act` of `x`.
    pub fn accumulate_log_prob_grad_batch(
        &self,
        x: &DMatrix<f64>,
        act: &BatchActivations,
        actions: &DMatrix<f64>,
        coefs: &[f64],
        grad: &mut PolicyGrad,
    ) {
        let mut g_mean = DMatrix::zeros(x.nrows(), self.act_dim());
        for j in 0..self.act_dim() {
            let var = (2.0 * self.log_std[j]).exp();
            for (r, &c) in coefs.iter().enumerate() {
                let diff = actions[(r, j)] - act.out[(r, j)];
                g_mean[(r, j)] = c * diff / var;
                grad.log_std[j] += c * (diff * diff / var - 1.0);
            }
        }
        self.net.backward_batch(x, act, &g_mean, &mut grad.net);
    }

    /// Gradient of `Σ coef · log π(action | obs)` over a batch.
    pub fn backward(&self, batch: &[(&[f64], &[f64], f64)]) -> PolicyGrad {
        let mut g = self.zero_grad();
        for (obs, action, coef) in batch {
            self.accumulate_log_prob_grad(obs, action, *coef, &mut g);
        }
        g
    }

    pub fn clamp_log_std(&mut self) {
        for v in &mut self.log_std {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.net
            .data
            .iter()
            .chain(&self.log_std)
            .all(|v| v.is_finite())
    }
}

/// Scalar state-value network.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueParams {
    pub net: Mlp,
}

impl ValueParams {
    pub fn new(obs_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        ValueParams {
            net: Mlp::init(obs_dim, HIDDEN, 1, 1.0, rng),
        }
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.net.forward(obs).out[0]
    }

    /// Accumulates `coef * ∇ V(obs)` into `grad`; returns `V(obs)`.
    pub fn accumulate_grad(&self, obs: &[f64], coef: f64, grad: &mut [f64]) -> f64 {
        let act = self.net.forward(obs);
        self.net.backward(obs, &act, &[coef], grad);
        act.out[0]
    }
}

impl ValueParams {
    pub fn values_batch(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.net
            .forward_batch(x)
            .out
            .column(0)
            .iter()
            .copied()
            .collect()
    }
}

/// Running per-dimension observation statistics (parallel Welford merge).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
    /// Lower bound on the standard deviation used for scaling.
    pub std_floor: f64,
    /// Caps the weight of past data, so the statistics follow a drifting
    /// input distribution. `None` keeps the full history.
    #[serde(default)]
    pub max_count: Option<f64>,
}

pub const OBS_CLIP: f64 = 10.0;

impl ObsNormalizer {
    pub fn new(dim: usize, std_floor: f64) -> Self {
        ObsNormalizer {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 0.0,
            std_floor,
            max_count: None,
        }
    }

    pub fn update(&mut self, rows: &[Vec<f64>]) {
        if rows.is_empty() {
            return;
        }
        let n = rows.len() as f64;
        let d = self.mean.len();
        let mut bm = vec![0.0; d];
        for r in rows {
            for i in 0..d {
                bm[i] += r[i];
            }
        }
        bm.iter_mut().for_each(|v| *v /= n);
        let mut bv = vec![0.0; d];
        for r in rows {
            for i in 0..d {
                bv[i] += (r[i] - bm[i]).powi(2);
            }
        }
        bv.iter_mut().for_each(|v| *v /= n);
        if self.count == 0.0 {
            self.mean = bm;
            self.var = bv;
            self.count = n;
            return;
        }
        let total = self.count + n;
        for i in 0..d {
            let delta = bm[i] - self.mean[i];
            let m2 = self.var[i] * self.count + bv[i] * n + delta * delta * self.count * n / total;
            self.mean[i] += delta * n / total;
            self.var[i] = m2 / total;
        }
        self.count = match self.max_count {
            Some(cap) => total.min(cap),
            None => total,
        };
    }

    pub fn normalize(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((x, m), v)| ((x - m) / v.sqrt().max(self.std_floor)).clamp(-OBS_CLIP, OBS_CLIP))
            .collect()
    }
}

/// What rollouts run: policy weights plus the frozen normalisation that goes
/// with them, and optionally the value network for warm starts.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySnapshot {
    pub policy: PolicyParams,
    pub value: Option<ValueParams>,
    pub obs_norm: ObsNormalizer,
}

pub const DEFAULT_STD_FLOOR: f64 = 5e-2;

impl PolicySnapshot {
    pub fn fresh(obs_dim: usize, act_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        PolicySnapshot {
            policy: PolicyParams::new(obs_dim, act_dim, rng),
            value: Some(ValueParams::new(obs_dim, rng)),
            obs_norm: ObsNormalizer::new(obs_dim, DEFAULT_STD_FLOOR),
        }
    }

    /// All-zero weights: always commands the zero action.
    pub fn zero(obs_dim: usize, act_dim: usize) -> Self {
        PolicySnapshot {
            policy: PolicyParams::zeros(obs_dim, act_dim),
            value: None,
            obs_norm: ObsNormalizer::new(obs_dim, DEFAULT_STD_FLOOR),
        }
    }

    pub fn to_json(&self) -> PolicyJson {
        PolicyJson {
            obs_dim: self.policy.obs_dim(),
            act_dim: self.policy.act_dim(),
            policy: self.policy.net.to_json(),
            log_std: self.policy.log_std.clone(),
            value: self.value.as_ref().map(|v| v.net.to_json()),
            obs_norm: self.obs_norm.clone(),
        }
    }

    pub fn from_json(j: &PolicyJson) -> Result<Self> {
        let net = Mlp::from_json(&j.policy)?;
        if net.in_dim != j.obs_dim || net.out_dim != j.act_dim || j.log_std.len() != j.act_dim {
            return Err(contract("policy shapes disagree with obs_dim/act_dim"));
        }
        if j.obs_norm.mean.len() != j.obs_dim || j.obs_norm.var.len() != j.obs_dim {
            return Err(contract("normalizer width disagrees with obs_dim"));
        }
        let value = match &j.value {
            Some(v) => Some(ValueParams {
                net: Mlp::from_json(v)?,
            }),
            None => None,
        };
        Ok(PolicySnapshot {
            policy: PolicyParams {
                net,
                log_std: j.log_std.clone(),
            },
            value,
            obs_norm: j.obs_norm.clone(),
        })
    }
}

impl Actor for PolicySnapshot {
    fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        self.policy.net.forward(&self.obs_norm.normalize(obs)).out
    }

    fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let mean = self.mean_action(obs);
        self.policy.sample_with_mean(&mean, rng)
    }
}

/// Policy snapshot on disk, with explicit shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyJson {
    pub obs_dim: usize,
    pub act_dim: usize,
    policy: MlpJson,
    pub log_std: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<MlpJson>,
    pub obs_norm: ObsNormalizer,
}

/// Uniform draw helper used by tests and oracles.
pub fn random_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}
