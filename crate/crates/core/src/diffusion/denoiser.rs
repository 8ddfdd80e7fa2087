//! Noise-prediction networks.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Predicts the noise in a batch of noisy latents.
///
/// Rows of `x_t` and `cond` are batch items; `t` holds one step per row.
pub trait DenoiserModel: Send + Sync {
    fn latent_dim(&self) -> usize;
    fn cond_dim(&self) -> usize;
    fn predict_noise(&self, x_t: ArrayView2<f64>, t: &[usize], cond: ArrayView2<f64>) -> Array2<f64>;
    fn parameters(&self) -> &[f64];
    fn parameters_mut(&mut self) -> &mut [f64];

    /// Vector-Jacobian product: given `dL/d eps_hat`, returns `dL/d params` (same
    /// layout as [`DenoiserModel::parameters`]) and `dL/d cond`.
    fn backward(
        &self,
        x_t: ArrayView2<f64>,
        t: &[usize],
        cond: ArrayView2<f64>,
        grad_out: ArrayView2<f64>,
    ) -> (Vec<f64>, Array2<f64>);
}

/// Shape of the [`MlpDenoiser`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub latent_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub time_dim: usize,
}

impl MlpSpec {
    pub fn new(latent_dim: usize, cond_dim: usize) -> Self {
        Self {
            latent_dim,
            cond_dim,
            hidden: 256,
            time_dim: 32,
        }
    }

    fn offsets(&self) -> Offsets {
        let (p, d, h, e) = (self.latent_dim, self.cond_dim, self.hidden, self.time_dim);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let w_x = take(p * h);
        let w_t = take(e * h);
        let w_c = take(d * h);
        let b1 = take(h);
        let w_2 = take(h * h);
        let b2 = take(h);
        let w_o = take(h * p);
        let b_o = take(p);
        let w_g = take(e);
        let b_g = take(1);
        Offsets {
            w_x,
            w_t,
            w_c,
            b1,
            w_2,
            b2,
            w_o,
            b_o,
            w_g,
            b_g,
            total: at,
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.offsets().total
    }
}

#[derive(Debug, Clone)]
struct Offsets {
    w_x: std::ops::Range<usize>,
    w_t: std::ops::Range<usize>,
    w_c: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w_2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
    w_o: std::ops::Range<usize>,
    b_o: std::ops::Range<usize>,
    w_g: std::ops::Range<usize>,
    b_g: std::ops::Range<usize>,
    total: usize,
}

/// Two-layer residual MLP over the flattened latent with a gated identity skip:
///
/// ```text
/// h1  = silu(x Wx + tau(t) Wt + c Wc + b1)
/// h2  = h1 + silu(h1 W2 + b2)
/// eps = h2 Wo + bo + sigmoid(tau(t) . wg + bg) * x
/// ```
///
/// `tau(t)` is a fixed sinusoidal step embedding. Parameters live in one flat
/// buffer so optimizers and checkpoints can treat them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDenoiser {
    spec: MlpSpec,
    params: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Sinusoidal embedding of the step index, `time_dim / 2` frequencies.
pub fn time_features(t: &[usize], time_dim: usize) -> Array2<f64> {
    let half = time_dim / 2;
    let mut out = Array2::zeros((t.len(), time_dim));
    for (i, &step) in t.iter().enumerate() {
        for j in 0..half {
            let freq = (-(1000f64.ln()) * j as f64 / half as f64).exp();
            let angle = step as f64 * freq;
            out[[i, 2 * j]] = angle.sin();
            out[[i, 2 * j + 1]] = angle.cos();
        }
    }
    out
}

struct Activations {
    tau: Array2<f64>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    h2: Array2<f64>,
    gate: Array1<f64>,
    out: Array2<f64>,
}

impl MlpDenoiser {
    /// Fresh network with seeded `N(0, 1/fan_in)` weights, a small output layer
    /// and zero biases. Stored values are rounded to `f32` precision.
    pub fn new(spec: MlpSpec, seed: u64) -> Self {
        let off = spec.offsets();
        let mut params = vec![0.0; off.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, std: f64, rng: &mut ChaCha8Rng| {
            let n = Normal::new(0.0, std).expect("positive std");
            for v in &mut params[range] {
                *v = f64::from(n.sample(rng) as f32);
            }
        };
        fill(off.w_x.clone(), (1.0 / spec.latent_dim as f64).sqrt(), &mut rng);
        fill(off.w_t.clone(), (1.0 / spec.time_dim as f64).sqrt(), &mut rng);
        fill(off.w_c.clone(), (1.0 / spec.cond_dim as f64).sqrt(), &mut rng);
        fill(off.w_2.clone(), (1.0 / spec.hidden as f64).sqrt(), &mut rng);
        fill(off.w_o.clone(), 0.1 * (1.0 / spec.hidden as f64).sqrt(), &mut rng);
        fill(off.w_g.clone(), (1.0 / spec.time_dim as f64).sqrt() * 0.1, &mut rng);
        Self { spec, params }
    }

    pub fn from_parameters(spec: MlpSpec, params: Vec<f64>) -> Result<Self, String> {
        let expected = spec.num_parameters();
        if params.len() != expected {
            return Err(format!("expected {expected} parameters, found {}", params.len()));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> MlpSpec {
        self.spec
    }

    fn mat(&self, range: std::ops::Range<usize>, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[range]).expect("parameter block shape")
    }

    fn vec(&self, range: std::ops::Range<usize>) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[range])
    }

    fn forward(&self, x: ArrayView2<f64>, t: &[usize], cond: ArrayView2<f64>) -> Activations {
        let MlpSpec {
            latent_dim: p,
            cond_dim: d,
            hidden: h,
            time_dim: e,
        } = self.spec;
        assert_eq!(x.ncols(), p, "latent width");
        assert_eq!(cond.ncols(), d, "conditioning width");
        assert_eq!(x.nrows(), t.len());
        assert_eq!(x.nrows(), cond.nrows());
        let off = self.spec.offsets();
        let tau = time_features(t, e);
        let mut z1 = x.dot(&self.mat(off.w_x, p, h));
        z1 += &tau.dot(&self.mat(off.w_t, e, h));
        z1 += &cond.dot(&self.mat(off.w_c, d, h));
        z1 += &self.vec(off.b1);
        let h1 = z1.mapv(silu);
        let mut z2 = h1.dot(&self.mat(off.w_2, h, h));
        z2 += &self.vec(off.b2);
        let h2 = &h1 + &z2.mapv(silu);
        let mut out = h2.dot(&self.mat(off.w_o, h, p));
        out += &self.vec(off.b_o);
        let b_g = self.params[off.b_g.start];
        let gate = tau.dot(&self.vec(off.w_g)).mapv(|z| sigmoid(z + b_g));
        for (mut row, (g, xr)) in out.rows_mut().into_iter().zip(gate.iter().zip(x.rows())) {
            row.scaled_add(*g, &xr);
        }
        Activations {
            tau,
            z1,
            h1,
            z2,
            h2,
            gate,
            out,
        }
    }
}

fn put(grad: &mut [f64], range: std::ops::Range<usize>, values: &Array2<f64>) {
    let dst = &mut grad[range];
    for (d, v) in dst.iter_mut().zip(values.iter()) {
        *d = *v;
    }
}

fn put1(grad: &mut [f64], range: std::ops::Range<usize>, values: &Array1<f64>) {
    for (d, v) in grad[range].iter_mut().zip(values.iter()) {
        *d = *v;
    }
}

impl DenoiserModel for MlpDenoiser {
    fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    fn cond_dim(&self) -> usize {
        self.spec.cond_dim
    }

    fn predict_noise(&self, x_t: ArrayView2<f64>, t: &[usize], cond: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x_t, t, cond).out
    }

    fn parameters(&self) -> &[f64] {
        &self.params
    }

    fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn backward(
        &self,
        x: ArrayView2<f64>,
        t: &[usize],
        cond: ArrayView2<f64>,
        grad_out: ArrayView2<f64>,
    ) -> (Vec<f64>, Array2<f64>) {
        let MlpSpec {
            latent_dim: p,
            cond_dim: d,
            hidden: h,
            time_dim: e,
        } = self.spec;
        let off = self.spec.offsets();
        let a = self.forward(x, t, cond);
        let mut grad = vec![0.0; off.total];

        // output layer
        put(&mut grad, off.w_o.clone(), &a.h2.t().dot(&grad_out));
        put1(&mut grad, off.b_o.clone(), &grad_out.sum_axis(Axis(0)));
        let dh2 = grad_out.dot(&self.mat(off.w_o.clone(), h, p).t());

        // gated skip
        let dgate: Array1<f64> = grad_out
            .rows()
            .into_iter()
            .zip(x.rows())
            .map(|(g, xr)| g.dot(&xr))
            .collect();
        let dzg = &dgate * &a.gate.mapv(|g| g * (1.0 - g));
        put1(&mut grad, off.w_g.clone(), &a.tau.t().dot(&dzg));
        grad[off.b_g.start] = dzg.sum();

        // residual block
        let mut dz2 = dh2.clone();
        dz2.zip_mut_with(&a.z2, |g, z| *g *= silu_grad(*z));
        put(&mut grad, off.w_2.clone(), &a.h1.t().dot(&dz2));
        put1(&mut grad, off.b2.clone(), &dz2.sum_axis(Axis(0)));
        let dh1 = dh2 + dz2.dot(&self.mat(off.w_2.clone(), h, h).t());

        // input layer
        let mut dz1 = dh1;
        dz1.zip_mut_with(&a.z1, |g, z| *g *= silu_grad(*z));
        put(&mut grad, off.w_x.clone(), &x.t().dot(&dz1));
        put(&mut grad, off.w_t.clone(), &a.tau.t().dot(&dz1));
        put(&mut grad, off.w_c.clone(), &cond.t().dot(&dz1));
        put1(&mut grad, off.b1.clone(), &dz1.sum_axis(Axis(0)));
        let dcond = dz1.dot(&self.mat(off.w_c, d, h).t());
        debug_assert_eq!(a.tau.ncols(), e);
        (grad, dcond)
    }
}
