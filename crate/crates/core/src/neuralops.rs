//! Dense networks with hand-written backpropagation, the two operator
//! architectures built from them, Adam, learning-rate schedules, training
//! and evaluation.
//!
//! Parameters live in one flat `Vec<f64>` per model; every network writes
//! its gradient into the matching slice of a flat gradient vector.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datagen::{Dataset, DatasetRecord};
use crate::error::{Error, Result};
use crate::trigseries::{project, CoeffVec};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BIOP";
pub const CHECKPOINT_VERSION: u64 = 1;

/// Samples per gradient chunk; chunks are reduced in index order so the
/// result does not depend on thread scheduling.
const GRAD_CHUNK: usize = 64;

/// Targets with smaller norm are skipped by [`loss_relative`].
pub const MIN_TARGET_NORM: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Feedforward networks

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn tag(self) -> u64 {
        match self {
            Activation::Tanh => 1,
            Activation::Relu => 2,
        }
    }

    fn from_tag(t: u64) -> Result<Self> {
        match t {
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Relu),
            _ => Err(Error::Format(format!("unknown activation tag {t}"))),
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        }
    }

    /// Multiplies `d` by the derivative, expressed through the output `a`.
    fn backprop(self, a: &Array2<f64>, d: &mut Array2<f64>) {
        match self {
            Activation::Tanh => d.zip_mut_with(a, |g, &y| *g *= 1.0 - y * y),
            Activation::Relu => d.zip_mut_with(a, |g, &y| {
                if y <= 0.0 {
                    *g = 0.0
                }
            }),
        }
    }
}

/// Layer widths `[in, h₁, …, out]`; hidden layers use `activation`, the
/// output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnnSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl FnnSpec {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "network widths {widths:?} need ≥ 2 layers of width ≥ 1"
            )));
        }
        Ok(Self { widths, activation })
    }

    pub fn tanh(widths: &[usize]) -> Result<Self> {
        Self::new(widths.to_vec(), Activation::Tanh)
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            p.extend((0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)));
            p.extend(std::iter::repeat_n(0.0, w[1]));
        }
        p
    }

    fn layers<'a>(&'a self, params: &'a [f64]) -> impl Iterator<Item = (ArrayView2<'a, f64>, &'a [f64])> + 'a {
        let mut off = 0;
        self.widths.windows(2).map(move |w| {
            let (nin, nout) = (w[0], w[1]);
            let wm = ArrayView2::from_shape((nout, nin), &params[off..off + nin * nout]).expect("layer shape");
            let b = &params[off + nin * nout..off + nin * nout + nout];
            off += nin * nout + nout;
            (wm, b)
        })
    }

    fn check(&self, params: &[f64], x: &Array2<f64>) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.param_count()
            )));
        }
        if x.ncols() != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} for a network expecting {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Row-wise forward pass of a batch.
    pub fn forward(&self, params: &[f64], x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(params, x)?;
        Ok(self.forward_cached(params, x.clone()).pop().expect("output layer"))
    }

    /// Activations of every layer, input first.
    fn forward_cached(&self, params: &[f64], x: Array2<f64>) -> Vec<Array2<f64>> {
        let n_layers = self.widths.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x);
        for (l, (w, b)) in self.layers(params).enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += &ArrayView2::from_shape((1, b.len()), b).expect("bias row");
            if l + 1 < n_layers {
                self.activation.apply(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Accumulates `∂(Σ d_out ⊙ out)/∂θ` into `grad`; returns the input
    /// gradient when `want_input` is set.
    fn backward(
        &self,
        params: &[f64],
        acts: &[Array2<f64>],
        d_out: Array2<f64>,
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Array2<f64>> {
        let layers: Vec<_> = self.layers(params).collect();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut d = d_out;
        for l in (0..layers.len()).rev() {
            let (w, _) = layers[l];
            let (nout, nin) = w.dim();
            let gw = d.t().dot(&acts[l]);
            let o = offsets[l];
            for (g, v) in grad[o..o + nin * nout].iter_mut().zip(gw.iter()) {
                *g += v;
            }
            for (g, v) in grad[o + nin * nout..o + nin * nout + nout].iter_mut().zip(d.sum_axis(Axis(0)).iter()) {
                *g += v;
            }
            if l == 0 && !want_input {
                return None;
            }
            let mut din = d.dot(&w);
            if l > 0 {
                self.activation.backprop(&acts[l], &mut din);
            }
            d = din;
        }
        Some(d)
    }

    /// Vector-Jacobian product `(∂out/∂θ)ᵀ d_out` for a batch.
    pub fn vjp(&self, params: &[f64], x: &Array2<f64>, d_out: &Array2<f64>) -> Result<Vec<f64>> {
        self.check(params, x)?;
        let acts = self.forward_cached(params, x.clone());
        let mut g = vec![0.0; params.len()];
        self.backward(params, &acts, d_out.clone(), &mut g, false);
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Operator architectures

/// `out = scale · U([γ, V([γ, f]) ⊙ Σ(γ)])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdoNetSpec {
    pub v_net: FnnSpec,
    pub sigma_net: FnnSpec,
    pub u_net: FnnSpec,
    /// Fixed, non-trainable output multiplier.
    pub output_scale: f64,
}

impl TdoNetSpec {
    pub fn new(v_net: FnnSpec, sigma_net: FnnSpec, u_net: FnnSpec, output_scale: f64) -> Result<Self> {
        let s = Self {
            v_net,
            sigma_net,
            u_net,
            output_scale,
        };
        s.validate()?;
        Ok(s)
    }

    /// Equal hidden widths and depth for all three networks, latent width
    /// `r`, from the data widths.
    pub fn uniform(gamma: usize, f: usize, out: usize, r: usize, hidden: &[usize], scale: f64) -> Result<Self> {
        let mk = |i: usize, o: usize| {
            let mut w = vec![i];
            w.extend_from_slice(hidden);
            w.push(o);
            FnnSpec::tanh(&w)
        };
        Self::new(mk(gamma + f, r)?, mk(gamma, r)?, mk(gamma + r, out)?, scale)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.v_net.output_width();
        let g = self.sigma_net.input_width();
        let bad = |m: String| Err(Error::ShapeMismatch(m));
        if self.sigma_net.output_width() != r {
            return bad(format!(
                "V and Σ latent widths differ: {} vs {}",
                r,
                self.sigma_net.output_width()
            ));
        }
        if self.v_net.input_width() <= g {
            return bad("V input must hold γ and f".into());
        }
        if self.u_net.input_width() != g + r {
            return bad(format!(
                "U input width {} must equal |γ| + r = {}",
                self.u_net.input_width(),
                g + r
            ));
        }
        if !self.output_scale.is_finite() {
            return Err(Error::NonFinite("output scale"));
        }
        Ok(())
    }

    pub fn gamma_width(&self) -> usize {
        self.sigma_net.input_width()
    }

    pub fn f_width(&self) -> usize {
        self.v_net.input_width() - self.gamma_width()
    }

    pub fn output_width(&self) -> usize {
        self.u_net.output_width()
    }

    fn split_params<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let a = self.v_net.param_count();
        let b = a + self.sigma_net.param_count();
        (&p[..a], &p[a..b], &p[b..])
    }
}

/// `out(t_j) = Σ_q Bγ(γ)_q · Bf(f)_q · T(t_j)_q + bias` at `t_j = 2πj/p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnetSpec {
    pub branch_gamma: FnnSpec,
    pub branch_f: FnnSpec,
    pub trunk: FnnSpec,
}

impl DeepOnetSpec {
    pub fn new(branch_gamma: FnnSpec, branch_f: FnnSpec, trunk: FnnSpec) -> Result<Self> {
        let s = Self {
            branch_gamma,
            branch_f,
            trunk,
        };
        s.validate()?;
        Ok(s)
    }

    /// Branches on `2p` and `p` samples, trunk on `t`, latent width `q`.
    pub fn uniform(p: usize, q: usize, hidden: &[usize]) -> Result<Self> {
        let mk = |i: usize| {
            let mut w = vec![i];
            w.extend_from_slice(hidden);
            w.push(q);
            FnnSpec::tanh(&w)
        };
        Self::new(mk(2 * p)?, mk(p)?, mk(1)?)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.trunk.output_width();
        if self.branch_gamma.output_width() != q || self.branch_f.output_width() != q {
            return Err(Error::ShapeMismatch("branch and trunk latent widths differ".into()));
        }
        if self.trunk.input_width() != 1 {
            return Err(Error::ShapeMismatch("trunk input width must be 1".into()));
        }
        if self.branch_gamma.input_width() != 2 * self.branch_f.input_width() {
            return Err(Error::ShapeMismatch("γ branch must see 2p samples for p f-samples".into()));
        }
        Ok(())
    }

    /// Number of sample points `p`.
    pub fn points(&self) -> usize {
        self.branch_f.input_width()
    }

    pub fn grid(&self) -> Array2<f64> {
        let p = self.points();
        Array2::from_shape_fn((p, 1), |(j, _)| 2.0 * std::f64::consts::PI * j as f64 / p as f64)
    }

    fn split_params<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], f64) {
        let a = self.branch_gamma.param_count();
        let b = a + self.branch_f.param_count();
        let c = b + self.trunk.param_count();
        (&p[..a], &p[a..b], &p[b..c], p[c])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorModel {
    TdoNet(TdoNetSpec),
    DeepOnet(DeepOnetSpec),
}

impl OperatorModel {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorModel::TdoNet(_) => "BI-TDONet",
            OperatorModel::DeepOnet(_) => "BI-DeepONet",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            OperatorModel::TdoNet(s) => s.v_net.param_count() + s.sigma_net.param_count() + s.u_net.param_count(),
            OperatorModel::DeepOnet(s) => {
                s.branch_gamma.param_count() + s.branch_f.param_count() + s.trunk.param_count() + 1
            }
        }
    }

    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Vec::with_capacity(self.param_count());
        match self {
            OperatorModel::TdoNet(s) => {
                for net in [&s.v_net, &s.sigma_net, &s.u_net] {
                    p.extend(net.init(&mut rng));
                }
            }
            OperatorModel::DeepOnet(s) => {
                for net in [&s.branch_gamma, &s.branch_f, &s.trunk] {
                    p.extend(net.init(&mut rng));
                }
                p.push(0.0);
            }
        }
        p
    }

    /// Widths of `(γ input, f input, output)`.
    pub fn io_widths(&self) -> (usize, usize, usize) {
        match self {
            OperatorModel::TdoNet(s) => (s.gamma_width(), s.f_width(), s.output_width()),
            OperatorModel::DeepOnet(s) => (2 * s.points(), s.points(), s.points()),
        }
    }

    fn check(&self, params: &[f64], gamma: &Array2<f64>, f: &Array2<f64>) -> Result<()> {
        let (g, m, _) = self.io_widths();
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.param_count()
            )));
        }
        if gamma.ncols() != g || f.ncols() != m || gamma.nrows() != f.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "inputs {:?} and {:?} for model widths ({g}, {m})",
                gamma.dim(),
                f.dim()
            )));
        }
        Ok(())
    }

    /// Batch prediction, one row per sample.
    pub fn forward(&self, params: &[f64], gamma: &Array2<f64>, f: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(params, gamma, f)?;
        Ok(self.run(params, gamma, f, None))
    }

    /// `(∂(Σ d_out ⊙ out)/∂θ)`.
    pub fn vjp(&self, params: &[f64], gamma: &Array2<f64>, f: &Array2<f64>, d_out: &Array2<f64>) -> Result<Vec<f64>> {
        self.check(params, gamma, f)?;
        let mut g = vec![0.0; params.len()];
        self.run(params, gamma, f, Some((d_out, &mut g)));
        Ok(g)
    }

    /// Forward pass; with `back = Some((d_out, grad))` also accumulates the
    /// parameter gradient.
    fn run(
        &self,
        params: &[f64],
        gamma: &Array2<f64>,
        f: &Array2<f64>,
        back: Option<(&Array2<f64>, &mut [f64])>,
    ) -> Array2<f64> {
        match self {
            OperatorModel::TdoNet(s) => {
                let (pv, ps, pu) = s.split_params(params);
                let xv = concatenate![Axis(1), *gamma, *f];
                let av = s.v_net.forward_cached(pv, xv);
                let asg = s.sigma_net.forward_cached(ps, gamma.clone());
                let v = av.last().expect("output");
                let sg = asg.last().expect("output");
                let h = v * sg;
                let xu = concatenate![Axis(1), *gamma, h];
                let au = s.u_net.forward_cached(pu, xu);
                let out = au.last().expect("output") * s.output_scale;
                if let Some((d_out, grad)) = back {
                    let (a, b) = (s.v_net.param_count(), s.v_net.param_count() + s.sigma_net.param_count());
                    let (gv, rest) = grad.split_at_mut(a);
                    let (gs, gu) = rest.split_at_mut(b - a);
                    let du = d_out * s.output_scale;
                    let dxu = s.u_net.backward(pu, &au, du, gu, true).expect("input gradient");
                    let dh = dxu.slice(s![.., s.gamma_width()..]).to_owned();
                    s.v_net.backward(pv, &av, &dh * sg, gv, false);
                    s.sigma_net.backward(ps, &asg, &dh * v, gs, false);
                }
                out
            }
            OperatorModel::DeepOnet(s) => {
                let (pg, pf, pt, bias) = s.split_params(params);
                let ag = s.branch_gamma.forward_cached(pg, gamma.clone());
                let af = s.branch_f.forward_cached(pf, f.clone());
                let at = s.trunk.forward_cached(pt, s.grid());
                let (bg, bf, t) = (ag.last().expect("out"), af.last().expect("out"), at.last().expect("out"));
                let prod = bg * bf;
                let out = prod.dot(&t.t()) + bias;
                if let Some((d_out, grad)) = back {
                    let a = s.branch_gamma.param_count();
                    let b = a + s.branch_f.param_count();
                    let c = b + s.trunk.param_count();
                    grad[c] += d_out.sum();
                    let (gg, rest) = grad.split_at_mut(a);
                    let (gf, rest) = rest.split_at_mut(b - a);
                    let gt = &mut rest[..c - b];
                    let dprod = d_out.dot(t);
                    s.trunk.backward(pt, &at, d_out.t().dot(&prod), gt, false);
                    s.branch_gamma.backward(pg, &ag, &dprod * bf, gg, false);
                    s.branch_f.backward(pf, &af, &dprod * bg, gf, false);
                }
                out
            }
        }
    }

    /// Single-point DeepONet evaluation at an arbitrary `t`.
    pub fn deeponet_at(&self, params: &[f64], gamma: &[f64], f: &[f64], t: f64) -> Result<f64> {
        let OperatorModel::DeepOnet(s) = self else {
            return Err(Error::InvalidParameter("point evaluation needs a DeepONet".into()));
        };
        let g = Array2::from_shape_vec((1, gamma.len()), gamma.to_vec()).map_err(shape_err)?;
        let fv = Array2::from_shape_vec((1, f.len()), f.to_vec()).map_err(shape_err)?;
        self.check(params, &g, &fv)?;
        let (pg, pf, pt, bias) = s.split_params(params);
        let bg = s.branch_gamma.forward(pg, &g)?;
        let bf = s.branch_f.forward(pf, &fv)?;
        let tr = s.trunk.forward(pt, &Array2::from_elem((1, 1), t))?;
        Ok((&bg * &bf * &tr).sum() + bias)
    }
}

fn shape_err(e: ndarray::ShapeError) -> Error {
    Error::ShapeMismatch(e.to_string())
}

// ---------------------------------------------------------------------------
// Data

/// Model inputs and targets, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorData {
    pub gamma: Array2<f64>,
    pub f: Array2<f64>,
    pub target: Array2<f64>,
}

impl OperatorData {
    pub fn len(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficient vectors as stored: `(γ_n, f̃_n) → φ_n`.
    pub fn coefficients(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let rows = |get: fn(&DatasetRecord) -> &[f64], w: usize| -> Result<Array2<f64>> {
            let mut flat = Vec::with_capacity(ds.len() * w);
            for r in &ds.records {
                flat.extend_from_slice(get(r));
            }
            Array2::from_shape_vec((ds.len(), w), flat).map_err(shape_err)
        };
        Ok(Self {
            gamma: rows(|r| &r.gamma, ds.gamma_len())?,
            f: rows(|r| &r.rhs, ds.field_len())?,
            target: rows(|r| &r.density, ds.field_len())?,
        })
    }

    /// Point samples at `t_j = 2πj/p`: `γ₁` then `γ₂`, `f̃`, target `φ`.
    /// Only scalar real problems have a sample form.
    pub fn samples(ds: &Dataset, p: usize) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if ds.family.components() != 1 {
            return Err(Error::InvalidParameter(format!(
                "point samples need a scalar problem, not {}",
                ds.family.name()
            )));
        }
        let nb = 2 * ds.n_b + 1;
        let m = ds.len();
        let mut gamma = Array2::zeros((m, 2 * p));
        let mut f = Array2::zeros((m, p));
        let mut target = Array2::zeros((m, p));
        for (i, r) in ds.records.iter().enumerate() {
            let x = CoeffVec::new(ds.n_b, r.gamma[..nb].to_vec())?.sample_uniform(p);
            let y = CoeffVec::new(ds.n_b, r.gamma[nb..].to_vec())?.sample_uniform(p);
            let fv = CoeffVec::new(ds.n_f, r.rhs.clone())?.sample_uniform(p);
            let tv = CoeffVec::new(ds.n_f, r.density.clone())?.sample_uniform(p);
            gamma.row_mut(i).assign(&Array1::from_iter(x.into_iter().chain(y)));
            f.row_mut(i).assign(&Array1::from(fv));
            target.row_mut(i).assign(&Array1::from(tv));
        }
        Ok(Self { gamma, f, target })
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            gamma: self.gamma.select(Axis(0), idx),
            f: self.f.select(Axis(0), idx),
            target: self.target.select(Axis(0), idx),
        }
    }

    fn rows(&self, r: std::ops::Range<usize>) -> Self {
        Self {
            gamma: self.gamma.slice(s![r.clone(), ..]).to_owned(),
            f: self.f.slice(s![r.clone(), ..]).to_owned(),
            target: self.target.slice(s![r, ..]).to_owned(),
        }
    }
}

/// Samples `p` uniform points of each order-`n` coefficient row.
pub fn synth_rows(coeffs: &Array2<f64>, n: usize, p: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((coeffs.nrows(), p));
    for (i, row) in coeffs.rows().into_iter().enumerate() {
        let c = CoeffVec::new(n, row.to_vec())?;
        out.row_mut(i).assign(&Array1::from(c.sample_uniform(p)));
    }
    Ok(out)
}

/// Order-`n` coefficients of each row of uniform samples.
pub fn project_rows(samples: &Array2<f64>, n: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((samples.nrows(), 2 * n + 1));
    for (i, row) in samples.rows().into_iter().enumerate() {
        let c = project(&row.to_vec(), n)?;
        out.row_mut(i).assign(&Array1::from(c.into_vec()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Loss

/// Sum of per-sample relative errors, number of counted samples, and the
/// gradient of the sum with respect to `pred`.
fn relative_error_sum(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, usize, Array2<f64>) {
    let mut sum = 0.0;
    let mut count = 0;
    let mut grad = Array2::zeros(pred.dim());
    for ((p, t), mut g) in pred.rows().into_iter().zip(target.rows()).zip(grad.rows_mut()) {
        let tn = t.dot(&t).sqrt();
        if tn < MIN_TARGET_NORM {
            continue;
        }
        let diff = &p - &t;
        let dn = diff.dot(&diff).sqrt();
        sum += dn / tn;
        count += 1;
        if dn > 0.0 {
            g.assign(&(diff / (dn * tn)));
        }
    }
    (sum, count, grad)
}

/// Mean over the batch of `‖pred − target‖₂ / ‖target‖₂`. Samples with
/// `‖target‖₂ < 1e-12` are skipped; the skip count is returned.
pub fn loss_relative(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, usize)> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let (sum, count, _) = relative_error_sum(pred, target);
    let skipped = pred.nrows() - count;
    if skipped > 0 {
        log::warn!("{skipped} samples with vanishing target skipped by the relative loss");
    }
    if count == 0 {
        return Err(Error::Empty("batch with nonzero targets"));
    }
    Ok((sum / count as f64, skipped))
}

/// Batch loss and its parameter gradient, chunked for parallelism with an
/// in-order reduction.
pub fn loss_and_grad(model: &OperatorModel, params: &[f64], batch: &OperatorData) -> Result<(f64, Vec<f64>)> {
    model.check(params, &batch.gamma, &batch.f)?;
    let chunks: Vec<_> = (0..batch.len()).step_by(GRAD_CHUNK).collect();
    let parts: Vec<(f64, usize, Vec<f64>)> = chunks
        .par_iter()
        .map(|&start| {
            let c = batch.rows(start..(start + GRAD_CHUNK).min(batch.len()));
            let mut g = vec![0.0; params.len()];
            let pred = model.run(params, &c.gamma, &c.f, None);
            let (sum, count, d) = relative_error_sum(&pred, &c.target);
            if count > 0 {
                model.run(params, &c.gamma, &c.f, Some((&d, &mut g)));
            }
            (sum, count, g)
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0;
    let mut grad = vec![0.0; params.len()];
    for (s, c, g) in parts {
        total += s;
        count += c;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    if count == 0 {
        return Err(Error::Empty("batch with nonzero targets"));
    }
    let inv = 1.0 / count as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((total * inv, grad))
}

// ---------------------------------------------------------------------------
// Optimizer and schedules

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamParams,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize, hyper: AdamParams) -> Self {
        Self {
            hyper,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != params.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch("optimizer state and gradient lengths differ".into()));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient at parameter {i}")));
        }
        let AdamParams { beta1, beta2, eps } = self.hyper;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// `lr0 · factor^{⌊step/period⌋}`, `period = period_fraction · total steps`.
    InverseTimeStaircase { period_fraction: f64, factor: f64 },
    /// Multiply by `factor` once the best epoch loss is `patience_fraction ·
    /// epochs` epochs old.
    PlateauHalve { patience_fraction: f64, factor: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let (frac, factor) = match *self {
            Schedule::Constant => return Ok(()),
            Schedule::InverseTimeStaircase {
                period_fraction,
                factor,
            } => (period_fraction, factor),
            Schedule::PlateauHalve {
                patience_fraction,
                factor,
            } => (patience_fraction, factor),
        };
        if !(factor > 0.0 && factor < 1.0) || !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule fraction {frac} and factor {factor} must lie in (0,1]"
            )));
        }
        Ok(())
    }
}

/// Stateful learning-rate controller; [`lr_schedule`] is its pure replay.
#[derive(Debug, Clone, PartialEq)]
pub struct LrScheduler {
    schedule: Schedule,
    lr0: f64,
    lr: f64,
    period: u64,
    patience: usize,
    best: f64,
    age: usize,
}

impl LrScheduler {
    pub fn new(schedule: Schedule, lr0: f64, total_steps: u64, total_epochs: usize) -> Self {
        let (period, patience) = match schedule {
            Schedule::InverseTimeStaircase { period_fraction, .. } => {
                (((total_steps as f64 * period_fraction).round() as u64).max(1), 0)
            }
            Schedule::PlateauHalve { patience_fraction, .. } => {
                (0, ((total_epochs as f64 * patience_fraction).round() as usize).max(1))
            }
            Schedule::Constant => (0, 0),
        };
        Self {
            schedule,
            lr0,
            lr: lr0,
            period,
            patience,
            best: f64::INFINITY,
            age: 0,
        }
    }

    /// Rate for optimizer step `step` (0-based).
    pub fn lr_for_step(&self, step: u64) -> f64 {
        match self.schedule {
            Schedule::InverseTimeStaircase { factor, .. } => self.lr0 * factor.powi((step / self.period) as i32),
            _ => self.lr,
        }
    }

    /// Feeds one epoch's training loss.
    pub fn end_epoch(&mut self, loss: f64) {
        if let Schedule::PlateauHalve { factor, .. } = self.schedule {
            if loss < self.best {
                self.best = loss;
                self.age = 0;
            } else {
                self.age += 1;
                if self.age >= self.patience {
                    self.lr *= factor;
                    self.age = 0;
                }
            }
        }
    }
}

/// Learning rate after the epochs in `loss_history`, at optimizer step `step`.
pub fn lr_schedule(
    schedule: Schedule,
    lr0: f64,
    total_steps: u64,
    total_epochs: usize,
    step: u64,
    loss_history: &[f64],
) -> f64 {
    let mut s = LrScheduler::new(schedule, lr0, total_steps, total_epochs);
    for &l in loss_history {
        s.end_epoch(l);
    }
    s.lr_for_step(step)
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub schedule: Schedule,
    pub adam: AdamParams,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("batch size and epochs must be positive".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidParameter(format!("lr0 = {} must be positive", self.lr0)));
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Parameters of the epoch with the lowest test loss.
    pub best_params: Vec<f64>,
    pub best_epoch: usize,
    pub best_test_loss: f64,
    pub final_params: Vec<f64>,
    pub log: Vec<EpochLog>,
}

fn predict_loss(model: &OperatorModel, params: &[f64], data: &OperatorData) -> Result<f64> {
    Ok(loss_relative(&model.forward(params, &data.gamma, &data.f)?, &data.target)?.0)
}

/// Mini-batch Adam from a seeded initialization. Each epoch reshuffles with
/// a stream derived from `cfg.seed`; train loss is the sample-weighted mean
/// of batch losses, test loss is evaluated after the epoch.
pub fn train(model: &OperatorModel, train_set: &OperatorData, test_set: &OperatorData, cfg: &TrainConfig) -> Result<TrainResult> {
    train_from(model, model.init(cfg.seed), train_set, test_set, cfg, |_| ControlFlow::Continue(()))
}

/// [`train`] starting from given parameters, reporting each epoch. The
/// callback may stop training early; the schedule still assumes the
/// configured epoch count, so a stopped run is a bitwise prefix of the
/// full run.
pub fn train_from(
    model: &OperatorModel,
    init: Vec<f64>,
    train_set: &OperatorData,
    test_set: &OperatorData,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog) -> ControlFlow<()>,
) -> Result<TrainResult> {
    cfg.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Empty("training or test set"));
    }
    let mut params = init;
    model.check(&params, &train_set.gamma, &train_set.f)?;
    let n = train_set.len();
    let batches = n.div_ceil(cfg.batch_size);
    let mut sched = LrScheduler::new(cfg.schedule, cfg.lr0, (batches * cfg.epochs) as u64, cfg.epochs);
    let mut adam = AdamState::new(params.len(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_ed0f_da7a);
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, params.clone());
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr_epoch = sched.lr_for_step(step);
        let mut weighted = 0.0;
        for b in 0..batches {
            let idx = &order[b * cfg.batch_size..((b + 1) * cfg.batch_size).min(n)];
            let batch = train_set.select(idx);
            let (loss, grad) = loss_and_grad(model, &params, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("loss {loss} at epoch {epoch}, batch {b}")));
            }
            adam.step(&mut params, &grad, sched.lr_for_step(step))?;
            step += 1;
            weighted += loss * idx.len() as f64;
        }
        let train_loss = weighted / n as f64;
        let test_loss = predict_loss(model, &params, test_set)?;
        if !test_loss.is_finite() {
            return Err(Error::Divergence(format!("test loss {test_loss} at epoch {epoch}")));
        }
        sched.end_epoch(train_loss);
        if test_loss < best.0 {
            best = (test_loss, epoch, params.clone());
        }
        let entry = EpochLog {
            epoch,
            train_loss,
            test_loss,
            lr: lr_epoch,
        };
        let flow = on_epoch(&entry);
        log.push(entry);
        if flow.is_break() {
            break;
        }
    }
    Ok(TrainResult {
        best_params: best.2,
        best_epoch: best.1,
        best_test_loss: best.0,
        final_params: params,
        log,
    })
}

pub fn write_training_log<W: Write>(log: &[EpochLog], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["epoch", "train_loss", "test_loss", "lr"]).map_err(csv_err)?;
    for e in log {
        wr.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.test_loss.to_string(),
            e.lr.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

// ---------------------------------------------------------------------------
// Evaluation

/// Column order of the metrics table.
pub const METRIC_COLUMNS: [&str; 5] = ["MNE", "MRE", "variance-MNE", "variance-MRE", "Mean-Time/ms"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mne: f64,
    pub mre: f64,
    pub var_mne: f64,
    pub var_mre: f64,
    /// Wall-clock forward time per sample in milliseconds.
    pub mean_time_ms: f64,
}

impl Metrics {
    /// Errors over all rows; population variances. Rows with vanishing
    /// target count towards MNE but not MRE.
    pub fn from_predictions(pred: &Array2<f64>, target: &Array2<f64>, mean_time_ms: f64) -> Result<Self> {
        if pred.dim() != target.dim() {
            return Err(Error::ShapeMismatch("prediction and target shapes differ".into()));
        }
        if pred.nrows() == 0 {
            return Err(Error::Empty("test set"));
        }
        let mut abs = Vec::with_capacity(pred.nrows());
        let mut rel = Vec::with_capacity(pred.nrows());
        for (p, t) in pred.rows().into_iter().zip(target.rows()) {
            let d = &p - &t;
            let e = d.dot(&d).sqrt();
            abs.push(e);
            let tn = t.dot(&t).sqrt();
            if tn >= MIN_TARGET_NORM {
                rel.push(e / tn);
            }
        }
        let (mne, var_mne) = mean_var(&abs);
        let (mre, var_mre) = if rel.is_empty() { (0.0, 0.0) } else { mean_var(&rel) };
        Ok(Self {
            mne,
            mre,
            var_mne,
            var_mre,
            mean_time_ms,
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [self.mne, self.mre, self.var_mne, self.var_mre, self.mean_time_ms]
    }

    /// Header and one row, comma separated, in [`METRIC_COLUMNS`] order.
    pub fn table(&self, problem: &str, model: &str) -> String {
        let mut s = format!("Problems,Model,{}\n{problem},{model}", METRIC_COLUMNS.join(","));
        for v in self.values() {
            s.push_str(&format!(",{v:.4e}"));
        }
        s.push('\n');
        s
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

/// Anything that maps a batch of inputs to predictions.
pub trait Predictor {
    fn predict(&self, gamma: &Array2<f64>, f: &Array2<f64>) -> Result<Array2<f64>>;
}

/// A model with its parameters.
pub struct Trained<'a> {
    pub model: &'a OperatorModel,
    pub params: &'a [f64],
}

impl Predictor for Trained<'_> {
    fn predict(&self, gamma: &Array2<f64>, f: &Array2<f64>) -> Result<Array2<f64>> {
        self.model.forward(self.params, gamma, f)
    }
}

/// Timed prediction over the whole set, then [`Metrics::from_predictions`].
pub fn evaluate(model: &dyn Predictor, data: &OperatorData) -> Result<(Metrics, Array2<f64>)> {
    if data.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let start = Instant::now();
    let pred = model.predict(&data.gamma, &data.f)?;
    let ms = start.elapsed().as_secs_f64() * 1e3 / data.len() as f64;
    Ok((Metrics::from_predictions(&pred, &data.target, ms)?, pred))
}

// ---------------------------------------------------------------------------
// Checkpoints

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: OperatorModel,
    pub params: Vec<f64>,
    pub epochs_run: u64,
    pub best_epoch: u64,
    pub best_test_loss: f64,
}

fn put_fnn(out: &mut Vec<u8>, f: &FnnSpec) {
    out.extend_from_slice(&f.activation.tag().to_le_bytes());
    out.extend_from_slice(&(f.widths.len() as u64).to_le_bytes());
    for &w in &f.widths {
        out.extend_from_slice(&(w as u64).to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take8(&mut self) -> Result<[u8; 8]> {
        let b = self
            .buf
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        self.pos += 8;
        Ok(b.try_into().expect("8 bytes"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take8()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take8()?))
    }

    fn fnn(&mut self) -> Result<FnnSpec> {
        let act = Activation::from_tag(self.u64()?)?;
        let len = self.u64()? as usize;
        if len > 1024 {
            return Err(Error::Format(format!("implausible layer count {len}")));
        }
        let widths = (0..len).map(|_| Ok(self.u64()? as usize)).collect::<Result<Vec<_>>>()?;
        FnnSpec::new(widths, act).map_err(|e| Error::Format(e.to_string()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        match &self.model {
            OperatorModel::TdoNet(s) => {
                out.extend_from_slice(&1u64.to_le_bytes());
                for f in [&s.v_net, &s.sigma_net, &s.u_net] {
                    put_fnn(&mut out, f);
                }
                out.extend_from_slice(&s.output_scale.to_le_bytes());
            }
            OperatorModel::DeepOnet(s) => {
                out.extend_from_slice(&2u64.to_le_bytes());
                for f in [&s.branch_gamma, &s.branch_f, &s.trunk] {
                    put_fnn(&mut out, f);
                }
            }
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out.extend_from_slice(&self.epochs_run.to_le_bytes());
        out.extend_from_slice(&self.best_epoch.to_le_bytes());
        out.extend_from_slice(&self.best_test_loss.to_le_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.get(..4) != Some(CHECKPOINT_MAGIC.as_slice()) {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let mut r = Reader { buf, pos: 4 };
        let version = r.u64()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let model = match r.u64()? {
            1 => {
                let (v, sg, u) = (r.fnn()?, r.fnn()?, r.fnn()?);
                OperatorModel::TdoNet(TdoNetSpec::new(v, sg, u, r.f64()?)?)
            }
            2 => {
                let (g, f, t) = (r.fnn()?, r.fnn()?, r.fnn()?);
                OperatorModel::DeepOnet(DeepOnetSpec::new(g, f, t)?)
            }
            t => return Err(Error::Format(format!("unknown model tag {t}"))),
        };
        let count = r.u64()? as usize;
        if count != model.param_count() || buf.len() < r.pos + 8 * count {
            return Err(Error::Format(format!(
                "parameter block of {count} does not match the model ({})",
                model.param_count()
            )));
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let ck = Self {
            model,
            params,
            epochs_run: r.u64()?,
            best_epoch: r.u64()?,
            best_test_loss: r.f64()?,
        };
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_identity_layer() {
        let spec = FnnSpec::tanh(&[3, 3]).unwrap();
        let mut p = vec![0.0; spec.param_count()];
        for i in 0..3 {
            p[i * 3 + i] = 1.0;
        }
        let x = array![[0.5, -2.0, 7.0]];
        assert_eq!(spec.forward(&p, &x).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let spec = FnnSpec::tanh(&[2, 4, 2]).unwrap();
        let mut p = vec![0.0; spec.param_count()];
        let n = p.len();
        p[n - 2] = 0.25;
        p[n - 1] = -1.5;
        let y = spec.forward(&p, &array![[3.0, 4.0], [1.0, 0.0]]).unwrap();
        assert_eq!(y, array![[0.25, -1.5], [0.25, -1.5]]);
    }

    #[test]
    fn spec_validation() {
        assert!(FnnSpec::tanh(&[3]).is_err());
        assert!(FnnSpec::tanh(&[3, 0, 2]).is_err());
        let a = FnnSpec::tanh(&[8, 4]).unwrap();
        let b = FnnSpec::tanh(&[5, 3]).unwrap();
        let u = FnnSpec::tanh(&[9, 2]).unwrap();
        assert!(TdoNetSpec::new(a, b, u, 1.0).is_err());
        assert!(DeepOnetSpec::uniform(128, 16, &[8]).is_ok());
    }

    #[test]
    fn loss_examples() {
        let t = array![[1.0, 0.0], [0.0, 2.0]];
        assert_eq!(loss_relative(&t, &t).unwrap().0, 0.0);
        assert!((loss_relative(&(&t * 2.0), &t).unwrap().0 - 1.0).abs() < 1e-15);
        let p = array![[1.1, 0.0], [0.0, 2.6]];
        assert!((loss_relative(&p, &t).unwrap().0 - 0.2).abs() < 1e-12);
        let z = array![[1.0, 1.0], [0.0, 0.0]];
        let (l, skipped) = loss_relative(&array![[1.0, 1.0], [5.0, 5.0]], &z).unwrap();
        assert_eq!((l, skipped), (0.0, 1));
    }

    #[test]
    fn adam_first_and_second_steps() {
        let mut st = AdamState::new(3, AdamParams::default());
        let mut p = vec![1.0, 2.0, 3.0];
        st.step(&mut p, &[1.0; 3], 1e-3).unwrap();
        for (a, b) in p.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - (b - 1e-3)).abs() < 1e-10);
        }
        st.step(&mut p, &[1.0; 3], 1e-3).unwrap();
        // m = 0.19, v = 0.001999 after two unit gradients
        let m_hat: f64 = 0.19 / (1.0 - 0.81);
        let v_hat: f64 = 0.001_999 / (1.0 - 0.998_001);
        assert!((st.m[0] - 0.19).abs() < 1e-15 && (st.v[0] - 0.001_999).abs() < 1e-15);
        let want = 1.0 - 1e-3 / (1.0 + 1e-8) - 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - want).abs() < 1e-14);
        let before = p.clone();
        let mut fresh = AdamState::new(3, AdamParams::default());
        fresh.step(&mut p, &[0.0; 3], 1e-3).unwrap();
        assert_eq!(p, before);
        assert!(matches!(fresh.step(&mut p, &[f64::NAN, 0.0, 0.0], 1e-3), Err(Error::Divergence(_))));
    }

    #[test]
    fn schedules() {
        let st = Schedule::InverseTimeStaircase {
            period_fraction: 0.01,
            factor: 0.5,
        };
        assert!((lr_schedule(st, 1e-3, 10_000, 0, 200, &[]) - 2.5e-4).abs() < 1e-18);
        assert_eq!(lr_schedule(st, 1e-3, 10_000, 0, 99, &[]), 1e-3);
        let pl = Schedule::PlateauHalve {
            patience_fraction: 0.01,
            factor: 0.5,
        };
        let decreasing: Vec<f64> = (0..500).map(|i| 1.0 / (i + 1) as f64).collect();
        assert_eq!(lr_schedule(pl, 1e-3, 0, 1000, 0, &decreasing), 1e-3);
        // patience 10: the first flat epoch sets the best, ten more halve once
        assert_eq!(lr_schedule(pl, 1e-3, 0, 1000, 0, &[1.0; 11]), 5e-4);
        assert_eq!(lr_schedule(pl, 1e-3, 0, 1000, 0, &[1.0; 10]), 1e-3);
        assert!(pl.validate().is_ok());
        assert!(Schedule::PlateauHalve {
            patience_fraction: 0.01,
            factor: 1.5
        }
        .validate()
        .is_err());
    }

    #[test]
    fn metrics_examples() {
        let t = array![[3.0, 4.0], [1.0, 0.0]];
        let m = Metrics::from_predictions(&t, &t, 0.0).unwrap();
        assert_eq!(m.values(), [0.0; 5]);
        let z = Array2::zeros((2, 2));
        let m = Metrics::from_predictions(&z, &t, 0.0).unwrap();
        assert_eq!((m.mne, m.mre, m.var_mre), (3.0, 1.0, 0.0));
        assert_eq!(m.var_mne, 4.0);
        assert!(m.table("IDP", "x").starts_with("Problems,Model,MNE,MRE,variance-MNE,variance-MRE,Mean-Time/ms\n"));
    }
}
