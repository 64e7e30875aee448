//! Truncated trigonometric series on `[0, 2π]`.
//!
//! Every coefficient vector in the crate uses the layout
//! `[c0, a1..an, b1..bn]`, representing
//! `c0 + Σ_k (a_k cos(kt) + b_k sin(kt))`.
//!
//! Analysis is done with the periodic trapezoid rule on a uniform grid
//! `t_q = 2πq/Q`, evaluated by FFT. For `k < Q/2` the trapezoid sums are
//! exactly the coefficients of the trigonometric interpolant, so any
//! trigonometric polynomial of degree `≤ n` is recovered to rounding.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Default analysis grid: `max(256, next power of two ≥ 8n)`.
pub fn default_quadrature_size(n: usize) -> usize {
    (8 * n).next_power_of_two().max(256)
}

/// Uniform grid `t_q = 2πq/Q`.
pub fn uniform_grid(q: usize) -> Vec<f64> {
    (0..q).map(|i| 2.0 * PI * i as f64 / q as f64).collect()
}

fn check_grid(q: usize, n: usize) -> Result<()> {
    let need = (2 * n + 2).next_power_of_two().max(2);
    if q < 2 * n + 2 || !q.is_power_of_two() {
        return Err(Error::InsufficientSamples { got: q, need });
    }
    Ok(())
}

/// Coefficients of a real 2π-periodic function truncated at order `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVec {
    n: usize,
    data: Vec<f64>,
}

impl CoeffVec {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * n + 1 {
            return Err(Error::ShapeMismatch(format!(
                "coefficient vector of order {n} needs {} entries, got {}",
                2 * n + 1,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient vector"));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; 2 * n + 1],
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut v = Self::zeros(n);
        v.data[0] = c;
        v
    }

    /// `a cos(kt) + b sin(kt)` at order `n`.
    pub fn harmonic(n: usize, k: usize, a: f64, b: f64) -> Self {
        let mut v = Self::zeros(n);
        if k == 0 {
            v.data[0] = a;
        } else {
            v.set_cos(k, a);
            v.set_sin(k, b);
        }
        v
    }

    /// Basis function `e_j` in layout order: `1, cos(1t)..cos(nt), sin(1t)..sin(nt)`.
    pub fn basis(n: usize, j: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[j] = 1.0;
        v
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn c0(&self) -> f64 {
        self.data[0]
    }

    pub fn cos_coeff(&self, k: usize) -> f64 {
        self.data[k]
    }

    pub fn sin_coeff(&self, k: usize) -> f64 {
        self.data[self.n + k]
    }

    pub fn set_cos(&mut self, k: usize, v: f64) {
        assert!((1..=self.n).contains(&k));
        self.data[k] = v;
    }

    pub fn set_sin(&mut self, k: usize, v: f64) {
        assert!((1..=self.n).contains(&k));
        self.data[self.n + k] = v;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Zero-pad or truncate to order `m`.
    pub fn resize(&self, m: usize) -> Self {
        let mut out = Self::zeros(m);
        out.data[0] = self.data[0];
        for k in 1..=m.min(self.n) {
            out.data[k] = self.cos_coeff(k);
            out.data[m + k] = self.sin_coeff(k);
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.data[0];
        for k in 1..=self.n {
            let (s, c) = (k as f64 * t).sin_cos();
            acc += self.data[k] * c + self.data[self.n + k] * s;
        }
        acc
    }

    /// Pointwise evaluation of the series.
    pub fn synth(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    /// Values on the uniform grid of size `q`, by inverse FFT when `n < q/2`.
    pub fn sample_uniform(&self, q: usize) -> Vec<f64> {
        if q == 0 {
            return Vec::new();
        }
        if 2 * self.n >= q {
            return self.synth(&uniform_grid(q));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); q];
        buf[0] = Complex64::new(self.data[0], 0.0);
        for k in 1..=self.n {
            let z = Complex64::new(self.cos_coeff(k), -self.sin_coeff(k)) * 0.5;
            buf[k] = z;
            buf[q - k] = z.conj();
        }
        inverse_fft(q).process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Coefficients of `d/dt`.
    pub fn derivative(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for k in 1..=n {
            let kf = k as f64;
            out.data[k] = kf * self.sin_coeff(k);
            out.data[n + k] = -kf * self.cos_coeff(k);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "orders {} and {} differ",
                self.n, other.n
            )));
        }
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Orthogonal projection onto order `n` from `Q` uniform samples.
pub fn project(samples: &[f64], n: usize) -> Result<CoeffVec> {
    let q = samples.len();
    check_grid(q, n)?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_fft(q).process(&mut buf);
    let scale = 2.0 / q as f64;
    let mut data = vec![0.0; 2 * n + 1];
    data[0] = buf[0].re / q as f64;
    for k in 1..=n {
        data[k] = buf[k].re * scale;
        data[n + k] = -buf[k].im * scale;
    }
    Ok(CoeffVec { n, data })
}

/// Synthesis on arbitrary points (free-function form of [`CoeffVec::synth`]).
pub fn synth(c: &CoeffVec, ts: &[f64]) -> Vec<f64> {
    c.synth(ts)
}

pub fn derivative(c: &CoeffVec) -> CoeffVec {
    c.derivative()
}

/// Cosine and sine moments `Σ_q row[q] cos(k s_q)`, `Σ_q row[q] sin(k s_q)`
/// for `k = 0..=n`, of a complex row sampled on the uniform grid. The
/// sine entry at `k = 0` is zero. `row` is overwritten.
pub(crate) fn trig_moments(row: &mut [Complex64], n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let q = row.len();
    debug_assert!(2 * n < q);
    forward_fft(q).process(row);
    let half = Complex64::new(0.5, 0.0);
    let mut cos = Vec::with_capacity(n + 1);
    let mut sin = Vec::with_capacity(n + 1);
    cos.push(row[0]);
    sin.push(Complex64::new(0.0, 0.0));
    for k in 1..=n {
        // F(k) = Σ g e^{-iks}, F(-k) = Σ g e^{iks}
        let fk = row[k];
        let fmk = row[q - k];
        cos.push((fk + fmk) * half);
        sin.push((fmk - fk) * Complex64::new(0.0, -0.5));
    }
    (cos, sin)
}

/// Complex function stored as real and imaginary coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCoeffVec {
    pub re: CoeffVec,
    pub im: CoeffVec,
}

impl ComplexCoeffVec {
    pub fn new(re: CoeffVec, im: CoeffVec) -> Result<Self> {
        if re.order() != im.order() {
            return Err(Error::ShapeMismatch(format!(
                "real order {} vs imaginary order {}",
                re.order(),
                im.order()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            re: CoeffVec::zeros(n),
            im: CoeffVec::zeros(n),
        }
    }

    pub fn order(&self) -> usize {
        self.re.order()
    }

    pub fn project(samples: &[Complex64], n: usize) -> Result<Self> {
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        Ok(Self {
            re: project(&re, n)?,
            im: project(&im, n)?,
        })
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        Complex64::new(self.re.eval(t), self.im.eval(t))
    }

    pub fn sample_uniform(&self, q: usize) -> Vec<Complex64> {
        self.re
            .sample_uniform(q)
            .into_iter()
            .zip(self.im.sample_uniform(q))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    /// Complex coefficients `c_j = re_j + i im_j` in layout order.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .as_slice()
            .iter()
            .zip(self.im.as_slice())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }

    pub fn from_complex(n: usize, c: &[Complex64]) -> Result<Self> {
        Self::new(
            CoeffVec::new(n, c.iter().map(|z| z.re).collect())?,
            CoeffVec::new(n, c.iter().map(|z| z.im).collect())?,
        )
    }

    /// Real part stacked over imaginary part.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.re.as_slice().to_vec();
        v.extend_from_slice(self.im.as_slice());
        v
    }

    pub fn norm(&self) -> f64 {
        self.re.norm().hypot(self.im.norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_projects_to_c0() {
        let c = project(&[1.0; 16], 3).unwrap();
        assert_eq!(c.order(), 3);
        assert!((c.c0() - 1.0).abs() < 1e-15);
        assert!(c.as_slice()[1..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn band_limited_projection_is_exact() {
        let t = uniform_grid(64);
        let s: Vec<f64> = t.iter().map(|&t| (2.0 * t).cos() + 0.5 * t.sin()).collect();
        let c = project(&s, 4).unwrap();
        let mut expect = vec![0.0; 9];
        expect[2] = 1.0;
        expect[4 + 1] = 0.5;
        for (a, b) in c.as_slice().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn projection_matches_fine_trapezoid_oracle() {
        // Independent oracle: composite trapezoid of the defining integrals
        // on 4096 nodes, evaluated directly without FFT.
        let f = |t: f64| t.sin().exp();
        let n = 20;
        let c = project(&synth_fn(f, 256), n).unwrap();
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        let mut c0 = 0.0;
        let mut a = vec![0.0; n + 1];
        let mut b = vec![0.0; n + 1];
        for i in 0..m {
            let t = i as f64 * h;
            let v = f(t);
            c0 += v * h / (2.0 * PI);
            for k in 1..=n {
                a[k] += v * (k as f64 * t).cos() * h / PI;
                b[k] += v * (k as f64 * t).sin() * h / PI;
            }
        }
        assert!((c.c0() - c0).abs() <= 1e-12);
        for k in 1..=n {
            assert!((c.cos_coeff(k) - a[k]).abs() <= 1e-12);
            assert!((c.sin_coeff(k) - b[k]).abs() <= 1e-12);
        }
    }

    fn synth_fn(f: impl Fn(f64) -> f64, q: usize) -> Vec<f64> {
        uniform_grid(q).into_iter().map(f).collect()
    }

    #[test]
    fn projection_errors() {
        assert!(matches!(
            project(&[0.0; 8], 4),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(matches!(
            project(&[0.0; 24], 4),
            Err(Error::InsufficientSamples { .. })
        ));
        let mut s = vec![0.0; 16];
        s[3] = f64::NAN;
        assert!(matches!(project(&s, 3), Err(Error::NonFinite(_))));
    }

    #[test]
    fn synth_examples() {
        assert_eq!(CoeffVec::constant(3, 1.0).synth(&[0.7]), vec![1.0]);
        let c = CoeffVec::harmonic(3, 1, 1.0, 0.0);
        assert!((c.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((c.eval(PI) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn synth_project_round_trip() {
        let f = |t: f64| t.cos().exp();
        let c = project(&synth_fn(f, 256), 20).unwrap();
        let ts: Vec<f64> = (0..1000).map(|i| 2.0 * PI * i as f64 / 1000.0 + 0.001).collect();
        let err = c
            .synth(&ts)
            .iter()
            .zip(&ts)
            .map(|(v, &t)| (v - f(t)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn derivative_examples() {
        let d = CoeffVec::harmonic(2, 1, 1.0, 0.0).derivative();
        assert_eq!(d.cos_coeff(1), 0.0);
        assert_eq!(d.sin_coeff(1), -1.0);
        assert!(CoeffVec::constant(4, 3.0)
            .derivative()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        let dd = CoeffVec::harmonic(4, 3, 0.0, 1.0).derivative().derivative();
        assert_eq!(dd.as_slice(), CoeffVec::harmonic(4, 3, 0.0, -9.0).as_slice());
    }

    #[test]
    fn sample_uniform_matches_direct() {
        let c = CoeffVec::new(3, vec![0.3, 1.0, -2.0, 0.5, 0.1, 0.2, -0.7]).unwrap();
        let fast = c.sample_uniform(16);
        let slow = c.synth(&uniform_grid(16));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    fn coeffs(n: usize) -> impl Strategy<Value = CoeffVec> {
        prop::collection::vec(-3.0..3.0f64, 2 * n + 1).prop_map(move |d| CoeffVec::new(n, d).unwrap())
    }

    proptest! {
        #[test]
        fn projection_is_linear(x in coeffs(6), y in coeffs(6), al in -2.0..2.0f64, be in -2.0..2.0f64) {
            let sx = x.sample_uniform(64);
            let sy = y.sample_uniform(64);
            let mix: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| al * a + be * b).collect();
            let lhs = project(&mix, 6).unwrap();
            let px = project(&sx, 6).unwrap();
            let py = project(&sy, 6).unwrap();
            for i in 0..13 {
                let rhs = al * px.as_slice()[i] + be * py.as_slice()[i];
                prop_assert!((lhs.as_slice()[i] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn parseval(x in coeffs(8)) {
            let s = x.sample_uniform(256);
            let mean_sq = s.iter().map(|v| v * v).sum::<f64>() / 256.0;
            let n = x.order();
            let mut p = x.c0() * x.c0();
            for k in 1..=n {
                p += 0.5 * (x.cos_coeff(k).powi(2) + x.sin_coeff(k).powi(2));
            }
            prop_assert!((mean_sq - p).abs() < 1e-10);
        }

        #[test]
        fn second_derivative_scales_by_minus_k_squared(x in coeffs(7)) {
            let dd = x.derivative().derivative();
            prop_assert_eq!(dd.c0(), 0.0);
            for k in 1..=7 {
                let kk = -((k * k) as f64);
                prop_assert!((dd.cos_coeff(k) - kk * x.cos_coeff(k)).abs() < 1e-12);
                prop_assert!((dd.sin_coeff(k) - kk * x.sin_coeff(k)).abs() < 1e-12);
            }
        }
    }
}
