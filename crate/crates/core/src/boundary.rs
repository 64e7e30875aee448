//! Smooth simple closed curves given by truncated trigonometric series,
//! their random generation and validation.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::trigseries::{uniform_grid, CoeffVec};

/// Speeds below this are treated as a degenerate parameterization.
pub const MIN_SPEED: f64 = 1e-8;
/// Grid used for regularity and curvature checks.
pub const VALIDATION_GRID: usize = 1024;
/// Polyline resolution of the self-intersection test.
pub const SIMPLICITY_SAMPLES: usize = 2048;

/// Planar curve `γ(t) = (γ₁(t), γ₂(t))`, `t ∈ [0, 2π]`, oriented
/// counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    x: CoeffVec,
    y: CoeffVec,
    dx: CoeffVec,
    dy: CoeffVec,
    ddx: CoeffVec,
    ddy: CoeffVec,
}

/// Geometry sampled on the uniform grid `s_q = 2πq/Q`.
#[derive(Debug, Clone)]
pub struct BoundaryNodes {
    pub t: Vec<f64>,
    pub pos: Vec<[f64; 2]>,
    pub d1: Vec<[f64; 2]>,
    pub d2: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
    /// Outward unit normal.
    pub normal: Vec<[f64; 2]>,
    pub curvature: Vec<f64>,
}

impl BoundaryNodes {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn reverse_orientation(c: &CoeffVec) -> CoeffVec {
    let n = c.order();
    let mut d = c.as_slice().to_vec();
    for v in &mut d[n + 1..] {
        *v = -*v;
    }
    CoeffVec::new(n, d).expect("same shape")
}

impl BoundaryCurve {
    /// Builds a regular curve and flips it to counterclockwise orientation
    /// if needed.
    pub fn new(x: CoeffVec, y: CoeffVec) -> Result<Self> {
        if x.order() != y.order() {
            return Err(Error::ShapeMismatch(format!(
                "boundary components have orders {} and {}",
                x.order(),
                y.order()
            )));
        }
        let mut curve = Self::assemble(x, y);
        let dxs = curve.dx.sample_uniform(VALIDATION_GRID);
        let dys = curve.dy.sample_uniform(VALIDATION_GRID);
        for (i, (a, b)) in dxs.iter().zip(&dys).enumerate() {
            let speed = a.hypot(*b);
            if !(speed >= MIN_SPEED) {
                let t = 2.0 * PI * i as f64 / VALIDATION_GRID as f64;
                return Err(Error::DegenerateParameterization { t, speed });
            }
        }
        if curve.signed_area() < 0.0 {
            curve = Self::assemble(reverse_orientation(&curve.x), reverse_orientation(&curve.y));
        }
        Ok(curve)
    }

    fn assemble(x: CoeffVec, y: CoeffVec) -> Self {
        let dx = x.derivative();
        let dy = y.derivative();
        let ddx = dx.derivative();
        let ddy = dy.derivative();
        Self {
            x,
            y,
            dx,
            dy,
            ddx,
            ddy,
        }
    }

    pub fn circle(center: [f64; 2], radius: f64, n: usize) -> Result<Self> {
        let mut x = CoeffVec::harmonic(n.max(1), 1, radius, 0.0);
        let mut y = CoeffVec::harmonic(n.max(1), 1, 0.0, radius);
        let mut xd = x.as_slice().to_vec();
        xd[0] = center[0];
        let mut yd = y.as_slice().to_vec();
        yd[0] = center[1];
        x = CoeffVec::new(n.max(1), xd)?;
        y = CoeffVec::new(n.max(1), yd)?;
        Self::new(x, y)
    }

    /// `(a cos t, b sin t)`.
    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(
            CoeffVec::harmonic(n.max(1), 1, a, 0.0),
            CoeffVec::harmonic(n.max(1), 1, 0.0, b),
        )
    }

    /// `(cos t + 0.65 cos 2t − 0.65, 1.5 sin t)`.
    pub fn kite(n: usize) -> Result<Self> {
        let n = n.max(2);
        let mut x = CoeffVec::zeros(n).as_slice().to_vec();
        x[0] = -0.65;
        x[1] = 1.0;
        x[2] = 0.65;
        Self::new(CoeffVec::new(n, x)?, CoeffVec::harmonic(n, 1, 0.0, 1.5))
    }

    /// From the flattened layout `[γ₁ coefficients, γ₂ coefficients]`.
    pub fn from_gamma_vec(gamma: &[f64]) -> Result<Self> {
        if !gamma.len().is_multiple_of(2) || gamma.len() < 2 || (gamma.len() / 2) % 2 != 1 {
            return Err(Error::ShapeMismatch(format!(
                "flattened boundary of length {} is not 2(2n+1)",
                gamma.len()
            )));
        }
        let half = gamma.len() / 2;
        let n = (half - 1) / 2;
        Self::new(
            CoeffVec::new(n, gamma[..half].to_vec())?,
            CoeffVec::new(n, gamma[half..].to_vec())?,
        )
    }

    pub fn to_gamma_vec(&self) -> Vec<f64> {
        let mut v = self.x.as_slice().to_vec();
        v.extend_from_slice(self.y.as_slice());
        v
    }

    pub fn order(&self) -> usize {
        self.x.order()
    }

    pub fn x(&self) -> &CoeffVec {
        &self.x
    }

    pub fn y(&self) -> &CoeffVec {
        &self.y
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        [self.x.eval(t), self.y.eval(t)]
    }

    pub fn d1(&self, t: f64) -> [f64; 2] {
        [self.dx.eval(t), self.dy.eval(t)]
    }

    pub fn d2(&self, t: f64) -> [f64; 2] {
        [self.ddx.eval(t), self.ddy.eval(t)]
    }

    pub fn speed(&self, t: f64) -> f64 {
        let d = self.d1(t);
        d[0].hypot(d[1])
    }

    /// Enclosed signed area, exact from the coefficients.
    pub fn signed_area(&self) -> f64 {
        let n = self.order();
        (1..=n)
            .map(|k| {
                k as f64
                    * (self.x.cos_coeff(k) * self.y.sin_coeff(k)
                        - self.x.sin_coeff(k) * self.y.cos_coeff(k))
            })
            .sum::<f64>()
            * PI
    }

    /// Rigid rotation about the origin.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        let n = self.order();
        let xs = self.x.as_slice();
        let ys = self.y.as_slice();
        let x: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| c * a - s * b).collect();
        let y: Vec<f64> = xs.iter().zip(ys).map(|(a, b)| s * a + c * b).collect();
        Self::new(CoeffVec::new(n, x)?, CoeffVec::new(n, y)?)
    }

    pub fn nodes(&self, q: usize) -> Result<BoundaryNodes> {
        let t = uniform_grid(q);
        let xs = self.x.sample_uniform(q);
        let ys = self.y.sample_uniform(q);
        let dxs = self.dx.sample_uniform(q);
        let dys = self.dy.sample_uniform(q);
        let ddxs = self.ddx.sample_uniform(q);
        let ddys = self.ddy.sample_uniform(q);
        let mut nodes = BoundaryNodes {
            t,
            pos: Vec::with_capacity(q),
            d1: Vec::with_capacity(q),
            d2: Vec::with_capacity(q),
            speed: Vec::with_capacity(q),
            normal: Vec::with_capacity(q),
            curvature: Vec::with_capacity(q),
        };
        for i in 0..q {
            let speed = dxs[i].hypot(dys[i]);
            if !(speed >= MIN_SPEED) {
                return Err(Error::DegenerateParameterization {
                    t: nodes.t[i],
                    speed,
                });
            }
            nodes.pos.push([xs[i], ys[i]]);
            nodes.d1.push([dxs[i], dys[i]]);
            nodes.d2.push([ddxs[i], ddys[i]]);
            nodes.speed.push(speed);
            nodes.normal.push([dys[i] / speed, -dxs[i] / speed]);
            nodes
                .curvature
                .push((dxs[i] * ddys[i] - ddxs[i] * dys[i]) / speed.powi(3));
        }
        Ok(nodes)
    }

    pub fn polyline(&self, m: usize) -> Polyline {
        let xs = self.x.sample_uniform(m);
        let ys = self.y.sample_uniform(m);
        Polyline {
            pts: xs.into_iter().zip(ys).map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn max_abs_curvature(&self, m: usize) -> Result<f64> {
        Ok(self
            .nodes(m)?
            .curvature
            .iter()
            .fold(0.0_f64, |acc, c| acc.max(c.abs())))
    }
}

fn checked_speed(b: &BoundaryCurve, t: f64) -> Result<f64> {
    let speed = b.speed(t);
    if !(speed >= MIN_SPEED) {
        return Err(Error::DegenerateParameterization { t, speed });
    }
    Ok(speed)
}

/// Signed curvature `(γ₁′γ₂″ − γ₁″γ₂′)/|γ′|³`.
pub fn curvature(b: &BoundaryCurve, ts: &[f64]) -> Result<Vec<f64>> {
    ts.iter()
        .map(|&t| {
            let speed = checked_speed(b, t)?;
            let d1 = b.d1(t);
            let d2 = b.d2(t);
            Ok((d1[0] * d2[1] - d2[0] * d1[1]) / speed.powi(3))
        })
        .collect()
}

/// `ν(t) = (γ₂′, −γ₁′)/|γ′|`, outward for counterclockwise curves.
pub fn outward_normal(b: &BoundaryCurve, ts: &[f64]) -> Result<Vec<[f64; 2]>> {
    ts.iter()
        .map(|&t| {
            let speed = checked_speed(b, t)?;
            let d1 = b.d1(t);
            Ok([d1[1] / speed, -d1[0] / speed])
        })
        .collect()
}

/// Closed polyline through curve samples.
#[derive(Debug, Clone)]
pub struct Polyline {
    pub pts: Vec<[f64; 2]>,
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - s * ab[0]).hypot(ap[1] - s * ab[1])
}

impl Polyline {
    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        (self.pts[i], self.pts[(i + 1) % self.pts.len()])
    }

    /// Bounding-box diagonal, used as the diameter scale.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.pts {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    pub fn distance(&self, p: [f64; 2]) -> f64 {
        (0..self.pts.len())
            .map(|i| {
                let (a, b) = self.segment(i);
                point_segment_distance(p, a, b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn winding_number(&self, p: [f64; 2]) -> i32 {
        let mut w = 0;
        for i in 0..self.pts.len() {
            let (a, b) = self.segment(i);
            if a[1] <= p[1] {
                if b[1] > p[1] && orient(a, b, p) > 0.0 {
                    w += 1;
                }
            } else if b[1] <= p[1] && orient(a, b, p) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.winding_number(p) != 0
    }

    /// No proper crossing between non-adjacent segments and no two
    /// non-adjacent vertices closer than `1e-6 ·` diameter.
    pub fn is_simple(&self) -> bool {
        let m = self.pts.len();
        if m < 3 || self.pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return false;
        }
        let diam = self.diameter();
        if !(diam > 0.0) {
            return false;
        }
        let tol = 1e-6 * diam;
        let cyc = |i: usize, j: usize| {
            let d = i.abs_diff(j);
            d.min(m - d)
        };

        // Vertex proximity: sweep in x with a window of width `tol`.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.pts[a][0].total_cmp(&self.pts[b][0]));
        for (oi, &i) in order.iter().enumerate() {
            for &j in &order[oi + 1..] {
                if self.pts[j][0] - self.pts[i][0] > tol {
                    break;
                }
                if cyc(i, j) >= 2 {
                    let d = (self.pts[i][0] - self.pts[j][0]).hypot(self.pts[i][1] - self.pts[j][1]);
                    if d <= tol {
                        return false;
                    }
                }
            }
        }

        // Segment crossings: sort-and-sweep on segment x-extents.
        let boxes: Vec<(f64, f64, f64, f64)> = (0..m)
            .map(|i| {
                let (a, b) = self.segment(i);
                (a[0].min(b[0]), a[0].max(b[0]), a[1].min(b[1]), a[1].max(b[1]))
            })
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| boxes[a].0.total_cmp(&boxes[b].0));
        for (oi, &i) in order.iter().enumerate() {
            let bi = boxes[i];
            for &j in &order[oi + 1..] {
                let bj = boxes[j];
                if bj.0 > bi.1 {
                    break;
                }
                if cyc(i, j) < 2 || bj.3 < bi.2 || bj.2 > bi.3 {
                    continue;
                }
                let (p1, p2) = self.segment(i);
                let (q1, q2) = self.segment(j);
                let d1 = orient(q1, q2, p1);
                let d2 = orient(q1, q2, p2);
                let d3 = orient(p1, p2, q1);
                let d4 = orient(p1, p2, q2);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// Dense-polyline simplicity test on [`SIMPLICITY_SAMPLES`] points.
pub fn is_simple(b: &BoundaryCurve) -> bool {
    b.polyline(SIMPLICITY_SAMPLES).is_simple()
}

/// Parameters of the random boundary distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySampleParams {
    pub n: usize,
    /// Coefficient decay: harmonic `k` has standard deviation `rho^(k-1)`.
    pub rho: f64,
    pub curvature_cap: f64,
    pub seed: u64,
}

impl BoundarySampleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho = {} not in (0,1)", self.rho)));
        }
        if !(self.curvature_cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "curvature cap {} must be positive",
                self.curvature_cap
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("boundary order must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Why a candidate boundary was discarded.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Degenerate,
    NotSimple,
    CurvatureExceeded(f64),
}

/// Raw coefficient draw: constants `~ N(0,1)`, harmonic `k` `~ N(0, rho^{2(k-1)})`.
/// Order of draws: γ₁ then γ₂, each in layout order.
pub fn draw_boundary_coeffs(p: &BoundarySampleParams) -> (CoeffVec, CoeffVec) {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.n;
    let mut draw = || {
        let mut d = vec![0.0; 2 * n + 1];
        d[0] = StandardNormal.sample(&mut rng);
        for block in 0..2 {
            for k in 1..=n {
                let z: f64 = StandardNormal.sample(&mut rng);
                d[block * n + k] = z * p.rho.powi(k as i32 - 1);
            }
        }
        CoeffVec::new(n, d).expect("finite draw")
    };
    let x = draw();
    let y = draw();
    (x, y)
}

/// One seeded draw, returned only if it is regular, simple and within the
/// curvature cap on the validation grid.
pub fn sample_boundary(
    p: &BoundarySampleParams,
) -> std::result::Result<BoundaryCurve, Rejection> {
    let (x, y) = draw_boundary_coeffs(p);
    let curve = BoundaryCurve::new(x, y).map_err(|_| Rejection::Degenerate)?;
    let kmax = curve
        .max_abs_curvature(VALIDATION_GRID)
        .map_err(|_| Rejection::Degenerate)?;
    if kmax > p.curvature_cap {
        return Err(Rejection::CurvatureExceeded(kmax));
    }
    if !is_simple(&curve) {
        return Err(Rejection::NotSimple);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn circle_curvature() {
        let ts = [0.0, 0.3, 2.0, 5.5];
        let c = BoundaryCurve::circle([0.0, 0.0], 1.0, 3).unwrap();
        for k in curvature(&c, &ts).unwrap() {
            assert!((k - 1.0).abs() < 1e-14);
        }
        let c2 = BoundaryCurve::circle([0.4, -1.0], 2.0, 3).unwrap();
        for k in curvature(&c2, &ts).unwrap() {
            assert!((k - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn ellipse_curvature_at_zero() {
        let e = BoundaryCurve::ellipse(2.0, 1.0, 2).unwrap();
        let k = curvature(&e, &[0.0]).unwrap()[0];
        assert!((k - 2.0).abs() < 1e-14);
    }

    #[test]
    fn normals() {
        let c = BoundaryCurve::circle([0.0, 0.0], 1.0, 2).unwrap();
        let nu = outward_normal(&c, &[0.0, PI / 2.0]).unwrap();
        assert!((nu[0][0] - 1.0).abs() < 1e-15 && nu[0][1].abs() < 1e-15);
        assert!(nu[1][0].abs() < 1e-15 && (nu[1][1] - 1.0).abs() < 1e-15);
        let e = BoundaryCurve::ellipse(2.0, 1.0, 2).unwrap();
        let nu = outward_normal(&e, &[PI / 4.0]).unwrap()[0];
        // (cos(π/4), 2 sin(π/4)) normalized
        let s = 5.0_f64.sqrt();
        assert!((nu[0] - 1.0 / s).abs() < 1e-14);
        assert!((nu[1] - 2.0 / s).abs() < 1e-14);
        assert!((nu[0].hypot(nu[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_parameterization_is_rejected() {
        // x = cos t, y = 0 collapses to a segment with zero speed at t = 0.
        let r = BoundaryCurve::new(CoeffVec::harmonic(2, 1, 1.0, 0.0), CoeffVec::zeros(2));
        assert!(matches!(r, Err(Error::DegenerateParameterization { .. })));
    }

    #[test]
    fn clockwise_input_is_flipped() {
        let c = BoundaryCurve::new(CoeffVec::harmonic(2, 1, 1.0, 0.0), CoeffVec::harmonic(2, 1, 0.0, -1.0))
            .unwrap();
        assert!(c.signed_area() > 0.0);
        assert!((c.signed_area() - PI).abs() < 1e-14);
    }

    #[test]
    fn simplicity_examples() {
        assert!(is_simple(&BoundaryCurve::circle([0.0, 0.0], 1.0, 3).unwrap()));
        let eight = BoundaryCurve::new(CoeffVec::harmonic(2, 2, 0.0, 1.0), CoeffVec::harmonic(2, 1, 0.0, 1.0))
            .unwrap();
        assert!(!is_simple(&eight));
        let mut x = CoeffVec::harmonic(3, 1, 1.0, 0.0);
        x.set_cos(3, 0.01);
        let wobbly = BoundaryCurve::new(x, CoeffVec::harmonic(3, 1, 0.0, 1.0)).unwrap();
        assert!(is_simple(&wobbly));
    }

    #[test]
    fn accepted_sample_respects_cap() {
        let mut accepted = 0;
        for seed in 0..50 {
            let p = BoundarySampleParams {
                n: 20,
                rho: 0.1,
                curvature_cap: 10.0,
                seed,
            };
            if let Ok(c) = sample_boundary(&p) {
                accepted += 1;
                assert!(c.max_abs_curvature(VALIDATION_GRID).unwrap() <= 10.0);
                assert!(is_simple(&c));
                assert!(c.signed_area() > 0.0);
            }
        }
        assert!(accepted > 0);
    }

    #[test]
    fn small_rho_draws_are_simple_ellipses() {
        // With rho → 0 only the first harmonic survives: every draw is an
        // ellipse, hence regular and simple. The curvature cap still rejects
        // the thin ones.
        let mut simple = 0;
        for seed in 0..100 {
            let p = BoundarySampleParams {
                n: 20,
                rho: 1e-9,
                curvature_cap: 10.0,
                seed,
            };
            let (x, y) = draw_boundary_coeffs(&p);
            if let Ok(c) = BoundaryCurve::new(x, y) {
                if is_simple(&c) {
                    simple += 1;
                }
            }
        }
        assert_eq!(simple, 100);
    }

    #[test]
    fn coefficient_moments() {
        let draws = 10_000;
        let rho = 0.5;
        let n = 5;
        let mut sq = vec![0.0; n + 1];
        for seed in 0..draws {
            let (x, _) = draw_boundary_coeffs(&BoundarySampleParams {
                n,
                rho,
                curvature_cap: 10.0,
                seed,
            });
            for (k, s) in sq.iter_mut().enumerate().skip(1) {
                *s += x.cos_coeff(k).powi(2);
            }
        }
        for (k, s) in sq.iter().enumerate().skip(1) {
            let sd = (s / draws as f64).sqrt();
            let want = rho.powi(k as i32 - 1);
            assert!((sd / want - 1.0).abs() < 0.05, "k={k}: {sd} vs {want}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = BoundarySampleParams {
            n: 20,
            rho: 0.3,
            curvature_cap: 10.0,
            seed: 42,
        };
        assert_eq!(draw_boundary_coeffs(&p), draw_boundary_coeffs(&p));
    }

    #[test]
    fn gamma_vec_round_trip() {
        let k = BoundaryCurve::kite(4).unwrap();
        let back = BoundaryCurve::from_gamma_vec(&k.to_gamma_vec()).unwrap();
        assert_eq!(k, back);
    }

    #[test]
    fn polyline_queries() {
        let c = BoundaryCurve::circle([0.0, 0.0], 1.0, 2).unwrap();
        let pl = c.polyline(2048);
        assert!(pl.contains([0.2, 0.1]));
        assert!(!pl.contains([1.5, 0.0]));
        assert!((pl.distance([0.0, 0.0]) - 1.0).abs() < 1e-5);
        assert!((pl.distance([3.0, 0.0]) - 2.0).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rotation_preserves_curvature_and_rotates_normals(seed in 0u64..500, angle in -3.0..3.0f64) {
            let p = BoundarySampleParams { n: 8, rho: 0.3, curvature_cap: 1e9, seed };
            let (x, y) = draw_boundary_coeffs(&p);
            let c = match BoundaryCurve::new(x, y) { Ok(c) => c, Err(_) => return Ok(()) };
            let r = c.rotated(angle).unwrap();
            let ts: Vec<f64> = (0..17).map(|i| 0.37 * i as f64).collect();
            let k0 = curvature(&c, &ts).unwrap();
            let k1 = curvature(&r, &ts).unwrap();
            let n0 = outward_normal(&c, &ts).unwrap();
            let n1 = outward_normal(&r, &ts).unwrap();
            let (s, co) = angle.sin_cos();
            for i in 0..ts.len() {
                prop_assert!((k0[i] - k1[i]).abs() <= 1e-9 * (1.0 + k0[i].abs()));
                let rn = [co * n0[i][0] - s * n0[i][1], s * n0[i][0] + co * n0[i][1]];
                prop_assert!((rn[0] - n1[i][0]).abs() < 1e-10 && (rn[1] - n1[i][1]).abs() < 1e-10);
            }
            prop_assert!(r.signed_area() > 0.0);
        }
    }
}
