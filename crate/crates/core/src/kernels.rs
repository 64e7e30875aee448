//! Kernels of the Laplace, Helmholtz and Navier layer potentials.
//!
//! Conventions: `Φ(x, y) = (1/2π) ln(1/r)` for Laplace,
//! `Φ(x, y) = (i/4) H₀⁽¹⁾(k r)` for Helmholtz, `ν` the outward unit normal.
//! Curve-level kernels include the arclength factor `|γ'(s)|`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::boundary::{BoundaryCurve, BoundaryNodes, MIN_SPEED};
use crate::error::{Error, Result};
use crate::special::{bessel_jy01, hankel1_01, EULER_GAMMA};

const INV_2PI: f64 = 1.0 / (2.0 * PI);

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    LaplaceSingle,
    LaplaceDouble,
    LaplaceDoubleAdjoint,
    /// Double layer plus the constant kernel `1`.
    LaplaceDoubleModified,
    HelmholtzCombined { k: f64, eta: f64 },
    NavierU { g: f64, nu: f64 },
    NavierT { g: f64, nu: f64 },
}

impl KernelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelKind::HelmholtzCombined { k, eta } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(Error::InvalidParameter(format!("wavenumber k = {k} must be positive")));
                }
                if eta == 0.0 || !eta.is_finite() {
                    return Err(Error::InvalidParameter(format!("coupling eta = {eta} must be nonzero")));
                }
                Ok(())
            }
            KernelKind::NavierU { g, nu } | KernelKind::NavierT { g, nu } => validate_elastic(g, nu),
            _ => Ok(()),
        }
    }
}

pub fn validate_elastic(g: f64, nu: f64) -> Result<()> {
    if nu >= 0.5 {
        return Err(Error::IncompressibleLimit(nu));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("Poisson ratio {nu} must lie in (0, 0.5)")));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::InvalidParameter(format!("shear modulus {g} must be positive")));
    }
    Ok(())
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

// ---------------------------------------------------------------------------
// Point kernels

pub fn laplace_fundamental(x: [f64; 2], y: [f64; 2]) -> f64 {
    let d = sub(x, y);
    -0.5 * INV_2PI * dot(d, d).ln()
}

/// `∇ₓΦ(x, y) = −(x − y) / (2π r²)`.
pub fn laplace_grad_x(x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let d = sub(x, y);
    let s = -INV_2PI / dot(d, d);
    [s * d[0], s * d[1]]
}

/// `∂Φ(x, y)/∂ν(y)`.
pub fn laplace_double_point(x: [f64; 2], y: [f64; 2], ny: [f64; 2]) -> f64 {
    let d = sub(x, y);
    INV_2PI * dot(d, ny) / dot(d, d)
}

pub fn helmholtz_fundamental(k: f64, x: [f64; 2], y: [f64; 2]) -> Complex64 {
    let r = sub(x, y);
    let r = dot(r, r).sqrt();
    let (h0, _) = hankel1_01(k * r);
    Complex64::new(0.0, 0.25) * h0
}

/// `∂Φ(x, y)/∂ν(y) = (ik/4) H₁⁽¹⁾(kr) (x − y)·ν(y) / r`.
pub fn helmholtz_double_point(k: f64, x: [f64; 2], y: [f64; 2], ny: [f64; 2]) -> Complex64 {
    let d = sub(x, y);
    let r = dot(d, d).sqrt();
    let (_, h1) = hankel1_01(k * r);
    Complex64::new(0.0, 0.25 * k) * h1 * (dot(d, ny) / r)
}

/// `∇ₓΦ(x, y) = −(k/4) i H₁⁽¹⁾(kr) (x − y)/r`.
pub fn helmholtz_grad_x(k: f64, x: [f64; 2], y: [f64; 2]) -> [Complex64; 2] {
    let d = sub(x, y);
    let r = dot(d, d).sqrt();
    let (_, h1) = hankel1_01(k * r);
    let c = Complex64::new(0.0, -0.25 * k) * h1 / r;
    [c * d[0], c * d[1]]
}

/// Displacement fundamental solution `u*_{αβ}(x, y)`.
pub fn navier_u_point(g: f64, nu: f64, x: [f64; 2], y: [f64; 2]) -> Mat2 {
    let d = sub(y, x);
    let r2 = dot(d, d);
    let r = r2.sqrt();
    let rd = [d[0] / r, d[1] / r];
    let c = 1.0 / (8.0 * PI * g * (1.0 - nu));
    let lg = -0.5 * r2.ln() * (3.0 - 4.0 * nu);
    let off = c * rd[0] * rd[1];
    [[c * (lg + rd[0] * rd[0]), off], [off, c * (lg + rd[1] * rd[1])]]
}

/// Traction fundamental solution `t*_{αβ}(x, y)` with `∂r/∂n` and `n`
/// taken at `y`, `r,ᵢ = (yᵢ − xᵢ)/r`.
pub fn navier_t_point(nu: f64, x: [f64; 2], y: [f64; 2], ny: [f64; 2]) -> Mat2 {
    let d = sub(y, x);
    let r = dot(d, d).sqrt();
    let rd = [d[0] / r, d[1] / r];
    let drdn = dot(rd, ny);
    let c = -1.0 / (4.0 * PI * (1.0 - nu) * r);
    let m = 1.0 - 2.0 * nu;
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let delta = if a == b { 1.0 } else { 0.0 };
            out[a][b] = c
                * (drdn * (m * delta + 2.0 * rd[a] * rd[b]) - m * (rd[a] * ny[b] - rd[b] * ny[a]));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Curve kernels

struct Local {
    pos: [f64; 2],
    speed: f64,
    normal: [f64; 2],
    curvature: f64,
}

fn local(b: &BoundaryCurve, t: f64) -> Result<Local> {
    let d1 = b.d1(t);
    let speed = d1[0].hypot(d1[1]);
    if !(speed >= MIN_SPEED) {
        return Err(Error::DegenerateParameterization { t, speed });
    }
    let d2 = b.d2(t);
    Ok(Local {
        pos: b.point(t),
        speed,
        normal: [d1[1] / speed, -d1[0] / speed],
        curvature: (d1[0] * d2[1] - d2[0] * d1[1]) / speed.powi(3),
    })
}

fn same_point(t: f64, s: f64) -> bool {
    let d = (t - s).rem_euclid(2.0 * PI);
    d == 0.0 || d == 2.0 * PI
}

/// `∂Φ(γ(t), γ(s))/∂ν(γ(s)) |γ'(s)|`, continuous across `t = s` with the
/// limit `−κ(t)|γ'(t)|/(4π)`.
pub fn laplace_double_kernel(b: &BoundaryCurve, t: f64, s: f64) -> Result<f64> {
    let ls = local(b, s)?;
    if same_point(t, s) {
        return Ok(-ls.curvature * ls.speed * 0.5 * INV_2PI);
    }
    let x = b.point(t);
    Ok(laplace_double_point(x, ls.pos, ls.normal) * ls.speed)
}

/// `∂Φ(γ(t), γ(s))/∂ν(γ(t)) |γ'(s)|`, same diagonal limit as the double layer.
pub fn laplace_adjoint_kernel(b: &BoundaryCurve, t: f64, s: f64) -> Result<f64> {
    let lt = local(b, t)?;
    let ls = local(b, s)?;
    if same_point(t, s) {
        return Ok(-lt.curvature * lt.speed * 0.5 * INV_2PI);
    }
    let d = sub(lt.pos, ls.pos);
    Ok(-INV_2PI * dot(d, lt.normal) / dot(d, d) * ls.speed)
}

/// Double-layer kernel plus `|γ'(s)|`.
pub fn laplace_modified_kernel(b: &BoundaryCurve, t: f64, s: f64) -> Result<f64> {
    Ok(laplace_double_kernel(b, t, s)? + b.speed(s))
}

/// Largest deviation of `∮ ∂Φ/∂ν ds` from `−1/2` over 16 node-aligned
/// points `t`, trapezoid rule with `quad_points` nodes.
pub fn gauss_jump_check(b: &BoundaryCurve, quad_points: usize) -> Result<f64> {
    if quad_points < 256 {
        return Err(Error::InsufficientSamples {
            got: quad_points,
            need: 256,
        });
    }
    let nodes = b.nodes(quad_points)?;
    let w = 2.0 * PI / quad_points as f64;
    let mut worst = 0.0_f64;
    for p in 0..16 {
        let i = p * quad_points / 16;
        let sum: f64 = (0..quad_points)
            .map(|j| laplace_node(KernelKind::LaplaceDouble, &nodes, i, j))
            .sum();
        worst = worst.max((w * sum + 0.5).abs());
    }
    Ok(worst)
}

/// `[∂Φ/∂ν(y) − iηΦ] |γ'(s)|` for the Helmholtz fundamental solution.
pub fn helmholtz_combined_kernel(b: &BoundaryCurve, k: f64, eta: f64, t: f64, s: f64) -> Result<Complex64> {
    KernelKind::HelmholtzCombined { k, eta }.validate()?;
    if same_point(t, s) {
        return Err(Error::DiagonalRequiresSingularQuadrature(t));
    }
    let ls = local(b, s)?;
    let x = b.point(t);
    let dl = helmholtz_double_point(k, x, ls.pos, ls.normal);
    let sl = helmholtz_fundamental(k, x, ls.pos);
    Ok((dl - Complex64::new(0.0, eta) * sl) * ls.speed)
}

/// `(u*, t*)` at `x = γ(t)`, `y = γ(s)`, each times `|γ'(s)|`.
pub fn navier_kernels(b: &BoundaryCurve, g: f64, nu: f64, t: f64, s: f64) -> Result<(Mat2, Mat2)> {
    validate_elastic(g, nu)?;
    if same_point(t, s) {
        return Err(Error::WeaklySingularDiagonal(t));
    }
    let ls = local(b, s)?;
    let x = b.point(t);
    let mut u = navier_u_point(g, nu, x, ls.pos);
    let mut tr = navier_t_point(nu, x, ls.pos, ls.normal);
    for a in 0..2 {
        for c in 0..2 {
            u[a][c] *= ls.speed;
            tr[a][c] *= ls.speed;
        }
    }
    Ok((u, tr))
}

// ---------------------------------------------------------------------------
// Node kernels for assembly. `i` indexes the target `t_i`, `j` the source `s_j`.

/// Smooth Laplace kernels at a node pair, arclength included, diagonal by
/// its limit. Panics for kinds without a smooth kernel.
pub fn laplace_node(kind: KernelKind, nodes: &BoundaryNodes, i: usize, j: usize) -> f64 {
    if i == j {
        let diag = -nodes.curvature[j] * nodes.speed[j] * 0.5 * INV_2PI;
        return match kind {
            KernelKind::LaplaceDouble | KernelKind::LaplaceDoubleAdjoint => diag,
            KernelKind::LaplaceDoubleModified => diag + nodes.speed[j],
            other => panic!("no smooth node kernel for {other:?}"),
        };
    }
    let d = sub(nodes.pos[i], nodes.pos[j]);
    let r2 = dot(d, d);
    match kind {
        KernelKind::LaplaceDouble => INV_2PI * dot(d, nodes.normal[j]) / r2 * nodes.speed[j],
        KernelKind::LaplaceDoubleAdjoint => -INV_2PI * dot(d, nodes.normal[i]) / r2 * nodes.speed[j],
        KernelKind::LaplaceDoubleModified => {
            (INV_2PI * dot(d, nodes.normal[j]) / r2 + 1.0) * nodes.speed[j]
        }
        other => panic!("no smooth node kernel for {other:?}"),
    }
}

/// Kernel written as `log · ln(4 sin²((t − s)/2)) + smooth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSplit<T> {
    pub log: T,
    pub smooth: T,
}

/// `ln(4 sin²((t − s)/2))`.
#[inline]
pub fn periodic_log(t: f64, s: f64) -> f64 {
    let h = (0.5 * (t - s)).sin();
    (4.0 * h * h).ln()
}

/// Split of the combined Helmholtz kernel `(K − iηS)|γ'(s)|`.
pub fn helmholtz_split(nodes: &BoundaryNodes, k: f64, eta: f64, i: usize, j: usize) -> LogSplit<Complex64> {
    let ieta = Complex64::new(0.0, eta);
    let speed = nodes.speed[j];
    if i == j {
        let s2 = Complex64::new(
            -EULER_GAMMA * INV_2PI - INV_2PI * (0.5 * k * speed).ln(),
            0.25,
        ) * speed;
        let k2 = -nodes.curvature[j] * speed * 0.5 * INV_2PI;
        let s1 = -0.5 * INV_2PI * speed;
        return LogSplit {
            log: Complex64::new(0.0, 0.0) - ieta * s1,
            smooth: Complex64::new(k2, 0.0) - ieta * s2,
        };
    }
    let d = sub(nodes.pos[i], nodes.pos[j]);
    let r = dot(d, d).sqrt();
    let (j0, j1, y0, y1) = bessel_jy01(k * r);
    let lg = periodic_log(nodes.t[i], nodes.t[j]);
    let cosine = dot(d, nodes.normal[j]) / r;
    // S = (i/4) H0 |γ'|, K = (ik/4) H1 cos |γ'|
    let s_full = Complex64::new(-0.25 * y0, 0.25 * j0) * speed;
    let k_full = Complex64::new(-0.25 * k * y1, 0.25 * k * j1) * cosine * speed;
    let s1 = -0.5 * INV_2PI * j0 * speed;
    let k1 = -0.5 * INV_2PI * k * j1 * cosine * speed;
    let log = Complex64::new(k1, 0.0) - ieta * s1;
    let full = k_full - ieta * s_full;
    LogSplit {
        log,
        smooth: full - log * lg,
    }
}

/// Split of `u*(γ(t), γ(s)) |γ'(s)|`.
pub fn navier_u_split(nodes: &BoundaryNodes, g: f64, nu: f64, i: usize, j: usize) -> LogSplit<Mat2> {
    let c = 1.0 / (8.0 * PI * g * (1.0 - nu));
    let m = 3.0 - 4.0 * nu;
    let speed = nodes.speed[j];
    let a = -0.5 * c * m * speed;
    let log = [[a, 0.0], [0.0, a]];
    let (lnratio, rr) = if i == j {
        let d1 = nodes.d1[j];
        let s2 = speed * speed;
        (
            2.0 * speed.ln(),
            [
                [d1[0] * d1[0] / s2, d1[0] * d1[1] / s2],
                [d1[1] * d1[0] / s2, d1[1] * d1[1] / s2],
            ],
        )
    } else {
        let d = sub(nodes.pos[j], nodes.pos[i]);
        let r2 = dot(d, d);
        (
            (r2).ln() - periodic_log(nodes.t[i], nodes.t[j]),
            [
                [d[0] * d[0] / r2, d[0] * d[1] / r2],
                [d[1] * d[0] / r2, d[1] * d[1] / r2],
            ],
        )
    };
    let mut smooth = [[0.0; 2]; 2];
    for a_ in 0..2 {
        for b_ in 0..2 {
            let delta = if a_ == b_ { 1.0 } else { 0.0 };
            smooth[a_][b_] = c * (-0.5 * m * lnratio * delta + rr[a_][b_]) * speed;
        }
    }
    LogSplit { log, smooth }
}

/// Integrand `t*(x, y)(v(y) − v(x)) |γ'(s)|` at a node pair; `v` and `dv`
/// hold the displacement and its `t`-derivative at the nodes. Smooth, with
/// the diagonal given by its limit.
pub fn navier_t_subtracted(
    nodes: &BoundaryNodes,
    nu: f64,
    v: &[[f64; 2]],
    dv: &[[f64; 2]],
    i: usize,
    j: usize,
) -> [f64; 2] {
    let speed = nodes.speed[j];
    if i == j {
        let d1 = nodes.d1[j];
        let n = nodes.normal[j];
        let c = (1.0 - 2.0 * nu) / (4.0 * PI * (1.0 - nu)) / (speed * speed);
        let mut out = [0.0; 2];
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for b in 0..2 {
                acc += (d1[a] * n[b] - d1[b] * n[a]) * dv[j][b];
            }
            *o = c * acc * speed;
        }
        return out;
    }
    let t = navier_t_point(nu, nodes.pos[i], nodes.pos[j], nodes.normal[j]);
    let dvv = sub(v[j], v[i]);
    [
        (t[0][0] * dvv[0] + t[0][1] * dvv[1]) * speed,
        (t[1][0] * dvv[0] + t[1][1] * dvv[1]) * speed,
    ]
}

/// Weights `R_d` of `∫₀^{2π} ln(4 sin²((t_i − s)/2)) g(s) ds ≈ Σ_j R_{(i−j) mod Q} g(s_j)`,
/// exact for trigonometric polynomials `g` of degree below `Q/2`.
pub fn log_weights(q: usize) -> Vec<f64> {
    assert!(q >= 4 && q.is_multiple_of(2), "log weights need an even node count");
    let m = q / 2;
    let cos_table: Vec<f64> = (0..q).map(|j| (2.0 * PI * j as f64 / q as f64).cos()).collect();
    let mf = m as f64;
    (0..q)
        .map(|d| {
            let mut acc = 0.0;
            for l in 1..m {
                acc += cos_table[(l * d) % q] / l as f64;
            }
            -2.0 * PI / mf * acc - PI / (mf * mf) * cos_table[(m * d) % q]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{sample_boundary, BoundarySampleParams};
    use crate::trigseries::uniform_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn random_boundary(seed: u64) -> BoundaryCurve {
        (seed..)
            .find_map(|s| {
                sample_boundary(&BoundarySampleParams {
                    n: 20,
                    rho: 0.3,
                    curvature_cap: 10.0,
                    seed: s,
                })
                .ok()
            })
            .unwrap()
    }

    #[test]
    fn circle_double_layer_is_constant() {
        let b = BoundaryCurve::circle([0.0, 0.0], 1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let want = -1.0 / (4.0 * PI);
        for _ in 0..20 {
            let t: f64 = rng.random_range(0.0..2.0 * PI);
            let s: f64 = rng.random_range(0.0..2.0 * PI);
            assert!(close(laplace_double_kernel(&b, t, s).unwrap(), want, 1e-14));
            assert!(close(laplace_adjoint_kernel(&b, t, s).unwrap(), want, 1e-14));
        }
        assert!(close(laplace_double_kernel(&b, 1.3, 1.3).unwrap(), want, 1e-15));
        assert!(close(laplace_modified_kernel(&b, 0.2, 2.0).unwrap(), want + 1.0, 1e-14));
    }

    #[test]
    fn diagonal_matches_one_sided_limit() {
        let b = BoundaryCurve::ellipse(2.0, 1.0, 4).unwrap();
        let diag = laplace_double_kernel(&b, 0.3, 0.3).unwrap();
        assert!(close(diag, -0.126113609111439243895, 1e-14));
        let plus = laplace_double_kernel(&b, 0.3, 0.3 + 1e-4).unwrap();
        let minus = laplace_double_kernel(&b, 0.3, 0.3 - 1e-4).unwrap();
        assert!(close(plus, -0.126105145198835649833, 1e-9));
        assert!(close(minus, -0.126122072922953819702, 1e-9));
        // Slope at the diagonal is about 0.085, so one-sided gaps are O(h); the
        // 1e-9 tolerance covers cancellation in (x - y).ν / r² at r ~ 1e-4.
        assert!(close(0.5 * (plus + minus), diag, 2e-9));
        let diag = laplace_adjoint_kernel(&b, 0.3, 0.3).unwrap();
        let plus = laplace_adjoint_kernel(&b, 0.3, 0.3 + 1e-4).unwrap();
        let minus = laplace_adjoint_kernel(&b, 0.3, 0.3 - 1e-4).unwrap();
        assert!(close(0.5 * (plus + minus), diag, 1e-8), "{diag} vs {plus} {minus}");
    }

    #[test]
    fn double_layer_continuity_on_random_boundaries() {
        for seed in [1, 2, 3] {
            let b = random_boundary(seed * 100);
            for &t in &[0.0, 1.0, 4.0] {
                let k0 = laplace_double_kernel(&b, t, t).unwrap();
                for &h in &[1e-3, 1e-4, 1e-5] {
                    let d = (laplace_double_kernel(&b, t, t + h).unwrap() - k0).abs();
                    assert!(d <= 1e3 * h, "seed {seed} t {t} h {h}: {d}");
                }
            }
        }
    }

    #[test]
    fn gauss_jump_examples() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0, 4).unwrap();
        assert!(gauss_jump_check(&circle, 512).unwrap() <= 1e-12);
        let kite = BoundaryCurve::kite(4).unwrap();
        assert!(gauss_jump_check(&kite, 1024).unwrap() <= 1e-8);
        let b = random_boundary(7);
        assert!(gauss_jump_check(&b, 1024).unwrap() <= 1e-8);
        assert!(matches!(
            gauss_jump_check(&circle, 128),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn helmholtz_kernel_reference_values() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0, 4).unwrap();
        let v = helmholtz_combined_kernel(&circle, 1.0, 1.0, 0.0, PI).unwrap();
        assert!(close(v.re, 0.029214586900074530291, 1e-12), "{v}");
        assert!(close(v.im, -0.016587283776782066901, 1e-12), "{v}");
        let ellipse = BoundaryCurve::ellipse(2.0, 1.0, 4).unwrap();
        let v = helmholtz_combined_kernel(&ellipse, 3.0, 2.0, 0.4, 2.1).unwrap();
        assert!(close(v.re, 0.0075013224823405087711, 1e-12), "{v}");
        assert!(close(v.im, 0.084805250764766681162, 1e-12), "{v}");
    }

    #[test]
    fn helmholtz_kernel_errors() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0, 4).unwrap();
        assert!(matches!(
            helmholtz_combined_kernel(&circle, 1.0, 1.0, 0.5, 0.5),
            Err(Error::DiagonalRequiresSingularQuadrature(_))
        ));
        assert!(helmholtz_combined_kernel(&circle, -1.0, 1.0, 0.5, 1.0).is_err());
        assert!(helmholtz_combined_kernel(&circle, 1.0, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn helmholtz_far_field_envelope() {
        // Leading Hankel asymptotics on a radius-5 circle at k = 40: the
        // kernel magnitude follows (k R/4)|1 + cos| sqrt(2/(π k r)).
        let k = 40.0;
        let radius = 5.0;
        let b = BoundaryCurve::circle([0.0, 0.0], radius, 4).unwrap();
        for &s in &[0.1, 0.3, 0.8, 1.5, 2.5, PI] {
            let v = helmholtz_combined_kernel(&b, k, k, 0.0, s).unwrap();
            let d = sub(b.point(0.0), b.point(s));
            let r = dot(d, d).sqrt();
            let cosine = -0.5 * r / radius;
            let z = k * r;
            let envelope = 0.25 * k * radius * (2.0 / (PI * z)).sqrt();
            let predicted = envelope * (1.0 + cosine).abs();
            assert!(
                (v.norm() - predicted).abs() <= envelope / z,
                "s = {s}: |K| = {} vs {predicted}",
                v.norm()
            );
        }
    }

    #[test]
    fn eta_zero_leaves_pure_double_layer() {
        let b = BoundaryCurve::ellipse(1.5, 1.0, 4).unwrap();
        let k = 2.5;
        for &(t, s) in &[(0.1, 2.0), (1.0, 4.0)] {
            // η → 0 limit; η = 0 itself is outside the kernel's domain.
            let combined = helmholtz_combined_kernel(&b, k, 1e-300, t, s).unwrap();
            let y = b.point(s);
            let n = outward(&b, s);
            let dl = helmholtz_double_point(k, b.point(t), y, n) * b.speed(s);
            assert!((combined - dl).norm() <= 1e-15 * dl.norm().max(1.0));
        }
    }

    fn outward(b: &BoundaryCurve, s: f64) -> [f64; 2] {
        let d = b.d1(s);
        let sp = d[0].hypot(d[1]);
        [d[1] / sp, -d[0] / sp]
    }

    #[test]
    fn helmholtz_reciprocity() {
        let x = [0.3, -0.2];
        let y = [1.7, 0.9];
        let a = helmholtz_fundamental(4.0, x, y);
        let b = helmholtz_fundamental(4.0, y, x);
        assert_eq!(a, b);
    }

    #[test]
    fn helmholtz_split_recombines() {
        let b = random_boundary(5);
        let q = 256;
        let nodes = b.nodes(q).unwrap();
        let (k, eta) = (7.0, 7.0);
        for &(i, j) in &[(0, 5), (10, 200), (100, 101)] {
            let sp = helmholtz_split(&nodes, k, eta, i, j);
            let full = sp.log * periodic_log(nodes.t[i], nodes.t[j]) + sp.smooth;
            let direct = helmholtz_combined_kernel(&b, k, eta, nodes.t[i], nodes.t[j]).unwrap();
            assert!((full - direct).norm() <= 1e-11 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn helmholtz_split_smooth_part_is_continuous() {
        // Evaluate the split at an off-grid pair approaching the diagonal.
        let b = BoundaryCurve::ellipse(1.4, 0.8, 4).unwrap();
        let (k, eta) = (3.0, 3.0);
        let t0 = 0.7;
        let single = |h: f64| {
            let t = vec![t0, t0 + h];
            let nodes = nodes_at(&b, &t);
            helmholtz_split(&nodes, k, eta, 0, if h == 0.0 { 0 } else { 1 })
        };
        let diag = single(0.0);
        for &h in &[1e-3, 1e-4] {
            let near = single(h);
            assert!((near.smooth - diag.smooth).norm() <= 50.0 * h, "h {h}");
            assert!((near.log - diag.log).norm() <= 50.0 * h, "h {h}");
        }
    }

    fn nodes_at(b: &BoundaryCurve, ts: &[f64]) -> BoundaryNodes {
        let mut nodes = BoundaryNodes {
            t: ts.to_vec(),
            pos: vec![],
            d1: vec![],
            d2: vec![],
            speed: vec![],
            normal: vec![],
            curvature: vec![],
        };
        for &t in ts {
            let l = local(b, t).unwrap();
            nodes.pos.push(l.pos);
            nodes.d1.push(b.d1(t));
            nodes.d2.push(b.d2(t));
            nodes.speed.push(l.speed);
            nodes.normal.push(l.normal);
            nodes.curvature.push(l.curvature);
        }
        nodes
    }

    #[test]
    fn log_weights_integrate_exactly() {
        // ∫ ln(4 sin²(s/2)) cos(ks) ds = −2π/k (k ≥ 1), 0 for k = 0
        let q = 64;
        let r = log_weights(q);
        let s = uniform_grid(q);
        for k in 0..q / 2 {
            let sum: f64 = (0..q).map(|j| r[(q - j) % q] * (k as f64 * s[j]).cos()).sum();
            let want = if k == 0 { 0.0 } else { -2.0 * PI / k as f64 };
            assert!(close(sum, want, 1e-12), "k = {k}: {sum} vs {want}");
        }
    }

    #[test]
    fn navier_u_examples() {
        let u = navier_u_point(1.0, 0.3, [0.0, 0.0], [1.0, 0.0]);
        assert!(close(u[0][0], 1.0 / (8.0 * PI * 0.7), 1e-15));
        assert!(close(u[0][0], 0.056841051104248336, 1e-15));
        assert_eq!(u[0][1], 0.0);
        let lam = 3.7;
        let (g, nu) = (2.0, 0.25);
        let x = [0.1, 0.4];
        let y = [-0.8, 1.3];
        let a = navier_u_point(g, nu, x, y);
        let b = navier_u_point(g, nu, [lam * x[0], lam * x[1]], [lam * y[0], lam * y[1]]);
        let shift = (3.0 - 4.0 * nu) / (8.0 * PI * g * (1.0 - nu)) * (1.0 / lam).ln();
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { shift } else { 0.0 };
                assert!(close(b[i][j] - a[i][j], d, 1e-14));
            }
        }
    }

    #[test]
    fn navier_kernel_errors_and_symmetry() {
        let b = random_boundary(9);
        let (u, _) = navier_kernels(&b, 1.0, 0.3, 0.4, 2.9).unwrap();
        assert_eq!(u[0][1], u[1][0]);
        assert!(matches!(
            navier_kernels(&b, 1.0, 0.3, 1.0, 1.0),
            Err(Error::WeaklySingularDiagonal(_))
        ));
        assert!(matches!(
            navier_kernels(&b, 1.0, 0.5, 1.0, 2.0),
            Err(Error::IncompressibleLimit(_))
        ));
    }

    #[test]
    fn traction_kernel_integrates_to_minus_identity_inside() {
        let b = random_boundary(21);
        let q = 1024;
        let nodes = b.nodes(q).unwrap();
        let poly = b.polyline(2048);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tested = 0;
        while tested < 5 {
            let c = [b.x().c0(), b.y().c0()];
            let p = [c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.5..0.5)];
            if !poly.contains(p) || poly.distance(p) < 0.2 {
                continue;
            }
            tested += 1;
            let mut acc = [[0.0; 2]; 2];
            for j in 0..q {
                let t = navier_t_point(0.3, p, nodes.pos[j], nodes.normal[j]);
                for a in 0..2 {
                    for c in 0..2 {
                        acc[a][c] += t[a][c] * nodes.speed[j] * 2.0 * PI / q as f64;
                    }
                }
            }
            for a in 0..2 {
                for c in 0..2 {
                    let want = if a == c { -1.0 } else { 0.0 };
                    assert!(close(acc[a][c], want, 1e-8), "{acc:?}");
                }
            }
        }
    }

    #[test]
    fn navier_u_split_recombines_and_is_continuous() {
        let b = BoundaryCurve::ellipse(1.3, 0.9, 4).unwrap();
        let (g, nu) = (1.0, 0.3);
        let nodes = nodes_at(&b, &[0.5, 2.0, 0.5 + 1e-4]);
        let sp = navier_u_split(&nodes, g, nu, 0, 1);
        let lg = periodic_log(nodes.t[0], nodes.t[1]);
        let (u, _) = navier_kernels(&b, g, nu, 0.5, 2.0).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                assert!(close(sp.log[a][c] * lg + sp.smooth[a][c], u[a][c], 1e-14));
            }
        }
        let diag = navier_u_split(&nodes, g, nu, 0, 0);
        let near = navier_u_split(&nodes, g, nu, 2, 0);
        for a in 0..2 {
            for c in 0..2 {
                assert!(close(diag.smooth[a][c], near.smooth[a][c], 1e-3));
            }
        }
    }

    #[test]
    fn kernel_kind_validation() {
        assert!(KernelKind::LaplaceDouble.validate().is_ok());
        assert!(KernelKind::HelmholtzCombined { k: 1.0, eta: 1.0 }.validate().is_ok());
        assert!(KernelKind::HelmholtzCombined { k: 0.0, eta: 1.0 }.validate().is_err());
        assert!(matches!(
            KernelKind::NavierT { g: 1.0, nu: 0.5 }.validate(),
            Err(Error::IncompressibleLimit(_))
        ));
        assert!(KernelKind::NavierU { g: -1.0, nu: 0.3 }.validate().is_err());
    }
}
