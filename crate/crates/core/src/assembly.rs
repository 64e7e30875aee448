//! Fourier-Galerkin and Nyström discretizations of the boundary integral
//! equations.
//!
//! Second-kind problems are stored as `(I − M)φ = f̃`, where `M` carries the
//! full sign and factor of the operator and `f̃` the matching right-hand
//! side:
//!
//! | kind            | `M`            | `f̃`               |
//! |-----------------|----------------|-------------------|
//! | IDP             | `2𝓓`           | `−2f`             |
//! | EDP             | `−2𝓓̃`          | `2f`              |
//! | INP             | `−2𝓓′`         | `2f`              |
//! | ENP, potential  | `2𝓓′`          | `−2f`             |
//! | Helmholtz       | `−2(𝓓 − iη𝓢)`  | `−2e^{ik x·d}`    |
//!
//! Elastostatics is first kind, `𝓤t = (½I + 𝓣)v`, solved for the traction.

use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix, DVector, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary::{BoundaryCurve, BoundaryNodes};
use crate::error::{Error, Result};
use crate::kernels::{
    helmholtz_split, laplace_node, log_weights, navier_t_subtracted, navier_u_split, validate_elastic,
    KernelKind,
};
use crate::trigseries::{default_quadrature_size, project, trig_moments, CoeffVec, ComplexCoeffVec};

/// Condition estimates above this are reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    Idp,
    Edp,
    Inp,
    Enp,
    PotentialFlow { v0: f64 },
    Elastostatic { g: f64, nu: f64 },
    Helmholtz { k: f64, eta: f64, d: [f64; 2] },
}

impl ProblemKind {
    /// Helmholtz problem with the default coupling `η = k` for `k > 1/2`,
    /// `η = 1` otherwise.
    pub fn helmholtz(k: f64, d: [f64; 2]) -> Self {
        ProblemKind::Helmholtz {
            k,
            eta: default_eta(k),
            d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProblemKind::PotentialFlow { v0 } if !v0.is_finite() => {
                Err(Error::InvalidParameter(format!("speed v0 = {v0}")))
            }
            ProblemKind::Elastostatic { g, nu } => validate_elastic(g, nu),
            ProblemKind::Helmholtz { k, eta, d } => {
                KernelKind::HelmholtzCombined { k, eta }.validate()?;
                let len = d[0].hypot(d[1]);
                if (len - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "incidence direction must be a unit vector, |d| = {len}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// File tag, stable across versions.
    pub fn tag(&self) -> u64 {
        match self {
            ProblemKind::Idp => 1,
            ProblemKind::Edp => 2,
            ProblemKind::Inp => 3,
            ProblemKind::Enp => 4,
            ProblemKind::PotentialFlow { .. } => 5,
            ProblemKind::Elastostatic { .. } => 6,
            ProblemKind::Helmholtz { .. } => 7,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Idp => "IDP",
            ProblemKind::Edp => "EDP",
            ProblemKind::Inp => "INP",
            ProblemKind::Enp => "ENP",
            ProblemKind::PotentialFlow { .. } => "PotentialFlow",
            ProblemKind::Elastostatic { .. } => "Elastostatic",
            ProblemKind::Helmholtz { .. } => "Helmholtz",
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            ProblemKind::Elastostatic { .. } => Shape::Pair,
            ProblemKind::Helmholtz { .. } => Shape::Complex,
            _ => Shape::Real,
        }
    }

    pub fn form(&self) -> SystemForm {
        match self {
            ProblemKind::Elastostatic { .. } => SystemForm::FirstKind,
            _ => SystemForm::SecondKind,
        }
    }

    /// Smallest admissible Galerkin quadrature size for order `n`.
    pub fn min_galerkin_quadrature(&self, n: usize) -> usize {
        match self {
            ProblemKind::Helmholtz { .. } => (4 * n).max(512),
            _ => (16 * n).max(512),
        }
    }
}

pub fn default_eta(k: f64) -> f64 {
    if k > 0.5 {
        k
    } else {
        1.0
    }
}

/// Number of scalar coefficient blocks and their field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Real,
    Complex,
    Pair,
}

impl Shape {
    /// Stored length of an order-`n` vector of this shape.
    pub fn len(&self, n: usize) -> usize {
        match self {
            Shape::Real => 2 * n + 1,
            _ => 2 * (2 * n + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemForm {
    /// `(I − M)φ = f̃`
    SecondKind,
    /// `Mφ = f̃`
    FirstKind,
}

/// Boundary data of a problem, as functions of the curve parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// Problems whose data follow from their parameters.
    None,
    Scalar(CoeffVec),
    Displacement([CoeffVec; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BieProblem {
    pub kind: ProblemKind,
    pub boundary: BoundaryCurve,
    pub data: BoundaryData,
}

impl BieProblem {
    pub fn new(kind: ProblemKind, boundary: BoundaryCurve, data: BoundaryData) -> Result<Self> {
        kind.validate()?;
        let ok = matches!(
            (&kind, &data),
            (ProblemKind::Idp | ProblemKind::Edp | ProblemKind::Inp | ProblemKind::Enp, BoundaryData::Scalar(_))
                | (ProblemKind::PotentialFlow { .. } | ProblemKind::Helmholtz { .. }, BoundaryData::None)
                | (ProblemKind::Elastostatic { .. }, BoundaryData::Displacement(_))
        );
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{} problem cannot take boundary data {:?}",
                kind.name(),
                std::mem::discriminant(&data)
            )));
        }
        Ok(Self { kind, boundary, data })
    }

    pub fn laplace(kind: ProblemKind, boundary: BoundaryCurve, f: CoeffVec) -> Result<Self> {
        Self::new(kind, boundary, BoundaryData::Scalar(f))
    }

    pub fn potential_flow(boundary: BoundaryCurve, v0: f64) -> Result<Self> {
        Self::new(ProblemKind::PotentialFlow { v0 }, boundary, BoundaryData::None)
    }

    pub fn helmholtz(boundary: BoundaryCurve, k: f64, d: [f64; 2]) -> Result<Self> {
        Self::new(ProblemKind::helmholtz(k, d), boundary, BoundaryData::None)
    }

    pub fn elastostatic(boundary: BoundaryCurve, g: f64, nu: f64, v: [CoeffVec; 2]) -> Result<Self> {
        Self::new(ProblemKind::Elastostatic { g, nu }, boundary, BoundaryData::Displacement(v))
    }
}

/// Coefficient vector of a density or right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldCoeffs {
    Real(CoeffVec),
    Complex(ComplexCoeffVec),
    Pair([CoeffVec; 2]),
}

impl FieldCoeffs {
    pub fn zeros(shape: Shape, n: usize) -> Self {
        match shape {
            Shape::Real => FieldCoeffs::Real(CoeffVec::zeros(n)),
            Shape::Complex => FieldCoeffs::Complex(ComplexCoeffVec::zeros(n)),
            Shape::Pair => FieldCoeffs::Pair([CoeffVec::zeros(n), CoeffVec::zeros(n)]),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            FieldCoeffs::Real(_) => Shape::Real,
            FieldCoeffs::Complex(_) => Shape::Complex,
            FieldCoeffs::Pair(_) => Shape::Pair,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            FieldCoeffs::Real(c) => c.order(),
            FieldCoeffs::Complex(c) => c.order(),
            FieldCoeffs::Pair(p) => p[0].order(),
        }
    }

    /// Flat layout: real part over imaginary part, first component over second.
    pub fn stacked(&self) -> Vec<f64> {
        match self {
            FieldCoeffs::Real(c) => c.as_slice().to_vec(),
            FieldCoeffs::Complex(c) => c.stacked(),
            FieldCoeffs::Pair([a, b]) => {
                let mut v = a.as_slice().to_vec();
                v.extend_from_slice(b.as_slice());
                v
            }
        }
    }

    pub fn from_stacked(shape: Shape, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != shape.len(n) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients for order {n}, got {}",
                shape.len(n),
                data.len()
            )));
        }
        let m = 2 * n + 1;
        Ok(match shape {
            Shape::Real => FieldCoeffs::Real(CoeffVec::new(n, data.to_vec())?),
            Shape::Complex => FieldCoeffs::Complex(ComplexCoeffVec::new(
                CoeffVec::new(n, data[..m].to_vec())?,
                CoeffVec::new(n, data[m..].to_vec())?,
            )?),
            Shape::Pair => FieldCoeffs::Pair([
                CoeffVec::new(n, data[..m].to_vec())?,
                CoeffVec::new(n, data[m..].to_vec())?,
            ]),
        })
    }

    pub fn norm(&self) -> f64 {
        self.stacked().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn to_real_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.stacked())
    }

    fn to_complex_vector(&self) -> DVector<Complex64> {
        match self {
            FieldCoeffs::Complex(c) => DVector::from_vec(c.to_complex()),
            other => DVector::from_iterator(
                other.stacked().len(),
                other.stacked().into_iter().map(|v| Complex64::new(v, 0.0)),
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// Node operators

/// Dense operator `M` on the uniform nodes, quadrature weights included,
/// row-major. Pair problems use `dim = 2Q` with component-major blocks.
#[derive(Debug, Clone)]
pub enum NodeOperator {
    Real { dim: usize, data: Vec<f64> },
    Complex { dim: usize, data: Vec<Complex64> },
}

fn check_power_of_two(q: usize, need: usize) -> Result<()> {
    if q < need || !q.is_power_of_two() {
        return Err(Error::InsufficientSamples { got: q, need });
    }
    Ok(())
}

fn laplace_operator_kind(kind: &ProblemKind) -> Option<(KernelKind, f64)> {
    match kind {
        ProblemKind::Idp => Some((KernelKind::LaplaceDouble, 2.0)),
        ProblemKind::Edp => Some((KernelKind::LaplaceDoubleModified, -2.0)),
        ProblemKind::Inp => Some((KernelKind::LaplaceDoubleAdjoint, -2.0)),
        ProblemKind::Enp | ProblemKind::PotentialFlow { .. } => Some((KernelKind::LaplaceDoubleAdjoint, 2.0)),
        _ => None,
    }
}

/// Builds `M` on `q` uniform nodes: trapezoid weights for smooth kernels,
/// periodic log weights for the Helmholtz single layer and Navier `u*`.
pub fn node_operator(kind: &ProblemKind, nodes: &BoundaryNodes) -> NodeOperator {
    let q = nodes.len();
    let w = 2.0 * PI / q as f64;
    if let Some((kk, sign)) = laplace_operator_kind(kind) {
        let mut data = vec![0.0; q * q];
        data.par_chunks_mut(q).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = sign * w * laplace_node(kk, nodes, i, j);
            }
        });
        return NodeOperator::Real { dim: q, data };
    }
    let r = log_weights(q);
    match *kind {
        ProblemKind::Helmholtz { k, eta, .. } => {
            let mut data = vec![Complex64::new(0.0, 0.0); q * q];
            data.par_chunks_mut(q).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    let sp = helmholtz_split(nodes, k, eta, i, j);
                    *v = -2.0 * (sp.log * r[(i + q - j) % q] + sp.smooth * w);
                }
            });
            NodeOperator::Complex { dim: q, data }
        }
        ProblemKind::Elastostatic { g, nu } => {
            let dim = 2 * q;
            let mut data = vec![0.0; dim * dim];
            data.par_chunks_mut(dim).enumerate().for_each(|(row_index, row)| {
                let (a, i) = (row_index / q, row_index % q);
                for j in 0..q {
                    let sp = navier_u_split(nodes, g, nu, i, j);
                    let rw = r[(i + q - j) % q];
                    for b in 0..2 {
                        row[b * q + j] = sp.log[a][b] * rw + sp.smooth[a][b] * w;
                    }
                }
            });
            NodeOperator::Real { dim, data }
        }
        _ => unreachable!("laplace kinds handled above"),
    }
}

// ---------------------------------------------------------------------------
// Galerkin projection

/// `P · N · E` for a `q × q` node block given row by row: `E` synthesizes
/// order-`n` coefficients on the nodes, `P` projects back with row weights
/// `1/(2π)` (constant) and `1/π` (harmonics) times the trapezoid weight.
fn project_block<F>(q: usize, n: usize, fill: F) -> DMatrix<Complex64>
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let m = 2 * n + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut ne = vec![zero; q * m];
    ne.par_chunks_mut(m)
        .enumerate()
        .for_each_init(|| vec![zero; q], |buf, (i, out)| {
            fill(i, buf);
            let (c, s) = trig_moments(buf, n);
            out[0] = c[0];
            out[1..=n].copy_from_slice(&c[1..=n]);
            out[n + 1..].copy_from_slice(&s[1..=n]);
        });
    let cols: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|col| {
            let mut buf: Vec<Complex64> = (0..q).map(|i| ne[i * m + col]).collect();
            let (c, s) = trig_moments(&mut buf, n);
            let w0 = 1.0 / q as f64;
            let w = 2.0 / q as f64;
            let mut out = vec![zero; m];
            out[0] = c[0] * w0;
            for k in 1..=n {
                out[k] = c[k] * w;
                out[n + k] = s[k] * w;
            }
            out
        })
        .collect();
    DMatrix::from_fn(m, m, |r, c| cols[c][r])
}

fn galerkin_from_nodes(op: &NodeOperator, q: usize, n: usize) -> SystemMatrix {
    match op {
        NodeOperator::Complex { dim, data } => SystemMatrix::Complex(project_block(q, n, |i, row| {
            row.copy_from_slice(&data[i * dim..(i + 1) * dim]);
        })),
        NodeOperator::Real { dim, data } => {
            let blocks = dim / q;
            let m = 2 * n + 1;
            let mut out = DMatrix::<f64>::zeros(blocks * m, blocks * m);
            for a in 0..blocks {
                for b in 0..blocks {
                    let block = project_block(q, n, |i, row| {
                        let src = &data[(a * q + i) * dim + b * q..(a * q + i) * dim + (b + 1) * q];
                        for (dst, &v) in row.iter_mut().zip(src) {
                            *dst = Complex64::new(v, 0.0);
                        }
                    });
                    for r in 0..m {
                        for c in 0..m {
                            out[(a * m + r, b * m + c)] = block[(r, c)].re;
                        }
                    }
                }
            }
            SystemMatrix::Real(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl SystemMatrix {
    pub fn dim(&self) -> usize {
        match self {
            SystemMatrix::Real(m) => m.nrows(),
            SystemMatrix::Complex(m) => m.nrows(),
        }
    }

    /// Largest entry modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &SystemMatrix) -> f64 {
        match (self, other) {
            (SystemMatrix::Real(a), SystemMatrix::Real(b)) => (a - b).amax(),
            (SystemMatrix::Complex(a), SystemMatrix::Complex(b)) => {
                (a - b).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
            }
            _ => f64::INFINITY,
        }
    }
}

/// `I + 2𝓓'` annihilates the equilibrium density, so interior Neumann solves
/// use `M − 2∫· ds` instead. The extra rank-one term pins `∫φ ds = 0`; for
/// compatible data (`∫f̃ ds = 0`) the solution also solves the plain equation.
fn add_normalization(kind: &ProblemKind, nodes: &BoundaryNodes, op: &mut NodeOperator) {
    let (ProblemKind::Inp, NodeOperator::Real { dim, data }) = (kind, op) else {
        return;
    };
    let w = 2.0 * PI / *dim as f64;
    data.par_chunks_mut(*dim).for_each(|row| {
        for (v, s) in row.iter_mut().zip(&nodes.speed) {
            *v -= 2.0 * w * s;
        }
    });
}

/// Operator `M` used for solving: [`node_operator`] plus the interior
/// Neumann normalization.
pub fn solve_node_operator(kind: &ProblemKind, nodes: &BoundaryNodes) -> NodeOperator {
    let mut op = node_operator(kind, nodes);
    add_normalization(kind, nodes, &mut op);
    op
}

/// Galerkin matrix `M` of order `n` from a `q`-node quadrature.
pub fn assemble_operator(kind: &ProblemKind, boundary: &BoundaryCurve, n: usize, q: usize) -> Result<SystemMatrix> {
    kind.validate()?;
    check_power_of_two(q, kind.min_galerkin_quadrature(n).next_power_of_two())?;
    let nodes = boundary.nodes(q)?;
    let op = node_operator(kind, &nodes);
    Ok(galerkin_from_nodes(&op, q, n))
}

/// Galerkin matrix of [`solve_node_operator`]; equal to [`assemble_operator`]
/// except for interior Neumann problems.
pub fn assemble_solve_operator(kind: &ProblemKind, boundary: &BoundaryCurve, n: usize, q: usize) -> Result<SystemMatrix> {
    kind.validate()?;
    check_power_of_two(q, kind.min_galerkin_quadrature(n).next_power_of_two())?;
    let nodes = boundary.nodes(q)?;
    let op = solve_node_operator(kind, &nodes);
    Ok(galerkin_from_nodes(&op, q, n))
}

/// Assembled Galerkin system.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub n: usize,
    pub kind: ProblemKind,
    pub form: SystemForm,
    pub matrix: SystemMatrix,
    pub rhs: FieldCoeffs,
}

pub fn assemble_galerkin(p: &BieProblem, n: usize, q: usize) -> Result<GalerkinSystem> {
    let matrix = assemble_solve_operator(&p.kind, &p.boundary, n, q)?;
    let rhs = build_rhs(p, n)?;
    Ok(GalerkinSystem {
        n,
        kind: p.kind,
        form: p.kind.form(),
        matrix,
        rhs,
    })
}

/// Quadrature size used for right-hand sides that are not band-limited.
pub fn rhs_quadrature(n: usize) -> usize {
    default_quadrature_size(n).max(1024)
}

/// Applies the discrete operator (`I − M` or `M`) to a coefficient vector.
pub fn apply_operator(matrix: &SystemMatrix, form: SystemForm, x: &FieldCoeffs) -> Result<FieldCoeffs> {
    let n = x.order();
    if x.shape().len(n) != matrix.dim() * if matches!(matrix, SystemMatrix::Complex(_)) { 2 } else { 1 } {
        return Err(Error::ShapeMismatch(format!(
            "operator of dimension {} applied to {} coefficients",
            matrix.dim(),
            x.shape().len(n)
        )));
    }
    match matrix {
        SystemMatrix::Real(m) => {
            let v = x.to_real_vector();
            let mut y = m * &v;
            if form == SystemForm::SecondKind {
                y = &v - y;
            }
            FieldCoeffs::from_stacked(x.shape(), n, y.as_slice())
        }
        SystemMatrix::Complex(m) => {
            let v = x.to_complex_vector();
            let mut y = m * &v;
            if form == SystemForm::SecondKind {
                y = &v - y;
            }
            Ok(FieldCoeffs::Complex(ComplexCoeffVec::from_complex(n, y.as_slice())?))
        }
    }
}

// ---------------------------------------------------------------------------
// Right-hand sides

/// Nodal values of `f̃` on `q` uniform nodes; pairs are stacked by component.
#[derive(Debug, Clone, PartialEq)]
pub enum Nodal {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Nodal {
    pub fn len(&self) -> usize {
        match self {
            Nodal::Real(v) => v.len(),
            Nodal::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn laplace_rhs_factor(kind: &ProblemKind) -> f64 {
    match kind {
        ProblemKind::Idp | ProblemKind::Enp | ProblemKind::PotentialFlow { .. } => -2.0,
        _ => 2.0,
    }
}

/// `(½I + 𝓣)v` at the nodes by the subtracted trapezoid rule.
pub fn navier_double_layer_rhs(nodes: &BoundaryNodes, nu: f64, v: &[CoeffVec; 2]) -> Vec<[f64; 2]> {
    let q = nodes.len();
    let w = 2.0 * PI / q as f64;
    let v1 = v[0].sample_uniform(q);
    let v2 = v[1].sample_uniform(q);
    let d1 = v[0].derivative().sample_uniform(q);
    let d2 = v[1].derivative().sample_uniform(q);
    let vv: Vec<[f64; 2]> = v1.iter().zip(&v2).map(|(&a, &b)| [a, b]).collect();
    let dv: Vec<[f64; 2]> = d1.iter().zip(&d2).map(|(&a, &b)| [a, b]).collect();
    (0..q)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0; 2];
            for j in 0..q {
                let c = navier_t_subtracted(nodes, nu, &vv, &dv, i, j);
                acc[0] += w * c[0];
                acc[1] += w * c[1];
            }
            acc
        })
        .collect()
}

/// `f̃` sampled on the nodes.
pub fn nodal_rhs(p: &BieProblem, nodes: &BoundaryNodes) -> Result<Nodal> {
    let q = nodes.len();
    match (&p.kind, &p.data) {
        (kind, BoundaryData::Scalar(f)) => {
            let s = laplace_rhs_factor(kind);
            Ok(Nodal::Real(f.sample_uniform(q).into_iter().map(|v| s * v).collect()))
        }
        (ProblemKind::PotentialFlow { v0 }, _) => {
            // f = −v0 n₁, f̃ = −2f
            Ok(Nodal::Real(nodes.normal.iter().map(|nrm| 2.0 * v0 * nrm[0]).collect()))
        }
        (ProblemKind::Helmholtz { k, d, .. }, _) => Ok(Nodal::Complex(
            nodes
                .pos
                .iter()
                .map(|x| -2.0 * Complex64::from_polar(1.0, k * (x[0] * d[0] + x[1] * d[1])))
                .collect(),
        )),
        (ProblemKind::Elastostatic { nu, .. }, BoundaryData::Displacement(v)) => {
            let r = navier_double_layer_rhs(nodes, *nu, v);
            let mut out: Vec<f64> = r.iter().map(|c| c[0]).collect();
            out.extend(r.iter().map(|c| c[1]));
            Ok(Nodal::Real(out))
        }
        _ => Err(Error::InvalidParameter(format!("{} problem without data", p.kind.name()))),
    }
}

/// Order-`n` coefficients of `f̃`.
pub fn build_rhs(p: &BieProblem, n: usize) -> Result<FieldCoeffs> {
    p.kind.validate()?;
    if let BoundaryData::Scalar(f) = &p.data {
        return Ok(FieldCoeffs::Real(f.resize(n).scale(laplace_rhs_factor(&p.kind))));
    }
    let q = rhs_quadrature(n);
    let nodes = p.boundary.nodes(q)?;
    Ok(match nodal_rhs(p, &nodes)? {
        Nodal::Real(v) if p.kind.shape() == Shape::Pair => {
            FieldCoeffs::Pair([project(&v[..q], n)?, project(&v[q..], n)?])
        }
        Nodal::Real(v) => FieldCoeffs::Real(project(&v, n)?),
        Nodal::Complex(v) => FieldCoeffs::Complex(ComplexCoeffVec::project(&v, n)?),
    })
}

// ---------------------------------------------------------------------------
// Dense solves

/// LU factorization with a 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct Factorized<T: ComplexField<RealField = f64>> {
    matrix: DMatrix<T>,
    lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

fn norm1<T: ComplexField<RealField = f64>>(v: &DVector<T>) -> f64 {
    v.iter().map(|z| z.clone().modulus()).sum()
}

impl<T: ComplexField<RealField = f64>> Factorized<T> {
    /// Factorizes `a`, failing when the condition estimate exceeds
    /// [`MAX_CONDITION`].
    pub fn new(a: DMatrix<T>) -> Result<Self> {
        let lu = LU::new(a.clone());
        let mut f = Self {
            matrix: a,
            lu,
            condition: f64::INFINITY,
        };
        f.condition = f.estimate_condition();
        if !(f.condition <= MAX_CONDITION) {
            return Err(Error::DiscretizationSingular {
                condition: f.condition,
            });
        }
        Ok(f)
    }

    /// Solve with one step of iterative refinement.
    pub fn solve(&self, b: &DVector<T>) -> Result<DVector<T>> {
        let mut x = self.lu.solve(b).ok_or(Error::DiscretizationSingular {
            condition: f64::INFINITY,
        })?;
        let r = b - &self.matrix * &x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        Ok(x)
    }

    fn solve_adjoint(&self, b: &DVector<T>) -> Option<DVector<T>> {
        // A = Pᵀ L U, so Aᴴ x = b ⇔ Uᴴ Lᴴ (P x) = b.
        let w = self.lu.u().adjoint().solve_lower_triangular(b)?;
        let mut z = self.lu.l().adjoint().solve_upper_triangular(&w)?;
        self.lu.p().inv_permute_rows(&mut z);
        Some(z)
    }

    /// Hager-Higham estimate of `‖A‖₁‖A⁻¹‖₁`.
    fn estimate_condition(&self) -> f64 {
        let n = self.matrix.nrows();
        if n == 0 {
            return 1.0;
        }
        let norm_a = (0..n)
            .map(|j| self.matrix.column(j).iter().map(|z| z.clone().modulus()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut x = DVector::from_element(n, T::from_real(1.0 / n as f64));
        let mut est = 0.0;
        for iter in 0..5 {
            let Some(y) = self.lu.solve(&x) else {
                return f64::INFINITY;
            };
            let new_est = norm1(&y);
            if !new_est.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let xi = y.map(|z| {
                let m = z.clone().modulus();
                if m == 0.0 {
                    T::one()
                } else {
                    z.unscale(m)
                }
            });
            let Some(z) = self.solve_adjoint(&xi) else {
                return f64::INFINITY;
            };
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.clone().modulus()))
                .fold((0, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            let ztx = z.dotc(&x).real();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x = DVector::zeros(n);
            x[jmax] = T::one();
        }
        // Alternating test vector guards against unlucky starts.
        let denom = (n.max(2) - 1) as f64;
        let alt = DVector::from_fn(n, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            T::from_real(s * (1.0 + i as f64 / denom))
        });
        if let Some(y) = self.lu.solve(&alt) {
            est = est.max(2.0 * norm1(&y) / (3.0 * n as f64));
        }
        norm_a * est
    }
}

/// Factorized discrete operator (`I − M` or `M`) for repeated solves.
#[derive(Debug, Clone)]
pub enum SystemSolver {
    Real { shape: Shape, lu: Factorized<f64> },
    Complex { lu: Factorized<Complex64> },
}

impl SystemSolver {
    pub fn new(matrix: &SystemMatrix, form: SystemForm, shape: Shape) -> Result<Self> {
        Ok(match matrix {
            SystemMatrix::Real(m) => {
                let a = match form {
                    SystemForm::SecondKind => DMatrix::identity(m.nrows(), m.ncols()) - m,
                    SystemForm::FirstKind => m.clone(),
                };
                SystemSolver::Real {
                    shape,
                    lu: Factorized::new(a)?,
                }
            }
            SystemMatrix::Complex(m) => {
                let a = match form {
                    SystemForm::SecondKind => DMatrix::identity(m.nrows(), m.ncols()) - m,
                    SystemForm::FirstKind => m.clone(),
                };
                SystemSolver::Complex {
                    lu: Factorized::new(a)?,
                }
            }
        })
    }

    pub fn condition(&self) -> f64 {
        match self {
            SystemSolver::Real { lu, .. } => lu.condition,
            SystemSolver::Complex { lu } => lu.condition,
        }
    }

    pub fn solve(&self, rhs: &FieldCoeffs) -> Result<FieldCoeffs> {
        let n = rhs.order();
        match self {
            SystemSolver::Real { shape, lu } => {
                if rhs.shape() != *shape {
                    return Err(Error::ShapeMismatch("right-hand side shape".into()));
                }
                let x = lu.solve(&rhs.to_real_vector())?;
                FieldCoeffs::from_stacked(*shape, n, x.as_slice())
            }
            SystemSolver::Complex { lu } => {
                if rhs.shape() != Shape::Complex {
                    return Err(Error::ShapeMismatch("right-hand side shape".into()));
                }
                let x = lu.solve(&rhs.to_complex_vector())?;
                Ok(FieldCoeffs::Complex(ComplexCoeffVec::from_complex(n, x.as_slice())?))
            }
        }
    }
}

/// Density with its relative residual and condition estimate.
#[derive(Debug, Clone)]
pub struct Solution {
    pub density: FieldCoeffs,
    /// `‖Aφ − f̃‖₂ / ‖f̃‖₂` (absolute when `f̃ = 0`).
    pub residual: f64,
    pub condition: f64,
}

pub fn relative_residual(matrix: &SystemMatrix, form: SystemForm, x: &FieldCoeffs, rhs: &FieldCoeffs) -> Result<f64> {
    let ax = apply_operator(matrix, form, x)?.stacked();
    let b = rhs.stacked();
    let r = ax.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let nb = rhs.norm();
    Ok(if nb > 0.0 { r / nb } else { r })
}

pub fn solve_galerkin(sys: &GalerkinSystem) -> Result<Solution> {
    let solver = SystemSolver::new(&sys.matrix, sys.form, sys.kind.shape())?;
    let density = solver.solve(&sys.rhs)?;
    let residual = relative_residual(&sys.matrix, sys.form, &density, &sys.rhs)?;
    Ok(Solution {
        density,
        residual,
        condition: solver.condition(),
    })
}

// ---------------------------------------------------------------------------
// Nyström

/// Collocation solve of the problem on `q` uniform nodes; returns the
/// density at the nodes (pairs stacked by component).
pub fn solve_nystrom(p: &BieProblem, q: usize) -> Result<Nodal> {
    p.kind.validate()?;
    check_power_of_two(q, 256)?;
    let nodes = p.boundary.nodes(q)?;
    let op = solve_node_operator(&p.kind, &nodes);
    let rhs = nodal_rhs(p, &nodes)?;
    let form = p.kind.form();
    match (op, rhs) {
        (NodeOperator::Real { dim, data }, Nodal::Real(b)) => {
            let m = DMatrix::from_row_slice(dim, dim, &data);
            let a = match form {
                SystemForm::SecondKind => DMatrix::identity(dim, dim) - m,
                SystemForm::FirstKind => m,
            };
            let x = Factorized::new(a)?.solve(&DVector::from_vec(b))?;
            Ok(Nodal::Real(x.as_slice().to_vec()))
        }
        (NodeOperator::Complex { dim, data }, Nodal::Complex(b)) => {
            let m = DMatrix::from_row_slice(dim, dim, &data);
            let a = DMatrix::identity(dim, dim) - m;
            let x = Factorized::new(a)?.solve(&DVector::from_vec(b))?;
            Ok(Nodal::Complex(x.as_slice().to_vec()))
        }
        _ => unreachable!("operator and right-hand side fields agree"),
    }
}

/// Trigonometric interpolant of nodal values, order `q/2 − 1`.
pub fn interpolate_nodal(values: &Nodal) -> Result<FieldCoeffs> {
    let q = values.len();
    let n = (q / 2).saturating_sub(1);
    match values {
        Nodal::Real(v) => Ok(FieldCoeffs::Real(project(v, n)?)),
        Nodal::Complex(v) => Ok(FieldCoeffs::Complex(ComplexCoeffVec::project(v, n)?)),
    }
}

/// Max-norm residual of a scalar second-kind density on an independent
/// `q`-node grid, relative to `max |f̃|`.
pub fn fine_grid_residual(p: &BieProblem, density: &FieldCoeffs, q: usize) -> Result<f64> {
    p.kind.validate()?;
    check_power_of_two(q, 256)?;
    let nodes = p.boundary.nodes(q)?;
    let rhs = nodal_rhs(p, &nodes)?;
    let (op, phi): (NodeOperator, Vec<Complex64>) = match (density, p.kind.shape()) {
        (FieldCoeffs::Real(c), Shape::Real) => (
            solve_node_operator(&p.kind, &nodes),
            c.sample_uniform(q).into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        ),
        (FieldCoeffs::Complex(c), Shape::Complex) => (solve_node_operator(&p.kind, &nodes), c.sample_uniform(q)),
        _ => return Err(Error::ShapeMismatch("fine-grid residual needs a scalar density of the problem's shape".into())),
    };
    let b: Vec<Complex64> = match rhs {
        Nodal::Real(v) => v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        Nodal::Complex(v) => v,
    };
    let row = |i: usize| -> Complex64 {
        let m_phi: Complex64 = match &op {
            NodeOperator::Real { data, .. } => data[i * q..(i + 1) * q].iter().zip(&phi).map(|(m, x)| x * *m).sum(),
            NodeOperator::Complex { data, .. } => data[i * q..(i + 1) * q].iter().zip(&phi).map(|(m, x)| m * x).sum(),
        };
        phi[i] - m_phi - b[i]
    };
    let worst = (0..q).into_par_iter().map(|i| row(i).norm()).reduce(|| 0.0, f64::max);
    let scale = b.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Largest pointwise residual of `𝓤t − (½I + 𝓣)v` over 16 node-aligned
/// collocation points, relative to the largest `|(½I + 𝓣)v|` there.
pub fn navier_residual(
    boundary: &BoundaryCurve,
    g: f64,
    nu: f64,
    v: &[CoeffVec; 2],
    t: &[CoeffVec; 2],
    q: usize,
) -> Result<f64> {
    validate_elastic(g, nu)?;
    check_power_of_two(q, 256)?;
    let nodes = boundary.nodes(q)?;
    let rhs = navier_double_layer_rhs(&nodes, nu, v);
    let t1 = t[0].sample_uniform(q);
    let t2 = t[1].sample_uniform(q);
    let r = log_weights(q);
    let w = 2.0 * PI / q as f64;
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for p in 0..16 {
        let i = p * q / 16;
        let mut ut = [0.0; 2];
        for j in 0..q {
            let sp = navier_u_split(&nodes, g, nu, i, j);
            let rw = r[(i + q - j) % q];
            for a in 0..2 {
                let k0 = sp.log[a][0] * rw + sp.smooth[a][0] * w;
                let k1 = sp.log[a][1] * rw + sp.smooth[a][1] * w;
                ut[a] += k0 * t1[j] + k1 * t2[j];
            }
        }
        worst = worst.max((ut[0] - rhs[i][0]).hypot(ut[1] - rhs[i][1]));
        scale = scale.max(rhs[i][0].hypot(rhs[i][1]));
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}
