//! Random densities, boundary sets, dataset generation and persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::assembly::{
    apply_operator, assemble_operator, assemble_solve_operator, build_rhs, rhs_quadrature, BieProblem, FieldCoeffs, ProblemKind, Shape,
    SystemForm, SystemSolver,
};
use crate::boundary::{sample_boundary, BoundaryCurve, BoundarySampleParams, Rejection, VALIDATION_GRID};
use crate::error::{Error, Result};
use crate::kernels::validate_elastic;
use crate::trigseries::{project, CoeffVec};

pub const DATASET_MAGIC: &[u8; 4] = b"BIED";
pub const BOUNDARY_MAGIC: &[u8; 4] = b"BIEB";
pub const FORMAT_VERSION: u64 = 1;

/// Boundary decay rates used for boundary sets, in equal shares.
pub const RHO_GRID: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

// ---------------------------------------------------------------------------
// Samplers

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySampleParams {
    pub n: usize,
    /// Harmonic `k` has variance `k^{-m}`.
    pub m: f64,
    pub seed: u64,
}

/// `c₀ ~ N(0,1)`, `a_k, b_k ~ N(0, k^{-m})`, drawn in layout order.
pub fn sample_density(p: &DensitySampleParams) -> Result<CoeffVec> {
    if !(p.m >= 0.0) {
        return Err(Error::InvalidParameter(format!("decay exponent m = {} must be ≥ 0", p.m)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.n;
    let mut d = vec![0.0; 2 * n + 1];
    d[0] = StandardNormal.sample(&mut rng);
    for block in 0..2 {
        for k in 1..=n {
            let z: f64 = StandardNormal.sample(&mut rng);
            d[block * n + k] = z * (k as f64).powf(-0.5 * p.m);
        }
    }
    CoeffVec::new(n, d)
}

/// `count` densities with seeds derived from `seed`.
pub fn sample_densities(count: usize, n: usize, m: f64, seed: u64) -> Result<Vec<CoeffVec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample_density(&DensitySampleParams { n, m, seed: rng.random() }))
        .collect()
}

/// `count` values uniform on `[lo, hi)`.
pub fn sample_uniform_values(count: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(lo..hi)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStats {
    pub attempts: usize,
    pub accepted: usize,
    pub rejected_degenerate: usize,
    pub rejected_not_simple: usize,
    pub rejected_curvature: usize,
    /// Maximum `|κ|` of each accepted curve.
    pub max_curvatures: Vec<f64>,
}

impl BoundaryStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    /// Counts of accepted curves per unit-width curvature bin `[i, i+1)`.
    pub fn curvature_histogram(&self, cap: f64) -> Vec<usize> {
        let bins = cap.ceil().max(1.0) as usize;
        let mut h = vec![0; bins];
        for &k in &self.max_curvatures {
            h[(k as usize).min(bins - 1)] += 1;
        }
        h
    }
}

/// Attempts allowed before a low acceptance rate aborts generation.
pub const ACCEPTANCE_WINDOW: usize = 100_000;
/// Default abort threshold for the cumulative acceptance rate.
pub const MIN_ACCEPTANCE_RATE: f64 = 0.01;

/// Draws `count` accepted boundaries of order `n`, split evenly over
/// `rhos` (earlier rates take the remainder). Seeds come from one stream
/// per rate, so the output depends only on the arguments.
pub fn generate_boundaries(
    count: usize,
    n: usize,
    rhos: &[f64],
    curvature_cap: f64,
    seed: u64,
) -> Result<(Vec<BoundaryCurve>, BoundaryStats)> {
    generate_boundaries_with(count, n, rhos, curvature_cap, seed, MIN_ACCEPTANCE_RATE)
}

/// As [`generate_boundaries`] with an explicit abort threshold on the
/// cumulative acceptance rate, checked once [`ACCEPTANCE_WINDOW`] attempts
/// have been made.
pub fn generate_boundaries_with(
    count: usize,
    n: usize,
    rhos: &[f64],
    curvature_cap: f64,
    seed: u64,
    min_acceptance: f64,
) -> Result<(Vec<BoundaryCurve>, BoundaryStats)> {
    if !(0.0..1.0).contains(&min_acceptance) {
        return Err(Error::InvalidParameter(format!(
            "minimum acceptance rate {min_acceptance} outside [0, 1)"
        )));
    }
    if rhos.is_empty() {
        return Err(Error::Empty("decay rates"));
    }
    let mut stats = BoundaryStats {
        attempts: 0,
        accepted: 0,
        rejected_degenerate: 0,
        rejected_not_simple: 0,
        rejected_curvature: 0,
        max_curvatures: Vec::with_capacity(count),
    };
    let mut out = Vec::with_capacity(count);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    for (i, &rho) in rhos.iter().enumerate() {
        let share = count / rhos.len() + usize::from(i < count % rhos.len());
        let mut stream = ChaCha8Rng::seed_from_u64(master.random());
        let mut got = 0;
        while got < share {
            let p = BoundarySampleParams {
                n,
                rho,
                curvature_cap,
                seed: stream.random(),
            };
            p.validate()?;
            stats.attempts += 1;
            match sample_boundary(&p) {
                Ok(b) => {
                    stats.max_curvatures.push(b.max_abs_curvature(VALIDATION_GRID)?);
                    out.push(b);
                    got += 1;
                    stats.accepted += 1;
                }
                Err(Rejection::Degenerate) => stats.rejected_degenerate += 1,
                Err(Rejection::NotSimple) => stats.rejected_not_simple += 1,
                Err(Rejection::CurvatureExceeded(_)) => stats.rejected_curvature += 1,
            }
            if stats.attempts >= ACCEPTANCE_WINDOW && stats.acceptance_rate() < min_acceptance {
                return Err(Error::InvalidParameter(format!(
                    "acceptance rate {:.4}% after {} attempts (rho = {rho}, cap = {curvature_cap})",
                    100.0 * stats.acceptance_rate(),
                    stats.attempts
                )));
            }
        }
    }
    Ok((out, stats))
}

// ---------------------------------------------------------------------------
// Records

/// Problem family of a dataset, without per-record parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemFamily {
    Idp,
    Edp,
    Inp,
    Enp,
    PotentialFlow,
    Elastostatic,
    Helmholtz,
}

impl ProblemFamily {
    pub const ALL: [ProblemFamily; 7] = [
        ProblemFamily::Idp,
        ProblemFamily::Edp,
        ProblemFamily::Inp,
        ProblemFamily::Enp,
        ProblemFamily::PotentialFlow,
        ProblemFamily::Elastostatic,
        ProblemFamily::Helmholtz,
    ];

    pub fn tag(&self) -> u64 {
        match self {
            ProblemFamily::Idp => 1,
            ProblemFamily::Edp => 2,
            ProblemFamily::Inp => 3,
            ProblemFamily::Enp => 4,
            ProblemFamily::PotentialFlow => 5,
            ProblemFamily::Elastostatic => 6,
            ProblemFamily::Helmholtz => 7,
        }
    }

    pub fn from_tag(tag: u64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| Error::Format(format!("unknown problem tag {tag}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemFamily::Idp => "IDP",
            ProblemFamily::Edp => "EDP",
            ProblemFamily::Inp => "INP",
            ProblemFamily::Enp => "ENP",
            ProblemFamily::PotentialFlow => "PotentialFlow",
            ProblemFamily::Elastostatic => "Elastostatic",
            ProblemFamily::Helmholtz => "Helmholtz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem family '{s}'")))
    }

    pub fn of(kind: &ProblemKind) -> Self {
        match kind {
            ProblemKind::Idp => ProblemFamily::Idp,
            ProblemKind::Edp => ProblemFamily::Edp,
            ProblemKind::Inp => ProblemFamily::Inp,
            ProblemKind::Enp => ProblemFamily::Enp,
            ProblemKind::PotentialFlow { .. } => ProblemFamily::PotentialFlow,
            ProblemKind::Elastostatic { .. } => ProblemFamily::Elastostatic,
            ProblemKind::Helmholtz { .. } => ProblemFamily::Helmholtz,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            ProblemFamily::Elastostatic => Shape::Pair,
            ProblemFamily::Helmholtz => Shape::Complex,
            _ => Shape::Real,
        }
    }

    pub fn components(&self) -> usize {
        match self.shape() {
            Shape::Real => 1,
            _ => 2,
        }
    }

    /// Per-record parameters: `[v0]`, `[G, ν, a1, b1, a2, b2]`, `[k, η, d1, d2]`.
    pub fn meta_len(&self) -> usize {
        match self {
            ProblemFamily::PotentialFlow => 1,
            ProblemFamily::Elastostatic => 6,
            ProblemFamily::Helmholtz => 4,
            _ => 0,
        }
    }

    /// Problem kind reconstructed from a record's meta block.
    pub fn kind(&self, meta: &[f64]) -> Result<ProblemKind> {
        if meta.len() != self.meta_len() {
            return Err(Error::ShapeMismatch(format!(
                "{} records carry {} meta values, got {}",
                self.name(),
                self.meta_len(),
                meta.len()
            )));
        }
        Ok(match self {
            ProblemFamily::Idp => ProblemKind::Idp,
            ProblemFamily::Edp => ProblemKind::Edp,
            ProblemFamily::Inp => ProblemKind::Inp,
            ProblemFamily::Enp => ProblemKind::Enp,
            ProblemFamily::PotentialFlow => ProblemKind::PotentialFlow { v0: meta[0] },
            ProblemFamily::Elastostatic => ProblemKind::Elastostatic {
                g: meta[0],
                nu: meta[1],
            },
            ProblemFamily::Helmholtz => ProblemKind::Helmholtz {
                k: meta[0],
                eta: meta[1],
                d: [meta[2], meta[3]],
            },
        })
    }
}

/// One `(γ, f̃, φ)` sample. For elastostatics `rhs` holds the boundary
/// displacement and `density` the traction.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub gamma: Vec<f64>,
    pub rhs: Vec<f64>,
    pub density: Vec<f64>,
    pub meta: Vec<f64>,
}

impl DatasetRecord {
    pub fn boundary(&self) -> Result<BoundaryCurve> {
        BoundaryCurve::from_gamma_vec(&self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub family: ProblemFamily,
    pub n_b: usize,
    pub n_f: usize,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn new(family: ProblemFamily, n_b: usize, n_f: usize) -> Self {
        Self {
            family,
            n_b,
            n_f,
            records: Vec::new(),
        }
    }

    pub fn gamma_len(&self) -> usize {
        2 * (2 * self.n_b + 1)
    }

    pub fn field_len(&self) -> usize {
        self.family.shape().len(self.n_f)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn check_record(&self, r: &DatasetRecord) -> Result<()> {
        let ok = r.gamma.len() == self.gamma_len()
            && r.rhs.len() == self.field_len()
            && r.density.len() == self.field_len()
            && r.meta.len() == self.family.meta_len();
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "record lengths ({}, {}, {}, {}) do not match {} with n_b = {}, n_f = {}",
                r.gamma.len(),
                r.rhs.len(),
                r.density.len(),
                r.meta.len(),
                self.family.name(),
                self.n_b,
                self.n_f
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, r: DatasetRecord) -> Result<()> {
        self.check_record(&r)?;
        self.records.push(r);
        Ok(())
    }

    pub fn with_records(&self, records: Vec<DatasetRecord>) -> Self {
        Self {
            family: self.family,
            n_b: self.n_b,
            n_f: self.n_f,
            records,
        }
    }

    pub fn density(&self, r: &DatasetRecord) -> Result<FieldCoeffs> {
        FieldCoeffs::from_stacked(self.family.shape(), self.n_f, &r.density)
    }

    pub fn rhs(&self, r: &DatasetRecord) -> Result<FieldCoeffs> {
        FieldCoeffs::from_stacked(self.family.shape(), self.n_f, &r.rhs)
    }
}

fn common_order(boundaries: &[BoundaryCurve]) -> Result<usize> {
    let n_b = boundaries.first().ok_or(Error::Empty("boundary set"))?.order();
    if boundaries.iter().any(|b| b.order() != n_b) {
        return Err(Error::ShapeMismatch("boundaries of mixed order".into()));
    }
    Ok(n_b)
}

/// `f̃ = (I − M(γ))φ` for every boundary-density pair, boundary-major.
pub fn forward_generate(
    boundaries: &[BoundaryCurve],
    densities: &[CoeffVec],
    kind: ProblemKind,
    n: usize,
    q: usize,
) -> Result<Dataset> {
    let family = ProblemFamily::of(&kind);
    if !matches!(
        family,
        ProblemFamily::Idp | ProblemFamily::Edp | ProblemFamily::Inp | ProblemFamily::Enp
    ) {
        return Err(Error::InvalidParameter(format!(
            "forward generation covers the Laplace families, not {}",
            family.name()
        )));
    }
    let n_b = common_order(boundaries)?;
    if densities.iter().any(|d| d.order() != n) {
        return Err(Error::ShapeMismatch(format!("densities must have order {n}")));
    }
    let per_boundary: Vec<Vec<DatasetRecord>> = boundaries
        .par_iter()
        .map(|b| {
            let m = assemble_operator(&kind, b, n, q)?;
            let gamma = b.to_gamma_vec();
            densities
                .iter()
                .map(|phi| {
                    let f = apply_operator(&m, SystemForm::SecondKind, &FieldCoeffs::Real(phi.clone()))?;
                    Ok(DatasetRecord {
                        gamma: gamma.clone(),
                        rhs: f.stacked(),
                        density: phi.as_slice().to_vec(),
                        meta: vec![],
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut ds = Dataset::new(family, n_b, n);
    ds.records = per_boundary.into_iter().flatten().collect();
    Ok(ds)
}

/// Relative errors `‖solve(f̃) − φ‖/‖φ‖` of re-solving every record.
/// Interior Neumann densities are unique only up to the equilibrium
/// density; the normalized solve returns `φ − ψ̂ (w·φ)` with
/// `ψ̂ = solve(1)`, so those errors are measured modulo `ψ̂`.
pub fn roundtrip_errors(ds: &Dataset, q: usize) -> Result<Vec<f64>> {
    let groups = group_by_boundary(&ds.records);
    let errs: Vec<Vec<f64>> = groups
        .par_iter()
        .map(|idx| {
            let first = &ds.records[idx[0]];
            let kind = ds.family.kind(&first.meta)?;
            let b = first.boundary()?;
            let m = assemble_solve_operator(&kind, &b, ds.n_f, q)?;
            let solver = SystemSolver::new(&m, kind.form(), kind.shape())?;
            let null = match kind {
                ProblemKind::Inp => Some(solver.solve(&FieldCoeffs::Real(CoeffVec::basis(ds.n_f, 0)))?.stacked()),
                _ => None,
            };
            idx.iter()
                .map(|&i| {
                    let r = &ds.records[i];
                    let phi = solver.solve(&ds.rhs(r)?)?.stacked();
                    let mut d: Vec<f64> = phi.iter().zip(&r.density).map(|(a, b)| a - b).collect();
                    if let Some(psi) = &null {
                        let a = dot(&d, psi) / dot(psi, psi);
                        d.iter_mut().zip(psi).for_each(|(x, p)| *x -= a * p);
                    }
                    let (num, den) = (dot(&d, &d).sqrt(), dot(&r.density, &r.density).sqrt());
                    Ok(if den > 0.0 { num / den } else { num })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().flatten().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Consecutive records sharing a boundary and meta block.
fn group_by_boundary(records: &[DatasetRecord]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if records[g[0]].gamma == r.gamma && records[g[0]].meta == r.meta => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Exterior flow past each boundary for every speed in `v0s`; the density
/// comes from the Galerkin solve.
pub fn generate_potential_flow(boundaries: &[BoundaryCurve], v0s: &[f64], n: usize, q: usize) -> Result<Dataset> {
    let n_b = common_order(boundaries)?;
    let per_boundary: Vec<Vec<DatasetRecord>> = boundaries
        .par_iter()
        .map(|b| {
            let kind = ProblemKind::PotentialFlow { v0: 1.0 };
            let m = assemble_operator(&kind, b, n, q)?;
            let solver = SystemSolver::new(&m, kind.form(), kind.shape())?;
            // Both sides are linear in v0.
            let unit_rhs = build_rhs(&BieProblem::potential_flow(b.clone(), 1.0)?, n)?;
            let unit_phi = solver.solve(&unit_rhs)?;
            let gamma = b.to_gamma_vec();
            Ok(v0s
                .iter()
                .map(|&v0| DatasetRecord {
                    gamma: gamma.clone(),
                    rhs: unit_rhs.stacked().iter().map(|v| v * v0).collect(),
                    density: unit_phi.stacked().iter().map(|v| v * v0).collect(),
                    meta: vec![v0],
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut ds = Dataset::new(ProblemFamily::PotentialFlow, n_b, n);
    for r in per_boundary.into_iter().flatten() {
        ds.push(r)?;
    }
    Ok(ds)
}

/// Displacement `v = (a₁x₁ + b₁x₂, a₂x₁ + b₂x₂)` on the boundary, exact in
/// the curve's coefficients.
pub fn linear_displacement(b: &BoundaryCurve, p: [f64; 4]) -> [CoeffVec; 2] {
    let [a1, b1, a2, b2] = p;
    let comb = |s: f64, t: f64| {
        let d: Vec<f64> = b.x().as_slice().iter().zip(b.y().as_slice()).map(|(x, y)| s * x + t * y).collect();
        CoeffVec::new(b.order(), d).expect("finite combination")
    };
    [comb(a1, b1), comb(a2, b2)]
}

/// Stress of the constant strain `ε = sym ∇v`.
pub fn constant_strain_stress(g: f64, nu: f64, p: [f64; 4]) -> [[f64; 2]; 2] {
    let [a1, b1, a2, b2] = p;
    let shear = 0.5 * (b1 + a2);
    let lambda = 2.0 * g * nu / (1.0 - 2.0 * nu);
    let tr = a1 + b2;
    [
        [2.0 * g * a1 + lambda * tr, 2.0 * g * shear],
        [2.0 * g * shear, 2.0 * g * b2 + lambda * tr],
    ]
}

/// Order-`n` coefficients of the traction `σν` for a linear displacement.
pub fn constant_strain_traction(b: &BoundaryCurve, g: f64, nu: f64, p: [f64; 4], n: usize) -> Result<[CoeffVec; 2]> {
    validate_elastic(g, nu)?;
    let s = constant_strain_stress(g, nu, p);
    let q = rhs_quadrature(n);
    let nodes = b.nodes(q)?;
    let t1: Vec<f64> = nodes.normal.iter().map(|v| s[0][0] * v[0] + s[0][1] * v[1]).collect();
    let t2: Vec<f64> = nodes.normal.iter().map(|v| s[1][0] * v[0] + s[1][1] * v[1]).collect();
    Ok([project(&t1, n)?, project(&t2, n)?])
}

/// Closed-form displacement/traction pairs for linear displacement fields.
/// `rhs` stores `v`, `density` stores `t`, both as two stacked vectors.
pub fn generate_elastostatic(
    boundaries: &[BoundaryCurve],
    field_params: &[[f64; 4]],
    g: f64,
    nu: f64,
    n: usize,
) -> Result<Dataset> {
    validate_elastic(g, nu)?;
    let n_b = common_order(boundaries)?;
    let per_boundary: Vec<Vec<DatasetRecord>> = boundaries
        .par_iter()
        .map(|b| {
            let gamma = b.to_gamma_vec();
            field_params
                .iter()
                .map(|&p| {
                    let [v1, v2] = linear_displacement(b, p);
                    let [t1, t2] = constant_strain_traction(b, g, nu, p, n)?;
                    let mut rhs = v1.resize(n).into_vec();
                    rhs.extend(v2.resize(n).into_vec());
                    let mut density = t1.into_vec();
                    density.extend(t2.into_vec());
                    Ok(DatasetRecord {
                        gamma: gamma.clone(),
                        rhs,
                        density,
                        meta: vec![g, nu, p[0], p[1], p[2], p[3]],
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut ds = Dataset::new(ProblemFamily::Elastostatic, n_b, n);
    for r in per_boundary.into_iter().flatten() {
        ds.push(r)?;
    }
    Ok(ds)
}

/// `count` parameter sets `(a₁, b₁, a₂, b₂)` with entries `~ N(0,1)`.
pub fn sample_field_params(count: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
        .collect()
}

/// Default Galerkin quadrature for Helmholtz problems: resolves both the
/// basis (`4n`) and the kernel oscillation over the curve's length.
pub fn helmholtz_quadrature(b: &BoundaryCurve, k: f64, n: usize) -> Result<usize> {
    let nodes = b.nodes(1024)?;
    let length: f64 = nodes.speed.iter().sum::<f64>() * 2.0 * std::f64::consts::PI / 1024.0;
    let band = (k * length / std::f64::consts::PI).ceil() as usize;
    Ok((2 * (n + band + 32)).max(4 * n).max(512).next_power_of_two())
}

/// Sound-soft scattering records for every boundary and wavenumber,
/// `η = k` coupling. `q = None` picks [`helmholtz_quadrature`].
pub fn generate_helmholtz(
    boundaries: &[BoundaryCurve],
    ks: &[f64],
    d: [f64; 2],
    n_f: usize,
    q: Option<usize>,
) -> Result<Dataset> {
    let n_b = common_order(boundaries)?;
    let jobs: Vec<(usize, f64)> = (0..boundaries.len()).flat_map(|i| ks.iter().map(move |&k| (i, k))).collect();
    let records: Vec<DatasetRecord> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let b = &boundaries[i];
            let p = BieProblem::helmholtz(b.clone(), k, d)?;
            let q = match q {
                Some(q) => q,
                None => helmholtz_quadrature(b, k, n_f)?,
            };
            let m = assemble_operator(&p.kind, b, n_f, q)?;
            let rhs = build_rhs(&p, n_f)?;
            let phi = SystemSolver::new(&m, p.kind.form(), p.kind.shape())?.solve(&rhs)?;
            let ProblemKind::Helmholtz { eta, .. } = p.kind else { unreachable!() };
            Ok(DatasetRecord {
                gamma: b.to_gamma_vec(),
                rhs: rhs.stacked(),
                density: phi.stacked(),
                meta: vec![k, eta, d[0], d[1]],
            })
        })
        .collect::<Result<_>>()?;
    let mut ds = Dataset::new(ProblemFamily::Helmholtz, n_b, n_f);
    for r in records {
        ds.push(r)?;
    }
    Ok(ds)
}

/// Seeded shuffle, then the first `round(fraction · len)` records train.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} not in (0,1)"
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * ds.len() as f64).round() as usize;
    let pick = |ids: &[usize]| ds.with_records(ids.iter().map(|&i| ds.records[i].clone()).collect());
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

// ---------------------------------------------------------------------------
// Files

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size field overflows".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != want {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(want)
            )));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u64()?;
        if v != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn dataset_to_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let rec_len = ds.gamma_len() + 2 * ds.field_len() + ds.family.meta_len();
    let mut out = Vec::with_capacity(60 + 8 * rec_len * ds.len());
    out.extend_from_slice(DATASET_MAGIC);
    for v in [
        FORMAT_VERSION,
        ds.family.tag(),
        ds.n_b as u64,
        ds.n_f as u64,
        ds.family.components() as u64,
        ds.len() as u64,
        ds.family.meta_len() as u64,
    ] {
        put_u64(&mut out, v);
    }
    for r in &ds.records {
        ds.check_record(r)?;
        put_f64s(&mut out, &r.gamma);
        put_f64s(&mut out, &r.rhs);
        put_f64s(&mut out, &r.density);
        put_f64s(&mut out, &r.meta);
    }
    Ok(out)
}

pub fn dataset_from_bytes(buf: &[u8]) -> Result<Dataset> {
    let mut c = Cursor { buf, pos: 0 };
    c.magic(DATASET_MAGIC)?;
    c.version()?;
    let family = ProblemFamily::from_tag(c.u64()?)?;
    let n_b = c.usize()?;
    let n_f = c.usize()?;
    let components = c.usize()?;
    let count = c.usize()?;
    let meta_len = c.usize()?;
    if components != family.components() || meta_len != family.meta_len() {
        return Err(Error::Format(format!(
            "header ({components} components, {meta_len} meta) inconsistent with {}",
            family.name()
        )));
    }
    let mut ds = Dataset::new(family, n_b, n_f);
    let (gl, fl) = (ds.gamma_len(), ds.field_len());
    let rec_bytes = 8 * (gl + 2 * fl + meta_len);
    if (buf.len() - c.pos) / rec_bytes.max(1) < count {
        return Err(Error::Format(format!("header announces {count} records, file is shorter")));
    }
    ds.records.reserve(count);
    for _ in 0..count {
        ds.records.push(DatasetRecord {
            gamma: c.f64s(gl)?,
            rhs: c.f64s(fl)?,
            density: c.f64s(fl)?,
            meta: c.f64s(meta_len)?,
        });
    }
    c.finish()?;
    Ok(ds)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&dataset_to_bytes(ds)?)?;
    w.flush()?;
    Ok(())
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_bytes(&read_all(path)?)
}

pub fn boundaries_to_bytes(n: usize, boundaries: &[BoundaryCurve]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(BOUNDARY_MAGIC);
    put_u64(&mut out, FORMAT_VERSION);
    put_u64(&mut out, n as u64);
    put_u64(&mut out, boundaries.len() as u64);
    for b in boundaries {
        if b.order() != n {
            return Err(Error::ShapeMismatch(format!("boundary of order {} in an order-{n} file", b.order())));
        }
        put_f64s(&mut out, &b.to_gamma_vec());
    }
    Ok(out)
}

pub fn boundaries_from_bytes(buf: &[u8]) -> Result<(usize, Vec<BoundaryCurve>)> {
    let mut c = Cursor { buf, pos: 0 };
    c.magic(BOUNDARY_MAGIC)?;
    c.version()?;
    let n = c.usize()?;
    let count = c.usize()?;
    let len = 2 * (2 * n + 1);
    if (buf.len() - c.pos) / (8 * len) < count {
        return Err(Error::Format(format!("header announces {count} boundaries, file is shorter")));
    }
    let out = (0..count)
        .map(|_| BoundaryCurve::from_gamma_vec(&c.f64s(len)?))
        .collect::<Result<Vec<_>>>()?;
    c.finish()?;
    Ok((n, out))
}

pub fn write_boundaries(path: &Path, n: usize, boundaries: &[BoundaryCurve]) -> Result<()> {
    std::fs::write(path, boundaries_to_bytes(n, boundaries)?)?;
    Ok(())
}

pub fn read_boundaries(path: &Path) -> Result<(usize, Vec<BoundaryCurve>)> {
    boundaries_from_bytes(&read_all(path)?)
}

fn meta_names(family: ProblemFamily) -> &'static [&'static str] {
    match family {
        ProblemFamily::PotentialFlow => &["v0"],
        ProblemFamily::Elastostatic => &["G", "nu", "a1", "b1", "a2", "b2"],
        ProblemFamily::Helmholtz => &["k", "eta", "d1", "d2"],
        _ => &[],
    }
}

/// CSV with columns `kind, meta…, gamma_*, rhs_*, density_*`.
pub fn export_csv<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["kind".to_string()];
    header.extend(meta_names(ds.family).iter().map(|s| s.to_string()));
    header.extend((0..ds.gamma_len()).map(|i| format!("gamma_{i}")));
    header.extend((0..ds.field_len()).map(|i| format!("rhs_{i}")));
    header.extend((0..ds.field_len()).map(|i| format!("density_{i}")));
    wr.write_record(&header).map_err(csv_err)?;
    for r in &ds.records {
        let row = std::iter::once(ds.family.name().to_string()).chain(
            r.meta
                .iter()
                .chain(&r.gamma)
                .chain(&r.rhs)
                .chain(&r.density)
                .map(|v| v.to_string()),
        );
        wr.write_record(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
